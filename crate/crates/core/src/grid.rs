//! Bilateral grid: splat, blur, slice on a coarse `(x, y, intensity)` lattice.
//!
//! Splat and slice use the same trilinear weights, so the implied operator is
//! `W_hat = S^T G S` with a symmetric blur `G`. Slice output is scaled by
//! the mass of a unit Gaussian so that `W_hat` approximates the unnormalized
//! affinity rather than a mass-normalized kernel, and the smeared self weight
//! is replaced by the exact 1 (a diagonal change, so symmetry survives).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::operator::{check_len, CutOperator, OperatorState, DEGREE_FLOOR};

pub const PAD: usize = 2;

/// Default blur of one cell per axis.
pub const DEFAULT_BLUR_SIGMA: f64 = 1.0;

/// Trilinear splat and slice each add 1/6 cell^2 of variance; blurring with
/// `sqrt(2/3)` cells brings the effective kernel back to one cell. Tighter
/// operator match, but the default's slightly wider kernel converges faster.
pub const COMPENSATED_BLUR_SIGMA: f64 = 0.816496580927726;
const TAPS: usize = 5;

/// Unnormalized taps `exp(-k^2 / 2 s^2)` for `k = -2..=2`.
fn raw_taps(sigma: f64) -> [f64; TAPS] {
    let mut g = [0.0; TAPS];
    for (i, t) in g.iter_mut().enumerate() {
        let k = i as f64 - 2.0;
        *t = (-k * k / (2.0 * sigma * sigma)).exp();
    }
    g
}

/// Sum of the unit-sigma raw taps, about 2.483732.
pub fn tap_sum() -> f64 {
    raw_taps(1.0).iter().sum()
}

/// Normalized unit-sigma blur kernel.
pub fn blur_kernel() -> [f64; TAPS] {
    blur_kernel_with(1.0)
}

pub fn blur_kernel_with(sigma: f64) -> [f64; TAPS] {
    let g = raw_taps(sigma);
    let s: f64 = g.iter().sum();
    g.map(|t| t / s)
}

/// Slice gain: the mass of a unit Gaussian per axis, so that `W_hat` carries
/// the same total weight as the continuous affinity it approximates.
pub fn gain() -> f64 {
    (2.0 * std::f64::consts::PI).powf(1.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub sigma_x: f64,
    pub sigma_i: f64,
    pub spatial_step: f64,
    pub range_step: f64,
    pub pad: usize,
    /// Blur standard deviation in cells.
    pub blur_sigma: f64,
    /// Replace the grid's smeared self weight `W_hat_ii` with the exact 1.
    pub exact_diagonal: bool,
    /// Sequential splat in pixel order; otherwise fixed-chunk partial grids.
    pub deterministic: bool,
}

impl GridConfig {
    pub fn new(sigma_x: f64, sigma_i: f64) -> Self {
        Self {
            sigma_x,
            sigma_i,
            spatial_step: sigma_x,
            range_step: sigma_i,
            pad: PAD,
            blur_sigma: DEFAULT_BLUR_SIGMA,
            exact_diagonal: true,
            deterministic: false,
        }
    }

    pub fn deterministic(mut self, on: bool) -> Self {
        self.deterministic = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spatial_step > 0.0) || !self.spatial_step.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "spatial step {} must be positive",
                self.spatial_step
            )));
        }
        if !(self.blur_sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "blur sigma {} must be positive",
                self.blur_sigma
            )));
        }
        if !(self.range_step > 0.0 && self.range_step <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "range step {} outside (0, 1]",
                self.range_step
            )));
        }
        Ok(())
    }
}

/// `(gx, gy, gr)` including `pad` cells on every side.
pub fn grid_dims(width: usize, height: usize, cfg: &GridConfig) -> (usize, usize, usize) {
    let axis =
        |len: usize, step: f64| ((len.max(1) - 1) as f64 / step).floor() as usize + 1 + 2 * cfg.pad;
    (
        axis(width, cfg.spatial_step),
        axis(height, cfg.spatial_step),
        (1.0 / cfg.range_step).floor() as usize + 1 + 2 * cfg.pad,
    )
}

/// Eight `(cell, weight)` pairs per pixel, shared by splat and slice.
#[derive(Debug, Clone)]
struct Stencil {
    dims: (usize, usize, usize),
    cells: Vec<[u32; 8]>,
    weights: Vec<[f64; 8]>,
}

impl Stencil {
    fn new(guidance: &Image, cfg: &GridConfig) -> Self {
        let dims = grid_dims(guidance.width(), guidance.height(), cfg);
        let (gx, gy, _) = dims;
        let pad = cfg.pad as f64;
        let w = guidance.width();
        let data = guidance.data();
        let (cells, weights) = (0..guidance.pixel_count())
            .map(|i| {
                let pos = [
                    (i % w) as f64 / cfg.spatial_step + pad,
                    (i / w) as f64 / cfg.spatial_step + pad,
                    data[i] / cfg.range_step + pad,
                ];
                let base = pos.map(|p| p.floor() as usize);
                let frac = [0, 1, 2].map(|a| pos[a] - base[a] as f64);
                let mut c = [0u32; 8];
                let mut wt = [0.0; 8];
                for corner in 0..8 {
                    let mut cell = [0usize; 3];
                    let mut weight = 1.0;
                    for a in 0..3 {
                        let hi = (corner >> a) & 1 == 1;
                        cell[a] = base[a] + hi as usize;
                        weight *= if hi { frac[a] } else { 1.0 - frac[a] };
                    }
                    c[corner] = ((cell[2] * gy + cell[1]) * gx + cell[0]) as u32;
                    wt[corner] = weight;
                }
                (c, wt)
            })
            .unzip();
        Self {
            dims,
            cells,
            weights,
        }
    }

    fn cell_count(&self) -> usize {
        self.dims.0 * self.dims.1 * self.dims.2
    }

    /// `W_hat_ii`: every corner pair of one pixel differs by at most one
    /// cell per axis, so the blur entry is a product of kernel taps.
    fn diagonal(&self, kernel: &[f64; TAPS], gain: f64) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| {
                let mut acc = 0.0;
                for p in 0..8 {
                    for q in 0..8 {
                        let mut g = 1.0;
                        for a in 0..3 {
                            let d = ((q >> a) & 1) as isize - ((p >> a) & 1) as isize;
                            g *= kernel[(2 + d) as usize];
                        }
                        acc += w[p] * w[q] * g;
                    }
                }
                gain * acc
            })
            .collect()
    }
}

/// Lattice channels after splat or blur.
#[derive(Debug, Clone, PartialEq)]
pub struct BilateralGrid {
    pub dims: (usize, usize, usize),
    pub blur_sigma: f64,
    pub value_channels: Vec<Vec<f64>>,
    pub homogeneous_channel: Vec<f64>,
}

impl BilateralGrid {
    pub fn cell_count(&self) -> usize {
        self.dims.0 * self.dims.1 * self.dims.2
    }
}

fn splat_channel(st: &Stencil, v: &[f64], deterministic: bool) -> Vec<f64> {
    let cells = st.cell_count();
    let deposit = |out: &mut [f64], range: std::ops::Range<usize>| {
        for i in range {
            let vi = v[i];
            for (c, w) in st.cells[i].iter().zip(&st.weights[i]) {
                out[*c as usize] += w * vi;
            }
        }
    };
    let n = v.len();
    // chunking depends only on n, so parallel results do not vary with threads
    let chunks = n.div_ceil(4096).clamp(1, 8);
    if deterministic || chunks == 1 {
        let mut out = vec![0.0; cells];
        deposit(&mut out, 0..n);
        return out;
    }
    let size = n.div_ceil(chunks);
    let partials: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut part = vec![0.0; cells];
            deposit(&mut part, c * size..((c + 1) * size).min(n));
            part
        })
        .collect();
    let mut out = vec![0.0; cells];
    for part in &partials {
        out.par_iter_mut().zip(part).for_each(|(o, p)| *o += p);
    }
    out
}

fn blur_channel(dims: (usize, usize, usize), g: &[f64; TAPS], data: &[f64]) -> Vec<f64> {
    let (gx, gy, gr) = dims;
    let plane = gx * gy;
    let mut cur = data.to_vec();
    for (stride, len) in [(1usize, gx), (gx, gy), (plane, gr)] {
        let src = cur;
        let mut out = vec![0.0; src.len()];
        out.par_chunks_mut(plane).enumerate().for_each(|(z, slab)| {
            for (local, o) in slab.iter_mut().enumerate() {
                let idx = z * plane + local;
                let coord = match stride {
                    1 => local % gx,
                    s if s == gx => local / gx,
                    _ => z,
                };
                let mut acc = 0.0;
                for (t, gk) in g.iter().enumerate() {
                    let off = t as isize - 2;
                    let c = coord as isize + off;
                    if c < 0 || c >= len as isize {
                        continue;
                    }
                    acc += gk * src[(idx as isize + off * stride as isize) as usize];
                }
                *o = acc;
            }
        });
        cur = out;
    }
    cur
}

fn slice_channel(st: &Stencil, grid: &[f64], gain: f64) -> Vec<f64> {
    st.cells
        .par_iter()
        .zip(&st.weights)
        .map(|(c, w)| {
            let mut acc = 0.0;
            for (ci, wi) in c.iter().zip(w) {
                acc += wi * grid[*ci as usize];
            }
            gain * acc
        })
        .collect()
}

fn check_guidance(guidance: &Image) -> Result<()> {
    if !guidance.is_gray() {
        return Err(Error::InvalidArgument(
            "bilateral grid guidance must be grayscale".into(),
        ));
    }
    Ok(())
}

/// Trilinear deposit of every value channel plus the homogeneous channel.
pub fn splat(guidance: &Image, values: &[&[f64]], cfg: &GridConfig) -> Result<BilateralGrid> {
    cfg.validate()?;
    check_guidance(guidance)?;
    for v in values {
        check_len(guidance.pixel_count(), v.len())?;
    }
    let st = Stencil::new(guidance, cfg);
    let ones = vec![1.0; guidance.pixel_count()];
    Ok(BilateralGrid {
        dims: st.dims,
        blur_sigma: cfg.blur_sigma,
        value_channels: values
            .iter()
            .map(|v| splat_channel(&st, v, cfg.deterministic))
            .collect(),
        homogeneous_channel: splat_channel(&st, &ones, cfg.deterministic),
    })
}

/// Separable 5-tap Gaussian along x, y and range with zero boundary.
pub fn blur(grid: &BilateralGrid) -> BilateralGrid {
    let g = blur_kernel_with(grid.blur_sigma);
    BilateralGrid {
        dims: grid.dims,
        blur_sigma: grid.blur_sigma,
        value_channels: grid
            .value_channels
            .iter()
            .map(|c| blur_channel(grid.dims, &g, c))
            .collect(),
        homogeneous_channel: blur_channel(grid.dims, &g, &grid.homogeneous_channel),
    }
}

/// Trilinear readout: `(W_hat v per channel, W_hat 1)`.
pub fn slice(
    grid: &BilateralGrid,
    guidance: &Image,
    cfg: &GridConfig,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    check_guidance(guidance)?;
    let st = Stencil::new(guidance, cfg);
    if st.dims != grid.dims {
        return Err(Error::InvalidArgument(format!(
            "grid dims {:?} do not match guidance dims {:?}",
            grid.dims, st.dims
        )));
    }
    Ok((
        grid.value_channels
            .iter()
            .map(|c| slice_channel(&st, c, gain()))
            .collect(),
        slice_channel(&st, &grid.homogeneous_channel, gain()),
    ))
}

/// Splat, blur, slice in one call, plus the diagonal correction when enabled.
pub fn grid_apply(
    guidance: &Image,
    values: &[&[f64]],
    cfg: &GridConfig,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let (mut num, mut den) = slice(&blur(&splat(guidance, values, cfg)?), guidance, cfg)?;
    if cfg.exact_diagonal {
        let st = Stencil::new(guidance, cfg);
        let diag = st.diagonal(&blur_kernel_with(cfg.blur_sigma), gain());
        for (out, v) in num.iter_mut().zip(values) {
            correct_diagonal(out, v, &diag);
        }
        correct_diagonal(&mut den, &vec![1.0; diag.len()], &diag);
    }
    Ok((num, den))
}

fn correct_diagonal(out: &mut [f64], v: &[f64], diag: &[f64]) {
    for ((o, x), d) in out.iter_mut().zip(v).zip(diag) {
        *o += (1.0 - d) * x;
    }
}

/// Normalized grid bilateral filter `D_hat^{-1} W_hat v`.
pub fn grid_filter(guidance: &Image, v: &[f64], cfg: &GridConfig) -> Result<Vec<f64>> {
    let (mut num, den) = grid_apply(guidance, &[v], cfg)?;
    let num = num.pop().unwrap_or_default();
    Ok(num
        .iter()
        .zip(&den)
        .map(|(a, d)| a / d.max(DEGREE_FLOOR))
        .collect())
}

/// Matrix-free `W_hat` with the stencil built once.
#[derive(Debug, Clone)]
pub struct GridOperator {
    cfg: GridConfig,
    stencil: Stencil,
    kernel: [f64; TAPS],
    diagonal: Option<Vec<f64>>,
    state: OperatorState,
}

impl GridOperator {
    pub fn new(guidance: &Image, cfg: GridConfig) -> Result<Self> {
        cfg.validate()?;
        let guidance = guidance.to_grayscale();
        let stencil = Stencil::new(&guidance, &cfg);
        let kernel = blur_kernel_with(cfg.blur_sigma);
        let diagonal = cfg
            .exact_diagonal
            .then(|| stencil.diagonal(&kernel, gain()));
        Ok(Self {
            stencil,
            cfg,
            kernel,
            diagonal,
            state: OperatorState::new(),
        })
    }

    pub fn config(&self) -> &GridConfig {
        &self.cfg
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.stencil.dims
    }

    fn run(&self, v: &[f64]) -> Vec<f64> {
        let splatted = splat_channel(&self.stencil, v, self.cfg.deterministic);
        let blurred = blur_channel(self.stencil.dims, &self.kernel, &splatted);
        let mut out = slice_channel(&self.stencil, &blurred, gain());
        if let Some(diag) = &self.diagonal {
            correct_diagonal(&mut out, v, diag);
        }
        out
    }
}

impl CutOperator for GridOperator {
    fn len(&self) -> usize {
        self.stencil.cells.len()
    }

    fn apply_w(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.len(), "grid operator input length");
        self.state.count(1);
        self.run(v)
    }

    fn degree(&self) -> &[f64] {
        self.state
            .degree_with(|| self.apply_w(&vec![1.0; self.len()]))
    }

    fn applications(&self) -> usize {
        self.state.applications()
    }
}
