//! Exact affinity construction and brute-force filtering.
//!
//! Everything here is the ground truth the fast operators are measured
//! against, so summation order is fixed (ascending neighbor index) and every
//! pair weight is computed by a single function shared by all routes. That
//! makes the windowed filters, the dense matvec and the NLM operator agree
//! bit for bit rather than merely to rounding.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{EigenResult, Mode};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::operator::{check_len, CutOperator, OperatorState};

/// Default pixel cap for the dense oracle (64 x 64).
pub const DENSE_PIXEL_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Radius {
    /// Chebyshev (square-window) radius in pixels.
    Bounded(usize),
    Unbounded,
}

impl Radius {
    #[inline]
    pub fn admits(self, dx: usize, dy: usize) -> bool {
        match self {
            Radius::Bounded(r) => dx <= r && dy <= r,
            Radius::Unbounded => true,
        }
    }
}

/// Spatial x range Gaussian affinity parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffinityConfig {
    pub sigma_x: f64,
    pub sigma_i: f64,
    pub radius: Radius,
    pub self_weight_included: bool,
}

impl AffinityConfig {
    pub fn new(sigma_x: f64, sigma_i: f64, radius: Radius) -> Self {
        Self {
            sigma_x,
            sigma_i,
            radius,
            self_weight_included: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_x > 0.0) || !(self.sigma_i > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sigmas must be positive (sigma_x = {}, sigma_i = {})",
                self.sigma_x, self.sigma_i
            )));
        }
        if self.radius == Radius::Bounded(0) {
            return Err(Error::InvalidArgument("radius must be at least 1".into()));
        }
        Ok(())
    }
}

/// Patch-similarity affinity parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchConfig {
    pub patch_radius: usize,
    pub sigma_n: f64,
    pub sigma_x: f64,
    pub search_radius: usize,
    pub gaussian_patch_weighting: bool,
}

impl PatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_n > 0.0) || !(self.sigma_x > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sigmas must be positive (sigma_n = {}, sigma_x = {})",
                self.sigma_n, self.sigma_x
            )));
        }
        Ok(())
    }

    /// Std-dev of the Gaussian that weights patch offsets.
    pub fn patch_sigma(&self) -> f64 {
        self.patch_radius.max(1) as f64 / 2.0
    }

    /// Row-major `(2p+1)^2` offset weights (all ones without Gaussian weighting).
    pub fn offset_weights(&self) -> Vec<f64> {
        let p = self.patch_radius as isize;
        let s2 = 2.0 * self.patch_sigma().powi(2);
        let mut out = Vec::with_capacity(((2 * p + 1) * (2 * p + 1)) as usize);
        for dy in -p..=p {
            for dx in -p..=p {
                out.push(if self.gaussian_patch_weighting {
                    (-((dx * dx + dy * dy) as f64) / s2).exp()
                } else {
                    1.0
                });
            }
        }
        out
    }
}

#[inline]
fn spatial_term(dx: usize, dy: usize, sigma_x: f64) -> f64 {
    let d2 = (dx * dx + dy * dy) as f64;
    (-d2 / (2.0 * sigma_x * sigma_x)).exp()
}

/// Pixel affinity `exp(-|pi-pj|^2 / 2 sx^2) * exp(-(Ii-Ij)^2 / 2 sI^2)`; zero
/// outside a bounded radius.
#[inline]
pub fn pixel_weight(
    cfg: &AffinityConfig,
    pi: (usize, usize),
    pj: (usize, usize),
    ii: f64,
    ij: f64,
) -> f64 {
    let dx = pi.0.abs_diff(pj.0);
    let dy = pi.1.abs_diff(pj.1);
    if !cfg.radius.admits(dx, dy) {
        return 0.0;
    }
    if dx == 0 && dy == 0 && !cfg.self_weight_included {
        return 0.0;
    }
    let di = ii - ij;
    spatial_term(dx, dy, cfg.sigma_x) * (-(di * di) / (2.0 * cfg.sigma_i * cfg.sigma_i)).exp()
}

/// Clamp-to-edge patch of pixel `(x, y)`, flattened offset-major then channel.
pub(crate) fn patch_vector(img: &Image, x: usize, y: usize, radius: usize) -> Vec<f64> {
    let p = radius as isize;
    let (w, h) = (img.width() as isize, img.height() as isize);
    let mut out = Vec::with_capacity(((2 * p + 1) * (2 * p + 1)) as usize * img.channels());
    for dy in -p..=p {
        let yy = (y as isize + dy).clamp(0, h - 1) as usize;
        for dx in -p..=p {
            let xx = (x as isize + dx).clamp(0, w - 1) as usize;
            for c in 0..img.channels() {
                out.push(img.at(xx, yy, c));
            }
        }
    }
    out
}

/// Weighted squared distance between two patch vectors.
#[inline]
pub(crate) fn patch_distance(a: &[f64], b: &[f64], offset_weights: &[f64], channels: usize) -> f64 {
    let mut acc = 0.0;
    for (k, &g) in offset_weights.iter().enumerate() {
        let base = k * channels;
        let mut s = 0.0;
        for c in 0..channels {
            let d = a[base + c] - b[base + c];
            s += d * d;
        }
        acc += g * s;
    }
    acc
}

#[inline]
pub(crate) fn patch_affinity(cfg: &PatchConfig, dx: usize, dy: usize, distance: f64) -> f64 {
    spatial_term(dx, dy, cfg.sigma_x) * (-distance / (2.0 * cfg.sigma_n * cfg.sigma_n)).exp()
}

/// Patch affinity between flat indices `i` and `j` (no search-window cutoff).
pub fn patch_weight(cfg: &PatchConfig, img: &Image, i: usize, j: usize) -> f64 {
    let (xi, yi) = img.coords(i);
    let (xj, yj) = img.coords(j);
    let a = patch_vector(img, xi, yi, cfg.patch_radius);
    let b = patch_vector(img, xj, yj, cfg.patch_radius);
    let dist = patch_distance(&a, &b, &cfg.offset_weights(), img.channels());
    patch_affinity(cfg, xi.abs_diff(xj), yi.abs_diff(yj), dist)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weighting {
    Pixel(AffinityConfig),
    /// Patch weights, truncated to the Chebyshev search window.
    Patch(PatchConfig),
}

/// Explicit `n x n` affinity with its degree vector.
#[derive(Debug, Clone)]
pub struct DenseAffinity {
    n: usize,
    w: Vec<f64>,
    d: Vec<f64>,
    state: OperatorState,
}

impl DenseAffinity {
    /// Wraps an explicit symmetric matrix (row-major). Used for synthetic graphs.
    pub fn from_matrix(n: usize, w: Vec<f64>) -> Result<Self> {
        check_len(n * n, w.len())?;
        for i in 0..n {
            for j in 0..i {
                if w[i * n + j] != w[j * n + i] {
                    return Err(Error::InvalidArgument(format!(
                        "matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        if w.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::InvalidArgument(
                "affinities must be nonnegative".into(),
            ));
        }
        let d = row_sums(n, &w);
        Ok(Self {
            n,
            w,
            d,
            state: OperatorState::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.w
    }

    pub fn degrees(&self) -> &[f64] {
        &self.d
    }

    /// Principal submatrix on `indices` (sorted).
    pub fn submatrix(&self, indices: &[usize]) -> DenseAffinity {
        let m = indices.len();
        let mut w = Vec::with_capacity(m * m);
        for &i in indices {
            for &j in indices {
                w.push(self.weight(i, j));
            }
        }
        let d = row_sums(m, &w);
        DenseAffinity {
            n: m,
            w,
            d,
            state: OperatorState::new(),
        }
    }

    /// Plain-text `(i, j, w)` triplets of the nonzero upper triangle.
    pub fn write_triplets(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "# i j w  (n = {})", self.n)?;
        for i in 0..self.n {
            for j in i..self.n {
                let x = self.weight(i, j);
                if x != 0.0 {
                    writeln!(out, "{i} {j} {x:.17e}")?;
                }
            }
        }
        Ok(())
    }
}

fn row_sums(n: usize, w: &[f64]) -> Vec<f64> {
    w.chunks_exact(n.max(1))
        .take(n)
        .map(|row| row.iter().sum())
        .collect()
}

impl CutOperator for DenseAffinity {
    fn len(&self) -> usize {
        self.n
    }

    fn apply_w(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n, "dense operator input length");
        self.state.count(1);
        matvec(self.n, &self.w, v)
    }

    fn degree(&self) -> &[f64] {
        &self.d
    }

    fn applications(&self) -> usize {
        self.state.applications()
    }
}

fn matvec(n: usize, w: &[f64], v: &[f64]) -> Vec<f64> {
    let row = |i: usize| -> f64 {
        let r = &w[i * n..(i + 1) * n];
        let mut acc = 0.0;
        for (a, b) in r.iter().zip(v) {
            acc += a * b;
        }
        acc
    };
    if n >= 256 {
        (0..n).into_par_iter().map(row).collect()
    } else {
        (0..n).map(row).collect()
    }
}

pub fn build_dense_affinity(img: &Image, weighting: Weighting) -> Result<DenseAffinity> {
    build_dense_affinity_capped(img, weighting, DENSE_PIXEL_CAP)
}

pub fn build_dense_affinity_capped(
    img: &Image,
    weighting: Weighting,
    cap: usize,
) -> Result<DenseAffinity> {
    let n = img.pixel_count();
    if n > cap {
        return Err(Error::OracleCapExceeded { pixels: n, cap });
    }
    let mut w = vec![0.0; n * n];
    match weighting {
        Weighting::Pixel(cfg) => {
            cfg.validate()?;
            if !img.is_gray() {
                return Err(Error::InvalidArgument(
                    "pixel affinity needs a grayscale image".into(),
                ));
            }
            let data = img.data();
            for i in 0..n {
                for j in i..n {
                    let x = pixel_weight(&cfg, img.coords(i), img.coords(j), data[i], data[j]);
                    w[i * n + j] = x;
                    w[j * n + i] = x;
                }
            }
        }
        Weighting::Patch(cfg) => {
            cfg.validate()?;
            let patches: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    let (x, y) = img.coords(i);
                    patch_vector(img, x, y, cfg.patch_radius)
                })
                .collect();
            let g = cfg.offset_weights();
            let window = Radius::Bounded(cfg.search_radius);
            for i in 0..n {
                let (xi, yi) = img.coords(i);
                for j in i..n {
                    let (xj, yj) = img.coords(j);
                    let (dx, dy) = (xi.abs_diff(xj), yi.abs_diff(yj));
                    if !window.admits(dx, dy) {
                        continue;
                    }
                    let dist = patch_distance(&patches[i], &patches[j], &g, img.channels());
                    let x = patch_affinity(&cfg, dx, dy, dist);
                    w[i * n + j] = x;
                    w[j * n + i] = x;
                }
            }
        }
    }
    let d = row_sums(n, &w);
    Ok(DenseAffinity {
        n,
        w,
        d,
        state: OperatorState::new(),
    })
}

/// Exact `W v` in ascending column order.
pub fn dense_apply(a: &DenseAffinity, v: &[f64]) -> Result<Vec<f64>> {
    check_len(a.n, v.len())?;
    Ok(a.apply_w(v))
}

/// Window sums `(sum_j w_ij v_j, sum_j w_ij)` over the `(2r+1)^2` square
/// around every pixel, visiting neighbors in ascending flat index.
pub fn brute_bilateral(
    guidance: &Image,
    v: &[f64],
    cfg: &AffinityConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    cfg.validate()?;
    let r = match cfg.radius {
        Radius::Bounded(r) => r,
        Radius::Unbounded => {
            return Err(Error::InvalidArgument(
                "brute-force bilateral needs a finite radius; use the dense oracle".into(),
            ))
        }
    };
    if !guidance.is_gray() {
        return Err(Error::InvalidArgument(
            "bilateral guidance must be grayscale".into(),
        ));
    }
    check_len(guidance.pixel_count(), v.len())?;
    let table = SpatialTable::new(cfg.sigma_x, r);
    let ones = vec![1.0; v.len()];
    let mut sums = windowed_bilateral(guidance, &[v, &ones], cfg, &table);
    let den = sums.pop().unwrap_or_default();
    let num = sums.pop().unwrap_or_default();
    Ok((num, den))
}

/// Precomputed spatial Gaussian over a square window. Values are produced by
/// the same expression as [`pixel_weight`], so products match it exactly.
#[derive(Debug, Clone)]
struct SpatialTable {
    r: usize,
    values: Vec<f64>,
}

impl SpatialTable {
    fn new(sigma_x: f64, r: usize) -> Self {
        let side = r + 1;
        let mut values = Vec::with_capacity(side * side);
        for dy in 0..=r {
            for dx in 0..=r {
                values.push(spatial_term(dx, dy, sigma_x));
            }
        }
        Self { r, values }
    }

    #[inline]
    fn get(&self, dx: usize, dy: usize) -> f64 {
        self.values[dy * (self.r + 1) + dx]
    }
}

fn windowed_bilateral(
    guidance: &Image,
    vs: &[&[f64]],
    cfg: &AffinityConfig,
    table: &SpatialTable,
) -> Vec<Vec<f64>> {
    let (w, h) = (guidance.width(), guidance.height());
    let g = guidance.data();
    let r = table.r;
    let inv = 1.0 / (2.0 * cfg.sigma_i * cfg.sigma_i);
    let c = vs.len();
    let per_pixel = |i: usize| -> Vec<f64> {
        let (x, y) = (i % w, i / w);
        let gi = g[i];
        let mut acc = vec![0.0; c];
        for yy in y.saturating_sub(r)..=(y + r).min(h - 1) {
            let dy = y.abs_diff(yy);
            for xx in x.saturating_sub(r)..=(x + r).min(w - 1) {
                let dx = x.abs_diff(xx);
                let j = yy * w + xx;
                if j == i && !cfg.self_weight_included {
                    continue;
                }
                let di = gi - g[j];
                let wij = table.get(dx, dy) * (-(di * di) * inv).exp();
                for (a, v) in acc.iter_mut().zip(vs) {
                    *a += wij * v[j];
                }
            }
        }
        acc
    };
    let rows: Vec<Vec<f64>> = (0..w * h).into_par_iter().map(per_pixel).collect();
    (0..c)
        .map(|k| rows.iter().map(|r| r[k]).collect())
        .collect()
}

/// Matrix-free windowed bilateral operator (exact radius-truncated `W`).
#[derive(Debug, Clone)]
pub struct WindowedBilateral {
    guidance: Image,
    cfg: AffinityConfig,
    table: SpatialTable,
    state: OperatorState,
}

impl WindowedBilateral {
    pub fn new(guidance: &Image, cfg: AffinityConfig) -> Result<Self> {
        cfg.validate()?;
        let r = match cfg.radius {
            Radius::Bounded(r) => r,
            Radius::Unbounded => {
                return Err(Error::InvalidArgument(
                    "windowed operator needs a finite radius".into(),
                ))
            }
        };
        Ok(Self {
            guidance: guidance.to_grayscale(),
            cfg,
            table: SpatialTable::new(cfg.sigma_x, r),
            state: OperatorState::new(),
        })
    }
}

impl CutOperator for WindowedBilateral {
    fn len(&self) -> usize {
        self.guidance.pixel_count()
    }

    fn apply_w(&self, v: &[f64]) -> Vec<f64> {
        self.apply_w_block(&[v]).pop().unwrap_or_default()
    }

    fn apply_w_block(&self, vs: &[&[f64]]) -> Vec<Vec<f64>> {
        for v in vs {
            assert_eq!(v.len(), self.len(), "windowed operator input length");
        }
        self.state.count(vs.len());
        windowed_bilateral(&self.guidance, vs, &self.cfg, &self.table)
    }

    fn degree(&self) -> &[f64] {
        self.state
            .degree_with(|| self.apply_w(&vec![1.0; self.len()]))
    }

    fn applications(&self) -> usize {
        self.state.applications()
    }
}

/// Window sums of patch weights over the search window, computing every
/// weight on the fly.
pub fn brute_nlm(guidance: &Image, v: &[f64], cfg: &PatchConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    cfg.validate()?;
    check_len(guidance.pixel_count(), v.len())?;
    let (w, h) = (guidance.width(), guidance.height());
    let r = cfg.search_radius;
    let g = cfg.offset_weights();
    let out: Vec<(f64, f64)> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let pi = patch_vector(guidance, x, y, cfg.patch_radius);
            let (mut num, mut den) = (0.0, 0.0);
            for yy in y.saturating_sub(r)..=(y + r).min(h - 1) {
                for xx in x.saturating_sub(r)..=(x + r).min(w - 1) {
                    let j = yy * w + xx;
                    let pj = patch_vector(guidance, xx, yy, cfg.patch_radius);
                    let dist = patch_distance(&pi, &pj, &g, guidance.channels());
                    let wij = patch_affinity(cfg, x.abs_diff(xx), y.abs_diff(yy), dist);
                    num += wij * v[j];
                    den += wij;
                }
            }
            (num, den)
        })
        .collect();
    Ok(out.into_iter().unzip())
}

/// Keeps each off-diagonal unordered pair with probability `keep_ratio`
/// (both entries together); the diagonal always survives.
pub fn random_sparsify(a: &DenseAffinity, keep_ratio: f64, seed: u64) -> Result<DenseAffinity> {
    if !(keep_ratio > 0.0 && keep_ratio <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "keep_ratio {keep_ratio} outside (0, 1]"
        )));
    }
    let n = a.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = a.w.clone();
    for i in 0..n {
        for j in i + 1..n {
            let u: f64 = rng.random();
            if u >= keep_ratio {
                w[i * n + j] = 0.0;
                w[j * n + i] = 0.0;
            }
        }
    }
    let d = row_sums(n, &w);
    Ok(DenseAffinity {
        n,
        w,
        d,
        state: OperatorState::new(),
    })
}

/// `y^T (D - W) y / y^T D y`, with the numerator evaluated as the pairwise
/// sum `sum_{i<j} w_ij (y_i - y_j)^2` so it is never negative.
pub fn rayleigh_quotient(a: &DenseAffinity, y: &[f64]) -> Result<f64> {
    check_len(a.n, y.len())?;
    let den: f64 = y.iter().zip(&a.d).map(|(v, d)| d * v * v).sum();
    if !(den > 0.0) {
        return Err(Error::InvalidArgument("vector has zero D-norm".into()));
    }
    let n = a.n;
    let mut num = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let diff = y[i] - y[j];
            num += a.weight(i, j) * diff * diff;
        }
    }
    Ok(num / den)
}

/// Full dense eigendecomposition of `N = D^{-1/2} W D^{-1/2}`.
///
/// The known top eigenvector `q = d^{1/2} / |d^{1/2}|` is split off with a
/// Householder reflector before the eigensolve, so the first returned pair is
/// always the constant vector even when the graph is disconnected and
/// eigenvalue 1 is repeated. Vectors are returned back-transformed,
/// `y = D^{-1/2} z`, with `y^T D y = 1`.
pub fn dense_ncut_solve(a: &DenseAffinity, k: usize) -> Result<EigenResult> {
    let n = a.n;
    if k > n || k == 0 {
        return Err(Error::InvalidArgument(format!(
            "requested {k} eigenpairs of a {n}-node graph"
        )));
    }
    let sqrt_d: Vec<f64> = a.d.iter().map(|d| d.sqrt()).collect();
    let norm_n = DMatrix::from_fn(n, n, |i, j| a.weight(i, j) / (sqrt_d[i] * sqrt_d[j]));
    let qn = sqrt_d.iter().map(|x| x * x).sum::<f64>().sqrt();
    let q: Vec<f64> = sqrt_d.iter().map(|x| x / qn).collect();

    // Householder u with H q = -sign(q0) e0.
    let mut u = q.clone();
    let s = if q[0] >= 0.0 { 1.0 } else { -1.0 };
    u[0] += s;
    let uu: f64 = u.iter().map(|x| x * x).sum();
    let beta = 2.0 / uu;
    let uvec = nalgebra::DVector::from_vec(u.clone());
    let p = &norm_n * &uvec * beta;
    let kk = 0.5 * beta * uvec.dot(&p);
    let wv = &p - &uvec * kk;
    let reflected = &norm_n - &uvec * wv.transpose() - &wv * uvec.transpose();

    let mu1 = reflected[(0, 0)];
    let mut pairs: Vec<(f64, Vec<f64>)> = vec![(mu1, q)];
    if n > 1 && k > 1 {
        let sub = reflected.view((1, 1), (n - 1, n - 1)).into_owned();
        let sub = (&sub + sub.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sub);
        let mut order: Vec<usize> = (0..n - 1).collect();
        order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
        for &idx in order.iter().take(k - 1) {
            let s = eig.eigenvectors.column(idx);
            // z = H [0; s]
            let us: f64 = u[1..].iter().zip(s.iter()).map(|(a, b)| a * b).sum();
            let mut z = Vec::with_capacity(n);
            z.push(-beta * u[0] * us);
            for i in 1..n {
                z.push(s[i - 1] - beta * u[i] * us);
            }
            pairs.push((eig.eigenvalues[idx], z));
        }
    }

    let mut mu = Vec::with_capacity(k);
    let mut sym_vectors = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    for (m, mut z) in pairs {
        crate::eigen::canonical_sign(&mut z);
        vectors.push(z.iter().zip(&sqrt_d).map(|(zi, sd)| zi / sd).collect());
        sym_vectors.push(z);
        mu.push(m);
    }
    let lambda = mu.iter().map(|m| 1.0 - m).collect();
    let residuals = vec![0.0; mu.len()];
    let converged = vec![true; mu.len()];
    Ok(EigenResult {
        mode: Mode::Normalized,
        mu,
        lambda,
        vectors,
        sym_vectors,
        residuals,
        converged,
        iterations: 0,
        filter_applications: 0,
    })
}
