//! Exact windowed non-local-means operator.
//!
//! Patch distances use `(a - b)^2`, which is exactly symmetric in floating
//! point, so `w_ij == w_ji` bit for bit without pairing the computations.
//! Window sums run in row-major neighbor order, the same order as the
//! brute-force filter and the dense matvec, so all three agree exactly.

use rayon::prelude::*;

use crate::affinity::{patch_affinity, patch_distance, patch_vector, PatchConfig};
use crate::error::Result;
use crate::image::Image;
use crate::operator::{check_len, CutOperator, OperatorState};

/// Weight tables larger than this many entries are not cached.
const TABLE_LIMIT: usize = 1 << 24;

#[derive(Debug, Clone)]
pub struct NlmOperator {
    guidance: Image,
    cfg: PatchConfig,
    patch_len: usize,
    patches: Vec<f64>,
    offset_weights: Vec<f64>,
    /// Per pixel, the full `(2r+1)^2` window of weights (zero off-image).
    table: Option<Vec<f64>>,
    state: OperatorState,
}

pub fn nlm_build(guidance: &Image, cfg: PatchConfig) -> Result<NlmOperator> {
    cfg.validate()?;
    let (w, h) = (guidance.width(), guidance.height());
    let patches: Vec<Vec<f64>> = (0..w * h)
        .into_par_iter()
        .map(|i| patch_vector(guidance, i % w, i / w, cfg.patch_radius))
        .collect();
    let patch_len = patches.first().map_or(0, Vec::len);
    let mut op = NlmOperator {
        guidance: guidance.clone(),
        cfg,
        patch_len,
        patches: patches.concat(),
        offset_weights: cfg.offset_weights(),
        table: None,
        state: OperatorState::new(),
    };
    let side = 2 * cfg.search_radius + 1;
    if (w * h).saturating_mul(side * side) <= TABLE_LIMIT {
        let table: Vec<Vec<f64>> = (0..w * h)
            .into_par_iter()
            .map(|i| {
                let mut row = vec![0.0; side * side];
                op.visit(i, |k, _, wij| row[k] = wij);
                row
            })
            .collect();
        op.table = Some(table.concat());
    }
    Ok(op)
}

impl NlmOperator {
    pub fn config(&self) -> &PatchConfig {
        &self.cfg
    }

    pub fn guidance(&self) -> &Image {
        &self.guidance
    }

    pub fn is_cached(&self) -> bool {
        self.table.is_some()
    }

    fn patch(&self, i: usize) -> &[f64] {
        &self.patches[i * self.patch_len..(i + 1) * self.patch_len]
    }

    /// Calls `f(window slot, j, w_ij)` for every in-image neighbor in
    /// row-major order, computing weights on the fly.
    fn visit(&self, i: usize, mut f: impl FnMut(usize, usize, f64)) {
        let (w, h) = (self.guidance.width(), self.guidance.height());
        let r = self.cfg.search_radius;
        let side = 2 * r + 1;
        let (x, y) = (i % w, i / w);
        let pi = self.patch(i);
        for yy in y.saturating_sub(r)..=(y + r).min(h - 1) {
            for xx in x.saturating_sub(r)..=(x + r).min(w - 1) {
                let j = yy * w + xx;
                let dist = patch_distance(
                    pi,
                    self.patch(j),
                    &self.offset_weights,
                    self.guidance.channels(),
                );
                let wij = patch_affinity(&self.cfg, x.abs_diff(xx), y.abs_diff(yy), dist);
                let slot = (yy + r - y) * side + (xx + r - x);
                f(slot, j, wij);
            }
        }
    }

    fn row_sums(&self, i: usize, vs: &[&[f64]]) -> Vec<f64> {
        let mut acc = vec![0.0; vs.len()];
        let mut add = |j: usize, wij: f64| {
            for (a, v) in acc.iter_mut().zip(vs) {
                *a += wij * v[j];
            }
        };
        match &self.table {
            Some(table) => {
                let (w, h) = (self.guidance.width(), self.guidance.height());
                let r = self.cfg.search_radius;
                let side = 2 * r + 1;
                let row = &table[i * side * side..(i + 1) * side * side];
                let (x, y) = (i % w, i / w);
                for yy in y.saturating_sub(r)..=(y + r).min(h - 1) {
                    for xx in x.saturating_sub(r)..=(x + r).min(w - 1) {
                        add(yy * w + xx, row[(yy + r - y) * side + (xx + r - x)]);
                    }
                }
            }
            None => self.visit(i, |_, j, wij| add(j, wij)),
        }
        acc
    }

    fn sums(&self, vs: &[&[f64]]) -> Vec<Vec<f64>> {
        let rows: Vec<Vec<f64>> = (0..self.len())
            .into_par_iter()
            .map(|i| self.row_sums(i, vs))
            .collect();
        (0..vs.len())
            .map(|k| rows.iter().map(|r| r[k]).collect())
            .collect()
    }
}

/// Window sums `(sum_j w_ij v_j, sum_j w_ij)`.
pub fn nlm_apply(op: &NlmOperator, v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len(op.len(), v.len())?;
    let ones = vec![1.0; v.len()];
    op.state.count(1);
    let mut out = op.sums(&[v, &ones]);
    let den = out.pop().unwrap_or_default();
    let num = out.pop().unwrap_or_default();
    Ok((num, den))
}

pub fn nlm_degree(op: &NlmOperator) -> &[f64] {
    op.degree()
}

impl CutOperator for NlmOperator {
    fn len(&self) -> usize {
        self.guidance.pixel_count()
    }

    fn apply_w(&self, v: &[f64]) -> Vec<f64> {
        self.apply_w_block(&[v]).pop().unwrap_or_default()
    }

    fn apply_w_block(&self, vs: &[&[f64]]) -> Vec<Vec<f64>> {
        for v in vs {
            assert_eq!(v.len(), self.len(), "nlm operator input length");
        }
        self.state.count(vs.len());
        self.sums(vs)
    }

    fn degree(&self) -> &[f64] {
        self.state
            .degree_with(|| self.apply_w(&vec![1.0; self.len()]))
    }

    fn applications(&self) -> usize {
        self.state.applications()
    }
}
