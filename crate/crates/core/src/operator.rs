//! The matrix-free cut operator contract shared by the dense oracle, the
//! bilateral grid and the non-local-means operator.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// A symmetric nonnegative affinity `W` known only through products `W v`.
pub trait CutOperator: Sync {
    /// Dimension (pixel count).
    fn len(&self) -> usize;

    /// Unnormalized product `W v`.
    fn apply_w(&self, v: &[f64]) -> Vec<f64>;

    /// `W v` for several vectors at once. Implementations that can share work
    /// across channels override this.
    fn apply_w_block(&self, vs: &[&[f64]]) -> Vec<Vec<f64>> {
        vs.iter().map(|v| self.apply_w(v)).collect()
    }

    /// Degree vector `d = W 1`, cached after the first call.
    fn degree(&self) -> &[f64];

    /// Number of `W` applications so far, including the one behind `degree`.
    fn applications(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `D^{-1} W v`, the normalized filter.
    fn filter(&self, v: &[f64]) -> Vec<f64> {
        let wv = self.apply_w(v);
        wv.iter()
            .zip(self.degree())
            .map(|(a, d)| a / d.max(DEGREE_FLOOR))
            .collect()
    }
}

pub const DEGREE_FLOOR: f64 = 1e-12;

/// Application counter plus degree cache; embedded by every operator.
#[derive(Debug, Default)]
pub struct OperatorState {
    applications: AtomicUsize,
    degree: OnceLock<Vec<f64>>,
}

impl OperatorState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self, n: usize) {
        self.applications.fetch_add(n, Ordering::Relaxed);
    }

    pub fn applications(&self) -> usize {
        self.applications.load(Ordering::Relaxed)
    }

    pub fn degree_with(&self, compute: impl FnOnce() -> Vec<f64>) -> &[f64] {
        self.degree.get_or_init(compute)
    }
}

impl Clone for OperatorState {
    fn clone(&self) -> Self {
        let state = Self::new();
        state.count(self.applications());
        if let Some(d) = self.degree.get() {
            let _ = state.degree.set(d.clone());
        }
        state
    }
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::SizeMismatch { expected, actual });
    }
    Ok(())
}

/// `W` restricted to a pixel subset `S`: the principal submatrix `W[S, S]`,
/// realized by zero-padding the input and reading the output only on `S`.
pub struct Restricted<'a, O: CutOperator + ?Sized> {
    inner: &'a O,
    indices: Vec<usize>,
    state: OperatorState,
}

impl<'a, O: CutOperator + ?Sized> Restricted<'a, O> {
    pub fn new(inner: &'a O, indices: Vec<usize>) -> Self {
        debug_assert!(
            indices.windows(2).all(|w| w[0] < w[1]),
            "indices must be sorted"
        );
        Self {
            inner,
            indices,
            state: OperatorState::new(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    fn extend(&self, v: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.inner.len()];
        for (&i, &x) in self.indices.iter().zip(v) {
            full[i] = x;
        }
        full
    }

    fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|&i| full[i]).collect()
    }
}

impl<O: CutOperator + ?Sized> CutOperator for Restricted<'_, O> {
    fn len(&self) -> usize {
        self.indices.len()
    }

    fn apply_w(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(
            v.len(),
            self.indices.len(),
            "restricted operator input length"
        );
        self.state.count(1);
        self.gather(&self.inner.apply_w(&self.extend(v)))
    }

    fn apply_w_block(&self, vs: &[&[f64]]) -> Vec<Vec<f64>> {
        self.state.count(vs.len());
        let full: Vec<Vec<f64>> = vs.iter().map(|v| self.extend(v)).collect();
        let refs: Vec<&[f64]> = full.iter().map(Vec::as_slice).collect();
        self.inner
            .apply_w_block(&refs)
            .iter()
            .map(|out| self.gather(out))
            .collect()
    }

    fn degree(&self) -> &[f64] {
        self.state
            .degree_with(|| self.apply_w(&vec![1.0; self.indices.len()]))
    }

    fn applications(&self) -> usize {
        self.state.applications()
    }
}
