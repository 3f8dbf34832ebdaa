//! Matrix-free eigensolvers for cut operators.
//!
//! All solvers work on a symmetric form of the operator (see [`Mode`]) so the
//! Lanczos recurrence is valid; the normalized cut's generalized eigenvectors
//! are recovered by `y = D^{-1/2} z` at the end.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{CutOperator, DEGREE_FLOOR};

/// Which cut the operator is solving for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// `D^{-1/2} W D^{-1/2}`; cut eigenvalue `lambda = 1 - mu`.
    #[default]
    Normalized,
    /// `W` itself; `lambda = mu`.
    Association,
    /// `c I - (D - W)` with `c = 2 max(d)`; `lambda = c - mu`.
    AverageCut,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub k: usize,
    pub tol: f64,
    pub max_iterations: usize,
    pub seed: u64,
    pub mode: Mode,
    pub degree_floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            k: 2,
            tol: 1e-6,
            max_iterations: 300,
            seed: 0,
            mode: Mode::Normalized,
            degree_floor: DEGREE_FLOOR,
        }
    }
}

impl SolverConfig {
    pub fn with_k(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance {} must be positive",
                self.tol
            )));
        }
        Ok(())
    }
}

/// Eigenpairs of a cut operator, `mu` descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    pub mode: Mode,
    /// Operator eigenvalues.
    pub mu: Vec<f64>,
    /// Cut eigenvalues derived from `mu` for the mode.
    pub lambda: Vec<f64>,
    /// Back-transformed vectors (`y = D^{-1/2} z` in normalized mode).
    pub vectors: Vec<Vec<f64>>,
    /// Orthonormal eigenvectors of the symmetric form.
    pub sym_vectors: Vec<Vec<f64>>,
    /// Residual estimates `|A z - mu z|`.
    pub residuals: Vec<f64>,
    pub converged: Vec<bool>,
    /// Solver steps (symmetric-operator applications).
    pub iterations: usize,
    /// All `W` applications charged to the solve, including the degree.
    pub filter_applications: usize,
}

impl EigenResult {
    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }
}

/// Symmetric form of a cut operator with its degree data precomputed.
pub struct SymmetricForm<'a, O: CutOperator + ?Sized> {
    op: &'a O,
    mode: Mode,
    degree: Vec<f64>,
    inv_sqrt_d: Vec<f64>,
    shift: f64,
}

impl<'a, O: CutOperator + ?Sized> SymmetricForm<'a, O> {
    pub fn new(op: &'a O, mode: Mode, degree_floor: f64) -> Result<Self> {
        let raw = op.degree();
        if let Some((i, d)) = raw.iter().enumerate().find(|(_, d)| !(**d >= 0.0)) {
            return Err(Error::Degenerate(format!("degree {d} at node {i}")));
        }
        let degree: Vec<f64> = raw.iter().map(|&d| d.max(degree_floor)).collect();
        if degree.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::Degenerate(
                "nonpositive degree after flooring".into(),
            ));
        }
        let inv_sqrt_d = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
        let shift = 2.0 * degree.iter().cloned().fold(0.0, f64::max);
        Ok(Self {
            op,
            mode,
            degree,
            inv_sqrt_d,
            shift,
        })
    }

    pub fn len(&self) -> usize {
        self.degree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degree.is_empty()
    }

    pub fn degree(&self) -> &[f64] {
        &self.degree
    }

    /// Spectral shift used by [`Mode::AverageCut`].
    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        match self.mode {
            Mode::Normalized => {
                let scaled: Vec<f64> = z.iter().zip(&self.inv_sqrt_d).map(|(a, b)| a * b).collect();
                let w = self.op.apply_w(&scaled);
                w.iter().zip(&self.inv_sqrt_d).map(|(a, b)| a * b).collect()
            }
            Mode::Association => self.op.apply_w(z),
            Mode::AverageCut => {
                let w = self.op.apply_w(z);
                z.iter()
                    .zip(&self.degree)
                    .zip(&w)
                    .map(|((zi, di), wi)| self.shift * zi - (di * zi - wi))
                    .collect()
            }
        }
    }

    /// Cut eigenvalue for an operator eigenvalue.
    pub fn lambda(&self, mu: f64) -> f64 {
        match self.mode {
            Mode::Normalized => 1.0 - mu,
            Mode::Association => mu,
            Mode::AverageCut => self.shift - mu,
        }
    }

    pub fn back_transform(&self, z: &[f64]) -> Vec<f64> {
        match self.mode {
            Mode::Normalized => z.iter().zip(&self.inv_sqrt_d).map(|(a, b)| a * b).collect(),
            _ => z.to_vec(),
        }
    }

    /// Unit vector along `d^{1/2}`, the exact top eigenvector in normalized mode.
    pub fn trivial_vector(&self) -> Vec<f64> {
        let mut q: Vec<f64> = self.degree.iter().map(|d| d.sqrt()).collect();
        normalize(&mut q);
        q
    }
}

/// One application of the symmetric form selected by `mode`.
pub fn symmetric_apply<O: CutOperator + ?Sized>(op: &O, mode: Mode, z: &[f64]) -> Result<Vec<f64>> {
    crate::operator::check_len(op.len(), z.len())?;
    Ok(SymmetricForm::new(op, mode, DEGREE_FLOOR)?.apply(z))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(a: &mut [f64]) -> f64 {
    let n = norm(a);
    if n > 0.0 {
        a.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Two passes of modified Gram-Schmidt; returns the accumulated coefficients.
fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut coeffs = vec![0.0; basis.len()];
    for _ in 0..2 {
        for (c, v) in coeffs.iter_mut().zip(basis) {
            let h = dot(v, w);
            axpy(-h, v, w);
            *c += h;
        }
    }
    coeffs
}

/// Flips `z` so its first entry of at least a tenth of the peak magnitude is positive.
pub fn canonical_sign(z: &mut [f64]) {
    let peak = z.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(first) = z.iter().find(|x| x.abs() >= 0.1 * peak) {
        if *first < 0.0 {
            z.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Seeded uniform `[-1, 1]` start vector orthogonal to `against`; retries the
/// next seeds up to five times if the projection vanishes.
fn start_vector(n: usize, seed: u64, against: &[&[Vec<f64>]]) -> Result<Vec<f64>> {
    for attempt in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
        let mut b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let before = norm(&b);
        for set in against {
            orthogonalize(&mut b, set);
        }
        if normalize(&mut b) > 1e-8 * before {
            return Ok(b);
        }
    }
    Err(Error::Solver(
        "start vector annihilated by deflation after 5 attempts".into(),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerResult {
    pub mu: f64,
    pub z: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Power method `b <- A b / |A b|` on the symmetric form, kept orthogonal to
/// the orthonormal `deflate` set.
pub fn power_iterate<O: CutOperator + ?Sized>(
    op: &O,
    mode: Mode,
    deflate: &[Vec<f64>],
    cfg: &SolverConfig,
) -> Result<PowerResult> {
    cfg.validate()?;
    let form = SymmetricForm::new(op, mode, cfg.degree_floor)?;
    power_on(|z| form.apply(z), form.len(), deflate, cfg)
}

fn power_on(
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
    n: usize,
    deflate: &[Vec<f64>],
    cfg: &SolverConfig,
) -> Result<PowerResult> {
    let mut seed = cfg.seed;
    let mut z = start_vector(n, seed, &[deflate])?;
    let mut iterations = 0;
    let mut restarts = 0;
    let mut mu = 0.0;
    while iterations < cfg.max_iterations {
        let mut w = apply(&z);
        iterations += 1;
        orthogonalize(&mut w, deflate);
        mu = dot(&z, &w);
        let residual = w
            .iter()
            .zip(&z)
            .map(|(a, b)| (a - mu * b).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= cfg.tol * mu.abs().max(1.0) {
            return Ok(PowerResult {
                mu,
                z,
                iterations,
                converged: true,
            });
        }
        if normalize(&mut w) < 1e-14 {
            restarts += 1;
            if restarts >= 5 {
                return Err(Error::Solver(
                    "power iteration annihilated the iterate 5 times".into(),
                ));
            }
            seed = seed.wrapping_add(5);
            z = start_vector(n, seed, &[deflate])?;
            continue;
        }
        z = w;
    }
    Ok(PowerResult {
        mu,
        z,
        iterations,
        converged: false,
    })
}

/// Cyclic Jacobi eigendecomposition of a small dense symmetric matrix
/// (row-major `m x m`). Returns `(values, vectors)` with vectors as columns of
/// a row-major matrix, sorted by descending value.
pub fn jacobi_eigen(a: &[f64], m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = a.to_vec();
    let mut v = vec![0.0; m * m];
    for i in 0..m {
        v[i * m + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * m + j].powi(2))
            .sum();
        let scale: f64 = (0..m).map(|i| a[i * m + i].powi(2)).sum::<f64>() + off;
        if off <= 1e-30 * scale.max(1e-300) {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                let apq = a[p * m + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[p * m + p];
                let aqq = a[q * m + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..m {
                    let akp = a[k * m + p];
                    let akq = a[k * m + q];
                    a[k * m + p] = c * akp - s * akq;
                    a[k * m + q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let apk = a[p * m + k];
                    let aqk = a[q * m + k];
                    a[p * m + k] = c * apk - s * aqk;
                    a[q * m + k] = s * apk + c * aqk;
                }
                for k in 0..m {
                    let vkp = v[k * m + p];
                    let vkq = v[k * m + q];
                    v[k * m + p] = c * vkp - s * vkq;
                    v[k * m + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| a[y * m + y].total_cmp(&a[x * m + x]));
    let values = order.iter().map(|&i| a[i * m + i]).collect();
    let mut vectors = vec![0.0; m * m];
    for (col, &src) in order.iter().enumerate() {
        for row in 0..m {
            vectors[row * m + col] = v[row * m + src];
        }
    }
    (values, vectors)
}

pub(crate) struct KrylovPairs {
    pub theta: Vec<f64>,
    pub z: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub converged: Vec<bool>,
    pub iterations: usize,
}

/// Thick-restart Lanczos with full reorthogonalization for the `k` largest
/// eigenpairs of a symmetric `apply`, restricted to the orthogonal complement
/// of the orthonormal `deflate` set.
///
/// The projected matrix `H = V^T A V` is assembled from the Gram-Schmidt
/// coefficients; before the first restart it is the Lanczos tridiagonal. A
/// cycle holds at most `min(n_eff, max(2k + 10, 30))` basis vectors; on
/// restart the leading Ritz vectors are kept and the last residual continues
/// the recurrence. An invariant subspace (`beta < 1e-12`) is extended by a
/// fresh random vector.
pub(crate) fn lanczos_on(
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
    n: usize,
    deflate: &[Vec<f64>],
    cfg: &SolverConfig,
) -> Result<KrylovPairs> {
    let n_eff = n.saturating_sub(deflate.len());
    let k = cfg.k;
    if k > n_eff {
        return Err(Error::InvalidArgument(format!(
            "requested {k} eigenpairs but only {n_eff} dimensions remain"
        )));
    }
    let m_max = n_eff.min((2 * k + 10).max(30));
    let keep = (k + (m_max - k) / 2)
        .min(m_max.saturating_sub(1))
        .max(k.min(m_max));

    let mut basis: Vec<Vec<f64>> = vec![start_vector(n, cfg.seed, &[deflate])?];
    // h is row-major with stride m_max + 1
    let stride = m_max + 1;
    let mut h = vec![0.0; stride * stride];
    let mut iterations = 0;
    let mut fresh_seed = cfg.seed.wrapping_add(1000);

    loop {
        let j = basis.len() - 1;
        let mut w = apply(&basis[j]);
        iterations += 1;
        let w_norm = norm(&w);
        orthogonalize(&mut w, deflate);
        let coeffs = orthogonalize(&mut w, &basis);
        // the basis carries rounding-level components along the deflated set
        orthogonalize(&mut w, deflate);
        for (i, &c) in coeffs.iter().enumerate() {
            h[i * stride + j] = c;
            h[j * stride + i] = c;
        }
        let beta = norm(&w);

        let dim = basis.len();
        let mut hj = vec![0.0; dim * dim];
        for r in 0..dim {
            hj[r * dim..(r + 1) * dim].copy_from_slice(&h[r * stride..r * stride + dim]);
        }
        let (theta, s) = jacobi_eigen(&hj, dim);
        let residuals: Vec<f64> = (0..dim)
            .map(|c| (beta * s[(dim - 1) * dim + c]).abs())
            .collect();
        let wanted = k.min(dim);
        let converged: Vec<bool> = (0..wanted)
            .map(|c| residuals[c] <= cfg.tol * theta[c].abs().max(1.0))
            .collect();
        let scale = theta.iter().fold(1.0f64, |m, t| m.max(t.abs()));
        let breakdown = beta < 1e-12 * scale;
        let exhausted = dim == n_eff && breakdown;
        // an invariant subspace holds one copy of each repeated eigenvalue, so
        // its Ritz pairs can all look converged while a copy is still missing
        let done = dim >= k && converged.iter().all(|&c| c) && !breakdown;
        if done || exhausted || iterations >= cfg.max_iterations {
            let z = (0..wanted)
                .map(|c| {
                    let mut zc = vec![0.0; n];
                    for (r, v) in basis.iter().enumerate() {
                        axpy(s[r * dim + c], v, &mut zc);
                    }
                    zc
                })
                .collect();
            let converged = if exhausted {
                vec![true; wanted]
            } else {
                converged
            };
            return Ok(KrylovPairs {
                theta: theta[..wanted].to_vec(),
                z,
                residuals: residuals[..wanted].to_vec(),
                converged,
                iterations,
            });
        }

        if breakdown {
            // invariant subspace: continue from a random direction
            let mut fresh = None;
            for _ in 0..5 {
                let cand = start_vector(n, fresh_seed, &[deflate, &basis]);
                fresh_seed = fresh_seed.wrapping_add(5);
                if let Ok(v) = cand {
                    fresh = Some(v);
                    break;
                }
            }
            let Some(v) = fresh else {
                return Err(Error::Solver(
                    "could not extend an invariant Krylov subspace".into(),
                ));
            };
            if dim < m_max {
                for i in 0..dim {
                    h[i * stride + dim] = 0.0;
                    h[dim * stride + i] = 0.0;
                }
                basis.push(v);
                continue;
            }
            // full cycle and breakdown at once: restart on the kept Ritz block plus v
            basis = restart_basis(&basis, &s, keep, dim);
            reset_projection(&mut h, stride, &theta, keep, None);
            basis.push(v);
            continue;
        }

        w.iter_mut().for_each(|x| *x /= beta);
        if beta < 1e-3 * w_norm {
            // dividing by a small beta magnifies rounding along the spanned directions
            orthogonalize(&mut w, deflate);
            orthogonalize(&mut w, &basis);
            normalize(&mut w);
        }
        if dim < m_max {
            basis.push(w);
        } else {
            let couplings: Vec<f64> = (0..keep).map(|c| beta * s[(dim - 1) * dim + c]).collect();
            basis = restart_basis(&basis, &s, keep, dim);
            reset_projection(&mut h, stride, &theta, keep, Some(&couplings));
            basis.push(w);
        }
    }
}

fn restart_basis(basis: &[Vec<f64>], s: &[f64], keep: usize, dim: usize) -> Vec<Vec<f64>> {
    let n = basis[0].len();
    (0..keep)
        .map(|c| {
            let mut y = vec![0.0; n];
            for (r, v) in basis.iter().enumerate() {
                axpy(s[r * dim + c], v, &mut y);
            }
            y
        })
        .collect()
}

fn reset_projection(
    h: &mut [f64],
    stride: usize,
    theta: &[f64],
    keep: usize,
    couplings: Option<&[f64]>,
) {
    h.iter_mut().for_each(|x| *x = 0.0);
    for i in 0..keep {
        h[i * stride + i] = theta[i];
        if let Some(b) = couplings {
            h[i * stride + keep] = b[i];
            h[keep * stride + i] = b[i];
        }
    }
}

fn assemble<O: CutOperator + ?Sized>(
    form: &SymmetricForm<'_, O>,
    mut pairs: Vec<(f64, Vec<f64>, f64, bool)>,
    iterations: usize,
    filter_applications: usize,
) -> EigenResult {
    let mut mu = Vec::with_capacity(pairs.len());
    let mut lambda = Vec::with_capacity(pairs.len());
    let mut vectors = Vec::with_capacity(pairs.len());
    let mut sym_vectors = Vec::with_capacity(pairs.len());
    let mut residuals = Vec::with_capacity(pairs.len());
    let mut converged = Vec::with_capacity(pairs.len());
    for (m, z, r, c) in pairs.iter_mut() {
        canonical_sign(z);
        mu.push(*m);
        lambda.push(form.lambda(*m));
        vectors.push(form.back_transform(z));
        sym_vectors.push(std::mem::take(z));
        residuals.push(*r);
        converged.push(*c);
    }
    EigenResult {
        mode: form.mode,
        mu,
        lambda,
        vectors,
        sym_vectors,
        residuals,
        converged,
        iterations,
        filter_applications,
    }
}

/// Leading `cfg.k` eigenpairs of the symmetric form of `op` by Lanczos.
/// Unconverged pairs are returned with `converged = false`.
pub fn lanczos<O: CutOperator + ?Sized>(op: &O, cfg: &SolverConfig) -> Result<EigenResult> {
    cfg.validate()?;
    let before = op.applications();
    let form = SymmetricForm::new(op, cfg.mode, cfg.degree_floor)?;
    if cfg.k >= form.len().max(1) && form.len() > 1 {
        return Err(Error::InvalidArgument(format!(
            "lanczos needs k < n (k = {}, n = {})",
            cfg.k,
            form.len()
        )));
    }
    let found = lanczos_on(|z| form.apply(z), form.len(), &[], cfg)?;
    let pairs = found
        .theta
        .into_iter()
        .zip(found.z)
        .zip(found.residuals.into_iter().zip(found.converged))
        .map(|((t, z), (r, c))| (t, z, r, c))
        .collect();
    let apps = op.applications() - before;
    Ok(assemble(&form, pairs, found.iterations, apps))
}

/// Normalized-cut eigenpairs: the trivial pair `(mu = 1, y = const)` first,
/// then `cfg.k` nontrivial pairs found by Lanczos on the complement of
/// `d^{1/2}`. Every nontrivial `y` satisfies `y^T d = 0` to 1e-8 relative.
pub fn ncut_eigs<O: CutOperator + ?Sized>(op: &O, cfg: &SolverConfig) -> Result<EigenResult> {
    cfg.validate()?;
    if cfg.mode != Mode::Normalized {
        return Err(Error::InvalidArgument(
            "ncut_eigs requires normalized mode".into(),
        ));
    }
    let before = op.applications();
    let form = SymmetricForm::new(op, Mode::Normalized, cfg.degree_floor)?;
    let n = form.len();
    if cfg.k + 1 > n {
        return Err(Error::InvalidArgument(format!(
            "requested {} nontrivial pairs of a {n}-node graph",
            cfg.k
        )));
    }
    let q = form.trivial_vector();
    let nq = form.apply(&q);
    let mu1 = dot(&q, &nq);
    let r1 = nq
        .iter()
        .zip(&q)
        .map(|(a, b)| (a - mu1 * b).powi(2))
        .sum::<f64>()
        .sqrt();

    let deflate = vec![q.clone()];
    let found = lanczos_on(|z| form.apply(z), n, &deflate, cfg)?;
    let mut pairs = vec![(mu1, q, r1, r1 <= cfg.tol)];
    pairs.extend(
        found
            .theta
            .into_iter()
            .zip(found.z)
            .zip(found.residuals.into_iter().zip(found.converged))
            .map(|((t, z), (r, c))| (t, z, r, c)),
    );
    let apps = op.applications() - before;
    let result = assemble(&form, pairs, found.iterations + 1, apps);

    let d = form.degree();
    let dn = norm(d);
    for (j, y) in result.vectors.iter().enumerate().skip(1) {
        let rel = dot(y, d).abs() / (norm(y) * dn);
        if rel > 1e-8 {
            return Err(Error::Solver(format!(
                "eigenvector {} violates y^T d = 0 (relative {rel:e})",
                j + 1
            )));
        }
    }
    Ok(result)
}
