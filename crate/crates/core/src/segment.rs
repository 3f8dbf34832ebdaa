//! Operator construction, eigensolve, discretization and cut scoring.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::affinity::{
    build_dense_affinity, AffinityConfig, PatchConfig, Radius, Weighting, WindowedBilateral,
    DENSE_PIXEL_CAP,
};
use crate::eigen::{ncut_eigs, EigenResult, SolverConfig};
use crate::error::{Error, Result};
use crate::grid::{GridConfig, GridOperator};
use crate::image::{Image, LabelMap};
use crate::nlm::nlm_build;
use crate::operator::{CutOperator, Restricted};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    /// Exact pixel affinity (dense matrix up to the oracle cap).
    DenseNcut,
    /// Pixel affinity through the bilateral grid.
    FastNcut,
    /// Patch affinity through the non-local-means operator.
    CondNcut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Discretization {
    #[default]
    Kmeans,
    RecursiveTwoway,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmeansConfig {
    pub restarts: usize,
    pub max_iterations: usize,
    /// Scale every embedding row to unit length first.
    pub row_normalize: bool,
}

impl Default for KmeansConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iterations: 100,
            row_normalize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentConfig {
    pub pipeline: Pipeline,
    pub affinity: Weighting,
    pub num_segments: usize,
    /// Nontrivial eigenvectors to compute; defaults to `num_segments`.
    pub num_eigvecs: Option<usize>,
    pub discretization: Discretization,
    pub ncut_stop_threshold: f64,
    pub kmeans: KmeansConfig,
    pub thresholds_per_split: usize,
    pub seed: u64,
    pub deterministic: bool,
    pub tol: f64,
    pub max_iterations: usize,
}

impl SegmentConfig {
    pub fn new(pipeline: Pipeline, affinity: Weighting, num_segments: usize) -> Self {
        Self {
            pipeline,
            affinity,
            num_segments,
            num_eigvecs: None,
            discretization: Discretization::Kmeans,
            ncut_stop_threshold: 0.06,
            kmeans: KmeansConfig::default(),
            thresholds_per_split: 32,
            seed: 0,
            deterministic: false,
            tol: 1e-6,
            max_iterations: 300,
        }
    }

    pub fn dense(affinity: AffinityConfig, num_segments: usize) -> Self {
        Self::new(
            Pipeline::DenseNcut,
            Weighting::Pixel(affinity),
            num_segments,
        )
    }

    pub fn fast(affinity: AffinityConfig, num_segments: usize) -> Self {
        Self::new(Pipeline::FastNcut, Weighting::Pixel(affinity), num_segments)
    }

    pub fn conditioned(patch: PatchConfig, num_segments: usize) -> Self {
        Self::new(Pipeline::CondNcut, Weighting::Patch(patch), num_segments)
    }

    pub fn eigvecs(&self) -> usize {
        self.num_eigvecs.unwrap_or(self.num_segments)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_segments < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 segments (got {})",
                self.num_segments
            )));
        }
        if self.eigvecs() + 1 < self.num_segments {
            return Err(Error::InvalidArgument(format!(
                "{} eigenvectors cannot embed {} segments",
                self.eigvecs(),
                self.num_segments
            )));
        }
        if self.thresholds_per_split == 0 || self.kmeans.restarts == 0 {
            return Err(Error::InvalidArgument(
                "threshold and restart counts must be positive".into(),
            ));
        }
        match (self.pipeline, &self.affinity) {
            (Pipeline::CondNcut, Weighting::Patch(p)) => p.validate(),
            (Pipeline::DenseNcut | Pipeline::FastNcut, Weighting::Pixel(a)) => a.validate(),
            (p, _) => Err(Error::InvalidArgument(format!(
                "{p:?} got the wrong affinity kind"
            ))),
        }
    }

    fn solver(&self, k: usize) -> SolverConfig {
        SolverConfig {
            k,
            tol: self.tol,
            max_iterations: self.max_iterations,
            seed: self.seed,
            ..SolverConfig::default()
        }
    }
}

/// Wall-clock milliseconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub build_ms: f64,
    pub solve_ms: f64,
    pub discretize_ms: f64,
    pub score_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    pub labels: LabelMap,
    pub eigen: EigenResult,
    pub ncut_cost: f64,
    /// `(threshold, cost)` for every evaluated split in two-way mode.
    pub threshold_costs: Vec<(f64, f64)>,
    pub timings: Timings,
    /// All `W` applications: eigensolve, discretization and scoring.
    pub filter_applications: usize,
}

fn cost_of(op: &(impl CutOperator + ?Sized), labels: &[usize], k: usize) -> Result<f64> {
    let d = op.degree();
    let indicators: Vec<Vec<f64>> = (0..k)
        .map(|s| {
            labels
                .iter()
                .map(|&l| if l == s { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    let mut total = 0.0;
    for (s, ind) in indicators.iter().enumerate() {
        let assoc: f64 = ind.iter().zip(d).map(|(a, b)| a * b).sum();
        if ind.iter().all(|&x| x == 0.0) {
            return Err(Error::InvalidArgument(format!("segment {s} is empty")));
        }
        let within: f64 = op.apply_w(ind).iter().zip(ind).map(|(a, b)| a * b).sum();
        let cut = (assoc - within).max(0.0);
        total += cut / assoc;
    }
    Ok(total)
}

/// `sum_A cut(A, V \ A) / assoc(A, V)` with one `W` application per segment.
pub fn ncut_cost(op: &(impl CutOperator + ?Sized), labels: &LabelMap) -> Result<f64> {
    crate::operator::check_len(op.len(), labels.labels().len())?;
    if labels.segment_count() < 2 {
        return Err(Error::InvalidArgument(
            "a cut needs at least 2 segments".into(),
        ));
    }
    cost_of(op, labels.labels(), labels.segment_count())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoWaySplit {
    /// 1 where `y > threshold`, else 0.
    pub labels: Vec<usize>,
    pub threshold: f64,
    pub cost: f64,
    pub evaluated: Vec<(f64, f64)>,
}

/// Best two-way Ncut among thresholds at the `(t + 0.5) / T` quantiles of `y`.
pub fn discretize_twoway(
    y: &[f64],
    op: &(impl CutOperator + ?Sized),
    thresholds: usize,
) -> Result<TwoWaySplit> {
    crate::operator::check_len(op.len(), y.len())?;
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut best: Option<TwoWaySplit> = None;
    let mut evaluated = Vec::new();
    let mut last = None;
    for t in 0..thresholds.max(1) {
        let q = (t as f64 + 0.5) / thresholds as f64;
        let thr = sorted[((q * n as f64) as usize).min(n.saturating_sub(1))];
        if last == Some(thr) {
            continue;
        }
        last = Some(thr);
        let labels: Vec<usize> = y.iter().map(|&v| usize::from(v > thr)).collect();
        let above = labels.iter().filter(|&&l| l == 1).count();
        if above == 0 || above == n {
            continue;
        }
        let cost = cost_of(op, &labels, 2)?;
        evaluated.push((thr, cost));
        if best.as_ref().is_none_or(|b| cost < b.cost) {
            best = Some(TwoWaySplit {
                labels,
                threshold: thr,
                cost,
                evaluated: Vec::new(),
            });
        }
    }
    let mut best =
        best.ok_or_else(|| Error::Degenerate("every threshold leaves one side empty".into()))?;
    best.evaluated = evaluated;
    Ok(best)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means on embedding rows (one row per pixel, one column per vector).
/// Seeded k-means++ start, `restarts` runs, lowest within-cluster SSE wins.
pub fn discretize_kmeans(
    vectors: &[Vec<f64>],
    k_seg: usize,
    seed: u64,
    cfg: &KmeansConfig,
) -> Result<Vec<usize>> {
    let dim = vectors.len();
    let n = vectors.first().map_or(0, Vec::len);
    if dim == 0 || k_seg == 0 {
        return Err(Error::InvalidArgument(
            "k-means needs vectors and k >= 1".into(),
        ));
    }
    let mut rows: Vec<Vec<f64>> = (0..n)
        .map(|i| vectors.iter().map(|v| v[i]).collect())
        .collect();
    if cfg.row_normalize {
        for r in &mut rows {
            let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                r.iter_mut().for_each(|x| *x /= norm);
            }
        }
    }
    let mut distinct = rows.clone();
    distinct.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    distinct.dedup();
    if distinct.len() < k_seg {
        return Err(Error::Degenerate(format!(
            "{} distinct embedding rows for {k_seg} segments",
            distinct.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..cfg.restarts {
        let (sse, labels) = kmeans_run(&rows, k_seg, cfg.max_iterations, &mut rng);
        if best.as_ref().is_none_or(|(b, _)| sse < *b) {
            best = Some((sse, labels));
        }
    }
    Ok(best.map(|(_, l)| l).unwrap_or_default())
}

fn kmeans_run(
    rows: &[Vec<f64>],
    k: usize,
    max_iterations: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, Vec<usize>) {
    let n = rows.len();
    let dim = rows[0].len();
    let mut centers = vec![rows[rng.random_range(0..n)].clone()];
    let mut nearest: Vec<f64> = rows.iter().map(|r| sq_dist(r, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, d) in nearest.iter().enumerate() {
                if target < *d {
                    idx = i;
                    break;
                }
                target -= d;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        centers.push(rows[pick].clone());
        for (d, r) in nearest.iter_mut().zip(rows) {
            *d = d.min(sq_dist(r, &centers[centers.len() - 1]));
        }
    }

    let mut labels = vec![usize::MAX; n];
    for _ in 0..max_iterations {
        let mut changed = false;
        for (l, r) in labels.iter_mut().zip(rows) {
            let mut best = (f64::INFINITY, 0);
            for (c, center) in centers.iter().enumerate() {
                let d = sq_dist(r, center);
                if d < best.0 {
                    best = (d, c);
                }
            }
            if *l != best.1 {
                *l = best.1;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (l, r) in labels.iter().zip(rows) {
            counts[*l] += 1;
            sums[*l].iter_mut().zip(r).for_each(|(s, x)| *s += x);
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
                continue;
            }
            // empty cluster: move it onto the point farthest from its center
            let far = (0..n)
                .max_by(|&a, &b| {
                    sq_dist(&rows[a], &centers[labels[a]])
                        .total_cmp(&sq_dist(&rows[b], &centers[labels[b]]))
                })
                .unwrap_or(0);
            centers[c] = rows[far].clone();
            labels[far] = c;
            changed = true;
        }
        if !changed {
            break;
        }
    }
    let sse = labels
        .iter()
        .zip(rows)
        .map(|(l, r)| sq_dist(r, &centers[*l]))
        .sum();
    (sse, labels)
}

/// `(threshold, cost)` of each split taken, in order.
pub type SplitLog = Vec<(f64, f64)>;

/// Repeated two-way splits, each solved on the operator restricted to one
/// segment. The segment whose best cut is cheapest goes next (ties to the
/// larger), so zero-cost components separate before any connected region.
///
/// A split is accepted when its cost is below `ncut_stop_threshold` or more
/// segments are still required; since the loop only runs while segments are
/// missing, the second clause always holds and the threshold only matters to
/// callers that inspect the recorded costs.
pub fn recursive_split(
    op: &(impl CutOperator + ?Sized),
    cfg: &SegmentConfig,
) -> Result<(Vec<usize>, SplitLog)> {
    let n = op.len();
    let mut segments: Vec<Vec<usize>> = vec![(0..n).collect()];
    // best split of each segment, solved once; None once it cannot be split
    let mut candidates: Vec<Option<TwoWaySplit>> = vec![best_split(op, &segments[0], cfg)?];
    let mut costs = Vec::new();
    while segments.len() < cfg.num_segments {
        // cheapest cut first so zero-cost components separate before anything else
        let Some(pick) = (0..segments.len())
            .filter(|&s| candidates[s].is_some())
            .min_by(|&a, &b| {
                let (ca, cb) = (
                    candidates[a].as_ref().map_or(f64::INFINITY, |c| c.cost),
                    candidates[b].as_ref().map_or(f64::INFINITY, |c| c.cost),
                );
                ca.total_cmp(&cb)
                    .then(segments[b].len().cmp(&segments[a].len()))
                    .then(a.cmp(&b))
            })
        else {
            break;
        };
        let split = candidates[pick].take().expect("filtered above");
        costs.push((split.threshold, split.cost));
        let accept = split.cost < cfg.ncut_stop_threshold || segments.len() < cfg.num_segments;
        if !accept {
            continue;
        }
        let (hi, lo): (Vec<_>, Vec<_>) = segments[pick]
            .iter()
            .copied()
            .zip(split.labels.iter().copied())
            .partition(|&(_, l)| l == 1);
        segments[pick] = lo.into_iter().map(|(i, _)| i).collect();
        segments.push(hi.into_iter().map(|(i, _)| i).collect());
        candidates[pick] = best_split(op, &segments[pick], cfg)?;
        let last = segments.len() - 1;
        candidates.push(best_split(op, &segments[last], cfg)?);
    }
    let mut labels = vec![0; n];
    for (s, members) in segments.iter().enumerate() {
        for &i in members {
            labels[i] = s;
        }
    }
    Ok((labels, costs))
}

/// Two-way split of `members` on the restricted operator; `None` for
/// single pixels and degenerate restrictions.
fn best_split(
    op: &(impl CutOperator + ?Sized),
    members: &[usize],
    cfg: &SegmentConfig,
) -> Result<Option<TwoWaySplit>> {
    if members.len() < 2 {
        return Ok(None);
    }
    let sub = Restricted::new(op, members.to_vec());
    let split = ncut_eigs(&sub, &cfg.solver(1)).and_then(|eig| {
        if !eig.converged.get(1).copied().unwrap_or(false) {
            return Err(Error::Degenerate("no converged nontrivial pair".into()));
        }
        discretize_twoway(&eig.vectors[1], &sub, cfg.thresholds_per_split)
    });
    match split {
        Ok(s) => Ok(Some(s)),
        Err(Error::Degenerate(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// The pipeline's operator over `img`: dense matrix (windowed above the cap),
/// bilateral grid, or NLM.
pub fn build_operator(img: &Image, cfg: &SegmentConfig) -> Result<Box<dyn CutOperator>> {
    Ok(match (cfg.pipeline, cfg.affinity) {
        (Pipeline::DenseNcut, Weighting::Pixel(a)) => {
            let gray = img.to_grayscale();
            if gray.pixel_count() <= DENSE_PIXEL_CAP {
                Box::new(build_dense_affinity(&gray, Weighting::Pixel(a))?)
            } else if let Radius::Bounded(_) = a.radius {
                Box::new(WindowedBilateral::new(&gray, a)?)
            } else {
                return Err(Error::OracleCapExceeded {
                    pixels: gray.pixel_count(),
                    cap: DENSE_PIXEL_CAP,
                });
            }
        }
        (Pipeline::FastNcut, Weighting::Pixel(a)) => Box::new(GridOperator::new(
            &img.to_grayscale(),
            GridConfig::new(a.sigma_x, a.sigma_i).deterministic(cfg.deterministic),
        )?),
        (Pipeline::CondNcut, Weighting::Patch(p)) => Box::new(nlm_build(img, p)?),
        (p, _) => {
            return Err(Error::InvalidArgument(format!(
                "{p:?} got the wrong affinity kind"
            )))
        }
    })
}

fn is_constant(img: &Image) -> bool {
    let data = img.data();
    let c = img.channels();
    (0..c).all(|ch| {
        let first = data[ch];
        data.iter()
            .skip(ch)
            .step_by(c)
            .all(|&x| (x - first).abs() <= 1e-12)
    })
}

/// Full pipeline: build, solve, discretize, score.
pub fn segment(img: &Image, cfg: &SegmentConfig) -> Result<SegmentationResult> {
    cfg.validate()?;
    check_not_constant(img)?;
    let start = Instant::now();
    let op = build_operator(img, cfg)?;
    let build_ms = start.elapsed().as_secs_f64() * 1e3;
    segment_with(op.as_ref(), img, cfg, build_ms)
}

fn check_not_constant(img: &Image) -> Result<()> {
    if is_constant(img) {
        return Err(Error::Degenerate(
            "the image is constant, so every cut of the affinity graph is equally good".into(),
        ));
    }
    Ok(())
}

/// Solve, discretize and score with an operator already built for `img`.
/// `build_ms` is recorded as the build stage time.
pub fn segment_with(
    op: &dyn CutOperator,
    img: &Image,
    cfg: &SegmentConfig,
    build_ms: f64,
) -> Result<SegmentationResult> {
    cfg.validate()?;
    check_not_constant(img)?;
    crate::operator::check_len(img.pixel_count(), op.len())?;
    let built = Instant::now();
    let eigen = ncut_eigs(op, &cfg.solver(cfg.eigvecs()))?;
    if !eigen.converged.iter().skip(1).any(|&c| c) {
        return Err(Error::Degenerate(
            "no nontrivial eigenpair converged; the graph is degenerate".into(),
        ));
    }
    let solved = Instant::now();

    let (raw, threshold_costs) = match cfg.discretization {
        Discretization::Kmeans => {
            let take = eigen.vectors.len() - 1;
            let labels = discretize_kmeans(
                &eigen.vectors[1..=take],
                cfg.num_segments,
                cfg.seed,
                &cfg.kmeans,
            )?;
            (labels, Vec::new())
        }
        Discretization::RecursiveTwoway => recursive_split(op, cfg)?,
    };
    let labels = LabelMap::from_raw(img.width(), img.height(), &raw)?;
    let discretized = Instant::now();
    let ncut_cost = if labels.segment_count() >= 2 {
        ncut_cost(op, &labels)?
    } else {
        0.0
    };
    let done = Instant::now();
    let ms = |a: Instant, b: Instant| (b - a).as_secs_f64() * 1e3;
    Ok(SegmentationResult {
        labels,
        ncut_cost,
        threshold_costs,
        timings: Timings {
            build_ms,
            solve_ms: ms(built, solved),
            discretize_ms: ms(solved, discretized),
            score_ms: ms(discretized, done),
            total_ms: build_ms + ms(built, done),
        },
        filter_applications: op.applications(),
        eigen,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affinity::DenseAffinity;

    fn blocks() -> DenseAffinity {
        let w = vec![
            1.0, 0.9, 0.0, 0.0, //
            0.9, 1.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.8, //
            0.0, 0.0, 0.8, 1.0,
        ];
        DenseAffinity::from_matrix(4, w).unwrap()
    }

    fn pixel_cfg() -> SegmentConfig {
        SegmentConfig::dense(AffinityConfig::new(1.0, 0.1, Radius::Unbounded), 2)
    }

    #[test]
    fn two_pixel_cost() {
        let w = (-0.5f64).exp();
        let a = DenseAffinity::from_matrix(2, vec![1.0, w, w, 1.0]).unwrap();
        let labels = LabelMap::new(2, 1, vec![0, 1]).unwrap();
        let c = ncut_cost(&a, &labels).unwrap();
        assert!((c - 2.0 * w / (1.0 + w)).abs() < 1e-15);
        assert!((c - 0.755081).abs() < 1e-6);
        let one = LabelMap::new(2, 1, vec![0, 0]).unwrap();
        assert!(ncut_cost(&a, &one).is_err());
    }

    #[test]
    fn block_split_is_free() {
        let labels = LabelMap::new(4, 1, vec![0, 0, 1, 1]).unwrap();
        assert_eq!(ncut_cost(&blocks(), &labels).unwrap(), 0.0);
    }

    #[test]
    fn twoway_finds_blocks() {
        let y = [0.5, 0.4, -0.3, -0.6];
        let s = discretize_twoway(&y, &blocks(), 32).unwrap();
        assert_eq!(s.labels, vec![1, 1, 0, 0]);
        assert_eq!(s.cost, 0.0);
        assert!(s.evaluated.iter().all(|(_, c)| s.cost <= *c));
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        let t = discretize_twoway(&neg, &blocks(), 32).unwrap();
        assert_eq!(t.labels, vec![0, 0, 1, 1]);
        assert!(discretize_twoway(&[1.0; 4], &blocks(), 32).is_err());
    }

    #[test]
    fn kmeans_singletons_and_determinism() {
        let k = KmeansConfig::default();
        let l = discretize_kmeans(&[vec![0.7, -0.7]], 2, 3, &k).unwrap();
        assert_ne!(l[0], l[1]);
        let y = vec![vec![1.0, 1.1, 0.9, -1.0, -1.2, -0.8, 1.05]];
        let a = discretize_kmeans(&y, 2, 9, &k).unwrap();
        assert_eq!(a, discretize_kmeans(&y, 2, 9, &k).unwrap());
        assert!(a[..3].iter().all(|&x| x == a[0]) && a[3..6].iter().all(|&x| x == a[3]));
        assert_ne!(a[0], a[3]);
        assert!(discretize_kmeans(&[vec![1.0, 1.0, 1.0]], 2, 0, &k).is_err());
    }

    #[test]
    fn recursive_recovers_components() {
        let mut cfg = pixel_cfg();
        cfg.num_segments = 2;
        let (labels, costs) = recursive_split(&blocks(), &cfg).unwrap();
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[2], labels[3]);
        assert_ne!(labels[0], labels[2]);
        assert!(costs[0].1.abs() < 1e-12);
    }

    #[test]
    fn constant_image_is_degenerate() {
        let img = Image::constant(8, 8, 0.5).unwrap();
        assert!(matches!(
            segment(&img, &pixel_cfg()),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn config_checks() {
        let mut cfg = pixel_cfg();
        cfg.num_segments = 1;
        assert!(cfg.validate().is_err());
        let mut cfg = pixel_cfg();
        cfg.num_eigvecs = Some(2);
        cfg.num_segments = 3;
        assert!(cfg.validate().is_ok());
        cfg.num_segments = 4;
        assert!(cfg.validate().is_err());
        let mut cfg = pixel_cfg();
        cfg.pipeline = Pipeline::CondNcut;
        assert!(cfg.validate().is_err());
    }
}
