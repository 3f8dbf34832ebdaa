//! Run metrics. Every key is always present; unknown values are `null`.

use serde::Serialize;
use sfc_core::{Radius, SegmentationResult};

#[derive(Debug, Default, Serialize)]
pub struct ConfigEcho {
    pub pipeline: Option<String>,
    pub sigma_spatial: Option<f64>,
    pub sigma_range: Option<f64>,
    pub radius: Option<String>,
    pub patch_radius: Option<usize>,
    pub sigma_patch: Option<f64>,
    pub search_radius: Option<usize>,
    pub segments: Option<usize>,
    pub eigvecs: Option<usize>,
    pub discretize: Option<String>,
    pub iterations: Option<usize>,
    pub seed: Option<u64>,
    pub deterministic: bool,
}

pub fn radius_text(r: Radius) -> String {
    match r {
        Radius::Bounded(r) => r.to_string(),
        Radius::Unbounded => "unbounded".into(),
    }
}

#[derive(Debug, Default, Serialize)]
pub struct StageMs {
    pub build: Option<f64>,
    pub solve: Option<f64>,
    pub discretize: Option<f64>,
    pub score: Option<f64>,
    pub total: Option<f64>,
}

#[derive(Debug, Default, Serialize)]
pub struct RunMetrics {
    pub command: String,
    pub args: Vec<String>,
    pub width: usize,
    pub height: usize,
    pub config: ConfigEcho,
    pub lambda: Option<Vec<f64>>,
    pub converged: Option<Vec<bool>>,
    pub iterations: Option<usize>,
    pub filter_applications: Option<usize>,
    pub stage_ms: StageMs,
    pub ncut_cost: Option<f64>,
    pub segment_sizes: Option<Vec<usize>>,
    pub lambda_deltas: Option<Vec<f64>>,
    pub operator_rel_error: Option<f64>,
    pub filter_rel_error: Option<f64>,
    pub cost_ratio: Option<f64>,
    pub label_agreement: Option<f64>,
    pub speedup: Option<f64>,
}

impl RunMetrics {
    pub fn new(command: &str, width: usize, height: usize, config: ConfigEcho) -> Self {
        Self {
            command: command.into(),
            args: std::env::args().skip(1).collect(),
            width,
            height,
            config,
            ..Self::default()
        }
    }

    /// Copies solver and segmentation figures; wall times only when `timed`.
    pub fn record(&mut self, r: &SegmentationResult, timed: bool) {
        self.lambda = Some(r.eigen.lambda.clone());
        self.converged = Some(r.eigen.converged.clone());
        self.iterations = Some(r.eigen.iterations);
        self.filter_applications = Some(r.filter_applications);
        self.ncut_cost = Some(r.ncut_cost);
        self.segment_sizes = Some(r.labels.segment_sizes());
        if timed {
            let t = &r.timings;
            self.stage_ms = StageMs {
                build: Some(t.build_ms),
                solve: Some(t.solve_ms),
                discretize: Some(t.discretize_ms),
                score: Some(t.score_ms),
                total: Some(t.total_ms),
            };
        }
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("metrics serialize");
        out.push(b'\n');
        out
    }
}
