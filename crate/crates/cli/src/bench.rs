//! Windowed brute-force baseline against the grid path, end to end.

use std::fmt::Write as _;
use std::time::Instant;

use sfc_core::io::write_atomic;
use sfc_core::synth::two_region;
use sfc_core::{
    ncut_eigs, AffinityConfig, Error, GridConfig, GridOperator, Radius, Result, SolverConfig,
    WindowedBilateral,
};

use crate::args::BenchArgs;
use crate::metrics::{ConfigEcho, RunMetrics};

#[derive(Debug, Clone)]
pub struct Row {
    pub size: usize,
    pub pipeline: &'static str,
    pub wall_ms: f64,
    pub filter_apps: usize,
    pub lambda2: f64,
    pub iterations: usize,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// One timed eigensolve (operator construction included) per repeat and pipeline.
pub fn run(args: &BenchArgs) -> Result<Vec<Row>> {
    if args.repeats == 0 || args.sizes.is_empty() || args.radius == 0 {
        return Err(Error::InvalidArgument(
            "need sizes, repeats >= 1 and radius >= 1".into(),
        ));
    }
    let mut rows = Vec::new();
    for &size in &args.sizes {
        let (img, _) = two_region(size, 0.2, 0.8, 0.02, args.seed)?;
        let sigma_x = size as f64 / 32.0;
        let solver = SolverConfig {
            seed: args.seed,
            ..SolverConfig::with_k(1)
        };
        for _ in 0..args.repeats {
            let t = Instant::now();
            let op = WindowedBilateral::new(
                &img,
                AffinityConfig::new(sigma_x, args.sigma_range, Radius::Bounded(args.radius)),
            )?;
            let eig = ncut_eigs(&op, &solver)?;
            rows.push(Row {
                size,
                pipeline: "windowed",
                wall_ms: t.elapsed().as_secs_f64() * 1e3,
                filter_apps: eig.filter_applications,
                lambda2: eig.lambda[1],
                iterations: eig.iterations,
            });

            let t = Instant::now();
            let op = GridOperator::new(&img, GridConfig::new(sigma_x, args.sigma_range))?;
            let eig = ncut_eigs(&op, &solver)?;
            rows.push(Row {
                size,
                pipeline: "grid",
                wall_ms: t.elapsed().as_secs_f64() * 1e3,
                filter_apps: eig.filter_applications,
                lambda2: eig.lambda[1],
                iterations: eig.iterations,
            });
            eprintln!("sfc: bench: size {size} repeat done");
        }
    }
    Ok(rows)
}

pub fn csv(rows: &[Row]) -> String {
    let mut out = String::from("size,pipeline,wall_ms,filter_apps,lambda2\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.3},{},{:.6e}",
            r.size, r.pipeline, r.wall_ms, r.filter_apps, r.lambda2
        );
    }
    out
}

/// Median wall-time ratio windowed / grid per size.
pub fn speedups(rows: &[Row]) -> Vec<(usize, f64)> {
    let mut sizes: Vec<usize> = rows.iter().map(|r| r.size).collect();
    sizes.dedup();
    sizes
        .into_iter()
        .map(|s| {
            let med = |p: &str| {
                median(
                    rows.iter()
                        .filter(|r| r.size == s && r.pipeline == p)
                        .map(|r| r.wall_ms)
                        .collect(),
                )
            };
            (s, med("windowed") / med("grid"))
        })
        .collect()
}

pub fn bench(args: &BenchArgs) -> Result<()> {
    let rows = run(args)?;
    let table = csv(&rows);
    match &args.csv {
        Some(path) => write_atomic(path, table.as_bytes())?,
        None => print!("{table}"),
    }
    let ups = speedups(&rows);
    for (size, s) in &ups {
        let iters = |p: &str| {
            rows.iter()
                .find(|r| r.size == *size && r.pipeline == p)
                .map_or(0, |r| r.iterations)
        };
        eprintln!(
            "sfc: bench: {size}x{size}: speedup {s:.1}x, iterations windowed {} grid {}",
            iters("windowed"),
            iters("grid")
        );
    }
    if let Some(path) = &args.metrics_json {
        let last = args.sizes.last().copied().unwrap_or(0);
        let echo = ConfigEcho {
            pipeline: Some("bench".into()),
            sigma_range: Some(args.sigma_range),
            radius: Some(args.radius.to_string()),
            seed: Some(args.seed),
            ..ConfigEcho::default()
        };
        let mut m = RunMetrics::new("bench", last, last, echo);
        if let Some(r) = rows.iter().rev().find(|r| r.pipeline == "grid") {
            m.lambda = Some(vec![0.0, r.lambda2]);
            m.iterations = Some(r.iterations);
            m.filter_applications = Some(r.filter_apps);
        }
        m.speedup = ups.last().map(|(_, s)| *s);
        write_atomic(path, &m.to_json())?;
    }
    Ok(())
}
