use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sfc_core::io::{
    encode_label_png, encode_mask_pgm, encode_png, render_overlay, save_image, write_atomic,
};
use sfc_core::{
    brute_bilateral, build_operator, grid_apply, load_image, nlm_apply, nlm_build, segment_with,
    AffinityConfig, Discretization, Error, GridConfig, Image, PatchConfig, Pipeline, Radius,
    Result, SegmentConfig, Weighting,
};

use crate::args::{
    CompareArgs, DiscretizeArg, FastPipeline, FilterArgs, FilterMethod, PatchArgs, SegmentArgs,
};
use crate::metrics::{radius_text, ConfigEcho, RunMetrics};

fn log(stage: &str, detail: impl std::fmt::Display) {
    eprintln!("sfc: {stage}: {detail}");
}

fn patch_config(p: &PatchArgs, sigma_x: f64) -> PatchConfig {
    PatchConfig {
        patch_radius: p.patch_radius,
        sigma_n: p.sigma_patch,
        sigma_x,
        search_radius: p.search_radius,
        gaussian_patch_weighting: true,
    }
}

fn discretization(d: DiscretizeArg) -> Discretization {
    match d {
        DiscretizeArg::Kmeans => Discretization::Kmeans,
        DiscretizeArg::Twoway => Discretization::RecursiveTwoway,
    }
}

fn pipeline_name(p: Pipeline) -> &'static str {
    match p {
        Pipeline::DenseNcut => "ncut",
        Pipeline::FastNcut => "fast-ncut",
        Pipeline::CondNcut => "cond-ncut",
    }
}

fn echo(cfg: &SegmentConfig) -> ConfigEcho {
    let mut e = ConfigEcho {
        pipeline: Some(pipeline_name(cfg.pipeline).into()),
        segments: Some(cfg.num_segments),
        eigvecs: Some(cfg.eigvecs()),
        discretize: Some(
            match cfg.discretization {
                Discretization::Kmeans => "kmeans",
                Discretization::RecursiveTwoway => "twoway",
            }
            .into(),
        ),
        seed: Some(cfg.seed),
        deterministic: cfg.deterministic,
        ..ConfigEcho::default()
    };
    match cfg.affinity {
        Weighting::Pixel(a) => {
            e.sigma_spatial = Some(a.sigma_x);
            e.sigma_range = Some(a.sigma_i);
            e.radius = Some(radius_text(a.radius));
        }
        Weighting::Patch(p) => {
            e.sigma_spatial = Some(p.sigma_x);
            e.patch_radius = Some(p.patch_radius);
            e.sigma_patch = Some(p.sigma_n);
            e.search_radius = Some(p.search_radius);
        }
    }
    e
}

/// `ncut`, `fast-ncut` and `cond-ncut`.
pub fn segment(
    pipeline: Pipeline,
    args: &SegmentArgs,
    radius: Option<Radius>,
    patch: Option<&PatchArgs>,
) -> Result<()> {
    if args.segments < 2 {
        return Err(Error::InvalidArgument(format!(
            "--segments must be at least 2 (got {})",
            args.segments
        )));
    }
    let img = load_image(&args.input)?;
    let sigma_x = args.spatial.resolve(img.height());
    let affinity = match (pipeline, patch) {
        (Pipeline::CondNcut, Some(p)) => Weighting::Patch(patch_config(p, sigma_x)),
        _ => Weighting::Pixel(AffinityConfig::new(
            sigma_x,
            args.sigma_range,
            radius.unwrap_or(Radius::Unbounded),
        )),
    };
    let mut cfg = SegmentConfig::new(pipeline, affinity, args.segments);
    cfg.num_eigvecs = args.eigvecs;
    cfg.discretization = discretization(args.discretize);
    cfg.seed = args.seed;
    cfg.deterministic = args.deterministic;
    cfg.validate()?;
    // color guidance is only meaningful for the patch operator
    let guide = if pipeline == Pipeline::CondNcut {
        img.clone()
    } else {
        img.to_grayscale()
    };
    log(
        "load",
        format_args!(
            "{} ({}x{})",
            args.input.display(),
            img.width(),
            img.height()
        ),
    );

    let start = Instant::now();
    let op = build_operator(&guide, &cfg)?;
    let build_ms = start.elapsed().as_secs_f64() * 1e3;
    log(
        "build",
        format_args!(
            "{} operator over {} pixels",
            pipeline_name(pipeline),
            op.len()
        ),
    );
    let result = segment_with(op.as_ref(), &guide, &cfg, build_ms)?;
    log(
        "solve",
        format_args!(
            "lambda = {:?}, {} iterations, {} filter applications",
            result.eigen.lambda, result.eigen.iterations, result.filter_applications
        ),
    );

    let labels = &result.labels;
    let overlay = render_overlay(&img, labels)?;
    let mut files: Vec<(std::path::PathBuf, Vec<u8>)> = vec![
        (args.out_dir.join("labels.png"), encode_label_png(labels)?),
        (args.out_dir.join("overlay.png"), encode_png(&overlay)?),
    ];
    for id in 0..labels.segment_count() {
        files.push((
            args.out_dir.join(format!("mask_{id}.pgm")),
            encode_mask_pgm(labels, id),
        ));
    }
    let mut metrics = RunMetrics::new(
        pipeline_name(pipeline),
        img.width(),
        img.height(),
        echo(&cfg),
    );
    metrics.record(&result, !args.deterministic);
    if let Some(path) = &args.metrics_json {
        files.push((path.clone(), metrics.to_json()));
    }
    write_all(&args.out_dir, &files)?;
    log(
        "write",
        format_args!(
            "{} segments, ncut cost {:.6}",
            labels.segment_count(),
            result.ncut_cost
        ),
    );
    Ok(())
}

fn write_all(out_dir: &Path, files: &[(std::path::PathBuf, Vec<u8>)]) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;
    for (path, bytes) in files {
        write_atomic(path, bytes)?;
    }
    Ok(())
}

/// Per channel `D^{-1} W`, repeated `iterations` times with fixed guidance.
pub fn filter(args: &FilterArgs) -> Result<()> {
    if args.iterations == 0 {
        return Err(Error::InvalidArgument(
            "--iterations must be at least 1".into(),
        ));
    }
    let img = load_image(&args.input)?;
    let (w, h) = (img.width(), img.height());
    let sigma_x = args.spatial.resolve(h);
    let start = Instant::now();
    let (values, channels): (Image, usize) = match args.method {
        FilterMethod::Nlm => (img.clone(), img.channels()),
        _ => (img.to_grayscale(), 1),
    };
    let guide = values.clone();
    let mut planes: Vec<Vec<f64>> = (0..channels)
        .map(|c| {
            values
                .data()
                .iter()
                .skip(c)
                .step_by(channels)
                .copied()
                .collect()
        })
        .collect();

    let nlm = match args.method {
        FilterMethod::Nlm => Some(nlm_build(&guide, patch_config(&args.patch, sigma_x))?),
        _ => None,
    };
    let grid_cfg = GridConfig::new(sigma_x, args.sigma_range).deterministic(args.deterministic);
    let brute_cfg = AffinityConfig::new(
        sigma_x,
        args.sigma_range,
        Radius::Bounded(args.radius.max(1)),
    );
    for it in 0..args.iterations {
        for plane in planes.iter_mut() {
            let (num, den) = match args.method {
                FilterMethod::Bilateral => {
                    let (mut num, den) = grid_apply(&guide, &[plane], &grid_cfg)?;
                    (num.pop().unwrap_or_default(), den)
                }
                FilterMethod::BilateralBrute => brute_bilateral(&guide, plane, &brute_cfg)?,
                FilterMethod::Nlm => nlm_apply(nlm.as_ref().expect("built above"), plane)?,
            };
            for ((p, n), d) in plane.iter_mut().zip(&num).zip(&den) {
                *p = (n / d.max(sfc_core::operator::DEGREE_FLOOR)).clamp(0.0, 1.0);
            }
        }
        if it + 1 == args.iterations || (it + 1) % 10 == 0 {
            log("filter", format_args!("iteration {}", it + 1));
        }
    }
    let mut data = vec![0.0; w * h * channels];
    for (c, plane) in planes.iter().enumerate() {
        for (i, v) in plane.iter().enumerate() {
            data[i * channels + c] = *v;
        }
    }
    let out = Image::new(w, h, channels, data)?;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    save_image(&out, &args.output)?;
    if let Some(path) = &args.metrics_json {
        let mut echo = ConfigEcho {
            pipeline: Some(format!("{:?}", args.method).to_lowercase()),
            sigma_spatial: Some(sigma_x),
            iterations: Some(args.iterations),
            deterministic: args.deterministic,
            ..ConfigEcho::default()
        };
        match args.method {
            FilterMethod::Nlm => {
                echo.patch_radius = Some(args.patch.patch_radius);
                echo.sigma_patch = Some(args.patch.sigma_patch);
                echo.search_radius = Some(args.patch.search_radius);
            }
            FilterMethod::Bilateral => echo.sigma_range = Some(args.sigma_range),
            FilterMethod::BilateralBrute => {
                echo.sigma_range = Some(args.sigma_range);
                echo.radius = Some(args.radius.max(1).to_string());
            }
        }
        let mut m = RunMetrics::new("filter", w, h, echo);
        m.filter_applications = Some(args.iterations * channels);
        if !args.deterministic {
            m.stage_ms.total = Some(elapsed);
        }
        write_atomic(path, &m.to_json())?;
    }
    Ok(())
}

fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Dense oracle (unbounded radius) against the chosen pipeline.
pub fn compare(args: &CompareArgs) -> Result<()> {
    if args.segments < 2 {
        return Err(Error::InvalidArgument(format!(
            "--segments must be at least 2 (got {})",
            args.segments
        )));
    }
    let img = load_image(&args.input)?.to_grayscale();
    let sigma_x = args.spatial.resolve(img.height());
    let affinity = AffinityConfig::new(sigma_x, args.sigma_range, Radius::Unbounded);
    let configure = |pipeline| {
        let mut cfg = SegmentConfig::new(pipeline, Weighting::Pixel(affinity), args.segments);
        cfg.num_eigvecs = args.eigvecs;
        cfg.discretization = discretization(args.discretize);
        cfg.seed = args.seed;
        cfg.deterministic = args.deterministic;
        cfg
    };
    let dense_cfg = configure(Pipeline::DenseNcut);
    let fast_cfg = configure(match args.against {
        FastPipeline::Ncut => Pipeline::DenseNcut,
        FastPipeline::FastNcut => Pipeline::FastNcut,
    });
    dense_cfg.validate()?;
    if img.pixel_count() > sfc_core::DENSE_PIXEL_CAP {
        return Err(Error::OracleCapExceeded {
            pixels: img.pixel_count(),
            cap: sfc_core::DENSE_PIXEL_CAP,
        });
    }

    let t = Instant::now();
    let dense_op = build_operator(&img, &dense_cfg)?;
    let dense = segment_with(
        dense_op.as_ref(),
        &img,
        &dense_cfg,
        t.elapsed().as_secs_f64() * 1e3,
    )?;
    let dense_wall = t.elapsed().as_secs_f64();
    log("dense", format_args!("lambda = {:?}", dense.eigen.lambda));

    let t = Instant::now();
    let fast_op = build_operator(&img, &fast_cfg)?;
    let fast = segment_with(
        fast_op.as_ref(),
        &img,
        &fast_cfg,
        t.elapsed().as_secs_f64() * 1e3,
    )?;
    let fast_wall = t.elapsed().as_secs_f64();
    log(
        pipeline_name(fast_cfg.pipeline),
        format_args!("lambda = {:?}", fast.eigen.lambda),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let (mut op_err, mut filt_err) = (0.0f64, 0.0f64);
    for _ in 0..args.probes {
        let v: Vec<f64> = (0..img.pixel_count())
            .map(|_| rng.random::<f64>())
            .collect();
        op_err = op_err.max(rel_error(&fast_op.apply_w(&v), &dense_op.apply_w(&v)));
        filt_err = filt_err.max(rel_error(&fast_op.filter(&v), &dense_op.filter(&v)));
    }
    let deltas = dense
        .eigen
        .lambda
        .iter()
        .zip(&fast.eigen.lambda)
        .map(|(a, b)| (a - b).abs())
        .collect();
    // both labelings scored on the exact affinity
    let cost_dense = dense.ncut_cost;
    let cost_fast = if fast.labels.segment_count() >= 2 {
        sfc_core::ncut_cost(dense_op.as_ref(), &fast.labels)?
    } else {
        f64::NAN
    };
    let cost_ratio = if cost_dense > 1e-12 {
        Some(cost_fast / cost_dense)
    } else if cost_fast <= 1e-12 {
        Some(1.0)
    } else {
        None
    };

    let mut m = RunMetrics::new("compare", img.width(), img.height(), echo(&fast_cfg));
    m.record(&fast, !args.deterministic);
    m.lambda_deltas = Some(deltas);
    m.operator_rel_error = Some(op_err);
    m.filter_rel_error = Some(filt_err);
    m.cost_ratio = cost_ratio.filter(|r| r.is_finite());
    m.label_agreement = Some(dense.labels.agreement(&fast.labels));
    if !args.deterministic {
        m.speedup = Some(dense_wall / fast_wall.max(1e-9));
    }
    let json = m.to_json();
    match &args.metrics_json {
        Some(path) => write_atomic(path, &json)?,
        None => print!("{}", String::from_utf8_lossy(&json)),
    }
    Ok(())
}
