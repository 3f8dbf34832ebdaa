mod args;
mod bench;
mod commands;
mod metrics;

use std::process::ExitCode;

use clap::Parser;
use sfc_core::{Error, Pipeline};

use args::{Cli, Command};

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. }
        | Error::MalformedHeader { .. }
        | Error::Unsupported(_)
        | Error::Png(_) => 2,
        Error::Degenerate(_) | Error::Solver(_) => 3,
        Error::InvalidArgument(_)
        | Error::SizeMismatch { .. }
        | Error::OracleCapExceeded { .. } => 1,
    }
}

fn configure_threads() {
    let n = std::env::var("SFC_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .unwrap_or(0);
    if n > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    configure_threads();
    let result = match &cli.command {
        Command::Ncut(a) => commands::segment(Pipeline::DenseNcut, &a.common, Some(a.radius), None),
        Command::FastNcut(a) => commands::segment(Pipeline::FastNcut, a, None, None),
        Command::CondNcut(a) => {
            commands::segment(Pipeline::CondNcut, &a.common, None, Some(&a.patch))
        }
        Command::Filter(a) => commands::filter(a),
        Command::Compare(a) => commands::compare(a),
        Command::Bench(a) => bench::bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sfc: error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
