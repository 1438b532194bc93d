//! Run an experiment file and write its result files.
//!
//!     cargo run --release --example run_experiment_file [experiment.toml] [out-dir]

use std::path::PathBuf;

use surftrap::runner::{self, Experiment, RunOptions};

fn main() -> surftrap::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/experiment.toml"));
    let out = PathBuf::from(args.next().unwrap_or_else(|| "results".into()));
    let exp = Experiment::load(&path)?;
    let report = runner::run(&exp, &RunOptions::default(), &out)?;
    println!("{}: {} records written to {}", report.name, report.records.len(), out.display());
    std::process::exit(report.exit_code());
}
