//! Run a built-in experiment and print its table.
//!
//!     cargo run --release --example run_preset [name]

use surftrap::runner::{self, RunOptions};

fn main() -> surftrap::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "wa-sweep".into());
    let exp = runner::preset(&name)?;
    let report = runner::execute(&exp, &RunOptions::default())?;
    print!("{}", report.csv()?);
    for f in &report.failures {
        eprintln!("failed: {f}");
    }
    eprintln!("{} records, config {}; presets: {}", report.records.len(), report.config_hash, runner::preset_names().join(", "));
    Ok(())
}
