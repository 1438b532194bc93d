//! Command-line front end for the experiment runner.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use surftrap::analysis::{axial_scan, find_radial_null, Component, DEFAULT_SCAN_HALF_RANGE, DEFAULT_SCAN_SAMPLES};
use surftrap::config::{load_layout, LayoutConfig};
use surftrap::constants::{joule_to_ev, MICRON, NANOMETER};
use surftrap::photonics::{design_table, presets, GratingDesign};
use surftrap::rfdynamics::{micromotion, trap_metrics, Pseudopotential};
use surftrap::runner::{self, Experiment, OutputFormat, RunOptions};
use surftrap::{DriveKind, Error, FieldModel};

#[derive(Parser)]
#[command(name = "surftrap", version, about = "RF field distortion from apertures in surface ion traps")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Directory for result files.
    #[arg(long, global = true, default_value = "results")]
    out_dir: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = runner::WORKERS_ENV)]
    workers: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Samples per axial scan.
    #[arg(long, global = true)]
    resolution: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment file.
    Run { config: PathBuf },
    /// Run a built-in experiment.
    Preset {
        name: Option<String>,
        /// List the built-in experiments.
        #[arg(long)]
        list: bool,
        /// Print the experiment source instead of running it.
        #[arg(long)]
        show: bool,
    },
    /// Locate the radial RF null.
    Null {
        /// Layout file (default: reference trap).
        #[arg(long)]
        layout: Option<PathBuf>,
        /// Axial position, µm.
        #[arg(long, default_value_t = 0.0)]
        z: f64,
        /// Starting point (x, y), µm.
        #[arg(long, num_args = 2, value_names = ["X", "Y"], default_values_t = [100.0, 0.0])]
        guess: Vec<f64>,
    },
    /// Write the complex axial field at the null height.
    Scan {
        #[arg(long)]
        layout: Option<PathBuf>,
        /// Half length of the scan, µm.
        #[arg(long, default_value_t = DEFAULT_SCAN_HALF_RANGE / MICRON)]
        half_range: f64,
        /// Scan height, µm (default: null height).
        #[arg(long)]
        height: Option<f64>,
    },
    /// Secular frequencies, depth and Mathieu q at the null.
    Metrics {
        #[arg(long)]
        layout: Option<PathBuf>,
    },
    /// Grating design table.
    Grating {
        /// sin-sensitivity, alo-sensitivity or sin-order-cutoff.
        #[arg(long, default_value = "sin-sensitivity")]
        preset: String,
        #[arg(long)]
        n_eff: Option<f64>,
        #[arg(long)]
        wavelength_nm: Option<f64>,
        #[arg(long)]
        order: Option<u32>,
        /// Emission angles, degrees.
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        angles: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1.0)]
        period_tol_nm: f64,
        #[arg(long, default_value_t = 100.0)]
        ion_height_um: f64,
    },
}

fn exit_for(e: &Error) -> u8 {
    if e.is_validation() {
        2
    } else {
        3
    }
}

fn layout_or_reference(path: Option<&Path>) -> surftrap::Result<LayoutConfig> {
    path.map_or_else(|| Ok(LayoutConfig::reference()), load_layout)
}

fn run_experiment(exp: &Experiment, common: &Common) -> surftrap::Result<u8> {
    let opts = RunOptions {
        workers: common.workers,
        resolution: common.resolution,
        format: match common.format {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        },
    };
    let report = runner::run(exp, &opts, &common.out_dir)?;
    for f in &report.failures {
        eprintln!("failed: {f}");
    }
    println!(
        "{}: {} records, {} failures, results in {}",
        report.name,
        report.records.len(),
        report.failures.len(),
        common.out_dir.display()
    );
    Ok(report.exit_code() as u8)
}

fn dispatch(cli: Cli) -> surftrap::Result<u8> {
    let common = &cli.common;
    match cli.command {
        Command::Run { config } => run_experiment(&Experiment::load(&config)?, common),
        Command::Preset { list: true, .. } => {
            for n in runner::preset_names() {
                println!("{n}");
            }
            Ok(0)
        }
        Command::Preset { name: Some(name), show, .. } => {
            if show {
                let src = runner::preset_source(&name)
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown preset `{name}`")))?;
                print!("{src}");
                return Ok(0);
            }
            run_experiment(&runner::preset(&name)?, common)
        }
        Command::Preset { name: None, .. } => {
            Err(Error::InvalidArgument("give a preset name or --list".into()))
        }
        Command::Null { layout, z, guess } => {
            let cfg = layout_or_reference(layout.as_deref())?;
            let n = find_radial_null(&cfg.layout, &cfg.drive, z * MICRON, (guess[0] * MICRON, guess[1] * MICRON))?;
            let mm = micromotion(n.residual, &cfg.ion, cfg.drive.rf_frequency);
            println!("x0_um,y0_um,z_um,residual_v_per_m,micromotion_nm,iterations");
            println!(
                "{},{},{},{},{},{}",
                n.position.x / MICRON,
                n.position.y / MICRON,
                z,
                n.residual,
                mm.amplitude / NANOMETER,
                n.iterations
            );
            Ok(0)
        }
        Command::Scan { layout, half_range, height } => {
            let cfg = layout_or_reference(layout.as_deref())?;
            let h = match height {
                Some(h) => h * MICRON,
                None => find_radial_null(&cfg.layout, &cfg.drive, 0.0, (100.0 * MICRON, 0.0))?.position.x,
            };
            let n = common.resolution.unwrap_or(DEFAULT_SCAN_SAMPLES);
            let scan = axial_scan(&cfg.layout, &cfg.drive, (-half_range * MICRON, half_range * MICRON), n, h)?;
            println!("z_um,ex_abs,ey_abs,ez_abs");
            let comps: Vec<Vec<f64>> =
                Component::ALL.iter().map(|&c| scan.component(c).iter().map(|v| v.norm()).collect()).collect();
            for (i, z) in scan.z.iter().enumerate() {
                println!("{},{},{},{}", z / MICRON, comps[0][i], comps[1][i], comps[2][i]);
            }
            Ok(0)
        }
        Command::Metrics { layout } => {
            let cfg = layout_or_reference(layout.as_deref())?;
            let null = find_radial_null(&cfg.layout, &cfg.drive, 0.0, (100.0 * MICRON, 0.0))?;
            let model = FieldModel::new(&cfg.layout, &cfg.drive, DriveKind::Rf)?;
            let pp = Pseudopotential::new(&model, cfg.ion, cfg.drive.rf_frequency)?;
            let m = trap_metrics(&pp, null.position)?;
            let f = m.modes.frequencies;
            println!("x0_um,nu_radial1_mhz,nu_radial2_mhz,nu_axial_mhz,depth_mev,mathieu_q,null_pp_mev");
            println!(
                "{},{},{},{},{},{},{}",
                null.position.x / MICRON,
                f[0] / 1e6,
                f[1] / 1e6,
                f[2] / 1e6,
                m.depth.depth_ev * 1e3,
                m.mathieu.q,
                joule_to_ev(pp.value(null.position)?) * 1e3
            );
            Ok(0)
        }
        Command::Grating { preset, n_eff, wavelength_nm, order, angles, period_tol_nm, ion_height_um } => {
            let mut d: GratingDesign = match preset.as_str() {
                "sin-sensitivity" => presets::SIN_SENSITIVITY,
                "alo-sensitivity" => presets::ALO_SENSITIVITY,
                "sin-order-cutoff" => presets::SIN_ORDER_CUTOFF,
                other => return Err(Error::InvalidArgument(format!("unknown grating preset `{other}`"))),
            };
            d.n_eff = n_eff.unwrap_or(d.n_eff);
            d.wavelength = wavelength_nm.map_or(d.wavelength, |w| w * NANOMETER);
            d.order = order.unwrap_or(d.order);
            let angles = angles.unwrap_or_else(|| (-16..=12).map(|k| 5.0 * k as f64).collect());
            let rows = design_table(&d, &angles, period_tol_nm * NANOMETER, ion_height_um * MICRON)?;
            println!("theta_deg,period_nm,feature_nm,sensitivity_deg_per_nm,orders,angle_error_deg,beam_offset_um");
            for r in rows {
                let orders: Vec<String> = r.orders.iter().map(|m| m.to_string()).collect();
                println!(
                    "{},{:.3},{:.3},{:.4},{},{:.5},{:.4}",
                    r.theta_deg,
                    r.period_nm,
                    r.feature_nm,
                    r.sensitivity_deg_per_nm,
                    orders.join(";"),
                    r.angle_error_deg,
                    r.beam_offset_um
                );
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
