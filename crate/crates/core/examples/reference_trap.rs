//! Null position, secular frequencies, depth and Mathieu q of the reference trap.
//!
//!     cargo run --release --example reference_trap

use surftrap::analysis::find_radial_null;
use surftrap::config::LayoutConfig;
use surftrap::constants::{joule_to_ev, MICRON};
use surftrap::rfdynamics::{trap_metrics, Pseudopotential};
use surftrap::{DriveKind, FieldModel};

fn main() -> surftrap::Result<()> {
    let cfg = LayoutConfig::reference();
    let null = find_radial_null(&cfg.layout, &cfg.drive, 0.0, (100.0 * MICRON, 0.0))?;
    println!(
        "null at x0 = {:.3} um, y0 = {:.2e} um, residual {:.2e} V/m ({} iterations)",
        null.position.x / MICRON,
        null.position.y / MICRON,
        null.residual,
        null.iterations
    );

    let model = FieldModel::new(&cfg.layout, &cfg.drive, DriveKind::Rf)?;
    let pp = Pseudopotential::new(&model, cfg.ion, cfg.drive.rf_frequency)?;
    let m = trap_metrics(&pp, null.position)?;
    let [r1, r2] = m.modes.radial();
    println!("radial modes  {:.4} / {:.4} MHz", r1 / 1e6, r2 / 1e6);
    println!("axial mode    {:.1} Hz (RF only, no DC confinement)", m.modes.axial());
    println!(
        "depth         {:.2} meV, escape via ({:.1}, {:.1}) um",
        m.depth.depth_ev * 1e3,
        m.depth.escape.x / MICRON,
        m.depth.escape.y / MICRON
    );
    println!("mathieu q     {:.3} (stable: {})", m.mathieu.q, m.mathieu.stable);
    println!("pseudopotential at null: {:.2e} meV", joule_to_ev(pp.value(null.position)?) * 1e3);
    Ok(())
}
