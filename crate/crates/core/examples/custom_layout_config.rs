//! Load a layout file and measure how far its apertures move the null.
//!
//!     cargo run --release --example custom_layout_config [layout.toml]

use std::path::PathBuf;

use surftrap::analysis::{displacement_from, REFERENCE_GUESS};
use surftrap::config::load_layout;
use surftrap::constants::{MICRON, NANOMETER};

fn main() -> surftrap::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/layout.toml"));
    let cfg = load_layout(&path)?;
    println!("{}: {} electrodes, {} apertures", path.display(), cfg.layout.electrodes().len(), cfg.layout.aperture_count());
    for (e, a) in cfg.layout.apertures() {
        println!("  {:<8} aperture at ({:.1}, {:.1}) um, {:.1} um wide", e.id, a.center_y / MICRON, a.center_z / MICRON, a.width / MICRON);
    }
    let d = displacement_from(&cfg.layout, &cfg.layout.without_apertures(), &cfg.drive, 0.0, REFERENCE_GUESS)?;
    println!(
        "null ({:.3}, {:.4}) um, shifted by ({:.2}, {:.2}) nm, residual {:.2e} V/m",
        d.null.position.x / MICRON,
        d.null.position.y / MICRON,
        d.dx / NANOMETER,
        d.dy / NANOMETER,
        d.null.residual
    );
    Ok(())
}
