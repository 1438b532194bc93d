//! Mirroring an aperture across the axis cancels Ey; mirroring again cancels Ez(0).
//!
//!     cargo run --release --example symmetry

use surftrap::analysis::{axial_scan, find_radial_null, Component};
use surftrap::config::LayoutConfig;
use surftrap::constants::MICRON;
use surftrap::geometry::{symmetrize, MirrorAxis};
use surftrap::Aperture;

fn main() -> surftrap::Result<()> {
    let cfg = LayoutConfig::reference();
    let height = find_radial_null(&cfg.layout, &cfg.drive, 0.0, (100.0 * MICRON, 0.0))?.position.x;
    let single = cfg.layout.with_aperture(Aperture::new(126.8 * MICRON, 100.0 * MICRON, 30.0 * MICRON))?;
    let cases = [
        ("single", single.clone()),
        ("z-mirrored", symmetrize(&single, &[MirrorAxis::ZAxis])?),
        ("four-fold", symmetrize(&single, &[MirrorAxis::ZAxis, MirrorAxis::YAxis])?),
    ];
    for (name, layout) in cases {
        let scan = axial_scan(&layout, &cfg.drive, (-1000.0 * MICRON, 1000.0 * MICRON), 2001, height)?;
        let max = |c| scan.component(c).iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mid = &scan.fields[scan.z.len() / 2];
        println!(
            "{name:<11} {} apertures  max|Ey| {:.3e}  |Ex(0)| {:.3e}  |Ez(0)| {:.3e} V/m",
            layout.aperture_count(),
            max(Component::Y),
            mid.ex.norm(),
            mid.ez.norm()
        );
    }
    Ok(())
}
