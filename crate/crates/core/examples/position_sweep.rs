//! Null displacement as the aperture slides along (p_z) and across (p_y) the RF rail.
//!
//!     cargo run --release --example position_sweep

use surftrap::analysis::displacement;
use surftrap::config::LayoutConfig;
use surftrap::constants::{MICRON, NANOMETER};
use surftrap::Aperture;

fn main() -> surftrap::Result<()> {
    let cfg = LayoutConfig::reference();
    println!("p_z_um,dx0_nm,dy0_nm");
    for k in 0..=12 {
        let p_z = 25.0 * k as f64;
        let l = cfg.layout.with_aperture(Aperture::new(126.8 * MICRON, p_z * MICRON, 30.0 * MICRON))?;
        let d = displacement(&l, &cfg.drive, 0.0)?;
        println!("{p_z},{:.3},{:.3}", d.dx / NANOMETER, d.dy / NANOMETER);
    }
    println!();
    println!("p_y_um,dx0_nm,dy0_nm");
    for k in 0..=12 {
        let p_y = 66.8 + 10.0 * k as f64;
        let l = cfg.layout.with_aperture(Aperture::new(p_y * MICRON, 0.0, 30.0 * MICRON))?;
        let d = displacement(&l, &cfg.drive, 0.0)?;
        println!("{p_y:.1},{:.3},{:.3}", d.dx / NANOMETER, d.dy / NANOMETER);
    }
    Ok(())
}
