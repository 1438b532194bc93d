//! Coated aperture: transfer function, crossover and the residual RF at the null.
//!
//!     cargo run --release --example tco_coating

use surftrap::analysis::find_radial_null;
use surftrap::config::LayoutConfig;
use surftrap::constants::{MICRON, NANOMETER};
use surftrap::tco::{TcoModel, DEFAULT_THICKNESS};
use surftrap::{Aperture, Coating};

fn main() -> surftrap::Result<()> {
    let cfg = LayoutConfig::reference();
    let omega = cfg.drive.rf_frequency;
    let w = 50.0 * MICRON;
    let model = TcoModel::new(1.0, w);
    println!("R C crossover for w_a = 50 um: {:.2} S/m", model.crossover_conductivity(omega));
    println!("sigma_s_per_m,h_abs,h_arg_rad,dy0_nm,residual_v_per_m");
    let base = find_radial_null(&cfg.layout, &cfg.drive, 0.0, (100.0 * MICRON, 0.0))?;
    for e in -3..=8 {
        let sigma = 10f64.powi(e);
        let h = TcoModel::new(sigma, w).transfer(omega)?;
        let ap = Aperture::new(126.8 * MICRON, 0.0, w)
            .with_coating(Coating::Tco { conductivity: sigma, thickness: DEFAULT_THICKNESS });
        let l = cfg.layout.with_aperture(ap)?;
        let n = find_radial_null(&l, &cfg.drive, 0.0, (base.position.x, base.position.y))?;
        println!(
            "{sigma:e},{:.6},{:.4},{:.3},{:.3e}",
            h.norm(),
            h.arg(),
            (n.position.y - base.position.y) / NANOMETER,
            n.residual
        );
    }
    Ok(())
}
