//! The unit-patch potential is the solid angle over 2π; a few familiar cases.
//!
//!     cargo run --example kernel_solid_angle

use surftrap::constants::MICRON;
use surftrap::fieldkernel::{patch_field, patch_potential};
use surftrap::{Point3, Rect};

fn main() -> surftrap::Result<()> {
    let side = 30.0 * MICRON;
    let patch = Rect::centered(0.0, 0.0, side, side)?;

    // centre of a cube whose face is the patch: one sixth of 4π
    let p = Point3::new(0.5 * side, 0.0, 0.0);
    println!("cube centre        phi = {:.15}  (1/3)", patch_potential(&patch, p)?);

    // just above the interior the patch fills the half space
    let p = Point3::new(1e-3 * MICRON, 5.0 * MICRON, -3.0 * MICRON);
    println!("1 nm above patch   phi = {:.9}", patch_potential(&patch, p)?);

    // far away it looks like a dipole of strength area / 2π
    for x in [100.0, 1000.0, 10000.0] {
        let p = Point3::new(x * MICRON, 0.0, 0.0);
        let far = side * side / (2.0 * std::f64::consts::PI * (x * MICRON).powi(2));
        println!("x = {x:>7} um     phi = {:.6e}  far field {:.6e}", patch_potential(&patch, p)?, far);
    }

    let p = Point3::new(20.0 * MICRON, 10.0 * MICRON, 40.0 * MICRON);
    let e = patch_field(&patch, p)?;
    println!("unit field at (20, 10, 40) um: [{:.4e}, {:.4e}, {:.4e}] V/m per V", e[0], e[1], e[2]);
    Ok(())
}
