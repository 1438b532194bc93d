//! Numerical oracles shared by the integration tests.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use surftrap::fieldkernel::patch_potential;
use surftrap::{Point3, Rect};

pub const UM: f64 = 1e-6;

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let s = f(c - h * XGK[i]) + f(c + h * XGK[i]);
        kron += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (v, err) = gk15(f, a, b);
    if err <= tol || depth == 0 {
        return v;
    }
    let m = 0.5 * (a + b);
    adaptive(f, a, m, 0.5 * tol, depth - 1) + adaptive(f, m, b, 0.5 * tol, depth - 1)
}

/// Integrate over `[a, b]`, splitting at `at` when it lies inside so the
/// peak of the integrand sits on a panel edge.
fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, at: f64, tol: f64) -> f64 {
    if at > a && at < b {
        adaptive(f, a, at, 0.5 * tol, 40) + adaptive(f, at, b, 0.5 * tol, 40)
    } else {
        adaptive(f, a, b, tol, 40)
    }
}

/// Solid angle of `r` seen from `p`, divided by 2π, by nested quadrature of
/// x / (2π R³) over the patch.
pub fn solid_angle_oracle(r: &Rect, p: Point3) -> f64 {
    // scale to units of x so the integrand is O(1)
    let s = p.x;
    let (y0, y1, z0, z1) = ((r.y_min - p.y) / s, (r.y_max - p.y) / s, (r.z_min - p.z) / s, (r.z_max - p.z) / s);
    let inner = |v: f64| {
        let g = move |w: f64| 1.0 / (1.0 + v * v + w * w).powf(1.5);
        integrate(&g, z0, z1, 0.0, 1e-14)
    };
    integrate(&inner, y0, y1, 0.0, 1e-13) / (2.0 * std::f64::consts::PI)
}

pub fn random_case(rng: &mut ChaCha8Rng) -> (Rect, Point3) {
    let wy = rng.random_range(1.0..400.0) * UM;
    let wz = rng.random_range(1.0..400.0) * UM;
    let cy = rng.random_range(-300.0..300.0) * UM;
    let cz = rng.random_range(-300.0..300.0) * UM;
    let r = Rect::centered(cy, cz, wy, wz).unwrap();
    let p = Point3::new(
        rng.random_range(2.0..400.0) * UM,
        rng.random_range(-400.0..400.0) * UM,
        rng.random_range(-400.0..400.0) * UM,
    );
    (r, p)
}

/// Field of one patch by Richardson-extrapolated central differences of φ.
pub fn fd_field(r: &Rect, p: Point3) -> [f64; 3] {
    // step scaled to the height, the shortest length in the integrand
    let h = 1e-4 * p.x;
    let phi = |q: Point3| patch_potential(r, q).unwrap();
    let d = |dx: f64, dy: f64, dz: f64, h: f64| {
        -(phi(p.offset(dx * h, dy * h, dz * h)) - phi(p.offset(-dx * h, -dy * h, -dz * h))) / (2.0 * h)
    };
    let e = |dx, dy, dz| (4.0 * d(dx, dy, dz, 0.5 * h) - d(dx, dy, dz, h)) / 3.0;
    [e(1.0, 0.0, 0.0), e(0.0, 1.0, 0.0), e(0.0, 0.0, 1.0)]
}

/// Seven-point Laplacian of `phi` at `p` with step `h`.
pub fn laplacian(phi: &dyn Fn(Point3) -> f64, p: Point3, h: f64) -> f64 {
    let mut s = -6.0 * phi(p);
    for (dx, dy, dz) in [(h, 0.0, 0.0), (-h, 0.0, 0.0), (0.0, h, 0.0), (0.0, -h, 0.0), (0.0, 0.0, h), (0.0, 0.0, -h)] {
        s += phi(p.offset(dx, dy, dz));
    }
    s / (h * h)
}
