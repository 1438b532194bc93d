//! Closed-form patch kernel against independent numerical oracles.

mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{fd_field, laplacian, random_case, solid_angle_oracle, UM};
use surftrap::fieldkernel::{patch_field, patch_potential};
use surftrap::geometry::build_reference_layout;
use surftrap::{Drive, DriveKind, FieldModel, Point3, Rect};

#[test]
fn potential_matches_solid_angle_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x50_1d);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (r, p) = random_case(&mut rng);
        let exact = patch_potential(&r, p).unwrap();
        let oracle = solid_angle_oracle(&r, p);
        worst = worst.max((exact - oracle).abs());
        assert!((exact - oracle).abs() < 1e-9, "{r:?} {p:?}: {exact} vs {oracle}");
    }
    eprintln!("worst |Δφ| = {worst:e}");
}

#[test]
fn cube_face_and_near_patch_points() {
    let r = Rect::centered(0.0, 0.0, 30.0 * UM, 30.0 * UM).unwrap();
    let phi = patch_potential(&r, Point3::new(15.0 * UM, 0.0, 0.0)).unwrap();
    assert!((phi - 1.0 / 3.0).abs() < 1e-12);
    // a hair above an interior point: the guard band keeps φ -> 1
    let phi = patch_potential(&r, Point3::new(1e-12, 3.0 * UM, -7.0 * UM)).unwrap();
    assert!((phi - 1.0).abs() < 1e-6, "{phi}");
    assert!((solid_angle_oracle(&r, Point3::new(15.0 * UM, 0.0, 0.0)) - 1.0 / 3.0).abs() < 1e-11);
}

#[test]
fn field_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let (r, p) = random_case(&mut rng);
        let e = patch_field(&r, p).unwrap();
        let fd = fd_field(&r, p);
        let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        for i in 0..3 {
            assert!((e[i] - fd[i]).abs() <= 1e-6 * norm, "{r:?} {p:?} comp {i}: {} vs {}", e[i], fd[i]);
        }
    }
}

#[test]
fn layout_potential_is_harmonic() {
    let layout = build_reference_layout();
    let drive = Drive::rf(&layout, 100.0, 1e8);
    let model = FieldModel::new(&layout, &drive, DriveKind::Rf).unwrap();
    let phi = |p: Point3| model.potential(p).unwrap().re;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let p = Point3::new(
            rng.random_range(20.0..300.0) * UM,
            rng.random_range(-300.0..300.0) * UM,
            rng.random_range(-500.0..500.0) * UM,
        );
        let h = 0.01 * p.x;
        let lap = laplacian(&phi, p, h);
        let e = model.field(p).unwrap().norm();
        // scale: |∇φ| / h; a non-harmonic function would give O(1) here
        assert!(lap.abs() < 1e-4 * e / h, "{p:?}: lap {lap:e}, scale {:e}", e / h);
    }
}

#[test]
fn field_is_antisymmetric_under_reflection() {
    let r = Rect::new(-20.0 * UM, 50.0 * UM, -10.0 * UM, 40.0 * UM).unwrap();
    let m = Rect { y_min: -r.y_max, y_max: -r.y_min, ..r };
    let p = Point3::new(33.0 * UM, 17.0 * UM, 5.0 * UM);
    let a = patch_field(&r, p).unwrap();
    let b = patch_field(&m, Point3::new(p.x, -p.y, p.z)).unwrap();
    assert!((a[0] - b[0]).abs() < 1e-12 * a[0].abs());
    assert!((a[1] + b[1]).abs() < 1e-12 * a[1].abs());
    assert!((a[2] - b[2]).abs() < 1e-12 * a[2].abs());
}
