//! Superposition, hole handling and coating limits of the assembled field.

use num_complex::Complex64;
use proptest::prelude::*;

use surftrap::config::LayoutConfig;
use surftrap::constants::GOLD_CONDUCTIVITY;
use surftrap::fieldkernel::{patch_field, DrivenPatch};
use surftrap::geometry::{build_reference_layout, decompose, Excitation};
use surftrap::tco::{TcoModel, DEFAULT_THICKNESS};
use surftrap::{Aperture, Coating, Drive, DriveKind, FieldModel, PhasorField3, Point3, Rect, TrapLayout};

const UM: f64 = 1e-6;

fn probes() -> Vec<Point3> {
    let mut v = Vec::new();
    for x in [40.0, 100.0, 180.0] {
        for (y, z) in [(0.0, 0.0), (30.0, -50.0), (-90.0, 120.0), (126.8, 10.0)] {
            v.push(Point3::new(x * UM, y * UM, z * UM));
        }
    }
    v
}

fn diff(a: &PhasorField3, b: &PhasorField3) -> f64 {
    a.components().iter().zip(b.components()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

fn rf_field(layout: &TrapLayout, drive: &Drive, p: Point3) -> PhasorField3 {
    FieldModel::new(layout, drive, DriveKind::Rf).unwrap().field(p).unwrap()
}

fn coated(sigma: f64, w: f64) -> TrapLayout {
    let ap = Aperture::new(126.8 * UM, 0.0, w * UM)
        .with_coating(Coating::Tco { conductivity: sigma, thickness: DEFAULT_THICKNESS });
    build_reference_layout().with_aperture(ap).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Doubling every amplitude doubles every phasor component.
    #[test]
    fn superposition_scales_linearly(k in 0.1..10.0f64, x in 20.0..300.0f64, y in -300.0..300.0f64, z in -600.0..600.0f64) {
        let cfg = LayoutConfig::reference();
        let p = Point3::new(x * UM, y * UM, z * UM);
        let a = rf_field(&cfg.layout, &cfg.drive, p);
        let b = rf_field(&cfg.layout, &cfg.drive.scaled(k), p);
        for (u, v) in a.components().iter().zip(b.components()) {
            prop_assert!((u * k - v).norm() <= 1e-12 * a.norm().max(1e-300));
        }
    }

    /// Driving two electrodes together equals the sum of driving each alone.
    #[test]
    fn superposition_adds_electrodes(ph in 0.0..6.28f64, x in 20.0..300.0f64, y in -300.0..300.0f64) {
        let layout = build_reference_layout();
        let w = 1e8;
        let a = Excitation { amplitude: 100.0, phase: 0.0, kind: DriveKind::Rf };
        let b = Excitation { amplitude: 60.0, phase: ph, kind: DriveKind::Rf };
        let both = Drive::new(w).with("rf_pos", a).with("odc_neg_3", b);
        let p = Point3::new(x * UM, y * UM, 0.0);
        let sum = rf_field(&layout, &Drive::new(w).with("rf_pos", a), p).components();
        let other = rf_field(&layout, &Drive::new(w).with("odc_neg_3", b), p).components();
        let tot = rf_field(&layout, &both, p);
        for i in 0..3 {
            prop_assert!((sum[i] + other[i] - tot.components()[i]).norm() <= 1e-12 * tot.norm());
        }
    }
}

/// An uncoated hole equals the solid electrode minus the same patch.
#[test]
fn hole_is_solid_minus_patch() {
    let cfg = LayoutConfig::reference();
    let ap = Aperture::new(126.8 * UM, 40.0 * UM, 30.0 * UM);
    let holed = cfg.layout.with_aperture(ap).unwrap();
    let v = cfg.drive.excitations["rf_pos"].amplitude;
    for p in probes() {
        let solid = rf_field(&cfg.layout, &cfg.drive, p).components();
        let with_hole = rf_field(&holed, &cfg.drive, p).components();
        let patch = patch_field(&ap.rect().unwrap(), p).unwrap();
        for i in 0..3 {
            let expected = solid[i] - v * patch[i];
            assert!((expected - with_hole[i]).norm() <= 1e-10 * solid[i].norm().max(1.0), "{p:?} {i}");
        }
    }
}

/// Rebuilding the model by hand from the decomposition reproduces it.
#[test]
fn hand_assembled_model_matches() {
    let l = build_reference_layout().with_aperture(Aperture::new(126.8 * UM, 0.0, 30.0 * UM)).unwrap();
    let drive = Drive::rf(&l, 100.0, 1e8);
    let mut patches = Vec::new();
    for id in ["rf_pos", "rf_neg"] {
        for r in decompose(l.electrode(id).unwrap()).unwrap().solids {
            patches.push(DrivenPatch { rect: r, volts: Complex64::new(100.0, 0.0) });
        }
    }
    let hand = FieldModel::from_patches(patches);
    let model = FieldModel::new(&l, &drive, DriveKind::Rf).unwrap();
    for p in probes() {
        assert!(diff(&hand.field(p).unwrap(), &model.field(p).unwrap()) <= 1e-12 * model.field(p).unwrap().norm());
    }
}

/// A single patch driven at phase φ is the unit field rotated by e^{iφ}.
#[test]
fn phase_rotates_the_phasor() {
    let r = Rect::centered(0.0, 0.0, 40.0 * UM, 40.0 * UM).unwrap();
    let p = Point3::new(60.0 * UM, 20.0 * UM, -10.0 * UM);
    let e = patch_field(&r, p).unwrap();
    for k in 0..8 {
        let ph = k as f64 * std::f64::consts::FRAC_PI_4;
        let v = Complex64::from_polar(3.0, ph);
        let f = FieldModel::from_patches(vec![DrivenPatch { rect: r, volts: v }]).field(p).unwrap();
        for (c, re) in f.components().iter().zip(e) {
            assert!((c - v * re).norm() <= 1e-12 * re.abs() * 3.0);
        }
    }
}

/// σ → 0: the coating floats to ground and the layout matches the bare hole.
#[test]
fn insulating_coating_matches_open_hole() {
    let cfg = LayoutConfig::reference();
    let open = cfg.layout.with_aperture(Aperture::new(126.8 * UM, 0.0, 30.0 * UM)).unwrap();
    let dead = coated(1e-30, 30.0);
    let h = TcoModel::new(1e-30, 30.0 * UM).transfer(cfg.drive.rf_frequency).unwrap();
    assert!(h.norm() < 1e-12);
    for p in probes() {
        let a = rf_field(&open, &cfg.drive, p);
        let b = rf_field(&dead, &cfg.drive, p);
        assert!(diff(&a, &b) <= 1e-12 * a.norm(), "{p:?}");
    }
}

/// Gold coating reproduces the aperture-free trap up to |1 - H|.
#[test]
fn gold_coating_recovers_reference() {
    let cfg = LayoutConfig::reference();
    let h = TcoModel::new(GOLD_CONDUCTIVITY, 30.0 * UM).transfer(cfg.drive.rf_frequency).unwrap();
    assert!((1.0 - h).norm() < 1e-5);
    let gold = coated(GOLD_CONDUCTIVITY, 30.0);
    let open = cfg.layout.with_aperture(Aperture::new(126.8 * UM, 0.0, 30.0 * UM)).unwrap();
    for p in probes() {
        let r = rf_field(&cfg.layout, &cfg.drive, p);
        let g = rf_field(&gold, &cfg.drive, p);
        let o = rf_field(&open, &cfg.drive, p);
        // the aperture's own contribution, scaled by the coating leak
        let bound = (1.0 - h).norm() * diff(&o, &r) * (1.0 + 1e-9) + 1e-12 * r.norm();
        assert!(diff(&g, &r) <= bound, "{p:?}: {} > {bound}", diff(&g, &r));
    }
    // exactly H = 1 is exactly the reference
    let mut patches: Vec<DrivenPatch> = Vec::new();
    for id in ["rf_pos", "rf_neg"] {
        let parts = decompose(open.electrode(id).unwrap()).unwrap();
        for r in parts.solids.iter().chain(&parts.holes) {
            patches.push(DrivenPatch { rect: *r, volts: Complex64::new(100.0, 0.0) });
        }
    }
    let unity = FieldModel::from_patches(patches);
    for p in probes() {
        let r = rf_field(&cfg.layout, &cfg.drive, p);
        assert!(diff(&unity.field(p).unwrap(), &r) <= 1e-12 * r.norm());
    }
}

/// Conductivities in the practical ITO range are indistinguishable from gold.
#[test]
fn ito_band_matches_gold() {
    let cfg = LayoutConfig::reference();
    let gold = coated(GOLD_CONDUCTIVITY, 30.0);
    for sigma in [1e5, 1e6, 1e7] {
        let l = coated(sigma, 30.0);
        for p in probes() {
            let g = rf_field(&gold, &cfg.drive, p);
            let s = rf_field(&l, &cfg.drive, p);
            assert!(diff(&g, &s) < 1e-3 * g.norm(), "σ {sigma:e} at {p:?}");
        }
    }
}
