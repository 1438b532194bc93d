//! Layout configuration files.
//!
//! Layouts are TOML documents in lab units: lengths in µm, voltages in V,
//! phases in degrees, frequencies in MHz, conductivities in S/m, ion mass
//! in u and charge in units of e. Validation errors carry the line of the
//! offending table so a broken layout can be fixed without guesswork.
//!
//! ```toml
//! base = "reference"             # start from the built-in trap (optional)
//!
//! [[aperture]]
//! center = [126.8, 0.0]          # (p_y, p_z)
//! width = 30.0
//! coating = { conductivity = 1e6, thickness = 0.05 }
//!
//! [drive]
//! rf_frequency_mhz = 16.0
//! rf_amplitude = 100.0
//!
//! [ion]
//! mass_u = 171.9363815
//! charge_e = 1
//! ```

use std::f64::consts::PI;
use std::ops::Range;
use std::path::Path;

use serde::Deserialize;
use toml::Spanned;

use crate::constants::{mhz_to_angular, ATOMIC_MASS_UNIT, ELECTRON_MASS_U, ELEMENTARY_CHARGE, MICRON};
use crate::error::{Error, Result};
use crate::geometry::{
    build_reference_layout, reference, Aperture, Coating, Drive, DriveKind, Electrode, ElectrodeKind, Excitation,
    LayoutMetadata, Rect, TrapLayout,
};
use crate::rfdynamics::IonSpecies;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayout {
    base: Option<Spanned<String>>,
    simulation: Option<Spanned<RawSimulation>>,
    #[serde(default)]
    electrode: Vec<Spanned<RawElectrode>>,
    #[serde(default)]
    aperture: Vec<Spanned<RawAperture>>,
    drive: Option<Spanned<RawDrive>>,
    ion: Option<Spanned<RawIon>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulation {
    y: [f64; 2],
    z: [f64; 2],
    electrode_thickness: Option<f64>,
    ground_depth: Option<f64>,
    cladding_permittivity: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawElectrode {
    id: String,
    kind: String,
    y: [f64; 2],
    z: [f64; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAperture {
    center: [f64; 2],
    width: f64,
    electrode: Option<String>,
    coating: Option<RawCoating>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoating {
    conductivity: f64,
    /// µm
    thickness: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDrive {
    rf_frequency_mhz: f64,
    rf_amplitude: Option<f64>,
    #[serde(default)]
    electrode: Vec<Spanned<RawExcitation>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExcitation {
    id: String,
    amplitude: f64,
    #[serde(default)]
    phase_deg: f64,
    kind: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIon {
    mass_u: f64,
    #[serde(default = "one")]
    charge_e: f64,
}

fn one() -> f64 {
    1.0
}

/// A validated layout file: geometry, drives and ion species.
#[derive(Debug, Clone, PartialEq)]
pub struct LayoutConfig {
    pub layout: TrapLayout,
    pub drive: Drive,
    pub ion: IonSpecies,
}

impl LayoutConfig {
    /// Reference trap with the default RF drive and ¹⁷²Yb⁺.
    pub fn reference() -> Self {
        let layout = build_reference_layout();
        let drive = Drive::rf(&layout, reference::RF_AMPLITUDE, mhz_to_angular(reference::RF_FREQUENCY_MHZ));
        Self { layout, drive, ion: IonSpecies::ytterbium_172() }
    }
}

pub(crate) fn line_of(src: &str, span: Range<usize>) -> usize {
    src[..span.start.min(src.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn at<T>(src: &str, span: Range<usize>, message: impl Into<String>) -> Result<T> {
    Err(Error::Config { line: line_of(src, span), message: message.into() })
}

fn rect_um(y: [f64; 2], z: [f64; 2]) -> Result<Rect> {
    Rect::new(y[0] * MICRON, y[1] * MICRON, z[0] * MICRON, z[1] * MICRON)
}

/// Parse and validate a layout document.
pub fn parse_layout(src: &str) -> Result<LayoutConfig> {
    let raw: RawLayout = toml::from_str(src).map_err(|e| Error::Config {
        line: e.span().map(|s| line_of(src, s)).unwrap_or(0),
        message: e.message().to_string(),
    })?;

    let mut layout = match &raw.base {
        Some(b) if b.get_ref() == "reference" => build_reference_layout(),
        Some(b) => return at(src, b.span(), format!("unknown base layout `{}`", b.get_ref())),
        None => {
            let Some(sim) = &raw.simulation else {
                return at(src, 0..0, "either `base` or a [simulation] table is required");
            };
            let s = sim.get_ref();
            let region = rect_um(s.y, s.z).or_else(|e| at(src, sim.span(), e.to_string()))?;
            let d = LayoutMetadata::default();
            let meta = LayoutMetadata {
                electrode_thickness: s.electrode_thickness.map_or(d.electrode_thickness, |v| v * MICRON),
                ground_depth: s.ground_depth.map_or(d.ground_depth, |v| v * MICRON),
                cladding_permittivity: s.cladding_permittivity.unwrap_or(d.cladding_permittivity),
            };
            TrapLayout::new(Vec::new(), region, meta).or_else(|e| at(src, sim.span(), e.to_string()))?
        }
    };
    if raw.base.is_some() && raw.simulation.is_some() {
        return at(src, raw.simulation.as_ref().unwrap().span(), "[simulation] cannot be combined with `base`");
    }

    // electrodes one at a time so a violation points at the table that caused it
    for e in &raw.electrode {
        let re = e.get_ref();
        let kind = ElectrodeKind::parse(&re.kind)
            .map_or_else(|| at(src, e.span(), format!("unknown electrode kind `{}`", re.kind)), Ok)?;
        let region = rect_um(re.y, re.z).or_else(|err| at(src, e.span(), err.to_string()))?;
        let mut electrodes = layout.electrodes().to_vec();
        electrodes.push(Electrode::new(re.id.clone(), kind, region));
        layout = TrapLayout::new(electrodes, layout.sim_region(), layout.metadata())
            .or_else(|err| at(src, e.span(), err.to_string()))?;
    }

    for a in &raw.aperture {
        let ra = a.get_ref();
        let coating = match &ra.coating {
            None => Coating::None,
            Some(c) => Coating::Tco {
                conductivity: c.conductivity,
                thickness: c.thickness.map_or(crate::tco::DEFAULT_THICKNESS, |t| t * MICRON),
            },
        };
        let ap = Aperture::new(ra.center[0] * MICRON, ra.center[1] * MICRON, ra.width * MICRON).with_coating(coating);
        let next = match &ra.electrode {
            Some(id) => layout.with_aperture_in(id, ap),
            None => layout.with_aperture(ap),
        };
        layout = next.or_else(|err| at(src, a.span(), err.to_string()))?;
    }

    if layout.electrodes().is_empty() {
        return at(src, 0..0, "layout defines no electrodes");
    }

    let drive = match &raw.drive {
        None => Drive::rf(&layout, reference::RF_AMPLITUDE, mhz_to_angular(reference::RF_FREQUENCY_MHZ)),
        Some(d) => {
            let rd = d.get_ref();
            if !(rd.rf_frequency_mhz > 0.0) {
                return at(src, d.span(), "rf_frequency_mhz must be positive");
            }
            let omega = mhz_to_angular(rd.rf_frequency_mhz);
            let mut drive = match rd.rf_amplitude {
                Some(v) => Drive::rf(&layout, v, omega),
                None => Drive::new(omega),
            };
            for ex in &rd.electrode {
                let re = ex.get_ref();
                let kind = match re.kind.as_str() {
                    "rf" => DriveKind::Rf,
                    "dc" => DriveKind::Dc,
                    other => return at(src, ex.span(), format!("drive kind must be `rf` or `dc`, got `{other}`")),
                };
                if layout.electrode(&re.id).is_err() {
                    return at(src, ex.span(), format!("drive references unknown electrode `{}`", re.id));
                }
                drive.excitations.insert(
                    re.id.clone(),
                    Excitation { amplitude: re.amplitude, phase: re.phase_deg * PI / 180.0, kind },
                );
            }
            drive.validate(&layout).or_else(|err| at(src, d.span(), err.to_string()))?;
            drive
        }
    };

    let ion = match &raw.ion {
        None => IonSpecies::ytterbium_172(),
        Some(i) => {
            let ri = i.get_ref();
            IonSpecies::new((ri.mass_u - ri.charge_e * ELECTRON_MASS_U) * ATOMIC_MASS_UNIT, ri.charge_e * ELEMENTARY_CHARGE)
                .or_else(|err| at(src, i.span(), err.to_string()))?
        }
    };

    Ok(LayoutConfig { layout, drive, ion })
}

pub fn load_layout(path: &Path) -> Result<LayoutConfig> {
    parse_layout(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_base_with_aperture() {
        let cfg = parse_layout(
            r#"
base = "reference"
[[aperture]]
center = [126.8, 0.0]
width = 30.0
"#,
        )
        .unwrap();
        assert_eq!(cfg.layout.electrode("rf_pos").unwrap().apertures.len(), 1);
        assert_eq!(cfg.drive.excitations.len(), 2);
        assert_eq!(cfg.ion, IonSpecies::ytterbium_172());
    }

    #[test]
    fn explicit_layout_with_drives() {
        let cfg = parse_layout(
            r#"
[simulation]
y = [-500.0, 500.0]
z = [-1000.0, 1000.0]

[[electrode]]
id = "a"
kind = "rf"
y = [50.0, 200.0]
z = [-1000.0, 1000.0]

[[electrode]]
id = "b"
kind = "rf"
y = [-200.0, -50.0]
z = [-1000.0, 1000.0]

[[aperture]]
center = [120.0, 10.0]
width = 20.0
electrode = "a"
coating = { conductivity = 1e6 }

[drive]
rf_frequency_mhz = 20.0
[[drive.electrode]]
id = "a"
amplitude = 80.0
kind = "rf"
[[drive.electrode]]
id = "b"
amplitude = 80.0
phase_deg = 90.0
kind = "rf"

[ion]
mass_u = 40.0
"#,
        )
        .unwrap();
        assert_eq!(cfg.layout.electrodes().len(), 2);
        let ap = cfg.layout.electrode("a").unwrap().apertures[0];
        assert!(matches!(ap.coating, Coating::Tco { thickness, .. } if (thickness - 50e-9).abs() < 1e-15));
        assert!((cfg.drive.excitations["b"].phase - PI / 2.0).abs() < 1e-15);
        assert!((cfg.drive.rf_frequency - mhz_to_angular(20.0)).abs() < 1e-6);
    }

    #[test]
    fn overlap_is_reported_on_the_offending_line() {
        let src = r#"[simulation]
y = [-500.0, 500.0]
z = [-1000.0, 1000.0]

[[electrode]]
id = "a"
kind = "rf"
y = [50.0, 200.0]
z = [-1000.0, 1000.0]

[[electrode]]
id = "b"
kind = "center-dc"
y = [150.0, 300.0]
z = [-1000.0, 1000.0]
"#;
        match parse_layout(src) {
            Err(Error::Config { line, message }) => {
                assert!((11..=15).contains(&line), "line {line}");
                assert!(message.contains("overlap"), "{message}");
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn aperture_outside_electrode_is_rejected() {
        let src = "base = \"reference\"\n\n[[aperture]]\ncenter = [49.3, 0.0]\nwidth = 30.0\n";
        match parse_layout(src) {
            Err(Error::Config { line, .. }) => assert!((3..=5).contains(&line)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_and_schema_errors() {
        assert!(matches!(parse_layout("base = "), Err(Error::Config { line: 1, .. })));
        assert!(matches!(parse_layout("base = \"reference\"\nbogus = 1\n"), Err(Error::Config { .. })));
        assert!(matches!(parse_layout("base = \"other\""), Err(Error::Config { line: 1, .. })));
        let e = parse_layout("base = \"reference\"\n[drive]\nrf_frequency_mhz = 16.0\n[[drive.electrode]]\nid = \"zz\"\namplitude = 1.0\nkind = \"rf\"\n");
        assert!(matches!(e, Err(Error::Config { .. })));
    }
}
