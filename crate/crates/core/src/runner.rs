//! Declarative experiments: one aperture (the probe) placed in a layout and
//! swept over a variable, with the chosen analyses run for every value.
//!
//! Records are computed in a worker pool and assembled in input order, so the
//! CSV body does not depend on the worker count. Files written by [`write`]:
//!
//! - `<name>.csv` (or `<name>.json` with [`OutputFormat::Json`]): one row per
//!   record, columns as in [`COLUMNS`].
//! - `<name>.meta.json`: config hash, version, timestamp, units, file list.
//! - `<name>_scan_NNN.csv`: complex axial field for record `NNN`.
//! - `<name>_grating.csv`: grating design table.
//! - `<name>.failures.json`: only when some records failed.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::Spanned;

use crate::analysis::{
    amplitude_at, axial_scan_in, find_radial_null_in, layout_hash, peak_metrics, AxialScan, Component, NullResult,
    DEFAULT_SCAN_HALF_RANGE, DEFAULT_SCAN_SAMPLES, REFERENCE_GUESS,
};
use crate::config::{line_of, load_layout, LayoutConfig};
use crate::constants::{angular_to_mhz, MICRON, NANOMETER};
use crate::error::{Error, Result};
use crate::fieldkernel::FieldModel;
use crate::geometry::{aperture_angle_deg, symmetrize, Aperture, Coating, DriveKind, ElectrodeKind, MirrorAxis, TrapLayout};
use crate::photonics::{design_table, presets as grating_presets, DesignRow, GratingDesign};
use crate::rfdynamics::{trap_metrics, Pseudopotential, TrapMetrics};
use crate::tco::DEFAULT_THICKNESS;

/// Environment variable that sets the worker count when no flag is given.
pub const WORKERS_ENV: &str = "SURFTRAP_WORKERS";

/// Record columns, in file order.
pub const COLUMNS: [&str; 30] = [
    "series",
    "value",
    "angle_deg",
    "x0_um",
    "y0_um",
    "dx0_um",
    "dy0_um",
    "residual_v_per_m",
    "ex_z0_v_per_m",
    "ey_z0_v_per_m",
    "ez_z0_v_per_m",
    "ex_peak_v_per_m",
    "ex_peak_z_um",
    "ex_fwhm_grad_v_per_mm2",
    "ex_disp_grad_v_per_mm2",
    "ey_peak_v_per_m",
    "ey_peak_z_um",
    "ey_fwhm_grad_v_per_mm2",
    "ey_disp_grad_v_per_mm2",
    "ez_peak_v_per_m",
    "ez_peak_z_um",
    "ez_fwhm_grad_v_per_mm2",
    "ez_disp_grad_v_per_mm2",
    "nu_radial1_mhz",
    "nu_radial2_mhz",
    "nu_axial_mhz",
    "depth_mev",
    "mathieu_q",
    "failed",
    "error",
];

const PRESETS: [(&str, &str); 10] = [
    ("reference-axial", include_str!("../presets/reference-axial.toml")),
    ("single-aperture-three-electrodes", include_str!("../presets/single-aperture-three-electrodes.toml")),
    ("pz-sweep", include_str!("../presets/pz-sweep.toml")),
    ("py-sweep", include_str!("../presets/py-sweep.toml")),
    ("wa-sweep", include_str!("../presets/wa-sweep.toml")),
    ("symmetry-study", include_str!("../presets/symmetry-study.toml")),
    ("tco-conductivity", include_str!("../presets/tco-conductivity.toml")),
    ("tco-phase", include_str!("../presets/tco-phase.toml")),
    ("gap-crossing", include_str!("../presets/gap-crossing.toml")),
    ("grating-table", include_str!("../presets/grating-table.toml")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Analysis {
    Null,
    Displacement,
    AxialScan,
    PeakMetrics,
    Metrics,
    GratingTable,
}

impl Analysis {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "null" => Analysis::Null,
            "displacement" => Analysis::Displacement,
            "axial-scan" => Analysis::AxialScan,
            "peak-metrics" => Analysis::PeakMetrics,
            "metrics" => Analysis::Metrics,
            "grating-table" => Analysis::GratingTable,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepVariable {
    PY,
    PZ,
    WA,
    Sigma,
    Symmetry,
    ElectrodeKind,
}

impl SweepVariable {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "p_y" => SweepVariable::PY,
            "p_z" => SweepVariable::PZ,
            "w_a" => SweepVariable::WA,
            "sigma" => SweepVariable::Sigma,
            "symmetry" => SweepVariable::Symmetry,
            "electrode-kind" => SweepVariable::ElectrodeKind,
            _ => return None,
        })
    }

    fn is_numeric(self) -> bool {
        matches!(self, SweepVariable::PY | SweepVariable::PZ | SweepVariable::WA | SweepVariable::Sigma)
    }
}

/// Mirror images added around the probe aperture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    #[default]
    None,
    /// Mirror across the trap axis (`y -> -y`).
    Z,
    /// Mirror across the axis, then across `z = 0`.
    Zy,
}

impl Symmetry {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "none" => Symmetry::None,
            "z" => Symmetry::Z,
            "zy" => Symmetry::Zy,
            _ => return None,
        })
    }

    fn axes(self) -> &'static [MirrorAxis] {
        match self {
            Symmetry::None => &[],
            Symmetry::Z => &[MirrorAxis::ZAxis],
            Symmetry::Zy => &[MirrorAxis::ZAxis, MirrorAxis::YAxis],
        }
    }
}

/// Sweep value as written in the config: numbers in config units (µm, S/m),
/// labels for the symmetry and electrode-kind sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Number(f64),
    Label(String),
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepValue::Number(v) => write!(f, "{v}"),
            SweepValue::Label(s) => f.write_str(s),
        }
    }
}

/// The swept aperture, in SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub p_y: Option<f64>,
    pub p_z: f64,
    pub width: f64,
    /// Host electrode; found from the position when absent.
    pub electrode: Option<String>,
    pub conductivity: Option<f64>,
    pub thickness: f64,
    pub symmetry: Symmetry,
}

impl Default for Probe {
    fn default() -> Self {
        Self {
            p_y: None,
            p_z: 0.0,
            width: 30.0 * MICRON,
            electrode: None,
            conductivity: None,
            thickness: DEFAULT_THICKNESS,
            symmetry: Symmetry::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub probe: Probe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<SweepValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSettings {
    pub half_range: f64,
    pub samples: usize,
    /// Defaults to the height of the base layout's null.
    pub height: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GratingSettings {
    pub design: GratingDesign,
    pub angles_deg: Vec<f64>,
    pub period_tol: f64,
    pub ion_height: f64,
}

/// A validated experiment.
#[derive(Debug, Clone, Serialize)]
pub struct Experiment {
    pub name: String,
    /// `"reference"` or the layout file path as written.
    pub layout_ref: String,
    #[serde(skip)]
    pub base: LayoutConfig,
    pub analyses: BTreeSet<Analysis>,
    /// One entry per series; a single unnamed series when none are given.
    pub series: Vec<Series>,
    pub sweep: Option<Sweep>,
    pub null_z: f64,
    pub null_guess: (f64, f64),
    pub scan: ScanSettings,
    pub grating: Option<GratingSettings>,
}

// ---- parsing -------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    name: Spanned<String>,
    layout: Option<Spanned<String>>,
    analyses: Spanned<Vec<String>>,
    probe: Option<Spanned<RawProbe>>,
    sweep: Option<Spanned<RawSweep>>,
    null: Option<Spanned<RawNull>>,
    scan: Option<Spanned<RawScan>>,
    grating: Option<Spanned<RawGrating>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProbe {
    name: Option<String>,
    p_y: Option<f64>,
    p_z: Option<f64>,
    w_a: Option<f64>,
    electrode: Option<String>,
    conductivity: Option<f64>,
    thickness_nm: Option<f64>,
    symmetry: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    variable: String,
    values: Option<Vec<toml::Value>>,
    range: Option<RawRange>,
    log: Option<RawLog>,
    #[serde(default)]
    series: Vec<Spanned<RawProbe>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRange {
    start: f64,
    stop: f64,
    step: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLog {
    start: f64,
    stop: f64,
    per_decade: u32,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNull {
    z: Option<f64>,
    guess: Option<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScan {
    half_range: Option<f64>,
    samples: Option<usize>,
    height: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrating {
    preset: Option<String>,
    n_eff: Option<f64>,
    wavelength_nm: Option<f64>,
    order: Option<u32>,
    angles_deg: Option<Vec<f64>>,
    period_tol_nm: Option<f64>,
    ion_height_um: Option<f64>,
}

struct Ctx<'a> {
    src: &'a str,
}

impl Ctx<'_> {
    fn err<T>(&self, span: std::ops::Range<usize>, message: impl Into<String>) -> Result<T> {
        Err(Error::Config { line: line_of(self.src, span), message: message.into() })
    }
}

fn apply_probe(ctx: &Ctx<'_>, base: &Probe, raw: &Spanned<RawProbe>) -> Result<Probe> {
    let r = raw.get_ref();
    let mut p = base.clone();
    if let Some(v) = r.p_y {
        p.p_y = Some(v * MICRON);
    }
    if let Some(v) = r.p_z {
        p.p_z = v * MICRON;
    }
    if let Some(v) = r.w_a {
        p.width = v * MICRON;
    }
    if let Some(v) = &r.electrode {
        p.electrode = Some(v.clone());
    }
    if let Some(v) = r.conductivity {
        p.conductivity = Some(v);
    }
    if let Some(v) = r.thickness_nm {
        p.thickness = v * NANOMETER;
    }
    if let Some(s) = &r.symmetry {
        p.symmetry = match Symmetry::parse(s) {
            Some(v) => v,
            None => return ctx.err(raw.span(), format!("symmetry must be none, z or zy, got `{s}`")),
        };
    }
    let finite = [Some(p.p_z), Some(p.width), p.p_y, p.conductivity, Some(p.thickness)];
    if finite.iter().flatten().any(|v| !v.is_finite()) {
        return ctx.err(raw.span(), "probe values must be finite");
    }
    if p.width <= 0.0 || p.thickness <= 0.0 || p.conductivity.is_some_and(|s| s <= 0.0) {
        return ctx.err(raw.span(), "aperture width, coating thickness and conductivity must be positive");
    }
    Ok(p)
}

fn expand_values(ctx: &Ctx<'_>, raw: &Spanned<RawSweep>, variable: SweepVariable) -> Result<Vec<SweepValue>> {
    let r = raw.get_ref();
    let given = [r.values.is_some(), r.range.is_some(), r.log.is_some()].iter().filter(|&&b| b).count();
    if given != 1 {
        return ctx.err(raw.span(), "sweep needs exactly one of `values`, `range` or `log`");
    }
    let values = if let Some(vs) = &r.values {
        vs.iter()
            .map(|v| match v {
                toml::Value::Float(f) => Ok(SweepValue::Number(*f)),
                toml::Value::Integer(i) => Ok(SweepValue::Number(*i as f64)),
                toml::Value::String(s) => Ok(SweepValue::Label(s.clone())),
                other => ctx.err(raw.span(), format!("unsupported sweep value `{other}`")),
            })
            .collect::<Result<Vec<_>>>()?
    } else if let Some(rg) = &r.range {
        if !(rg.step > 0.0 && rg.stop >= rg.start && rg.start.is_finite() && rg.stop.is_finite()) {
            return ctx.err(raw.span(), "range needs start <= stop and a positive step");
        }
        let n = ((rg.stop - rg.start) / rg.step + 1e-9).floor() as usize + 1;
        (0..n).map(|k| SweepValue::Number(round_decimal(rg.start + k as f64 * rg.step))).collect()
    } else {
        let lg = r.log.as_ref().expect("one spec present");
        if !(lg.start > 0.0 && lg.stop >= lg.start && lg.per_decade > 0 && lg.stop.is_finite()) {
            return ctx.err(raw.span(), "log sweep needs 0 < start <= stop and per_decade >= 1");
        }
        let decades = (lg.stop / lg.start).log10();
        let n = (decades * lg.per_decade as f64 + 1e-9).floor() as usize + 1;
        (0..n)
            .map(|k| SweepValue::Number(lg.start * 10f64.powf(k as f64 / lg.per_decade as f64)))
            .collect()
    };
    if values.is_empty() {
        return ctx.err(raw.span(), "sweep value list is empty");
    }
    for v in &values {
        match (variable.is_numeric(), v) {
            (true, SweepValue::Number(x)) if x.is_finite() => {}
            (false, SweepValue::Label(_)) => {}
            _ => return ctx.err(raw.span(), format!("value `{v}` does not fit sweep variable `{}`", r.variable)),
        }
    }
    Ok(values)
}

/// Strip binary noise from range steps so 0.1-step grids print as written.
fn round_decimal(v: f64) -> f64 {
    (v * 1e9).round() / 1e9
}

fn grating_settings(ctx: &Ctx<'_>, raw: &Spanned<RawGrating>) -> Result<GratingSettings> {
    let r = raw.get_ref();
    let mut design = match r.preset.as_deref() {
        None => GratingDesign { n_eff: 0.0, wavelength: 0.0, order: 1 },
        Some("sin-sensitivity") => grating_presets::SIN_SENSITIVITY,
        Some("alo-sensitivity") => grating_presets::ALO_SENSITIVITY,
        Some("sin-order-cutoff") => grating_presets::SIN_ORDER_CUTOFF,
        Some(other) => return ctx.err(raw.span(), format!("unknown grating preset `{other}`")),
    };
    if let Some(v) = r.n_eff {
        design.n_eff = v;
    }
    if let Some(v) = r.wavelength_nm {
        design.wavelength = v * NANOMETER;
    }
    if let Some(v) = r.order {
        design.order = v;
    }
    if !(design.n_eff > 1.0 && design.wavelength > 0.0 && design.order > 0) {
        return ctx.err(raw.span(), "grating needs a preset or n_eff > 1, wavelength_nm > 0 and order >= 1");
    }
    let angles_deg = r.angles_deg.clone().unwrap_or_else(|| (-16..=12).map(|k| 5.0 * k as f64).collect());
    if angles_deg.is_empty() || angles_deg.iter().any(|a| !(a.abs() < 90.0)) {
        return ctx.err(raw.span(), "grating angles must be non-empty and inside (-90, 90) degrees");
    }
    Ok(GratingSettings {
        design,
        angles_deg,
        period_tol: r.period_tol_nm.unwrap_or(1.0) * NANOMETER,
        ion_height: r.ion_height_um.unwrap_or(100.0) * MICRON,
    })
}

impl Experiment {
    /// Parse an experiment. Relative layout paths resolve against `base_dir`.
    pub fn parse(src: &str, base_dir: &Path) -> Result<Experiment> {
        let ctx = Ctx { src };
        let raw: RawExperiment = toml::from_str(src).map_err(|e| Error::Config {
            line: e.span().map(|s| line_of(src, s)).unwrap_or(0),
            message: e.message().to_string(),
        })?;

        let name = raw.name.get_ref().trim().to_string();
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            return ctx.err(raw.name.span(), "name must be non-empty and use only [A-Za-z0-9._-]");
        }

        let layout_ref = raw.layout.as_ref().map_or("reference".to_string(), |l| l.get_ref().clone());
        let base = if layout_ref == "reference" {
            LayoutConfig::reference()
        } else {
            let path = base_dir.join(&layout_ref);
            load_layout(&path).map_err(|e| match e {
                Error::Config { line, message } => Error::Config {
                    line,
                    message: format!("in layout `{}`: {message}", path.display()),
                },
                Error::Io(io) => Error::Config {
                    line: line_of(src, raw.layout.as_ref().expect("path given").span()),
                    message: format!("cannot read layout `{}`: {io}", path.display()),
                },
                other => other,
            })?
        };

        let mut analyses = BTreeSet::new();
        for a in raw.analyses.get_ref() {
            match Analysis::parse(a) {
                Some(v) => {
                    analyses.insert(v);
                }
                None => return ctx.err(raw.analyses.span(), format!("unknown analysis `{a}`")),
            }
        }
        if analyses.is_empty() {
            return ctx.err(raw.analyses.span(), "analyses list is empty");
        }

        let probe = match &raw.probe {
            Some(p) => {
                if p.get_ref().name.is_some() {
                    return ctx.err(p.span(), "`name` belongs in [[sweep.series]], not [probe]");
                }
                Some(apply_probe(&ctx, &Probe::default(), p)?)
            }
            None => None,
        };

        let (sweep, series) = match &raw.sweep {
            None => (None, vec![Series { name: String::new(), probe: probe.clone().unwrap_or_default() }]),
            Some(s) => {
                let r = s.get_ref();
                let Some(variable) = SweepVariable::parse(&r.variable) else {
                    return ctx.err(
                        s.span(),
                        format!("unknown sweep variable `{}` (p_y, p_z, w_a, sigma, symmetry, electrode-kind)", r.variable),
                    );
                };
                if probe.is_none() && r.series.is_empty() {
                    return ctx.err(s.span(), "a sweep needs a [probe] aperture to act on");
                }
                let values = expand_values(&ctx, s, variable)?;
                let base_probe = probe.clone().unwrap_or_default();
                let series = if r.series.is_empty() {
                    vec![Series { name: String::new(), probe: base_probe }]
                } else {
                    r.series
                        .iter()
                        .map(|raw_s| {
                            let name = raw_s.get_ref().name.clone().unwrap_or_default();
                            Ok(Series { name, probe: apply_probe(&ctx, &base_probe, raw_s)? })
                        })
                        .collect::<Result<Vec<_>>>()?
                };
                (Some(Sweep { variable, values }), series)
            }
        };

        let (null_z, null_guess) = match &raw.null {
            None => (0.0, REFERENCE_GUESS),
            Some(n) => {
                let r = n.get_ref();
                let g = r.guess.map_or(REFERENCE_GUESS, |g| (g[0] * MICRON, g[1] * MICRON));
                if !(g.0 > 0.0) {
                    return ctx.err(n.span(), "null guess must lie above the surface");
                }
                (r.z.unwrap_or(0.0) * MICRON, g)
            }
        };

        let mut scan = ScanSettings { half_range: DEFAULT_SCAN_HALF_RANGE, samples: DEFAULT_SCAN_SAMPLES, height: None };
        if let Some(s) = &raw.scan {
            let r = s.get_ref();
            if let Some(v) = r.half_range {
                scan.half_range = v * MICRON;
            }
            if let Some(v) = r.samples {
                scan.samples = v;
            }
            scan.height = r.height.map(|h| h * MICRON);
            if !(scan.half_range > 0.0) || scan.samples < 3 || scan.height.is_some_and(|h| !(h > 0.0)) {
                return ctx.err(s.span(), "scan needs half_range > 0, samples >= 3 and a positive height");
            }
        }

        let grating = match &raw.grating {
            Some(g) => Some(grating_settings(&ctx, g)?),
            None if analyses.contains(&Analysis::GratingTable) => {
                return ctx.err(raw.analyses.span(), "grating-table needs a [grating] table")
            }
            None => None,
        };

        let exp = Experiment {
            name,
            layout_ref,
            base,
            analyses,
            series,
            sweep,
            null_z,
            null_guess,
            scan,
            grating,
        };
        // every layout is built up front so geometry problems are validation errors
        for job in exp.jobs() {
            job.map_err(|e| match e {
                Error::Config { .. } => e,
                other => Error::Config {
                    line: raw.sweep.as_ref().map_or(0, |s| line_of(src, s.span())),
                    message: other.to_string(),
                },
            })?;
        }
        Ok(exp)
    }

    pub fn load(path: &Path) -> Result<Experiment> {
        let src = std::fs::read_to_string(path)?;
        Experiment::parse(&src, path.parent().unwrap_or(Path::new(".")))
    }

    /// Hash of everything that determines the results.
    pub fn config_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).expect("experiment serialises"));
        h.update(layout_hash(&self.base.layout).as_bytes());
        h.update(serde_json::to_vec(&self.base.drive).expect("drive serialises"));
        h.update(serde_json::to_vec(&self.base.ion).expect("ion serialises"));
        hex::encode(&h.finalize()[..8])
    }

    fn needs_records(&self) -> bool {
        self.analyses.iter().any(|a| *a != Analysis::GratingTable)
    }

    fn jobs(&self) -> impl Iterator<Item = Result<Job>> + '_ {
        let values: Vec<Option<SweepValue>> = match &self.sweep {
            Some(s) => s.values.iter().cloned().map(Some).collect(),
            None => vec![None],
        };
        let take = self.needs_records();
        self.series
            .iter()
            .flat_map(move |s| values.clone().into_iter().map(move |v| (s, v)))
            .filter(move |_| take)
            .map(|(series, value)| self.job(series, value))
    }

    fn job(&self, series: &Series, value: Option<SweepValue>) -> Result<Job> {
        let mut probe = series.probe.clone();
        let active = self.sweep.is_some() || probe.p_y.is_some();
        if let (Some(sweep), Some(v)) = (&self.sweep, &value) {
            match (sweep.variable, v) {
                (SweepVariable::PY, SweepValue::Number(x)) => probe.p_y = Some(x * MICRON),
                (SweepVariable::PZ, SweepValue::Number(x)) => probe.p_z = x * MICRON,
                (SweepVariable::WA, SweepValue::Number(x)) => probe.width = x * MICRON,
                (SweepVariable::Sigma, SweepValue::Number(x)) => probe.conductivity = Some(*x),
                (SweepVariable::Symmetry, SweepValue::Label(s)) => {
                    probe.symmetry = Symmetry::parse(s)
                        .ok_or_else(|| Error::InvalidArgument(format!("unknown symmetry `{s}`")))?;
                }
                (SweepVariable::ElectrodeKind, SweepValue::Label(s)) => {
                    let kind = ElectrodeKind::parse(s)
                        .ok_or_else(|| Error::InvalidArgument(format!("unknown electrode kind `{s}`")))?;
                    let host = self
                        .base
                        .layout
                        .electrodes()
                        .iter()
                        .find(|e| {
                            e.kind == kind
                                && e.region.center().0 > 0.0
                                && (e.region.z_min..e.region.z_max).contains(&probe.p_z)
                        })
                        .ok_or_else(|| Error::InvalidArgument(format!("no `{s}` electrode at p_z on the +y side")))?;
                    probe.p_y = Some(host.region.center().0);
                    probe.electrode = Some(host.id.clone());
                }
                _ => return Err(Error::InvalidArgument(format!("value `{v}` does not fit the sweep variable"))),
            }
        }
        let layout = if active {
            let p_y = probe
                .p_y
                .ok_or_else(|| Error::InvalidArgument("probe needs p_y unless p_y or electrode-kind is swept".into()))?;
            let coating = probe
                .conductivity
                .map_or(Coating::None, |conductivity| Coating::Tco { conductivity, thickness: probe.thickness });
            let ap = Aperture::new(p_y, probe.p_z, probe.width).with_coating(coating);
            let with = match &probe.electrode {
                Some(id) => self.base.layout.with_aperture_in(id, ap),
                None => self.base.layout.with_aperture(ap),
            }
            .map_err(|e| annotate(e, &series.name, value.as_ref()))?;
            if probe.symmetry == Symmetry::None {
                with
            } else {
                symmetrize(&with, probe.symmetry.axes()).map_err(|e| annotate(e, &series.name, value.as_ref()))?
            }
        } else {
            self.base.layout.clone()
        };
        Ok(Job {
            series: series.name.clone(),
            value,
            p_y: if active { probe.p_y } else { None },
            layout,
        })
    }
}

fn annotate(e: Error, series: &str, value: Option<&SweepValue>) -> Error {
    let at = match (series.is_empty(), value) {
        (true, Some(v)) => format!("at sweep value {v}: "),
        (false, Some(v)) => format!("in series `{series}` at sweep value {v}: "),
        (false, None) => format!("in series `{series}`: "),
        (true, None) => String::new(),
    };
    Error::InvalidArgument(format!("{at}{e}"))
}

/// Built-in experiment names, in display order.
pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

/// TOML source of a built-in experiment.
pub fn preset_source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn preset(name: &str) -> Result<Experiment> {
    let src = preset_source(name).ok_or_else(|| {
        Error::InvalidArgument(format!("unknown preset `{name}`; available: {}", preset_names().join(", ")))
    })?;
    Experiment::parse(src, Path::new("."))
}

// ---- execution -----------------------------------------------------------

struct Job {
    series: String,
    value: Option<SweepValue>,
    p_y: Option<f64>,
    layout: TrapLayout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses [`WORKERS_ENV`] or all cores.
    pub workers: Option<usize>,
    /// Overrides the number of axial scan samples.
    pub resolution: Option<usize>,
    pub format: OutputFormat,
}

/// Per-component peak columns.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PeakColumns {
    /// V/m
    pub peak: Option<f64>,
    /// m
    pub peak_z: Option<f64>,
    /// V/m²
    pub fwhm_gradient: Option<f64>,
    /// V/m²
    pub dispersive_gradient: Option<f64>,
}

/// One output row, in SI units. Missing values stay `None` and the reason is
/// appended to `notes`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub series: String,
    pub value: Option<SweepValue>,
    pub angle_deg: Option<f64>,
    pub null: Option<NullResult>,
    pub dx0: Option<f64>,
    pub dy0: Option<f64>,
    /// |E_c| at the scan point above z = 0, V/m.
    pub e_z0: [Option<f64>; 3],
    pub peaks: [PeakColumns; 3],
    pub metrics: Option<TrapMetrics>,
    /// True when a required analysis failed numerically.
    pub failed: bool,
    pub notes: Vec<String>,
}

impl ResultRecord {
    /// Cells in [`COLUMNS`] order and reporting units; empty for missing values.
    pub fn cells(&self) -> Vec<String> {
        fn f(v: Option<f64>) -> String {
            v.map(num).unwrap_or_default()
        }
        let um = |v: Option<f64>| v.map(|x| x / MICRON);
        let mm2 = |v: Option<f64>| v.map(|x| x / 1e6);
        let mut out = vec![
            self.series.clone(),
            self.value.as_ref().map(|v| v.to_string()).unwrap_or_default(),
            f(self.angle_deg),
            f(um(self.null.map(|n| n.position.x))),
            f(um(self.null.map(|n| n.position.y))),
            f(um(self.dx0)),
            f(um(self.dy0)),
            f(self.null.map(|n| n.residual)),
        ];
        out.extend(self.e_z0.iter().map(|v| f(*v)));
        for p in &self.peaks {
            out.extend([f(p.peak), f(um(p.peak_z)), f(mm2(p.fwhm_gradient)), f(mm2(p.dispersive_gradient))]);
        }
        let m = self.metrics;
        out.extend([
            f(m.map(|m| m.modes.frequencies[0] / 1e6)),
            f(m.map(|m| m.modes.frequencies[1] / 1e6)),
            f(m.map(|m| m.modes.frequencies[2] / 1e6)),
            f(m.map(|m| m.depth.depth_ev * 1e3)),
            f(m.map(|m| m.mathieu.q)),
            if self.failed { "1".into() } else { "0".into() },
            self.notes.join("; "),
        ]);
        debug_assert_eq!(out.len(), COLUMNS.len());
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub index: usize,
    pub series: String,
    pub value: Option<SweepValue>,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "record {}", self.index)?;
        if !self.series.is_empty() {
            write!(f, " (series {})", self.series)?;
        }
        if let Some(v) = &self.value {
            write!(f, " at value {v}")?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub name: String,
    pub config_hash: String,
    pub records: Vec<ResultRecord>,
    /// Axial scans, parallel to `records` (empty when not requested).
    pub scans: Vec<Option<AxialScan>>,
    pub grating: Option<Vec<DesignRow>>,
    pub failures: Vec<Failure>,
    /// Null of the base layout, used as the displacement origin.
    pub base_null: Option<NullResult>,
    pub scan_height: f64,
}

impl RunReport {
    /// 0 when every record completed, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            3
        }
    }

    /// CSV text of the records.
    pub fn csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(COLUMNS)?;
        for r in &self.records {
            w.write_record(r.cells())?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    /// Records as `{"columns": [...], "rows": [[...], ...]}` with nulls for missing cells.
    pub fn json(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .records
            .iter()
            .map(|r| {
                let cells = r.cells();
                serde_json::Value::Array(
                    cells
                        .into_iter()
                        .enumerate()
                        .map(|(i, c)| {
                            if c.is_empty() && COLUMNS[i] != "series" {
                                serde_json::Value::Null
                            } else if let (true, Ok(x)) = (i >= 2 && COLUMNS[i] != "error", c.parse::<f64>()) {
                                serde_json::json!(x)
                            } else {
                                serde_json::Value::String(c)
                            }
                        })
                        .collect(),
                )
            })
            .collect();
        serde_json::json!({ "columns": COLUMNS, "rows": rows })
    }
}

/// Worker count: explicit value, then [`WORKERS_ENV`], then all cores.
pub fn resolve_workers(explicit: Option<usize>) -> Result<usize> {
    if let Some(n) = explicit {
        return if n == 0 { Err(Error::InvalidArgument("worker count must be at least 1".into())) } else { Ok(n) };
    }
    match std::env::var(WORKERS_ENV) {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::InvalidArgument(format!("{WORKERS_ENV} must be a positive integer, got `{s}`"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

struct Shared<'a> {
    exp: &'a Experiment,
    base_null: Option<NullResult>,
    seed: (f64, f64),
    scan_height: f64,
    samples: usize,
}

/// Run every record of `exp` without touching the filesystem.
pub fn execute(exp: &Experiment, opts: &RunOptions) -> Result<RunReport> {
    let workers = resolve_workers(opts.workers)?;
    let samples = opts.resolution.unwrap_or(exp.scan.samples);
    if samples < 3 {
        return Err(Error::InvalidArgument(format!("resolution must be at least 3 samples, got {samples}")));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let jobs = exp.jobs().collect::<Result<Vec<_>>>()?;

    pool.install(|| {
        let want = |a| exp.analyses.contains(&a);
        let need_null = want(Analysis::Null) || want(Analysis::Displacement) || want(Analysis::Metrics);
        let need_scan = want(Analysis::AxialScan) || want(Analysis::PeakMetrics);

        // the base null anchors displacements, seeds every search and sets the scan height
        let mut failures = Vec::new();
        let base_null = if need_null || (need_scan && exp.scan.height.is_none()) {
            let model = FieldModel::new(&exp.base.layout, &exp.base.drive, DriveKind::Rf)?;
            match find_radial_null_in(&model, exp.null_z, exp.null_guess) {
                Ok(n) => Some(n),
                Err(e) if e.is_validation() => return Err(e),
                Err(e) => {
                    failures.push(Failure {
                        index: 0,
                        series: String::new(),
                        value: None,
                        message: format!("base layout null: {e}"),
                    });
                    None
                }
            }
        } else {
            None
        };
        let scan_height = exp.scan.height.or(base_null.map(|n| n.position.x)).unwrap_or(exp.null_guess.0);
        let shared = Shared {
            exp,
            base_null,
            seed: base_null.map_or(exp.null_guess, |n| (n.position.x, n.position.y)),
            scan_height,
            samples,
        };

        let outputs: Vec<(ResultRecord, Option<AxialScan>)> =
            if failures.is_empty() { jobs.par_iter().map(|j| run_job(&shared, j)).collect() } else { Vec::new() };

        let mut records = Vec::with_capacity(outputs.len());
        let mut scans = Vec::with_capacity(outputs.len());
        for (i, (r, s)) in outputs.into_iter().enumerate() {
            if r.failed {
                failures.push(Failure {
                    index: i,
                    series: r.series.clone(),
                    value: r.value.clone(),
                    message: r.notes.join("; "),
                });
            }
            records.push(r);
            scans.push(s);
        }

        let grating = match (&exp.grating, want(Analysis::GratingTable)) {
            (Some(g), true) => match design_table(&g.design, &g.angles_deg, g.period_tol, g.ion_height) {
                Ok(rows) => Some(rows),
                Err(e) => {
                    failures.push(Failure { index: 0, series: String::new(), value: None, message: e.to_string() });
                    None
                }
            },
            _ => None,
        };

        Ok(RunReport {
            name: exp.name.clone(),
            config_hash: exp.config_hash(),
            records,
            scans,
            grating,
            failures,
            base_null,
            scan_height,
        })
    })
}

fn run_job(shared: &Shared<'_>, job: &Job) -> (ResultRecord, Option<AxialScan>) {
    let exp = shared.exp;
    let want = |a| exp.analyses.contains(&a);
    let mut rec = ResultRecord {
        series: job.series.clone(),
        value: job.value.clone(),
        angle_deg: job.p_y.map(|p| aperture_angle_deg(p, shared.scan_height)),
        ..Default::default()
    };
    let fail = |rec: &mut ResultRecord, what: &str, e: Error| {
        rec.failed = true;
        rec.notes.push(format!("{what}: {e}"));
    };

    let model = match FieldModel::new(&job.layout, &exp.base.drive, DriveKind::Rf) {
        Ok(m) => m,
        Err(e) => {
            fail(&mut rec, "field model", e);
            return (rec, None);
        }
    };

    if want(Analysis::Null) || want(Analysis::Displacement) || want(Analysis::Metrics) {
        match find_radial_null_in(&model, exp.null_z, shared.seed) {
            Ok(n) => {
                rec.null = Some(n);
                if want(Analysis::Displacement) {
                    if let Some(b) = shared.base_null {
                        rec.dx0 = Some(n.position.x - b.position.x);
                        rec.dy0 = Some(n.position.y - b.position.y);
                    }
                }
                if want(Analysis::Metrics) {
                    let metrics = Pseudopotential::new(&model, exp.base.ion, exp.base.drive.rf_frequency)
                        .and_then(|pp| trap_metrics(&pp, n.position));
                    match metrics {
                        Ok(m) => rec.metrics = Some(m),
                        Err(e) => fail(&mut rec, "trap metrics", e),
                    }
                }
            }
            Err(e) => fail(&mut rec, "null", e),
        }
    }

    let mut scan = None;
    if want(Analysis::AxialScan) || want(Analysis::PeakMetrics) {
        let range = (-exp.scan.half_range, exp.scan.half_range);
        match axial_scan_in(&model, range, shared.samples, shared.scan_height) {
            Ok((z, fields)) => {
                let s = AxialScan {
                    z,
                    fields,
                    height: shared.scan_height,
                    layout_hash: layout_hash(&job.layout),
                    drive: exp.base.drive.clone(),
                };
                for c in Component::ALL {
                    rec.e_z0[c.index()] = Some(amplitude_at(&s, c, 0.0));
                }
                if want(Analysis::PeakMetrics) {
                    for c in Component::ALL {
                        match peak_metrics(&s, c) {
                            Ok(p) => {
                                rec.peaks[c.index()] = PeakColumns {
                                    peak: Some(p.peak_amplitude),
                                    peak_z: Some(p.peak_position),
                                    fwhm_gradient: Some(p.fwhm_gradient),
                                    dispersive_gradient: Some(p.dispersive_gradient),
                                };
                            }
                            // a component without a peak is a property of the layout, not a failure
                            Err(e @ Error::Peak(_)) => rec.notes.push(format!("E{}: {e}", c.name())),
                            Err(e) => fail(&mut rec, &format!("E{} peak", c.name()), e),
                        }
                    }
                }
                if want(Analysis::AxialScan) {
                    scan = Some(s);
                }
            }
            Err(e) => fail(&mut rec, "axial scan", e),
        }
    }
    (rec, scan)
}

// ---- output --------------------------------------------------------------

#[derive(Debug, Serialize)]
struct Sidecar<'a> {
    name: &'a str,
    config_hash: &'a str,
    version: &'static str,
    timestamp_unix: u64,
    layout: &'a str,
    layout_hash: String,
    rf_frequency_mhz: f64,
    scan_height_um: f64,
    scan_samples: usize,
    base_null_um: Option<[f64; 2]>,
    columns: &'a [&'a str],
    units: &'static str,
    records: usize,
    failures: usize,
    files: Vec<String>,
}

const UNITS: &str = "lengths in um, fields in V/m, gradients in V/mm^2, frequencies in MHz, depth in meV, angle in degrees, sweep values in um or S/m";

/// Shortest round-trip decimal, switching to exponent form outside
/// `1e-4 <= |x| < 1e15` so tiny residues stay readable.
fn num(x: f64) -> String {
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn scan_csv(scan: &AxialScan) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["z_um", "ex_re", "ex_im", "ey_re", "ey_im", "ez_re", "ez_im", "ex_abs", "ey_abs", "ez_abs"])?;
    for (z, f) in scan.z.iter().zip(&scan.fields) {
        let mut row = vec![num(z / MICRON)];
        for c in f.components() {
            row.push(num(c.re));
            row.push(num(c.im));
        }
        for c in f.components() {
            row.push(num(c.norm()));
        }
        w.write_record(row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn grating_csv(rows: &[DesignRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "theta_deg",
        "period_nm",
        "feature_nm",
        "sensitivity_deg_per_nm",
        "orders",
        "angle_error_deg",
        "beam_offset_um",
    ])?;
    for r in rows {
        let orders: Vec<String> = r.orders.iter().map(|m| m.to_string()).collect();
        w.write_record([
            num(r.theta_deg),
            num(r.period_nm),
            num(r.feature_nm),
            num(r.sensitivity_deg_per_nm),
            orders.join(";"),
            num(r.angle_error_deg),
            num(r.beam_offset_um),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Write all result files for `report` into `out_dir` and return their paths.
pub fn write(exp: &Experiment, report: &RunReport, out_dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let mut put = |name: String, bytes: &[u8]| -> Result<()> {
        let p = out_dir.join(name);
        std::fs::write(&p, bytes)?;
        files.push(p);
        Ok(())
    };

    if !report.records.is_empty() {
        match format {
            OutputFormat::Csv => put(format!("{}.csv", report.name), report.csv()?.as_bytes())?,
            OutputFormat::Json => {
                put(format!("{}.json", report.name), &serde_json::to_vec_pretty(&report.json())?)?
            }
        }
    }
    for (i, s) in report.scans.iter().enumerate() {
        if let Some(s) = s {
            put(format!("{}_scan_{i:03}.csv", report.name), &scan_csv(s)?)?;
        }
    }
    if let Some(rows) = &report.grating {
        put(format!("{}_grating.csv", report.name), &grating_csv(rows)?)?;
    }
    if !report.failures.is_empty() {
        put(format!("{}.failures.json", report.name), &serde_json::to_vec_pretty(&report.failures)?)?;
    }

    let sidecar = Sidecar {
        name: &report.name,
        config_hash: &report.config_hash,
        version: env!("CARGO_PKG_VERSION"),
        timestamp_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        layout: &exp.layout_ref,
        layout_hash: layout_hash(&exp.base.layout),
        rf_frequency_mhz: angular_to_mhz(exp.base.drive.rf_frequency),
        scan_height_um: report.scan_height / MICRON,
        scan_samples: report.scans.iter().flatten().next().map_or(0, |s| s.z.len()),
        base_null_um: report.base_null.map(|n| [n.position.x / MICRON, n.position.y / MICRON]),
        columns: &COLUMNS,
        units: UNITS,
        records: report.records.len(),
        failures: report.failures.len(),
        files: files.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).collect(),
    };
    let meta = out_dir.join(format!("{}.meta.json", report.name));
    std::fs::write(&meta, serde_json::to_vec_pretty(&sidecar)?)?;
    files.push(meta);
    Ok(files)
}

/// Execute and write; the report's [`RunReport::exit_code`] tells whether
/// any record failed.
pub fn run(exp: &Experiment, opts: &RunOptions, out_dir: &Path) -> Result<RunReport> {
    let report = execute(exp, opts)?;
    write(exp, &report, out_dir, opts.format)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses() {
        for name in preset_names() {
            let e = preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(e.name, name);
        }
    }

    #[test]
    fn log_sweep_has_twelve_points_per_decade() {
        let e = preset("tco-conductivity").unwrap();
        let s = e.sweep.unwrap();
        assert_eq!(s.values.len(), 133);
        let SweepValue::Number(last) = s.values[132] else { panic!() };
        assert!((last / 1e8 - 1.0).abs() < 1e-9);
        assert_eq!(e.series.len(), 3);
    }

    #[test]
    fn range_is_inclusive() {
        let e = preset("wa-sweep").unwrap();
        let v = e.sweep.unwrap().values;
        assert_eq!(v.len(), 19);
        assert_eq!(v[18], SweepValue::Number(100.0));
    }

    #[test]
    fn empty_sweep_is_a_validation_error() {
        let src = "name = \"x\"\nanalyses = [\"null\"]\n[probe]\np_y = 126.8\n[sweep]\nvariable = \"p_z\"\nvalues = []\n";
        let err = Experiment::parse(src, Path::new(".")).unwrap_err();
        assert!(err.is_validation());
        assert!(matches!(err, Error::Config { line: 5, .. }), "{err}");
    }

    #[test]
    fn bad_values_are_rejected() {
        let cases = [
            "name = \"x\"\nanalyses = [\"nope\"]\n",
            "name = \"x\"\nanalyses = []\n",
            "name = \"x\"\nanalyses = [\"null\"]\n[sweep]\nvariable = \"p_z\"\nvalues = [1.0]\n",
            "name = \"x\"\nanalyses = [\"null\"]\n[probe]\np_y = 126.8\n[sweep]\nvariable = \"symmetry\"\nvalues = [1.0]\n",
            "name = \"x\"\nanalyses = [\"null\"]\n[probe]\np_y = 126.8\n[sweep]\nvariable = \"w_a\"\nvalues = [400.0]\n",
            "name = \"x y\"\nanalyses = [\"null\"]\n",
            "name = \"x\"\nanalyses = [\"grating-table\"]\n",
        ];
        for src in cases {
            let e = Experiment::parse(src, Path::new(".")).unwrap_err();
            assert!(e.is_validation(), "{src}: {e}");
        }
    }

    #[test]
    fn record_cells_match_columns() {
        let r = ResultRecord { value: Some(SweepValue::Label("z".into())), ..Default::default() };
        let c = r.cells();
        assert_eq!(c.len(), COLUMNS.len());
        assert_eq!(c[1], "z");
        assert_eq!(c[28], "0");
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, 1.5, -2.25e-9, 101.98061082120796, 6.7e-27, 3e20, -0.0001] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(-9.95e-16), "-9.95e-16");
        assert_eq!(num(126.8), "126.8");
    }

    #[test]
    fn explicit_workers_win() {
        assert_eq!(resolve_workers(Some(3)).unwrap(), 3);
        assert!(resolve_workers(Some(0)).is_err());
    }
}
