//! Planar trap layout: electrodes, apertures, drives and the reference trap.
//!
//! Coordinates follow the trap frame: `x` is the height above the electrode
//! plane, `y` is transverse and `z` runs along the trap axis. The origin sits
//! on the electrode surface at the centre of the simulated region. Everything
//! here is in SI units.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{MICRON, NANOMETER};
use crate::error::{Error, Result};

/// Tolerance used when deciding whether two apertures coincide.
pub const COINCIDENCE_TOL: f64 = NANOMETER;

/// Axis-aligned rectangle in the electrode plane `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub y_min: f64,
    pub y_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Rect {
    pub fn new(y_min: f64, y_max: f64, z_min: f64, z_max: f64) -> Result<Self> {
        let all_finite = [y_min, y_max, z_min, z_max].iter().all(|v| v.is_finite());
        if !all_finite || y_min >= y_max || z_min >= z_max {
            return Err(Error::Geometry(format!(
                "degenerate rectangle y=[{y_min:e}, {y_max:e}] z=[{z_min:e}, {z_max:e}]"
            )));
        }
        Ok(Self { y_min, y_max, z_min, z_max })
    }

    /// Rectangle of size `width_y` x `width_z` centred on `(center_y, center_z)`.
    pub fn centered(center_y: f64, center_z: f64, width_y: f64, width_z: f64) -> Result<Self> {
        Self::new(
            center_y - 0.5 * width_y,
            center_y + 0.5 * width_y,
            center_z - 0.5 * width_z,
            center_z + 0.5 * width_z,
        )
    }

    pub fn width_y(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn width_z(&self) -> f64 {
        self.z_max - self.z_min
    }

    pub fn area(&self) -> f64 {
        self.width_y() * self.width_z()
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.y_min + self.y_max), 0.5 * (self.z_min + self.z_max))
    }

    /// Half-open membership test, `[min, max)` on both axes.
    pub fn contains_point(&self, y: f64, z: f64) -> bool {
        y >= self.y_min && y < self.y_max && z >= self.z_min && z < self.z_max
    }

    /// Closed containment of another rectangle, forgiving edges that miss by
    /// less than [`COINCIDENCE_TOL`] (µm-valued inputs rarely land exactly).
    pub fn contains_rect(&self, other: &Rect) -> bool {
        let t = COINCIDENCE_TOL;
        other.y_min >= self.y_min - t
            && other.y_max <= self.y_max + t
            && other.z_min >= self.z_min - t
            && other.z_max <= self.z_max + t
    }

    /// True when the intersection has positive area. Shared edges do not count.
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.y_min < other.y_max
            && other.y_min < self.y_max
            && self.z_min < other.z_max
            && other.z_min < self.z_max
    }

    /// Image under `y -> -y` (reflection about the z-axis).
    pub fn mirror_y(&self) -> Rect {
        Rect { y_min: -self.y_max, y_max: -self.y_min, ..*self }
    }

    /// Image under `z -> -z` (reflection about the y-axis).
    pub fn mirror_z(&self) -> Rect {
        Rect { z_min: -self.z_max, z_max: -self.z_min, ..*self }
    }

    pub fn approx_eq(&self, other: &Rect, tol: f64) -> bool {
        (self.y_min - other.y_min).abs() <= tol
            && (self.y_max - other.y_max).abs() <= tol
            && (self.z_min - other.z_min).abs() <= tol
            && (self.z_max - other.z_max).abs() <= tol
    }
}

/// Electrical treatment of the aperture opening.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Coating {
    /// Open aperture; the opening sits at ground potential.
    #[default]
    None,
    /// Transparent conductive oxide film bridging the opening.
    Tco { conductivity: f64, thickness: f64 },
}

/// Square aperture of side `width` centred at `(center_y, center_z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aperture {
    pub center_y: f64,
    pub center_z: f64,
    pub width: f64,
    #[serde(default)]
    pub coating: Coating,
}

impl Aperture {
    pub fn new(center_y: f64, center_z: f64, width: f64) -> Self {
        Self { center_y, center_z, width, coating: Coating::None }
    }

    pub fn with_coating(mut self, coating: Coating) -> Self {
        self.coating = coating;
        self
    }

    pub fn rect(&self) -> Result<Rect> {
        Rect::centered(self.center_y, self.center_z, self.width, self.width)
    }

    fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::Geometry(format!("aperture width must be positive, got {:e}", self.width)));
        }
        if !(self.center_y.is_finite() && self.center_z.is_finite()) {
            return Err(Error::Geometry("aperture centre must be finite".into()));
        }
        if let Coating::Tco { conductivity, thickness } = self.coating {
            if !(conductivity > 0.0 && conductivity.is_finite()) {
                return Err(Error::Geometry(format!(
                    "coating conductivity must be positive, got {conductivity:e}"
                )));
            }
            if !(thickness > 0.0 && thickness.is_finite()) {
                return Err(Error::Geometry(format!("coating thickness must be positive, got {thickness:e}")));
            }
        }
        Ok(())
    }

    pub fn mirrored_y(&self) -> Aperture {
        Aperture { center_y: -self.center_y, ..*self }
    }

    pub fn mirrored_z(&self) -> Aperture {
        Aperture { center_z: -self.center_z, ..*self }
    }

    fn coincides(&self, other: &Aperture) -> bool {
        (self.center_y - other.center_y).abs() <= COINCIDENCE_TOL
            && (self.center_z - other.center_z).abs() <= COINCIDENCE_TOL
            && (self.width - other.width).abs() <= COINCIDENCE_TOL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElectrodeKind {
    Rf,
    CenterDc,
    OuterDc,
    Ground,
}

impl ElectrodeKind {
    pub fn name(self) -> &'static str {
        match self {
            ElectrodeKind::Rf => "rf",
            ElectrodeKind::CenterDc => "center-dc",
            ElectrodeKind::OuterDc => "outer-dc",
            ElectrodeKind::Ground => "ground",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rf" => Some(ElectrodeKind::Rf),
            "center-dc" => Some(ElectrodeKind::CenterDc),
            "outer-dc" => Some(ElectrodeKind::OuterDc),
            "ground" => Some(ElectrodeKind::Ground),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Electrode {
    pub id: String,
    pub kind: ElectrodeKind,
    pub region: Rect,
    pub apertures: Vec<Aperture>,
}

impl Electrode {
    pub fn new(id: impl Into<String>, kind: ElectrodeKind, region: Rect) -> Self {
        Self { id: id.into(), kind, region, apertures: Vec::new() }
    }

    fn validate(&self) -> Result<()> {
        let mut holes = Vec::with_capacity(self.apertures.len());
        for ap in &self.apertures {
            ap.validate()?;
            let r = ap.rect()?;
            if !self.region.contains_rect(&r) {
                return Err(Error::ApertureOutside {
                    center_y: ap.center_y,
                    center_z: ap.center_z,
                    target: format!("electrode `{}`", self.id),
                });
            }
            holes.push(r);
        }
        for (i, a) in holes.iter().enumerate() {
            if holes[i + 1..].iter().any(|b| a.overlaps(b)) {
                return Err(Error::Geometry(format!("overlapping apertures in electrode `{}`", self.id)));
            }
        }
        Ok(())
    }
}

/// Output of [`decompose`]: disjoint conducting pieces plus the openings.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub solids: Vec<Rect>,
    pub holes: Vec<Rect>,
}

/// Split an electrode with apertures into disjoint solid rectangles.
///
/// The region is cut into slabs along `y` at every aperture edge; inside a
/// slab the conducting `z` intervals are the complement of the apertures
/// crossing it. Vertically adjacent slabs with identical intervals are merged.
pub fn decompose(electrode: &Electrode) -> Result<Decomposition> {
    electrode.validate()?;
    let region = electrode.region;
    let holes: Vec<Rect> = electrode.apertures.iter().map(Aperture::rect).collect::<Result<_>>()?;
    if holes.is_empty() {
        return Ok(Decomposition { solids: vec![region], holes });
    }

    let mut ys: Vec<f64> = vec![region.y_min, region.y_max];
    for h in &holes {
        ys.push(h.y_min);
        ys.push(h.y_max);
    }
    ys.sort_by(f64::total_cmp);
    ys.dedup();

    // (y_lo, y_hi, z intervals) per slab
    let mut slabs: Vec<(f64, f64, Vec<(f64, f64)>)> = Vec::new();
    for w in ys.windows(2) {
        let (y_lo, y_hi) = (w[0], w[1]);
        if y_hi <= y_lo {
            continue;
        }
        let mut cuts: Vec<(f64, f64)> = holes
            .iter()
            .filter(|h| h.y_min < y_hi && h.y_max > y_lo)
            .map(|h| (h.z_min, h.z_max))
            .collect();
        cuts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut intervals = Vec::new();
        let mut cursor = region.z_min;
        for (lo, hi) in cuts {
            if lo > cursor {
                intervals.push((cursor, lo));
            }
            cursor = cursor.max(hi);
        }
        if cursor < region.z_max {
            intervals.push((cursor, region.z_max));
        }
        match slabs.last_mut() {
            Some(last) if last.2 == intervals && last.1 == y_lo => last.1 = y_hi,
            _ => slabs.push((y_lo, y_hi, intervals)),
        }
    }

    let solids = slabs
        .into_iter()
        .flat_map(|(y_lo, y_hi, ivs)| {
            ivs.into_iter().map(move |(z_lo, z_hi)| Rect { y_min: y_lo, y_max: y_hi, z_min: z_lo, z_max: z_hi })
        })
        .collect();
    Ok(Decomposition { solids, holes })
}

/// Informational stack-up parameters. The planar field kernel ignores them;
/// the coating model reads the ground depth and cladding permittivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutMetadata {
    pub electrode_thickness: f64,
    pub ground_depth: f64,
    pub cladding_permittivity: f64,
}

impl Default for LayoutMetadata {
    fn default() -> Self {
        Self { electrode_thickness: 6.0 * MICRON, ground_depth: 3.0 * MICRON, cladding_permittivity: 3.9 }
    }
}

/// Complete electrode plane. Immutable once built; every constructor checks
/// the overlap and containment invariants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapLayout {
    electrodes: Vec<Electrode>,
    sim_region: Rect,
    metadata: LayoutMetadata,
}

impl TrapLayout {
    pub fn new(electrodes: Vec<Electrode>, sim_region: Rect, metadata: LayoutMetadata) -> Result<Self> {
        for e in &electrodes {
            e.validate()?;
            if !sim_region.contains_rect(&e.region) {
                return Err(Error::Geometry(format!("electrode `{}` extends beyond the simulation region", e.id)));
            }
        }
        for (i, a) in electrodes.iter().enumerate() {
            for b in &electrodes[i + 1..] {
                if a.id == b.id {
                    return Err(Error::Geometry(format!("duplicate electrode id `{}`", a.id)));
                }
                if a.region.overlaps(&b.region) {
                    return Err(Error::Geometry(format!("electrodes `{}` and `{}` overlap", a.id, b.id)));
                }
            }
        }
        Ok(Self { electrodes, sim_region, metadata })
    }

    pub fn electrodes(&self) -> &[Electrode] {
        &self.electrodes
    }

    pub fn sim_region(&self) -> Rect {
        self.sim_region
    }

    pub fn metadata(&self) -> LayoutMetadata {
        self.metadata
    }

    pub fn electrode(&self, id: &str) -> Result<&Electrode> {
        self.electrodes.iter().find(|e| e.id == id).ok_or_else(|| Error::UnknownElectrode(id.to_string()))
    }

    /// Electrode whose region fully contains `rect`, if any.
    pub fn electrode_containing(&self, rect: &Rect) -> Option<&Electrode> {
        self.electrodes.iter().find(|e| e.region.contains_rect(rect))
    }

    pub fn apertures(&self) -> impl Iterator<Item = (&Electrode, &Aperture)> {
        self.electrodes.iter().flat_map(|e| e.apertures.iter().map(move |a| (e, a)))
    }

    pub fn aperture_count(&self) -> usize {
        self.electrodes.iter().map(|e| e.apertures.len()).sum()
    }

    /// New layout with `aperture` cut into the electrode that contains it.
    pub fn with_aperture(&self, aperture: Aperture) -> Result<TrapLayout> {
        aperture.validate()?;
        let rect = aperture.rect()?;
        let id = self
            .electrode_containing(&rect)
            .map(|e| e.id.clone())
            .ok_or_else(|| Error::ApertureOutside {
                center_y: aperture.center_y,
                center_z: aperture.center_z,
                target: "any electrode".into(),
            })?;
        self.with_aperture_in(&id, aperture)
    }

    /// New layout with `aperture` cut into electrode `id`.
    pub fn with_aperture_in(&self, id: &str, aperture: Aperture) -> Result<TrapLayout> {
        let mut electrodes = self.electrodes.clone();
        let e = electrodes
            .iter_mut()
            .find(|e| e.id == id)
            .ok_or_else(|| Error::UnknownElectrode(id.to_string()))?;
        e.apertures.push(aperture);
        TrapLayout::new(electrodes, self.sim_region, self.metadata)
    }

    /// Same layout with every aperture's coating replaced.
    pub fn with_coating(&self, coating: Coating) -> Result<TrapLayout> {
        let mut electrodes = self.electrodes.clone();
        for e in &mut electrodes {
            for a in &mut e.apertures {
                a.coating = coating;
            }
        }
        TrapLayout::new(electrodes, self.sim_region, self.metadata)
    }

    pub fn without_apertures(&self) -> TrapLayout {
        let mut out = self.clone();
        for e in &mut out.electrodes {
            e.apertures.clear();
        }
        out
    }
}

/// Mirror axes for [`symmetrize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MirrorAxis {
    /// Reflection about the z-axis, `y -> -y`.
    ZAxis,
    /// Reflection about the y-axis, `z -> -z`.
    YAxis,
}

/// Add mirror images of every aperture for each requested axis, in order.
///
/// An image that coincides (within 1 nm) with an existing aperture is not
/// duplicated, so the operation is idempotent.
pub fn symmetrize(layout: &TrapLayout, axes: &[MirrorAxis]) -> Result<TrapLayout> {
    if layout.aperture_count() == 0 {
        return Err(Error::InvalidArgument("symmetrize requires at least one aperture".into()));
    }
    let mut out = layout.clone();
    for axis in axes {
        let current: Vec<Aperture> = out.apertures().map(|(_, a)| *a).collect();
        for ap in current {
            let image = match axis {
                MirrorAxis::ZAxis => ap.mirrored_y(),
                MirrorAxis::YAxis => ap.mirrored_z(),
            };
            if out.apertures().any(|(_, a)| a.coincides(&image)) {
                continue;
            }
            out = out.with_aperture(image)?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriveKind {
    Rf,
    Dc,
}

/// Excitation of a single electrode, `V(t) = Re[amplitude * e^{i(Ωt + phase)}]`
/// for RF and a static `amplitude` for DC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Excitation {
    pub amplitude: f64,
    pub phase: f64,
    pub kind: DriveKind,
}

/// Electrode excitations plus the single shared RF angular frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drive {
    pub rf_frequency: f64,
    pub excitations: BTreeMap<String, Excitation>,
}

impl Drive {
    pub fn new(rf_frequency: f64) -> Self {
        Self { rf_frequency, excitations: BTreeMap::new() }
    }

    /// Every RF electrode of `layout` at `amplitude` volts, zero phase.
    pub fn rf(layout: &TrapLayout, amplitude: f64, rf_frequency: f64) -> Self {
        let mut d = Drive::new(rf_frequency);
        for e in layout.electrodes().iter().filter(|e| e.kind == ElectrodeKind::Rf) {
            d.excitations.insert(e.id.clone(), Excitation { amplitude, phase: 0.0, kind: DriveKind::Rf });
        }
        d
    }

    pub fn with(mut self, id: impl Into<String>, excitation: Excitation) -> Self {
        self.excitations.insert(id.into(), excitation);
        self
    }

    /// All excitations multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut d = self.clone();
        for ex in d.excitations.values_mut() {
            ex.amplitude *= factor;
        }
        d
    }

    pub fn has_rf(&self) -> bool {
        self.excitations.values().any(|e| e.kind == DriveKind::Rf && e.amplitude != 0.0)
    }

    pub fn validate(&self, layout: &TrapLayout) -> Result<()> {
        if !(self.rf_frequency > 0.0 && self.rf_frequency.is_finite()) {
            return Err(Error::InvalidArgument(format!("RF frequency must be positive, got {:e}", self.rf_frequency)));
        }
        for (id, ex) in &self.excitations {
            layout.electrode(id)?;
            if !ex.amplitude.is_finite() || !ex.phase.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite excitation on `{id}`")));
            }
        }
        Ok(())
    }
}

/// Trap dimensions used by [`build_reference_layout`], in metres.
pub mod reference {
    use crate::constants::MICRON;

    pub const SIM_LENGTH: f64 = 5000.0 * MICRON;
    pub const SIM_WIDTH: f64 = 2400.0 * MICRON;
    pub const OUTER_DC_LENGTH: f64 = 1000.0 * MICRON;
    pub const OUTER_DC_WIDTH: f64 = 200.0 * MICRON;
    pub const RF_WIDTH: f64 = 150.0 * MICRON;
    pub const CENTER_DC_WIDTH: f64 = 44.3 * MICRON;
    pub const GAP: f64 = 5.0 * MICRON;
    pub const OUTER_DC_SEGMENTS: usize = 5;

    /// Inner edge of the RF rail.
    pub const RF_INNER: f64 = 0.5 * GAP + CENTER_DC_WIDTH + GAP;
    pub const RF_OUTER: f64 = RF_INNER + RF_WIDTH;
    pub const RF_CENTER: f64 = 0.5 * (RF_INNER + RF_OUTER);
    pub const CENTER_DC_CENTER: f64 = 0.5 * GAP + 0.5 * CENTER_DC_WIDTH;
    pub const OUTER_DC_INNER: f64 = RF_OUTER + GAP;
    pub const OUTER_DC_OUTER: f64 = OUTER_DC_INNER + OUTER_DC_WIDTH;
    pub const GROUND_INNER: f64 = OUTER_DC_OUTER + GAP;

    /// Default RF drive.
    pub const RF_AMPLITUDE: f64 = 100.0;
    pub const RF_FREQUENCY_MHZ: f64 = 16.0;
}

/// The reference trap: split centre DC, two RF rails, five outer DC segments
/// per side and grounded borders, all separated by 5 µm grounded gaps.
pub fn build_reference_layout() -> TrapLayout {
    use reference::*;
    let half_l = 0.5 * SIM_LENGTH;
    let half_w = 0.5 * SIM_WIDTH;
    let strip = |y0: f64, y1: f64| Rect { y_min: y0, y_max: y1, z_min: -half_l, z_max: half_l };

    let mut electrodes = Vec::new();
    for (side, sign) in [("pos", 1.0), ("neg", -1.0)] {
        let place = |a: f64, b: f64| if sign > 0.0 { strip(a, b) } else { strip(-b, -a) };
        electrodes.push(Electrode::new(
            format!("cdc_{side}"),
            ElectrodeKind::CenterDc,
            place(0.5 * GAP, 0.5 * GAP + CENTER_DC_WIDTH),
        ));
        electrodes.push(Electrode::new(format!("rf_{side}"), ElectrodeKind::Rf, place(RF_INNER, RF_OUTER)));
        for k in 0..OUTER_DC_SEGMENTS {
            let z0 = -half_l + k as f64 * OUTER_DC_LENGTH + 0.5 * GAP;
            let z1 = z0 + OUTER_DC_LENGTH - GAP;
            let r = place(OUTER_DC_INNER, OUTER_DC_OUTER);
            electrodes.push(Electrode::new(
                format!("odc_{side}_{}", k + 1),
                ElectrodeKind::OuterDc,
                Rect { z_min: z0, z_max: z1, ..r },
            ));
        }
        electrodes.push(Electrode::new(format!("gnd_{side}"), ElectrodeKind::Ground, place(GROUND_INNER, half_w)));
    }
    let sim = Rect { y_min: -half_w, y_max: half_w, z_min: -half_l, z_max: half_l };
    TrapLayout::new(electrodes, sim, LayoutMetadata::default()).expect("reference layout is valid")
}

/// Outcoupling angle (degrees from the surface normal) of a beam from an
/// aperture at transverse offset `p_y` to an ion at `height`.
pub fn aperture_angle_deg(p_y: f64, height: f64) -> f64 {
    (p_y.abs() / height).atan() * 180.0 / PI
}
