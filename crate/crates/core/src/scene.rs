//! Cabin geometry, candidate RIS placements and radio configuration.
//!
//! Coordinates are metres. `x` runs along the cabin (one seat row every
//! `seat_pitch`), `y` is lateral with the corridor centred on `y = 0`, and `z`
//! is height above the floor.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::SynthModel;
use crate::{db_to_linear, BOLTZMANN, SPEED_OF_LIGHT};

pub type Point3 = [f64; 3];

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("unsupported RIS size: {0} elements per side (expected 8 or 16)")]
    UnsupportedRisSize(usize),
    #[error("row range {first}..{end} exceeds the {rows}-row cabin")]
    RowRange { first: usize, end: usize, rows: usize },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("failed to read {path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("failed to parse scenario document")]
    Parse(#[from] toml::de::Error),
    #[error("failed to serialize scenario document")]
    Serialize(#[from] toml::ser::Error),
}

/// Seat and cabin dimensions used to place UEs, the BS and RIS candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CabinLayout {
    pub seat_pitch: f64,
    pub seat_width: f64,
    pub corridor_width: f64,
    pub cabin_height: f64,
    pub ue_height: f64,
    pub ris_height: f64,
    pub bs_height: f64,
}

impl Default for CabinLayout {
    fn default() -> Self {
        Self {
            seat_pitch: 0.8,
            seat_width: 0.5,
            corridor_width: 0.5,
            cabin_height: 2.2,
            ue_height: 1.1,
            ris_height: 1.7,
            bs_height: 2.0,
        }
    }
}

impl CabinLayout {
    /// Longitudinal coordinate of the centre of seat row `row`.
    pub fn row_x(&self, row: usize) -> f64 {
        (row as f64 + 0.5) * self.seat_pitch
    }

    /// Seat row containing longitudinal coordinate `x` (nearest row centre).
    pub fn row_of(&self, x: f64) -> i64 {
        (x / self.seat_pitch - 0.5).round() as i64
    }

    pub fn cabin_width(&self, seats_per_row: usize) -> f64 {
        self.corridor_width + seats_per_row as f64 * self.seat_width
    }

    /// Lateral seat coordinates for one row, left window seat first.
    pub fn seat_offsets(&self, seats_per_row: usize) -> Vec<f64> {
        let left = seats_per_row / 2;
        let half_corridor = 0.5 * self.corridor_width;
        (0..seats_per_row)
            .map(|i| {
                if i < left {
                    -(half_corridor + ((left - 1 - i) as f64 + 0.5) * self.seat_width)
                } else {
                    half_corridor + ((i - left) as f64 + 0.5) * self.seat_width
                }
            })
            .collect()
    }

    /// Lateral offset of the middle seat of a seat block (the block to the right
    /// of the corridor; the left block is mirrored).
    pub fn middle_seat_offset(&self, seats_per_row: usize) -> f64 {
        let per_side = seats_per_row - seats_per_row / 2;
        0.5 * self.corridor_width + 0.5 * per_side as f64 * self.seat_width
    }
}

/// Dielectric metadata for a cabin material. Not used in any computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub permittivity: f64,
    pub conductivity: f64,
    pub thickness_cm: f64,
}

pub fn default_materials() -> BTreeMap<String, Material> {
    let mut m = BTreeMap::new();
    let mut put = |name: &str, permittivity: f64, conductivity: f64, thickness_cm: f64| {
        m.insert(
            name.to_string(),
            Material {
                permittivity,
                conductivity,
                thickness_cm,
            },
        );
    };
    put("skin", 19.3, 30.40, 0.1);
    put("abs", 2.4, 0.028, 0.3);
    put("nylon", 3.01, 0.03, 0.25);
    put("glass", 6.27, 0.15, 0.3);
    m
}

/// A candidate RIS location: a square UPA standing perpendicular to the floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RisCandidate {
    pub center: Point3,
    /// Unit normal of the reflective side.
    pub normal: Point3,
    pub elements_per_side: usize,
    pub element_spacing: f64,
}

impl RisCandidate {
    pub fn num_elements(&self) -> usize {
        self.elements_per_side * self.elements_per_side
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CabinScene {
    /// Seat rows of the whole cabin (defines the bounding box).
    pub rows: usize,
    pub seats_per_row: usize,
    pub layout: CabinLayout,
    pub bs_position: Point3,
    pub ue_positions: Vec<Point3>,
    pub ris_candidates: Vec<RisCandidate>,
    pub materials: BTreeMap<String, Material>,
}

impl CabinScene {
    pub fn num_ues(&self) -> usize {
        self.ue_positions.len()
    }

    pub fn num_candidates(&self) -> usize {
        self.ris_candidates.len()
    }

    /// `(min, max)` corners of the cabin bounding box.
    pub fn bounding_box(&self) -> (Point3, Point3) {
        let half_w = 0.5 * self.layout.cabin_width(self.seats_per_row);
        (
            [0.0, -half_w, 0.0],
            [
                self.rows as f64 * self.layout.seat_pitch,
                half_w,
                self.layout.cabin_height,
            ],
        )
    }

    pub fn ue_row(&self, k: usize) -> i64 {
        self.layout.row_of(self.ue_positions[k][0])
    }

    pub fn bs_row(&self) -> i64 {
        self.layout.row_of(self.bs_position[0])
    }
}

/// Radio parameters of the BS and receivers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub noise_figure_db: f64,
    pub noise_temperature_k: f64,
    pub bs_antennas_per_side: usize,
    /// BS element spacing in metres.
    pub bs_spacing: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        let carrier_hz = 28e9;
        Self {
            carrier_hz,
            bandwidth_hz: 1e9,
            tx_power_dbm: 25.0,
            noise_figure_db: 7.0,
            noise_temperature_k: 290.0,
            bs_antennas_per_side: 8,
            bs_spacing: 0.5 * SPEED_OF_LIGHT / carrier_hz,
        }
    }
}

impl RadioConfig {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn tx_power_w(&self) -> f64 {
        db_to_linear(self.tx_power_dbm) * 1e-3
    }

    /// Receiver noise density N0 in W/Hz: kT scaled by the noise figure.
    pub fn noise_psd_w_per_hz(&self) -> f64 {
        BOLTZMANN * self.noise_temperature_k * db_to_linear(self.noise_figure_db)
    }

    pub fn num_bs_antennas(&self) -> usize {
        self.bs_antennas_per_side * self.bs_antennas_per_side
    }

    /// P / (B N0): converts channel power gain into SNR.
    pub fn snr_scale(&self) -> f64 {
        self.tx_power_w() / (self.bandwidth_hz * self.noise_psd_w_per_hz())
    }
}

/// Builder for a fully seated cabin with "position 2" RIS candidates: one RIS
/// above the middle seat on each side of the corridor, reflective side towards
/// the BS, in every populated row.
#[derive(Debug, Clone)]
pub struct CabinBuilder {
    pub rows: usize,
    pub seats_per_row: usize,
    pub layout: CabinLayout,
    pub carrier_hz: f64,
    /// Rows that carry UEs and RIS candidates. Defaults to every row.
    pub populated_rows: std::ops::Range<usize>,
}

impl Default for CabinBuilder {
    fn default() -> Self {
        Self {
            rows: 11,
            seats_per_row: 6,
            layout: CabinLayout::default(),
            carrier_hz: 28e9,
            populated_rows: 0..11,
        }
    }
}

impl CabinBuilder {
    pub fn build(&self, ris_elements_per_side: usize) -> Result<CabinScene, SceneError> {
        if ris_elements_per_side != 8 && ris_elements_per_side != 16 {
            return Err(SceneError::UnsupportedRisSize(ris_elements_per_side));
        }
        if self.populated_rows.end > self.rows || self.populated_rows.is_empty() {
            return Err(SceneError::RowRange {
                first: self.populated_rows.start,
                end: self.populated_rows.end,
                rows: self.rows,
            });
        }
        let layout = &self.layout;
        let length = self.rows as f64 * layout.seat_pitch;
        let bs_position = [0.5 * length, 0.0, layout.bs_height];
        let wavelength = SPEED_OF_LIGHT / self.carrier_hz;
        let offsets = layout.seat_offsets(self.seats_per_row);
        let mid = layout.middle_seat_offset(self.seats_per_row);

        let mut ue_positions = Vec::new();
        let mut ris_candidates = Vec::new();
        for row in self.populated_rows.clone() {
            let x = layout.row_x(row);
            for &y in &offsets {
                ue_positions.push([x, y, layout.ue_height]);
            }
            for y in [-mid, mid] {
                let dx = bs_position[0] - x;
                let dy = bs_position[1] - y;
                let len = dx.hypot(dy);
                ris_candidates.push(RisCandidate {
                    center: [x, y, layout.ris_height],
                    normal: [dx / len, dy / len, 0.0],
                    elements_per_side: ris_elements_per_side,
                    element_spacing: 0.25 * wavelength,
                });
            }
        }
        Ok(CabinScene {
            rows: self.rows,
            seats_per_row: self.seats_per_row,
            layout: layout.clone(),
            bs_position,
            ue_positions,
            ris_candidates,
            materials: default_materials(),
        })
    }
}

/// The 11-row, 66-seat cabin with 22 candidates.
pub fn build_default_cabin(ris_elements_per_side: usize) -> Result<CabinScene, SceneError> {
    CabinBuilder::default().build(ris_elements_per_side)
}

/// A contiguous block of rows of the default cabin. The BS stays at the
/// centre of the full cabin, so sections away from the centre include the
/// blocked far rows.
pub fn build_cabin_section(
    ris_elements_per_side: usize,
    first_row: usize,
    num_rows: usize,
) -> Result<CabinScene, SceneError> {
    CabinBuilder {
        populated_rows: first_row..first_row + num_rows,
        ..CabinBuilder::default()
    }
    .build(ris_elements_per_side)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

fn violation(subject: impl Into<String>, message: impl Into<String>) -> Violation {
    Violation {
        subject: subject.into(),
        message: message.into(),
    }
}

fn finite(p: &Point3) -> bool {
    p.iter().all(|c| c.is_finite())
}

/// Checks scene and radio invariants. An empty report means the pair is valid.
pub fn validate(scene: &CabinScene, radio: &RadioConfig) -> Vec<Violation> {
    let mut out = Vec::new();

    if scene.rows == 0 || scene.seats_per_row == 0 {
        out.push(violation("scene", "rows and seats_per_row must be positive"));
    }
    if scene.ue_positions.is_empty() {
        out.push(violation("scene", "at least one UE is required"));
    }
    let (lo, hi) = scene.bounding_box();
    if !finite(&scene.bs_position) {
        out.push(violation("bs_position", "must be finite"));
    } else if (0..3).any(|i| scene.bs_position[i] <= lo[i] || scene.bs_position[i] >= hi[i]) {
        out.push(violation("bs_position", "must lie strictly inside the cabin"));
    }

    for (k, p) in scene.ue_positions.iter().enumerate() {
        if !finite(p) {
            out.push(violation(format!("ue {k}"), "position must be finite"));
        }
    }
    for k in 1..scene.ue_positions.len() {
        if let Some(j) = (0..k).find(|&j| scene.ue_positions[j] == scene.ue_positions[k]) {
            out.push(violation(
                format!("ue {k}"),
                format!("duplicates the position of ue {j}"),
            ));
        }
    }

    for (l, c) in scene.ris_candidates.iter().enumerate() {
        let subject = format!("ris candidate {l}");
        if !finite(&c.center) || !finite(&c.normal) {
            out.push(violation(&subject, "center and normal must be finite"));
        }
        let norm = c.normal.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            out.push(violation(&subject, "normal must be a unit vector"));
        }
        if c.elements_per_side == 0 {
            out.push(violation(&subject, "elements_per_side must be positive"));
        }
        if !(c.element_spacing > 0.0) {
            out.push(violation(&subject, "element_spacing must be positive"));
        }
        if let Some(j) = (0..l).find(|&j| scene.ris_candidates[j].center == c.center) {
            out.push(violation(
                &subject,
                format!("duplicates the center of ris candidate {j}"),
            ));
        }
    }
    if let Some(first) = scene.ris_candidates.first() {
        if scene
            .ris_candidates
            .iter()
            .any(|c| c.elements_per_side != first.elements_per_side)
        {
            out.push(violation(
                "ris_candidates",
                "all candidates must have the same number of elements",
            ));
        }
    }

    if !(radio.carrier_hz > 0.0) {
        out.push(violation("radio", "carrier frequency must be positive"));
    }
    if !(radio.bandwidth_hz > 0.0) {
        out.push(violation("radio", "bandwidth must be positive"));
    }
    if !radio.tx_power_dbm.is_finite() {
        out.push(violation("radio", "transmit power must be finite"));
    }
    if !radio.noise_figure_db.is_finite() || !(radio.noise_temperature_k > 0.0) {
        out.push(violation("radio", "noise density must be positive"));
    }
    if radio.bs_antennas_per_side == 0 {
        out.push(violation("radio", "BS antenna count must be positive"));
    }
    if !(radio.bs_spacing > 0.0) {
        out.push(violation("radio", "BS antenna spacing must be positive"));
    }
    out
}

/// On-disk scenario document: scene, radio parameters and an optional
/// synthetic channel model, as one TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDocument {
    pub rows: usize,
    pub seats_per_row: usize,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub noise_figure_db: f64,
    #[serde(default = "default_noise_temperature")]
    pub noise_temperature_k: f64,
    pub bs_antennas_per_side: usize,
    pub bs_spacing: f64,
    pub bs_position: Point3,
    pub ue_positions: Vec<Point3>,
    #[serde(default)]
    pub layout: CabinLayout,
    #[serde(default)]
    pub materials: BTreeMap<String, Material>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthModel>,
    pub ris_candidates: Vec<RisCandidate>,
}

fn default_noise_temperature() -> f64 {
    290.0
}

impl ScenarioDocument {
    pub fn new(scene: &CabinScene, radio: &RadioConfig, synth: Option<SynthModel>) -> Self {
        Self {
            rows: scene.rows,
            seats_per_row: scene.seats_per_row,
            carrier_hz: radio.carrier_hz,
            bandwidth_hz: radio.bandwidth_hz,
            tx_power_dbm: radio.tx_power_dbm,
            noise_figure_db: radio.noise_figure_db,
            noise_temperature_k: radio.noise_temperature_k,
            bs_antennas_per_side: radio.bs_antennas_per_side,
            bs_spacing: radio.bs_spacing,
            bs_position: scene.bs_position,
            ue_positions: scene.ue_positions.clone(),
            layout: scene.layout.clone(),
            materials: scene.materials.clone(),
            synth,
            ris_candidates: scene.ris_candidates.clone(),
        }
    }

    pub fn scene(&self) -> CabinScene {
        CabinScene {
            rows: self.rows,
            seats_per_row: self.seats_per_row,
            layout: self.layout.clone(),
            bs_position: self.bs_position,
            ue_positions: self.ue_positions.clone(),
            ris_candidates: self.ris_candidates.clone(),
            materials: self.materials.clone(),
        }
    }

    pub fn radio(&self) -> RadioConfig {
        RadioConfig {
            carrier_hz: self.carrier_hz,
            bandwidth_hz: self.bandwidth_hz,
            tx_power_dbm: self.tx_power_dbm,
            noise_figure_db: self.noise_figure_db,
            noise_temperature_k: self.noise_temperature_k,
            bs_antennas_per_side: self.bs_antennas_per_side,
            bs_spacing: self.bs_spacing,
        }
    }

    pub fn to_toml(&self) -> Result<String, SceneError> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml(text: &str) -> Result<Self, SceneError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, SceneError> {
        let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_cabin_dimensions() {
        let scene = build_default_cabin(16).unwrap();
        assert_eq!(scene.num_ues(), 66);
        assert_eq!(scene.num_candidates(), 22);
        assert!(scene.ris_candidates.iter().all(|c| c.num_elements() == 256));
        assert!(scene
            .ris_candidates
            .iter()
            .all(|c| (c.center[2] - 1.7).abs() == 0.0));

        let small = build_default_cabin(8).unwrap();
        assert!(small.ris_candidates.iter().all(|c| c.num_elements() == 64));
    }

    #[test]
    fn unsupported_ris_size_rejected() {
        assert!(matches!(
            build_default_cabin(12),
            Err(SceneError::UnsupportedRisSize(12))
        ));
    }

    #[test]
    fn bs_at_cabin_center() {
        let scene = build_default_cabin(16).unwrap();
        let (lo, hi) = scene.bounding_box();
        assert!((scene.bs_position[0] - 0.5 * (lo[0] + hi[0])).abs() < 1e-12);
        assert_eq!(scene.bs_position[1], 0.0);
        assert_eq!(scene.bs_row(), 5);
    }

    #[test]
    fn candidates_mirrored_and_facing_bs() {
        let scene = build_default_cabin(16).unwrap();
        for pair in scene.ris_candidates.chunks(2) {
            let (a, b) = (&pair[0], &pair[1]);
            assert!((a.center[0] - b.center[0]).abs() < 1e-9);
            assert!((a.center[1] + b.center[1]).abs() < 1e-9);
            for c in pair {
                let to_bs: Vec<f64> = (0..3).map(|i| scene.bs_position[i] - c.center[i]).collect();
                let dot: f64 = (0..3).map(|i| to_bs[i] * c.normal[i]).sum();
                assert!(dot > 0.0);
                assert_eq!(c.normal[2], 0.0);
            }
        }
    }

    #[test]
    fn default_scene_is_valid() {
        let scene = build_default_cabin(16).unwrap();
        assert!(validate(&scene, &RadioConfig::default()).is_empty());
        let section = build_cabin_section(8, 6, 4).unwrap();
        assert_eq!(section.num_ues(), 24);
        assert_eq!(section.num_candidates(), 8);
        assert!(validate(&section, &RadioConfig::default()).is_empty());
    }

    #[test]
    fn duplicated_ue_reported_by_index() {
        let mut scene = build_default_cabin(8).unwrap();
        scene.ue_positions[7] = scene.ue_positions[3];
        let report = validate(&scene, &RadioConfig::default());
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].subject, "ue 7");
    }

    #[test]
    fn zero_bandwidth_reported() {
        let scene = build_default_cabin(8).unwrap();
        let radio = RadioConfig {
            bandwidth_hz: 0.0,
            ..RadioConfig::default()
        };
        let report = validate(&scene, &radio);
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].message, "bandwidth must be positive");
    }

    #[test]
    fn wavelength_matches_carrier() {
        let radio = RadioConfig::default();
        let expected = SPEED_OF_LIGHT / 28e9;
        assert!(((radio.wavelength() - expected) / expected).abs() < 1e-12);
        assert!(((radio.bs_spacing - 0.5 * expected) / expected).abs() < 1e-12);
        assert_eq!(radio.num_bs_antennas(), 64);
    }

    #[test]
    fn noise_density_is_thermal_plus_figure() {
        let radio = RadioConfig::default();
        let dbm_per_hz = 10.0 * (radio.noise_psd_w_per_hz() * 1e3).log10();
        assert!((dbm_per_hz - (-173.975 + 7.0)).abs() < 1e-2);
    }

    #[test]
    fn document_round_trip_is_bit_exact() {
        let scene = build_default_cabin(16).unwrap();
        let radio = RadioConfig::default();
        let doc = ScenarioDocument::new(&scene, &radio, Some(SynthModel::default()));
        let text = doc.to_toml().unwrap();
        let back = ScenarioDocument::from_toml(&text).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.scene(), scene);
        assert_eq!(back.radio(), radio);
        assert_eq!(back.to_toml().unwrap(), text);
        for key in [
            "rows",
            "seats_per_row",
            "bs_position",
            "ue_positions",
            "carrier_hz",
            "bandwidth_hz",
            "tx_power_dbm",
            "noise_figure_db",
            "elements_per_side",
            "element_spacing",
            "[[ris_candidates]]",
        ] {
            assert!(text.contains(key), "missing {key}");
        }
    }
}
