//! Steerable beam codebooks, complex beam gain versus direction, and link
//! budget arithmetic.
//!
//! Angles are in degrees. Azimuth is measured in the array's horizontal plane
//! from its boresight, elevation from the horizontal plane. A codebook is a
//! regular grid of steering directions, 19 azimuth by 13 elevation beams at
//! 5° steps by default, all sharing one [`PatternSpec`].

mod array_factor;
mod parametric;

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use array_factor::{fit_element_exponent, ArrayFactor, ArrayFactorModel};
pub use parametric::{Parametric, ParametricModel};

use crate::registry::Registry;
use crate::units::{noise_floor_dbm, wrap_degrees};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Tx,
    Rx,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Tx => "tx",
            Side::Rx => "rx",
        })
    }
}

/// Position of a beam in its codebook grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BeamId {
    pub azimuth_index: u16,
    pub elevation_index: u16,
}

impl BeamId {
    pub fn new(azimuth_index: u16, elevation_index: u16) -> Self {
        Self {
            azimuth_index,
            elevation_index,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Steering {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

impl Steering {
    pub fn new(azimuth_deg: f64, elevation_deg: f64) -> Self {
        Self {
            azimuth_deg,
            elevation_deg,
        }
    }
}

/// Complex far-field amplitude gain of one steered beam. `|gain|²` is the
/// power gain relative to isotropic.
pub trait BeamPattern: Send + Sync + fmt::Debug {
    fn steering(&self) -> Steering;

    fn peak_gain_dbi(&self) -> f64;

    /// Amplitude gain towards `(azimuth, elevation)` in the array frame.
    fn gain(&self, azimuth_deg: f64, elevation_deg: f64) -> Complex64;

    fn gain_dbi(&self, azimuth_deg: f64, elevation_deg: f64) -> f64 {
        10.0 * self.gain(azimuth_deg, elevation_deg).norm_sqr().log10()
    }
}

/// Shared description of every beam in a codebook.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PatternSpec {
    /// Registered pattern model name.
    pub model: String,
    pub peak_gain_dbi: f64,
    pub az_hpbw_deg: f64,
    pub el_hpbw_deg: f64,
    /// Floor of the main-lobe model relative to peak.
    pub sidelobe_floor_db: f64,
    /// Gain behind the array (|azimuth| ≥ 90°) relative to peak.
    pub backlobe_db: f64,
    pub rows: usize,
    pub cols: usize,
    pub spacing_wl: f64,
    /// Offset of the aperture centre from the rotation axis along the array
    /// broadside, in wavelengths. Sets the direction-dependent phase of the
    /// parametric model.
    pub phase_center_wl: f64,
}

impl Default for PatternSpec {
    fn default() -> Self {
        Self {
            model: "parametric".into(),
            peak_gain_dbi: 20.0,
            az_hpbw_deg: 12.0,
            el_hpbw_deg: 22.0,
            sidelobe_floor_db: -10.0,
            backlobe_db: -30.0,
            rows: 2,
            cols: 8,
            spacing_wl: 0.5,
            phase_center_wl: 0.0,
        }
    }
}

impl PatternSpec {
    pub fn array_factor() -> Self {
        Self {
            model: "array-factor".into(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{what} must be positive, got {v}")))
            }
        };
        positive(self.az_hpbw_deg, "azimuth beamwidth")?;
        positive(self.el_hpbw_deg, "elevation beamwidth")?;
        positive(self.spacing_wl, "element spacing")?;
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::invalid(
                "element grid needs at least one row and column",
            ));
        }
        if self.sidelobe_floor_db > 0.0 || self.backlobe_db > 0.0 {
            return Err(Error::invalid(
                "sidelobe and backlobe levels must be ≤ 0 dB",
            ));
        }
        if !self.peak_gain_dbi.is_finite() || !self.phase_center_wl.is_finite() {
            return Err(Error::invalid("pattern gains must be finite"));
        }
        Ok(())
    }
}

/// Constructs beam patterns of one model family.
pub trait PatternModel: Send + Sync {
    fn name(&self) -> &'static str;

    fn build(&self, spec: &PatternSpec, steering: Steering) -> Result<Arc<dyn BeamPattern>>;

    /// Builds every beam of a codebook. Models with per-spec setup cost
    /// override this to share it.
    fn build_all(
        &self,
        spec: &PatternSpec,
        steerings: &[Steering],
    ) -> Result<Vec<Arc<dyn BeamPattern>>> {
        steerings.iter().map(|&s| self.build(spec, s)).collect()
    }
}

pub fn pattern_models() -> Registry<dyn PatternModel> {
    let mut r: Registry<dyn PatternModel> = Registry::new("beam pattern model");
    r.register("parametric", Arc::new(ParametricModel))
        .register("array-factor", Arc::new(ArrayFactorModel));
    r
}

/// Regular grid of steering angles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BeamGrid {
    pub az_start_deg: f64,
    pub az_step_deg: f64,
    pub az_count: u16,
    pub el_start_deg: f64,
    pub el_step_deg: f64,
    pub el_count: u16,
}

impl Default for BeamGrid {
    fn default() -> Self {
        Self {
            az_start_deg: -45.0,
            az_step_deg: 5.0,
            az_count: 19,
            el_start_deg: -30.0,
            el_step_deg: 5.0,
            el_count: 13,
        }
    }
}

impl BeamGrid {
    pub fn steering(&self, id: BeamId) -> Steering {
        Steering::new(
            self.az_start_deg + self.az_step_deg * id.azimuth_index as f64,
            self.el_start_deg + self.el_step_deg * id.elevation_index as f64,
        )
    }

    /// Elevation index closest to the horizon, used for azimuth-only sweeps.
    pub fn horizon_index(&self) -> u16 {
        let i = (-self.el_start_deg / self.el_step_deg).round();
        i.clamp(0.0, (self.el_count.max(1) - 1) as f64) as u16
    }

    pub fn len(&self) -> usize {
        self.az_count as usize * self.el_count as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> Result<()> {
        if self.az_count == 0 || self.el_count == 0 {
            return Err(Error::invalid("beam grid must contain at least one beam"));
        }
        let all = [
            self.az_start_deg,
            self.az_step_deg,
            self.el_start_deg,
            self.el_step_deg,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("beam grid angles must be finite"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Beam {
    pub id: BeamId,
    pub steering: Steering,
    pub pattern: Arc<dyn BeamPattern>,
}

/// All beams of one side of the link.
#[derive(Clone, Debug)]
pub struct BeamCodebook {
    pub side: Side,
    pub spec: PatternSpec,
    pub grid: BeamGrid,
    /// Mounting rotation of the array in the horizontal plane.
    pub orientation_deg: f64,
    beams: Vec<Beam>,
}

impl BeamCodebook {
    pub fn new(side: Side, spec: PatternSpec, grid: BeamGrid) -> Result<Self> {
        spec.validate()?;
        grid.validate()?;
        let model = pattern_models().get(&spec.model)?;
        let ids: Vec<BeamId> = (0..grid.el_count)
            .flat_map(|e| (0..grid.az_count).map(move |a| BeamId::new(a, e)))
            .collect();
        let steerings: Vec<Steering> = ids.iter().map(|&id| grid.steering(id)).collect();
        let patterns = model.build_all(&spec, &steerings)?;
        let beams = ids
            .into_iter()
            .zip(steerings)
            .zip(patterns)
            .map(|((id, steering), pattern)| Beam {
                id,
                steering,
                pattern,
            })
            .collect();
        Ok(Self {
            side,
            spec,
            grid,
            orientation_deg: 0.0,
            beams,
        })
    }

    pub fn with_orientation(mut self, orientation_deg: f64) -> Self {
        self.orientation_deg = orientation_deg;
        self
    }

    pub fn beam(&self, id: BeamId) -> Result<&Beam> {
        if id.azimuth_index >= self.grid.az_count || id.elevation_index >= self.grid.el_count {
            return Err(Error::invalid(format!(
                "{} beam ({}, {}) is outside the {}×{} codebook",
                self.side,
                id.azimuth_index,
                id.elevation_index,
                self.grid.az_count,
                self.grid.el_count
            )));
        }
        Ok(&self.beams[self.index(id)])
    }

    fn index(&self, id: BeamId) -> usize {
        id.elevation_index as usize * self.grid.az_count as usize + id.azimuth_index as usize
    }

    pub fn beams(&self) -> &[Beam] {
        &self.beams
    }

    /// Horizon-elevation beams ordered by azimuth.
    pub fn azimuth_beams(&self) -> Vec<BeamId> {
        let e = self.grid.horizon_index();
        (0..self.grid.az_count).map(|a| BeamId::new(a, e)).collect()
    }

    /// Gain of `id` towards a direction given in the global frame.
    pub fn gain_global(
        &self,
        id: BeamId,
        azimuth_deg: f64,
        elevation_deg: f64,
    ) -> Result<Complex64> {
        let b = self.beam(id)?;
        Ok(b.pattern.gain(
            wrap_degrees(azimuth_deg - self.orientation_deg),
            elevation_deg,
        ))
    }

    pub fn descriptor(&self) -> CodebookDescriptor {
        CodebookDescriptor {
            side: self.side,
            orientation_deg: self.orientation_deg,
            pattern: self.spec.clone(),
            grid: self.grid,
            steering: self
                .beams
                .iter()
                .map(|b| [b.steering.azimuth_deg, b.steering.elevation_deg])
                .collect(),
        }
    }

    /// Rebuilds a codebook. A non-empty steering table must match the grid.
    pub fn from_descriptor(d: &CodebookDescriptor) -> Result<Self> {
        let cb = Self::new(d.side, d.pattern.clone(), d.grid)?.with_orientation(d.orientation_deg);
        let matches = d.steering.len() == cb.beams.len()
            && d.steering.iter().zip(&cb.beams).all(|(s, b)| {
                (s[0] - b.steering.azimuth_deg).abs() <= 1e-9
                    && (s[1] - b.steering.elevation_deg).abs() <= 1e-9
            });
        if !d.steering.is_empty() && !matches {
            return Err(Error::Metadata(
                "codebook steering table does not match its grid".into(),
            ));
        }
        Ok(cb)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(&self.descriptor()).expect("codebook serializes")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let d: CodebookDescriptor =
            toml::from_str(text).map_err(|e| Error::Metadata(e.to_string()))?;
        Self::from_descriptor(&d)
    }
}

/// Self-describing codebook: model, specs and per-beam steering angles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodebookDescriptor {
    pub side: Side,
    #[serde(default)]
    pub orientation_deg: f64,
    #[serde(default)]
    pub pattern: PatternSpec,
    #[serde(default)]
    pub grid: BeamGrid,
    /// `[azimuth, elevation]` per beam in codebook order; may be omitted.
    #[serde(default)]
    pub steering: Vec<[f64; 2]>,
}

impl CodebookDescriptor {
    pub fn new(side: Side) -> Self {
        Self {
            side,
            orientation_deg: 0.0,
            pattern: PatternSpec::default(),
            grid: BeamGrid::default(),
            steering: Vec::new(),
        }
    }
}

/// 19 × 13 codebook of the named pattern model with default specs.
pub fn default_codebook(side: Side, model: &str) -> Result<BeamCodebook> {
    let spec = PatternSpec {
        model: model.to_string(),
        ..PatternSpec::default()
    };
    BeamCodebook::new(side, spec, BeamGrid::default())
}

/// Largest path loss at which the received tone comb reaches `required_snr_db`.
pub fn link_budget(
    eirp_dbm: f64,
    rx_peak_gain_dbi: f64,
    noise_figure_db: f64,
    bandwidth_hz: f64,
    required_snr_db: f64,
) -> Result<f64> {
    if !(bandwidth_hz > 0.0) {
        return Err(Error::invalid(format!(
            "bandwidth must be positive, got {bandwidth_hz}"
        )));
    }
    Ok(eirp_dbm + rx_peak_gain_dbi
        - (noise_floor_dbm(bandwidth_hz, noise_figure_db) + required_snr_db))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rx() -> BeamCodebook {
        default_codebook(Side::Rx, "parametric").unwrap()
    }

    #[test]
    fn default_codebook_shape() {
        let cb = rx();
        assert_eq!(cb.beams().len(), 19 * 13);
        let az = cb.azimuth_beams();
        assert_eq!(az.len(), 19);
        let first = cb.beam(az[0]).unwrap().steering;
        let last = cb.beam(az[18]).unwrap().steering;
        assert_eq!((first.azimuth_deg, first.elevation_deg), (-45.0, 0.0));
        assert_eq!((last.azimuth_deg, last.elevation_deg), (45.0, 0.0));
        assert_eq!(cb.beam(az[9]).unwrap().steering.azimuth_deg, 0.0);
        assert!(cb.beam(BeamId::new(19, 0)).is_err());
    }

    #[test]
    fn link_budget_arithmetic() {
        let pl = link_budget(57.0, 20.0, 5.0, 400e6, 0.0).unwrap();
        assert!((pl - 160.0).abs() < 0.1, "{pl}");
        let narrow = link_budget(57.0, 20.0, 5.0, 4e6, 0.0).unwrap();
        assert!((narrow - pl - 20.0).abs() < 1e-9);
        assert!(link_budget(57.0, 20.0, 5.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn codebook_text_round_trip() {
        let cb = default_codebook(Side::Tx, "array-factor")
            .unwrap()
            .with_orientation(90.0);
        let back = BeamCodebook::from_text(&cb.to_text()).unwrap();
        assert_eq!(back.side, Side::Tx);
        assert_eq!(back.orientation_deg, 90.0);
        assert_eq!(back.spec, cb.spec);
        let id = BeamId::new(3, 6);
        let a = cb.beam(id).unwrap().pattern.gain(-20.0, 3.0);
        let b = back.beam(id).unwrap().pattern.gain(-20.0, 3.0);
        assert_eq!(a, b);
    }

    #[test]
    fn orientation_is_subtracted_from_global_azimuth() {
        let cb = rx().with_orientation(90.0);
        let id = BeamId::new(9, 6);
        let g = cb.gain_global(id, 90.0, 0.0).unwrap();
        assert!((10.0 * g.norm_sqr().log10() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_model_is_rejected() {
        assert!(default_codebook(Side::Rx, "horn").is_err());
    }

    proptest! {
        #[test]
        fn strongest_beam_is_within_half_a_step(theta in -45.0f64..45.0) {
            let cb = rx();
            let best = cb
                .azimuth_beams()
                .into_iter()
                .max_by(|a, b| {
                    let ga = cb.beam(*a).unwrap().pattern.gain(theta, 0.0).norm();
                    let gb = cb.beam(*b).unwrap().pattern.gain(theta, 0.0).norm();
                    ga.total_cmp(&gb)
                })
                .unwrap();
            let s = cb.beam(best).unwrap().steering.azimuth_deg;
            prop_assert!((s - theta).abs() <= 2.5 + 1e-9);
        }

        #[test]
        fn parametric_codebook_is_mirror_symmetric(k in 0u16..19, theta in -180.0f64..180.0, el in -60.0f64..60.0) {
            let cb = rx();
            let a = cb.beam(BeamId::new(k, 6)).unwrap().pattern.gain_dbi(theta, el);
            let b = cb.beam(BeamId::new(18 - k, 6)).unwrap().pattern.gain_dbi(-theta, el);
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
