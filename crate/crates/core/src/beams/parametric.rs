//! Gaussian main lobe matched to the half-power beamwidths, with a hard
//! sidelobe floor and a constant back lobe.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use super::{BeamPattern, PatternModel, PatternSpec, Steering};
use crate::units::{db_to_amplitude, wrap_degrees};
use crate::Result;

/// Attenuation in dB at one full beamwidth from the steering direction; half
/// a beamwidth off gives exactly 3 dB.
const LOBE_DB_PER_HPBW2: f64 = 12.0;

#[derive(Clone, Debug)]
pub struct Parametric {
    spec: PatternSpec,
    steering: Steering,
}

impl Parametric {
    pub fn new(spec: PatternSpec, steering: Steering) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec, steering })
    }

    fn power_db(&self, az: f64, el: f64) -> f64 {
        let s = &self.spec;
        if az.abs() >= 90.0 {
            return s.peak_gain_dbi + s.backlobe_db;
        }
        let daz = wrap_degrees(az - self.steering.azimuth_deg) / s.az_hpbw_deg;
        let del = (el - self.steering.elevation_deg) / s.el_hpbw_deg;
        let lobe = s.peak_gain_dbi - LOBE_DB_PER_HPBW2 * (daz * daz + del * del);
        lobe.max(s.peak_gain_dbi + s.sidelobe_floor_db)
    }
}

impl BeamPattern for Parametric {
    fn steering(&self) -> Steering {
        self.steering
    }

    fn peak_gain_dbi(&self) -> f64 {
        self.spec.peak_gain_dbi
    }

    fn gain(&self, azimuth_deg: f64, elevation_deg: f64) -> Complex64 {
        let az = wrap_degrees(azimuth_deg);
        let mag = db_to_amplitude(self.power_db(az, elevation_deg));
        let u = az.to_radians().sin() * elevation_deg.to_radians().cos();
        Complex64::from_polar(mag, 2.0 * PI * self.spec.phase_center_wl * u)
    }

    fn gain_dbi(&self, azimuth_deg: f64, elevation_deg: f64) -> f64 {
        self.power_db(wrap_degrees(azimuth_deg), elevation_deg)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ParametricModel;

impl PatternModel for ParametricModel {
    fn name(&self) -> &'static str {
        "parametric"
    }

    fn build(&self, spec: &PatternSpec, steering: Steering) -> Result<Arc<dyn BeamPattern>> {
        Ok(Arc::new(Parametric::new(spec.clone(), steering)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beam(az: f64) -> Parametric {
        Parametric::new(PatternSpec::default(), Steering::new(az, 0.0)).unwrap()
    }

    #[test]
    fn peak_half_power_and_floor() {
        let b = beam(10.0);
        assert!((b.gain_dbi(10.0, 0.0) - 20.0).abs() < 1e-12);
        assert!((b.gain_dbi(16.0, 0.0) - 17.0).abs() < 1e-12);
        assert!((b.gain_dbi(4.0, 0.0) - 17.0).abs() < 1e-12);
        assert!((b.gain_dbi(10.0, 11.0) - 17.0).abs() < 1e-12);
        assert!(b.gain_dbi(50.0, 0.0) <= 10.0 + 1e-12);
        assert!((b.gain_dbi(170.0, 0.0) + 10.0).abs() < 1e-12);
    }

    #[test]
    fn amplitude_matches_power() {
        let b = beam(-5.0);
        for az in [-60.0, -5.0, 0.0, 3.0, 120.0] {
            let g = b.gain(az, 2.0);
            assert!((10.0 * g.norm_sqr().log10() - b.gain_dbi(az, 2.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn neighbour_overlap_within_three_db() {
        let a = beam(0.0);
        let b = beam(5.0);
        assert!(b.gain_dbi(0.0, 0.0) >= a.gain_dbi(0.0, 0.0) - 3.0);
    }

    #[test]
    fn phase_centre_sets_direction_dependent_phase() {
        let spec = PatternSpec {
            phase_center_wl: 0.25,
            ..PatternSpec::default()
        };
        let b = Parametric::new(spec, Steering::new(0.0, 0.0)).unwrap();
        assert!(b.gain(0.0, 0.0).arg().abs() < 1e-12);
        let g = b.gain(30.0, 0.0);
        assert!((g.arg() - 2.0 * PI * 0.25 * 0.5).abs() < 1e-12);
    }
}
