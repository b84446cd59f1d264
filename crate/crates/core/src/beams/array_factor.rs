//! Uniform rectangular array: ideal phase shifters, uniform taper, and a
//! directive element whose elevation exponent is fitted to the specified
//! vertical beamwidth.
//!
//! The phase reference is the aperture centre, so the array factor is real
//! and neighbouring beams differ only in sign in their sidelobes.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use super::{BeamPattern, PatternModel, PatternSpec, Steering};
use crate::units::{db_to_amplitude, db_to_power, wrap_degrees};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct ArrayFactor {
    spec: PatternSpec,
    steering: Steering,
    element_exponent: f64,
    /// Power normalisation so the boresight beam peaks at `peak_gain_dbi`.
    scale: f64,
}

/// Uniform linear array factor `Σ exp(j2π d (m − (M−1)/2) x)`; real valued.
fn linear_af(count: usize, spacing_wl: f64, x: f64) -> f64 {
    let centre = (count as f64 - 1.0) / 2.0;
    (0..count)
        .map(|m| (2.0 * PI * spacing_wl * (m as f64 - centre) * x).cos())
        .sum()
}

fn element_power(az_deg: f64, el_deg: f64, exponent: f64) -> f64 {
    let ca = az_deg.to_radians().cos().max(0.0);
    let ce = el_deg.to_radians().cos().max(0.0);
    ca * ce.powf(exponent)
}

/// Elevation exponent `q` of the `cos(az)·cos^q(el)` element power pattern
/// that gives the boresight beam of `spec` its elevation half-power
/// beamwidth.
pub fn fit_element_exponent(spec: &PatternSpec) -> Result<f64> {
    let half = spec.el_hpbw_deg / 2.0;
    let rel = |q: f64| {
        let v = half.to_radians().sin();
        let af = linear_af(spec.rows, spec.spacing_wl, v) / spec.rows as f64;
        element_power(0.0, half, q) * af * af
    };
    // The rows alone may already be narrower than requested.
    if rel(0.0) < 0.5 {
        return Err(Error::invalid(format!(
            "{} rows at {} λ are narrower than {}° in elevation",
            spec.rows, spec.spacing_wl, spec.el_hpbw_deg
        )));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while rel(hi) > 0.5 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::invalid("elevation beamwidth is too narrow to fit"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rel(mid) > 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

impl ArrayFactor {
    pub fn new(spec: PatternSpec, steering: Steering) -> Result<Self> {
        spec.validate()?;
        let q = fit_element_exponent(&spec)?;
        Ok(Self::with_exponent(spec, steering, q))
    }

    fn with_exponent(spec: PatternSpec, steering: Steering, element_exponent: f64) -> Self {
        let n = (spec.rows * spec.cols) as f64;
        let scale = db_to_power(spec.peak_gain_dbi) / (n * n);
        Self {
            spec,
            steering,
            element_exponent,
            scale,
        }
    }

    pub fn element_exponent(&self) -> f64 {
        self.element_exponent
    }
}

impl BeamPattern for ArrayFactor {
    fn steering(&self) -> Steering {
        self.steering
    }

    fn peak_gain_dbi(&self) -> f64 {
        self.spec.peak_gain_dbi
    }

    fn gain(&self, azimuth_deg: f64, elevation_deg: f64) -> Complex64 {
        let az = wrap_degrees(azimuth_deg);
        if az.abs() >= 90.0 {
            return Complex64::new(
                db_to_amplitude(self.spec.peak_gain_dbi + self.spec.backlobe_db),
                0.0,
            );
        }
        let (a, e) = (az.to_radians(), elevation_deg.to_radians());
        let (a0, e0) = (
            self.steering.azimuth_deg.to_radians(),
            self.steering.elevation_deg.to_radians(),
        );
        let du = a.sin() * e.cos() - a0.sin() * e0.cos();
        let dv = e.sin() - e0.sin();
        let af = linear_af(self.spec.cols, self.spec.spacing_wl, du)
            * linear_af(self.spec.rows, self.spec.spacing_wl, dv);
        let elem = element_power(az, elevation_deg, self.element_exponent);
        Complex64::new(af * (self.scale * elem).sqrt(), 0.0)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ArrayFactorModel;

impl PatternModel for ArrayFactorModel {
    fn name(&self) -> &'static str {
        "array-factor"
    }

    fn build(&self, spec: &PatternSpec, steering: Steering) -> Result<Arc<dyn BeamPattern>> {
        Ok(Arc::new(ArrayFactor::new(spec.clone(), steering)?))
    }

    fn build_all(
        &self,
        spec: &PatternSpec,
        steerings: &[Steering],
    ) -> Result<Vec<Arc<dyn BeamPattern>>> {
        spec.validate()?;
        let q = fit_element_exponent(spec)?;
        Ok(steerings
            .iter()
            .map(|&s| {
                Arc::new(ArrayFactor::with_exponent(spec.clone(), s, q)) as Arc<dyn BeamPattern>
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beam(az: f64) -> ArrayFactor {
        ArrayFactor::new(PatternSpec::array_factor(), Steering::new(az, 0.0)).unwrap()
    }

    /// Half-power width found by scanning outwards from the peak in 0.1° steps.
    fn scanned_hpbw(f: impl Fn(f64) -> f64) -> f64 {
        let peak = f(0.0);
        let mut lo = 0.0;
        while f(lo - 0.1) >= peak / 2.0 {
            lo -= 0.1;
        }
        let mut hi = 0.0;
        while f(hi + 0.1) >= peak / 2.0 {
            hi += 0.1;
        }
        hi - lo + 0.1
    }

    #[test]
    fn boresight_peak_and_beamwidths() {
        let b = beam(0.0);
        assert!((b.gain_dbi(0.0, 0.0) - 20.0).abs() < 1e-9);
        let az = scanned_hpbw(|x| b.gain(x, 0.0).norm_sqr());
        assert!((11.0..=14.0).contains(&az), "{az}");
        let el = scanned_hpbw(|x| b.gain(0.0, x).norm_sqr());
        assert!((el - 22.0).abs() <= 3.0, "{el}");
    }

    #[test]
    fn exponent_rejects_impossible_widths() {
        let spec = PatternSpec {
            el_hpbw_deg: 170.0,
            ..PatternSpec::array_factor()
        };
        assert!(fit_element_exponent(&spec).is_err());
    }

    #[test]
    fn radiated_power_is_steering_invariant() {
        // Integrate |g|² over the front hemisphere on a 0.5° grid.
        let total = |b: &ArrayFactor| {
            let mut s = 0.0;
            let step = 0.5f64;
            let mut el = -89.75;
            while el < 90.0 {
                let mut az = -89.75;
                while az < 90.0 {
                    s += b.gain(az, el).norm_sqr() * el.to_radians().cos();
                    az += step;
                }
                el += step;
            }
            s
        };
        let p0 = total(&beam(0.0));
        for az in [15.0, 30.0, 45.0, -45.0] {
            let d = 10.0 * (total(&beam(az)) / p0).log10();
            assert!(d.abs() < 0.5, "{az}: {d}");
        }
    }

    #[test]
    fn steered_beam_points_near_its_angle() {
        for az in [-45.0, -20.0, 25.0, 45.0] {
            let b = beam(az);
            let mut best = (f64::MIN, 0.0);
            let mut x = -90.0;
            while x <= 90.0 {
                let g = b.gain(x, 0.0).norm_sqr();
                if g > best.0 {
                    best = (g, x);
                }
                x += 0.1;
            }
            assert!((best.1 - az).abs() < 2.5, "{az} → {}", best.1);
        }
    }
}
