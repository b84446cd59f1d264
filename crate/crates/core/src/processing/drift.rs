//! Reference-phase drift estimation from anchor slots and its removal.

use num_complex::Complex64;

use crate::capture::{flags, CaptureSet};
use crate::units::wrap_radians;
use crate::{Error, Result};

/// Adjacent anchors whose wrapped phase step exceeds this are flagged as
/// possibly aliased. A wrapped step never exceeds 180°, so the guard sits
/// below it.
pub const AMBIGUITY_STEP_RAD: f64 = 150.0 * std::f64::consts::PI / 180.0;

#[derive(Clone, Debug, PartialEq)]
pub struct DriftEstimate {
    pub slope_rad_s: f64,
    pub intercept_rad: f64,
    pub residual_rms_rad: f64,
    pub anchors: usize,
    /// Some adjacent-anchor step was large enough to be aliased.
    pub ambiguous: bool,
    /// Anchor times and unwrapped phases used for the fit.
    pub samples: Vec<(f64, f64)>,
}

impl DriftEstimate {
    pub fn slope_deg_per(&self, interval_s: f64) -> f64 {
        self.slope_rad_s.to_degrees() * interval_s
    }
}

/// Absolute start time of every record: snapshot start plus slot offset.
pub(crate) fn record_times(capture: &CaptureSet) -> Result<Vec<f64>> {
    let setup = capture.setup();
    let schedule = setup.schedule()?;
    let starts = setup.snapshot_starts(&schedule)?;
    capture
        .records
        .iter()
        .map(|r| {
            let t0 = starts.get(r.snapshot as usize).ok_or_else(|| {
                Error::Inconsistent(format!("record snapshot {} beyond setup", r.snapshot))
            })?;
            if r.slot as usize >= schedule.slots.len() {
                return Err(Error::Inconsistent(format!(
                    "record slot {} beyond schedule",
                    r.slot
                )));
            }
            Ok(t0 + schedule.start_time(r.slot as usize))
        })
        .collect()
}

/// Weighted least-squares line through the unwrapped center-tone phases of
/// the anchor slots of one snapshot, weighted by anchor power.
pub fn estimate_drift(capture: &CaptureSet, snapshot: u32) -> Result<DriftEstimate> {
    let times = record_times(capture)?;
    let center = capture.plan().center_tone();
    let mut anchors: Vec<(f64, Complex64)> = capture
        .records
        .iter()
        .zip(&times)
        .filter(|(r, _)| r.snapshot == snapshot && r.has(flags::ANCHOR))
        .map(|(r, &t)| (t, r.h[center] / r.agc.amplitude()))
        .collect();
    if anchors.len() < 2 {
        return Err(Error::TooFewAnchors(anchors.len()));
    }
    anchors.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut ambiguous = false;
    let mut samples = Vec::with_capacity(anchors.len());
    let mut prev_raw = anchors[0].1.arg();
    let mut phase = prev_raw;
    samples.push((anchors[0].0, phase));
    for &(t, v) in &anchors[1..] {
        let raw = v.arg();
        let step = wrap_radians(raw - prev_raw);
        ambiguous |= step.abs() > AMBIGUITY_STEP_RAD;
        phase += step;
        prev_raw = raw;
        samples.push((t, phase));
    }

    let w: Vec<f64> = anchors.iter().map(|a| a.1.norm_sqr()).collect();
    let sw: f64 = w.iter().sum();
    if !(sw > 0.0) {
        return Err(Error::ZeroPower);
    }
    let tm = samples.iter().zip(&w).map(|(s, w)| w * s.0).sum::<f64>() / sw;
    let pm = samples.iter().zip(&w).map(|(s, w)| w * s.1).sum::<f64>() / sw;
    let sxx: f64 = samples
        .iter()
        .zip(&w)
        .map(|(s, w)| w * (s.0 - tm).powi(2))
        .sum();
    let sxy: f64 = samples
        .iter()
        .zip(&w)
        .map(|(s, w)| w * (s.0 - tm) * (s.1 - pm))
        .sum();
    if !(sxx > 0.0) {
        return Err(Error::Inconsistent(
            "anchor slots share one start time".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = pm - slope * tm;
    let rss: f64 = samples
        .iter()
        .zip(&w)
        .map(|(s, w)| w * (s.1 - intercept - slope * s.0).powi(2))
        .sum();
    Ok(DriftEstimate {
        slope_rad_s: slope,
        intercept_rad: intercept,
        residual_rms_rad: (rss / sw).sqrt(),
        anchors: anchors.len(),
        ambiguous,
        samples,
    })
}

/// Multiplies every record by `exp(-j·slope·t)` at its absolute start time.
pub fn correct_drift(capture: &CaptureSet, slope_rad_s: f64) -> Result<CaptureSet> {
    if !slope_rad_s.is_finite() {
        return Err(Error::invalid(format!(
            "drift slope {slope_rad_s} is not finite"
        )));
    }
    let mut out = capture.clone();
    if slope_rad_s == 0.0 {
        return Ok(out);
    }
    let times = record_times(capture)?;
    for (r, t) in out.records.iter_mut().zip(times) {
        let rot = Complex64::from_polar(1.0, -slope_rad_s * t);
        for v in r.h.iter_mut() {
            *v *= rot;
        }
    }
    Ok(out)
}
