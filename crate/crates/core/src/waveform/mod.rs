//! Multitone sounding waveform: tone plan, PAPR evaluation, phase design and
//! transmit back-off.
//!
//! PAPR is measured on the complex baseband envelope
//! `x(t) = Σ_k exp(j(2π f_k t + φ_k))` sampled `oversampling_factor` times per
//! Nyquist interval over one period. Under this convention a single tone has
//! 0 dB PAPR; the PAPR of the real passband signal is about 3 dB higher.

mod design;

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

pub use design::{
    newman_phases, phase_designs, zadoff_chu_phases, ClipRefine, DesignGoal, Newman, PhaseDesign,
    ZadoffChu,
};

use crate::units::power_to_db;
use crate::{Error, Result};

/// Smallest evaluation grid used for very small plans, so that the peak of a
/// two- or three-tone envelope is not missed between samples.
const MIN_EVAL_TONES: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TonePlan {
    pub num_tones: usize,
    pub tone_spacing_hz: f64,
    /// Baseband offset of the first tone.
    pub start_freq_hz: f64,
    /// Envelope samples per Nyquist interval used for PAPR evaluation.
    pub oversampling_factor: usize,
}

impl TonePlan {
    pub const DEFAULT_OVERSAMPLING: usize = 4;

    pub fn new(num_tones: usize, tone_spacing_hz: f64, start_freq_hz: f64) -> Result<Self> {
        if num_tones == 0 {
            return Err(Error::invalid("tone plan needs at least one tone"));
        }
        if !(tone_spacing_hz > 0.0) || !tone_spacing_hz.is_finite() {
            return Err(Error::invalid(format!(
                "tone spacing must be positive, got {tone_spacing_hz}"
            )));
        }
        if !(start_freq_hz >= 0.0) || !start_freq_hz.is_finite() {
            return Err(Error::invalid(format!(
                "start frequency must be non-negative, got {start_freq_hz}"
            )));
        }
        Ok(Self {
            num_tones,
            tone_spacing_hz,
            start_freq_hz,
            oversampling_factor: Self::DEFAULT_OVERSAMPLING,
        })
    }

    /// 801 tones at 500 kHz spacing from 50 MHz to 450 MHz.
    pub fn table_one() -> Self {
        Self::new(801, 500e3, 50e6).expect("valid default plan")
    }

    pub fn with_oversampling(mut self, factor: usize) -> Result<Self> {
        if factor < 4 {
            return Err(Error::invalid(format!(
                "oversampling factor must be at least 4, got {factor}"
            )));
        }
        self.oversampling_factor = factor;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let p = Self::new(self.num_tones, self.tone_spacing_hz, self.start_freq_hz)?;
        p.with_oversampling(self.oversampling_factor).map(|_| ())
    }

    pub fn tone_freq(&self, k: usize) -> f64 {
        self.start_freq_hz + k as f64 * self.tone_spacing_hz
    }

    pub fn highest_tone(&self) -> f64 {
        self.tone_freq(self.num_tones - 1)
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.num_tones).map(|k| self.tone_freq(k)).collect()
    }

    /// Midpoint of the occupied band (250 MHz for the default plan).
    pub fn center_freq(&self) -> f64 {
        0.5 * (self.start_freq_hz + self.highest_tone())
    }

    /// One waveform period, `1 / tone_spacing`.
    pub fn period(&self) -> f64 {
        1.0 / self.tone_spacing_hz
    }

    pub fn bandwidth(&self) -> f64 {
        self.num_tones as f64 * self.tone_spacing_hz
    }

    /// Delay resolution of the inverse transform over the tones.
    pub fn delay_bin(&self) -> f64 {
        1.0 / self.bandwidth()
    }

    pub fn center_tone(&self) -> usize {
        self.num_tones / 2
    }

    /// Number of envelope samples per period used for PAPR evaluation.
    pub fn eval_len(&self) -> usize {
        self.oversampling_factor * self.num_tones.max(MIN_EVAL_TONES)
    }
}

/// A phase-designed multitone waveform with its measured PAPR.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoundingWaveform {
    pub plan: TonePlan,
    pub design: String,
    pub papr_db: f64,
    pub converged: bool,
    pub phases: Vec<f64>,
}

impl SoundingWaveform {
    pub fn from_phases(
        plan: TonePlan,
        phases: Vec<f64>,
        design: impl Into<String>,
    ) -> Result<Self> {
        plan.validate()?;
        let papr_db = papr_db(&plan, &phases)?;
        Ok(Self {
            plan,
            design: design.into(),
            papr_db,
            converged: true,
            phases,
        })
    }

    pub fn duration(&self) -> f64 {
        self.plan.period()
    }

    /// Unit-magnitude complex tone coefficients `exp(jφ_k)`.
    pub fn tones(&self) -> Vec<Complex64> {
        self.phases
            .iter()
            .map(|&p| Complex64::from_polar(1.0, p))
            .collect()
    }

    /// Complex envelope over one period on a grid of `len` samples.
    pub fn envelope(&self, len: usize) -> Result<Vec<Complex64>> {
        envelope(&self.phases, len)
    }

    pub fn recompute_papr(&self) -> Result<f64> {
        papr_db(&self.plan, &self.phases)
    }

    pub fn backoff_db(&self) -> f64 {
        tx_backoff(self.papr_db)
    }

    /// Envelope quantized to signed `bits`-bit I/Q integers, scaled so the
    /// largest component magnitude hits positive full scale.
    pub fn raw_samples(&self, bits: u32) -> Result<Vec<[i16; 2]>> {
        if !(2..=16).contains(&bits) {
            return Err(Error::invalid(format!(
                "sample width must be 2..=16 bits, got {bits}"
            )));
        }
        let x = self.envelope(self.plan.eval_len())?;
        let peak = x
            .iter()
            .map(|c| c.re.abs().max(c.im.abs()))
            .fold(0.0, f64::max);
        let full = ((1i32 << (bits - 1)) - 1) as f64;
        let scale = full / peak;
        Ok(x.iter()
            .map(|c| [(c.re * scale).round() as i16, (c.im * scale).round() as i16])
            .collect())
    }

    /// Per-tone complex response of an AWG with `bits` of resolution: the
    /// ratio between the tone coefficients of the quantized and the ideal
    /// envelope. Multiplies every transmitted spectrum identically, so
    /// calibration removes it.
    pub fn converter_response(&self, bits: Option<u32>) -> Result<Vec<Complex64>> {
        let n = self.plan.num_tones;
        let Some(bits) = bits else {
            return Ok(vec![Complex64::new(1.0, 0.0); n]);
        };
        let raw = self.raw_samples(bits)?;
        let len = raw.len();
        let mut buf: Vec<Complex64> = raw
            .iter()
            .map(|s| Complex64::new(s[0] as f64, s[1] as f64))
            .collect();
        FftPlanner::new().plan_fft_forward(len).process(&mut buf);
        let tones = self.tones();
        // Scale so the mean response has unit magnitude.
        let mut out: Vec<Complex64> = (0..n).map(|k| buf[k] / tones[k]).collect();
        let mean = out.iter().map(|c| c.norm()).sum::<f64>() / n as f64;
        for c in &mut out {
            *c /= mean;
        }
        Ok(out)
    }

    /// Structured-text descriptor: the tone plan plus phases in radians at
    /// twelve significant digits.
    pub fn descriptor(&self) -> String {
        let mut s = String::new();
        s.push_str("# multitone sounding waveform\n");
        s.push_str(&format!("design = \"{}\"\n", self.design));
        s.push_str(&format!("papr_db = {:.6}\n", self.papr_db));
        s.push_str(&format!("backoff_db = {:.6}\n", self.backoff_db()));
        s.push_str(&format!("converged = {}\n", self.converged));
        s.push_str(&format!("duration_s = {:e}\n\n", self.duration()));
        s.push_str("phases_rad = [\n");
        for p in &self.phases {
            s.push_str(&format!("  {p:.11e},\n"));
        }
        s.push_str("]\n\n");
        s.push_str("[plan]\n");
        s.push_str(&format!("num_tones = {}\n", self.plan.num_tones));
        s.push_str(&format!(
            "tone_spacing_hz = {:?}\n",
            self.plan.tone_spacing_hz
        ));
        s.push_str(&format!("start_freq_hz = {:?}\n", self.plan.start_freq_hz));
        s.push_str(&format!(
            "oversampling_factor = {}\n",
            self.plan.oversampling_factor
        ));
        s
    }

    /// Parses a descriptor. PAPR is recomputed from the (rounded) phases.
    pub fn from_descriptor(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Descriptor {
            design: String,
            converged: Option<bool>,
            plan: TonePlan,
            phases_rad: Vec<f64>,
        }
        let d: Descriptor = toml::from_str(text).map_err(|e| Error::Metadata(e.to_string()))?;
        let mut w = Self::from_phases(d.plan, d.phases_rad, d.design)?;
        w.converged = d.converged.unwrap_or(true);
        Ok(w)
    }
}

/// Complex envelope `Σ_k exp(jφ_k) exp(j2πkn/len)` for `n = 0..len`.
pub fn envelope(phases: &[f64], len: usize) -> Result<Vec<Complex64>> {
    if len < phases.len() {
        return Err(Error::invalid(format!(
            "envelope grid of {len} samples is shorter than {} tones",
            phases.len()
        )));
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for (b, &p) in buf.iter_mut().zip(phases) {
        *b = Complex64::from_polar(1.0, p);
    }
    FftPlanner::new().plan_fft_inverse(len).process(&mut buf);
    Ok(buf)
}

/// Peak-to-average power ratio in dB of the envelope sampled on the plan's
/// evaluation grid.
pub fn papr_db(plan: &TonePlan, phases: &[f64]) -> Result<f64> {
    if phases.len() != plan.num_tones {
        return Err(Error::invalid(format!(
            "{} phases for a {}-tone plan",
            phases.len(),
            plan.num_tones
        )));
    }
    if plan.oversampling_factor < 4 {
        return Err(Error::invalid(
            "PAPR evaluation needs oversampling of at least 4",
        ));
    }
    let x = envelope(phases, plan.eval_len())?;
    Ok(papr_of_samples(&x))
}

pub fn papr(waveform: &SoundingWaveform) -> Result<f64> {
    papr_db(&waveform.plan, &waveform.phases)
}

pub(crate) fn papr_of_samples(x: &[Complex64]) -> f64 {
    let (peak, sum) = x.iter().fold((0.0f64, 0.0f64), |(pk, s), c| {
        let p = c.norm_sqr();
        (pk.max(p), s + p)
    });
    power_to_db(peak / (sum / x.len() as f64))
}

/// Transmit back-off below the amplifier 1 dB compression point: PAPR plus
/// 3 dB.
pub fn tx_backoff(papr_db: f64) -> f64 {
    papr_db + 3.0
}

/// Convenience wrapper around the default optimizer.
pub fn optimize_phases(
    plan: &TonePlan,
    target_papr_db: f64,
    max_iters: usize,
    seed: u64,
) -> Result<SoundingWaveform> {
    ClipRefine::default().design(
        plan,
        &DesignGoal {
            target_papr_db,
            max_iters,
            seed,
        },
    )
}

pub(crate) type SharedFft = Arc<dyn rustfft::Fft<f64>>;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_plan_spans_50_to_450_mhz() {
        let p = TonePlan::new(801, 500e3, 50e6).unwrap();
        assert_eq!(p.tone_freq(0), 50e6);
        assert_relative_eq!(p.highest_tone(), 450e6, max_relative = 1e-15);
        assert_relative_eq!(p.center_freq(), 250e6, max_relative = 1e-15);
        assert_relative_eq!(p.period(), 2e-6, max_relative = 1e-15);
    }

    #[test]
    fn degenerate_and_small_plans() {
        let p = TonePlan::new(1, 500e3, 0.0).unwrap();
        assert_eq!(p.frequencies(), vec![0.0]);
        let p = TonePlan::new(2, 1e6, 10e6).unwrap();
        assert_eq!(p.frequencies(), vec![10e6, 11e6]);
    }

    #[test]
    fn rejects_bad_plans() {
        assert!(TonePlan::new(0, 500e3, 0.0).is_err());
        assert!(TonePlan::new(10, 0.0, 0.0).is_err());
        assert!(TonePlan::new(10, -1.0, 0.0).is_err());
        assert!(TonePlan::new(10, 1.0, -5.0).is_err());
        assert!(TonePlan::table_one().with_oversampling(2).is_err());
    }

    #[test]
    fn single_tone_is_constant_envelope() {
        let p = TonePlan::new(1, 500e3, 0.0).unwrap();
        assert!(papr_db(&p, &[1.234]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn two_tones_are_phase_invariant() {
        let p = TonePlan::new(2, 1e6, 10e6).unwrap();
        for phases in [[0.0, 0.0], [0.3, 2.0], [1.0, -2.5]] {
            let v = papr_db(&p, &phases).unwrap();
            assert!((v - 3.0103).abs() < 0.01, "{v}");
        }
    }

    #[test]
    fn backoff_is_papr_plus_three() {
        assert_relative_eq!(tx_backoff(0.4), 3.4);
        assert_eq!(tx_backoff(0.0), 3.0);
        assert_relative_eq!(tx_backoff(3.01), 6.01);
    }

    #[test]
    fn wrong_phase_count_is_rejected() {
        let p = TonePlan::new(4, 1e6, 0.0).unwrap();
        assert!(papr_db(&p, &[0.0; 3]).is_err());
    }

    #[test]
    fn descriptor_round_trip_keeps_twelve_digits() {
        let plan = TonePlan::new(16, 1e6, 0.0).unwrap();
        let w = SoundingWaveform::from_phases(plan, newman_phases(16), "newman").unwrap();
        let text = w.descriptor();
        let back = SoundingWaveform::from_descriptor(&text).unwrap();
        for (a, b) in w.phases.iter().zip(&back.phases) {
            assert!((a - b).abs() <= 1e-11 * a.abs().max(1.0));
        }
        assert!((back.papr_db - w.papr_db).abs() < 1e-6);
    }

    #[test]
    fn raw_samples_reproduce_phases() {
        let plan = TonePlan::new(32, 1e6, 0.0).unwrap();
        let w = SoundingWaveform::from_phases(plan, newman_phases(32), "newman").unwrap();
        let resp = w.converter_response(Some(15)).unwrap();
        for r in &resp {
            assert!((r.norm() - 1.0).abs() < 1e-3);
            assert!(r.arg().abs() < 1e-3);
        }
        assert!(w.raw_samples(1).is_err());
    }
}
