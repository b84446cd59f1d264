//! Hardware non-idealities: reference-clock phase drift, receiver noise,
//! automatic gain control, converter quantization and the fixed frequency
//! ripple of the RF chain.
//!
//! Everything here is a pure function of its inputs and a seed, so slots can
//! be simulated in any order or in parallel.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::units::{db_to_amplitude, db_to_power, power_to_db, THERMAL_NOISE_DBM_PER_HZ};
use crate::waveform::{SharedFft, TonePlan};
use crate::{Error, Result};

/// Free-running drift: 4° over one 1.444 ms single-repetition sweep.
pub const FREE_RUNNING_DRIFT_RAD_S: f64 = 4.0 * PI / 180.0 / 1.444e-3;

/// Default residual phase noise around the linear drift trend (0.2°).
pub const DEFAULT_DRIFT_NOISE_RAD: f64 = 0.2 * PI / 180.0;

/// Combines a seed with a stream index into a new seed (splitmix64 finaliser).
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        ^ stream
            .wrapping_add(0x9E37_79B9_7F4A_7C15)
            .wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClockMode {
    /// TX and RX share one reference; no drift.
    Shared,
    /// Both sides disciplined by GPS; drift rate bounded by free-running.
    GpsDisciplined,
    FreeRunning,
}

/// Relative phase between the TX and RX references.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClockModel {
    pub mode: ClockMode,
    pub initial_phase_rad: f64,
    pub drift_rate_rad_s: f64,
    pub drift_noise_rms_rad: f64,
    /// Draw a fresh initial phase at every lock; when false the phase is
    /// kept as configured.
    pub random_lock_phase: bool,
    #[serde(with = "crate::serde_seed")]
    pub seed: u64,
}

impl Default for ClockModel {
    fn default() -> Self {
        Self::shared(0)
    }
}

impl ClockModel {
    pub fn shared(seed: u64) -> Self {
        Self {
            mode: ClockMode::Shared,
            initial_phase_rad: 0.0,
            drift_rate_rad_s: 0.0,
            drift_noise_rms_rad: 0.0,
            random_lock_phase: true,
            seed,
        }
    }

    pub fn free_running(seed: u64) -> Self {
        Self {
            mode: ClockMode::FreeRunning,
            initial_phase_rad: 0.0,
            drift_rate_rad_s: FREE_RUNNING_DRIFT_RAD_S,
            drift_noise_rms_rad: DEFAULT_DRIFT_NOISE_RAD,
            random_lock_phase: true,
            seed,
        }
    }

    pub fn gps_disciplined(seed: u64) -> Self {
        Self {
            mode: ClockMode::GpsDisciplined,
            ..Self::free_running(seed)
        }
    }

    pub fn with_mode(mode: ClockMode, seed: u64) -> Self {
        match mode {
            ClockMode::Shared => Self::shared(seed),
            ClockMode::GpsDisciplined => Self::gps_disciplined(seed),
            ClockMode::FreeRunning => Self::free_running(seed),
        }
    }

    /// State after the PLLs lock for snapshot `snapshot`: a fresh random
    /// initial phase and, for GPS-disciplined clocks, a drift rate drawn
    /// uniformly between zero and the configured free-running rate. Shared
    /// clocks never drift.
    pub fn lock(&self, snapshot: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.seed, snapshot));
        let initial = rng.random_range(-PI..PI);
        let mut out = *self;
        if self.random_lock_phase {
            out.initial_phase_rad = initial;
        }
        out.seed = mix_seed(self.seed, snapshot ^ 0x5EED);
        match self.mode {
            ClockMode::Shared => {
                out.drift_rate_rad_s = 0.0;
                out.drift_noise_rms_rad = 0.0;
            }
            ClockMode::GpsDisciplined => {
                out.drift_rate_rad_s = rng.random_range(0.0..=1.0) * self.drift_rate_rad_s;
            }
            ClockMode::FreeRunning => {}
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = [
            self.initial_phase_rad,
            self.drift_rate_rad_s,
            self.drift_noise_rms_rad,
        ];
        if v.iter().any(|x| !x.is_finite()) || self.drift_noise_rms_rad < 0.0 {
            return Err(Error::invalid("clock parameters must be finite, noise ≥ 0"));
        }
        Ok(())
    }
}

/// Relative reference phase at time `t`: initial phase, linear drift and a
/// small white residual that is a deterministic function of `(seed, t)`.
pub fn drift_phase(clock: &ClockModel, t: f64) -> f64 {
    let mut phase = clock.initial_phase_rad + clock.drift_rate_rad_s * t;
    if clock.drift_noise_rms_rad > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(clock.seed, t.to_bits()));
        let z: f64 = rng.sample(StandardNormal);
        phase += clock.drift_noise_rms_rad * z;
    }
    phase
}

/// Receiver chain settings. `None` disables an impairment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RxFrontEnd {
    pub noise_figure_db: Option<f64>,
    pub adc_bits: Option<u32>,
    /// Transmit converter resolution; its response is common to capture and
    /// calibration.
    pub awg_bits: Option<u32>,
    pub agc: bool,
    /// Target signal level below full scale.
    pub agc_backoff_db: f64,
    pub agc_range_db: [f64; 2],
    /// Power of a complex signal whose I and Q both sit at the clip level.
    pub full_scale_power_dbm: f64,
}

impl Default for RxFrontEnd {
    fn default() -> Self {
        Self {
            noise_figure_db: Some(5.0),
            adc_bits: Some(10),
            awg_bits: Some(15),
            agc: true,
            agc_backoff_db: 6.0,
            agc_range_db: [-20.0, 120.0],
            full_scale_power_dbm: 0.0,
        }
    }
}

impl RxFrontEnd {
    /// Noise-free, unquantized, unit-gain receiver.
    pub fn ideal() -> Self {
        Self {
            noise_figure_db: None,
            adc_bits: None,
            awg_bits: None,
            agc: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(b) = self.adc_bits {
            if !(1..=30).contains(&b) {
                return Err(Error::invalid(format!(
                    "ADC resolution must be 1..=30 bits, got {b}"
                )));
            }
        }
        if let Some(b) = self.awg_bits {
            if !(2..=16).contains(&b) {
                return Err(Error::invalid(format!(
                    "AWG resolution must be 2..=16 bits, got {b}"
                )));
            }
        }
        let [lo, hi] = self.agc_range_db;
        if !(lo <= hi) {
            return Err(Error::invalid("AGC range must be ordered [min, max]"));
        }
        if self.noise_figure_db.is_some_and(|n| !n.is_finite()) {
            return Err(Error::invalid("noise figure must be finite"));
        }
        Ok(())
    }

    /// Per-tone input-referred noise power.
    pub fn tone_noise_dbm(&self, tone_spacing_hz: f64) -> Option<f64> {
        self.noise_figure_db
            .map(|nf| THERMAL_NOISE_DBM_PER_HZ + power_to_db(tone_spacing_hz) + nf)
    }
}

/// AGC gain in hundredths of a dB, as stored with every record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AgcGain(pub i16);

impl AgcGain {
    pub fn from_db(db: f64) -> Self {
        Self((db * 100.0).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16)
    }

    pub fn db(self) -> f64 {
        self.0 as f64 / 100.0
    }

    /// Linear amplitude factor; exactly 1 for 0 dB.
    pub fn amplitude(self) -> f64 {
        if self.0 == 0 {
            1.0
        } else {
            db_to_amplitude(self.db())
        }
    }
}

/// Mid-rise uniform quantizer over `[-full_scale, full_scale]`. Returns the
/// quantized value and whether the input was clipped.
pub fn quantize(x: f64, full_scale: f64, bits: u32) -> (f64, bool) {
    let levels = (1u64 << bits) as f64;
    let step = 2.0 * full_scale / levels;
    let top = full_scale - step / 2.0;
    let q = step * ((x / step).floor() + 0.5);
    if q > top {
        (top, x > full_scale)
    } else if q < -top {
        (-top, x < -full_scale)
    } else {
        (q, false)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrontEndOutput {
    /// Tone-domain record `g·(h + noise) + quantization error`, where `g` is
    /// the AGC amplitude gain.
    pub record: Vec<Complex64>,
    pub agc: AgcGain,
    pub clipped: bool,
}

/// Receiver model bound to one tone plan and sounding waveform, with its
/// transforms planned once.
#[derive(Clone)]
pub struct Receiver {
    fe: RxFrontEnd,
    tone_spacing_hz: f64,
    tones: Vec<Complex64>,
    len: usize,
    inverse: SharedFft,
    forward: SharedFft,
}

impl std::fmt::Debug for Receiver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Receiver")
            .field("fe", &self.fe)
            .field("len", &self.len)
            .finish()
    }
}

impl Receiver {
    /// `tones` are the unit-magnitude transmitted tone coefficients; the ADC
    /// sees their sum through the channel.
    pub fn new(fe: &RxFrontEnd, plan: &TonePlan, tones: Vec<Complex64>) -> Result<Self> {
        fe.validate()?;
        if tones.len() != plan.num_tones {
            return Err(Error::invalid(
                "tone coefficient count does not match the plan",
            ));
        }
        let len = (2 * plan.num_tones).next_power_of_two();
        let mut planner = FftPlanner::new();
        Ok(Self {
            fe: fe.clone(),
            tone_spacing_hz: plan.tone_spacing_hz,
            tones,
            len,
            inverse: planner.plan_fft_inverse(len),
            forward: planner.plan_fft_forward(len),
        })
    }

    pub fn front_end(&self) -> &RxFrontEnd {
        &self.fe
    }

    /// Oracle AGC: the gain that puts the noise-free received power
    /// `agc_backoff_db` below full scale, clamped to the AGC range.
    pub fn agc_gain(&self, h: &[Complex64]) -> AgcGain {
        if !self.fe.agc {
            return AgcGain(0);
        }
        let [lo, hi] = self.fe.agc_range_db;
        let power: f64 = h.iter().map(|c| c.norm_sqr()).sum();
        let target = self.fe.full_scale_power_dbm - self.fe.agc_backoff_db;
        let gain = if power > 0.0 {
            target - power_to_db(power)
        } else {
            hi
        };
        AgcGain::from_db(gain.clamp(lo, hi))
    }

    /// Passes received tone amplitudes `h` (sqrt(mW) at the receiver input)
    /// through the receiver, averaging `averaging` independent captures.
    pub fn apply(&self, h: &[Complex64], averaging: usize, seed: u64) -> Result<FrontEndOutput> {
        if averaging == 0 {
            return Err(Error::invalid("averaging must be at least 1"));
        }
        if h.len() != self.tones.len() {
            return Err(Error::invalid(
                "response length does not match the tone plan",
            ));
        }
        let agc = self.agc_gain(h);
        let g = agc.amplitude();
        let sigma = self
            .fe
            .tone_noise_dbm(self.tone_spacing_hz)
            .map(|n| (db_to_power(n) / 2.0).sqrt());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut clipped = false;

        if sigma.is_none() && self.fe.adc_bits.is_none() {
            let record = if g == 1.0 {
                h.to_vec()
            } else {
                h.iter().map(|c| c * g).collect()
            };
            return Ok(FrontEndOutput {
                record,
                agc,
                clipped,
            });
        }

        let mut sum = vec![Complex64::new(0.0, 0.0); h.len()];
        let mut y = vec![Complex64::new(0.0, 0.0); h.len()];
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
        for _ in 0..averaging {
            y.copy_from_slice(h);
            if let Some(s) = sigma {
                for v in y.iter_mut() {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    *v += Complex64::new(re * s, im * s);
                }
            }
            match self.fe.adc_bits {
                Some(bits) => clipped |= self.digitize(&mut y, &mut buf, g, bits),
                None if g != 1.0 => y.iter_mut().for_each(|v| *v *= g),
                None => {}
            }
            for (a, v) in sum.iter_mut().zip(&y) {
                *a += v;
            }
        }
        if averaging > 1 {
            let inv = 1.0 / averaging as f64;
            sum.iter_mut().for_each(|v| *v *= inv);
        }
        Ok(FrontEndOutput {
            record: sum,
            agc,
            clipped,
        })
    }

    /// Synthesizes the received time series after gain `g`, quantizes I and
    /// Q, and replaces `y` with the recovered tone values.
    fn digitize(&self, y: &mut [Complex64], buf: &mut [Complex64], g: f64, bits: u32) -> bool {
        buf.fill(Complex64::new(0.0, 0.0));
        for ((b, v), c) in buf.iter_mut().zip(y.iter()).zip(&self.tones) {
            *b = v * c * g;
        }
        self.inverse.process(buf);
        let fs = db_to_power(self.fe.full_scale_power_dbm).sqrt();
        let mut clipped = false;
        for b in buf.iter_mut() {
            let (re, c1) = quantize(b.re, fs, bits);
            let (im, c2) = quantize(b.im, fs, bits);
            clipped |= c1 | c2;
            *b = Complex64::new(re, im);
        }
        self.forward.process(buf);
        let norm = 1.0 / self.len as f64;
        for ((v, b), c) in y.iter_mut().zip(buf.iter()).zip(&self.tones) {
            *v = b * norm / c;
        }
        clipped
    }
}

/// One-shot wrapper around [`Receiver::apply`].
pub fn apply_front_end(
    h: &[Complex64],
    fe: &RxFrontEnd,
    plan: &TonePlan,
    tones: Vec<Complex64>,
    averaging: usize,
    seed: u64,
) -> Result<FrontEndOutput> {
    Receiver::new(fe, plan, tones)?.apply(h, averaging, seed)
}

/// Fixed, smooth multiplicative frequency response of the RF hardware.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HardwareRipple {
    pub enabled: bool,
    /// Largest magnitude excursion over the band.
    pub max_db: f64,
    /// Largest phase excursion over the band.
    pub max_phase_deg: f64,
    /// Number of sinusoidal components across the band.
    pub components: usize,
    #[serde(with = "crate::serde_seed")]
    pub seed: u64,
}

impl Default for HardwareRipple {
    fn default() -> Self {
        Self {
            enabled: true,
            max_db: 1.0,
            max_phase_deg: 5.0,
            components: 6,
            seed: 0,
        }
    }
}

impl HardwareRipple {
    pub fn off() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    /// Per-tone complex response; all ones when disabled.
    pub fn response(&self, num_tones: usize) -> Vec<Complex64> {
        if !self.enabled || num_tones == 0 {
            return vec![Complex64::new(1.0, 0.0); num_tones];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let comps: Vec<(f64, f64, f64, f64)> = (0..self.components.max(1))
            .map(|_| {
                (
                    rng.random_range(0.2..1.0),
                    rng.random_range(0.3..3.0),
                    rng.random_range(0.0..2.0 * PI),
                    rng.random_range(0.0..2.0 * PI),
                )
            })
            .collect();
        let shape = |phase_sel: bool| -> Vec<f64> {
            (0..num_tones)
                .map(|k| {
                    let x = k as f64 / num_tones as f64;
                    comps
                        .iter()
                        .map(|&(a, cycles, p0, p1)| {
                            a * (2.0 * PI * cycles * x + if phase_sel { p1 } else { p0 }).sin()
                        })
                        .sum()
                })
                .collect()
        };
        let normalize = |v: Vec<f64>, peak: f64| -> Vec<f64> {
            let m = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            v.into_iter()
                .map(|x| if m > 0.0 { x / m * peak } else { 0.0 })
                .collect()
        };
        let mag = normalize(shape(false), self.max_db);
        let ph = normalize(shape(true), self.max_phase_deg);
        mag.iter()
            .zip(&ph)
            .map(|(&m, &p)| Complex64::from_polar(db_to_amplitude(m), p.to_radians()))
            .collect()
    }
}
