//! Synthetic double-directional channels and the beam-pair frequency
//! response a sounder observes through them.
//!
//! Generators here are validation scaffolding: deterministic multipath
//! components with known delay, amplitude and angles, not a statistical
//! channel model.
//!
//! Tone `k` of a [`TonePlan`] is mapped to the RF frequency
//! `carrier − plan.center_freq() + plan.tone_freq(k)`, so the comb is centred
//! on the carrier and delay phase slopes are consistent across the band.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::beams::BeamPattern;
use crate::units::{db_to_amplitude, wrap_degrees, SPEED_OF_LIGHT};
use crate::waveform::TonePlan;
use crate::{Error, Result};

pub const DEFAULT_CARRIER_HZ: f64 = 27.85e9;

/// One propagation path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mpc {
    pub delay_s: f64,
    /// Linear voltage gain.
    pub amplitude: Complex64,
    pub aod_az_deg: f64,
    pub aod_el_deg: f64,
    pub aoa_az_deg: f64,
    pub aoa_el_deg: f64,
    /// Linear phase rotation over time.
    pub doppler_rad_s: f64,
}

impl Mpc {
    pub fn new(delay_s: f64, amplitude: Complex64, aod_az_deg: f64, aoa_az_deg: f64) -> Self {
        Self {
            delay_s,
            amplitude,
            aod_az_deg,
            aod_el_deg: 0.0,
            aoa_az_deg,
            aoa_el_deg: 0.0,
            doppler_rad_s: 0.0,
        }
    }

    pub fn power_db(&self) -> f64 {
        10.0 * self.amplitude.norm_sqr().log10()
    }

    fn check(&self, window_s: f64) -> Result<()> {
        if !(self.delay_s >= 0.0 && self.delay_s < window_s) {
            return Err(Error::DelayOutOfWindow {
                delay_s: self.delay_s,
                window_s,
            });
        }
        let finite = [
            self.amplitude.re,
            self.amplitude.im,
            self.aod_az_deg,
            self.aod_el_deg,
            self.aoa_az_deg,
            self.aoa_el_deg,
            self.doppler_rad_s,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("path parameters must be finite"));
        }
        if self.aod_el_deg.abs() > 90.0 || self.aoa_el_deg.abs() > 90.0 {
            return Err(Error::invalid("path elevation must lie within ±90°"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Los,
    Nlos,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub mpcs: Vec<Mpc>,
    pub carrier_freq_hz: f64,
    /// Informative only.
    pub distance_m: Option<f64>,
    pub label: Label,
}

impl ChannelRealization {
    pub fn new(mpcs: Vec<Mpc>, carrier_freq_hz: f64, label: Label) -> Self {
        Self {
            mpcs,
            carrier_freq_hz,
            distance_m: None,
            label,
        }
    }

    /// Rejects paths outside the unambiguous delay window of `plan`.
    pub fn validate(&self, plan: &TonePlan) -> Result<()> {
        if !(self.carrier_freq_hz > 0.0) || !self.carrier_freq_hz.is_finite() {
            return Err(Error::invalid("carrier frequency must be positive"));
        }
        if self.carrier_freq_hz - plan.center_freq() < 0.0 {
            return Err(Error::invalid(
                "carrier is below the tone plan's centre frequency",
            ));
        }
        self.mpcs.iter().try_for_each(|m| m.check(plan.period()))
    }

    /// Absolute RF frequency of every tone.
    pub fn tone_frequencies(&self, plan: &TonePlan) -> Vec<f64> {
        let offset = self.carrier_freq_hz - plan.center_freq();
        (0..plan.num_tones)
            .map(|k| offset + plan.tone_freq(k))
            .collect()
    }

    /// Sum of path powers.
    pub fn total_power(&self) -> f64 {
        self.mpcs.iter().map(|m| m.amplitude.norm_sqr()).sum()
    }

    /// Structured text listing every path with exact amplitudes.
    pub fn to_text(&self) -> String {
        let spec = ChannelSpec {
            carrier_freq_hz: Some(self.carrier_freq_hz),
            distance_m: self.distance_m,
            label: Some(self.label),
            mpc: self
                .mpcs
                .iter()
                .map(|m| MpcSpec {
                    delay_s: Some(m.delay_s),
                    delay_ns: None,
                    gain_db: None,
                    phase_deg: None,
                    amplitude_re: Some(m.amplitude.re),
                    amplitude_im: Some(m.amplitude.im),
                    aod_az_deg: m.aod_az_deg,
                    aod_el_deg: m.aod_el_deg,
                    aoa_az_deg: m.aoa_az_deg,
                    aoa_el_deg: m.aoa_el_deg,
                    doppler_rad_s: m.doppler_rad_s,
                })
                .collect(),
        };
        toml::to_string(&spec).expect("channel serializes")
    }

    /// Parses a channel spec. Paths may give delays in `delay_s` or
    /// `delay_ns`, and amplitudes either exactly (`amplitude_re`,
    /// `amplitude_im`) or as `gain_db` with an optional `phase_deg`.
    pub fn from_text(text: &str) -> Result<Self> {
        let spec: ChannelSpec = toml::from_str(text).map_err(|e| Error::Metadata(e.to_string()))?;
        let mpcs = spec
            .mpc
            .iter()
            .map(MpcSpec::to_mpc)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            mpcs,
            carrier_freq_hz: spec.carrier_freq_hz.unwrap_or(DEFAULT_CARRIER_HZ),
            distance_m: spec.distance_m,
            label: spec.label.unwrap_or(Label::Nlos),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ChannelSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    carrier_freq_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    distance_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<Label>,
    #[serde(default)]
    mpc: Vec<MpcSpec>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MpcSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delay_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delay_ns: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gain_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phase_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    amplitude_re: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    amplitude_im: Option<f64>,
    #[serde(default)]
    aod_az_deg: f64,
    #[serde(default)]
    aod_el_deg: f64,
    #[serde(default)]
    aoa_az_deg: f64,
    #[serde(default)]
    aoa_el_deg: f64,
    #[serde(default)]
    doppler_rad_s: f64,
}

impl MpcSpec {
    fn to_mpc(&self) -> Result<Mpc> {
        let delay_s = match (self.delay_s, self.delay_ns) {
            (Some(s), None) => s,
            (None, Some(ns)) => ns * 1e-9,
            _ => {
                return Err(Error::Metadata(
                    "each path needs exactly one of delay_s or delay_ns".into(),
                ))
            }
        };
        let amplitude =
            match (self.gain_db, self.amplitude_re, self.amplitude_im) {
                (Some(g), None, None) => Complex64::from_polar(
                    db_to_amplitude(g),
                    self.phase_deg.unwrap_or(0.0).to_radians(),
                ),
                (None, Some(re), im) if self.phase_deg.is_none() => {
                    Complex64::new(re, im.unwrap_or(0.0))
                }
                _ => return Err(Error::Metadata(
                    "each path needs either gain_db [+ phase_deg] or amplitude_re [+ amplitude_im]"
                        .into(),
                )),
            };
        Ok(Mpc {
            delay_s,
            amplitude,
            aod_az_deg: self.aod_az_deg,
            aod_el_deg: self.aod_el_deg,
            aoa_az_deg: self.aoa_az_deg,
            aoa_el_deg: self.aoa_el_deg,
            doppler_rad_s: self.doppler_rad_s,
        })
    }
}

/// Free-space line-of-sight channel with both arrays facing each other.
pub fn los_channel(distance_m: f64, carrier_freq_hz: f64) -> Result<ChannelRealization> {
    if !(distance_m > 0.0) || !distance_m.is_finite() {
        return Err(Error::invalid(format!(
            "distance must be positive, got {distance_m}"
        )));
    }
    if !(carrier_freq_hz > 0.0) {
        return Err(Error::invalid("carrier frequency must be positive"));
    }
    let wavelength = SPEED_OF_LIGHT / carrier_freq_hz;
    let amp = wavelength / (4.0 * PI * distance_m);
    let mut ch = ChannelRealization::new(
        vec![Mpc::new(
            distance_m / SPEED_OF_LIGHT,
            Complex64::new(amp, 0.0),
            0.0,
            0.0,
        )],
        carrier_freq_hz,
        Label::Los,
    );
    ch.distance_m = Some(distance_m);
    Ok(ch)
}

/// Ground-truth path for [`planted_nlos_channel`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedPath {
    pub delay_s: f64,
    pub gain_db: f64,
    pub aod_az_deg: f64,
    pub aoa_az_deg: f64,
    #[serde(default)]
    pub aod_el_deg: f64,
    #[serde(default)]
    pub aoa_el_deg: f64,
    /// Drawn from the seed when absent.
    #[serde(default)]
    pub phase_deg: Option<f64>,
}

impl PlantedPath {
    pub fn new(delay_s: f64, gain_db: f64, aod_az_deg: f64, aoa_az_deg: f64) -> Self {
        Self {
            delay_s,
            gain_db,
            aod_az_deg,
            aoa_az_deg,
            aod_el_deg: 0.0,
            aoa_el_deg: 0.0,
            phase_deg: None,
        }
    }
}

/// Channel containing exactly the given paths. Paths without a phase get one
/// drawn uniformly from `seed`.
pub fn planted_nlos_channel(
    paths: &[PlantedPath],
    plan: &TonePlan,
    carrier_freq_hz: f64,
    seed: u64,
) -> Result<ChannelRealization> {
    if paths.is_empty() {
        return Err(Error::invalid("planted channel needs at least one path"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mpcs = paths
        .iter()
        .map(|p| {
            let drawn: f64 = rng.random_range(0.0..360.0);
            Mpc {
                delay_s: p.delay_s,
                amplitude: Complex64::from_polar(
                    db_to_amplitude(p.gain_db),
                    p.phase_deg.unwrap_or(drawn).to_radians(),
                ),
                aod_az_deg: p.aod_az_deg,
                aod_el_deg: p.aod_el_deg,
                aoa_az_deg: p.aoa_az_deg,
                aoa_el_deg: p.aoa_el_deg,
                doppler_rad_s: 0.0,
            }
        })
        .collect();
    let ch = ChannelRealization::new(mpcs, carrier_freq_hz, Label::Nlos);
    ch.validate(plan)?;
    Ok(ch)
}

/// Bounds for [`random_scatter`] scenes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScatterConfig {
    pub num_paths: usize,
    pub delay_range_s: (f64, f64),
    pub min_delay_separation_s: f64,
    /// Angles are drawn from ±`field_of_view_deg` on both sides.
    pub field_of_view_deg: f64,
    pub min_angle_separation_deg: f64,
    /// Strongest path gain.
    pub peak_gain_db: f64,
    /// Spread between strongest and weakest path; the first path is the
    /// strongest and the last the weakest.
    pub dynamic_range_db: f64,
}

impl Default for ScatterConfig {
    fn default() -> Self {
        Self {
            num_paths: 5,
            delay_range_s: (2.5e-9, 1.5e-6),
            min_delay_separation_s: 100e-9,
            field_of_view_deg: 40.0,
            min_angle_separation_deg: 15.0,
            peak_gain_db: -100.0,
            dynamic_range_db: 30.0,
        }
    }
}

/// Random scene of well-separated paths, deterministic for a seed.
pub fn random_scatter(cfg: &ScatterConfig, seed: u64) -> Result<Vec<PlantedPath>> {
    if cfg.num_paths == 0 {
        return Err(Error::invalid("scatter scene needs at least one path"));
    }
    let (lo, hi) = cfg.delay_range_s;
    if !(hi > lo && lo >= 0.0) || !(cfg.field_of_view_deg > 0.0) {
        return Err(Error::invalid(
            "scatter delay and angle ranges must be non-empty",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fov = cfg.field_of_view_deg;
    let mut paths: Vec<PlantedPath> = Vec::with_capacity(cfg.num_paths);
    // Greedy placement can paint itself into a corner; start the scene over
    // when a path cannot be placed.
    'scene: for _ in 0..10_000 {
        paths.clear();
        while paths.len() < cfg.num_paths {
            let placed = (0..1000).find_map(|_| {
                let p = PlantedPath::new(
                    rng.random_range(lo..=hi),
                    0.0,
                    rng.random_range(-fov..=fov),
                    rng.random_range(-fov..=fov),
                );
                paths
                    .iter()
                    .all(|q| {
                        (p.delay_s - q.delay_s).abs() >= cfg.min_delay_separation_s
                            && (p.aod_az_deg - q.aod_az_deg).abs() >= cfg.min_angle_separation_deg
                            && (p.aoa_az_deg - q.aoa_az_deg).abs() >= cfg.min_angle_separation_deg
                    })
                    .then_some(p)
            });
            match placed {
                Some(p) => paths.push(p),
                None => continue 'scene,
            }
        }
        break;
    }
    if paths.len() < cfg.num_paths {
        return Err(Error::invalid(
            "scatter constraints cannot be satisfied; relax separations or ranges",
        ));
    }
    let n = cfg.num_paths;
    for (i, p) in paths.iter_mut().enumerate() {
        let frac = if n > 1 {
            i as f64 / (n - 1) as f64
        } else {
            0.0
        };
        p.gain_db = cfg.peak_gain_db - cfg.dynamic_range_db * frac;
        p.phase_deg = Some(rng.random_range(0.0..360.0));
    }
    Ok(paths)
}

/// Per-path tone phasors `exp(−j2π f_k τ)` precomputed for one tone plan, so
/// that evaluating many beam pairs costs one multiply-add per path and tone.
#[derive(Clone, Debug)]
pub struct ChannelKernel {
    channel: ChannelRealization,
    phasors: Vec<Vec<Complex64>>,
}

impl ChannelKernel {
    pub fn new(channel: &ChannelRealization, plan: &TonePlan) -> Result<Self> {
        channel.validate(plan)?;
        let freqs = channel.tone_frequencies(plan);
        let phasors = channel
            .mpcs
            .iter()
            .map(|m| {
                freqs
                    .iter()
                    .map(|&f| {
                        // Reduce the cycle count before scaling so large
                        // f·τ products keep their fractional precision.
                        let cycles = (f * m.delay_s).fract();
                        Complex64::from_polar(1.0, -2.0 * PI * cycles)
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            channel: channel.clone(),
            phasors,
        })
    }

    pub fn channel(&self) -> &ChannelRealization {
        &self.channel
    }

    pub fn num_tones(&self) -> usize {
        self.phasors.first().map_or(0, Vec::len)
    }

    /// Per-path complex weight seen through a beam pair at time `t`.
    pub fn path_weights(
        &self,
        tx: &dyn BeamPattern,
        rx: &dyn BeamPattern,
        rx_orientation_deg: f64,
        t: f64,
    ) -> Vec<Complex64> {
        self.channel
            .mpcs
            .iter()
            .map(|m| {
                let g_tx = tx.gain(m.aod_az_deg, m.aod_el_deg);
                let g_rx = rx.gain(
                    wrap_degrees(m.aoa_az_deg - rx_orientation_deg),
                    m.aoa_el_deg,
                );
                m.amplitude * g_tx * g_rx * Complex64::from_polar(1.0, m.doppler_rad_s * t)
            })
            .collect()
    }

    /// Writes the response for the given path weights into `out`.
    pub fn response_into(&self, weights: &[Complex64], out: &mut [Complex64]) {
        out.fill(Complex64::new(0.0, 0.0));
        for (w, ph) in weights.iter().zip(&self.phasors) {
            for (o, p) in out.iter_mut().zip(ph) {
                *o += w * p;
            }
        }
    }

    pub fn response(
        &self,
        tx: &dyn BeamPattern,
        rx: &dyn BeamPattern,
        rx_orientation_deg: f64,
        t: f64,
    ) -> Vec<Complex64> {
        let w = self.path_weights(tx, rx, rx_orientation_deg, t);
        let mut out = vec![Complex64::new(0.0, 0.0); self.num_tones()];
        self.response_into(&w, &mut out);
        out
    }
}

/// Frequency response over the tone plan through one TX and one RX beam.
pub fn beam_pair_response(
    channel: &ChannelRealization,
    tx: &dyn BeamPattern,
    rx: &dyn BeamPattern,
    rx_orientation_deg: f64,
    plan: &TonePlan,
    t: f64,
) -> Result<Vec<Complex64>> {
    let kernel = ChannelKernel::new(channel, plan)?;
    Ok(if kernel.num_tones() == 0 {
        vec![Complex64::new(0.0, 0.0); plan.num_tones]
    } else {
        kernel.response(tx, rx, rx_orientation_deg, t)
    })
}
