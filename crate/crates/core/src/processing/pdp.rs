//! Directional power delay profiles: repetition averaging, calibration
//! division and the inverse transform to delay.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use super::window::delay_windows;
use crate::capture::{flags, CalibrationMode, CaptureKind, CaptureSet};
use crate::units::power_to_db;
use crate::waveform::TonePlan;
use crate::{Error, Result};

/// Calibration records whose magnitude falls this far below the strongest
/// tone are treated as zero.
const CAL_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct PdpOptions {
    /// Registered delay window name.
    pub window: String,
    pub snapshot: u32,
}

impl Default for PdpOptions {
    fn default() -> Self {
        Self {
            window: "rect".into(),
            snapshot: 0,
        }
    }
}

/// Power versus TX beam, RX beam and delay for one RX orientation.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionalPdp {
    pub num_tx: usize,
    pub num_rx: usize,
    pub num_delays: usize,
    pub delay_bin_s: f64,
    pub rx_orientation_deg: f64,
    /// Steering azimuth of each TX beam.
    pub tx_angles_deg: Vec<f64>,
    /// Steering azimuth of each RX beam in the array frame.
    pub rx_angles_deg: Vec<f64>,
    /// Peak gains of the two codebooks, for de-embedding.
    pub tx_peak_gain_dbi: f64,
    pub rx_peak_gain_dbi: f64,
    pub window: String,
    /// Row-major `[tx][rx][delay]`.
    pub power: Vec<f64>,
}

impl DirectionalPdp {
    pub fn pair(&self, tx: usize, rx: usize) -> &[f64] {
        let start = (tx * self.num_rx + rx) * self.num_delays;
        &self.power[start..start + self.num_delays]
    }

    pub fn get(&self, tx: usize, rx: usize, delay: usize) -> f64 {
        self.power[(tx * self.num_rx + rx) * self.num_delays + delay]
    }

    pub fn delay_of(&self, bin: usize) -> f64 {
        bin as f64 * self.delay_bin_s
    }

    /// Delay-summed power of one pair.
    pub fn pair_power(&self, tx: usize, rx: usize) -> f64 {
        self.pair(tx, rx).iter().sum()
    }

    /// Sum of all entries, grouped pair by pair.
    pub fn total(&self) -> f64 {
        (0..self.num_tx)
            .flat_map(|t| (0..self.num_rx).map(move |r| (t, r)))
            .map(|(t, r)| self.pair_power(t, r))
            .sum()
    }

    /// Global RX azimuth of each RX beam.
    pub fn rx_global_angles_deg(&self) -> Vec<f64> {
        self.rx_angles_deg
            .iter()
            .map(|a| crate::units::wrap_degrees(a + self.rx_orientation_deg))
            .collect()
    }

    /// Strongest entry as `(tx, rx, delay, power)`.
    pub fn argmax(&self) -> (usize, usize, usize, f64) {
        let (i, &p) = self
            .power
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty profile");
        let d = i % self.num_delays;
        let pair = i / self.num_delays;
        (pair / self.num_rx, pair % self.num_rx, d, p)
    }

    /// Profile in dB, floored at `floor_db`.
    pub fn pair_db(&self, tx: usize, rx: usize, floor_db: f64) -> Vec<f64> {
        self.pair(tx, rx)
            .iter()
            .map(|&p| {
                if p > 0.0 {
                    power_to_db(p).max(floor_db)
                } else {
                    floor_db
                }
            })
            .collect()
    }
}

fn same_plan(a: &TonePlan, b: &TonePlan) -> bool {
    a.num_tones == b.num_tones
        && a.tone_spacing_hz == b.tone_spacing_hz
        && a.start_freq_hz == b.start_freq_hz
}

/// Per-tone calibration responses with AGC removed, keyed by beam pair in
/// per-beam mode.
pub(crate) fn calibration_vectors(
    cal: &CaptureSet,
    num_tx: usize,
    num_rx: usize,
) -> Result<Vec<Vec<Complex64>>> {
    let plan = cal.plan();
    let mode = cal.setup().calibration.mode;
    let expected = match mode {
        CalibrationMode::Shared => 1,
        CalibrationMode::PerBeam => num_tx * num_rx,
    };
    if cal.records.len() != expected {
        return Err(Error::Inconsistent(format!(
            "calibration has {} records, expected {expected}",
            cal.records.len()
        )));
    }
    cal.records
        .iter()
        .map(|r| {
            let v = r.unwound();
            let peak = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
            if let Some(k) = v.iter().position(|c| !(c.norm() > CAL_FLOOR * peak)) {
                return Err(Error::ZeroCalibration {
                    tone: k,
                    freq_hz: plan.tone_freq(k),
                });
            }
            Ok(v)
        })
        .collect()
}

/// Directional PDP of one snapshot: per beam pair, average the repetitions
/// after removing AGC gains, divide by the calibration response, apply the
/// delay window and inverse-transform with `1/N` scaling so that the delay
/// sum of each pair equals the mean calibrated tone power.
pub fn directional_pdp(
    capture: &CaptureSet,
    cal: &CaptureSet,
    opts: &PdpOptions,
) -> Result<DirectionalPdp> {
    if capture.metadata.kind != CaptureKind::Capture
        || cal.metadata.kind != CaptureKind::Calibration
    {
        return Err(Error::Inconsistent(
            "expected a measurement capture and a calibration capture".into(),
        ));
    }
    capture.validate()?;
    cal.validate()?;
    let plan = capture.plan();
    if !same_plan(plan, cal.plan()) {
        return Err(Error::Inconsistent(
            "capture and calibration tone plans differ".into(),
        ));
    }
    let setup = capture.setup();
    let schedule = setup.schedule()?;
    let (tx_cb, rx_cb) = setup.codebooks()?;
    let (nt, nr, n) = (
        schedule.tx_beams.len(),
        schedule.rx_beams.len(),
        plan.num_tones,
    );
    let cal_vecs = calibration_vectors(cal, nt, nr)?;
    let window = delay_windows().get(&opts.window)?.weights(n);

    let by_slot: HashMap<u32, usize> = capture
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.snapshot == opts.snapshot)
        .map(|(i, r)| (r.slot, i))
        .collect();
    if by_slot.is_empty() {
        return Err(Error::Inconsistent(format!(
            "capture has no records for snapshot {}",
            opts.snapshot
        )));
    }
    let reps = schedule.repetitions() as usize;
    let ifft = FftPlanner::new().plan_fft_inverse(n);
    let ifft: Arc<dyn rustfft::Fft<f64>> = ifft;

    let pairs: Vec<(usize, usize)> = (0..nt).flat_map(|t| (0..nr).map(move |r| (t, r))).collect();
    let profiles = pairs
        .par_iter()
        .map(|&(t, r)| {
            let slots = schedule.pair_slots(t as u16, r as u16);
            let recs: Vec<usize> = slots
                .iter()
                .filter_map(|s| by_slot.get(&(*s as u32)).copied())
                .filter(|&i| !capture.records[i].has(flags::INSERTED))
                .collect();
            if recs.len() != reps {
                return Err(Error::RepetitionMismatch {
                    tx: t,
                    rx: r,
                    found: recs.len(),
                    expected: reps,
                });
            }
            let mut acc = vec![Complex64::new(0.0, 0.0); n];
            for &i in &recs {
                let rec = &capture.records[i];
                let g = rec.agc.amplitude();
                for (a, v) in acc.iter_mut().zip(&rec.h) {
                    *a += v / g;
                }
            }
            let c = match cal_vecs.len() {
                1 => &cal_vecs[0],
                _ => &cal_vecs[t * nr + r],
            };
            let inv = 1.0 / recs.len() as f64;
            for ((a, c), w) in acc.iter_mut().zip(c).zip(&window) {
                *a = *a * inv / c * *w;
            }
            let mut scratch = vec![Complex64::new(0.0, 0.0); ifft.get_inplace_scratch_len()];
            ifft.process_with_scratch(&mut acc, &mut scratch);
            let scale = 1.0 / (n as f64 * n as f64);
            Ok(acc
                .iter()
                .map(|x| x.norm_sqr() * scale)
                .collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;

    let steer =
        |cb: &crate::beams::BeamCodebook, ids: &[crate::beams::BeamId]| -> Result<Vec<f64>> {
            ids.iter()
                .map(|&id| Ok(cb.beam(id)?.steering.azimuth_deg))
                .collect()
        };
    Ok(DirectionalPdp {
        num_tx: nt,
        num_rx: nr,
        num_delays: n,
        delay_bin_s: plan.delay_bin(),
        rx_orientation_deg: setup.rx_orientation_deg,
        tx_angles_deg: steer(&tx_cb, &schedule.tx_beams)?,
        rx_angles_deg: steer(&rx_cb, &schedule.rx_beams)?,
        tx_peak_gain_dbi: tx_cb.spec.peak_gain_dbi,
        rx_peak_gain_dbi: rx_cb.spec.peak_gain_dbi,
        window: opts.window.clone(),
        power: profiles.concat(),
    })
}

/// Calibrated, repetition-averaged tone response of one beam pair, before
/// windowing and transform.
pub fn calibrated_response(
    capture: &CaptureSet,
    cal: &CaptureSet,
    tx: usize,
    rx: usize,
    snapshot: u32,
) -> Result<Vec<Complex64>> {
    let schedule = capture.setup().schedule()?;
    let (nt, nr) = (schedule.tx_beams.len(), schedule.rx_beams.len());
    let cal_vecs = calibration_vectors(cal, nt, nr)?;
    let slots = schedule.pair_slots(tx as u16, rx as u16);
    let recs: Vec<_> = capture
        .records
        .iter()
        .filter(|r| r.snapshot == snapshot && slots.contains(&(r.slot as usize)))
        .collect();
    if recs.is_empty() {
        return Err(Error::RepetitionMismatch {
            tx,
            rx,
            found: 0,
            expected: schedule.repetitions() as usize,
        });
    }
    let c = if cal_vecs.len() == 1 {
        &cal_vecs[0]
    } else {
        &cal_vecs[tx * nr + rx]
    };
    let mut acc = vec![Complex64::new(0.0, 0.0); capture.plan().num_tones];
    for rec in &recs {
        for (a, v) in acc.iter_mut().zip(rec.unwound()) {
            *a += v;
        }
    }
    let inv = 1.0 / recs.len() as f64;
    Ok(acc.iter().zip(c).map(|(a, c)| a * inv / c).collect())
}
