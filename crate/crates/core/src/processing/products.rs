//! Angular products assembled from directional PDPs: power angular
//! spectrum, sector PDP, angle-delay profiles and omnidirectional path loss.

use super::pdp::DirectionalPdp;
use crate::units::{power_to_db, wrap_degrees};
use crate::{Error, Result};

/// Default margin above the estimated noise floor for bins that count
/// towards reported sums.
pub const DEFAULT_THRESHOLD_DB: f64 = 6.0;

/// Mean noise power per bin, estimated as median / ln 2 (the median of an
/// exponential distribution is its mean times ln 2).
pub fn noise_floor(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    *m / std::f64::consts::LN_2
}

/// Power below which bins are excluded, or 0 when thresholding is off.
pub fn threshold_for(pdp: &DirectionalPdp, margin_db: Option<f64>) -> f64 {
    match margin_db {
        Some(m) => noise_floor(&pdp.power) * 10f64.powf(m / 10.0),
        None => 0.0,
    }
}

fn keep(p: f64, threshold: f64) -> f64 {
    if p >= threshold {
        p
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pas {
    pub tx_angles_deg: Vec<f64>,
    /// Global RX azimuth of each column.
    pub rx_angles_deg: Vec<f64>,
    pub orientations_deg: Vec<f64>,
    /// Row-major `[tx][column]`, columns grouped by orientation.
    pub values: Vec<f64>,
}

impl Pas {
    pub fn get(&self, tx: usize, col: usize) -> f64 {
        self.values[tx * self.rx_angles_deg.len() + col]
    }

    /// Sum grouped orientation by orientation, then pair by pair, matching
    /// [`DirectionalPdp::total`] so the two agree exactly.
    pub fn total(&self) -> f64 {
        let cols = self.rx_angles_deg.len();
        let per = cols / self.orientations_deg.len().max(1);
        (0..self.orientations_deg.len())
            .map(|o| {
                (0..self.tx_angles_deg.len())
                    .flat_map(|t| (0..per).map(move |r| (t, o * per + r)))
                    .map(|(t, c)| self.values[t * cols + c])
                    .sum::<f64>()
            })
            .sum()
    }

    /// Strongest cell as `(tx angle, global rx angle, power)`.
    pub fn argmax(&self) -> (f64, f64, f64) {
        let cols = self.rx_angles_deg.len();
        let (i, &p) = self
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty spectrum");
        (
            self.tx_angles_deg[i / cols],
            self.rx_angles_deg[i % cols],
            p,
        )
    }
}

/// Delay-summed power per pair, each orientation's RX beams placed at their
/// global azimuth. Columns follow the order of `pdps`.
pub fn pas(pdps: &[DirectionalPdp], threshold_db: Option<f64>) -> Result<Pas> {
    let first = pdps
        .first()
        .ok_or_else(|| Error::invalid("angular spectrum needs at least one orientation"))?;
    let mut orientations = Vec::with_capacity(pdps.len());
    for p in pdps {
        let o = wrap_degrees(p.rx_orientation_deg);
        if orientations.iter().any(|&q: &f64| (q - o).abs() < 1e-9) {
            return Err(Error::invalid(format!("duplicate RX orientation {o}°")));
        }
        if p.num_tx != first.num_tx
            || p.num_rx != first.num_rx
            || p.tx_angles_deg != first.tx_angles_deg
        {
            return Err(Error::Inconsistent(
                "orientations use different beam sets".into(),
            ));
        }
        orientations.push(o);
    }
    let cols = first.num_rx * pdps.len();
    let mut values = vec![0.0; first.num_tx * cols];
    let mut rx_angles = Vec::with_capacity(cols);
    for (o, p) in pdps.iter().enumerate() {
        rx_angles.extend(p.rx_global_angles_deg());
        let th = threshold_for(p, threshold_db);
        for t in 0..p.num_tx {
            for r in 0..p.num_rx {
                values[t * cols + o * p.num_rx + r] = if th > 0.0 {
                    p.pair(t, r).iter().map(|&v| keep(v, th)).sum()
                } else {
                    p.pair_power(t, r)
                };
            }
        }
    }
    Ok(Pas {
        tx_angles_deg: first.tx_angles_deg.clone(),
        rx_angles_deg: rx_angles,
        orientations_deg: orientations,
        values,
    })
}

/// Per-delay maximum over all beam pairs.
pub fn sector_pdp(pdp: &DirectionalPdp) -> Vec<f64> {
    let n = pdp.num_delays;
    let mut out = vec![0.0f64; n];
    for pair in pdp.power.chunks_exact(n) {
        for (o, &v) in out.iter_mut().zip(pair) {
            *o = o.max(v);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Padp {
    pub num_delays: usize,
    pub rx_angles_deg: Vec<f64>,
    pub tx_angles_deg: Vec<f64>,
    /// `[rx][delay]`, maximized over TX beams.
    pub rx: Vec<f64>,
    /// `[tx][delay]`, maximized over RX beams.
    pub tx: Vec<f64>,
}

impl Padp {
    pub fn rx_row(&self, r: usize) -> &[f64] {
        &self.rx[r * self.num_delays..(r + 1) * self.num_delays]
    }

    pub fn tx_row(&self, t: usize) -> &[f64] {
        &self.tx[t * self.num_delays..(t + 1) * self.num_delays]
    }

    fn argmax(rows: &[f64], n: usize) -> (usize, usize) {
        let (i, _) = rows
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty profile");
        (i / n, i % n)
    }

    /// Strongest `(rx beam, delay bin)`.
    pub fn rx_argmax(&self) -> (usize, usize) {
        Self::argmax(&self.rx, self.num_delays)
    }

    /// Strongest `(tx beam, delay bin)`.
    pub fn tx_argmax(&self) -> (usize, usize) {
        Self::argmax(&self.tx, self.num_delays)
    }
}

pub fn padp(pdp: &DirectionalPdp) -> Padp {
    let n = pdp.num_delays;
    let mut rx = vec![0.0f64; pdp.num_rx * n];
    let mut tx = vec![0.0f64; pdp.num_tx * n];
    for t in 0..pdp.num_tx {
        for r in 0..pdp.num_rx {
            for (d, &v) in pdp.pair(t, r).iter().enumerate() {
                let a = &mut rx[r * n + d];
                *a = a.max(v);
                let b = &mut tx[t * n + d];
                *b = b.max(v);
            }
        }
    }
    Padp {
        num_delays: n,
        rx_angles_deg: pdp.rx_angles_deg.clone(),
        tx_angles_deg: pdp.tx_angles_deg.clone(),
        rx,
        tx,
    }
}

/// Quantities de-embedded from the summed sector power.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemGains {
    /// Transmitted power per tone.
    pub tx_tone_power_dbm: f64,
    /// Per-tone power the calibration response was recorded at.
    pub cal_tone_power_dbm: f64,
    pub tx_peak_gain_dbi: f64,
    pub rx_peak_gain_dbi: f64,
}

impl SystemGains {
    pub fn of(setup: &crate::capture::SimulationSetup) -> Self {
        Self {
            tx_tone_power_dbm: setup.tx_tone_power_dbm(),
            cal_tone_power_dbm: setup.calibration.tone_power_dbm,
            tx_peak_gain_dbi: setup.tx_codebook.pattern.peak_gain_dbi,
            rx_peak_gain_dbi: setup.rx_codebook.pattern.peak_gain_dbi,
        }
    }
}

/// Zeroes bins below the noise threshold of the PDP they came from.
pub fn thresholded_sector_pdp(pdp: &DirectionalPdp, threshold_db: Option<f64>) -> Vec<f64> {
    let th = threshold_for(pdp, threshold_db);
    sector_pdp(pdp).into_iter().map(|v| keep(v, th)).collect()
}

/// Isotropic path loss from the summed sector PDPs of all orientations.
pub fn path_loss_360(sector_pdps: &[Vec<f64>], gains: &SystemGains) -> Result<f64> {
    let total: f64 = sector_pdps.iter().flatten().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroPower);
    }
    Ok(gains.tx_tone_power_dbm - gains.cal_tone_power_dbm
        + gains.tx_peak_gain_dbi
        + gains.rx_peak_gain_dbi
        - power_to_db(total))
}
