//! Strongest-beam path extraction: successive peak picking on the
//! angle-delay profiles with beam-gain de-embedding.

use super::pdp::DirectionalPdp;
use super::products::noise_floor;
use crate::units::{power_to_db, wrap_degrees};

pub const DEFAULT_DETECTION_MARGIN_DB: f64 = 15.0;

#[derive(Clone, Debug, PartialEq)]
pub struct ExtractOptions {
    pub max_paths: usize,
    /// Half-width in bins of the delay sum that collects one path's energy.
    pub sum_half_width: usize,
    /// Half-width in bins of the delay region blanked after each detection.
    pub suppress_half_width: usize,
    /// Stop when the next peak is this far below the first.
    pub dynamic_range_db: f64,
    /// Stop when the next peak is within this margin of the noise floor.
    /// Well above the product threshold, since the largest of ~10⁵ noise
    /// bins sits about 11 dB over the mean.
    pub noise_margin_db: Option<f64>,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            max_paths: 10,
            sum_half_width: 2,
            suppress_half_width: 20,
            dynamic_range_db: 30.0,
            noise_margin_db: Some(DEFAULT_DETECTION_MARGIN_DB),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtractedPath {
    pub delay_bin: usize,
    pub delay_s: f64,
    pub tx_beam: usize,
    pub rx_beam: usize,
    /// Departure azimuth refined between neighbouring beams.
    pub aod_deg: f64,
    /// Global arrival azimuth refined between neighbouring beams.
    pub aoa_deg: f64,
    /// Calibrated power with the peak beam gains removed.
    pub power_db: f64,
}

fn window_sum(row: &[f64], center: usize, half: usize) -> f64 {
    let n = row.len() as isize;
    (-(half as isize)..=half as isize)
        .map(|o| row[(center as isize + o).rem_euclid(n) as usize])
        .sum()
}

/// Vertex of the parabola through three equally spaced dB samples:
/// `(offset in steps, gain of the vertex over the middle sample)`.
fn parabolic(ym: f64, y0: f64, yp: f64) -> (f64, f64) {
    let den = ym - 2.0 * y0 + yp;
    if !(den < 0.0) {
        return (0.0, y0);
    }
    let d = (0.5 * (ym - yp) / den).clamp(-1.0, 1.0);
    (d, y0 + 0.5 * (yp - ym) * d + 0.5 * den * d * d)
}

fn refine(angles: &[f64], idx: usize, y0: f64, neighbour: impl Fn(usize) -> f64) -> (f64, f64) {
    if idx == 0 || idx + 1 >= angles.len() {
        return (angles[idx], 0.0);
    }
    let (ym, yp) = (neighbour(idx - 1), neighbour(idx + 1));
    if !(ym > 0.0 && yp > 0.0) {
        return (angles[idx], 0.0);
    }
    let (d, vertex) = parabolic(power_to_db(ym), power_to_db(y0), power_to_db(yp));
    let step = 0.5 * (angles[idx + 1] - angles[idx - 1]);
    (angles[idx] + d * step, vertex - power_to_db(y0))
}

/// Picks up to `max_paths` peaks of the sector PDP, each time taking the
/// strongest beam pair at that delay, then blanks the surrounding delays.
pub fn extract_paths(pdp: &DirectionalPdp, opts: &ExtractOptions) -> Vec<ExtractedPath> {
    let n = pdp.num_delays;
    let floor = match opts.noise_margin_db {
        Some(m) => noise_floor(&pdp.power) * 10f64.powf(m / 10.0),
        None => 0.0,
    };
    let mut active = vec![true; n];
    let mut out: Vec<ExtractedPath> = Vec::new();
    let mut first_db = None;
    while out.len() < opts.max_paths {
        let mut best: Option<(usize, usize, usize, f64)> = None;
        for t in 0..pdp.num_tx {
            for r in 0..pdp.num_rx {
                for (d, &v) in pdp.pair(t, r).iter().enumerate() {
                    if active[d] && best.is_none_or(|b| v > b.3) {
                        best = Some((t, r, d, v));
                    }
                }
            }
        }
        let Some((t, r, d, peak)) = best else { break };
        if !(peak > floor) || peak <= 0.0 {
            break;
        }
        let peak_db = power_to_db(peak);
        match first_db {
            None => first_db = Some(peak_db),
            Some(f) if peak_db < f - opts.dynamic_range_db => break,
            _ => {}
        }
        let h = opts.sum_half_width;
        let y0 = window_sum(pdp.pair(t, r), d, h);
        let (aod, dtx) = refine(&pdp.tx_angles_deg, t, y0, |i| {
            window_sum(pdp.pair(i, r), d, h)
        });
        let (aoa, drx) = refine(&pdp.rx_angles_deg, r, y0, |i| {
            window_sum(pdp.pair(t, i), d, h)
        });
        out.push(ExtractedPath {
            delay_bin: d,
            delay_s: pdp.delay_of(d),
            tx_beam: t,
            rx_beam: r,
            aod_deg: aod,
            aoa_deg: wrap_degrees(aoa + pdp.rx_orientation_deg),
            power_db: power_to_db(y0) + dtx + drx - pdp.tx_peak_gain_dbi - pdp.rx_peak_gain_dbi,
        });
        let s = opts.suppress_half_width as isize;
        for o in -s..=s {
            active[(d as isize + o).rem_euclid(n as isize) as usize] = false;
        }
    }
    out
}
