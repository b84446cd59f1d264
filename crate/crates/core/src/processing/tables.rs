//! Whitespace-separated text tables of the processing products. Delays are
//! in ns, angles in degrees and powers in dB; `#` lines carry the header.

use std::fmt::Write;

use super::extract::ExtractedPath;
use super::pdp::DirectionalPdp;
use super::products::{Padp, Pas};
use crate::units::power_to_db;

/// Powers at or below zero are written as this value.
pub const FLOOR_DB: f64 = -300.0;

fn db(p: f64) -> f64 {
    if p > 0.0 {
        power_to_db(p).max(FLOOR_DB)
    } else {
        FLOOR_DB
    }
}

/// One row per delay bin, one column per orientation.
pub fn sector_table(orientations_deg: &[f64], sectors: &[Vec<f64>], delay_bin_s: f64) -> String {
    let mut s = String::from("# delay_ns");
    for o in orientations_deg {
        let _ = write!(s, " sector_{o}_db");
    }
    s.push('\n');
    let n = sectors.first().map_or(0, Vec::len);
    for d in 0..n {
        let _ = write!(s, "{:.4}", d as f64 * delay_bin_s * 1e9);
        for sec in sectors {
            let _ = write!(s, " {:.4}", db(sec[d]));
        }
        s.push('\n');
    }
    s
}

/// Long format: TX angle, global RX angle, power.
pub fn pas_table(pas: &Pas) -> String {
    let mut s = String::from("# tx_deg rx_deg power_db\n");
    for (t, ta) in pas.tx_angles_deg.iter().enumerate() {
        for (c, ra) in pas.rx_angles_deg.iter().enumerate() {
            let _ = writeln!(s, "{ta} {ra} {:.4}", db(pas.get(t, c)));
        }
    }
    s
}

fn angle_delay(
    label: &str,
    angles: &[f64],
    rows: &[f64],
    n: usize,
    bin: f64,
    offset: f64,
) -> String {
    let mut s = format!("# {label}_deg delay_ns power_db\n");
    for (i, a) in angles.iter().enumerate() {
        for d in 0..n {
            let _ = writeln!(
                s,
                "{} {:.4} {:.4}",
                crate::units::wrap_degrees(a + offset),
                d as f64 * bin * 1e9,
                db(rows[i * n + d])
            );
        }
    }
    s
}

/// RX profile with global angles.
pub fn padp_rx_table(padp: &Padp, pdp: &DirectionalPdp) -> String {
    angle_delay(
        "rx",
        &padp.rx_angles_deg,
        &padp.rx,
        padp.num_delays,
        pdp.delay_bin_s,
        pdp.rx_orientation_deg,
    )
}

pub fn padp_tx_table(padp: &Padp, pdp: &DirectionalPdp) -> String {
    angle_delay(
        "tx",
        &padp.tx_angles_deg,
        &padp.tx,
        padp.num_delays,
        pdp.delay_bin_s,
        0.0,
    )
}

/// One row per path. `tone_offset_db` is the transmitted tone power minus
/// the calibration tone power; removing it turns calibrated power into
/// path gain.
pub fn paths_table(paths: &[ExtractedPath], tone_offset_db: f64) -> String {
    let mut s = String::from("# delay_ns aod_deg aoa_deg gain_db tx_beam rx_beam\n");
    for p in paths {
        let _ = writeln!(
            s,
            "{:.4} {:.3} {:.3} {:.4} {} {}",
            p.delay_s * 1e9,
            p.aod_deg + 0.0,
            p.aoa_deg + 0.0,
            p.power_db - tone_offset_db,
            p.tx_beam,
            p.rx_beam
        );
    }
    s
}
