//! Physical constants, decibel helpers and unit-suffixed quantity parsing.

use crate::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Thermal noise density at 290 K.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

pub fn db_to_power(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn power_to_db(p: f64) -> f64 {
    10.0 * p.log10()
}

pub fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// Receiver noise floor in dBm over `bandwidth_hz` for a given noise figure.
pub fn noise_floor_dbm(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    THERMAL_NOISE_DBM_PER_HZ + power_to_db(bandwidth_hz) + noise_figure_db
}

/// Free-space path loss in dB (Friis).
pub fn friis_path_loss_db(distance_m: f64, freq_hz: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * distance_m * freq_hz / SPEED_OF_LIGHT).log10()
}

/// Wraps an angle in degrees to (-180, 180].
pub fn wrap_degrees(deg: f64) -> f64 {
    if deg > -180.0 && deg <= 180.0 {
        return deg;
    }
    let w = deg.rem_euclid(360.0);
    if w > 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// Wraps an angle in radians to (-π, π].
pub fn wrap_radians(rad: f64) -> f64 {
    use std::f64::consts::PI;
    if rad > -PI && rad <= PI {
        return rad;
    }
    let w = rad.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Parses a number with an optional SI-prefixed unit, e.g. `400MHz`,
/// `2us`, `100 ms`, `27.85e9`. The unit letters after the prefix must
/// match `unit` (case-insensitive) when present.
pub fn parse_quantity(text: &str, unit: &str) -> Result<f64> {
    let s = text.trim();
    let split = s
        .char_indices()
        .find(|&(i, c)| {
            c.is_ascii_alphabetic()
                && !((c == 'e' || c == 'E')
                    && s[i + 1..]
                        .chars()
                        .next()
                        .is_some_and(|n| n.is_ascii_digit() || n == '-' || n == '+'))
        })
        .map(|(i, _)| i)
        .unwrap_or(s.len());
    let (num, suffix) = s.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("cannot parse `{text}` as a number")))?;
    let suffix = suffix.trim();
    if suffix.is_empty() {
        return Ok(value);
    }
    let rest = if suffix.len() >= unit.len()
        && suffix[suffix.len() - unit.len()..].eq_ignore_ascii_case(unit)
    {
        &suffix[..suffix.len() - unit.len()]
    } else if unit.is_empty() {
        suffix
    } else {
        return Err(Error::invalid(format!("`{text}`: expected unit `{unit}`")));
    };
    let scale = match rest {
        "" => 1.0,
        "G" | "g" => 1e9,
        "M" => 1e6,
        "k" | "K" => 1e3,
        "m" => 1e-3,
        "u" | "µ" => 1e-6,
        "n" => 1e-9,
        "p" => 1e-12,
        other => {
            return Err(Error::invalid(format!(
                "`{text}`: unknown prefix `{other}`"
            )))
        }
    };
    Ok(value * scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_floor_for_400_mhz() {
        // -174 + 86.02 + 5
        assert!((noise_floor_dbm(400e6, 5.0) - -82.979).abs() < 1e-3);
    }

    #[test]
    fn wraps_degrees() {
        assert_eq!(wrap_degrees(190.0), -170.0);
        assert_eq!(wrap_degrees(-180.0), 180.0);
        assert_eq!(wrap_degrees(180.0), 180.0);
        assert_eq!(wrap_degrees(-450.0), -90.0);
    }

    #[test]
    fn parses_quantities() {
        assert_eq!(parse_quantity("400MHz", "Hz").unwrap(), 400e6);
        assert_eq!(parse_quantity("4 MHz", "hz").unwrap(), 4e6);
        assert!((parse_quantity("2us", "s").unwrap() - 2e-6).abs() < 1e-18);
        assert!((parse_quantity("100ms", "s").unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(parse_quantity("27.85e9", "Hz").unwrap(), 27.85e9);
        assert_eq!(parse_quantity("-3.5e-2", "").unwrap(), -0.035);
        assert!(parse_quantity("10 parsecs", "s").is_err());
        assert!(parse_quantity("abc", "s").is_err());
    }

    #[test]
    fn friis_at_100_m() {
        assert!((friis_path_loss_db(100.0, 27.85e9) - 101.34).abs() < 0.01);
    }
}
