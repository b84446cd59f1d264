//! Tone-domain windows applied before the delay transform.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::registry::Registry;

pub trait DelayWindow: Send + Sync {
    fn name(&self) -> &'static str;

    /// Per-tone weights, scaled to unit mean so an on-grid path keeps its
    /// peak power.
    fn weights(&self, n: usize) -> Vec<f64>;
}

#[derive(Debug, Default)]
pub struct Rectangular;

impl DelayWindow for Rectangular {
    fn name(&self) -> &'static str {
        "rect"
    }

    fn weights(&self, n: usize) -> Vec<f64> {
        vec![1.0; n]
    }
}

#[derive(Debug, Default)]
pub struct Hann;

impl DelayWindow for Hann {
    fn name(&self) -> &'static str {
        "hann"
    }

    fn weights(&self, n: usize) -> Vec<f64> {
        if n < 2 {
            return vec![1.0; n];
        }
        let raw: Vec<f64> = (0..n)
            .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / (n - 1) as f64).cos())
            .collect();
        let mean = raw.iter().sum::<f64>() / n as f64;
        raw.into_iter().map(|w| w / mean).collect()
    }
}

pub fn delay_windows() -> Registry<dyn DelayWindow> {
    let mut r: Registry<dyn DelayWindow> = Registry::new("delay window");
    r.register("rect", Arc::new(Rectangular))
        .register("hann", Arc::new(Hann));
    r
}
