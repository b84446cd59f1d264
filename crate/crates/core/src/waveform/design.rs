//! Tone phase designs.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

use super::{papr_db, papr_of_samples, SharedFft, SoundingWaveform, TonePlan};
use crate::registry::Registry;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DesignGoal {
    pub target_papr_db: f64,
    /// Budget in envelope evaluations (one inverse/forward FFT pair each).
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for DesignGoal {
    fn default() -> Self {
        Self {
            target_papr_db: 0.5,
            max_iters: 5000,
            seed: 0,
        }
    }
}

/// A rule for choosing the tone phases of a multitone waveform.
pub trait PhaseDesign: Send + Sync {
    fn name(&self) -> &'static str;

    /// Returns the designed waveform; `converged` reports whether the target
    /// PAPR was reached. Missing the target is not an error.
    fn design(&self, plan: &TonePlan, goal: &DesignGoal) -> Result<SoundingWaveform>;
}

pub fn phase_designs() -> Registry<dyn PhaseDesign> {
    let mut r: Registry<dyn PhaseDesign> = Registry::new("phase design");
    r.register("clip-refine", Arc::new(ClipRefine::default()))
        .register("newman", Arc::new(Newman))
        .register("zadoff-chu", Arc::new(ZadoffChu { root: 1 }));
    r
}

/// Newman phases `π k² / N`.
pub fn newman_phases(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let k = k as f64;
            (PI * k * k / n as f64).rem_euclid(2.0 * PI)
        })
        .collect()
}

/// Zadoff–Chu sequence phases of length `n` with root `root`.
pub fn zadoff_chu_phases(n: usize, root: u64) -> Vec<f64> {
    let nn = n as u64;
    (0..nn)
        .map(|k| {
            // Reduce the quadratic index exactly before scaling to radians.
            let q = if nn % 2 == 1 {
                (root % (2 * nn)) * ((k * (k + 1)) % (2 * nn)) % (2 * nn)
            } else {
                (root % (2 * nn)) * ((k * k) % (2 * nn)) % (2 * nn)
            };
            (-PI * q as f64 / nn as f64).rem_euclid(2.0 * PI)
        })
        .collect()
}

fn fixed(
    plan: &TonePlan,
    goal: &DesignGoal,
    phases: Vec<f64>,
    name: &str,
) -> Result<SoundingWaveform> {
    check_goal(goal)?;
    let mut w = SoundingWaveform::from_phases(plan.clone(), phases, name)?;
    w.converged = w.papr_db <= goal.target_papr_db;
    Ok(w)
}

fn check_goal(goal: &DesignGoal) -> Result<()> {
    if !(goal.target_papr_db > 0.0) {
        return Err(Error::invalid(format!(
            "target PAPR must be positive, got {} dB",
            goal.target_papr_db
        )));
    }
    if goal.max_iters == 0 {
        return Err(Error::invalid("iteration budget must be at least 1"));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Newman;

impl PhaseDesign for Newman {
    fn name(&self) -> &'static str {
        "newman"
    }

    fn design(&self, plan: &TonePlan, goal: &DesignGoal) -> Result<SoundingWaveform> {
        fixed(plan, goal, newman_phases(plan.num_tones), self.name())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ZadoffChu {
    pub root: u64,
}

impl PhaseDesign for ZadoffChu {
    fn name(&self) -> &'static str {
        "zadoff-chu"
    }

    fn design(&self, plan: &TonePlan, goal: &DesignGoal) -> Result<SoundingWaveform> {
        fixed(
            plan,
            goal,
            zadoff_chu_phases(plan.num_tones, self.root),
            self.name(),
        )
    }
}

/// Newman initialisation, then iterative time-domain clipping with
/// frequency-domain magnitude restoration, then a smooth-max gradient
/// refinement of the phases. Restarts from seeded random phases until the
/// target is met or the evaluation budget runs out.
///
/// Candidates are scored on a grid twice as dense as the plan's evaluation
/// grid so the optimizer cannot hide peaks between evaluation samples.
#[derive(Clone, Debug)]
pub struct ClipRefine {
    /// Clipping threshold relative to the envelope RMS.
    pub clip_db: f64,
    pub clip_iters: usize,
    /// Sharpness schedule for the log-sum-exp peak surrogate.
    pub sharpness: Vec<f64>,
    pub refine_steps: usize,
}

impl Default for ClipRefine {
    fn default() -> Self {
        Self {
            clip_db: 0.3,
            clip_iters: 400,
            sharpness: vec![20.0, 100.0, 500.0, 2000.0],
            refine_steps: 100,
        }
    }
}

struct Grid {
    tones: usize,
    inverse: SharedFft,
    forward: SharedFft,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Grid {
    fn new(tones: usize, len: usize) -> Self {
        let mut planner = FftPlanner::new();
        let inverse = planner.plan_fft_inverse(len);
        let forward = planner.plan_fft_forward(len);
        let scratch_len = inverse
            .get_inplace_scratch_len()
            .max(forward.get_inplace_scratch_len());
        Self {
            tones,
            inverse,
            forward,
            buf: vec![Complex64::new(0.0, 0.0); len],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    fn synthesize(&mut self, phases: &[f64]) {
        self.buf.fill(Complex64::new(0.0, 0.0));
        for (b, &p) in self.buf.iter_mut().zip(phases) {
            *b = Complex64::from_polar(1.0, p);
        }
        self.inverse
            .process_with_scratch(&mut self.buf, &mut self.scratch);
    }

    fn analyze(&mut self) {
        self.forward
            .process_with_scratch(&mut self.buf, &mut self.scratch);
    }

    /// Log-sum-exp of normalized instantaneous power and its gradient with
    /// respect to the phases. Also returns the PAPR of the evaluated point.
    fn smooth_peak(&mut self, phases: &[f64], beta: f64, grad: &mut [f64]) -> (f64, f64) {
        self.synthesize(phases);
        let papr = papr_of_samples(&self.buf);
        let n = self.tones as f64;
        let max = self
            .buf
            .iter()
            .map(|c| c.norm_sqr() / n)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for c in self.buf.iter_mut() {
            let w = (beta * (c.norm_sqr() / n - max)).exp();
            total += w;
            *c *= w;
        }
        let value = max + total.ln() / beta;
        // grad_k = (2/N) Re(j e^{jφ_k} conj(FFT(q·x)[k])), q = w / total
        self.analyze();
        for (k, g) in grad.iter_mut().enumerate() {
            let s = self.buf[k].conj() / total;
            let e = Complex64::from_polar(1.0, phases[k]);
            *g = 2.0 / n * (Complex64::i() * e * s).re;
        }
        (value, papr)
    }
}

impl ClipRefine {
    // phases is swapped wholesale with the best candidate
    #[allow(clippy::ptr_arg)]
    fn clip_stage(
        &self,
        grid: &mut Grid,
        phases: &mut Vec<f64>,
        budget: &mut usize,
        best: &mut (f64, Vec<f64>),
        target: f64,
    ) -> bool {
        let n = grid.tones;
        let threshold = (n as f64).sqrt() * 10f64.powf(self.clip_db / 20.0);
        for _ in 0..self.clip_iters {
            if *budget == 0 {
                return false;
            }
            *budget -= 1;
            grid.synthesize(phases);
            let papr = papr_of_samples(&grid.buf);
            if papr < best.0 {
                *best = (papr, phases.clone());
                if papr <= target {
                    return true;
                }
            }
            for c in grid.buf.iter_mut() {
                let a = c.norm();
                if a > threshold {
                    *c *= threshold / a;
                }
            }
            grid.analyze();
            for (p, c) in phases.iter_mut().zip(&grid.buf[..n]) {
                if c.norm_sqr() > 0.0 {
                    *p = c.arg();
                }
            }
        }
        false
    }

    fn refine_stage(
        &self,
        grid: &mut Grid,
        phases: &mut Vec<f64>,
        budget: &mut usize,
        best: &mut (f64, Vec<f64>),
        target: f64,
    ) -> bool {
        let n = grid.tones;
        let mut grad = vec![0.0; n];
        let mut trial_grad = vec![0.0; n];
        let mut trial = vec![0.0; n];
        for &beta in &self.sharpness {
            if *budget == 0 {
                return false;
            }
            *budget -= 1;
            let (mut value, papr) = grid.smooth_peak(phases, beta, &mut grad);
            if papr < best.0 {
                *best = (papr, phases.clone());
                if papr <= target {
                    return true;
                }
            }
            let mut step = 0.05;
            let mut accepted = 0;
            while accepted < self.refine_steps && step > 1e-9 {
                if *budget == 0 {
                    return false;
                }
                *budget -= 1;
                for ((t, p), g) in trial.iter_mut().zip(phases.iter()).zip(&grad) {
                    *t = p - step * g;
                }
                let (v, papr) = grid.smooth_peak(&trial, beta, &mut trial_grad);
                if papr < best.0 {
                    *best = (papr, trial.clone());
                    if papr <= target {
                        return true;
                    }
                }
                if v < value {
                    value = v;
                    std::mem::swap(phases, &mut trial);
                    std::mem::swap(&mut grad, &mut trial_grad);
                    step *= 1.5;
                    accepted += 1;
                } else {
                    step *= 0.5;
                }
            }
        }
        false
    }
}

impl PhaseDesign for ClipRefine {
    fn name(&self) -> &'static str {
        "clip-refine"
    }

    fn design(&self, plan: &TonePlan, goal: &DesignGoal) -> Result<SoundingWaveform> {
        check_goal(goal)?;
        plan.validate()?;
        let n = plan.num_tones;
        let mut grid = Grid::new(n, 2 * plan.eval_len());
        let mut rng = ChaCha8Rng::seed_from_u64(goal.seed);
        let mut budget = goal.max_iters;
        let mut start = newman_phases(n);
        let mut best = (f64::INFINITY, start.clone());
        let target = goal.target_papr_db;
        while budget > 0 {
            let mut phases = start;
            if self.clip_stage(&mut grid, &mut phases, &mut budget, &mut best, target)
                || self.refine_stage(&mut grid, &mut phases, &mut budget, &mut best, target)
            {
                break;
            }
            start = (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        }
        let phases: Vec<f64> = best.1.iter().map(|p| p.rem_euclid(2.0 * PI)).collect();
        let papr_db = papr_db(plan, &phases)?;
        Ok(SoundingWaveform {
            plan: plan.clone(),
            design: self.name().to_string(),
            papr_db,
            converged: papr_db <= target,
            phases,
        })
    }
}
