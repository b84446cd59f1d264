//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero when
//! any criterion fails.

#![allow(clippy::field_reassign_with_default)]

use std::process::ExitCode;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use sounder::capture::{
    flags, simulate_calibration, simulate_capture, CaptureKind, CaptureMetadata, CaptureRecord,
    CaptureSet,
};
use sounder::channel::{planted_nlos_channel, random_scatter, ScatterConfig};
use sounder::impairments::{AgcGain, ClockMode, FREE_RUNNING_DRIFT_RAD_S};
use sounder::io::{decode_capture, encode_capture};
use sounder::processing::{
    calibrated_response, correct_drift, directional_pdp, estimate_drift, extract_paths, pas,
    threshold_for, DirectionalPdp, ExtractOptions, PdpOptions, DEFAULT_THRESHOLD_DB,
};
use sounder::sweep::ScheduleSpec;
use sounder::units::{friis_path_loss_db, power_to_db};
use sounder::waveform::{
    newman_phases, optimize_phases, phase_designs, DesignGoal, SoundingWaveform, TonePlan,
};
use sounder::Complex64;
use sounder_cli::config::ScenarioKind;
use sounder_cli::{commands, pipeline, RunConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Worst-case invariant checks gathered from every capture the suite makes.
#[derive(Default)]
struct Invariants {
    pairs: usize,
    worst_parseval: f64,
    pas_checks: usize,
    pas_exact: bool,
}

impl Invariants {
    fn parseval(&mut self, cap: &CaptureSet, cal: &CaptureSet, pdp: &DirectionalPdp) {
        for t in 0..pdp.num_tx {
            for r in 0..pdp.num_rx {
                let h = calibrated_response(cap, cal, t, r, 0).expect("calibrated response");
                let mean = h.iter().map(|c| c.norm_sqr()).sum::<f64>() / h.len() as f64;
                let err = ((pdp.pair_power(t, r) - mean) / mean).abs();
                self.worst_parseval = self.worst_parseval.max(err);
                self.pairs += 1;
            }
        }
    }

    fn rearrangement(&mut self, pdps: &[DirectionalPdp]) {
        let spectrum = pas(pdps, None).expect("angular spectrum");
        let total: f64 = pdps.iter().map(DirectionalPdp::total).sum();
        if self.pas_checks == 0 {
            self.pas_exact = true;
        }
        self.pas_exact &= spectrum.total() == total;
        self.pas_checks += 1;
    }
}

fn c1_papr() -> (Outcome, SoundingWaveform) {
    let start = Instant::now();
    let plan = TonePlan::table_one();
    let w = optimize_phases(&plan, 0.5, 5000, 0).expect("design");
    let elapsed = start.elapsed().as_secs_f64();
    let zc = phase_designs()
        .get("zadoff-chu")
        .and_then(|d| d.design(&plan, &DesignGoal::default()))
        .expect("zadoff-chu");
    let gap = zc.papr_db - w.papr_db;
    let pass = w.papr_db <= 0.5 && gap > 1.0 && elapsed < 60.0;
    (
        outcome(
            pass,
            format!(
                "PAPR {:.4} dB (≤ 0.5), Zadoff-Chu {:.4} dB, gap {:.3} dB (> 1), {:.1} s (< 60)",
                w.papr_db, zc.papr_db, gap, elapsed
            ),
        ),
        w,
    )
}

fn c2_sweep() -> Outcome {
    let spec = ScheduleSpec::default();
    let full = spec.build().expect("schedule");
    let one = ScheduleSpec {
        repetitions: 1,
        ..spec
    }
    .build()
    .expect("schedule");
    let pass = full.total_ticks() == 144_400
        && one.total_ticks() == 14_440
        && full.duration() == 14.440e-3
        && one.duration() == 1.444e-3;
    outcome(
        pass,
        format!(
            "10 reps {} ticks = {} s, 1 rep {} ticks = {} s",
            full.total_ticks(),
            full.duration(),
            one.total_ticks(),
            one.duration()
        ),
    )
}

fn c3_budget() -> Outcome {
    let report = commands::budget(&RunConfig::default()).expect("budget");
    let value: f64 = report
        .lines()
        .find_map(|l| l.strip_prefix("max_path_loss_db = "))
        .and_then(|v| v.parse().ok())
        .expect("budget line");
    outcome(
        (value - 159.0).abs() <= 1.5,
        format!("{value:.3} dB with 1 dB required SNR (159 ± 1.5)"),
    )
}

fn c4_los(w: &SoundingWaveform, inv: &mut Invariants) -> Outcome {
    let start = Instant::now();
    let distances = [10.0, 25.0, 50.0, 100.0, 200.0];
    let mut points = Vec::new();
    let mut worst: f64 = 0.0;
    for (i, &d) in distances.iter().enumerate() {
        let mut cfg = RunConfig::default();
        cfg.seed = 40 + i as u64;
        cfg.scenario.kind = ScenarioKind::Los;
        cfg.scenario.distance_m = d;
        let ch = pipeline::scenario_channel(&cfg, &w.plan).expect("channel");
        let run = pipeline::simulate(&cfg, w.clone(), ch).expect("simulate");
        let products =
            pipeline::process(&run.captures, &run.calibration, &cfg.processing).expect("process");
        let friis = friis_path_loss_db(d, cfg.link.carrier_freq_hz);
        worst = worst.max((products.path_loss_db - friis).abs());
        points.push((d.log10(), products.path_loss_db));
        if i == 3 {
            let mut pdps = Vec::new();
            for cap in &run.captures {
                let pdp =
                    directional_pdp(cap, &run.calibration, &PdpOptions::default()).expect("pdp");
                inv.parseval(cap, &run.calibration, &pdp);
                pdps.push(pdp);
            }
            inv.rearrangement(&pdps);
        }
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let elapsed = start.elapsed().as_secs_f64();
    let pl: Vec<String> = points.iter().map(|p| format!("{:.2}", p.1)).collect();
    outcome(
        worst <= 1.0 && (slope - 20.0).abs() <= 0.5 && elapsed < 300.0,
        format!(
            "PL [{}] dB, worst |PL - Friis| {:.3} dB (≤ 1), slope {:.3} dB/decade (20 ± 0.5), {:.1} s (< 300)",
            pl.join(", "),
            worst,
            slope,
            elapsed
        ),
    )
}

fn c5_nlos(w: &SoundingWaveform, inv: &mut Invariants) -> Outcome {
    let scatter = ScatterConfig::default();
    let mut worst_bin: f64 = 0.0;
    let mut worst_angle: f64 = 0.0;
    let mut worst_power: f64 = 0.0;
    let mut failures = Vec::new();
    for seed in 0..20u64 {
        let planted = random_scatter(&scatter, seed).expect("scene");
        let mut cfg = RunConfig::default();
        cfg.seed = 500 + seed;
        cfg.capture.orientations_deg = vec![0.0];
        let ch = planted_nlos_channel(&planted, &w.plan, cfg.link.carrier_freq_hz, seed)
            .expect("channel");
        let run = pipeline::simulate(&cfg, w.clone(), ch).expect("simulate");
        let pdp = directional_pdp(&run.captures[0], &run.calibration, &PdpOptions::default())
            .expect("pdp");
        if seed < 2 {
            inv.parseval(&run.captures[0], &run.calibration, &pdp);
        }
        let found = extract_paths(
            &pdp,
            &ExtractOptions {
                max_paths: planted.len(),
                dynamic_range_db: 40.0,
                ..ExtractOptions::default()
            },
        );
        if found.len() != planted.len() {
            failures.push(format!(
                "seed {seed}: {} of {} paths",
                found.len(),
                planted.len()
            ));
            continue;
        }
        let matched: Vec<_> = planted
            .iter()
            .map(|p| {
                found
                    .iter()
                    .min_by(|a, b| {
                        (a.delay_s - p.delay_s)
                            .abs()
                            .total_cmp(&(b.delay_s - p.delay_s).abs())
                    })
                    .expect("non-empty")
            })
            .collect();
        let ref_found = matched[0].power_db;
        let ref_planted = planted[0].gain_db;
        for (p, e) in planted.iter().zip(&matched) {
            let bin_err = (e.delay_bin as f64 - p.delay_s / pdp.delay_bin_s).abs();
            let angle_err = (e.aod_deg - p.aod_az_deg)
                .abs()
                .max((e.aoa_deg - p.aoa_az_deg).abs());
            let power_err = ((e.power_db - ref_found) - (p.gain_db - ref_planted)).abs();
            worst_bin = worst_bin.max(bin_err);
            worst_angle = worst_angle.max(angle_err);
            worst_power = worst_power.max(power_err);
            if bin_err > 1.0 || angle_err > 5.0 || power_err > 1.5 {
                failures.push(format!(
                    "seed {seed}: path at {:.1} ns off by {bin_err:.2} bins, {angle_err:.2}°, {power_err:.2} dB",
                    p.delay_s * 1e9
                ));
            }
        }
    }
    let mut detail = format!(
        "20 scenes: worst delay error {worst_bin:.2} bins (≤ 1), angle {worst_angle:.2}° (≤ 5), relative power {worst_power:.3} dB (≤ 1.5)"
    );
    if !failures.is_empty() {
        detail.push_str(&format!("; {}", failures.join("; ")));
    }
    outcome(failures.is_empty(), detail)
}

fn c6_drift(w: &SoundingWaveform) -> Outcome {
    let start = Instant::now();
    let scatter = ScatterConfig::default();
    let mut worst_slope: f64 = 0.0;
    let mut worst_db: f64 = 0.0;
    let mut bins = 0usize;
    let mut failures = 0;
    for seed in 0..100u64 {
        let planted = random_scatter(&scatter, 2000 + seed).expect("scene");
        let mut cfg = RunConfig::default();
        cfg.seed = 3000 + seed;
        // anchor on the beam pair facing the strongest path
        let idx = |a: f64| ((a + 45.0) / 5.0).round() as u16;
        cfg.schedule.reference_pair = [idx(planted[0].aod_az_deg), idx(planted[0].aoa_az_deg)];
        let ch = planted_nlos_channel(&planted, &w.plan, cfg.link.carrier_freq_hz, seed)
            .expect("channel");
        let shared = pipeline::base_setup(&cfg, w.clone()).expect("setup");
        cfg.clock.mode = ClockMode::FreeRunning;
        let free = pipeline::base_setup(&cfg, w.clone()).expect("setup");
        let cal = simulate_calibration(&shared).expect("calibration");
        let cap_shared = simulate_capture(&shared, &ch).expect("capture");
        let cap_free = simulate_capture(&free, &ch).expect("capture");

        let est = estimate_drift(&cap_free, 0).expect("drift");
        let slope_err = (est.slope_rad_s / FREE_RUNNING_DRIFT_RAD_S - 1.0).abs();
        worst_slope = worst_slope.max(slope_err);
        let fixed = correct_drift(&cap_free, est.slope_rad_s).expect("correct");
        let a = directional_pdp(&fixed, &cal, &PdpOptions::default()).expect("pdp");
        let b = directional_pdp(&cap_shared, &cal, &PdpOptions::default()).expect("pdp");
        let floor = threshold_for(&b, Some(DEFAULT_THRESHOLD_DB));
        let mut seed_worst: f64 = 0.0;
        for (x, y) in a.power.iter().zip(&b.power) {
            if *y >= floor {
                seed_worst = seed_worst.max(power_to_db(x / y).abs());
                bins += 1;
            }
        }
        worst_db = worst_db.max(seed_worst);
        if slope_err > 0.05 || seed_worst > 0.1 {
            failures += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        failures == 0 && elapsed < 120.0,
        format!(
            "100 seeds: worst slope error {:.2}% (≤ 5), worst PDP deviation {:.4} dB over {} bins above floor (≤ 0.1), {} failing seeds, {:.1} s (< 120)",
            worst_slope * 100.0,
            worst_db,
            bins,
            failures,
            elapsed
        ),
    )
}

fn c7_invariants(inv: &Invariants) -> Outcome {
    outcome(
        inv.worst_parseval <= 1e-9 && inv.pas_exact && inv.pas_checks > 0,
        format!(
            "Parseval over {} beam pairs: worst relative error {:.2e} (≤ 1e-9); PAS sum identity exact in {} of {} sets",
            inv.pairs,
            inv.worst_parseval,
            if inv.pas_exact { inv.pas_checks } else { 0 },
            inv.pas_checks
        ),
    )
}

fn random_capture(seed: u64) -> CaptureSet {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let tones = rng.random_range(1..12usize);
    let plan = TonePlan::new(tones, 500e3, rng.random_range(1e6..60e6)).expect("plan");
    let w = SoundingWaveform::from_phases(plan, newman_phases(tones), "newman").expect("waveform");
    let mut setup = sounder::capture::SimulationSetup::new(w, rng.random());
    setup.rx_orientation_deg = [0.0, 90.0, 180.0, 270.0][rng.random_range(0..4)];
    let mut extra = std::collections::BTreeMap::new();
    if rng.random_bool(0.5) {
        extra.insert(
            "note".to_string(),
            toml::Value::String(format!("run {}", rng.random::<u32>())),
        );
    }
    let records = (0..rng.random_range(0..20))
        .map(|i| CaptureRecord {
            slot: i,
            snapshot: rng.random_range(0..3),
            agc: AgcGain(rng.random()),
            flags: rng.random::<u16>() & (flags::CLIPPED | flags::ANCHOR | flags::INSERTED),
            h: (0..tones)
                .map(|_| Complex64::new(rng.random_range(-1e3..1e3), rng.random_range(-1e-9..1e-9)))
                .collect(),
        })
        .collect();
    CaptureSet {
        metadata: CaptureMetadata {
            kind: if rng.random_bool(0.8) {
                CaptureKind::Capture
            } else {
                CaptureKind::Calibration
            },
            channel: None,
            setup,
            extra,
        },
        records,
    }
}

fn c8_format() -> Outcome {
    let mut runner = TestRunner::new(Config {
        cases: 500,
        failure_persistence: None,
        ..Config::default()
    });
    let round_trips = std::cell::Cell::new(0usize);
    let corruptions = std::cell::Cell::new(0usize);
    let result = runner.run(
        &(any::<u64>(), any::<usize>(), 1u8..=255),
        |(seed, pos, mask)| {
            let set = random_capture(seed);
            let bytes = encode_capture(&set).expect("encode");
            prop_assert_eq!(&decode_capture(&bytes).expect("decode"), &set);
            prop_assert_eq!(&encode_capture(&set).expect("encode"), &bytes);
            let mut bad = bytes.clone();
            bad[pos % bytes.len()] ^= mask;
            prop_assert!(
                decode_capture(&bad).is_err(),
                "corruption at {} undetected",
                pos % bytes.len()
            );
            round_trips.set(round_trips.get() + 1);
            corruptions.set(corruptions.get() + 1);
            Ok(())
        },
    );
    // every byte of one capture, every bit
    let set = random_capture(7);
    let bytes = encode_capture(&set).expect("encode");
    let mut exhaustive_missed = 0;
    for i in 0..bytes.len() {
        for bit in 0..8 {
            let mut bad = bytes.clone();
            bad[i] ^= 1 << bit;
            if decode_capture(&bad).is_ok() {
                exhaustive_missed += 1;
            }
        }
    }
    let pass = result.is_ok() && exhaustive_missed == 0;
    outcome(
        pass,
        format!(
            "{} randomized round trips, {} random corruptions detected, {} single-bit flips over {} bytes with {} missed{}",
            round_trips.get(),
            corruptions.get(),
            bytes.len() * 8,
            bytes.len(),
            exhaustive_missed,
            result.err().map(|e| format!("; {e}")).unwrap_or_default()
        ),
    )
}

fn c9_flatness(w: &SoundingWaveform) -> Outcome {
    let mut cfg = RunConfig::default();
    cfg.seed = 9;
    cfg.scenario.distance_m = 10.0;
    cfg.capture.orientations_deg = vec![0.0];
    cfg.front_end.adc_bits = Some(16);
    let ch = pipeline::scenario_channel(&cfg, &w.plan).expect("channel");
    let run = pipeline::simulate(&cfg, w.clone(), ch).expect("simulate");
    let cap = &run.captures[0];
    let h = calibrated_response(cap, &run.calibration, 9, 9, 0).expect("response");
    let db: Vec<f64> = h.iter().map(|c| power_to_db(c.norm_sqr())).collect();
    let mean = db.iter().sum::<f64>() / db.len() as f64;
    let dev = db.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    let raw = sounder::impairments::HardwareRipple {
        seed: cfg.seed,
        ..Default::default()
    }
    .response(w.plan.num_tones);
    let raw_db: Vec<f64> = raw.iter().map(|c| power_to_db(c.norm_sqr())).collect();
    let raw_max = raw_db.iter().map(|v| v.abs()).fold(0.0, f64::max);
    outcome(
        dev <= 0.01,
        format!(
            "hardware ripple up to {raw_max:.3} dB; after calibration division max deviation {dev:.5} dB (≤ 0.01) at the boresight pair, 10 m, 16-bit ADC"
        ),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut inv = Invariants::default();
    let (c1, waveform) = c1_papr();
    let results = vec![
        ("1", "PAPR", c1),
        ("2", "sweep arithmetic", c2_sweep()),
        ("3", "link budget", c3_budget()),
        ("4", "LOS end-to-end path loss", c4_los(&waveform, &mut inv)),
        (
            "5",
            "NLOS ground-truth recovery",
            c5_nlos(&waveform, &mut inv),
        ),
        ("6", "drift loop closure", c6_drift(&waveform)),
        (
            "7",
            "Parseval and rearrangement invariants",
            c7_invariants(&inv),
        ),
        ("8", "capture format", c8_format()),
        ("9", "calibration flatness", c9_flatness(&waveform)),
    ];
    let mut failed = 0;
    for (id, name, o) in &results {
        println!(
            "{} [{id}] {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1} s",
        results.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
