//! In-memory simulation and processing shared by the commands.

use sounder::capture::{simulate_calibration, simulate_capture, CaptureSet, SimulationSetup};
use sounder::channel::{los_channel, planted_nlos_channel, random_scatter, ChannelRealization};
use sounder::impairments::{mix_seed, ClockModel, HardwareRipple};
use sounder::processing::{
    correct_drift, directional_pdp, estimate_drift, extract_paths, padp, pas, path_loss_360,
    thresholded_sector_pdp, DirectionalPdp, DriftEstimate, ExtractOptions, ExtractedPath, Padp,
    Pas, PdpOptions, SystemGains,
};
use sounder::waveform::{phase_designs, DesignGoal, SoundingWaveform, TonePlan};
use sounder::Error;

use crate::config::{ProcessingConfig, RunConfig, ScenarioKind};
use crate::error::{CliError, CliResult};

/// Accumulated drift over one snapshot above which an uncorrected capture
/// is flagged.
pub const RESIDUAL_DRIFT_FLAG_DEG: f64 = 1.0;

pub fn tone_plan(cfg: &RunConfig) -> sounder::Result<TonePlan> {
    let w = &cfg.waveform;
    TonePlan::new(w.tones, w.tone_spacing_hz, w.start_freq_hz)?.with_oversampling(w.oversampling)
}

pub fn design(plan: &TonePlan, name: &str, cfg: &RunConfig) -> sounder::Result<SoundingWaveform> {
    phase_designs().get(name)?.design(
        plan,
        &DesignGoal {
            target_papr_db: cfg.waveform.target_papr_db,
            max_iters: cfg.waveform.max_iters,
            seed: cfg.seed,
        },
    )
}

/// The configured descriptor if one is given, otherwise a fresh design.
pub fn waveform(cfg: &RunConfig) -> CliResult<SoundingWaveform> {
    match &cfg.waveform.descriptor {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Input {
                path: path.clone(),
                source: e.into(),
            })?;
            SoundingWaveform::from_descriptor(&text).map_err(|e| CliError::Input {
                path: path.clone(),
                source: e,
            })
        }
        None => Ok(design(&tone_plan(cfg)?, &cfg.waveform.design, cfg)?),
    }
}

/// Setup for the first orientation; hardware ripple is seeded from the run
/// seed so every orientation and the calibration share it.
pub fn base_setup(cfg: &RunConfig, waveform: SoundingWaveform) -> sounder::Result<SimulationSetup> {
    let mut s = SimulationSetup::new(waveform, cfg.seed);
    s.link = cfg.link.clone();
    s.front_end = cfg.front_end.clone();
    s.calibration = cfg.calibration.clone();
    s.averaging = cfg.capture.averaging;
    s.snapshots = cfg.capture.snapshots;
    s.snapshot_interval_s = cfg.capture.snapshot_interval_s;
    s.ripple = HardwareRipple {
        enabled: cfg.ripple.enabled,
        max_db: cfg.ripple.max_db,
        max_phase_deg: cfg.ripple.max_phase_deg,
        components: cfg.ripple.components,
        seed: cfg.seed,
    };
    let mut clock = ClockModel::with_mode(cfg.clock.mode, cfg.seed);
    if let Some(r) = cfg.clock.drift_rate_rad_s {
        clock.drift_rate_rad_s = r;
    }
    if let Some(n) = cfg.clock.drift_noise_rad {
        clock.drift_noise_rms_rad = n;
    }
    s.clock = clock;
    let sc = &cfg.schedule;
    s.schedule.repetitions = sc.repetitions;
    s.schedule.guard_time_s = sc.guard_time_s;
    s.schedule.waveform_duration_s = s.plan().period();
    s.schedule.anchor_policy = sc.anchor_policy.clone();
    s.schedule.anchor_interval = sc.anchor_interval;
    s.schedule.reference_pair = sc.reference_pair;
    if let Some(b) = &sc.tx_beams {
        s.schedule.tx_beams = b.clone();
    }
    if let Some(b) = &sc.rx_beams {
        s.schedule.rx_beams = b.clone();
    }
    s.validate()?;
    Ok(s)
}

/// Same setup rotated to `orientation_deg`, with its own noise and clock
/// streams.
pub fn oriented(base: &SimulationSetup, index: usize, orientation_deg: f64) -> SimulationSetup {
    let mut s = base.clone();
    s.rx_orientation_deg = orientation_deg;
    if index > 0 {
        s.seed = mix_seed(base.seed, index as u64);
        s.clock.seed = mix_seed(base.clock.seed, index as u64);
    }
    s
}

pub fn scenario_channel(cfg: &RunConfig, plan: &TonePlan) -> CliResult<ChannelRealization> {
    let carrier = cfg.link.carrier_freq_hz;
    let sc = &cfg.scenario;
    let ch = match sc.kind {
        ScenarioKind::Los => los_channel(sc.distance_m, carrier)?,
        ScenarioKind::Mpc => {
            let path = sc
                .mpc_file
                .as_ref()
                .ok_or_else(|| CliError::Config("scenario kind `mpc` needs `mpc_file`".into()))?;
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Input {
                path: path.clone(),
                source: e.into(),
            })?;
            let ch = ChannelRealization::from_text(&text).map_err(|e| CliError::Input {
                path: path.clone(),
                source: e,
            })?;
            ch.validate(plan)?;
            ch
        }
        ScenarioKind::Scatter => {
            let paths = random_scatter(&sc.scatter, cfg.seed)?;
            planted_nlos_channel(&paths, plan, carrier, cfg.seed)?
        }
    };
    Ok(ch)
}

pub struct SimulatedRun {
    pub channel: ChannelRealization,
    pub captures: Vec<CaptureSet>,
    pub calibration: CaptureSet,
}

pub fn simulate(
    cfg: &RunConfig,
    waveform: SoundingWaveform,
    channel: ChannelRealization,
) -> CliResult<SimulatedRun> {
    if cfg.capture.orientations_deg.is_empty() {
        return Err(CliError::Config(
            "at least one RX orientation is needed".into(),
        ));
    }
    let base = base_setup(cfg, waveform)?;
    let captures = cfg
        .capture
        .orientations_deg
        .iter()
        .enumerate()
        .map(|(i, &phi)| simulate_capture(&oriented(&base, i, phi), &channel))
        .collect::<sounder::Result<Vec<_>>>()?;
    let calibration = simulate_calibration(&base)?;
    Ok(SimulatedRun {
        channel,
        captures,
        calibration,
    })
}

pub struct OrientationProducts {
    pub orientation_deg: f64,
    pub drift: Option<DriftEstimate>,
    pub drift_corrected: bool,
    /// Uncorrected drift accumulated over the snapshot exceeds the flag
    /// level.
    pub residual_drift: bool,
    pub pdp: DirectionalPdp,
    /// Sector PDP after noise thresholding.
    pub sector: Vec<f64>,
    pub padp: Padp,
    pub clipped_records: usize,
}

pub struct Products {
    pub orientations: Vec<OrientationProducts>,
    pub pas: Pas,
    pub gains: SystemGains,
    pub path_loss_db: f64,
    pub paths: Vec<ExtractedPath>,
}

/// Drift handling, directional PDP and per-orientation products of one
/// capture.
pub fn process_orientation(
    capture: &CaptureSet,
    cal: &CaptureSet,
    opts: &ProcessingConfig,
) -> sounder::Result<OrientationProducts> {
    let snapshot = 0;
    let drift = match estimate_drift(capture, snapshot) {
        Ok(e) => Some(e),
        Err(Error::TooFewAnchors(_)) => None,
        Err(e) => return Err(e),
    };
    let duration = capture.setup().schedule()?.duration();
    let (corrected, drift_corrected) = match (&drift, opts.drift_correction) {
        (Some(d), true) => (Some(correct_drift(capture, d.slope_rad_s)?), true),
        _ => (None, false),
    };
    let residual_drift = !drift_corrected
        && drift.as_ref().is_some_and(|d| {
            (d.slope_rad_s * duration).to_degrees().abs() > RESIDUAL_DRIFT_FLAG_DEG
        });
    let pdp = directional_pdp(
        corrected.as_ref().unwrap_or(capture),
        cal,
        &PdpOptions {
            window: opts.window.clone(),
            snapshot,
        },
    )?;
    Ok(OrientationProducts {
        orientation_deg: capture.setup().rx_orientation_deg,
        drift,
        drift_corrected,
        residual_drift,
        sector: thresholded_sector_pdp(&pdp, opts.threshold_margin()),
        padp: padp(&pdp),
        clipped_records: capture.clipped_count(),
        pdp,
    })
}

pub fn process(
    captures: &[CaptureSet],
    cal: &CaptureSet,
    opts: &ProcessingConfig,
) -> sounder::Result<Products> {
    let first = captures
        .first()
        .ok_or_else(|| Error::InvalidParameter("no captures to process".into()))?;
    let orientations = captures
        .iter()
        .map(|c| process_orientation(c, cal, opts))
        .collect::<sounder::Result<Vec<_>>>()?;
    let pdps: Vec<DirectionalPdp> = orientations.iter().map(|o| o.pdp.clone()).collect();
    let spectrum = pas(&pdps, opts.threshold_margin())?;
    let gains = SystemGains::of(first.setup());
    let sectors: Vec<Vec<f64>> = orientations.iter().map(|o| o.sector.clone()).collect();
    let path_loss_db = path_loss_360(&sectors, &gains)?;

    let extract = ExtractOptions {
        max_paths: opts.max_paths,
        ..ExtractOptions::default()
    };
    // The same path shows up through side and back lobes in other
    // orientations; keep the strongest copy.
    let mut all: Vec<ExtractedPath> = pdps
        .iter()
        .flat_map(|p| extract_paths(p, &extract))
        .collect();
    all.sort_by(|a, b| b.power_db.total_cmp(&a.power_db));
    let floor_db = all
        .first()
        .map_or(f64::NEG_INFINITY, |p| p.power_db - extract.dynamic_range_db);
    let mut paths: Vec<ExtractedPath> = Vec::new();
    for p in all {
        let dup = paths.iter().any(|q| {
            (q.delay_bin as i64 - p.delay_bin as i64).abs() <= extract.suppress_half_width as i64
        });
        if !dup && p.power_db >= floor_db && paths.len() < opts.max_paths {
            paths.push(p);
        }
    }
    paths.sort_by_key(|p| p.delay_bin);
    Ok(Products {
        orientations,
        pas: spectrum,
        gains,
        path_loss_db,
        paths,
    })
}
