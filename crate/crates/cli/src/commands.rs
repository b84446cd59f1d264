//! The command implementations. Each writes its files atomically and
//! returns the text it reports on stdout.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sounder::beams::link_budget;
use sounder::capture::CaptureSet;
use sounder::io::{read_capture, write_atomic, write_capture, write_raw_samples, RawSamples};
use sounder::processing::tables;
use sounder::units::{friis_path_loss_db, power_to_db};
use sounder::waveform::tx_backoff;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::pipeline;

pub const WAVEFORM_FILE: &str = "waveform.toml";
pub const CALIBRATION_FILE: &str = "calibration.mmws";

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Core(e.into()))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    Ok(write_atomic(path, text.as_bytes())?)
}

/// File name for the capture taken at `orientation_deg`.
pub fn capture_file_name(orientation_deg: f64) -> String {
    format!(
        "capture_phi{:03}.mmws",
        orientation_deg.rem_euclid(360.0).round() as i64
    )
}

fn with_config(mut report: String, cfg: &RunConfig) -> String {
    report.push_str("\n# resolved configuration\n[config]\n");
    let cfg_text = cfg.to_text();
    // nest the configuration under [config]
    for line in cfg_text.lines() {
        if let Some(table) = line.strip_prefix('[') {
            let _ = writeln!(report, "[config.{table}");
        } else {
            let _ = writeln!(report, "{line}");
        }
    }
    report
}

/// Designs (or loads) the waveform, writes its descriptor and a PAPR report.
/// Fails with [`CliError::NonConvergence`] after writing when the target was
/// missed.
pub fn waveform(cfg: &RunConfig, raw_bits: Option<u32>) -> CliResult<String> {
    let out = cfg.out_dir();
    ensure_dir(&out)?;
    let w = pipeline::waveform(cfg)?;
    let mut r = String::new();
    let _ = writeln!(r, "design = \"{}\"", w.design);
    let _ = writeln!(r, "tones = {}", w.plan.num_tones);
    let _ = writeln!(r, "papr_db = {:.4}", w.papr_db);
    let _ = writeln!(r, "target_papr_db = {}", cfg.waveform.target_papr_db);
    let _ = writeln!(r, "converged = {}", w.converged);
    let _ = writeln!(r, "tx_backoff_db = {:.4}", tx_backoff(w.papr_db));
    for name in &cfg.waveform.compare {
        let other = pipeline::design(&w.plan, name, cfg)?;
        let _ = writeln!(r, "\n[compare.{name}]");
        let _ = writeln!(r, "papr_db = {:.4}", other.papr_db);
        let _ = writeln!(
            r,
            "excess_over_design_db = {:.4}",
            other.papr_db - w.papr_db
        );
    }
    write_text(&out.join(WAVEFORM_FILE), &w.descriptor())?;
    if let Some(bits) = raw_bits {
        let raw = RawSamples {
            bits: bits as u16,
            samples: w.raw_samples(bits)?,
        };
        write_raw_samples(&raw, out.join("waveform_samples.mmwr"))?;
    }
    write_text(
        &out.join("waveform_report.toml"),
        &with_config(r.clone(), cfg),
    )?;
    if !w.converged {
        print!("{r}");
        return Err(CliError::NonConvergence {
            papr_db: w.papr_db,
            target_db: cfg.waveform.target_papr_db,
        });
    }
    Ok(r)
}

/// One capture file per RX orientation plus the calibration capture.
pub fn simulate(cfg: &RunConfig) -> CliResult<String> {
    let out = cfg.out_dir();
    ensure_dir(&out)?;
    let w = pipeline::waveform(cfg)?;
    let plan = w.plan.clone();
    let channel = pipeline::scenario_channel(cfg, &plan)?;
    let run = pipeline::simulate(cfg, w, channel)?;
    let mut r = String::new();
    let _ = writeln!(r, "paths = {}", run.channel.mpcs.len());
    let _ = writeln!(r, "snapshots = {}", cfg.capture.snapshots);
    let mut files = Vec::new();
    for cap in &run.captures {
        let name = capture_file_name(cap.setup().rx_orientation_deg);
        write_capture(cap, out.join(&name))?;
        let _ = writeln!(
            r,
            "# {name}: orientation {} deg, {} records, {} clipped",
            cap.setup().rx_orientation_deg,
            cap.records.len(),
            cap.clipped_count()
        );
        files.push(name);
    }
    write_capture(&run.calibration, out.join(CALIBRATION_FILE))?;
    let _ = writeln!(r, "captures = {:?}", files);
    let _ = writeln!(r, "calibration = \"{CALIBRATION_FILE}\"");
    write_text(
        &out.join("simulate_report.toml"),
        &with_config(r.clone(), cfg),
    )?;
    Ok(r)
}

fn load(path: &Path) -> CliResult<CaptureSet> {
    read_capture(path).map_err(|e| CliError::Input {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Products of a set of captures: tables per orientation, angular spectrum,
/// extracted paths and a report with the 360° path loss.
pub fn process(cfg: &RunConfig, captures: &[PathBuf], cal: Option<&Path>) -> CliResult<String> {
    if captures.is_empty() {
        return Err(CliError::Config("no capture files given".into()));
    }
    let cal_path = match cal {
        Some(p) => p.to_path_buf(),
        None => captures[0]
            .parent()
            .unwrap_or(Path::new("."))
            .join(CALIBRATION_FILE),
    };
    if !cal_path.is_file() {
        return Err(CliError::MissingCalibration(cal_path));
    }
    let cal = load(&cal_path)?;
    let caps = captures
        .iter()
        .map(|p| load(p))
        .collect::<CliResult<Vec<_>>>()?;
    let products = pipeline::process(&caps, &cal, &cfg.processing)?;

    let out = cfg.out_dir();
    ensure_dir(&out)?;
    let first = &products.orientations[0].pdp;
    let orientations: Vec<f64> = products
        .orientations
        .iter()
        .map(|o| o.orientation_deg)
        .collect();
    let sectors: Vec<Vec<f64>> = products
        .orientations
        .iter()
        .map(|o| o.sector.clone())
        .collect();
    write_text(
        &out.join("sector_pdp.txt"),
        &tables::sector_table(&orientations, &sectors, first.delay_bin_s),
    )?;
    write_text(&out.join("pas.txt"), &tables::pas_table(&products.pas))?;
    write_text(
        &out.join("paths.txt"),
        &tables::paths_table(
            &products.paths,
            products.gains.tx_tone_power_dbm - products.gains.cal_tone_power_dbm,
        ),
    )?;

    let mut r = String::new();
    let _ = writeln!(r, "path_loss_db = {:.4}", products.path_loss_db);
    if let Some(d) = caps[0].metadata.channel()?.and_then(|c| c.distance_m) {
        let friis = friis_path_loss_db(d, caps[0].setup().link.carrier_freq_hz);
        let _ = writeln!(r, "distance_m = {d}");
        let _ = writeln!(r, "friis_path_loss_db = {friis:.4}");
        let _ = writeln!(
            r,
            "path_loss_error_db = {:.4}",
            products.path_loss_db - friis
        );
    }
    let _ = writeln!(r, "window = \"{}\"", cfg.processing.window);
    match cfg.processing.threshold_margin() {
        Some(m) => {
            let _ = writeln!(r, "threshold_above_floor_db = {m}");
        }
        None => {
            let _ = writeln!(r, "threshold_above_floor_db = \"off\"");
        }
    }
    let _ = writeln!(r, "paths_found = {}", products.paths.len());
    let (tx, rx, p) = products.pas.argmax();
    let _ = writeln!(r, "strongest_tx_deg = {tx}");
    let _ = writeln!(r, "strongest_rx_deg = {rx}");
    let _ = writeln!(r, "strongest_pas_db = {:.4}", power_to_db(p));
    let _ = writeln!(r, "calibration = {:?}", cal_path.display().to_string());
    for (o, path) in products.orientations.iter().zip(captures) {
        let phi = o.orientation_deg.rem_euclid(360.0).round() as i64;
        write_text(
            &out.join(format!("padp_rx_phi{phi:03}.txt")),
            &tables::padp_rx_table(&o.padp, &o.pdp),
        )?;
        write_text(
            &out.join(format!("padp_tx_phi{phi:03}.txt")),
            &tables::padp_tx_table(&o.padp, &o.pdp),
        )?;
        let _ = writeln!(r, "\n[[orientation]]");
        let _ = writeln!(r, "capture = {:?}", path.display().to_string());
        let _ = writeln!(r, "orientation_deg = {}", o.orientation_deg);
        let _ = writeln!(r, "clipped_records = {}", o.clipped_records);
        let _ = writeln!(r, "drift_corrected = {}", o.drift_corrected);
        let _ = writeln!(r, "residual_drift = {}", o.residual_drift);
        if let Some(d) = &o.drift {
            let sweep = o.pdp.num_tx as f64 * o.pdp.num_rx as f64 * 4e-6;
            let _ = writeln!(r, "drift_deg_per_sweep = {:.4}", d.slope_deg_per(sweep));
            let _ = writeln!(
                r,
                "drift_residual_rms_deg = {:.4}",
                d.residual_rms_rad.to_degrees()
            );
            let _ = writeln!(r, "drift_ambiguous = {}", d.ambiguous);
        }
    }
    write_text(&out.join("report.toml"), &with_config(r.clone(), cfg))?;
    Ok(r)
}

/// Link-budget worksheet.
pub fn budget(cfg: &RunConfig) -> CliResult<String> {
    let b = &cfg.budget;
    if b.averaging == 0 {
        return Err(CliError::Config("averaging must be at least 1".into()));
    }
    let single = link_budget(
        b.eirp_dbm,
        b.rx_gain_dbi,
        b.noise_figure_db,
        b.bandwidth_hz,
        b.required_snr_db,
    )?;
    let avg_gain = power_to_db(b.averaging as f64);
    let noise = sounder::units::noise_floor_dbm(b.bandwidth_hz, b.noise_figure_db);
    let mut r = String::new();
    let _ = writeln!(r, "eirp_dbm = {}", b.eirp_dbm);
    let _ = writeln!(r, "rx_gain_dbi = {}", b.rx_gain_dbi);
    let _ = writeln!(r, "thermal_density_dbm_hz = -174");
    let _ = writeln!(r, "bandwidth_hz = {:e}", b.bandwidth_hz);
    let _ = writeln!(r, "bandwidth_db_hz = {:.3}", power_to_db(b.bandwidth_hz));
    let _ = writeln!(r, "noise_figure_db = {}", b.noise_figure_db);
    let _ = writeln!(r, "noise_floor_dbm = {noise:.3}");
    let _ = writeln!(r, "required_snr_db = {}", b.required_snr_db);
    let _ = writeln!(r, "averaging = {}", b.averaging);
    let _ = writeln!(r, "averaging_gain_db = {avg_gain:.3}");
    let _ = writeln!(r, "max_path_loss_db = {:.3}", single + avg_gain);
    if let Some(out) = &cfg.out {
        ensure_dir(out)?;
        write_text(&out.join("budget.toml"), &with_config(r.clone(), cfg))?;
    }
    Ok(r)
}

/// Timing summary of the configured sweep.
pub fn sweep_describe(cfg: &RunConfig) -> CliResult<String> {
    let plan = pipeline::tone_plan(cfg)?;
    let w = sounder::waveform::SoundingWaveform::from_phases(
        plan.clone(),
        sounder::waveform::newman_phases(plan.num_tones),
        "newman",
    )?;
    let setup = pipeline::base_setup(cfg, w)?;
    Ok(setup.schedule()?.describe())
}
