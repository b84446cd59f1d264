use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sounder::impairments::ClockMode;
use sounder::units::parse_quantity;
use sounder_cli::{commands, CliError, CliResult, RunConfig};

#[derive(Parser)]
#[command(
    name = "sounder",
    version,
    about = "Beam-switched mm-wave channel sounder simulator"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Design the sounding waveform and report its PAPR.
    Waveform {
        #[arg(long)]
        tones: Option<usize>,
        #[arg(long)]
        design: Option<String>,
        #[arg(long)]
        target_papr: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
        /// Report another design next to the main one, e.g. `zadoff-chu`.
        #[arg(long)]
        compare: Vec<String>,
        /// Also dump converter samples at this resolution.
        #[arg(long)]
        raw_bits: Option<u32>,
    },
    /// Simulate one capture per RX orientation and a calibration capture.
    Simulate {
        /// Line-of-sight distance, e.g. `100` or `100m`.
        #[arg(long, conflicts_with = "mpc")]
        distance: Option<String>,
        /// Channel spec file with explicit paths.
        #[arg(long)]
        mpc: Option<PathBuf>,
        /// Comma-separated RX orientations in degrees.
        #[arg(long, value_delimiter = ',')]
        orientations: Option<Vec<f64>>,
        #[arg(long, value_parser = parse_clock)]
        clock: Option<ClockMode>,
        #[arg(long)]
        snapshot_repeat: Option<u32>,
        /// Snapshot start spacing, e.g. `100ms`.
        #[arg(long)]
        interval: Option<String>,
        #[arg(long)]
        waveform: Option<PathBuf>,
    },
    /// Turn captures into delay profiles, angular spectra and path loss.
    Process {
        #[arg(required = true)]
        captures: Vec<PathBuf>,
        /// Calibration capture; `calibration.mmws` beside the first capture
        /// when absent.
        #[arg(long)]
        cal: Option<PathBuf>,
        #[arg(long)]
        no_drift_correction: bool,
        #[arg(long)]
        window: Option<String>,
        #[arg(long, conflicts_with = "no_threshold")]
        threshold_db: Option<f64>,
        #[arg(long)]
        no_threshold: bool,
    },
    /// Link-budget worksheet.
    Budget {
        #[arg(long)]
        eirp: Option<f64>,
        #[arg(long)]
        rx_gain: Option<f64>,
        #[arg(long)]
        nf: Option<f64>,
        /// e.g. `400MHz`
        #[arg(long)]
        bandwidth: Option<String>,
        #[arg(long)]
        required_snr: Option<f64>,
        #[arg(long)]
        averaging: Option<u32>,
    },
    /// Sweep schedule tools.
    Sweep {
        #[command(subcommand)]
        action: SweepAction,
    },
}

#[derive(Subcommand)]
enum SweepAction {
    /// Print the slot timing of the configured sweep.
    Describe {
        #[arg(long)]
        repetitions: Option<u32>,
        #[arg(long)]
        anchor_policy: Option<String>,
        #[arg(long)]
        guard: Option<String>,
    },
}

fn parse_clock(s: &str) -> Result<ClockMode, String> {
    match s {
        "shared" => Ok(ClockMode::Shared),
        "gps-disciplined" | "gps" => Ok(ClockMode::GpsDisciplined),
        "free-running" => Ok(ClockMode::FreeRunning),
        _ => Err(format!(
            "unknown clock mode `{s}` (shared, gps-disciplined, free-running)"
        )),
    }
}

fn quantity(text: &str, unit: &str) -> CliResult<f64> {
    parse_quantity(text, unit).map_err(|e| CliError::Config(e.to_string()))
}

fn run(cli: Cli) -> CliResult<String> {
    let mut cfg = match &cli.common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.common.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.common.out {
        cfg.out = Some(o);
    }
    match cli.command {
        Command::Waveform {
            tones,
            design,
            target_papr,
            max_iters,
            compare,
            raw_bits,
        } => {
            let w = &mut cfg.waveform;
            if let Some(t) = tones {
                w.tones = t;
            }
            if let Some(d) = design {
                w.design = d;
            }
            if let Some(t) = target_papr {
                w.target_papr_db = t;
            }
            if let Some(m) = max_iters {
                w.max_iters = m;
            }
            w.compare.extend(compare);
            echo(&cfg);
            commands::waveform(&cfg, raw_bits)
        }
        Command::Simulate {
            distance,
            mpc,
            orientations,
            clock,
            snapshot_repeat,
            interval,
            waveform,
        } => {
            if let Some(d) = distance {
                cfg.scenario.kind = sounder_cli::config::ScenarioKind::Los;
                cfg.scenario.distance_m = quantity(&d, "m")?;
            }
            if let Some(m) = mpc {
                cfg.scenario.kind = sounder_cli::config::ScenarioKind::Mpc;
                cfg.scenario.mpc_file = Some(m);
            }
            if let Some(o) = orientations {
                cfg.capture.orientations_deg = o;
            }
            if let Some(c) = clock {
                cfg.clock.mode = c;
            }
            if let Some(n) = snapshot_repeat {
                cfg.capture.snapshots = n;
            }
            if let Some(i) = interval {
                cfg.capture.snapshot_interval_s = Some(quantity(&i, "s")?);
            }
            if let Some(w) = waveform {
                cfg.waveform.descriptor = Some(w);
            }
            echo(&cfg);
            commands::simulate(&cfg)
        }
        Command::Process {
            captures,
            cal,
            no_drift_correction,
            window,
            threshold_db,
            no_threshold,
        } => {
            let p = &mut cfg.processing;
            if no_drift_correction {
                p.drift_correction = false;
            }
            if let Some(w) = window {
                p.window = w;
            }
            if let Some(t) = threshold_db {
                p.threshold = true;
                p.threshold_db = t;
            }
            if no_threshold {
                p.threshold = false;
            }
            echo(&cfg);
            commands::process(&cfg, &captures, cal.as_deref())
        }
        Command::Budget {
            eirp,
            rx_gain,
            nf,
            bandwidth,
            required_snr,
            averaging,
        } => {
            let b = &mut cfg.budget;
            if let Some(v) = eirp {
                b.eirp_dbm = v;
            }
            if let Some(v) = rx_gain {
                b.rx_gain_dbi = v;
            }
            if let Some(v) = nf {
                b.noise_figure_db = v;
            }
            if let Some(v) = bandwidth {
                b.bandwidth_hz = quantity(&v, "Hz")?;
            }
            if let Some(v) = required_snr {
                b.required_snr_db = v;
            }
            if let Some(v) = averaging {
                b.averaging = v;
            }
            echo(&cfg);
            commands::budget(&cfg)
        }
        Command::Sweep {
            action:
                SweepAction::Describe {
                    repetitions,
                    anchor_policy,
                    guard,
                },
        } => {
            if let Some(r) = repetitions {
                cfg.schedule.repetitions = r;
            }
            if let Some(a) = anchor_policy {
                cfg.schedule.anchor_policy = a;
            }
            if let Some(g) = guard {
                cfg.schedule.guard_time_s = quantity(&g, "s")?;
            }
            echo(&cfg);
            commands::sweep_describe(&cfg)
        }
    }
}

/// The resolved configuration goes to stderr so stdout stays parseable.
fn echo(cfg: &RunConfig) {
    eprintln!("# resolved configuration\n{}", cfg.to_text());
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(report) => {
            print!("{report}");
            ExitCode::from(sounder_cli::exit::SUCCESS as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
