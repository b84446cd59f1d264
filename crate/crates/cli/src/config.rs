//! Run configuration: a TOML file whose every default is the standard
//! 801-tone, 19 × 19 beam, 10-repetition setup.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sounder::capture::{CalibrationSpec, LinkSpec};
use sounder::channel::ScatterConfig;
use sounder::impairments::{ClockMode, RxFrontEnd};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub waveform: WaveformConfig,
    pub scenario: ScenarioConfig,
    pub schedule: ScheduleConfig,
    pub link: LinkSpec,
    pub clock: ClockConfig,
    pub front_end: RxFrontEnd,
    pub ripple: RippleConfig,
    pub capture: CaptureConfig,
    pub calibration: CalibrationSpec,
    pub processing: ProcessingConfig,
    pub budget: BudgetConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            out: None,
            waveform: WaveformConfig::default(),
            scenario: ScenarioConfig::default(),
            schedule: ScheduleConfig::default(),
            link: LinkSpec::default(),
            clock: ClockConfig::default(),
            front_end: RxFrontEnd::default(),
            ripple: RippleConfig::default(),
            capture: CaptureConfig::default(),
            calibration: CalibrationSpec::default(),
            processing: ProcessingConfig::default(),
            budget: BudgetConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveformConfig {
    pub tones: usize,
    pub tone_spacing_hz: f64,
    pub start_freq_hz: f64,
    pub oversampling: usize,
    /// Registered phase design.
    pub design: String,
    pub target_papr_db: f64,
    pub max_iters: usize,
    /// Use this descriptor instead of designing a waveform.
    pub descriptor: Option<PathBuf>,
    /// Further designs to report alongside the main one.
    pub compare: Vec<String>,
}

impl Default for WaveformConfig {
    fn default() -> Self {
        Self {
            tones: 801,
            tone_spacing_hz: 500e3,
            start_freq_hz: 50e6,
            oversampling: 4,
            design: "clip-refine".into(),
            target_papr_db: 0.5,
            max_iters: 5000,
            descriptor: None,
            compare: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Los,
    /// Paths listed in a channel spec file.
    Mpc,
    /// Random well-separated paths.
    Scatter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub distance_m: f64,
    pub mpc_file: Option<PathBuf>,
    pub scatter: ScatterConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            kind: ScenarioKind::Los,
            distance_m: 100.0,
            mpc_file: None,
            scatter: ScatterConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub repetitions: u32,
    pub guard_time_s: f64,
    pub anchor_policy: String,
    pub anchor_interval: usize,
    pub reference_pair: [u16; 2],
    /// `[azimuth index, elevation index]` per beam; the horizon row when
    /// absent.
    pub tx_beams: Option<Vec<[u16; 2]>>,
    pub rx_beams: Option<Vec<[u16; 2]>>,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            repetitions: 10,
            guard_time_s: 2e-6,
            anchor_policy: "repeated".into(),
            anchor_interval: 50,
            reference_pair: [0, 0],
            tx_beams: None,
            rx_beams: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClockConfig {
    pub mode: ClockMode,
    /// Overrides the mode's drift rate.
    pub drift_rate_rad_s: Option<f64>,
    pub drift_noise_rad: Option<f64>,
}

impl Default for ClockConfig {
    fn default() -> Self {
        Self {
            mode: ClockMode::Shared,
            drift_rate_rad_s: None,
            drift_noise_rad: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RippleConfig {
    pub enabled: bool,
    pub max_db: f64,
    pub max_phase_deg: f64,
    pub components: usize,
}

impl Default for RippleConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            max_db: 1.0,
            max_phase_deg: 5.0,
            components: 6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaptureConfig {
    pub orientations_deg: Vec<f64>,
    pub snapshots: u32,
    /// Snapshot start spacing; back-to-back when absent.
    pub snapshot_interval_s: Option<f64>,
    pub averaging: usize,
}

impl Default for CaptureConfig {
    fn default() -> Self {
        Self {
            orientations_deg: vec![0.0, 90.0, 180.0, 270.0],
            snapshots: 1,
            snapshot_interval_s: None,
            averaging: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProcessingConfig {
    pub window: String,
    pub drift_correction: bool,
    pub threshold: bool,
    pub threshold_db: f64,
    pub max_paths: usize,
}

impl Default for ProcessingConfig {
    fn default() -> Self {
        Self {
            window: "rect".into(),
            drift_correction: true,
            threshold: true,
            threshold_db: sounder::processing::DEFAULT_THRESHOLD_DB,
            max_paths: 10,
        }
    }
}

impl ProcessingConfig {
    pub fn threshold_margin(&self) -> Option<f64> {
        self.threshold.then_some(self.threshold_db)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetConfig {
    pub eirp_dbm: f64,
    pub rx_gain_dbi: f64,
    pub noise_figure_db: f64,
    pub bandwidth_hz: f64,
    /// SNR needed at the detector; 1 dB matches the quoted 159 dB.
    pub required_snr_db: f64,
    pub averaging: u32,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self {
            eirp_dbm: 57.0,
            rx_gain_dbi: 20.0,
            noise_figure_db: 5.0,
            bandwidth_hz: 400e6,
            required_snr_db: 1.0,
            averaging: 1,
        }
    }
}

impl RunConfig {
    pub fn from_text(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Loads a file; relative paths inside it are taken relative to the
    /// file's directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_text(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(q) = p {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        rebase(&mut cfg.scenario.mpc_file);
        rebase(&mut cfg.waveform.descriptor);
        rebase(&mut cfg.out);
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_standard_setup() {
        let c = RunConfig::default();
        assert_eq!(c.waveform.tones, 801);
        assert_eq!(c.waveform.tone_spacing_hz, 500e3);
        assert_eq!(c.schedule.repetitions, 10);
        assert_eq!(c.capture.orientations_deg, vec![0.0, 90.0, 180.0, 270.0]);
        assert_eq!(RunConfig::from_text("").unwrap(), c);
    }

    #[test]
    fn resolved_text_round_trips() {
        let mut c = RunConfig::default();
        c.clock.mode = ClockMode::FreeRunning;
        c.scenario.kind = ScenarioKind::Scatter;
        assert_eq!(RunConfig::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let e = RunConfig::from_text("[waveform]\ntonez = 3\n").unwrap_err();
        assert_eq!(e.exit_code(), crate::error::exit::CONFIG);
    }
}
