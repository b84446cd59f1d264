//! Simulated measurements: runs a sweep schedule against a channel through
//! the impaired hardware and emits one tone-domain record per slot, plus the
//! back-to-back calibration capture.
//!
//! Records hold received tone amplitudes in sqrt(mW) at the receiver input,
//! multiplied by the slot's AGC amplitude gain. Divide by
//! [`AgcGain::amplitude`] to undo the gain.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beams::{BeamCodebook, CodebookDescriptor, Side};
use crate::channel::{ChannelKernel, ChannelRealization, DEFAULT_CARRIER_HZ};
use crate::impairments::{
    drift_phase, mix_seed, AgcGain, ClockModel, HardwareRipple, Receiver, RxFrontEnd,
};
use crate::sweep::{snapshot_cadence, ScheduleSpec, SweepSchedule};
use crate::units::{db_to_amplitude, power_to_db};
use crate::waveform::{optimize_phases, SoundingWaveform, TonePlan};
use crate::{Error, Result};

/// Record flag bits.
pub mod flags {
    pub const CLIPPED: u16 = 1;
    pub const ANCHOR: u16 = 2;
    pub const CALIBRATION: u16 = 4;
    /// Slot added by the anchor policy, outside the measurement repetitions.
    pub const INSERTED: u16 = 8;
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaptureRecord {
    /// Index into the schedule's slot list (or calibration record index).
    pub slot: u32,
    pub snapshot: u32,
    pub agc: AgcGain,
    pub flags: u16,
    pub h: Vec<Complex64>,
}

impl CaptureRecord {
    pub fn has(&self, flag: u16) -> bool {
        self.flags & flag != 0
    }

    /// Record with the AGC gain removed.
    pub fn unwound(&self) -> Vec<Complex64> {
        let g = self.agc.amplitude();
        if g == 1.0 {
            self.h.clone()
        } else {
            self.h.iter().map(|c| c / g).collect()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkSpec {
    pub eirp_dbm: f64,
    pub carrier_freq_hz: f64,
}

impl Default for LinkSpec {
    fn default() -> Self {
        Self {
            eirp_dbm: 57.0,
            carrier_freq_hz: DEFAULT_CARRIER_HZ,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CalibrationMode {
    /// One back-to-back record shared by every beam pair.
    Shared,
    /// One record per beam pair including the beams' boresight phase.
    PerBeam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationSpec {
    pub mode: CalibrationMode,
    pub averaging: usize,
    /// Per-tone power reaching the receiver in the back-to-back setup.
    pub tone_power_dbm: f64,
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        Self {
            mode: CalibrationMode::Shared,
            averaging: 1000,
            tone_power_dbm: -50.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geo {
    pub latitude_deg: f64,
    pub longitude_deg: f64,
}

/// Everything needed to reproduce a simulated capture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSetup {
    #[serde(with = "crate::serde_seed")]
    pub seed: u64,
    #[serde(default)]
    pub rx_orientation_deg: f64,
    #[serde(default = "one")]
    pub snapshots: u32,
    /// Start-to-start spacing of snapshots; back-to-back when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_interval_s: Option<f64>,
    /// Independent noise captures averaged within each slot.
    #[serde(default = "one_usize")]
    pub averaging: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geo: Option<Geo>,
    #[serde(default)]
    pub link: LinkSpec,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub clock: ClockModel,
    #[serde(default)]
    pub front_end: RxFrontEnd,
    #[serde(default)]
    pub ripple: HardwareRipple,
    #[serde(default)]
    pub calibration: CalibrationSpec,
    pub tx_codebook: CodebookDescriptor,
    pub rx_codebook: CodebookDescriptor,
    pub waveform: SoundingWaveform,
}

fn one() -> u32 {
    1
}

fn one_usize() -> usize {
    1
}

impl SimulationSetup {
    /// Default configuration around the given waveform.
    pub fn new(waveform: SoundingWaveform, seed: u64) -> Self {
        Self {
            seed,
            rx_orientation_deg: 0.0,
            snapshots: 1,
            snapshot_interval_s: None,
            averaging: 1,
            geo: None,
            link: LinkSpec::default(),
            schedule: ScheduleSpec::default(),
            clock: ClockModel::shared(seed),
            front_end: RxFrontEnd::default(),
            ripple: HardwareRipple {
                seed,
                ..HardwareRipple::default()
            },
            calibration: CalibrationSpec::default(),
            tx_codebook: CodebookDescriptor::new(Side::Tx),
            rx_codebook: CodebookDescriptor::new(Side::Rx),
            waveform,
        }
    }

    /// Default configuration with a freshly optimized default waveform.
    pub fn table_one(seed: u64) -> Result<Self> {
        let w = optimize_phases(&TonePlan::table_one(), 0.5, 5000, 0)?;
        Ok(Self::new(w, seed))
    }

    pub fn plan(&self) -> &TonePlan {
        &self.waveform.plan
    }

    /// Conducted transmit power per tone: EIRP less the TX beam peak gain,
    /// split evenly over the tones.
    pub fn tx_tone_power_dbm(&self) -> f64 {
        self.link.eirp_dbm
            - self.tx_codebook.pattern.peak_gain_dbi
            - power_to_db(self.plan().num_tones as f64)
    }

    pub fn schedule(&self) -> Result<SweepSchedule> {
        self.schedule.build()
    }

    pub fn codebooks(&self) -> Result<(BeamCodebook, BeamCodebook)> {
        let tx = BeamCodebook::from_descriptor(&CodebookDescriptor {
            side: Side::Tx,
            ..self.tx_codebook.clone()
        })?;
        let rx = BeamCodebook::from_descriptor(&CodebookDescriptor {
            side: Side::Rx,
            ..self.rx_codebook.clone()
        })?
        .with_orientation(self.rx_orientation_deg);
        Ok((tx, rx))
    }

    /// Snapshot start times relative to the first snapshot.
    pub fn snapshot_starts(&self, schedule: &SweepSchedule) -> Result<Vec<f64>> {
        let interval = self
            .snapshot_interval_s
            .unwrap_or_else(|| schedule.duration());
        snapshot_cadence(schedule, interval, self.snapshots as usize)
    }

    pub fn validate(&self) -> Result<()> {
        self.plan().validate()?;
        if self.waveform.phases.len() != self.plan().num_tones {
            return Err(Error::invalid(
                "waveform phase count does not match its plan",
            ));
        }
        if self.snapshots == 0 || self.averaging == 0 || self.calibration.averaging == 0 {
            return Err(Error::invalid(
                "snapshots and averaging counts must be at least 1",
            ));
        }
        if !self.rx_orientation_deg.is_finite() || !self.link.eirp_dbm.is_finite() {
            return Err(Error::invalid("orientation and EIRP must be finite"));
        }
        self.front_end.validate()?;
        self.clock.validate()?;
        Ok(())
    }

    /// Codebook descriptors with steering tables filled in, for metadata.
    fn described(&self) -> Result<Self> {
        let (tx, rx) = self.codebooks()?;
        let mut out = self.clone();
        out.tx_codebook = tx.descriptor();
        out.rx_codebook = rx.descriptor();
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaptureKind {
    Capture,
    Calibration,
}

/// Self-contained description of a capture. Keys this version does not know
/// are kept in `extra` and written back unchanged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaptureMetadata {
    pub kind: CaptureKind,
    /// Channel spec text of a simulated capture; absent for field data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<String>,
    pub setup: SimulationSetup,
    #[serde(flatten)]
    pub extra: BTreeMap<String, toml::Value>,
}

impl CaptureMetadata {
    pub fn to_text(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Metadata(e.to_string()))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Metadata(e.to_string()))
    }

    pub fn channel(&self) -> Result<Option<ChannelRealization>> {
        self.channel
            .as_deref()
            .map(ChannelRealization::from_text)
            .transpose()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaptureSet {
    pub metadata: CaptureMetadata,
    pub records: Vec<CaptureRecord>,
}

impl CaptureSet {
    pub fn setup(&self) -> &SimulationSetup {
        &self.metadata.setup
    }

    pub fn plan(&self) -> &TonePlan {
        self.setup().plan()
    }

    /// Checks record shapes against the metadata.
    pub fn validate(&self) -> Result<()> {
        let n = self.plan().num_tones;
        if let Some(r) = self.records.iter().find(|r| r.h.len() != n) {
            return Err(Error::Inconsistent(format!(
                "record for slot {} has {} tones, plan has {n}",
                r.slot,
                r.h.len()
            )));
        }
        Ok(())
    }

    pub fn snapshot_records(&self, snapshot: u32) -> Vec<&CaptureRecord> {
        self.records
            .iter()
            .filter(|r| r.snapshot == snapshot)
            .collect()
    }

    pub fn clipped_count(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.has(flags::CLIPPED))
            .count()
    }
}

/// Hardware assembled from a setup.
struct Rig {
    schedule: SweepSchedule,
    tx: BeamCodebook,
    rx: BeamCodebook,
    receiver: Receiver,
    /// Ripple times transmit-converter response.
    hardware: Vec<Complex64>,
}

impl Rig {
    fn new(setup: &SimulationSetup) -> Result<Self> {
        setup.validate()?;
        let schedule = setup.schedule()?;
        let (tx, rx) = setup.codebooks()?;
        for (&id, cb) in schedule
            .tx_beams
            .iter()
            .map(|id| (id, &tx))
            .chain(schedule.rx_beams.iter().map(|id| (id, &rx)))
        {
            cb.beam(id)?;
        }
        let receiver = Receiver::new(&setup.front_end, setup.plan(), setup.waveform.tones())?;
        let awg = setup
            .waveform
            .converter_response(setup.front_end.awg_bits)?;
        let hardware = setup
            .ripple
            .response(setup.plan().num_tones)
            .into_iter()
            .zip(awg)
            .map(|(r, a)| r * a)
            .collect();
        Ok(Self {
            schedule,
            tx,
            rx,
            receiver,
            hardware,
        })
    }
}

const CALIBRATION_STREAM: u64 = 0xCA11_B000_0000_0000;

/// Runs every snapshot of `setup` against `channel`.
///
/// Per slot: beam-pair response at the slot time, times hardware response
/// and transmit amplitude, through the receiver, then rotated by the
/// TX/RX reference phase. The rotation is applied to the digitized record so
/// that runs differing only in clock model see identical noise.
pub fn simulate_capture(
    setup: &SimulationSetup,
    channel: &ChannelRealization,
) -> Result<CaptureSet> {
    let rig = Rig::new(setup)?;
    let plan = setup.plan();
    if (channel.carrier_freq_hz - setup.link.carrier_freq_hz).abs()
        > 1e-6 * setup.link.carrier_freq_hz
    {
        return Err(Error::Inconsistent(format!(
            "channel carrier {} Hz differs from link carrier {} Hz",
            channel.carrier_freq_hz, setup.link.carrier_freq_hz
        )));
    }
    let kernel = ChannelKernel::new(channel, plan)?;
    let amp = db_to_amplitude(setup.tx_tone_power_dbm());
    let starts = setup.snapshot_starts(&rig.schedule)?;
    let trigger = rig.schedule.spec.trigger;
    let n = plan.num_tones;

    let mut records = Vec::with_capacity(starts.len() * rig.schedule.slots.len());
    for (snap, &t0) in starts.iter().enumerate() {
        let clock = setup.clock.lock(snap as u64);
        let batch: Vec<Result<CaptureRecord>> = rig
            .schedule
            .slots
            .par_iter()
            .enumerate()
            .map(|(i, slot)| {
                let t = t0 + trigger.time_of(slot.start_tick);
                let tx = &rig
                    .tx
                    .beam(rig.schedule.tx_beams[slot.tx as usize])?
                    .pattern;
                let rx = &rig
                    .rx
                    .beam(rig.schedule.rx_beams[slot.rx as usize])?
                    .pattern;
                let w = kernel.path_weights(tx.as_ref(), rx.as_ref(), setup.rx_orientation_deg, t);
                let mut h = vec![Complex64::new(0.0, 0.0); n];
                if kernel.num_tones() > 0 {
                    kernel.response_into(&w, &mut h);
                }
                for (v, hw) in h.iter_mut().zip(&rig.hardware) {
                    *v = *v * hw * amp;
                }
                let seed = mix_seed(setup.seed, ((snap as u64) << 32) | i as u64);
                let out = rig.receiver.apply(&h, setup.averaging, seed)?;
                let rot = Complex64::from_polar(1.0, drift_phase(&clock, t));
                let mut f = 0;
                if out.clipped {
                    f |= flags::CLIPPED;
                }
                if slot.anchor {
                    f |= flags::ANCHOR;
                }
                if slot.inserted {
                    f |= flags::INSERTED;
                }
                Ok(CaptureRecord {
                    slot: i as u32,
                    snapshot: snap as u32,
                    agc: out.agc,
                    flags: f,
                    h: out.record.into_iter().map(|v| v * rot).collect(),
                })
            })
            .collect();
        for r in batch {
            records.push(r?);
        }
    }
    Ok(CaptureSet {
        metadata: CaptureMetadata {
            kind: CaptureKind::Capture,
            channel: Some(channel.to_text()),
            setup: setup.described()?,
            extra: BTreeMap::new(),
        },
        records,
    })
}

/// Back-to-back calibration: the hardware response at the calibration tone
/// power, heavily averaged. In per-beam mode there is one record per beam
/// pair of the schedule, in order TX-major, carrying the unit-magnitude
/// boresight phase of the two beams.
pub fn simulate_calibration(setup: &SimulationSetup) -> Result<CaptureSet> {
    let rig = Rig::new(setup)?;
    let amp = db_to_amplitude(setup.calibration.tone_power_dbm);
    let base: Vec<Complex64> = rig.hardware.iter().map(|h| h * amp).collect();
    let factors: Vec<Complex64> = match setup.calibration.mode {
        CalibrationMode::Shared => vec![Complex64::new(1.0, 0.0)],
        CalibrationMode::PerBeam => {
            let mut v = Vec::new();
            for &t in &rig.schedule.tx_beams {
                for &r in &rig.schedule.rx_beams {
                    let bt = rig.tx.beam(t)?;
                    let br = rig.rx.beam(r)?;
                    let g = bt
                        .pattern
                        .gain(bt.steering.azimuth_deg, bt.steering.elevation_deg)
                        * br.pattern
                            .gain(br.steering.azimuth_deg, br.steering.elevation_deg);
                    v.push(if g.norm() > 0.0 {
                        g / g.norm()
                    } else {
                        Complex64::new(1.0, 0.0)
                    });
                }
            }
            v
        }
    };
    let records = factors
        .par_iter()
        .enumerate()
        .map(|(i, &f)| {
            let h: Vec<Complex64> = base.iter().map(|b| b * f).collect();
            let out = rig.receiver.apply(
                &h,
                setup.calibration.averaging,
                mix_seed(setup.seed, CALIBRATION_STREAM | i as u64),
            )?;
            let mut fl = flags::CALIBRATION;
            if out.clipped {
                fl |= flags::CLIPPED;
            }
            Ok(CaptureRecord {
                slot: i as u32,
                snapshot: 0,
                agc: out.agc,
                flags: fl,
                h: out.record,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CaptureSet {
        metadata: CaptureMetadata {
            kind: CaptureKind::Calibration,
            channel: None,
            setup: setup.described()?,
            extra: BTreeMap::new(),
        },
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{beam_pair_response, los_channel};
    use crate::impairments::ClockMode;
    use crate::waveform::newman_phases;

    fn small_setup(tones: usize, beams: usize, reps: u32) -> SimulationSetup {
        let plan = TonePlan::new(tones, 500e3, 50e6).unwrap();
        let w = SoundingWaveform::from_phases(plan, newman_phases(tones), "newman").unwrap();
        let mut s = SimulationSetup::new(w, 5);
        s.schedule.tx_beams = (0..beams as u16).map(|a| [7 + a, 6]).collect();
        s.schedule.rx_beams = (0..beams as u16).map(|a| [7 + a, 6]).collect();
        s.schedule.repetitions = reps;
        s
    }

    #[test]
    fn ideal_chain_reproduces_the_analytic_response() {
        let mut s = small_setup(801, 3, 1);
        s.front_end = RxFrontEnd::ideal();
        s.ripple = HardwareRipple::off();
        s.clock.random_lock_phase = false;
        let ch = los_channel(100.0, DEFAULT_CARRIER_HZ).unwrap();
        let cap = simulate_capture(&s, &ch).unwrap();
        assert_eq!(cap.records.len(), 9);
        let (tx, rx) = s.codebooks().unwrap();
        let boresight = crate::beams::BeamId::new(9, 6);
        let analytic = beam_pair_response(
            &ch,
            tx.beam(boresight).unwrap().pattern.as_ref(),
            rx.beam(boresight).unwrap().pattern.as_ref(),
            0.0,
            s.plan(),
            cap.setup().schedule().unwrap().start_time(8),
        )
        .unwrap();
        let amp = db_to_amplitude(s.tx_tone_power_dbm());
        let rec = &cap.records[8];
        assert_eq!(rec.agc, AgcGain(0));
        for (r, a) in rec.h.iter().zip(&analytic) {
            assert_eq!(*r, a * amp);
        }
    }

    #[test]
    fn identical_seeds_give_identical_captures() {
        let s = small_setup(64, 2, 2);
        let ch = los_channel(20.0, DEFAULT_CARRIER_HZ).unwrap();
        let a = simulate_capture(&s, &ch).unwrap();
        let b = simulate_capture(&s, &ch).unwrap();
        assert_eq!(a, b);
        let mut other = s.clone();
        other.seed = 6;
        assert_ne!(simulate_capture(&other, &ch).unwrap().records, a.records);
    }

    #[test]
    fn free_running_anchor_phase_advances_four_degrees_per_sweep() {
        let mut s = small_setup(801, 19, 10);
        s.schedule = ScheduleSpec::default();
        s.front_end = RxFrontEnd::ideal();
        s.clock = ClockModel {
            drift_noise_rms_rad: 0.0,
            ..ClockModel::with_mode(ClockMode::FreeRunning, 3)
        };
        let ch = los_channel(50.0, DEFAULT_CARRIER_HZ).unwrap();
        let cap = simulate_capture(&s, &ch).unwrap();
        let anchors: Vec<&CaptureRecord> = cap
            .records
            .iter()
            .filter(|r| r.has(flags::ANCHOR))
            .collect();
        assert_eq!(anchors.len(), 10);
        let c = 400;
        for w in anchors.windows(2) {
            let step = (w[1].h[c] / w[0].h[c]).arg().to_degrees();
            assert!((step - 4.0).abs() < 1e-6, "{step}");
        }
    }

    #[test]
    fn calibration_modes() {
        let mut s = small_setup(64, 3, 1);
        s.front_end = RxFrontEnd::ideal();
        s.ripple = HardwareRipple::off();
        let cal = simulate_calibration(&s).unwrap();
        assert_eq!(cal.records.len(), 1);
        let amp = db_to_amplitude(-50.0);
        assert!(cal.records[0]
            .h
            .iter()
            .all(|c| (c / amp - 1.0).norm() < 1e-15));
        s.calibration.mode = CalibrationMode::PerBeam;
        let per = simulate_calibration(&s).unwrap();
        assert_eq!(per.records.len(), 9);
        assert!(per.records.iter().all(|r| r.has(flags::CALIBRATION)));
    }

    #[test]
    fn metadata_text_round_trip_keeps_unknown_keys() {
        let s = small_setup(16, 2, 1);
        let ch = los_channel(10.0, DEFAULT_CARRIER_HZ).unwrap();
        let mut cap = simulate_capture(&s, &ch).unwrap();
        cap.metadata
            .extra
            .insert("operator".into(), toml::Value::String("field team".into()));
        let mut nested = toml::map::Map::new();
        nested.insert("humidity".into(), toml::Value::Float(0.4));
        cap.metadata
            .extra
            .insert("weather".into(), toml::Value::Table(nested));
        let text = cap.metadata.to_text().unwrap();
        let back = CaptureMetadata::from_text(&text).unwrap();
        assert_eq!(back, cap.metadata);
        assert_eq!(back.channel().unwrap().unwrap(), ch);
    }

    #[test]
    fn mismatched_carrier_is_rejected() {
        let s = small_setup(16, 1, 1);
        let ch = los_channel(10.0, 60e9).unwrap();
        assert!(matches!(
            simulate_capture(&s, &ch),
            Err(Error::Inconsistent(_))
        ));
    }
}
