//! Beam-switching schedule and trigger timing.
//!
//! All slot boundaries sit on the 10 MHz reference clock grid. A snapshot is
//! one contiguous run of slots started by a single counter start, so every
//! beam pair shares the same delay reference. The loop order is repetition
//! (outermost), TX beam, RX beam (innermost).

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::beams::{BeamGrid, BeamId};
use crate::registry::Registry;
use crate::{Error, Result};

pub const REF_CLOCK_HZ: f64 = 10e6;

/// Beam switching settles within this time, so guards may not be shorter.
pub const MIN_GUARD_S: f64 = 2e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TriggerModel {
    pub ref_clock_hz: f64,
    /// Alignment error of the local PPS to UTC.
    pub pps_offset_s: f64,
    /// Counter value at which the snapshot starts.
    pub counter_start: u64,
}

impl Default for TriggerModel {
    fn default() -> Self {
        Self {
            ref_clock_hz: REF_CLOCK_HZ,
            pps_offset_s: 0.0,
            counter_start: 0,
        }
    }
}

impl TriggerModel {
    pub fn tick(&self) -> f64 {
        1.0 / self.ref_clock_hz
    }

    /// Converts a duration to whole clock ticks, rejecting values off the grid.
    pub fn to_ticks(&self, seconds: f64, what: &str) -> Result<u64> {
        let t = seconds * self.ref_clock_hz;
        let r = t.round();
        if !(r >= 1.0) || (t - r).abs() > 1e-6 * r.max(1.0) {
            return Err(Error::invalid(format!(
                "{what} of {seconds:e} s is not a positive whole number of {} ns clock ticks",
                1e9 / self.ref_clock_hz
            )));
        }
        Ok(r as u64)
    }

    pub fn time_of(&self, ticks: u64) -> f64 {
        ticks as f64 / self.ref_clock_hz
    }
}

/// One beam-pair dwell. `tx` and `rx` index the schedule's beam lists.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub tx: u16,
    pub rx: u16,
    pub repetition: u32,
    /// Offset from the snapshot start in clock ticks.
    pub start_tick: u64,
    /// Reference-pair slot usable for drift estimation.
    pub anchor: bool,
    /// Extra slot added by the anchor policy; not part of the measurement
    /// repetitions.
    pub inserted: bool,
}

/// Placement of the reference beam pair used for drift tracking.
pub trait AnchorPolicy: Send + Sync {
    fn name(&self) -> &'static str;

    /// Takes the measurement slots in order (start ticks unset) and returns
    /// the final slot sequence with anchors marked or inserted.
    fn arrange(&self, slots: Vec<Slot>, reference: (u16, u16), interval: usize) -> Vec<Slot>;
}

/// The reference pair's own repetitions serve as anchors; no extra slots.
#[derive(Debug, Default)]
pub struct RepeatedPair;

impl AnchorPolicy for RepeatedPair {
    fn name(&self) -> &'static str {
        "repeated"
    }

    fn arrange(&self, mut slots: Vec<Slot>, reference: (u16, u16), _interval: usize) -> Vec<Slot> {
        for s in &mut slots {
            s.anchor = (s.tx, s.rx) == reference;
        }
        slots
    }
}

/// Revisits the reference pair before every `interval` measurement slots.
#[derive(Debug, Default)]
pub struct Revisit;

impl AnchorPolicy for Revisit {
    fn name(&self) -> &'static str {
        "revisit"
    }

    fn arrange(&self, slots: Vec<Slot>, reference: (u16, u16), interval: usize) -> Vec<Slot> {
        let interval = interval.max(1);
        let mut out = Vec::with_capacity(slots.len() + slots.len() / interval + 1);
        let mut count = 0;
        for (i, s) in slots.into_iter().enumerate() {
            if i % interval == 0 {
                out.push(Slot {
                    tx: reference.0,
                    rx: reference.1,
                    repetition: count,
                    start_tick: 0,
                    anchor: true,
                    inserted: true,
                });
                count += 1;
            }
            out.push(s);
        }
        out
    }
}

#[derive(Debug, Default)]
pub struct NoAnchors;

impl AnchorPolicy for NoAnchors {
    fn name(&self) -> &'static str {
        "none"
    }

    fn arrange(&self, slots: Vec<Slot>, _reference: (u16, u16), _interval: usize) -> Vec<Slot> {
        slots
    }
}

pub fn anchor_policies() -> Registry<dyn AnchorPolicy> {
    let mut r: Registry<dyn AnchorPolicy> = Registry::new("anchor policy");
    r.register("repeated", Arc::new(RepeatedPair))
        .register("revisit", Arc::new(Revisit))
        .register("none", Arc::new(NoAnchors));
    r
}

/// Serializable schedule parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleSpec {
    /// `[azimuth_index, elevation_index]` per beam.
    pub tx_beams: Vec<[u16; 2]>,
    pub rx_beams: Vec<[u16; 2]>,
    pub repetitions: u32,
    pub waveform_duration_s: f64,
    pub guard_time_s: f64,
    pub anchor_policy: String,
    /// Measurement slots between inserted anchors (`revisit` policy).
    pub anchor_interval: usize,
    /// Positions in `tx_beams` / `rx_beams` of the reference pair.
    pub reference_pair: [u16; 2],
    pub trigger: TriggerModel,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self::azimuth_sweep(&BeamGrid::default(), &BeamGrid::default())
    }
}

impl ScheduleSpec {
    /// Every horizon beam on both sides, 10 repetitions, 2 µs + 2 µs slots.
    pub fn azimuth_sweep(tx: &BeamGrid, rx: &BeamGrid) -> Self {
        let row = |g: &BeamGrid| {
            let e = g.horizon_index();
            (0..g.az_count).map(|a| [a, e]).collect()
        };
        Self {
            tx_beams: row(tx),
            rx_beams: row(rx),
            repetitions: 10,
            waveform_duration_s: 2e-6,
            guard_time_s: 2e-6,
            anchor_policy: "repeated".into(),
            anchor_interval: 50,
            reference_pair: [0, 0],
            trigger: TriggerModel::default(),
        }
    }

    pub fn build(&self) -> Result<SweepSchedule> {
        build_schedule(self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSchedule {
    pub spec: ScheduleSpec,
    pub tx_beams: Vec<BeamId>,
    pub rx_beams: Vec<BeamId>,
    pub slots: Vec<Slot>,
    pub waveform_ticks: u64,
    pub guard_ticks: u64,
}

pub fn build_schedule(spec: &ScheduleSpec) -> Result<SweepSchedule> {
    if spec.tx_beams.is_empty() || spec.rx_beams.is_empty() {
        return Err(Error::invalid(
            "schedule needs at least one TX and one RX beam",
        ));
    }
    if spec.tx_beams.len() > u16::MAX as usize || spec.rx_beams.len() > u16::MAX as usize {
        return Err(Error::invalid("too many beams in schedule"));
    }
    if spec.repetitions == 0 {
        return Err(Error::invalid("repetitions must be at least 1"));
    }
    if !(spec.trigger.ref_clock_hz > 0.0) || !spec.trigger.ref_clock_hz.is_finite() {
        return Err(Error::invalid("reference clock must be positive"));
    }
    if !(spec.guard_time_s >= MIN_GUARD_S * (1.0 - 1e-9)) {
        return Err(Error::GuardTooShort {
            guard_s: spec.guard_time_s,
            floor_s: MIN_GUARD_S,
        });
    }
    let waveform_ticks = spec
        .trigger
        .to_ticks(spec.waveform_duration_s, "waveform duration")?;
    let guard_ticks = spec.trigger.to_ticks(spec.guard_time_s, "guard time")?;
    let [rt, rr] = spec.reference_pair;
    if rt as usize >= spec.tx_beams.len() || rr as usize >= spec.rx_beams.len() {
        return Err(Error::invalid(format!(
            "reference pair ({rt}, {rr}) is outside the beam lists"
        )));
    }
    let policy = anchor_policies().get(&spec.anchor_policy)?;

    let (nt, nr) = (spec.tx_beams.len() as u16, spec.rx_beams.len() as u16);
    let mut slots = Vec::with_capacity(spec.repetitions as usize * nt as usize * nr as usize);
    for repetition in 0..spec.repetitions {
        for tx in 0..nt {
            for rx in 0..nr {
                slots.push(Slot {
                    tx,
                    rx,
                    repetition,
                    start_tick: 0,
                    anchor: false,
                    inserted: false,
                });
            }
        }
    }
    let mut slots = policy.arrange(slots, (rt, rr), spec.anchor_interval);
    let period = waveform_ticks + guard_ticks;
    for (i, s) in slots.iter_mut().enumerate() {
        s.start_tick = i as u64 * period;
    }
    let ids = |v: &[[u16; 2]]| v.iter().map(|&[a, e]| BeamId::new(a, e)).collect();
    Ok(SweepSchedule {
        spec: spec.clone(),
        tx_beams: ids(&spec.tx_beams),
        rx_beams: ids(&spec.rx_beams),
        slots,
        waveform_ticks,
        guard_ticks,
    })
}

impl SweepSchedule {
    pub fn slot_ticks(&self) -> u64 {
        self.waveform_ticks + self.guard_ticks
    }

    pub fn total_ticks(&self) -> u64 {
        self.slots.len() as u64 * self.slot_ticks()
    }

    /// Snapshot duration in seconds.
    pub fn duration(&self) -> f64 {
        self.spec.trigger.time_of(self.total_ticks())
    }

    /// Start time of slot `index` relative to the snapshot start.
    pub fn start_time(&self, index: usize) -> f64 {
        self.spec.trigger.time_of(self.slots[index].start_tick)
    }

    pub fn repetitions(&self) -> u32 {
        self.spec.repetitions
    }

    pub fn anchor_slots(&self) -> Vec<usize> {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.anchor)
            .map(|(i, _)| i)
            .collect()
    }

    /// Indices of the measurement (non-inserted) slots of one pair.
    pub fn pair_slots(&self, tx: u16, rx: u16) -> Vec<usize> {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.inserted && s.tx == tx && s.rx == rx)
            .map(|(i, _)| i)
            .collect()
    }

    /// Human-readable summary.
    pub fn describe(&self) -> String {
        let t = &self.spec.trigger;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "beams: {} TX x {} RX",
            self.tx_beams.len(),
            self.rx_beams.len()
        );
        let _ = writeln!(s, "repetitions: {}", self.spec.repetitions);
        let _ = writeln!(
            s,
            "slot: {} ns waveform + {} ns guard = {} ns",
            self.waveform_ticks as f64 * 1e9 / t.ref_clock_hz,
            self.guard_ticks as f64 * 1e9 / t.ref_clock_hz,
            self.slot_ticks() as f64 * 1e9 / t.ref_clock_hz
        );
        let anchors = self.anchor_slots();
        let inserted = self.slots.iter().filter(|s| s.inserted).count();
        let _ = writeln!(
            s,
            "slots: {} ({} inserted anchors), anchor policy `{}` with {} anchor slots",
            self.slots.len(),
            inserted,
            self.spec.anchor_policy,
            anchors.len()
        );
        let [rt, rr] = self.spec.reference_pair;
        let _ = writeln!(
            s,
            "reference pair: TX {:?} / RX {:?}",
            self.tx_beams[rt as usize], self.rx_beams[rr as usize]
        );
        let _ = writeln!(s, "loop order: repetition > TX beam > RX beam");
        let _ = writeln!(
            s,
            "snapshot duration: {} ticks = {:.6} ms at {} MHz",
            self.total_ticks(),
            self.duration() * 1e3,
            t.ref_clock_hz / 1e6
        );
        s
    }
}

/// Start times of `count` snapshots repeated every `interval_s`, on the
/// reference clock grid.
pub fn snapshot_cadence(
    schedule: &SweepSchedule,
    interval_s: f64,
    count: usize,
) -> Result<Vec<f64>> {
    let t = &schedule.spec.trigger;
    let ticks = (interval_s * t.ref_clock_hz).round();
    if !(ticks >= schedule.total_ticks() as f64) {
        return Err(Error::invalid(format!(
            "snapshot interval {interval_s:e} s is shorter than the {:e} s snapshot",
            schedule.duration()
        )));
    }
    let offset = (t.pps_offset_s * t.ref_clock_hz).round() as i64 + t.counter_start as i64;
    Ok((0..count as i64)
        .map(|n| (offset + n * ticks as i64) as f64 / t.ref_clock_hz)
        .collect())
}
