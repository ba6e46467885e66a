//! Box-step sequence, leading signals and the hand-deflection stop rule.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Vector2, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::HandId;
use crate::taskspace::{AxisMask, Wrench};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Foot {
    Left,
    Right,
}

impl Foot {
    /// Hand on the same side as the foot.
    pub fn hand(self) -> HandId {
        match self {
            Foot::Left => HandId::LEFT,
            Foot::Right => HandId::RIGHT,
        }
    }

    /// +1 for left, −1 for right (base-frame y sign of that side).
    pub fn side(self) -> f64 {
        match self {
            Foot::Left => 1.0,
            Foot::Right => -1.0,
        }
    }
}

impl fmt::Display for Foot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Foot::Left => "left",
            Foot::Right => "right",
        })
    }
}

/// One entry of the step pattern, in units of the configured step distances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepPattern {
    pub foot: Foot,
    /// −1, 0 or +1 forward step distances.
    pub forward: i8,
    /// −1, 0 or +1 lateral step distances (+1 = left).
    pub lateral: i8,
    /// Spoken description of what the follower should do.
    pub description: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChoreographyConfig {
    /// Forward/backward foot travel (m).
    pub forward_step: f64,
    /// Left/right foot travel (m).
    pub lateral_step: f64,
    pub step_duration: f64,
    pub pattern: Vec<StepPattern>,
}

fn pattern(foot: Foot, forward: i8, lateral: i8, description: &str) -> StepPattern {
    StepPattern {
        foot,
        forward,
        lateral,
        description: description.to_string(),
    }
}

impl Default for ChoreographyConfig {
    fn default() -> Self {
        // Leader box: forward, diagonal forward-right, close, back,
        // diagonal back-left, close. The follower mirrors each step.
        ChoreographyConfig {
            forward_step: 0.13,
            lateral_step: 0.145,
            step_duration: 1.0,
            pattern: vec![
                pattern(Foot::Left, 1, 0, "Step back"),
                pattern(Foot::Right, 1, -1, "Step side"),
                pattern(Foot::Left, 0, -1, "Step close"),
                pattern(Foot::Right, -1, 0, "Step forward"),
                pattern(Foot::Left, -1, 1, "Step side"),
                pattern(Foot::Right, 0, 1, "Step close"),
            ],
        }
    }
}

impl ChoreographyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.forward_step.is_finite() && self.forward_step > 0.0) {
            return Err(Error::config("forward_step must be > 0"));
        }
        if !(self.lateral_step.is_finite() && self.lateral_step > 0.0) {
            return Err(Error::config("lateral_step must be > 0"));
        }
        if !(self.step_duration.is_finite() && self.step_duration > 0.0) {
            return Err(Error::config("step_duration must be > 0"));
        }
        if self.pattern.is_empty() {
            return Err(Error::config("step pattern is empty"));
        }
        for (i, p) in self.pattern.iter().enumerate() {
            if !(-1..=1).contains(&p.forward) || !(-1..=1).contains(&p.lateral) {
                return Err(Error::config(format!("step {}: units must be -1, 0 or 1", i + 1)));
            }
            if p.forward == 0 && p.lateral == 0 {
                return Err(Error::config(format!("step {} has no displacement", i + 1)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSpec {
    /// 1-based position in the cycle.
    pub index: usize,
    pub foot: Foot,
    /// Ground-plane displacement (m), x forward, y left.
    pub displacement: Vector2<f64>,
    pub duration: f64,
    pub description: String,
}

impl StepSpec {
    /// Unit ground-plane direction lifted to 3-D.
    pub fn direction(&self) -> Vector3<f64> {
        let d = self.displacement.normalize();
        Vector3::new(d.x, d.y, 0.0)
    }
}

/// The leader's step cycle.
pub fn step_sequence(config: &ChoreographyConfig) -> Result<Vec<StepSpec>> {
    config.validate()?;
    Ok(config
        .pattern
        .iter()
        .enumerate()
        .map(|(i, p)| StepSpec {
            index: i + 1,
            foot: p.foot,
            displacement: Vector2::new(
                f64::from(p.forward) * config.forward_step,
                f64::from(p.lateral) * config.lateral_step,
            ),
            duration: config.step_duration,
            description: p.description.clone(),
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Signal {
    /// No deliberate cue.
    NS,
    /// Step count.
    SC,
    /// Step description.
    SD,
    /// Hand wrench.
    HW,
    /// Hand displacement.
    HD,
    /// Torso rotation.
    TR,
}

impl FromStr for Signal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "NS" => Ok(Signal::NS),
            "HW" => Ok(Signal::HW),
            "HD" => Ok(Signal::HD),
            "TR" => Ok(Signal::TR),
            "SC" => Ok(Signal::SC),
            "SD" => Ok(Signal::SD),
            other => Err(Error::config(format!("unknown leading signal `{other}`"))),
        }
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A validated combination of signals, written like `HW+HD+TR`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SignalSet(BTreeSet<Signal>);

impl SignalSet {
    pub fn new(signals: impl IntoIterator<Item = Signal>) -> Result<Self> {
        let set: BTreeSet<Signal> = signals.into_iter().collect();
        if set.is_empty() {
            return Err(Error::config("empty signal set (use NS)"));
        }
        if set.contains(&Signal::NS) && set.len() > 1 {
            return Err(Error::config("NS cannot be combined with other signals"));
        }
        Ok(SignalSet(set))
    }

    pub fn none() -> Self {
        SignalSet(BTreeSet::from([Signal::NS]))
    }

    pub fn contains(&self, s: Signal) -> bool {
        self.0.contains(&s)
    }

    pub fn iter(&self) -> impl Iterator<Item = Signal> + '_ {
        self.0.iter().copied()
    }
}

impl FromStr for SignalSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SignalSet::new(s.split('+').map(str::parse).collect::<Result<Vec<_>>>()?)
    }
}

impl fmt::Display for SignalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(Signal::to_string).collect();
        f.write_str(&parts.join("+"))
    }
}

impl Serialize for SignalSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SignalSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Signal magnitudes and timing shared by every step of a trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignalParams {
    /// Applied hand force (virtual N).
    pub hand_wrench: f64,
    /// Hand setpoint displacement (m).
    pub hand_displacement: f64,
    /// Torso yaw offset (rad).
    pub torso_rotation: f64,
    /// Rise time and fall time of the haptic/visual envelope (s).
    pub ramp_duration: f64,
    /// How long before a step's onset its utterance is spoken (s).
    pub audio_lead_time: f64,
}

impl Default for SignalParams {
    fn default() -> Self {
        SignalParams {
            hand_wrench: 1.5,
            hand_displacement: 0.05,
            torso_rotation: 0.2,
            ramp_duration: 0.5,
            audio_lead_time: 0.3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeadingSignalSchedule {
    pub signals: SignalSet,
    pub params: SignalParams,
}

impl LeadingSignalSchedule {
    pub fn new(signals: SignalSet, params: SignalParams) -> Result<Self> {
        let p = &params;
        if [p.hand_wrench, p.hand_displacement, p.torso_rotation]
            .iter()
            .any(|m| !(m.is_finite() && *m >= 0.0))
        {
            return Err(Error::config("signal magnitudes must be finite and >= 0"));
        }
        if !(p.ramp_duration > 0.0 && p.ramp_duration.is_finite()) {
            return Err(Error::config("ramp_duration must be > 0"));
        }
        if !(p.audio_lead_time >= 0.0 && p.audio_lead_time.is_finite()) {
            return Err(Error::config("audio_lead_time must be >= 0"));
        }
        Ok(LeadingSignalSchedule { signals, params })
    }

    /// Checks that the envelope fits the step so it peaks at full magnitude
    /// and returns to zero by the step's end.
    pub fn check_step(&self, step: &StepSpec) -> Result<()> {
        if 2.0 * self.params.ramp_duration > step.duration + 1e-12 {
            return Err(Error::config(format!(
                "ramp_duration {} does not fit twice in a {} s step",
                self.params.ramp_duration, step.duration
            )));
        }
        Ok(())
    }
}

/// Spoken cue queued ahead of a step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub text: String,
    /// Emission time relative to the step's onset (negative = before).
    pub offset: f64,
}

/// Everything the leading signals ask of the controller at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalAction {
    pub applied: Vec<Wrench>,
    /// Axes per hand on which impedance should yield to the applied wrench.
    pub applied_axes: Vec<AxisMask>,
    pub setpoint_offset: Vec<Vector3<f64>>,
    pub torso_yaw_offset: f64,
    pub utterances: Vec<Utterance>,
}

impl SignalAction {
    pub fn zero(hand_count: usize) -> Self {
        SignalAction {
            applied: vec![Wrench::zero(); hand_count],
            applied_axes: vec![[false; 6]; hand_count],
            setpoint_offset: vec![Vector3::zeros(); hand_count],
            torso_yaw_offset: 0.0,
            utterances: Vec::new(),
        }
    }
}

/// Triangular/trapezoidal envelope: 0 at both ends of the step, 1 between
/// the rise and the fall.
pub fn envelope(t_in_step: f64, ramp: f64, duration: f64) -> f64 {
    let edge = t_in_step.min(duration - t_in_step).max(0.0);
    (edge / ramp).min(1.0)
}

/// Yaw sign that moves the stepping-side shoulder along the step. A
/// shoulder at lateral position `side` moves by `−side·yaw` in x, so a
/// forward step on the left needs negative yaw. Pure lateral steps turn
/// toward the stepping side.
pub fn torso_yaw_sign(step: &StepSpec) -> f64 {
    let dx = step.displacement.x;
    if dx != 0.0 {
        -step.foot.side() * dx.signum()
    } else {
        step.foot.side()
    }
}

/// Spoken cues for a step under the active signal set.
pub fn utterances(schedule: &LeadingSignalSchedule, step: &StepSpec) -> Vec<Utterance> {
    let offset = -schedule.params.audio_lead_time;
    let mut out = Vec::new();
    if schedule.signals.contains(Signal::SC) {
        out.push(Utterance {
            text: step.index.to_string(),
            offset,
        });
    }
    if schedule.signals.contains(Signal::SD) {
        out.push(Utterance {
            text: step.description.clone(),
            offset,
        });
    }
    out
}

/// Signal outputs `t_in_step` seconds into `step`, for a robot with
/// `hand_count` hands.
pub fn signal_actions(
    schedule: &LeadingSignalSchedule,
    step: &StepSpec,
    t_in_step: f64,
    hand_count: usize,
) -> Result<SignalAction> {
    if !(0.0..=step.duration + 1e-9).contains(&t_in_step) {
        return Err(Error::input(format!(
            "time {t_in_step} outside step of duration {}",
            step.duration
        )));
    }
    let mut action = SignalAction::zero(hand_count);
    action.utterances = utterances(schedule, step);
    if schedule.signals.contains(Signal::NS) {
        return Ok(action);
    }
    let p = &schedule.params;
    let env = envelope(t_in_step, p.ramp_duration, step.duration);
    let dir = step.direction();
    let hand = step.foot.hand().index();
    if hand >= hand_count {
        return Err(Error::config(format!("stepping hand {hand} not present")));
    }
    if schedule.signals.contains(Signal::HW) {
        action.applied[hand] = Wrench::from_force(dir * (p.hand_wrench * env));
        // Impedance yields on the wrench axes while the wrench rises and is
        // faded back in while it falls.
        if t_in_step < p.ramp_duration {
            let d = Vector6::new(dir.x, dir.y, dir.z, 0.0, 0.0, 0.0);
            action.applied_axes[hand] = std::array::from_fn(|i| d[i] != 0.0);
        }
    }
    if schedule.signals.contains(Signal::HD) {
        action.setpoint_offset[hand] = dir * (p.hand_displacement * env);
    }
    if schedule.signals.contains(Signal::TR) {
        action.torso_yaw_offset = torso_yaw_sign(step) * p.torso_rotation * env;
    }
    Ok(action)
}

/// Latching hand-deflection stop rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopMonitor {
    /// Threshold on the hand position-error norm (m).
    pub threshold: f64,
    pub stopped: bool,
    pub trigger: Option<StopTrigger>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopTrigger {
    pub hand: HandId,
    pub time: f64,
    pub deflection: f64,
}

impl StopMonitor {
    pub fn new(threshold: f64) -> Self {
        StopMonitor {
            threshold,
            stopped: false,
            trigger: None,
        }
    }
}

impl Default for StopMonitor {
    fn default() -> Self {
        StopMonitor::new(0.15)
    }
}

/// Latches when any hand's position error (orientation ignored) exceeds
/// the threshold.
pub fn check_stop(monitor: &StopMonitor, pose_errors: &[Vector6<f64>], time: f64) -> StopMonitor {
    if monitor.stopped {
        return monitor.clone();
    }
    let worst = pose_errors
        .iter()
        .enumerate()
        .map(|(i, e)| (i, e.fixed_rows::<3>(0).norm()))
        .filter(|(_, d)| *d > monitor.threshold)
        .max_by(|a, b| a.1.total_cmp(&b.1));
    match worst {
        Some((hand, deflection)) => StopMonitor {
            threshold: monitor.threshold,
            stopped: true,
            trigger: Some(StopTrigger {
                hand: HandId(hand),
                time,
                deflection,
            }),
        },
        None => monitor.clone(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChoreoEvent {
    StepOnset {
        time: f64,
        index: usize,
        foot: Foot,
    },
    FootPlaced {
        time: f64,
        index: usize,
        foot: Foot,
        base: [f64; 2],
    },
    /// A step is `lead` seconds away; utterances for it are due now.
    Cue {
        time: f64,
        index: usize,
        onset: f64,
    },
}

/// Steps through the cycle and carries the base frame along kinematically.
#[derive(Clone, Debug)]
pub struct Sequencer {
    steps: Vec<StepSpec>,
    lead_time: f64,
    horizon: f64,
    clock: f64,
    current: usize,
    in_step: f64,
    step_start_base: Vector2<f64>,
    base: Vector2<f64>,
    completed: usize,
    next_cue: Option<(f64, usize)>,
}

/// Completion tolerance on accumulated step time.
const STEP_EPS: f64 = 1e-9;

fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

impl Sequencer {
    /// `horizon` is the trial length: steps starting at or after it are
    /// never cued or started.
    pub fn new(steps: Vec<StepSpec>, lead_time: f64, horizon: f64) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::config("empty step sequence"));
        }
        Ok(Sequencer {
            steps,
            lead_time,
            horizon,
            clock: 0.0,
            current: 0,
            in_step: 0.0,
            step_start_base: Vector2::zeros(),
            base: Vector2::zeros(),
            completed: 0,
            next_cue: None,
        })
    }

    /// Events at time zero: the first step's onset and any pre-roll cue.
    pub fn start(&mut self) -> Vec<ChoreoEvent> {
        let mut events = Vec::new();
        if self.horizon <= 0.0 {
            return events;
        }
        let first = &self.steps[0];
        events.push(ChoreoEvent::Cue {
            time: -self.lead_time,
            index: first.index,
            onset: 0.0,
        });
        events.push(ChoreoEvent::StepOnset {
            time: 0.0,
            index: first.index,
            foot: first.foot,
        });
        self.schedule_next_cue();
        events
    }

    fn schedule_next_cue(&mut self) {
        let onset = self.clock - self.in_step + self.steps[self.current].duration;
        let next = (self.current + 1) % self.steps.len();
        self.next_cue = (onset < self.horizon - STEP_EPS).then_some((onset, next));
    }

    pub fn current_step(&self) -> Option<&StepSpec> {
        (self.clock < self.horizon - STEP_EPS).then(|| &self.steps[self.current])
    }

    pub fn time_in_step(&self) -> f64 {
        self.in_step
    }

    pub fn base_position(&self) -> Vector2<f64> {
        self.base
    }

    pub fn completed_steps(&self) -> usize {
        self.completed
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    /// Moves the choreography forward by `dt` unless stopped.
    pub fn advance(&mut self, dt: f64, stopped: bool) -> Vec<ChoreoEvent> {
        debug_assert!(dt > 0.0);
        let mut events = Vec::new();
        if stopped || self.clock >= self.horizon - STEP_EPS {
            return events;
        }
        self.clock += dt;
        self.in_step += dt;
        if let Some((onset, next)) = self.next_cue {
            let cue_time = onset - self.lead_time;
            if self.clock >= cue_time - STEP_EPS {
                events.push(ChoreoEvent::Cue {
                    time: cue_time,
                    index: self.steps[next].index,
                    onset,
                });
                self.next_cue = None;
            }
        }
        let step = &self.steps[self.current];
        if self.in_step >= step.duration - STEP_EPS {
            let onset = self.clock - self.in_step + step.duration;
            self.base = self.step_start_base + step.displacement;
            self.step_start_base = self.base;
            self.completed += 1;
            events.push(ChoreoEvent::FootPlaced {
                time: onset,
                index: step.index,
                foot: step.foot,
                base: [self.base.x, self.base.y],
            });
            self.in_step -= step.duration;
            if self.in_step.abs() < STEP_EPS {
                self.in_step = 0.0;
            }
            self.current = (self.current + 1) % self.steps.len();
            if onset < self.horizon - STEP_EPS {
                let next = &self.steps[self.current];
                events.push(ChoreoEvent::StepOnset {
                    time: onset,
                    index: next.index,
                    foot: next.foot,
                });
                self.schedule_next_cue();
            }
        } else {
            let s = smoothstep(self.in_step / step.duration);
            self.base = self.step_start_base + step.displacement * s;
        }
        events
    }
}
