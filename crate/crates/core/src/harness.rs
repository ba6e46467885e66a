//! Fixed-timestep trial loop and block runner.
//!
//! Each tick runs, in order: partner wrench, task-space fade and wrench,
//! joint-space projection/blend/command/integration, stop check and
//! choreography advance, then logging. A trial runs on one thread and is
//! bit-deterministic for a given configuration; the trials of a block may
//! run concurrently.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{Vector2, Vector3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::choreography::{
    check_stop, signal_actions, step_sequence, utterances, ChoreoEvent, LeadingSignalSchedule, Sequencer, SignalAction,
    SignalSet, StopMonitor,
};
use crate::config::{ProtocolConfig, TrialConfig};
use crate::controller::UpperBodyController;
use crate::error::{Error, Result};
use crate::jointspace::JointGains;
use crate::partner::{measured_wrench, step_partner, PartnerState};
use crate::taskspace::Wrench;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandRecord {
    pub position: [f64; 3],
    /// Quaternion (w, x, y, z).
    pub orientation: [f64; 4],
    pub setpoint: [f64; 3],
    pub setpoint_orientation: [f64; 4],
    pub pose_error: [f64; 6],
    pub measured: [f64; 6],
    pub applied: [f64; 6],
    pub virtual_wrench: [f64; 6],
    pub lambda: f64,
    pub mu: [f64; 6],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub time: f64,
    /// 1-based step index, 0 when no step is active.
    pub step_index: usize,
    pub stopped: bool,
    pub base: [f64; 2],
    pub torso_yaw_offset: f64,
    pub q: Vec<f64>,
    pub q_c: Vec<f64>,
    pub qdot_c: Vec<f64>,
    pub blend: Vec<f64>,
    pub hands: Vec<HandRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: String,
    pub payload: serde_json::Value,
}

impl Event {
    fn new(time: f64, kind: &str, payload: serde_json::Value) -> Self {
        Event {
            time,
            kind: kind.to_string(),
            payload,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialLog {
    pub label: String,
    pub signals: SignalSet,
    pub timestep: f64,
    pub joint_names: Vec<String>,
    pub hand_names: Vec<String>,
    pub velocity_limits: Vec<f64>,
    pub ticks: Vec<TickRecord>,
    pub events: Vec<Event>,
}

fn arr6(v: &nalgebra::Vector6<f64>) -> [f64; 6] {
    std::array::from_fn(|i| v[i])
}

fn quat(q: &nalgebra::UnitQuaternion<f64>) -> [f64; 4] {
    [q.w, q.i, q.j, q.k]
}

impl TrialLog {
    pub fn events_of<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a Event> + 'a {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    /// Column names of the per-tick CSV, in file order.
    pub fn csv_header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["time", "step", "stopped", "base_x", "base_y", "torso_yaw_offset"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for prefix in ["q", "qc", "qdc", "blend"] {
            h.extend(self.joint_names.iter().map(|j| format!("{prefix}_{j}")));
        }
        for hand in &self.hand_names {
            let mut push = |group: &str, parts: &[&str]| {
                h.extend(parts.iter().map(|p| format!("{hand}_{group}{p}")));
            };
            push("p", &["x", "y", "z"]);
            push("o", &["w", "x", "y", "z"]);
            push("sp", &["x", "y", "z"]);
            push("so", &["w", "x", "y", "z"]);
            push("err", &["x", "y", "z", "rx", "ry", "rz"]);
            for w in ["fm", "fa", "fd"] {
                push(w, &["_fx", "_fy", "_fz", "_mx", "_my", "_mz"]);
            }
            push("lambda", &[""]);
            push("mu", &["0", "1", "2", "3", "4", "5"]);
        }
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.csv_header())?;
        let mut row: Vec<String> = Vec::new();
        for t in &self.ticks {
            row.clear();
            row.push(t.time.to_string());
            row.push(t.step_index.to_string());
            row.push(u8::from(t.stopped).to_string());
            row.extend(t.base.iter().map(f64::to_string));
            row.push(t.torso_yaw_offset.to_string());
            for v in [&t.q, &t.q_c, &t.qdot_c, &t.blend] {
                row.extend(v.iter().map(f64::to_string));
            }
            for hr in &t.hands {
                row.extend(hr.position.iter().map(f64::to_string));
                row.extend(hr.orientation.iter().map(f64::to_string));
                row.extend(hr.setpoint.iter().map(f64::to_string));
                row.extend(hr.setpoint_orientation.iter().map(f64::to_string));
                row.extend(hr.pose_error.iter().map(f64::to_string));
                row.extend(hr.measured.iter().map(f64::to_string));
                row.extend(hr.applied.iter().map(f64::to_string));
                row.extend(hr.virtual_wrench.iter().map(f64::to_string));
                row.push(hr.lambda.to_string());
                row.extend(hr.mu.iter().map(f64::to_string));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// One JSON object per line: `{"time", "kind", "payload"}`.
    pub fn write_events<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    /// File stem used for this trial's logs.
    pub fn file_stem(&self) -> String {
        self.label.replace(['/', '\\', ' '], "_")
    }

    /// Writes `<stem>.csv` and `<stem>.events.jsonl` under `dir`.
    pub fn write_to_dir(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("{stem}.csv"));
        let ev_path = dir.join(format!("{stem}.events.jsonl"));
        self.write_csv(BufWriter::new(File::create(&csv_path)?))?;
        self.write_events(BufWriter::new(File::create(&ev_path)?))?;
        Ok((csv_path, ev_path))
    }
}

/// Runs one trial to completion.
pub fn run_trial(config: &TrialConfig) -> Result<TrialLog> {
    config.validate()?;
    let model = config.load_model()?;
    let joint_gains = JointGains::for_model(&model, &config.joint)?;
    let schedule = LeadingSignalSchedule::new(config.signals.clone(), config.signal.clone())?;
    let steps = step_sequence(&config.choreography)?;
    for s in &steps {
        schedule.check_step(s)?;
    }
    if model.hand_count() != 2 {
        return Err(Error::config("the step choreography needs a two-handed model"));
    }

    let dt = config.timestep;
    let n_h = model.hand_count();
    let joint_names: Vec<String> = model.joints().iter().map(|j| j.name.clone()).collect();
    let hand_names: Vec<String> = model.hands().map(|h| model.hand_frame(h).to_string()).collect();
    let velocity_limits = model.joints().iter().map(|j| j.velocity_limit).collect();
    let mut controller = UpperBodyController::new(model, config.task.clone(), joint_gains)?;
    let mut sequencer = Sequencer::new(steps.clone(), config.signal.audio_lead_time, config.duration)?;
    let mut monitor = StopMonitor::new(config.stop_threshold);

    let world = |base: &Vector2<f64>, p: &Vector3<f64>| Vector3::new(base.x + p.x, base.y + p.y, p.z);
    let hand_world = |c: &UpperBodyController,
                      base: &Vector2<f64>,
                      base_vel: &Vector2<f64>|
     -> Result<Vec<(Vector3<f64>, Vector3<f64>)>> {
        c.model()
            .hands()
            .map(|h| {
                let (pose, twist) = c.hand_state(h)?;
                let v = twist.linear + Vector3::new(base_vel.x, base_vel.y, 0.0);
                Ok((world(base, &pose.position), v))
            })
            .collect()
    };

    let start_hands = hand_world(&controller, &Vector2::zeros(), &Vector2::zeros())?;
    let starts: Vec<Vector3<f64>> = start_hands.iter().map(|(p, _)| *p).collect();
    let mut partner = PartnerState::at_contact(&starts, config.seed);

    let mut events = Vec::new();
    let push_choreo = |events: &mut Vec<Event>, e: ChoreoEvent| match e {
        ChoreoEvent::StepOnset { time, index, foot } => {
            events.push(Event::new(time, "step_onset", json!({ "index": index, "foot": foot })));
        }
        ChoreoEvent::FootPlaced {
            time,
            index,
            foot,
            base,
        } => {
            events.push(Event::new(
                time,
                "foot_placed",
                json!({ "index": index, "foot": foot, "base": base }),
            ));
        }
        ChoreoEvent::Cue { time, index, onset } => {
            for u in utterances(&schedule, &steps[index - 1]) {
                events.push(Event::new(
                    time,
                    "utterance",
                    json!({ "text": u.text, "step": index, "onset": onset }),
                ));
            }
        }
    };
    for e in sequencer.start() {
        push_choreo(&mut events, e);
    }

    let ticks_total = config.tick_count();
    let mut ticks = Vec::with_capacity(ticks_total);
    let mut prev_base = sequencer.base_position();
    let mut base_vel = Vector2::zeros();
    for k in 0..ticks_total {
        let time = k as f64 * dt;
        let base = sequencer.base_position();

        let robot = hand_world(&controller, &base, &base_vel)?;
        let measured: Vec<Wrench> = (0..n_h)
            .map(|i| measured_wrench(&config.partner, &partner, i, &robot[i].0, &robot[i].1))
            .collect();

        let step = if monitor.stopped {
            None
        } else {
            sequencer.current_step().cloned()
        };
        let action = match &step {
            Some(s) => signal_actions(&schedule, s, sequencer.time_in_step().min(s.duration), n_h)?,
            None => SignalAction::zero(n_h),
        };

        let out = controller.step(&measured, &action, dt)?;

        let errors: Vec<_> = out.hands.iter().map(|h| h.pose_error).collect();
        let was_stopped = monitor.stopped;
        monitor = check_stop(&monitor, &errors, time);
        if monitor.stopped && !was_stopped {
            let trig = monitor.trigger.as_ref().expect("trigger set on stop");
            events.push(Event::new(
                time,
                "stop",
                json!({ "hand": hand_names[trig.hand.index()], "deflection": trig.deflection }),
            ));
        }
        for e in sequencer.advance(dt, monitor.stopped) {
            push_choreo(&mut events, e);
        }

        let next_base = sequencer.base_position();
        base_vel = (next_base - prev_base) / dt;
        prev_base = next_base;
        let after = hand_world(&controller, &next_base, &base_vel)?;
        let after_pos: Vec<Vector3<f64>> = after.iter().map(|(p, _)| *p).collect();
        partner = step_partner(&config.partner, &partner, &after_pos, dt, time);

        let fade = controller.fade();
        let command = controller.command();
        ticks.push(TickRecord {
            time,
            step_index: step.as_ref().map_or(0, |s| s.index),
            stopped: monitor.stopped,
            base: [base.x, base.y],
            torso_yaw_offset: action.torso_yaw_offset,
            q: out.q.iter().copied().collect(),
            q_c: command.q_c.iter().copied().collect(),
            qdot_c: command.qdot_c.iter().copied().collect(),
            blend: command.blend.iter().copied().collect(),
            hands: out
                .hands
                .iter()
                .zip(&fade.hands)
                .map(|(h, f)| HandRecord {
                    position: h.pose.position.into(),
                    orientation: quat(&h.pose.orientation),
                    setpoint: h.setpoint.position.into(),
                    setpoint_orientation: quat(&h.setpoint.orientation),
                    pose_error: arr6(&h.pose_error),
                    measured: arr6(&h.measured.to_vector()),
                    applied: arr6(&h.applied.to_vector()),
                    virtual_wrench: arr6(&h.virtual_wrench.to_vector()),
                    lambda: f.lambda,
                    mu: f.mu,
                })
                .collect(),
        });
    }

    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(TrialLog {
        label: config.label(),
        signals: config.signals.clone(),
        timestep: dt,
        joint_names,
        hand_names,
        velocity_limits,
        ticks,
        events,
    })
}

/// Result of running one block: logs in declared order plus the order the
/// trials were presented in.
#[derive(Clone, Debug)]
pub struct BlockRun {
    pub name: String,
    /// Declared indices in presentation order.
    pub order: Vec<usize>,
    pub logs: Vec<TrialLog>,
}

/// Seeded presentation order for `n` trials.
pub fn block_order(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

/// Runs every trial of a block in a seeded random order.
pub fn run_block(name: &str, configs: &[TrialConfig], seed: u64) -> Result<BlockRun> {
    if configs.is_empty() {
        return Err(Error::config(format!("block `{name}` has no trials")));
    }
    let order = block_order(configs.len(), seed);
    // Trials are independent; run them concurrently and reassemble.
    let results: Vec<(usize, Result<TrialLog>)> = order.par_iter().map(|&i| (i, run_trial(&configs[i]))).collect();
    let mut slots: Vec<Option<TrialLog>> = vec![None; configs.len()];
    for (i, res) in results {
        let log = res.map_err(|e| Error::Trial {
            trial: format!("{name}/{}", configs[i].label()),
            source: Box::new(e),
        })?;
        slots[i] = Some(log);
    }
    Ok(BlockRun {
        name: name.to_string(),
        order,
        logs: slots.into_iter().map(|l| l.expect("every trial ran")).collect(),
    })
}

/// Runs every block of a protocol; block `i` is shuffled with `seed + i`.
pub fn run_protocol(protocol: &ProtocolConfig) -> Result<Vec<BlockRun>> {
    protocol
        .blocks
        .par_iter()
        .enumerate()
        .map(|(i, b)| run_block(&b.name, &protocol.block_trials(b), protocol.seed.wrapping_add(i as u64)))
        .collect()
}

/// Writes each block's logs as `<block>/<order>_<label>.{csv,events.jsonl}`
/// and an `order.csv` listing the presentation order.
pub fn write_protocol(runs: &[BlockRun], dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut order_csv = csv::Writer::from_path({
        std::fs::create_dir_all(dir)?;
        dir.join("order.csv")
    })?;
    order_csv.write_record(["block", "position", "trial"])?;
    for run in runs {
        let block_dir = dir.join(&run.name);
        for (pos, &i) in run.order.iter().enumerate() {
            let log = &run.logs[i];
            let stem = format!("{:02}_{}", pos + 1, log.file_stem());
            let (csv_path, _) = log.write_to_dir(&block_dir, &stem)?;
            written.push(csv_path);
            order_csv.write_record([run.name.as_str(), &(pos + 1).to_string(), &log.label])?;
        }
    }
    order_csv.flush()?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(label: &str, seconds: f64) -> TrialConfig {
        TrialConfig {
            duration: seconds,
            ..TrialConfig::with_signals(label.parse().unwrap())
        }
    }

    #[test]
    fn tick_count_and_spacing() {
        let log = run_trial(&short("NS", 2.0)).unwrap();
        assert_eq!(log.ticks.len(), 400);
        for (k, t) in log.ticks.iter().enumerate() {
            assert_eq!(t.time, k as f64 * 0.005);
        }
    }

    #[test]
    fn csv_has_one_row_per_tick() {
        let log = run_trial(&short("SC", 1.0)).unwrap();
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert_eq!(header.split(',').count(), log.csv_header().len());
        assert_eq!(lines.count(), log.ticks.len());
    }

    #[test]
    fn events_are_json_lines() {
        let log = run_trial(&short("SD", 3.0)).unwrap();
        let mut buf = Vec::new();
        log.write_events(&mut buf).unwrap();
        for line in String::from_utf8(buf).unwrap().lines() {
            let e: Event = serde_json::from_str(line).unwrap();
            assert!(["step_onset", "foot_placed", "utterance", "stop"].contains(&e.kind.as_str()));
        }
        assert_eq!(log.events_of("utterance").count(), 3);
    }

    #[test]
    fn invalid_config_fails_before_running() {
        let cfg = TrialConfig {
            timestep: 0.1,
            ..TrialConfig::default()
        };
        assert!(run_trial(&cfg).is_err());
    }

    #[test]
    fn block_order_is_seeded() {
        assert_eq!(block_order(8, 3), block_order(8, 3));
        let mut sorted = block_order(8, 3);
        sorted.sort_unstable();
        assert_eq!(sorted, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn block_errors_name_the_trial() {
        let bad = TrialConfig {
            duration: -1.0,
            ..short("HW", 1.0)
        };
        let err = run_block("b", &[short("NS", 0.5), bad], 1).unwrap_err();
        assert!(err.to_string().contains("b/HW"), "{err}");
    }
}
