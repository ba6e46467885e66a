//! Study metrics: best/worst preference scores, fractional vote weights,
//! Likert summaries, and per-trial summaries of simulation logs.
//!
//! Questionnaire data is one CSV with the headers
//! `participant,block,trial,vote,confidence,comfort,order`. `vote` is
//! `best`, `worst`, `none` or empty; the Likert columns and `order` may be
//! empty.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::TrialLog;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Vote {
    Best,
    Worst,
    None,
}

impl Vote {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "best" => Ok(Vote::Best),
            "worst" => Ok(Vote::Worst),
            "" | "none" => Ok(Vote::None),
            other => Err(Error::input(format!("unknown vote `{other}`"))),
        }
    }
}

/// One questionnaire row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub participant: String,
    pub block: String,
    pub trial: String,
    pub vote: Vote,
    pub confidence: Option<u8>,
    pub comfort: Option<u8>,
    /// Position of the trial within its block (1-based).
    pub order: Option<u32>,
}

#[derive(Deserialize)]
struct RawRow {
    participant: String,
    block: String,
    trial: String,
    #[serde(default)]
    vote: String,
    #[serde(default)]
    confidence: Option<u8>,
    #[serde(default)]
    comfort: Option<u8>,
    #[serde(default)]
    order: Option<u32>,
}

fn likert(v: Option<u8>, what: &str, line: usize) -> Result<Option<u8>> {
    match v {
        Some(x) if !(1..=5).contains(&x) => Err(Error::input(format!("line {line}: {what} {x} outside 1..5"))),
        other => Ok(other),
    }
}

/// Reads questionnaire rows from CSV.
pub fn read_responses<R: Read>(input: R) -> Result<Vec<Response>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<RawRow>().enumerate() {
        let line = i + 2;
        let raw = row?;
        if raw.participant.is_empty() || raw.trial.is_empty() {
            return Err(Error::input(format!("line {line}: participant and trial are required")));
        }
        out.push(Response {
            vote: Vote::parse(&raw.vote).map_err(|e| Error::input(format!("line {line}: {e}")))?,
            confidence: likert(raw.confidence, "confidence", line)?,
            comfort: likert(raw.comfort, "comfort", line)?,
            participant: raw.participant,
            block: raw.block,
            trial: raw.trial,
            order: raw.order,
        });
    }
    Ok(out)
}

pub fn read_responses_file(path: &Path) -> Result<Vec<Response>> {
    read_responses(std::fs::File::open(path)?)
}

pub fn write_responses<W: std::io::Write>(rows: &[Response], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "participant",
        "block",
        "trial",
        "vote",
        "confidence",
        "comfort",
        "order",
    ])?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in rows {
        let vote = match r.vote {
            Vote::Best => "best",
            Vote::Worst => "worst",
            Vote::None => "none",
        };
        w.write_record([
            r.participant.as_str(),
            r.block.as_str(),
            r.trial.as_str(),
            vote,
            &opt(r.confidence.map(|v| v.to_string())),
            &opt(r.comfort.map(|v| v.to_string())),
            &opt(r.order.map(|v| v.to_string())),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct VoteEntry {
    pub participant: String,
    pub block: String,
    pub trial: String,
    pub vote: Vote,
}

/// Best/worst selections. Every participant and trial label that appears in
/// any row counts, even with no selection.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VoteTable {
    entries: Vec<VoteEntry>,
    participants: BTreeSet<String>,
    trials: BTreeSet<String>,
}

impl VoteTable {
    pub fn new(entries: Vec<VoteEntry>) -> Result<Self> {
        let mut marks: BTreeMap<(&str, &str), BTreeSet<(&str, Vote)>> = BTreeMap::new();
        for e in &entries {
            if e.vote != Vote::None {
                marks
                    .entry((&e.participant, &e.trial))
                    .or_default()
                    .insert((&e.block, e.vote));
            }
        }
        for ((p, t), set) in &marks {
            for (block, vote) in set {
                let opposite = if *vote == Vote::Best { Vote::Worst } else { Vote::Best };
                if set.contains(&(block, opposite)) {
                    return Err(Error::input(format!(
                        "participant {p} marked {t} both best and worst in block {block}"
                    )));
                }
            }
        }
        let participants = entries.iter().map(|e| e.participant.clone()).collect();
        let trials = entries.iter().map(|e| e.trial.clone()).collect();
        Ok(VoteTable {
            entries,
            participants,
            trials,
        })
    }

    pub fn from_responses(rows: &[Response]) -> Result<Self> {
        Self::new(
            rows.iter()
                .map(|r| VoteEntry {
                    participant: r.participant.clone(),
                    block: r.block.clone(),
                    trial: r.trial.clone(),
                    vote: r.vote,
                })
                .collect(),
        )
    }

    pub fn entries(&self) -> &[VoteEntry] {
        &self.entries
    }

    pub fn participants(&self) -> &BTreeSet<String> {
        &self.participants
    }

    pub fn trials(&self) -> &BTreeSet<String> {
        &self.trials
    }

    /// Trial labels seen in `block`, sorted.
    pub fn block_trials(&self, block: &str) -> BTreeSet<&str> {
        self.entries
            .iter()
            .filter(|e| e.block == block)
            .map(|e| e.trial.as_str())
            .collect()
    }

    pub fn blocks(&self) -> BTreeSet<&str> {
        self.entries.iter().map(|e| e.block.as_str()).collect()
    }

    fn marked(&self, participant: &str, trial: &str, vote: Vote) -> bool {
        self.entries
            .iter()
            .any(|e| e.participant == participant && e.trial == trial && e.vote == vote)
    }
}

/// Preference score of `trial` on a 1 to 5 scale: 3 plus 2/n_p times the
/// sum over participants of +1 (marked best) and −1 (marked worst).
pub fn preference_metric(votes: &VoteTable, trial: &str) -> Result<f64> {
    if !votes.trials.contains(trial) {
        return Err(Error::input(format!("unknown trial label `{trial}`")));
    }
    let n_p = votes.participants.len();
    if n_p == 0 {
        return Err(Error::input("vote table has no participants"));
    }
    let sum: i64 = votes
        .participants
        .iter()
        .map(|p| i64::from(votes.marked(p, trial, Vote::Best)) - i64::from(votes.marked(p, trial, Vote::Worst)))
        .sum();
    Ok(3.0 + 2.0 * sum as f64 / n_p as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct VoteWeight {
    pub best: f64,
    pub worst: f64,
}

/// Per-trial best and worst weights within `block`. A participant who picks
/// n trials as best gives each 1/n; abstainers give nothing.
pub fn weighted_best_worst(votes: &VoteTable, block: &str) -> BTreeMap<String, VoteWeight> {
    let mut out: BTreeMap<String, VoteWeight> = votes
        .block_trials(block)
        .into_iter()
        .map(|t| (t.to_string(), VoteWeight::default()))
        .collect();
    for p in &votes.participants {
        for vote in [Vote::Best, Vote::Worst] {
            let picks: BTreeSet<&str> = votes
                .entries
                .iter()
                .filter(|e| e.participant == *p && e.block == block && e.vote == vote)
                .map(|e| e.trial.as_str())
                .collect();
            if picks.is_empty() {
                continue;
            }
            let w = 1.0 / picks.len() as f64;
            for t in picks {
                let slot = out.get_mut(t).expect("trial seen in block");
                match vote {
                    Vote::Best => slot.best += w,
                    _ => slot.worst += w,
                }
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    /// Population standard deviation (divides by n).
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Stat {
            mean,
            std: var.sqrt(),
            n: values.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LikertEntry {
    pub participant: String,
    pub block: String,
    pub trial: String,
    pub confidence: Option<u8>,
    pub comfort: Option<u8>,
    pub order: Option<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LikertTable {
    pub entries: Vec<LikertEntry>,
}

impl LikertTable {
    pub fn from_responses(rows: &[Response]) -> Self {
        LikertTable {
            entries: rows
                .iter()
                .map(|r| LikertEntry {
                    participant: r.participant.clone(),
                    block: r.block.clone(),
                    trial: r.trial.clone(),
                    confidence: r.confidence,
                    comfort: r.comfort,
                    order: r.order,
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LikertRow {
    pub key: String,
    pub confidence: Option<Stat>,
    pub comfort: Option<Stat>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct LikertSummary {
    /// Per trial label, sorted.
    pub trials: Vec<LikertRow>,
    /// Per within-block order index, ascending.
    pub by_order: Vec<(u32, LikertRow)>,
    pub warnings: Vec<String>,
}

fn summarize<'a>(key: String, rows: impl Iterator<Item = &'a LikertEntry> + Clone) -> LikertRow {
    let conf: Vec<f64> = rows.clone().filter_map(|r| r.confidence).map(f64::from).collect();
    let comf: Vec<f64> = rows.filter_map(|r| r.comfort).map(f64::from).collect();
    LikertRow {
        key,
        confidence: Stat::of(&conf),
        comfort: Stat::of(&comf),
    }
}

/// Mean and std of confidence and comfort per trial and per order index.
/// Trials in `expected` with no responses, and empty cells, produce a
/// warning instead of a row value.
pub fn likert_summary(table: &LikertTable, expected: &[String]) -> LikertSummary {
    let mut summary = LikertSummary::default();
    let labels: BTreeSet<&str> = table.entries.iter().map(|e| e.trial.as_str()).collect();
    for t in expected {
        if !labels.contains(t.as_str()) {
            summary.warnings.push(format!("trial {t}: no responses"));
        }
    }
    for t in labels {
        let row = summarize(t.to_string(), table.entries.iter().filter(|e| e.trial == t));
        if row.confidence.is_none() {
            summary.warnings.push(format!("trial {t}: no confidence ratings"));
        }
        if row.comfort.is_none() {
            summary.warnings.push(format!("trial {t}: no comfort ratings"));
        }
        summary.trials.push(row);
    }
    let orders: BTreeSet<u32> = table.entries.iter().filter_map(|e| e.order).collect();
    for o in orders {
        let row = summarize(o.to_string(), table.entries.iter().filter(|e| e.order == Some(o)));
        summary.by_order.push((o, row));
    }
    summary
}

/// Numeric columns of a per-tick log, keyed by header name.
#[derive(Clone, Debug, PartialEq)]
pub struct LogTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl LogTable {
    pub fn read<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| Error::input(format!("row {}: `{s}` is not a number", i + 2)))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(LogTable { header, rows })
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::read(std::fs::File::open(path)?)
    }

    pub fn write<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn from_log(log: &TrialLog) -> Result<Self> {
        let mut buf = Vec::new();
        log.write_csv(&mut buf)?;
        Self::read(buf.as_slice())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.column(name)
            .ok_or_else(|| Error::input(format!("log has no column `{name}`")))
    }

    pub fn values(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.require(name)?;
        Ok(self.rows.iter().map(|r| r[c]).collect())
    }

    /// Hand prefixes, taken from the `<hand>_lambda` columns.
    pub fn hands(&self) -> Vec<String> {
        self.header
            .iter()
            .filter_map(|h| h.strip_suffix("_lambda").map(str::to_string))
            .collect()
    }

    fn norm3(&self, row: &[f64], cols: &[usize; 3]) -> f64 {
        cols.iter().map(|&c| row[c] * row[c]).sum::<f64>().sqrt()
    }
}

/// Per-trial summary of a tick log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogMetrics {
    pub ticks: usize,
    pub duration: f64,
    /// Step onsets (changes to a nonzero step index).
    pub steps: usize,
    pub stop_time: Option<f64>,
    /// Largest hand position-error norm (m).
    pub peak_deflection: f64,
    /// Largest measured force norm (N).
    pub peak_force: f64,
    /// Largest setpoint displacement from its first value (m).
    pub peak_setpoint_offset: f64,
    pub peak_torso_yaw_offset: f64,
    pub min_lambda: f64,
    /// Largest commanded joint speed realized between ticks (rad/s).
    pub max_joint_speed: f64,
}

pub fn log_metrics(table: &LogTable) -> Result<LogMetrics> {
    let time = table.values("time")?;
    let step = table.values("step")?;
    let stopped = table.values("stopped")?;
    let yaw = table.values("torso_yaw_offset")?;
    let hands = table.hands();
    if hands.is_empty() {
        return Err(Error::input("log has no hand columns"));
    }
    let cols = |hand: &str, group: &str, parts: [&str; 3]| -> Result<[usize; 3]> {
        Ok([
            table.require(&format!("{hand}_{group}{}", parts[0]))?,
            table.require(&format!("{hand}_{group}{}", parts[1]))?,
            table.require(&format!("{hand}_{group}{}", parts[2]))?,
        ])
    };
    let qc: Vec<usize> = table
        .header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("qc_"))
        .map(|(i, _)| i)
        .collect();

    let mut m = LogMetrics {
        ticks: table.rows.len(),
        duration: 0.0,
        steps: step.windows(2).filter(|w| w[1] > 0.0 && w[1] != w[0]).count()
            + usize::from(step.first().is_some_and(|s| *s > 0.0)),
        stop_time: time.iter().zip(&stopped).find(|(_, s)| **s != 0.0).map(|(t, _)| *t),
        peak_deflection: 0.0,
        peak_force: 0.0,
        peak_setpoint_offset: 0.0,
        peak_torso_yaw_offset: yaw.iter().fold(0.0, |a, v| a.max(v.abs())),
        min_lambda: 1.0,
        max_joint_speed: 0.0,
    };
    if time.len() >= 2 {
        let dt = time[1] - time[0];
        m.duration = time[time.len() - 1] - time[0] + dt;
        for w in table.rows.windows(2) {
            for &c in &qc {
                m.max_joint_speed = m.max_joint_speed.max((w[1][c] - w[0][c]).abs() / dt);
            }
        }
    }
    for hand in &hands {
        let err = cols(hand, "err", ["x", "y", "z"])?;
        let force = cols(hand, "fm", ["_fx", "_fy", "_fz"])?;
        let sp = cols(hand, "sp", ["x", "y", "z"])?;
        let lambda = table.require(&format!("{hand}_lambda"))?;
        let first = table.rows.first().map(|r| sp.map(|c| r[c]));
        for r in &table.rows {
            m.peak_deflection = m.peak_deflection.max(table.norm3(r, &err));
            m.peak_force = m.peak_force.max(table.norm3(r, &force));
            m.min_lambda = m.min_lambda.min(r[lambda]);
            if let Some(s0) = first {
                let d: f64 = (0..3).map(|k| (r[sp[k]] - s0[k]).powi(2)).sum::<f64>().sqrt();
                m.peak_setpoint_offset = m.peak_setpoint_offset.max(d);
            }
        }
    }
    Ok(m)
}

/// Largest per-tick commanded joint change as a fraction of what the joint
/// velocity limit allows in one tick. Values above 1 are discontinuities.
pub fn continuity_ratio(log: &TrialLog) -> f64 {
    let dt = log.timestep;
    log.ticks.windows(2).fold(0.0, |acc, w| {
        w[0].q_c
            .iter()
            .zip(&w[1].q_c)
            .zip(&log.velocity_limits)
            .fold(acc, |a, ((q0, q1), vlim)| a.max((q1 - q0).abs() / (vlim * dt)))
    })
}

/// Plot-ready series derived from a tick log: time, step, stop flag and
/// torso yaw offset, then per hand the position-error norm, measured force
/// norm, compliance gate, and setpoint and hand displacement from the first
/// tick.
pub fn log_series(table: &LogTable) -> Result<LogTable> {
    let hands = table.hands();
    if hands.is_empty() {
        return Err(Error::input("log has no hand columns"));
    }
    let mut header: Vec<String> = ["time", "step", "stopped", "torso_yaw_offset"]
        .map(String::from)
        .to_vec();
    let mut src = Vec::new();
    for name in &header {
        src.push(table.require(name)?);
    }
    let mut groups = Vec::new();
    for hand in &hands {
        let three = |group: &str, parts: [&str; 3]| -> Result<[usize; 3]> {
            Ok([
                table.require(&format!("{hand}_{group}{}", parts[0]))?,
                table.require(&format!("{hand}_{group}{}", parts[1]))?,
                table.require(&format!("{hand}_{group}{}", parts[2]))?,
            ])
        };
        groups.push((
            three("err", ["x", "y", "z"])?,
            three("fm", ["_fx", "_fy", "_fz"])?,
            table.require(&format!("{hand}_lambda"))?,
            three("sp", ["x", "y", "z"])?,
            three("p", ["x", "y", "z"])?,
        ));
        for s in ["deflection", "force", "lambda", "setpoint_offset", "displacement"] {
            header.push(format!("{hand}_{s}"));
        }
    }
    let first = table.rows.first().cloned().unwrap_or_default();
    let dist = |r: &[f64], c: &[usize; 3]| c.iter().map(|&k| (r[k] - first[k]).powi(2)).sum::<f64>().sqrt();
    let rows = table
        .rows
        .iter()
        .map(|r| {
            let mut out: Vec<f64> = src.iter().map(|&c| r[c]).collect();
            for (err, force, lambda, sp, pos) in &groups {
                out.push(table.norm3(r, err));
                out.push(table.norm3(r, force));
                out.push(r[*lambda]);
                out.push(dist(r, sp));
                out.push(dist(r, pos));
            }
            out
        })
        .collect();
    Ok(LogTable { header, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(p: &str, block: &str, trial: &str, vote: Vote) -> VoteEntry {
        VoteEntry {
            participant: p.into(),
            block: block.into(),
            trial: trial.into(),
            vote,
        }
    }

    #[test]
    fn four_participants_example() {
        let t = VoteTable::new(vec![
            entry("p1", "b1", "HW", Vote::Best),
            entry("p2", "b1", "HW", Vote::Best),
            entry("p3", "b1", "HW", Vote::Worst),
            entry("p4", "b1", "HW", Vote::None),
        ])
        .unwrap();
        assert_eq!(preference_metric(&t, "HW").unwrap(), 3.5);
    }

    #[test]
    fn endpoints() {
        let all = |v| VoteTable::new((0..5).map(|i| entry(&format!("p{i}"), "b", "TR", v)).collect()).unwrap();
        assert_eq!(preference_metric(&all(Vote::Best), "TR").unwrap(), 5.0);
        assert_eq!(preference_metric(&all(Vote::Worst), "TR").unwrap(), 1.0);
        assert_eq!(preference_metric(&all(Vote::None), "TR").unwrap(), 3.0);
    }

    #[test]
    fn unknown_label_is_error() {
        let t = VoteTable::new(vec![entry("p1", "b1", "HW", Vote::Best)]).unwrap();
        assert!(matches!(preference_metric(&t, "XX"), Err(Error::Input(_))));
    }

    #[test]
    fn best_and_worst_in_one_block_rejected() {
        let r = VoteTable::new(vec![
            entry("p1", "b1", "HW", Vote::Best),
            entry("p1", "b1", "HW", Vote::Worst),
        ]);
        assert!(r.is_err());
        let ok = VoteTable::new(vec![
            entry("p1", "b1", "HW", Vote::Best),
            entry("p1", "b2", "HW", Vote::Worst),
        ]);
        assert_eq!(preference_metric(&ok.unwrap(), "HW").unwrap(), 3.0);
    }

    #[test]
    fn split_weights() {
        let t = VoteTable::new(vec![
            entry("p1", "b1", "HW", Vote::Best),
            entry("p1", "b1", "HD", Vote::Best),
            entry("p1", "b1", "TR", Vote::Worst),
            entry("p2", "b1", "HW", Vote::None),
        ])
        .unwrap();
        let w = weighted_best_worst(&t, "b1");
        assert_eq!(w["HW"], VoteWeight { best: 0.5, worst: 0.0 });
        assert_eq!(w["HD"], VoteWeight { best: 0.5, worst: 0.0 });
        assert_eq!(w["TR"], VoteWeight { best: 0.0, worst: 1.0 });
    }

    #[test]
    fn stat_values() {
        let s = Stat::of(&[3.0, 5.0]).unwrap();
        assert_eq!((s.mean, s.std, s.n), (4.0, 1.0, 2));
        let s = Stat::of(&[4.0; 6]).unwrap();
        assert_eq!((s.mean, s.std), (4.0, 0.0));
        assert!(Stat::of(&[]).is_none());
    }

    #[test]
    fn csv_round_trip_and_warnings() {
        let text = "participant,block,trial,vote,confidence,comfort,order\n\
                    p1,b1,HW,best,4,5,1\n\
                    p1,b1,TR,,3,,2\n\
                    p2,b1,HW,worst,2,3,2\n";
        let rows = read_responses(text.as_bytes()).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1].vote, Vote::None);
        assert_eq!(rows[1].comfort, None);
        let mut buf = Vec::new();
        write_responses(&rows, &mut buf).unwrap();
        assert_eq!(read_responses(buf.as_slice()).unwrap(), rows);

        let s = likert_summary(&LikertTable::from_responses(&rows), &["HW".into(), "SD".into()]);
        assert!(s.warnings.iter().any(|w| w.contains("SD")));
        assert!(s.warnings.iter().any(|w| w.contains("TR") && w.contains("comfort")));
        let hw = s.trials.iter().find(|r| r.key == "HW").unwrap();
        assert_eq!(hw.confidence.unwrap().mean, 3.0);
        assert_eq!(s.by_order.len(), 2);
    }

    #[test]
    fn rejects_out_of_scale() {
        let text = "participant,block,trial,vote,confidence,comfort,order\np1,b1,HW,best,6,5,1\n";
        assert!(read_responses(text.as_bytes()).is_err());
        let text = "participant,block,trial,vote,confidence,comfort,order\np1,b1,HW,great,4,5,1\n";
        assert!(read_responses(text.as_bytes()).is_err());
    }

    #[test]
    fn series_from_short_trial() {
        let mut cfg = crate::config::TrialConfig::with_signals("HD".parse().unwrap());
        cfg.duration = 2.0;
        let log = crate::harness::run_trial(&cfg).unwrap();
        let table = LogTable::from_log(&log).unwrap();
        let s = log_series(&table).unwrap();
        assert_eq!(s.rows.len(), table.rows.len());
        assert_eq!(s.header.len(), 4 + 5 * log.hand_names.len());
        let d = s.column("hand_left_displacement").unwrap();
        assert_eq!(s.rows[0][d], 0.0);
        assert!(s.rows.iter().any(|r| r[d] > 0.01));
    }
}
