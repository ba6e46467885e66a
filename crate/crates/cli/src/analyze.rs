//! `analyze`: metrics and plot-ready series from tick logs, and preference
//! and Likert tables from questionnaires.

use std::fs::File;
use std::path::Path;

use anyhow::{Context, Result};
use leadstep::analysis::{
    likert_summary, log_metrics, log_series, preference_metric, read_responses_file, weighted_best_worst, LikertRow,
    LikertTable, LogTable, Stat, VoteTable,
};
use leadstep::config::ProtocolConfig;

use crate::inputs::{collect, Input, Kind};

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn stat_cells(s: &Option<Stat>) -> [String; 3] {
    match s {
        Some(s) => [s.mean.to_string(), s.std.to_string(), s.n.to_string()],
        None => [String::new(), String::new(), "0".into()],
    }
}

fn likert_record(key: &str, row: &LikertRow) -> Vec<String> {
    let mut r = vec![key.to_string()];
    r.extend(stat_cells(&row.confidence));
    r.extend(stat_cells(&row.comfort));
    r
}

const LIKERT_HEADER: [&str; 6] = [
    "confidence_mean",
    "confidence_std",
    "confidence_n",
    "comfort_mean",
    "comfort_std",
    "comfort_n",
];

fn analyze_logs(logs: &[&Input], out: &Path) -> Result<()> {
    let series_dir = out.join("series");
    std::fs::create_dir_all(&series_dir)?;
    let mut metrics = csv::Writer::from_path(out.join("metrics.csv"))?;
    metrics.write_record([
        "trial",
        "ticks",
        "duration",
        "steps",
        "stop_time",
        "peak_deflection",
        "peak_force",
        "peak_setpoint_offset",
        "peak_torso_yaw_offset",
        "min_lambda",
        "max_joint_speed",
    ])?;
    for input in logs {
        let table = LogTable::read_file(&input.path).with_context(|| format!("reading {}", input.path.display()))?;
        let m = log_metrics(&table).with_context(|| format!("{}", input.path.display()))?;
        metrics.write_record([
            input.name.clone(),
            m.ticks.to_string(),
            m.duration.to_string(),
            m.steps.to_string(),
            opt(m.stop_time),
            m.peak_deflection.to_string(),
            m.peak_force.to_string(),
            m.peak_setpoint_offset.to_string(),
            m.peak_torso_yaw_offset.to_string(),
            m.min_lambda.to_string(),
            m.max_joint_speed.to_string(),
        ])?;
        log_series(&table)?.write(File::create(series_dir.join(format!("{}.csv", input.name)))?)?;
    }
    metrics.flush()?;
    println!("{} tick log(s) -> {}", logs.len(), out.join("metrics.csv").display());
    Ok(())
}

fn analyze_questionnaires(files: &[&Input], out: &Path, expected: &[String]) -> Result<()> {
    let mut responses = Vec::new();
    for f in files {
        responses.extend(read_responses_file(&f.path).with_context(|| format!("reading {}", f.path.display()))?);
    }
    let votes = VoteTable::from_responses(&responses)?;

    let mut pref = csv::Writer::from_path(out.join("preference.csv"))?;
    pref.write_record(["trial", "participants", "score"])?;
    for trial in votes.trials() {
        let score = preference_metric(&votes, trial)?;
        pref.write_record([trial.clone(), votes.participants().len().to_string(), score.to_string()])?;
    }
    pref.flush()?;

    let mut weights = csv::Writer::from_path(out.join("vote_weights.csv"))?;
    weights.write_record(["block", "trial", "best_weight", "worst_weight"])?;
    for block in votes.blocks() {
        for (trial, w) in weighted_best_worst(&votes, block) {
            weights.write_record([block.to_string(), trial, w.best.to_string(), w.worst.to_string()])?;
        }
    }
    weights.flush()?;

    let summary = likert_summary(&LikertTable::from_responses(&responses), expected);
    let mut likert = csv::Writer::from_path(out.join("likert.csv"))?;
    likert.write_record(std::iter::once("trial").chain(LIKERT_HEADER))?;
    for row in &summary.trials {
        likert.write_record(likert_record(&row.key, row))?;
    }
    likert.flush()?;
    let mut by_order = csv::Writer::from_path(out.join("likert_by_order.csv"))?;
    by_order.write_record(std::iter::once("order").chain(LIKERT_HEADER))?;
    for (o, row) in &summary.by_order {
        by_order.write_record(likert_record(&o.to_string(), row))?;
    }
    by_order.flush()?;
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "{} response(s) from {} participant(s) -> {}",
        responses.len(),
        votes.participants().len(),
        out.join("preference.csv").display()
    );
    Ok(())
}

/// Trial names a questionnaire is expected to cover.
fn expected_trials(protocol: Option<&Path>) -> Result<Vec<String>> {
    let p = match protocol {
        Some(path) => ProtocolConfig::from_file(path)?,
        None => ProtocolConfig::default(),
    };
    Ok(p.blocks
        .iter()
        .flat_map(|b| p.block_trials(b))
        .map(|c| c.label())
        .collect())
}

pub fn run(paths: &[std::path::PathBuf], out: &Path, protocol: Option<&Path>) -> Result<()> {
    let inputs = collect(paths)?;
    std::fs::create_dir_all(out)?;
    let of = |k: Kind| inputs.iter().filter(|i| i.kind == k).collect::<Vec<_>>();
    let (logs, surveys) = (of(Kind::TickLog), of(Kind::Questionnaire));
    for s in of(Kind::Series) {
        eprintln!("note: {} is already a series file; skipped", s.path.display());
    }
    if logs.is_empty() && surveys.is_empty() {
        anyhow::bail!("no tick logs or questionnaires found");
    }
    if !logs.is_empty() {
        analyze_logs(&logs, out)?;
    }
    if !surveys.is_empty() {
        analyze_questionnaires(&surveys, out, &expected_trials(protocol)?)?;
    }
    Ok(())
}
