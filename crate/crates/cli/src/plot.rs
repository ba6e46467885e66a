//! `plot`: SVG charts. Tick logs and series files give one stacked time
//! chart each; questionnaires give one summary chart.

use std::path::Path;

use anyhow::{bail, Context, Result};
use leadstep::analysis::{
    likert_summary, log_series, preference_metric, read_responses_file, LikertTable, LogTable, Stat, VoteTable,
};
use plotters::coord::Shift;
use plotters::prelude::*;

use crate::inputs::{collect, Input, Kind};

type Area<'a> = DrawingArea<SVGBackend<'a>, Shift>;

fn bounds<'a>(values: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if lo > hi {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        let pad = (hi.abs() * 0.1).max(1.0);
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(255, 127, 14),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

fn pick(i: usize) -> RGBColor {
    PALETTE[i % PALETTE.len()]
}

fn line_panel(area: &Area, title: &str, unit: &str, time: &[f64], lines: &[(String, Vec<f64>)]) -> Result<()> {
    let (t0, t1) = bounds(time.iter());
    let (lo, hi) = bounds(lines.iter().flat_map(|(_, v)| v.iter()));
    let mut chart = ChartBuilder::on(area)
        .caption(title, ("sans-serif", 16))
        .margin(8)
        .x_label_area_size(30)
        .y_label_area_size(60)
        .build_cartesian_2d(t0..t1, lo..hi)?;
    chart
        .configure_mesh()
        .x_desc("time (s)")
        .y_desc(unit)
        .light_line_style(WHITE)
        .draw()?;
    for (i, (name, ys)) in lines.iter().enumerate() {
        let color = pick(i);
        chart
            .draw_series(LineSeries::new(
                time.iter().copied().zip(ys.iter().copied()),
                color.stroke_width(1),
            ))?
            .label(name.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
    }
    chart
        .configure_series_labels()
        .position(SeriesLabelPosition::UpperRight)
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()?;
    Ok(())
}

fn plot_series(series: &LogTable, title: &str, path: &Path) -> Result<()> {
    let time = series.values("time")?;
    let hands: Vec<String> = series
        .header
        .iter()
        .filter_map(|h| h.strip_suffix("_deflection").map(str::to_string))
        .collect();
    let per_hand = |suffix: &str| -> Result<Vec<(String, Vec<f64>)>> {
        hands
            .iter()
            .map(|h| Ok((h.clone(), series.values(&format!("{h}_{suffix}"))?)))
            .collect()
    };
    let mut displacement = per_hand("displacement")?;
    for (name, v) in per_hand("setpoint_offset")? {
        displacement.push((format!("{name} setpoint"), v));
    }
    let root = SVGBackend::new(path, (1000, 1250)).into_drawing_area();
    root.fill(&WHITE)?;
    let root = root.titled(title, ("sans-serif", 22))?;
    let panels = root.split_evenly((5, 1));
    line_panel(&panels[0], "hand deflection", "m", &time, &per_hand("deflection")?)?;
    line_panel(&panels[1], "measured force", "N", &time, &per_hand("force")?)?;
    line_panel(&panels[2], "compliance gate", "lambda", &time, &per_hand("lambda")?)?;
    line_panel(&panels[3], "hand displacement", "m", &time, &displacement)?;
    line_panel(
        &panels[4],
        "torso yaw offset",
        "rad",
        &time,
        &[("offset".into(), series.values("torso_yaw_offset")?)],
    )?;
    root.present()?;
    Ok(())
}

/// Points with +-1 std whiskers, one per label.
fn stat_panel(area: &Area, title: &str, labels: &[String], stats: &[Option<Stat>]) -> Result<()> {
    let n = labels.len();
    let mut chart = ChartBuilder::on(area)
        .caption(title, ("sans-serif", 16))
        .margin(8)
        .x_label_area_size(40)
        .y_label_area_size(40)
        .build_cartesian_2d((0..n.max(2) - 1).into_segmented(), 0.5f64..5.5)?;
    chart
        .configure_mesh()
        .x_labels(n)
        .x_label_formatter(&|v| match v {
            SegmentValue::CenterOf(i) => labels.get(*i).cloned().unwrap_or_default(),
            _ => String::new(),
        })
        .light_line_style(WHITE)
        .draw()?;
    let color = pick(0);
    for (i, s) in stats.iter().enumerate() {
        let Some(s) = s else { continue };
        let x = SegmentValue::CenterOf(i);
        chart.draw_series(std::iter::once(PathElement::new(
            vec![(x.clone(), s.mean - s.std), (x.clone(), s.mean + s.std)],
            color.stroke_width(2),
        )))?;
        chart.draw_series(std::iter::once(Circle::new((x, s.mean), 4, color.filled())))?;
    }
    Ok(())
}

fn plot_questionnaires(files: &[&Input], path: &Path) -> Result<()> {
    let mut responses = Vec::new();
    for f in files {
        responses.extend(read_responses_file(&f.path).with_context(|| format!("reading {}", f.path.display()))?);
    }
    let votes = VoteTable::from_responses(&responses)?;
    let trials: Vec<String> = votes.trials().iter().cloned().collect();
    let scores = trials
        .iter()
        .map(|t| preference_metric(&votes, t))
        .collect::<leadstep::error::Result<Vec<f64>>>()?;
    let summary = likert_summary(&LikertTable::from_responses(&responses), &[]);

    let root = SVGBackend::new(path, (1000, 1000)).into_drawing_area();
    root.fill(&WHITE)?;
    let panels = root.split_evenly((4, 1));

    let n = trials.len();
    let mut chart = ChartBuilder::on(&panels[0])
        .caption("preference score", ("sans-serif", 16))
        .margin(8)
        .x_label_area_size(40)
        .y_label_area_size(40)
        .build_cartesian_2d((0..n.max(2) - 1).into_segmented(), 1f64..5.0)?;
    chart
        .configure_mesh()
        .x_labels(n)
        .x_label_formatter(&|v| match v {
            SegmentValue::CenterOf(i) => trials.get(*i).cloned().unwrap_or_default(),
            _ => String::new(),
        })
        .light_line_style(WHITE)
        .draw()?;
    chart.draw_series(scores.iter().enumerate().map(|(i, &s)| {
        let color = if s >= 3.0 { GREEN.mix(0.7) } else { RED.mix(0.7) };
        let mut bar = Rectangle::new(
            [(SegmentValue::Exact(i), 3.0), (SegmentValue::Exact(i + 1), s)],
            color.filled(),
        );
        bar.set_margin(0, 0, 6, 6);
        bar
    }))?;

    let labels: Vec<String> = summary.trials.iter().map(|r| r.key.clone()).collect();
    let conf: Vec<Option<Stat>> = summary.trials.iter().map(|r| r.confidence).collect();
    let comf: Vec<Option<Stat>> = summary.trials.iter().map(|r| r.comfort).collect();
    stat_panel(&panels[1], "confidence (mean +- std)", &labels, &conf)?;
    stat_panel(&panels[2], "comfort (mean +- std)", &labels, &comf)?;
    let order_labels: Vec<String> = summary.by_order.iter().map(|(o, _)| o.to_string()).collect();
    let order_conf: Vec<Option<Stat>> = summary.by_order.iter().map(|(_, r)| r.confidence).collect();
    stat_panel(&panels[3], "confidence by trial number", &order_labels, &order_conf)?;
    root.present()?;
    Ok(())
}

pub fn run(paths: &[std::path::PathBuf], out: &Path) -> Result<()> {
    let inputs = collect(paths)?;
    if inputs.is_empty() {
        bail!("nothing to plot");
    }
    std::fs::create_dir_all(out)?;
    let mut written = 0;
    for input in inputs.iter().filter(|i| i.kind != Kind::Questionnaire) {
        let table = LogTable::read_file(&input.path).with_context(|| format!("reading {}", input.path.display()))?;
        let series = match input.kind {
            Kind::TickLog => log_series(&table)?,
            _ => table,
        };
        plot_series(&series, &input.name, &out.join(format!("{}.svg", input.name)))
            .with_context(|| format!("plotting {}", input.path.display()))?;
        written += 1;
    }
    let surveys: Vec<&Input> = inputs.iter().filter(|i| i.kind == Kind::Questionnaire).collect();
    if !surveys.is_empty() {
        plot_questionnaires(&surveys, &out.join("questionnaire.svg"))?;
        written += 1;
    }
    println!("wrote {written} chart(s) to {}", out.display());
    Ok(())
}
