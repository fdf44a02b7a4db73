//! RMSE metrics in degrees, model ranking and report rendering.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datapipe::{FeatureScenario, WindowedDataset};
use crate::gradcore::Array;
use crate::models::{Forecaster, ModelKind};
use crate::textio::{fmt_f64, write_json, write_string};
use crate::trainer::predict_all;
use crate::{Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::shape(format!(
            "rmse needs equal non-empty lengths, got {} and {}",
            pred.len(),
            truth.len()
        )));
    }
    let sum: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sum / pred.len() as f64).sqrt())
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Median with the two middle values averaged for even counts.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub dataset: String,
    pub scenario: FeatureScenario,
    pub model: ModelKind,
    pub seed: u64,
    pub horizon: usize,
    pub n_eval_windows: usize,
    /// Degrees, one entry per horizon step.
    pub per_step_rmse: Vec<f64>,
    /// Mean of `per_step_rmse`.
    pub average_rmse: f64,
    /// RMSE over every (window, step) entry at once.
    pub pooled_rmse: f64,
}

impl EvalReport {
    pub fn validate(&self) -> Result<()> {
        if self.per_step_rmse.len() != self.horizon
            || self.per_step_rmse.iter().any(|v| !(*v >= 0.0))
            || (self.average_rmse - mean(&self.per_step_rmse)).abs() > 1e-12 * self.average_rmse.max(1.0)
        {
            return Err(Error::data(format!(
                "inconsistent report for {}/{}/{}",
                self.dataset, self.scenario, self.model
            )));
        }
        Ok(())
    }

    /// `step,rmse_deg`, one row per horizon step.
    pub fn per_step_csv(&self) -> String {
        let mut out = String::from("step,rmse_deg\n");
        for (k, v) in self.per_step_rmse.iter().enumerate() {
            let _ = writeln!(out, "{},{}", k + 1, fmt_f64(*v));
        }
        out
    }
}

/// Predictions and truths in degrees, `[n × p]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Traces {
    pub pred_deg: Array,
    pub truth_deg: Array,
}

/// Scores normalized predictions `[n × p]` against the dataset targets after
/// mapping both back to degrees.
pub fn score_predictions(
    pred_norm: &Array,
    ds: &WindowedDataset,
    model: ModelKind,
    seed: u64,
) -> Result<(EvalReport, Traces)> {
    let (n, p) = (ds.len(), ds.horizon());
    if n == 0 {
        return Err(Error::domain("no evaluation windows"));
    }
    pred_norm.check_shape(&[n, p], "predictions")?;
    let scaler = ds.roll_scaler();
    let pred = pred_norm.map(|v| scaler.inverse(0, v));
    let truth = ds.targets.map(|v| scaler.inverse(0, v));
    let mut per_step = Vec::with_capacity(p);
    for k in 0..p {
        let col = |a: &Array| (0..n).map(|j| a.row(j)[k]).collect::<Vec<_>>();
        per_step.push(rmse(&col(&pred), &col(&truth))?);
    }
    let report = EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        dataset: ds.meta.label.clone(),
        scenario: ds.meta.scenario,
        model,
        seed,
        horizon: p,
        n_eval_windows: n,
        average_rmse: mean(&per_step),
        pooled_rmse: rmse(pred.data(), truth.data())?,
        per_step_rmse: per_step,
    };
    Ok((report, Traces { pred_deg: pred, truth_deg: truth }))
}

pub fn evaluate(model: &mut Forecaster, ds: &WindowedDataset) -> Result<(EvalReport, Traces)> {
    if ds.is_empty() {
        return Err(Error::domain("validation set is empty"));
    }
    let pred = predict_all(model, ds, 256)?;
    let spec = model.spec();
    score_predictions(&pred, ds, spec.kind, spec.seed)
}

/// Model-free reference: repeats the last observed roll value over the
/// horizon. Needs a scenario that carries roll.
pub fn persistence_predictions(ds: &WindowedDataset) -> Result<Array> {
    if ds.meta.scenario == FeatureScenario::WaveOnly {
        return Err(Error::config("persistence needs the roll channel in the inputs"));
    }
    let (d, c, p) = (ds.lag(), ds.channels(), ds.horizon());
    let data = (0..ds.len())
        .flat_map(|j| std::iter::repeat_n(ds.input(j)[(d - 1) * c], p))
        .collect();
    Array::from_vec(&[ds.len(), p], data)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub model: ModelKind,
    pub average_rmse: f64,
    /// Horizon steps at which this entry has the lowest RMSE.
    pub step_wins: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub dataset: String,
    pub horizon: usize,
    pub entries: Vec<RankEntry>,
}

/// Ranks reports by ascending average RMSE; ties go to the model-kind name in
/// lexicographic order. Per-step wins follow the same tie rule.
pub fn compare(reports: &[EvalReport]) -> Result<Ranking> {
    let first = reports
        .first()
        .ok_or_else(|| Error::domain("nothing to compare"))?;
    if let Some(r) = reports.iter().find(|r| r.horizon != first.horizon) {
        return Err(Error::domain(format!(
            "cannot compare horizons {} and {}",
            first.horizon, r.horizon
        )));
    }
    if let Some(r) = reports.iter().find(|r| r.dataset != first.dataset) {
        return Err(Error::domain(format!(
            "cannot compare datasets `{}` and `{}`",
            first.dataset, r.dataset
        )));
    }
    let mut order: Vec<&EvalReport> = reports.iter().collect();
    order.sort_by(|a, b| {
        a.average_rmse
            .total_cmp(&b.average_rmse)
            .then_with(|| a.model.name().cmp(b.model.name()))
    });
    let mut wins = vec![0usize; order.len()];
    for k in 0..first.horizon {
        let best = (0..order.len())
            .min_by(|&i, &j| {
                order[i].per_step_rmse[k]
                    .total_cmp(&order[j].per_step_rmse[k])
                    .then_with(|| order[i].model.name().cmp(order[j].model.name()))
            })
            .expect("non-empty");
        wins[best] += 1;
    }
    Ok(Ranking {
        dataset: first.dataset.clone(),
        horizon: first.horizon,
        entries: order
            .iter()
            .zip(wins)
            .map(|(r, step_wins)| RankEntry {
                model: r.model,
                average_rmse: r.average_rmse,
                step_wins,
            })
            .collect(),
    })
}

pub struct Series<'a> {
    pub name: &'a str,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Self-contained SVG line chart.
pub fn line_plot_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (70.0, 150.0, 40.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let finite = |v: &&f64| v.is_finite();
    let xs = series.iter().flat_map(|s| s.x.iter()).filter(finite);
    let ys = series.iter().flat_map(|s| s.y.iter()).filter(finite);
    let (mut x0, mut x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (mut y0, mut y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if !y0.is_finite() {
        (y0, y1) = (0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + ph - (y - y0) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        left + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            sx(xv),
            top + ph + 16.0,
            tick(xv)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            left - 6.0,
            sy(yv) + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        h - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        escape(y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = s
            .x
            .iter()
            .zip(&s.y)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let ly = top + 14.0 + 18.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            left + pw + 10.0,
            left + pw + 30.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}">{}</text>"#,
            left + pw + 36.0,
            ly + 4.0,
            escape(s.name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn tick(v: f64) -> String {
    if v == 0.0 || (1e-2..1e4).contains(&v.abs()) {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

pub fn per_step_svg(title: &str, reports: &[(&str, &EvalReport)]) -> String {
    let series: Vec<Series> = reports
        .iter()
        .map(|(name, r)| Series {
            name,
            x: (1..=r.horizon).map(|k| k as f64).collect(),
            y: r.per_step_rmse.clone(),
        })
        .collect();
    line_plot_svg(title, "prediction step", "RMSE (deg)", &series)
}

/// Window indices at four evenly spaced positions of `n` windows.
pub fn trace_windows(n: usize) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let mut idx: Vec<usize> = (0..4).map(|i| i * (n - 1) / 3).collect();
    idx.dedup();
    idx
}

/// Predicted and true roll over the horizon of four validation windows.
pub fn traces_svg(title: &str, traces: &Traces) -> String {
    let p = traces.pred_deg.dim(1);
    let steps: Vec<f64> = (1..=p).map(|k| k as f64).collect();
    let mut names = Vec::new();
    for j in trace_windows(traces.pred_deg.dim(0)) {
        names.push((format!("true #{j}"), traces.truth_deg.row(j).to_vec()));
        names.push((format!("pred #{j}"), traces.pred_deg.row(j).to_vec()));
    }
    let series: Vec<Series> = names
        .iter()
        .map(|(n, y)| Series { name: n, x: steps.clone(), y: y.clone() })
        .collect();
    line_plot_svg(title, "prediction step", "roll (deg)", &series)
}

/// Writes `report.json`, `per_step_rmse.csv`, `per_step_rmse.svg` and, with
/// traces, `traces.svg` into `dir`.
pub fn emit_outputs(report: &EvalReport, traces: Option<&Traces>, dir: &Path) -> Result<()> {
    write_json(&dir.join("report.json"), report)?;
    write_string(&dir.join("per_step_rmse.csv"), &report.per_step_csv())?;
    let title = format!("{} / {} / {}", report.dataset, report.scenario, report.model);
    write_string(
        &dir.join("per_step_rmse.svg"),
        &per_step_svg(&title, &[(report.model.name(), report)]),
    )?;
    if let Some(t) = traces {
        write_string(&dir.join("traces.svg"), &traces_svg(&title, t))?;
    }
    Ok(())
}
