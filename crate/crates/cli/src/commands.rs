//! Subcommand implementations. Each is a pure function of the configuration,
//! its arguments and the files it reads.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rollcast_core::datapipe::{
    make_windows_with, normalize_window, prepare, resample, split, FeatureScenario, MinMaxScaler,
    N_RAW_CHANNELS,
};
use rollcast_core::evaluator::{
    compare, emit_outputs, evaluate, median, per_step_svg, traces_svg, EvalReport, Ranking, Traces,
};
use rollcast_core::gradcore::Array;
use rollcast_core::models::{Forecaster, ModelKind};
use rollcast_core::rollsurrogate::{max_abs_roll, simulate_run, MotionRecord, RECORD_HEADER};
use rollcast_core::textio::{fmt_f64, read_json, write_json, write_string, NumericTable};
use rollcast_core::trainer::{load_checkpoint, save_checkpoint, train, TrainHistory};
use rollcast_core::{Error, Result};

use crate::config::{dataset_label, file_stem, ExperimentConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulatedRecord {
    pub label: String,
    pub heading: f64,
    pub path: PathBuf,
    pub max_abs_roll_deg: f64,
}

/// Simulates one record per heading into `out_dir` (default: the config's
/// data directory).
pub fn cmd_simulate(
    cfg: &ExperimentConfig,
    headings: Option<&[f64]>,
    seed: Option<u64>,
    out_dir: Option<&Path>,
) -> Result<Vec<SimulatedRecord>> {
    let headings = headings.unwrap_or(&cfg.simulation.headings);
    let seed = seed.unwrap_or(cfg.simulation.wave_seed);
    let dir = out_dir.map_or_else(|| cfg.data_dir(), Path::to_path_buf);
    let mut out = Vec::new();
    for &heading in headings {
        let label = dataset_label(heading);
        let setup = cfg.simulation_setup(heading, seed);
        let record = simulate_run(&setup, &label)?;
        let path = dir.join(format!("{}.csv", file_stem(&label)));
        record.save(&path)?;
        log::info!("{label}: heading {heading} deg, max |roll| {:.2} deg -> {}", max_abs_roll(&record), path.display());
        out.push(SimulatedRecord {
            label,
            heading,
            path,
            max_abs_roll_deg: max_abs_roll(&record),
        });
    }
    Ok(out)
}

/// Loads a dataset by label from the data directory and decimates it to the
/// pipeline spacing.
pub fn load_dataset(cfg: &ExperimentConfig, label: &str) -> Result<MotionRecord> {
    let path = cfg.record_path(label);
    if !path.exists() {
        return Err(Error::data(format!(
            "no record for `{label}` at {}; run `rollcast simulate` first",
            path.display()
        )));
    }
    load_record(cfg, &path)
}

pub fn load_record(cfg: &ExperimentConfig, path: &Path) -> Result<MotionRecord> {
    let record = MotionRecord::load(path)?;
    if (record.dt - cfg.pipeline.sample_dt).abs() <= 1e-12 {
        Ok(record)
    } else {
        resample(&record, cfg.pipeline.sample_dt)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub dataset: String,
    pub scenario: FeatureScenario,
    pub horizon: usize,
    pub model: ModelKind,
    pub seed: u64,
}

impl CellKey {
    pub fn dir_name(&self) -> String {
        format!(
            "{}_{}_{}_p{}_s{}",
            file_stem(&self.dataset),
            self.scenario,
            self.model,
            self.horizon,
            self.seed
        )
    }
}

#[derive(Clone, Debug)]
pub struct CellOutcome {
    pub key: CellKey,
    pub report: EvalReport,
    pub history: TrainHistory,
    pub traces: Traces,
    pub model: Forecaster,
    pub scaler: MinMaxScaler,
}

/// Trains and evaluates one (dataset, scenario, horizon, model, seed) cell.
/// The seed drives both the initialization and the batch shuffling.
pub fn run_cell(cfg: &ExperimentConfig, record: &MotionRecord, key: &CellKey) -> Result<CellOutcome> {
    let ratio = cfg.pipeline.train_ratio;
    let (train_set, val_set) = prepare(record, key.horizon, key.horizon, key.scenario, ratio)?;
    let spec = cfg.model_spec(key.model, key.horizon, key.scenario.channels(), key.seed);
    let mut model = Forecaster::build(&spec)?;
    let mut tc = cfg.train.clone();
    tc.shuffle_seed = tc.shuffle_seed.wrapping_add(key.seed);
    let history = train(&mut model, &train_set, &val_set, &tc)?;
    let (report, traces) = evaluate(&mut model, &val_set)?;
    log::info!(
        "{}: {} epochs (best {}), average RMSE {:.4} deg in {:.1} s",
        key.dir_name(),
        history.epochs.len(),
        history.best_epoch,
        report.average_rmse,
        history.wall_time_s
    );
    Ok(CellOutcome {
        key: key.clone(),
        report,
        history,
        traces,
        model,
        scaler: train_set.meta.scaler.clone(),
    })
}

/// `history.csv`, `report.json`, `per_step_rmse.csv` and the plots.
pub fn write_cell(cell: &CellOutcome, dir: &Path) -> Result<()> {
    write_string(&dir.join("history.csv"), &cell.history.to_csv())?;
    emit_outputs(&cell.report, Some(&cell.traces), dir)
}

/// Runs cells on up to `jobs` threads; results keep the input order.
pub fn run_cells(
    cfg: &ExperimentConfig,
    records: &BTreeMap<String, MotionRecord>,
    keys: &[CellKey],
    jobs: usize,
) -> Result<Vec<CellOutcome>> {
    let one = |key: &CellKey| run_cell(cfg, &records[&key.dataset], key);
    if jobs <= 1 {
        return keys.iter().map(one).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::config(format!("cannot start {jobs} worker threads: {e}")))?;
    pool.install(|| keys.par_iter().map(one).collect())
}

fn load_all(cfg: &ExperimentConfig, labels: &[String]) -> Result<BTreeMap<String, MotionRecord>> {
    labels
        .iter()
        .map(|l| Ok((l.clone(), load_dataset(cfg, l)?)))
        .collect()
}

/// Median over seeds of one grid position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub dataset: String,
    pub scenario: FeatureScenario,
    pub horizon: usize,
    pub model: ModelKind,
    pub seeds: Vec<u64>,
    pub average_rmse: Vec<f64>,
    pub median_average_rmse: f64,
    pub median_per_step_rmse: Vec<f64>,
}

fn summarize(cells: &[CellOutcome]) -> Vec<CellSummary> {
    let mut groups: BTreeMap<(String, FeatureScenario, usize, ModelKind), Vec<&CellOutcome>> = BTreeMap::new();
    for c in cells {
        let k = &c.key;
        groups
            .entry((k.dataset.clone(), k.scenario, k.horizon, k.model))
            .or_default()
            .push(c);
    }
    groups
        .into_iter()
        .map(|((dataset, scenario, horizon, model), cs)| {
            let avgs: Vec<f64> = cs.iter().map(|c| c.report.average_rmse).collect();
            let per_step = (0..horizon)
                .map(|k| median(&cs.iter().map(|c| c.report.per_step_rmse[k]).collect::<Vec<_>>()))
                .collect();
            CellSummary {
                dataset,
                scenario,
                horizon,
                model,
                seeds: cs.iter().map(|c| c.key.seed).collect(),
                median_average_rmse: median(&avgs),
                average_rmse: avgs,
                median_per_step_rmse: per_step,
            }
        })
        .collect()
}

fn summary_csv(rows: &[CellSummary]) -> String {
    let mut out = String::from("dataset,scenario,horizon,model,n_seeds,median_average_rmse_deg\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.dataset,
            r.scenario,
            r.horizon,
            r.model,
            r.seeds.len(),
            fmt_f64(r.median_average_rmse)
        );
    }
    out
}

#[derive(Clone, Debug)]
pub struct AblationResult {
    pub cells: Vec<CellOutcome>,
    pub summary: Vec<CellSummary>,
}

impl AblationResult {
    pub fn median(&self, dataset: &str, scenario: FeatureScenario, horizon: usize) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.dataset == dataset && s.scenario == scenario && s.horizon == horizon)
            .map(|s| s.median_average_rmse)
    }
}

pub fn ablation_keys(cfg: &ExperimentConfig) -> Vec<CellKey> {
    let a = &cfg.ablation;
    let mut keys = Vec::new();
    for dataset in &a.datasets {
        for &horizon in &a.horizons {
            for &scenario in &a.scenarios {
                for &seed in &cfg.seeds {
                    keys.push(CellKey {
                        dataset: dataset.clone(),
                        scenario,
                        horizon,
                        model: a.model,
                        seed,
                    });
                }
            }
        }
    }
    keys
}

/// Feature-space ablation: every dataset × scenario × horizon × seed with the
/// ablation learner. Writes per-cell artifacts plus `grid.json` and
/// `summary.csv` under `<output_dir>/ablation`.
pub fn cmd_ablate(cfg: &ExperimentConfig, jobs: usize) -> Result<AblationResult> {
    let records = load_all(cfg, &cfg.ablation.datasets)?;
    let cells = run_cells(cfg, &records, &ablation_keys(cfg), jobs)?;
    let summary = summarize(&cells);
    let dir = cfg.output_dir.join("ablation");
    for c in &cells {
        write_cell(c, &dir.join("cells").join(c.key.dir_name()))?;
    }
    let reports: Vec<&EvalReport> = cells.iter().map(|c| &c.report).collect();
    write_json(&dir.join("grid.json"), &reports)?;
    write_json(&dir.join("summary.json"), &summary)?;
    write_string(&dir.join("summary.csv"), &summary_csv(&summary))?;
    write_string(&dir.join("table.md"), &ablation_table(&summary, cfg))?;
    Ok(AblationResult { cells, summary })
}

/// Datasets as rows, (horizon, scenario) as columns, median average RMSE.
fn ablation_table(summary: &[CellSummary], cfg: &ExperimentConfig) -> String {
    let a = &cfg.ablation;
    let mut out = String::from("| dataset |");
    for h in &a.horizons {
        for s in &a.scenarios {
            let _ = write!(out, " {h}-step {s} |");
        }
    }
    out.push('\n');
    out.push_str(&"|---".repeat(1 + a.horizons.len() * a.scenarios.len()));
    out.push_str("|\n");
    for d in &a.datasets {
        let _ = write!(out, "| {d} |");
        for &h in &a.horizons {
            for &s in &a.scenarios {
                let v = summary
                    .iter()
                    .find(|r| &r.dataset == d && r.horizon == h && r.scenario == s)
                    .map_or(f64::NAN, |r| r.median_average_rmse);
                let _ = write!(out, " {v:.5} |");
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MedianRanking {
    pub dataset: String,
    pub horizon: usize,
    /// Ascending by median average RMSE, ties by model name.
    pub order: Vec<(ModelKind, f64)>,
}

#[derive(Clone, Debug)]
pub struct ComparisonResult {
    pub cells: Vec<CellOutcome>,
    pub summary: Vec<CellSummary>,
    pub rankings: Vec<MedianRanking>,
    /// Per-seed rankings with per-step win counts.
    pub seed_rankings: Vec<(u64, Ranking)>,
}

impl ComparisonResult {
    pub fn median(&self, dataset: &str, model: ModelKind) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.dataset == dataset && s.model == model)
            .map(|s| s.median_average_rmse)
    }
}

pub fn comparison_keys(cfg: &ExperimentConfig) -> Vec<CellKey> {
    let c = &cfg.comparison;
    let mut keys = Vec::new();
    for dataset in &c.datasets {
        for &model in &c.models {
            for &seed in &cfg.seeds {
                keys.push(CellKey {
                    dataset: dataset.clone(),
                    scenario: c.scenario,
                    horizon: c.horizon,
                    model,
                    seed,
                });
            }
        }
    }
    keys
}

/// Model comparison on the configured datasets. Writes per-cell artifacts,
/// `ranking.json`, `summary.csv` and per-dataset plots of the median
/// per-step RMSE under `<output_dir>/comparison`.
pub fn cmd_compare(cfg: &ExperimentConfig, jobs: usize) -> Result<ComparisonResult> {
    let records = load_all(cfg, &cfg.comparison.datasets)?;
    let cells = run_cells(cfg, &records, &comparison_keys(cfg), jobs)?;
    let summary = summarize(&cells);
    let dir = cfg.output_dir.join("comparison");
    for c in &cells {
        write_cell(c, &dir.join("cells").join(c.key.dir_name()))?;
    }

    let mut rankings = Vec::new();
    let mut seed_rankings = Vec::new();
    for dataset in &cfg.comparison.datasets {
        let mut order: Vec<(ModelKind, f64)> = summary
            .iter()
            .filter(|s| &s.dataset == dataset)
            .map(|s| (s.model, s.median_average_rmse))
            .collect();
        order.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.name().cmp(b.0.name())));
        rankings.push(MedianRanking {
            dataset: dataset.clone(),
            horizon: cfg.comparison.horizon,
            order,
        });
        for &seed in &cfg.seeds {
            let reports: Vec<EvalReport> = cells
                .iter()
                .filter(|c| &c.key.dataset == dataset && c.key.seed == seed)
                .map(|c| c.report.clone())
                .collect();
            seed_rankings.push((seed, compare(&reports)?));
        }

        let medians: Vec<(String, EvalReport)> = summary
            .iter()
            .filter(|s| &s.dataset == dataset)
            .map(|s| {
                let mut r = cells
                    .iter()
                    .find(|c| &c.key.dataset == dataset && c.key.model == s.model)
                    .expect("cell for summary")
                    .report
                    .clone();
                r.per_step_rmse = s.median_per_step_rmse.clone();
                r.average_rmse = rollcast_core::evaluator::mean(&r.per_step_rmse);
                (s.model.name().to_string(), r)
            })
            .collect();
        let named: Vec<(&str, &EvalReport)> = medians.iter().map(|(n, r)| (n.as_str(), r)).collect();
        write_string(
            &dir.join(format!("{}_per_step_rmse.svg", file_stem(dataset))),
            &per_step_svg(&format!("{dataset}: median per-step RMSE"), &named),
        )?;
        if let Some(&seed) = cfg.seeds.first() {
            for c in cells.iter().filter(|c| &c.key.dataset == dataset && c.key.seed == seed) {
                write_string(
                    &dir.join(format!("{}_{}_traces.svg", file_stem(dataset), c.key.model)),
                    &traces_svg(&format!("{dataset} / {} / seed {seed}", c.key.model), &c.traces),
                )?;
            }
        }
    }
    write_json(&dir.join("ranking.json"), &rankings)?;
    let seed_only: Vec<&Ranking> = seed_rankings.iter().map(|(_, r)| r).collect();
    write_json(&dir.join("seed_rankings.json"), &seed_only)?;
    write_json(&dir.join("summary.json"), &summary)?;
    write_string(&dir.join("summary.csv"), &summary_csv(&summary))?;
    Ok(ComparisonResult {
        cells,
        summary,
        rankings,
        seed_rankings,
    })
}

pub const PIPELINE_FILE: &str = "pipeline.json";

/// Everything besides the weights needed to apply a checkpoint to raw data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineMeta {
    pub dataset: String,
    pub scenario: FeatureScenario,
    pub lag: usize,
    pub horizon: usize,
    pub sample_dt: f64,
    pub train_ratio: f64,
    /// Four-channel scaler `[roll, wave1, wave2, wave3]`.
    pub scaler: MinMaxScaler,
}

pub struct TrainRequest<'a> {
    /// Dataset label from the data directory, or a record CSV path.
    pub source: &'a str,
    pub model: ModelKind,
    pub scenario: FeatureScenario,
    pub horizon: usize,
    pub seed: u64,
    pub out_dir: &'a Path,
}

fn resolve_source(cfg: &ExperimentConfig, source: &str) -> Result<MotionRecord> {
    let as_path = Path::new(source);
    if as_path.extension().is_some_and(|e| e == "csv") {
        load_record(cfg, as_path)
    } else {
        load_dataset(cfg, source)
    }
}

/// Trains one model and writes a checkpoint directory (parameters, spec,
/// pipeline metadata) with its history and validation report.
pub fn cmd_train(cfg: &ExperimentConfig, req: &TrainRequest) -> Result<CellOutcome> {
    let record = resolve_source(cfg, req.source)?;
    let key = CellKey {
        dataset: record.label.clone(),
        scenario: req.scenario,
        horizon: req.horizon,
        model: req.model,
        seed: req.seed,
    };
    let cell = run_cell(cfg, &record, &key)?;
    save_checkpoint(&cell.model, req.out_dir)?;
    write_json(
        &req.out_dir.join(PIPELINE_FILE),
        &PipelineMeta {
            dataset: record.label.clone(),
            scenario: req.scenario,
            lag: req.horizon,
            horizon: req.horizon,
            sample_dt: record.dt,
            train_ratio: cfg.pipeline.train_ratio,
            scaler: cell.scaler.clone(),
        },
    )?;
    write_cell(&cell, req.out_dir)?;
    Ok(cell)
}

fn load_trained(checkpoint: &Path) -> Result<(Forecaster, PipelineMeta)> {
    let model = load_checkpoint(checkpoint)?;
    let meta: PipelineMeta = read_json(&checkpoint.join(PIPELINE_FILE))
        .map_err(|e| Error::Checkpoint(format!("missing or unreadable pipeline metadata: {e}")))?;
    meta.scaler.validate()?;
    let spec = model.spec();
    if spec.lag != meta.lag || spec.horizon != meta.horizon || spec.channels != meta.scenario.channels() {
        return Err(Error::Checkpoint(format!(
            "model spec (d={}, p={}, C={}) disagrees with pipeline metadata (d={}, p={}, {})",
            spec.lag, spec.horizon, spec.channels, meta.lag, meta.horizon, meta.scenario
        )));
    }
    Ok((model, meta))
}

/// Scores a checkpoint on the validation portion of a record, normalized with
/// the checkpoint's own scaler.
pub fn cmd_evaluate(cfg: &ExperimentConfig, checkpoint: &Path, source: &str, out_dir: Option<&Path>) -> Result<EvalReport> {
    let (mut model, meta) = load_trained(checkpoint)?;
    let record = resolve_source(cfg, source)?;
    let record = if (record.dt - meta.sample_dt).abs() > 1e-12 {
        resample(&record, meta.sample_dt)?
    } else {
        record
    };
    let ds = make_windows_with(&record, meta.lag, meta.horizon, meta.scenario, meta.train_ratio, meta.scaler)?;
    let (_, val) = split(&ds, meta.train_ratio)?;
    let (report, traces) = evaluate(&mut model, &val)?;
    if let Some(dir) = out_dir {
        emit_outputs(&report, Some(&traces), dir)?;
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Forecast {
    pub step: usize,
    pub t: f64,
    pub roll_pred_deg: f64,
}

pub fn forecast_csv(rows: &[Forecast]) -> String {
    let mut out = String::from("step,t,roll_pred_deg\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.step, fmt_f64(r.t), fmt_f64(r.roll_pred_deg));
    }
    out
}

/// Forecasts `p` steps past the last row of a record-format CSV
/// (`t,roll_deg,wave1,wave2,wave3`, at least `d` rows at the model's spacing).
pub fn cmd_predict(checkpoint: &Path, window_csv: &Path) -> Result<Vec<Forecast>> {
    let (mut model, meta) = load_trained(checkpoint)?;
    let text = std::fs::read_to_string(window_csv).map_err(|e| Error::io(window_csv, e))?;
    let table = NumericTable::parse(&text, Some(&RECORD_HEADER), &window_csv.display().to_string())?;
    let d = meta.lag;
    if table.rows.len() < d {
        return Err(Error::data(format!(
            "{}: {} rows, the model needs the last {d}",
            window_csv.display(),
            table.rows.len()
        )));
    }
    let rows = &table.rows[table.rows.len() - d..];
    for pair in rows.windows(2) {
        if ((pair[1][0] - pair[0][0]) - meta.sample_dt).abs() > 1e-6 {
            return Err(Error::data(format!(
                "{}: rows must be spaced {} s apart",
                window_csv.display(),
                meta.sample_dt
            )));
        }
    }
    let raw: Vec<[f64; N_RAW_CHANNELS]> = rows.iter().map(|r| [r[1], r[2], r[3], r[4]]).collect();
    let x = normalize_window(&raw, &meta.scaler, meta.scenario);
    let window = Array::from_vec(&[d, meta.scenario.channels()], x)?;
    let pred = model.predict(&window)?;
    let t_last = rows[d - 1][0];
    Ok(pred
        .iter()
        .enumerate()
        .map(|(k, &y)| Forecast {
            step: k + 1,
            t: t_last + (k + 1) as f64 * meta.sample_dt,
            roll_pred_deg: meta.scaler.inverse(0, y),
        })
        .collect())
}
