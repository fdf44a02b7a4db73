//! Experiment configuration: one TOML (or JSON) file carrying every default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rollcast_core::datapipe::FeatureScenario;
use rollcast_core::models::{LayerSizes, LstmHeadMode, ModelKind, ModelSpec};
use rollcast_core::rollsurrogate::{RollParams, SimulationSetup, DEFAULT_SHIP_SPEED, DEFAULT_WAVE_SEED};
use rollcast_core::seastate::{Probe, SeaKinematics, SpectrumParams};
use rollcast_core::trainer::TrainConfig;
use rollcast_core::{Error, Result};

/// The configuration shipped with the tool.
pub const DEFAULT_CONFIG_TOML: &str = include_str!("../configs/default.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumBlock {
    pub significant_wave_height: f64,
    pub peak_period: f64,
    pub n_components: usize,
    /// Defaults to a quarter of the peak frequency.
    pub omega_min: Option<f64>,
    /// Defaults to four times the peak frequency.
    pub omega_max: Option<f64>,
    pub gravity: f64,
}

impl Default for SpectrumBlock {
    fn default() -> Self {
        let p = SpectrumParams::sea_state_7();
        Self {
            significant_wave_height: p.significant_wave_height,
            peak_period: p.peak_period,
            n_components: p.n_components,
            omega_min: None,
            omega_max: None,
            gravity: p.gravity,
        }
    }
}

impl SpectrumBlock {
    pub fn params(&self) -> SpectrumParams {
        let mut p = SpectrumParams::with_default_band(
            self.significant_wave_height,
            self.peak_period,
            self.n_components,
        );
        p.gravity = self.gravity;
        if let Some(lo) = self.omega_min {
            p.omega_min = lo;
        }
        if let Some(hi) = self.omega_max {
            p.omega_max = hi;
        }
        p
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationBlock {
    pub headings: Vec<f64>,
    pub ship_speed: f64,
    pub probes: Vec<[f64; 2]>,
    pub duration: f64,
    pub sim_dt: f64,
    pub output_dt: f64,
    pub wave_seed: u64,
}

impl Default for SimulationBlock {
    fn default() -> Self {
        Self {
            headings: vec![150.0, 120.0, 90.0],
            ship_speed: DEFAULT_SHIP_SPEED,
            probes: Probe::bow_defaults().iter().map(|p| [p.x, p.y]).collect(),
            duration: 80.0,
            sim_dt: 0.005,
            output_dt: 0.1,
            wave_seed: DEFAULT_WAVE_SEED,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineBlock {
    pub lag: usize,
    pub horizon: usize,
    pub scenario: FeatureScenario,
    pub train_ratio: f64,
    /// Records are decimated to this spacing before windowing.
    pub sample_dt: f64,
}

impl Default for PipelineBlock {
    fn default() -> Self {
        Self {
            lag: 10,
            horizon: 10,
            scenario: FeatureScenario::RollAndWave,
            train_ratio: 0.8,
            sample_dt: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelBlock {
    pub kind: ModelKind,
    pub lstm_head_mode: LstmHeadMode,
    /// Per-kind layer sizes; missing entries use the standard widths.
    pub convlstmp: LayerSizes,
    pub lstm_only: LayerSizes,
    pub cnn_only: LayerSizes,
}

impl Default for ModelBlock {
    fn default() -> Self {
        Self {
            kind: ModelKind::Convlstmp,
            lstm_head_mode: LstmHeadMode::Full,
            convlstmp: LayerSizes::for_kind(ModelKind::Convlstmp),
            lstm_only: LayerSizes::for_kind(ModelKind::LstmOnly),
            cnn_only: LayerSizes::for_kind(ModelKind::CnnOnly),
        }
    }
}

impl ModelBlock {
    pub fn sizes(&self, kind: ModelKind) -> LayerSizes {
        match kind {
            ModelKind::Convlstmp => self.convlstmp.clone(),
            ModelKind::LstmOnly => self.lstm_only.clone(),
            ModelKind::CnnOnly => self.cnn_only.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationBlock {
    pub datasets: Vec<String>,
    pub scenarios: Vec<FeatureScenario>,
    pub horizons: Vec<usize>,
    pub model: ModelKind,
}

impl Default for AblationBlock {
    fn default() -> Self {
        Self {
            datasets: vec!["dataset#1".into(), "dataset#2".into(), "dataset#3".into()],
            scenarios: FeatureScenario::ALL.to_vec(),
            horizons: vec![10, 20],
            model: ModelKind::LstmOnly,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComparisonBlock {
    pub datasets: Vec<String>,
    pub models: Vec<ModelKind>,
    pub horizon: usize,
    pub scenario: FeatureScenario,
}

impl Default for ComparisonBlock {
    fn default() -> Self {
        Self {
            datasets: vec!["dataset#1".into(), "dataset#2".into()],
            models: ModelKind::ALL.to_vec(),
            horizon: 20,
            scenario: FeatureScenario::RollAndWave,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub spectrum: SpectrumBlock,
    pub roll: RollParams,
    pub simulation: SimulationBlock,
    pub pipeline: PipelineBlock,
    pub model: ModelBlock,
    pub train: TrainConfig,
    pub ablation: AblationBlock,
    pub comparison: ComparisonBlock,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("runs"),
            seeds: vec![1, 2, 3, 4, 5],
            spectrum: SpectrumBlock::default(),
            roll: RollParams::default(),
            simulation: SimulationBlock::default(),
            pipeline: PipelineBlock::default(),
            model: ModelBlock::default(),
            train: TrainConfig::default(),
            ablation: AblationBlock::default(),
            comparison: ComparisonBlock::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::config(format!("{origin}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::config(format!("{origin}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `.json` files as JSON and everything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        let origin = path.display().to_string();
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json(&text, &origin),
            _ => Self::from_toml(&text, &origin),
        }
    }

    pub fn shipped() -> Self {
        Self::from_toml(DEFAULT_CONFIG_TOML, "configs/default.toml")
            .expect("shipped config is valid")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.spectrum.params().validate()?;
        self.roll.validate()?;
        for &h in &self.simulation.headings {
            self.kinematics(h).validate()?;
        }
        if self.simulation.probes.len() != 3 {
            return Err(Error::config("simulation.probes must list exactly three [x, y] points"));
        }
        if self.pipeline.lag != self.pipeline.horizon {
            return Err(Error::config(format!(
                "pipeline.lag ({}) must equal pipeline.horizon ({})",
                self.pipeline.lag, self.pipeline.horizon
            )));
        }
        if !(self.pipeline.train_ratio > 0.0 && self.pipeline.train_ratio < 1.0) {
            return Err(Error::config("pipeline.train_ratio must lie in (0, 1)"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds must list at least one seed"));
        }
        self.train.validate()?;
        for &h in &self.ablation.horizons {
            self.model_spec(self.ablation.model, h, 1, 0).validate()?;
        }
        for &kind in &self.comparison.models {
            self.model_spec(kind, self.comparison.horizon, 1, 0).validate()?;
        }
        self.model_spec(self.model.kind, self.pipeline.horizon, 1, 0).validate()?;
        Ok(())
    }

    pub fn kinematics(&self, heading: f64) -> SeaKinematics {
        SeaKinematics {
            heading_angle: heading,
            ship_speed: self.simulation.ship_speed,
        }
    }

    pub fn simulation_setup(&self, heading: f64, seed: u64) -> SimulationSetup {
        let s = &self.simulation;
        SimulationSetup {
            spectrum: self.spectrum.params(),
            roll: self.roll.clone(),
            kinematics: self.kinematics(heading),
            probes: s.probes.iter().map(|&[x, y]| Probe::new(x, y)).collect(),
            duration: s.duration,
            sim_dt: s.sim_dt,
            output_dt: s.output_dt,
            seed,
        }
    }

    /// Model spec with `lag = horizon` as the pipeline requires.
    pub fn model_spec(&self, kind: ModelKind, horizon: usize, channels: usize, seed: u64) -> ModelSpec {
        ModelSpec {
            kind,
            lag: horizon,
            horizon,
            channels,
            sizes: self.model.sizes(kind),
            lstm_head_mode: self.model.lstm_head_mode,
            seed,
        }
    }

    pub fn data_dir(&self) -> PathBuf {
        self.output_dir.join("data")
    }

    pub fn record_path(&self, label: &str) -> PathBuf {
        self.data_dir().join(format!("{}.csv", file_stem(label)))
    }
}

/// Dataset label for a heading: 150°, 120° and 90° are datasets #1, #2, #3.
pub fn dataset_label(heading: f64) -> String {
    match heading {
        h if h == 150.0 => "dataset#1".into(),
        h if h == 120.0 => "dataset#2".into(),
        h if h == 90.0 => "dataset#3".into(),
        h => format!("heading{h}"),
    }
}

/// File-system friendly form of a label (`dataset#1` → `dataset1`).
pub fn file_stem(label: &str) -> String {
    label
        .chars()
        .filter(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_config_matches_defaults() {
        let cfg = ExperimentConfig::shipped();
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml(), "x").unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = ExperimentConfig::from_toml("[train]\nepoch = 3\n", "x").unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn lag_must_equal_horizon() {
        let err = ExperimentConfig::from_toml("[pipeline]\nlag = 10\nhorizon = 20\n", "x").unwrap_err();
        assert!(err.to_string().contains("must equal"), "{err}");
    }

    #[test]
    fn partial_file_keeps_other_defaults() {
        let cfg = ExperimentConfig::from_toml("seeds = [7]\n[train]\nepochs = 3\n", "x").unwrap();
        assert_eq!(cfg.seeds, vec![7]);
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.train.batch_size, 32);
        assert_eq!(cfg.spectrum.n_components, 240);
    }

    #[test]
    fn labels() {
        assert_eq!(dataset_label(150.0), "dataset#1");
        assert_eq!(dataset_label(90.0), "dataset#3");
        assert_eq!(dataset_label(0.0), "heading0");
        assert_eq!(file_stem("dataset#2"), "dataset2");
    }
}
