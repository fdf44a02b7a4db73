//! Sliding-window supervised datasets built from motion records.
//!
//! Channel order everywhere is `[roll, wave1, wave2, wave3]`, filtered by the
//! feature scenario. Targets are always future roll.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::gradcore::Array;
use crate::rollsurrogate::MotionRecord;
use crate::textio::{read_bytes, read_json, write_bytes, write_json};
use crate::{Error, Result};

pub const N_RAW_CHANNELS: usize = 4;
pub const RAW_CHANNEL_NAMES: [&str; N_RAW_CHANNELS] = ["roll", "wave1", "wave2", "wave3"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureScenario {
    RollOnly,
    WaveOnly,
    RollAndWave,
}

impl FeatureScenario {
    pub const ALL: [FeatureScenario; 3] = [Self::RollOnly, Self::WaveOnly, Self::RollAndWave];

    /// Indices into the raw `[roll, wave1, wave2, wave3]` channels.
    pub fn channel_indices(self) -> &'static [usize] {
        match self {
            Self::RollOnly => &[0],
            Self::WaveOnly => &[1, 2, 3],
            Self::RollAndWave => &[0, 1, 2, 3],
        }
    }

    pub fn channels(self) -> usize {
        self.channel_indices().len()
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::RollOnly => "roll_only",
            Self::WaveOnly => "wave_only",
            Self::RollAndWave => "roll_and_wave",
        }
    }
}

impl fmt::Display for FeatureScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureScenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown feature scenario `{s}` (expected roll_only, wave_only or roll_and_wave)"
                ))
            })
    }
}

/// Per-channel affine map onto (0, 1) using training-span extremes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    /// Fits one channel per slice.
    pub fn fit(channels: &[&[f64]]) -> Result<Self> {
        let mut min = Vec::with_capacity(channels.len());
        let mut max = Vec::with_capacity(channels.len());
        for (c, values) in channels.iter().enumerate() {
            if values.is_empty() {
                return Err(Error::data(format!("channel {c} has no samples to fit")));
            }
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(hi > lo) {
                return Err(Error::data(format!(
                    "channel {c} is degenerate (min = max = {lo}); cannot normalize"
                )));
            }
            min.push(lo);
            max.push(hi);
        }
        Ok(Self { min, max })
    }

    pub fn channels(&self) -> usize {
        self.min.len()
    }

    pub fn transform(&self, channel: usize, x: f64) -> f64 {
        (x - self.min[channel]) / (self.max[channel] - self.min[channel])
    }

    pub fn inverse(&self, channel: usize, y: f64) -> f64 {
        y * (self.max[channel] - self.min[channel]) + self.min[channel]
    }

    pub fn transform_all(&self, channel: usize, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.transform(channel, x)).collect()
    }

    pub fn inverse_all(&self, channel: usize, ys: &[f64]) -> Vec<f64> {
        ys.iter().map(|&y| self.inverse(channel, y)).collect()
    }

    /// The single-channel scaler of `channel`.
    pub fn select(&self, channel: usize) -> MinMaxScaler {
        MinMaxScaler {
            min: vec![self.min[channel]],
            max: vec![self.max[channel]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.min.len() == self.max.len()
            && self.min.iter().zip(&self.max).all(|(lo, hi)| hi > lo && lo.is_finite() && hi.is_finite());
        if !ok {
            return Err(Error::data(format!("invalid scaler constants {self:?}")));
        }
        Ok(())
    }
}

/// Keeps every k-th sample where `target_dt = k · record.dt`.
pub fn resample(record: &MotionRecord, target_dt: f64) -> Result<MotionRecord> {
    let ratio = target_dt / record.dt;
    let k = ratio.round();
    if !(k >= 1.0) || (ratio - k).abs() > 1e-6 * ratio {
        return Err(Error::config(format!(
            "target dt {target_dt} is not an integer multiple of the record's {} s",
            record.dt
        )));
    }
    let k = k as usize;
    let pick = |v: &Vec<f64>| v.iter().step_by(k).copied().collect::<Vec<_>>();
    Ok(MotionRecord {
        t: pick(&record.t),
        roll: pick(&record.roll),
        wave: record.wave.iter().step_by(k).copied().collect(),
        dt: record.dt * k as f64,
        ..record.clone()
    })
}

/// Raw channels of a record, `[roll, wave1, wave2, wave3]`.
pub fn raw_channels(record: &MotionRecord) -> [Vec<f64>; N_RAW_CHANNELS] {
    [
        record.roll.clone(),
        record.wave.iter().map(|w| w[0]).collect(),
        record.wave.iter().map(|w| w[1]).collect(),
        record.wave.iter().map(|w| w[2]).collect(),
    ]
}

pub fn window_count(n_samples: usize, lag: usize, horizon: usize) -> usize {
    (n_samples + 1).saturating_sub(lag + horizon)
}

/// Number of training windows for a chronological split.
pub fn train_count(n_windows: usize, ratio: f64) -> usize {
    (n_windows as f64 * ratio).floor() as usize
}

/// Number of leading samples touched by the training windows, i.e. the scaler
/// fitting span.
pub fn train_span(n_samples: usize, lag: usize, horizon: usize, ratio: f64) -> usize {
    let n_train = train_count(window_count(n_samples, lag, horizon), ratio);
    if n_train == 0 {
        0
    } else {
        n_train - 1 + lag + horizon
    }
}

/// Fits the four-channel scaler on samples `[0, boundary)`.
pub fn fit_scaler(record: &MotionRecord, boundary: usize) -> Result<MinMaxScaler> {
    if boundary == 0 || boundary > record.len() {
        return Err(Error::domain(format!(
            "scaler boundary {boundary} outside 1..={}",
            record.len()
        )));
    }
    let ch = raw_channels(record);
    let slices: Vec<&[f64]> = ch.iter().map(|c| &c[..boundary]).collect();
    MinMaxScaler::fit(&slices)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowMeta {
    pub n_windows: usize,
    pub lag: usize,
    pub horizon: usize,
    pub channels: usize,
    pub scenario: FeatureScenario,
    pub train_ratio: f64,
    /// Four-channel scaler, `[roll, wave1, wave2, wave3]`.
    pub scaler: MinMaxScaler,
    /// Index of the first window in the source series.
    pub first_window: usize,
    pub label: String,
    pub source_checksum: String,
}

/// Normalized inputs `[n × d × C]` and roll targets `[n × p]`.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowedDataset {
    pub inputs: Array,
    pub targets: Array,
    pub meta: WindowMeta,
}

pub const INPUTS_FILE: &str = "inputs.bin";
pub const TARGETS_FILE: &str = "targets.bin";
pub const META_FILE: &str = "meta.json";

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.meta.n_windows
    }

    pub fn is_empty(&self) -> bool {
        self.meta.n_windows == 0
    }

    pub fn lag(&self) -> usize {
        self.meta.lag
    }

    pub fn horizon(&self) -> usize {
        self.meta.horizon
    }

    pub fn channels(&self) -> usize {
        self.meta.channels
    }

    pub fn roll_scaler(&self) -> MinMaxScaler {
        self.meta.scaler.select(0)
    }

    pub fn input(&self, j: usize) -> &[f64] {
        self.inputs.row(j)
    }

    pub fn target(&self, j: usize) -> &[f64] {
        self.targets.row(j)
    }

    /// Gathers windows into `[B × d × C]` inputs and `[B × p]` targets.
    pub fn batch(&self, indices: &[usize]) -> (Array, Array) {
        let (d, c, p) = (self.lag(), self.channels(), self.horizon());
        let mut x = Vec::with_capacity(indices.len() * d * c);
        let mut y = Vec::with_capacity(indices.len() * p);
        for &j in indices {
            x.extend_from_slice(self.input(j));
            y.extend_from_slice(self.target(j));
        }
        (
            Array::from_vec(&[indices.len(), d, c], x).expect("gathered window sizes"),
            Array::from_vec(&[indices.len(), p], y).expect("gathered target sizes"),
        )
    }

    /// Windows `range` as a dataset sharing this one's metadata.
    pub fn slice(&self, range: std::ops::Range<usize>) -> WindowedDataset {
        let (d, c, p) = (self.lag(), self.channels(), self.horizon());
        let n = range.len();
        let inputs = self.inputs.data()[range.start * d * c..range.end * d * c].to_vec();
        let targets = self.targets.data()[range.start * p..range.end * p].to_vec();
        WindowedDataset {
            inputs: Array::from_vec(&[n, d, c], inputs).expect("window slice"),
            targets: Array::from_vec(&[n, p], targets).expect("target slice"),
            meta: WindowMeta {
                n_windows: n,
                first_window: self.meta.first_window + range.start,
                ..self.meta.clone()
            },
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_bytes(&dir.join(INPUTS_FILE), &encode_f64(self.inputs.data()))?;
        write_bytes(&dir.join(TARGETS_FILE), &encode_f64(self.targets.data()))?;
        write_json(&dir.join(META_FILE), &self.meta)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta: WindowMeta = read_json(&dir.join(META_FILE))?;
        meta.scaler.validate()?;
        let inputs = decode_f64(&read_bytes(&dir.join(INPUTS_FILE))?, &dir.join(INPUTS_FILE))?;
        let targets = decode_f64(&read_bytes(&dir.join(TARGETS_FILE))?, &dir.join(TARGETS_FILE))?;
        let (n, d, c, p) = (meta.n_windows, meta.lag, meta.channels, meta.horizon);
        if inputs.len() != n * d * c || targets.len() != n * p {
            return Err(Error::data(format!(
                "{}: blob sizes ({}, {}) disagree with meta ({n} windows, d={d}, C={c}, p={p})",
                dir.display(),
                inputs.len(),
                targets.len()
            )));
        }
        Ok(Self {
            inputs: Array::from_vec(&[n, d, c], inputs)?,
            targets: Array::from_vec(&[n, p], targets)?,
            meta,
        })
    }
}

fn encode_f64(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn decode_f64(bytes: &[u8], origin: &Path) -> Result<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return Err(Error::data(format!(
            "{}: length {} is not a multiple of 8",
            origin.display(),
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
        .collect())
}

/// SHA-256 of the record's canonical CSV rendering.
pub fn record_checksum(record: &MotionRecord) -> String {
    Sha256::digest(record.to_csv().as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Normalizes one raw window `[d × 4]` (physical units, raw channel order)
/// into the scenario's model input.
pub fn normalize_window(raw: &[[f64; N_RAW_CHANNELS]], scaler: &MinMaxScaler, scenario: FeatureScenario) -> Vec<f64> {
    let idx = scenario.channel_indices();
    raw.iter()
        .flat_map(|row| idx.iter().map(move |&c| scaler.transform(c, row[c])))
        .collect()
}

/// Builds every stride-1 window. The scaler is fitted on the samples used by
/// the first `floor(n · train_ratio)` windows.
pub fn make_windows(
    record: &MotionRecord,
    lag: usize,
    horizon: usize,
    scenario: FeatureScenario,
    train_ratio: f64,
) -> Result<WindowedDataset> {
    check_window_args(record, lag, horizon, train_ratio)?;
    let boundary = train_span(record.len(), lag, horizon, train_ratio);
    if boundary == 0 {
        return Err(Error::domain(format!(
            "{} windows leave no training windows at ratio {train_ratio}",
            window_count(record.len(), lag, horizon)
        )));
    }
    let scaler = fit_scaler(record, boundary)?;
    make_windows_with(record, lag, horizon, scenario, train_ratio, scaler)
}

fn check_window_args(record: &MotionRecord, lag: usize, horizon: usize, train_ratio: f64) -> Result<()> {
    if lag == 0 || horizon == 0 {
        return Err(Error::config("lag and horizon must be at least 1"));
    }
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(Error::config(format!("train ratio must lie in (0, 1), got {train_ratio}")));
    }
    if record.len() < lag + horizon {
        return Err(Error::domain(format!(
            "series of {} samples is shorter than lag + horizon = {}",
            record.len(),
            lag + horizon
        )));
    }
    Ok(())
}

/// Like [`make_windows`] but normalizes with a given four-channel scaler,
/// e.g. one stored alongside a trained model.
pub fn make_windows_with(
    record: &MotionRecord,
    lag: usize,
    horizon: usize,
    scenario: FeatureScenario,
    train_ratio: f64,
    scaler: MinMaxScaler,
) -> Result<WindowedDataset> {
    check_window_args(record, lag, horizon, train_ratio)?;
    if scaler.channels() != N_RAW_CHANNELS {
        return Err(Error::data(format!(
            "scaler has {} channels, expected {N_RAW_CHANNELS}",
            scaler.channels()
        )));
    }
    let n = window_count(record.len(), lag, horizon);
    let raw = raw_channels(record);
    let idx = scenario.channel_indices();
    let norm: Vec<Vec<f64>> = (0..N_RAW_CHANNELS)
        .map(|c| scaler.transform_all(c, &raw[c]))
        .collect();

    let c_n = idx.len();
    let mut inputs = Vec::with_capacity(n * lag * c_n);
    let mut targets = Vec::with_capacity(n * horizon);
    for j in 0..n {
        for t in j..j + lag {
            inputs.extend(idx.iter().map(|&c| norm[c][t]));
        }
        targets.extend_from_slice(&norm[0][j + lag..j + lag + horizon]);
    }
    Ok(WindowedDataset {
        inputs: Array::from_vec(&[n, lag, c_n], inputs)?,
        targets: Array::from_vec(&[n, horizon], targets)?,
        meta: WindowMeta {
            n_windows: n,
            lag,
            horizon,
            channels: c_n,
            scenario,
            train_ratio,
            scaler,
            first_window: 0,
            label: record.label.clone(),
            source_checksum: record_checksum(record),
        },
    })
}

/// Chronological split: the first `floor(n · ratio)` windows train.
pub fn split(dataset: &WindowedDataset, ratio: f64) -> Result<(WindowedDataset, WindowedDataset)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::config(format!("split ratio must lie in (0, 1), got {ratio}")));
    }
    let n = dataset.len();
    let n_train = train_count(n, ratio);
    if n_train == 0 || n_train == n {
        return Err(Error::domain(format!(
            "splitting {n} windows at ratio {ratio} leaves an empty side"
        )));
    }
    Ok((dataset.slice(0..n_train), dataset.slice(n_train..n)))
}

/// `make_windows` followed by `split` at the same ratio.
pub fn prepare(
    record: &MotionRecord,
    lag: usize,
    horizon: usize,
    scenario: FeatureScenario,
    train_ratio: f64,
) -> Result<(WindowedDataset, WindowedDataset)> {
    split(&make_windows(record, lag, horizon, scenario, train_ratio)?, train_ratio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn synthetic(n: usize) -> MotionRecord {
        let t: Vec<f64> = (0..n).map(|k| k as f64 * 0.1).collect();
        MotionRecord {
            roll: t.iter().map(|&x| 10.0 * (1.3 * x).sin() + 0.1 * x).collect(),
            wave: t
                .iter()
                .map(|&x| [0.05 * (2.0 * x).cos(), 0.04 * (2.1 * x).sin(), 0.03 * (1.7 * x + 0.4).cos()])
                .collect(),
            t,
            dt: 0.1,
            heading: 90.0,
            seed: 0,
            label: "synthetic".into(),
            simulation: None,
        }
    }

    #[test]
    fn scenario_channel_counts() {
        assert_eq!(FeatureScenario::RollOnly.channels(), 1);
        assert_eq!(FeatureScenario::WaveOnly.channels(), 3);
        assert_eq!(FeatureScenario::RollAndWave.channels(), 4);
        assert_eq!("wave_only".parse::<FeatureScenario>().unwrap(), FeatureScenario::WaveOnly);
        assert!(matches!("both".parse::<FeatureScenario>(), Err(Error::Config(_))));
    }

    #[test]
    fn scaler_endpoints() {
        let s = MinMaxScaler::fit(&[&[2.0, 4.0, 6.0]]).unwrap();
        assert_eq!(s.transform_all(0, &[2.0, 4.0, 6.0]), vec![0.0, 0.5, 1.0]);
        assert!(s.transform(0, 8.0) > 1.0);
    }

    #[test]
    fn degenerate_channel_rejected() {
        assert!(matches!(MinMaxScaler::fit(&[&[3.0, 3.0]]), Err(Error::Data(_))));
    }

    #[test]
    fn resample_decimates() {
        let mut rec = synthetic(16001);
        rec.dt = 0.005;
        rec.t = (0..16001).map(|k| k as f64 * 0.005).collect();
        let out = resample(&rec, 0.1).unwrap();
        assert_eq!(out.len(), 801);
        assert_eq!(out.roll[1], rec.roll[20]);
        assert!((out.dt - 0.1).abs() < 1e-15);
        out.validate().unwrap();
        assert_eq!(resample(&rec, 0.005).unwrap(), rec);
        assert!(matches!(resample(&rec, 0.0123), Err(Error::Config(_))));
    }

    #[test]
    fn window_counts() {
        let ds = make_windows(&synthetic(10), 3, 2, FeatureScenario::RollOnly, 0.5).unwrap();
        assert_eq!(ds.len(), 6);
        assert_eq!(ds.inputs.shape(), &[6, 3, 1]);
        let ds = make_windows(&synthetic(801), 10, 10, FeatureScenario::RollAndWave, 0.8).unwrap();
        assert_eq!(ds.len(), 782);
        let (train, val) = split(&ds, 0.8).unwrap();
        assert_eq!((train.len(), val.len()), (625, 157));
        assert_eq!(val.meta.first_window, 625);
    }

    #[test]
    fn half_split_of_ten() {
        let ds = make_windows(&synthetic(11), 1, 1, FeatureScenario::RollOnly, 0.5).unwrap();
        let (a, b) = split(&ds, 0.5).unwrap();
        assert_eq!((a.len(), b.len()), (5, 5));
        let mut all = a.targets.data().to_vec();
        all.extend_from_slice(b.targets.data());
        assert_eq!(all, ds.targets.data());
    }

    #[test]
    fn short_series_rejected() {
        assert!(matches!(
            make_windows(&synthetic(4), 3, 2, FeatureScenario::RollOnly, 0.8),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn scaler_uses_training_span_only() {
        let mut rec = synthetic(801);
        // a late spike must not move the fitted maximum
        rec.roll[800] = 1e3;
        let ds = make_windows(&rec, 10, 10, FeatureScenario::RollOnly, 0.8).unwrap();
        assert!(ds.meta.scaler.max[0] < 100.0);
        assert_eq!(train_span(801, 10, 10, 0.8), 644);
    }

    #[test]
    fn channel_order_is_roll_then_waves() {
        let rec = synthetic(40);
        let ds = make_windows(&rec, 4, 4, FeatureScenario::RollAndWave, 0.8).unwrap();
        let s = &ds.meta.scaler;
        let row = ds.input(3);
        assert_eq!(row[0], s.transform(0, rec.roll[3]));
        assert_eq!(row[1], s.transform(1, rec.wave[3][0]));
        assert_eq!(row[3], s.transform(3, rec.wave[3][2]));
        let waves = make_windows(&rec, 4, 4, FeatureScenario::WaveOnly, 0.8).unwrap();
        assert_eq!(waves.input(3)[0], s.transform(1, rec.wave[3][0]));
    }

    #[test]
    fn persistence_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = make_windows(&synthetic(60), 5, 5, FeatureScenario::RollAndWave, 0.8).unwrap();
        ds.save(dir.path()).unwrap();
        assert_eq!(WindowedDataset::load(dir.path()).unwrap(), ds);
        assert_eq!(ds.meta.source_checksum.len(), 64);
    }

    #[test]
    fn batch_gathers_rows() {
        let ds = make_windows(&synthetic(30), 3, 3, FeatureScenario::RollAndWave, 0.8).unwrap();
        let (x, y) = ds.batch(&[4, 1]);
        assert_eq!(x.shape(), &[2, 3, 4]);
        assert_eq!(&x.data()[..12], ds.input(4));
        assert_eq!(&y.data()[3..], ds.target(1));
    }

    proptest! {
        #[test]
        fn window_count_law(n in 2usize..60, d in 1usize..12, p in 1usize..12) {
            prop_assume!(n >= d + p);
            let ds = make_windows(&synthetic(n + 2), d, p, FeatureScenario::RollOnly, 0.9);
            prop_assume!(ds.is_ok());
            prop_assert_eq!(ds.unwrap().len(), n + 2 - d - p + 1);
        }

        #[test]
        fn scaler_round_trip(values in proptest::collection::vec(-1e3f64..1e3, 2..50), probe in -2e3f64..2e3) {
            let s = MinMaxScaler::fit(&[&values]);
            prop_assume!(s.is_ok());
            let s = s.unwrap();
            let back = s.inverse(0, s.transform(0, probe));
            prop_assert!((back - probe).abs() <= 1e-12 * probe.abs().max(1.0));
        }

        #[test]
        fn window_reconstruction(d in 1usize..8, p in 1usize..8) {
            let rec = synthetic(50);
            let ds = make_windows(&rec, d, p, FeatureScenario::RollOnly, 0.8).unwrap();
            let s = ds.roll_scaler();
            for j in 0..ds.len() {
                let mut seq = vec![s.inverse(0, ds.input(j)[d - 1])];
                seq.extend(s.inverse_all(0, ds.target(j)));
                for (a, b) in seq.iter().zip(&rec.roll[j + d - 1..j + d + p]) {
                    prop_assert!((a - b).abs() < 1e-12 * b.abs().max(1.0));
                }
            }
        }
    }
}
