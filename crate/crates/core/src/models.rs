//! The three forecasters: the parallel LSTM/Conv1D fusion network and the two
//! single-branch baselines, all sharing a 100/50/p fully connected head.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::gradcore::{
    concat_batch, split_batch, Activation, ActivationLayer, Affine, Array, Parameter,
    Parameterized, Rng,
};
use crate::layers::{Conv1d, Lstm};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Convlstmp,
    LstmOnly,
    CnnOnly,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [Self::Convlstmp, Self::LstmOnly, Self::CnnOnly];

    pub fn name(self) -> &'static str {
        match self {
            Self::Convlstmp => "convlstmp",
            Self::LstmOnly => "lstm_only",
            Self::CnnOnly => "cnn_only",
        }
    }

    pub fn has_lstm(self) -> bool {
        self != Self::CnnOnly
    }

    pub fn has_conv(self) -> bool {
        self != Self::LstmOnly
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            Error::config(format!(
                "unknown model kind `{s}` (expected convlstmp, lstm_only or cnn_only)"
            ))
        })
    }
}

/// Which LSTM hidden states reach the head.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LstmHeadMode {
    #[default]
    Full,
    Last,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSizes {
    pub lstm_hidden: usize,
    pub conv_filters: [usize; 2],
    pub kernel_size: usize,
    pub head: [usize; 2],
}

impl LayerSizes {
    pub fn for_kind(kind: ModelKind) -> Self {
        let (lstm_hidden, conv_filters) = match kind {
            ModelKind::Convlstmp => (64, [32, 64]),
            ModelKind::LstmOnly => (100, [0, 0]),
            ModelKind::CnnOnly => (0, [64, 64]),
        };
        Self {
            lstm_hidden,
            conv_filters,
            kernel_size: 3,
            head: [100, 50],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub lag: usize,
    pub horizon: usize,
    pub channels: usize,
    pub sizes: LayerSizes,
    #[serde(default)]
    pub lstm_head_mode: LstmHeadMode,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, lag: usize, horizon: usize, channels: usize, seed: u64) -> Self {
        Self {
            kind,
            lag,
            horizon,
            channels,
            sizes: LayerSizes::for_kind(kind),
            lstm_head_mode: LstmHeadMode::Full,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lag != self.horizon {
            return Err(Error::config(format!(
                "lag ({}) must equal horizon ({})",
                self.lag, self.horizon
            )));
        }
        if self.lag == 0 || self.channels == 0 {
            return Err(Error::config("lag and channel count must be at least 1"));
        }
        let s = &self.sizes;
        if s.head.contains(&0) {
            return Err(Error::config("head widths must be positive"));
        }
        if self.kind.has_lstm() && s.lstm_hidden == 0 {
            return Err(Error::config("lstm_hidden must be positive"));
        }
        if self.kind.has_conv() {
            if s.kernel_size == 0 || s.conv_filters.contains(&0) {
                return Err(Error::config("conv filters and kernel size must be positive"));
            }
            let min_lag = 2 * (s.kernel_size - 1) + 1;
            if self.lag < min_lag {
                return Err(Error::config(format!(
                    "lag {} too short for two kernel-{} convolutions (need at least {min_lag})",
                    self.lag, s.kernel_size
                )));
            }
        }
        Ok(())
    }

    /// Output length of the second convolution.
    pub fn conv_len(&self) -> usize {
        self.lag + 2 - 2 * self.sizes.kernel_size
    }

    pub fn conv_width(&self) -> usize {
        if self.kind.has_conv() {
            self.conv_len() * self.sizes.conv_filters[1]
        } else {
            0
        }
    }

    pub fn lstm_width(&self) -> usize {
        match (self.kind.has_lstm(), self.lstm_head_mode) {
            (false, _) => 0,
            (true, LstmHeadMode::Full) => self.lag * self.sizes.lstm_hidden,
            (true, LstmHeadMode::Last) => self.sizes.lstm_hidden,
        }
    }

    /// Width of the flattened, concatenated branch features fed to the head.
    pub fn concat_width(&self) -> usize {
        self.conv_width() + self.lstm_width()
    }
}

/// Branch outputs for one batch: conv `[B × L × F]`, LSTM `[B × d × H]` (or
/// `[B × H]` in last-state mode).
#[derive(Clone, Debug, PartialEq)]
pub struct BranchFeatures {
    pub conv: Option<Array>,
    pub lstm: Option<Array>,
}

#[derive(Clone, Debug)]
struct ConvBranch {
    conv1: Conv1d,
    act1: ActivationLayer,
    conv2: Conv1d,
    act2: ActivationLayer,
}

#[derive(Clone, Debug)]
struct Head {
    fc1: Affine,
    act1: ActivationLayer,
    fc2: Affine,
    act2: ActivationLayer,
    fc3: Affine,
}

#[derive(Clone, Debug)]
struct ForwardCache {
    part_shapes: Vec<Vec<usize>>,
    batch: usize,
}

/// A model built from a [`ModelSpec`]. Inputs are normalized windows
/// `[B × d × C]`, outputs normalized roll `[B × p]`.
#[derive(Clone, Debug)]
pub struct Forecaster {
    spec: ModelSpec,
    lstm: Option<Lstm>,
    conv: Option<ConvBranch>,
    head: Head,
    cache: Option<ForwardCache>,
}

impl Forecaster {
    /// Glorot-uniform weights and zero biases drawn from `spec.seed`.
    pub fn build(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = Rng::seed_from_u64(spec.seed);
        let s = &spec.sizes;
        let lstm = spec
            .kind
            .has_lstm()
            .then(|| Lstm::new("lstm", spec.channels, s.lstm_hidden, &mut rng));
        let conv = if spec.kind.has_conv() {
            Some(ConvBranch {
                conv1: Conv1d::new("conv1", spec.channels, s.conv_filters[0], s.kernel_size, &mut rng)?,
                act1: ActivationLayer::new(Activation::Relu),
                conv2: Conv1d::new("conv2", s.conv_filters[0], s.conv_filters[1], s.kernel_size, &mut rng)?,
                act2: ActivationLayer::new(Activation::Relu),
            })
        } else {
            None
        };
        let head = Head {
            fc1: Affine::new("fc1", spec.concat_width(), s.head[0], &mut rng),
            act1: ActivationLayer::new(Activation::Relu),
            fc2: Affine::new("fc2", s.head[0], s.head[1], &mut rng),
            act2: ActivationLayer::new(Activation::Relu),
            fc3: Affine::new("fc3", s.head[1], spec.horizon, &mut rng),
        };
        Ok(Self {
            spec: spec.clone(),
            lstm,
            conv,
            head,
            cache: None,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    fn check_input(&self, x: &Array) -> Result<usize> {
        match x.shape() {
            [b, d, c] if *d == self.spec.lag && *c == self.spec.channels && *b > 0 => Ok(*b),
            other => Err(Error::shape(format!(
                "model expects windows [batch × {} × {}], got {other:?}",
                self.spec.lag, self.spec.channels
            ))),
        }
    }

    /// Runs both branches, caching state for [`Forecaster::backward`].
    pub fn branch_features(&mut self, x: &Array) -> Result<BranchFeatures> {
        self.check_input(x)?;
        let conv = match self.conv.as_mut() {
            Some(b) => {
                let a1 = b.act1.forward(&b.conv1.forward(x)?);
                Some(b.act2.forward(&b.conv2.forward(&a1)?))
            }
            None => None,
        };
        let lstm = match self.lstm.as_mut() {
            Some(l) => {
                let seq = l.forward(x)?;
                Some(match self.spec.lstm_head_mode {
                    LstmHeadMode::Full => seq,
                    LstmHeadMode::Last => last_step(&seq)?,
                })
            }
            None => None,
        };
        Ok(BranchFeatures { conv, lstm })
    }

    /// Fully connected head on concatenated features `[B × W]`.
    fn head_forward(&mut self, z: &Array) -> Result<Array> {
        let h = &mut self.head;
        let a1 = h.act1.forward(&h.fc1.forward(z)?);
        let a2 = h.act2.forward(&h.fc2.forward(&a1)?);
        h.fc3.forward(&a2)
    }

    /// `[B × d × C]` windows to `[B × p]` predictions.
    pub fn forward(&mut self, x: &Array) -> Result<Array> {
        let batch = self.check_input(x)?;
        let feats = self.branch_features(x)?;
        let parts: Vec<&Array> = [feats.conv.as_ref(), feats.lstm.as_ref()]
            .into_iter()
            .flatten()
            .collect();
        let z = concat_batch(&parts)?;
        let part_shapes = parts.iter().map(|p| p.shape().to_vec()).collect();
        let y = self.head_forward(&z)?;
        self.cache = Some(ForwardCache { part_shapes, batch });
        Ok(y)
    }

    /// Prediction for a single window `[d × C]`.
    pub fn predict(&mut self, window: &Array) -> Result<Vec<f64>> {
        let (d, c) = (self.spec.lag, self.spec.channels);
        if window.shape() != [d, c] {
            return Err(Error::shape(format!(
                "window must be [{d} × {c}], got {:?}",
                window.shape()
            )));
        }
        let x = window.clone().reshape(&[1, d, c])?;
        Ok(self.forward(&x)?.into_data())
    }

    fn head_backward(&mut self, dy: &Array) -> Result<Array> {
        let h = &mut self.head;
        let g = h.fc3.backward(dy)?;
        let g = h.fc2.backward(&h.act2.backward(&g)?)?;
        h.fc1.backward(&h.act1.backward(&g)?)
    }

    fn branches_backward(&mut self, dz: &Array, part_shapes: &[Vec<usize>]) -> Result<()> {
        let mut parts = split_batch(dz, part_shapes)?.into_iter();
        if let Some(b) = self.conv.as_mut() {
            let g = parts.next().expect("conv part present");
            let g = b.conv2.backward(&b.act2.backward(&g)?)?;
            b.conv1.backward(&b.act1.backward(&g)?)?;
        }
        if let Some(l) = self.lstm.as_mut() {
            let g = parts.next().expect("lstm part present");
            let g = match self.spec.lstm_head_mode {
                LstmHeadMode::Full => g,
                LstmHeadMode::Last => {
                    let (batch, hsz) = (g.dim(0), g.dim(1));
                    let d = self.spec.lag;
                    let mut full = Array::zeros(&[batch, d, hsz]);
                    for b in 0..batch {
                        full.data_mut()[(b * d + d - 1) * hsz..(b * d + d) * hsz]
                            .copy_from_slice(g.row(b));
                    }
                    full
                }
            };
            l.backward(&g)?;
        }
        Ok(())
    }

    /// Accumulates parameter gradients for upstream gradient `dy` `[B × p]`.
    pub fn backward(&mut self, dy: &Array) -> Result<()> {
        let cache = self
            .cache
            .clone()
            .ok_or_else(|| Error::State("model backward called before forward".into()))?;
        dy.check_shape(&[cache.batch, self.spec.horizon], "prediction gradient")?;
        let dz = self.head_backward(dy)?;
        self.branches_backward(&dz, &cache.part_shapes)
    }
}

fn last_step(seq: &Array) -> Result<Array> {
    let (batch, d, hsz) = (seq.dim(0), seq.dim(1), seq.dim(2));
    let data = (0..batch)
        .flat_map(|b| seq.data()[(b * d + d - 1) * hsz..(b * d + d) * hsz].iter().copied())
        .collect();
    Array::from_vec(&[batch, hsz], data)
}

impl Parameterized for Forecaster {
    fn params(&self) -> Vec<&Parameter> {
        let mut out = Vec::new();
        if let Some(l) = &self.lstm {
            out.extend(l.params());
        }
        if let Some(b) = &self.conv {
            out.extend(b.conv1.params());
            out.extend(b.conv2.params());
        }
        out.extend(self.head.fc1.params());
        out.extend(self.head.fc2.params());
        out.extend(self.head.fc3.params());
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = Vec::new();
        if let Some(l) = &mut self.lstm {
            out.extend(l.params_mut());
        }
        if let Some(b) = &mut self.conv {
            out.extend(b.conv1.params_mut());
            out.extend(b.conv2.params_mut());
        }
        out.extend(self.head.fc1.params_mut());
        out.extend(self.head.fc2.params_mut());
        out.extend(self.head.fc3.params_mut());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcore::{concat_flatten, finite_diff_grad, max_relative_error};

    fn random_input(rng: &mut Rng, shape: &[usize]) -> Array {
        let n = shape.iter().product();
        Array::from_vec(shape, (0..n).map(|_| rng.uniform_in(0.0, 1.0)).collect()).unwrap()
    }

    fn tiny_spec(kind: ModelKind) -> ModelSpec {
        ModelSpec {
            kind,
            lag: 5,
            horizon: 5,
            channels: 2,
            sizes: LayerSizes {
                lstm_hidden: 4,
                conv_filters: [3, 4],
                kernel_size: 3,
                head: [6, 5],
            },
            lstm_head_mode: LstmHeadMode::Full,
            seed: 11,
        }
    }

    /// Biases are zero at construction; give them values so their gradients
    /// are exercised away from the ReLU kinks' trivial regime.
    fn randomize_biases(m: &mut Forecaster, rng: &mut Rng) {
        for p in m.params_mut() {
            if p.name.contains(".b") {
                let n = p.value.len();
                p.value = Array::from_vec(p.value.shape(), (0..n).map(|_| rng.uniform_in(-0.3, 0.3)).collect())
                    .unwrap();
            }
        }
    }

    #[test]
    fn concat_widths() {
        assert_eq!(ModelSpec::new(ModelKind::Convlstmp, 10, 10, 4, 0).concat_width(), 1024);
        assert_eq!(ModelSpec::new(ModelKind::Convlstmp, 20, 20, 4, 0).concat_width(), 2304);
        assert_eq!(ModelSpec::new(ModelKind::LstmOnly, 10, 10, 1, 0).concat_width(), 1000);
        assert_eq!(ModelSpec::new(ModelKind::CnnOnly, 20, 20, 3, 0).concat_width(), 1024);
        let mut last = ModelSpec::new(ModelKind::LstmOnly, 10, 10, 1, 0);
        last.lstm_head_mode = LstmHeadMode::Last;
        assert_eq!(last.concat_width(), 100);
    }

    #[test]
    fn invalid_specs_rejected() {
        let bad = [
            ModelSpec::new(ModelKind::Convlstmp, 10, 20, 4, 0),
            ModelSpec::new(ModelKind::CnnOnly, 4, 4, 4, 0),
            ModelSpec::new(ModelKind::LstmOnly, 10, 10, 0, 0),
        ];
        for spec in bad {
            assert!(matches!(Forecaster::build(&spec), Err(Error::Config(_))), "{spec:?}");
        }
        assert!(Forecaster::build(&ModelSpec::new(ModelKind::LstmOnly, 3, 3, 1, 0)).is_ok());
    }

    #[test]
    fn parameter_names_and_seeding() {
        let spec = ModelSpec::new(ModelKind::Convlstmp, 10, 10, 4, 5);
        let a = Forecaster::build(&spec).unwrap();
        let b = Forecaster::build(&spec).unwrap();
        let names: Vec<&str> = a.params().iter().map(|p| p.name.as_str()).collect();
        assert!(names.contains(&"lstm.w_fh") && names.contains(&"conv2.kernel") && names.contains(&"fc3.bias"));
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len());
        for (p, q) in a.params().iter().zip(b.params()) {
            assert_eq!(p.value, q.value);
        }
        let c = Forecaster::build(&ModelSpec { seed: 6, ..spec }).unwrap();
        assert_ne!(a.params()[0].value, c.params()[0].value);
    }

    #[test]
    fn zero_output_layer_predicts_zero() {
        let mut m = Forecaster::build(&ModelSpec::new(ModelKind::Convlstmp, 10, 10, 4, 1)).unwrap();
        m.head.fc3.weight.value.fill(0.0);
        let mut rng = Rng::seed_from_u64(2);
        let y = m.forward(&random_input(&mut rng, &[3, 10, 4])).unwrap();
        assert_eq!(y.shape(), &[3, 10]);
        assert_eq!(y.max_abs(), 0.0);
    }

    #[test]
    fn forward_is_deterministic_and_shape_checked() {
        let mut m = Forecaster::build(&ModelSpec::new(ModelKind::CnnOnly, 10, 10, 3, 1)).unwrap();
        let mut rng = Rng::seed_from_u64(3);
        let w = random_input(&mut rng, &[10, 3]);
        assert_eq!(m.predict(&w).unwrap(), m.predict(&w).unwrap());
        assert_eq!(m.predict(&w).unwrap().len(), 10);
        assert!(matches!(m.predict(&random_input(&mut rng, &[10, 4])), Err(Error::Shape(_))));
    }

    #[test]
    fn matches_hand_composed_pipeline() {
        let spec = ModelSpec::new(ModelKind::Convlstmp, 10, 10, 4, 9);
        let mut m = Forecaster::build(&spec).unwrap();
        let mut rng = Rng::seed_from_u64(4);
        randomize_biases(&mut m, &mut rng);
        let w = random_input(&mut rng, &[10, 4]);

        let mut lstm = m.lstm.clone().unwrap();
        let l_t = lstm.forward(&w).unwrap();
        let b = m.conv.as_ref().unwrap();
        let c1 = Activation::Relu.apply(&b.conv1.apply(&w).unwrap());
        let c_t = Activation::Relu.apply(&b.conv2.apply(&c1).unwrap());
        let z = concat_flatten(&[&c_t, &l_t]).unwrap();
        assert_eq!(z.len(), 1024);
        let h = &m.head;
        let a1 = Activation::Relu.apply(&h.fc1.apply(&z).unwrap());
        let a2 = Activation::Relu.apply(&h.fc2.apply(&a1).unwrap());
        let expected = h.fc3.apply(&a2).unwrap();

        let got = m.predict(&w).unwrap();
        assert!(max_relative_error(&got, expected.data()) < 1e-12);
    }

    #[test]
    fn backward_before_forward_is_state_error() {
        let mut m = Forecaster::build(&tiny_spec(ModelKind::Convlstmp)).unwrap();
        assert!(matches!(m.backward(&Array::zeros(&[1, 5])), Err(Error::State(_))));
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut m = Forecaster::build(&tiny_spec(ModelKind::Convlstmp)).unwrap();
        let mut rng = Rng::seed_from_u64(5);
        m.forward(&random_input(&mut rng, &[2, 5, 2])).unwrap();
        m.backward(&Array::zeros(&[2, 5])).unwrap();
        assert!(m.params().iter().all(|p| p.grad.max_abs() == 0.0));
    }

    fn check_gradients(kind: ModelKind, mode: LstmHeadMode) {
        let mut spec = tiny_spec(kind);
        spec.lstm_head_mode = mode;
        let mut m = Forecaster::build(&spec).unwrap();
        let mut rng = Rng::seed_from_u64(6);
        randomize_biases(&mut m, &mut rng);
        let x = random_input(&mut rng, &[2, 5, 2]);
        let probe = Array::from_vec(&[2, 5], (0..10).map(|_| rng.uniform_in(-1.0, 1.0)).collect()).unwrap();

        m.zero_grad();
        m.forward(&x).unwrap();
        m.backward(&probe).unwrap();
        let analytic: Vec<Array> = m.params().iter().map(|p| p.grad.clone()).collect();
        let numeric = finite_diff_grad(&mut m, |m| m.forward(&x).unwrap().dot(&probe).unwrap(), 1e-5);
        for ((a, n), p) in analytic.iter().zip(&numeric).zip(m.params()) {
            let err = max_relative_error(a.data(), n.data());
            assert!(err < 1e-4, "{kind} {}: relative error {err}", p.name);
        }
    }

    #[test]
    fn convlstmp_gradients_match_finite_differences() {
        check_gradients(ModelKind::Convlstmp, LstmHeadMode::Full);
    }

    #[test]
    fn baseline_gradients_match_finite_differences() {
        check_gradients(ModelKind::LstmOnly, LstmHeadMode::Full);
        check_gradients(ModelKind::LstmOnly, LstmHeadMode::Last);
        check_gradients(ModelKind::CnnOnly, LstmHeadMode::Full);
    }

    fn lstm_grads(m: &Forecaster) -> Vec<Array> {
        m.lstm.as_ref().unwrap().params().iter().map(|p| p.grad.clone()).collect()
    }

    #[test]
    fn masking_conv_gradient_leaves_lstm_grads() {
        let mut m = Forecaster::build(&tiny_spec(ModelKind::Convlstmp)).unwrap();
        let mut rng = Rng::seed_from_u64(7);
        let x = random_input(&mut rng, &[3, 5, 2]);
        let dy = random_input(&mut rng, &[3, 5]);
        m.forward(&x).unwrap();
        let shapes = m.cache.clone().unwrap().part_shapes;
        let dz = m.head_backward(&dy).unwrap();

        m.zero_grad();
        m.branches_backward(&dz, &shapes).unwrap();
        let full = lstm_grads(&m);

        let conv_w = m.spec.conv_width();
        let mut masked = dz.clone();
        for b in 0..3 {
            masked.row_mut(b)[..conv_w].fill(0.0);
        }
        m.zero_grad();
        m.branches_backward(&masked, &shapes).unwrap();
        assert_eq!(lstm_grads(&m), full);
        let conv = m.conv.as_ref().unwrap();
        assert_eq!(conv.conv1.kernel.grad.max_abs(), 0.0);
    }

    #[test]
    fn branches_share_no_weights() {
        let mut m = Forecaster::build(&ModelSpec::new(ModelKind::Convlstmp, 10, 10, 4, 8)).unwrap();
        let mut rng = Rng::seed_from_u64(8);
        let x = random_input(&mut rng, &[2, 10, 4]);
        let base = m.branch_features(&x).unwrap();

        let mut conv_bumped = m.clone();
        conv_bumped.conv.as_mut().unwrap().conv1.kernel.value.data_mut()[0] += 0.5;
        let f = conv_bumped.branch_features(&x).unwrap();
        assert_eq!(f.lstm, base.lstm);
        assert_ne!(f.conv, base.conv);

        let mut lstm_bumped = m.clone();
        lstm_bumped.lstm.as_mut().unwrap().w_x_mut(0).data_mut()[0] += 0.5;
        let f = lstm_bumped.branch_features(&x).unwrap();
        assert_eq!(f.conv, base.conv);
        assert_ne!(f.lstm, base.lstm);
    }

    #[test]
    fn all_hidden_states_reach_the_head() {
        let spec = ModelSpec::new(ModelKind::Convlstmp, 10, 10, 4, 10);
        let mut m = Forecaster::build(&spec).unwrap();
        let mut rng = Rng::seed_from_u64(9);
        randomize_biases(&mut m, &mut rng);
        let x = random_input(&mut rng, &[1, 10, 4]);
        let full = m.forward(&x).unwrap();

        let f = m.branch_features(&x).unwrap();
        let mut l = f.lstm.unwrap();
        let hsz = spec.sizes.lstm_hidden;
        l.data_mut()[..9 * hsz].fill(0.0);
        let z = concat_batch(&[f.conv.as_ref().unwrap(), &l]).unwrap();
        let truncated = m.head_forward(&z).unwrap();
        assert!(max_relative_error(full.data(), truncated.data()) > 1e-6);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert!(matches!("transformer".parse::<ModelKind>(), Err(Error::Config(_))));
    }
}
