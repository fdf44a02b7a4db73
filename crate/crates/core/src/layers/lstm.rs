use crate::gradcore::linalg::{gemm, MatMut, MatRef};
use crate::gradcore::{init_params, sigmoid, Array, InitScheme, Parameter, Parameterized, Rng};
use crate::{Error, Result};

const GATES: [&str; 4] = ["f", "i", "o", "c"];

/// LSTM layer returning the whole hidden-state sequence.
///
/// Gates follow the textbook formulation with separate recurrent and input
/// matrices per gate:
///
/// ```text
/// f = σ(W_fh·h + W_fx·x + b_f)      i = σ(W_ih·h + W_ix·x + b_i)
/// o = σ(W_oh·h + W_ox·x + b_o)      c̃ = tanh(W_ch·h + W_cx·x + b_c)
/// c' = f ⊙ c + i ⊙ c̃               h' = o ⊙ tanh(c')
/// ```
///
/// Sequences are `[d × input]` or batched `[batch × d × input]`; the initial
/// state is zero.
#[derive(Clone, Debug)]
pub struct Lstm {
    input_size: usize,
    hidden_size: usize,
    /// Recurrent weights `[hidden × hidden]`, gate order f, i, o, c.
    w_h: [Parameter; 4],
    /// Input weights `[hidden × input]`.
    w_x: [Parameter; 4],
    /// Biases `[hidden]`.
    b: [Parameter; 4],
    cache: Option<LstmCache>,
}

#[derive(Clone, Debug)]
struct LstmCache {
    batched: bool,
    batch: usize,
    steps: usize,
    x: Array,
    /// Activated gates f, i, o, c̃, each `[batch × d × hidden]`.
    gates: [Vec<f64>; 4],
    /// Cell state c_t.
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    /// h_{t-1} stored at slot t (zeros at t = 0).
    h_prev: Vec<f64>,
}

impl Lstm {
    /// Glorot-uniform weights and zero biases.
    pub fn new(prefix: &str, input_size: usize, hidden_size: usize, rng: &mut Rng) -> Self {
        let w_h = GATES.map(|g| {
            Parameter::new(
                format!("{prefix}.w_{g}h"),
                init_params(&[hidden_size, hidden_size], InitScheme::GlorotUniform, rng),
            )
        });
        let w_x = GATES.map(|g| {
            Parameter::new(
                format!("{prefix}.w_{g}x"),
                init_params(&[hidden_size, input_size], InitScheme::GlorotUniform, rng),
            )
        });
        let b = GATES.map(|g| Parameter::new(format!("{prefix}.b_{g}"), Array::zeros(&[hidden_size])));
        Self {
            input_size,
            hidden_size,
            w_h,
            w_x,
            b,
            cache: None,
        }
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }

    /// Recurrent weight of gate `g` (0 = f, 1 = i, 2 = o, 3 = c).
    pub fn w_h_mut(&mut self, g: usize) -> &mut Array {
        &mut self.w_h[g].value
    }

    pub fn w_x_mut(&mut self, g: usize) -> &mut Array {
        &mut self.w_x[g].value
    }

    pub fn bias_mut(&mut self, g: usize) -> &mut Array {
        &mut self.b[g].value
    }

    /// One cell update for a single sample, evaluated directly from the gate
    /// equations.
    pub fn cell(&self, x: &Array, h_prev: &Array, c_prev: &Array) -> Result<(Array, Array)> {
        let hsz = self.hidden_size;
        x.check_shape(&[self.input_size], "lstm cell input")?;
        h_prev.check_shape(&[hsz], "lstm cell hidden state")?;
        c_prev.check_shape(&[hsz], "lstm cell cell state")?;
        let pre = |g: usize, j: usize| -> f64 {
            let wh = self.w_h[g].value.row(j);
            let wx = self.w_x[g].value.row(j);
            let rec: f64 = wh.iter().zip(h_prev.data()).map(|(w, h)| w * h).sum();
            let inp: f64 = wx.iter().zip(x.data()).map(|(w, v)| w * v).sum();
            rec + inp + self.b[g].value.data()[j]
        };
        let mut h = vec![0.0; hsz];
        let mut c = vec![0.0; hsz];
        for j in 0..hsz {
            let f = sigmoid(pre(0, j));
            let i = sigmoid(pre(1, j));
            let o = sigmoid(pre(2, j));
            let cand = pre(3, j).tanh();
            c[j] = f * c_prev.data()[j] + i * cand;
            h[j] = o * c[j].tanh();
        }
        Ok((Array::vector(h), Array::vector(c)))
    }

    fn dims_of(&self, x: &Array) -> Result<(bool, usize, usize)> {
        let (batched, batch, steps, width) = match x.shape() {
            [d, n] => (false, 1, *d, *n),
            [b, d, n] => (true, *b, *d, *n),
            other => {
                return Err(Error::shape(format!(
                    "lstm input must be [d × input] or [batch × d × input], got {other:?}"
                )))
            }
        };
        if width != self.input_size {
            return Err(Error::shape(format!(
                "lstm input width {width} does not match input_size {}",
                self.input_size
            )));
        }
        if steps == 0 {
            return Err(Error::domain("lstm sequence must contain at least one timestep"));
        }
        Ok((batched, batch, steps))
    }

    /// Runs the recurrence and returns every hidden state,
    /// `[d × hidden]` or `[batch × d × hidden]`.
    pub fn forward(&mut self, x: &Array) -> Result<Array> {
        let (batched, batch, steps) = self.dims_of(x)?;
        let (hsz, nin) = (self.hidden_size, self.input_size);
        let rows = batch * steps;
        let n = rows * hsz;
        let row_stride = steps * hsz;

        // input projections for every timestep at once
        let mut gates: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n]);
        for (g, pre) in gates.iter_mut().enumerate() {
            for row in pre.chunks_exact_mut(hsz) {
                row.copy_from_slice(self.b[g].value.data());
            }
            gemm(
                1.0,
                MatRef::row_major(x.data(), rows, nin),
                MatRef::row_major(self.w_x[g].value.data(), hsz, nin).t(),
                1.0,
                MatMut::row_major(pre, rows, hsz),
            );
        }

        let mut c = vec![0.0; n];
        let mut tanh_c = vec![0.0; n];
        let mut h = vec![0.0; n];
        let mut h_prev = vec![0.0; n];
        for t in 0..steps {
            let off = t * hsz;
            if t > 0 {
                for (g, pre) in gates.iter_mut().enumerate() {
                    gemm(
                        1.0,
                        MatRef::strided(&h_prev[off..], batch, hsz, row_stride, 1),
                        MatRef::row_major(self.w_h[g].value.data(), hsz, hsz).t(),
                        1.0,
                        MatMut::strided(&mut pre[off..], batch, hsz, row_stride),
                    );
                }
            }
            for b in 0..batch {
                let base = b * row_stride + off;
                for j in base..base + hsz {
                    let f = sigmoid(gates[0][j]);
                    let i = sigmoid(gates[1][j]);
                    let o = sigmoid(gates[2][j]);
                    let cand = gates[3][j].tanh();
                    gates[0][j] = f;
                    gates[1][j] = i;
                    gates[2][j] = o;
                    gates[3][j] = cand;
                    let c_prev = if t > 0 { c[j - hsz] } else { 0.0 };
                    let ct = f * c_prev + i * cand;
                    let tc = ct.tanh();
                    c[j] = ct;
                    tanh_c[j] = tc;
                    h[j] = o * tc;
                    if t + 1 < steps {
                        h_prev[j + hsz] = h[j];
                    }
                }
            }
        }

        let shape: Vec<usize> = if batched {
            vec![batch, steps, hsz]
        } else {
            vec![steps, hsz]
        };
        self.cache = Some(LstmCache {
            batched,
            batch,
            steps,
            x: x.clone(),
            gates,
            c,
            tanh_c,
            h_prev,
        });
        Array::from_vec(&shape, h)
    }

    /// Backpropagation through time. Accumulates parameter gradients and
    /// returns the gradient with respect to the input sequence.
    pub fn backward(&mut self, dh_seq: &Array) -> Result<Array> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("lstm backward called before forward".into()))?;
        let (hsz, nin) = (self.hidden_size, self.input_size);
        let (batch, steps) = (cache.batch, cache.steps);
        let expected: Vec<usize> = if cache.batched {
            vec![batch, steps, hsz]
        } else {
            vec![steps, hsz]
        };
        dh_seq.check_shape(&expected, "lstm upstream gradient")?;
        let rows = batch * steps;
        let n = rows * hsz;
        let row_stride = steps * hsz;
        let [gf, gi, go, gc] = &cache.gates;

        let mut dpre: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n]);
        let mut dh_next = vec![0.0; batch * hsz];
        let mut dc_next = vec![0.0; batch * hsz];
        let dh_up = dh_seq.data();
        for t in (0..steps).rev() {
            let off = t * hsz;
            for b in 0..batch {
                let base = b * row_stride + off;
                let carry = b * hsz;
                for k in 0..hsz {
                    let j = base + k;
                    let dh = dh_up[j] + dh_next[carry + k];
                    let tc = cache.tanh_c[j];
                    let d_o = dh * tc;
                    let dc = dh * go[j] * (1.0 - tc * tc) + dc_next[carry + k];
                    let c_prev = if t > 0 { cache.c[j - hsz] } else { 0.0 };
                    let d_f = dc * c_prev;
                    let d_i = dc * gc[j];
                    let d_cand = dc * gi[j];
                    dc_next[carry + k] = dc * gf[j];
                    dpre[0][j] = d_f * gf[j] * (1.0 - gf[j]);
                    dpre[1][j] = d_i * gi[j] * (1.0 - gi[j]);
                    dpre[2][j] = d_o * go[j] * (1.0 - go[j]);
                    dpre[3][j] = d_cand * (1.0 - gc[j] * gc[j]);
                }
            }
            if t > 0 {
                for (g, dp) in dpre.iter().enumerate() {
                    gemm(
                        1.0,
                        MatRef::strided(&dp[off..], batch, hsz, row_stride, 1),
                        MatRef::row_major(self.w_h[g].value.data(), hsz, hsz),
                        if g == 0 { 0.0 } else { 1.0 },
                        MatMut::row_major(&mut dh_next, batch, hsz),
                    );
                }
            }
        }

        let mut dx = Array::zeros(cache.x.shape());
        for (g, dp) in dpre.iter().enumerate() {
            let dpv = MatRef::row_major(dp, rows, hsz);
            gemm(
                1.0,
                dpv.t(),
                MatRef::row_major(&cache.h_prev, rows, hsz),
                1.0,
                MatMut::row_major(self.w_h[g].grad.data_mut(), hsz, hsz),
            );
            gemm(
                1.0,
                dpv.t(),
                MatRef::row_major(cache.x.data(), rows, nin),
                1.0,
                MatMut::row_major(self.w_x[g].grad.data_mut(), hsz, nin),
            );
            let db = self.b[g].grad.data_mut();
            for row in dp.chunks_exact(hsz) {
                for (acc, v) in db.iter_mut().zip(row) {
                    *acc += v;
                }
            }
            gemm(
                1.0,
                dpv,
                MatRef::row_major(self.w_x[g].value.data(), hsz, nin),
                1.0,
                MatMut::row_major(dx.data_mut(), rows, nin),
            );
        }
        Ok(dx)
    }
}

impl Parameterized for Lstm {
    fn params(&self) -> Vec<&Parameter> {
        let mut out = Vec::with_capacity(12);
        for g in 0..4 {
            out.push(&self.w_h[g]);
            out.push(&self.w_x[g]);
        }
        out.extend(self.b.iter());
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out: Vec<&mut Parameter> = Vec::with_capacity(12);
        for (wh, wx) in self.w_h.iter_mut().zip(self.w_x.iter_mut()) {
            out.push(wh);
            out.push(wx);
        }
        out.extend(self.b.iter_mut());
        out
    }
}
