use crate::gradcore::linalg::{gemm, MatMut, MatRef};
use crate::gradcore::{init_params, Array, InitScheme, Parameter, Parameterized, Rng};
use crate::{Error, Result};

/// Valid-mode 1-D convolution over time, written as cross-correlation:
/// `y[t, o] = b[o] + Σ_c Σ_a x[t + a, c] · w[o, c, a]`.
///
/// Input is `[d × in_channels]` or `[batch × d × in_channels]`; output length
/// is `d − kernel_size + 1`. No padding, stride 1, no activation.
#[derive(Clone, Debug)]
pub struct Conv1d {
    in_channels: usize,
    out_channels: usize,
    kernel_size: usize,
    /// `[out × in × kernel]`.
    pub kernel: Parameter,
    /// `[out]`.
    pub bias: Parameter,
    cache: Option<Array>,
}

impl Conv1d {
    pub fn new(
        prefix: &str,
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        if kernel_size == 0 || in_channels == 0 || out_channels == 0 {
            return Err(Error::config("conv1d sizes must be positive"));
        }
        let kernel = init_params(
            &[out_channels, in_channels, kernel_size],
            InitScheme::GlorotUniform,
            rng,
        );
        Ok(Self {
            in_channels,
            out_channels,
            kernel_size,
            kernel: Parameter::new(format!("{prefix}.kernel"), kernel),
            bias: Parameter::new(format!("{prefix}.bias"), Array::zeros(&[out_channels])),
            cache: None,
        })
    }

    pub fn from_parts(prefix: &str, kernel: Array, bias: Array) -> Result<Self> {
        let &[out, inp, k] = kernel.shape() else {
            return Err(Error::shape(format!(
                "conv kernel must be [out × in × kernel], got {:?}",
                kernel.shape()
            )));
        };
        bias.check_shape(&[out], "conv bias")?;
        if k == 0 {
            return Err(Error::config("kernel_size must be at least 1"));
        }
        Ok(Self {
            in_channels: inp,
            out_channels: out,
            kernel_size: k,
            kernel: Parameter::new(format!("{prefix}.kernel"), kernel),
            bias: Parameter::new(format!("{prefix}.bias"), bias),
            cache: None,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    /// Output length for an input of `d` steps, or `None` if `d < kernel_size`.
    pub fn output_len(&self, d: usize) -> Option<usize> {
        (d >= self.kernel_size).then(|| d - self.kernel_size + 1)
    }

    fn dims_of(&self, x: &Array) -> Result<(bool, usize, usize)> {
        let (batched, batch, steps, ch) = match x.shape() {
            [d, c] => (false, 1, *d, *c),
            [b, d, c] => (true, *b, *d, *c),
            other => {
                return Err(Error::shape(format!(
                    "conv1d input must be [d × channels] or [batch × d × channels], got {other:?}"
                )))
            }
        };
        if ch != self.in_channels {
            return Err(Error::shape(format!(
                "conv1d input has {ch} channels, layer expects {}",
                self.in_channels
            )));
        }
        if steps < self.kernel_size {
            return Err(Error::shape(format!(
                "conv1d input length {steps} is shorter than kernel size {}",
                self.kernel_size
            )));
        }
        Ok((batched, batch, steps))
    }

    /// Kernel rearranged as `[out × (kernel·in)]` with column `a·in + c`, the
    /// order of a contiguous input patch.
    fn patch_weights(&self) -> Vec<f64> {
        let (o_n, c_n, k_n) = (self.out_channels, self.in_channels, self.kernel_size);
        let w = self.kernel.value.data();
        let mut out = vec![0.0; o_n * k_n * c_n];
        for o in 0..o_n {
            for c in 0..c_n {
                for a in 0..k_n {
                    out[o * k_n * c_n + a * c_n + c] = w[(o * c_n + c) * k_n + a];
                }
            }
        }
        out
    }

    pub fn apply(&self, x: &Array) -> Result<Array> {
        let (batched, batch, steps) = self.dims_of(x)?;
        let (o_n, c_n, k_n) = (self.out_channels, self.in_channels, self.kernel_size);
        let out_len = steps - k_n + 1;
        let wmat = self.patch_weights();
        let mut y = vec![0.0; batch * out_len * o_n];
        for row in y.chunks_exact_mut(o_n) {
            row.copy_from_slice(self.bias.value.data());
        }
        let in_stride = steps * c_n;
        for b in 0..batch {
            let xb = &x.data()[b * in_stride..(b + 1) * in_stride];
            let yb = &mut y[b * out_len * o_n..(b + 1) * out_len * o_n];
            gemm(
                1.0,
                MatRef::strided(xb, out_len, k_n * c_n, c_n, 1),
                MatRef::row_major(&wmat, o_n, k_n * c_n).t(),
                1.0,
                MatMut::row_major(yb, out_len, o_n),
            );
        }
        let shape: Vec<usize> = if batched {
            vec![batch, out_len, o_n]
        } else {
            vec![out_len, o_n]
        };
        Array::from_vec(&shape, y)
    }

    pub fn forward(&mut self, x: &Array) -> Result<Array> {
        let y = self.apply(x)?;
        self.cache = Some(x.clone());
        Ok(y)
    }

    /// Accumulates kernel and bias gradients and returns the input gradient.
    pub fn backward(&mut self, dy: &Array) -> Result<Array> {
        let x = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("conv1d backward called before forward".into()))?;
        let (batched, batch, steps) = self.dims_of(x)?;
        let (o_n, c_n, k_n) = (self.out_channels, self.in_channels, self.kernel_size);
        let out_len = steps - k_n + 1;
        let expected: Vec<usize> = if batched {
            vec![batch, out_len, o_n]
        } else {
            vec![out_len, o_n]
        };
        dy.check_shape(&expected, "conv1d upstream gradient")?;

        let wmat = self.patch_weights();
        let mut dwmat = vec![0.0; o_n * k_n * c_n];
        let mut dx = Array::zeros(x.shape());
        let in_stride = steps * c_n;
        let out_stride = out_len * o_n;
        for b in 0..batch {
            let xb = &x.data()[b * in_stride..(b + 1) * in_stride];
            let dyb = MatRef::row_major(&dy.data()[b * out_stride..(b + 1) * out_stride], out_len, o_n);
            gemm(
                1.0,
                dyb.t(),
                MatRef::strided(xb, out_len, k_n * c_n, c_n, 1),
                1.0,
                MatMut::row_major(&mut dwmat, o_n, k_n * c_n),
            );
            let dxb = &mut dx.data_mut()[b * in_stride..(b + 1) * in_stride];
            for a in 0..k_n {
                gemm(
                    1.0,
                    dyb,
                    MatRef::strided(&wmat[a * c_n..], o_n, c_n, k_n * c_n, 1),
                    1.0,
                    MatMut::row_major(&mut dxb[a * c_n..], out_len, c_n),
                );
            }
        }
        let dk = self.kernel.grad.data_mut();
        for o in 0..o_n {
            for c in 0..c_n {
                for a in 0..k_n {
                    dk[(o * c_n + c) * k_n + a] += dwmat[o * k_n * c_n + a * c_n + c];
                }
            }
        }
        let db = self.bias.grad.data_mut();
        for row in dy.data().chunks_exact(o_n) {
            for (acc, v) in db.iter_mut().zip(row) {
                *acc += v;
            }
        }
        Ok(dx)
    }
}

impl Parameterized for Conv1d {
    fn params(&self) -> Vec<&Parameter> {
        vec![&self.kernel, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.kernel, &mut self.bias]
    }
}
