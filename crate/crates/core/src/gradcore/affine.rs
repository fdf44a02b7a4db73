use super::linalg::{gemm, MatMut, MatRef};
use super::{init_params, Array, InitScheme, Parameter, Parameterized, Rng};
use crate::{Error, Result};

/// Fully connected layer `y = W·x + b`.
///
/// Accepts a single vector `[in]` or a batch `[batch × in]`; the output has
/// the matching rank.
#[derive(Clone, Debug)]
pub struct Affine {
    pub weight: Parameter,
    pub bias: Parameter,
    cache: Option<Array>,
}

impl Affine {
    pub fn new(prefix: &str, in_features: usize, out_features: usize, rng: &mut Rng) -> Self {
        let w = init_params(&[out_features, in_features], InitScheme::GlorotUniform, rng);
        Self::from_parts(prefix, w, Array::zeros(&[out_features]))
            .expect("constructed shapes conform")
    }

    pub fn from_parts(prefix: &str, weight: Array, bias: Array) -> Result<Self> {
        if weight.ndim() != 2 || bias.shape() != [weight.dim(0)] {
            return Err(Error::shape(format!(
                "affine weight {:?} and bias {:?} do not conform",
                weight.shape(),
                bias.shape()
            )));
        }
        Ok(Self {
            weight: Parameter::new(format!("{prefix}.weight"), weight),
            bias: Parameter::new(format!("{prefix}.bias"), bias),
            cache: None,
        })
    }

    pub fn in_features(&self) -> usize {
        self.weight.value.dim(1)
    }

    pub fn out_features(&self) -> usize {
        self.weight.value.dim(0)
    }

    fn batch_of(&self, x: &Array) -> Result<usize> {
        let n_in = self.in_features();
        match x.shape() {
            [n] if *n == n_in => Ok(1),
            [b, n] if *n == n_in => Ok(*b),
            other => Err(Error::shape(format!(
                "affine input {other:?} does not conform to weight {:?}",
                self.weight.value.shape()
            ))),
        }
    }

    /// Pure forward evaluation without caching.
    pub fn apply(&self, x: &Array) -> Result<Array> {
        let batch = self.batch_of(x)?;
        let (n_in, n_out) = (self.in_features(), self.out_features());
        let mut y = vec![0.0; batch * n_out];
        for row in y.chunks_exact_mut(n_out) {
            row.copy_from_slice(self.bias.value.data());
        }
        gemm(
            1.0,
            MatRef::row_major(x.data(), batch, n_in),
            MatRef::row_major(self.weight.value.data(), n_out, n_in).t(),
            1.0,
            MatMut::row_major(&mut y, batch, n_out),
        );
        let shape: Vec<usize> = if x.ndim() == 1 {
            vec![n_out]
        } else {
            vec![batch, n_out]
        };
        Array::from_vec(&shape, y)
    }

    pub fn forward(&mut self, x: &Array) -> Result<Array> {
        let y = self.apply(x)?;
        self.cache = Some(x.clone());
        Ok(y)
    }

    /// Accumulates `dW += dyᵀ·x`, `db += Σ dy` and returns `dx = dy·W`.
    pub fn backward(&mut self, dy: &Array) -> Result<Array> {
        let x = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("affine backward called before forward".into()))?;
        let (n_in, n_out) = (self.in_features(), self.out_features());
        let batch = if x.ndim() == 1 { 1 } else { x.dim(0) };
        if dy.len() != batch * n_out || dy.ndim() != x.ndim() {
            return Err(Error::shape(format!(
                "affine upstream gradient {:?} does not match output of input {:?}",
                dy.shape(),
                x.shape()
            )));
        }
        let dyv = MatRef::row_major(dy.data(), batch, n_out);
        gemm(
            1.0,
            dyv.t(),
            MatRef::row_major(x.data(), batch, n_in),
            1.0,
            MatMut::row_major(self.weight.grad.data_mut(), n_out, n_in),
        );
        let db = self.bias.grad.data_mut();
        for row in dy.data().chunks_exact(n_out) {
            for (g, v) in db.iter_mut().zip(row) {
                *g += v;
            }
        }
        let mut dx = Array::zeros(x.shape());
        gemm(
            1.0,
            dyv,
            MatRef::row_major(self.weight.value.data(), n_out, n_in),
            0.0,
            MatMut::row_major(dx.data_mut(), batch, n_in),
        );
        Ok(dx)
    }
}

impl Parameterized for Affine {
    fn params(&self) -> Vec<&Parameter> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcore::{finite_diff_grad, max_relative_error};

    fn layer(w: Vec<Vec<f64>>, b: Vec<f64>) -> Affine {
        Affine::from_parts("fc", Array::from_rows(&w).unwrap(), Array::vector(b)).unwrap()
    }

    #[test]
    fn identity_weight_passes_input_through() {
        let mut l = layer(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]);
        let y = l.forward(&Array::vector(vec![0.3, -2.0])).unwrap();
        assert_eq!(y.data(), &[0.3, -2.0]);
        let dx = l.backward(&Array::vector(vec![5.0, 7.0])).unwrap();
        assert_eq!(dx.data(), &[5.0, 7.0]);
    }

    #[test]
    fn hand_multiplied_case() {
        let l = layer(vec![vec![1.0, 2.0], vec![3.0, 4.0]], vec![0.0, 0.0]);
        let y = l.apply(&Array::vector(vec![1.0, 1.0])).unwrap();
        assert_eq!(y.data(), &[3.0, 7.0]);
    }

    #[test]
    fn zero_weight_yields_bias() {
        let l = layer(vec![vec![0.0; 3]; 2], vec![0.5, -1.5]);
        let y = l.apply(&Array::vector(vec![9.0, 8.0, 7.0])).unwrap();
        assert_eq!(y.data(), &[0.5, -1.5]);
    }

    #[test]
    fn shape_error_lists_both_shapes() {
        let l = layer(vec![vec![1.0, 2.0]], vec![0.0]);
        let err = l.apply(&Array::vector(vec![1.0, 2.0, 3.0])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[3]") && msg.contains("[1, 2]"), "{msg}");
    }

    #[test]
    fn backward_before_forward_is_state_error() {
        let mut l = layer(vec![vec![1.0]], vec![0.0]);
        assert!(matches!(
            l.backward(&Array::vector(vec![1.0])),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut rng = Rng::seed_from_u64(1);
        let mut l = Affine::new("fc", 3, 4, &mut rng);
        l.forward(&Array::vector(vec![1.0, -1.0, 0.5])).unwrap();
        let dx = l.backward(&Array::zeros(&[4])).unwrap();
        assert_eq!(dx.max_abs(), 0.0);
        assert_eq!(l.weight.grad.max_abs(), 0.0);
        assert_eq!(l.bias.grad.max_abs(), 0.0);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = Rng::seed_from_u64(42);
        let mut l = Affine::new("fc", 3, 4, &mut rng);
        l.bias.value = init_params(&[4], InitScheme::GlorotUniform, &mut rng);
        let x = Array::vector((0..3).map(|_| rng.uniform_in(-1.0, 1.0)).collect());
        let probe = Array::vector((0..4).map(|_| rng.uniform_in(-1.0, 1.0)).collect());

        let y = l.forward(&x).unwrap();
        let _ = y;
        l.zero_grad();
        let dx = l.backward(&probe).unwrap();

        let numeric = finite_diff_grad(&mut l, |m| m.apply(&x).unwrap().dot(&probe).unwrap(), 1e-5);
        assert!(max_relative_error(l.weight.grad.data(), numeric[0].data()) < 1e-6);
        assert!(max_relative_error(l.bias.grad.data(), numeric[1].data()) < 1e-6);

        // input gradient through a throwaway parameter wrapper
        let mut xs = vec![Parameter::new("x", x.clone())];
        let w = l.clone();
        let dx_num = finite_diff_grad(
            &mut xs,
            |p| w.apply(&p[0].value).unwrap().dot(&probe).unwrap(),
            1e-5,
        );
        assert!(max_relative_error(dx.data(), dx_num[0].data()) < 1e-6);
    }
}
