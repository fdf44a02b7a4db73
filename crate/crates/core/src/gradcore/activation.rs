use serde::{Deserialize, Serialize};

use super::Array;
use crate::{Error, Result};

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn tanh_act(x: f64) -> f64 {
    x.tanh()
}

pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => relu(x),
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => tanh_act(x),
        }
    }

    /// Derivative expressed through the activation's output `y`:
    /// σ' = y(1−y), tanh' = 1−y², relu' = 1{y>0}.
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
        }
    }

    pub fn apply(self, x: &Array) -> Array {
        match self {
            Activation::Identity => x.clone(),
            _ => x.map(|v| self.eval(v)),
        }
    }
}

/// Elementwise activation with a cached output for the backward pass.
#[derive(Clone, Debug)]
pub struct ActivationLayer {
    pub kind: Activation,
    output: Option<Array>,
}

impl ActivationLayer {
    pub fn new(kind: Activation) -> Self {
        Self { kind, output: None }
    }

    pub fn forward(&mut self, x: &Array) -> Array {
        let y = self.kind.apply(x);
        self.output = Some(y.clone());
        y
    }

    pub fn backward(&self, dy: &Array) -> Result<Array> {
        let y = self
            .output
            .as_ref()
            .ok_or_else(|| Error::State("activation backward called before forward".into()))?;
        dy.check_shape(y.shape(), "activation upstream gradient")?;
        let data = y
            .data()
            .iter()
            .zip(dy.data())
            .map(|(&y, &g)| g * self.kind.derivative_from_output(y))
            .collect();
        Array::from_vec(y.shape(), data)
    }
}
