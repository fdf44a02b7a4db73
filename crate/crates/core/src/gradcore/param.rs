use super::Array;

/// A named trainable tensor together with its accumulated gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Array,
    pub grad: Array,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Array) -> Self {
        let grad = Array::zeros(value.shape());
        Self {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Anything that owns an ordered list of parameters.
///
/// The order is part of the checkpoint contract and must be stable.
pub trait Parameterized {
    fn params(&self) -> Vec<&Parameter>;
    fn params_mut(&mut self) -> Vec<&mut Parameter>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn num_values(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }
}

impl Parameterized for Vec<Parameter> {
    fn params(&self) -> Vec<&Parameter> {
        self.iter().collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        self.iter_mut().collect()
    }
}
