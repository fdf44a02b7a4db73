use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Array, Rng};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    GlorotUniform,
    Zeros,
    Ones,
}

impl FromStr for InitScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "glorot_uniform" => Ok(InitScheme::GlorotUniform),
            "zeros" => Ok(InitScheme::Zeros),
            "ones" => Ok(InitScheme::Ones),
            other => Err(Error::config(format!(
                "unknown init scheme `{other}` (expected glorot_uniform, zeros or ones)"
            ))),
        }
    }
}

/// `(fan_in, fan_out)` for `[n]`, `[out × in]` and `[out × in × kernel]`.
pub fn fans(shape: &[usize]) -> (usize, usize) {
    match shape {
        [] => (1, 1),
        [n] => (*n, *n),
        [out, inp] => (*inp, *out),
        [out, inp, rest @ ..] => {
            let receptive: usize = rest.iter().product();
            (inp * receptive, out * receptive)
        }
    }
}

/// Glorot bound `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_limit(shape: &[usize]) -> f64 {
    let (fan_in, fan_out) = fans(shape);
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

pub fn init_params(shape: &[usize], scheme: InitScheme, rng: &mut Rng) -> Array {
    match scheme {
        InitScheme::Zeros => Array::zeros(shape),
        InitScheme::Ones => Array::filled(shape, 1.0),
        InitScheme::GlorotUniform => {
            let limit = glorot_limit(shape);
            let n: usize = shape.iter().product();
            let data = (0..n).map(|_| rng.uniform_in(-limit, limit)).collect();
            Array::from_vec(shape, data).expect("length matches shape")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_schemes() {
        let mut rng = Rng::seed_from_u64(0);
        assert_eq!(init_params(&[3, 2], InitScheme::Zeros, &mut rng).max_abs(), 0.0);
        let ones = init_params(&[4], InitScheme::Ones, &mut rng);
        assert!(ones.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn same_seed_same_draw() {
        let a = init_params(&[8, 5], InitScheme::GlorotUniform, &mut Rng::seed_from_u64(9));
        let b = init_params(&[8, 5], InitScheme::GlorotUniform, &mut Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn glorot_bound_respected() {
        let shape = [64, 32, 3];
        let w = init_params(&shape, InitScheme::GlorotUniform, &mut Rng::seed_from_u64(2));
        let limit = (6.0f64 / (32.0 * 3.0 + 64.0 * 3.0)).sqrt();
        assert!(w.max_abs() <= limit);
        // the draw actually spreads across the interval
        assert!(w.max_abs() > 0.9 * limit);
    }

    #[test]
    fn unknown_scheme_is_config_error() {
        assert!(matches!("he_normal".parse::<InitScheme>(), Err(Error::Config(_))));
        assert_eq!("zeros".parse::<InitScheme>().unwrap(), InitScheme::Zeros);
    }
}
