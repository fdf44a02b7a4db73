//! Central finite differences, the reference every analytic gradient in the
//! crate is checked against.

use super::{Array, Parameterized};

/// `(f(θ+h) − f(θ−h)) / 2h` for every scalar entry of every parameter, in
/// parameter order. Parameter values are restored afterwards.
pub fn finite_diff_grad<M, F>(model: &mut M, mut loss: F, h: f64) -> Vec<Array>
where
    M: Parameterized + ?Sized,
    F: FnMut(&mut M) -> f64,
{
    let shapes: Vec<Vec<usize>> = model
        .params()
        .iter()
        .map(|p| p.value.shape().to_vec())
        .collect();
    shapes
        .iter()
        .enumerate()
        .map(|(pi, shape)| {
            let n: usize = shape.iter().product();
            let data = (0..n)
                .map(|e| central_difference(model, &mut loss, h, pi, e))
                .collect();
            Array::from_vec(shape, data).expect("shape from parameter")
        })
        .collect()
}

/// Finite differences for selected `(parameter index, flat entry index)` pairs.
pub fn finite_diff_entries<M, F>(model: &mut M, mut loss: F, h: f64, entries: &[(usize, usize)]) -> Vec<f64>
where
    M: Parameterized + ?Sized,
    F: FnMut(&mut M) -> f64,
{
    entries
        .iter()
        .map(|&(pi, e)| central_difference(model, &mut loss, h, pi, e))
        .collect()
}

fn central_difference<M, F>(model: &mut M, loss: &mut F, h: f64, pi: usize, e: usize) -> f64
where
    M: Parameterized + ?Sized,
    F: FnMut(&mut M) -> f64,
{
    let original = model.params()[pi].value.data()[e];
    model.params_mut()[pi].value.data_mut()[e] = original + h;
    let plus = loss(model);
    model.params_mut()[pi].value.data_mut()[e] = original - h;
    let minus = loss(model);
    model.params_mut()[pi].value.data_mut()[e] = original;
    (plus - minus) / (2.0 * h)
}

/// Relative error `|a−b| / max(|a|, |b|, 1e-8)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| relative_error(x, y))
        .fold(0.0, f64::max)
}
