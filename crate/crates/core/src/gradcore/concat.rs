//! Flatten-and-concatenate and its adjoint.

use super::Array;
use crate::{Error, Result};

/// Row-major flattening of each part, concatenated in order.
pub fn concat_flatten(parts: &[&Array]) -> Result<Array> {
    if parts.is_empty() {
        return Err(Error::domain("concat_flatten needs at least one part"));
    }
    let data = parts.iter().flat_map(|p| p.data().iter().copied()).collect();
    Ok(Array::vector(data))
}

/// Adjoint of [`concat_flatten`]: routes slices of `grad` back to arrays of
/// the given shapes.
pub fn concat_flatten_backward(grad: &Array, shapes: &[Vec<usize>]) -> Result<Vec<Array>> {
    let total: usize = shapes.iter().map(|s| s.iter().product::<usize>()).sum();
    if grad.len() != total {
        return Err(Error::shape(format!(
            "gradient of length {} cannot be split into parts {shapes:?}",
            grad.len()
        )));
    }
    let mut offset = 0;
    shapes
        .iter()
        .map(|shape| {
            let n: usize = shape.iter().product();
            let part = Array::from_vec(shape, grad.data()[offset..offset + n].to_vec());
            offset += n;
            part
        })
        .collect()
}

/// Batched variant: each part has a leading batch axis; the remaining axes of
/// every part are flattened and concatenated per batch row, giving
/// `[batch × Σ widths]`.
pub fn concat_batch(parts: &[&Array]) -> Result<Array> {
    let first = parts
        .first()
        .ok_or_else(|| Error::domain("concat_batch needs at least one part"))?;
    let batch = first.dim(0);
    if let Some(bad) = parts.iter().find(|p| p.ndim() == 0 || p.dim(0) != batch) {
        return Err(Error::shape(format!(
            "batch sizes differ: {:?} vs {:?}",
            first.shape(),
            bad.shape()
        )));
    }
    let width: usize = parts.iter().map(|p| p.row_len()).sum();
    let mut data = Vec::with_capacity(batch * width);
    for b in 0..batch {
        for p in parts {
            data.extend_from_slice(p.row(b));
        }
    }
    Array::from_vec(&[batch, width], data)
}

/// Adjoint of [`concat_batch`].
pub fn split_batch(grad: &Array, shapes: &[Vec<usize>]) -> Result<Vec<Array>> {
    let batch = grad.dim(0);
    let widths: Vec<usize> = shapes.iter().map(|s| s[1..].iter().product()).collect();
    if grad.ndim() != 2
        || grad.dim(1) != widths.iter().sum::<usize>()
        || shapes.iter().any(|s| s[0] != batch)
    {
        return Err(Error::shape(format!(
            "gradient {:?} cannot be split into parts {shapes:?}",
            grad.shape()
        )));
    }
    let mut parts: Vec<Vec<f64>> = widths.iter().map(|w| Vec::with_capacity(batch * w)).collect();
    for b in 0..batch {
        let mut row = grad.row(b);
        for (part, &w) in parts.iter_mut().zip(&widths) {
            part.extend_from_slice(&row[..w]);
            row = &row[w..];
        }
    }
    parts
        .into_iter()
        .zip(shapes)
        .map(|(data, shape)| Array::from_vec(shape, data))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcore::Rng;
    use proptest::prelude::*;

    #[test]
    fn flattens_in_order() {
        let a = Array::vector(vec![1.0, 2.0]);
        let b = Array::vector(vec![3.0]);
        assert_eq!(concat_flatten(&[&a, &b]).unwrap().data(), &[1.0, 2.0, 3.0]);
        assert_eq!(concat_flatten(&[&a]).unwrap().data(), a.data());
    }

    #[test]
    fn empty_list_is_domain_error() {
        assert!(matches!(concat_flatten(&[]), Err(Error::Domain(_))));
    }

    #[test]
    fn backward_of_ones_is_ones() {
        let shapes = vec![vec![2, 2], vec![3]];
        let parts = concat_flatten_backward(&Array::filled(&[7], 1.0), &shapes).unwrap();
        assert!(parts.iter().all(|p| p.data().iter().all(|&v| v == 1.0)));
        assert_eq!(parts[0].shape(), &[2, 2]);
    }

    #[test]
    fn batched_concat_interleaves_rows() {
        let a = Array::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Array::from_rows(&[vec![5.0], vec![6.0]]).unwrap();
        let c = concat_batch(&[&a, &b]).unwrap();
        assert_eq!(c.data(), &[1.0, 2.0, 5.0, 3.0, 4.0, 6.0]);
        let back = split_batch(&c, &[vec![2, 2], vec![2, 1]]).unwrap();
        assert_eq!(back[0], a);
        assert_eq!(back[1], b);
    }

    proptest! {
        // <concat(x), y> == <x, concat_backward(y)>
        #[test]
        fn backward_is_adjoint(seed in any::<u64>(), n1 in 1usize..6, n2 in 1usize..6, n3 in 1usize..4) {
            let mut rng = Rng::seed_from_u64(seed);
            let shapes = vec![vec![n1, n2], vec![n3], vec![n2, n3, 2]];
            let xs: Vec<Array> = shapes
                .iter()
                .map(|s| {
                    let n: usize = s.iter().product();
                    Array::from_vec(s, (0..n).map(|_| rng.uniform_in(-1.0, 1.0)).collect()).unwrap()
                })
                .collect();
            let refs: Vec<&Array> = xs.iter().collect();
            let cat = concat_flatten(&refs).unwrap();
            let y = Array::vector((0..cat.len()).map(|_| rng.uniform_in(-1.0, 1.0)).collect());
            let lhs = cat.dot(&y).unwrap();
            let back = concat_flatten_backward(&y, &shapes).unwrap();
            let rhs: f64 = xs.iter().zip(&back).map(|(x, g)| x.dot(g).unwrap()).sum();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
