//! Strided matrix views over `f64` slices and a checked wrapper around the
//! `matrixmultiply` GEMM kernel. Input views may overlap (the convolution
//! layer reads sliding patches this way); output views may not.

/// Read-only strided matrix view.
#[derive(Clone, Copy, Debug)]
pub struct MatRef<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub cols: usize,
    pub row_stride: usize,
    pub col_stride: usize,
}

impl<'a> MatRef<'a> {
    /// Contiguous row-major `rows × cols` matrix starting at `data[0]`.
    pub fn row_major(data: &'a [f64], rows: usize, cols: usize) -> Self {
        Self {
            data,
            rows,
            cols,
            row_stride: cols,
            col_stride: 1,
        }
    }

    pub fn strided(
        data: &'a [f64],
        rows: usize,
        cols: usize,
        row_stride: usize,
        col_stride: usize,
    ) -> Self {
        Self {
            data,
            rows,
            cols,
            row_stride,
            col_stride,
        }
    }

    /// Transposed view of the same storage.
    pub fn t(self) -> Self {
        Self {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            row_stride: self.col_stride,
            col_stride: self.row_stride,
        }
    }

    fn assert_in_bounds(&self) {
        if self.rows == 0 || self.cols == 0 {
            return;
        }
        let last = (self.rows - 1) * self.row_stride + (self.cols - 1) * self.col_stride;
        assert!(
            last < self.data.len(),
            "matrix view {}x{} (strides {}, {}) exceeds buffer of {}",
            self.rows,
            self.cols,
            self.row_stride,
            self.col_stride,
            self.data.len()
        );
    }
}

/// Writable matrix view with unit column stride.
#[derive(Debug)]
pub struct MatMut<'a> {
    pub data: &'a mut [f64],
    pub rows: usize,
    pub cols: usize,
    pub row_stride: usize,
}

impl<'a> MatMut<'a> {
    pub fn row_major(data: &'a mut [f64], rows: usize, cols: usize) -> Self {
        Self {
            data,
            rows,
            cols,
            row_stride: cols,
        }
    }

    pub fn strided(data: &'a mut [f64], rows: usize, cols: usize, row_stride: usize) -> Self {
        Self {
            data,
            rows,
            cols,
            row_stride,
        }
    }
}

/// `c ← alpha·a·b + beta·c`.
///
/// Panics when the shapes do not conform or a view leaves its buffer; callers
/// validate user-facing shapes before reaching this point.
pub fn gemm(alpha: f64, a: MatRef<'_>, b: MatRef<'_>, beta: f64, c: MatMut<'_>) {
    assert_eq!(a.cols, b.rows, "gemm inner dimensions");
    assert_eq!(a.rows, c.rows, "gemm output rows");
    assert_eq!(b.cols, c.cols, "gemm output cols");
    a.assert_in_bounds();
    b.assert_in_bounds();
    if c.rows == 0 || c.cols == 0 {
        return;
    }
    assert!(c.row_stride >= c.cols, "output rows overlap");
    assert!(
        (c.rows - 1) * c.row_stride + c.cols <= c.data.len(),
        "output view exceeds buffer"
    );
    if a.cols == 0 {
        for r in 0..c.rows {
            for v in &mut c.data[r * c.row_stride..r * c.row_stride + c.cols] {
                *v *= beta;
            }
        }
        return;
    }
    // SAFETY: every index touched by the kernel lies inside the bounds checked
    // above, and the output view's rows are disjoint.
    unsafe {
        matrixmultiply::dgemm(
            a.rows,
            a.cols,
            b.cols,
            alpha,
            a.data.as_ptr(),
            a.row_stride as isize,
            a.col_stride as isize,
            b.data.as_ptr(),
            b.row_stride as isize,
            b.col_stride as isize,
            beta,
            c.data.as_mut_ptr(),
            c.row_stride as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &MatRef, b: &MatRef) -> Vec<f64> {
        let mut out = vec![0.0; a.rows * b.cols];
        for i in 0..a.rows {
            for j in 0..b.cols {
                for k in 0..a.cols {
                    out[i * b.cols + j] += a.data[i * a.row_stride + k * a.col_stride]
                        * b.data[k * b.row_stride + j * b.col_stride];
                }
            }
        }
        out
    }

    #[test]
    fn matches_naive_product_with_transposes() {
        let a: Vec<f64> = (0..12).map(|v| v as f64 * 0.5 - 2.0).collect();
        let b: Vec<f64> = (0..12).map(|v| (v as f64).sin()).collect();
        let av = MatRef::row_major(&a, 3, 4);
        let bv = MatRef::row_major(&b, 3, 4).t();
        let mut c = vec![0.0; 9];
        gemm(1.0, av, bv, 0.0, MatMut::row_major(&mut c, 3, 3));
        let expected = naive(&av, &bv);
        for (x, y) in c.iter().zip(&expected) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn overlapping_input_rows() {
        // rows are sliding windows of length 3 over [1,2,3,4]
        let x = [1.0, 2.0, 3.0, 4.0];
        let patches = MatRef::strided(&x, 2, 3, 1, 1);
        let k = [1.0, 0.0, -1.0];
        let mut out = vec![0.0; 2];
        gemm(
            1.0,
            patches,
            MatRef::row_major(&k, 3, 1),
            0.0,
            MatMut::row_major(&mut out, 2, 1),
        );
        assert_eq!(out, vec![-2.0, -2.0]);
    }

    #[test]
    #[should_panic]
    fn out_of_bounds_view_panics() {
        let x = [0.0; 4];
        let mut c = [0.0; 4];
        gemm(
            1.0,
            MatRef::row_major(&x, 2, 3),
            MatRef::row_major(&x, 3, 1),
            0.0,
            MatMut::row_major(&mut c, 2, 1),
        );
    }
}
