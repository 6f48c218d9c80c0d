//! Dense row-major matrices and the GEMM kernel everything else is built on.

use serde::{Deserialize, Serialize};

/// A dense row-major `rows × cols` matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "tensor data does not match {rows}x{cols}");
        Self { rows, cols, data }
    }

    pub fn row_vector(data: Vec<f64>) -> Self {
        let cols = data.len();
        Self { rows: 1, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self { rows: rows.len(), cols, data }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.cols;
        &mut self.data[r * c..(r + 1) * c]
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale_in_place(&mut self, s: f64) {
        for a in &mut self.data {
            *a *= s;
        }
    }

    pub fn sum_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn transpose(&self) -> Tensor {
        let mut out = Tensor::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Tensor) -> Tensor {
        let mut out = Tensor::zeros(self.rows, other.cols);
        gemm(MatRef::normal(self), MatRef::normal(other), &mut out, 0.0);
        out
    }
}

/// A borrowed, possibly strided matrix view.
#[derive(Clone, Copy)]
pub struct MatRef<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
    row_stride: isize,
    col_stride: isize,
}

impl<'a> MatRef<'a> {
    pub fn normal(t: &'a Tensor) -> Self {
        Self { data: &t.data, rows: t.rows, cols: t.cols, row_stride: t.cols as isize, col_stride: 1 }
    }

    pub fn transposed(t: &'a Tensor) -> Self {
        Self { data: &t.data, rows: t.cols, cols: t.rows, row_stride: 1, col_stride: t.cols as isize }
    }

    /// Columns `start..start + width` of `t`.
    pub fn col_block(t: &'a Tensor, start: usize, width: usize) -> Self {
        assert!(start + width <= t.cols);
        Self { data: &t.data[start..], rows: t.rows, cols: width, row_stride: t.cols as isize, col_stride: 1 }
    }

    pub fn t(self) -> Self {
        Self {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            row_stride: self.col_stride,
            col_stride: self.row_stride,
        }
    }
}

/// A mutable, possibly strided matrix view.
pub struct MatMut<'a> {
    data: &'a mut [f64],
    rows: usize,
    cols: usize,
    row_stride: isize,
}

impl<'a> MatMut<'a> {
    pub fn whole(t: &'a mut Tensor) -> Self {
        let (rows, cols) = t.shape();
        Self { data: &mut t.data, rows, cols, row_stride: cols as isize }
    }

    pub fn col_block(t: &'a mut Tensor, start: usize, width: usize) -> Self {
        assert!(start + width <= t.cols);
        let (rows, stride) = (t.rows, t.cols as isize);
        Self { data: &mut t.data[start..], rows, cols: width, row_stride: stride }
    }
}

/// `out = beta * out + a · b`.
pub fn gemm(a: MatRef<'_>, b: MatRef<'_>, out: &mut Tensor, beta: f64) {
    gemm_into(a, b, MatMut::whole(out), beta);
}

/// `out = beta * out + a · b` for strided views.
pub fn gemm_into(a: MatRef<'_>, b: MatRef<'_>, out: MatMut<'_>, beta: f64) {
    assert_eq!(a.cols, b.rows, "gemm inner dimensions disagree");
    assert_eq!((out.rows, out.cols), (a.rows, b.cols), "gemm output shape");
    let (m, k, n) = (a.rows, a.cols, b.cols);
    if m == 0 || n == 0 {
        return;
    }
    check_extent(a.data.len(), a.rows, a.cols, a.row_stride, a.col_stride);
    check_extent(b.data.len(), b.rows, b.cols, b.row_stride, b.col_stride);
    check_extent(out.data.len(), out.rows, out.cols, out.row_stride, 1);
    // SAFETY: `check_extent` proves every addressed element lies inside its
    // slice, and `out` is a unique borrow so it cannot alias the inputs.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            a.row_stride,
            a.col_stride,
            b.data.as_ptr(),
            b.row_stride,
            b.col_stride,
            beta,
            out.data.as_mut_ptr(),
            out.row_stride,
            1,
        );
    }
}

fn check_extent(len: usize, rows: usize, cols: usize, rs: isize, cs: isize) {
    if rows == 0 || cols == 0 {
        return;
    }
    let last = (rows - 1) as isize * rs + (cols - 1) as isize * cs;
    assert!(rs >= 0 && cs >= 0 && (last as usize) < len, "strided view out of bounds");
}
