use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, Scalar};
use crate::rcubs::{CsrMatrix, RcubsMatrix};

/// Naive row-wise sparse × dense multiply, single-threaded.
///
/// Each output element sums its row's stored values in sorted column order.
pub fn sdmm_reference<T: Scalar>(w: &RcubsMatrix<T>, input: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    sdmm_reference_csr(&w.to_unstructured(), input)
}

pub fn sdmm_reference_csr<T: Scalar>(w: &CsrMatrix<T>, input: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    if w.cols != input.rows() {
        return Err(Error::Shape(format!(
            "W is {}x{} but I has {} rows",
            w.rows,
            w.cols,
            input.rows()
        )));
    }
    let n = input.cols();
    let mut out = DenseMatrix::zeros(w.rows, n);
    for u in 0..w.rows {
        let span = w.row_offsets[u]..w.row_offsets[u + 1];
        let row = out.row_mut(u);
        for (&c, &a) in w.col_indices[span.clone()].iter().zip(&w.values[span]) {
            for (o, &x) in row.iter_mut().zip(input.row(c)) {
                *o += a * x;
            }
        }
    }
    Ok(out)
}
