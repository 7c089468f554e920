use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, Scalar};

use super::{default_workers, worker_pool};

const ROW_BLOCK: usize = 32;
const K_BLOCK: usize = 256;
const COL_BLOCK: usize = 512;

/// Dense product on the default worker count.
pub fn dense_gemm<T: Scalar>(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    dense_gemm_with(a, b, default_workers())
}

/// Cache-blocked dense product; row blocks are distributed over `workers` threads.
///
/// Every output element accumulates over `k` in ascending order.
pub fn dense_gemm_with<T: Scalar>(
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
    workers: usize,
) -> Result<DenseMatrix<T>> {
    if a.cols() != b.rows() {
        return Err(Error::Shape(format!(
            "A is {}x{} but B is {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let (k, n) = b.shape();
    let mut out = DenseMatrix::zeros(a.rows(), n);
    worker_pool(workers.max(1)).install(|| {
        out.as_mut_slice()
            .par_chunks_mut(ROW_BLOCK * n)
            .enumerate()
            .for_each(|(blk, chunk)| {
                let r0 = blk * ROW_BLOCK;
                for j0 in (0..n).step_by(COL_BLOCK) {
                    let j1 = (j0 + COL_BLOCK).min(n);
                    for k0 in (0..k).step_by(K_BLOCK) {
                        let k1 = (k0 + K_BLOCK).min(k);
                        for (i, crow) in chunk.chunks_exact_mut(n).enumerate() {
                            let arow = a.row(r0 + i);
                            let crow = &mut crow[j0..j1];
                            for (kk, &aik) in arow.iter().enumerate().take(k1).skip(k0) {
                                for (c, &x) in crow.iter_mut().zip(&b.row(kk)[j0..j1]) {
                                    *c += aik * x;
                                }
                            }
                        }
                    }
                }
            });
    });
    Ok(out)
}
