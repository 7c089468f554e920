//! Tiled RBGP4 sparse × dense multiply.
//!
//! One output tile (`TM × TN`) is one work item. For each nonzero `G_o` tile in
//! the tile-row, the weight tile and the matching input tile are first copied
//! into contiguous tile buffers; the weight tile is stored per row group so the
//! `RM·BM` rows that share a column set have their weights side by side. The
//! tile is then swept by "threads" `(thm, thn)`, each owning `RM·BM` rows and
//! `RN` segments of `BN` columns: per weight column it reads one `BN` input
//! segment per `RN` and reuses it for all `RM·BM` rows.
//!
//! Accumulation order per output element is `outk`, then `rk`, `ink`, then the
//! `BK` lane, which is the sorted column order of the row. The result is
//! therefore independent of worker count and bit-identical to a sequential
//! row-wise multiply.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;
use crate::matrix::{DenseMatrix, Scalar};
use crate::rcubs::RcubsMatrix;

use super::tiling::{tiling_for_chain, TilingParams};
use super::worker_pool;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkReport {
    /// Multiply-adds performed; equals `nnz(W) · I.cols`.
    pub fma_count: u64,
    pub output_tiles: usize,
    pub tile_rows: usize,
    /// Outer steps (nonzero weight tiles) processed for each output tile.
    pub outer_steps_per_tile: usize,
    /// Zero weight tiles skipped in each tile-row, `cols/TK − d_left(G_o)`.
    pub outer_steps_skipped_per_tile_row: usize,
    pub outer_steps_total: u64,
    /// Bytes copied from the value array into weight tile buffers.
    pub w_bytes_read: u64,
    /// Bytes copied from the input into input tile buffers.
    pub i_bytes_read: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct TileStats {
    steps: usize,
    micro_ops: u64,
    w_elems: u64,
    i_elems: u64,
}

struct Shared<'a, T> {
    values: &'a [T],
    row_nnz: usize,
    input: &'a [T],
    n: usize,
    outer: &'a BipartiteGraph,
    inner: &'a BipartiteGraph,
    inner_degree: usize,
    p: TilingParams,
}

struct Scratch<T> {
    w_tile: Vec<T>,
    i_tile: Vec<T>,
    in_rows: Vec<usize>,
}

pub fn rbgp4mm<T: Scalar>(
    w: &RcubsMatrix<T>,
    input: &DenseMatrix<T>,
    params: &TilingParams,
) -> Result<(DenseMatrix<T>, WorkReport)> {
    let p = *params;
    let expected = tiling_for_chain(w.chain(), p.tn, p.rn, p.bn, p.workers)?;
    if expected != p {
        return Err(Error::Config(vec![format!(
            "tiling {p:?} does not match the weight chain (expected {expected:?})"
        )]));
    }
    if w.cols() != input.rows() {
        return Err(Error::Shape(format!(
            "W is {}x{} but I has {} rows",
            w.rows(),
            w.cols(),
            input.rows()
        )));
    }
    let n = input.cols();
    if !n.is_multiple_of(p.tn) {
        return Err(Error::Config(vec![format!(
            "I has {n} columns, not divisible by TN = {}",
            p.tn
        )]));
    }

    let graphs = w.chain().graphs();
    let shared = Shared {
        values: w.values(),
        row_nnz: w.row_nnz(),
        input: input.as_slice(),
        n,
        outer: &graphs[0],
        inner: &graphs[2],
        inner_degree: graphs[2].neighbors(0).len(),
        p,
    };
    let tile_rows = w.rows() / p.tm;
    let tile_cols = n / p.tn;
    let outer_cols = graphs[0].num_right();
    let outer_degree = graphs[0].neighbors(0).len();

    let tiles: Vec<(Vec<T>, TileStats)> = worker_pool(p.workers).install(|| {
        (0..tile_rows * tile_cols)
            .into_par_iter()
            .map_init(
                || Scratch {
                    w_tile: vec![T::zero(); p.tm * p.rk * shared.inner_degree * p.bk],
                    i_tile: vec![T::zero(); p.tk * p.tn],
                    in_rows: Vec::new(),
                },
                |scratch, t| {
                    let (tbm, tbn) = (t / tile_cols, t % tile_cols);
                    match p.bn {
                        1 => compute_tile::<T, 1>(&shared, scratch, tbm, tbn),
                        2 => compute_tile::<T, 2>(&shared, scratch, tbm, tbn),
                        4 => compute_tile::<T, 4>(&shared, scratch, tbm, tbn),
                        8 => compute_tile::<T, 8>(&shared, scratch, tbm, tbn),
                        16 => compute_tile::<T, 16>(&shared, scratch, tbm, tbn),
                        _ => unreachable!("BN validated by tiling_for_chain"),
                    }
                },
            )
            .collect()
    });

    let mut out = DenseMatrix::zeros(w.rows(), n);
    let mut total = TileStats::default();
    let mut steps_per_tile = None;
    for (t, (acc, stats)) in tiles.into_iter().enumerate() {
        let (tbm, tbn) = (t / tile_cols, t % tile_cols);
        for (r, src) in acc.chunks_exact(p.tn).enumerate() {
            let row = out.row_mut(tbm * p.tm + r);
            row[tbn * p.tn..(tbn + 1) * p.tn].copy_from_slice(src);
        }
        debug_assert!(steps_per_tile.is_none_or(|s| s == stats.steps));
        steps_per_tile = Some(stats.steps);
        total.steps += stats.steps;
        total.micro_ops += stats.micro_ops;
        total.w_elems += stats.w_elems;
        total.i_elems += stats.i_elems;
    }
    let steps = steps_per_tile.unwrap_or(outer_degree);
    let width = T::PRECISION.width() as u64;
    let report = WorkReport {
        fma_count: total.micro_ops * (p.rm * p.rn * p.bm * p.bk * p.bn) as u64,
        output_tiles: tile_rows * tile_cols,
        tile_rows,
        outer_steps_per_tile: steps,
        outer_steps_skipped_per_tile_row: outer_cols - steps,
        outer_steps_total: total.steps as u64,
        w_bytes_read: total.w_elems * width,
        i_bytes_read: total.i_elems * width,
    };
    Ok((out, report))
}

fn compute_tile<T: Scalar, const BN: usize>(
    s: &Shared<'_, T>,
    scratch: &mut Scratch<T>,
    tbm: usize,
    tbn: usize,
) -> (Vec<T>, TileStats) {
    let p = &s.p;
    let (tm, tk, tn) = (p.tm, p.tk, p.tn);
    let di = s.inner_degree;
    // Values per weight-tile row: d_left(G_r ⊗ G_i ⊗ G_b).
    let tile_nnz = p.rk * di * p.bk;
    // Rows sharing one column set: RM·BM per row group.
    let rep = p.rm * p.bm;
    let row_stride = p.inner_left * p.bm;
    let col_stride = tn / p.rn;
    let groups = tn / (p.rn * BN);
    let tile_row = |thm: usize, r: usize| (r / p.bm) * row_stride + thm * p.bm + r % p.bm;

    // Input-tile row read by value column `c` of row group `thm`.
    let in_rows = &mut scratch.in_rows;
    in_rows.clear();
    for thm in 0..p.inner_left {
        for rk in 0..p.rk {
            for &vi in s.inner.neighbors(thm) {
                for kk in 0..p.bk {
                    in_rows.push((rk * p.inner_right + vi) * p.bk + kk);
                }
            }
        }
    }

    // Accumulators grouped as [thm][r][tn]; scattered back to tile rows at the end.
    let mut acc = vec![T::zero(); tm * tn];
    let mut stats = TileStats::default();

    for (outk, &oind) in s.outer.neighbors(tbm).iter().enumerate() {
        // Weight tile, transposed per row group to [thm][c][r] so the `rep`
        // weights of one column sit together.
        for thm in 0..p.inner_left {
            for r in 0..rep {
                let src = (tbm * tm + tile_row(thm, r)) * s.row_nnz + outk * tile_nnz;
                let row = &s.values[src..src + tile_nnz];
                let base = thm * tile_nnz * rep + r;
                for (c, &v) in row.iter().enumerate() {
                    scratch.w_tile[base + c * rep] = v;
                }
            }
        }
        // Input tile: block (oind, tbn) of shape TK × TN.
        for r in 0..tk {
            let src = (oind * tk + r) * s.n + tbn * tn;
            scratch.i_tile[r * tn..(r + 1) * tn].copy_from_slice(&s.input[src..src + tn]);
        }
        stats.steps += 1;
        stats.w_elems += (tm * tile_nnz) as u64;
        stats.i_elems += (tk * tn) as u64;

        for thm in 0..p.inner_left {
            let w_grp = &scratch.w_tile[thm * tile_nnz * rep..(thm + 1) * tile_nnz * rep];
            let rows_grp = &in_rows[thm * tile_nnz..(thm + 1) * tile_nnz];
            let acc_grp = &mut acc[thm * rep * tn..(thm + 1) * rep * tn];
            for thn in 0..groups {
                for rn in 0..p.rn {
                    let col = rn * col_stride + thn * BN;
                    match rep {
                        1 => micro::<T, BN, 1>(w_grp, rows_grp, &scratch.i_tile, acc_grp, tn, col),
                        2 => micro::<T, BN, 2>(w_grp, rows_grp, &scratch.i_tile, acc_grp, tn, col),
                        4 => micro::<T, BN, 4>(w_grp, rows_grp, &scratch.i_tile, acc_grp, tn, col),
                        8 => micro::<T, BN, 8>(w_grp, rows_grp, &scratch.i_tile, acc_grp, tn, col),
                        _ => micro_dyn::<T, BN>(w_grp, rows_grp, &scratch.i_tile, acc_grp, tn, col, rep),
                    }
                }
            }
            stats.micro_ops += (groups * p.rk * di) as u64;
        }
    }

    let mut out = vec![T::zero(); tm * tn];
    for thm in 0..p.inner_left {
        for r in 0..rep {
            let src = (thm * rep + r) * tn;
            let dst = tile_row(thm, r) * tn;
            out[dst..dst + tn].copy_from_slice(&acc[src..src + tn]);
        }
    }
    (out, stats)
}

/// Accumulates `REP` rows × `BN` columns starting at `col` in registers over all weight columns.
#[inline(always)]
fn micro<T: Scalar, const BN: usize, const REP: usize>(
    w: &[T],
    in_rows: &[usize],
    i_tile: &[T],
    acc: &mut [T],
    tn: usize,
    col: usize,
) {
    let mut c = [[T::zero(); BN]; REP];
    for (r, cr) in c.iter_mut().enumerate() {
        cr.copy_from_slice(&acc[r * tn + col..r * tn + col + BN]);
    }
    for (a, &irow) in w.chunks_exact(REP).zip(in_rows) {
        let b: &[T; BN] = i_tile[irow * tn + col..irow * tn + col + BN].try_into().unwrap();
        for r in 0..REP {
            for j in 0..BN {
                c[r][j] += a[r] * b[j];
            }
        }
    }
    for (r, cr) in c.iter().enumerate() {
        acc[r * tn + col..r * tn + col + BN].copy_from_slice(cr);
    }
}

fn micro_dyn<T: Scalar, const BN: usize>(
    w: &[T],
    in_rows: &[usize],
    i_tile: &[T],
    acc: &mut [T],
    tn: usize,
    col: usize,
    rep: usize,
) {
    for r in 0..rep {
        let mut c = [T::zero(); BN];
        c.copy_from_slice(&acc[r * tn + col..r * tn + col + BN]);
        for (a, &irow) in w.chunks_exact(rep).zip(in_rows) {
            let b = &i_tile[irow * tn + col..irow * tn + col + BN];
            for j in 0..BN {
                c[j] += a[r] * b[j];
            }
        }
        acc[r * tn + col..r * tn + col + BN].copy_from_slice(&c);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Precision;
    use crate::product::{Rbgp4Config, RbgpChain};
    use crate::sdmm::{derive_tiling, sdmm_reference};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_input(rows: usize, cols: usize, seed: u64) -> DenseMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn identity_weights_return_input() {
        let id = BipartiteGraph::identity(8).unwrap();
        let k11 = BipartiteGraph::complete(1, 1).unwrap();
        let cfg = Rbgp4Config::uncertified(id, (1, 1), k11, (1, 1), Precision::F64).unwrap();
        let w = RcubsMatrix::new(cfg.chain().unwrap(), vec![1.0; 8]).unwrap();
        let input = random_input(8, 8, 1);
        let p = derive_tiling(&cfg, 4, 1, 4, 2).unwrap();
        let (out, report) = rbgp4mm(&w, &input, &p).unwrap();
        assert_eq!(out, input);
        assert_eq!(report.outer_steps_skipped_per_tile_row, 7);
    }

    #[test]
    fn small_example_skips_one_of_two_steps() {
        // Perfect matchings for G_o and G_i, G_r = (2,1), G_b = (2,2): W is 16 × 8.
        let m = BipartiteGraph::identity(2).unwrap();
        let cfg = Rbgp4Config::uncertified(m.clone(), (2, 1), m, (2, 2), Precision::F64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = RcubsMatrix::<f64>::init_random(cfg.chain().unwrap(), &mut rng, 1.0).unwrap();
        assert_eq!((w.rows(), w.cols()), (16, 8));
        let p = derive_tiling(&cfg, 4, 1, 2, 1).unwrap();
        let input = random_input(8, 4, 3);
        let (out, report) = rbgp4mm(&w, &input, &p).unwrap();
        assert_eq!(out, sdmm_reference(&w, &input).unwrap());
        assert_eq!(report.outer_steps_per_tile, 1);
        assert_eq!(report.outer_steps_skipped_per_tile_row, 1);
        assert_eq!(report.fma_count, (w.nnz() * 4) as u64);
    }

    #[test]
    fn rejects_mismatched_shapes_and_params() {
        let k = BipartiteGraph::complete(2, 2).unwrap();
        let cfg = Rbgp4Config::uncertified(k.clone(), (1, 1), k, (1, 1), Precision::F64).unwrap();
        let w = RcubsMatrix::<f64>::zeros(cfg.chain().unwrap()).unwrap();
        let p = derive_tiling(&cfg, 4, 1, 4, 1).unwrap();
        assert!(matches!(rbgp4mm(&w, &random_input(3, 4, 0), &p), Err(Error::Shape(_))));
        assert!(matches!(rbgp4mm(&w, &random_input(4, 6, 0), &p), Err(Error::Config(_))));
        let other = RbgpChain::from_graphs(vec![
            BipartiteGraph::complete(4, 4).unwrap(),
            BipartiteGraph::complete(1, 1).unwrap(),
            BipartiteGraph::complete(1, 1).unwrap(),
            BipartiteGraph::complete(1, 1).unwrap(),
        ])
        .unwrap();
        let w2 = RcubsMatrix::<f64>::zeros(other).unwrap();
        assert!(matches!(rbgp4mm(&w2, &random_input(4, 4, 0), &p), Err(Error::Config(_))));
    }
}
