mod common;

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rbgp::sdmm::{dense_gemm, derive_tiling, rbgp4mm, sdmm_reference, TilingParams};
use rbgp::{BipartiteGraph, DenseMatrix, Precision, Rbgp4Config, RcubsMatrix};

fn weights(case: &Case, seed: u64) -> RcubsMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RcubsMatrix::init_random(case.config.chain().unwrap(), &mut rng, 1.0).unwrap()
}

#[test]
fn kernel_agrees_with_csr_and_dense() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (i, &dist) in DISTRIBUTIONS.iter().enumerate() {
        let case = random_case(&mut rng, dist, 256, 3);
        let w = weights(&case, i as u64);
        let input = random_dense(w.cols(), case.n, &mut rng);
        let (out, _) = rbgp4mm(&w, &input, &case.params).unwrap();
        assert_eq!(out, sdmm_reference(&w, &input).unwrap());
        let dense = dense_gemm(&w.to_dense(), &input).unwrap();
        assert!(relative_error(&out, &dense) < 1e-12);
    }
}

#[test]
fn row_groups_share_column_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let case = random_case(&mut rng, (0.5, 0.5), 512, 1);
    let p: TilingParams = case.params;
    let csr = weights(&case, 1).to_unstructured();
    let cols_of = |r: usize| &csr.col_indices[csr.row_offsets[r]..csr.row_offsets[r + 1]];
    let stride = p.inner_left * p.bm;
    for tile in 0..csr.rows / p.tm {
        for thm in 0..p.inner_left {
            let first = tile * p.tm + thm * p.bm;
            for rm in 0..p.rm {
                for m in 0..p.bm {
                    assert_eq!(cols_of(tile * p.tm + rm * stride + thm * p.bm + m), cols_of(first));
                }
            }
        }
    }
}

#[test]
fn input_traffic_falls_as_outer_sparsity_grows() {
    // Fixed total sparsity 87.5%: a sparser G_o means fewer input tiles to load.
    let mut bytes = Vec::new();
    for (sp_o, sp_i) in [(0.0, 0.875), (0.5, 0.75), (0.75, 0.5)] {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g_o = biregular((16, 16), sp_o, &mut rng);
        let g_i = biregular((16, 16), sp_i, &mut rng);
        let cfg = Rbgp4Config::uncertified(g_o, (2, 1), g_i, (1, 1), Precision::F32).unwrap();
        let w = RcubsMatrix::<f32>::init_random(cfg.chain().unwrap(), &mut rng, 1.0).unwrap();
        let input = DenseMatrix::<f32>::zeros(w.cols(), 32);
        let p = derive_tiling(&cfg, 32, 2, 4, 2).unwrap();
        let (_, report) = rbgp4mm(&w, &input, &p).unwrap();
        assert_eq!(report.fma_count, (w.nnz() * 32) as u64);
        bytes.push(report.i_bytes_read);
    }
    assert!(bytes[0] > bytes[1] && bytes[1] > bytes[2], "{bytes:?}");
}

#[test]
fn skipped_steps_follow_outer_sparsity() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for &dist in &DISTRIBUTIONS {
        let case = random_case(&mut rng, dist, 512, 2);
        let w = weights(&case, 3);
        let input = random_dense(w.cols(), case.n, &mut rng);
        let (_, report) = rbgp4mm(&w, &input, &case.params).unwrap();
        let outer_cols = w.cols() / case.params.tk;
        assert_eq!(report.outer_steps_skipped_per_tile_row as f64, case.sp_o * outer_cols as f64);
        assert_eq!(
            report.outer_steps_total,
            (report.output_tiles * (outer_cols - report.outer_steps_skipped_per_tile_row)) as u64
        );
    }
}

#[test]
fn complete_factors_reduce_to_dense() {
    let k = |m, n| BipartiteGraph::complete(m, n).unwrap();
    let cfg = Rbgp4Config::uncertified(k(4, 2), (2, 2), k(4, 4), (1, 2), Precision::F64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let w = RcubsMatrix::<f64>::init_random(cfg.chain().unwrap(), &mut rng, 1.0).unwrap();
    assert_eq!(w.nnz(), w.rows() * w.cols());
    let input = random_dense(w.cols(), 16, &mut rng);
    let p = derive_tiling(&cfg, 16, 2, 2, 4).unwrap();
    let (out, report) = rbgp4mm(&w, &input, &p).unwrap();
    assert_eq!(report.outer_steps_skipped_per_tile_row, 0);
    assert!(relative_error(&out, &naive_product(&w, &input)) < 1e-13);
}
