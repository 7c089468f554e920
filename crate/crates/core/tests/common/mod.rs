#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rbgp::lift::generate_biregular;
use rbgp::sdmm::{derive_tiling, TilingParams};
use rbgp::{BipartiteGraph, DenseMatrix, LiftChainSpec, Precision, Rbgp4Config, RcubsMatrix, Scalar};

/// (sp_o, sp_i) pairs of the sparsity-distribution sweep, as fractions.
pub const DISTRIBUTIONS: [(f64, f64); 9] = [
    (0.0, 0.75),
    (0.5, 0.5),
    (0.0, 0.875),
    (0.5, 0.75),
    (0.75, 0.5),
    (0.0, 0.9375),
    (0.5, 0.875),
    (0.75, 0.75),
    (0.875, 0.5),
];

pub struct Case {
    pub config: Rbgp4Config,
    pub sp_o: f64,
    pub params: TilingParams,
    pub n: usize,
}

pub fn biregular<R: Rng>(dims: (usize, usize), sp: f64, rng: &mut R) -> BipartiteGraph {
    let spec = LiftChainSpec::new(dims.0, dims.1, sp, 0);
    generate_biregular(&spec, rng).unwrap()
}

/// Random RBGP4 configuration with both sides ≤ `max_side` and the given distribution.
pub fn random_case<R: Rng>(rng: &mut R, (sp_o, sp_i): (f64, f64), max_side: usize, workers: usize) -> Case {
    loop {
        let go = (*[8, 16].choose(rng).unwrap(), *[8, 16].choose(rng).unwrap());
        let gi = (*[16, 32].choose(rng).unwrap(), *[16, 32].choose(rng).unwrap());
        let gr = (rng.gen_range(1..=2), rng.gen_range(1..=2));
        let gb = (rng.gen_range(1..=2), rng.gen_range(1..=2));
        let rows = go.0 * gr.0 * gi.0 * gb.0;
        let cols = go.1 * gr.1 * gi.1 * gb.1;
        if rows > max_side || cols > max_side {
            continue;
        }
        let (tn, rn, bn) = *[(8, 1, 8), (16, 2, 4), (16, 1, 2), (32, 2, 16), (8, 2, 1), (32, 4, 4)]
            .choose(rng)
            .unwrap();
        let n = tn * rng.gen_range(1..=2);
        if n > max_side {
            continue;
        }
        let g_o = biregular(go, sp_o, rng);
        let g_i = biregular(gi, sp_i, rng);
        let config = Rbgp4Config::uncertified(g_o, gr, g_i, gb, Precision::F64).unwrap();
        let params = derive_tiling(&config, tn, rn, bn, workers).unwrap();
        return Case { config, sp_o, params, n };
    }
}

pub fn random_dense<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// Textbook triple loop over the materialized weight matrix, in f64.
pub fn naive_product<T: Scalar>(w: &RcubsMatrix<T>, input: &DenseMatrix<T>) -> DenseMatrix<f64> {
    let dense = w.to_dense();
    let mut out = DenseMatrix::zeros(dense.rows(), input.cols());
    for i in 0..dense.rows() {
        for k in 0..dense.cols() {
            let a = dense.get(i, k).widen();
            if a == 0.0 {
                continue;
            }
            for j in 0..input.cols() {
                let v = out.get(i, j) + a * input.get(k, j).widen();
                out.set(i, j, v);
            }
        }
    }
    out
}

/// `max |got − want| / max |want|`.
pub fn relative_error<T: Scalar>(got: &DenseMatrix<T>, want: &DenseMatrix<f64>) -> f64 {
    let diff = got
        .as_slice()
        .iter()
        .zip(want.as_slice())
        .map(|(g, w)| (g.widen() - w).abs())
        .fold(0.0, f64::max);
    diff / want.max_abs().max(f64::MIN_POSITIVE)
}
