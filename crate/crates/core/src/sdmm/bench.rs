//! Benchmark sweeps over RBGP4 configurations.
//!
//! Two presets ship with the crate. One redistributes a fixed total sparsity
//! between `G_o` and `G_i`; the other varies the complete factors `G_r`, `G_b`
//! at a fixed `G_t` size to change row repetition.

use std::collections::HashMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;
use crate::lift::{generate_ramanujan, LiftChainSpec, DEFAULT_MAX_ATTEMPTS};
use crate::matrix::{DenseMatrix, Precision, Scalar};
use crate::product::{compose_sparsity, Rbgp4Config};
use crate::rcubs::RcubsMatrix;

use super::{
    dense_gemm_with, derive_tiling, rbgp4mm, sdmm_reference, DEFAULT_BN, DEFAULT_RN, DEFAULT_TN,
};

pub const MIN_RUNS: usize = 5;

/// One row of a sweep. Sparsities are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub id: String,
    pub g_o: (usize, usize),
    pub g_r: (usize, usize),
    pub g_i: (usize, usize),
    pub g_b: (usize, usize),
    pub sp_o: f64,
    pub sp_i: f64,
}

impl SweepConfig {
    pub fn total_sparsity(&self) -> f64 {
        100.0 * compose_sparsity(self.sp_o / 100.0, self.sp_i / 100.0)
    }
}

fn default_runs() -> usize {
    MIN_RUNS
}
fn default_workers() -> usize {
    super::default_workers()
}
fn default_tn() -> usize {
    DEFAULT_TN
}
fn default_rn() -> usize {
    DEFAULT_RN
}
fn default_bn() -> usize {
    DEFAULT_BN
}
fn default_precision() -> Precision {
    Precision::F32
}
fn default_attempts() -> usize {
    DEFAULT_MAX_ATTEMPTS
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub name: String,
    /// Columns of the dense input `I`.
    pub n_cols: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_tn")]
    pub tn: usize,
    #[serde(default = "default_rn")]
    pub rn: usize,
    #[serde(default = "default_bn")]
    pub bn: usize,
    #[serde(default = "default_precision")]
    pub precision: Precision,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_attempts")]
    pub max_attempts: usize,
    /// Also time the dense and unstructured baselines.
    #[serde(default = "default_true")]
    pub baselines: bool,
    #[serde(default)]
    pub configs: Vec<SweepConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// 1024 × 1024 × 1024.
    Desk,
    /// 4096 × 4096 × 4096.
    Full,
}

impl Scale {
    fn outer(self) -> (usize, usize) {
        match self {
            Scale::Desk => (8, 32),
            Scale::Full => (32, 128),
        }
    }

    fn n_cols(self) -> usize {
        match self {
            Scale::Desk => 1024,
            Scale::Full => 4096,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Scale::Desk => "desk",
            Scale::Full => "full",
        }
    }
}

/// Sparsity distribution between `G_o` and `G_i` at fixed factor sizes
/// `G_r = (4, 1)`, `G_i = (32, 32)`, `G_b = (1, 1)`.
pub fn sparsity_distribution_preset(scale: Scale) -> SweepSpec {
    let pairs = [
        (0.0, 75.0),
        (50.0, 50.0),
        (0.0, 87.5),
        (50.0, 75.0),
        (75.0, 50.0),
        (0.0, 93.75),
        (50.0, 87.5),
        (75.0, 75.0),
        (87.5, 50.0),
    ];
    let configs = pairs
        .iter()
        .map(|&(sp_o, sp_i)| SweepConfig {
            id: format!("spdist-o{sp_o}-i{sp_i}"),
            g_o: scale.outer(),
            g_r: (4, 1),
            g_i: (32, 32),
            g_b: (1, 1),
            sp_o,
            sp_i,
        })
        .collect();
    preset(format!("sparsity-distribution-{}", scale.label()), scale, configs)
}

/// Row repetition sweep: `G_t = G_r ⊗ G_i ⊗ G_b` fixed at (128, 32), `G_o` 50% sparse.
pub fn row_repetition_preset(scale: Scale) -> SweepSpec {
    let shapes = [
        ((1, 1), (1, 1)),
        ((2, 1), (1, 1)),
        ((4, 1), (1, 1)),
        ((1, 1), (2, 1)),
        ((1, 1), (4, 1)),
        ((2, 1), (2, 1)),
    ];
    let mut configs = Vec::new();
    for (g_r, g_b) in shapes {
        for sp_i in [50.0, 75.0, 87.5] {
            let rep_rows = g_r.0 * g_b.0;
            let rep_cols = g_r.1 * g_b.1;
            configs.push(SweepConfig {
                id: format!("rep-r{}x{}-b{}x{}-i{sp_i}", g_r.0, g_r.1, g_b.0, g_b.1),
                g_o: scale.outer(),
                g_r,
                g_i: (128 / rep_rows, 32 / rep_cols),
                g_b,
                sp_o: 50.0,
                sp_i,
            });
        }
    }
    preset(format!("row-repetition-{}", scale.label()), scale, configs)
}

fn preset(name: String, scale: Scale, configs: Vec<SweepConfig>) -> SweepSpec {
    SweepSpec {
        name,
        n_cols: scale.n_cols(),
        runs: MIN_RUNS,
        workers: default_workers(),
        tn: DEFAULT_TN,
        rn: DEFAULT_RN,
        bn: DEFAULT_BN,
        precision: Precision::F32,
        seed: 0,
        max_attempts: DEFAULT_MAX_ATTEMPTS,
        baselines: true,
        configs,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub config_id: String,
    pub rows: usize,
    pub cols: usize,
    pub inner: usize,
    pub sp_total: f64,
    pub sp_o: f64,
    pub sp_i: f64,
    pub rm: usize,
    pub bm: usize,
    pub tn: usize,
    pub rn: usize,
    pub bn: usize,
    pub workers: usize,
    pub median_ms: Option<f64>,
    pub speedup_vs_dense: Option<f64>,
    pub speedup_vs_unstructured: Option<f64>,
    pub fma_count: Option<u64>,
    pub steps_skipped: Option<usize>,
    /// Tile-buffer traffic of the RBGP4 kernel, weights plus inputs.
    pub tile_bytes: Option<u64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchTable {
    pub spec: SweepSpec,
    pub rows: Vec<BenchRow>,
}

pub const CSV_COLUMNS: [&str; 19] = [
    "config_id",
    "rows",
    "cols",
    "inner",
    "sp_total",
    "sp_o",
    "sp_i",
    "RM",
    "BM",
    "TN",
    "RN",
    "BN",
    "workers",
    "median_ms",
    "speedup_vs_dense",
    "speedup_vs_unstructured",
    "fma_count",
    "steps_skipped",
    "errors",
];

impl BenchTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(CSV_COLUMNS).map_err(io)?;
        let opt = |x: Option<f64>, prec: usize| x.map_or(String::new(), |v| format!("{v:.prec$}"));
        for r in &self.rows {
            w.write_record([
                r.config_id.clone(),
                r.rows.to_string(),
                r.cols.to_string(),
                r.inner.to_string(),
                format!("{:.2}", r.sp_total),
                format!("{:.2}", r.sp_o),
                format!("{:.2}", r.sp_i),
                r.rm.to_string(),
                r.bm.to_string(),
                r.tn.to_string(),
                r.rn.to_string(),
                r.bn.to_string(),
                r.workers.to_string(),
                opt(r.median_ms, 4),
                opt(r.speedup_vs_dense, 3),
                opt(r.speedup_vs_unstructured, 3),
                r.fma_count.map_or(String::new(), |v| v.to_string()),
                r.steps_skipped.map_or(String::new(), |v| v.to_string()),
                r.error.clone().unwrap_or_default(),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.into()))
    }
}

/// Everything needed to time one configuration.
pub struct Prepared<T> {
    pub weights: RcubsMatrix<T>,
    pub input: DenseMatrix<T>,
    pub params: super::TilingParams,
}

fn factor(
    dims: (usize, usize),
    sp_percent: f64,
    seed: u64,
    max_attempts: usize,
) -> Result<BipartiteGraph> {
    if sp_percent == 0.0 {
        return BipartiteGraph::complete(dims.0, dims.1);
    }
    let spec = LiftChainSpec::new(dims.0, dims.1, sp_percent / 100.0, seed).with_max_attempts(max_attempts);
    Ok(generate_ramanujan(&spec)?.graph)
}

/// Generates certified factors, random weights and a random input for `config`.
pub fn prepare<T: Scalar>(spec: &SweepSpec, config: &SweepConfig, seed: u64) -> Result<Prepared<T>> {
    let g_o = factor(config.g_o, config.sp_o, seed, spec.max_attempts)?;
    let g_i = factor(config.g_i, config.sp_i, seed ^ 0x5bd1_e995, spec.max_attempts)?;
    let rbgp = Rbgp4Config::uncertified(g_o, config.g_r, g_i, config.g_b, T::PRECISION)?;
    let params = derive_tiling(&rbgp, spec.tn, spec.rn, spec.bn, spec.workers)?;
    let chain = rbgp.chain()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = RcubsMatrix::<T>::init_random(chain, &mut rng, 1.0)?;
    let input = DenseMatrix::from_fn(weights.cols(), spec.n_cols, |_, _| {
        T::from_f64(rng.gen_range(-1.0..1.0))
    });
    if !spec.n_cols.is_multiple_of(params.tn) {
        return Err(Error::Config(vec![format!(
            "n_cols = {} is not divisible by TN = {}",
            spec.n_cols, params.tn
        )]));
    }
    Ok(Prepared {
        weights,
        input,
        params,
    })
}

/// Median of `runs` timed calls after one warm-up call, in milliseconds.
pub fn median_ms(runs: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    f()?;
    let mut times = Vec::with_capacity(runs);
    for _ in 0..runs {
        let start = Instant::now();
        f()?;
        times.push(start.elapsed().as_secs_f64() * 1e3);
    }
    times.sort_by(|a, b| a.total_cmp(b));
    let mid = times.len() / 2;
    Ok(if times.len() % 2 == 1 {
        times[mid]
    } else {
        0.5 * (times[mid - 1] + times[mid])
    })
}

pub fn run_sweep(spec: &SweepSpec) -> Result<BenchTable> {
    if spec.runs < MIN_RUNS {
        return Err(Error::InvalidArgument(format!(
            "runs = {} but at least {MIN_RUNS} timed runs are required",
            spec.runs
        )));
    }
    let mut dense_cache = HashMap::new();
    let rows = spec
        .configs
        .iter()
        .enumerate()
        .map(|(idx, config)| {
            let seed = spec.seed.wrapping_add((idx as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let result = match spec.precision {
                Precision::F32 => run_config::<f32>(spec, config, seed, &mut dense_cache),
                Precision::F64 => run_config::<f64>(spec, config, seed, &mut dense_cache),
            };
            result.unwrap_or_else(|e| {
                let mut row = empty_row(spec, config);
                row.error = Some(e.to_string());
                row
            })
        })
        .collect();
    Ok(BenchTable {
        spec: spec.clone(),
        rows,
    })
}

fn empty_row(spec: &SweepSpec, config: &SweepConfig) -> BenchRow {
    BenchRow {
        config_id: config.id.clone(),
        rows: config.g_o.0 * config.g_r.0 * config.g_i.0 * config.g_b.0,
        cols: spec.n_cols,
        inner: config.g_o.1 * config.g_r.1 * config.g_i.1 * config.g_b.1,
        sp_total: config.total_sparsity(),
        sp_o: config.sp_o,
        sp_i: config.sp_i,
        rm: config.g_r.0,
        bm: config.g_b.0,
        tn: spec.tn,
        rn: spec.rn,
        bn: spec.bn,
        workers: spec.workers,
        median_ms: None,
        speedup_vs_dense: None,
        speedup_vs_unstructured: None,
        fma_count: None,
        steps_skipped: None,
        tile_bytes: None,
        error: None,
    }
}

fn run_config<T: Scalar>(
    spec: &SweepSpec,
    config: &SweepConfig,
    seed: u64,
    dense_cache: &mut HashMap<(usize, usize, usize, Precision), f64>,
) -> Result<BenchRow> {
    let prepared = prepare::<T>(spec, config, seed)?;
    let (w, input, params) = (&prepared.weights, &prepared.input, &prepared.params);
    let mut report = None;
    let rbgp_ms = median_ms(spec.runs, || {
        report = Some(rbgp4mm(w, input, params)?.1);
        Ok(())
    })?;
    let report = report.expect("at least one run");
    let mut row = empty_row(spec, config);
    row.median_ms = Some(rbgp_ms);
    row.fma_count = Some(report.fma_count);
    row.steps_skipped = Some(report.outer_steps_skipped_per_tile_row);
    row.tile_bytes = Some(report.w_bytes_read + report.i_bytes_read);

    if spec.baselines {
        let key = (w.rows(), w.cols(), spec.n_cols, T::PRECISION);
        let dense_ms = match dense_cache.get(&key) {
            Some(&ms) => ms,
            None => {
                let dense_w = w.to_dense();
                let ms = median_ms(spec.runs, || {
                    dense_gemm_with(&dense_w, input, spec.workers)?;
                    Ok(())
                })?;
                dense_cache.insert(key, ms);
                ms
            }
        };
        let csr_ms = median_ms(spec.runs, || {
            sdmm_reference(w, input)?;
            Ok(())
        })?;
        row.speedup_vs_dense = Some(dense_ms / rbgp_ms);
        row.speedup_vs_unstructured = Some(csr_ms / rbgp_ms);
    }
    Ok(row)
}
