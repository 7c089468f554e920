//! Sparse × dense multiplication: the tiled RBGP4 kernel, reference oracles,
//! a dense baseline and the benchmark sweep harness.

pub mod bench;
mod dense;
mod kernel;
mod reference;
mod tiling;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::{ThreadPool, ThreadPoolBuilder};

pub use dense::{dense_gemm, dense_gemm_with};
pub use kernel::{rbgp4mm, WorkReport};
pub use reference::{sdmm_reference, sdmm_reference_csr};
pub use tiling::{
    derive_tiling, tiling_for_chain, TilingParams, DEFAULT_BN, DEFAULT_RN, DEFAULT_TN, SUPPORTED_BN,
};

/// Environment variable consulted for the default worker count.
pub const WORKERS_ENV: &str = "RBGP_WORKERS";

/// `RBGP_WORKERS` if set and positive, else the machine's available parallelism.
pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Pools are built once per worker count and kept for the process lifetime.
pub(crate) fn worker_pool(workers: usize) -> Arc<ThreadPool> {
    static POOLS: OnceLock<Mutex<HashMap<usize, Arc<ThreadPool>>>> = OnceLock::new();
    let mut pools = POOLS.get_or_init(Default::default).lock().unwrap();
    pools
        .entry(workers)
        .or_insert_with(|| {
            Arc::new(
                ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .thread_name(move |i| format!("rbgp-{workers}-{i}"))
                    .build()
                    .expect("thread pool"),
            )
        })
        .clone()
}
