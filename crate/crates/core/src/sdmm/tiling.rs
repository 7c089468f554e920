use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::product::{RbgpChain, Rbgp4Config, Role};

pub const DEFAULT_TN: usize = 128;
pub const DEFAULT_RN: usize = 2;
pub const DEFAULT_BN: usize = 4;

/// Output micro-tile widths the kernel has specialized paths for.
pub const SUPPORTED_BN: [usize; 5] = [1, 2, 4, 8, 16];

/// Tile and micro-block shape of an RBGP4 multiply.
///
/// `tm × tk` is the shape of one `G_r ⊗ G_i ⊗ G_b` tile of the weight matrix.
/// Within a tile, row `rm·(tm/rm_count) + thm·bm + m` belongs to row group
/// `thm`; all `rm·bm` rows of a group share their column set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TilingParams {
    pub tm: usize,
    pub tk: usize,
    pub tn: usize,
    pub rm: usize,
    pub rk: usize,
    pub bm: usize,
    pub bk: usize,
    pub rn: usize,
    pub bn: usize,
    /// `|G_i.U|`: row groups per tile.
    pub inner_left: usize,
    /// `|G_i.V|`.
    pub inner_right: usize,
    pub workers: usize,
}

impl TilingParams {
    /// Rows of a tile that share one column pattern (`RM·BM`).
    pub fn row_repetition(&self) -> usize {
        self.rm * self.bm
    }

    /// Micro-tile columns per output tile (`TN / (RN·BN)`).
    pub fn column_groups(&self) -> usize {
        self.tn / (self.rn * self.bn)
    }
}

pub fn derive_tiling(
    config: &Rbgp4Config,
    tn: usize,
    rn: usize,
    bn: usize,
    workers: usize,
) -> Result<TilingParams> {
    tiling_for_chain(&config.chain()?, tn, rn, bn, workers)
}

/// Derives tiling from any 4-factor chain whose second and fourth factors are complete.
pub fn tiling_for_chain(
    chain: &RbgpChain,
    tn: usize,
    rn: usize,
    bn: usize,
    workers: usize,
) -> Result<TilingParams> {
    if chain.len() != 4 {
        return Err(Error::UnsupportedChain(format!(
            "RBGP4 multiply needs 4 factors, chain has {}",
            chain.len()
        )));
    }
    let g = chain.graphs();
    for idx in [1, 3] {
        if chain.roles()[idx] != Role::Complete || !g[idx].is_complete() {
            return Err(Error::UnsupportedChain(format!(
                "factor {idx} must be a complete graph"
            )));
        }
    }
    let mut violations = Vec::new();
    if tn == 0 || rn == 0 || bn == 0 {
        violations.push(format!("TN, RN, BN must be positive (got {tn}, {rn}, {bn})"));
    } else if !tn.is_multiple_of(rn * bn) {
        violations.push(format!("TN = {tn} is not divisible by RN*BN = {}", rn * bn));
    }
    if !SUPPORTED_BN.contains(&bn) {
        violations.push(format!("BN = {bn} must be one of {SUPPORTED_BN:?}"));
    }
    if workers == 0 {
        violations.push("worker count must be positive".into());
    }
    if !violations.is_empty() {
        return Err(Error::Config(violations));
    }
    let (rm, rk) = (g[1].num_left(), g[1].num_right());
    let (inner_left, inner_right) = (g[2].num_left(), g[2].num_right());
    let (bm, bk) = (g[3].num_left(), g[3].num_right());
    Ok(TilingParams {
        tm: rm * inner_left * bm,
        tk: rk * inner_right * bk,
        tn,
        rm,
        rk,
        bm,
        bk,
        rn,
        bn,
        inner_left,
        inner_right,
        workers,
    })
}
