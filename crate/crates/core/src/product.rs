//! Bipartite graph products, RBGP chains and the block structure they induce.
//!
//! The product `G1 ⊗ G2` has vertex sets `U1 × U2` and `V1 × V2`, composed in
//! row-major mixed radix (`(u1, u2) -> u1 * |U2| + u2`), so its biadjacency
//! matrix is exactly the Kronecker product of the factors' biadjacencies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{check_ramanujan, singular_values, BipartiteGraph, SpectralReport};
use crate::matrix::{DenseMatrix, Precision};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Sparse,
    Complete,
}

/// Ordered list of biregular base graphs whose product defines a sparsity pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RbgpChain {
    graphs: Vec<BipartiteGraph>,
    roles: Vec<Role>,
}

impl RbgpChain {
    pub fn new(graphs: Vec<BipartiteGraph>, roles: Vec<Role>) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::InvalidArgument("chain needs at least one graph".into()));
        }
        if graphs.len() != roles.len() {
            return Err(Error::InvalidArgument(format!(
                "{} graphs but {} roles",
                graphs.len(),
                roles.len()
            )));
        }
        for (i, (g, role)) in graphs.iter().zip(&roles).enumerate() {
            g.check_biregular()
                .map_err(|e| Error::NotBiregular(format!("factor {i}: {e}")))?;
            if *role == Role::Complete && !g.is_complete() {
                return Err(Error::InvalidArgument(format!(
                    "factor {i} is tagged complete but has {} of {} edges",
                    g.edge_count(),
                    g.num_left() * g.num_right()
                )));
            }
        }
        let chain = Self { graphs, roles };
        chain.dims()?;
        Ok(chain)
    }

    /// Tags full graphs as complete and everything else as sparse.
    pub fn from_graphs(graphs: Vec<BipartiteGraph>) -> Result<Self> {
        let roles = graphs
            .iter()
            .map(|g| if g.is_complete() { Role::Complete } else { Role::Sparse })
            .collect();
        Self::new(graphs, roles)
    }

    pub fn graphs(&self) -> &[BipartiteGraph] {
        &self.graphs
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    /// Product-graph dimensions `(Π|U_i|, Π|V_i|)`.
    pub fn dims(&self) -> Result<(usize, usize)> {
        let mut rows = 1usize;
        let mut cols = 1usize;
        for g in &self.graphs {
            rows = rows
                .checked_mul(g.num_left())
                .ok_or_else(|| Error::Capacity("product left side overflows usize".into()))?;
            cols = cols
                .checked_mul(g.num_right())
                .ok_or_else(|| Error::Capacity("product right side overflows usize".into()))?;
        }
        Ok((rows, cols))
    }

    /// Left degree of the product, `Π d_left(G_i)`.
    pub fn row_nnz(&self) -> usize {
        self.graphs.iter().map(|g| g.neighbors(0).len()).product()
    }

    pub fn sparsity(&self) -> f64 {
        1.0 - self.graphs.iter().map(|g| 1.0 - g.sparsity()).product::<f64>()
    }

    /// Sorted columns of row `u` of the product, enumerated without materializing it.
    pub fn neighbors(&self, u: usize) -> Result<Vec<usize>> {
        let (rows, _) = self.dims()?;
        if u >= rows {
            return Err(Error::OutOfBounds { index: u, len: rows });
        }
        let mut digits = vec![0usize; self.graphs.len()];
        let mut rest = u;
        for (digit, g) in digits.iter_mut().zip(&self.graphs).rev() {
            *digit = rest % g.num_left();
            rest /= g.num_left();
        }
        let mut cols = vec![0usize];
        for (g, &ui) in self.graphs.iter().zip(&digits) {
            let adj = g.neighbors(ui);
            let mut next = Vec::with_capacity(cols.len() * adj.len());
            for &prefix in &cols {
                next.extend(adj.iter().map(|&v| prefix * g.num_right() + v));
            }
            cols = next;
        }
        Ok(cols)
    }
}

pub fn product(g1: &BipartiteGraph, g2: &BipartiteGraph) -> Result<BipartiteGraph> {
    let capacity = || Error::Capacity("product dimensions overflow usize".into());
    let rows = g1.num_left().checked_mul(g2.num_left()).ok_or_else(capacity)?;
    let cols = g1.num_right().checked_mul(g2.num_right()).ok_or_else(capacity)?;
    let mut adjacency = Vec::with_capacity(rows);
    for u1 in 0..g1.num_left() {
        for u2 in 0..g2.num_left() {
            let mut list = Vec::with_capacity(g1.neighbors(u1).len() * g2.neighbors(u2).len());
            for &v1 in g1.neighbors(u1) {
                list.extend(g2.neighbors(u2).iter().map(|&v2| v1 * g2.num_right() + v2));
            }
            adjacency.push(list);
        }
    }
    BipartiteGraph::new(rows, cols, adjacency)
}

/// Left fold of [`product`] over the chain.
pub fn chain_product(chain: &RbgpChain) -> Result<BipartiteGraph> {
    let mut graphs = chain.graphs().iter();
    let mut acc = graphs.next().expect("chain is nonempty").clone();
    for g in graphs {
        acc = product(&acc, g)?;
    }
    Ok(acc)
}

/// Block sizes `B_1 > B_2 > ... > B_{K-1}` of a chain's recursive pattern.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockingLevels {
    pub levels: Vec<(usize, usize)>,
}

/// `B_j = (Π_{i>j} |G_i.U|, Π_{i>j} |G_i.V|)` for `j = 1..K-1`.
pub fn blocking_levels(chain: &RbgpChain) -> BlockingLevels {
    let g = chain.graphs();
    let levels = (1..g.len())
        .map(|j| {
            g[j..].iter().fold((1, 1), |(h, w), gi| {
                (h * gi.num_left(), w * gi.num_right())
            })
        })
        .collect();
    BlockingLevels { levels }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    /// Block-rows of the parent hold different numbers of nonzero blocks.
    RowCount,
    /// Block-columns of the parent hold different numbers of nonzero blocks.
    ColumnCount,
    /// A nonzero block differs from the first nonzero block of its parent.
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RcubsViolation {
    /// 1-based level index `j` of `B_j`.
    pub level: usize,
    /// Top-left element of the parent region being checked.
    pub parent_origin: (usize, usize),
    /// Block coordinates within the parent.
    pub block: (usize, usize),
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RcubsVerdict {
    Valid,
    Invalid(RcubsViolation),
}

impl RcubsVerdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, RcubsVerdict::Valid)
    }
}

/// Checks the recursive cloned-uniform-block-sparse property level by level.
///
/// At level `j` every nonzero block of level `j-1` (the whole matrix for
/// `j = 1`) is split into `B_j` blocks; the nonzero blocks must be equally
/// many in every block-row and block-column and must all share one pattern.
/// Because the nonzero blocks are then identical, the next level only has to
/// look inside the first one.
pub fn validate_rcubs(pattern: &DenseMatrix<f64>, levels: &BlockingLevels) -> Result<RcubsVerdict> {
    let (rows, cols) = pattern.shape();
    let mut parent = (0usize, 0usize, rows, cols);
    for (idx, &(bh, bw)) in levels.levels.iter().enumerate() {
        let (r0, c0, h, w) = parent;
        if bh == 0 || bw == 0 || h % bh != 0 || w % bw != 0 {
            return Err(Error::InvalidArgument(format!(
                "level {} block ({bh}, {bw}) does not divide region ({h}, {w})",
                idx + 1
            )));
        }
        let level = idx + 1;
        let (nr, nc) = (h / bh, w / bw);
        let block_nonzero = |br: usize, bc: usize| {
            (0..bh).any(|i| {
                pattern.row(r0 + br * bh + i)[c0 + bc * bw..c0 + (bc + 1) * bw]
                    .iter()
                    .any(|&x| x != 0.0)
            })
        };
        let mask: Vec<bool> = (0..nr * nc).map(|k| block_nonzero(k / nc, k % nc)).collect();
        let violation = |block, kind| {
            Ok(RcubsVerdict::Invalid(RcubsViolation {
                level,
                parent_origin: (r0, c0),
                block,
                kind,
            }))
        };

        let row_count = |br: usize| mask[br * nc..(br + 1) * nc].iter().filter(|&&b| b).count();
        let expected = row_count(0);
        if let Some(br) = (1..nr).find(|&br| row_count(br) != expected) {
            return violation((br, 0), ViolationKind::RowCount);
        }
        let col_count = |bc: usize| (0..nr).filter(|&br| mask[br * nc + bc]).count();
        let expected = col_count(0);
        if let Some(bc) = (1..nc).find(|&bc| col_count(bc) != expected) {
            return violation((0, bc), ViolationKind::ColumnCount);
        }

        let Some(first) = mask.iter().position(|&b| b) else {
            return Ok(RcubsVerdict::Valid);
        };
        let (fr, fc) = (r0 + (first / nc) * bh, c0 + (first % nc) * bw);
        for (k, _) in mask.iter().enumerate().skip(first + 1).filter(|(_, &b)| b) {
            let (br, bc) = (k / nc, k % nc);
            let same = (0..bh).all(|i| {
                let a = &pattern.row(fr + i)[fc..fc + bw];
                let b = &pattern.row(r0 + br * bh + i)[c0 + bc * bw..c0 + (bc + 1) * bw];
                a.iter().zip(b).all(|(x, y)| (*x != 0.0) == (*y != 0.0))
            });
            if !same {
                return violation((br, bc), ViolationKind::Pattern);
            }
        }
        parent = (fr, fc, bh, bw);
    }
    Ok(RcubsVerdict::Valid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeCompression {
    /// `Π |E(G_i)|`, the edge count of the product.
    pub full_edges: u128,
    /// `Σ |E(G_i)|`, what the factor adjacency lists store.
    pub stored_edges: u128,
    pub ratio: f64,
}

pub fn compressed_edge_count(chain: &RbgpChain) -> EdgeCompression {
    let counts = chain.graphs().iter().map(|g| g.edge_count() as u128);
    let full_edges = counts.clone().product::<u128>();
    let stored_edges = counts.sum::<u128>();
    EdgeCompression {
        full_edges,
        stored_edges,
        ratio: full_edges as f64 / stored_edges as f64,
    }
}

/// Second largest singular value of the chain product, from factor spectra alone.
///
/// The product's singular values are all products `σ_{i1}(G_1)···σ_{iK}(G_K)`
/// (padded with zeros). Removing the single top product `Π σ1`, the largest
/// remaining one demotes exactly one factor to its second value.
pub fn product_lambda2(chain: &RbgpChain) -> Result<f64> {
    let spectra = chain
        .graphs()
        .iter()
        .map(singular_values)
        .collect::<Result<Vec<_>>>()?;
    let top: Vec<f64> = spectra.iter().map(|s| s[0]).collect();
    let mut best = 0.0f64;
    for (i, s) in spectra.iter().enumerate() {
        let second = s.get(1).copied().unwrap_or(0.0);
        let others: f64 = top
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &t)| t)
            .product();
        best = best.max(second * others);
    }
    Ok(best)
}

/// Ratio of the ideal `d²`-regular spectral gap to the gap of a product of two
/// Ramanujan `d`-regular graphs: `(d² − 2√(d²−1)) / (d² − 2d√(d−1))`.
pub fn gap_ratio(d: u32) -> Result<f64> {
    if d < 3 {
        return Err(Error::InvalidArgument(format!(
            "gap ratio needs degree >= 3 (denominator vanishes at d = 2), got {d}"
        )));
    }
    let d = d as f64;
    let d2 = d * d;
    Ok((d2 - 2.0 * (d2 - 1.0).sqrt()) / (d2 - 2.0 * d * (d - 1.0).sqrt()))
}

/// `1 − (1 − sp_1)(1 − sp_2)`.
pub fn compose_sparsity(sp1: f64, sp2: f64) -> f64 {
    1.0 - (1.0 - sp1) * (1.0 - sp2)
}

/// The four-factor `G_o ⊗ G_r ⊗ G_i ⊗ G_b` configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Rbgp4Config {
    pub g_o: BipartiteGraph,
    pub g_r: (usize, usize),
    pub g_i: BipartiteGraph,
    pub g_b: (usize, usize),
    pub precision: Precision,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rbgp4Certificates {
    pub outer: SpectralReport,
    pub inner: SpectralReport,
}

impl Rbgp4Config {
    /// Requires both sparse factors to pass the Ramanujan check.
    pub fn new(
        g_o: BipartiteGraph,
        g_r: (usize, usize),
        g_i: BipartiteGraph,
        g_b: (usize, usize),
        precision: Precision,
    ) -> Result<(Self, Rbgp4Certificates)> {
        let config = Self::uncertified(g_o, g_r, g_i, g_b, precision)?;
        let outer = check_ramanujan(&config.g_o)?;
        let inner = check_ramanujan(&config.g_i)?;
        for (name, r) in [("g_o", &outer), ("g_i", &inner)] {
            if !r.is_ramanujan {
                return Err(Error::InvalidArgument(format!(
                    "{name} is not Ramanujan: lambda2 {:.6} > bound {:.6}",
                    r.sigma2, r.ramanujan_bound
                )));
            }
        }
        Ok((config, Rbgp4Certificates { outer, inner }))
    }

    /// Checks biregularity and dimensions only.
    pub fn uncertified(
        g_o: BipartiteGraph,
        g_r: (usize, usize),
        g_i: BipartiteGraph,
        g_b: (usize, usize),
        precision: Precision,
    ) -> Result<Self> {
        let config = Self {
            g_o,
            g_r,
            g_i,
            g_b,
            precision,
        };
        config.chain()?;
        Ok(config)
    }

    pub fn chain(&self) -> Result<RbgpChain> {
        RbgpChain::new(
            vec![
                self.g_o.clone(),
                BipartiteGraph::complete(self.g_r.0, self.g_r.1)?,
                self.g_i.clone(),
                BipartiteGraph::complete(self.g_b.0, self.g_b.1)?,
            ],
            vec![Role::Sparse, Role::Complete, Role::Sparse, Role::Complete],
        )
    }

    pub fn total_sparsity(&self) -> f64 {
        compose_sparsity(self.g_o.sparsity(), self.g_i.sparsity())
    }
}
