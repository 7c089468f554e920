//! Bipartite graphs, their biadjacency matrices and spectral certification.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, ParseError, Result};
use crate::matrix::DenseMatrix;

/// Absolute slack when comparing the second singular value with the Ramanujan bound.
pub const RAMANUJAN_TOLERANCE: f64 = 1e-7;

/// Convergence threshold handed to the SVD.
const SVD_EPS: f64 = 1e-15;
const SVD_MAX_ITER: usize = 100_000;

/// Bipartite graph `(U, V, E)` stored as sorted per-left-vertex adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BipartiteGraph {
    num_left: usize,
    num_right: usize,
    adjacency: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiregularDegrees {
    pub d_left: usize,
    pub d_right: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub sigma1: f64,
    pub sigma2: f64,
    pub ramanujan_bound: f64,
    pub spectral_gap: f64,
    pub is_ramanujan: bool,
}

impl BipartiteGraph {
    /// Builds a graph from adjacency lists that must already be sorted and duplicate free.
    pub fn new(num_left: usize, num_right: usize, adjacency: Vec<Vec<usize>>) -> Result<Self> {
        if num_left == 0 || num_right == 0 {
            return Err(Error::InvalidArgument(format!(
                "vertex counts must be positive, got ({num_left}, {num_right})"
            )));
        }
        if adjacency.len() != num_left {
            return Err(Error::InvalidArgument(format!(
                "expected {num_left} adjacency lists, got {}",
                adjacency.len()
            )));
        }
        for (u, list) in adjacency.iter().enumerate() {
            if let Some(&v) = list.iter().find(|&&v| v >= num_right) {
                return Err(Error::InvalidArgument(format!(
                    "left vertex {u}: neighbor {v} >= num_right {num_right}"
                )));
            }
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(format!(
                    "left vertex {u}: adjacency not strictly increasing"
                )));
            }
        }
        Ok(Self {
            num_left,
            num_right,
            adjacency,
        })
    }

    /// Builds a graph from an arbitrary edge list, sorting and removing duplicates.
    pub fn from_edges(
        num_left: usize,
        num_right: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); num_left];
        for (u, v) in edges {
            if u >= num_left {
                return Err(Error::OutOfBounds {
                    index: u,
                    len: num_left,
                });
            }
            adjacency[u].push(v);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Self::new(num_left, num_right, adjacency)
    }

    /// Complete bipartite graph `K_{m,n}`.
    pub fn complete(m: usize, n: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidArgument(format!(
                "complete graph needs positive sides, got ({m}, {n})"
            )));
        }
        let row: Vec<usize> = (0..n).collect();
        Ok(Self {
            num_left: m,
            num_right: n,
            adjacency: vec![row; m],
        })
    }

    /// Perfect matching `u -> u` on `n + n` vertices.
    pub fn identity(n: usize) -> Result<Self> {
        Self::new(n, n, (0..n).map(|u| vec![u]).collect())
    }

    /// Nonzero entries become edges.
    pub fn from_biadjacency(m: &DenseMatrix<f64>) -> Result<Self> {
        let adjacency = (0..m.rows())
            .map(|u| {
                m.row(u)
                    .iter()
                    .enumerate()
                    .filter(|(_, &x)| x != 0.0)
                    .map(|(v, _)| v)
                    .collect()
            })
            .collect();
        Self::new(m.rows(), m.cols(), adjacency)
    }

    pub fn num_left(&self) -> usize {
        self.num_left
    }

    pub fn num_right(&self) -> usize {
        self.num_right
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.adjacency[u]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().map(move |&v| (u, v)))
    }

    pub fn is_complete(&self) -> bool {
        self.edge_count() == self.num_left * self.num_right
    }

    /// `1 - |E| / (|U| |V|)`.
    pub fn sparsity(&self) -> f64 {
        1.0 - self.edge_count() as f64 / (self.num_left as f64 * self.num_right as f64)
    }

    pub fn right_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_right];
        for (_, v) in self.edges() {
            deg[v] += 1;
        }
        deg
    }

    pub fn biregular_degrees(&self) -> Option<BiregularDegrees> {
        self.check_biregular().ok()
    }

    /// Like [`Self::biregular_degrees`] but names the first vertex that breaks uniformity.
    pub fn check_biregular(&self) -> Result<BiregularDegrees> {
        let d_left = self.adjacency[0].len();
        if let Some(u) = self.adjacency.iter().position(|l| l.len() != d_left) {
            return Err(Error::NotBiregular(format!(
                "left vertex {u} has degree {} but left vertex 0 has degree {d_left}",
                self.adjacency[u].len()
            )));
        }
        let right = self.right_degrees();
        let d_right = right[0];
        if let Some(v) = right.iter().position(|&d| d != d_right) {
            return Err(Error::NotBiregular(format!(
                "right vertex {v} has degree {} but right vertex 0 has degree {d_right}",
                right[v]
            )));
        }
        Ok(BiregularDegrees { d_left, d_right })
    }

    pub fn biadjacency(&self) -> DenseMatrix<f64> {
        let mut m = DenseMatrix::zeros(self.num_left, self.num_right);
        for (u, v) in self.edges() {
            m.set(u, v, 1.0);
        }
        m
    }

    /// Relabels vertices: left `u` becomes `left_perm[u]`, right `v` becomes `right_perm[v]`.
    pub fn permuted(&self, left_perm: &[usize], right_perm: &[usize]) -> Result<Self> {
        if left_perm.len() != self.num_left || right_perm.len() != self.num_right {
            return Err(Error::InvalidArgument("permutation length mismatch".into()));
        }
        Self::from_edges(
            self.num_left,
            self.num_right,
            self.edges().map(|(u, v)| (left_perm[u], right_perm[v])),
        )
    }

    /// Header `num_left num_right`, then one line of sorted neighbors per left vertex.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.num_left, self.num_right);
        for list in &self.adjacency {
            let mut first = true;
            for v in list {
                if !first {
                    out.push(' ');
                }
                first = false;
                write!(out, "{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(ParseError::Text {
            line: 1,
            msg: "missing header".into(),
        })?;
        let dims: Vec<&str> = header.split_whitespace().collect();
        let parse = |s: &str, line: usize| {
            s.parse::<usize>().map_err(|_| ParseError::Text {
                line,
                msg: format!("not a vertex index: {s:?}"),
            })
        };
        if dims.len() != 2 {
            return Err(ParseError::Text {
                line: 1,
                msg: "header must be `num_left num_right`".into(),
            }
            .into());
        }
        let num_left = parse(dims[0], 1)?;
        let num_right = parse(dims[1], 1)?;
        let mut adjacency = Vec::with_capacity(num_left.min(1 << 20));
        for u in 0..num_left {
            let line = lines.next().ok_or_else(|| ParseError::Text {
                line: u + 2,
                msg: format!("expected {num_left} adjacency lines, found {u}"),
            })?;
            let list = line
                .split_whitespace()
                .map(|s| parse(s, u + 2))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            adjacency.push(list);
        }
        if let Some((i, _)) = lines.enumerate().find(|(_, l)| !l.trim().is_empty()) {
            return Err(ParseError::Text {
                line: num_left + 2 + i,
                msg: "trailing content after adjacency lines".into(),
            }
            .into());
        }
        Self::new(num_left, num_right, adjacency).map_err(|e| match e {
            Error::InvalidArgument(msg) => ParseError::Text { line: 0, msg }.into(),
            other => other,
        })
    }
}

/// Singular values of the biadjacency matrix in descending order.
///
/// These are the nonnegative halves of the `±λ` adjacency spectrum.
pub fn singular_values(g: &BipartiteGraph) -> Result<Vec<f64>> {
    let ba = DMatrix::from_row_slice(g.num_left(), g.num_right(), g.biadjacency().as_slice());
    let svd = SVD::try_new(ba, false, false, SVD_EPS, SVD_MAX_ITER).ok_or_else(|| {
        Error::Numerical(format!(
            "SVD of {}x{} biadjacency did not converge in {SVD_MAX_ITER} iterations",
            g.num_left(),
            g.num_right()
        ))
    })?;
    let mut sv: Vec<f64> = svd.singular_values.iter().map(|s| s.max(0.0)).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// `√(d_l − 1) + √(d_r − 1)`.
pub fn ramanujan_bound(degrees: BiregularDegrees) -> f64 {
    ((degrees.d_left as f64) - 1.0).sqrt() + ((degrees.d_right as f64) - 1.0).sqrt()
}

pub fn check_ramanujan(g: &BipartiteGraph) -> Result<SpectralReport> {
    let degrees = g.check_biregular()?;
    if degrees.d_left == 0 {
        return Err(Error::InvalidArgument("graph has no edges".into()));
    }
    let sv = singular_values(g)?;
    Ok(spectral_report(&sv, degrees))
}

pub(crate) fn spectral_report(sv: &[f64], degrees: BiregularDegrees) -> SpectralReport {
    let sigma1 = sv.first().copied().unwrap_or(0.0);
    // λ2 counts multiplicity: a repeated top value is its own second value.
    let sigma2 = sv.get(1).copied().unwrap_or(0.0);
    let ramanujan_bound = ramanujan_bound(degrees);
    SpectralReport {
        sigma1,
        sigma2,
        ramanujan_bound,
        spectral_gap: sigma1 - sigma2,
        is_ramanujan: sigma2 <= ramanujan_bound + RAMANUJAN_TOLERANCE,
    }
}
