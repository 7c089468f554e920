//! Ramanujan bipartite graph products: graph generation, product chains,
//! RCUBS sparse matrices and a tiled sparse × dense multiply.

pub mod chain_file;
pub mod error;
pub mod graph;
pub mod lift;
pub mod matrix;
pub mod product;
pub mod rcubs;
pub mod sdmm;

pub use error::{Error, ParseError, Result};
pub use graph::{
    check_ramanujan, ramanujan_bound, singular_values, BipartiteGraph, BiregularDegrees,
    SpectralReport, RAMANUJAN_TOLERANCE,
};
pub use lift::{generate_ramanujan, LiftChainSpec, RamanujanSample};
pub use matrix::{DenseMatrix, Precision, Scalar};
pub use product::{RbgpChain, Rbgp4Config, Role};
pub use rcubs::{CsrMatrix, RcubsMatrix};
