//! Random 2-lifts and rejection sampling of Ramanujan biregular graphs.
//!
//! A biregular graph with sparsity `sp` is grown from the complete graph
//! `K_{(1-sp)m, (1-sp)n}` by `log2(1 / (1 - sp))` random 2-lifts. Each lift
//! doubles both vertex sets and the edge set while preserving degrees, so the
//! result is `(1-sp)n`-left-regular with exactly the requested sparsity.
//! [`generate_ramanujan`] repeats the whole chain until the sample passes
//! [`check_ramanujan`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{check_ramanujan, BipartiteGraph, SpectralReport};

pub const DEFAULT_MAX_ATTEMPTS: usize = 1000;

/// Parameters of one lift-chain sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftChainSpec {
    pub target_left: usize,
    pub target_right: usize,
    pub sparsity: f64,
    pub rng_seed: u64,
    pub max_attempts: usize,
}

/// Resolved shape of a lift chain: the base complete graph and the lift count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LiftPlan {
    pub base_left: usize,
    pub base_right: usize,
    pub lifts: u32,
}

impl LiftChainSpec {
    pub fn new(target_left: usize, target_right: usize, sparsity: f64, rng_seed: u64) -> Self {
        Self {
            target_left,
            target_right,
            sparsity,
            rng_seed,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }

    pub fn with_max_attempts(mut self, max_attempts: usize) -> Self {
        self.max_attempts = max_attempts;
        self
    }

    pub fn plan(&self) -> Result<LiftPlan> {
        let sp = self.sparsity;
        if !(0.0..1.0).contains(&sp) {
            return Err(Error::InvalidArgument(format!(
                "sparsity {sp} must lie in [0, 1)"
            )));
        }
        if self.target_left == 0 || self.target_right == 0 {
            return Err(Error::InvalidArgument(format!(
                "target dimensions must be positive, got ({}, {})",
                self.target_left, self.target_right
            )));
        }
        if self.max_attempts == 0 {
            return Err(Error::InvalidArgument("max_attempts must be positive".into()));
        }
        let density = 1.0 - sp;
        let lifts = (1.0 / density).log2().round();
        if !(0.0..=62.0).contains(&lifts) || (-lifts).exp2() != density {
            return Err(Error::InvalidArgument(format!(
                "1/(1 - sparsity) = {} is not a power of two",
                1.0 / density
            )));
        }
        let lifts = lifts as u32;
        let base = |target: usize, side: &str| {
            let b = target >> lifts;
            if b == 0 || b << lifts != target {
                Err(Error::InvalidArgument(format!(
                    "(1 - sparsity) * target_{side} = {target} / 2^{lifts} is not a positive integer"
                )))
            } else {
                Ok(b)
            }
        };
        Ok(LiftPlan {
            base_left: base(self.target_left, "left")?,
            base_right: base(self.target_right, "right")?,
            lifts,
        })
    }
}

/// One 2-lift with the crossover decision for each edge supplied by `crossover`.
///
/// Edges are visited in `(u, v)` lexicographic order. Left clone of `u` is
/// `u + num_left`, right clone of `v` is `v + num_right`.
pub fn two_lift_with(g: &BipartiteGraph, mut crossover: impl FnMut() -> bool) -> BipartiteGraph {
    let (m, n) = (g.num_left(), g.num_right());
    let mut adjacency = vec![Vec::new(); 2 * m];
    for (u, v) in g.edges() {
        if crossover() {
            adjacency[u].push(v + n);
            adjacency[u + m].push(v);
        } else {
            adjacency[u].push(v);
            adjacency[u + m].push(v + n);
        }
    }
    for list in &mut adjacency {
        list.sort_unstable();
    }
    BipartiteGraph::new(2 * m, 2 * n, adjacency).expect("2-lift of a valid graph is valid")
}

/// Random 2-lift: each edge independently crosses over with probability 1/2.
pub fn two_lift<R: Rng + ?Sized>(g: &BipartiteGraph, rng: &mut R) -> BipartiteGraph {
    two_lift_with(g, || rng.gen::<bool>())
}

pub fn generate_biregular<R: Rng + ?Sized>(
    spec: &LiftChainSpec,
    rng: &mut R,
) -> Result<BipartiteGraph> {
    let plan = spec.plan()?;
    Ok(sample_biregular(&plan, rng))
}

fn sample_biregular<R: Rng + ?Sized>(plan: &LiftPlan, rng: &mut R) -> BipartiteGraph {
    let mut g = BipartiteGraph::complete(plan.base_left, plan.base_right)
        .expect("plan has positive base sides");
    for _ in 0..plan.lifts {
        g = two_lift(&g, rng);
    }
    g
}

#[derive(Debug, Clone)]
pub struct RamanujanSample {
    pub graph: BipartiteGraph,
    pub report: SpectralReport,
    /// Samples drawn including the accepted one.
    pub attempts: usize,
}

/// Samples from a ChaCha8 stream seeded with `spec.rng_seed`.
pub fn generate_ramanujan(spec: &LiftChainSpec) -> Result<RamanujanSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    generate_ramanujan_with(spec, &mut rng)
}

pub fn generate_ramanujan_with<R: Rng + ?Sized>(
    spec: &LiftChainSpec,
    rng: &mut R,
) -> Result<RamanujanSample> {
    let plan = spec.plan()?;
    let mut best_lambda2 = f64::INFINITY;
    let mut bound = f64::NAN;
    for attempt in 1..=spec.max_attempts {
        let graph = sample_biregular(&plan, rng);
        let report = check_ramanujan(&graph)?;
        if report.is_ramanujan {
            return Ok(RamanujanSample {
                graph,
                report,
                attempts: attempt,
            });
        }
        best_lambda2 = best_lambda2.min(report.sigma2);
        bound = report.ramanujan_bound;
    }
    Err(Error::Exhausted {
        attempts: spec.max_attempts,
        best_lambda2,
        bound,
    })
}
