//! Text description of a chain, one factor per line:
//!
//! ```text
//! # comment
//! precision f32
//! ramanujan 32 128 sparsity=0.5 seed=7
//! complete 4 1
//! graph inner.txt role=sparse
//! complete 1 1
//! ```
//!
//! `graph` paths are relative to the chain file. `ramanujan` entries are
//! generated on resolution; without an explicit seed they draw from the
//! caller's base seed offset by the entry index.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, ParseError, Result};
use crate::graph::{check_ramanujan, BipartiteGraph, SpectralReport};
use crate::lift::{generate_ramanujan, LiftChainSpec, DEFAULT_MAX_ATTEMPTS};
use crate::matrix::Precision;
use crate::product::{RbgpChain, Role};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ChainEntry {
    Complete { left: usize, right: usize },
    Graph { path: PathBuf, role: Role },
    Ramanujan { left: usize, right: usize, sparsity: f64, seed: Option<u64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainFile {
    pub precision: Option<Precision>,
    pub entries: Vec<ChainEntry>,
}

fn text_err(line: usize, msg: impl Into<String>) -> Error {
    ParseError::Text { line, msg: msg.into() }.into()
}

fn parse_num<T: std::str::FromStr>(line: usize, what: &str, s: Option<&str>) -> Result<T> {
    let s = s.ok_or_else(|| text_err(line, format!("missing {what}")))?;
    s.parse().map_err(|_| text_err(line, format!("bad {what} {s:?}")))
}

impl ChainFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut precision = None;
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            let mut words = content.split_whitespace();
            let Some(keyword) = words.next() else { continue };
            let mut options = Vec::new();
            let mut positional = Vec::new();
            for w in words {
                match w.split_once('=') {
                    Some((k, v)) => options.push((k, v)),
                    None => positional.push(w),
                }
            }
            let option = |key: &str| options.iter().find(|(k, _)| *k == key).map(|(_, v)| *v);
            let allowed: &[&str] = match keyword {
                "graph" => &["role"],
                "ramanujan" => &["sparsity", "seed"],
                _ => &[],
            };
            if let Some((k, _)) = options.iter().find(|(k, _)| !allowed.contains(k)) {
                return Err(text_err(line, format!("unknown option {k:?} for {keyword}")));
            }
            let arity = match keyword {
                "precision" | "graph" => 1,
                "complete" | "ramanujan" => 2,
                other => return Err(text_err(line, format!("unknown entry {other:?}"))),
            };
            if positional.len() != arity {
                return Err(text_err(
                    line,
                    format!("{keyword} takes {arity} argument(s), got {}", positional.len()),
                ));
            }
            match keyword {
                "precision" => {
                    let p = positional[0].parse().map_err(|e: Error| text_err(line, e.to_string()))?;
                    precision = Some(p);
                }
                "complete" => entries.push(ChainEntry::Complete {
                    left: parse_num(line, "left size", Some(positional[0]))?,
                    right: parse_num(line, "right size", Some(positional[1]))?,
                }),
                "graph" => {
                    let role = match option("role").unwrap_or("sparse") {
                        "sparse" => Role::Sparse,
                        "complete" => Role::Complete,
                        other => return Err(text_err(line, format!("unknown role {other:?}"))),
                    };
                    entries.push(ChainEntry::Graph {
                        path: PathBuf::from(positional[0]),
                        role,
                    });
                }
                _ => entries.push(ChainEntry::Ramanujan {
                    left: parse_num(line, "left size", Some(positional[0]))?,
                    right: parse_num(line, "right size", Some(positional[1]))?,
                    sparsity: parse_num(line, "sparsity", option("sparsity"))?,
                    seed: option("seed").map(|s| parse_num(line, "seed", Some(s))).transpose()?,
                }),
            }
        }
        if entries.is_empty() {
            return Err(text_err(text.lines().count().max(1), "chain has no factors"));
        }
        Ok(Self { precision, entries })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(p) = self.precision {
            writeln!(out, "precision {p}").unwrap();
        }
        for e in &self.entries {
            match e {
                ChainEntry::Complete { left, right } => writeln!(out, "complete {left} {right}"),
                ChainEntry::Graph { path, role } => {
                    let role = match role {
                        Role::Sparse => "sparse",
                        Role::Complete => "complete",
                    };
                    writeln!(out, "graph {} role={role}", path.display())
                }
                ChainEntry::Ramanujan { left, right, sparsity, seed } => {
                    write!(out, "ramanujan {left} {right} sparsity={sparsity}").unwrap();
                    match seed {
                        Some(s) => writeln!(out, " seed={s}"),
                        None => writeln!(out),
                    }
                }
            }
            .unwrap();
        }
        out
    }

    /// Loads and generates every factor. With `certify`, each sparse-role factor
    /// must pass the Ramanujan check.
    pub fn resolve(&self, base_dir: &Path, seed: u64, certify: bool) -> Result<ResolvedChain> {
        let mut graphs = Vec::new();
        let mut roles = Vec::new();
        let mut factors = Vec::new();
        for (idx, entry) in self.entries.iter().enumerate() {
            let (graph, role, attempts) = match entry {
                ChainEntry::Complete { left, right } => {
                    (BipartiteGraph::complete(*left, *right)?, Role::Complete, None)
                }
                ChainEntry::Graph { path, role } => {
                    let full = base_dir.join(path);
                    let text = std::fs::read_to_string(&full).map_err(|e| {
                        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", full.display())))
                    })?;
                    (BipartiteGraph::from_text(&text)?, *role, None)
                }
                ChainEntry::Ramanujan { left, right, sparsity, seed: own } => {
                    let s = own.unwrap_or_else(|| seed.wrapping_add(idx as u64));
                    let spec = LiftChainSpec::new(*left, *right, *sparsity, s)
                        .with_max_attempts(DEFAULT_MAX_ATTEMPTS);
                    let sample = generate_ramanujan(&spec)?;
                    (sample.graph, Role::Sparse, Some(sample.attempts))
                }
            };
            let report = match role {
                Role::Sparse if graph.edge_count() > 0 => Some(check_ramanujan(&graph)?),
                _ => None,
            };
            if certify {
                if let Some(r) = report.filter(|r| !r.is_ramanujan) {
                    return Err(Error::InvalidArgument(format!(
                        "factor {idx} is not Ramanujan: lambda2 {:.6} > bound {:.6}",
                        r.sigma2, r.ramanujan_bound
                    )));
                }
            }
            factors.push(FactorSummary {
                index: idx,
                left: graph.num_left(),
                right: graph.num_right(),
                edges: graph.edge_count(),
                role,
                spectral: report,
                attempts,
            });
            graphs.push(graph);
            roles.push(role);
        }
        Ok(ResolvedChain {
            chain: RbgpChain::new(graphs, roles)?,
            factors,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSummary {
    pub index: usize,
    pub left: usize,
    pub right: usize,
    pub edges: usize,
    pub role: Role,
    pub spectral: Option<SpectralReport>,
    /// Samples drawn for generated factors.
    pub attempts: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ResolvedChain {
    pub chain: RbgpChain,
    pub factors: Vec<FactorSummary>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print() {
        let text = "# outer\nprecision f64\nramanujan 8 32 sparsity=0.5 seed=3\ncomplete 4 1\n\ngraph g.txt role=sparse  # inner\ncomplete 1 1\n";
        let cf = ChainFile::parse(text).unwrap();
        assert_eq!(cf.precision, Some(Precision::F64));
        assert_eq!(cf.entries.len(), 4);
        assert_eq!(
            cf.entries[0],
            ChainEntry::Ramanujan { left: 8, right: 32, sparsity: 0.5, seed: Some(3) }
        );
        assert_eq!(ChainFile::parse(&cf.to_text()).unwrap(), cf);
    }

    #[test]
    fn errors_name_the_line() {
        for (text, line) in [
            ("complete 2\n", 1),
            ("complete 2 2\nbogus 1\n", 2),
            ("\n\ngraph a.txt role=dense\n", 3),
            ("ramanujan 4 4\n", 1),
            ("complete 2 x\n", 1),
            ("complete 2 2 extra=1\n", 1),
            ("# nothing\n", 1),
        ] {
            match ChainFile::parse(text) {
                Err(Error::Parse(ParseError::Text { line: l, .. })) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn resolve_generated_and_complete() {
        let cf = ChainFile::parse("ramanujan 16 16 sparsity=0.5\ncomplete 2 1\n").unwrap();
        let a = cf.resolve(Path::new("."), 9, true).unwrap();
        let b = cf.resolve(Path::new("."), 9, true).unwrap();
        assert_eq!(a.chain, b.chain);
        assert_eq!(a.chain.dims().unwrap(), (32, 16));
        assert!(a.factors[0].spectral.unwrap().is_ramanujan);
        assert!(a.factors[1].spectral.is_none());
    }

    #[test]
    fn certification_failure() {
        let dir = std::env::temp_dir().join(format!("rbgp-chain-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        // Perfect matching: lambda2 = 1 against a bound of 0.
        std::fs::write(dir.join("m.txt"), BipartiteGraph::identity(4).unwrap().to_text()).unwrap();
        let cf = ChainFile::parse("graph m.txt\ncomplete 2 2\n").unwrap();
        assert!(matches!(cf.resolve(&dir, 0, true), Err(Error::InvalidArgument(_))));
        assert!(cf.resolve(&dir, 0, false).is_ok());
        assert!(matches!(
            ChainFile::parse("graph missing.txt\n").unwrap().resolve(&dir, 0, true),
            Err(Error::Io(_))
        ));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
