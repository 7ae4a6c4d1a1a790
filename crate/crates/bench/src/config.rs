//! Run configuration: a TOML file validated before anything is computed.
//!
//! ```toml
//! name = "quadratic-l1"
//! seeds = [0, 1, 2]
//!
//! [problem]
//! kind = "quadratic"
//! dim = 10
//! sigma = 0.5
//!
//! [constraint]
//! kind = "l1_ball"
//! radius = 1.0
//!
//! [solver]
//! algorithm = "one_sfw"
//! mode = "convex_min"
//! horizon = 200
//! ```
//!
//! Unknown keys anywhere are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use projfree::constraints::{FeasibleSet, PartitionMatroid};
use projfree::distsim::{BatchRule, LevelRule, LinkMode, NoiseConstants, PeriodRule, QfwSetting, QfwStep};
use projfree::estimators::VariationOption;
use projfree::problems::ProblemSpec;
use projfree::solvers::{DeltaRule, ObjectiveMode, OutputRule, RhoRule, StepRule};

use crate::BenchError;

fn set_err(e: projfree::Error) -> BenchError {
    BenchError::Config(e.to_string())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub seeds: Vec<u64>,
    /// seed of the random instance, shared by every run
    #[serde(default)]
    pub instance_seed: u64,
    /// output directory, `runs/<name>` when absent
    pub out: Option<PathBuf>,
    pub problem: ProblemSpec,
    pub constraint: Option<ConstraintSpec>,
    pub solver: Option<SolverSpec>,
    pub distsim: Option<DistsimSpec>,
    pub sweep: Option<SweepSpec>,
}

/// Either a scalar repeated over every coordinate or one value each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Scalar(f64),
    Each(Vec<f64>),
}

impl Bound {
    fn expand(&self, dim: usize, what: &str) -> Result<Vec<f64>, BenchError> {
        match self {
            Bound::Scalar(v) => Ok(vec![*v; dim]),
            Bound::Each(v) if v.len() == dim => Ok(v.clone()),
            Bound::Each(v) => Err(BenchError::Config(format!("{what} has {} entries, expected {dim}", v.len()))),
        }
    }
}

/// Block sizes laid out contiguously, or explicit index lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Blocks {
    Sizes(Vec<usize>),
    Indices(Vec<Vec<usize>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum ConstraintSpec {
    L1Ball {
        radius: f64,
    },
    Box {
        lower: Bound,
        upper: Bound,
    },
    Simplex {
        #[serde(default = "one")]
        scale: f64,
    },
    PartitionMatroid {
        blocks: Blocks,
        budgets: Vec<usize>,
    },
    /// the problem dimension must equal `rows·cols`
    NuclearBall {
        radius: f64,
        rows: usize,
        cols: usize,
    },
}

fn one() -> f64 {
    1.0
}

impl ConstraintSpec {
    pub fn build(&self, dim: usize) -> Result<FeasibleSet<f64>, BenchError> {
        let set = match self {
            ConstraintSpec::L1Ball { radius } => FeasibleSet::l1_ball(dim, *radius).map_err(set_err)?,
            ConstraintSpec::Box { lower, upper } => {
                FeasibleSet::boxed(lower.expand(dim, "lower")?, upper.expand(dim, "upper")?).map_err(set_err)?
            }
            ConstraintSpec::Simplex { scale } => FeasibleSet::simplex(dim, *scale).map_err(set_err)?,
            ConstraintSpec::PartitionMatroid { .. } => FeasibleSet::partition_matroid(self.matroid(dim)?),
            ConstraintSpec::NuclearBall { radius, rows, cols } => {
                if rows * cols != dim {
                    return Err(BenchError::Config(format!(
                        "nuclear ball of shape {rows}×{cols} does not match dimension {dim}"
                    )));
                }
                FeasibleSet::nuclear_ball(*radius, *rows, *cols).map_err(set_err)?
            }
        };
        Ok(set)
    }

    pub fn matroid(&self, dim: usize) -> Result<PartitionMatroid, BenchError> {
        match self {
            ConstraintSpec::PartitionMatroid { blocks: Blocks::Sizes(sizes), budgets } => {
                if sizes.iter().sum::<usize>() != dim {
                    return Err(BenchError::Config(format!("block sizes do not add up to {dim}")));
                }
                PartitionMatroid::contiguous(sizes, budgets.clone()).map_err(set_err)
            }
            ConstraintSpec::PartitionMatroid { blocks: Blocks::Indices(idx), budgets } => {
                PartitionMatroid::new(dim, idx.clone(), budgets.clone()).map_err(set_err)
            }
            _ => Err(BenchError::Config("a partition_matroid constraint is required".into())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    OneSfw,
    Oblivious,
    Scg,
    /// full-gradient Frank-Wolfe
    Fw,
    Bcg,
    Dbg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub algorithm: Option<Algorithm>,
    pub mode: Option<ObjectiveMode>,
    pub horizon: usize,
    pub option: Option<VariationOption>,
    pub eta: Option<StepRule>,
    pub rho: Option<RhoRule>,
    pub output: Option<OutputRule>,
    pub start: Option<Vec<f64>>,
    pub every: Option<usize>,
    pub grad_diff_delta: Option<DeltaRule>,
    pub mc_objective_samples: Option<usize>,
    #[serde(default)]
    pub record_wall_time: bool,
    /// smoothing radius for bcg/dbg
    pub delta: Option<f64>,
    /// subsets per multilinear evaluation (dbg)
    pub samples: Option<usize>,
    /// directions per iteration (bcg/dbg)
    pub batch: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistsimSpec {
    pub setting: QfwSetting,
    pub workers: usize,
    pub horizon: usize,
    /// every listed link mode runs on every seed
    #[serde(default = "default_modes")]
    pub modes: Vec<LinkMode>,
    pub levels: Option<LevelRule>,
    pub period: Option<PeriodRule>,
    pub batch: Option<BatchRule>,
    pub anchor_batch: Option<BatchRule>,
    pub step: Option<QfwStep>,
    pub output: Option<OutputRule>,
    pub local_steps: Option<usize>,
    #[serde(default)]
    pub parallel: bool,
    /// needed by the stochastic convex preset
    pub noise: Option<NoiseConstants>,
}

fn default_modes() -> Vec<LinkMode> {
    vec![LinkMode::Quantized, LinkMode::Unquantized]
}

/// Step-size grid `η_t = min{1, c/(t+1)^a}`; empty lists mean the default grid.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub c: Vec<f64>,
    #[serde(default)]
    pub a: Vec<f64>,
}

impl SweepSpec {
    pub fn grid(&self) -> Vec<(f64, f64)> {
        let c = if self.c.is_empty() { vec![0.1, 0.25, 0.5, 1.0, 2.0] } else { self.c.clone() };
        let a = if self.a.is_empty() { vec![1.0, 2.0 / 3.0, 0.5] } else { self.a.clone() };
        c.iter().flat_map(|&c| a.iter().map(move |&a| (c, a))).collect()
    }
}

/// Sets `key` (dotted path) to `value`, parsed as a TOML value when possible.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<(), BenchError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| BenchError::Config(format!("override `{assignment}` is not key=value")))?;
    let value = parse_value(raw.trim());
    let path: Vec<&str> = key.trim().split('.').collect();
    let mut table = doc;
    for part in &path[..path.len() - 1] {
        let entry = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| BenchError::Config(format!("override `{key}`: `{part}` is not a table")))?;
    }
    table.insert(path[path.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("just parsed"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, BenchError> {
        let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| BenchError::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: RunConfig = doc.try_into().map_err(|e: toml::de::Error| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text, overrides)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.name.trim().is_empty() {
            return Err(BenchError::Config("name must not be empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(BenchError::Config("seeds must not be empty".into()));
        }
        if let Some(s) = &self.solver {
            if s.horizon == 0 {
                return Err(BenchError::Config("solver.horizon must be positive".into()));
            }
        }
        if let Some(d) = &self.distsim {
            if d.workers == 0 || d.horizon == 0 || d.modes.is_empty() {
                return Err(BenchError::Config("distsim needs workers, horizon and modes".into()));
            }
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(&self.name))
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// `A..B` (exclusive) or a single number.
pub fn parse_seed_range(s: &str) -> Result<Vec<u64>, BenchError> {
    let bad = || BenchError::Config(format!("bad seed range `{s}`, expected A..B"));
    match s.split_once("..") {
        Some((a, b)) => {
            let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            if a >= b {
                return Err(bad());
            }
            Ok((a..b).collect())
        }
        None => Ok(vec![s.trim().parse().map_err(|_| bad())?]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "q"
seeds = [1]
[problem]
kind = "quadratic"
dim = 3
sigma = 0.1
[constraint]
kind = "l1_ball"
radius = 1.0
[solver]
horizon = 10
"#;

    #[test]
    fn minimal_config_parses() {
        let cfg = RunConfig::from_toml(MINIMAL, &[]).unwrap();
        assert_eq!(cfg.seeds, vec![1]);
        assert_eq!(cfg.solver.as_ref().unwrap().horizon, 10);
        assert_eq!(cfg.out_dir(), PathBuf::from("runs/q"));
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL.replace("horizon = 10", "horizon = 10\nlearning_rate = 0.1");
        let err = RunConfig::from_toml(&text, &[]).unwrap_err().to_string();
        assert!(err.contains("learning_rate"), "{err}");
    }

    #[test]
    fn overrides_replace_values() {
        let cfg = RunConfig::from_toml(MINIMAL, &["solver.horizon=25".into(), "name=other".into()]).unwrap();
        assert_eq!(cfg.solver.unwrap().horizon, 25);
        assert_eq!(cfg.name, "other");
        assert!(RunConfig::from_toml(MINIMAL, &["solver.horizon".into()]).is_err());
    }

    #[test]
    fn empty_seed_list_rejected() {
        assert!(RunConfig::from_toml(&MINIMAL.replace("[1]", "[]"), &[]).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::from_toml(MINIMAL, &[]).unwrap();
        let b = RunConfig::from_toml(MINIMAL, &["solver.horizon=11".into()]).unwrap();
        assert_eq!(a.hash(), RunConfig::from_toml(MINIMAL, &[]).unwrap().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seed_range("2..5").unwrap(), vec![2, 3, 4]);
        assert_eq!(parse_seed_range("7").unwrap(), vec![7]);
        assert!(parse_seed_range("5..5").is_err());
        assert!(parse_seed_range("x").is_err());
    }

    #[test]
    fn constraint_blocks_both_forms() {
        let by_size = ConstraintSpec::PartitionMatroid { blocks: Blocks::Sizes(vec![2, 2]), budgets: vec![1, 1] };
        let by_index = ConstraintSpec::PartitionMatroid {
            blocks: Blocks::Indices(vec![vec![0, 1], vec![2, 3]]),
            budgets: vec![1, 1],
        };
        assert_eq!(by_size.matroid(4).unwrap(), by_index.matroid(4).unwrap());
        assert!(by_size.matroid(5).is_err());
        let nuc = ConstraintSpec::NuclearBall { radius: 1.0, rows: 2, cols: 3 };
        assert!(nuc.build(6).is_ok());
        assert!(nuc.build(5).is_err());
    }

    #[test]
    fn sweep_default_grid() {
        assert_eq!(SweepSpec::default().grid().len(), 15);
        assert_eq!(SweepSpec { c: vec![1.0], a: vec![0.5] }.grid(), vec![(1.0, 0.5)]);
    }
}
