use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::logistic::{read_numeric_csv, LogisticL1};
use super::lrmr::RobustLrmr;
use super::multilinear_problem::{BernoulliMultilinear, ComponentMultilinear, ExactMultilinearOracle, SampledMultilinearOracle};
use super::quadratic::{Nqp, Quadratic, QuadraticSum};
use super::setfn::{ConcaveModular, Coverage, Decomposable, FacilityLocation, LogDet, Modular, SetFunction, TableSetFunction};
use super::stochastic::{FiniteSum, StochasticProblem, ValueOracle};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::Vector;

fn default_radius() -> f64 {
    1.0
}

fn default_margin() -> f64 {
    0.2
}

fn default_box() -> f64 {
    1.0
}

/// A set function for the multilinear problems.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum SetFunctionSpec {
    Modular { weights: Vec<f64> },
    Cardinality { dim: usize },
    FacilityLocation { dim: usize, customers: usize },
    Coverage { dim: usize, topics: usize },
    /// random ratings, or `(user, item, rating)` triplets from `ratings`
    ConcaveModular { dim: usize, users: usize, ratings: Option<PathBuf> },
    LogDet { dim: usize, rank: usize },
    Table { dim: usize, bound: f64 },
}

/// How the multilinear extension is turned into a stochastic problem.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultilinearSampling {
    /// product-Bernoulli subsets, non-oblivious
    #[default]
    Bernoulli,
    /// uniform component index with pinned partial derivatives, oblivious
    Components,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum ProblemSpec {
    Quadratic {
        dim: usize,
        target: Option<Vec<f64>>,
        sigma: f64,
        #[serde(default = "default_radius")]
        radius: f64,
    },
    QuadraticSum {
        dim: usize,
        components: usize,
        #[serde(default = "default_radius")]
        radius: f64,
    },
    Nqp {
        dim: usize,
        sigma: f64,
        #[serde(default = "default_box")]
        box_upper: f64,
    },
    LogisticL1 {
        data: Option<PathBuf>,
        #[serde(default)]
        rows: usize,
        #[serde(default)]
        dim: usize,
        #[serde(default = "default_radius")]
        radius: f64,
    },
    RobustLrmr {
        data: Option<PathBuf>,
        rows: usize,
        cols: usize,
        #[serde(default = "default_rank")]
        rank: usize,
        #[serde(default = "default_fraction")]
        fraction: f64,
        #[serde(default)]
        outliers: f64,
        sigma: f64,
    },
    Multilinear {
        function: SetFunctionSpec,
        #[serde(default)]
        sampling: MultilinearSampling,
        #[serde(default = "default_margin")]
        margin: f64,
        /// subsets averaged per value-oracle call; 0 means the exact value
        #[serde(default)]
        value_samples: usize,
    },
}

fn default_rank() -> usize {
    2
}

fn default_fraction() -> f64 {
    0.5
}

/// Every oracle an instance offers.
#[derive(Clone, Default)]
pub struct ProblemBundle {
    pub stochastic: Option<Arc<dyn StochasticProblem>>,
    pub finite_sum: Option<Arc<dyn FiniteSum>>,
    pub set_function: Option<Arc<dyn SetFunction>>,
    pub value_oracle: Option<Arc<dyn ValueOracle>>,
}

impl ProblemBundle {
    pub fn dim(&self) -> Option<usize> {
        self.stochastic
            .as_ref()
            .map(|p| p.dim())
            .or_else(|| self.finite_sum.as_ref().map(|f| f.dim()))
            .or_else(|| self.set_function.as_ref().map(|f| f.ground_size()))
    }

    pub fn require_stochastic(&self) -> Result<&Arc<dyn StochasticProblem>> {
        self.stochastic.as_ref().ok_or(Error::Capability("stochastic gradient oracle"))
    }

    pub fn require_finite_sum(&self) -> Result<&Arc<dyn FiniteSum>> {
        self.finite_sum.as_ref().ok_or(Error::Capability("finite-sum oracle"))
    }

    pub fn require_set_function(&self) -> Result<&Arc<dyn SetFunction>> {
        self.set_function.as_ref().ok_or(Error::Capability("set function"))
    }

    pub fn require_value_oracle(&self) -> Result<&Arc<dyn ValueOracle>> {
        self.value_oracle.as_ref().ok_or(Error::Capability("value oracle"))
    }
}

enum BuiltSetFunction {
    Plain(Arc<dyn SetFunction>),
    Decomposable(Arc<dyn Decomposable>, Arc<dyn SetFunction>),
}

fn decomposable<F: Decomposable + 'static>(f: F) -> BuiltSetFunction {
    let f = Arc::new(f);
    BuiltSetFunction::Decomposable(f.clone(), f)
}

fn build_set_function(spec: &SetFunctionSpec, rng: &mut RngStream) -> Result<BuiltSetFunction> {
    Ok(match spec {
        SetFunctionSpec::Modular { weights } => decomposable(Modular::new(weights.clone())?),
        SetFunctionSpec::Cardinality { dim } => decomposable(Modular::cardinality(*dim)?),
        SetFunctionSpec::FacilityLocation { dim, customers } => decomposable(FacilityLocation::random(*dim, *customers, rng)?),
        SetFunctionSpec::Coverage { dim, topics } => decomposable(Coverage::random(*dim, *topics, rng)?),
        SetFunctionSpec::ConcaveModular { dim, users, ratings } => {
            let f = match ratings {
                Some(path) => {
                    let rows = read_numeric_csv(path)?;
                    let triplets = rows
                        .iter()
                        .map(|r| {
                            if r.len() != 3 || r[0] < 0.0 || r[1] < 0.0 {
                                Err(Error::Data(format!("{}: expected (user, item, rating) rows", path.display())))
                            } else {
                                Ok((r[0] as usize, r[1] as usize, r[2]))
                            }
                        })
                        .collect::<Result<Vec<_>>>()?;
                    ConcaveModular::from_triplets(&triplets, *users, *dim)?
                }
                None => ConcaveModular::random(*dim, *users, rng)?,
            };
            BuiltSetFunction::Plain(Arc::new(f))
        }
        SetFunctionSpec::LogDet { dim, rank } => BuiltSetFunction::Plain(Arc::new(LogDet::random(*dim, *rank, rng)?)),
        SetFunctionSpec::Table { dim, bound } => {
            BuiltSetFunction::Plain(Arc::new(TableSetFunction::random(*dim, *bound, rng)?))
        }
    })
}

/// Builds every oracle for `spec`; random instances are drawn from `rng`.
pub fn build_problem(spec: &ProblemSpec, rng: &mut RngStream) -> Result<ProblemBundle> {
    let mut out = ProblemBundle::default();
    match spec {
        ProblemSpec::Quadratic { dim, target, sigma, radius } => {
            let target = match target {
                Some(t) if t.len() != *dim => return Err(Error::DimensionMismatch { expected: *dim, got: t.len() }),
                Some(t) => Vector::new(t.clone())?,
                None => Vector::from_fn(*dim, |_| rng.uniform_range(-0.5, 0.5) / (*dim as f64).sqrt()),
            };
            out.stochastic = Some(Arc::new(Quadratic::new(target, *sigma, *radius)?));
        }
        ProblemSpec::QuadraticSum { dim, components, radius } => {
            let sum = QuadraticSum::random(*components, *dim, rng)?;
            out.finite_sum = Some(Arc::new(sum.clone()));
            out.stochastic = Some(Arc::new(sum.into_problem(*radius)));
        }
        ProblemSpec::Nqp { dim, sigma, box_upper } => {
            out.stochastic = Some(Arc::new(Nqp::random(*dim, *sigma, &vec![*box_upper; *dim], rng)?));
        }
        ProblemSpec::LogisticL1 { data, rows, dim, radius } => {
            let l = match data {
                Some(path) => LogisticL1::from_csv(path)?,
                None => LogisticL1::random(*rows, *dim, rng)?,
            };
            out.finite_sum = Some(Arc::new(l.clone()));
            out.stochastic = Some(Arc::new(l.into_problem(*radius)));
        }
        ProblemSpec::RobustLrmr { data, rows, cols, rank, fraction, outliers, sigma } => {
            let m = match data {
                Some(path) => RobustLrmr::from_csv(path, *rows, *cols, *sigma)?,
                None => RobustLrmr::random(*rows, *cols, *rank, *fraction, *outliers, *sigma, rng)?,
            };
            out.finite_sum = Some(Arc::new(m.clone()));
            out.stochastic = Some(Arc::new(m.into_problem()));
        }
        ProblemSpec::Multilinear { function, sampling, margin, value_samples } => {
            let built = build_set_function(function, rng)?;
            let f = match &built {
                BuiltSetFunction::Plain(f) | BuiltSetFunction::Decomposable(_, f) => f.clone(),
            };
            out.stochastic = Some(match (sampling, built) {
                (MultilinearSampling::Bernoulli, _) => Arc::new(BernoulliMultilinear::new("multilinear", f.clone(), *margin)?),
                (MultilinearSampling::Components, BuiltSetFunction::Decomposable(dec, _)) => {
                    Arc::new(ComponentMultilinear::new("multilinear", dec)?)
                }
                (MultilinearSampling::Components, BuiltSetFunction::Plain(_)) => {
                    return Err(Error::Unsupported("component sampling needs a sum-of-components set function".into()))
                }
            });
            out.value_oracle = Some(if *value_samples == 0 {
                Arc::new(ExactMultilinearOracle::new(f.clone())?)
            } else {
                Arc::new(SampledMultilinearOracle::new(f.clone(), *value_samples)?)
            });
            out.set_function = Some(f);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> ProblemSpec {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn builds_quadratic() {
        let spec = parse(r#"{"kind": "quadratic", "dim": 3, "target": [0.1, 0.2, 0.3], "sigma": 0.5}"#);
        let b = build_problem(&spec, &mut RngStream::from_seed(0)).unwrap();
        let p = b.require_stochastic().unwrap();
        assert_eq!(p.dim(), 3);
        assert_eq!(p.exact_grad(&Vector::new(vec![0.1, 0.2, 0.3]).unwrap()).unwrap(), Vector::zeros(3));
        assert!(b.require_set_function().is_err());
    }

    #[test]
    fn builds_multilinear_bundles() {
        let spec = parse(r#"{"kind": "multilinear", "function": {"kind": "coverage", "dim": 6, "topics": 4}}"#);
        let b = build_problem(&spec, &mut RngStream::from_seed(1)).unwrap();
        assert_eq!(b.dim(), Some(6));
        assert!(b.value_oracle.is_some());
        assert_eq!(b.require_stochastic().unwrap().mode(), crate::problems::Mode::NonOblivious);
        let spec = parse(
            r#"{"kind": "multilinear", "function": {"kind": "facility_location", "dim": 5, "customers": 3}, "sampling": "components"}"#,
        );
        let b = build_problem(&spec, &mut RngStream::from_seed(1)).unwrap();
        assert_eq!(b.require_stochastic().unwrap().mode(), crate::problems::Mode::Oblivious);
        let spec = parse(r#"{"kind": "multilinear", "function": {"kind": "log_det", "dim": 4, "rank": 2}, "sampling": "components"}"#);
        assert!(build_problem(&spec, &mut RngStream::from_seed(1)).is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let r: std::result::Result<ProblemSpec, _> =
            serde_json::from_str(r#"{"kind": "nqp", "dim": 3, "sigma": 0.1, "learning_rate": 2}"#);
        assert!(r.unwrap_err().to_string().contains("learning_rate"));
    }

    #[test]
    fn same_seed_same_instance() {
        let spec = parse(r#"{"kind": "logistic_l1", "rows": 12, "dim": 3}"#);
        let a = build_problem(&spec, &mut RngStream::from_seed(4)).unwrap();
        let b = build_problem(&spec, &mut RngStream::from_seed(4)).unwrap();
        let x = Vector::filled(3, 0.1);
        assert_eq!(a.require_finite_sum().unwrap().value(&x).unwrap(), b.require_finite_sum().unwrap().value(&x).unwrap());
    }

    #[test]
    fn missing_csv_is_a_data_error() {
        let spec = parse(r#"{"kind": "logistic_l1", "data": "/nonexistent/file.csv"}"#);
        assert!(matches!(build_problem(&spec, &mut RngStream::from_seed(0)), Err(Error::Data(_))));
    }
}
