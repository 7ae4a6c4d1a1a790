use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::schedule::RhoRule;
use crate::constraints::{pipage_round, shrink_translate, FeasibleSet, PartitionMatroid, PipageOutcome};
use crate::error::{Error, Result};
use crate::estimators::{momentum_update, two_point_gradient};
use crate::problems::{SampledMultilinearOracle, SetFunction, ValueOracle};
use crate::rng::{labels, RngStream};
use crate::Vector;

const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BcgConfig {
    pub horizon: usize,
    pub delta: f64,
    /// directions per iteration; `None` means `d`
    pub batch: Option<usize>,
    pub rho: RhoRule,
    #[serde(default)]
    pub keep_iterates: bool,
}

impl BcgConfig {
    pub fn new(horizon: usize, delta: f64) -> Self {
        Self {
            horizon,
            delta,
            batch: None,
            rho: RhoRule::Shifted { scale: 2.0, shift: 3.0, alpha: 2.0 / 3.0 },
            keep_iterates: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BcgResult {
    /// `x_{T+1} + δ𝟏`
    pub output: Vector,
    /// `x_1, …, x_{T+1}` in the shrunk domain, when requested
    pub iterates: Vec<Vector>,
    pub evaluations: u64,
}

/// Black-box continuous greedy with two-point gradient estimates over the
/// shrunk and translated domain.
pub fn bcg(
    oracle: &dyn ValueOracle,
    set: &FeasibleSet<f64>,
    box_upper: &[f64],
    cfg: &BcgConfig,
    rng: &RngStream,
) -> Result<BcgResult> {
    let d = oracle.dim();
    if set.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: set.dim() });
    }
    if box_upper.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: box_upper.len() });
    }
    let min_a = box_upper.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(cfg.delta > 0.0 && cfg.delta < min_a / 2.0) {
        return Err(Error::InvalidParameter(format!("δ must lie in (0, min a/2), got {}", cfg.delta)));
    }
    let batch = cfg.batch.unwrap_or(d);
    if batch == 0 {
        return Err(Error::InvalidParameter("batch must be ≥ 1".into()));
    }
    let shrunk = shrink_translate(set, box_upper, cfg.delta)?;
    let shift = Vector::filled(d, cfg.delta);
    let step = 1.0 / cfg.horizon.max(1) as f64;

    let mut x = Vector::zeros(d);
    let mut g_bar = Vector::zeros(d);
    let zero = Vector::zeros(d);
    let mut iterates = Vec::new();
    if cfg.keep_iterates {
        iterates.push(x.clone());
    }
    for t in 1..=cfg.horizon {
        let mut it = rng.derive2(labels::ITERATION, t as u64);
        let center = &x + &shift;
        let g = two_point_gradient(oracle, &center, cfg.delta, batch, &mut it)?;
        let rho = cfg.rho.rho(t);
        g_bar = momentum_update(&g_bar, &zero, &g, rho)
            .map_err(|e| Error::NumericalFailure { iteration: t, what: e.to_string() })?;
        let v = shrunk.lmo_max(&g_bar)?;
        x.axpy(step, &v);
        if !shrunk.contains_tol(&x, MEMBERSHIP_TOL) {
            return Err(Error::Infeasible(format!("iterate {} left the shrunk domain", t + 1)));
        }
        if cfg.keep_iterates {
            iterates.push(x.clone());
        }
    }
    let output = &x + &shift;
    if !set.contains_tol(&output, MEMBERSHIP_TOL) {
        return Err(Error::Infeasible("translated output outside the feasible set".into()));
    }
    Ok(BcgResult { output, iterates, evaluations: 2 * (batch * cfg.horizon) as u64 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DbgConfig {
    pub horizon: usize,
    pub delta: f64,
    /// subsets sampled per multilinear evaluation
    pub samples: usize,
    /// directions per iteration
    pub batch: usize,
}

impl DbgConfig {
    pub fn new(horizon: usize, delta: f64, samples: usize) -> Self {
        Self { horizon, delta, samples, batch: 1 }
    }
}

#[derive(Clone, Debug)]
pub struct DbgResult {
    pub set: Vec<bool>,
    /// the fractional point handed to rounding
    pub fractional: Vector,
    pub rounding: Option<PipageOutcome>,
    pub value: f64,
}

/// Discrete black-box greedy: BCG on the sampled multilinear extension over
/// the matroid polytope, then pipage rounding.
pub fn dbg(f: Arc<dyn SetFunction>, m: &PartitionMatroid, cfg: &DbgConfig, rng: &RngStream) -> Result<DbgResult> {
    let d = m.ground_size();
    if f.ground_size() != d {
        return Err(Error::DimensionMismatch { expected: d, got: f.ground_size() });
    }
    if cfg.samples == 0 {
        return Err(Error::InvalidParameter("at least one subset sample per evaluation is needed".into()));
    }
    if !(cfg.delta > 0.0 && cfg.delta < 0.5) {
        return Err(Error::InvalidParameter(format!("δ must lie in (0, 1/2), got {}", cfg.delta)));
    }
    if m.budgets().iter().all(|&b| b == 0) {
        let empty = vec![false; d];
        let value = f.eval(&empty);
        return Ok(DbgResult { set: empty, fractional: Vector::zeros(d), rounding: None, value });
    }
    let oracle = SampledMultilinearOracle::new(f.clone(), cfg.samples)?;
    let set = FeasibleSet::partition_matroid(m.clone());
    let bcg_cfg = BcgConfig {
        horizon: cfg.horizon,
        delta: cfg.delta,
        batch: Some(cfg.batch),
        rho: BcgConfig::new(0, 0.0).rho,
        keep_iterates: false,
    };
    let res = bcg(&oracle, &set, &vec![1.0; d], &bcg_cfg, rng)?;
    let mut round_rng = rng.derive(labels::ROUNDING);
    let outcome = pipage_round(&res.output, m, f.as_ref(), &mut round_rng)?;
    let value = f.eval(&outcome.set);
    Ok(DbgResult { set: outcome.set.clone(), fractional: res.output, rounding: Some(outcome), value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{Modular, TableSetFunction};

    struct Linear(Vector);

    impl ValueOracle for Linear {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn value(&self, x: &Vector, _rng: &mut RngStream) -> Result<f64> {
            if x.iter().any(|&xi| !(-1e-12..=1.0 + 1e-12).contains(&xi)) {
                return Err(Error::Domain("probe outside [0, 1]^d".into()));
            }
            Ok(self.0.dot(x))
        }
    }

    fn budget_set(d: usize, k: usize) -> (PartitionMatroid, FeasibleSet<f64>) {
        let m = PartitionMatroid::contiguous(&[d], vec![k]).unwrap();
        (m.clone(), FeasibleSet::partition_matroid(m))
    }

    #[test]
    fn linear_objective_near_lp_optimum() {
        let c = Vector::new(vec![0.9, 0.1, 0.5, 0.7, 0.3]).unwrap();
        let (_, set) = budget_set(5, 2);
        let oracle = Linear(c.clone());
        let out = bcg(&oracle, &set, &[1.0; 5], &BcgConfig::new(200, 0.01), &RngStream::from_seed(3)).unwrap();
        let opt = set.lmo_max(&c).unwrap().dot(&c);
        assert!((opt - 1.6).abs() < 1e-12);
        assert!(c.dot(&out.output) >= opt - 0.05 * opt);
        assert!(set.contains_tol(&out.output, 1e-9));
    }

    #[test]
    fn single_step_is_shifted_vertex() {
        let c = Vector::new(vec![0.2, 0.8, 0.4]).unwrap();
        let set = FeasibleSet::unit_box(3).unwrap();
        let delta = 0.05;
        let out = bcg(&Linear(c), &set, &[1.0; 3], &BcgConfig::new(1, delta), &RngStream::from_seed(8)).unwrap();
        let shrunk = shrink_translate(&set, &[1.0; 3], delta).unwrap();
        // every coordinate is either 0 or the shrunk upper bound 1 − 2δ, then shifted
        for &o in out.output.iter() {
            assert!((o - delta).abs() < 1e-12 || (o - (1.0 - delta)).abs() < 1e-12);
        }
        assert!(shrunk.contains_tol(&(&out.output - &Vector::filled(3, delta)), 1e-12));
    }

    #[test]
    fn iterates_stay_in_shrunk_domain() {
        let f = TableSetFunction::random(6, 1.0, &mut RngStream::from_seed(4)).unwrap();
        let oracle = crate::problems::ExactMultilinearOracle::new(Arc::new(f)).unwrap();
        let (_, set) = budget_set(6, 3);
        let delta = 0.04;
        let cfg = BcgConfig { keep_iterates: true, ..BcgConfig::new(60, delta) };
        let res = bcg(&oracle, &set, &[1.0; 6], &cfg, &RngStream::from_seed(5)).unwrap();
        let shrunk = shrink_translate(&set, &[1.0; 6], delta).unwrap();
        assert_eq!(res.iterates.len(), 61);
        for x in &res.iterates {
            assert!(shrunk.contains_tol(x, 1e-9));
            assert!(set.contains_tol(&(x + &Vector::filled(6, delta)), 1e-9));
        }
        assert_eq!(res.evaluations, 2 * 6 * 60);
    }

    #[test]
    fn bad_parameters() {
        let set = FeasibleSet::unit_box(2).unwrap();
        let o = Linear(Vector::filled(2, 1.0));
        let rng = RngStream::from_seed(0);
        assert!(bcg(&o, &set, &[1.0; 2], &BcgConfig::new(5, 0.5), &rng).is_err());
        assert!(bcg(&o, &set, &[1.0; 2], &BcgConfig::new(5, 0.0), &rng).is_err());
        let cfg = BcgConfig { batch: Some(0), ..BcgConfig::new(5, 0.1) };
        assert!(bcg(&o, &set, &[1.0; 2], &cfg, &rng).is_err());
    }

    #[test]
    fn dbg_modular_is_exact() {
        let w = vec![0.3, 0.9, 0.1, 0.4, 0.8, 0.2];
        let f: Arc<dyn SetFunction> = Arc::new(Modular::new(w).unwrap());
        let m = PartitionMatroid::contiguous(&[3, 3], vec![1, 2]).unwrap();
        let res = dbg(f, &m, &DbgConfig::new(60, 0.05, 10), &RngStream::from_seed(2)).unwrap();
        assert_eq!(res.set, vec![false, true, false, true, true, false]);
        assert!((res.value - 2.1).abs() < 1e-12);
        assert!(m.is_base(&res.set));
    }

    #[test]
    fn dbg_zero_budgets_give_empty_set() {
        let f: Arc<dyn SetFunction> = Arc::new(Modular::cardinality(4).unwrap());
        let m = PartitionMatroid::contiguous(&[2, 2], vec![0, 0]).unwrap();
        let res = dbg(f, &m, &DbgConfig::new(10, 0.1, 5), &RngStream::from_seed(0)).unwrap();
        assert_eq!(res.set, vec![false; 4]);
        assert_eq!(res.value, 0.0);
    }

    #[test]
    fn dbg_rejects_zero_samples() {
        let f: Arc<dyn SetFunction> = Arc::new(Modular::cardinality(2).unwrap());
        let m = PartitionMatroid::contiguous(&[2], vec![1]).unwrap();
        assert!(dbg(f, &m, &DbgConfig::new(10, 0.1, 0), &RngStream::from_seed(0)).is_err());
    }
}
