use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::fw::fw_gap;
use super::schedule::{ObjectiveMode, OutputRule, Schedule};
use super::trace::{IterationRecord, SolveTrace};
use crate::constraints::FeasibleSet;
use crate::error::{Error, Result};
use crate::estimators::{
    grad_diff_delta, momentum_update, one_sample_gradient, variation_exact_hessian, variation_grad_diff,
    variation_oblivious, VariationEstimate, VariationOption,
};
use crate::problems::{Mode, StochasticProblem};
use crate::rng::{labels, RngStream};
use crate::Vector;

/// Seed of the stream used for Monte-Carlo objective logging; fixed so
/// logging never touches the solver's own streams.
pub const LOGGING_SEED: u64 = 0x6c6f_6767_696e_6721;

/// Width of the gradient differences in the gradient-difference option.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum DeltaRule {
    /// `δ_t = √3·η_{t−1}·L̄ / (D·L₂·(1 + B))` from the problem constants
    Theory,
    Fixed { delta: f64 },
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// starting point for the minimization modes (the maximization mode starts at 0)
    pub start: Option<Vector>,
    pub record_objective: bool,
    pub record_fw_gap: bool,
    pub record_est_error: bool,
    /// record every `every`-th iteration (the last one is always recorded)
    pub every: usize,
    pub record_wall_time: bool,
    pub keep_iterates: bool,
    pub check_feasibility: bool,
    /// samples for the objective estimate when no exact reference exists
    pub mc_objective_samples: usize,
    pub grad_diff_delta: DeltaRule,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            start: None,
            record_objective: true,
            record_fw_gap: true,
            record_est_error: true,
            every: 1,
            record_wall_time: false,
            keep_iterates: false,
            check_feasibility: true,
            mc_objective_samples: 2048,
            grad_diff_delta: DeltaRule::Theory,
        }
    }
}

impl SolveOptions {
    /// No per-iteration logging at all.
    pub fn quiet() -> Self {
        Self { record_objective: false, record_fw_gap: false, record_est_error: false, ..Self::default() }
    }
}

/// How `d_t` is formed for `t ≥ 2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// unbiased momentum with a one-sample variation estimate
    OneSample(VariationOption),
    /// unbiased momentum with the shared-sample gradient difference
    Oblivious,
    /// plain momentum averaging from `d_0 = 0`
    Momentum,
}

/// What the observer sees after each update.
pub struct StepInfo<'a> {
    pub t: usize,
    pub x: &'a Vector,
    pub x_prev: &'a Vector,
    pub d: &'a Vector,
    pub vertex: &'a Vector,
    pub x_next: &'a Vector,
    pub variation: Option<&'a VariationEstimate>,
    pub delta: Option<f64>,
    pub rho: f64,
    pub eta: f64,
}

/// One-sample stochastic Frank-Wolfe.
pub fn one_sfw(
    p: &dyn StochasticProblem,
    set: &FeasibleSet<f64>,
    sched: &Schedule,
    option: VariationOption,
    opts: &SolveOptions,
    rng: &RngStream,
) -> Result<SolveTrace> {
    run_sfw(p, set, sched, Estimator::OneSample(option), opts, rng, &mut |_| {})
}

/// One-sample stochastic Frank-Wolfe for oblivious problems.
pub fn oblivious_sfw(
    p: &dyn StochasticProblem,
    set: &FeasibleSet<f64>,
    sched: &Schedule,
    opts: &SolveOptions,
    rng: &RngStream,
) -> Result<SolveTrace> {
    run_sfw(p, set, sched, Estimator::Oblivious, opts, rng, &mut |_| {})
}

/// Momentum-only stochastic Frank-Wolfe / continuous greedy.
pub fn scg_baseline(
    p: &dyn StochasticProblem,
    set: &FeasibleSet<f64>,
    sched: &Schedule,
    opts: &SolveOptions,
    rng: &RngStream,
) -> Result<SolveTrace> {
    run_sfw(p, set, sched, Estimator::Momentum, opts, rng, &mut |_| {})
}

fn nan_guard(v: &Vector, t: usize, what: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NumericalFailure { iteration: t, what: format!("non-finite {what}") })
    }
}

/// `F(x)` from the exact reference or, failing that, a Monte-Carlo estimate
/// on a dedicated stream.
pub fn logged_objective(p: &dyn StochasticProblem, x: &Vector, t: usize, samples: usize) -> Result<f64> {
    if let Some(v) = p.exact_value(x) {
        return Ok(v);
    }
    let mut rng = RngStream::new(LOGGING_SEED, t as u64);
    let mut acc = 0.0;
    for _ in 0..samples.max(1) {
        let z = p.sample(x, &mut rng)?;
        acc += p.value(x, &z)?;
    }
    Ok(acc / samples.max(1) as f64)
}

/// The shared driver behind [`one_sfw`], [`oblivious_sfw`] and
/// [`scg_baseline`]; `observer` is called after every update.
pub fn run_sfw(
    p: &dyn StochasticProblem,
    set: &FeasibleSet<f64>,
    sched: &Schedule,
    estimator: Estimator,
    opts: &SolveOptions,
    rng: &RngStream,
    observer: &mut dyn FnMut(&StepInfo),
) -> Result<SolveTrace> {
    sched.validate()?;
    let dim = p.dim();
    if set.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: set.dim() });
    }
    if estimator == Estimator::Oblivious && p.mode() != Mode::Oblivious {
        return Err(Error::Mode("the oblivious driver needs a sampling law independent of x".into()));
    }
    if estimator == Estimator::OneSample(VariationOption::ObliviousDiff) && p.mode() != Mode::Oblivious {
        return Err(Error::Mode("the shared-sample difference is biased for non-oblivious problems".into()));
    }
    let maximize = sched.mode == ObjectiveMode::DrMax;
    let start = if maximize {
        let zero = Vector::zeros(dim);
        if !set.contains(&zero) {
            return Err(Error::Infeasible("the maximization mode needs 0 in the feasible set".into()));
        }
        if opts.start.as_ref().is_some_and(|s| s != &zero) {
            return Err(Error::InvalidParameter("the maximization mode starts at 0".into()));
        }
        zero
    } else {
        match &opts.start {
            Some(s) => s.clone(),
            None => default_start(set)?,
        }
    };
    start.check_dim(dim)?;
    if !set.contains(&start) {
        return Err(Error::Infeasible("starting point is outside the feasible set".into()));
    }

    let horizon = sched.horizon;
    let output_index = match sched.output {
        OutputRule::UniformRandomIterate if horizon > 0 => {
            Some(rng.derive(labels::OUTPUT_INDEX).below(horizon) + 1)
        }
        _ => None,
    };
    let diameter = set.diameter();
    let constants = p.constants();
    let timer = Instant::now();

    let mut trace = SolveTrace::new(start.clone());
    trace.output_rule = Some(sched.output);
    trace.output_index = output_index;
    if opts.keep_iterates {
        trace.iterates.push(start.clone());
    }
    let mut x_prev = start.clone();
    let mut x = start;
    let mut d = Vector::zeros(dim);
    let mut output = None;

    for t in 1..=horizon {
        let it = rng.derive2(labels::ITERATION, t as u64);
        let mut a_rng = it.derive(labels::A_DRAW);
        let mut z_rng = it.derive(labels::Z_DRAW);
        let rho = sched.rho(t);
        let mut variation = None;
        let mut delta_used = None;

        if t == 1 && estimator != Estimator::Momentum {
            let z = p.sample(&x, &mut z_rng)?;
            d = one_sample_gradient(p, &x, &z)?;
        } else {
            let (delta_tilde, g) = match estimator {
                Estimator::OneSample(VariationOption::ExactHessian) => {
                    let v = variation_exact_hessian(p, &x, &x_prev, &mut a_rng, &mut z_rng)?;
                    let g = one_sample_gradient(p, &x, &v.z)?;
                    let dt = v.delta_tilde.clone();
                    variation = Some(v);
                    (dt, g)
                }
                Estimator::OneSample(VariationOption::GradDiff) => {
                    let delta = match opts.grad_diff_delta {
                        DeltaRule::Fixed { delta } => delta,
                        DeltaRule::Theory => grad_diff_delta(&constants, sched.eta(t - 1), diameter),
                    };
                    if !(delta.is_finite() && delta > 0.0) {
                        return Err(Error::InvalidParameter(format!(
                            "gradient-difference width δ_{t} = {delta}; problem constants are required"
                        )));
                    }
                    delta_used = Some(delta);
                    let v = variation_grad_diff(p, &x, &x_prev, delta, &mut a_rng, &mut z_rng)?;
                    if v.clamped {
                        trace.clamp_events += 1;
                    }
                    let g = one_sample_gradient(p, &x, &v.z)?;
                    let dt = v.delta_tilde.clone();
                    variation = Some(v);
                    (dt, g)
                }
                Estimator::OneSample(VariationOption::ObliviousDiff) | Estimator::Oblivious => {
                    let z = p.sample(&x, &mut z_rng)?;
                    let dt = variation_oblivious(p, &x, &x_prev, &z)?;
                    (dt, p.grad(&x, &z)?)
                }
                Estimator::Momentum => {
                    let z = p.sample(&x, &mut z_rng)?;
                    (Vector::zeros(dim), one_sample_gradient(p, &x, &z)?)
                }
            };
            nan_guard(&delta_tilde, t, "gradient variation")?;
            nan_guard(&g, t, "one-sample gradient")?;
            d = momentum_update(&d, &delta_tilde, &g, rho)
                .map_err(|e| Error::NumericalFailure { iteration: t, what: e.to_string() })?;
        }
        nan_guard(&d, t, "gradient estimate")?;

        let vertex = if maximize { set.lmo_max(&d)? } else { set.lmo_min(&d)? };
        let eta = sched.eta(t);
        let x_next = if maximize {
            let mut n = x.clone();
            n.axpy(eta, &vertex);
            n
        } else {
            Vector::from_fn(dim, |i| x[i] + eta * (vertex[i] - x[i]))
        };
        nan_guard(&x_next, t, "iterate")?;
        if opts.check_feasibility && !set.contains(&x_next) {
            return Err(Error::Infeasible(format!("iterate {} left the feasible set", t + 1)));
        }
        observer(&StepInfo {
            t,
            x: &x,
            x_prev: &x_prev,
            d: &d,
            vertex: &vertex,
            x_next: &x_next,
            variation: variation.as_ref(),
            delta: delta_used,
            rho,
            eta,
        });

        if opts.every > 0 && (t % opts.every == 0 || t == horizon) {
            let mut rec = IterationRecord { t, oracle_calls: t as u64, x_hash: x_next.fingerprint(), ..Default::default() };
            if opts.record_est_error {
                rec.est_error = p.exact_grad(&x).map(|g| g.dist_sq(&d));
            }
            if opts.record_objective {
                rec.objective = Some(logged_objective(p, &x_next, t, opts.mc_objective_samples)?);
            }
            if opts.record_fw_gap && !maximize {
                if let Some(g) = p.exact_grad(&x_next) {
                    rec.fw_gap = Some(fw_gap(&g, set, &x_next)?);
                }
            }
            if opts.record_wall_time {
                rec.wall_ms = Some(timer.elapsed().as_secs_f64() * 1e3);
            }
            trace.records.push(rec);
        }
        if output_index == Some(t) {
            output = Some(x.clone());
        }
        if opts.keep_iterates {
            trace.iterates.push(x_next.clone());
        }
        x_prev = std::mem::replace(&mut x, x_next);
    }
    trace.output = output.unwrap_or(x);
    Ok(trace)
}

/// `0` when feasible, else the vertex minimizing `⟨v, 𝟏⟩`.
pub fn default_start(set: &FeasibleSet<f64>) -> Result<Vector> {
    let zero = Vector::zeros(set.dim());
    if set.contains(&zero) {
        Ok(zero)
    } else {
        set.lmo_min(&Vector::filled(set.dim(), 1.0))
    }
}
