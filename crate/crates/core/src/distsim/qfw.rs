use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{LinkMode, QfwConfig, QfwSetting};
use super::ledger::{BitLedger, Direction};
use crate::constraints::FeasibleSet;
use crate::error::{Error, Result};
use crate::problems::{FiniteSum, Mode, Sample, StochasticProblem};
use crate::quantize::{decode, encode_partition};
use crate::rng::{labels, RngStream};
use crate::solvers::{fw_gap, logged_objective, IterationRecord, OutputRule, SolveOptions, SolveTrace};
use crate::Vector;

/// Bits charged for one full-precision coordinate.
pub const FLOAT_BITS: u64 = 32;

/// Where the workers' gradients come from.
#[derive(Clone, Copy)]
pub enum DistProblem<'a> {
    /// `N = M·n` components; worker `m` owns `[m·n, (m+1)·n)`
    Finite(&'a dyn FiniteSum),
    /// every worker draws its own samples
    Stochastic(&'a dyn StochasticProblem),
}

impl DistProblem<'_> {
    fn dim(&self) -> usize {
        match self {
            DistProblem::Finite(f) => f.dim(),
            DistProblem::Stochastic(p) => p.dim(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct QfwRun {
    pub trace: SolveTrace,
    pub ledger: BitLedger,
    /// common fingerprint of every replica's `(x, ḡ)` after each round
    pub replica_hashes: Vec<u64>,
    /// `F(x_{t+1})` of the true objective per record, when a reference exists
    pub reference_objective: Vec<Option<f64>>,
}

#[derive(Clone, Debug)]
struct Replica {
    x: Vector,
    x_prev: Vector,
    g_bar: Vector,
}

impl Replica {
    fn fingerprint(&self) -> u64 {
        self.x.fingerprint() ^ self.g_bar.fingerprint().rotate_left(17)
    }
}

/// One worker's upload for a round.
struct Upload {
    decoded: Vector,
    bits: u64,
    calls: u64,
}

fn worker_stream(rng: &RngStream, m: usize, t: usize) -> RngStream {
    rng.derive2(labels::WORKER, m as u64).derive2(labels::ITERATION, t as u64)
}

/// Local gradient `∇f_S(x)` (anchor) or `∇f_S(x) − ∇f_S(x_prev)`.
fn local_gradient(
    problem: DistProblem,
    cfg: &QfwConfig,
    m: usize,
    replica: &Replica,
    batch: Option<usize>,
    anchor: bool,
    rng: &mut RngStream,
) -> Result<(Vector, u64)> {
    let evals = if anchor { 1 } else { 2 };
    match problem {
        DistProblem::Finite(f) => {
            let n = cfg.local_size;
            let indices: Vec<usize> = match batch {
                None => (m * n..(m + 1) * n).collect(),
                Some(s) => (0..s).map(|_| m * n + rng.below(n)).collect(),
            };
            let g = if anchor {
                f.batch_grad(&replica.x, &indices)?
            } else {
                &f.batch_grad(&replica.x, &indices)? - &f.batch_grad(&replica.x_prev, &indices)?
            };
            Ok((g, evals * indices.len() as u64))
        }
        DistProblem::Stochastic(p) => {
            let s = batch.ok_or_else(|| Error::InvalidParameter("full local batches need a finite sum".into()))?;
            let mut g = Vector::zeros(p.dim());
            for _ in 0..s {
                let z: Sample = p.sample(&replica.x, rng)?;
                g.axpy(1.0, &p.grad(&replica.x, &z)?);
                if !anchor {
                    g.axpy(-1.0, &p.grad(&replica.x_prev, &z)?);
                }
            }
            g.scale(1.0 / s as f64);
            Ok((g, evals * s as u64))
        }
    }
}

/// Quantized Frank-Wolfe on an in-process master and `M` workers.
pub fn run_qfw(
    problem: DistProblem,
    set: &FeasibleSet<f64>,
    cfg: &QfwConfig,
    opts: &SolveOptions,
    rng: &RngStream,
) -> Result<QfwRun> {
    run_qfw_with_reference(problem, None, set, cfg, opts, rng)
}

fn objective(problem: DistProblem, x: &Vector, t: usize, opts: &SolveOptions) -> Result<f64> {
    match problem {
        DistProblem::Finite(f) => f.value(x),
        DistProblem::Stochastic(p) => logged_objective(p, x, t, opts.mc_objective_samples),
    }
}

fn exact_gradient(problem: DistProblem, x: &Vector) -> Result<Option<Vector>> {
    match problem {
        DistProblem::Finite(f) => f.full_grad(x).map(Some),
        DistProblem::Stochastic(p) => Ok(p.exact_grad(x)),
    }
}

fn run_qfw_with_reference(
    problem: DistProblem,
    reference: Option<&dyn StochasticProblem>,
    set: &FeasibleSet<f64>,
    cfg: &QfwConfig,
    opts: &SolveOptions,
    rng: &RngStream,
) -> Result<QfwRun> {
    cfg.validate()?;
    let d = problem.dim();
    if set.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: set.dim() });
    }
    match problem {
        DistProblem::Finite(f) => {
            if cfg.local_size == 0 || f.len() != cfg.workers * cfg.local_size {
                return Err(Error::InvalidParameter(format!(
                    "partition mismatch: N = {} but M·n = {}·{}",
                    f.len(),
                    cfg.workers,
                    cfg.local_size
                )));
            }
        }
        DistProblem::Stochastic(p) => {
            if p.mode() != Mode::Oblivious {
                return Err(Error::Mode("gradient differences need an oblivious sampling law".into()));
            }
        }
    }
    let start = match &opts.start {
        Some(s) => s.clone(),
        None => crate::solvers::default_start(set)?,
    };
    start.check_dim(d)?;
    if !set.contains(&start) {
        return Err(Error::Infeasible("starting point is outside the feasible set".into()));
    }
    let output_index = match cfg.output {
        OutputRule::UniformRandomIterate if cfg.horizon > 0 => {
            Some(rng.derive(labels::OUTPUT_INDEX).below(cfg.horizon) + 1)
        }
        _ => None,
    };

    let m_count = cfg.workers;
    let mut replicas =
        vec![Replica { x: start.clone(), x_prev: start.clone(), g_bar: Vector::zeros(d) }; m_count];
    let mut ledger = BitLedger::new();
    let mut trace = SolveTrace::new(start.clone());
    trace.output_rule = Some(cfg.output);
    trace.output_index = output_index;
    if opts.keep_iterates {
        trace.iterates.push(start);
    }
    let mut replica_hashes = Vec::with_capacity(cfg.horizon);
    let mut reference_objective = Vec::new();
    let mut calls = 0u64;
    let mut output = None;
    let timer = Instant::now();

    for t in 1..=cfg.horizon {
        let (i, k) = cfg.locate(t);
        let anchor = k == 1;
        let eta = cfg.eta(i, k);
        let batch = cfg.batch_size(i, k);
        if output_index == Some(t) {
            output = Some(replicas[0].x.clone());
        }

        if cfg.mode == LinkMode::Fl {
            let work = |m: usize| -> Result<(Replica, u64)> {
                let mut r = replicas[m].clone();
                let mut wrng = worker_stream(rng, m, t);
                let mut used = 0;
                for _ in 0..cfg.local_steps {
                    r.x_prev = r.x.clone();
                    let (g, c) = local_gradient(problem, cfg, m, &r, batch, true, &mut wrng)?;
                    used += c;
                    let v = set.lmo_min(&g)?;
                    r.x = Vector::from_fn(d, |j| r.x[j] + eta * (v[j] - r.x[j]));
                }
                Ok((r, used))
            };
            let locals: Vec<(Replica, u64)> = if cfg.parallel {
                (0..m_count).into_par_iter().map(work).collect::<Result<_>>()?
            } else {
                (0..m_count).map(work).collect::<Result<_>>()?
            };
            let mut avg = Vector::zeros(d);
            for (m, (r, c)) in locals.iter().enumerate() {
                avg.axpy(1.0, &r.x);
                calls += c;
                ledger.record(t, Direction::Up, Some(m), FLOAT_BITS * d as u64);
            }
            avg.scale(1.0 / m_count as f64);
            ledger.record(t, Direction::Down, None, FLOAT_BITS * d as u64);
            for r in replicas.iter_mut() {
                r.x_prev = std::mem::replace(&mut r.x, avg.clone());
            }
        } else {
            let (s1, s2) = cfg.levels_at(i, k, d);
            let quantized = cfg.mode == LinkMode::Quantized;
            let work = |m: usize| -> Result<Upload> {
                let mut wrng = worker_stream(rng, m, t);
                let (g, c) = local_gradient(problem, cfg, m, &replicas[m], batch, anchor, &mut wrng)?;
                if !g.is_finite() {
                    return Err(Error::NumericalFailure { iteration: t, what: format!("worker {m} gradient") });
                }
                if quantized {
                    let msg = encode_partition(&g, s1, &mut wrng.derive(labels::AUX))?;
                    Ok(Upload { decoded: decode(&msg), bits: msg.bits(), calls: c })
                } else {
                    Ok(Upload { decoded: g, bits: FLOAT_BITS * d as u64, calls: c })
                }
            };
            let uploads: Vec<Upload> = if cfg.parallel {
                (0..m_count).into_par_iter().map(work).collect::<Result<_>>()?
            } else {
                (0..m_count).map(work).collect::<Result<_>>()?
            };
            // master: average in worker order, re-encode, broadcast once
            let mut g_tilde = Vector::zeros(d);
            for (m, u) in uploads.iter().enumerate() {
                g_tilde.axpy(1.0, &u.decoded);
                calls += u.calls;
                ledger.record(t, Direction::Up, Some(m), u.bits);
            }
            g_tilde.scale(1.0 / m_count as f64);
            let broadcast = if quantized {
                let mut mrng = rng.derive(labels::MASTER).derive2(labels::ITERATION, t as u64);
                let msg = encode_partition(&g_tilde, s2, &mut mrng)?;
                ledger.record(t, Direction::Down, None, msg.bits());
                decode(&msg)
            } else {
                ledger.record(t, Direction::Down, None, FLOAT_BITS * d as u64);
                g_tilde
            };
            for r in replicas.iter_mut() {
                r.g_bar = if anchor { broadcast.clone() } else { &broadcast + &r.g_bar };
                let v = set.lmo_min(&r.g_bar)?;
                let next = Vector::from_fn(d, |j| r.x[j] + eta * (v[j] - r.x[j]));
                r.x_prev = std::mem::replace(&mut r.x, next);
            }
        }

        let hash = replicas[0].fingerprint();
        if replicas.iter().any(|r| r.fingerprint() != hash) {
            return Err(Error::ReplicaDivergence(t));
        }
        replica_hashes.push(hash);
        let x = &replicas[0].x;
        if !x.is_finite() {
            return Err(Error::NumericalFailure { iteration: t, what: "non-finite iterate".into() });
        }
        if opts.check_feasibility && !set.contains(x) {
            return Err(Error::Infeasible(format!("iterate {} left the feasible set", t + 1)));
        }
        if opts.keep_iterates {
            trace.iterates.push(x.clone());
        }
        if opts.every > 0 && (t % opts.every == 0 || t == cfg.horizon) {
            let mut rec = IterationRecord {
                t,
                oracle_calls: calls,
                cum_bits: Some(ledger.total()),
                cum_bits_up: Some(ledger.cum_up()),
                cum_bits_down: Some(ledger.cum_down()),
                x_hash: x.fingerprint(),
                ..Default::default()
            };
            if opts.record_objective {
                rec.objective = Some(objective(problem, x, t, opts)?);
            }
            if opts.record_fw_gap {
                if let Some(g) = exact_gradient(problem, x)? {
                    rec.fw_gap = Some(fw_gap(&g, set, x)?);
                }
            }
            if opts.record_est_error && cfg.mode != LinkMode::Fl {
                if let Some(g) = exact_gradient(problem, &replicas[0].x_prev)? {
                    rec.est_error = Some(g.dist_sq(&replicas[0].g_bar));
                }
            }
            if opts.record_wall_time {
                rec.wall_ms = Some(timer.elapsed().as_secs_f64() * 1e3);
            }
            if let Some(p) = reference {
                reference_objective.push(p.exact_value(x));
            }
            trace.records.push(rec);
        }
    }
    trace.output = output.unwrap_or_else(|| replicas[0].x.clone());
    Ok(QfwRun { trace, ledger, replica_hashes, reference_objective })
}

/// `f̂(x) = (1/N) Σ_i f̃(x, z_i)` over fixed samples.
pub struct SurrogateSum {
    problem: Arc<dyn StochasticProblem>,
    samples: Vec<Sample>,
}

impl SurrogateSum {
    pub fn new(problem: Arc<dyn StochasticProblem>, count: usize, at: &Vector, rng: &mut RngStream) -> Result<Self> {
        if problem.mode() != Mode::Oblivious {
            return Err(Error::Mode("the surrogate needs samples independent of x".into()));
        }
        let samples = (0..count).map(|_| problem.sample(at, rng)).collect::<Result<_>>()?;
        Ok(Self { problem, samples })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }
}

impl FiniteSum for SurrogateSum {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn len(&self) -> usize {
        self.samples.len()
    }

    fn component_value(&self, x: &Vector, i: usize) -> Result<f64> {
        self.problem.value(x, &self.samples[i])
    }

    fn component_grad(&self, x: &Vector, i: usize) -> Result<Vector> {
        self.problem.grad(x, &self.samples[i])
    }
}

pub struct SncRun {
    pub run: QfwRun,
    pub surrogate: Arc<SurrogateSum>,
}

/// Samples `T` points, builds the surrogate finite sum and runs QFW on it
/// with `N = T`. `cfg.horizon` is `T` and must be a multiple of `M`.
pub fn run_snc_qfw(
    p: Arc<dyn StochasticProblem>,
    set: &FeasibleSet<f64>,
    cfg: &QfwConfig,
    opts: &SolveOptions,
    rng: &RngStream,
) -> Result<SncRun> {
    let t = cfg.horizon;
    if cfg.workers == 0 || t == 0 || !t.is_multiple_of(cfg.workers) {
        return Err(Error::InvalidParameter(format!(
            "partition mismatch: T = {t} samples over {} workers",
            cfg.workers
        )));
    }
    let start = match &opts.start {
        Some(s) => s.clone(),
        None => crate::solvers::default_start(set)?,
    };
    let surrogate = Arc::new(SurrogateSum::new(p.clone(), t, &start, &mut rng.derive(labels::INSTANCE))?);
    let cfg = QfwConfig { local_size: t / cfg.workers, ..cfg.clone() };
    let run =
        run_qfw_with_reference(DistProblem::Finite(surrogate.as_ref()), Some(p.as_ref()), set, &cfg, opts, rng)?;
    Ok(SncRun { run, surrogate })
}

/// The rate-optimal preset for the stochastic non-convex run with `T` samples.
pub fn snc_config(workers: usize, horizon: usize) -> Result<QfwConfig> {
    if workers == 0 || !horizon.is_multiple_of(workers) {
        return Err(Error::InvalidParameter("T must be a positive multiple of M".into()));
    }
    let mut cfg = super::config::schedule_from_theorem(QfwSetting::StochNonConvex, workers, horizon / workers, horizon, None)?;
    cfg.setting = QfwSetting::StochNonConvex;
    Ok(cfg)
}
