//! Runs a configuration over its seeds and writes one trace per run.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use projfree::constraints::{FeasibleSet, PartitionMatroid, SetKind};
use projfree::distsim::{run_qfw, run_snc_qfw, schedule_from_theorem, DistProblem, LinkMode, QfwConfig, QfwSetting};
use projfree::estimators::VariationOption;
use projfree::problems::{build_problem, ProblemBundle};
use projfree::solvers::{
    bcg, dbg, default_start, deterministic_fw, fw_gap, one_sfw, oblivious_sfw, scg_baseline, BcgConfig, DbgConfig,
    FwStep, IterationRecord, ObjectiveMode, Schedule, SolveOptions, SolveTrace, StepRule,
};
use projfree::{RngStream, Vector};

use crate::config::{Algorithm, ConstraintSpec, DistsimSpec, RunConfig, SolverSpec};
use crate::oracle::{brute_force_opt, MAX_BASES};
use crate::report::{emit_report, Report};
use crate::BenchError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Solve,
    Submax,
    Bcg,
    Dbg,
    Distsim,
}

/// Outcome of one (variant, seed) run; also written as a JSON sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub name: String,
    pub config_hash: String,
    pub variant: String,
    pub seed: u64,
    pub ok: bool,
    pub error: Option<String>,
    pub iterations: usize,
    pub final_objective: Option<f64>,
    pub final_gap: Option<f64>,
    pub opt_ratio: Option<f64>,
    pub cum_bits: Option<u64>,
    pub runtime_ms: f64,
    pub trace_file: Option<String>,
}

/// What a variant changes relative to the base configuration.
#[derive(Clone, Debug)]
enum Variant {
    Base,
    Step { c: f64, a: f64 },
    Link(LinkMode),
}

impl Variant {
    fn label(&self) -> String {
        match self {
            Variant::Base => "base".into(),
            Variant::Step { c, a } => format!("c{c}_a{a:.3}"),
            Variant::Link(m) => match m {
                LinkMode::Quantized => "quantized".into(),
                LinkMode::Unquantized => "unquantized".into(),
                LinkMode::Fl => "fl".into(),
            },
        }
    }
}

/// Everything a run needs, validated up front.
struct Plan {
    cfg: RunConfig,
    command: Command,
    bundle: ProblemBundle,
    set: Option<FeasibleSet<f64>>,
    matroid: Option<PartitionMatroid>,
    opt: Option<f64>,
    variants: Vec<Variant>,
}

fn config_err(e: impl std::fmt::Display) -> BenchError {
    BenchError::Config(e.to_string())
}

fn require<'a, T>(v: &'a Option<T>, what: &str) -> Result<&'a T, BenchError> {
    v.as_ref().ok_or_else(|| BenchError::Config(format!("this command needs a [{what}] block")))
}

fn prepare(cfg: &RunConfig, command: Command) -> Result<Plan, BenchError> {
    let bundle = build_problem(&cfg.problem, &mut RngStream::from_seed(cfg.instance_seed)).map_err(config_err)?;
    let dim = bundle.dim().ok_or_else(|| config_err("the problem has no dimension"))?;
    let constraint: Option<&ConstraintSpec> = cfg.constraint.as_ref();
    let set = constraint.map(|c| c.build(dim)).transpose()?;
    let matroid = match constraint {
        Some(c @ ConstraintSpec::PartitionMatroid { .. }) => Some(c.matroid(dim)?),
        _ => None,
    };
    let mut variants = vec![Variant::Base];
    match command {
        Command::Distsim => {
            let d = require(&cfg.distsim, "distsim")?;
            require(&cfg.constraint, "constraint")?;
            if d.setting.is_finite() {
                let n = bundle.require_finite_sum().map_err(config_err)?.len();
                if n % d.workers != 0 {
                    return Err(config_err(format!("{n} components do not split over {} workers", d.workers)));
                }
            } else {
                bundle.require_stochastic().map_err(config_err)?;
            }
            variants = d.modes.iter().map(|m| Variant::Link(*m)).collect();
        }
        _ => {
            let s = require(&cfg.solver, "solver")?;
            let algorithm = algorithm(s, command);
            let allowed = match command {
                Command::Solve => matches!(algorithm, Algorithm::OneSfw | Algorithm::Oblivious | Algorithm::Scg | Algorithm::Fw),
                Command::Submax => matches!(algorithm, Algorithm::OneSfw | Algorithm::Oblivious | Algorithm::Scg),
                Command::Bcg => algorithm == Algorithm::Bcg,
                Command::Dbg => algorithm == Algorithm::Dbg,
                Command::Distsim => unreachable!(),
            };
            if !allowed {
                return Err(config_err(format!("algorithm {algorithm:?} does not belong to this command")));
            }
            if command == Command::Submax && s.mode.is_some_and(|m| m != ObjectiveMode::DrMax) {
                return Err(config_err("submax runs in dr_max mode"));
            }
            if command == Command::Solve && s.mode == Some(ObjectiveMode::DrMax) {
                return Err(config_err("use the submax command for dr_max"));
            }
            match algorithm {
                Algorithm::Dbg => {
                    bundle.set_function.as_ref().ok_or_else(|| config_err("dbg needs a set-function problem"))?;
                    if matroid.is_none() {
                        return Err(config_err("dbg needs a partition_matroid constraint"));
                    }
                }
                Algorithm::Bcg => {
                    bundle.value_oracle.as_ref().ok_or_else(|| config_err("bcg needs a value oracle"))?;
                    require(&cfg.constraint, "constraint")?;
                }
                Algorithm::Fw => {
                    require(&cfg.constraint, "constraint")?;
                    if bundle.finite_sum.is_none()
                        && bundle.stochastic.as_ref().and_then(|p| p.exact_grad(&Vector::zeros(dim))).is_none()
                    {
                        return Err(config_err("fw needs exact gradients"));
                    }
                }
                _ => {
                    bundle.require_stochastic().map_err(config_err)?;
                    require(&cfg.constraint, "constraint")?;
                }
            }
            if let Some(sweep) = &cfg.sweep {
                if matches!(algorithm, Algorithm::Bcg | Algorithm::Dbg) {
                    return Err(config_err("step-size sweeps apply to the stochastic Frank-Wolfe solvers"));
                }
                variants = sweep.grid().into_iter().map(|(c, a)| Variant::Step { c, a }).collect();
            }
        }
    }
    let opt = match (&bundle.set_function, &matroid) {
        (Some(f), Some(m)) if m.base_count() <= MAX_BASES && command != Command::Solve => {
            Some(brute_force_opt(f.as_ref(), m).map_err(config_err)?.0)
        }
        _ => None,
    };
    Ok(Plan { cfg: cfg.clone(), command, bundle, set, matroid, opt, variants })
}

fn algorithm(s: &SolverSpec, command: Command) -> Algorithm {
    s.algorithm.unwrap_or(match command {
        Command::Bcg => Algorithm::Bcg,
        Command::Dbg => Algorithm::Dbg,
        _ => Algorithm::OneSfw,
    })
}

fn solve_options(s: &SolverSpec) -> projfree::Result<SolveOptions> {
    let mut o = SolveOptions { start: s.start.clone().map(Vector::new).transpose()?, ..SolveOptions::default() };
    if let Some(e) = s.every {
        o.every = e;
    }
    if let Some(d) = s.grad_diff_delta {
        o.grad_diff_delta = d;
    }
    if let Some(m) = s.mc_objective_samples {
        o.mc_objective_samples = m;
    }
    o.record_wall_time = s.record_wall_time;
    Ok(o)
}

fn schedule(s: &SolverSpec, command: Command, step: Option<StepRule>) -> Schedule {
    let mode = if command == Command::Submax { ObjectiveMode::DrMax } else { s.mode.unwrap_or(ObjectiveMode::ConvexMin) };
    let mut sched = if algorithm(s, command) == Algorithm::Scg {
        Schedule::scg(mode, s.horizon)
    } else {
        Schedule::preset(mode, s.horizon)
    };
    if let Some(e) = s.eta {
        sched.eta = e;
    }
    if let Some(r) = s.rho {
        sched.rho = r;
    }
    if let Some(o) = s.output {
        sched.output = o;
    }
    if let Some(e) = step {
        sched.eta = e;
    }
    sched
}

/// A finished run: the trace and the headline numbers.
struct Finished {
    trace: SolveTrace,
    distsim: bool,
    final_objective: Option<f64>,
    final_gap: Option<f64>,
}

fn run_one(plan: &Plan, variant: &Variant, seed: u64) -> projfree::Result<Finished> {
    let rng = RngStream::from_seed(seed);
    match plan.command {
        Command::Distsim => run_distsim(plan, variant, &rng),
        _ => {
            let s = plan.cfg.solver.as_ref().expect("validated");
            let step = match variant {
                Variant::Step { c, a } => Some(StepRule::Grid { c: *c, a: *a }),
                _ => None,
            };
            let sched = schedule(s, plan.command, step);
            let opts = solve_options(s)?;
            let option = s.option.unwrap_or(VariationOption::ExactHessian);
            let trace = match algorithm(s, plan.command) {
                Algorithm::OneSfw => {
                    one_sfw(plan.bundle.require_stochastic()?.as_ref(), set(plan), &sched, option, &opts, &rng)?
                }
                Algorithm::Oblivious => {
                    oblivious_sfw(plan.bundle.require_stochastic()?.as_ref(), set(plan), &sched, &opts, &rng)?
                }
                Algorithm::Scg => {
                    scg_baseline(plan.bundle.require_stochastic()?.as_ref(), set(plan), &sched, &opts, &rng)?
                }
                Algorithm::Fw => run_fw(plan, s, &opts)?,
                Algorithm::Bcg => run_bcg(plan, s, &rng)?,
                Algorithm::Dbg => run_dbg(plan, s, &rng)?,
            };
            let last = trace.last();
            Ok(Finished {
                final_objective: last.and_then(|r| r.objective),
                final_gap: last.and_then(|r| r.fw_gap),
                trace,
                distsim: false,
            })
        }
    }
}

fn set(plan: &Plan) -> &FeasibleSet<f64> {
    plan.set.as_ref().expect("validated")
}

fn run_fw(plan: &Plan, s: &SolverSpec, opts: &SolveOptions) -> projfree::Result<SolveTrace> {
    let set = set(plan);
    let start = match &opts.start {
        Some(x) => x.clone(),
        None => default_start(set)?,
    };
    let value: Box<dyn Fn(&Vector) -> f64> = match (&plan.bundle.finite_sum, &plan.bundle.stochastic) {
        (Some(f), _) => {
            let f = f.clone();
            Box::new(move |x| f.value(x).unwrap_or(f64::NAN))
        }
        (None, Some(p)) => {
            let p = p.clone();
            Box::new(move |x| p.exact_value(x).unwrap_or(f64::NAN))
        }
        _ => unreachable!("validated"),
    };
    let grad: Box<dyn Fn(&Vector) -> Vector> = match (&plan.bundle.finite_sum, &plan.bundle.stochastic) {
        (Some(f), _) => {
            let f = f.clone();
            Box::new(move |x| f.full_grad(x).unwrap_or_else(|_| Vector::filled(x.dim(), f64::NAN)))
        }
        (None, Some(p)) => {
            let p = p.clone();
            Box::new(move |x| p.exact_grad(x).unwrap_or_else(|| Vector::filled(x.dim(), f64::NAN)))
        }
        _ => unreachable!("validated"),
    };
    let res = deterministic_fw(&*value, &*grad, set, &start, s.horizon, FwStep::TwoOverKPlusTwo)?;
    let mut trace = SolveTrace::new(res.x.clone());
    let every = opts.every.max(1);
    for t in 1..=s.horizon {
        if t % every != 0 && t != s.horizon {
            continue;
        }
        // values[k] and gaps[k] describe x_{k+1}; row t describes x_{t+1}
        let objective = match res.values.get(t) {
            Some(v) => Some(*v),
            None => Some(value(&res.x)),
        };
        let gap = match res.gaps.get(t) {
            Some(g) => Some(*g),
            None if t == s.horizon => Some(fw_gap(&grad(&res.x), set, &res.x)?),
            None => None,
        };
        trace.records.push(IterationRecord {
            t,
            objective,
            fw_gap: gap,
            oracle_calls: t as u64,
            ..Default::default()
        });
    }
    Ok(trace)
}

fn run_bcg(plan: &Plan, s: &SolverSpec, rng: &RngStream) -> projfree::Result<SolveTrace> {
    let oracle = plan.bundle.value_oracle.as_ref().expect("validated");
    let set = set(plan);
    let upper: Vec<f64> = match set.kind() {
        SetKind::Box { upper, .. } => upper.clone(),
        _ => vec![1.0; set.dim()],
    };
    let mut cfg = BcgConfig::new(s.horizon, s.delta.unwrap_or(0.05));
    cfg.batch = s.batch;
    cfg.keep_iterates = true;
    if let Some(r) = s.rho {
        cfg.rho = r;
    }
    let res = bcg(oracle.as_ref(), set, &upper, &cfg, rng)?;
    let batch = s.batch.unwrap_or(set.dim()) as u64;
    let shift = Vector::filled(set.dim(), cfg.delta);
    let every = s.every.unwrap_or(1).max(1);
    let mut trace = SolveTrace::new(res.output.clone());
    for t in 1..=s.horizon {
        if t % every != 0 && t != s.horizon {
            continue;
        }
        let x = &res.iterates[t] + &shift;
        let objective = match oracle.exact_value(&x) {
            Some(v) => v,
            None => oracle.value(&x, &mut RngStream::new(projfree::solvers::LOGGING_SEED, t as u64))?,
        };
        trace.records.push(IterationRecord {
            t,
            objective: Some(objective),
            oracle_calls: 2 * batch * t as u64,
            x_hash: x.fingerprint(),
            ..Default::default()
        });
    }
    Ok(trace)
}

fn run_dbg(plan: &Plan, s: &SolverSpec, rng: &RngStream) -> projfree::Result<SolveTrace> {
    let f = plan.bundle.set_function.as_ref().expect("validated").clone();
    let m = plan.matroid.as_ref().expect("validated");
    let mut cfg = DbgConfig::new(s.horizon, s.delta.unwrap_or(0.05), s.samples.unwrap_or(20));
    if let Some(b) = s.batch {
        cfg.batch = b;
    }
    let res = dbg(f, m, &cfg, rng)?;
    let x = Vector::from_fn(res.set.len(), |i| if res.set[i] { 1.0 } else { 0.0 });
    let mut trace = SolveTrace::new(x.clone());
    // one row: the rounded set after all T iterations
    trace.records.push(IterationRecord {
        t: s.horizon,
        objective: Some(res.value),
        oracle_calls: 2 * (cfg.batch * cfg.samples * s.horizon) as u64,
        x_hash: x.fingerprint(),
        ..Default::default()
    });
    Ok(trace)
}

fn qfw_config(d: &DistsimSpec, n: usize, mode: LinkMode) -> projfree::Result<QfwConfig> {
    let mut q = schedule_from_theorem(d.setting, d.workers, n, d.horizon, d.noise)?;
    q.mode = mode;
    q.parallel = d.parallel;
    if let Some(v) = d.levels {
        q.levels = v;
    }
    if let Some(v) = d.period {
        q.period = v;
    }
    if let Some(v) = d.batch {
        q.batch = v;
    }
    if let Some(v) = d.anchor_batch {
        q.anchor_batch = v;
    }
    if let Some(v) = d.step {
        q.step = v;
    }
    if let Some(v) = d.output {
        q.output = v;
    }
    if let Some(v) = d.local_steps {
        q.local_steps = v;
    }
    Ok(q)
}

fn run_distsim(plan: &Plan, variant: &Variant, rng: &RngStream) -> projfree::Result<Finished> {
    let d = plan.cfg.distsim.as_ref().expect("validated");
    let mode = match variant {
        Variant::Link(m) => *m,
        _ => LinkMode::Quantized,
    };
    let opts = plan.cfg.solver.as_ref().map(solve_options).transpose()?.unwrap_or_default();
    let set = set(plan);
    let run = if d.setting.is_finite() {
        let f = plan.bundle.require_finite_sum()?;
        let cfg = qfw_config(d, f.len() / d.workers, mode)?;
        run_qfw(DistProblem::Finite(f.as_ref()), set, &cfg, &opts, rng)?
    } else if d.setting == QfwSetting::StochNonConvex {
        let p = plan.bundle.require_stochastic()?;
        let cfg = qfw_config(d, d.horizon / d.workers.max(1), mode)?;
        run_snc_qfw(p.clone(), set, &cfg, &opts, rng)?.run
    } else {
        let p = plan.bundle.require_stochastic()?;
        let cfg = qfw_config(d, 0, mode)?;
        run_qfw(DistProblem::Stochastic(p.as_ref()), set, &cfg, &opts, rng)?
    };
    let last = run.trace.last();
    Ok(Finished {
        final_objective: last.and_then(|r| r.objective),
        final_gap: last.and_then(|r| r.fw_gap),
        trace: run.trace,
        distsim: true,
    })
}

fn file_stem(variants: usize, variant: &str, seed: u64) -> String {
    if variants == 1 {
        format!("seed-{seed}")
    } else {
        format!("{variant}-seed-{seed}")
    }
}

fn execute(plan: &Plan, variant: &Variant, seed: u64, dir: &Path) -> (RunRecord, Option<SolveTrace>) {
    let label = variant.label();
    let stem = file_stem(plan.variants.len(), &label, seed);
    let started = Instant::now();
    let outcome = run_one(plan, variant, seed);
    let runtime_ms = started.elapsed().as_secs_f64() * 1e3;
    let mut record = RunRecord {
        name: plan.cfg.name.clone(),
        config_hash: plan.cfg.hash(),
        variant: label,
        seed,
        ok: false,
        error: None,
        iterations: 0,
        final_objective: None,
        final_gap: None,
        opt_ratio: None,
        cum_bits: None,
        runtime_ms,
        trace_file: None,
    };
    let trace = match outcome {
        Ok(done) => {
            let file = format!("{stem}.csv");
            let written = fs::File::create(dir.join(&file))
                .map_err(projfree::Error::from)
                .and_then(|fh| done.trace.write_csv(std::io::BufWriter::new(fh), done.distsim));
            match written {
                Ok(()) => {
                    record.ok = true;
                    record.trace_file = Some(file);
                }
                Err(e) => record.error = Some(e.to_string()),
            }
            record.iterations = done.trace.records.last().map_or(0, |r| r.t);
            record.final_objective = done.final_objective;
            record.final_gap = done.final_gap;
            record.cum_bits = done.trace.last().and_then(|r| r.cum_bits);
            record.opt_ratio = match (plan.opt, done.final_objective) {
                (Some(opt), Some(v)) if opt > 0.0 => Some(v / opt),
                _ => None,
            };
            Some(done.trace)
        }
        Err(e) => {
            record.error = Some(e.to_string());
            None
        }
    };
    if let Ok(json) = serde_json::to_string_pretty(&record) {
        let _ = fs::write(dir.join(format!("{stem}.json")), json);
    }
    (record, trace)
}

/// Runs every (variant, seed) pair in parallel, then writes the report.
/// A failing seed is recorded and never stops the others.
pub fn run_experiment(cfg: &RunConfig, command: Command) -> Result<Report, BenchError> {
    cfg.validate()?;
    let plan = prepare(cfg, command)?;
    let dir = cfg.out_dir();
    fs::create_dir_all(&dir).map_err(|e| BenchError::Io(format!("{}: {e}", dir.display())))?;
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(cfg).expect("config serializes"))
        .map_err(|e| BenchError::Io(e.to_string()))?;
    let jobs: Vec<(usize, u64)> =
        (0..plan.variants.len()).flat_map(|v| cfg.seeds.iter().map(move |&s| (v, s))).collect();
    let results: Vec<(RunRecord, Option<SolveTrace>)> =
        jobs.par_iter().map(|&(v, s)| execute(&plan, &plan.variants[v], s, &dir)).collect();
    let (records, traces): (Vec<RunRecord>, Vec<Option<SolveTrace>>) = results.into_iter().unzip();
    emit_report(&dir, &records, &traces, command == Command::Distsim)
}

/// The bundle's set function must exist and the constraint must be a matroid.
pub fn oracle_opt(cfg: &RunConfig) -> Result<(f64, Vec<bool>), BenchError> {
    let bundle = build_problem(&cfg.problem, &mut RngStream::from_seed(cfg.instance_seed)).map_err(config_err)?;
    let f = bundle.set_function.ok_or_else(|| config_err("oracle needs a set-function problem"))?;
    let c = require(&cfg.constraint, "constraint")?;
    let m = c.matroid(f.ground_size())?;
    Ok(brute_force_opt(f.as_ref(), &m)?)
}
