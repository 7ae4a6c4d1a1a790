use std::sync::Arc;

use rayon::prelude::*;

use projfree::constraints::{FeasibleSet, PartitionMatroid};
use projfree::estimators::VariationOption;
use projfree::problems::{ComponentMultilinear, Coverage, LogisticL1, Quadratic, SetFunction, StochasticProblem};
use projfree::solvers::{
    default_start, deterministic_fw, one_sfw, scg_baseline, FwStep, ObjectiveMode, Schedule, SolveOptions, StepRule,
};
use projfree::{RngStream, Vector};

const ONE_MINUS_INV_E: f64 = 1.0 - 1.0 / std::f64::consts::E;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

// best base by enumeration, written independently of the bench oracle
fn opt_over_bases(f: &dyn SetFunction, m: &PartitionMatroid) -> f64 {
    let d = f.ground_size();
    (0..1usize << d)
        .map(|mask| (0..d).map(|i| mask >> i & 1 == 1).collect::<Vec<_>>())
        .filter(|s| m.is_base(s))
        .map(|s| f.eval(&s))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn frank_wolfe_reaches_the_simplex_centroid() {
    let set = FeasibleSet::simplex(4, 1.0).unwrap();
    let value = |x: &Vector| 0.5 * x.norm_sq();
    let grad = |x: &Vector| x.clone();
    let res = deterministic_fw(&value, &grad, &set, &Vector::basis(4, 0), 100, FwStep::TwoOverKPlusTwo).unwrap();
    assert!(value(&res.x) - 1.0 / 8.0 <= 0.02);
    assert!(res.values.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn logistic_suboptimality_shrinks_with_the_horizon() {
    let data = LogisticL1::random(20, 5, &mut RngStream::from_seed(77)).unwrap();
    let p = data.into_problem(1.0);
    let set = FeasibleSet::l1_ball(5, 1.0).unwrap();
    let value = |x: &Vector| p.exact_value(x).unwrap();
    let grad = |x: &Vector| p.exact_grad(x).unwrap();
    let reference = deterministic_fw(&value, &grad, &set, &Vector::zeros(5), 200_000, FwStep::TwoOverKPlusTwo).unwrap();
    let f_star = value(&reference.x).min(reference.values.iter().cloned().fold(f64::INFINITY, f64::min));

    let subopt = |t: usize| {
        let v: Vec<f64> = (0..20u64)
            .into_par_iter()
            .map(|s| {
                let tr = one_sfw(&p, &set, &Schedule::convex_min(t), VariationOption::ExactHessian, &SolveOptions::quiet(), &RngStream::from_seed(s))
                    .unwrap();
                value(&tr.output) - f_star
            })
            .collect();
        mean(&v)
    };
    let (short, long) = (subopt(256), subopt(4096));
    assert!(long > -1e-9);
    assert!(short / long >= 3.0, "{short:.3e} / {long:.3e}");
}

fn coverage_instance() -> (ComponentMultilinear, FeasibleSet<f64>, f64) {
    let f = Arc::new(Coverage::random(8, 6, &mut RngStream::from_seed(88)).unwrap());
    let m = PartitionMatroid::contiguous(&[4, 4], vec![2, 2]).unwrap();
    let opt = opt_over_bases(f.as_ref(), &m);
    (ComponentMultilinear::new("coverage", f).unwrap(), FeasibleSet::partition_matroid(m), opt)
}

#[test]
fn dr_mode_meets_the_greedy_bound_on_coverage() {
    let (p, set, opt) = coverage_instance();
    let values: Vec<f64> = (0..30u64)
        .into_par_iter()
        .map(|s| {
            let tr = one_sfw(&p, &set, &Schedule::dr_max(1000), VariationOption::ExactHessian, &SolveOptions::quiet(), &RngStream::from_seed(s))
                .unwrap();
            p.exact_value(&tr.output).unwrap()
        })
        .collect();
    let target = (ONE_MINUS_INV_E - 0.05) * opt;
    let hits = values.iter().filter(|&&v| v >= target).count();
    assert!(hits * 10 >= 9 * values.len(), "{hits}/30 above {target}");
}

#[test]
fn momentum_baseline_is_not_better_than_one_sample() {
    let (p, set, _) = coverage_instance();
    let run = |scg: bool| {
        let v: Vec<f64> = (0..50u64)
            .into_par_iter()
            .map(|s| {
                let rng = RngStream::from_seed(s);
                let tr = if scg {
                    scg_baseline(&p, &set, &Schedule::scg(ObjectiveMode::DrMax, 500), &SolveOptions::quiet(), &rng)
                } else {
                    one_sfw(&p, &set, &Schedule::dr_max(500), VariationOption::ExactHessian, &SolveOptions::quiet(), &rng)
                }
                .unwrap();
                p.exact_value(&tr.output).unwrap()
            })
            .collect();
        mean(&v)
    };
    let (scg, sfw) = (run(true), run(false));
    assert!(scg <= sfw + 0.02, "scg {scg} vs one-sample {sfw}");
}

#[test]
fn noiseless_momentum_baseline_tracks_deterministic_fw() {
    let d = 6;
    let target = Vector::from_fn(d, |i| if i % 2 == 0 { 0.9 } else { -0.4 });
    let p = Quadratic::new(target, 0.0, 3.0).unwrap();
    let set = FeasibleSet::l1_ball(d, 1.0).unwrap();
    let start = default_start(&set).unwrap();
    let opts = SolveOptions { start: Some(start.clone()), ..SolveOptions::quiet() };
    let tr = scg_baseline(&p, &set, &Schedule::scg(ObjectiveMode::ConvexMin, 1000), &opts, &RngStream::from_seed(1)).unwrap();

    let value = |x: &Vector| p.exact_value(x).unwrap();
    let grad = |x: &Vector| p.exact_grad(x).unwrap();
    let fw = deterministic_fw(&value, &grad, &set, &start, 1000, FwStep::Rule(StepRule::InverseT)).unwrap();
    assert!((value(&tr.output) - value(&fw.x)).abs() <= 1e-3, "{} vs {}", value(&tr.output), value(&fw.x));
}
