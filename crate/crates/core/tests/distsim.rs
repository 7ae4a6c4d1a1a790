use std::sync::Arc;

use rayon::prelude::*;

use projfree::constraints::FeasibleSet;
use projfree::distsim::{run_snc_qfw, snc_config, SurrogateSum};
use projfree::problems::{FiniteSum, Quadratic, StochasticProblem};
use projfree::solvers::{fw_gap, SolveOptions};
use projfree::{RngStream, Vector};

fn surrogate_grad(s: &SurrogateSum, x: &Vector) -> Vector {
    let mut g = Vector::zeros(x.dim());
    for i in 0..s.len() {
        g.axpy(1.0 / s.len() as f64, &s.component_grad(x, i).unwrap());
    }
    g
}

struct Gaps {
    surrogate: f64,
    transfer: f64,
}

fn snc_gaps(p: &Arc<dyn StochasticProblem>, set: &FeasibleSet<f64>, horizon: usize) -> Gaps {
    let cfg = snc_config(4, horizon).unwrap();
    let runs: Vec<(f64, f64)> = (0..20u64)
        .into_par_iter()
        .map(|s| {
            let snc = run_snc_qfw(p.clone(), set, &cfg, &SolveOptions::quiet(), &RngStream::from_seed(s)).unwrap();
            let x = &snc.run.trace.output;
            let hat = fw_gap(&surrogate_grad(&snc.surrogate, x), set, x).unwrap();
            let exact = fw_gap(&p.exact_grad(x).unwrap(), set, x).unwrap();
            (hat, (exact - hat).abs())
        })
        .collect();
    let n = runs.len() as f64;
    Gaps {
        surrogate: runs.iter().map(|r| r.0).sum::<f64>() / n,
        transfer: runs.iter().map(|r| r.1).sum::<f64>() / n,
    }
}

#[test]
fn surrogate_gap_falls_with_the_sample_count_and_transfers() {
    let d = 6;
    let target = Vector::from_fn(d, |i| 0.8 * ((i as f64) + 1.0).cos());
    let p: Arc<dyn StochasticProblem> = Arc::new(Quadratic::new(target, 0.5, 3.0).unwrap());
    let set = FeasibleSet::l1_ball(d, 1.0).unwrap();
    let (g, diam) = (p.constants().g, set.diameter());

    let mut previous = f64::INFINITY;
    for t in [64, 256, 1024] {
        let gaps = snc_gaps(&p, &set, t);
        assert!(gaps.surrogate < previous, "T = {t}: {} after {previous}", gaps.surrogate);
        previous = gaps.surrogate;
        let bound = g * diam / (t as f64).sqrt() * 1.5;
        assert!(gaps.transfer <= bound, "T = {t}: transfer {} above {bound}", gaps.transfer);
    }
}
