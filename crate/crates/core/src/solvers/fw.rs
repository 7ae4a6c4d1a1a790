use super::schedule::StepRule;
use crate::constraints::FeasibleSet;
use crate::error::{Error, Result};
use crate::Vector;

/// Membership slack for the gap computation.
const GAP_TOL: f64 = 1e-9;

/// Frank-Wolfe gap `max_{v ∈ K} ⟨x − v, ∇F(x)⟩ = ⟨x − v*, grad⟩`.
pub fn fw_gap(grad: &Vector, set: &FeasibleSet<f64>, x: &Vector) -> Result<f64> {
    grad.check_dim(set.dim())?;
    x.check_dim(set.dim())?;
    if !set.contains_tol(x, GAP_TOL) {
        return Err(Error::Infeasible("fw_gap needs a feasible point".into()));
    }
    let v = set.lmo_min(grad)?;
    Ok((x - &v).dot(grad))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FwStep {
    /// `2/(k+2)` for `k = 0, 1, …`
    TwoOverKPlusTwo,
    Fixed(f64),
    /// `η_{k+1}` of a stochastic schedule's rule over the same horizon
    Rule(StepRule),
}

/// Full-gradient Frank-Wolfe on a smooth objective.
pub struct FwResult {
    pub x: Vector,
    pub gaps: Vec<f64>,
    pub values: Vec<f64>,
}

/// Runs `iterations` steps of deterministic Frank-Wolfe from `start`.
/// `gaps[k]` and `values[k]` are taken at the k-th iterate before its step.
pub fn deterministic_fw(
    value: &dyn Fn(&Vector) -> f64,
    grad: &dyn Fn(&Vector) -> Vector,
    set: &FeasibleSet<f64>,
    start: &Vector,
    iterations: usize,
    step: FwStep,
) -> Result<FwResult> {
    if !set.contains_tol(start, GAP_TOL) {
        return Err(Error::Infeasible("starting point is outside the feasible set".into()));
    }
    let mut x = start.clone();
    let mut gaps = Vec::with_capacity(iterations);
    let mut values = Vec::with_capacity(iterations);
    for k in 0..iterations {
        let g = grad(&x);
        if !g.is_finite() {
            return Err(Error::NumericalFailure { iteration: k + 1, what: "non-finite gradient".into() });
        }
        let v = set.lmo_min(&g)?;
        gaps.push((&x - &v).dot(&g));
        values.push(value(&x));
        let eta = match step {
            FwStep::TwoOverKPlusTwo => 2.0 / (k as f64 + 2.0),
            FwStep::Fixed(e) => e,
            FwStep::Rule(r) => r.eta(k + 1, iterations),
        };
        x = Vector::from_fn(x.dim(), |i| x[i] + eta * (v[i] - x[i]));
    }
    Ok(FwResult { x, gaps, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Vector {
        Vector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn gap_on_simplex() {
        let set = FeasibleSet::simplex(3, 1.0).unwrap();
        let x = v(&[1.0 / 3.0; 3]);
        let g = v(&[1.0, 2.0, 3.0]);
        // ⟨x, g⟩ = 2, best vertex value 1
        assert!((fw_gap(&g, &set, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(fw_gap(&g, &set, &v(&[1.0, 1.0, 0.0])), Err(Error::Infeasible(_))));
    }

    #[test]
    fn gap_vanishes_at_constrained_minimizer() {
        // min ½‖x − c‖² over the ℓ1 ball with c outside: projection is a vertex here
        let set = FeasibleSet::l1_ball(2, 1.0).unwrap();
        let c = v(&[3.0, 0.0]);
        let x = v(&[1.0, 0.0]);
        let g = &x - &c;
        assert!(fw_gap(&g, &set, &x).unwrap().abs() < 1e-12);
    }

    #[test]
    fn fw_converges_on_quadratic() {
        let set = FeasibleSet::l1_ball(3, 1.0).unwrap();
        let c = v(&[0.2, -0.3, 0.1]);
        let cc = c.clone();
        let res = deterministic_fw(
            &|x: &Vector| 0.5 * x.dist_sq(&cc),
            &|x: &Vector| x - &c,
            &set,
            &Vector::zeros(3),
            2000,
            FwStep::TwoOverKPlusTwo,
        )
        .unwrap();
        assert!(res.x.dist_sq(&c) < 1e-5);
        assert!(*res.gaps.last().unwrap() < 1e-2);
        assert_eq!(res.values.len(), 2000);
    }

    #[test]
    fn gap_examples() {
        let set = FeasibleSet::boxed(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let x = Vector::zeros(2);
        assert_eq!(fw_gap(&Vector::zeros(2), &set, &x).unwrap(), 0.0);
        assert!((fw_gap(&v(&[1.0, 0.0]), &set, &x).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn simplex_centroid() {
        let d = 4;
        let set = FeasibleSet::simplex(d, 1.0).unwrap();
        let res = deterministic_fw(
            &|x: &Vector| 0.5 * x.norm_sq(),
            &|x: &Vector| x.clone(),
            &set,
            &Vector::basis(d, 0),
            100,
            FwStep::TwoOverKPlusTwo,
        )
        .unwrap();
        let f = 0.5 * res.x.norm_sq();
        assert!(f - 0.5 / d as f64 <= 0.02);
        assert!(f >= 0.5 / d as f64 - 1e-12);
    }

    #[test]
    fn linear_objective_one_step() {
        let set = FeasibleSet::simplex(3, 1.0).unwrap();
        let c = v(&[0.3, -1.0, 0.2]);
        let res =
            deterministic_fw(&|x: &Vector| x.dot(&c), &|_: &Vector| c.clone(), &set, &v(&[1.0, 0.0, 0.0]), 1, FwStep::TwoOverKPlusTwo)
                .unwrap();
        assert_eq!(res.x, v(&[0.0, 1.0, 0.0]));
    }

    #[test]
    fn zero_iterations_return_start() {
        let set = FeasibleSet::unit_box(2).unwrap();
        let start = v(&[0.25, 0.5]);
        let res = deterministic_fw(&|_: &Vector| 0.0, &|x: &Vector| x.clone(), &set, &start, 0, FwStep::Fixed(0.5)).unwrap();
        assert_eq!(res.x, start);
        assert!(res.gaps.is_empty());
    }

    #[test]
    fn values_decrease_on_strongly_convex() {
        let set = FeasibleSet::boxed(vec![0.0; 3], vec![1.0; 3]).unwrap();
        let c = v(&[0.3, 0.6, 0.9]);
        let cc = c.clone();
        let res = deterministic_fw(
            &|x: &Vector| 0.5 * x.dist_sq(&cc),
            &|x: &Vector| x - &c,
            &set,
            &Vector::zeros(3),
            200,
            FwStep::TwoOverKPlusTwo,
        )
        .unwrap();
        assert!(res.gaps.iter().all(|&g| g >= -1e-12));
        assert!(res.values[199] < res.values[2]);
    }
}
