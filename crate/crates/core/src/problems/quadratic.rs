use std::sync::Arc;

use super::stochastic::{
    Capabilities, ComponentHessian, Constants, FiniteSum, FiniteSumProblem, Mode, Sample, StochasticProblem,
};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::{Matrix, Vector};

/// Gaussian tail multiplier used when bounding noisy gradients.
const NOISE_SIGMAS: f64 = 3.0;

/// `F(x) = ½‖x − x*‖²` observed through `∇F̃(x; z) = (x − x*) + z`,
/// `z ∼ N(0, σ²I)`.
#[derive(Clone, Debug)]
pub struct Quadratic {
    target: Vector,
    sigma: f64,
    constants: Constants,
}

impl Quadratic {
    /// `radius` bounds `‖x − x*‖` over the feasible set and is only used
    /// for the regularity constants.
    pub fn new(target: Vector, sigma: f64, radius: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!("noise level must be non-negative, got {sigma}")));
        }
        let noise = sigma * ((target.dim() as f64).sqrt() + NOISE_SIGMAS);
        let constants = Constants {
            b: 0.5 * radius * radius + radius * noise,
            g: radius + noise,
            l: 1.0,
            l2: 0.0,
            estimated: sigma > 0.0,
        };
        Ok(Self { target, sigma, constants })
    }

    pub fn target(&self) -> &Vector {
        &self.target
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl StochasticProblem for Quadratic {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn dim(&self) -> usize {
        self.target.dim()
    }

    fn mode(&self) -> Mode {
        Mode::Oblivious
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { value: true, gradient: true, hessian_vec: true, exact_reference: true, ..Default::default() }
    }

    fn constants(&self) -> Constants {
        self.constants
    }

    fn sample(&self, x: &Vector, rng: &mut RngStream) -> Result<Sample> {
        x.check_dim(self.dim())?;
        let z = Vector::from_fn(self.dim(), |_| if self.sigma > 0.0 { self.sigma * rng.normal() } else { 0.0 });
        Ok(Sample::noise(z))
    }

    fn value(&self, x: &Vector, z: &Sample) -> Result<f64> {
        x.check_dim(self.dim())?;
        let r = x - &self.target;
        Ok(0.5 * r.norm_sq() + z.expect_noise()?.dot(&r))
    }

    fn grad(&self, x: &Vector, z: &Sample) -> Result<Vector> {
        x.check_dim(self.dim())?;
        Ok(&(x - &self.target) + z.expect_noise()?)
    }

    fn hess_vec(&self, _x: &Vector, _z: &Sample, u: &Vector) -> Result<Vector> {
        u.check_dim(self.dim())?;
        Ok(u.clone())
    }

    fn exact_value(&self, x: &Vector) -> Option<f64> {
        Some(0.5 * x.dist_sq(&self.target))
    }

    fn exact_grad(&self, x: &Vector) -> Option<Vector> {
        Some(x - &self.target)
    }
}

/// `f(x) = (1/N) Σ_i ½ w_i ‖x − c_i‖²`
#[derive(Clone, Debug)]
pub struct QuadraticSum {
    centers: Vec<Vector>,
    weights: Vec<f64>,
}

impl QuadraticSum {
    pub fn new(centers: Vec<Vector>, weights: Vec<f64>) -> Result<Self> {
        if centers.is_empty() || centers.len() != weights.len() {
            return Err(Error::InvalidParameter("need one weight per center".into()));
        }
        let d = centers[0].dim();
        for c in &centers {
            c.check_dim(d)?;
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidParameter("weights must be positive".into()));
        }
        Ok(Self { centers, weights })
    }

    /// Centers `N(0, I)`, weights uniform on `[0.5, 1.5)`.
    pub fn random(n: usize, d: usize, rng: &mut RngStream) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidParameter("quadratic sum needs n, d ≥ 1".into()));
        }
        let centers = (0..n).map(|_| Vector::from_fn(d, |_| rng.normal())).collect();
        let weights = (0..n).map(|_| rng.uniform_range(0.5, 1.5)).collect();
        Self::new(centers, weights)
    }

    /// Oblivious stochastic view; `radius` bounds `‖x‖` over the feasible set.
    pub fn into_problem(self, radius: f64) -> FiniteSumProblem {
        let wmax = self.weights.iter().fold(0.0f64, |m, w| m.max(*w));
        let cmax = self.centers.iter().fold(0.0f64, |m, c| m.max(c.norm_l2()));
        let r = radius + cmax;
        let constants = Constants { b: 0.5 * wmax * r * r, g: wmax * r, l: wmax, l2: 0.0, estimated: false };
        let me = Arc::new(self);
        FiniteSumProblem::new("quadratic_sum", me.clone(), constants).with_hessian(me)
    }
}

impl FiniteSum for QuadraticSum {
    fn dim(&self) -> usize {
        self.centers[0].dim()
    }

    fn len(&self) -> usize {
        self.centers.len()
    }

    fn component_value(&self, x: &Vector, i: usize) -> Result<f64> {
        x.check_dim(self.dim())?;
        Ok(0.5 * self.weights[i] * x.dist_sq(&self.centers[i]))
    }

    fn component_grad(&self, x: &Vector, i: usize) -> Result<Vector> {
        x.check_dim(self.dim())?;
        Ok((x - &self.centers[i]).scaled(self.weights[i]))
    }
}

impl ComponentHessian for QuadraticSum {
    fn component_hess_vec(&self, _x: &Vector, i: usize, u: &Vector) -> Result<Vector> {
        Ok(u.scaled(self.weights[i]))
    }
}

/// Non-convex quadratic `F(x) = ½xᵀHx + bᵀx` with entrywise non-positive
/// `H`, observed with additive gradient noise `z ∼ N(0, σ²I)`.
#[derive(Clone, Debug)]
pub struct Nqp {
    h: Matrix,
    b: Vector,
    sigma: f64,
    constants: Constants,
}

impl Nqp {
    /// `box_upper` bounds the domain `∏[0, u_i]` used for the constants.
    pub fn new(h: Matrix, b: Vector, sigma: f64, box_upper: &[f64]) -> Result<Self> {
        let d = b.dim();
        if h.rows() != d || h.cols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: h.rows() });
        }
        if let Some(v) = h.as_slice().iter().find(|v| **v > 0.0) {
            return Err(Error::InvalidParameter(format!("NQP matrix must be entrywise non-positive, found {v}")));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!("noise level must be non-negative, got {sigma}")));
        }
        if box_upper.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: box_upper.len() });
        }
        let sym = Matrix::from_fn(d, d, |i, j| 0.5 * (h.get(i, j) + h.get(j, i)));
        let hnorm = sym.symmetric_spectral_norm();
        let r = box_upper.iter().map(|u| u * u).sum::<f64>().sqrt();
        let noise = sigma * ((d as f64).sqrt() + NOISE_SIGMAS);
        let constants = Constants {
            b: 0.5 * hnorm * r * r + b.norm_l2() * r + noise * r,
            g: hnorm * r + b.norm_l2() + noise,
            l: hnorm,
            l2: 0.0,
            estimated: sigma > 0.0,
        };
        Ok(Self { h: sym, b, sigma, constants })
    }

    /// `H_ij = −|N(0,1)|` symmetrized, `b = −Hᵀu`.
    pub fn random(d: usize, sigma: f64, box_upper: &[f64], rng: &mut RngStream) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("NQP needs d ≥ 1".into()));
        }
        let raw = Matrix::from_fn(d, d, |_, _| -rng.normal().abs());
        let h = Matrix::from_fn(d, d, |i, j| 0.5 * (raw.get(i, j) + raw.get(j, i)));
        let b = Vector::new(h.transpose_matvec(box_upper).into_iter().map(|v| -v).collect())?;
        Self::new(h, b, sigma, box_upper)
    }

    pub fn h(&self) -> &Matrix {
        &self.h
    }

    pub fn b(&self) -> &Vector {
        &self.b
    }

    pub fn value_at(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&Vector::from_vec_unchecked(self.h.matvec(x.as_slice()))) + self.b.dot(x)
    }

    pub fn grad_at(&self, x: &Vector) -> Vector {
        &Vector::from_vec_unchecked(self.h.matvec(x.as_slice())) + &self.b
    }
}

impl StochasticProblem for Nqp {
    fn name(&self) -> &str {
        "nqp"
    }

    fn dim(&self) -> usize {
        self.b.dim()
    }

    fn mode(&self) -> Mode {
        Mode::Oblivious
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { value: true, gradient: true, hessian_vec: true, exact_reference: true, ..Default::default() }
    }

    fn constants(&self) -> Constants {
        self.constants
    }

    fn sample(&self, x: &Vector, rng: &mut RngStream) -> Result<Sample> {
        x.check_dim(self.dim())?;
        let z = Vector::from_fn(self.dim(), |_| if self.sigma > 0.0 { self.sigma * rng.normal() } else { 0.0 });
        Ok(Sample::noise(z))
    }

    fn value(&self, x: &Vector, z: &Sample) -> Result<f64> {
        x.check_dim(self.dim())?;
        Ok(self.value_at(x) + z.expect_noise()?.dot(x))
    }

    fn grad(&self, x: &Vector, z: &Sample) -> Result<Vector> {
        x.check_dim(self.dim())?;
        Ok(&self.grad_at(x) + z.expect_noise()?)
    }

    fn hess_vec(&self, _x: &Vector, _z: &Sample, u: &Vector) -> Result<Vector> {
        u.check_dim(self.dim())?;
        Ok(Vector::from_vec_unchecked(self.h.matvec(u.as_slice())))
    }

    fn exact_value(&self, x: &Vector) -> Option<f64> {
        Some(self.value_at(x))
    }

    fn exact_grad(&self, x: &Vector) -> Option<Vector> {
        Some(self.grad_at(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_at_target() {
        let q = Quadratic::new(Vector::new(vec![1.0, -1.0]).unwrap(), 0.5, 3.0).unwrap();
        let z = Sample::noise(Vector::zeros(2));
        assert!(q.grad(q.target(), &z).unwrap().iter().all(|v| *v == 0.0));
        let u = Vector::basis(2, 0);
        assert_eq!(q.hess_vec(q.target(), &z, &u).unwrap(), u);
    }

    #[test]
    fn quadratic_noise_is_unbiased() {
        let q = Quadratic::new(Vector::zeros(3), 1.0, 1.0).unwrap();
        let x = Vector::new(vec![0.5, 0.0, -0.5]).unwrap();
        let mut rng = RngStream::new(4, 0);
        let mut mean = Vector::zeros(3);
        let n = 20000;
        for _ in 0..n {
            let z = q.sample(&x, &mut rng).unwrap();
            mean.axpy(1.0 / n as f64, &q.grad(&x, &z).unwrap());
        }
        for i in 0..3 {
            assert!((mean[i] - x[i]).abs() < 4.0 / (n as f64).sqrt());
        }
    }

    #[test]
    fn nqp_is_non_positive_and_gradient_matches_fd() {
        let mut rng = RngStream::new(9, 0);
        let p = Nqp::random(5, 0.0, &[1.0; 5], &mut rng).unwrap();
        assert!(p.h().as_slice().iter().all(|v| *v <= 0.0));
        // b = −Hᵀ1 makes ∇F(1) = H1 + b = 0
        assert!(p.grad_at(&Vector::filled(5, 1.0)).norm_l2() < 1e-12);
        let x = Vector::from_fn(5, |_| rng.uniform());
        let g = p.grad_at(&x);
        for i in 0..5 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += 1e-5;
            xm[i] -= 1e-5;
            assert!(((p.value_at(&xp) - p.value_at(&xm)) / 2e-5 - g[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn nqp_rejects_positive_entries() {
        let h = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(Nqp::new(h, Vector::zeros(2), 0.0, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn quadratic_sum_as_problem() {
        let s = QuadraticSum::random(4, 2, &mut RngStream::new(1, 0)).unwrap();
        let p = s.clone().into_problem(1.0);
        let x = Vector::new(vec![0.3, -0.2]).unwrap();
        let mut mean = Vector::zeros(2);
        for i in 0..4 {
            mean.axpy(0.25, &p.grad(&x, &Sample::index(i)).unwrap());
        }
        let exact = p.exact_grad(&x).unwrap();
        assert!((&mean - &exact).norm_l2() < 1e-14);
    }
}
