use std::sync::Arc;

use super::multilinear::{check_unit_cube, pinned_grad, pinned_hess_vec, MultilinearTable, ENUMERATION_MAX_DIM};
use super::setfn::{Decomposable, SetFunction};
use super::stochastic::{Capabilities, Constants, Mode, Payload, Sample, StochasticProblem, ValueOracle};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::Vector;

/// Bernoulli probabilities are kept inside `[ε, 1 − ε]`.
pub const BERNOULLI_CLAMP: f64 = 1e-9;

fn clamp_prob(v: f64) -> f64 {
    v.clamp(BERNOULLI_CLAMP, 1.0 - BERNOULLI_CLAMP)
}

/// Exact multilinear evaluation: closed form when the set function has one,
/// otherwise a tabulation (d ≤ 20).
#[derive(Clone)]
struct ExactMultilinear {
    f: Arc<dyn SetFunction>,
    table: Option<Arc<MultilinearTable>>,
}

impl ExactMultilinear {
    fn new(f: Arc<dyn SetFunction>) -> Self {
        let d = f.ground_size();
        let closed = f.multilinear(&vec![0.0; d]).is_some();
        let table = if !closed && d <= ENUMERATION_MAX_DIM {
            MultilinearTable::new(f.as_ref()).ok().map(Arc::new)
        } else {
            None
        };
        Self { f, table }
    }

    fn value(&self, x: &[f64]) -> Option<f64> {
        if check_unit_cube(x).is_err() {
            return None;
        }
        match &self.table {
            Some(t) => t.value(x).ok(),
            None => self.f.multilinear(x),
        }
    }

    fn grad(&self, x: &[f64]) -> Option<Vector> {
        if check_unit_cube(x).is_err() {
            return None;
        }
        match &self.table {
            Some(t) => t.value_grad(x).ok().map(|(_, g)| g),
            None => {
                self.f.multilinear(x)?;
                Some(Vector::from_vec_unchecked(pinned_grad(|y| self.f.multilinear(y).unwrap_or(0.0), x)))
            }
        }
    }
}

/// The multilinear extension `F(x) = E_{S∼x}[f(S)]` as a non-oblivious
/// problem: `z = S` drawn from the product-Bernoulli law at `x`, and
/// `F̃(x; S) = f(S)` does not depend on `x`.
#[derive(Clone)]
pub struct BernoulliMultilinear {
    name: String,
    exact: ExactMultilinear,
    margin: f64,
}

impl BernoulliMultilinear {
    /// `margin` is the distance from the cube boundary over which the
    /// log-density constants are computed.
    pub fn new(name: impl Into<String>, f: Arc<dyn SetFunction>, margin: f64) -> Result<Self> {
        if !(margin > 0.0 && margin < 0.5) {
            return Err(Error::InvalidParameter(format!("margin must lie in (0, 0.5), got {margin}")));
        }
        Ok(Self { name: name.into(), exact: ExactMultilinear::new(f), margin })
    }

    pub fn set_function(&self) -> &Arc<dyn SetFunction> {
        &self.exact.f
    }

    fn clamped(&self, x: &Vector) -> Result<Vec<f64>> {
        x.check_dim(self.dim())?;
        check_unit_cube(x.as_slice())?;
        Ok(x.iter().map(|v| clamp_prob(*v)).collect())
    }
}

impl StochasticProblem for BernoulliMultilinear {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.exact.f.ground_size()
    }

    fn mode(&self) -> Mode {
        Mode::NonOblivious
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            value: true,
            gradient: true,
            hessian_vec: true,
            logp_grad: true,
            logp_hess_vec: true,
            exact_reference: self.exact.table.is_some() || self.exact.f.multilinear(&vec![0.0; self.dim()]).is_some(),
        }
    }

    fn constants(&self) -> Constants {
        let m = self.margin;
        Constants {
            b: self.exact.f.bound(),
            g: (self.dim() as f64).sqrt() / m,
            l: 1.0 / (m * m),
            l2: 2.0 / (m * m * m),
            estimated: false,
        }
    }

    fn sample(&self, x: &Vector, rng: &mut RngStream) -> Result<Sample> {
        let p = self.clamped(x)?;
        let s: Vec<bool> = p.iter().map(|pi| rng.bernoulli(*pi)).collect();
        let lg = logp_grad_at(&p, &s);
        Ok(Sample { z: Payload::Subset(s), logp_grad: Some(lg) })
    }

    fn value(&self, _x: &Vector, z: &Sample) -> Result<f64> {
        Ok(self.exact.f.eval(z.expect_subset()?))
    }

    fn grad(&self, x: &Vector, _z: &Sample) -> Result<Vector> {
        x.check_dim(self.dim())?;
        Ok(Vector::zeros(self.dim()))
    }

    fn hess_vec(&self, x: &Vector, _z: &Sample, u: &Vector) -> Result<Vector> {
        x.check_dim(self.dim())?;
        u.check_dim(self.dim())?;
        Ok(Vector::zeros(self.dim()))
    }

    fn logp_grad(&self, x: &Vector, z: &Sample) -> Result<Vector> {
        let p = self.clamped(x)?;
        Ok(logp_grad_at(&p, z.expect_subset()?))
    }

    fn logp_hess_vec(&self, x: &Vector, z: &Sample, u: &Vector) -> Result<Vector> {
        let p = self.clamped(x)?;
        u.check_dim(self.dim())?;
        let s = z.expect_subset()?;
        Ok(Vector::from_fn(self.dim(), |i| {
            let h = if s[i] { -1.0 / (p[i] * p[i]) } else { -1.0 / ((1.0 - p[i]) * (1.0 - p[i])) };
            h * u[i]
        }))
    }

    fn clamp_to_domain(&self, x: &Vector) -> (Vector, bool) {
        let moved = x.iter().any(|v| *v < 0.0 || *v > 1.0);
        (x.map(clamp_prob), moved)
    }

    fn exact_value(&self, x: &Vector) -> Option<f64> {
        self.exact.value(x.as_slice())
    }

    fn exact_grad(&self, x: &Vector) -> Option<Vector> {
        self.exact.grad(x.as_slice())
    }
}

/// `∇_x log p(S; x) = Σ_i [s_i/x_i − (1 − s_i)/(1 − x_i)] e_i`
fn logp_grad_at(p: &[f64], s: &[bool]) -> Vector {
    Vector::from_vec_unchecked(
        p.iter().zip(s).map(|(pi, si)| if *si { 1.0 / pi } else { -1.0 / (1.0 - pi) }).collect(),
    )
}

/// The multilinear extension of a decomposable `f = Σ_j f_j` as an
/// oblivious problem: `z = j` uniform and `F̃(x; j) = n·F_j(x)` in closed form.
#[derive(Clone)]
pub struct ComponentMultilinear {
    name: String,
    f: Arc<dyn Decomposable>,
    component_bound: f64,
}

impl ComponentMultilinear {
    pub fn new(name: impl Into<String>, f: Arc<dyn Decomposable>) -> Result<Self> {
        if f.num_components() == 0 {
            return Err(Error::InvalidParameter("no components".into()));
        }
        let full = vec![true; f.ground_size()];
        let component_bound = (0..f.num_components()).map(|j| f.component(j, &full).abs()).fold(0.0, f64::max);
        Ok(Self { name: name.into(), f, component_bound })
    }

    fn n(&self) -> f64 {
        self.f.num_components() as f64
    }

    fn check(&self, x: &Vector) -> Result<()> {
        x.check_dim(self.dim())?;
        check_unit_cube(x.as_slice())
    }
}

impl StochasticProblem for ComponentMultilinear {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.f.ground_size()
    }

    fn mode(&self) -> Mode {
        Mode::Oblivious
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { value: true, gradient: true, hessian_vec: true, exact_reference: true, ..Default::default() }
    }

    fn constants(&self) -> Constants {
        let d = self.dim() as f64;
        let m = self.n() * self.component_bound;
        Constants {
            b: m,
            g: 2.0 * m * d.sqrt(),
            l: 4.0 * m * (d * (d - 1.0)).sqrt(),
            l2: 8.0 * m * d.powf(1.5),
            estimated: false,
        }
    }

    fn sample(&self, x: &Vector, rng: &mut RngStream) -> Result<Sample> {
        x.check_dim(self.dim())?;
        Ok(Sample::index(rng.below(self.f.num_components())))
    }

    fn value(&self, x: &Vector, z: &Sample) -> Result<f64> {
        self.check(x)?;
        Ok(self.n() * self.f.component_multilinear(z.expect_index()?, x.as_slice()))
    }

    fn grad(&self, x: &Vector, z: &Sample) -> Result<Vector> {
        self.check(x)?;
        let j = z.expect_index()?;
        let g = pinned_grad(|y| self.f.component_multilinear(j, y), x.as_slice());
        Ok(Vector::from_vec_unchecked(g).scaled(self.n()))
    }

    fn hess_vec(&self, x: &Vector, z: &Sample, u: &Vector) -> Result<Vector> {
        self.check(x)?;
        u.check_dim(self.dim())?;
        let j = z.expect_index()?;
        let h = pinned_hess_vec(|y| self.f.component_multilinear(j, y), x.as_slice(), u.as_slice());
        Ok(Vector::from_vec_unchecked(h).scaled(self.n()))
    }

    fn clamp_to_domain(&self, x: &Vector) -> (Vector, bool) {
        let moved = x.iter().any(|v| *v < 0.0 || *v > 1.0);
        (x.map(|v| v.clamp(0.0, 1.0)), moved)
    }

    fn exact_value(&self, x: &Vector) -> Option<f64> {
        check_unit_cube(x.as_slice()).ok()?;
        Some((0..self.f.num_components()).map(|j| self.f.component_multilinear(j, x.as_slice())).sum())
    }

    fn exact_grad(&self, x: &Vector) -> Option<Vector> {
        check_unit_cube(x.as_slice()).ok()?;
        let f = |y: &[f64]| (0..self.f.num_components()).map(|j| self.f.component_multilinear(j, y)).sum();
        Some(Vector::from_vec_unchecked(pinned_grad(f, x.as_slice())))
    }
}

/// Value oracle returning the exact multilinear extension.
#[derive(Clone)]
pub struct ExactMultilinearOracle {
    exact: ExactMultilinear,
}

impl ExactMultilinearOracle {
    pub fn new(f: Arc<dyn SetFunction>) -> Result<Self> {
        let exact = ExactMultilinear::new(f);
        if exact.table.is_none() && exact.f.multilinear(&vec![0.0; exact.f.ground_size()]).is_none() {
            return Err(Error::Budget("no closed form and too large to enumerate".into()));
        }
        Ok(Self { exact })
    }
}

impl ValueOracle for ExactMultilinearOracle {
    fn dim(&self) -> usize {
        self.exact.f.ground_size()
    }

    fn value(&self, x: &Vector, _rng: &mut RngStream) -> Result<f64> {
        x.check_dim(self.dim())?;
        self.exact.value(x.as_slice()).ok_or_else(|| Error::Domain("value probe outside [0, 1]^d".into()))
    }

    fn exact_value(&self, x: &Vector) -> Option<f64> {
        self.exact.value(x.as_slice())
    }
}

/// Value oracle averaging `f(S)` over `samples` independent draws `S ∼ x`.
#[derive(Clone)]
pub struct SampledMultilinearOracle {
    f: Arc<dyn SetFunction>,
    samples: usize,
    exact: Option<ExactMultilinear>,
}

impl SampledMultilinearOracle {
    pub fn new(f: Arc<dyn SetFunction>, samples: usize) -> Result<Self> {
        if samples == 0 {
            return Err(Error::InvalidParameter("sample count must be ≥ 1".into()));
        }
        let exact = ExactMultilinear::new(f.clone());
        let has_exact = exact.table.is_some() || f.multilinear(&vec![0.0; f.ground_size()]).is_some();
        Ok(Self { f, samples, exact: has_exact.then_some(exact) })
    }
}

impl ValueOracle for SampledMultilinearOracle {
    fn dim(&self) -> usize {
        self.f.ground_size()
    }

    fn value(&self, x: &Vector, rng: &mut RngStream) -> Result<f64> {
        x.check_dim(self.dim())?;
        check_unit_cube(x.as_slice())?;
        let mut s = vec![false; self.dim()];
        let mut acc = 0.0;
        for _ in 0..self.samples {
            for (si, xi) in s.iter_mut().zip(x.iter()) {
                *si = rng.bernoulli(xi.clamp(0.0, 1.0));
            }
            acc += self.f.eval(&s);
        }
        Ok(acc / self.samples as f64)
    }

    fn exact_value(&self, x: &Vector) -> Option<f64> {
        self.exact.as_ref()?.value(x.as_slice())
    }
}
