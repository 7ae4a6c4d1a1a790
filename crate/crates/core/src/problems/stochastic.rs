use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::Vector;

/// Whether the sampling law depends on the decision variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Oblivious,
    NonOblivious,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Capabilities {
    pub value: bool,
    pub gradient: bool,
    pub hessian_vec: bool,
    pub logp_grad: bool,
    pub logp_hess_vec: bool,
    pub exact_reference: bool,
}

/// Regularity constants; `f64::INFINITY` where unknown.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Constants {
    /// `|F̃| ≤ B`
    pub b: f64,
    /// gradient bound of `F̃` and of `log p`
    pub g: f64,
    /// smoothness of `F̃` and of `log p`
    pub l: f64,
    /// second-order smoothness
    pub l2: f64,
    /// true if obtained by probing rather than analytically
    pub estimated: bool,
}

impl Constants {
    pub const UNKNOWN: Constants =
        Constants { b: f64::INFINITY, g: f64::INFINITY, l: f64::INFINITY, l2: f64::INFINITY, estimated: false };

    /// Smoothness of the one-sample Hessian estimator:
    /// `L̄ = (4B²G⁴ + 16G⁴ + 4L² + 4B²L²)^{1/2}`.
    pub fn l_bar(&self) -> f64 {
        let (b, g, l) = (self.b, self.g, self.l);
        (4.0 * b * b * g.powi(4) + 16.0 * g.powi(4) + 4.0 * l * l + 4.0 * b * b * l * l).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    /// a component index (finite sums, data rows, observed entries)
    Index(usize),
    /// a subset indicator (product-Bernoulli sampling)
    Subset(Vec<bool>),
    /// an additive noise draw
    Noise(Vector),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub z: Payload,
    /// `∇_x log p(z; x)` at the point the sample was drawn from (non-oblivious only)
    pub logp_grad: Option<Vector>,
}

impl Sample {
    pub fn index(i: usize) -> Self {
        Sample { z: Payload::Index(i), logp_grad: None }
    }

    pub fn noise(v: Vector) -> Self {
        Sample { z: Payload::Noise(v), logp_grad: None }
    }

    pub fn subset(s: Vec<bool>) -> Self {
        Sample { z: Payload::Subset(s), logp_grad: None }
    }

    pub(crate) fn expect_index(&self) -> Result<usize> {
        match self.z {
            Payload::Index(i) => Ok(i),
            _ => Err(Error::InvalidParameter("sample payload is not an index".into())),
        }
    }

    pub(crate) fn expect_subset(&self) -> Result<&[bool]> {
        match &self.z {
            Payload::Subset(s) => Ok(s),
            _ => Err(Error::InvalidParameter("sample payload is not a subset".into())),
        }
    }

    pub(crate) fn expect_noise(&self) -> Result<&Vector> {
        match &self.z {
            Payload::Noise(v) => Ok(v),
            _ => Err(Error::InvalidParameter("sample payload is not a noise vector".into())),
        }
    }
}

/// Oracle bundle for `min/max F(x) = E_{z∼p(z;x)}[F̃(x; z)]`.
pub trait StochasticProblem: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn mode(&self) -> Mode;

    fn capabilities(&self) -> Capabilities;

    fn constants(&self) -> Constants;

    /// Draws `z ∼ p(·; x)`.
    fn sample(&self, x: &Vector, rng: &mut RngStream) -> Result<Sample>;

    /// `F̃(x; z)`
    fn value(&self, x: &Vector, z: &Sample) -> Result<f64>;

    /// `∇F̃(x; z)`
    fn grad(&self, x: &Vector, z: &Sample) -> Result<Vector>;

    /// `∇²F̃(x; z)·u`
    fn hess_vec(&self, _x: &Vector, _z: &Sample, _u: &Vector) -> Result<Vector> {
        Err(Error::Capability("hessian_vec"))
    }

    /// `∇_x log p(z; x)`
    fn logp_grad(&self, _x: &Vector, _z: &Sample) -> Result<Vector> {
        Err(Error::Capability("logp_grad"))
    }

    /// `∇²_x log p(z; x)·u`
    fn logp_hess_vec(&self, _x: &Vector, _z: &Sample, _u: &Vector) -> Result<Vector> {
        Err(Error::Capability("logp_hess_vec"))
    }

    /// Moves a probe point into the oracles' domain; the flag reports whether
    /// anything changed.
    fn clamp_to_domain(&self, x: &Vector) -> (Vector, bool) {
        (x.clone(), false)
    }

    /// Exact `F(x)`, when available.
    fn exact_value(&self, _x: &Vector) -> Option<f64> {
        None
    }

    /// Exact `∇F(x)`, when available.
    fn exact_grad(&self, _x: &Vector) -> Option<Vector> {
        None
    }
}

/// `f(x) = (1/N) Σ_i f_i(x)` with individually addressable components.
pub trait FiniteSum: Send + Sync {
    fn dim(&self) -> usize;

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn component_value(&self, x: &Vector, i: usize) -> Result<f64>;

    fn component_grad(&self, x: &Vector, i: usize) -> Result<Vector>;

    fn value(&self, x: &Vector) -> Result<f64> {
        let mut acc = 0.0;
        for i in 0..self.len() {
            acc += self.component_value(x, i)?;
        }
        Ok(acc / self.len() as f64)
    }

    /// Average gradient over `indices`, summed in the given order.
    fn batch_grad(&self, x: &Vector, indices: &[usize]) -> Result<Vector> {
        let mut g = Vector::zeros(self.dim());
        for &i in indices {
            g.axpy(1.0, &self.component_grad(x, i)?);
        }
        g.scale(1.0 / indices.len().max(1) as f64);
        Ok(g)
    }

    fn full_grad(&self, x: &Vector) -> Result<Vector> {
        let all: Vec<usize> = (0..self.len()).collect();
        self.batch_grad(x, &all)
    }
}

/// A (possibly noisy) zeroth-order oracle.
pub trait ValueOracle: Send + Sync {
    fn dim(&self) -> usize;

    /// One evaluation; deterministic oracles ignore `rng`.
    fn value(&self, x: &Vector, rng: &mut RngStream) -> Result<f64>;

    /// Noise-free value, when available.
    fn exact_value(&self, _x: &Vector) -> Option<f64> {
        None
    }
}

/// Spot-checks `|F̃| ≤ B` and `‖∇F̃‖ ≤ G` at random points and samples.
/// Returns the number of violations among `probes` evaluations.
pub fn check_constants(
    p: &dyn StochasticProblem,
    points: &mut dyn FnMut(&mut RngStream) -> Vector,
    probes: usize,
    rng: &mut RngStream,
) -> Result<usize> {
    let c = p.constants();
    let mut bad = 0;
    for _ in 0..probes {
        let x = points(rng);
        let z = p.sample(&x, rng)?;
        let v = p.value(&x, &z)?;
        let g = p.grad(&x, &z)?;
        if v.abs() > c.b * (1.0 + 1e-12) || g.norm_l2() > c.g * (1.0 + 1e-12) {
            bad += 1;
        }
        if let Some(lg) = &z.logp_grad {
            if lg.norm_l2() > c.g * (1.0 + 1e-12) {
                bad += 1;
            }
        }
    }
    Ok(bad)
}

/// Empirical `max |F̃|` and `max ‖∇F̃‖` over probes, inflated by 1.2.
pub fn estimate_constants(
    p: &dyn StochasticProblem,
    points: &mut dyn FnMut(&mut RngStream) -> Vector,
    probes: usize,
    rng: &mut RngStream,
) -> Result<(f64, f64)> {
    let mut b = 0.0f64;
    let mut g = 0.0f64;
    for _ in 0..probes {
        let x = points(rng);
        let z = p.sample(&x, rng)?;
        b = b.max(p.value(&x, &z)?.abs());
        g = g.max(p.grad(&x, &z)?.norm_l2());
        if let Some(lg) = &z.logp_grad {
            g = g.max(lg.norm_l2());
        }
    }
    Ok((1.2 * b, 1.2 * g))
}


/// Any finite sum viewed as an oblivious stochastic problem with `z`
/// uniform over component indices.
#[derive(Clone)]
pub struct FiniteSumProblem {
    name: String,
    inner: std::sync::Arc<dyn FiniteSum>,
    constants: Constants,
    hessian: Option<std::sync::Arc<dyn ComponentHessian>>,
}

/// Component Hessian-vector products for finite sums that have them.
pub trait ComponentHessian: Send + Sync {
    fn component_hess_vec(&self, x: &Vector, i: usize, u: &Vector) -> Result<Vector>;
}

impl FiniteSumProblem {
    pub fn new(name: impl Into<String>, inner: std::sync::Arc<dyn FiniteSum>, constants: Constants) -> Self {
        Self { name: name.into(), inner, constants, hessian: None }
    }

    pub fn with_hessian(mut self, h: std::sync::Arc<dyn ComponentHessian>) -> Self {
        self.hessian = Some(h);
        self
    }

    pub fn finite_sum(&self) -> &std::sync::Arc<dyn FiniteSum> {
        &self.inner
    }
}

impl StochasticProblem for FiniteSumProblem {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn mode(&self) -> Mode {
        Mode::Oblivious
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            value: true,
            gradient: true,
            hessian_vec: self.hessian.is_some(),
            exact_reference: true,
            ..Default::default()
        }
    }

    fn constants(&self) -> Constants {
        self.constants
    }

    fn sample(&self, x: &Vector, rng: &mut RngStream) -> Result<Sample> {
        x.check_dim(self.dim())?;
        Ok(Sample::index(rng.below(self.inner.len())))
    }

    fn value(&self, x: &Vector, z: &Sample) -> Result<f64> {
        self.inner.component_value(x, z.expect_index()?)
    }

    fn grad(&self, x: &Vector, z: &Sample) -> Result<Vector> {
        self.inner.component_grad(x, z.expect_index()?)
    }

    fn hess_vec(&self, x: &Vector, z: &Sample, u: &Vector) -> Result<Vector> {
        match &self.hessian {
            Some(h) => h.component_hess_vec(x, z.expect_index()?, u),
            None => Err(Error::Capability("hessian_vec")),
        }
    }

    fn exact_value(&self, x: &Vector) -> Option<f64> {
        self.inner.value(x).ok()
    }

    fn exact_grad(&self, x: &Vector) -> Option<Vector> {
        self.inner.full_grad(x).ok()
    }
}
