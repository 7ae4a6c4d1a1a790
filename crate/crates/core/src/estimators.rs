//! Gradient estimators: momentum, unbiased gradient-variation estimates,
//! the oblivious gradient difference, and two-point smoothing estimates.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{Constants, Mode, Sample, StochasticProblem, ValueOracle};
use crate::rng::RngStream;
use crate::sampling::{sample_unit_ball, sample_unit_sphere};
use crate::Vector;

/// How the gradient variation `∇F(x_t) − ∇F(x_{t−1})` is estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariationOption {
    /// one-sample Hessian estimate applied to `x_t − x_{t−1}`
    ExactHessian,
    /// the same with Hessian-vector products replaced by gradient differences
    GradDiff,
    /// `∇F̃(x_t; z) − ∇F̃(x_{t−1}; z)` at a shared sample
    ObliviousDiff,
}

/// The running estimate `d_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradEstimatorState {
    pub d: Vector,
    pub t: usize,
}

impl GradEstimatorState {
    /// `d_1`, the first one-sample gradient.
    pub fn new(d1: Vector) -> Self {
        Self { d: d1, t: 1 }
    }

    pub fn update(&mut self, delta_tilde: &Vector, g_new: &Vector, rho: f64) -> Result<()> {
        self.d = momentum_update(&self.d, delta_tilde, g_new, rho)?;
        self.t += 1;
        Ok(())
    }
}

/// `(1 − ρ)(d_prev + Δ̃) + ρ·g_new`
pub fn momentum_update(d_prev: &Vector, delta_tilde: &Vector, g_new: &Vector, rho: f64) -> Result<Vector> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!("ρ must lie in [0, 1], got {rho}")));
    }
    delta_tilde.check_dim(d_prev.dim())?;
    g_new.check_dim(d_prev.dim())?;
    let out = Vector::from_fn(d_prev.dim(), |i| (1.0 - rho) * (d_prev[i] + delta_tilde[i]) + rho * g_new[i]);
    if !out.is_finite() {
        return Err(Error::NonFinite("momentum estimate".into()));
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct VariationEstimate {
    pub delta_tilde: Vector,
    /// interpolation weight; `x_t(a) = a·x_t + (1 − a)·x_{t−1}`
    pub a: f64,
    /// the point `x_t(a)` the sample was drawn at
    pub point: Vector,
    pub z: Sample,
    pub option: VariationOption,
    /// a probe point had to be moved into the oracle domain
    pub clamped: bool,
}

fn require_nonoblivious_terms(p: &dyn StochasticProblem) -> Result<()> {
    let c = p.capabilities();
    if !c.gradient {
        return Err(Error::Capability("gradient"));
    }
    if p.mode() == Mode::NonOblivious && !(c.logp_grad && c.value) {
        return Err(Error::Capability("logp_grad"));
    }
    Ok(())
}

/// One-sample gradient `∇F̃(x; z) + F̃(x; z)·∇log p(z; x)`; for oblivious
/// problems the score term vanishes.
pub fn one_sample_gradient(p: &dyn StochasticProblem, x: &Vector, z: &Sample) -> Result<Vector> {
    require_nonoblivious_terms(p)?;
    let mut g = p.grad(x, z)?;
    if p.mode() == Mode::NonOblivious {
        let v = p.value(x, z)?;
        if v != 0.0 {
            g.axpy(v, &p.logp_grad(x, z)?);
        }
    }
    Ok(g)
}

/// `∇̃²F(x; z)·u = F̃·∇lp·(∇lpᵀu) + ∇²F̃·u + ∇F̃·(∇lpᵀu) + F̃·∇²lp·u + ∇lp·(∇F̃ᵀu)`
/// where `lp = log p(z; x)`.
pub fn hessian_estimate_apply(p: &dyn StochasticProblem, x: &Vector, z: &Sample, u: &Vector) -> Result<Vector> {
    u.check_dim(p.dim())?;
    if p.mode() == Mode::Oblivious {
        if !p.capabilities().hessian_vec {
            return Err(Error::Capability("hessian_vec"));
        }
        return p.hess_vec(x, z, u);
    }
    let c = p.capabilities();
    if !(c.hessian_vec && c.logp_grad && c.logp_hess_vec && c.gradient && c.value) {
        return Err(Error::Capability("hessian_vec/logp_hess_vec"));
    }
    let f = p.value(x, z)?;
    let gf = p.grad(x, z)?;
    let lg = p.logp_grad(x, z)?;
    let lg_u = lg.dot(u);
    let gf_u = gf.dot(u);
    let mut out = p.hess_vec(x, z, u)?;
    out.axpy(f * lg_u, &lg);
    out.axpy(lg_u, &gf);
    out.axpy(f, &p.logp_hess_vec(x, z, u)?);
    out.axpy(gf_u, &lg);
    Ok(out)
}

/// The five-term estimate with `∇²F̃·u` and `∇²lp·u` replaced by
/// `[∇ψ(x + δu) − ∇ψ(x − δu)]/(2δ)`. Probe points leaving the oracle domain
/// are clamped and reported.
pub fn grad_diff_apply(
    p: &dyn StochasticProblem,
    x: &Vector,
    z: &Sample,
    u: &Vector,
    delta: f64,
) -> Result<(Vector, bool)> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidParameter(format!("δ must be positive, got {delta}")));
    }
    u.check_dim(p.dim())?;
    require_nonoblivious_terms(p)?;
    let mut plus = x.clone();
    plus.axpy(delta, u);
    let mut minus = x.clone();
    minus.axpy(-delta, u);
    let (plus, c1) = p.clamp_to_domain(&plus);
    let (minus, c2) = p.clamp_to_domain(&minus);
    let inv = 1.0 / (2.0 * delta);
    let mut out = (&p.grad(&plus, z)? - &p.grad(&minus, z)?).scaled(inv);
    if p.mode() == Mode::NonOblivious {
        let f = p.value(x, z)?;
        let gf = p.grad(x, z)?;
        let lg = p.logp_grad(x, z)?;
        let lg_u = lg.dot(u);
        let gf_u = gf.dot(u);
        out.axpy(f * lg_u, &lg);
        out.axpy(lg_u, &gf);
        let dl = &p.logp_grad(&plus, z)? - &p.logp_grad(&minus, z)?;
        out.axpy(f * inv, &dl);
        out.axpy(gf_u, &lg);
    }
    Ok((out, c1 || c2))
}

fn interpolate(x_t: &Vector, x_prev: &Vector, a: f64) -> Vector {
    Vector::from_fn(x_t.dim(), |i| a * x_t[i] + (1.0 - a) * x_prev[i])
}

/// Draws `a ∼ U[0,1]` from `a_rng` and `z ∼ p(·; x_t(a))` from `z_rng`, and
/// applies the one-sample Hessian estimate to `x_t − x_{t−1}`.
pub fn variation_exact_hessian(
    p: &dyn StochasticProblem,
    x_t: &Vector,
    x_prev: &Vector,
    a_rng: &mut RngStream,
    z_rng: &mut RngStream,
) -> Result<VariationEstimate> {
    x_prev.check_dim(x_t.dim())?;
    let a = a_rng.uniform();
    let point = interpolate(x_t, x_prev, a);
    let z = p.sample(&point, z_rng)?;
    let u = x_t - x_prev;
    let delta_tilde = hessian_estimate_apply(p, &point, &z, &u)?;
    Ok(VariationEstimate { delta_tilde, a, point, z, option: VariationOption::ExactHessian, clamped: false })
}

/// As [`variation_exact_hessian`] with gradient differences of width `delta`.
pub fn variation_grad_diff(
    p: &dyn StochasticProblem,
    x_t: &Vector,
    x_prev: &Vector,
    delta: f64,
    a_rng: &mut RngStream,
    z_rng: &mut RngStream,
) -> Result<VariationEstimate> {
    x_prev.check_dim(x_t.dim())?;
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidParameter(format!("δ must be positive, got {delta}")));
    }
    let a = a_rng.uniform();
    let point = interpolate(x_t, x_prev, a);
    let z = p.sample(&point, z_rng)?;
    let u = x_t - x_prev;
    let (delta_tilde, clamped) = grad_diff_apply(p, &point, &z, &u, delta)?;
    Ok(VariationEstimate { delta_tilde, a, point, z, option: VariationOption::GradDiff, clamped })
}

/// `∇F̃(x_t; z) − ∇F̃(x_{t−1}; z)`; only unbiased for oblivious problems.
pub fn variation_oblivious(p: &dyn StochasticProblem, x_t: &Vector, x_prev: &Vector, z: &Sample) -> Result<Vector> {
    if p.mode() != Mode::Oblivious {
        return Err(Error::Mode("the shared-sample difference is biased for non-oblivious problems".into()));
    }
    Ok(&p.grad(x_t, z)? - &p.grad(x_prev, z)?)
}

/// Gradient-difference width `δ_t = √3·η_{t−1}·L̄ / (D·L₂·(1 + B))`.
pub fn grad_diff_delta(c: &Constants, eta_prev: f64, diameter: f64) -> f64 {
    3f64.sqrt() * eta_prev * c.l_bar() / (diameter * c.l2 * (1.0 + c.b))
}

/// `(1/B) Σ_i (d/2δ)[F(x + δu_i) − F(x − δu_i)]·u_i` with `u_i` uniform on
/// the sphere. Sample `i` uses its own substream so the result does not
/// depend on evaluation order.
pub fn two_point_gradient(
    oracle: &dyn ValueOracle,
    x: &Vector,
    delta: f64,
    batch: usize,
    rng: &mut RngStream,
) -> Result<Vector> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidParameter(format!("δ must be positive, got {delta}")));
    }
    if batch == 0 {
        return Err(Error::InvalidParameter("batch must be ≥ 1".into()));
    }
    let d = oracle.dim();
    x.check_dim(d)?;
    let base = RngStream::new(rng.next_u64(), 0);
    let scale = d as f64 / (2.0 * delta * batch as f64);
    let mut g = Vector::zeros(d);
    for i in 0..batch {
        let mut r = base.derive(i as u64);
        let u: Vector = sample_unit_sphere(&mut r, d)?;
        let mut plus = x.clone();
        plus.axpy(delta, &u);
        let mut minus = x.clone();
        minus.axpy(-delta, &u);
        let diff = oracle.value(&plus, &mut r)? - oracle.value(&minus, &mut r)?;
        g.axpy(scale * diff, &u);
    }
    Ok(g)
}

/// Monte-Carlo estimate of `E_{v∼B^d}[F(x + δv)]` with its standard error.
pub fn smoothed_value_mc(
    oracle: &dyn ValueOracle,
    x: &Vector,
    delta: f64,
    n_samples: usize,
    rng: &mut RngStream,
) -> Result<(f64, f64)> {
    if !(delta.is_finite() && delta >= 0.0) || n_samples == 0 {
        return Err(Error::InvalidParameter("need δ ≥ 0 and at least one sample".into()));
    }
    let d = oracle.dim();
    x.check_dim(d)?;
    // Welford updates keep the mean exact when every draw is identical
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for k in 1..=n_samples {
        let y = if delta == 0.0 {
            x.clone()
        } else {
            let v: Vector = sample_unit_ball(rng, d)?;
            let mut y = x.clone();
            y.axpy(delta, &v);
            y
        };
        let f = oracle.value(&y, rng)?;
        let step = f - mean;
        mean += step / k as f64;
        m2 += step * (f - mean);
    }
    let n = n_samples as f64;
    let var = if n_samples > 1 { m2 / (n - 1.0) } else { 0.0 };
    Ok((mean, (var / n).sqrt()))
}
