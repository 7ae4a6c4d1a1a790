use std::path::Path;
use std::sync::Arc;

use super::logistic::read_numeric_csv;
use super::stochastic::{ComponentHessian, Constants, FiniteSum, FiniteSumProblem};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::Vector;

/// `ψ(r; σ) = 1 − exp(−r²/(2σ))`
pub fn robust_loss(r: f64, sigma: f64) -> f64 {
    1.0 - (-r * r / (2.0 * sigma)).exp()
}

/// `ψ'(r; σ) = (r/σ) exp(−r²/(2σ))`
pub fn robust_loss_d1(r: f64, sigma: f64) -> f64 {
    r / sigma * (-r * r / (2.0 * sigma)).exp()
}

/// `ψ''(r; σ) = (1/σ)(1 − r²/σ) exp(−r²/(2σ))`
pub fn robust_loss_d2(r: f64, sigma: f64) -> f64 {
    (1.0 - r * r / sigma) / sigma * (-r * r / (2.0 * sigma)).exp()
}

/// Robust low-rank matrix recovery: the mean of `ψ(X_ij − M_ij)` over the
/// observed entries `(i, j, M_ij)`, with `X` flattened row-major.
#[derive(Clone, Debug)]
pub struct RobustLrmr {
    rows: usize,
    cols: usize,
    observed: Vec<(usize, usize, f64)>,
    sigma: f64,
}

impl RobustLrmr {
    pub fn new(rows: usize, cols: usize, observed: Vec<(usize, usize, f64)>, sigma: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter("matrix shape must be positive".into()));
        }
        if observed.is_empty() {
            return Err(Error::Data("no observed entries".into()));
        }
        if let Some(&(i, j, v)) = observed.iter().find(|(i, j, v)| *i >= rows || *j >= cols || !v.is_finite()) {
            return Err(Error::Data(format!("entry ({i}, {j}, {v}) invalid for a {rows}×{cols} matrix")));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("σ must be positive, got {sigma}")));
        }
        Ok(Self { rows, cols, observed, sigma })
    }

    /// Rank-`rank` Gaussian truth `UVᵀ/√rank`, each entry observed with
    /// probability `fraction`; a share `outliers` of observations is replaced
    /// by `N(0, 10²)` noise.
    pub fn random(
        rows: usize,
        cols: usize,
        rank: usize,
        fraction: f64,
        outliers: f64,
        sigma: f64,
        rng: &mut RngStream,
    ) -> Result<Self> {
        if rank == 0 || !(0.0..=1.0).contains(&fraction) || !(0.0..=1.0).contains(&outliers) {
            return Err(Error::InvalidParameter("rank ≥ 1 and fractions in [0, 1] required".into()));
        }
        let u: Vec<f64> = (0..rows * rank).map(|_| rng.normal()).collect();
        let v: Vec<f64> = (0..cols * rank).map(|_| rng.normal()).collect();
        let scale = 1.0 / (rank as f64).sqrt();
        let mut observed = Vec::new();
        for i in 0..rows {
            for j in 0..cols {
                if !rng.bernoulli(fraction) {
                    continue;
                }
                let truth: f64 = (0..rank).map(|k| u[i * rank + k] * v[j * rank + k]).sum::<f64>() * scale;
                let m = if rng.bernoulli(outliers) { 10.0 * rng.normal() } else { truth };
                observed.push((i, j, m));
            }
        }
        Self::new(rows, cols, observed, sigma)
    }

    /// `(user, item, rating)` CSV triplets with zero-based indices.
    pub fn from_csv(path: &Path, rows: usize, cols: usize, sigma: f64) -> Result<Self> {
        let data = read_numeric_csv(path)?;
        if data[0].len() != 3 {
            return Err(Error::Data(format!("{}: expected (row, col, value) triplets", path.display())));
        }
        let obs = data
            .into_iter()
            .map(|r| {
                if r[0] < 0.0 || r[1] < 0.0 || r[0].fract() != 0.0 || r[1].fract() != 0.0 {
                    Err(Error::Data(format!("bad index pair ({}, {})", r[0], r[1])))
                } else {
                    Ok((r[0] as usize, r[1] as usize, r[2]))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows, cols, obs, sigma)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn observed(&self) -> &[(usize, usize, f64)] {
        &self.observed
    }

    pub fn constants(&self) -> Constants {
        let s = self.sigma;
        // max_s |s(s² − 3)e^{−s²/2}| on a fine grid
        let third = (0..=4000)
            .map(|k| {
                let t = k as f64 * 1e-3;
                (t * (t * t - 3.0) * (-t * t / 2.0).exp()).abs()
            })
            .fold(0.0f64, f64::max);
        Constants {
            b: 1.0,
            g: (-0.5f64).exp() / s.sqrt(),
            l: 1.0 / s,
            l2: third * 1.001 / s.powf(1.5),
            estimated: false,
        }
    }

    pub fn into_problem(self) -> FiniteSumProblem {
        let c = self.constants();
        let me = Arc::new(self);
        FiniteSumProblem::new("robust_lrmr", me.clone(), c).with_hessian(me)
    }

    fn residual(&self, x: &Vector, k: usize) -> (usize, f64) {
        let (i, j, m) = self.observed[k];
        let idx = i * self.cols + j;
        (idx, x[idx] - m)
    }
}

impl FiniteSum for RobustLrmr {
    fn dim(&self) -> usize {
        self.rows * self.cols
    }

    fn len(&self) -> usize {
        self.observed.len()
    }

    fn component_value(&self, x: &Vector, k: usize) -> Result<f64> {
        x.check_dim(self.dim())?;
        Ok(robust_loss(self.residual(x, k).1, self.sigma))
    }

    fn component_grad(&self, x: &Vector, k: usize) -> Result<Vector> {
        x.check_dim(self.dim())?;
        let (idx, r) = self.residual(x, k);
        let mut g = Vector::zeros(self.dim());
        g[idx] = robust_loss_d1(r, self.sigma);
        Ok(g)
    }
}

impl ComponentHessian for RobustLrmr {
    fn component_hess_vec(&self, x: &Vector, k: usize, u: &Vector) -> Result<Vector> {
        x.check_dim(self.dim())?;
        let (idx, r) = self.residual(x, k);
        let mut h = Vector::zeros(self.dim());
        h[idx] = robust_loss_d2(r, self.sigma) * u[idx];
        Ok(h)
    }
}
