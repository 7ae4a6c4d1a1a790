use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::rng::RngStream;

/// A set function on the ground set `0..ground_size`, with subsets passed
/// as indicator slices.
pub trait SetFunction: Send + Sync {
    fn ground_size(&self) -> usize;

    fn eval(&self, set: &[bool]) -> f64;

    /// `M ≥ sup_S |f(S)|`.
    fn bound(&self) -> f64;

    fn is_monotone(&self) -> bool {
        true
    }

    /// Closed-form multilinear extension, when one exists.
    fn multilinear(&self, _x: &[f64]) -> Option<f64> {
        None
    }
}

/// A set function written as a sum of components whose multilinear
/// extensions have closed forms.
pub trait Decomposable: SetFunction {
    fn num_components(&self) -> usize;

    fn component(&self, j: usize, set: &[bool]) -> f64;

    /// Multilinear extension of component `j` at `x ∈ [0,1]^d`.
    fn component_multilinear(&self, j: usize, x: &[f64]) -> f64;
}

fn check_nonneg(values: &[f64], what: &str) -> Result<()> {
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidParameter(format!("{what} must be finite and non-negative, got {v}")));
    }
    Ok(())
}

/// `f(S) = Σ_{i∈S} w_i`
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Modular {
    weights: Vec<f64>,
}

impl Modular {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidParameter("modular weights must be finite and nonempty".into()));
        }
        Ok(Self { weights })
    }

    /// `f(S) = |S|`
    pub fn cardinality(d: usize) -> Result<Self> {
        Self::new(vec![1.0; d])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl SetFunction for Modular {
    fn ground_size(&self) -> usize {
        self.weights.len()
    }

    fn eval(&self, set: &[bool]) -> f64 {
        self.weights.iter().zip(set).filter(|(_, s)| **s).map(|(w, _)| w).sum()
    }

    fn bound(&self) -> f64 {
        let pos: f64 = self.weights.iter().filter(|w| **w > 0.0).sum();
        let neg: f64 = self.weights.iter().filter(|w| **w < 0.0).map(|w| -w).sum();
        pos.max(neg)
    }

    fn is_monotone(&self) -> bool {
        self.weights.iter().all(|w| *w >= 0.0)
    }

    fn multilinear(&self, x: &[f64]) -> Option<f64> {
        Some(self.weights.iter().zip(x).map(|(w, x)| w * x).sum())
    }
}

impl Decomposable for Modular {
    fn num_components(&self) -> usize {
        self.weights.len()
    }

    fn component(&self, j: usize, set: &[bool]) -> f64 {
        if set[j] {
            self.weights[j]
        } else {
            0.0
        }
    }

    fn component_multilinear(&self, j: usize, x: &[f64]) -> f64 {
        self.weights[j] * x[j]
    }
}

/// `f(S) = Σ_j max_{i∈S} w_{j,i}` (zero for the empty set); rows are customers.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FacilityLocation {
    weights: DenseMatrix<f64>,
    /// per customer, facility indices sorted by decreasing weight
    order: Vec<Vec<usize>>,
}

impl FacilityLocation {
    pub fn new(weights: DenseMatrix<f64>) -> Result<Self> {
        check_nonneg(weights.as_slice(), "facility weights")?;
        let order = (0..weights.rows())
            .map(|j| {
                let row = weights.row(j);
                let mut idx: Vec<usize> = (0..row.len()).collect();
                idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Ok(Self { weights, order })
    }

    /// Weights uniform on `[0, 1)`.
    pub fn random(d: usize, customers: usize, rng: &mut RngStream) -> Result<Self> {
        if d == 0 || customers == 0 {
            return Err(Error::InvalidParameter("facility location needs d, customers ≥ 1".into()));
        }
        Self::new(DenseMatrix::from_fn(customers, d, |_, _| rng.uniform()))
    }

    pub fn weights(&self) -> &DenseMatrix<f64> {
        &self.weights
    }
}

impl SetFunction for FacilityLocation {
    fn ground_size(&self) -> usize {
        self.weights.cols()
    }

    fn eval(&self, set: &[bool]) -> f64 {
        (0..self.weights.rows()).map(|j| self.component(j, set)).sum()
    }

    fn bound(&self) -> f64 {
        (0..self.weights.rows()).map(|j| self.weights.row(j).iter().fold(0.0f64, |m, w| m.max(*w))).sum()
    }

    fn multilinear(&self, x: &[f64]) -> Option<f64> {
        Some((0..self.weights.rows()).map(|j| self.component_multilinear(j, x)).sum())
    }
}

impl Decomposable for FacilityLocation {
    fn num_components(&self) -> usize {
        self.weights.rows()
    }

    fn component(&self, j: usize, set: &[bool]) -> f64 {
        self.weights.row(j).iter().zip(set).filter(|(_, s)| **s).fold(0.0, |m, (w, _)| m.max(*w))
    }

    fn component_multilinear(&self, j: usize, x: &[f64]) -> f64 {
        // E[max] = Σ_k w_(k)·P(k is the best selected facility)
        let row = self.weights.row(j);
        let mut none_before = 1.0;
        let mut acc = 0.0;
        for &i in &self.order[j] {
            acc += row[i] * x[i] * none_before;
            none_before *= 1.0 - x[i];
        }
        acc
    }
}

/// Probabilistic coverage `f(S) = Σ_j [1 − ∏_{a∈S}(1 − p_a(j))]`; rows are topics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Coverage {
    probs: DenseMatrix<f64>,
}

impl Coverage {
    pub fn new(probs: DenseMatrix<f64>) -> Result<Self> {
        check_nonneg(probs.as_slice(), "coverage probabilities")?;
        if probs.as_slice().iter().any(|p| *p > 1.0) {
            return Err(Error::InvalidParameter("coverage probabilities must be ≤ 1".into()));
        }
        Ok(Self { probs })
    }

    /// Each `p_a(j)` is zero with probability one half, else uniform on `[0, 1)`.
    pub fn random(d: usize, topics: usize, rng: &mut RngStream) -> Result<Self> {
        if d == 0 || topics == 0 {
            return Err(Error::InvalidParameter("coverage needs d, topics ≥ 1".into()));
        }
        Self::new(DenseMatrix::from_fn(topics, d, |_, _| if rng.bernoulli(0.5) { rng.uniform() } else { 0.0 }))
    }

    pub fn probs(&self) -> &DenseMatrix<f64> {
        &self.probs
    }
}

impl SetFunction for Coverage {
    fn ground_size(&self) -> usize {
        self.probs.cols()
    }

    fn eval(&self, set: &[bool]) -> f64 {
        (0..self.probs.rows()).map(|j| self.component(j, set)).sum()
    }

    fn bound(&self) -> f64 {
        self.probs.rows() as f64
    }

    fn multilinear(&self, x: &[f64]) -> Option<f64> {
        Some((0..self.probs.rows()).map(|j| self.component_multilinear(j, x)).sum())
    }
}

impl Decomposable for Coverage {
    fn num_components(&self) -> usize {
        self.probs.rows()
    }

    fn component(&self, j: usize, set: &[bool]) -> f64 {
        let miss: f64 = self.probs.row(j).iter().zip(set).filter(|(_, s)| **s).map(|(p, _)| 1.0 - p).product();
        1.0 - miss
    }

    fn component_multilinear(&self, j: usize, x: &[f64]) -> f64 {
        let miss: f64 = self.probs.row(j).iter().zip(x).map(|(p, x)| 1.0 - p * x).product();
        1.0 - miss
    }
}

/// `f(S) = Σ_u (Σ_{j∈S} r(u,j))^{1/2}`; rows are users.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConcaveModular {
    ratings: DenseMatrix<f64>,
}

impl ConcaveModular {
    pub fn new(ratings: DenseMatrix<f64>) -> Result<Self> {
        check_nonneg(ratings.as_slice(), "ratings")?;
        Ok(Self { ratings })
    }

    /// Ratings uniform on `{0, …, 5}`.
    pub fn random(d: usize, users: usize, rng: &mut RngStream) -> Result<Self> {
        if d == 0 || users == 0 {
            return Err(Error::InvalidParameter("concave-modular needs d, users ≥ 1".into()));
        }
        Self::new(DenseMatrix::from_fn(users, d, |_, _| rng.below(6) as f64))
    }

    /// Builds the user × item matrix from `(user, item, rating)` triplets.
    pub fn from_triplets(triplets: &[(usize, usize, f64)], users: usize, items: usize) -> Result<Self> {
        let mut m = DenseMatrix::zeros(users, items);
        for &(u, i, r) in triplets {
            if u >= users || i >= items {
                return Err(Error::Data(format!("rating ({u}, {i}) outside {users}×{items}")));
            }
            m.set(u, i, r);
        }
        Self::new(m)
    }
}

impl SetFunction for ConcaveModular {
    fn ground_size(&self) -> usize {
        self.ratings.cols()
    }

    fn eval(&self, set: &[bool]) -> f64 {
        (0..self.ratings.rows())
            .map(|u| self.ratings.row(u).iter().zip(set).filter(|(_, s)| **s).map(|(r, _)| r).sum::<f64>().sqrt())
            .sum()
    }

    fn bound(&self) -> f64 {
        (0..self.ratings.rows()).map(|u| self.ratings.row(u).iter().sum::<f64>().sqrt()).sum()
    }
}

/// `f(S) = log det(I + Σ_{S,S})` for a positive semidefinite `Σ`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LogDet {
    sigma: DenseMatrix<f64>,
}

impl LogDet {
    pub fn new(sigma: DenseMatrix<f64>) -> Result<Self> {
        if sigma.rows() != sigma.cols() {
            return Err(Error::InvalidParameter("covariance must be square".into()));
        }
        let n = sigma.rows();
        for i in 0..n {
            for j in 0..i {
                if (sigma.get(i, j) - sigma.get(j, i)).abs() > 1e-12 * (1.0 + sigma.get(i, j).abs()) {
                    return Err(Error::InvalidParameter("covariance must be symmetric".into()));
                }
            }
        }
        if sigma.symmetric_eigenvalues().first().is_some_and(|l| *l < -1e-10) {
            return Err(Error::InvalidParameter("covariance must be positive semidefinite".into()));
        }
        Ok(Self { sigma })
    }

    /// `Σ = AAᵀ/k` with `A` a `d×k` standard Gaussian matrix.
    pub fn random(d: usize, k: usize, rng: &mut RngStream) -> Result<Self> {
        if d == 0 || k == 0 {
            return Err(Error::InvalidParameter("log-det needs d, k ≥ 1".into()));
        }
        let a = DenseMatrix::from_fn(d, k, |_, _| rng.normal());
        let mut s = a.transpose().gram();
        for v in 0..d * d {
            let (i, j) = (v / d, v % d);
            s.set(i, j, s.get(i, j) / k as f64);
        }
        Self::new(s)
    }
}

impl SetFunction for LogDet {
    fn ground_size(&self) -> usize {
        self.sigma.rows()
    }

    fn eval(&self, set: &[bool]) -> f64 {
        let idx: Vec<usize> = (0..set.len()).filter(|&i| set[i]).collect();
        if idx.is_empty() {
            return 0.0;
        }
        let m = DenseMatrix::from_fn(idx.len(), idx.len(), |a, b| {
            self.sigma.get(idx[a], idx[b]) + if a == b { 1.0 } else { 0.0 }
        });
        m.log_det_spd().unwrap_or(f64::NAN)
    }

    fn bound(&self) -> f64 {
        self.eval(&vec![true; self.ground_size()])
    }
}

/// An arbitrary set function stored as a table indexed by bitmask.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableSetFunction {
    d: usize,
    values: Vec<f64>,
    monotone: bool,
}

impl TableSetFunction {
    pub const MAX_DIM: usize = 20;

    pub fn new(d: usize, values: Vec<f64>) -> Result<Self> {
        if d == 0 || d > Self::MAX_DIM {
            return Err(Error::InvalidParameter(format!("table set function needs 1 ≤ d ≤ {}", Self::MAX_DIM)));
        }
        if values.len() != 1 << d || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("table must hold 2^d finite values".into()));
        }
        let monotone = (0..values.len()).all(|m| (0..d).all(|i| m & (1 << i) != 0 || values[m] <= values[m | 1 << i]));
        Ok(Self { d, values, monotone })
    }

    /// Values uniform on `[−bound, bound]`.
    pub fn random(d: usize, bound: f64, rng: &mut RngStream) -> Result<Self> {
        let values = (0..1usize << d.min(Self::MAX_DIM)).map(|_| rng.uniform_range(-bound, bound)).collect();
        Self::new(d, values)
    }

    /// Tabulates any set function.
    pub fn from_fn(f: &dyn SetFunction) -> Result<Self> {
        let d = f.ground_size();
        if d > Self::MAX_DIM {
            return Err(Error::Budget(format!("2^{d} table entries")));
        }
        let values = (0..1usize << d).map(|m| f.eval(&mask_to_set(m, d))).collect();
        Self::new(d, values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl SetFunction for TableSetFunction {
    fn ground_size(&self) -> usize {
        self.d
    }

    fn eval(&self, set: &[bool]) -> f64 {
        self.values[set_to_mask(set)]
    }

    fn bound(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    fn is_monotone(&self) -> bool {
        self.monotone
    }
}

pub fn mask_to_set(mask: usize, d: usize) -> Vec<bool> {
    (0..d).map(|i| mask & (1 << i) != 0).collect()
}

pub fn set_to_mask(set: &[bool]) -> usize {
    set.iter().enumerate().filter(|(_, s)| **s).fold(0, |m, (i, _)| m | 1 << i)
}
