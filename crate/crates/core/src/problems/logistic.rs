use std::path::Path;
use std::sync::Arc;

use super::stochastic::{ComponentHessian, Constants, FiniteSum, FiniteSumProblem};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::{Matrix, Vector};

/// Largest third derivative of `s ↦ log(1 + e^{−s})`.
const SOFTPLUS_THIRD: f64 = 0.096_225_044_864_937_6; // 1/(6√3)

fn softplus_neg(m: f64) -> f64 {
    // log(1 + e^{−m}) without overflow
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// Binary logistic loss `(1/n) Σ log(1 + exp(−y_i wᵀa_i))`, labels `±1`.
#[derive(Clone, Debug)]
pub struct LogisticL1 {
    features: Matrix,
    labels: Vec<f64>,
}

impl LogisticL1 {
    pub fn new(features: Matrix, labels: Vec<f64>) -> Result<Self> {
        if features.rows() == 0 || features.rows() != labels.len() {
            return Err(Error::Data(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if features.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite feature".into()));
        }
        let labels = normalize_labels(&labels)?;
        Ok(Self { features, labels })
    }

    /// Gaussian features; labels drawn from the logistic model of a
    /// Gaussian weight vector.
    pub fn random(n: usize, d: usize, rng: &mut RngStream) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidParameter("logistic instance needs n, d ≥ 1".into()));
        }
        let w: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let features = Matrix::from_fn(n, d, |_, _| rng.normal());
        let labels = (0..n)
            .map(|i| {
                let s: f64 = features.row(i).iter().zip(&w).map(|(a, b)| a * b).sum();
                if rng.bernoulli(sigmoid(s)) {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        Self::new(features, labels)
    }

    /// Dense numeric CSV: first column label, remaining columns features.
    /// A first row that does not parse as numbers is treated as a header.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let rows = read_numeric_csv(path)?;
        let d = rows[0].len();
        if d < 2 {
            return Err(Error::Data(format!("{}: need a label and at least one feature", path.display())));
        }
        let labels = rows.iter().map(|r| r[0]).collect();
        let feats: Vec<Vec<f64>> = rows.into_iter().map(|r| r[1..].to_vec()).collect();
        Self::new(Matrix::from_rows(&feats)?, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// A sub-problem with the given rows.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let feats: Vec<Vec<f64>> = rows.iter().map(|&i| self.features.row(i).to_vec()).collect();
        Self::new(Matrix::from_rows(&feats)?, rows.iter().map(|&i| self.labels[i]).collect())
    }

    /// Constants over the ℓ1 ball of the given radius.
    pub fn constants(&self, radius: f64) -> Constants {
        let mut a2 = 0.0f64;
        let mut ainf = 0.0f64;
        for i in 0..self.len() {
            let r = self.features.row(i);
            a2 = a2.max(r.iter().map(|v| v * v).sum::<f64>().sqrt());
            ainf = ainf.max(r.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
        Constants {
            b: softplus_neg(-radius * ainf),
            g: a2,
            l: 0.25 * a2 * a2,
            l2: SOFTPLUS_THIRD * a2.powi(3),
            estimated: false,
        }
    }

    pub fn into_problem(self, radius: f64) -> FiniteSumProblem {
        let c = self.constants(radius);
        let me = Arc::new(self);
        FiniteSumProblem::new("logistic_l1", me.clone(), c).with_hessian(me)
    }

    fn margin(&self, w: &Vector, i: usize) -> f64 {
        self.labels[i] * self.features.row(i).iter().zip(w.iter()).map(|(a, b)| a * b).sum::<f64>()
    }
}

pub(crate) fn normalize_labels(labels: &[f64]) -> Result<Vec<f64>> {
    let zero_one = labels.iter().all(|l| *l == 0.0 || *l == 1.0);
    labels
        .iter()
        .map(|&l| {
            if l == 1.0 {
                Ok(1.0)
            } else if l == -1.0 || (l == 0.0 && zero_one) {
                Ok(-1.0)
            } else {
                Err(Error::Data(format!("label {l} is not binary (expected 0/1 or ±1)")))
            }
        })
        .collect()
}

pub(crate) fn read_numeric_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
    let mut rows = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(|s| s.parse::<f64>()).collect();
        match parsed {
            Ok(r) => rows.push(r),
            Err(_) if k == 0 => continue,
            Err(e) => return Err(Error::Data(format!("{} line {}: {e}", path.display(), k + 1))),
        }
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{}: no data rows", path.display())));
    }
    let width = rows[0].len();
    if let Some(k) = rows.iter().position(|r| r.len() != width) {
        return Err(Error::Data(format!("{}: row {} has {} columns, expected {width}", path.display(), k + 1, rows[k].len())));
    }
    Ok(rows)
}

impl FiniteSum for LogisticL1 {
    fn dim(&self) -> usize {
        self.features.cols()
    }

    fn len(&self) -> usize {
        self.labels.len()
    }

    fn component_value(&self, x: &Vector, i: usize) -> Result<f64> {
        x.check_dim(self.dim())?;
        Ok(softplus_neg(self.margin(x, i)))
    }

    fn component_grad(&self, x: &Vector, i: usize) -> Result<Vector> {
        x.check_dim(self.dim())?;
        let c = -self.labels[i] * sigmoid(-self.margin(x, i));
        Ok(Vector::from_fn(self.dim(), |j| c * self.features.get(i, j)))
    }
}

impl ComponentHessian for LogisticL1 {
    fn component_hess_vec(&self, x: &Vector, i: usize, u: &Vector) -> Result<Vector> {
        x.check_dim(self.dim())?;
        u.check_dim(self.dim())?;
        let m = self.margin(x, i);
        let a = self.features.row(i);
        let au: f64 = a.iter().zip(u.iter()).map(|(p, q)| p * q).sum();
        let c = sigmoid(m) * sigmoid(-m) * au;
        Ok(Vector::from_fn(self.dim(), |j| c * a[j]))
    }
}
