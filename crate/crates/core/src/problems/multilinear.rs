use super::setfn::{mask_to_set, SetFunction};
use crate::error::{Error, Result};
use crate::{Matrix, Vector};

/// Largest ground set enumerated exactly.
pub const ENUMERATION_MAX_DIM: usize = 20;

#[derive(Clone, Debug)]
pub struct MultilinearExact {
    pub value: f64,
    pub grad: Vector,
    pub hess: Matrix,
}

/// A set function tabulated over all `2^d` subsets, for exact evaluation of
/// its multilinear extension and derivatives.
#[derive(Clone, Debug)]
pub struct MultilinearTable {
    d: usize,
    values: Vec<f64>,
}

pub(crate) fn check_unit_cube(x: &[f64]) -> Result<()> {
    if let Some((i, v)) = x.iter().enumerate().find(|(_, v)| !(**v >= -1e-9 && **v <= 1.0 + 1e-9)) {
        return Err(Error::Domain(format!("coordinate {i} = {v} outside [0, 1]")));
    }
    Ok(())
}

impl MultilinearTable {
    pub fn new(f: &dyn SetFunction) -> Result<Self> {
        let d = f.ground_size();
        if d > ENUMERATION_MAX_DIM {
            return Err(Error::Budget(format!("2^{d} subsets exceed the enumeration limit 2^{ENUMERATION_MAX_DIM}")));
        }
        let values = (0..1usize << d).map(|m| f.eval(&mask_to_set(m, d))).collect();
        Ok(Self { d, values })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `P(S = mask)` under independent inclusion with probabilities `x`.
    fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let mut p = Vec::with_capacity(1 << self.d);
        p.push(1.0);
        for (i, &xi) in x.iter().enumerate() {
            let xi = xi.clamp(0.0, 1.0);
            for m in 0..1usize << i {
                let base = p[m];
                p[m] = base * (1.0 - xi);
                p.push(base * xi);
            }
        }
        p
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: x.len() });
        }
        check_unit_cube(x)
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.probabilities(x).iter().zip(&self.values).map(|(p, f)| p * f).sum())
    }

    pub fn value_grad(&self, x: &[f64]) -> Result<(f64, Vector)> {
        self.check(x)?;
        let p = self.probabilities(x);
        let value = p.iter().zip(&self.values).map(|(p, f)| p * f).sum();
        Ok((value, self.grad_from(&p)))
    }

    fn grad_from(&self, p: &[f64]) -> Vector {
        let mut g = vec![0.0; self.d];
        for (i, gi) in g.iter_mut().enumerate() {
            let bit = 1usize << i;
            // marginal law of the other coordinates is P(m) + P(m ∪ {i})
            for m in (0..p.len()).filter(|m| m & bit == 0) {
                *gi += (p[m] + p[m | bit]) * (self.values[m | bit] - self.values[m]);
            }
        }
        Vector::from_vec_unchecked(g)
    }

    pub fn exact(&self, x: &[f64]) -> Result<MultilinearExact> {
        self.check(x)?;
        let p = self.probabilities(x);
        let value = p.iter().zip(&self.values).map(|(p, f)| p * f).sum();
        let grad = self.grad_from(&p);
        let d = self.d;
        let mut hess = Matrix::zeros(d, d);
        for i in 0..d {
            for j in (i + 1)..d {
                let (bi, bj) = (1usize << i, 1usize << j);
                let mut h = 0.0;
                for m in (0..p.len()).filter(|m| m & (bi | bj) == 0) {
                    let w = p[m] + p[m | bi] + p[m | bj] + p[m | bi | bj];
                    let v = &self.values;
                    h += w * (v[m | bi | bj] - v[m | bi] - v[m | bj] + v[m]);
                }
                hess.set(i, j, h);
                hess.set(j, i, h);
            }
        }
        Ok(MultilinearExact { value, grad, hess })
    }
}

/// Exact `F(x)`, `∇F(x)` and `∇²F(x)` of the multilinear extension by
/// enumeration of all subsets.
pub fn multilinear_exact(f: &dyn SetFunction, x: &Vector) -> Result<MultilinearExact> {
    MultilinearTable::new(f)?.exact(x.as_slice())
}

/// `F(x)`, from the closed form when `f` has one, else by enumeration.
pub fn multilinear_value(f: &dyn SetFunction, x: &[f64]) -> Result<f64> {
    check_unit_cube(x)?;
    match f.multilinear(x) {
        Some(v) => Ok(v),
        None => MultilinearTable::new(f)?.value(x),
    }
}

/// `∂F/∂x_i = F(x | x_i = 1) − F(x | x_i = 0)` for any multilinear `F`.
pub fn pinned_grad(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = 1.0;
            let hi = f(&y);
            y[i] = 0.0;
            let lo = f(&y);
            y[i] = x[i];
            hi - lo
        })
        .collect()
}

/// `∇²F(x)·u` for a multilinear `F` by pinning pairs of coordinates.
pub fn pinned_hess_vec(f: impl Fn(&[f64]) -> f64, x: &[f64], u: &[f64]) -> Vec<f64> {
    let d = x.len();
    let mut y = x.to_vec();
    let mut out = vec![0.0; d];
    for i in 0..d {
        for j in (i + 1)..d {
            if u[i] == 0.0 && u[j] == 0.0 {
                continue;
            }
            let mut corner = |a: f64, b: f64| {
                y[i] = a;
                y[j] = b;
                f(&y)
            };
            let h = corner(1.0, 1.0) - corner(1.0, 0.0) - corner(0.0, 1.0) + corner(0.0, 0.0);
            y[i] = x[i];
            y[j] = x[j];
            out[i] += h * u[j];
            out[j] += h * u[i];
        }
    }
    out
}
