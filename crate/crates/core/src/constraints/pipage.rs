use super::set::PartitionMatroid;
use crate::error::{Error, Result};
use crate::problems::multilinear::{MultilinearTable, ENUMERATION_MAX_DIM};
use crate::problems::SetFunction;
use crate::rng::RngStream;
use crate::Vector;

/// Draws used to estimate the multilinear extension above the enumeration limit.
pub const PIPAGE_MC_SAMPLES: usize = 200;

const INTEGRAL_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct PipageOutcome {
    /// Indicator of the rounded base.
    pub set: Vec<bool>,
    /// `F` at the starting point and after every move.
    pub path: Vec<f64>,
    /// Whether `path` holds exact values (enumeration or closed form).
    pub exact: bool,
}

enum Evaluator<'a> {
    Exact(&'a dyn SetFunction),
    Table(MultilinearTable),
    Sampled(&'a dyn SetFunction),
}

impl Evaluator<'_> {
    fn eval(&self, y: &[f64], rng: &mut RngStream) -> Result<f64> {
        match self {
            Evaluator::Exact(f) => Ok(f.multilinear(y).expect("closed form advertised")),
            Evaluator::Table(t) => t.value(y),
            Evaluator::Sampled(f) => {
                let mut s = vec![false; y.len()];
                let mut acc = 0.0;
                for _ in 0..PIPAGE_MC_SAMPLES {
                    for (si, yi) in s.iter_mut().zip(y) {
                        *si = rng.bernoulli(yi.clamp(0.0, 1.0));
                    }
                    acc += f.eval(&s);
                }
                Ok(acc / PIPAGE_MC_SAMPLES as f64)
            }
        }
    }
}

fn is_fractional(v: f64) -> bool {
    v > INTEGRAL_TOL && v < 1.0 - INTEGRAL_TOL
}

/// Rounds a point of the base polytope of `m` to a base without decreasing
/// the multilinear extension of `f`.
///
/// Within each block the two smallest-index fractional coordinates `(i, j)`
/// are moved along `e_i − e_j` to whichever endpoint has the larger `F`;
/// on ties the endpoint that makes `x_i` integral wins, raising before lowering.
pub fn pipage_round(x: &Vector, m: &PartitionMatroid, f: &dyn SetFunction, rng: &mut RngStream) -> Result<PipageOutcome> {
    let d = m.ground_size();
    x.check_dim(d)?;
    if f.ground_size() != d {
        return Err(Error::DimensionMismatch { expected: d, got: f.ground_size() });
    }
    if let Some(i) = (0..d).find(|&i| !(x[i] >= -1e-9 && x[i] <= 1.0 + 1e-9)) {
        return Err(Error::Infeasible(format!("coordinate {i} = {} outside [0, 1]", x[i])));
    }
    for (j, (block, &budget)) in m.blocks().iter().zip(m.budgets()).enumerate() {
        let sum: f64 = block.iter().map(|&i| x[i]).sum();
        if (sum - budget as f64).abs() > 1e-9 {
            return Err(Error::Infeasible(format!("block {j} sums to {sum}, budget is {budget}")));
        }
    }
    let evaluator = if f.multilinear(&vec![0.0; d]).is_some() {
        Evaluator::Exact(f)
    } else if d <= ENUMERATION_MAX_DIM {
        Evaluator::Table(MultilinearTable::new(f)?)
    } else {
        Evaluator::Sampled(f)
    };
    let exact = !matches!(evaluator, Evaluator::Sampled(_));

    let mut y: Vec<f64> = x.iter().map(|v| snap(v.clamp(0.0, 1.0))).collect();
    let mut path = vec![evaluator.eval(&y, rng)?];
    for block in m.blocks() {
        loop {
            let mut frac = block.iter().copied().filter(|&i| is_fractional(y[i]));
            let (Some(i), Some(j)) = (frac.next(), frac.next()) else {
                break;
            };
            let up = (1.0 - y[i]).min(y[j]);
            let down = y[i].min(1.0 - y[j]);
            let mut hi = y.clone();
            hi[i] = snap(hi[i] + up);
            hi[j] = snap(hi[j] - up);
            let mut lo = y.clone();
            lo[i] = snap(lo[i] - down);
            lo[j] = snap(lo[j] + down);
            let f_hi = evaluator.eval(&hi, rng)?;
            let f_lo = evaluator.eval(&lo, rng)?;
            let take_hi = if f_hi != f_lo {
                f_hi > f_lo
            } else {
                !is_fractional(hi[i]) || is_fractional(lo[i])
            };
            if take_hi {
                y = hi;
                path.push(f_hi);
            } else {
                y = lo;
                path.push(f_lo);
            }
        }
    }
    let set: Vec<bool> = y.iter().map(|v| *v > 0.5).collect();
    debug_assert!(m.is_base(&set));
    Ok(PipageOutcome { set, path, exact })
}

fn snap(v: f64) -> f64 {
    if v <= INTEGRAL_TOL {
        0.0
    } else if v >= 1.0 - INTEGRAL_TOL {
        1.0
    } else {
        v
    }
}
