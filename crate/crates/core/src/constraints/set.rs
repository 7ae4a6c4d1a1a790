use serde::{Deserialize, Serialize};

use super::nuclear::{nuclear_lmo, NUCLEAR_MAX_ITER, NUCLEAR_TOL};
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, DenseVector};
use crate::rng::RngStream;
use crate::scalar::Real;

/// Partition matroid over the ground set `0..ground_size`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionMatroid {
    ground_size: usize,
    blocks: Vec<Vec<usize>>,
    budgets: Vec<usize>,
}

impl PartitionMatroid {
    pub fn new(ground_size: usize, blocks: Vec<Vec<usize>>, budgets: Vec<usize>) -> Result<Self> {
        if ground_size == 0 {
            return Err(Error::InvalidSet("empty ground set".into()));
        }
        if blocks.len() != budgets.len() {
            return Err(Error::InvalidSet(format!(
                "{} blocks but {} budgets",
                blocks.len(),
                budgets.len()
            )));
        }
        let mut seen = vec![false; ground_size];
        let mut blocks = blocks;
        for (j, block) in blocks.iter_mut().enumerate() {
            block.sort_unstable();
            for &i in block.iter() {
                if i >= ground_size {
                    return Err(Error::InvalidSet(format!("index {i} outside ground set")));
                }
                if seen[i] {
                    return Err(Error::InvalidSet(format!("index {i} in two blocks")));
                }
                seen[i] = true;
            }
            if budgets[j] > block.len() {
                return Err(Error::InvalidSet(format!(
                    "budget {} exceeds block {j} of size {}",
                    budgets[j],
                    block.len()
                )));
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidSet(format!("index {i} not covered by any block")));
        }
        Ok(Self { ground_size, blocks, budgets })
    }

    /// Contiguous blocks of the given sizes.
    pub fn contiguous(sizes: &[usize], budgets: Vec<usize>) -> Result<Self> {
        let mut blocks = Vec::with_capacity(sizes.len());
        let mut start = 0;
        for &s in sizes {
            blocks.push((start..start + s).collect());
            start += s;
        }
        Self::new(start, blocks, budgets)
    }

    pub fn ground_size(&self) -> usize {
        self.ground_size
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn budgets(&self) -> &[usize] {
        &self.budgets
    }

    pub fn rank(&self) -> usize {
        self.budgets.iter().sum()
    }

    pub fn is_independent(&self, set: &[bool]) -> bool {
        self.blocks
            .iter()
            .zip(&self.budgets)
            .all(|(b, &cap)| b.iter().filter(|&&i| set[i]).count() <= cap)
    }

    pub fn is_base(&self, set: &[bool]) -> bool {
        self.blocks
            .iter()
            .zip(&self.budgets)
            .all(|(b, &cap)| b.iter().filter(|&&i| set[i]).count() == cap)
    }

    /// Number of bases, saturating at `u64::MAX`.
    pub fn base_count(&self) -> u64 {
        self.blocks
            .iter()
            .zip(&self.budgets)
            .fold(1u64, |acc, (b, &k)| acc.saturating_mul(binomial(b.len() as u64, k as u64)))
    }

    /// Calls `visit` with the indicator of every base, blocks varying in
    /// lexicographic order of their chosen index combinations.
    pub fn for_each_base(&self, mut visit: impl FnMut(&[bool])) {
        let combos: Vec<Vec<Vec<usize>>> = self
            .blocks
            .iter()
            .zip(&self.budgets)
            .map(|(b, &k)| combinations(b, k))
            .collect();
        let mut choice = vec![0usize; combos.len()];
        let mut set = vec![false; self.ground_size];
        loop {
            set.iter_mut().for_each(|s| *s = false);
            for (j, c) in choice.iter().enumerate() {
                for &i in &combos[j][*c] {
                    set[i] = true;
                }
            }
            visit(&set);
            // odometer increment
            let mut j = 0;
            loop {
                if j == choice.len() {
                    return;
                }
                choice[j] += 1;
                if choice[j] < combos[j].len() {
                    break;
                }
                choice[j] = 0;
                j += 1;
            }
        }
    }
}

pub(crate) fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(items: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            if items.len() - i < k - cur.len() {
                break;
            }
            cur.push(items[i]);
            rec(items, k, i + 1, cur, out);
            cur.pop();
        }
    }
    rec(items, k, 0, &mut cur, &mut out);
    out
}

/// `{y : 0 ≤ y ≤ upper} ∩ (inner − offset·1)`, the only intersection shape
/// with an exact greedy linear oracle here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intersection<T> {
    upper: Vec<T>,
    inner: Box<FeasibleSet<T>>,
    offset: T,
}

impl<T: Real> Intersection<T> {
    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn inner(&self) -> &FeasibleSet<T> {
        &self.inner
    }

    pub fn offset(&self) -> T {
        self.offset
    }

    fn matroid(&self) -> &PartitionMatroid {
        match self.inner.kind() {
            SetKind::PartitionMatroidPolytope(m) => m,
            _ => unreachable!("validated at construction"),
        }
    }

    /// Per-coordinate cap after intersecting with the translated unit cube.
    fn cap(&self, i: usize) -> T {
        self.upper[i].min(T::one() - self.offset).max(T::zero())
    }

    /// Mass each block must carry: `budget_j − offset·|block_j|`.
    fn block_mass(&self, j: usize) -> T {
        let m = self.matroid();
        T::lit(m.budgets[j] as f64) - self.offset * T::lit(m.blocks[j].len() as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SetKind<T> {
    L1Ball { dim: usize, radius: T },
    Box { lower: Vec<T>, upper: Vec<T> },
    /// `{x ≥ 0 : Σx = scale}`
    Simplex { dim: usize, scale: T },
    /// `{0 ≤ x ≤ 1 : Σ_{i∈block_j} x_i ≤ budget_j}`
    PartitionMatroidPolytope(PartitionMatroid),
    /// Matrices flattened row-major.
    NuclearNormBall { radius: T, rows: usize, cols: usize },
    Intersection(Intersection<T>),
}

/// A validated compact convex set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibleSet<T> {
    kind: SetKind<T>,
}

fn positive<T: Real>(v: T, what: &str) -> Result<()> {
    if !(v.is_finite() && v > T::zero()) {
        return Err(Error::InvalidSet(format!("{what} must be positive and finite, got {v}")));
    }
    Ok(())
}

/// Sort order for greedy oracles: decreasing key, smallest index first on ties.
fn order_desc<T: Real>(idx: &mut [usize], key: impl Fn(usize) -> T) {
    idx.sort_by(|&a, &b| {
        key(b)
            .partial_cmp(&key(a))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
}

impl<T: Real> FeasibleSet<T> {
    pub fn l1_ball(dim: usize, radius: T) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSet("dim must be >= 1".into()));
        }
        positive(radius, "radius")?;
        Ok(Self { kind: SetKind::L1Ball { dim, radius } })
    }

    pub fn boxed(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidSet("box bounds must be nonempty and of equal length".into()));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite()) || l > u {
                return Err(Error::InvalidSet(format!("coordinate {i}: lower {l} > upper {u}")));
            }
        }
        Ok(Self { kind: SetKind::Box { lower, upper } })
    }

    pub fn unit_box(dim: usize) -> Result<Self> {
        Self::boxed(vec![T::zero(); dim], vec![T::one(); dim])
    }

    pub fn simplex(dim: usize, scale: T) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSet("dim must be >= 1".into()));
        }
        positive(scale, "scale")?;
        Ok(Self { kind: SetKind::Simplex { dim, scale } })
    }

    pub fn partition_matroid(m: PartitionMatroid) -> Self {
        Self { kind: SetKind::PartitionMatroidPolytope(m) }
    }

    pub fn nuclear_ball(radius: T, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidSet("matrix shape must be positive".into()));
        }
        positive(radius, "radius")?;
        Ok(Self { kind: SetKind::NuclearNormBall { radius, rows, cols } })
    }

    /// `{0 ≤ y ≤ upper} ∩ (inner − offset·1)`; only a partition-matroid
    /// polytope is accepted as `inner`.
    pub fn intersection(upper: Vec<T>, inner: FeasibleSet<T>, offset: T) -> Result<Self> {
        if !matches!(inner.kind, SetKind::PartitionMatroidPolytope(_)) {
            return Err(Error::Unsupported(
                "intersection oracle is exact only for box ∩ translated matroid polytope".into(),
            ));
        }
        if upper.len() != inner.dim() {
            return Err(Error::DimensionMismatch { expected: inner.dim(), got: upper.len() });
        }
        if upper.iter().any(|u| !(u.is_finite() && *u >= T::zero())) || !(offset >= T::zero()) {
            return Err(Error::InvalidSet("intersection bounds must be non-negative".into()));
        }
        let it = Intersection { upper, inner: Box::new(inner), offset };
        for j in 0..it.matroid().blocks.len() {
            if it.block_mass(j) < -T::membership_tol() {
                return Err(Error::InfeasibleShrink(format!(
                    "block {j} cannot hold the translated budget (mass {})",
                    it.block_mass(j)
                )));
            }
        }
        Ok(Self { kind: SetKind::Intersection(it) })
    }

    pub fn kind(&self) -> &SetKind<T> {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            SetKind::L1Ball { dim, .. } | SetKind::Simplex { dim, .. } => *dim,
            SetKind::Box { lower, .. } => lower.len(),
            SetKind::PartitionMatroidPolytope(m) => m.ground_size,
            SetKind::NuclearNormBall { rows, cols, .. } => rows * cols,
            SetKind::Intersection(it) => it.upper.len(),
        }
    }

    pub fn contains(&self, x: &DenseVector<T>) -> bool {
        self.contains_tol(x, T::membership_tol())
    }

    pub fn contains_tol(&self, x: &DenseVector<T>, tol: T) -> bool {
        if x.dim() != self.dim() || !x.is_finite() {
            return false;
        }
        let x = x.as_slice();
        match &self.kind {
            SetKind::L1Ball { radius, .. } => x.iter().map(|v| v.abs()).sum::<T>() <= *radius + tol,
            SetKind::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= *l - tol && *v <= *u + tol),
            SetKind::Simplex { scale, .. } => {
                x.iter().all(|v| *v >= -tol) && (x.iter().copied().sum::<T>() - *scale).abs() <= tol
            }
            SetKind::PartitionMatroidPolytope(m) => {
                x.iter().all(|v| *v >= -tol && *v <= T::one() + tol)
                    && m.blocks.iter().zip(&m.budgets).all(|(b, &cap)| {
                        b.iter().map(|&i| x[i]).sum::<T>() <= T::lit(cap as f64) + tol
                    })
            }
            SetKind::NuclearNormBall { radius, rows, cols } => {
                let m = DenseMatrix::from_row_major(*rows, *cols, x.to_vec()).expect("shape checked");
                m.nuclear_norm() <= *radius + tol
            }
            SetKind::Intersection(it) => {
                x.iter().zip(&it.upper).all(|(v, u)| *v >= -tol && *v <= *u + tol) && {
                    let shifted = DenseVector::from_fn(x.len(), |i| x[i] + it.offset);
                    it.inner.contains_tol(&shifted, tol)
                }
            }
        }
    }

    /// `argmin_{v ∈ set} ⟨v, g⟩`
    pub fn lmo_min(&self, g: &DenseVector<T>) -> Result<DenseVector<T>> {
        self.lmo(g, false)
    }

    /// `argmax_{v ∈ set} ⟨v, g⟩`
    pub fn lmo_max(&self, g: &DenseVector<T>) -> Result<DenseVector<T>> {
        self.lmo(g, true)
    }

    fn lmo(&self, g: &DenseVector<T>, maximize: bool) -> Result<DenseVector<T>> {
        g.check_dim(self.dim())?;
        if !g.is_finite() {
            return Err(Error::NonFinite("LMO direction".into()));
        }
        let d = self.dim();
        // maximizing <v,g> is minimizing <v,-g>; work with the score s = ±g to maximize
        let sign = if maximize { T::one() } else { -T::one() };
        let s = |i: usize| sign * g[i];
        let zero_dir = g.iter().all(|v| *v == T::zero());
        let v = match &self.kind {
            SetKind::L1Ball { radius, .. } => {
                let mut v = DenseVector::zeros(d);
                if zero_dir {
                    v[0] = -*radius;
                } else {
                    let mut best = 0;
                    for i in 1..d {
                        if g[i].abs() > g[best].abs() {
                            best = i;
                        }
                    }
                    v[best] = *radius * s(best).signum();
                }
                v
            }
            SetKind::Box { lower, upper } => {
                DenseVector::from_fn(d, |i| if s(i) > T::zero() { upper[i] } else { lower[i] })
            }
            SetKind::Simplex { scale, .. } => {
                let mut v = DenseVector::zeros(d);
                if zero_dir {
                    v[d - 1] = *scale;
                } else {
                    let mut best = 0;
                    for i in 1..d {
                        if s(i) > s(best) {
                            best = i;
                        }
                    }
                    v[best] = *scale;
                }
                v
            }
            SetKind::PartitionMatroidPolytope(m) => {
                let mut v = DenseVector::zeros(d);
                // maximization returns the greedy base; minimization keeps only
                // strictly improving coordinates, so it is exact on the down-closed polytope
                for (block, &budget) in m.blocks.iter().zip(&m.budgets) {
                    let mut idx = block.clone();
                    if zero_dir {
                        idx.reverse();
                    } else {
                        order_desc(&mut idx, s);
                    }
                    for &i in idx.iter().take(budget).filter(|&&i| maximize || s(i) > T::zero()) {
                        v[i] = T::one();
                    }
                }
                v
            }
            SetKind::NuclearNormBall { radius, rows, cols } => {
                let gm = DenseMatrix::from_vector(*rows, *cols, &g.scaled(sign))?;
                let mut rng = RngStream::new(0x6e75_636c_6561_7200, (*rows * *cols) as u64);
                // lmo for the score: maximize <v, s> = minimize <v, -s>
                let neg = DenseMatrix::from_vector(*rows, *cols, &gm.to_vector().scaled(-T::one()))?;
                nuclear_lmo(&neg, *radius, T::lit(NUCLEAR_TOL), NUCLEAR_MAX_ITER, &mut rng)?
                    .matrix
                    .to_vector()
            }
            SetKind::Intersection(it) => {
                let m = it.matroid();
                let mut v = DenseVector::zeros(d);
                for (j, block) in m.blocks.iter().enumerate() {
                    let mut remaining = it.block_mass(j).max(T::zero());
                    let mut idx = block.clone();
                    if zero_dir {
                        idx.reverse();
                    } else {
                        order_desc(&mut idx, s);
                    }
                    for &i in &idx {
                        if remaining <= T::zero() {
                            break;
                        }
                        let take = it.cap(i).min(remaining);
                        v[i] = take;
                        remaining = remaining - take;
                    }
                }
                v
            }
        };
        Ok(v)
    }

    /// Exact for L1Ball, Box, Simplex and NuclearNormBall; an upper bound
    /// (diameter of the containing box) for the others.
    pub fn diameter(&self) -> T {
        match &self.kind {
            SetKind::L1Ball { radius, .. } => T::lit(2.0) * *radius,
            SetKind::Box { lower, upper } => {
                lower.iter().zip(upper).map(|(l, u)| (*u - *l) * (*u - *l)).sum::<T>().sqrt()
            }
            SetKind::Simplex { dim, scale } => {
                if *dim == 1 {
                    T::zero()
                } else {
                    *scale * T::SQRT_2()
                }
            }
            SetKind::PartitionMatroidPolytope(m) => T::lit(m.ground_size as f64).sqrt(),
            SetKind::NuclearNormBall { radius, .. } => T::lit(2.0) * *radius,
            SetKind::Intersection(it) => {
                (0..it.upper.len()).map(|i| it.cap(i) * it.cap(i)).sum::<T>().sqrt()
            }
        }
    }

    /// Whether the diameter reported above is exact.
    pub fn diameter_is_exact(&self) -> bool {
        matches!(
            self.kind,
            SetKind::L1Ball { .. } | SetKind::Box { .. } | SetKind::Simplex { .. } | SetKind::NuclearNormBall { .. }
        )
    }
}
