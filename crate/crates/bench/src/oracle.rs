//! Brute-force ground truth for small matroid-constrained instances.

use projfree::constraints::PartitionMatroid;
use projfree::problems::SetFunction;
use projfree::{Error, Result};

/// Largest number of bases [`brute_force_opt`] will enumerate.
pub const MAX_BASES: u64 = 1_000_000;

/// `max f(S)` over all bases of `m`, with the first maximizer found in
/// enumeration order.
pub fn brute_force_opt(f: &dyn SetFunction, m: &PartitionMatroid) -> Result<(f64, Vec<bool>)> {
    if f.ground_size() != m.ground_size() {
        return Err(Error::DimensionMismatch { expected: m.ground_size(), got: f.ground_size() });
    }
    let count = m.base_count();
    if count > MAX_BASES {
        return Err(Error::Budget(format!("{count} bases exceed the enumeration budget of {MAX_BASES}")));
    }
    let mut best = f64::NEG_INFINITY;
    let mut arg = vec![false; m.ground_size()];
    m.for_each_base(|s| {
        let v = f.eval(s);
        if v > best {
            best = v;
            arg.copy_from_slice(s);
        }
    });
    Ok((best, arg))
}
