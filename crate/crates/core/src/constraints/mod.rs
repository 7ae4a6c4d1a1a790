//! Feasible sets, linear oracles, the shrunk domain and pipage rounding.

mod nuclear;
mod pipage;
mod set;
mod shrink;

pub use nuclear::{nuclear_lmo, NuclearLmo, NUCLEAR_MAX_ITER, NUCLEAR_TOL};
pub use pipage::{pipage_round, PipageOutcome, PIPAGE_MC_SAMPLES};
pub use set::{FeasibleSet, Intersection, PartitionMatroid, SetKind};
pub use shrink::shrink_translate;
