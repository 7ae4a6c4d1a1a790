//! Projection-free solvers and their schedules and traces.

mod bcg;
mod fw;
mod schedule;
mod sfw;
mod trace;

pub use bcg::{bcg, dbg, BcgConfig, BcgResult, DbgConfig, DbgResult};
pub use fw::{deterministic_fw, fw_gap, FwResult, FwStep};
pub use schedule::{step_grid, ObjectiveMode, OutputRule, RhoRule, Schedule, StepRule};
pub use sfw::{
    default_start, logged_objective, one_sfw, oblivious_sfw, run_sfw, scg_baseline, DeltaRule, Estimator, SolveOptions, StepInfo,
    LOGGING_SEED,
};
pub use trace::{IterationRecord, SolveTrace, DISTSIM_TRACE_HEADER, TRACE_HEADER};
