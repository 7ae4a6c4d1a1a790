//! Deterministic in-process master–worker simulation of quantized
//! Frank-Wolfe with a per-message bit ledger.

mod config;
mod ledger;
mod qfw;

pub use config::{
    schedule_from_theorem, BatchRule, LevelRule, LinkMode, NoiseConstants, PeriodRule, QfwConfig, QfwSetting, QfwStep,
    LEVEL_CAP,
};
pub use ledger::{BitLedger, Direction, LedgerEntry};
pub use qfw::{run_qfw, run_snc_qfw, snc_config, DistProblem, QfwRun, SncRun, SurrogateSum, FLOAT_BITS};
