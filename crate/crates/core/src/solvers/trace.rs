use std::io::Write;

use serde::Serialize;

use super::schedule::OutputRule;
use crate::error::Result;
use crate::Vector;

/// One trace row. Row `t` describes the state after the `t`-th update:
/// `objective` and `fw_gap` are evaluated at `x_{t+1}`, while `est_error`
/// is `‖∇F(x_t) − d_t‖²` for the estimate used in that update.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct IterationRecord {
    pub t: usize,
    pub objective: Option<f64>,
    pub fw_gap: Option<f64>,
    pub est_error: Option<f64>,
    pub oracle_calls: u64,
    pub cum_bits: Option<u64>,
    pub cum_bits_up: Option<u64>,
    pub cum_bits_down: Option<u64>,
    pub wall_ms: Option<f64>,
    /// fingerprint of the iterate the row describes
    pub x_hash: u64,
}

#[derive(Clone, Debug)]
pub struct SolveTrace {
    pub records: Vec<IterationRecord>,
    pub output: Vector,
    pub output_rule: Option<OutputRule>,
    /// `o` for the uniformly random iterate rule (1-based)
    pub output_index: Option<usize>,
    /// iterates `x_1, …, x_{T+1}` when requested
    pub iterates: Vec<Vector>,
    /// number of probe points moved into an oracle domain
    pub clamp_events: usize,
}

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub const TRACE_HEADER: &str = "t,objective,fw_gap,est_error,oracle_calls,cum_bits,wall_ms";
pub const DISTSIM_TRACE_HEADER: &str = "t,objective,fw_gap,est_error,oracle_calls,cum_bits,wall_ms,cum_bits_up,cum_bits_down";

impl SolveTrace {
    pub fn new(output: Vector) -> Self {
        Self { records: Vec::new(), output, output_rule: None, output_index: None, iterates: Vec::new(), clamp_events: 0 }
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    /// Writes the CSV trace; `distsim` adds the per-direction bit columns.
    pub fn write_csv(&self, mut out: impl Write, distsim: bool) -> Result<()> {
        writeln!(out, "{}", if distsim { DISTSIM_TRACE_HEADER } else { TRACE_HEADER })?;
        for r in &self.records {
            write!(
                out,
                "{},{},{},{},{},{},{}",
                r.t,
                cell(r.objective),
                cell(r.fw_gap),
                cell(r.est_error),
                r.oracle_calls,
                cell(r.cum_bits),
                cell(r.wall_ms)
            )?;
            if distsim {
                write!(out, ",{},{}", cell(r.cum_bits_up), cell(r.cum_bits_down))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}
