//! Per-seed rows, aggregates and plot-ready curves.
//!
//! Files written next to the traces:
//! - `report.csv`: one row per run
//! - `summary.csv`: mean, std and quantiles per variant and column
//! - `<variant>.dat`: whitespace-separated mean curve for gnuplot, against
//!   oracle calls and, for distributed runs, cumulative bits

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use projfree::solvers::SolveTrace;

use crate::experiment::RunRecord;
use crate::BenchError;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Aggregate {
    pub variant: String,
    pub column: String,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
}

#[derive(Clone, Debug)]
pub struct Report {
    pub rows: Vec<RunRecord>,
    /// quantized over unquantized bits for the same seed, parallel to `rows`
    pub bits_ratio: Vec<Option<f64>>,
    pub aggregates: Vec<Aggregate>,
}

impl Report {
    pub fn aggregate(&self, variant: &str, column: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.variant == variant && a.column == column)
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.ok).count()
    }
}

/// One trace row as needed for curves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub t: usize,
    pub oracle_calls: u64,
    pub cum_bits: Option<u64>,
    pub objective: Option<f64>,
}

pub fn curve_of(trace: &SolveTrace) -> Vec<CurvePoint> {
    trace
        .records
        .iter()
        .map(|r| CurvePoint { t: r.t, oracle_calls: r.oracle_calls, cum_bits: r.cum_bits, objective: r.objective })
        .collect()
}

pub fn read_curve(path: &Path) -> Result<Vec<CurvePoint>, BenchError> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
    let headers = rd.headers().map_err(|e| BenchError::Io(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (t, calls, bits, obj) = (col("t"), col("oracle_calls"), col("cum_bits"), col("objective"));
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| BenchError::Io(e.to_string()))?;
        let get = |i: Option<usize>| i.and_then(|i| rec.get(i)).filter(|s| !s.is_empty());
        out.push(CurvePoint {
            t: get(t).and_then(|s| s.parse().ok()).unwrap_or(0),
            oracle_calls: get(calls).and_then(|s| s.parse().ok()).unwrap_or(0),
            cum_bits: get(bits).and_then(|s| s.parse().ok()),
            objective: get(obj).and_then(|s| s.parse().ok()),
        });
    }
    Ok(out)
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation; zero for a single value.
pub fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Linear interpolation between order statistics.
pub fn quantile(v: &[f64], q: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let pos = q * (s.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

fn summarize(variant: &str, column: &str, values: &[f64]) -> Option<Aggregate> {
    if values.is_empty() {
        return None;
    }
    Some(Aggregate {
        variant: variant.to_string(),
        column: column.to_string(),
        count: values.len(),
        mean: mean(values),
        std: std_dev(values),
        q10: quantile(values, 0.1),
        q50: quantile(values, 0.5),
        q90: quantile(values, 0.9),
    })
}

fn bits_ratios(rows: &[RunRecord]) -> Vec<Option<f64>> {
    let reference: BTreeMap<u64, u64> = rows
        .iter()
        .filter(|r| r.variant == "unquantized")
        .filter_map(|r| r.cum_bits.map(|b| (r.seed, b)))
        .collect();
    rows.iter()
        .map(|r| match (r.cum_bits, reference.get(&r.seed)) {
            (Some(b), Some(&u)) if u > 0 => Some(b as f64 / u as f64),
            _ => None,
        })
        .collect()
}

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn write(dir: &Path, file: &str, text: &str) -> Result<(), BenchError> {
    fs::write(dir.join(file), text).map_err(|e| BenchError::Io(format!("{file}: {e}")))
}

/// Writes `report.csv`, `summary.csv` and one `.dat` curve per variant.
/// `curves` is parallel to `rows`; failed runs have no curve.
pub fn emit_report(
    dir: &Path,
    rows: &[RunRecord],
    traces: &[Option<SolveTrace>],
    distsim: bool,
) -> Result<Report, BenchError> {
    let curves: Vec<Option<Vec<CurvePoint>>> = traces.iter().map(|t| t.as_ref().map(curve_of)).collect();
    emit_from_curves(dir, rows, &curves, distsim)
}

pub fn emit_from_curves(
    dir: &Path,
    rows: &[RunRecord],
    curves: &[Option<Vec<CurvePoint>>],
    distsim: bool,
) -> Result<Report, BenchError> {
    if rows.is_empty() {
        return Err(BenchError::Io("no runs to report".into()));
    }
    let bits_ratio = bits_ratios(rows);
    let mut csv = String::from(
        "variant,seed,ok,iterations,final_objective,final_gap,opt_ratio,cum_bits,bits_ratio,runtime_ms,error\n",
    );
    for (r, ratio) in rows.iter().zip(&bits_ratio) {
        let error = r.error.as_deref().unwrap_or("").replace(['"', '\n'], " ");
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{:.3},\"{}\"",
            r.variant,
            r.seed,
            r.ok,
            r.iterations,
            cell(r.final_objective),
            cell(r.final_gap),
            cell(r.opt_ratio),
            cell(r.cum_bits),
            cell(*ratio),
            r.runtime_ms,
            error
        );
    }
    write(dir, "report.csv", &csv)?;

    let mut variants: Vec<&str> = Vec::new();
    for r in rows {
        if !variants.contains(&r.variant.as_str()) {
            variants.push(&r.variant);
        }
    }
    let mut aggregates = Vec::new();
    for v in &variants {
        let pick = |f: &dyn Fn(usize) -> Option<f64>| -> Vec<f64> {
            (0..rows.len()).filter(|&i| rows[i].variant == *v && rows[i].ok).filter_map(f).collect()
        };
        let columns: [(&str, Vec<f64>); 6] = [
            ("final_objective", pick(&|i| rows[i].final_objective)),
            ("final_gap", pick(&|i| rows[i].final_gap)),
            ("opt_ratio", pick(&|i| rows[i].opt_ratio)),
            ("cum_bits", pick(&|i| rows[i].cum_bits.map(|b| b as f64))),
            ("bits_ratio", pick(&|i| bits_ratio[i])),
            ("runtime_ms", pick(&|i| Some(rows[i].runtime_ms))),
        ];
        aggregates.extend(columns.iter().filter_map(|(c, vals)| summarize(v, c, vals)));
    }
    let mut summary = String::from("variant,column,count,mean,std,q10,q50,q90\n");
    for a in &aggregates {
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{},{},{}",
            a.variant, a.column, a.count, a.mean, a.std, a.q10, a.q50, a.q90
        );
    }
    write(dir, "summary.csv", &summary)?;

    for v in &variants {
        let runs: Vec<&Vec<CurvePoint>> =
            (0..rows.len()).filter(|&i| rows[i].variant == *v).filter_map(|i| curves[i].as_ref()).collect();
        if runs.is_empty() {
            continue;
        }
        let len = runs.iter().map(|c| c.len()).min().unwrap_or(0);
        let mut dat = String::from(if distsim {
            "# t oracle_calls mean_cum_bits mean_objective std_objective runs\n"
        } else {
            "# t oracle_calls mean_objective std_objective runs\n"
        });
        for k in 0..len {
            let p = runs[0][k];
            let obj: Vec<f64> = runs.iter().filter_map(|c| c[k].objective).collect();
            let (m, s) = if obj.is_empty() { (f64::NAN, f64::NAN) } else { (mean(&obj), std_dev(&obj)) };
            if distsim {
                let bits: Vec<f64> = runs.iter().filter_map(|c| c[k].cum_bits.map(|b| b as f64)).collect();
                let b = if bits.is_empty() { f64::NAN } else { mean(&bits) };
                let _ = writeln!(dat, "{} {} {} {} {} {}", p.t, p.oracle_calls, b, m, s, obj.len());
            } else {
                let _ = writeln!(dat, "{} {} {} {} {}", p.t, p.oracle_calls, m, s, obj.len());
            }
        }
        write(dir, &format!("{v}.dat"), &dat)?;
    }
    Ok(Report { rows: rows.to_vec(), bits_ratio, aggregates })
}

/// Rebuilds the report of an earlier run from its JSON sidecars and traces.
pub fn report_dir(dir: &Path) -> Result<Report, BenchError> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .map_err(|e| BenchError::Io(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.file_name().is_some_and(|n| n != "config.json"))
        .collect();
    entries.sort();
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for p in entries {
        let text = fs::read_to_string(&p).map_err(|e| BenchError::Io(e.to_string()))?;
        let Ok(rec) = serde_json::from_str::<RunRecord>(&text) else { continue };
        let curve = match &rec.trace_file {
            Some(f) => Some(read_curve(&dir.join(f))?),
            None => None,
        };
        rows.push(rec);
        curves.push(curve);
    }
    let distsim = rows.iter().any(|r| r.cum_bits.is_some());
    emit_from_curves(dir, &rows, &curves, distsim)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(variant: &str, seed: u64, obj: f64, bits: Option<u64>) -> RunRecord {
        RunRecord {
            name: "r".into(),
            config_hash: "h".into(),
            variant: variant.into(),
            seed,
            ok: true,
            error: None,
            iterations: 3,
            final_objective: Some(obj),
            final_gap: None,
            opt_ratio: None,
            cum_bits: bits,
            runtime_ms: 1.0,
            trace_file: None,
        }
    }

    #[test]
    fn statistics() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&v), 2.5);
        assert!((std_dev(&v) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(std_dev(&[7.0]), 0.0);
    }

    #[test]
    fn mean_column_matches_rows() {
        let tmp = tempfile::tempdir().unwrap();
        let rows: Vec<RunRecord> = (0..50).map(|s| row("base", s, (s as f64).sin(), None)).collect();
        let report = emit_from_curves(tmp.path(), &rows, &vec![None; 50], false).unwrap();
        let direct = rows.iter().map(|r| r.final_objective.unwrap()).sum::<f64>() / 50.0;
        let agg = report.aggregate("base", "final_objective").unwrap();
        assert!((agg.mean - direct).abs() <= 1e-12);
        assert_eq!(agg.count, 50);
    }

    #[test]
    fn single_run_row_equals_trace_end() {
        let tmp = tempfile::tempdir().unwrap();
        let mut trace = SolveTrace::new(projfree::Vector::zeros(1));
        for t in 1..=3 {
            trace.records.push(projfree::solvers::IterationRecord {
                t,
                objective: Some(1.0 / t as f64),
                oracle_calls: t as u64,
                ..Default::default()
            });
        }
        let r = row("base", 0, 1.0 / 3.0, None);
        let report = emit_report(tmp.path(), &[r], &[Some(trace)], false).unwrap();
        assert_eq!(report.rows[0].final_objective, Some(1.0 / 3.0));
        let dat = std::fs::read_to_string(tmp.path().join("base.dat")).unwrap();
        assert_eq!(dat.lines().last().unwrap(), format!("3 3 {} 0 1", 1.0 / 3.0));
    }

    #[test]
    fn distsim_pair_has_bits_ratio() {
        let tmp = tempfile::tempdir().unwrap();
        let rows = vec![row("quantized", 0, 0.1, Some(300)), row("unquantized", 0, 0.1, Some(1200))];
        let report = emit_from_curves(tmp.path(), &rows, &[None, None], true).unwrap();
        assert_eq!(report.bits_ratio[0], Some(0.25));
        assert!(report.aggregate("quantized", "bits_ratio").unwrap().mean > 0.0);
        let csv = std::fs::read_to_string(tmp.path().join("report.csv")).unwrap();
        assert!(csv.lines().next().unwrap().contains("bits_ratio"));
    }

    #[test]
    fn empty_report_is_an_error() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(emit_from_curves(tmp.path(), &[], &[], false).is_err());
    }
}
