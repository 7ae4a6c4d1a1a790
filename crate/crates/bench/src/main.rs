use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use projfree_bench::config::{parse_seed_range, RunConfig};
use projfree_bench::experiment::{oracle_opt, run_experiment, Command};
use projfree_bench::report::{report_dir, Report};
use projfree_bench::BenchError;

#[derive(Parser)]
#[command(name = "projfree", version, about = "Projection-free stochastic optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// 1-SFW, oblivious 1-SFW, SCG or full-gradient FW on a minimization problem
    Solve(RunArgs),
    /// 1-SFW in DR-submodular maximization mode
    Submax(RunArgs),
    /// black-box continuous greedy
    Bcg(RunArgs),
    /// discrete black-box greedy with pipage rounding
    Dbg(RunArgs),
    /// distributed quantized Frank-Wolfe simulation
    Distsim(RunArgs),
    /// rebuild the report of an output directory
    Report {
        #[arg(long)]
        out: PathBuf,
    },
    /// brute-force optimum of a set function over a partition matroid
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// run a single seed
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// run seeds A..B (B exclusive)
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// replace a config value, e.g. solver.horizon=100
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn load(args: &RunArgs) -> Result<RunConfig, BenchError> {
    let mut cfg = RunConfig::load(&args.config, &args.overrides)?;
    if let Some(s) = args.seed {
        cfg.seeds = vec![s];
    }
    if let Some(r) = &args.seeds {
        cfg.seeds = parse_seed_range(r)?;
    }
    if let Some(o) = &args.out {
        cfg.out = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_summary(report: &Report) {
    for a in report.aggregates.iter().filter(|a| a.column != "runtime_ms") {
        println!(
            "{:<14} {:<16} n={:<4} mean={:.6e} std={:.3e} median={:.6e}",
            a.variant, a.column, a.count, a.mean, a.std, a.q50
        );
    }
    for r in report.rows.iter().filter(|r| !r.ok) {
        eprintln!("seed {} ({}) failed: {}", r.seed, r.variant, r.error.as_deref().unwrap_or("unknown"));
    }
}

fn run(cli: Cli) -> Result<bool, BenchError> {
    let (args, command) = match cli.command {
        Cmd::Solve(a) => (a, Command::Solve),
        Cmd::Submax(a) => (a, Command::Submax),
        Cmd::Bcg(a) => (a, Command::Bcg),
        Cmd::Dbg(a) => (a, Command::Dbg),
        Cmd::Distsim(a) => (a, Command::Distsim),
        Cmd::Report { out } => {
            let report = report_dir(&out)?;
            print_summary(&report);
            return Ok(report.failures() == 0);
        }
        Cmd::Oracle { config, overrides } => {
            let cfg = RunConfig::load(&config, &overrides)?;
            let (opt, set) = oracle_opt(&cfg)?;
            let members: Vec<usize> = (0..set.len()).filter(|&i| set[i]).collect();
            println!("OPT = {opt}");
            println!("argmax = {members:?}");
            return Ok(true);
        }
    };
    let cfg = load(&args)?;
    let report = run_experiment(&cfg, command)?;
    print_summary(&report);
    println!("wrote {}", cfg.out_dir().display());
    Ok(report.failures() == 0)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
