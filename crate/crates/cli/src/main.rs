//! `safeflow` command line: solve instances, inspect safety margins,
//! generate test data, and sample rounding statistics.
//!
//! stdout carries only machine-readable payload (JSON or CSV);
//! diagnostics go to stderr. Exit codes: 0 found/ok, 2 no safe solution,
//! 3 not found after all trials, 4 capacity below the margin regime,
//! 1 usage/IO/parse errors.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};

use safeflow::instance::{self, Instance};
use safeflow::margin;
use safeflow::mcmf::{self, RelaxError};
use safeflow::oracle;
use safeflow::rounding::{self, DriverConfig, SolveError, Verdict};

const EXIT_OK: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_NO_SAFE_SOLUTION: u8 = 2;
const EXIT_NOT_FOUND: u8 = 3;
const EXIT_CAPACITY_TOO_SMALL: u8 = 4;

/// Inclusive numeric range written as `LO:HI`.
#[derive(Debug, Clone, Copy)]
struct Range {
    lo: f64,
    hi: f64,
}

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lo, hi) = s
            .split_once(':')
            .ok_or_else(|| format!("expected LO:HI, got {s:?}"))?;
        let lo: f64 = lo.trim().parse().map_err(|e| format!("bad lower bound: {e}"))?;
        let hi: f64 = hi.trim().parse().map_err(|e| format!("bad upper bound: {e}"))?;
        Ok(Range { lo, hi })
    }
}

#[derive(Parser)]
#[command(name = "safeflow", version, about = "Unsplittable flow solver with safety margins")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance and print the rounding report as JSON.
    Solve {
        instance: PathBuf,
        /// Rounding trials before giving up.
        #[arg(long, default_value_t = 20)]
        trials: u32,
        #[arg(long, env = "SAFEFLOW_SEED", default_value_t = 0)]
        seed: u64,
        /// Reject instances whose smallest margin is at or below this.
        #[arg(long, default_value_t = 0.0)]
        rho_floor: f64,
        /// Also write the fractional flow as CSV to this path.
        #[arg(long)]
        dump_flow: Option<PathBuf>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the per-edge margin table and the trial failure bounds as CSV.
    Bound { instance: PathBuf },
    /// Generate a random instance file.
    Gen {
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        edge_prob: f64,
        /// Number of commodities.
        #[arg(long)]
        k: usize,
        /// Capacity range, LO:HI.
        #[arg(long)]
        cap_range: Range,
        /// Demand value range, LO:HI within (0, 1].
        #[arg(long)]
        demand_range: Range,
        #[arg(long, env = "SAFEFLOW_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample per-edge load statistics over repeated roundings as CSV.
    Stats {
        instance: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        roundings: u32,
        #[arg(long, env = "SAFEFLOW_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Validate an instance; with --oracle also run the exhaustive check.
    Check {
        instance: PathBuf,
        #[arg(long)]
        oracle: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{err}");
                return ExitCode::from(EXIT_OK);
            }
            eprint!("{err}");
            return ExitCode::from(EXIT_ERROR);
        }
    };
    let code = match cli.command {
        Command::Solve { instance, trials, seed, rho_floor, dump_flow, out } => {
            cmd_solve(&instance, trials, seed, rho_floor, dump_flow, out)
        }
        Command::Bound { instance } => cmd_bound(&instance),
        Command::Gen { nodes, edge_prob, k, cap_range, demand_range, seed, out } => {
            cmd_gen(nodes, edge_prob, k, cap_range, demand_range, seed, &out)
        }
        Command::Stats { instance, roundings, seed } => cmd_stats(&instance, roundings, seed),
        Command::Check { instance, oracle } => cmd_check(&instance, oracle),
    };
    ExitCode::from(code)
}

fn load_instance(path: &PathBuf) -> Result<Instance, u8> {
    instance::read_instance(path).map_err(|err| {
        eprintln!("error: {err}");
        EXIT_ERROR
    })
}

fn emit(out: Option<PathBuf>, payload: &str) -> u8 {
    match out {
        Some(path) => match fs::write(&path, payload) {
            Ok(()) => EXIT_OK,
            Err(err) => {
                eprintln!("error: cannot write {}: {err}", path.display());
                EXIT_ERROR
            }
        },
        None => {
            print!("{payload}");
            EXIT_OK
        }
    }
}

fn cmd_solve(
    path: &PathBuf,
    trials: u32,
    seed: u64,
    rho_floor: f64,
    dump_flow: Option<PathBuf>,
    out: Option<PathBuf>,
) -> u8 {
    let inst = match load_instance(path) {
        Ok(inst) => inst,
        Err(code) => return code,
    };
    let config = DriverConfig { trials, seed, rho_floor };
    let report = match rounding::solve(&inst, &config) {
        Ok(report) => report,
        Err(err @ SolveError::InvalidInstance(_)) => {
            eprintln!("error: {err}");
            return EXIT_ERROR;
        }
        Err(err @ SolveError::CapacityTooSmall(_)) => {
            eprintln!("error: {err}");
            return EXIT_CAPACITY_TOO_SMALL;
        }
        Err(err @ SolveError::IterationLimit(_)) => {
            eprintln!("error: {err}");
            return EXIT_ERROR;
        }
    };
    if let Some(flow_path) = dump_flow {
        match &report.flow {
            Some(flow) => {
                if let Err(err) = fs::write(&flow_path, mcmf::flow_to_csv(flow)) {
                    eprintln!("error: cannot write {}: {err}", flow_path.display());
                    return EXIT_ERROR;
                }
            }
            None => eprintln!("note: no flow to dump (relaxation infeasible)"),
        }
    }
    let mut payload = report.to_json_string();
    payload.push('\n');
    let emit_code = emit(out, &payload);
    if emit_code != EXIT_OK {
        return emit_code;
    }
    match report.verdict {
        Verdict::Found { .. } => EXIT_OK,
        Verdict::NoSafeSolution => {
            eprintln!("no safe solution exists");
            EXIT_NO_SAFE_SOLUTION
        }
        Verdict::NotFound => {
            eprintln!("no solution found after {} trials", report.trials_run);
            EXIT_NOT_FOUND
        }
    }
}

fn cmd_bound(path: &PathBuf) -> u8 {
    let inst = match load_instance(path) {
        Ok(inst) => inst,
        Err(code) => return code,
    };
    let report = inst.validate();
    if !report.is_ok() {
        for violation in &report.violations {
            eprintln!("error: {violation}");
        }
        return EXIT_ERROR;
    }
    let (normalized, scale) = inst.normalize().expect("validated instance");
    let m = normalized.edge_count();
    let mut csv = String::from("#schema=safeflow.bound.v1\n");
    let _ = writeln!(csv, "#scale={scale}");
    csv.push_str("record,edge,capacity,rho,shrunk_capacity,status,r,failure_bound\n");
    for edge in &normalized.edges {
        let rho = margin::rho(edge.capacity, m);
        if rho > 0.0 {
            let shrunk = rho * edge.capacity;
            let _ = writeln!(csv, "edge,{},{},{rho},{shrunk},ok,,", edge.id, edge.capacity);
        } else {
            let _ = writeln!(
                csv,
                "edge,{},{},{rho},,margin_undefined,,",
                edge.id, edge.capacity
            );
        }
    }
    for r in [1u32, 10, 20] {
        let _ = writeln!(csv, "theorem,,,,,,{r},{}", margin::failure_bound(r));
    }
    emit(None, &csv)
}

fn cmd_gen(
    nodes: usize,
    edge_prob: f64,
    k: usize,
    cap_range: Range,
    demand_range: Range,
    seed: u64,
    out: &PathBuf,
) -> u8 {
    let config = instance::GeneratorConfig {
        nodes,
        edge_prob,
        capacity_range: (cap_range.lo, cap_range.hi),
        commodities: k,
        demand_range: (demand_range.lo, demand_range.hi),
        seed,
        ..Default::default()
    };
    let inst = match instance::generate_random(&config) {
        Ok(inst) => inst,
        Err(err) => {
            eprintln!("error: {err}");
            return EXIT_ERROR;
        }
    };
    match instance::write_instance(&inst, out) {
        Ok(()) => EXIT_OK,
        Err(err) => {
            eprintln!("error: cannot write {}: {err}", out.display());
            EXIT_ERROR
        }
    }
}

fn cmd_stats(path: &PathBuf, roundings: u32, seed: u64) -> u8 {
    let inst = match load_instance(path) {
        Ok(inst) => inst,
        Err(code) => return code,
    };
    let report = inst.validate();
    if !report.is_ok() {
        for violation in &report.violations {
            eprintln!("error: {violation}");
        }
        return EXIT_ERROR;
    }
    if roundings == 0 {
        eprintln!("error: --roundings must be at least 1");
        return EXIT_ERROR;
    }
    let (normalized, scale) = inst.normalize().expect("validated instance");
    let safety = match margin::safety_params(&normalized, 0.0) {
        Ok(safety) => safety,
        Err(err) => {
            eprintln!("error: {err}");
            return EXIT_CAPACITY_TOO_SMALL;
        }
    };
    let flow = match mcmf::relax(&normalized, &safety) {
        Ok(flow) => flow,
        Err(RelaxError::NoSafeSolution) => {
            eprintln!("no safe solution exists");
            return EXIT_NO_SAFE_SOLUTION;
        }
        Err(err) => {
            eprintln!("error: {err}");
            return EXIT_ERROR;
        }
    };
    let stats = match rounding::load_statistics(&flow, &normalized, roundings, seed) {
        Ok(stats) => stats,
        Err(err) => {
            eprintln!("error: {err}");
            return EXIT_ERROR;
        }
    };
    let mut csv = String::from("#schema=safeflow.stats.v1\n");
    let _ = writeln!(csv, "#scale={scale}");
    let _ = writeln!(csv, "#roundings={roundings}");
    csv.push_str("edge,flow,mean_load,std_load,max_load\n");
    for s in &stats {
        let _ = writeln!(csv, "{},{},{},{},{}", s.edge, s.flow, s.mean, s.std, s.max);
    }
    emit(None, &csv)
}

fn cmd_check(path: &PathBuf, with_oracle: bool) -> u8 {
    let inst = match load_instance(path) {
        Ok(inst) => inst,
        Err(code) => return code,
    };
    let report = inst.validate();
    let valid = report.is_ok();
    let mut payload = serde_json::json!({
        "schema_version": 1,
        "valid": valid,
        "violations": report.violations,
    });
    if with_oracle && valid {
        let (normalized, scale) = inst.normalize().expect("validated instance");
        let safety = match margin::safety_params(&normalized, 0.0) {
            Ok(safety) => safety,
            Err(err) => {
                eprintln!("error: {err}");
                return EXIT_CAPACITY_TOO_SMALL;
            }
        };
        let verdict = match oracle::verdict(&normalized, &safety, &oracle::OracleConfig::default())
        {
            Ok(verdict) => verdict,
            Err(err) => {
                eprintln!("error: {err}");
                return EXIT_ERROR;
            }
        };
        payload["scale"] = serde_json::json!(scale);
        payload["oracle"] = serde_json::to_value(&verdict).expect("verdict serializes");
    }
    let mut text = serde_json::to_string_pretty(&payload).expect("payload serializes");
    text.push('\n');
    print!("{text}");
    if valid {
        EXIT_OK
    } else {
        EXIT_ERROR
    }
}
