//! Command-line front end: solve, verify, rearrange, oracle, report.
//!
//! Exit codes: 0 success (all verdicts pass), 1 solver failure, 2 verdict
//! failure, 64 configuration error, 65 field/grid shape mismatch, 74 i/o
//! error.

mod config;

use clap::{Parser, Subcommand};
use config::{OutputFormat, RunConfig};
use groundstate::functionals;
use groundstate::io::{read_field_csv, write_field_csv, write_level_set_csv, write_profile_csv};
use groundstate::oracle;
use groundstate::solver::{solve_least_energy, SolverResult};
use groundstate::transforms::{radial_profile, schwarz_rearrange};
use groundstate::verify::{self, Verdict};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_OK: u8 = 0;
const EXIT_SOLVER: u8 = 1;
const EXIT_VERDICT: u8 = 2;
const EXIT_CONFIG: u8 = 64;
const EXIT_SHAPE: u8 = 65;
const EXIT_IO: u8 = 74;

#[derive(Parser)]
#[command(
    name = "groundstate",
    about = "Least-energy states of p-Laplacian systems by constrained grid minimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the constrained minimization and the verification suite.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the solver seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the output directory from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Threads for multi-start fan-out (restarts run concurrently).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run the verdict suite on an externally supplied field file.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply the symmetric-decreasing rearrangement to a field file.
    Rearrange {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Radial shooting reference for the configured scalar problem.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-render result and verdict JSON artifacts as tables.
    Report {
        #[arg(long)]
        input: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Solve {
            config,
            seed,
            out,
            threads,
        } => run_solve(&config, seed, out, threads),
        Command::Verify { config, field, out } => run_verify(&config, &field, out),
        Command::Rearrange { config, field, out } => run_rearrange(&config, &field, out),
        Command::Oracle { config, out } => run_oracle(&config, out),
        Command::Report { input } => run_report(&input),
    };
    ExitCode::from(code)
}

fn load_config(path: &Path) -> Result<RunConfig, u8> {
    config::load(path).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_CONFIG
    })
}

fn ensure_dir(dir: &Path) -> Result<(), u8> {
    std::fs::create_dir_all(dir).map_err(|e| {
        eprintln!("error: cannot create {}: {e}", dir.display());
        EXIT_IO
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), u8> {
    let body = serde_json::to_string_pretty(value).map_err(|e| {
        eprintln!("error: serialization failed: {e}");
        EXIT_IO
    })?;
    std::fs::write(path, body + "\n").map_err(|e| {
        eprintln!("error: cannot write {}: {e}", path.display());
        EXIT_IO
    })
}

#[derive(Serialize)]
struct RunMeta {
    timestamp_unix_s: u64,
    command: String,
}

fn write_meta(dir: &Path, command: &str) {
    let meta = RunMeta {
        timestamp_unix_s: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        command: command.into(),
    };
    // metadata is deliberately isolated from result.json so result artifacts
    // stay byte-identical across reruns
    let _ = serde_json::to_string_pretty(&meta)
        .map(|body| std::fs::write(dir.join("run_meta.json"), body + "\n"));
}

fn verdict_exit(verdicts: &[Verdict]) -> u8 {
    if verdicts.iter().all(|v| v.pass) {
        EXIT_OK
    } else {
        EXIT_VERDICT
    }
}

fn write_solution_artifacts(
    dir: &Path,
    cfg: &RunConfig,
    result: &SolverResult,
    verdicts: &[Verdict],
) -> Result<(), u8> {
    ensure_dir(dir)?;
    write_json(&dir.join("result.json"), &result.summary)?;
    write_json(&dir.join("verdicts.json"), &verdicts.to_vec())?;
    if matches!(cfg.format, OutputFormat::Csv | OutputFormat::Both | OutputFormat::Json) {
        for (name, field) in [("minimizer", &result.minimizer), ("solution", &result.solution)] {
            write_field_csv(&dir.join(format!("{name}.csv")), field).map_err(|e| {
                eprintln!("error: {e}");
                EXIT_IO
            })?;
        }
        let center = functionals::energy_centroid(&result.minimizer, &cfg.spec);
        let profile = radial_profile(&result.minimizer, &center);
        write_profile_csv(&dir.join("profile.csv"), &profile).map_err(|e| {
            eprintln!("error: {e}");
            EXIT_IO
        })?;
    }
    Ok(())
}

fn run_solve(
    config_path: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
    threads: Option<usize>,
) -> u8 {
    let mut cfg = match load_config(config_path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if let Some(seed) = seed {
        cfg.solver.seed = seed;
    }
    if let Some(threads) = threads {
        cfg.solver.threads = threads.max(1);
    }
    let out_dir = out.unwrap_or_else(|| cfg.output_dir.clone());

    let (result, verdicts) =
        match solve_least_energy(cfg.grid, &cfg.spec, &cfg.solver, &cfg.thresholds) {
            Ok(pair) => pair,
            Err(e) => {
                eprintln!("solver error: {e}");
                return EXIT_SOLVER;
            }
        };
    if let Err(code) = write_solution_artifacts(&out_dir, &cfg, &result, &verdicts) {
        return code;
    }
    write_meta(&out_dir, "solve");

    println!(
        "regime {:?}: T = {:.6}, alpha = {:.6}, sigma0 = {:.6}, lambda = {:.6}",
        result.summary.regime,
        result.summary.t,
        result.summary.alpha,
        result.summary.sigma0,
        result.summary.lambda
    );
    println!(
        "iterations {} converged {}",
        result.summary.iterations, result.summary.converged
    );
    for w in &result.summary.warnings {
        println!("warning: {w}");
    }
    print!("{}", verify::format_table(&verdicts));
    if !result.summary.converged {
        eprintln!("solver error: iteration budget exhausted before convergence");
        return EXIT_SOLVER;
    }
    verdict_exit(&verdicts)
}

fn run_verify(config_path: &Path, field_path: &Path, out: Option<PathBuf>) -> u8 {
    let cfg = match load_config(config_path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let field = match read_field_csv(field_path) {
        Ok(f) => f,
        Err(groundstate::FieldError::Io(e)) => {
            eprintln!("error: cannot read {}: {e}", field_path.display());
            return EXIT_IO;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_SHAPE;
        }
    };
    if field.grid() != &cfg.grid || field.num_components() != cfg.spec.m() {
        eprintln!(
            "error: field file shape (N={}, L={}, n={}, m={}) does not match the config grid",
            field.grid().dim(),
            field.grid().half_extent(),
            field.grid().cells_per_dim(),
            field.num_components()
        );
        return EXIT_SHAPE;
    }
    let verdicts = verify::field_suite(&field, &cfg.spec, &cfg.thresholds);
    print!("{}", verify::format_table(&verdicts));
    if let Some(dir) = out {
        if ensure_dir(&dir).is_err() || write_json(&dir.join("verdicts.json"), &verdicts).is_err()
        {
            return EXIT_IO;
        }
        write_meta(&dir, "verify");
    }
    verdict_exit(&verdicts)
}

fn run_rearrange(config_path: &Path, field_path: &Path, out: Option<PathBuf>) -> u8 {
    let cfg = match load_config(config_path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let field = match read_field_csv(field_path) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_SHAPE;
        }
    };
    if field.grid() != &cfg.grid || field.num_components() != cfg.spec.m() {
        eprintln!("error: field file does not match the config grid");
        return EXIT_SHAPE;
    }
    let rearranged = match schwarz_rearrange(&field) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_SOLVER;
        }
    };
    let j_before = functionals::j(&field, &cfg.spec);
    let j_after = rearranged.profile_j(cfg.spec.p());
    println!("J before {j_before:.6}, J of rearranged profile {j_after:.6}");
    let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
    if ensure_dir(&dir).is_err() {
        return EXIT_IO;
    }
    if write_field_csv(&dir.join("rearranged.csv"), &rearranged.field).is_err()
        || write_level_set_csv(&dir.join("level_sets.csv"), &rearranged.table).is_err()
    {
        return EXIT_IO;
    }
    write_meta(&dir, "rearrange");
    EXIT_OK
}

#[derive(Serialize)]
struct OracleSummary {
    u0: f64,
    #[serde(rename = "J_ref")]
    j_ref: f64,
    #[serde(rename = "V_ref")]
    v_ref: f64,
    #[serde(rename = "T_ref")]
    t_ref: f64,
    classification: oracle::ShootingClass,
}

fn run_oracle(config_path: &Path, out: Option<PathBuf>) -> u8 {
    let cfg = match load_config(config_path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let shot = match oracle::ground_state(
        &cfg.spec,
        (cfg.oracle.u0_lo, cfg.oracle.u0_hi),
        cfg.oracle.tol,
        cfg.oracle.r_max,
        cfg.oracle.dr,
    ) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("oracle error: {e}");
            return EXIT_SOLVER;
        }
    };
    println!(
        "ground state u0 = {:.8}: J_ref = {:.6}, V_ref = {:.6}, T_ref = {:.6} ({:?})",
        shot.u0, shot.j_ref, shot.v_ref, shot.t_ref, shot.classification
    );
    let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
    if ensure_dir(&dir).is_err() {
        return EXIT_IO;
    }
    let summary = OracleSummary {
        u0: shot.u0,
        j_ref: shot.j_ref,
        v_ref: shot.v_ref,
        t_ref: shot.t_ref,
        classification: shot.classification,
    };
    if write_json(&dir.join("oracle.json"), &summary).is_err()
        || write_profile_csv(&dir.join("oracle_profile.csv"), &shot.profile).is_err()
    {
        return EXIT_IO;
    }
    write_meta(&dir, "oracle");
    EXIT_OK
}

fn run_report(input: &Path) -> u8 {
    let text = match std::fs::read_to_string(input) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", input.display());
            return EXIT_IO;
        }
    };
    let value: serde_json::Value = match serde_json::from_str(&text) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {} is not valid JSON: {e}", input.display());
            return EXIT_IO;
        }
    };
    // verdict arrays render as the standard table; everything else as a
    // two-column key/value listing
    if let Some(items) = value.as_array() {
        let verdicts: Result<Vec<Verdict>, _> =
            serde_json::from_value(serde_json::Value::Array(items.clone()));
        if let Ok(verdicts) = verdicts {
            print!("{}", verify::format_table(&verdicts));
            return EXIT_OK;
        }
    }
    print_tree(&value, 0);
    EXIT_OK
}

fn print_tree(value: &serde_json::Value, indent: usize) {
    let pad = "  ".repeat(indent);
    match value {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                match v {
                    serde_json::Value::Object(_) | serde_json::Value::Array(_) => {
                        println!("{pad}{k}:");
                        print_tree(v, indent + 1);
                    }
                    other => println!("{pad}{k:<24} {other}"),
                }
            }
        }
        serde_json::Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                println!("{pad}[{i}]");
                print_tree(v, indent + 1);
            }
        }
        other => println!("{pad}{other}"),
    }
}
