//! `wvsim`: run, verify and sweep weak-value experiments described by a TOML
//! config.
//!
//! Exit status: 0 when every invariant check passes, 1 when a check or a
//! module operation fails, 2 for configuration errors.

mod config;
mod error;
mod output;
mod scan;
mod scenario;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use config::ExperimentConfig;
use error::{CliError, ConfigError};
use output::{sha256_hex, write_artifacts, write_json, Csv, RunManifest, VERSION};
use scenario::Mode;

/// Overrides the directory that relative `output_dir` entries resolve against.
const OUTPUT_ROOT_VAR: &str = "WVSIM_OUTPUT_ROOT";

#[derive(Parser)]
#[command(name = "wvsim", version, about = "Weak values from strong measurement statistics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its data files and manifest.
    Run { config: PathBuf },
    /// Run only the invariant checks, at reduced sample sizes, and report.
    Verify { config: PathBuf },
    /// Sweep config entries over the Cartesian product of their ranges.
    Scan {
        config: PathBuf,
        /// `path=start:stop:count` or `path=v1,v2,...`; repeatable.
        #[arg(long = "param", required = true)]
        params: Vec<String>,
        /// Worker threads; all cores when absent.
        #[arg(long)]
        jobs: Option<usize>,
    },
}

/// Relative output directories resolve against `WVSIM_OUTPUT_ROOT`, or the
/// config file's directory when it is unset.
fn output_root(config_path: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_VAR) {
        Some(root) => PathBuf::from(root),
        None => config_path.parent().map(Path::to_path_buf).unwrap_or_default(),
    }
}

fn config_hash(value: &toml::Value) -> String {
    sha256_hex(toml::to_string(value).expect("parsed config serializes").as_bytes())
}

/// Validates, runs and writes one configuration into `dir`.
fn run_config(value: toml::Value, dir: &Path) -> Result<RunManifest, CliError> {
    let hash = config_hash(&value);
    let cfg = ExperimentConfig::from_value(value)?;
    let start = Instant::now();
    let outcome = scenario::execute(&cfg, Mode::Run)?;
    let files = write_artifacts(dir, &outcome, cfg.scenario, &hash)?;
    let manifest = RunManifest {
        config_hash: hash,
        version: VERSION.to_string(),
        scenario: cfg.scenario,
        seed: cfg.seed,
        wall_time_s: start.elapsed().as_secs_f64(),
        files,
        passed: outcome.passed(),
        checks: outcome.checks,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

fn output_dir(value: &toml::Value, root: &Path) -> PathBuf {
    let dir = value.get("output_dir").and_then(|v| v.as_str()).unwrap_or("wvsim-out");
    root.join(dir)
}

fn print_checks(checks: &[output::Check]) {
    for c in checks {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        println!("{mark} {}: {} (tolerance {})", c.name, output::num(c.value), output::num(c.tolerance));
    }
}

fn cmd_run(path: &Path) -> Result<bool, CliError> {
    let value = ExperimentConfig::load(path)?;
    let dir = output_dir(&value, &output_root(path));
    let manifest = run_config(value, &dir)?;
    print_checks(&manifest.checks);
    println!("wrote {} files to {}", manifest.files.len() + 1, dir.display());
    Ok(manifest.passed)
}

fn cmd_verify(path: &Path) -> Result<bool, CliError> {
    let cfg = ExperimentConfig::from_value(ExperimentConfig::load(path)?)?;
    let outcome = scenario::execute(&cfg, Mode::Verify)?;
    print_checks(&outcome.checks);
    let passed = outcome.checks.iter().filter(|c| c.passed).count();
    println!("verify {}: {passed}/{} checks passed", cfg.scenario.name(), outcome.checks.len());
    Ok(outcome.passed())
}

#[derive(Serialize)]
struct ScanPoint {
    index: usize,
    values: Vec<f64>,
    dir: String,
    config_hash: String,
    passed: bool,
    error: Option<String>,
    #[serde(skip)]
    exit_code: i32,
}

#[derive(Serialize)]
struct ScanManifest {
    config_hash: String,
    version: String,
    params: Vec<String>,
    wall_time_s: f64,
    points: Vec<ScanPoint>,
    passed: bool,
}

fn cmd_scan(path: &Path, specs: &[String], jobs: Option<usize>) -> Result<i32, CliError> {
    let base = ExperimentConfig::load(path)?;
    let sweeps = specs.iter().map(|s| scan::parse_param(s)).collect::<Result<Vec<_>, ConfigError>>()?;
    let points = scan::cartesian(&sweeps);
    let dir = output_dir(&base, &output_root(path));
    let start = Instant::now();

    // Every point gets its own config copy and output directory.
    let mut configs = Vec::with_capacity(points.len());
    for (index, values) in points.iter().enumerate() {
        let mut v = base.clone();
        for (s, &x) in sweeps.iter().zip(values) {
            scan::set_path(&mut v, &s.path, x)?;
        }
        configs.push((index, values.clone(), format!("point_{index:04}"), v));
    }

    let execute = || {
        configs
            .into_par_iter()
            .map(|(index, values, point_dir, v)| {
                let hash = config_hash(&v);
                let result = run_config(v, &dir.join(&point_dir));
                let (passed, error, exit_code) = match result {
                    Ok(m) => (m.passed, None, i32::from(!m.passed)),
                    Err(e) => (false, Some(e.to_string()), e.exit_code()),
                };
                ScanPoint { index, values, dir: point_dir, config_hash: hash, passed, error, exit_code }
            })
            .collect::<Vec<_>>()
    };
    let results = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| ConfigError::Param { spec: format!("--jobs {n}"), message: e.to_string() })?
            .install(execute),
        None => execute(),
    };

    let mut summary = Csv::new("scan.csv", &[]);
    summary.columns = std::iter::once("point".to_string())
        .chain(sweeps.iter().map(|s| s.path.clone()))
        .chain(std::iter::once("passed".to_string()))
        .collect();
    for p in &results {
        let mut row = vec![p.index as f64];
        row.extend(&p.values);
        row.push(f64::from(u8::from(p.passed)));
        summary.push(&row);
        match &p.error {
            Some(e) => println!("point {:04} {:?}: ERROR {e}", p.index, p.values),
            None => println!("point {:04} {:?}: {}", p.index, p.values, if p.passed { "PASS" } else { "FAIL" }),
        }
    }
    let base_hash = config_hash(&base);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Output { path: dir.display().to_string(), message: e.to_string() })?;
    std::fs::write(dir.join("scan.csv"), summary.render(&base_hash))
        .map_err(|e| CliError::Output { path: dir.join("scan.csv").display().to_string(), message: e.to_string() })?;
    let exit = results.iter().map(|p| p.exit_code).max().unwrap_or(0);
    let manifest = ScanManifest {
        config_hash: base_hash,
        version: VERSION.to_string(),
        params: specs.to_vec(),
        wall_time_s: start.elapsed().as_secs_f64(),
        passed: results.iter().all(|p| p.passed),
        points: results,
    };
    write_json(&dir.join("scan_manifest.json"), &manifest)?;
    Ok(exit)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => cmd_run(config).map(|ok| i32::from(!ok)),
        Command::Verify { config } => cmd_verify(config).map(|ok| i32::from(!ok)),
        Command::Scan { config, params, jobs } => cmd_scan(config, params, *jobs),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
