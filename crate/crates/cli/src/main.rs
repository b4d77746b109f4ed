mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde::Serialize;

use crate::commands::Verdict;
use crate::config::{parse_config_file, Cli, RunConfig};
use crate::error::CliError;
use crate::output::Output;

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a RunConfig,
    seed: u64,
    version: String,
    duration_seconds: f64,
    status: &'a str,
    exit_code: i32,
    files: Vec<String>,
}

fn load() -> Result<RunConfig, CliError> {
    let mut cli = Cli::parse();
    if let Some(path) = cli.config.clone() {
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        cli.merge_file(&parse_config_file(&text)?)?;
    }
    cli.resolve()
}

fn execute(cfg: &RunConfig) -> Result<i32, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let mut out = Output::create(cfg.out_dir())?;
    let start = Instant::now();
    let result = commands::run(cfg, &mut out);
    let (status, code) = match &result {
        Ok(v) => (v.label(), v.exit_code()),
        Err(e) => ("error", e.exit_code()),
    };
    let mut files = out.files().to_vec();
    files.push("manifest.json".into());
    let manifest = Manifest {
        config: cfg,
        seed: cfg.seed,
        version: format!("kblow {} (kinetic-blowup {})", env!("CARGO_PKG_VERSION"), kinetic_blowup::VERSION),
        duration_seconds: start.elapsed().as_secs_f64(),
        status,
        exit_code: code,
        files,
    };
    out.write_json("manifest.json", &manifest)?;
    match result? {
        Verdict::Pass => println!("{}: pass", cfg_name(cfg)),
        Verdict::Info(m) => println!("{}: {m}", cfg_name(cfg)),
        Verdict::Fail(m) => eprintln!("{}: FAIL: {m}", cfg_name(cfg)),
        Verdict::Inconclusive(m) => eprintln!("{}: inconclusive: {m}", cfg_name(cfg)),
    }
    Ok(code)
}

fn cfg_name(cfg: &RunConfig) -> String {
    serde_json::to_value(cfg.command)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn main() -> ExitCode {
    let code = match load().and_then(|cfg| execute(&cfg)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("kblow: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
