use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use kinetic_blowup::{KernelSpec, Regime, Vec3};
use serde::Serialize;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Geometry,
    Delta,
    Homogeneous,
    Inhomogeneous,
    OracleCheck,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RegimeArg {
    Classical,
    Relativistic,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Classical => Regime::Classical,
            RegimeArg::Relativistic => Regime::Relativistic,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TestFunction {
    Bump,
    Zero,
}

/// Command-line flags. Every option may also be set in the `--config` file.
#[derive(Debug, Default, Parser)]
#[command(name = "kblow", version, about = "Gain-only Boltzmann blowup experiments")]
pub struct Cli {
    /// Plain-text `key = value` file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub command: Option<Command>,
    #[arg(long, value_enum)]
    pub regime: Option<RegimeArg>,
    /// Relativistic constant cross section.
    #[arg(long)]
    pub sigma0: Option<f64>,
    #[arg(long = "R")]
    pub r: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub rho0: Option<f64>,
    #[arg(long)]
    pub c0: Option<f64>,
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub c2: Option<f64>,
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub grid_n: Option<usize>,
    #[arg(long)]
    pub sphere_m: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub n_t: Option<usize>,
    /// Monte Carlo samples per estimate, or sampled pairs for `inhomogeneous`.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads, 0 = one per core.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// First incoming velocity or momentum for `geometry`, as `x,y,z`.
    #[arg(long, allow_hyphen_values = true)]
    pub v: Option<String>,
    /// Second incoming velocity or momentum for `geometry`, as `x,y,z`.
    #[arg(long, allow_hyphen_values = true)]
    pub w: Option<String>,
    /// Oracle probe velocities for `delta`.
    #[arg(long)]
    pub probes: Option<usize>,
    /// Integration end time for `homogeneous`; defaults to 1.1 / (delta rho0).
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Detection threshold as a multiple of rho0.
    #[arg(long)]
    pub threshold_factor: Option<f64>,
    /// Grid cells per axis of the reduced homogeneous run in `inhomogeneous`.
    #[arg(long)]
    pub reduction_grid_n: Option<usize>,
    /// Sphere order of the reduced homogeneous run in `inhomogeneous`.
    #[arg(long)]
    pub reduction_sphere_m: Option<usize>,
    /// Adds an out-of-ball pair to `lemma5.csv`.
    #[arg(long)]
    pub negative_control: Option<bool>,
    #[arg(long, value_enum)]
    pub test_function: Option<TestFunction>,
    #[arg(long, hide = true)]
    pub fault_scale: Option<f64>,
}

/// Fully resolved configuration of one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub regime: RegimeArg,
    pub sigma0: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub lambda: f64,
    pub rho0: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub grid_n: usize,
    pub sphere_m: usize,
    pub k_max: usize,
    pub n_t: usize,
    pub samples: usize,
    pub seed: u64,
    pub threads: usize,
    pub out: PathBuf,
    pub v: [f64; 3],
    pub w: [f64; 3],
    pub probes: usize,
    pub t_end: Option<f64>,
    pub threshold_factor: f64,
    pub reduction_grid_n: usize,
    pub reduction_sphere_m: usize,
    pub negative_control: bool,
    pub test_function: TestFunction,
    pub fault_scale: f64,
}

fn parse_vec(s: &str) -> Result<[f64; 3], CliError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(CliError::Config(format!("expected x,y,z, got {s:?}")));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p
            .parse()
            .map_err(|_| CliError::Config(format!("bad vector component {p:?}")))?;
    }
    Ok(out)
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("bad value {value:?} for {key}")))
}

fn parse_enum<T: ValueEnum>(key: &str, value: &str) -> Result<T, CliError> {
    T::from_str(value, true).map_err(|_| CliError::Config(format!("bad value {value:?} for {key}")))
}

/// Parses `key = value` lines; `#` starts a comment. Keys match the long
/// flag names, with `-` and `_` interchangeable.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Config(format!("line {}: expected key = value", i + 1)));
        };
        map.insert(k.trim().replace('_', "-"), v.trim().to_string());
    }
    Ok(map)
}

impl Cli {
    /// Fills unset flags from a parsed config file.
    pub fn merge_file(&mut self, map: &BTreeMap<String, String>) -> Result<(), CliError> {
        for (k, v) in map {
            match k.as_str() {
                "command" => fill(&mut self.command, || parse_enum(k, v))?,
                "regime" => fill(&mut self.regime, || parse_enum(k, v))?,
                "sigma0" => fill(&mut self.sigma0, || parse_value(k, v))?,
                "R" => fill(&mut self.r, || parse_value(k, v))?,
                "lambda" => fill(&mut self.lambda, || parse_value(k, v))?,
                "rho0" => fill(&mut self.rho0, || parse_value(k, v))?,
                "c0" => fill(&mut self.c0, || parse_value(k, v))?,
                "c1" => fill(&mut self.c1, || parse_value(k, v))?,
                "c2" => fill(&mut self.c2, || parse_value(k, v))?,
                "T" => fill(&mut self.horizon, || parse_value(k, v))?,
                "grid-n" => fill(&mut self.grid_n, || parse_value(k, v))?,
                "sphere-m" => fill(&mut self.sphere_m, || parse_value(k, v))?,
                "k-max" => fill(&mut self.k_max, || parse_value(k, v))?,
                "n-t" => fill(&mut self.n_t, || parse_value(k, v))?,
                "samples" => fill(&mut self.samples, || parse_value(k, v))?,
                "seed" => fill(&mut self.seed, || parse_value(k, v))?,
                "threads" => fill(&mut self.threads, || parse_value(k, v))?,
                "out" => fill(&mut self.out, || Ok(PathBuf::from(v)))?,
                "v" => fill(&mut self.v, || Ok(v.clone()))?,
                "w" => fill(&mut self.w, || Ok(v.clone()))?,
                "probes" => fill(&mut self.probes, || parse_value(k, v))?,
                "t-end" => fill(&mut self.t_end, || parse_value(k, v))?,
                "threshold-factor" => fill(&mut self.threshold_factor, || parse_value(k, v))?,
                "reduction-grid-n" => fill(&mut self.reduction_grid_n, || parse_value(k, v))?,
                "reduction-sphere-m" => fill(&mut self.reduction_sphere_m, || parse_value(k, v))?,
                "negative-control" => fill(&mut self.negative_control, || parse_value(k, v))?,
                "test-function" => fill(&mut self.test_function, || parse_enum(k, v))?,
                "fault-scale" => fill(&mut self.fault_scale, || parse_value(k, v))?,
                _ => return Err(CliError::Config(format!("unknown config key {k:?}"))),
            }
        }
        Ok(())
    }

    /// Applies per-command defaults and validates the result.
    pub fn resolve(self) -> Result<RunConfig, CliError> {
        let command = self
            .command
            .ok_or_else(|| CliError::Config("--command is required".into()))?;
        let regime = self.regime.unwrap_or(RegimeArg::Classical);
        let rel = regime == RegimeArg::Relativistic;
        let (grid_n, sphere_m) = match command {
            Command::Geometry => (0, 16),
            Command::Delta if rel => (16, 8),
            Command::Delta => (32, 16),
            Command::Homogeneous => (8, 8),
            Command::Inhomogeneous => (4, 4),
            Command::OracleCheck if rel => (16, 8),
            Command::OracleCheck => (16, 16),
        };
        let samples = match command {
            Command::Delta => 100_000,
            Command::Inhomogeneous => 100,
            _ => 1_000_000,
        };
        let (v, w) = if rel {
            ([2.0, 0.0, 0.0], [0.0, 0.0, 0.0])
        } else {
            ([1.0, 0.0, 0.0], [-1.0, 0.0, 0.0])
        };
        let cfg = RunConfig {
            command,
            regime,
            sigma0: self.sigma0.unwrap_or(1.0),
            r: self.r.unwrap_or(1.0),
            lambda: self.lambda.unwrap_or(1.0),
            rho0: self.rho0.unwrap_or(1.0),
            c0: self.c0.unwrap_or(1.0),
            c1: self.c1.unwrap_or(1.5),
            c2: self.c2.unwrap_or(1.0),
            horizon: self.horizon.unwrap_or(1.0),
            grid_n: self.grid_n.unwrap_or(grid_n),
            sphere_m: self.sphere_m.unwrap_or(sphere_m),
            k_max: self.k_max.unwrap_or(3),
            n_t: self.n_t.unwrap_or(2),
            samples: self.samples.unwrap_or(samples),
            seed: self.seed.unwrap_or(42),
            threads: self.threads.unwrap_or(0),
            out: self.out.unwrap_or_else(|| PathBuf::from("out")),
            v: self.v.as_deref().map(parse_vec).transpose()?.unwrap_or(v),
            w: self.w.as_deref().map(parse_vec).transpose()?.unwrap_or(w),
            probes: self.probes.unwrap_or(40),
            t_end: self.t_end,
            threshold_factor: self.threshold_factor.unwrap_or(1e6),
            reduction_grid_n: self.reduction_grid_n.unwrap_or(8),
            reduction_sphere_m: self.reduction_sphere_m.unwrap_or(8),
            negative_control: self.negative_control.unwrap_or(false),
            test_function: self.test_function.unwrap_or(TestFunction::Bump),
            fault_scale: self.fault_scale.unwrap_or(1.0),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn fill<T>(slot: &mut Option<T>, parse: impl FnOnce() -> Result<T, CliError>) -> Result<(), CliError> {
    if slot.is_none() {
        *slot = Some(parse()?);
    }
    Ok(())
}

impl RunConfig {
    fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("sigma0", self.sigma0),
            ("R", self.r),
            ("lambda", self.lambda),
            ("c0", self.c0),
            ("c1", self.c1),
            ("c2", self.c2),
            ("T", self.horizon),
            ("threshold-factor", self.threshold_factor),
            ("fault-scale", self.fault_scale),
        ];
        for (name, x) in positive {
            if !(x.is_finite() && x > 0.0) {
                return Err(CliError::Config(format!("{name} must be positive, got {x}")));
            }
        }
        if !(self.rho0.is_finite() && self.rho0 >= 0.0) {
            return Err(CliError::Config(format!("rho0 must be nonnegative, got {}", self.rho0)));
        }
        if let Some(t) = self.t_end {
            if !(t.is_finite() && t > 0.0) {
                return Err(CliError::Config(format!("t-end must be positive, got {t}")));
            }
        }
        if self.lambda < 1.0 {
            return Err(CliError::Config(format!("lambda must be at least 1, got {}", self.lambda)));
        }
        if self.command == Command::Inhomogeneous && self.c1 <= self.horizon * self.c2 {
            return Err(CliError::Config(format!(
                "need c1 > T c2, got c1 = {} and T c2 = {}",
                self.c1,
                self.horizon * self.c2
            )));
        }
        if self.v.iter().chain(&self.w).any(|x| !x.is_finite()) {
            return Err(CliError::Config("incoming vectors must be finite".into()));
        }
        Ok(())
    }

    pub fn kernel(&self) -> KernelSpec {
        match self.regime {
            RegimeArg::Classical => KernelSpec::ClassicalHardSphere,
            RegimeArg::Relativistic => KernelSpec::RelativisticConstantSigma { sigma0: self.sigma0 },
        }
    }

    pub fn vectors(&self) -> (Vec3, Vec3) {
        (Vec3::from(self.v), Vec3::from(self.w))
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_fills_only_missing_flags() {
        let map = parse_config_file("command = delta\n# comment\nlambda = 2\ngrid_n = 12 # trailing\n").unwrap();
        let mut cli = Cli {
            lambda: Some(1.5),
            ..Cli::default()
        };
        cli.merge_file(&map).unwrap();
        let cfg = cli.resolve().unwrap();
        assert_eq!(cfg.command, Command::Delta);
        assert_eq!(cfg.lambda, 1.5);
        assert_eq!(cfg.grid_n, 12);
        assert_eq!(cfg.sphere_m, 16);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_lines() {
        assert!(parse_config_file("no equals sign").is_err());
        let map = parse_config_file("colour = red").unwrap();
        assert!(Cli::default().merge_file(&map).is_err());
    }

    #[test]
    fn inhomogeneous_needs_wide_spatial_ball() {
        let cli = Cli {
            command: Some(Command::Inhomogeneous),
            c1: Some(1.0),
            ..Cli::default()
        };
        assert!(matches!(cli.resolve(), Err(CliError::Config(_))));
    }

    #[test]
    fn vectors_parse() {
        assert_eq!(parse_vec("-1, 0.5,2").unwrap(), [-1.0, 0.5, 2.0]);
        assert!(parse_vec("1,2").is_err());
    }
}
