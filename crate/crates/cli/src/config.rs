//! Run configuration: JSON schema, command-line overrides, and resolution
//! into concrete physical inputs. Precedence is defaults, then the config
//! file, then flags.

use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use herald_core::analysis::{optimal_tau, AnalysisError, Grid};
use herald_core::atom_cavity::SystemParams;
use herald_core::optics::{DetectorId, SplitterAngle};
use serde::{Deserialize, Serialize};

use crate::AppError;

/// Output format for every subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Splitter angle: explicit radians or the token "canonical", which solves
/// tan²(2θ) = 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaSpec {
    Radians(f64),
    Token(String),
}

impl Default for ThetaSpec {
    fn default() -> Self {
        ThetaSpec::Token("canonical".to_string())
    }
}

/// Emission windows: the token "optimal" (closed-form τ*), one shared
/// window, or all four explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TauSpec {
    Single(f64),
    Four([f64; 4]),
    Token(String),
}

impl Default for TauSpec {
    fn default() -> Self {
        TauSpec::Token("optimal".to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    #[serde(default = "default_n_traj")]
    pub n: usize,
    #[serde(default)]
    pub t_max: Option<f64>,
}

fn default_n_traj() -> usize {
    1000
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        TrajectorySpec {
            n: default_n_traj(),
            t_max: None,
        }
    }
}

/// Fidelity-scan abscissa.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScanAxis {
    Theta,
    Ratio,
}

fn default_params() -> SystemParams {
    SystemParams {
        lambda_l: 10.0,
        lambda_r: 10.0,
        kappa: 1.0,
        gamma_l: 0.1,
        gamma_r: 0.1,
    }
}

/// The full run configuration. Every JSON output embeds the resolved form
/// of this record, and the resolved form re-parses to itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_params")]
    pub params: SystemParams,
    #[serde(default)]
    pub theta: ThetaSpec,
    #[serde(default)]
    pub taus: TauSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub grid: Option<Grid>,
    #[serde(default)]
    pub trajectories: TrajectorySpec,
    #[serde(default)]
    pub sequence: Option<Vec<String>>,
    #[serde(default)]
    pub axis: Option<ScanAxis>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: default_params(),
            theta: ThetaSpec::default(),
            taus: TauSpec::default(),
            seed: 0,
            output: OutputSpec::default(),
            grid: None,
            trajectories: TrajectorySpec::default(),
            sequence: None,
            axis: None,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &PathBuf) -> Result<Self, AppError> {
        let text = fs::read_to_string(path)
            .map_err(|e| AppError::usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| AppError::usage(format!("invalid config {}: {e}", path.display())))
    }
}

/// Command-line overrides shared by all subcommands.
#[derive(Debug, Clone, clap::Args)]
pub struct Overrides {
    /// JSON config file; flags override its fields
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master RNG seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output format
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Output path (omit to write to standard output)
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Left Raman coupling λ_L
    #[arg(long, global = true)]
    pub lambda_l: Option<f64>,
    /// Right Raman coupling λ_R
    #[arg(long, global = true)]
    pub lambda_r: Option<f64>,
    /// Cavity field decay κ
    #[arg(long, global = true)]
    pub kappa: Option<f64>,
    /// Spontaneous emission rate γ_l
    #[arg(long, global = true)]
    pub gamma_l: Option<f64>,
    /// Spontaneous emission rate γ_r
    #[arg(long, global = true)]
    pub gamma_r: Option<f64>,
    /// Splitter angle in radians, or "canonical"
    #[arg(long, global = true)]
    pub theta: Option<String>,
    /// Emission window for all four systems, or "optimal"
    #[arg(long, global = true)]
    pub tau: Option<String>,
    /// Number of trajectories
    #[arg(long, global = true)]
    pub n_traj: Option<usize>,
    /// Grid as start:stop:count
    #[arg(long, global = true)]
    pub grid: Option<String>,
}

impl Overrides {
    /// Builds the effective configuration: defaults, then the file, then
    /// these flags.
    pub fn effective(&self) -> Result<RunConfig, AppError> {
        let mut config = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(format) = self.format {
            config.output.format = Some(format);
        }
        if let Some(path) = &self.output {
            config.output.path = Some(path.clone());
        }
        if let Some(v) = self.lambda_l {
            config.params.lambda_l = v;
        }
        if let Some(v) = self.lambda_r {
            config.params.lambda_r = v;
        }
        if let Some(v) = self.kappa {
            config.params.kappa = v;
        }
        if let Some(v) = self.gamma_l {
            config.params.gamma_l = v;
        }
        if let Some(v) = self.gamma_r {
            config.params.gamma_r = v;
        }
        if let Some(theta) = &self.theta {
            config.theta =
                parse_token_or_number(theta, "canonical", ThetaSpec::Token, ThetaSpec::Radians)?;
        }
        if let Some(tau) = &self.tau {
            config.taus = parse_token_or_number(tau, "optimal", TauSpec::Token, TauSpec::Single)?;
        }
        if let Some(n) = self.n_traj {
            config.trajectories.n = n;
        }
        if let Some(grid) = &self.grid {
            config.grid = Some(parse_grid(grid)?);
        }
        Ok(config)
    }
}

fn parse_token_or_number<T>(
    raw: &str,
    token: &str,
    make_token: impl FnOnce(String) -> T,
    make_number: impl FnOnce(f64) -> T,
) -> Result<T, AppError> {
    if raw == token {
        return Ok(make_token(raw.to_string()));
    }
    raw.parse::<f64>()
        .map(make_number)
        .map_err(|_| AppError::usage(format!("expected a number or \"{token}\", got \"{raw}\"")))
}

fn parse_grid(raw: &str) -> Result<Grid, AppError> {
    let parts: Vec<&str> = raw.split(':').collect();
    if parts.len() != 3 {
        return Err(AppError::usage(format!(
            "grid must be start:stop:count, got \"{raw}\""
        )));
    }
    let start: f64 = parts[0]
        .parse()
        .map_err(|_| AppError::usage(format!("bad grid start \"{}\"", parts[0])))?;
    let stop: f64 = parts[1]
        .parse()
        .map_err(|_| AppError::usage(format!("bad grid stop \"{}\"", parts[1])))?;
    let count: usize = parts[2]
        .parse()
        .map_err(|_| AppError::usage(format!("bad grid count \"{}\"", parts[2])))?;
    Grid::new(start, stop, count).map_err(grid_usage)
}

pub fn grid_usage(e: AnalysisError) -> AppError {
    AppError::usage(e.to_string())
}

/// The configuration resolved into physics inputs. The embedded `config`
/// reflects any resolution that happened (numeric θ, concrete windows) and
/// re-parses to itself.
pub struct Resolved {
    pub config: RunConfig,
    pub params: SystemParams,
    pub angle: SplitterAngle,
}

impl Resolved {
    pub fn format(&self) -> Format {
        self.config.output.format.unwrap_or(Format::Csv)
    }
}

pub fn resolve(mut config: RunConfig) -> Result<Resolved, AppError> {
    config
        .params
        .validate()
        .map_err(|e| AppError::usage(e.to_string()))?;
    let angle = match &config.theta {
        ThetaSpec::Token(token) if token == "canonical" => SplitterAngle::canonical(),
        ThetaSpec::Token(other) => {
            return Err(AppError::usage(format!(
                "theta must be a number or \"canonical\", got \"{other}\""
            )))
        }
        ThetaSpec::Radians(theta) => {
            SplitterAngle::new(*theta).map_err(|e| AppError::usage(e.to_string()))?
        }
    };
    config.theta = ThetaSpec::Radians(angle.theta());
    let params = config.params;
    Ok(Resolved {
        config,
        params,
        angle,
    })
}

pub fn overdamped_error(omega_k_sq: f64) -> AppError {
    AppError::domain(format!(
        "overdamped regime (squared oscillation rate {omega_k_sq:.6e} <= 0): \
         --tau optimal has no closed form here; pass an explicit window instead"
    ))
}

/// Resolves the emission windows, turning "optimal" into the closed-form
/// τ*. Overdamped parameters make that a domain error.
pub fn resolve_taus(resolved: &mut Resolved) -> Result<[f64; 4], AppError> {
    let taus = match &resolved.config.taus {
        TauSpec::Token(token) if token == "optimal" => {
            let tau = optimal_tau(&resolved.params).map_err(|e| match e {
                AnalysisError::Overdamped { omega_k_sq } => overdamped_error(omega_k_sq),
                other => AppError::usage(other.to_string()),
            })?;
            [tau; 4]
        }
        TauSpec::Token(other) => {
            return Err(AppError::usage(format!(
                "taus must be numbers or \"optimal\", got \"{other}\""
            )))
        }
        TauSpec::Single(tau) => [*tau; 4],
        TauSpec::Four(taus) => *taus,
    };
    for tau in taus {
        if !tau.is_finite() || tau < 0.0 {
            return Err(AppError::usage(format!(
                "emission windows must be finite and non-negative, got {tau}"
            )));
        }
    }
    resolved.config.taus = TauSpec::Four(taus);
    Ok(taus)
}

/// Parses the click sequence, defaulting to the golden order.
pub fn resolve_sequence(resolved: &Resolved) -> Result<Vec<DetectorId>, AppError> {
    let names = match &resolved.config.sequence {
        Some(names) => names.clone(),
        None => vec![
            "Da_F".to_string(),
            "Db_F".to_string(),
            "Da_S".to_string(),
            "Db_S".to_string(),
        ],
    };
    names
        .iter()
        .map(|name| DetectorId::from_str(name).map_err(|e| AppError::usage(e.to_string())))
        .collect()
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Format::Csv => f.write_str("csv"),
            Format::Json => f.write_str("json"),
        }
    }
}
