//! Command-line arguments and the JSON run configuration.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use halfspace::field::GridSpec;
use halfspace::ModelParams;
use serde::{Deserialize, Serialize};

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "HALFSPACE_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "halfspace",
    version,
    about = "Half-space resolvent and evolution solver for the linearized Q-tensor flow system"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Characteristic roots, decay rates and sector membership of one mode.
    Roots,
    #[command(subcommand)]
    Scan(ScanCommand),
    #[command(subcommand)]
    Verify(VerifyCommand),
    #[command(subcommand)]
    Solve(SolveCommand),
    /// Picard iteration for the nonlinear problem, optionally with the smallness-threshold search.
    Picard {
        /// Double the data until the iteration fails.
        #[arg(long)]
        threshold: bool,
    },
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Debug, Subcommand)]
pub enum ScanCommand {
    /// Lower bounds of the normalised denominators over the sector.
    Nonvanishing,
    /// Multiplier-class constants of the registered symbols.
    Multipliers {
        /// Check only this symbol.
        #[arg(long)]
        symbol: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum VerifyCommand {
    /// Randomized residual suite of the closed-form mode solutions.
    Residual,
    /// Convergence of the regular branch to the double-root branch.
    EtaLimit,
}

#[derive(Debug, Subcommand)]
pub enum SolveCommand {
    /// Resolvent problem on a grid with generated smooth boundary data.
    Resolvent,
    /// Linear evolution driven by a boundary pulse.
    Evolve {
        #[arg(long, value_enum, default_value_t = EvolveMethod::CrankNicolson)]
        method: EvolveMethod,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvolveMethod {
    Laplace,
    CrankNicolson,
}

#[derive(Debug, Subcommand)]
pub enum OracleCommand {
    /// Closed form against the finite-difference solver on random modes.
    Compare,
}

/// Flags that override config keys.
#[derive(Debug, Args, Default)]
pub struct Overrides {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for reports and fields.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Worker threads (default from HALFSPACE_THREADS, else all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub a: Option<f64>,
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    #[arg(long, global = true)]
    pub r: Option<f64>,
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    #[arg(long, global = true)]
    pub level: Option<u32>,
    /// Spectral parameter as `re,im`.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    pub lambda: Option<Vec<f64>>,
    /// Tangential frequency, comma separated.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    pub xi: Option<Vec<f64>>,
    /// Initial-data norm for the Picard run.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
}

/// Everything a run depends on.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub params: ModelParams,
    pub seed: u64,
    pub output: PathBuf,
    pub threads: Option<usize>,
    pub lambda: [f64; 2],
    pub xi: Vec<f64>,
    pub scan: ScanConfig,
    pub residual: ResidualConfig,
    pub eta_limit: EtaLimitConfig,
    pub resolvent: ResolventConfig,
    pub evolve: EvolveConfig,
    pub picard: PicardConfig,
    pub oracle: OracleConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::default(),
            seed: 1,
            output: PathBuf::from("halfspace-out"),
            threads: None,
            lambda: [4.0, 2.0],
            xi: vec![1.0],
            scan: ScanConfig::default(),
            residual: ResidualConfig::default(),
            eta_limit: EtaLimitConfig::default(),
            resolvent: ResolventConfig::default(),
            evolve: EvolveConfig::default(),
            picard: PicardConfig::default(),
            oracle: OracleConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub level: u32,
    pub lambda_max: f64,
    pub xi_min: f64,
    pub xi_max: f64,
    /// Lower bound every scanned value must exceed.
    pub floor: f64,
    /// Largest accepted relative change of a lower bound under one refinement.
    pub max_change: f64,
    /// Largest accepted relative change of a multiplier constant under one
    /// refinement; sampled suprema of bounded symbols still move as peaks
    /// get resolved.
    pub multiplier_max_change: f64,
    /// Level of the grid that extends the `|xi'|` range by a factor of 100.
    pub extension_level: u32,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            level: 2,
            lambda_max: 1e6,
            xi_min: 1e-2,
            xi_max: 1e3,
            floor: 1e-6,
            max_change: 0.2,
            multiplier_max_change: 0.5,
            extension_level: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResidualConfig {
    pub betas: Vec<f64>,
    pub samples: usize,
    pub points: usize,
    /// Largest sampled `|xi'|`.
    pub xi_max: f64,
    pub tolerance: f64,
}

impl Default for ResidualConfig {
    fn default() -> Self {
        Self {
            betas: vec![0.5, 1.0, std::f64::consts::SQRT_2],
            samples: 200,
            points: 64,
            xi_max: halfspace::verify::RESIDUAL_XI_MAX,
            tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EtaLimitConfig {
    pub eps: Vec<f64>,
    pub xi: Vec<f64>,
    pub min_order: f64,
}

impl Default for EtaLimitConfig {
    fn default() -> Self {
        Self { eps: vec![1e-2, 1e-3, 1e-4], xi: vec![0.25, 0.5, 1.0, 2.0, 4.0], min_order: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResolventConfig {
    pub grid: GridSpec,
    /// Largest tangential wave number of the generated boundary data.
    pub max_wave: i32,
    /// Largest accepted normalised mode residual.
    pub tolerance: f64,
}

impl Default for ResolventConfig {
    fn default() -> Self {
        let normal = halfspace::field::NormalSpec::Uniform { n: 256, x_max: 20.0 };
        Self { grid: GridSpec::new(2, 32, 2.0 * std::f64::consts::PI, normal), max_wave: 3, tolerance: 1e-9 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    pub grid: GridSpec,
    pub t_end: f64,
    /// Time steps of the stepping method, samples of the contour method.
    pub steps: usize,
    pub gamma: f64,
    pub output_every: usize,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        let normal = halfspace::field::NormalSpec::Stretched { n: 512, x_max: 20.0, stretch: 4.0 };
        Self {
            grid: GridSpec::new(2, 64, 2.0 * std::f64::consts::PI, normal),
            t_end: 1.0,
            steps: 64,
            gamma: 10.0,
            output_every: 8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PicardConfig {
    pub grid: GridSpec,
    pub t_end: f64,
    pub steps: usize,
    pub epsilon: f64,
    pub max_iter: usize,
    /// Radius of the ball the iterates must stay in.
    pub omega: f64,
    /// Upper cap of the threshold search.
    pub epsilon_max: f64,
}

impl Default for PicardConfig {
    fn default() -> Self {
        let normal = halfspace::field::NormalSpec::Stretched { n: 256, x_max: 10.0, stretch: 3.0 };
        Self {
            grid: GridSpec::new(2, 64, 2.0 * std::f64::consts::PI, normal),
            t_end: 0.1,
            steps: 32,
            epsilon: 1e-3,
            max_iter: 30,
            omega: 1e6,
            epsilon_max: 1e4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub modes: usize,
    pub n: usize,
    pub tolerance: f64,
    pub order_min: f64,
    pub order_max: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { modes: 20, n: 8192, tolerance: 1e-5, order_min: 1.8, order_max: 2.2 }
    }
}

impl RunConfig {
    /// Parses a config, naming the offending key on failure.
    pub fn from_json(text: &str) -> Result<Self, String> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            format!("key `{path}`: {}", e.inner())
        })
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), String> {
        let p = &mut self.params;
        if let Some(v) = o.a {
            p.a = v;
        }
        if let Some(v) = o.beta {
            p.beta = v;
        }
        if let Some(v) = o.theta {
            p.theta = v;
        }
        if let Some(v) = o.r {
            p.r = v;
        }
        if let Some(v) = o.dim {
            p.dim = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = &o.output {
            self.output = v.clone();
        }
        if let Some(v) = o.threads {
            self.threads = Some(v);
        }
        if let Some(v) = o.level {
            self.scan.level = v;
        }
        if let Some(v) = &o.lambda {
            match v[..] {
                [re, im] => self.lambda = [re, im],
                _ => return Err(format!("--lambda takes `re,im`, got {} values", v.len())),
            }
        }
        if let Some(v) = &o.xi {
            self.xi = v.clone();
        }
        if let Some(v) = o.epsilon {
            self.picard.epsilon = v;
        }
        Ok(())
    }
}
