//! Command-line experiment runner for `czhardy`.
//!
//! Every subcommand reads its parameters from flags, optionally layered over a
//! TOML file with the same keys, and returns a [`Report`]: a JSON document, an
//! optional CSV table, and the witnesses of any violated invariant.

pub mod experiments;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use experiments::*;

#[derive(Debug, Parser)]
#[command(name = "czhardy", version, about = "Calderón–Zygmund and Hardy-space experiments on truncated trees")]
#[command(arg_required_else_help = true)]
pub struct Cli {
    /// TOML file whose keys are the long flag names; flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Measure formulas and trapezoid geometry, exhaustive or on random pairs.
    GeometrySweep(GeometryArgs),
    /// Greedy covering of the level set of the maximal function.
    Covering(CoveringArgs),
    /// Recursive atomic decomposition of random `(1,p)`-atoms.
    Decompose(DecomposeArgs),
    /// K-functional upper bounds and their log–log slope.
    Interpolate(InterpolateArgs),
    /// Spectrum of the symmetrized Laplacian.
    Spectrum(SpectrumArgs),
    /// Exhaustive Hörmander-integral sweep of a multiplier kernel.
    Hormander(HormanderArgs),
    /// Largest `‖Ta‖₁` over random `(1,∞)`-atoms.
    RieszRatio(RieszArgs),
    /// Discrete Sobolev estimator of dilated multipliers.
    Mikhlin(MikhlinArgs),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct GeometryArgs {
    #[arg(long)]
    pub q: Option<u32>,
    #[arg(long)]
    pub depth: Option<u32>,
    /// Check this many random pairs instead of all of them.
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct CoveringArgs {
    #[arg(long)]
    pub q: Option<u32>,
    #[arg(long)]
    pub depth: Option<u32>,
    #[arg(long)]
    pub p: Option<u32>,
    /// Threshold as a rational, e.g. `1/4`.
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of random functions.
    #[arg(long)]
    pub functions: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub q: Option<u32>,
    #[arg(long)]
    pub depth: Option<u32>,
    #[arg(long)]
    pub p: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub atoms: Option<usize>,
    /// Threshold ratio as a rational; defaults to the smallest admissible integer.
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub max_depth: Option<u32>,
    #[arg(long)]
    pub allow_subcritical: Option<bool>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct InterpolateArgs {
    #[arg(long)]
    pub q: Option<u32>,
    #[arg(long)]
    pub depth: Option<u32>,
    #[arg(long)]
    pub p: Option<f64>,
    /// Second exponent; `inf` for `L^∞`.
    #[arg(long)]
    pub p1: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub functions: Option<usize>,
    /// `t` runs over `2^t_min, …, 2^t_max`.
    #[arg(long, allow_hyphen_values = true)]
    pub t_min: Option<i32>,
    #[arg(long, allow_hyphen_values = true)]
    pub t_max: Option<i32>,
    /// Extra thresholds tried by the `H¹` bounds.
    #[arg(long, value_delimiter = ',')]
    pub refine_alpha: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub q: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    pub depths: Option<Vec<u32>>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct HormanderArgs {
    #[arg(long)]
    pub q: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    pub depths: Option<Vec<u32>>,
    /// heat | poly | cutoff | imag-re | imag-im | riesz
    #[arg(long)]
    pub multiplier: Option<String>,
    /// Heat time.
    #[arg(long)]
    pub t: Option<f64>,
    /// Polynomial power.
    #[arg(long)]
    pub m: Option<u32>,
    /// Order of the imaginary power.
    #[arg(long)]
    pub s: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RieszArgs {
    #[arg(long)]
    pub q: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    pub depths: Option<Vec<u32>>,
    #[arg(long)]
    pub atoms: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Operator: riesz, or any multiplier accepted by `hormander`.
    #[arg(long)]
    pub multiplier: Option<String>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub m: Option<u32>,
    #[arg(long)]
    pub s: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct MikhlinArgs {
    /// heat | poly | cutoff | imag
    #[arg(long)]
    pub multiplier: Option<String>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub m: Option<u32>,
    /// Order of the imaginary power.
    #[arg(long)]
    pub s0: Option<f64>,
    /// Sobolev order.
    #[arg(long)]
    pub sobolev: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
}

/// Failure modes of a run, mapped onto exit codes by the binary.
#[derive(Debug)]
pub enum RunError {
    /// Bad flags, config or parameter values (exit 2).
    Usage(String),
    /// The library refused the input (exit 2) or failed numerically (exit 3).
    Library(czhardy::Error),
    Io(std::io::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Usage(m) => write!(f, "usage error: {m}"),
            RunError::Library(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<czhardy::Error> for RunError {
    fn from(e: czhardy::Error) -> Self {
        RunError::Library(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Usage(_) => 2,
            RunError::Library(czhardy::Error::Eigen(_)) | RunError::Io(_) => 3,
            RunError::Library(_) => 2,
        }
    }
}

pub type RunResult<T> = std::result::Result<T, RunError>;

#[derive(Debug, Clone)]
pub struct Report {
    pub json: Value,
    pub csv: Option<String>,
    /// Serialized witnesses of violated invariants.
    pub violations: Vec<Value>,
}

impl Report {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    /// Default rendering: CSV when the experiment is tabular.
    pub fn render(&self, format: Option<Format>) -> RunResult<String> {
        match (format, &self.csv) {
            (Some(Format::Csv), None) => Err(RunError::Usage("this experiment has no CSV form".into())),
            (Some(Format::Csv), Some(csv)) | (None, Some(csv)) => Ok(csv.clone()),
            _ => {
                let mut s = serde_json::to_string_pretty(&self.json).expect("serializable");
                s.push('\n');
                Ok(s)
            }
        }
    }
}

/// Overlays the flags that were given onto the config-file table.
pub fn merge_with_file<A: Serialize + DeserializeOwned>(flags: &A, file: Option<&toml::Table>) -> RunResult<A> {
    let Some(table) = file else {
        return Ok(serde_json::from_value(serde_json::to_value(flags).expect("serializable")).expect("round trip"));
    };
    let mut base = serde_json::to_value(table).map_err(|e| RunError::Usage(e.to_string()))?;
    let over = serde_json::to_value(flags).expect("serializable");
    if let (Some(b), Some(o)) = (base.as_object_mut(), over.as_object()) {
        for (k, v) in o {
            if !v.is_null() {
                b.insert(k.clone(), v.clone());
            }
        }
    }
    serde_json::from_value(base).map_err(|e| RunError::Usage(format!("config: {e}")))
}

pub fn load_config(path: &std::path::Path) -> RunResult<toml::Table> {
    let text = std::fs::read_to_string(path)?;
    text.parse::<toml::Table>()
        .map_err(|e| RunError::Usage(format!("{}: {e}", path.display())))
}

/// Reads `CZHARDY_THREADS` and caps the worker pools.
pub fn configure_threads_from_env() -> RunResult<Option<usize>> {
    let Ok(raw) = std::env::var("CZHARDY_THREADS") else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| RunError::Usage(format!("CZHARDY_THREADS must be a positive integer, got {raw:?}")))?;
    czhardy::configure_threads(n)?;
    Ok(Some(n))
}

/// Resolves the configuration and runs the experiment.
pub fn run(cli: &Cli) -> RunResult<Report> {
    let file = cli.config.as_deref().map(load_config).transpose()?;
    let file = file.as_ref();
    match &cli.command {
        Command::GeometrySweep(a) => geometry_sweep(&merge_with_file(a, file)?),
        Command::Covering(a) => covering(&merge_with_file(a, file)?),
        Command::Decompose(a) => decompose(&merge_with_file(a, file)?),
        Command::Interpolate(a) => interpolate(&merge_with_file(a, file)?),
        Command::Spectrum(a) => spectrum(&merge_with_file(a, file)?),
        Command::Hormander(a) => hormander(&merge_with_file(a, file)?),
        Command::RieszRatio(a) => riesz_ratio(&merge_with_file(a, file)?),
        Command::Mikhlin(a) => mikhlin(&merge_with_file(a, file)?),
    }
}
