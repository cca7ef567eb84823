//! Argument types shared by the subcommands and the run manifest written
//! beside every output file.

use clap::{Args, ValueEnum};
use loewner::{Complex64, Driver, DriverError, SolverOptions};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error(transparent)]
    Engine(#[from] loewner::EngineError),
    #[error(transparent)]
    Hull(#[from] loewner::hull::HullError),
    #[error(transparent)]
    Linear(#[from] loewner::linear::LinearError),
    #[error(transparent)]
    Verify(#[from] loewner::verify::VerifyError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Parses an `re,im` pair.
pub fn parse_complex(s: &str) -> std::result::Result<Complex64, String> {
    let (re, im) = s.split_once(',').ok_or_else(|| format!("expected re,im but got {s:?}"))?;
    let re: f64 = re.trim().parse().map_err(|e| format!("bad real part {re:?}: {e}"))?;
    let im: f64 = im.trim().parse().map_err(|e| format!("bad imaginary part {im:?}: {e}"))?;
    Ok(Complex64::new(re, im))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DriverKind {
    Constant,
    Linear,
    Sqrt,
    Counterexample,
    /// Driver spec read from `--spec`.
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct DriverArgs {
    #[arg(long, value_enum)]
    pub driver: Option<DriverKind>,
    /// Slope of the linear driver.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub c: Option<Complex64>,
    /// Value of the constant driver.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub x: Option<Complex64>,
    /// Coefficient of the sqrt driver.
    #[arg(long)]
    pub a: Option<f64>,
    /// JSON driver spec file.
    #[arg(long)]
    pub spec: Option<PathBuf>,
}

impl DriverArgs {
    pub fn resolve(&self) -> Result<Option<Driver>> {
        let need = |v: Option<Complex64>, flag: &str| v.ok_or_else(|| CliError::Usage(format!("--{flag} is required for this driver")));
        let d = match self.driver {
            None => return Ok(None),
            Some(DriverKind::Constant) => Driver::constant(need(self.x, "x")?),
            Some(DriverKind::Linear) => Driver::linear(need(self.c, "c")?),
            Some(DriverKind::Sqrt) => Driver::sqrt_forward(self.a.ok_or_else(|| CliError::Usage("--a is required for the sqrt driver".into()))?)?,
            Some(DriverKind::Counterexample) => Driver::counterexample(),
            Some(DriverKind::Json) => {
                let path = self.spec.as_ref().ok_or_else(|| CliError::Usage("--spec is required for a json driver".into()))?;
                Driver::from_json(&read(path)?)?
            }
        };
        Ok(Some(d))
    }

    pub fn require(&self) -> Result<Driver> {
        self.resolve()?.ok_or_else(|| CliError::Usage("--driver is required".into()))
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub abs_tol: Option<f64>,
    #[arg(long)]
    pub blow_up_eps: Option<f64>,
    #[arg(long)]
    pub max_step: Option<f64>,
}

impl SolverArgs {
    pub fn resolve(&self) -> Result<SolverOptions> {
        let d = SolverOptions::default();
        let o = SolverOptions {
            rel_tol: self.rel_tol.unwrap_or(d.rel_tol),
            abs_tol: self.abs_tol.unwrap_or(d.abs_tol),
            blow_up_eps: self.blow_up_eps.unwrap_or(d.blow_up_eps),
            max_step: self.max_step.unwrap_or(d.max_step),
            ..d
        };
        o.validate()?;
        Ok(o)
    }
}

pub fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

/// Resolved configuration of one run, echoed into every manifest.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub driver: Option<serde_json::Value>,
    pub params: serde_json::Value,
    pub solver: SolverOptions,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn new(command: &'static str, driver: Option<&Driver>, params: serde_json::Value, solver: SolverOptions) -> Self {
        let driver = driver.map(|d| serde_json::from_str(&d.to_json()).expect("driver JSON is valid"));
        Self { command, driver, params, solver, seed: None }
    }

    pub fn hash(&self) -> String {
        hex(&Sha256::digest(serde_json::to_vec(self).expect("config serialises")))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config_hash: String,
    output: String,
    output_sha256: String,
    config: &'a RunConfig,
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}

/// Writes `bytes` to `path` and its manifest beside it.
pub fn write_output(path: &Path, bytes: &[u8], cfg: &RunConfig) -> Result<()> {
    let io_err = |p: &Path| {
        let p = p.display().to_string();
        move |source| CliError::Io { path: p, source }
    };
    fs::write(path, bytes).map_err(io_err(path))?;
    let m = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config_hash: cfg.hash(),
        output: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        output_sha256: hex(&Sha256::digest(bytes)),
        config: cfg,
    };
    let mp = manifest_path(path);
    let mut text = serde_json::to_string_pretty(&m)?;
    text.push('\n');
    fs::write(&mp, text).map_err(io_err(&mp))?;
    Ok(())
}

/// Writes to `path` with a manifest, or to stdout without one.
pub fn emit(path: Option<&Path>, bytes: &[u8], cfg: &RunConfig) -> Result<()> {
    match path {
        Some(p) => write_output(p, bytes, cfg),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(bytes)
                .map_err(|source| CliError::Io { path: "<stdout>".into(), source })
        }
    }
}

/// Sibling of `path` with the extension replaced, e.g. `run.csv` -> `run.phase.json`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    path.with_file_name(format!("{stem}.{suffix}"))
}

/// Applies `LOEWNER_THREADS` to the worker pool.
pub fn configure_threads() -> Result<()> {
    match std::env::var("LOEWNER_THREADS") {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .ok()
                .filter(|n| *n > 0)
                .ok_or_else(|| CliError::Usage(format!("LOEWNER_THREADS must be a positive integer, got {v:?}")))?;
            loewner::exec::init_threads(n);
            Ok(())
        }
        Err(_) => Ok(()),
    }
}
