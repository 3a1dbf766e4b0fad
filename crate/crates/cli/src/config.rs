//! Command-line arguments and the resolved run configuration.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use quasilocal_core::embedding::Strategy;
use quasilocal_core::io::SurfaceFile;
use quasilocal_core::surface::SurfaceSpec;
use quasilocal_core::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "quasilocal", version, about = "Quasi-local energy-momentum via hyperbolic reference embeddings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Embed the surface isometrically into H³.
    Embed(Options),
    /// Embed and build the equidistant foliation.
    Foliate(Options),
    /// Solve the lapse flow.
    SolveU(Options),
    /// Solve the lapse flow and the backward transport flow.
    SolveW(Options),
    /// Everything up to the mass profile and energy-momentum vector.
    Mass(Options),
    /// Full pipeline plus the invariant battery; non-zero exit on failure.
    Verify(Options),
    /// Full pipeline; writes every artefact and prints the report.
    Report(Options),
}

impl Sub {
    pub fn split(self) -> (Command, Options) {
        match self {
            Sub::Embed(o) => (Command::Embed, o),
            Sub::Foliate(o) => (Command::Foliate, o),
            Sub::SolveU(o) => (Command::SolveU, o),
            Sub::SolveW(o) => (Command::SolveW, o),
            Sub::Mass(o) => (Command::Mass, o),
            Sub::Verify(o) => (Command::Verify, o),
            Sub::Report(o) => (Command::Report, o),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Embed,
    Foliate,
    SolveU,
    SolveW,
    Mass,
    Verify,
    Report,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Embed => "embed",
            Command::Foliate => "foliate",
            Command::SolveU => "solve-u",
            Command::SolveW => "solve-w",
            Command::Mass => "mass",
            Command::Verify => "verify",
            Command::Report => "report",
        }
    }

    /// Number of pipeline stages the command runs (embed = 1 ... mass = 5).
    pub fn depth(&self) -> usize {
        match self {
            Command::Embed => 1,
            Command::Foliate => 2,
            Command::SolveU => 3,
            Command::SolveW => 4,
            _ => 5,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Options {
    /// Surface description (TOML).
    #[arg(long)]
    pub input: PathBuf,
    /// Hyperbolic curvature scale; defaults to `kappa` in the input file.
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub ntheta: Option<usize>,
    #[arg(long)]
    pub npsi: Option<usize>,
    /// Outer radius of the flows; defaults to 8/κ.
    #[arg(long)]
    pub rmax: Option<f64>,
    #[arg(long, default_value_t = 400)]
    pub steps: usize,
    /// closed_form, axisymmetric or general; chosen from the input when absent.
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Seed for the random spinors of the verify battery.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol_defect: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol_mono: f64,
    /// Write every n-th leaf to the flow CSV files.
    #[arg(long, default_value_t = 20)]
    pub csv_stride: usize,
    /// Ignore and do not populate out/cache.
    #[arg(long)]
    pub no_cache: bool,
}

impl Options {
    pub fn new(input: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        Options {
            input: input.into(),
            kappa: None,
            ntheta: None,
            npsi: None,
            rmax: None,
            steps: 400,
            strategy: None,
            out: out.into(),
            seed: 0,
            tol_defect: 1e-8,
            tol_mono: 1e-6,
            csv_stride: 20,
            no_cache: false,
        }
    }
}

/// Everything that determines the numbers a run produces.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub input_sha256: String,
    pub kappa: f64,
    pub ntheta: usize,
    pub npsi: usize,
    pub r_max: f64,
    pub steps: usize,
    pub strategy: Strategy,
    pub seed: u64,
    pub tol_defect: f64,
    pub tol_mono: f64,
    pub csv_stride: usize,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunConfig {
    /// Read the input and fill in every default.
    pub fn resolve(opts: &Options) -> Result<(RunConfig, SurfaceSpec)> {
        let bytes = std::fs::read(&opts.input)
            .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", opts.input.display())))?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|_| Error::Parse(format!("{} is not UTF-8", opts.input.display())))?;
        let file = SurfaceFile::parse(&text)?;
        let kappa = opts.kappa.or(file.kappa).ok_or_else(|| {
            Error::InvalidInput("no kappa given on the command line or in the input file".into())
        })?;
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidInput(format!("kappa must be positive, got {kappa}")));
        }
        let dims = match (opts.ntheta, opts.npsi, file.grid_dims()) {
            (None, None, None) => None,
            (nt, np, Some((ft, fp))) => Some((nt.unwrap_or(ft), np.unwrap_or(fp))),
            (nt, np, None) => Some((nt.unwrap_or(32), np.unwrap_or(32))),
        };
        let spec = file.to_spec(dims)?;
        let strategy = match &opts.strategy {
            Some(s) => s.parse()?,
            None => auto_strategy(&spec),
        };
        let r_max = opts.rmax.unwrap_or(8.0 / kappa);
        if opts.csv_stride == 0 {
            return Err(Error::InvalidInput("csv-stride must be at least 1".into()));
        }
        for (name, v) in [("tol-defect", opts.tol_defect), ("tol-mono", opts.tol_mono)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        let cfg = RunConfig {
            input_sha256: sha256_hex(&bytes),
            kappa,
            ntheta: spec.grid.ntheta,
            npsi: spec.grid.npsi,
            r_max,
            steps: opts.steps,
            strategy,
            seed: opts.seed,
            tol_defect: opts.tol_defect,
            tol_mono: opts.tol_mono,
            csv_stride: opts.csv_stride,
        };
        Ok((cfg, spec))
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serialises"))
    }
}

/// Closed form for round spheres, the ODE embedding for axisymmetric data,
/// the general solver otherwise.
pub fn auto_strategy(spec: &SurfaceSpec) -> Strategy {
    match spec.preset {
        Some(quasilocal_core::surface::Preset::RoundSphere { .. }) => Strategy::ClosedForm,
        _ if spec.axisymmetry_defect() < 1e-12 => Strategy::Axisymmetric,
        _ => Strategy::General,
    }
}
