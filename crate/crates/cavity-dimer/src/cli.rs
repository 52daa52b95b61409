use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use cavity_dimer_core::units::mhz_to_internal;
use clap::{Args, Parser, Subcommand};

use crate::config::{self, parse_symmetry, ConfigFile, Setup};
use crate::jobs::{self, Artifact};
use crate::manifest::{OutputFile, RunManifest};
use crate::{exit, AppError};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "CAVITY_DIMER_OUT";

#[derive(Debug, Parser)]
#[command(name = "cavity-dimer", version, about = "Cavity-induced giant quasibound diatoms: curves, scattering, levels, spectra")]
pub struct Cli {
    /// Named parameter set (cs-optical | cs-rydberg); overrides the config file's preset.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// TOML configuration file (see docs/config.md).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = OUT_ENV, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ScanArgs {
    /// Lower energy [MHz, relative to ω_A].
    #[arg(long, allow_negative_numbers = true)]
    pub emin: Option<f64>,
    /// Upper energy [MHz, relative to ω_A].
    #[arg(long, allow_negative_numbers = true)]
    pub emax: Option<f64>,
    /// Energy window as two values EMIN EMAX [MHz].
    #[arg(long, num_args = 2, value_names = ["EMIN", "EMAX"], allow_negative_numbers = true, conflicts_with_all = ["emin", "emax"])]
    pub window: Option<Vec<f64>>,
    /// Number of (coarse) energy points.
    #[arg(long)]
    pub points: Option<usize>,
    /// Cavity loss Γ_c [MHz]: adds a Lorentzian-convolved curve.
    #[arg(long)]
    pub loss: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct LevelArgs {
    /// sigma | pi
    #[arg(long)]
    pub symmetry: Option<String>,
    /// Number of θ points on [0, π].
    #[arg(long)]
    pub n_theta: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SpectrumArgs {
    /// Lorentzian width Γ_eff [MHz].
    #[arg(long)]
    pub gamma_eff: Option<f64>,
    /// Number of θ points on [0, π].
    #[arg(long)]
    pub n_theta: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Adiabatic curves ω₁,₂,₃(R).
    Potentials,
    /// Well position and depth versus coupling strength (×1 … ×100).
    SweepKappa,
    /// Well position and depth versus cavity detuning.
    SweepDetuning,
    /// Entrance-channel S₁₁ and σ₁₁ on a uniform energy grid.
    Scatter(ScanArgs),
    /// Resonance peaks (line fits) and complex poles.
    Resonances(ScanArgs),
    /// Morse vibrational levels with Landau–Zener–Stueckelberg corrections.
    Levels(LevelArgs),
    /// Angle-averaged Σ and Π emission spectra.
    Spectrum(SpectrumArgs),
    /// Quick invariant suite.
    Validate,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Potentials => "potentials",
            Command::SweepKappa => "sweep-kappa",
            Command::SweepDetuning => "sweep-detuning",
            Command::Scatter(_) => "scatter",
            Command::Resonances(_) => "resonances",
            Command::Levels(_) => "levels",
            Command::Spectrum(_) => "spectrum",
            Command::Validate => "validate",
        }
    }
}

/// Applies flags over `setup`, recording each in `overrides`.
fn apply_flags(cmd: &Command, setup: &mut Setup, overrides: &mut BTreeMap<String, String>) -> Result<(), AppError> {
    let mut note = |k: &str, v: String| {
        overrides.insert(k.to_string(), v);
    };
    match cmd {
        Command::Scatter(a) | Command::Resonances(a) => {
            let (emin, emax) = match &a.window {
                Some(w) => (Some(w[0]), Some(w[1])),
                None => (a.emin, a.emax),
            };
            if let Some(v) = emin {
                setup.window.0 = mhz_to_internal(v);
                note("emin", v.to_string());
            }
            if let Some(v) = emax {
                setup.window.1 = mhz_to_internal(v);
                note("emax", v.to_string());
            }
            if let Some(v) = a.points {
                setup.points = v;
                note("points", v.to_string());
            }
            if let Some(v) = a.loss {
                setup.loss = Some(mhz_to_internal(v));
                note("loss", v.to_string());
            }
        }
        Command::Levels(a) => {
            if let Some(v) = &a.symmetry {
                setup.symmetry = Some(parse_symmetry(v)?);
                note("symmetry", v.clone());
            }
            if let Some(v) = a.n_theta {
                setup.n_theta = v;
                note("n_theta", v.to_string());
            }
        }
        Command::Spectrum(a) => {
            if let Some(v) = a.gamma_eff {
                setup.gamma_eff = mhz_to_internal(v);
                note("gamma_eff", v.to_string());
            }
            if let Some(v) = a.n_theta {
                setup.n_theta = v;
                note("n_theta", v.to_string());
            }
        }
        _ => {}
    }
    Ok(())
}

pub fn build_setup(cli: &Cli) -> Result<(Setup, BTreeMap<String, String>), AppError> {
    let (file, hash) = match &cli.config {
        Some(path) => config::load_file(path)?,
        None => (ConfigFile::default(), String::new()),
    };
    let mut setup = config::resolve(&file, cli.preset.as_deref(), hash)?;
    let mut overrides = BTreeMap::new();
    if let Some(p) = &cli.preset {
        overrides.insert("preset".into(), p.clone());
    }
    apply_flags(&cli.command, &mut setup, &mut overrides)?;
    setup.validate()?;
    Ok((setup, overrides))
}

pub fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool, AppError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(AppError::Config("--threads must be at least 1".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| AppError::Config(e.to_string()))
}

/// Outcome of a successful run: artifacts were written and the command
/// reported whether its own checks passed.
pub struct RunReport {
    pub manifest: RunManifest,
    pub checks_passed: bool,
}

pub fn execute(cli: &Cli) -> Result<RunReport, AppError> {
    let start = Instant::now();
    let (setup, overrides) = build_setup(cli)?;
    let pool = thread_pool(cli.threads)?;
    let mut checks_passed = true;
    let artifacts: Vec<Artifact> = match &cli.command {
        Command::Potentials => jobs::potentials(&setup)?,
        Command::SweepKappa => jobs::sweep_kappa(&setup, &pool)?,
        Command::SweepDetuning => jobs::sweep_detuning(&setup, &pool)?,
        Command::Scatter(_) => jobs::scatter(&setup, &pool)?,
        Command::Resonances(_) => jobs::resonances(&setup, &pool)?,
        Command::Levels(_) => jobs::levels(&setup, &pool)?,
        Command::Spectrum(_) => jobs::spectrum(&setup, &pool)?,
        Command::Validate => {
            let (a, ok) = jobs::validate(&setup, &pool)?;
            checks_passed = ok;
            a
        }
    };
    // render everything before touching the disk, so a refused value leaves no partial output
    let rendered: Vec<(String, Vec<u8>)> =
        artifacts.iter().map(|a| Ok((a.name.clone(), a.bytes()?))).collect::<Result<_, AppError>>()?;
    std::fs::create_dir_all(&cli.out).map_err(|e| AppError::Io(format!("{}: {e}", cli.out.display())))?;
    let mut outputs = Vec::new();
    for (name, bytes) in &rendered {
        let path = cli.out.join(name);
        std::fs::write(&path, bytes).map_err(|e| AppError::Io(format!("{}: {e}", path.display())))?;
        outputs.push(OutputFile::describe(name, bytes));
    }
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: cli.command.name().into(),
        preset: setup.preset.name.into(),
        config_sha256: setup.config_hash.clone(),
        overrides,
        outputs,
        wall_clock_s: start.elapsed().as_secs_f64(),
        threads: pool.current_num_threads(),
    };
    manifest.write(&cli.out)?;
    Ok(RunReport { manifest, checks_passed })
}

/// Parses `argv` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(r) if r.checks_passed => exit::OK,
        Ok(r) => {
            eprintln!("error: invariant checks failed, see {}", cli.out.join(&r.manifest.outputs[0].path).display());
            exit::NUMERICAL
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
