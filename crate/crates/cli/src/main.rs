//! `widthlab`: batch front end for the width analyses.
//!
//! Exit status: 0 on success, 1 on invalid input or configuration, 2 on a
//! numerical failure (positivity loss, quadrature depth, instability).

mod commands;
mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use widthlab::equidist::SelectionRule;
use widthlab::yamabe::StepPolicy;
use widthlab::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "widthlab", version, about = "Numerical laboratory for the width of three-spheres")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON file with the command's parameters; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file, written atomically. Standard output when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Berger sphere table on a log grid (CSV).
    BergerScan {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        rho_min: Option<f64>,
        #[arg(long)]
        rho_max: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        abs_tol: Option<f64>,
        #[arg(long)]
        max_depth: Option<usize>,
    },
    /// Round value, local minimum, unboundedness and scalar bound checks (JSON).
    BergerCertify {
        #[command(flatten)]
        common: Common,
        /// Finite-difference steps, comma separated.
        #[arg(long, value_delimiter = ',')]
        steps: Option<Vec<f64>>,
        #[arg(long)]
        small_rho: Option<f64>,
        #[arg(long)]
        large_rho: Option<f64>,
        #[arg(long)]
        unbounded_factor: Option<f64>,
        #[arg(long)]
        grid_n: Option<usize>,
        #[arg(long)]
        mc_samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        abs_tol: Option<f64>,
        #[arg(long)]
        max_depth: Option<usize>,
    },
    /// Minimal latitude spheres, Jacobi data and width bound of a profile (JSON).
    ConformalAnalyze {
        #[command(flatten)]
        common: Common,
        #[arg(long = "profile", alias = "input")]
        input: Option<PathBuf>,
        #[arg(long)]
        isoperimetric_tol: Option<f64>,
    },
    /// Normalized Yamabe flow (CSV trace, optional JSON summary).
    YamabeRun {
        #[command(flatten)]
        common: Common,
        #[arg(long = "profile", alias = "input")]
        input: Option<PathBuf>,
        /// Grid size of the built-in initial profile.
        #[arg(long)]
        n: Option<usize>,
        /// Amplitude of the built-in initial profile `1 + a cos(theta)`.
        #[arg(long)]
        amplitude: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        sample_every: Option<usize>,
        #[arg(long)]
        convergence_tol: Option<f64>,
        #[arg(long, value_parser = parse_policy)]
        policy: Option<StepPolicy>,
        #[arg(long)]
        theorem_tol: Option<f64>,
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Cone-hull membership with a certificate (JSON).
    EquidistCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Greedy Cesàro sequence and its error curve (CSV).
    EquidistSequence {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        k_max: Option<usize>,
        #[arg(long, value_parser = parse_rule)]
        rule: Option<SelectionRule>,
        #[arg(long)]
        weighted: Option<bool>,
    },
    /// Self-test on the round sphere; prints one line per item.
    Roundcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<usize>,
    },
}

fn parse_policy(s: &str) -> std::result::Result<StepPolicy, String> {
    match s {
        "strict" => Ok(StepPolicy::Strict),
        "subdivide" => Ok(StepPolicy::Subdivide),
        _ => Err(format!("unknown policy {s:?}; expected strict or subdivide")),
    }
}

fn parse_rule(s: &str) -> std::result::Result<SelectionRule, String> {
    match s {
        "euclidean" => Ok(SelectionRule::Euclidean),
        "sup-norm" => Ok(SelectionRule::SupNorm),
        _ => Err(format!("unknown rule {s:?}; expected euclidean or sup-norm")),
    }
}

/// What a command produced. `pass = false` makes the process exit with 2.
pub struct Outcome {
    pub body: String,
    pub pass: bool,
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("WIDTHLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidInput(format!("WIDTHLAB_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidInput(format!("cannot configure thread pool: {e}")))
}

/// Temp file in the destination directory, then rename.
fn write_atomic(path: &Path, body: &str) -> Result<()> {
    let io_err = |e: std::io::Error| Error::InvalidInput(format!("cannot write {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(body.as_bytes()).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

fn emit(output: Option<&Path>, body: &str) -> Result<()> {
    match output {
        Some(p) => write_atomic(p, body),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Error::InvalidInput(format!("cannot write to stdout: {e}")))
        }
    }
}

fn dispatch(cmd: Command) -> Result<Outcome> {
    use config::*;
    match cmd {
        Command::BergerScan { common, rho_min, rho_max, n, abs_tol, max_depth } => {
            let mut cfg: BergerScanConfig = load_file(common.config.as_deref())?;
            if let Some(v) = rho_min {
                cfg.rho_min = v;
            }
            if let Some(v) = rho_max {
                cfg.rho_max = v;
            }
            if let Some(v) = n {
                cfg.n = v;
            }
            if let Some(v) = abs_tol {
                cfg.abs_tol = v;
            }
            if let Some(v) = max_depth {
                cfg.max_depth = v;
            }
            let out = commands::berger_scan(&cfg)?;
            emit(common.output.as_deref(), &out.body)?;
            Ok(out)
        }
        Command::BergerCertify {
            common,
            steps,
            small_rho,
            large_rho,
            unbounded_factor,
            grid_n,
            mc_samples,
            seed,
            abs_tol,
            max_depth,
        } => {
            let mut cfg: BergerCertifyConfig = load_file(common.config.as_deref())?;
            if let Some(v) = steps {
                cfg.steps = v;
            }
            if let Some(v) = small_rho {
                cfg.small_rho = v;
            }
            if let Some(v) = large_rho {
                cfg.large_rho = v;
            }
            if let Some(v) = unbounded_factor {
                cfg.unbounded_factor = v;
            }
            if let Some(v) = grid_n {
                cfg.grid_n = v;
            }
            if let Some(v) = mc_samples {
                cfg.mc_samples = v;
            }
            if let Some(v) = seed {
                cfg.seed = v;
            }
            if let Some(v) = abs_tol {
                cfg.abs_tol = v;
            }
            if let Some(v) = max_depth {
                cfg.max_depth = v;
            }
            let out = commands::berger_certify(&cfg)?;
            emit(common.output.as_deref(), &out.body)?;
            Ok(out)
        }
        Command::ConformalAnalyze { common, input, isoperimetric_tol } => {
            let mut cfg: ConformalConfig = load_file(common.config.as_deref())?;
            if input.is_some() {
                cfg.input = input;
            }
            if let Some(v) = isoperimetric_tol {
                cfg.isoperimetric_tol = v;
            }
            let out = commands::conformal_analyze(&cfg)?;
            emit(common.output.as_deref(), &out.body)?;
            Ok(out)
        }
        Command::YamabeRun {
            common,
            input,
            n,
            amplitude,
            t_end,
            dt,
            sample_every,
            convergence_tol,
            policy,
            theorem_tol,
            summary,
        } => {
            let mut cfg: YamabeConfig = load_file(common.config.as_deref())?;
            if input.is_some() {
                cfg.input = input;
            }
            if summary.is_some() {
                cfg.summary = summary;
            }
            if let Some(v) = n {
                cfg.n = v;
            }
            if let Some(v) = amplitude {
                cfg.amplitude = v;
            }
            if let Some(v) = t_end {
                cfg.t_end = v;
            }
            if let Some(v) = dt {
                cfg.dt = v;
            }
            if let Some(v) = sample_every {
                cfg.sample_every = v;
            }
            if let Some(v) = convergence_tol {
                cfg.convergence_tol = v;
            }
            if let Some(v) = policy {
                cfg.policy = v;
            }
            if let Some(v) = theorem_tol {
                cfg.theorem_tol = v;
            }
            let (out, summary_body) = commands::yamabe_run(&cfg)?;
            emit(common.output.as_deref(), &out.body)?;
            if let Some(p) = &cfg.summary {
                write_atomic(p, &summary_body)?;
            }
            Ok(out)
        }
        Command::EquidistCheck { common, input, tol } => {
            let mut cfg: EquidistCheckConfig = load_file(common.config.as_deref())?;
            if input.is_some() {
                cfg.input = input;
            }
            if let Some(v) = tol {
                cfg.tol = v;
            }
            let out = commands::equidist_check(&cfg)?;
            emit(common.output.as_deref(), &out.body)?;
            Ok(out)
        }
        Command::EquidistSequence { common, input, k_max, rule, weighted } => {
            let mut cfg: EquidistSequenceConfig = load_file(common.config.as_deref())?;
            if input.is_some() {
                cfg.input = input;
            }
            if let Some(v) = k_max {
                cfg.k_max = v;
            }
            if let Some(v) = rule {
                cfg.rule = v;
            }
            if let Some(v) = weighted {
                cfg.weighted = v;
            }
            let out = commands::equidist_sequence(&cfg)?;
            emit(common.output.as_deref(), &out.body)?;
            Ok(out)
        }
        Command::Roundcheck { common, n } => {
            let mut cfg: RoundcheckConfig = load_file(common.config.as_deref())?;
            if let Some(v) = n {
                cfg.n = v;
            }
            let (out, lines) = commands::roundcheck(&cfg)?;
            print!("{lines}");
            if common.output.is_some() {
                emit(common.output.as_deref(), &out.body)?;
            }
            Ok(out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = configure_threads().and_then(|_| dispatch(cli.command));
    match result {
        Ok(out) if out.pass => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(2),
        Err(e) => {
            eprintln!("widthlab: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
