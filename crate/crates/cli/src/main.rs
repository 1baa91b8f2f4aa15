use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use sphericoh::coherence::{coherence_report, theorem_lower_bound, welch_bound};
use sphericoh::grids::{format_f64, mode_count};
use sphericoh::identities::{run_suite, write_records, Suite};
use sphericoh::optimize::{random_angles, run, Method, OptimizerConfig};
use sphericoh::{BasisKind, Error, Grid};

/// Sensing matrices on spherical grids: coherence, bounds, identity checks
/// and sampling optimization.
#[derive(Parser, Debug)]
#[command(name = "sphericoh", version)]
struct Cli {
    /// Worker threads (default: all available cores).
    #[arg(long, global = true, env = "SPHERICOH_THREADS")]
    threads: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Equispaced elevation grid.
    Grid {
        #[arg(long)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mutual coherence of the sensing matrix on an equispaced-elevation grid.
    Coherence(CoherenceArgs),
    /// Equal-order lower bound and Welch bound.
    Bound {
        #[arg(long)]
        bandwidth: u32,
        #[arg(long)]
        samples: usize,
        #[arg(long, default_value = "wigner")]
        kind: BasisKind,
        /// Divide by the sample norms of both Legendre vectors.
        #[arg(long)]
        normalized: bool,
    },
    /// Numerical checks of the Legendre-sum and 3j identities.
    Verify {
        #[arg(long, value_enum)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 20)]
        max_degree: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gradient descent on azimuth/polarization angles.
    Optimize(OptimizeArgs),
}

#[derive(Args, Debug)]
struct CoherenceArgs {
    #[arg(long)]
    bandwidth: u32,
    #[arg(long)]
    samples: usize,
    #[arg(long, default_value = "wigner")]
    kind: BasisKind,
    /// File with one azimuth angle per line (radians).
    #[arg(long)]
    phi_file: Option<PathBuf>,
    /// File with one polarization angle per line (radians).
    #[arg(long)]
    chi_file: Option<PathBuf>,
    /// Seed for random angles not given by file.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[arg(long)]
    bandwidth: u32,
    #[arg(long)]
    samples: usize,
    #[arg(long, default_value = "wigner")]
    kind: BasisKind,
    #[arg(long, default_value = "adam")]
    method: Method,
    #[arg(long, default_value_t = 8)]
    p: u32,
    #[arg(long, default_value_t = 0.5)]
    eta: f64,
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    optimize_theta: bool,
    /// Writes `<out>_trace.csv` and `<out>_grid.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SuiteArg {
    LegendreSum,
    Residual,
    Monotone,
    Threej,
    Norms,
    All,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::LegendreSum => Suite::LegendreSum,
            SuiteArg::Residual => Suite::Residual,
            SuiteArg::Monotone => Suite::Monotone,
            SuiteArg::Threej => Suite::ThreeJ,
            SuiteArg::Norms => Suite::Norms,
            SuiteArg::All => Suite::All,
        }
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Numerical(String),
    ChecksFailed(usize),
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        match err {
            Error::InvalidArgument(_) | Error::GridFormat(_) | Error::Order { .. } | Error::Domain { .. } => {
                Failure::Usage(err.to_string())
            }
            _ => Failure::Numerical(err.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(err: io::Error) -> Self {
        Failure::Numerical(err.to_string())
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_angles(path: &Path, m: usize) -> Result<Vec<f64>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let values = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .flat_map(|l| l.split([',', ' ', '\t']).filter(|t| !t.is_empty()))
        .map(|t| t.parse::<f64>().map_err(|e| usage(format!("{}: bad angle `{t}`: {e}", path.display()))))
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != m {
        return Err(usage(format!(
            "{} holds {} angles, expected {m}",
            path.display(),
            values.len()
        )));
    }
    Ok(values)
}

fn grid_json(grid: &Grid) -> serde_json::Value {
    let samples: Vec<_> = (0..grid.len())
        .map(|p| {
            json!({
                "p": p + 1,
                "theta": grid.theta()[p],
                "phi": grid.phi()[p],
                "chi": grid.chi()[p],
            })
        })
        .collect();
    json!(samples)
}

fn cmd_grid(samples: usize, out: Option<&Path>, format: Format) -> Result<(), Failure> {
    let grid = Grid::equispaced(samples, BasisKind::Wigner)?;
    let mut w = output(out)?;
    match format {
        Format::Csv => grid.write_csv(&mut w)?,
        Format::Json => writeln!(w, "{}", serde_json::to_string_pretty(&grid_json(&grid)).expect("json"))?,
    }
    w.flush()?;
    Ok(())
}

fn cmd_coherence(args: &CoherenceArgs, format: Format) -> Result<(), Failure> {
    if args.bandwidth == 0 {
        return Err(usage("--bandwidth must be at least 1"));
    }
    let base = Grid::equispaced(args.samples, args.kind)?;
    let (phi, chi) = random_angles(args.samples, args.seed);
    let phi = match &args.phi_file {
        Some(p) => read_angles(p, args.samples)?,
        None => phi,
    };
    let chi = match (&args.chi_file, args.kind) {
        (Some(p), _) => read_angles(p, args.samples)?,
        (None, BasisKind::Wigner) => chi,
        (None, BasisKind::Spherical) => vec![0.0; args.samples],
    };
    let grid = base.with_angles(phi, chi)?;
    let report = coherence_report(&grid, args.bandwidth)?;
    let mut w = output(args.out.as_deref())?;
    match format {
        Format::Csv => report.write_csv(&mut w)?,
        Format::Json => writeln!(w, "{}", report.to_json())?,
    }
    w.flush()?;
    Ok(())
}

fn cmd_bound(bandwidth: u32, samples: usize, kind: BasisKind, normalized: bool, format: Format) -> Result<(), Failure> {
    if bandwidth < 3 {
        return Err(usage(format!("--bandwidth must be at least 3, got {bandwidth}")));
    }
    if samples < 2 {
        return Err(usage(format!("--samples must be at least 2, got {samples}")));
    }
    let bound = theorem_lower_bound(bandwidth, samples, normalized)?;
    let n = mode_count(bandwidth, kind);
    let welch = welch_bound(samples, n);
    let mut out = io::stdout().lock();
    match format {
        Format::Csv => {
            writeln!(out, "B,m,N,kind,normalized,bound,welch")?;
            writeln!(out, "{bandwidth},{samples},{n},{kind},{normalized},{bound},{welch}")?;
        }
        Format::Json => {
            let v = json!({
                "B": bandwidth,
                "m": samples,
                "N": n,
                "kind": kind,
                "normalized": normalized,
                "bound": bound,
                "welch": welch,
            });
            writeln!(out, "{}", serde_json::to_string_pretty(&v).expect("json"))?;
        }
    }
    Ok(())
}

fn cmd_verify(suite: SuiteArg, max_degree: u32, out: Option<&Path>, format: Format) -> Result<(), Failure> {
    let records = run_suite(suite.into(), max_degree)?;
    let mut w = output(out)?;
    match format {
        Format::Csv => write_records(&records, &mut w)?,
        Format::Json => writeln!(w, "{}", serde_json::to_string_pretty(&records).expect("json"))?,
    }
    w.flush()?;
    let failed = records.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(Failure::ChecksFailed(failed));
    }
    Ok(())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_os_string();
    name.push(suffix);
    PathBuf::from(name)
}

fn cmd_optimize(args: &OptimizeArgs, format: Format) -> Result<(), Failure> {
    let config = OptimizerConfig {
        p: args.p,
        eta: args.eta,
        epsilon: args.eps,
        i_max: args.max_iter,
        method: args.method,
        seed: args.seed,
        optimize_theta: args.optimize_theta,
    };
    config.validate()?;
    if args.samples < 2 {
        return Err(usage(format!("--samples must be at least 2, got {}", args.samples)));
    }
    let result = run(&config, args.bandwidth, args.samples, args.kind)?;
    let trace_path = with_suffix(&args.out, "_trace.csv");
    let grid_path = with_suffix(&args.out, "_grid.csv");
    let mut w = BufWriter::new(File::create(&trace_path)?);
    result.write_trace(&mut w)?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(&grid_path)?);
    result.best_grid.write_csv(&mut w)?;
    w.flush()?;

    let mut out = io::stdout().lock();
    let bound = result.lower_bound;
    match format {
        Format::Csv => {
            writeln!(out, "iterations,final_mu,lower_bound,converged,trace,grid")?;
            writeln!(
                out,
                "{},{},{},{},{},{}",
                result.trace.len(),
                format_f64(result.final_mu),
                bound.map(format_f64).unwrap_or_default(),
                result.converged,
                trace_path.display(),
                grid_path.display()
            )?;
        }
        Format::Json => {
            let v = json!({
                "iterations": result.trace.len(),
                "final_mu": result.final_mu,
                "lower_bound": bound,
                "converged": result.converged,
                "trace": trace_path,
                "grid": grid_path,
            });
            writeln!(out, "{}", serde_json::to_string_pretty(&v).expect("json"))?;
        }
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Grid { samples, out } => cmd_grid(*samples, out.as_deref(), cli.format),
        Command::Coherence(args) => cmd_coherence(args, cli.format),
        Command::Bound {
            bandwidth,
            samples,
            kind,
            normalized,
        } => cmd_bound(*bandwidth, *samples, *kind, *normalized, cli.format),
        Command::Verify {
            suite,
            max_degree,
            out,
        } => cmd_verify(*suite, *max_degree, out.as_deref(), cli.format),
        Command::Optimize(args) => cmd_optimize(args, cli.format),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::ChecksFailed(n)) => {
            eprintln!("{n} checks failed");
            ExitCode::from(1)
        }
    }
}
