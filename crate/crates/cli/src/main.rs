//! `stellarcrit` command-line front end.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use stellarcrit::criticality::{check_invariant_set, critical_constants, CriticalityError};
use stellarcrit::eos::{EosError, EosSpec, WhiteDwarfEos};
use stellarcrit::functionals::{evaluate, potential_double_integral_brute_force, FunctionalError};
use stellarcrit::hydro::{run, HydroError, RunConfig, Termination};
use stellarcrit::io::{read_profile_csv, write_mass_curve_csv, write_star_csv, write_timeseries_csv, IoError};
use stellarcrit::lane_emden::{solve_star, solve_star_direct, LaneEmdenError, StarSolution};
use stellarcrit::profile::ProfileError;
use stellarcrit::white_dwarf::{log_grid, mass_curve, noncollapse_bound, WhiteDwarfError};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "stellarcrit",
    version,
    about = "Critical masses, stationary stars and collapse dynamics of self-gravitating gases"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Critical constants for a polytropic law.
    Constants(ConstantsArgs),
    /// Stationary star of a given central density.
    Star(StarArgs),
    /// Mass, energy and virial functionals of a profile.
    Functionals(FunctionalsArgs),
    /// Membership of a profile in the invariant (non-collapse) set.
    CheckInvariant(CheckArgs),
    /// White-dwarf mass-radius curve.
    WdCurve(WdCurveArgs),
    /// Lagrangian simulation driven by a JSON run configuration.
    Simulate(SimulateArgs),
    /// Compares the nested potential integral with brute-force quadrature.
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum EosKind {
    Polytropic,
    WhiteDwarf,
}

#[derive(Args)]
struct EosArgs {
    #[arg(long, value_enum, default_value = "polytropic")]
    eos: EosKind,
    #[arg(long = "K")]
    k: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long = "A")]
    a: Option<f64>,
    #[arg(long = "B")]
    b: Option<f64>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct ConstantsArgs {
    #[arg(long = "K")]
    k: f64,
    #[arg(long)]
    gamma: f64,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct StarArgs {
    #[command(flatten)]
    eos: EosArgs,
    /// Central density.
    #[arg(long)]
    mu: f64,
    #[arg(long, default_value_t = 3)]
    dim: usize,
    /// Profile CSV destination (`r,rho,y`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct FunctionalsArgs {
    #[command(flatten)]
    eos: EosArgs,
    /// Profile CSV with columns `r,rho[,u]`.
    #[arg(long)]
    profile: PathBuf,
    #[arg(long, default_value_t = 3)]
    dim: usize,
    /// Central density of the reference star for the relative functional.
    #[arg(long)]
    mu_ref: Option<f64>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct CheckArgs {
    #[command(flatten)]
    eos: EosArgs,
    #[arg(long)]
    profile: PathBuf,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct WdCurveArgs {
    #[arg(long = "A")]
    a: f64,
    #[arg(long = "B")]
    b: f64,
    #[arg(long)]
    mu_min: f64,
    #[arg(long)]
    mu_max: f64,
    /// Number of logarithmically spaced central densities.
    #[arg(long, default_value_t = 16)]
    points: usize,
    /// CSV destination (`mu,M,R`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Time-series CSV destination; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run manifest destination; overrides the config.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct OracleArgs {
    #[arg(long)]
    profile: PathBuf,
    #[arg(long, default_value_t = 3)]
    dim: usize,
    /// Midpoint cells per axis.
    #[arg(long, default_value_t = 2000)]
    points: usize,
    /// Exit with a numerical failure when the relative difference exceeds this.
    #[arg(long)]
    tolerance: Option<f64>,
}

/// Failure carrying its exit code and a JSON diagnostic.
struct Failure {
    code: u8,
    body: Value,
}

impl Failure {
    fn config(kind: &str, message: impl ToString) -> Self {
        Self {
            code: EXIT_CONFIG,
            body: json!({ "error": kind, "message": message.to_string() }),
        }
    }

    fn numerical(kind: &str, message: impl ToString) -> Self {
        Self {
            code: EXIT_NUMERICAL,
            body: json!({ "error": kind, "message": message.to_string() }),
        }
    }
}

impl From<EosError> for Failure {
    fn from(e: EosError) -> Self {
        Failure::config("eos", e)
    }
}

impl From<ProfileError> for Failure {
    fn from(e: ProfileError) -> Self {
        Failure::config("profile", e)
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Io(e) => Failure::config("io", e),
            other => Failure::config("input", other),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::config("io", e)
    }
}

impl From<LaneEmdenError> for Failure {
    fn from(e: LaneEmdenError) -> Self {
        match &e {
            LaneEmdenError::UnboundedSupport { horizon } => Self {
                code: EXIT_NUMERICAL,
                body: json!({ "error": "no_zero_found", "message": e.to_string(), "horizon": horizon }),
            },
            LaneEmdenError::Ode(_) | LaneEmdenError::Profile(_) => Failure::numerical("integration", e),
            _ => Failure::config("lane_emden", e),
        }
    }
}

impl From<FunctionalError> for Failure {
    fn from(e: FunctionalError) -> Self {
        match e {
            FunctionalError::EmptyProfile => Failure::numerical("functional", e),
            _ => Failure::config("functional", e),
        }
    }
}

impl From<CriticalityError> for Failure {
    fn from(e: CriticalityError) -> Self {
        match e {
            CriticalityError::LaneEmden(e) => e.into(),
            CriticalityError::Functional(e) => e.into(),
            CriticalityError::FormulationMismatch { .. } | CriticalityError::LambdaNotAboveOne(_) => {
                Failure::numerical("criticality", e)
            }
            _ => Failure::config("criticality", e),
        }
    }
}

impl From<WhiteDwarfError> for Failure {
    fn from(e: WhiteDwarfError) -> Self {
        match e {
            WhiteDwarfError::Criticality(e) => e.into(),
            WhiteDwarfError::Functional(e) => e.into(),
            _ => Failure::config("white_dwarf", e),
        }
    }
}

impl From<HydroError> for Failure {
    fn from(e: HydroError) -> Self {
        match e {
            HydroError::LaneEmden(e) => e.into(),
            HydroError::Criticality(e) => e.into(),
            HydroError::DtCollapse { time, dt } => Self {
                code: EXIT_NUMERICAL,
                body: json!({ "error": "dt_collapse", "termination_reason": "dt_collapse", "time": time, "dt": dt }),
            },
            HydroError::Relaxation(_) => Failure::numerical("relaxation", e),
            _ => Failure::config("simulation", e),
        }
    }
}

type CliResult = Result<(), Failure>;

fn print_json<T: Serialize>(value: &T) -> CliResult {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Failure::config("io", e))?;
    writeln!(out)?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::config("io", format!("{}: {e}", path.display())))
}

fn thread_cap() -> Result<usize, Failure> {
    let default = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    match std::env::var("STELLARCRIT_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n.min(default.max(1)).max(1)),
            _ => Err(Failure::config(
                "environment",
                format!("STELLARCRIT_THREADS must be a positive integer, got {v:?}"),
            )),
        },
        Err(_) => Ok(default),
    }
}

impl EosArgs {
    fn spec(&self) -> Result<EosSpec, Failure> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Failure::config("arguments", format!("--{name} is required for this equation of state")))
        };
        Ok(match self.eos {
            EosKind::Polytropic => EosSpec::polytropic(need(self.k, "K")?, need(self.gamma, "gamma")?)?,
            EosKind::WhiteDwarf => EosSpec::white_dwarf(need(self.a, "A")?, need(self.b, "B")?)?,
        })
    }
}

fn stationary_star(eos: &EosSpec, mu: f64, dim: usize) -> Result<StarSolution, Failure> {
    Ok(if dim == 3 {
        solve_star(eos, mu)?
    } else {
        solve_star_direct(eos, mu, dim)?
    })
}

fn constants(args: ConstantsArgs) -> CliResult {
    print_json(&critical_constants(args.k, args.gamma)?)
}

fn star(args: StarArgs) -> CliResult {
    let eos = args.eos.spec()?;
    let star = stationary_star(&eos, args.mu, args.dim)?;
    if let Some(path) = &args.out {
        let mut w = create(path)?;
        write_star_csv(&mut w, &star)?;
        w.flush()?;
    }
    print_json(&json!({
        "eos": eos,
        "dim": star.dim,
        "mu": star.mu,
        "radius": star.radius,
        "mass": star.mass,
        "boundary_potential": star.boundary_potential,
        "nodes": star.profile.len(),
    }))
}

fn functionals(args: FunctionalsArgs) -> CliResult {
    let eos = args.eos.spec()?;
    let (rho, u) = read_profile_csv(&args.profile, args.dim)?;
    let reference = args.mu_ref.map(|mu| stationary_star(&eos, mu, args.dim)).transpose()?;
    print_json(&evaluate(&rho, u.as_ref(), &eos, reference.as_ref())?)
}

fn check_invariant(args: CheckArgs) -> CliResult {
    let eos = args.eos.spec()?;
    let (rho, u) = read_profile_csv(&args.profile, 3)?;
    match eos {
        EosSpec::Polytropic(p) => {
            let consts = critical_constants(p.k, p.gamma)?;
            print_json(&check_invariant_set(&rho, u.as_ref(), &p, &consts)?)
        }
        EosSpec::WhiteDwarf(w) => print_json(&noncollapse_bound(&rho, u.as_ref(), &w)?),
    }
}

fn wd_curve(args: WdCurveArgs) -> CliResult {
    let eos = WhiteDwarfEos::new(args.a, args.b)?;
    if !(args.mu_min > 0.0 && args.mu_max > args.mu_min && args.points >= 2) {
        return Err(Failure::config(
            "arguments",
            "need 0 < mu-min < mu-max and at least two points",
        ));
    }
    let curve = mass_curve(&eos, &log_grid(args.mu_min, args.mu_max, args.points), thread_cap()?)?;
    if let Some(path) = &args.out {
        let mut w = create(path)?;
        write_mass_curve_csv(&mut w, &curve)?;
        w.flush()?;
    }
    let failed: Vec<&str> = curve.points.iter().filter_map(|p| p.error.as_deref()).collect();
    print_json(&json!({
        "A": curve.a,
        "B": curve.b,
        "limit_mass": curve.limit_mass,
        "max_mass": curve.max_mass(),
        "strictly_increasing": curve.is_strictly_increasing(),
        "points": curve.points.len(),
        "failed_points": failed.len(),
    }))
}

fn simulate(args: SimulateArgs) -> CliResult {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Failure::config("io", format!("{}: {e}", args.config.display())))?;
    let config: RunConfig = serde_json::from_str(&text).map_err(|e| Failure::config("config", e))?;
    let base = args.config.parent().map(Path::to_path_buf);
    let base_ref = base.as_deref().filter(|p| !p.as_os_str().is_empty());
    let resolve = |p: &Path| match base_ref {
        Some(b) if p.is_relative() => b.join(p),
        _ => p.to_path_buf(),
    };
    let csv_path = args
        .out
        .clone()
        .or_else(|| config.output.as_ref().map(|o| resolve(&o.csv)));
    let manifest_path = args.manifest.clone().or_else(|| {
        config
            .output
            .as_ref()
            .and_then(|o| o.manifest.as_ref())
            .map(|m| resolve(m))
    });
    let out = run(&config, base_ref)?;

    match &csv_path {
        Some(path) => {
            let mut w = create(path)?;
            write_timeseries_csv(&mut w, &out.records)?;
            w.flush()?;
        }
        None => {
            let mut w = io::stdout().lock();
            write_timeseries_csv(&mut w, &out.records)?;
            w.flush()?;
        }
    }
    let reason = match out.termination {
        Termination::Completed => "completed",
        Termination::MaxSteps => "max_steps",
        Termination::DtCollapse => "dt_collapse",
    };
    let manifest = json!({
        "config": config,
        "termination_reason": reason,
        "final_time": out.final_state.time,
        "steps": out.final_state.steps,
        "outputs": out.records.len(),
        "max_energy_drift": out.max_energy_drift,
        "max_mass_drift": out.max_mass_drift,
        "bound": out.bound,
        "reference_mu": out.reference_mu,
    });
    match &manifest_path {
        Some(path) => {
            let mut w = create(path)?;
            serde_json::to_writer_pretty(&mut w, &manifest).map_err(|e| Failure::config("io", e))?;
            writeln!(w)?;
            w.flush()?;
        }
        None if csv_path.is_some() => print_json(&manifest)?,
        None => {}
    }
    if out.termination == Termination::DtCollapse {
        let last = out.records.last().expect("at least the initial record");
        return Err(Failure {
            code: EXIT_NUMERICAL,
            body: json!({
                "error": "dt_collapse",
                "termination_reason": reason,
                "time": out.final_state.time,
                "steps": out.final_state.steps,
                "blowup_indicator": last.blowup_indicator,
                "R": last.r,
            }),
        });
    }
    Ok(())
}

fn oracle(args: OracleArgs) -> CliResult {
    if args.points < 2 {
        return Err(Failure::config("arguments", "--points must be at least 2"));
    }
    let (rho, _) = read_profile_csv(&args.profile, args.dim)?;
    let nested = rho.potential_double_integral();
    let brute = potential_double_integral_brute_force(&rho, args.points);
    let rel = (nested / brute - 1.0).abs();
    print_json(&json!({
        "nested": nested,
        "brute_force": brute,
        "relative_difference": rel,
        "points": args.points,
    }))?;
    match args.tolerance {
        Some(tol) if rel.is_nan() || rel > tol => Err(Failure {
            code: EXIT_NUMERICAL,
            body: json!({ "error": "oracle_mismatch", "relative_difference": rel, "tolerance": tol }),
        }),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Constants(a) => constants(a),
        Command::Star(a) => star(a),
        Command::Functionals(a) => functionals(a),
        Command::CheckInvariant(a) => check_invariant(a),
        Command::WdCurve(a) => wd_curve(a),
        Command::Simulate(a) => simulate(a),
        Command::Oracle(a) => oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.body);
            ExitCode::from(f.code)
        }
    }
}
