//! Command-line driver: single solves, convergence and temporal studies.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on argument errors.

use std::{
    fs,
    path::{Path, PathBuf},
    process::ExitCode,
    str::FromStr,
};

use anyhow::Context;
use clap::{error::ErrorKind, Args, CommandFactory, Parser, Subcommand};
use hho::{
    config::ConfigFile,
    dump::dump_system,
    io::load_mesh,
    report,
};
use hho_core::{
    analysis::{
        convergence_on_meshes, solve, temporal_study, ConvergenceReport, DecayProblem, Problem, SineProblem,
        SolveOptions, TauRule, ZeroProblem,
    },
    assembly::Discretization,
    mesh::{generate, mesh_size, Mesh, MeshFamily},
    timeloop::TimeGrid,
};

#[derive(Debug, Parser)]
#[command(name = "hho", version, about = "HHO solver for p_t - Δp - ∫Δp ds = f on polygonal meshes")]
struct Cli {
    /// Worker threads for per-cell work; results do not depend on this.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mesh-refinement study with the coupled time-step rule.
    Convergence(StudyArgs),
    /// Refinement study with τ = c·h^{(k+2)/2} on distorted quadrilaterals.
    Superconv(StudyArgs),
    /// Fixed mesh, sequence of time steps.
    Temporal(TemporalArgs),
    /// One run on one mesh.
    Solve(SolveArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Polynomial degree k ∈ {0, 1, 2, 3}.
    #[arg(long)]
    k: Option<usize>,
    /// Final time.
    #[arg(long = "T")]
    final_time: Option<f64>,
    /// Manufactured problem: sine, decay or zero.
    #[arg(long)]
    problem: Option<String>,
    /// `key = value` file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StudyArgs {
    #[command(flatten)]
    common: Common,
    /// triangular, distorted_quad or hexagonal.
    #[arg(long)]
    family: Option<String>,
    /// Number of refinement levels; level i uses n0·2^i subdivisions.
    #[arg(long)]
    refine: Option<usize>,
    /// Subdivisions of the coarsest level.
    #[arg(long)]
    n0: Option<usize>,
    /// Amplitude of the distorted-quadrilateral shear.
    #[arg(long)]
    distortion: Option<f64>,
    /// sqrt_h, coupled[:c], superconv[:c] or fixed:tau.
    #[arg(long)]
    tau: Option<String>,
    /// CSV report.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON report with metadata.
    #[arg(long)]
    json: Option<PathBuf>,
    /// log10 plot data.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Track the discrete stability functional on every level.
    #[arg(long)]
    log_stability: bool,
}

#[derive(Debug, Args)]
struct TemporalArgs {
    #[command(flatten)]
    common: Common,
    /// Mesh family (triangular, distorted_quad or hexagonal).
    #[arg(long)]
    family: Option<String>,
    /// Subdivisions of the fixed mesh.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    distortion: Option<f64>,
    /// Comma-separated time steps.
    #[arg(long)]
    taus: Option<String>,
    /// CSV with one row per step size.
    #[arg(long)]
    out: Option<PathBuf>,
    /// log10(tau) against log10 of the errors, as CSV.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    /// Mesh file in the `poly2d 1` format; overrides --family/--n.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Generated mesh family (triangular, distorted_quad or hexagonal).
    #[arg(long)]
    family: Option<String>,
    /// Subdivisions per side of the generated mesh.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    distortion: Option<f64>,
    /// Step rule, as for `convergence`.
    #[arg(long)]
    tau: Option<String>,
    /// One-row CSV summary.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the stability log (to `<out>.stability.csv`, or standard output).
    #[arg(long)]
    log_stability: bool,
    /// Directory for coordinate-format dumps of the assembled blocks.
    #[arg(long)]
    dump_matrices: Option<PathBuf>,
}

const STUDY_KEYS: &[&str] = &["k", "T", "problem", "family", "refine", "n0", "distortion", "tau", "out", "json", "plot", "log-stability"];
const TEMPORAL_KEYS: &[&str] = &["k", "T", "problem", "family", "n", "distortion", "taus", "out", "plot"];
const SOLVE_KEYS: &[&str] = &["k", "T", "problem", "mesh", "family", "n", "distortion", "tau", "out", "log-stability", "dump-matrices"];

fn usage_error(kind: ErrorKind, msg: impl std::fmt::Display) -> clap::Error {
    Cli::command().error(kind, msg)
}

/// Flag value, else config value, else `None`.
struct Merged {
    file: ConfigFile,
}

impl Merged {
    fn new(path: Option<&Path>, keys: &[&str]) -> Result<Self, clap::Error> {
        let file = match path {
            Some(p) => ConfigFile::load(p, keys).map_err(|e| usage_error(ErrorKind::InvalidValue, e))?,
            None => ConfigFile::default(),
        };
        Ok(Self { file })
    }

    fn get<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, clap::Error>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.file
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| usage_error(ErrorKind::InvalidValue, format!("config key `{key}`: {e}"))))
            .transpose()
    }

    fn flag(&self, flag: bool, key: &str) -> Result<bool, clap::Error> {
        Ok(flag || self.get::<bool>(None, key)?.unwrap_or(false))
    }
}

struct Shared {
    k: usize,
    final_time: f64,
    problem: Box<dyn Problem + Send + Sync>,
}

fn parse_problem(name: &str) -> Result<Box<dyn Problem + Send + Sync>, clap::Error> {
    match name {
        "sine" => Ok(Box::new(SineProblem)),
        "decay" => Ok(Box::new(DecayProblem)),
        "zero" => Ok(Box::new(ZeroProblem)),
        other => Err(usage_error(ErrorKind::InvalidValue, format!("unknown problem `{other}` (expected sine, decay or zero)"))),
    }
}

fn shared(c: &Common, m: &Merged) -> Result<Shared, clap::Error> {
    let k = m.get(c.k, "k")?.ok_or_else(|| {
        usage_error(ErrorKind::MissingRequiredArgument, "the following required argument was not provided:\n  --k <K>")
    })?;
    if k > 3 {
        return Err(usage_error(ErrorKind::InvalidValue, format!("--k must be 0, 1, 2 or 3, got {k}")));
    }
    let final_time = m.get(c.final_time, "T")?.unwrap_or(1.0);
    if !(final_time > 0.0 && final_time.is_finite()) {
        return Err(usage_error(ErrorKind::InvalidValue, format!("--T must be positive, got {final_time}")));
    }
    let problem = parse_problem(&m.get(c.problem.clone(), "problem")?.unwrap_or_else(|| "sine".into()))?;
    Ok(Shared { k, final_time, problem })
}

fn family(flag: Option<String>, m: &Merged, default: MeshFamily) -> Result<MeshFamily, clap::Error> {
    match m.get(flag, "family")? {
        Some(s) => s.parse().map_err(|e| usage_error(ErrorKind::InvalidValue, e)),
        None => Ok(default),
    }
}

fn tau_rule(flag: Option<String>, m: &Merged, default: TauRule) -> Result<TauRule, clap::Error> {
    match m.get(flag, "tau")? {
        Some(s) => s.parse().map_err(|e| usage_error(ErrorKind::InvalidValue, e)),
        None => Ok(default),
    }
}

fn distortion(flag: Option<f64>, m: &Merged) -> Result<f64, clap::Error> {
    let d = m.get(flag, "distortion")?.unwrap_or(0.3);
    if !(0.0..1.0).contains(&d) {
        return Err(usage_error(ErrorKind::InvalidValue, format!("--distortion must lie in [0, 1), got {d}")));
    }
    Ok(d)
}

fn positive(v: usize, name: &str) -> Result<usize, clap::Error> {
    if v == 0 {
        return Err(usage_error(ErrorKind::InvalidValue, format!("--{name} must be at least 1")));
    }
    Ok(v)
}

fn write(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

type Job = Box<dyn FnOnce() -> anyhow::Result<()> + Send>;

fn study(args: StudyArgs, superconv: bool) -> Result<Job, clap::Error> {
    let m = Merged::new(args.common.config.as_deref(), STUDY_KEYS)?;
    let s = shared(&args.common, &m)?;
    let default_family = if superconv { MeshFamily::DistortedQuad } else { MeshFamily::Triangular };
    let fam = family(args.family, &m, default_family)?;
    let default_rule = if superconv { TauRule::Superconv { c: TauRule::DEFAULT_CONSTANT } } else { TauRule::default_for(s.k) };
    let rule = tau_rule(args.tau, &m, default_rule)?;
    let refine = positive(m.get(args.refine, "refine")?.unwrap_or(4), "refine")?;
    let n0 = positive(m.get(args.n0, "n0")?.unwrap_or(8), "n0")?;
    let d = distortion(args.distortion, &m)?;
    let out: Option<PathBuf> = m.get(args.out, "out")?;
    let json: Option<PathBuf> = m.get(args.json, "json")?;
    let plot: Option<PathBuf> = m.get(args.plot, "plot")?;
    let log_stability = m.flag(args.log_stability, "log-stability")?;
    Ok(Box::new(move || {
        let meshes = (0..refine)
            .map(|i| generate(fam, n0 << i, d))
            .collect::<Result<Vec<Mesh>, _>>()
            .context("generating meshes")?;
        let options = SolveOptions { log_stability, ..Default::default() };
        let report: ConvergenceReport =
            convergence_on_meshes(fam.name(), meshes, s.k, rule, s.final_time, s.problem.as_ref(), &options)?;
        print!("{}", report::convergence_table(&report));
        if let (Ok(l2), Ok(en)) = (report.l2_slope(), report.energy_slope()) {
            println!("least-squares slopes: L2 {l2:.3}, energy {en:.3}");
        }
        if let Some(p) = out {
            write(&p, &report::convergence_csv(&report))?;
        }
        if let Some(p) = json {
            write(&p, &report::convergence_json(&report))?;
        }
        if let Some(p) = plot {
            write(&p, &report::convergence_plot_csv(&report))?;
        }
        Ok(())
    }))
}

fn parse_taus(s: &str) -> Result<Vec<f64>, clap::Error> {
    let taus: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| usage_error(ErrorKind::InvalidValue, format!("invalid time step `{t}`"))))
        .collect::<Result<_, _>>()?;
    if taus.is_empty() || taus.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(usage_error(ErrorKind::InvalidValue, "--taus needs positive time steps"));
    }
    Ok(taus)
}

fn temporal(args: TemporalArgs) -> Result<Job, clap::Error> {
    let m = Merged::new(args.common.config.as_deref(), TEMPORAL_KEYS)?;
    let s = shared(&args.common, &m)?;
    let fam = family(args.family, &m, MeshFamily::Triangular)?;
    let n = positive(m.get(args.n, "n")?.unwrap_or(64), "n")?;
    let d = distortion(args.distortion, &m)?;
    let taus = parse_taus(&m.get(args.taus, "taus")?.unwrap_or_else(|| "0.2,0.1,0.05,0.025".into()))?;
    let out: Option<PathBuf> = m.get(args.out, "out")?;
    let plot: Option<PathBuf> = m.get(args.plot, "plot")?;
    Ok(Box::new(move || {
        let disc = Discretization::new(generate(fam, n, d)?, s.k)?;
        let rep = temporal_study(&disc, &taus, s.final_time, s.problem.as_ref(), &SolveOptions::default())?;
        print!("{}", report::temporal_table(&rep));
        if let Some(p) = out {
            write(&p, &report::temporal_csv(&rep))?;
        }
        if let Some(p) = plot {
            write(&p, &report::temporal_plot_csv(&rep))?;
        }
        Ok(())
    }))
}

fn stability_path(out: &Path) -> PathBuf {
    out.with_extension("stability.csv")
}

fn solve_cmd(args: SolveArgs) -> Result<Job, clap::Error> {
    let m = Merged::new(args.common.config.as_deref(), SOLVE_KEYS)?;
    let s = shared(&args.common, &m)?;
    let mesh_file: Option<PathBuf> = m.get(args.mesh, "mesh")?;
    let fam = family(args.family, &m, MeshFamily::Triangular)?;
    let n = positive(m.get(args.n, "n")?.unwrap_or(8), "n")?;
    let d = distortion(args.distortion, &m)?;
    let rule = tau_rule(args.tau, &m, TauRule::default_for(s.k))?;
    let out: Option<PathBuf> = m.get(args.out, "out")?;
    let log_stability = m.flag(args.log_stability, "log-stability")?;
    let dump: Option<PathBuf> = m.get(args.dump_matrices, "dump-matrices")?;
    Ok(Box::new(move || {
        let (label, mesh) = match &mesh_file {
            Some(p) => (p.display().to_string(), load_mesh(p)?),
            None => (format!("{fam} n={n}"), generate(fam, n, d)?),
        };
        let h = mesh_size(&mesh);
        let grid = TimeGrid::from_step(s.final_time, rule.tau(h, s.k))?;
        let disc = Discretization::new(mesh, s.k)?;
        if let Some(dir) = &dump {
            let files = dump_system(dir, &disc.system).with_context(|| format!("dumping matrices to {}", dir.display()))?;
            eprintln!("wrote {} matrix files to {}", files.len(), dir.display());
        }
        let r = solve(&disc, grid, s.problem.as_ref(), &SolveOptions { log_stability, ..Default::default() })?;
        println!("mesh            {label}");
        println!("k               {}", s.k);
        println!("h               {:.6e}", r.h);
        println!("tau             {:.6e} ({} steps, rule {rule})", r.tau, r.steps);
        println!("cell dofs       {}", r.cell_dofs);
        println!("face dofs       {}", r.face_dofs);
        println!("L2 error        {:.6e}", r.l2_error);
        println!("energy error    {:.6e}", r.energy_error);
        println!("grad R error    {:.6e}", r.reconstruction_gradient_error);
        if let Some(c) = r.stability_constant {
            println!("stability C     {c:.6e}");
        }
        if let Some(p) = &out {
            let row = format!(
                "{}\n{:e},{:e},{},{:e},,{:e},\n",
                report::CONVERGENCE_HEADER,
                r.h,
                r.tau,
                r.ndofs(),
                r.l2_error,
                r.energy_error
            );
            write(p, &row)?;
        }
        if log_stability {
            let csv = report::stability_csv(&r.stability);
            match &out {
                Some(p) => write(&stability_path(p), &csv)?,
                None => print!("{csv}"),
            }
        }
        Ok(())
    }))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let job = match cli.command {
        Command::Convergence(a) => study(a, false),
        Command::Superconv(a) => study(a, true),
        Command::Temporal(a) => temporal(a),
        Command::Solve(a) => solve_cmd(a),
    }
    .and_then(|job| {
        if cli.threads == 0 {
            return Err(usage_error(ErrorKind::InvalidValue, "--threads must be at least 1"));
        }
        Ok(job)
    });
    let job = match job {
        Ok(j) => j,
        Err(e) => e.exit(),
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(job) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
