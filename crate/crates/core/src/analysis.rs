//! Exact solutions, error norms, convergence orders and studies.

use alloc::{string::String, vec::Vec};
use core::{f64::consts::PI, fmt, str::FromStr};

use crate::{
    assembly::Discretization,
    basis::CellBasis,
    hho::interpolate_homogeneous,
    mesh::{generate, mesh_size, Mesh, MeshFamily, Point, Vector},
    quadrature::QuadratureFactory,
    timeloop::{RunOptions, StabilityRecord, StepperOptions, TimeGrid, TimeStepper},
    DVector, Error, Result,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("at least {needed} points are required, got {actual}")]
    TooFewPoints { needed: usize, actual: usize },
    #[error("value {value} at index {index} must be positive")]
    NonPositive { index: usize, value: f64 },
    #[error("no refinement levels given")]
    NoRefinements,
    #[error("unknown time step rule `{0}`")]
    UnknownTauRule(String),
}

/// Exact solution and data of `p_t − Δp − ∫₀ᵗ Δp ds = f`, `p(·,0) = g`.
pub trait Problem {
    fn exact(&self, p: &Point, t: f64) -> f64;
    fn gradient(&self, p: &Point, t: f64) -> Vector;
    fn forcing(&self, p: &Point, t: f64) -> f64;

    fn initial(&self, p: &Point) -> f64 {
        self.exact(p, 0.0)
    }
}

/// `p = e^{−t} sin(πx) sin(πy)` on the unit square.
///
/// With `s = sin(πx) sin(πy)`: `p_t = −e^{−t}s`, `Δp = −2π²e^{−t}s` and
/// `∫₀ᵗ Δp = −2π²(1 − e^{−t})s`, hence `f = (2π² − e^{−t}) s` and `g = s`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SineProblem;

impl Problem for SineProblem {
    fn exact(&self, p: &Point, t: f64) -> f64 {
        libm::exp(-t) * libm::sin(PI * p.x) * libm::sin(PI * p.y)
    }

    fn gradient(&self, p: &Point, t: f64) -> Vector {
        let e = libm::exp(-t) * PI;
        let (sx, cx) = (libm::sin(PI * p.x), libm::cos(PI * p.x));
        let (sy, cy) = (libm::sin(PI * p.y), libm::cos(PI * p.y));
        Vector::new(e * cx * sy, e * sx * cy)
    }

    fn forcing(&self, p: &Point, t: f64) -> f64 {
        (2.0 * PI * PI - libm::exp(-t)) * libm::sin(PI * p.x) * libm::sin(PI * p.y)
    }
}

/// Zero data and zero solution.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ZeroProblem;

impl Problem for ZeroProblem {
    fn exact(&self, _: &Point, _: f64) -> f64 {
        0.0
    }

    fn gradient(&self, _: &Point, _: f64) -> Vector {
        Vector::zeros()
    }

    fn forcing(&self, _: &Point, _: f64) -> f64 {
        0.0
    }
}

/// Zero forcing with `g = sin(πx) sin(πy)`.
///
/// The solution is `a(t) g` with `a' + λa + λ∫₀ᵗa = 0`, `a(0) = 1`,
/// `λ = 2π²`, i.e. `a'' + λa' + λa = 0` with `a'(0) = −λ`. Both roots of
/// `r² + λr + λ` are real and negative.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DecayProblem;

impl DecayProblem {
    pub fn amplitude(t: f64) -> f64 {
        let lambda = 2.0 * PI * PI;
        let s = libm::sqrt(lambda * lambda - 4.0 * lambda);
        let (r1, r2) = (0.5 * (-lambda + s), 0.5 * (-lambda - s));
        let c1 = (-lambda - r2) / (r1 - r2);
        c1 * libm::exp(r1 * t) + (1.0 - c1) * libm::exp(r2 * t)
    }
}

impl Problem for DecayProblem {
    fn exact(&self, p: &Point, t: f64) -> f64 {
        Self::amplitude(t) * libm::sin(PI * p.x) * libm::sin(PI * p.y)
    }

    fn gradient(&self, p: &Point, t: f64) -> Vector {
        SineProblem.gradient(p, 0.0) * Self::amplitude(t)
    }

    fn forcing(&self, _: &Point, _: f64) -> f64 {
        0.0
    }
}

/// Error quadrature degree `2k + 4`.
pub fn error_quadrature_degree(k: usize) -> usize {
    2 * k + 4
}

/// `‖p − P_K‖` over the mesh, cell unknowns only.
pub fn l2_error(disc: &Discretization, x: &DVector, exact: impl Fn(&Point) -> f64) -> f64 {
    l2_error_with_degree(disc, x, exact, error_quadrature_degree(disc.k))
}

pub fn l2_error_with_degree(disc: &Discretization, x: &DVector, exact: impl Fn(&Point) -> f64, degree: usize) -> f64 {
    let factory = QuadratureFactory::new(degree);
    let nk = crate::basis::cell_dim(disc.k);
    let mut total = 0.0;
    for c in 0..disc.mesh.num_cells() {
        let basis = CellBasis::for_cell(&disc.mesh, c, disc.k);
        let coeffs = &x.as_slice()[c * nk..(c + 1) * nk];
        // Meshes in a Discretization have already passed the same rule.
        let rule = factory.cell(&disc.mesh.cell_polygon(c)).expect("cell quadrature");
        total += rule.integrate(|p| {
            let d = exact(p) - basis.eval_poly(coeffs, p);
            d * d
        });
    }
    libm::sqrt(total)
}

/// `‖Î_h p − P̂‖_{1,h}`, the error of the interpolant in the energy norm.
pub fn energy_error(disc: &Discretization, x: &DVector, exact: impl Fn(&Point) -> f64) -> Result<f64> {
    let ip = disc.dofs().restrict(&interpolate_homogeneous(&disc.mesh, disc.k, exact)?);
    disc.system.energy_norm(&(ip - x))
}

/// Reconstructed potential of every cell, as coefficients in the degree
/// `k+1` cell basis.
pub fn reconstructions(disc: &Discretization, x: &DVector) -> Vec<DVector> {
    let v = disc.dofs().extend(x);
    (0..disc.mesh.num_cells()).map(|c| &disc.locals[c].reconstruction * v.local(&disc.mesh, c)).collect()
}

/// `(Σ_K ‖∇p − ∇R_K P̂‖²_K)^{1/2}`.
pub fn reconstruction_gradient_error(disc: &Discretization, x: &DVector, gradient: impl Fn(&Point) -> Vector) -> f64 {
    let factory = QuadratureFactory::new(error_quadrature_degree(disc.k));
    let mut total = 0.0;
    for (c, r) in reconstructions(disc, x).iter().enumerate() {
        let basis = CellBasis::for_cell(&disc.mesh, c, disc.k + 1);
        let rule = factory.cell(&disc.mesh.cell_polygon(c)).expect("cell quadrature");
        total += rule.integrate(|p| (gradient(p) - basis.grad_poly(r.as_slice(), p)).norm_squared());
    }
    libm::sqrt(total)
}

/// `‖p − R P̂‖`, the L² error of the reconstructed potential.
pub fn reconstruction_l2_error(disc: &Discretization, x: &DVector, exact: impl Fn(&Point) -> f64) -> f64 {
    let factory = QuadratureFactory::new(error_quadrature_degree(disc.k + 1));
    let mut total = 0.0;
    for (c, r) in reconstructions(disc, x).iter().enumerate() {
        let basis = CellBasis::for_cell(&disc.mesh, c, disc.k + 1);
        let rule = factory.cell(&disc.mesh.cell_polygon(c)).expect("cell quadrature");
        total += rule.integrate(|p| {
            let d = exact(p) - basis.eval_poly(r.as_slice(), p);
            d * d
        });
    }
    libm::sqrt(total)
}

fn check_positive(values: &[f64]) -> Result<(), AnalysisError> {
    match values.iter().position(|&v| !(v > 0.0)) {
        Some(index) => Err(AnalysisError::NonPositive { index, value: values[index] }),
        None => Ok(()),
    }
}

/// `log(e_{i+1}/e_i) / log(h_{i+1}/h_i)` for consecutive pairs.
pub fn eoc(errors: &[f64], hs: &[f64]) -> Result<Vec<f64>, AnalysisError> {
    if errors.len() != hs.len() {
        return Err(AnalysisError::LengthMismatch { expected: hs.len(), actual: errors.len() });
    }
    if errors.len() < 2 {
        return Err(AnalysisError::TooFewPoints { needed: 2, actual: errors.len() });
    }
    check_positive(errors)?;
    check_positive(hs)?;
    Ok(errors
        .windows(2)
        .zip(hs.windows(2))
        .map(|(e, h)| libm::log(e[1] / e[0]) / libm::log(h[1] / h[0]))
        .collect())
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64, AnalysisError> {
    if xs.len() != ys.len() {
        return Err(AnalysisError::LengthMismatch { expected: xs.len(), actual: ys.len() });
    }
    if xs.len() < 2 {
        return Err(AnalysisError::TooFewPoints { needed: 2, actual: xs.len() });
    }
    check_positive(xs)?;
    check_positive(ys)?;
    let lx: Vec<f64> = xs.iter().map(|&x| libm::log(x)).collect();
    let ly: Vec<f64> = ys.iter().map(|&y| libm::log(y)).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// How the time step follows the mesh size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauRule {
    /// `τ = √h`.
    SqrtH,
    /// `τ = c·h^{(k+1)/2}`.
    Coupled { c: f64 },
    /// `τ = c·h^{(k+2)/2}`.
    Superconv { c: f64 },
    Fixed(f64),
}

impl TauRule {
    pub const DEFAULT_CONSTANT: f64 = 10.0;

    /// `√h` for `k = 0`, `10·h^{(k+1)/2}` otherwise.
    pub fn default_for(k: usize) -> Self {
        if k == 0 {
            TauRule::SqrtH
        } else {
            TauRule::Coupled { c: Self::DEFAULT_CONSTANT }
        }
    }

    /// Target step before rounding to a divisor of the final time.
    pub fn tau(&self, h: f64, k: usize) -> f64 {
        match *self {
            TauRule::SqrtH => libm::sqrt(h),
            TauRule::Coupled { c } => c * libm::pow(h, (k as f64 + 1.0) / 2.0),
            TauRule::Superconv { c } => c * libm::pow(h, (k as f64 + 2.0) / 2.0),
            TauRule::Fixed(tau) => tau,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TauRule::SqrtH => "sqrt_h",
            TauRule::Coupled { .. } => "coupled",
            TauRule::Superconv { .. } => "superconv",
            TauRule::Fixed(_) => "fixed",
        }
    }

    /// The constant `c`, or the fixed step.
    pub fn parameter(&self) -> Option<f64> {
        match *self {
            TauRule::SqrtH => None,
            TauRule::Coupled { c } | TauRule::Superconv { c } => Some(c),
            TauRule::Fixed(tau) => Some(tau),
        }
    }
}

impl fmt::Display for TauRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.parameter() {
            Some(v) => write!(f, "{}:{}", self.name(), v),
            None => f.write_str(self.name()),
        }
    }
}

/// Parses `sqrt_h`, `coupled`, `coupled:C`, `superconv`, `superconv:C` or
/// `fixed:TAU`.
impl FromStr for TauRule {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || AnalysisError::UnknownTauRule(s.into());
        let (name, value) = match s.split_once(':') {
            Some((n, v)) => (n.trim(), Some(v.trim().parse::<f64>().map_err(|_| bad())?)),
            None => (s.trim(), None),
        };
        if value.is_some_and(|v| !(v > 0.0 && v.is_finite())) {
            return Err(bad());
        }
        match (name.to_ascii_lowercase().as_str(), value) {
            ("sqrt_h" | "sqrt", None) => Ok(TauRule::SqrtH),
            ("coupled", c) => Ok(TauRule::Coupled { c: c.unwrap_or(Self::DEFAULT_CONSTANT) }),
            ("superconv", c) => Ok(TauRule::Superconv { c: c.unwrap_or(Self::DEFAULT_CONSTANT) }),
            ("fixed", Some(tau)) => Ok(TauRule::Fixed(tau)),
            _ => Err(bad()),
        }
    }
}

/// Settings shared by every run of a study.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveOptions {
    pub stepper: StepperOptions,
    pub log_stability: bool,
}

/// Outcome of one space-time run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub h: f64,
    pub tau: f64,
    pub steps: usize,
    pub cell_dofs: usize,
    pub face_dofs: usize,
    pub l2_error: f64,
    pub energy_error: f64,
    pub reconstruction_gradient_error: f64,
    pub reconstruction_l2_error: f64,
    pub stability: Vec<StabilityRecord>,
    pub stability_constant: Option<f64>,
    /// `P^M` on the global unknowns.
    pub solution: DVector,
}

impl SolveResult {
    pub fn ndofs(&self) -> usize {
        self.cell_dofs + self.face_dofs
    }
}

/// Discretizes, steps to the final time and measures the errors at `T`.
pub fn solve<P: Problem + ?Sized>(disc: &Discretization, grid: TimeGrid, problem: &P, options: &SolveOptions) -> Result<SolveResult> {
    let stepper = TimeStepper::new(disc, grid, options.stepper.clone())?;
    let f = |p: &Point, t: f64| problem.forcing(p, t);
    let state = stepper.init(|p| problem.initial(p), f)?;
    let out = stepper.run(state, f, RunOptions { log_stability: options.log_stability, keep_trajectory: false })?;
    let t = grid.final_time();
    let x = out.state.p;
    Ok(SolveResult {
        h: mesh_size(&disc.mesh),
        tau: grid.tau(),
        steps: grid.steps(),
        cell_dofs: disc.dofs().num_cell_dofs(),
        face_dofs: disc.dofs().num_face_dofs(),
        l2_error: l2_error(disc, &x, |p| problem.exact(p, t)),
        energy_error: energy_error(disc, &x, |p| problem.exact(p, t))?,
        reconstruction_gradient_error: reconstruction_gradient_error(disc, &x, |p| problem.gradient(p, t)),
        reconstruction_l2_error: reconstruction_l2_error(disc, &x, |p| problem.exact(p, t)),
        stability: out.stability,
        stability_constant: out.stability_constant,
        solution: x,
    })
}

/// One refinement level of a convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub h: f64,
    pub tau: f64,
    pub steps: usize,
    pub ndofs: usize,
    pub l2_error: f64,
    pub l2_order: Option<f64>,
    pub energy_error: f64,
    pub energy_order: Option<f64>,
    pub reconstruction_gradient_error: f64,
    pub reconstruction_gradient_order: Option<f64>,
    pub reconstruction_l2_error: f64,
    pub reconstruction_l2_order: Option<f64>,
    pub stability_constant: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub mesh: String,
    pub k: usize,
    pub final_time: f64,
    pub tau_rule: TauRule,
    pub rows: Vec<ConvergenceRow>,
}

fn order(prev: Option<&ConvergenceRow>, h: f64, e: f64, pick: impl Fn(&ConvergenceRow) -> f64) -> Option<f64> {
    let p = prev?;
    let e0 = pick(p);
    (e0 > 0.0 && e > 0.0 && p.h != h).then(|| libm::log(e / e0) / libm::log(h / p.h))
}

impl ConvergenceReport {
    pub fn new(mesh: impl Into<String>, k: usize, final_time: f64, tau_rule: TauRule) -> Self {
        Self { mesh: mesh.into(), k, final_time, tau_rule, rows: Vec::new() }
    }

    /// Appends a run; orders are taken against the previous row.
    pub fn push(&mut self, r: &SolveResult) {
        let prev = self.rows.last();
        let row = ConvergenceRow {
            h: r.h,
            tau: r.tau,
            steps: r.steps,
            ndofs: r.ndofs(),
            l2_error: r.l2_error,
            l2_order: order(prev, r.h, r.l2_error, |p| p.l2_error),
            energy_error: r.energy_error,
            energy_order: order(prev, r.h, r.energy_error, |p| p.energy_error),
            reconstruction_gradient_error: r.reconstruction_gradient_error,
            reconstruction_gradient_order: order(prev, r.h, r.reconstruction_gradient_error, |p| {
                p.reconstruction_gradient_error
            }),
            reconstruction_l2_error: r.reconstruction_l2_error,
            reconstruction_l2_order: order(prev, r.h, r.reconstruction_l2_error, |p| p.reconstruction_l2_error),
            stability_constant: r.stability_constant,
        };
        self.rows.push(row);
    }

    pub fn last_l2_order(&self) -> Option<f64> {
        self.rows.last()?.l2_order
    }

    pub fn last_energy_order(&self) -> Option<f64> {
        self.rows.last()?.energy_order
    }

    /// Least-squares slope of the L² error against `h` over all rows.
    pub fn l2_slope(&self) -> Result<f64, AnalysisError> {
        let hs: Vec<f64> = self.rows.iter().map(|r| r.h).collect();
        loglog_slope(&hs, &self.rows.iter().map(|r| r.l2_error).collect::<Vec<_>>())
    }

    pub fn energy_slope(&self) -> Result<f64, AnalysisError> {
        let hs: Vec<f64> = self.rows.iter().map(|r| r.h).collect();
        loglog_slope(&hs, &self.rows.iter().map(|r| r.energy_error).collect::<Vec<_>>())
    }
}

/// Parameters of a mesh-refinement study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub family: MeshFamily,
    /// Only used by the distorted quadrilateral family.
    pub distortion: f64,
    pub k: usize,
    pub refinements: Vec<usize>,
    pub tau_rule: TauRule,
    pub final_time: f64,
    pub options: SolveOptions,
}

impl StudyConfig {
    pub fn new(family: MeshFamily, k: usize, refinements: Vec<usize>) -> Self {
        Self {
            family,
            distortion: 0.3,
            k,
            refinements,
            tau_rule: TauRule::default_for(k),
            final_time: 1.0,
            options: SolveOptions::default(),
        }
    }
}

/// Runs the problem on a sequence of meshes.
pub fn convergence_on_meshes<P: Problem + ?Sized>(
    label: &str,
    meshes: impl IntoIterator<Item = Mesh>,
    k: usize,
    tau_rule: TauRule,
    final_time: f64,
    problem: &P,
    options: &SolveOptions,
) -> Result<ConvergenceReport> {
    let mut report = ConvergenceReport::new(label, k, final_time, tau_rule);
    for mesh in meshes {
        let h = mesh_size(&mesh);
        let grid = TimeGrid::from_step(final_time, tau_rule.tau(h, k))?;
        let disc = Discretization::new(mesh, k)?;
        report.push(&solve(&disc, grid, problem, options)?);
    }
    if report.rows.is_empty() {
        return Err(AnalysisError::NoRefinements.into());
    }
    Ok(report)
}

/// Refinement study on one generated mesh family.
pub fn convergence_study<P: Problem + ?Sized>(config: &StudyConfig, problem: &P) -> Result<ConvergenceReport> {
    if config.refinements.is_empty() {
        return Err(AnalysisError::NoRefinements.into());
    }
    let meshes = config
        .refinements
        .iter()
        .map(|&n| generate(config.family, n, config.distortion))
        .collect::<Result<Vec<_>, _>>()?;
    convergence_on_meshes(config.family.name(), meshes, config.k, config.tau_rule, config.final_time, problem, &config.options)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalRow {
    pub tau: f64,
    pub steps: usize,
    pub l2_error: f64,
    pub energy_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalReport {
    pub h: f64,
    pub k: usize,
    pub final_time: f64,
    pub rows: Vec<TemporalRow>,
}

impl TemporalReport {
    /// Least-squares slope of the L² error against `τ`; `None` with fewer
    /// than two rows or a vanishing error.
    pub fn l2_slope(&self) -> Option<f64> {
        let taus: Vec<f64> = self.rows.iter().map(|r| r.tau).collect();
        let errs: Vec<f64> = self.rows.iter().map(|r| r.l2_error).collect();
        loglog_slope(&taus, &errs).ok()
    }
}

/// Fixed mesh, sequence of time steps.
pub fn temporal_study<P: Problem + ?Sized>(
    disc: &Discretization,
    taus: &[f64],
    final_time: f64,
    problem: &P,
    options: &SolveOptions,
) -> Result<TemporalReport> {
    if taus.is_empty() {
        return Err(Error::Analysis(AnalysisError::NoRefinements));
    }
    let mut rows = Vec::with_capacity(taus.len());
    for &tau in taus {
        let grid = TimeGrid::from_step(final_time, tau)?;
        let r = solve(disc, grid, problem, options)?;
        rows.push(TemporalRow { tau: r.tau, steps: r.steps, l2_error: r.l2_error, energy_error: r.energy_error });
    }
    Ok(TemporalReport { h: mesh_size(&disc.mesh), k: disc.k, final_time, rows })
}
