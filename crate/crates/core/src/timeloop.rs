//! Crank–Nicolson time stepping with a trapezoidal memory term.
//!
//! With `S = M + αA`, `α = τ/2 + τ²/4`, every step solves
//!
//! ```text
//! S P^{n+1} = (τ/2)(F^{n+1} + F^n) + M P^n − α A P^n − (τ²/2) A Σ_{j<n} (P^{j+1} + P^j)
//! ```
//!
//! where `M` is the cell mass matrix padded with zero face rows. The history
//! sum is carried in a running accumulator, so a step costs one matrix-vector
//! product and one condensed solve regardless of `n`.

use alloc::vec::Vec;

use crate::{
    assembly::{Discretization, LoadIntegrator},
    hho::interpolate_homogeneous,
    linalg::{Backend, CondensedSolver, CsrMatrix, Ordering},
    mesh::Point,
    DVector, Error, Result,
};

/// Uniform partition of `[0, T]` into `M` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    final_time: f64,
    steps: usize,
}

impl TimeGrid {
    /// `M = ⌈T/τ⌉` steps; the step actually used is `T/M ≤ τ`.
    pub fn from_step(final_time: f64, tau: f64) -> Result<Self> {
        if !(final_time > 0.0 && final_time.is_finite() && tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidTimeGrid { final_time, tau });
        }
        // Tolerance so that τ = T/M computed in floating point gives M steps.
        let steps = libm::ceil(final_time / tau * (1.0 - 1e-12)) as usize;
        Ok(Self { final_time, steps: steps.max(1) })
    }

    /// At least one step is required.
    pub fn with_steps(final_time: f64, steps: usize) -> Result<Self> {
        if !(final_time > 0.0 && final_time.is_finite() && steps > 0) {
            return Err(Error::InvalidTimeGrid { final_time, tau: final_time / steps as f64 });
        }
        Ok(Self { final_time, steps })
    }

    pub fn final_time(&self) -> f64 {
        self.final_time
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `τ = T/M`.
    pub fn tau(&self) -> f64 {
        self.final_time / self.steps as f64
    }

    /// `t_n = nτ`, with `t_M = T` exactly.
    pub fn node(&self, n: usize) -> f64 {
        if n == self.steps {
            self.final_time
        } else {
            n as f64 * self.tau()
        }
    }
}

/// Discrete solution at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeState {
    pub step: usize,
    /// `P^n` on the global unknowns.
    pub p: DVector,
    /// `Σ_{j=0}^{n−1} (P^{j+1} + P^j)`.
    pub memory_sum: DVector,
    /// Load `F^n` at `t_n`, cell unknowns only.
    pub load_prev: DVector,
}

/// `θ^{n+1/2} = (θ^{n+1} + θ^n)/2`.
pub fn half_average(next: &DVector, prev: &DVector) -> DVector {
    (next + prev) * 0.5
}

/// `∂_τ θ^n = (θ^{n+1} − θ^n)/τ`.
pub fn difference_quotient(next: &DVector, prev: &DVector, tau: f64) -> DVector {
    (next - prev) / tau
}

/// Running history update `Σ ← Σ + P^{n+1} + P^n`.
pub fn accumulate_memory(sum: &mut DVector, next: &DVector, prev: &DVector) {
    *sum += next;
    *sum += prev;
}

/// Composite trapezoidal weights `w_0, …, w_n`: one at both ends, two in
/// between.
pub fn trapezoidal_weights(n: usize) -> Vec<f64> {
    (0..=n).map(|j| if j == 0 || j == n { 1.0 } else { 2.0 }).collect()
}

/// `I^n = (τ/2) Σ_{j=0}^{n} w_j A P^j` for the history `P^0, …, P^n`.
pub fn trapezoidal_memory(a: &CsrMatrix, history: &[DVector], tau: f64) -> DVector {
    let n = history.len().saturating_sub(1);
    let mut sum = DVector::zeros(a.nrows());
    if history.len() < 2 {
        return sum;
    }
    for (w, p) in trapezoidal_weights(n).iter().zip(history) {
        sum.axpy(*w, p, 1.0);
    }
    a.mul_vec(&sum) * (0.5 * tau)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepperOptions {
    /// Include the memory term. Turning it off gives Crank–Nicolson for the
    /// heat equation, which is useful for checking the energy identity.
    pub memory: bool,
    /// Face solver; `None` selects a direct solve with nested dissection on
    /// face midpoints.
    pub backend: Option<Backend>,
}

impl Default for StepperOptions {
    fn default() -> Self {
        Self { memory: true, backend: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    pub log_stability: bool,
    pub keep_trajectory: bool,
}

/// One line of the stability log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityRecord {
    pub step: usize,
    pub time: f64,
    /// `‖P_K^n‖`.
    pub l2_cell_norm: f64,
    /// `‖P̂^{n−1/2}‖_{1,h}`.
    pub energy_half_norm: f64,
    /// `‖f^{n−1/2}‖`.
    pub forcing_half_norm: f64,
}

/// Tracks `Φ_l = ‖P_K^l‖² + τ Σ_{n<l} ‖P̂^{n+1/2}‖²_{1,h}` against
/// `‖P_K^0‖² + τ Σ_{n<l} ‖f^{n+1/2}‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityMonitor {
    tau: f64,
    initial: f64,
    dissipation: f64,
    forcing: f64,
    worst: f64,
}

impl StabilityMonitor {
    pub fn new(tau: f64, initial_l2_norm: f64) -> Self {
        Self { tau, initial: initial_l2_norm * initial_l2_norm, dissipation: 0.0, forcing: 0.0, worst: 0.0 }
    }

    pub fn record(&mut self, r: &StabilityRecord) {
        self.dissipation += self.tau * r.energy_half_norm * r.energy_half_norm;
        self.forcing += self.tau * r.forcing_half_norm * r.forcing_half_norm;
        let phi = r.l2_cell_norm * r.l2_cell_norm + self.dissipation;
        let bound = self.initial + self.forcing;
        let ratio = if bound > 0.0 { phi / bound } else if phi > 0.0 { f64::INFINITY } else { 0.0 };
        self.worst = self.worst.max(ratio);
    }

    /// Smallest `C` with `Φ_l ≤ C (‖P_K^0‖² + τ Σ ‖f^{n+1/2}‖²)` so far.
    pub fn constant(&self) -> f64 {
        self.worst
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub state: TimeState,
    pub stability: Vec<StabilityRecord>,
    /// Constant of the stability monitor, when logging was on.
    pub stability_constant: Option<f64>,
    /// `P^0, …, P^M` when requested.
    pub trajectory: Vec<DVector>,
}

/// Fully discrete solver on one discretization and time grid. The system
/// matrix is factored once at construction.
#[derive(Debug)]
pub struct TimeStepper<'a> {
    disc: &'a Discretization,
    grid: TimeGrid,
    alpha: f64,
    memory: bool,
    solver: CondensedSolver,
    load: LoadIntegrator,
}

impl<'a> TimeStepper<'a> {
    pub fn new(disc: &'a Discretization, grid: TimeGrid, options: StepperOptions) -> Result<Self> {
        let tau = grid.tau();
        let alpha = if options.memory { 0.5 * tau + 0.25 * tau * tau } else { 0.5 * tau };
        let sys = &disc.system;
        let s = sys.mass_extended().add_scaled(1.0, sys.stiffness(), alpha);
        let backend = options
            .backend
            .unwrap_or_else(|| Backend::Direct(Ordering::NestedDissection(disc.dofs().face_dof_points(&disc.mesh))));
        let solver = CondensedSolver::new(&s, disc.dofs().cell_offsets(), backend)?;
        let load = LoadIntegrator::new(&disc.mesh, disc.k)?;
        Ok(Self { disc, grid, alpha, memory: options.memory, solver, load })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// `α` in `S = M + αA`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn solver(&self) -> &CondensedSolver {
        &self.solver
    }

    /// `S = M + αA` on all global unknowns.
    pub fn system_matrix(&self) -> CsrMatrix {
        let sys = &self.disc.system;
        sys.mass_extended().add_scaled(1.0, sys.stiffness(), self.alpha)
    }

    /// Load vector `F^n = ((f(t), φ_i))` on the cell unknowns.
    pub fn load(&self, f: impl Fn(&Point, f64) -> f64, t: f64) -> DVector {
        self.load.assemble(|p| f(p, t))
    }

    /// `P^0 = Î_h g` with boundary faces removed, empty history, `F^0`.
    pub fn init(&self, g: impl Fn(&Point) -> f64, f: impl Fn(&Point, f64) -> f64) -> Result<TimeState> {
        let dofs = self.disc.dofs();
        let p = dofs.restrict(&interpolate_homogeneous(&self.disc.mesh, self.disc.k, g)?);
        Ok(TimeState {
            step: 0,
            memory_sum: DVector::zeros(p.len()),
            p,
            load_prev: self.load(f, self.grid.node(0)),
        })
    }

    /// Right-hand side `T^n` for the given next load `F^{n+1}`.
    pub fn rhs(&self, state: &TimeState, load_next: &DVector) -> DVector {
        let tau = self.grid.tau();
        let sys = &self.disc.system;
        let nk = sys.dofs().num_cell_dofs();
        let mut w = &state.p * self.alpha;
        if self.memory {
            w.axpy(0.5 * tau * tau, &state.memory_sum, 1.0);
        }
        let mut t = -sys.stiffness().mul_vec(&w);
        let pk = state.p.rows(0, nk).into_owned();
        let mut cell = sys.mass().mul_vec(&pk);
        cell.axpy(0.5 * tau, load_next, 1.0);
        cell.axpy(0.5 * tau, &state.load_prev, 1.0);
        let mut head = t.rows_mut(0, nk);
        head += &cell;
        t
    }

    /// Advances one step.
    pub fn step(&self, state: TimeState, f: impl Fn(&Point, f64) -> f64) -> Result<TimeState> {
        let n = state.step;
        let load_next = self.load(f, self.grid.node(n + 1));
        let t = self.rhs(&state, &load_next);
        let nk = self.disc.dofs().num_cell_dofs();
        let (xk, xf) = self
            .solver
            .solve(&t.rows(0, nk).into_owned(), &t.rows(nk, t.len() - nk).into_owned())
            .map_err(|source| Error::Step { step: n + 1, source })?;
        let mut p = DVector::zeros(t.len());
        p.rows_mut(0, nk).copy_from(&xk);
        p.rows_mut(nk, t.len() - nk).copy_from(&xf);
        let mut memory_sum = state.memory_sum;
        accumulate_memory(&mut memory_sum, &p, &state.p);
        Ok(TimeState { step: n + 1, p, memory_sum, load_prev: load_next })
    }

    /// Runs from `state` up to the final time.
    pub fn run(&self, mut state: TimeState, f: impl Fn(&Point, f64) -> f64, options: RunOptions) -> Result<RunOutput> {
        let sys = &self.disc.system;
        let mut trajectory = Vec::new();
        if options.keep_trajectory {
            trajectory.push(state.p.clone());
        }
        let mut stability = Vec::new();
        let mut monitor = StabilityMonitor::new(self.grid.tau(), sys.l2_cell_norm(&state.p)?);
        while state.step < self.grid.steps() {
            let next = self.step(state.clone(), &f)?;
            if options.log_stability {
                let (t0, t1) = (self.grid.node(state.step), self.grid.node(next.step));
                let record = StabilityRecord {
                    step: next.step,
                    time: t1,
                    l2_cell_norm: sys.l2_cell_norm(&next.p)?,
                    energy_half_norm: sys.energy_norm(&half_average(&next.p, &state.p))?,
                    forcing_half_norm: libm::sqrt(self.load.l2_norm_squared(|p| 0.5 * (f(p, t0) + f(p, t1)))),
                };
                monitor.record(&record);
                stability.push(record);
            }
            if options.keep_trajectory {
                trajectory.push(next.p.clone());
            }
            state = next;
        }
        Ok(RunOutput {
            state,
            stability,
            stability_constant: options.log_stability.then(|| monitor.constant()),
            trajectory,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_hits_final_time() {
        let g = TimeGrid::from_step(1.0, 0.3).unwrap();
        assert_eq!(g.steps(), 4);
        assert_eq!(g.node(4), 1.0);
        assert_eq!(TimeGrid::from_step(1.0, 1.0 / 7.0).unwrap().steps(), 7);
        assert_eq!(TimeGrid::from_step(1.0, 0.1).unwrap().steps(), 10);
        assert!(TimeGrid::from_step(0.0, 0.1).is_err());
        assert!(TimeGrid::from_step(1.0, -0.1).is_err());
    }

    #[test]
    fn weights() {
        assert_eq!(trapezoidal_weights(1), alloc::vec![1.0, 1.0]);
        assert_eq!(trapezoidal_weights(3), alloc::vec![1.0, 2.0, 2.0, 1.0]);
    }
}
