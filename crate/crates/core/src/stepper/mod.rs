//! Fully implicit time integration with adaptive step control.

mod linear;
mod newton;
mod residual;
mod sources;

use std::sync::Arc;

use thiserror::Error;

use crate::error::{Error, Result};
use crate::grid::{laplacian_neumann, norm_l2, FaceAveraging, Field};
use crate::model::{self, Parameters};

pub use newton::{newton_solve, NewtonFailure, NewtonFailureKind, NewtonOutcome};
pub use residual::{assemble_residual, derive_chi};
pub use sources::{CosineMode, DecayingMode, ManufacturedSolution, MmsSources, Sources};

/// Order parameter and temperature at one time instant. The chemical
/// potential is derived on demand, never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub u: Field,
    pub theta: Field,
    pub step_index: usize,
}

impl State {
    /// Validates positivity and finiteness.
    pub fn new(t: f64, u: Field, theta: Field) -> Result<Self> {
        if u.grid() != theta.grid() {
            return Err(Error::InvalidGrid("u and theta live on different grids".into()));
        }
        if !u.is_finite() || !theta.is_finite() {
            return Err(Error::InvalidGrid("non-finite field values".into()));
        }
        if let Some(&bad) = theta.values().iter().find(|&&q| !(q > 0.0)) {
            return Err(Error::NonPositiveTemperature(bad));
        }
        Ok(Self { t, u, theta, step_index: 0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinearSolver {
    DenseDirect,
    /// Sparse LU of the analytic Jacobian.
    SparseDirect,
    #[default]
    Krylov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JacobianMode {
    Analytic,
    #[default]
    FiniteDifference,
}

/// Which unknowns evolve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Coupling {
    #[default]
    Full,
    /// Temperature held at its initial values; only the order parameter is solved for.
    FrozenTemperature,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub theta_floor: f64,
    pub growth_factor: f64,
    pub linear_solver: LinearSolver,
    pub jacobian: JacobianMode,
    pub averaging: FaceAveraging,
    pub coupling: Coupling,
    /// Relative tolerance of the inner Krylov solve.
    pub krylov_forcing: f64,
    /// Steps converging in at most this many Newton iterations grow the time step.
    pub easy_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt_init: 1e-3,
            dt_min: 1e-12,
            dt_max: 1e-1,
            newton_tol: 1e-10,
            newton_max_iter: 50,
            theta_floor: 1e-8,
            growth_factor: 1.2,
            linear_solver: LinearSolver::default(),
            jacobian: JacobianMode::default(),
            averaging: FaceAveraging::default(),
            coupling: Coupling::default(),
            krylov_forcing: 1e-3,
            easy_iterations: 5,
        }
    }
}

impl SolverConfig {
    /// Constant step `dt` with no adaptation.
    pub fn fixed_step(dt: f64) -> Self {
        Self { dt_init: dt, dt_min: dt, dt_max: dt, ..Self::default() }
    }

    pub fn validated(self) -> Result<Self> {
        let bad = |name: &'static str, reason: &str| {
            Err(Error::InvalidParameter { name, reason: reason.to_string() })
        };
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return bad("dt_init", "time steps must satisfy 0 < dt_min <= dt_init <= dt_max");
        }
        if !(self.theta_floor > 0.0) {
            return bad("theta_floor", "must be positive");
        }
        if !(self.newton_tol > 0.0) {
            return bad("newton_tol", "must be positive");
        }
        if !(self.growth_factor >= 1.0) {
            return bad("growth_factor", "must be at least 1");
        }
        if !(self.krylov_forcing > 0.0 && self.krylov_forcing < 1.0) {
            return bad("krylov_forcing", "must lie in (0, 1)");
        }
        if self.linear_solver == LinearSolver::SparseDirect && self.jacobian != JacobianMode::Analytic {
            return bad("jacobian", "the sparse direct solver factorizes the analytic Jacobian");
        }
        Ok(self)
    }
}

/// Per-step record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// Time at the end of the step.
    pub t: f64,
    pub dt: f64,
    pub newton_iterations: usize,
    pub linear_iterations: usize,
    pub initial_residual: f64,
    pub residual: f64,
    pub min_theta: f64,
    /// Number of rejected attempts before this step was accepted.
    pub rejections: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("time step fell below dt_min = {dt_min} at t = {t} (last Newton failure: {:?})", .last_failure.kind)]
    DtUnderflow { t: f64, dt_min: f64, last_failure: NewtonFailure },
    #[error(transparent)]
    Invalid(#[from] Error),
}

/// Accepted states and step reports, `reports[i]` describing the step into `states[i + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub reports: Vec<StepReport>,
    /// `|| (f(u0) - alpha lap u0) / sqrt(theta0) ||_L2` of the initial data, logged only.
    pub initial_data_ratio: f64,
}

impl Trajectory {
    pub fn initial(&self) -> &State {
        &self.states[0]
    }

    pub fn last(&self) -> &State {
        self.states.last().expect("trajectory holds its initial state")
    }
}

/// Adaptive step controller.
pub struct Stepper {
    params: Parameters,
    cfg: SolverConfig,
    sources: Option<Arc<dyn Sources>>,
    dt: f64,
}

impl Stepper {
    pub fn new(params: Parameters, cfg: SolverConfig, sources: Option<Arc<dyn Sources>>) -> Result<Self> {
        let params = params.validated()?;
        let cfg = cfg.validated()?;
        Ok(Self { params, cfg, sources, dt: cfg.dt_init })
    }

    pub fn params(&self) -> &Parameters {
        &self.params
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// Step size the next attempt will use.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// One accepted step, at most `max_dt` long.
    pub fn advance(&mut self, state: &State, max_dt: f64) -> std::result::Result<(State, StepReport), StepError> {
        let params = self.params;
        let cfg = self.cfg;
        let sources = self.sources.clone();
        self.advance_with(state, max_dt, |old, dt| newton_solve(old, dt, &params, &cfg, sources.as_deref()))
    }

    /// Step control around an arbitrary implicit solver: halve on failure down
    /// to `dt_min`, grow by `growth_factor` after easy steps.
    pub fn advance_with<F>(
        &mut self,
        state: &State,
        max_dt: f64,
        mut solve: F,
    ) -> std::result::Result<(State, StepReport), StepError>
    where
        F: FnMut(&State, f64) -> std::result::Result<NewtonOutcome, NewtonFailure>,
    {
        let mut rejections = 0;
        loop {
            let dt = self.dt.min(max_dt);
            match solve(state, dt) {
                Ok(outcome) => {
                    let min_theta = outcome.state.theta.min();
                    debug_assert!(min_theta > 0.0);
                    let report = StepReport {
                        t: outcome.state.t,
                        dt,
                        newton_iterations: outcome.iterations,
                        linear_iterations: outcome.linear_iterations,
                        initial_residual: outcome.initial_residual,
                        residual: outcome.residual,
                        min_theta,
                        rejections,
                    };
                    if outcome.iterations <= self.cfg.easy_iterations && dt == self.dt {
                        self.dt = (self.dt * self.cfg.growth_factor).min(self.cfg.dt_max);
                    }
                    return Ok((outcome.state, report));
                }
                Err(failure) => {
                    let halved = 0.5 * dt;
                    if halved < self.cfg.dt_min {
                        return Err(StepError::DtUnderflow {
                            t: state.t,
                            dt_min: self.cfg.dt_min,
                            last_failure: failure,
                        });
                    }
                    self.dt = halved;
                    rejections += 1;
                }
            }
        }
    }
}

/// Relative slack below which the final time counts as reached.
const END_TIME_SLACK: f64 = 1e-12;

/// Integrates from `initial` until `t_final`, calling `observer` after every accepted step.
pub fn run(
    initial: State,
    params: &Parameters,
    cfg: &SolverConfig,
    sources: Option<Arc<dyn Sources>>,
    t_final: f64,
    mut observer: impl FnMut(&State, &StepReport),
) -> std::result::Result<Trajectory, StepError> {
    let mut stepper = Stepper::new(*params, *cfg, sources)?;
    let initial = State::new(initial.t, initial.u, initial.theta)
        .map(|s| State { step_index: 0, ..s })?;
    let initial_data_ratio = initial_data_ratio(&initial, params);
    let mut states = vec![initial];
    let mut reports = Vec::new();
    let slack = END_TIME_SLACK * t_final.abs().max(1.0);
    loop {
        let current = states.last().expect("nonempty");
        let remaining = t_final - current.t;
        if remaining <= slack {
            break;
        }
        let (mut next, report) = stepper.advance(current, remaining)?;
        if (t_final - next.t).abs() <= slack {
            next.t = t_final;
        }
        observer(&next, &report);
        states.push(next);
        reports.push(report);
    }
    Ok(Trajectory { states, reports, initial_data_ratio })
}

/// `|| (f(u) - alpha lap u) / sqrt(theta) ||_L2`.
pub(crate) fn initial_data_ratio(state: &State, params: &Parameters) -> f64 {
    let lap = laplacian_neumann(&state.u);
    let values: Vec<f64> = (0..state.u.len())
        .map(|i| (model::potential_f(state.u[i]) - params.alpha * lap[i]) / state.theta[i].sqrt())
        .collect();
    norm_l2(&Field::new(*state.u.grid(), values).expect("size"))
}
