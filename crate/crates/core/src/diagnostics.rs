//! Discrete audits of the balance laws, entropy structure and a-priori
//! norm bounds along a trajectory.
//!
//! Face quantities are built to mirror the scheme exactly. In particular the
//! conductive entropy production uses the face conductivity
//! `k_f = a_f * theta_L * theta_R`, where `a_f` is the face-averaged
//! `k/theta^2` of the heat flux; with that choice
//! `sum_i vol (1/theta_i) div_h(a grad theta)_i = int k_f |grad_h (1/theta)|^2`
//! holds to round-off, and the only gap left in the integral entropy balance
//! is the backward-Euler term `c_V (theta+ - theta)^2 / (2 theta+)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{h1_seminorm_sq, integrate, laplacian_neumann, mean, norm_l2, FaceAveraging, Field, Grid};
use crate::model::{self, Parameters};
use crate::stepper::{derive_chi, State, Trajectory};

/// Integral balances of one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceRecord {
    pub t: f64,
    /// Mean of the order parameter.
    pub mass: f64,
    /// `int (alpha/2)|grad u|^2 + F(u) + Q(theta)`.
    pub internal_energy: f64,
    /// `int Lambda(theta) + lambda u`.
    pub total_entropy: f64,
    /// `int m |grad chi|^2 + k |grad (1/theta)|^2`, a sum of nonnegative face terms.
    pub entropy_production_rate: f64,
    pub min_theta: f64,
    pub max_theta: f64,
}

/// Per-face data shared by the production, flux and weak-form terms.
struct FaceTerms {
    axis: usize,
    center: [f64; 2],
    /// `vol / h_axis^2`.
    weight: f64,
    inv_h: f64,
    chi_jump: f64,
    chi_sq_lambda_jump: f64,
    inv_theta_jump: f64,
    k_face: f64,
    inv_theta_mean: f64,
}

fn face_terms(state: &State, chi: &Field, params: &Parameters, averaging: FaceAveraging) -> Vec<FaceTerms> {
    let grid = state.u.grid();
    let vol = grid.cell_volume();
    let theta = &state.theta;
    let potential = |c: f64| 0.5 * c * c + params.lambda * c;
    grid.faces()
        .map(|face| {
            let (l, r) = (face.left, face.right);
            let a_face = averaging.average(
                model::heat_diffusivity(theta[l], params),
                model::heat_diffusivity(theta[r], params),
            );
            FaceTerms {
                axis: face.axis,
                center: grid.face_center(&face),
                weight: vol * grid.inv_h2(face.axis),
                inv_h: 1.0 / grid.h()[face.axis],
                chi_jump: chi[r] - chi[l],
                chi_sq_lambda_jump: potential(chi[r]) - potential(chi[l]),
                inv_theta_jump: 1.0 / theta[r] - 1.0 / theta[l],
                k_face: a_face * theta[l] * theta[r],
                inv_theta_mean: 0.5 * (1.0 / theta[l] + 1.0 / theta[r]),
            }
        })
        .collect()
}

fn production_from_faces(faces: &[FaceTerms], params: &Parameters) -> f64 {
    faces
        .iter()
        .map(|f| f.weight * (params.m * f.chi_jump * f.chi_jump + f.k_face * f.inv_theta_jump * f.inv_theta_jump))
        .sum()
}

pub fn internal_energy(state: &State, params: &Parameters) -> f64 {
    let bulk: f64 = state
        .u
        .values()
        .iter()
        .zip(state.theta.values())
        .map(|(&u, &q)| model::potential_big_f(u) + model::heat_q(q, params))
        .sum::<f64>()
        * state.u.grid().cell_volume();
    0.5 * params.alpha * h1_seminorm_sq(&state.u) + bulk
}

/// Order-parameter part `int (alpha/2)|grad u|^2 + F(u)` of the internal energy.
pub fn cahn_hilliard_energy(u: &Field, params: &Parameters) -> f64 {
    0.5 * params.alpha * h1_seminorm_sq(u) + integrate(&u.map(model::potential_big_f))
}

pub fn total_entropy(state: &State, params: &Parameters) -> f64 {
    state
        .u
        .values()
        .iter()
        .zip(state.theta.values())
        .map(|(&u, &q)| model::entropy_lambda(q, params) + params.lambda * u)
        .sum::<f64>()
        * state.u.grid().cell_volume()
}

pub fn entropy_production_rate(state: &State, params: &Parameters, averaging: FaceAveraging) -> Result<f64> {
    let chi = derive_chi(state, params)?;
    Ok(production_from_faces(&face_terms(state, &chi, params, averaging), params))
}

pub fn balances(state: &State, params: &Parameters, averaging: FaceAveraging) -> Result<BalanceRecord> {
    Ok(BalanceRecord {
        t: state.t,
        mass: mean(&state.u),
        internal_energy: internal_energy(state, params),
        total_entropy: total_entropy(state, params),
        entropy_production_rate: entropy_production_rate(state, params, averaging)?,
        min_theta: state.theta.min(),
        max_theta: state.theta.max(),
    })
}

pub fn balance_series(traj: &Trajectory, params: &Parameters, averaging: FaceAveraging) -> Result<Vec<BalanceRecord>> {
    traj.states.iter().map(|s| balances(s, params, averaging)).collect()
}

/// Gap in the integral entropy balance over one step:
/// `S(new) - S(old) - dt * P(new)`.
pub fn entropy_identity_residual(
    new: &State,
    old: &State,
    dt: f64,
    params: &Parameters,
    averaging: FaceAveraging,
) -> Result<f64> {
    let production = entropy_production_rate(new, params, averaging)?;
    Ok(total_entropy(new, params) - total_entropy(old, params) - dt * production)
}

/// Entropy change, integrated production and accumulated identity residuals over a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyBudget {
    pub entropy_change: f64,
    pub integrated_production: f64,
    pub accumulated_residual: f64,
}

impl EntropyBudget {
    /// `entropy_change - integrated_production - accumulated_residual`.
    pub fn imbalance(&self) -> f64 {
        self.entropy_change - self.integrated_production - self.accumulated_residual
    }
}

pub fn entropy_budget(traj: &Trajectory, params: &Parameters, averaging: FaceAveraging) -> Result<EntropyBudget> {
    let mut integrated_production = 0.0;
    let mut accumulated_residual = 0.0;
    for pair in traj.states.windows(2) {
        let dt = pair[1].t - pair[0].t;
        integrated_production += dt * entropy_production_rate(&pair[1], params, averaging)?;
        accumulated_residual += entropy_identity_residual(&pair[1], &pair[0], dt, params, averaging)?;
    }
    Ok(EntropyBudget {
        entropy_change: total_entropy(traj.last(), params) - total_entropy(traj.initial(), params),
        integrated_production,
        accumulated_residual,
    })
}

/// Monitor labels in report order.
pub mod monitor {
    /// `sup_t ||theta||_L2`
    pub const THETA_L2_SUP: &str = "theta_l2_sup";
    /// `sup_t ||grad u||_L2`
    pub const GRAD_U_L2_SUP: &str = "grad_u_l2_sup";
    /// `int_0^T ||grad chi||_L2^2`
    pub const GRAD_CHI_L2SQ_INT: &str = "grad_chi_l2sq_int";
    /// `int_0^T int k(theta) |grad(1/theta)|^2`
    pub const HEAT_DISSIPATION_INT: &str = "heat_dissipation_int";
    /// `int_0^T ||u_t||_L2^2`
    pub const U_T_L2SQ_INT: &str = "u_t_l2sq_int";
    /// `sup_t ||chi^2 theta||_L1`
    pub const CHI2_THETA_L1_SUP: &str = "chi2_theta_l1_sup";
    /// `sup_t ||1/theta||_L1`
    pub const INV_THETA_L1_SUP: &str = "inv_theta_l1_sup";
    /// `int_0^T ||grad chi^2||_L2^2`
    pub const GRAD_CHI2_L2SQ_INT: &str = "grad_chi2_l2sq_int";
    /// `||theta||_{L^qbar(space-time)}`, `qbar = (3 beta + 1 - 3 eps)/3`, only for `beta > 5/3`
    pub const THETA_LQBAR: &str = "theta_lqbar";
}

/// Slack subtracted from the critical space-time integrability exponent of theta.
pub const QBAR_SLACK: f64 = 0.01;

/// `beta` above which the space-time integrability monitor is reported.
pub const QBAR_BETA_THRESHOLD: f64 = 5.0 / 3.0;

pub fn qbar(beta: f64) -> f64 {
    (3.0 * beta + 1.0 - 3.0 * QBAR_SLACK) / 3.0
}

pub type MonitorReport = BTreeMap<String, f64>;

/// Evaluates the norm monitors; time integrals use the left-endpoint rectangle
/// rule over accepted steps.
pub fn norm_monitors(traj: &Trajectory, params: &Parameters, averaging: FaceAveraging) -> Result<MonitorReport> {
    if traj.states.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let vol = traj.initial().u.grid().cell_volume();
    let lqbar = (params.beta > QBAR_BETA_THRESHOLD).then(|| qbar(params.beta));

    let mut theta_l2_sup: f64 = 0.0;
    let mut grad_u_sup: f64 = 0.0;
    let mut chi2_theta_sup: f64 = 0.0;
    let mut inv_theta_sup: f64 = 0.0;
    let mut grad_chi_int = 0.0;
    let mut heat_int = 0.0;
    let mut u_t_int = 0.0;
    let mut grad_chi2_int = 0.0;
    let mut lqbar_int = 0.0;

    for (n, state) in traj.states.iter().enumerate() {
        let chi = derive_chi(state, params)?;
        theta_l2_sup = theta_l2_sup.max(norm_l2(&state.theta));
        grad_u_sup = grad_u_sup.max(h1_seminorm_sq(&state.u).sqrt());
        chi2_theta_sup = chi2_theta_sup.max(integrate(&chi.zip_map(&state.theta, |c, q| (c * c * q).abs())));
        inv_theta_sup = inv_theta_sup.max(integrate(&state.theta.map(|q| 1.0 / q.abs())));

        let Some(next) = traj.states.get(n + 1) else { break };
        let dt = next.t - state.t;
        let faces = face_terms(state, &chi, params, averaging);
        grad_chi_int += dt * faces.iter().map(|f| f.weight * f.chi_jump * f.chi_jump).sum::<f64>();
        heat_int += dt * faces.iter().map(|f| f.weight * f.k_face * f.inv_theta_jump.powi(2)).sum::<f64>();
        grad_chi2_int += dt * h1_seminorm_sq(&chi.map(|c| c * c));
        let rate = next.u.zip_map(&state.u, |a, b| (a - b) / dt);
        u_t_int += dt * norm_l2(&rate).powi(2);
        if let Some(q) = lqbar {
            lqbar_int += dt * state.theta.values().iter().map(|t| t.powf(q)).sum::<f64>() * vol;
        }
    }

    let mut report = MonitorReport::new();
    report.insert(monitor::THETA_L2_SUP.into(), theta_l2_sup);
    report.insert(monitor::GRAD_U_L2_SUP.into(), grad_u_sup);
    report.insert(monitor::GRAD_CHI_L2SQ_INT.into(), grad_chi_int);
    report.insert(monitor::HEAT_DISSIPATION_INT.into(), heat_int);
    report.insert(monitor::U_T_L2SQ_INT.into(), u_t_int);
    report.insert(monitor::CHI2_THETA_L1_SUP.into(), chi2_theta_sup);
    report.insert(monitor::INV_THETA_L1_SUP.into(), inv_theta_sup);
    report.insert(monitor::GRAD_CHI2_L2SQ_INT.into(), grad_chi2_int);
    if let Some(q) = lqbar {
        report.insert(monitor::THETA_LQBAR.into(), lqbar_int.powf(1.0 / q));
    }
    Ok(report)
}

/// Smooth space-time test function with an analytic spatial gradient.
pub trait TestFunction: Send + Sync {
    fn value(&self, x: [f64; 2], t: f64) -> f64;
    fn gradient(&self, x: [f64; 2], t: f64) -> [f64; 2];
    fn label(&self) -> String;
}

/// `phi(x) (1 - t/T)^r` with `phi = 1` or `phi = 1 + cos(k pi x / L)` along the first axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyTestFunction {
    /// `None` for `phi = 1`.
    pub wavenumber: Option<u32>,
    pub power: i32,
    pub t_final: f64,
    pub length: f64,
}

impl EntropyTestFunction {
    fn omega(&self) -> f64 {
        self.wavenumber.map_or(0.0, |k| k as f64 * PI / self.length)
    }

    fn time_factor(&self, t: f64) -> f64 {
        (1.0 - t / self.t_final).max(0.0).powi(self.power)
    }
}

impl TestFunction for EntropyTestFunction {
    fn value(&self, x: [f64; 2], t: f64) -> f64 {
        let phi = match self.wavenumber {
            None => 1.0,
            Some(_) => 1.0 + (self.omega() * x[0]).cos(),
        };
        phi * self.time_factor(t)
    }

    fn gradient(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let w = self.omega();
        [-w * (w * x[0]).sin() * self.time_factor(t), 0.0]
    }

    fn label(&self) -> String {
        match self.wavenumber {
            None => format!("zeta[phi=1,r={}]", self.power),
            Some(k) => format!("zeta[phi=1+cos({k}pi x/L),r={}]", self.power),
        }
    }
}

/// The ten nonnegative test functions vanishing at `t_final`.
pub fn entropy_test_family(grid: &Grid, t_final: f64) -> Vec<EntropyTestFunction> {
    let length = grid.length()[0];
    let mut out = Vec::with_capacity(10);
    for power in [1, 2] {
        for wavenumber in [None, Some(1), Some(2), Some(3), Some(4)] {
            out.push(EntropyTestFunction { wavenumber, power, t_final, length });
        }
    }
    out
}

/// `cos(k pi x / L) cos(j pi t / T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatTestFunction {
    pub k: u32,
    pub j: u32,
    pub t_final: f64,
    pub length: f64,
}

impl TestFunction for HeatTestFunction {
    fn value(&self, x: [f64; 2], t: f64) -> f64 {
        let w = self.k as f64 * PI / self.length;
        (w * x[0]).cos() * (self.j as f64 * PI * t / self.t_final).cos()
    }

    fn gradient(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let w = self.k as f64 * PI / self.length;
        [-w * (w * x[0]).sin() * (self.j as f64 * PI * t / self.t_final).cos(), 0.0]
    }

    fn label(&self) -> String {
        format!("xi[k={},j={}]", self.k, self.j)
    }
}

/// The nine `cos(k pi x/L) cos(j pi t/T)` test functions, `k, j in {0, 1, 2}`.
pub fn heat_test_family(grid: &Grid, t_final: f64) -> Vec<HeatTestFunction> {
    let length = grid.length()[0];
    (0..3)
        .flat_map(|k| (0..3).map(move |j| HeatTestFunction { k, j, t_final, length }))
        .collect()
}

/// Signed margin of the entropy production inequality for one test function.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyMargin {
    pub label: String,
    /// Left side minus right side; a compliant trajectory has `margin <= tol`.
    pub margin: f64,
    /// `int int zeta R2(theta)/theta`, the contribution of the temperature regularization.
    pub regularization: f64,
    /// Largest magnitude among the individual terms.
    pub scale: f64,
}

const ADMISSIBILITY_TOL: f64 = 1e-13;

fn check_entropy_test_function(zeta: &dyn TestFunction, traj: &Trajectory) -> Result<()> {
    let grid = traj.initial().u.grid();
    let t_end = traj.last().t;
    for state in &traj.states {
        for x in grid.cell_centers().chain(grid.faces().map(|f| grid.face_center(&f))) {
            let v = zeta.value(x, state.t);
            if !(v >= -ADMISSIBILITY_TOL) {
                return Err(Error::InadmissibleTestFunction(format!(
                    "{} is negative ({v}) at x = {x:?}, t = {}",
                    zeta.label(),
                    state.t
                )));
            }
        }
    }
    for x in grid.cell_centers() {
        let v = zeta.value(x, t_end);
        if v.abs() > ADMISSIBILITY_TOL {
            return Err(Error::InadmissibleTestFunction(format!(
                "{} does not vanish at the final time ({v} at x = {x:?})",
                zeta.label()
            )));
        }
    }
    Ok(())
}

/// Evaluates the space-time entropy production inequality
///
/// ```text
/// int int Lambda(theta) zeta_t + m grad(chi^2/2 + lambda chi).grad zeta + (k/theta) grad(1/theta).grad zeta
///   <= - int int (m |grad chi|^2 + k |grad(1/theta)|^2) zeta - int Lambda(theta_0) zeta(0)
/// ```
///
/// for each test function. The `zeta_t` term is the per-step difference of
/// `zeta` against the state at the start of the step; all other space-time
/// terms use the state at the end of the step and the step's own length.
pub fn weak_entropy_inequality_check(
    traj: &Trajectory,
    params: &Parameters,
    averaging: FaceAveraging,
    test_fns: &[&dyn TestFunction],
) -> Result<Vec<EntropyMargin>> {
    if traj.states.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    for zeta in test_fns {
        check_entropy_test_function(*zeta, traj)?;
    }
    let grid = *traj.initial().u.grid();
    let vol = grid.cell_volume();
    let centers: Vec<[f64; 2]> = grid.cell_centers().collect();
    let steps = step_data(traj, params, averaging)?;

    let mut out = Vec::with_capacity(test_fns.len());
    for zeta in test_fns {
        let (mut time, mut flux_chi, mut flux_theta, mut production, mut reg) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (n, step) in steps.iter().enumerate() {
            let (old, new) = (&traj.states[n], &traj.states[n + 1]);
            let dt = new.t - old.t;
            for (i, &x) in centers.iter().enumerate() {
                let lambda_old = model::entropy_lambda(old.theta[i], params);
                time += vol * lambda_old * (zeta.value(x, new.t) - zeta.value(x, old.t));
                let q = new.theta[i];
                reg += dt * vol * zeta.value(x, new.t) * model::reg_r2_unchecked(q, params) / q;
            }
            for f in &step.faces {
                let g = zeta.gradient(f.center, new.t)[f.axis];
                let z = zeta.value(f.center, new.t);
                let face_vol = f.weight / (f.inv_h * f.inv_h);
                flux_chi += dt * face_vol * params.m * f.chi_sq_lambda_jump * f.inv_h * g;
                flux_theta += dt * face_vol * f.k_face * f.inv_theta_mean * f.inv_theta_jump * f.inv_h * g;
                production += dt
                    * f.weight
                    * (params.m * f.chi_jump * f.chi_jump + f.k_face * f.inv_theta_jump * f.inv_theta_jump)
                    * z;
            }
        }
        let initial: f64 = centers
            .iter()
            .enumerate()
            .map(|(i, &x)| vol * model::entropy_lambda(traj.initial().theta[i], params) * zeta.value(x, traj.initial().t))
            .sum();
        let terms = [time, flux_chi, flux_theta, production, initial];
        out.push(EntropyMargin {
            label: zeta.label(),
            margin: terms.iter().sum(),
            regularization: reg,
            scale: terms.iter().fold(0.0, |m: f64, t| m.max(t.abs())),
        });
    }
    Ok(out)
}

/// Residual of the space-time weak heat equation for one test function.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakHeatResidual {
    pub label: String,
    /// Absolute value of the summed identity.
    pub residual: f64,
    /// `int int xi R2(theta)`, the contribution of the temperature regularization.
    pub regularization: f64,
    pub scale: f64,
}

/// Evaluates
///
/// ```text
/// int int Q(theta) xi_t + int Q(theta_0) xi(0) - int Q(theta(T)) xi(T)
///   - int int m theta (chi + lambda) lap chi xi + int int k grad(1/theta).grad xi = 0
/// ```
///
/// with the same time quadrature as [`weak_entropy_inequality_check`].
pub fn weak_heat_equation_residual(
    traj: &Trajectory,
    params: &Parameters,
    averaging: FaceAveraging,
    test_fns: &[&dyn TestFunction],
) -> Result<Vec<WeakHeatResidual>> {
    if traj.states.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let grid = *traj.initial().u.grid();
    let vol = grid.cell_volume();
    let centers: Vec<[f64; 2]> = grid.cell_centers().collect();
    let steps = step_data(traj, params, averaging)?;
    let (first, last) = (traj.initial(), traj.last());

    let mut out = Vec::with_capacity(test_fns.len());
    for xi in test_fns {
        let (mut time, mut coupling, mut conduction, mut reg) = (0.0, 0.0, 0.0, 0.0);
        for (n, step) in steps.iter().enumerate() {
            let (old, new) = (&traj.states[n], &traj.states[n + 1]);
            let dt = new.t - old.t;
            for (i, &x) in centers.iter().enumerate() {
                time += vol * model::heat_q(old.theta[i], params) * (xi.value(x, new.t) - xi.value(x, old.t));
                let q = new.theta[i];
                let xv = xi.value(x, new.t);
                coupling -= dt * vol * params.m * q * (step.chi[i] + params.lambda) * step.lap_chi[i] * xv;
                reg += dt * vol * xv * model::reg_r2_unchecked(q, params);
            }
            for f in &step.faces {
                let g = xi.gradient(f.center, new.t)[f.axis];
                let face_vol = f.weight / (f.inv_h * f.inv_h);
                conduction += dt * face_vol * f.k_face * f.inv_theta_jump * f.inv_h * g;
            }
        }
        let (mut initial, mut terminal) = (0.0, 0.0);
        for (i, &x) in centers.iter().enumerate() {
            initial += vol * model::heat_q(first.theta[i], params) * xi.value(x, first.t);
            terminal -= vol * model::heat_q(last.theta[i], params) * xi.value(x, last.t);
        }
        let terms = [time, initial, terminal, coupling, conduction];
        out.push(WeakHeatResidual {
            label: xi.label(),
            residual: terms.iter().sum::<f64>().abs(),
            regularization: reg,
            scale: terms.iter().fold(0.0, |m: f64, t| m.max(t.abs())),
        });
    }
    Ok(out)
}

/// End-of-step quantities reused across test functions.
struct StepData {
    chi: Field,
    lap_chi: Field,
    faces: Vec<FaceTerms>,
}

fn step_data(traj: &Trajectory, params: &Parameters, averaging: FaceAveraging) -> Result<Vec<StepData>> {
    traj.states[1..]
        .iter()
        .map(|s| {
            let chi = derive_chi(s, params)?;
            let lap_chi = laplacian_neumann(&chi);
            let faces = face_terms(s, &chi, params, averaging);
            Ok(StepData { chi, lap_chi, faces })
        })
        .collect()
}

/// Summary of the initial data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialDataAudit {
    pub min_theta: f64,
    pub theta_l2: f64,
    pub inv_theta_l1: f64,
    pub grad_u_l2: f64,
    /// `|| (f(u0) - alpha lap u0) / sqrt(theta0) ||_L2`; NaN when a temperature is nonpositive.
    pub ratio_norm: f64,
    /// Raised when some initial temperature is nonpositive.
    pub nonpositive_temperature: bool,
}

pub fn initial_data_audit(u0: &Field, theta0: &Field, params: &Parameters) -> InitialDataAudit {
    let min_theta = theta0.min();
    let nonpositive_temperature = !(min_theta > 0.0);
    let lap = laplacian_neumann(u0);
    let ratio = Field::new(
        *u0.grid(),
        (0..u0.len())
            .map(|i| (model::potential_f(u0[i]) - params.alpha * lap[i]) / theta0[i].sqrt())
            .collect(),
    )
    .expect("size");
    InitialDataAudit {
        min_theta,
        theta_l2: norm_l2(theta0),
        inv_theta_l1: if nonpositive_temperature {
            f64::INFINITY
        } else {
            integrate(&theta0.map(|q| 1.0 / q))
        },
        grad_u_l2: h1_seminorm_sq(u0).sqrt(),
        ratio_norm: if nonpositive_temperature { f64::NAN } else { norm_l2(&ratio) },
        nonpositive_temperature,
    }
}
