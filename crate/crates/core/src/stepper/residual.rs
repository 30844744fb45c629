//! Backward-Euler residual of the (regularized) system with the chemical
//! potential eliminated, and its analytic Jacobian.
//!
//! With `chi+ = (f(u+) - lambda theta+ - alpha L u+) / theta+`:
//!
//! ```text
//! R_u     = (u+ - u)/dt - m L chi+ - R1(chi+, L chi+) - s_u(t+)
//! R_theta = (Q(theta+) - Q(theta))/dt + m theta+ (L chi+)(chi+ + lambda)
//!           - div((k/theta^2)(theta+) grad theta+) + R2(theta+) - s_theta(t+)
//! ```

use crate::error::{Error, Result};
use crate::grid::{div_coeff_grad_unchecked, laplacian_neumann, FaceAveraging, Field, Grid};
use crate::model::{self, Parameters};
use crate::sparse::{Accumulator, SparseMatrix};

use super::{Coupling, SolverConfig, Sources, State};

/// Multiple of machine epsilon used by [`StepProblem::roundoff_floor`].
const ROUNDOFF_FACTOR: f64 = 4.0;

/// `sum_j |L_ij| v_j` for the Neumann Laplacian `L` and nonnegative `v`.
fn abs_laplacian(v: &Field) -> Field {
    let grid = *v.grid();
    let mut out = vec![0.0; v.len()];
    for face in grid.faces() {
        let w = grid.inv_h2(face.axis) * (v[face.left] + v[face.right]);
        out[face.left] += w;
        out[face.right] += w;
    }
    Field::new(grid, out).expect("size")
}

/// `chi = (f(u) - lambda theta - alpha L u) / theta`, cellwise.
pub fn derive_chi(state: &State, params: &Parameters) -> Result<Field> {
    chi_from(&state.u, &state.theta, params)
}

pub(crate) fn chi_from(u: &Field, theta: &Field, params: &Parameters) -> Result<Field> {
    if let Some(&bad) = theta.values().iter().find(|&&t| !(t > 0.0)) {
        return Err(Error::NonPositiveTemperature(bad));
    }
    Ok(chi_unchecked(u, theta, &laplacian_neumann(u), params))
}

fn chi_unchecked(u: &Field, theta: &Field, lap_u: &Field, params: &Parameters) -> Field {
    let values = u
        .values()
        .iter()
        .zip(theta.values())
        .zip(lap_u.values())
        .map(|((&u, &q), &l)| (model::potential_f(u) - params.lambda * q - params.alpha * l) / q)
        .collect();
    Field::new(*u.grid(), values).expect("same grid")
}

/// Residual pair `(R_u, R_theta)` of one backward-Euler step from `old` to `new`.
///
/// Fails with [`Error::BelowTemperatureFloor`] when any new temperature is below
/// `cfg.theta_floor`; callers treat that as a step rejection.
pub fn assemble_residual(
    new: &State,
    old: &State,
    dt: f64,
    params: &Parameters,
    cfg: &SolverConfig,
    sources: Option<&dyn Sources>,
) -> Result<(Field, Field)> {
    let problem = StepProblem::new(old, dt, params, cfg, sources);
    problem.residual_fields(&new.u, &new.theta)
}

/// The nonlinear system solved in one implicit step.
pub(crate) struct StepProblem<'a> {
    old: &'a State,
    dt: f64,
    params: &'a Parameters,
    floor: f64,
    averaging: FaceAveraging,
    coupling: Coupling,
    q_old: Vec<f64>,
    src: Option<(Field, Field)>,
}

struct Evaluation {
    chi: Field,
    lap_chi: Field,
}

impl<'a> StepProblem<'a> {
    pub fn new(
        old: &'a State,
        dt: f64,
        params: &'a Parameters,
        cfg: &SolverConfig,
        sources: Option<&dyn Sources>,
    ) -> Self {
        let grid = old.u.grid();
        Self {
            old,
            dt,
            params,
            floor: cfg.theta_floor,
            averaging: cfg.averaging,
            coupling: cfg.coupling,
            q_old: old.theta.values().iter().map(|&q| model::heat_q(q, params)).collect(),
            src: sources.map(|s| s.sample(grid, old.t + dt)),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.old.u.grid()
    }

    pub fn initial_guess(&self) -> Vec<f64> {
        let mut x = self.old.u.values().to_vec();
        if self.coupling == Coupling::Full {
            x.extend_from_slice(self.old.theta.values());
        }
        x
    }

    /// Splits an unknown vector into `(u, theta)`.
    pub fn split(&self, x: &[f64]) -> (Field, Field) {
        let grid = *self.grid();
        let n = grid.cell_count();
        let u = Field::new(grid, x[..n].to_vec()).expect("size");
        let theta = match self.coupling {
            Coupling::Full => Field::new(grid, x[n..].to_vec()).expect("size"),
            Coupling::FrozenTemperature => self.old.theta.clone(),
        };
        (u, theta)
    }

    /// Whether `x` may be evaluated: finite and temperatures at or above the floor.
    pub fn admissible(&self, x: &[f64]) -> bool {
        let n = self.grid().cell_count();
        x.iter().all(|v| v.is_finite())
            && match self.coupling {
                Coupling::Full => x[n..].iter().all(|&q| q >= self.floor),
                Coupling::FrozenTemperature => true,
            }
    }

    fn check_floor(&self, theta: &Field) -> Result<()> {
        match theta.values().iter().position(|&q| !(q >= self.floor)) {
            Some(cell) => Err(Error::BelowTemperatureFloor { cell, value: theta[cell], floor: self.floor }),
            None => Ok(()),
        }
    }

    fn evaluate(&self, u: &Field, theta: &Field) -> Evaluation {
        let lap_u = laplacian_neumann(u);
        let chi = chi_unchecked(u, theta, &lap_u, self.params);
        let lap_chi = laplacian_neumann(&chi);
        Evaluation { chi, lap_chi }
    }

    pub fn residual_fields(&self, u: &Field, theta: &Field) -> Result<(Field, Field)> {
        self.check_floor(theta)?;
        let p = self.params;
        let ev = self.evaluate(u, theta);
        let n = u.len();
        let inv_dt = 1.0 / self.dt;

        let mut r_u = vec![0.0; n];
        for (i, r) in r_u.iter_mut().enumerate() {
            let (chi, lap_chi) = (ev.chi[i], ev.lap_chi[i]);
            *r = (u[i] - self.old.u[i]) * inv_dt - p.m * lap_chi - model::reg_r1(chi, lap_chi, p);
            if let Some((su, _)) = &self.src {
                *r -= su[i];
            }
        }

        let diffusivity: Vec<f64> = theta.values().iter().map(|&q| model::heat_diffusivity(q, p)).collect();
        let conduction = div_coeff_grad_unchecked(&diffusivity, theta, self.averaging);
        let mut r_theta = vec![0.0; n];
        for (i, r) in r_theta.iter_mut().enumerate() {
            let q = theta[i];
            *r = (model::heat_q(q, p) - self.q_old[i]) * inv_dt
                + p.m * q * ev.lap_chi[i] * (ev.chi[i] + p.lambda)
                - conduction[i]
                + model::reg_r2_unchecked(q, p);
            if let Some((_, st)) = &self.src {
                *r -= st[i];
            }
        }
        let grid = *u.grid();
        Ok((Field::new(grid, r_u).expect("size"), Field::new(grid, r_theta).expect("size")))
    }

    /// Magnitude below which the residual at `x` is indistinguishable from
    /// rounding error: a small multiple of machine epsilon times the largest
    /// sum of absolute term values entering any residual entry.
    pub fn roundoff_floor(&self, x: &[f64]) -> f64 {
        let p = self.params;
        let (u, theta) = self.split(x);
        let n = u.len();
        let abs_u = u.map(f64::abs);
        let lap_abs_u = abs_laplacian(&abs_u);
        let chi_scale = Field::new(
            *u.grid(),
            (0..n)
                .map(|i| (model::potential_f(u[i]).abs() + p.lambda * theta[i] + p.alpha * lap_abs_u[i]) / theta[i])
                .collect(),
        )
        .expect("size");
        let lap_chi_scale = abs_laplacian(&chi_scale);
        let ev = self.evaluate(&u, &theta);
        let inv_dt = 1.0 / self.dt;
        let mut scale: f64 = 0.0;
        for i in 0..n {
            // error scales of chi and L chi, and their actual values
            let (c, l) = (chi_scale[i], lap_chi_scale[i]);
            let (chi, lap_chi) = (ev.chi[i].abs(), ev.lap_chi[i].abs());
            let reg_u = p.eps[0] * p.p[0] * lap_chi.powf(p.p[0] - 1.0) * l
                + p.eps[1] * p.p[1] * chi.powf(p.p[1] - 1.0) * c;
            let src = self.src.as_ref().map_or((0.0, 0.0), |(su, st)| (su[i].abs(), st[i].abs()));
            scale = scale.max((abs_u[i] + self.old.u[i].abs()) * inv_dt + p.m * l + reg_u + src.0);
            if self.coupling == Coupling::Full {
                let q = theta[i];
                let reg_q = p.eps[2] * q.powf(p.p[2]) + p.eps[3] * q.powf(-p.p[3]);
                let coupling = p.m * q * (l * (ev.chi[i] + p.lambda).abs() + lap_chi * c);
                let heat = (model::heat_q(q, p) + self.q_old[i]) * inv_dt + coupling;
                scale = scale.max(heat + reg_q + src.1);
            }
        }
        if self.coupling == Coupling::Full {
            let diffusivity: Vec<f64> = theta.values().iter().map(|&q| model::heat_diffusivity(q, p)).collect();
            for face in self.grid().faces() {
                let a = self.averaging.average(diffusivity[face.left], diffusivity[face.right]);
                let flux = a * self.grid().inv_h2(face.axis) * (theta[face.left] + theta[face.right]);
                scale = scale.max(flux);
            }
        }
        ROUNDOFF_FACTOR * f64::EPSILON * scale
    }

    /// Residual on the stacked unknown vector.
    pub fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (u, theta) = self.split(x);
        let (r_u, r_theta) = self.residual_fields(&u, &theta)?;
        let mut r = r_u.into_values();
        if self.coupling == Coupling::Full {
            r.extend(r_theta.into_values());
        }
        Ok(r)
    }

    /// Analytic Jacobian of [`Self::residual`].
    pub fn jacobian(&self, x: &[f64]) -> SparseMatrix {
        let p = self.params;
        let (u, theta) = self.split(x);
        let grid = *self.grid();
        let n = grid.cell_count();
        let ev = self.evaluate(&u, &theta);
        let lap = SparseMatrix::laplacian(&grid);
        let inv_dt = 1.0 / self.dt;

        // d chi / du = diag(f'(u)/theta) - diag(alpha/theta) L ; d chi / dtheta = diag(-(chi+lambda)/theta)
        let fp_over_theta: Vec<f64> =
            (0..n).map(|i| model::potential_f_prime(u[i]) / theta[i]).collect();
        let alpha_over_theta: Vec<f64> = (0..n).map(|i| p.alpha / theta[i]).collect();
        let dchi_du = SparseMatrix::diag(&fp_over_theta).add_scaled(-1.0, &lap.scale_rows(&alpha_over_theta));
        let dchi_dtheta: Vec<f64> = (0..n).map(|i| -(ev.chi[i] + p.lambda) / theta[i]).collect();
        let dlapchi_du = lap.mul(&dchi_du);

        let (r1_chi, r1_lap): (Vec<f64>, Vec<f64>) =
            (0..n).map(|i| model::reg_r1_partials(ev.chi[i], ev.lap_chi[i], p)).unzip();
        // d R_u / d (chi, lap chi) = (-r1_chi, -(m + r1_lap))
        let coef_lap: Vec<f64> = r1_lap.iter().map(|&d| -(p.m + d)).collect();
        let coef_chi: Vec<f64> = r1_chi.iter().map(|&d| -d).collect();

        let j_uu = SparseMatrix::diag(&vec![inv_dt; n])
            .add_scaled(1.0, &dlapchi_du.scale_rows(&coef_lap))
            .add_scaled(1.0, &dchi_du.scale_rows(&coef_chi));
        if self.coupling == Coupling::FrozenTemperature {
            return j_uu;
        }

        let dlapchi_dtheta = lap.scale_cols_of_diag(&dchi_dtheta);
        let j_utheta = dlapchi_dtheta
            .scale_rows(&coef_lap)
            .add_scaled(1.0, &SparseMatrix::diag(&elementwise(&coef_chi, &dchi_dtheta)));

        // heat residual: m theta (lap chi)(chi + lambda)
        let w: Vec<f64> = (0..n).map(|i| p.m * theta[i] * (ev.chi[i] + p.lambda)).collect();
        let v: Vec<f64> = (0..n).map(|i| p.m * theta[i] * ev.lap_chi[i]).collect();
        let j_thetau = dlapchi_du.scale_rows(&w).add_scaled(1.0, &dchi_du.scale_rows(&v));

        let mut diag_tt = vec![0.0; n];
        for i in 0..n {
            diag_tt[i] = p.c_v * theta[i] * inv_dt
                + p.m * ev.lap_chi[i] * (ev.chi[i] + p.lambda)
                + v[i] * dchi_dtheta[i]
                + model::reg_r2_prime(theta[i], p);
        }
        let j_thetatheta = SparseMatrix::diag(&diag_tt)
            .add_scaled(1.0, &dlapchi_dtheta.scale_rows(&w))
            .add_scaled(-1.0, &self.conduction_jacobian(&theta));

        SparseMatrix::block2x2(&j_uu, &j_utheta, &j_thetau, &j_thetatheta)
    }

    /// Jacobian of `div(a(theta) grad theta)` with face-averaged `a = k/theta^2`.
    fn conduction_jacobian(&self, theta: &Field) -> SparseMatrix {
        let p = self.params;
        let grid = *theta.grid();
        let n = grid.cell_count();
        let a: Vec<f64> = theta.values().iter().map(|&q| model::heat_diffusivity(q, p)).collect();
        let da: Vec<f64> = theta.values().iter().map(|&q| model::heat_diffusivity_prime(q, p)).collect();
        let mut acc = Accumulator::new(n, n);
        for face in grid.faces() {
            let (l, r) = (face.left, face.right);
            let w = grid.inv_h2(face.axis);
            let a_face = self.averaging.average(a[l], a[r]);
            let (pl, pr) = self.averaging.partials(a[l], a[r]);
            let jump = theta[r] - theta[l];
            // flux = a_face * jump * w ; out[l] += flux ; out[r] -= flux
            let dflux_dl = (pl * da[l] * jump - a_face) * w;
            let dflux_dr = (pr * da[r] * jump + a_face) * w;
            acc.add(l, l, dflux_dl);
            acc.add(l, r, dflux_dr);
            acc.add(r, l, -dflux_dl);
            acc.add(r, r, -dflux_dr);
        }
        acc.finish()
    }
}

fn elementwise(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

impl SparseMatrix {
    /// `self * diag(d)`.
    pub(crate) fn scale_cols_of_diag(&self, d: &[f64]) -> SparseMatrix {
        self.mul(&SparseMatrix::diag(d))
    }
}
