//! External source terms and manufactured solutions.

use std::f64::consts::PI;
use std::fmt;

use crate::grid::{Field, Grid};
use crate::model::{self, Parameters};

/// Source terms appended to the order-parameter and heat residuals.
pub trait Sources: Send + Sync {
    fn source_u(&self, x: [f64; 2], t: f64) -> f64;
    fn source_theta(&self, x: [f64; 2], t: f64) -> f64;

    fn sample(&self, grid: &Grid, t: f64) -> (Field, Field) {
        (
            Field::from_fn(*grid, |x| self.source_u(x, t)),
            Field::from_fn(*grid, |x| self.source_theta(x, t)),
        )
    }
}

type Generator = Box<dyn Fn([f64; 2], f64) -> f64 + Send + Sync>;

/// A pair of time-dependent source generators.
pub struct MmsSources {
    source_u: Generator,
    source_theta: Generator,
}

impl MmsSources {
    pub fn new(
        source_u: impl Fn([f64; 2], f64) -> f64 + Send + Sync + 'static,
        source_theta: impl Fn([f64; 2], f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { source_u: Box::new(source_u), source_theta: Box::new(source_theta) }
    }

    pub fn zero() -> Self {
        Self::new(|_, _| 0.0, |_, _| 0.0)
    }
}

impl fmt::Debug for MmsSources {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MmsSources").finish_non_exhaustive()
    }
}

impl Sources for MmsSources {
    fn source_u(&self, x: [f64; 2], t: f64) -> f64 {
        (self.source_u)(x, t)
    }

    fn source_theta(&self, x: [f64; 2], t: f64) -> f64 {
        (self.source_theta)(x, t)
    }
}

/// Separable cosine mode `prod_d cos(k_d pi x_d / L_d)`; a Neumann eigenfunction
/// of the Laplacian, so `lap phi = -kappa2 * phi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineMode {
    pub wavenumbers: [f64; 2],
    pub length: [f64; 2],
    pub dim: usize,
}

impl CosineMode {
    pub fn new(grid: &Grid, wavenumbers: [f64; 2]) -> Self {
        let mut length = [1.0; 2];
        length[..grid.dim()].copy_from_slice(grid.length());
        Self { wavenumbers, length, dim: grid.dim() }
    }

    fn freq(&self, d: usize) -> f64 {
        if d < self.dim {
            self.wavenumbers[d] * PI / self.length[d]
        } else {
            0.0
        }
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        (0..self.dim).map(|d| (self.freq(d) * x[d]).cos()).product()
    }

    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (d, gd) in g.iter_mut().enumerate().take(self.dim) {
            *gd = (0..self.dim)
                .map(|e| {
                    let w = self.freq(e);
                    if e == d {
                        -w * (w * x[e]).sin()
                    } else {
                        (w * x[e]).cos()
                    }
                })
                .product();
        }
        g
    }

    /// `kappa2` with `lap phi = -kappa2 phi`.
    pub fn kappa2(&self) -> f64 {
        (0..self.dim).map(|d| self.freq(d).powi(2)).sum()
    }
}

/// `w(x, t) = mean + amplitude * exp(-rate t) * phi(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayingMode {
    pub mean: f64,
    pub amplitude: f64,
    pub rate: f64,
    pub mode: CosineMode,
}

/// Pointwise jet of a decaying mode.
struct Jet {
    value: f64,
    grad: [f64; 2],
    lap: f64,
    grad_lap: [f64; 2],
    bilap: f64,
    dt: f64,
}

impl DecayingMode {
    pub fn value(&self, x: [f64; 2], t: f64) -> f64 {
        self.mean + self.amplitude * (-self.rate * t).exp() * self.mode.value(x)
    }

    fn jet(&self, x: [f64; 2], t: f64) -> Jet {
        let a = self.amplitude * (-self.rate * t).exp();
        let phi = self.mode.value(x);
        let gphi = self.mode.gradient(x);
        let k2 = self.mode.kappa2();
        let grad = [a * gphi[0], a * gphi[1]];
        Jet {
            value: self.mean + a * phi,
            grad,
            lap: -k2 * a * phi,
            grad_lap: [-k2 * grad[0], -k2 * grad[1]],
            bilap: k2 * k2 * a * phi,
            dt: -self.rate * a * phi,
        }
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Manufactured pair `(u*, theta*)` of decaying cosine modes, with the sources
/// that make it an exact solution of the continuous (regularized) system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedSolution {
    pub u: DecayingMode,
    pub theta: DecayingMode,
}

impl ManufacturedSolution {
    /// `u* = a_u cos(pi x) e^-t`, `theta* = 1 + a_theta cos(pi x) e^-t` along the first axis.
    pub fn cosine(grid: &Grid, amp_u: f64, amp_theta: f64) -> Self {
        let mode = CosineMode::new(grid, [1.0, 0.0]);
        Self {
            u: DecayingMode { mean: 0.0, amplitude: amp_u, rate: 1.0, mode },
            theta: DecayingMode { mean: 1.0, amplitude: amp_theta, rate: 1.0, mode },
        }
    }

    /// Time-independent uniform pair.
    pub fn constant(grid: &Grid, u0: f64, theta0: f64) -> Self {
        let mode = CosineMode::new(grid, [0.0, 0.0]);
        Self {
            u: DecayingMode { mean: u0, amplitude: 0.0, rate: 0.0, mode },
            theta: DecayingMode { mean: theta0, amplitude: 0.0, rate: 0.0, mode },
        }
    }

    pub fn exact_u(&self, x: [f64; 2], t: f64) -> f64 {
        self.u.value(x, t)
    }

    pub fn exact_theta(&self, x: [f64; 2], t: f64) -> f64 {
        self.theta.value(x, t)
    }

    /// `(chi, grad chi, lap chi)` of the exact pair.
    fn chi_jet(&self, u: &Jet, th: &Jet, params: &Parameters) -> (f64, f64) {
        let fp = model::potential_f_prime(u.value);
        let fpp = 6.0 * u.value;
        let n = model::potential_f(u.value) - params.lambda * th.value - params.alpha * u.lap;
        let grad_n = [
            fp * u.grad[0] - params.lambda * th.grad[0] - params.alpha * u.grad_lap[0],
            fp * u.grad[1] - params.lambda * th.grad[1] - params.alpha * u.grad_lap[1],
        ];
        let lap_n = fpp * dot(u.grad, u.grad) + fp * u.lap - params.lambda * th.lap - params.alpha * u.bilap;
        let q = th.value;
        let chi = n / q;
        let lap_chi = lap_n / q - 2.0 * dot(grad_n, th.grad) / (q * q) - n * th.lap / (q * q)
            + 2.0 * n * dot(th.grad, th.grad) / (q * q * q);
        (chi, lap_chi)
    }

    pub fn source_u_at(&self, x: [f64; 2], t: f64, params: &Parameters) -> f64 {
        let u = self.u.jet(x, t);
        let th = self.theta.jet(x, t);
        let (chi, lap_chi) = self.chi_jet(&u, &th, params);
        u.dt - params.m * lap_chi - model::reg_r1(chi, lap_chi, params)
    }

    pub fn source_theta_at(&self, x: [f64; 2], t: f64, params: &Parameters) -> f64 {
        let u = self.u.jet(x, t);
        let th = self.theta.jet(x, t);
        let (chi, lap_chi) = self.chi_jet(&u, &th, params);
        let q = th.value;
        let c = model::heat_diffusivity(q, params);
        let dc = model::heat_diffusivity_prime(q, params);
        let div_flux = dc * dot(th.grad, th.grad) + c * th.lap;
        params.c_v * q * th.dt + params.m * q * lap_chi * (chi + params.lambda) - div_flux
            + model::reg_r2_unchecked(q, params)
    }

    pub fn sources(&self, params: &Parameters) -> MmsSources {
        let (a, b) = (*self, *params);
        let (c, d) = (*self, *params);
        MmsSources::new(move |x, t| a.source_u_at(x, t, &b), move |x, t| c.source_theta_at(x, t, &d))
    }

    pub fn sample(&self, grid: &Grid, t: f64) -> (Field, Field) {
        (
            Field::from_fn(*grid, |x| self.exact_u(x, t)),
            Field::from_fn(*grid, |x| self.exact_theta(x, t)),
        )
    }
}
