//! Constitutive laws of the non-isothermal Cahn-Hilliard system.
//!
//! Everything here is pointwise: no grid, no time. The free energy is
//!
//! ```text
//! psi(u, grad u, theta) = (alpha/2)|grad u|^2 - Q(theta) - lambda*theta*u + F(u)
//! ```
//!
//! with the quartic double well `F(u) = (u^2 - 1)^2 / 4`, heat content
//! `Q(theta) = (c_V/2) theta^2` and conductivity `k(theta) = k0 + k1 theta^beta`.

use crate::error::{Error, Result};

/// Physical and regularization constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parameters {
    /// Mobility.
    pub m: f64,
    /// Interface-energy coefficient.
    pub alpha: f64,
    /// Latent-heat coefficient.
    pub lambda: f64,
    /// Specific-heat coefficient `c_V`.
    pub c_v: f64,
    pub k0: f64,
    pub k1: f64,
    /// Conductivity exponent, `0 <= beta < 2`.
    pub beta: f64,
    pub eps: [f64; 4],
    pub p: [f64; 4],
}

impl Default for Parameters {
    fn default() -> Self {
        Self {
            m: 1.0,
            alpha: 1.0,
            lambda: 1.0,
            c_v: 1.0,
            k0: 1.0,
            k1: 1.0,
            beta: 1.0,
            eps: [0.0; 4],
            p: [3.0, 3.0, 3.0, 2.0],
        }
    }
}

impl Parameters {
    /// Checks every admissibility constraint and returns the parameters unchanged.
    pub fn validated(self) -> Result<Self> {
        let positive = [
            ("m", self.m),
            ("alpha", self.alpha),
            ("lambda", self.lambda),
            ("c_v", self.c_v),
            ("k0", self.k0),
            ("k1", self.k1),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be a positive finite number, got {value}"),
                });
            }
        }
        if !(self.beta.is_finite() && (0.0..2.0).contains(&self.beta)) {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: format!(
                    "conductivity exponent must satisfy 0 <= beta < 2 (beta = 2 is the \
                     excluded Fourier-type law), got {}",
                    self.beta
                ),
            });
        }
        const EPS_NAMES: [&str; 4] = ["eps1", "eps2", "eps3", "eps4"];
        const P_NAMES: [&str; 4] = ["p1", "p2", "p3", "p4"];
        for i in 0..4 {
            if !(self.eps[i].is_finite() && self.eps[i] >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: EPS_NAMES[i],
                    reason: format!("must be nonnegative, got {}", self.eps[i]),
                });
            }
            if !(self.p[i].is_finite() && self.p[i] > 0.0) {
                return Err(Error::InvalidParameter {
                    name: P_NAMES[i],
                    reason: format!("must be positive, got {}", self.p[i]),
                });
            }
        }
        Ok(self)
    }

    /// Same parameters with all four regularization magnitudes set to `eps`.
    pub fn with_regularization(mut self, eps: f64) -> Self {
        self.eps = [eps; 4];
        self
    }

    pub fn is_regularized(&self) -> bool {
        self.eps.iter().any(|&e| e != 0.0)
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveTemperature(theta))
    }
}

/// Double-well potential `F(u) = (u^2 - 1)^2 / 4`.
pub fn potential_big_f(u: f64) -> f64 {
    let w = u * u - 1.0;
    0.25 * w * w
}

/// `f = F'`.
pub fn potential_f(u: f64) -> f64 {
    u * u * u - u
}

/// `f'`, used by the Jacobian.
pub fn potential_f_prime(u: f64) -> f64 {
    3.0 * u * u - 1.0
}

/// Heat conductivity `k0 + k1 theta^beta`.
pub fn conductivity_k(theta: f64, params: &Parameters) -> Result<f64> {
    check_theta(theta)?;
    Ok(conductivity_unchecked(theta, params))
}

#[inline]
pub(crate) fn conductivity_unchecked(theta: f64, params: &Parameters) -> f64 {
    params.k0 + params.k1 * theta.powf(params.beta)
}

/// Heat content `Q(theta) = (c_V/2) theta^2`.
pub fn heat_q(theta: f64, params: &Parameters) -> f64 {
    0.5 * params.c_v * theta * theta
}

/// Thermal entropy density `Lambda(theta) = c_V theta`.
pub fn entropy_lambda(theta: f64, params: &Parameters) -> f64 {
    params.c_v * theta
}

/// Primitive `g = k0/(2 theta^2) + k1/((2-beta) theta^(2-beta))` of the entropy flux,
/// `g'(theta) = (k(theta)/theta) * d(1/theta)/dtheta`, hence
/// `(k/theta) grad(1/theta) = grad g(theta)`.
pub fn kernel_g(theta: f64, params: &Parameters) -> Result<f64> {
    check_theta(theta)?;
    let beta = params.beta;
    Ok(params.k0 / (2.0 * theta * theta) + params.k1 / ((2.0 - beta) * theta.powf(2.0 - beta)))
}

/// Rescaled chemical potential from the constitutive relation
/// `chi * theta = f(u) - lambda * theta - alpha * lap_u`.
pub fn chi_of(u: f64, theta: f64, lap_u: f64, params: &Parameters) -> Result<f64> {
    check_theta(theta)?;
    Ok((potential_f(u) - params.lambda * theta - params.alpha * lap_u) / theta)
}

/// Chemical potential `mu = chi * theta`.
pub fn mu_of(chi: f64, theta: f64) -> f64 {
    chi * theta
}

/// Helmholtz free-energy density.
pub fn free_energy_density(u: f64, grad_u_sq: f64, theta: f64, params: &Parameters) -> Result<f64> {
    check_theta(theta)?;
    Ok(0.5 * params.alpha * grad_u_sq - heat_q(theta, params) - params.lambda * theta * u
        + potential_big_f(u))
}

/// Signed power `|x|^(p-1) x`.
#[inline]
pub(crate) fn signed_pow(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.abs().powf(p - 1.0) * x
    }
}

/// `d/dx (|x|^(p-1) x) = p |x|^(p-1)`.
#[inline]
pub(crate) fn signed_pow_prime(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        if p > 1.0 {
            0.0
        } else if p == 1.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        p * x.abs().powf(p - 1.0)
    }
}

/// Order-parameter regularization
/// `eps1 |lap_chi|^(p1-1) lap_chi - eps2 |chi|^(p2-1) chi`.
pub fn reg_r1(chi: f64, lap_chi: f64, params: &Parameters) -> f64 {
    let [e1, e2, _, _] = params.eps;
    let [p1, p2, _, _] = params.p;
    let mut r = 0.0;
    if e1 != 0.0 {
        r += e1 * signed_pow(lap_chi, p1);
    }
    if e2 != 0.0 {
        r -= e2 * signed_pow(chi, p2);
    }
    r
}

/// Partial derivatives of [`reg_r1`] with respect to `(chi, lap_chi)`.
pub(crate) fn reg_r1_partials(chi: f64, lap_chi: f64, params: &Parameters) -> (f64, f64) {
    let [e1, e2, _, _] = params.eps;
    let [p1, p2, _, _] = params.p;
    let d_chi = if e2 != 0.0 { -e2 * signed_pow_prime(chi, p2) } else { 0.0 };
    let d_lap = if e1 != 0.0 { e1 * signed_pow_prime(lap_chi, p1) } else { 0.0 };
    (d_chi, d_lap)
}

/// Temperature regularization `eps3 theta^p3 - eps4 theta^(-p4)`.
pub fn reg_r2(theta: f64, params: &Parameters) -> Result<f64> {
    check_theta(theta)?;
    Ok(reg_r2_unchecked(theta, params))
}

#[inline]
pub(crate) fn reg_r2_unchecked(theta: f64, params: &Parameters) -> f64 {
    let [_, _, e3, e4] = params.eps;
    let [_, _, p3, p4] = params.p;
    let mut r = 0.0;
    if e3 != 0.0 {
        r += e3 * theta.powf(p3);
    }
    if e4 != 0.0 {
        r -= e4 * theta.powf(-p4);
    }
    r
}

pub(crate) fn reg_r2_prime(theta: f64, params: &Parameters) -> f64 {
    let [_, _, e3, e4] = params.eps;
    let [_, _, p3, p4] = params.p;
    let mut r = 0.0;
    if e3 != 0.0 {
        r += e3 * p3 * theta.powf(p3 - 1.0);
    }
    if e4 != 0.0 {
        r += e4 * p4 * theta.powf(-p4 - 1.0);
    }
    r
}

/// Heat-flux diffusivity `k(theta)/theta^2` of the temperature form of the heat flux.
#[inline]
pub(crate) fn heat_diffusivity(theta: f64, params: &Parameters) -> f64 {
    conductivity_unchecked(theta, params) / (theta * theta)
}

/// `d/dtheta (k(theta)/theta^2)`.
#[inline]
pub(crate) fn heat_diffusivity_prime(theta: f64, params: &Parameters) -> f64 {
    -2.0 * params.k0 / (theta * theta * theta)
        + (params.beta - 2.0) * params.k1 * theta.powf(params.beta - 3.0)
}
