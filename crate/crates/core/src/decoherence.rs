//! Cooperative decay factors.
//!
//! The temperature-dependent decay exponent is
//!
//! ```text
//! Γ^β(t) = 4 ∫ J(ω) coth(βω/2) (1 - cos ωt) / ω² dω
//! ```
//!
//! split at the crossover `ω_co` into a low band (common to all thermometers, `Γ_L`) and a
//! high band (individual, `Γ_H`). White temperature-independent noise adds `2γt` to `Γ_H`.
//!
//! The integrand is evaluated as `4 · [J/ω] · [ω coth(βω/2)] · [(1 - cos ωt)/ω²]`; each
//! bracket has a finite limit at `ω = 0` and is computed with a series expansion for small
//! arguments, so the origin needs no special casing in the quadrature. β-derivatives use
//! `d/dβ [ω coth(βω/2)] = -(2/β²) (x / sinh x)²` with `x = βω/2`.
//!
//! `β = +∞` is accepted and means zero temperature (`coth → 1`, derivatives vanish).

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_gk21, QuadOptions};
use crate::spectral::SpectralModel;

/// Relative tolerance requested from the decay-factor quadratures.
pub const DECAY_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    /// `[0, ω_co]`
    Low,
    /// `(ω_co, Ω_max]`
    High,
    /// `[0, Ω_max]`
    Full,
}

/// Decay exponents and their inverse-temperature derivatives at one `(β, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFactors {
    pub gamma_l: f64,
    pub gamma_h: f64,
    pub gamma_total: f64,
    pub d_gamma_l_d_beta: f64,
    pub d_gamma_h_d_beta: f64,
    pub beta: f64,
    pub time: f64,
}

impl DecayFactors {
    /// Builds factors from explicit values; `gamma_total` is their sum.
    pub fn from_parts(gamma_l: f64, gamma_h: f64, d_gamma_l_d_beta: f64, d_gamma_h_d_beta: f64) -> Self {
        DecayFactors {
            gamma_l,
            gamma_h,
            gamma_total: gamma_l + gamma_h,
            d_gamma_l_d_beta,
            d_gamma_h_d_beta,
            beta: f64::NAN,
            time: f64::NAN,
        }
    }

    /// `dΓ/dβ` for the total decay.
    pub fn d_gamma_d_beta(&self) -> f64 {
        self.d_gamma_l_d_beta + self.d_gamma_h_d_beta
    }
}

/// `x / tanh(x)` for `x ≥ 0`.
fn x_coth_x(x: f64) -> f64 {
    if x < 1e-4 {
        1.0 + x * x / 3.0
    } else if x > 20.0 {
        x
    } else {
        x / x.tanh()
    }
}

/// `(x / sinh(x))²` for `x ≥ 0`.
fn x_csch_x_sq(x: f64) -> f64 {
    if x < 1e-4 {
        1.0 - x * x / 3.0
    } else {
        // x / sinh x = 2x e^{-x} / (1 - e^{-2x}), safe for large x
        let e = (-x).exp();
        let r = 2.0 * x * e / (-(-2.0 * x).exp_m1());
        r * r
    }
}

/// `(1 - cos ωt) / ω²`, with the limit `t²/2` at the origin.
fn dephasing_kernel(omega: f64, t: f64) -> f64 {
    let u = 0.5 * omega * t;
    let sinc = if u.abs() < 1e-4 { 1.0 - u * u / 6.0 } else { u.sin() / u };
    0.5 * t * t * sinc * sinc
}

/// `ω coth(βω/2)`; tends to `2/β` at the origin.
fn thermal_factor(omega: f64, beta: f64) -> f64 {
    if beta.is_infinite() {
        return omega;
    }
    (2.0 / beta) * x_coth_x(0.5 * beta * omega)
}

/// `d/dβ [ω coth(βω/2)]`.
fn thermal_factor_d_beta(omega: f64, beta: f64) -> f64 {
    if beta.is_infinite() {
        return 0.0;
    }
    -(2.0 / (beta * beta)) * x_csch_x_sq(0.5 * beta * omega)
}

fn check_args(beta: f64, t: f64) -> Result<()> {
    if !(beta > 0.0) {
        return Err(Error::domain(format!("beta must be > 0, got {beta}")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("evolution time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

fn band_limits(model: &SpectralModel, band: Band) -> (f64, f64) {
    match band {
        Band::Low => (0.0, model.omega_co()),
        Band::High => (model.omega_co(), model.support_upper()),
        Band::Full => (0.0, model.support_upper()),
    }
}

fn integrate_band<F: Fn(f64) -> f64>(model: &SpectralModel, band: Band, integrand: F) -> Result<f64> {
    let (a, b) = band_limits(model, band);
    if b <= a {
        return Ok(0.0);
    }
    let breakpoints = model.breakpoints();
    let opts = QuadOptions {
        abs_tol: 1e-300,
        rel_tol: DECAY_REL_TOL,
        max_intervals: 8000 + 4 * breakpoints.len(),
    };
    adaptive_gk21(integrand, a, b, &breakpoints, opts).map(|r| r.value)
}

fn check_origin(model: &SpectralModel, beta: f64, band: Band) -> Result<()> {
    let j0 = model.weight_at_origin();
    if j0 > 0.0 && beta.is_finite() && band != Band::High {
        return Err(Error::Numerical {
            message: format!(
                "tabulated spectrum has J(0) = {j0} > 0; the thermal integrand diverges as 1/ω at the origin"
            ),
            estimate: f64::INFINITY,
            error: f64::INFINITY,
            intervals: 0,
        });
    }
    Ok(())
}

/// `4 ∫_band J(ω) coth(βω/2) (1 - cos ωt)/ω² dω`.
pub fn gamma_beta_integral(model: &SpectralModel, beta: f64, t: f64, band: Band) -> Result<f64> {
    check_args(beta, t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    check_origin(model, beta, band)?;
    let v = integrate_band(model, band, |w| {
        4.0 * model.j_over_omega(w) * thermal_factor(w, beta) * dephasing_kernel(w, t)
    })?;
    Ok(v)
}

/// `d/dβ` of [`gamma_beta_integral`], from the analytically differentiated integrand.
pub fn gamma_beta_derivative(model: &SpectralModel, beta: f64, t: f64, band: Band) -> Result<f64> {
    check_args(beta, t)?;
    if t == 0.0 || beta.is_infinite() {
        return Ok(0.0);
    }
    check_origin(model, beta, band)?;
    integrate_band(model, band, |w| {
        4.0 * model.j_over_omega(w) * thermal_factor_d_beta(w, beta) * dephasing_kernel(w, t)
    })
}

/// Decay from delta-correlated noise of strength `γ`: `2γt`.
pub fn white_noise_decay(gamma_white: f64, t: f64) -> f64 {
    2.0 * gamma_white * t
}

/// `Γ_L`, `Γ_H` (including white noise) and their β-derivatives.
pub fn decay_factors(model: &SpectralModel, beta: f64, t: f64) -> Result<DecayFactors> {
    check_args(beta, t)?;
    let gamma_l = gamma_beta_integral(model, beta, t, Band::Low)?;
    let gamma_h = gamma_beta_integral(model, beta, t, Band::High)? + white_noise_decay(model.gamma_white(), t);
    let d_gamma_l_d_beta = gamma_beta_derivative(model, beta, t, Band::Low)?;
    let d_gamma_h_d_beta = gamma_beta_derivative(model, beta, t, Band::High)?;
    Ok(DecayFactors {
        gamma_l,
        gamma_h,
        gamma_total: gamma_l + gamma_h,
        d_gamma_l_d_beta,
        d_gamma_h_d_beta,
        beta,
        time: t,
    })
}
