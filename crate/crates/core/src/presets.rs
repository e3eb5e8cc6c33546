//! Reference parameter set: Ohmic bath with `α = 0.2`, `ω_c = 10`, `ω_co = 0.01 ω_c`,
//! white noise `γ = 0.1 ω_c`, at `βω_c = 1` (hot) and `βω_c = 10³` (cold).

use crate::spectral::SpectralModel;

pub const ALPHA: f64 = 0.2;
pub const OMEGA_C: f64 = 10.0;
pub const OMEGA_CO: f64 = 0.1;
pub const GAMMA_WHITE: f64 = 1.0;

pub const HIGH_T_BETA: f64 = 0.1;
pub const LOW_T_BETA: f64 = 100.0;

/// Evolution times at which the reference Fisher curves peak.
pub const HIGH_T_TIME_INDEPENDENT: f64 = 0.1;
pub const HIGH_T_TIME_CORRELATION: f64 = 0.15;
pub const LOW_T_TIME_INDEPENDENT: f64 = 0.6;
pub const LOW_T_TIME_CORRELATION: f64 = 0.18;

pub fn reference_model() -> SpectralModel {
    SpectralModel::ohmic(ALPHA, OMEGA_C, OMEGA_CO, GAMMA_WHITE).expect("reference parameters are valid")
}
