//! Score functions, Fisher information and Cramér–Rao bounds for inverse-temperature
//! estimation, plus the supporting sweeps (measurement-time optimisation, grouped
//! measurement, scaling-law fits).
//!
//! Analytic Fisher expressions come in a high-temperature and a low-temperature flavour.
//! In the high-temperature forms only `dΓ_H/dβ` is kept; in the low-temperature forms only
//! `dΓ_L/dβ`. [`independent_fisher`] keeps the total derivative and is the exact Fisher
//! information of the product law at `θ = 0`.

use rayon::prelude::*;

use crate::decoherence::{decay_factors, DecayFactors};
use crate::distributions::{
    collective_field_distribution, correlation_distribution, correlation_expansion_table,
    gaussian_s_theta0, product_distribution, DistributionForm, MeasurementConfig, ReadoutDistribution,
};
use crate::error::{Error, Result};
use crate::oracle::Enumerator;
use crate::spectral::SpectralModel;

/// Relative finite-difference step in β used by [`fisher_exact`].
pub const FD_REL_STEP: f64 = 1e-3;
/// Probability cells at or below this value are dropped from the Fisher sum.
pub const PROBABILITY_FLOOR: f64 = 1e-30;

/// Which asymptotic Fisher expression applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    HighTemperature,
    LowTemperature,
}

impl Regime {
    /// `βω_co ≥ 1` → low temperature, otherwise high temperature.
    pub fn heuristic(beta: f64, omega_co: f64) -> Regime {
        if beta * omega_co >= 1.0 {
            Regime::LowTemperature
        } else {
            Regime::HighTemperature
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FisherMethod {
    AnalyticHighT,
    AnalyticLowT,
    AnalyticIndependent,
    ExactDistribution,
    MonteCarloSnr,
}

/// Fisher information and the derived single-shot precision figures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherReport {
    pub fisher: f64,
    /// `1/F` (infinite when `F = 0`).
    pub crb_variance: f64,
    /// `β² F`, i.e. `β²/Δβ²` at the Cramér–Rao bound.
    pub precision_figure: f64,
    pub method: FisherMethod,
    pub score_coefficient: Option<f64>,
    pub beta: f64,
}

impl FisherReport {
    pub fn new(fisher: f64, beta: f64, method: FisherMethod, score_coefficient: Option<f64>) -> Self {
        FisherReport {
            fisher,
            crb_variance: if fisher > 0.0 { 1.0 / fisher } else { f64::INFINITY },
            precision_figure: beta * beta * fisher,
            method,
            score_coefficient,
            beta,
        }
    }

    /// Cramér–Rao bound on `Δβ²` after `shots` repetitions.
    pub fn crb_after(&self, shots: u64) -> f64 {
        self.crb_variance / shots as f64
    }
}

/// Observable used for estimation: `S` along x, `S²` along y.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    S,
    SSquared,
}

impl Observable {
    pub fn eval(self, s: i64) -> f64 {
        match self {
            Observable::S => s as f64,
            Observable::SSquared => (s * s) as f64,
        }
    }
}

/// `c₁ = -e^{-Γ}/(1 - e^{-2Γ}) dΓ/dβ`.
pub fn independent_score_coefficient(decay: &DecayFactors) -> Result<f64> {
    let g = decay.gamma_total;
    if g <= 0.0 {
        return Err(Error::Degenerate(
            "Γ = 0: readouts are noiseless and the independent score is singular".into(),
        ));
    }
    Ok(-(-g).exp() / -(-2.0 * g).exp_m1() * decay.d_gamma_d_beta())
}

/// `c₂ = -(1/2N) d/dβ (1 + 2e^{-2Γ} N Γ_L)^{-1}`, keeping every β-dependence
/// (`dΓ_H/dβ` enters through `e^{-2Γ}`).
pub fn correlation_score_coefficient(n: usize, decay: &DecayFactors) -> f64 {
    let nf = n as f64;
    let e = (-2.0 * decay.gamma_total).exp();
    let x = 2.0 * e * nf * decay.gamma_l;
    let dx = 2.0 * nf * e * (decay.d_gamma_l_d_beta - 2.0 * decay.gamma_l * decay.d_gamma_d_beta());
    dx / (2.0 * nf * (1.0 + x).powi(2))
}

/// Approximate score `L_β = c (O - ⟨O⟩)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreFunction {
    pub observable: Observable,
    pub coefficient: f64,
    pub center: f64,
}

impl ScoreFunction {
    pub fn eval(&self, s: i64) -> f64 {
        self.coefficient * (self.observable.eval(s) - self.center)
    }

    /// Mean and variance of the score under a discrete distribution.
    pub fn moments_under(&self, dist: &ReadoutDistribution) -> Result<(f64, f64)> {
        let table = dist
            .s_table()
            .ok_or_else(|| Error::contract("score moments need a discrete S table"))?;
        let n = dist.n();
        let mean: f64 = table
            .iter()
            .enumerate()
            .map(|(k, p)| p * self.eval(crate::distributions::s_value(n, k)))
            .sum();
        let var = table
            .iter()
            .enumerate()
            .map(|(k, p)| p * (self.eval(crate::distributions::s_value(n, k)) - mean).powi(2))
            .sum();
        Ok((mean, var))
    }
}

/// Score function for `config`, centred on the moments of `reference`.
pub fn score_function(config: &MeasurementConfig, reference: &ReadoutDistribution) -> Result<ScoreFunction> {
    let m = reference.moments();
    if config.is_independent() {
        Ok(ScoreFunction {
            observable: Observable::S,
            coefficient: independent_score_coefficient(&config.decay)?,
            center: m.mean_s,
        })
    } else if config.is_correlation() {
        Ok(ScoreFunction {
            observable: Observable::SSquared,
            coefficient: correlation_score_coefficient(config.n_thermometers, &config.decay),
            center: m.mean_s2,
        })
    } else {
        Err(Error::contract("score function is defined for theta = 0 or π/2 only"))
    }
}

fn axis_check(config: &MeasurementConfig) -> Result<()> {
    if config.is_independent() || config.is_correlation() {
        Ok(())
    } else {
        Err(Error::contract("analytic Fisher expressions need theta = 0 or π/2"))
    }
}

/// High-temperature Fisher information (only `dΓ_H/dβ` retained).
pub fn fisher_high_t(config: &MeasurementConfig) -> Result<FisherReport> {
    axis_check(config)?;
    let d = &config.decay;
    let n = config.n_thermometers as f64;
    let e2g = (2.0 * d.gamma_total).exp();
    let dh2 = d.d_gamma_h_d_beta.powi(2);
    let (fisher, coeff) = if config.is_independent() {
        (n / (e2g - 1.0) * dh2, independent_score_coefficient(d).ok())
    } else {
        let ngl = n * d.gamma_l;
        (
            8.0 * ngl * ngl / (e2g + 2.0 * ngl).powi(2) * dh2,
            Some(correlation_score_coefficient(config.n_thermometers, d)),
        )
    };
    Ok(FisherReport::new(fisher, d.beta, FisherMethod::AnalyticHighT, coeff))
}

/// Low-temperature Fisher information (only `dΓ_L/dβ` retained).
pub fn fisher_low_t(config: &MeasurementConfig) -> Result<FisherReport> {
    axis_check(config)?;
    let d = &config.decay;
    let n = config.n_thermometers as f64;
    let e2g = (2.0 * d.gamma_total).exp();
    let dl2 = d.d_gamma_l_d_beta.powi(2);
    let (fisher, coeff) = if config.is_independent() {
        (n / (e2g - 1.0) * dl2, independent_score_coefficient(d).ok())
    } else {
        (
            2.0 * n * n / (e2g + 2.0 * n * d.gamma_l).powi(2) * dl2,
            Some(correlation_score_coefficient(config.n_thermometers, d)),
        )
    };
    Ok(FisherReport::new(fisher, d.beta, FisherMethod::AnalyticLowT, coeff))
}

pub fn fisher_analytic(config: &MeasurementConfig, regime: Regime) -> Result<FisherReport> {
    match regime {
        Regime::HighTemperature => fisher_high_t(config),
        Regime::LowTemperature => fisher_low_t(config),
    }
}

/// `N |dΓ/dβ|² / (e^{2Γ} - 1)`: Fisher information of `N` independent spins with
/// `⟨s⟩ = e^{-Γ}`, keeping the total derivative.
pub fn independent_fisher(n: usize, decay: &DecayFactors) -> FisherReport {
    let f = n as f64 * decay.d_gamma_d_beta().powi(2) / (2.0 * decay.gamma_total).exp_m1();
    FisherReport::new(
        f,
        decay.beta,
        FisherMethod::AnalyticIndependent,
        independent_score_coefficient(decay).ok(),
    )
}

/// Which readout law [`fisher_exact`] differentiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistributionFamily {
    /// Exact `p(S)` of the collective-field model.
    CollectiveField,
    /// Enumerated `p(S)` from the oracle.
    Enumerated,
    /// Independent product law (`θ = 0`).
    Product,
    /// Small-`Γ_L` exponential table (`θ = π/2`).
    CorrelationExpansion,
    /// Large-`N` Gaussian forms.
    GaussianLargeN,
}

impl DistributionFamily {
    pub fn build(self, config: &MeasurementConfig) -> Result<ReadoutDistribution> {
        match self {
            DistributionFamily::CollectiveField => collective_field_distribution(config),
            DistributionFamily::Enumerated => Enumerator::default().distribution(config),
            DistributionFamily::Product => product_distribution(config),
            DistributionFamily::CorrelationExpansion => correlation_expansion_table(config),
            DistributionFamily::GaussianLargeN => {
                if config.is_independent() {
                    gaussian_s_theta0(config)
                } else {
                    correlation_distribution(config)
                }
            }
        }
    }
}

fn richardson<F: Fn(f64) -> Result<Vec<f64>>>(values_at: &F, beta: f64, h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let centre = values_at(beta)?;
    let diff = |step: f64| -> Result<Vec<f64>> {
        let (up, down) = (values_at(beta + step)?, values_at(beta - step)?);
        Ok(up.iter().zip(&down).map(|(u, d)| (u - d) / (2.0 * step)).collect())
    };
    let (coarse, fine) = (diff(h)?, diff(0.5 * h)?);
    let deriv = fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect();
    Ok((centre, deriv))
}

/// `Σ p (d ln p/dβ)²` for a β-parameterised probability table, with the derivative from
/// central differences at steps `h` and `h/2` combined by Richardson extrapolation.
pub fn fisher_from_tables<F>(table_at: F, beta: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    if !(beta > 0.0 && h > 0.0 && h < beta) {
        return Err(Error::domain("finite-difference step must satisfy 0 < h < beta"));
    }
    let (p, dp) = richardson(&table_at, beta, h)?;
    if p.len() != dp.len() {
        return Err(Error::contract("table size changed with beta"));
    }
    Ok(p.iter()
        .zip(&dp)
        .filter(|(&pi, _)| pi > PROBABILITY_FLOOR)
        .map(|(pi, di)| di * di / pi)
        .sum())
}

/// Fisher information of the distribution family at `(β, t)`, from finite differences of
/// the full readout law. This is the reference the analytic expressions are checked against.
pub fn fisher_exact(
    family: DistributionFamily,
    n: usize,
    theta: f64,
    model: &SpectralModel,
    beta: f64,
    t: f64,
) -> Result<FisherReport> {
    let h = FD_REL_STEP * beta;
    let build = |b: f64| -> Result<ReadoutDistribution> {
        let config = MeasurementConfig::new(n, theta, decay_factors(model, b, t)?)?;
        family.build(&config)
    };
    let fisher = if family == DistributionFamily::GaussianLargeN {
        let params = |b: f64| -> Result<Vec<f64>> {
            let d = build(b)?;
            Ok(match d.form {
                DistributionForm::CollectiveGaussianS { mean, variance } => vec![mean, variance],
                _ => return Err(Error::Degenerate("Gaussian form collapsed to a point mass".into())),
            })
        };
        let (mv, dmv) = richardson(&params, beta, h)?;
        dmv[0] * dmv[0] / mv[1] + dmv[1] * dmv[1] / (2.0 * mv[1] * mv[1])
    } else {
        let table = |b: f64| -> Result<Vec<f64>> {
            let d = build(b)?;
            Ok(match d.form {
                DistributionForm::ExactEnumerated { probabilities } => probabilities,
                _ => d.s_table().expect("discrete form"),
            })
        };
        fisher_from_tables(table, beta, h)?
    };
    let coeff = decay_factors(model, beta, t)
        .ok()
        .and_then(|d| MeasurementConfig::new(n, theta, d).ok())
        .and_then(|c| {
            if c.is_independent() {
                independent_score_coefficient(&c.decay).ok()
            } else if c.is_correlation() {
                Some(correlation_score_coefficient(n, &c.decay))
            } else {
                None
            }
        });
    Ok(FisherReport::new(fisher, beta, FisherMethod::ExactDistribution, coeff))
}

/// Result of splitting `N` thermometers into groups of `N₀` with `2N₀Γ_L ≈ e^{2Γ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupedFisher {
    pub report: FisherReport,
    pub group_size: usize,
    /// Gain over independent measurement, `(1 - e^{-2Γ}) e^{-2Γ} N₀ / 2`.
    pub improvement_ratio: f64,
    /// `N₀ < 2`: grouping is pointless and the independent result is returned instead.
    pub fallback: bool,
    /// Whether `2NΓ_L > e^{2Γ}`, i.e. the ungrouped correlation measurement has saturated.
    pub saturated: bool,
}

/// Low-temperature grouped correlation measurement: `F ≈ N N₀ / (2e^{4Γ}) |dΓ_L/dβ|²`.
pub fn grouped_fisher(n_total: usize, decay: &DecayFactors) -> Result<GroupedFisher> {
    if n_total == 0 {
        return Err(Error::domain("need at least one thermometer"));
    }
    if decay.gamma_l <= 0.0 {
        return Err(Error::Degenerate("Γ_L = 0: no cooperative decay to exploit".into()));
    }
    let g = decay.gamma_total;
    let n = n_total as f64;
    let e2g = (2.0 * g).exp();
    let n0 = (e2g / (2.0 * decay.gamma_l)).round();
    let saturated = 2.0 * n * decay.gamma_l > e2g;
    let dl2 = decay.d_gamma_l_d_beta.powi(2);
    if n0 < 2.0 {
        let f = n / (e2g - 1.0) * dl2;
        return Ok(GroupedFisher {
            report: FisherReport::new(f, decay.beta, FisherMethod::AnalyticLowT, None),
            group_size: 1,
            improvement_ratio: 1.0,
            fallback: true,
            saturated,
        });
    }
    let f = n * n0 / (2.0 * (4.0 * g).exp()) * dl2;
    Ok(GroupedFisher {
        report: FisherReport::new(f, decay.beta, FisherMethod::AnalyticLowT, None),
        group_size: n0 as usize,
        improvement_ratio: -(-2.0 * g).exp_m1() * (-2.0 * g).exp() * n0 / 2.0,
        fallback: false,
        saturated,
    })
}

/// Signal-to-noise analysis of an observable under a small change of β.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrReport {
    pub snr: f64,
    /// `Ō(β + δβ) - Ō(β)`.
    pub mean_shift: f64,
    /// `ΔO` at β.
    pub std_dev: f64,
    /// `dŌ/dβ ≈ δŌ/δβ`.
    pub slope: f64,
    /// Lower bound `Δβ ≥ ΔO / |dŌ/dβ|` (infinite when the mean does not move).
    pub precision: f64,
}

impl SnrReport {
    /// `1/Δβ²`, the Fisher information seen through this observable.
    pub fn fisher_equivalent(&self) -> f64 {
        (self.slope / self.std_dev).powi(2)
    }
}

fn observable_moments(obs: Observable, dist: &ReadoutDistribution) -> (f64, f64) {
    let m = dist.moments();
    match obs {
        Observable::S => (m.mean_s, m.var_s),
        Observable::SSquared => (m.mean_s2, m.var_s2),
    }
}

pub fn snr(
    observable: Observable,
    at_beta: &ReadoutDistribution,
    shifted: &ReadoutDistribution,
    delta_beta: f64,
) -> Result<SnrReport> {
    if !(delta_beta != 0.0 && delta_beta.is_finite()) {
        return Err(Error::domain("delta_beta must be finite and nonzero"));
    }
    let (mean0, var0) = observable_moments(observable, at_beta);
    let (mean1, _) = observable_moments(observable, shifted);
    if !(var0 > 0.0) {
        return Err(Error::Degenerate(format!("observable {observable:?} has zero variance")));
    }
    let std_dev = var0.sqrt();
    let mean_shift = mean1 - mean0;
    let slope = mean_shift / delta_beta;
    Ok(SnrReport {
        snr: mean_shift.abs() / std_dev,
        mean_shift,
        std_dev,
        slope,
        precision: if slope == 0.0 { f64::INFINITY } else { std_dev / slope.abs() },
    })
}

/// Quantity maximised by [`optimize_time`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FisherObjective {
    /// One of the asymptotic closed forms.
    Analytic(Regime),
    /// [`fisher_exact`] on the given readout law, keeping every β-dependence.
    Exact(DistributionFamily),
}

/// Best evolution time found by [`optimize_time`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizedTime {
    pub time: f64,
    pub report: FisherReport,
    pub decay: DecayFactors,
}

/// Grid search over evolution times. Ties go to the smaller time.
pub fn optimize_time(
    model: &SpectralModel,
    beta: f64,
    n: usize,
    theta: f64,
    objective: FisherObjective,
    t_grid: &[f64],
) -> Result<OptimizedTime> {
    if t_grid.is_empty() {
        return Err(Error::domain("time grid is empty"));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("time grid must be strictly increasing"));
    }
    let evaluated: Vec<OptimizedTime> = t_grid
        .par_iter()
        .map(|&t| {
            let decay = decay_factors(model, beta, t)?;
            let report = match objective {
                FisherObjective::Analytic(regime) => {
                    fisher_analytic(&MeasurementConfig::new(n, theta, decay)?, regime)?
                }
                FisherObjective::Exact(family) => fisher_exact(family, n, theta, model, beta, t)?,
            };
            Ok(OptimizedTime { time: t, report, decay })
        })
        .collect::<Result<_>>()?;
    let mut best = evaluated[0];
    for cand in &evaluated[1..] {
        if cand.report.fisher > best.report.fisher {
            best = *cand;
        }
    }
    Ok(best)
}

/// Evenly spaced grid `start, start + step, …` up to `stop` (inclusive within rounding).
pub fn time_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && stop >= start && start >= 0.0) {
        return Err(Error::domain("time grid needs 0 <= start <= stop and step > 0"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| start + i as f64 * step).collect())
}

/// Predicted `F ~ N^{2-ε}` for correlations decaying as `r^{-α}` in `D` dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingPrediction {
    pub epsilon: f64,
    pub power: f64,
}

pub fn finite_range_scaling_exponent(alpha_exponent: f64, dimension: u32) -> Result<ScalingPrediction> {
    if !(alpha_exponent >= 0.0 && alpha_exponent.is_finite()) {
        return Err(Error::domain("correlation decay exponent must be finite and >= 0"));
    }
    if dimension == 0 {
        return Err(Error::domain("dimension must be >= 1"));
    }
    let epsilon = (alpha_exponent / dimension as f64).min(1.0);
    Ok(ScalingPrediction {
        epsilon,
        power: 2.0 - epsilon,
    })
}

/// Least-squares fit of `ln F = exponent · ln N + intercept`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub exponent: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
    pub max_abs_residual: f64,
    pub r_squared: f64,
}

pub fn fit_scaling_exponent(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::domain("scaling fit needs at least three points"));
    }
    if points.iter().any(|&(n, f)| !(n > 0.0) || !(f > 0.0)) {
        return Err(Error::domain("scaling fit needs positive N and F"));
    }
    let mut ns: Vec<f64> = points.iter().map(|p| p.0).collect();
    ns.sort_by(f64::total_cmp);
    if ns.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::domain("scaling fit needs distinct N values"));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let residuals: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - (intercept + exponent * x)).collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    Ok(ScalingFit {
        exponent,
        intercept,
        max_abs_residual: residuals.iter().fold(0.0, |a, r| a.max(r.abs())),
        residuals,
        r_squared: if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 },
    })
}
