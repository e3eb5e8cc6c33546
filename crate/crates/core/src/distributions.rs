//! Readout distributions for `N` thermometers measured along a common equatorial axis.
//!
//! Readouts depend on the bath through a shared Gaussian phase `φ₀ ~ Normal(0, Γ_L/2)`:
//! conditioned on `φ₀`, every spin reads `+1` independently with probability
//! `(1 + e^{-Γ_H} cos(θ + 2φ₀)) / 2`. Because of this exchange symmetry every form below is
//! summarised by the ensemble readout `S = Σ s_j`, stored on its exact support
//! `{-N, -N+2, …, N}` (index `k` = number of `+1` readouts, `S = 2k - N`).

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use nalgebra::Matrix4;
use num_complex::Complex64;

use crate::decoherence::DecayFactors;
use crate::error::{Error, Result};
use crate::quadrature::{composite_kronrod, GaussHermite};

/// Angles closer than this to 0 or π/2 are treated as exactly on axis.
pub const ANGLE_TOL: f64 = 1e-12;

/// Default Gauss–Hermite order for the collective-field average.
pub const HERMITE_NODES: usize = 64;
/// Order used to confirm convergence of the default rule.
pub const HERMITE_CHECK_NODES: usize = 128;
/// Fallback panel counts for the composite rule.
pub const PANELS_START: usize = 8;
pub const PANELS_MAX: usize = 4096;
/// Half-width, in standard deviations, of the fallback integration range.
pub const NORMAL_SPAN: f64 = 9.0;
/// Total-variation distance below which two quadrature orders count as converged.
pub const QUADRATURE_AGREEMENT: f64 = 1e-10;

/// Number of thermometers, measurement angle and the decay factors at the working point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementConfig {
    pub n_thermometers: usize,
    pub theta: f64,
    pub decay: DecayFactors,
}

impl MeasurementConfig {
    pub fn new(n_thermometers: usize, theta: f64, decay: DecayFactors) -> Result<Self> {
        if n_thermometers == 0 {
            return Err(Error::domain("need at least one thermometer"));
        }
        if !(-ANGLE_TOL..=FRAC_PI_2 + ANGLE_TOL).contains(&theta) {
            return Err(Error::domain(format!("theta must lie in [0, π/2], got {theta}")));
        }
        if !(decay.gamma_l >= 0.0 && decay.gamma_h >= 0.0) {
            return Err(Error::domain("decay factors must be nonnegative"));
        }
        Ok(MeasurementConfig {
            n_thermometers,
            theta,
            decay,
        })
    }

    /// Measurement along x (`θ = 0`).
    pub fn is_independent(&self) -> bool {
        self.theta.abs() <= ANGLE_TOL
    }

    /// Measurement along y (`θ = π/2`).
    pub fn is_correlation(&self) -> bool {
        (self.theta - FRAC_PI_2).abs() <= ANGLE_TOL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DistributionForm {
    /// Probability of every readout string, indexed by the bit pattern
    /// (bit `j` set ⇔ `s_j = -1`).
    ExactEnumerated { probabilities: Vec<f64> },
    /// Independent spins with `P(s_j = +1) = p_plus`.
    Product { p_plus: f64 },
    /// Continuous Gaussian approximation of `p(S)`.
    CollectiveGaussianS { mean: f64, variance: f64 },
    /// `p(S)` on the exact support, index `k = (S + N)/2`.
    CollectiveExactS { table: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutDistribution {
    pub form: DistributionForm,
    pub config: MeasurementConfig,
}

/// `S` value for table index `k`.
pub fn s_value(n: usize, k: usize) -> i64 {
    2 * k as i64 - n as i64
}

/// Exact support `{-N, -N+2, …, N}`.
pub fn s_support(n: usize) -> Vec<i64> {
    (0..=n).map(|k| s_value(n, k)).collect()
}

/// `ln k!` for `k = 0..=n`.
pub(crate) fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Binomial probabilities `C(n,k) q^k (1-q)^{n-k}`, accumulated into `out` with weight `w`.
fn add_binomial(out: &mut [f64], ln_fact: &[f64], q: f64, w: f64) {
    let n = out.len() - 1;
    if q <= 0.0 {
        out[0] += w;
        return;
    }
    if q >= 1.0 {
        out[n] += w;
        return;
    }
    let (lq, lp) = (q.ln(), (-q).ln_1p());
    for (k, slot) in out.iter_mut().enumerate() {
        let ln_c = ln_fact[n] - ln_fact[k] - ln_fact[n - k];
        *slot += w * (ln_c + k as f64 * lq + (n - k) as f64 * lp).exp();
    }
}

/// Binomial law of `S` for independent spins with `P(+1) = p_plus`.
pub fn binomial_table(n: usize, p_plus: f64) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    add_binomial(&mut out, &ln_factorials(n), p_plus, 1.0);
    out
}

fn collective_table(config: &MeasurementConfig, nodes: &[(f64, f64)]) -> Vec<f64> {
    let n = config.n_thermometers;
    let ln_fact = ln_factorials(n);
    let contrast = (-config.decay.gamma_h).exp();
    let mut table = vec![0.0; n + 1];
    let q_at = |phi: f64| 0.5 * (1.0 + contrast * (config.theta + 2.0 * phi).cos());
    if config.decay.gamma_l == 0.0 {
        add_binomial(&mut table, &ln_fact, q_at(0.0), 1.0);
        return table;
    }
    let sd = (0.5 * config.decay.gamma_l).sqrt();
    for &(z, w) in nodes {
        add_binomial(&mut table, &ln_fact, q_at(sd * z), w);
    }
    table
}

/// Gauss–Hermite rule rescaled to a standard normal variate.
fn hermite_normal_nodes(order: usize) -> Vec<(f64, f64)> {
    let rule = GaussHermite::new(order);
    let norm = std::f64::consts::PI.sqrt().recip();
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&x, &w)| (std::f64::consts::SQRT_2 * x, w * norm))
        .collect()
}

/// Composite Kronrod panels on `[-NORMAL_SPAN, NORMAL_SPAN]` weighted by the normal density.
fn panel_normal_nodes(panels: usize) -> Vec<(f64, f64)> {
    let norm = (2.0 * std::f64::consts::PI).sqrt().recip();
    composite_kronrod(-NORMAL_SPAN, NORMAL_SPAN, panels)
        .into_iter()
        .map(|(z, w)| (z, w * norm * (-0.5 * z * z).exp()))
        .collect()
}

/// Exact `p(S)` of the collective-field model, averaging over `φ₀`.
///
/// The 64-node Gauss–Hermite result is accepted when it agrees with 128 nodes. Otherwise
/// (small `Γ_H` or large `N`, where `p(S|φ₀)` is sharply peaked in `φ₀`) the average is
/// redone with composite Kronrod panels, doubling the panel count until two successive
/// tables agree.
pub fn collective_field_distribution(config: &MeasurementConfig) -> Result<ReadoutDistribution> {
    let wrap = |table| ReadoutDistribution {
        form: DistributionForm::CollectiveExactS { table },
        config: *config,
    };
    let table = collective_table(config, &hermite_normal_nodes(HERMITE_NODES));
    if config.decay.gamma_l == 0.0 {
        return Ok(wrap(table));
    }
    let check = collective_table(config, &hermite_normal_nodes(HERMITE_CHECK_NODES));
    if total_variation(&table, &check) <= QUADRATURE_AGREEMENT {
        return Ok(wrap(table));
    }
    let mut panels = PANELS_START;
    let mut table = collective_table(config, &panel_normal_nodes(panels));
    loop {
        let finer = collective_table(config, &panel_normal_nodes(2 * panels));
        let diff = total_variation(&table, &finer);
        if diff <= QUADRATURE_AGREEMENT {
            return Ok(wrap(finer));
        }
        if 2 * panels >= PANELS_MAX {
            return Err(Error::Numerical {
                message: format!(
                    "average over the collective field not converged (N = {})",
                    config.n_thermometers
                ),
                estimate: 1.0,
                error: diff,
                intervals: 2 * panels,
            });
        }
        panels *= 2;
        table = finer;
    }
}

/// Independent-spin law with `⟨s_j⟩ = e^{-Γ}`; valid for `θ = 0` up to `O(Γ_L²)`.
pub fn product_distribution(config: &MeasurementConfig) -> Result<ReadoutDistribution> {
    if !config.is_independent() {
        return Err(Error::contract("product distribution requires theta = 0"));
    }
    let p_plus = 0.5 * (1.0 + (-config.decay.gamma_total).exp());
    Ok(ReadoutDistribution {
        form: DistributionForm::Product { p_plus },
        config: *config,
    })
}

/// Large-`N` Gaussian `p(S)` at `θ = π/2`: zero mean, variance `N(1 + 2e^{-2Γ} N Γ_L)`.
pub fn correlation_distribution(config: &MeasurementConfig) -> Result<ReadoutDistribution> {
    if !config.is_correlation() {
        return Err(Error::contract("correlation distribution requires theta = π/2"));
    }
    let n = config.n_thermometers as f64;
    let d = &config.decay;
    let variance = n * (1.0 + 2.0 * (-2.0 * d.gamma_total).exp() * n * d.gamma_l);
    Ok(ReadoutDistribution {
        form: DistributionForm::CollectiveGaussianS { mean: 0.0, variance },
        config: *config,
    })
}

/// Large-`N` Gaussian `p(S)` at `θ = 0`: mean `N e^{-Γ}`, variance `N(1 - e^{-2Γ})`.
/// At `Γ = 0` the variance vanishes and the result is the point mass at `S = N`.
pub fn gaussian_s_theta0(config: &MeasurementConfig) -> Result<ReadoutDistribution> {
    if !config.is_independent() {
        return Err(Error::contract("theta = 0 Gaussian form requires theta = 0"));
    }
    let n = config.n_thermometers;
    let g = config.decay.gamma_total;
    if g == 0.0 {
        let mut table = vec![0.0; n + 1];
        table[n] = 1.0;
        return Ok(ReadoutDistribution {
            form: DistributionForm::CollectiveExactS { table },
            config: *config,
        });
    }
    let nf = n as f64;
    Ok(ReadoutDistribution {
        form: DistributionForm::CollectiveGaussianS {
            mean: nf * (-g).exp(),
            variance: -nf * (-2.0 * g).exp_m1(),
        },
        config: *config,
    })
}

/// Small-`Γ_L` expansion of the `θ = π/2` law: `P_s ∝ exp(S² Γ_L e^{-2Γ} / (1 + 2NΓ_L e^{-2Γ}))`,
/// multiplied by the number of strings with the same `S` and normalised by explicit summation.
pub fn correlation_expansion_table(config: &MeasurementConfig) -> Result<ReadoutDistribution> {
    if !config.is_correlation() {
        return Err(Error::contract("correlation expansion requires theta = π/2"));
    }
    let n = config.n_thermometers;
    let nf = n as f64;
    let d = &config.decay;
    let a = d.gamma_l * (-2.0 * d.gamma_total).exp();
    let coeff = a / (1.0 + 2.0 * nf * a);
    let ln_fact = ln_factorials(n);
    let log_weights: Vec<f64> = (0..=n)
        .map(|k| {
            let s = s_value(n, k) as f64;
            ln_fact[n] - ln_fact[k] - ln_fact[n - k] + coeff * s * s
        })
        .collect();
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut table: Vec<f64> = log_weights.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = table.iter().sum();
    table.iter_mut().for_each(|p| *p /= z);
    Ok(ReadoutDistribution {
        form: DistributionForm::CollectiveExactS { table },
        config: *config,
    })
}

/// Exact moments of `S` and `S²` under the collective-field model, in closed form:
/// `⟨S⟩ = N e^{-Γ_H - Γ_L} cos θ` and
/// `⟨S²⟩ = N + N(N-1) e^{-2Γ_H} (1 + cos 2θ · e^{-4Γ_L}) / 2`.
pub fn collective_moments(config: &MeasurementConfig) -> (f64, f64) {
    let n = config.n_thermometers as f64;
    let d = &config.decay;
    let mean = n * (-d.gamma_total).exp() * config.theta.cos();
    let pair = (-2.0 * d.gamma_h).exp() * 0.5 * (1.0 + (2.0 * config.theta).cos() * (-4.0 * d.gamma_l).exp());
    (mean, n + n * (n - 1.0) * pair)
}

/// Summary moments of `S` and of `S²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SMoments {
    pub mean_s: f64,
    pub var_s: f64,
    pub mean_s2: f64,
    pub var_s2: f64,
}

fn table_moments(n: usize, table: &[f64]) -> SMoments {
    let (mut m1, mut m2) = (0.0, 0.0);
    for (k, &p) in table.iter().enumerate() {
        let s = s_value(n, k) as f64;
        m1 += p * s;
        m2 += p * s * s;
    }
    // central moments summed directly rather than from raw moments
    let var_s: f64 = table
        .iter()
        .enumerate()
        .map(|(k, &p)| p * (s_value(n, k) as f64 - m1).powi(2))
        .sum();
    let var_s2: f64 = table
        .iter()
        .enumerate()
        .map(|(k, &p)| p * ((s_value(n, k) as f64).powi(2) - m2).powi(2))
        .sum();
    SMoments {
        mean_s: m1,
        var_s,
        mean_s2: m2,
        var_s2,
    }
}

impl ReadoutDistribution {
    pub fn n(&self) -> usize {
        self.config.n_thermometers
    }

    /// `p(S)` on the exact support, when the form is discrete.
    pub fn s_table(&self) -> Option<Vec<f64>> {
        let n = self.n();
        match &self.form {
            DistributionForm::CollectiveExactS { table } => Some(table.clone()),
            DistributionForm::Product { p_plus } => Some(binomial_table(n, *p_plus)),
            DistributionForm::ExactEnumerated { probabilities } => {
                let mut table = vec![0.0; n + 1];
                for (bits, &p) in probabilities.iter().enumerate() {
                    let minus = (bits as u64).count_ones() as usize;
                    table[n - minus] += p;
                }
                Some(table)
            }
            DistributionForm::CollectiveGaussianS { .. } => None,
        }
    }

    /// Probability (or, for Gaussian forms, lattice-discretised density `2·pdf(S)`) at `S`.
    pub fn p_of_s(&self, s: i64) -> f64 {
        let n = self.n() as i64;
        if let DistributionForm::CollectiveGaussianS { mean, variance } = self.form {
            let z = (s as f64 - mean).powi(2) / (2.0 * variance);
            return 2.0 * (-z).exp() / (2.0 * std::f64::consts::PI * variance).sqrt();
        }
        if s < -n || s > n || (s + n) % 2 != 0 {
            return 0.0;
        }
        self.s_table().expect("discrete form")[((s + n) / 2) as usize]
    }

    pub fn moments(&self) -> SMoments {
        match &self.form {
            DistributionForm::CollectiveGaussianS { mean, variance } => {
                let (m, v) = (*mean, *variance);
                SMoments {
                    mean_s: m,
                    var_s: v,
                    mean_s2: m * m + v,
                    var_s2: 4.0 * m * m * v + 2.0 * v * v,
                }
            }
            _ => table_moments(self.n(), &self.s_table().expect("discrete form")),
        }
    }

    /// Sum of the probability table (1 for Gaussian forms by construction).
    pub fn total_probability(&self) -> f64 {
        match &self.form {
            DistributionForm::ExactEnumerated { probabilities } => probabilities.iter().sum(),
            DistributionForm::CollectiveGaussianS { .. } => 1.0,
            _ => self.s_table().expect("discrete form").iter().sum(),
        }
    }

    /// Writes `S p(S)` rows over the exact support, with a `#` header line.
    pub fn write_two_column<W: Write>(&self, mut out: W) -> Result<()> {
        let c = &self.config;
        writeln!(
            out,
            "# N={} theta={:.17e} gamma_l={:.17e} gamma_h={:.17e}",
            c.n_thermometers, c.theta, c.decay.gamma_l, c.decay.gamma_h
        )?;
        for s in s_support(self.n()) {
            writeln!(out, "{} {:.16e}", s, self.p_of_s(s))?;
        }
        Ok(())
    }
}

/// Total-variation distance `½ Σ |p - q|` between two tables on the same support.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "tables must share a support");
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Pauli matrices in the `σᶻ` eigenbasis `{|+z⟩, |−z⟩}`.
pub mod pauli {
    use nalgebra::Matrix2;
    use num_complex::Complex64;

    pub fn identity() -> Matrix2<Complex64> {
        Matrix2::identity()
    }

    pub fn x() -> Matrix2<Complex64> {
        let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        Matrix2::new(z, o, o, z)
    }

    pub fn y() -> Matrix2<Complex64> {
        let (i, z) = (Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0));
        Matrix2::new(z, -i, i, z)
    }

    pub fn z() -> Matrix2<Complex64> {
        let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        Matrix2::new(o, z, z, -o)
    }
}

/// Kronecker product of two single-spin operators; the first factor is the high-order bit.
pub fn kron(a: &nalgebra::Matrix2<Complex64>, b: &nalgebra::Matrix2<Complex64>) -> Matrix4<Complex64> {
    Matrix4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

/// Two-thermometer state to first order in `Γ_L`:
/// `¼(I + e^{-Γ}σˣ)(I + e^{-Γ}σˣ) + ½ Γ_L e^{-2Γ} σʸσʸ`.
pub fn two_thermometer_state(decay: &DecayFactors) -> Matrix4<Complex64> {
    let c = Complex64::new((-decay.gamma_total).exp(), 0.0);
    let single = pauli::identity() + pauli::x() * c;
    let product = kron(&single, &single) * Complex64::new(0.25, 0.0);
    let corr = 0.5 * decay.gamma_l * (-2.0 * decay.gamma_total).exp();
    product + kron(&pauli::y(), &pauli::y()) * Complex64::new(corr, 0.0)
}
