//! Exact small-`N` reference results by enumeration.
//!
//! Starting from `∏|+x⟩` under pure Gaussian dephasing, the readout probability along
//! `cos θ x̂ + sin θ ŷ` is the average
//!
//! ```text
//! P_s = ⟨ exp(-Σ Δη_i Γ_ij Δη_j + i Σ_j Δη_j (θ + (1 - s_j) π/2)) ⟩_Δη
//! ```
//!
//! over independent `Δη_j ∈ {-1, 0, +1}` with weights `{¼, ½, ¼}`. The sum has `3^N` terms
//! and is evaluated in complex arithmetic; a nonvanishing imaginary part signals a bug and
//! is reported as an error. Any symmetric positive-semidefinite `Γ_ij` is accepted.

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::distributions::{DistributionForm, MeasurementConfig, ReadoutDistribution};
use crate::error::{Error, Result};

/// Default cap on `N` for enumeration (`3^12 ≈ 5.3·10⁵` terms).
pub const DEFAULT_CAP: usize = 12;
/// Largest tolerated imaginary residue of an enumerated probability.
pub const IMAGINARY_TOL: f64 = 1e-12;

/// Symmetric positive-semidefinite matrix of cooperative decay factors `Γ_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DecayMatrix {
    /// `entries` is row-major `n × n`.
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if n == 0 || entries.len() != n * n {
            return Err(Error::domain(format!(
                "decay matrix needs {n}x{n} = {} entries, got {}",
                n * n,
                entries.len()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("decay matrix entries must be finite"));
        }
        let scale = entries.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for i in 0..n {
            for j in 0..i {
                if (entries[i * n + j] - entries[j * n + i]).abs() > 1e-12 * scale {
                    return Err(Error::domain(format!("decay matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        let m = DMatrix::from_row_slice(n, n, &entries);
        let min_eig = m.symmetric_eigen().eigenvalues.min();
        if min_eig < -1e-12 * scale {
            return Err(Error::domain(format!(
                "decay matrix not positive semidefinite (smallest eigenvalue {min_eig:e})"
            )));
        }
        Ok(DecayMatrix { n, entries })
    }

    /// `Γ_ij = Γ_L + Γ_H δ_ij`.
    pub fn collective(n: usize, gamma_l: f64, gamma_h: f64) -> Result<Self> {
        let entries = (0..n * n)
            .map(|idx| gamma_l + if idx / n == idx % n { gamma_h } else { 0.0 })
            .collect();
        Self::new(n, entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// Same matrix with rows and columns reordered: `new[i][j] = old[perm[i]][perm[j]]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n;
        if perm.len() != n {
            return Err(Error::contract("permutation length must equal N"));
        }
        let entries = (0..n * n).map(|idx| self.get(perm[idx / n], perm[idx % n])).collect();
        Ok(DecayMatrix { n, entries })
    }

    fn quadratic_form(&self, d: &[i8]) -> f64 {
        let n = self.n;
        let mut q = 0.0;
        for i in 0..n {
            if d[i] == 0 {
                continue;
            }
            let row = &self.entries[i * n..(i + 1) * n];
            let mut acc = 0.0;
            for j in 0..n {
                acc += row[j] * d[j] as f64;
            }
            q += d[i] as f64 * acc;
        }
        q
    }
}

/// Enumeration settings.
#[derive(Debug, Clone, Copy)]
pub struct Enumerator {
    pub cap: usize,
}

impl Default for Enumerator {
    fn default() -> Self {
        Enumerator { cap: DEFAULT_CAP }
    }
}

fn decode(mut idx: usize, digits: &mut [i8]) {
    for d in digits.iter_mut() {
        *d = (idx % 3) as i8 - 1;
        idx /= 3;
    }
}

/// Weighted complex amplitude of one `Δη` configuration, before the readout-dependent signs:
/// `w(Δη) e^{-ΔηᵀΓΔη} e^{iθ ΣΔη}`.
fn configuration_term(gamma: &DecayMatrix, theta: f64, d: &[i8]) -> (Complex64, usize) {
    let nonzero = d.iter().filter(|&&x| x != 0).count();
    let zeros = d.len() - nonzero;
    let weight = 0.5f64.powi(zeros as i32) * 0.25f64.powi(nonzero as i32);
    let total: i32 = d.iter().map(|&x| x as i32).sum();
    let amp = Complex64::from_polar(weight * (-gamma.quadratic_form(d)).exp(), theta * total as f64);
    (amp, nonzero)
}

fn check_imaginary(z: Complex64) -> Result<f64> {
    if z.im.abs() > IMAGINARY_TOL {
        return Err(Error::Numerical {
            message: "enumerated probability has a nonvanishing imaginary part".into(),
            estimate: z.re,
            error: z.im.abs(),
            intervals: 0,
        });
    }
    Ok(z.re)
}

/// Parallel sum over all `3^N` configurations, in fixed chunks so the reduction order does
/// not depend on the thread count.
fn enumerate<T, F, G>(n: usize, zero: T, f: F, add: G) -> T
where
    T: Clone + Send + Sync,
    F: Fn(&[i8], &mut T) + Sync,
    G: Fn(T, T) -> T,
{
    let total = 3usize.pow(n as u32);
    let chunk = 729usize;
    let chunks = total.div_ceil(chunk);
    let partials: Vec<T> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = zero.clone();
            let mut digits = vec![0i8; n];
            for idx in c * chunk..((c + 1) * chunk).min(total) {
                decode(idx, &mut digits);
                f(&digits, &mut acc);
            }
            acc
        })
        .collect();
    partials.into_iter().fold(zero, add)
}

impl Enumerator {
    fn check(&self, n: usize) -> Result<()> {
        if n > self.cap {
            return Err(Error::TooLarge { n, cap: self.cap });
        }
        Ok(())
    }

    /// Probability of one readout string (`±1` entries).
    pub fn exact_probability(&self, gamma: &DecayMatrix, theta: f64, readout: &[i8]) -> Result<f64> {
        let n = gamma.n();
        if readout.len() != n {
            return Err(Error::contract(format!(
                "readout has {} entries for {n} thermometers",
                readout.len()
            )));
        }
        if readout.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::contract("readouts must be +1 or -1"));
        }
        self.check(n)?;
        let z = enumerate(
            n,
            Complex64::new(0.0, 0.0),
            |d, acc| {
                let (amp, _) = configuration_term(gamma, theta, d);
                // each spin read as -1 with Δη ≠ 0 contributes e^{iπ} = -1
                let flips = d.iter().zip(readout).filter(|(&x, &s)| x != 0 && s == -1).count();
                *acc += if flips % 2 == 0 { amp } else { -amp };
            },
            |a, b| a + b,
        );
        check_imaginary(z)
    }

    /// Probabilities of all `2^N` readout strings (bit `j` set ⇔ `s_j = -1`).
    ///
    /// Computed by contracting the `3^N` amplitude tensor one spin at a time, which costs
    /// `O(N·3^N)` instead of `O(6^N)`.
    pub fn exact_readout_table(&self, gamma: &DecayMatrix, theta: f64) -> Result<Vec<f64>> {
        let n = gamma.n();
        self.check(n)?;
        let total = 3usize.pow(n as u32);
        let mut current: Vec<Complex64> = (0..total)
            .into_par_iter()
            .map(|idx| {
                let mut d = vec![0i8; n];
                decode(idx, &mut d);
                configuration_term(gamma, theta, &d).0
            })
            .collect();
        for j in 0..n {
            let lower = 1usize << j;
            let upper = 3usize.pow((n - j - 1) as u32);
            let mut next = vec![Complex64::new(0.0, 0.0); lower * 2 * upper];
            for b in 0..upper {
                for a in 0..lower {
                    let at = |d: usize| current[a + lower * (d + 3 * b)];
                    let (minus, zero, plus) = (at(0), at(1), at(2));
                    // readout +1: all signs positive; readout -1: Δη = ±1 pick up a minus sign
                    next[a + lower * (2 * b)] = minus + zero + plus;
                    next[a + lower * (1 + 2 * b)] = zero - minus - plus;
                }
            }
            current = next;
        }
        current.into_iter().map(check_imaginary).collect()
    }

    /// Exact `p(S)` on `{-N, …, N}` (index `k` = number of `+1`s).
    ///
    /// Summing `P_s` over strings with `k` pluses turns the readout signs into the
    /// coefficients of `(x + 1)^{N-m} (x - 1)^m`, where `m` counts nonzero `Δη`, so only one
    /// pass over the `3^N` configurations is needed.
    pub fn exact_p_of_s(&self, gamma: &DecayMatrix, theta: f64) -> Result<Vec<f64>> {
        let n = gamma.n();
        self.check(n)?;
        let coeffs = sign_polynomials(n);
        let table = enumerate(
            n,
            vec![Complex64::new(0.0, 0.0); n + 1],
            |d, acc| {
                let (amp, m) = configuration_term(gamma, theta, d);
                for (slot, &c) in acc.iter_mut().zip(&coeffs[m]) {
                    *slot += amp * c;
                }
            },
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
        table.into_iter().map(check_imaginary).collect()
    }

    /// [`exact_p_of_s`](Self::exact_p_of_s) wrapped as a distribution for the collective
    /// `Γ_L + Γ_H δ_ij` model of `config`.
    pub fn distribution(&self, config: &MeasurementConfig) -> Result<ReadoutDistribution> {
        let gamma = DecayMatrix::collective(
            config.n_thermometers,
            config.decay.gamma_l,
            config.decay.gamma_h,
        )?;
        Ok(ReadoutDistribution {
            form: DistributionForm::CollectiveExactS {
                table: self.exact_p_of_s(&gamma, config.theta)?,
            },
            config: *config,
        })
    }

    /// Full `2^N` readout table for the collective model of `config`.
    pub fn enumerated_distribution(&self, config: &MeasurementConfig) -> Result<ReadoutDistribution> {
        let gamma = DecayMatrix::collective(
            config.n_thermometers,
            config.decay.gamma_l,
            config.decay.gamma_h,
        )?;
        Ok(ReadoutDistribution {
            form: DistributionForm::ExactEnumerated {
                probabilities: self.exact_readout_table(&gamma, config.theta)?,
            },
            config: *config,
        })
    }
}

/// `coeffs[m][k]` = coefficient of `x^k` in `(x + 1)^{n-m} (x - 1)^m`.
fn sign_polynomials(n: usize) -> Vec<Vec<f64>> {
    (0..=n)
        .map(|m| {
            let mut poly = vec![1.0];
            for i in 0..n {
                let c = if i < n - m { 1.0 } else { -1.0 };
                let mut next = vec![0.0; poly.len() + 1];
                for (k, &p) in poly.iter().enumerate() {
                    next[k + 1] += p;
                    next[k] += c * p;
                }
                poly = next;
            }
            poly
        })
        .collect()
}

/// Convenience wrapper with the default cap.
pub fn exact_probability(gamma: &DecayMatrix, theta: f64, readout: &[i8]) -> Result<f64> {
    Enumerator::default().exact_probability(gamma, theta, readout)
}

/// Convenience wrapper with the default cap.
pub fn exact_p_of_s(gamma: &DecayMatrix, theta: f64) -> Result<Vec<f64>> {
    Enumerator::default().exact_p_of_s(gamma, theta)
}

/// Exact two-spin density matrix in the `σᶻ` product basis
/// (index `2a + b`, `0 ↔ |+z⟩`, `1 ↔ |−z⟩`):
/// `ρ_{η,η̄} = ¼ exp(-Σ Δη_i Γ_ij Δη_j)` with `Δη = (η - η̄)/2`.
pub fn exact_reduced_state(gamma: &DecayMatrix) -> Result<Matrix4<Complex64>> {
    if gamma.n() != 2 {
        return Err(Error::contract("reduced state needs a 2x2 decay matrix"));
    }
    let eta = |bit: usize| if bit == 0 { 1i8 } else { -1i8 };
    Ok(Matrix4::from_fn(|r, c| {
        let d = [
            (eta(r >> 1) - eta(c >> 1)) / 2,
            (eta(r & 1) - eta(c & 1)) / 2,
        ];
        Complex64::new(0.25 * (-gamma.quadratic_form(&d)).exp(), 0.0)
    }))
}
