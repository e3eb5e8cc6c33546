//! Monte Carlo readout records from the collective-field model.
//!
//! Shots are generated in fixed chunks of [`CHUNK_SHOTS`]. Chunk `c` uses ChaCha8 seeded
//! with the batch seed and switched to stream `c`, so the records depend only on
//! `(config, shots, seed)` and never on the number of worker threads.

use std::fmt;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::decoherence::decay_factors;
use crate::distributions::{collective_moments, MeasurementConfig};
use crate::error::{Error, Result};
use crate::estimation::Observable;
use crate::spectral::SpectralModel;

/// Shots per RNG stream.
pub const CHUNK_SHOTS: usize = 4096;
/// Two-sided normal quantile used for the reported confidence intervals.
pub const CI_Z: f64 = 1.959963984540054;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StorageMode {
    /// Every spin of every shot.
    Full,
    /// Only `S = Σ s_j` per shot.
    Compressed,
}

impl fmt::Display for StorageMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StorageMode::Full => "full",
            StorageMode::Compressed => "compressed",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shots {
    /// Row-major `shots × N` array of ±1.
    Full(Vec<i8>),
    Compressed(Vec<i64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutBatch {
    pub config: MeasurementConfig,
    pub seed: u64,
    pub shots: Shots,
}

impl ReadoutBatch {
    pub fn len(&self) -> usize {
        match &self.shots {
            Shots::Full(spins) => spins.len() / self.config.n_thermometers,
            Shots::Compressed(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mode(&self) -> StorageMode {
        match self.shots {
            Shots::Full(_) => StorageMode::Full,
            Shots::Compressed(_) => StorageMode::Compressed,
        }
    }

    /// Readout of one shot, if full records were kept.
    pub fn spins(&self, shot: usize) -> Option<&[i8]> {
        let n = self.config.n_thermometers;
        match &self.shots {
            Shots::Full(spins) => spins.get(shot * n..(shot + 1) * n),
            Shots::Compressed(_) => None,
        }
    }

    /// Per-shot `S` values.
    pub fn s_values(&self) -> Vec<i64> {
        match &self.shots {
            Shots::Full(spins) => spins
                .chunks_exact(self.config.n_thermometers)
                .map(|row| row.iter().map(|&s| s as i64).sum())
                .collect(),
            Shots::Compressed(s) => s.clone(),
        }
    }

    /// Normalised histogram of `S`, indexed by the number of `+1` readouts.
    pub fn histogram(&self) -> Vec<f64> {
        let n = self.config.n_thermometers;
        let mut counts = vec![0u64; n + 1];
        for s in self.s_values() {
            counts[((s + n as i64) / 2) as usize] += 1;
        }
        let m = self.len() as f64;
        counts.into_iter().map(|c| c as f64 / m).collect()
    }

    /// Writes a `#` header followed by `shot_index S` or `shot_index s_1 … s_N` lines.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        let c = &self.config;
        writeln!(out, "# thermometry readout batch v1")?;
        writeln!(
            out,
            "# n={} theta={:.16e} gamma_l={:.16e} gamma_h={:.16e} beta={:.16e} time={:.16e}",
            c.n_thermometers, c.theta, c.decay.gamma_l, c.decay.gamma_h, c.decay.beta, c.decay.time
        )?;
        writeln!(out, "# seed={} shots={} mode={} rng=chacha8", self.seed, self.len(), self.mode())?;
        match &self.shots {
            Shots::Compressed(s) => {
                for (i, s) in s.iter().enumerate() {
                    writeln!(out, "{i} {s}")?;
                }
            }
            Shots::Full(spins) => {
                for (i, row) in spins.chunks_exact(c.n_thermometers).enumerate() {
                    write!(out, "{i}")?;
                    for s in row {
                        write!(out, " {s}")?;
                    }
                    writeln!(out)?;
                }
            }
        }
        Ok(())
    }
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Draws one shot: the collective phase, then each spin against `q(φ₀)`.
fn draw_shot<F: FnMut(bool)>(rng: &mut ChaCha8Rng, config: &MeasurementConfig, mut emit: F) {
    let z: f64 = rng.sample(StandardNormal);
    let phi0 = (0.5 * config.decay.gamma_l).sqrt() * z;
    let q = 0.5 * (1.0 + (-config.decay.gamma_h).exp() * (config.theta + 2.0 * phi0).cos());
    for _ in 0..config.n_thermometers {
        let u: f64 = rng.random();
        emit(u < q);
    }
}

/// Samples `m_shots` Ramsey records. Full and compressed batches with the same seed
/// describe the same shots.
pub fn sample_readouts(
    config: &MeasurementConfig,
    m_shots: usize,
    seed: u64,
    mode: StorageMode,
) -> Result<ReadoutBatch> {
    if m_shots == 0 {
        return Err(Error::domain("need at least one shot"));
    }
    let n = config.n_thermometers;
    let chunks = m_shots.div_ceil(CHUNK_SHOTS);
    let chunk_len = |c: usize| CHUNK_SHOTS.min(m_shots - c * CHUNK_SHOTS);
    let shots = match mode {
        StorageMode::Full => {
            let parts: Vec<Vec<i8>> = (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut rng = chunk_rng(seed, c);
                    let mut out = Vec::with_capacity(chunk_len(c) * n);
                    for _ in 0..chunk_len(c) {
                        draw_shot(&mut rng, config, |up| out.push(if up { 1 } else { -1 }));
                    }
                    out
                })
                .collect();
            Shots::Full(parts.concat())
        }
        StorageMode::Compressed => {
            let parts: Vec<Vec<i64>> = (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut rng = chunk_rng(seed, c);
                    (0..chunk_len(c))
                        .map(|_| {
                            let mut s = 0i64;
                            draw_shot(&mut rng, config, |up| s += if up { 1 } else { -1 });
                            s
                        })
                        .collect()
                })
                .collect();
            Shots::Compressed(parts.concat())
        }
    };
    Ok(ReadoutBatch {
        config: *config,
        seed,
        shots,
    })
}

/// Neumaier-compensated sum.
fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + comp
}

/// Sample mean, unbiased variance and fourth central moment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleStats {
    pub mean: f64,
    /// NaN for a single sample.
    pub variance: f64,
    pub fourth_central: f64,
    pub count: usize,
}

impl SampleStats {
    pub fn from_values(values: &[f64]) -> Result<SampleStats> {
        if values.is_empty() {
            return Err(Error::domain("no samples"));
        }
        let m = values.len() as f64;
        let mean = compensated_sum(values.iter().copied()) / m;
        let (variance, fourth_central) = if values.len() > 1 {
            (
                compensated_sum(values.iter().map(|v| (v - mean).powi(2))) / (m - 1.0),
                compensated_sum(values.iter().map(|v| (v - mean).powi(4))) / m,
            )
        } else {
            (f64::NAN, f64::NAN)
        };
        Ok(SampleStats {
            mean,
            variance,
            fourth_central,
            count: values.len(),
        })
    }

    /// Standard error of the mean.
    pub fn standard_error(&self) -> f64 {
        (self.variance / self.count as f64).sqrt()
    }

    /// Large-sample standard error of the sample variance, `√((μ₄ - σ⁴)/M)`.
    pub fn variance_standard_error(&self) -> f64 {
        ((self.fourth_central - self.variance * self.variance).max(0.0) / self.count as f64).sqrt()
    }
}

/// Batch moments of `S`, `S²` and the pair correlator with their standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalMoments {
    pub shots: usize,
    pub mean_s: f64,
    pub var_s: f64,
    pub se_mean_s: f64,
    pub mean_s2: f64,
    pub var_s2: f64,
    pub se_mean_s2: f64,
    /// `⟨s_i s_j⟩`, `i ≠ j`, averaged over pairs; NaN for one thermometer.
    pub pair_correlator: f64,
    pub se_pair_correlator: f64,
    /// Only one shot: variances and standard errors are undefined (NaN).
    pub single_shot: bool,
}

pub fn empirical_moments(batch: &ReadoutBatch) -> Result<EmpiricalMoments> {
    if batch.is_empty() {
        return Err(Error::domain("empty batch"));
    }
    let n = batch.config.n_thermometers;
    let s: Vec<f64> = batch.s_values().into_iter().map(|v| v as f64).collect();
    let s2: Vec<f64> = s.iter().map(|v| v * v).collect();
    let ms = SampleStats::from_values(&s)?;
    let ms2 = SampleStats::from_values(&s2)?;
    let (pair_correlator, se_pair_correlator) = if n >= 2 {
        // per shot, the mean over ordered pairs is (S² - N) / (N(N - 1))
        let norm = (n * (n - 1)) as f64;
        let pairs: Vec<f64> = s2.iter().map(|v| (v - n as f64) / norm).collect();
        let mp = SampleStats::from_values(&pairs)?;
        (mp.mean, mp.standard_error())
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(EmpiricalMoments {
        shots: batch.len(),
        mean_s: ms.mean,
        var_s: ms.variance,
        se_mean_s: ms.standard_error(),
        mean_s2: ms2.mean,
        var_s2: ms2.variance,
        se_mean_s2: ms2.standard_error(),
        pair_correlator,
        se_pair_correlator,
        single_shot: batch.len() == 1,
    })
}

/// Matrix of `⟨s_i s_j⟩` from full records (diagonal is 1).
pub fn pair_correlation_matrix(batch: &ReadoutBatch) -> Result<Vec<Vec<f64>>> {
    let Shots::Full(spins) = &batch.shots else {
        return Err(Error::contract("pair correlation matrix needs full readouts"));
    };
    let n = batch.config.n_thermometers;
    let m = batch.len() as f64;
    let mut out = vec![vec![0.0; n]; n];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let total: i64 = spins.chunks_exact(n).map(|r| (r[i] * r[j]) as i64).sum();
            *cell = total as f64 / m;
        }
    }
    Ok(out)
}

/// Two-sample Kolmogorov–Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    /// Asymptotic p-value; conservative for discrete data.
    pub p_value: f64,
}

fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

pub fn ks_two_sample(a: &[i64], b: &[i64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::domain("KS test needs two nonempty samples"));
    }
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_unstable();
    b.sort_unstable();
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = (na * nb / (na + nb)).sqrt();
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_q((ne + 0.12 + 0.11 / ne) * d),
    })
}

/// Fisher information estimated through the SNR of the score-matched observable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalFisher {
    pub fisher: f64,
    pub standard_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub observable: Observable,
    /// `dŌ/dβ` from the analytic mean.
    pub slope: f64,
    /// Sample variance of the observable.
    pub variance: f64,
    pub shots: usize,
}

/// `F̂ = (dŌ/dβ)² / Var(O)` with `O = S` at `θ = 0` and `O = S²` at `θ = π/2`.
/// The slope is a central difference of the analytic mean at `β ± δβ`; the variance comes
/// from a compressed batch drawn at β.
#[allow(clippy::too_many_arguments)]
pub fn empirical_fisher(
    model: &SpectralModel,
    beta: f64,
    t: f64,
    n: usize,
    theta: f64,
    m_shots: usize,
    seed: u64,
    delta_beta: f64,
) -> Result<EmpiricalFisher> {
    if !(delta_beta > 0.0 && delta_beta < beta) {
        return Err(Error::domain("delta_beta must satisfy 0 < delta_beta < beta"));
    }
    let config = MeasurementConfig::new(n, theta, decay_factors(model, beta, t)?)?;
    let observable = if config.is_independent() {
        Observable::S
    } else if config.is_correlation() {
        Observable::SSquared
    } else {
        return Err(Error::contract("empirical Fisher needs theta = 0 or π/2"));
    };
    let mean_at = |b: f64| -> Result<f64> {
        let c = MeasurementConfig::new(n, theta, decay_factors(model, b, t)?)?;
        let (s, s2) = collective_moments(&c);
        Ok(match observable {
            Observable::S => s,
            Observable::SSquared => s2,
        })
    };
    let slope = (mean_at(beta + delta_beta)? - mean_at(beta - delta_beta)?) / (2.0 * delta_beta);
    let batch = sample_readouts(&config, m_shots, seed, StorageMode::Compressed)?;
    let values: Vec<f64> = batch.s_values().into_iter().map(|s| observable.eval(s)).collect();
    let stats = SampleStats::from_values(&values)?;
    if stats.count < 2 {
        return Err(Error::Degenerate("variance undefined for a single shot".into()));
    }
    if !(stats.variance > 0.0) {
        return Err(Error::Degenerate(format!("observable {observable:?} has zero sample variance")));
    }
    let fisher = slope * slope / stats.variance;
    let standard_error = fisher * stats.variance_standard_error() / stats.variance;
    Ok(EmpiricalFisher {
        fisher,
        standard_error,
        ci_low: (fisher - CI_Z * standard_error).max(0.0),
        ci_high: fisher + CI_Z * standard_error,
        observable,
        slope,
        variance: stats.variance,
        shots: stats.count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoherence::DecayFactors;
    use std::f64::consts::FRAC_PI_2;

    fn cfg(n: usize, theta: f64, gl: f64, gh: f64) -> MeasurementConfig {
        MeasurementConfig::new(n, theta, DecayFactors::from_parts(gl, gh, 0.0, 0.0)).unwrap()
    }

    #[test]
    fn noiseless_readouts_are_all_up() {
        let b = sample_readouts(&cfg(5, 0.0, 0.0, 0.0), 100, 1, StorageMode::Full).unwrap();
        let Shots::Full(spins) = &b.shots else { unreachable!() };
        assert!(spins.iter().all(|&s| s == 1));
        assert_eq!(b.len(), 100);
    }

    #[test]
    fn full_and_compressed_agree() {
        let c = cfg(7, 0.3, 0.2, 0.5);
        let full = sample_readouts(&c, 9000, 42, StorageMode::Full).unwrap();
        let comp = sample_readouts(&c, 9000, 42, StorageMode::Compressed).unwrap();
        assert_eq!(full.s_values(), comp.s_values());
        assert!(full.s_values().iter().all(|s| (s + 7) % 2 == 0));
        assert_eq!(full.spins(3).unwrap().len(), 7);
        assert!(comp.spins(3).is_none());
    }

    #[test]
    fn independent_of_thread_count() {
        let c = cfg(6, FRAC_PI_2, 0.1, 0.4);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| sample_readouts(&c, 20_000, 7, StorageMode::Compressed).unwrap().shots)
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn zero_shots_rejected() {
        assert!(matches!(
            sample_readouts(&cfg(2, 0.0, 0.0, 0.0), 0, 1, StorageMode::Full),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn constant_batch_has_zero_variance() {
        let b = sample_readouts(&cfg(4, 0.0, 0.0, 0.0), 50, 3, StorageMode::Compressed).unwrap();
        let m = empirical_moments(&b).unwrap();
        assert_eq!((m.mean_s, m.var_s, m.var_s2), (4.0, 0.0, 0.0));
        assert_eq!(m.pair_correlator, 1.0);
        assert!(!m.single_shot);
    }

    #[test]
    fn single_shot_is_flagged() {
        let b = sample_readouts(&cfg(4, 0.0, 0.1, 0.1), 1, 3, StorageMode::Compressed).unwrap();
        let m = empirical_moments(&b).unwrap();
        assert!(m.single_shot && m.var_s.is_nan());
    }

    #[test]
    fn fringe_suppressed_spins_are_fair_coins() {
        let b = sample_readouts(&cfg(3, 0.0, 0.0, 800.0), 40_000, 9, StorageMode::Full).unwrap();
        let m = empirical_moments(&b).unwrap();
        assert!(m.mean_s.abs() < 3.0 * m.se_mean_s);
        let corr = pair_correlation_matrix(&b).unwrap();
        assert_eq!(corr[1][1], 1.0);
        assert!(corr[0][2].abs() < 0.02);
    }

    #[test]
    fn compensated_sum_is_accurate() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }

    #[test]
    fn histogram_sums_to_one() {
        let b = sample_readouts(&cfg(5, 0.2, 0.1, 0.3), 3000, 11, StorageMode::Compressed).unwrap();
        let h = b.histogram();
        assert_eq!(h.len(), 6);
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ks_detects_shift_and_accepts_identical() {
        let a: Vec<i64> = (0..1000).map(|i| i % 10).collect();
        let same = ks_two_sample(&a, &a).unwrap();
        assert_eq!(same.statistic, 0.0);
        assert_eq!(same.p_value, 1.0);
        let shifted: Vec<i64> = a.iter().map(|v| v + 3).collect();
        let r = ks_two_sample(&a, &shifted).unwrap();
        assert!((r.statistic - 0.3).abs() < 1e-12);
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn batch_export_layout() {
        let b = sample_readouts(&cfg(3, 0.0, 0.0, 0.0), 2, 5, StorageMode::Full).unwrap();
        let mut buf = Vec::new();
        b.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[..3].iter().all(|l| l.starts_with('#')));
        assert!(lines[2].contains("seed=5"));
        assert_eq!(&lines[3..], &["0 1 1 1", "1 1 1 1"]);
    }

    #[test]
    fn beta_independent_model_gives_zero_fisher() {
        let m = SpectralModel::ohmic(0.0, 10.0, 0.1, 1.0).unwrap();
        let f = empirical_fisher(&m, 1.0, 0.3, 4, 0.0, 2000, 1, 1e-3).unwrap();
        assert_eq!(f.fisher, 0.0);
        assert_eq!(f.ci_low, 0.0);
    }
}
