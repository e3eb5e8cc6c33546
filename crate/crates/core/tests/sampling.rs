use std::f64::consts::FRAC_PI_2;
use thermometry_core::decoherence::{decay_factors, DecayFactors};
use thermometry_core::distributions::{total_variation, MeasurementConfig};
use thermometry_core::oracle::{exact_p_of_s, DecayMatrix};
use thermometry_core::presets::*;
use thermometry_core::sampling::*;

fn low_t(n: usize, theta: f64) -> MeasurementConfig {
    MeasurementConfig::new(n, theta, decay_factors(&reference_model(), LOW_T_BETA, LOW_T_TIME_CORRELATION).unwrap())
        .unwrap()
}

#[test]
fn same_seed_same_batch() {
    let c = low_t(8, FRAC_PI_2);
    let a = sample_readouts(&c, 10_000, 99, StorageMode::Full).unwrap();
    let b = sample_readouts(&c, 10_000, 99, StorageMode::Full).unwrap();
    assert_eq!(a.shots, b.shots);
    let other = sample_readouts(&c, 10_000, 100, StorageMode::Full).unwrap();
    assert_ne!(a.shots, other.shots);
}

#[test]
fn distinct_seeds_are_statistically_compatible() {
    let c = MeasurementConfig::new(10, 0.3, DecayFactors::from_parts(0.05, 0.4, 0.0, 0.0)).unwrap();
    let a = sample_readouts(&c, 50_000, 1, StorageMode::Compressed).unwrap();
    let b = sample_readouts(&c, 50_000, 2, StorageMode::Compressed).unwrap();
    let ks = ks_two_sample(&a.s_values(), &b.s_values()).unwrap();
    assert!(ks.p_value > 1e-3, "{ks:?}");
}

#[test]
fn independent_axis_mean_matches_decay() {
    let c = MeasurementConfig::new(6, 0.0, DecayFactors::from_parts(0.02, 0.7, 0.0, 0.0)).unwrap();
    let m = empirical_moments(&sample_readouts(&c, 100_000, 17, StorageMode::Compressed).unwrap()).unwrap();
    let expected = (-0.72f64).exp();
    assert!((m.mean_s / 6.0 - expected).abs() <= 3.0 * m.se_mean_s / 6.0);
}

#[test]
fn correlation_axis_mean_vanishes() {
    let m = empirical_moments(&sample_readouts(&low_t(8, FRAC_PI_2), 100_000, 3, StorageMode::Compressed).unwrap())
        .unwrap();
    assert!(m.mean_s.abs() <= 3.0 * m.se_mean_s);
}

#[test]
fn full_records_give_matching_pair_matrix() {
    let c = MeasurementConfig::new(4, FRAC_PI_2, DecayFactors::from_parts(0.3, 0.2, 0.0, 0.0)).unwrap();
    let batch = sample_readouts(&c, 200_000, 8, StorageMode::Full).unwrap();
    let corr = pair_correlation_matrix(&batch).unwrap();
    let mean_offdiag: f64 = (0..4)
        .flat_map(|i| (0..4).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| corr[i][j])
        .sum::<f64>()
        / 12.0;
    let m = empirical_moments(&batch).unwrap();
    assert!((mean_offdiag - m.pair_correlator).abs() < 1e-12);
    // ⟨s_i s_j⟩ = e^{-2Γ_H} (1 - e^{-4Γ_L}) / 2 exactly at θ = π/2
    let exact = (-0.4f64).exp() * (1.0 - (-1.2f64).exp()) / 2.0;
    assert!((m.pair_correlator - exact).abs() <= 3.0 * m.se_pair_correlator);
}

#[test]
fn histogram_converges_to_enumeration() {
    let (gl, gh, n) = (0.1, 0.5, 6);
    let c = MeasurementConfig::new(n, 0.9, DecayFactors::from_parts(gl, gh, 0.0, 0.0)).unwrap();
    let exact = exact_p_of_s(&DecayMatrix::collective(n, gl, gh).unwrap(), 0.9).unwrap();
    for (m, seed) in [(10_000usize, 1u64), (100_000, 2), (1_000_000, 3)] {
        let tv = total_variation(&sample_readouts(&c, m, seed, StorageMode::Compressed).unwrap().histogram(), &exact);
        assert!(tv <= 3.0 / (m as f64).sqrt(), "M={m}: TV={tv}");
    }
}

#[test]
fn export_round_trips_s_values() {
    let c = low_t(5, 0.0);
    let batch = sample_readouts(&c, 300, 4, StorageMode::Compressed).unwrap();
    let mut buf = Vec::new();
    batch.write_text(&mut buf).unwrap();
    let parsed: Vec<i64> = String::from_utf8(buf)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split_whitespace().nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(parsed, batch.s_values());
}
