use proptest::prelude::*;
use std::f64::consts::FRAC_PI_2;
use thermometry_core::decoherence::{decay_factors, DecayFactors};
use thermometry_core::distributions::{collective_field_distribution, product_distribution, MeasurementConfig};
use thermometry_core::estimation::*;
use thermometry_core::presets::*;
use thermometry_core::sampling::{empirical_fisher, empirical_moments, sample_readouts, StorageMode};

fn config(n: usize, theta: f64, beta: f64, t: f64) -> MeasurementConfig {
    MeasurementConfig::new(n, theta, decay_factors(&reference_model(), beta, t).unwrap()).unwrap()
}

#[test]
fn beta_independent_distribution_has_zero_fisher() {
    let m = reference_model().with_omega_co(0.0).unwrap();
    // only white noise left once α = 0
    let flat = thermometry_core::spectral::SpectralModel::ohmic(0.0, 10.0, 0.1, 1.0).unwrap();
    assert_eq!(fisher_exact(DistributionFamily::CollectiveField, 4, 0.0, &flat, 1.0, 0.3).unwrap().fisher, 0.0);
    assert!(fisher_exact(DistributionFamily::Product, 4, 0.0, &m, 1.0, 0.3).unwrap().fisher > 0.0);
}

#[test]
fn product_law_fisher_is_additive() {
    let m = reference_model();
    let single = fisher_exact(DistributionFamily::Product, 1, 0.0, &m, HIGH_T_BETA, 0.1).unwrap().fisher;
    for n in [2usize, 5, 16] {
        let many = fisher_exact(DistributionFamily::Product, n, 0.0, &m, HIGH_T_BETA, 0.1).unwrap().fisher;
        assert!((many - n as f64 * single).abs() <= 1e-6 * many);
    }
}

#[test]
fn matched_observable_saturates_fisher_at_theta_zero() {
    let beta = HIGH_T_BETA;
    let db = 1e-3 * beta;
    let c0 = config(10, 0.0, beta, 0.1);
    let c1 = config(10, 0.0, beta + db, 0.1);
    let (d0, d1) = (product_distribution(&c0).unwrap(), product_distribution(&c1).unwrap());
    let r = snr(Observable::S, &d0, &d1, db).unwrap();
    let f = independent_fisher(10, &c0.decay).fisher;
    assert!((r.precision.powi(2) * f - 1.0).abs() < 5e-3);
}

#[test]
fn monte_carlo_snr_matches_analytic() {
    let beta = HIGH_T_BETA;
    let db = 0.05 * beta;
    let (c0, c1) = (config(8, 0.0, beta, 0.1), config(8, 0.0, beta + db, 0.1));
    let analytic = snr(
        Observable::S,
        &collective_field_distribution(&c0).unwrap(),
        &collective_field_distribution(&c1).unwrap(),
        db,
    )
    .unwrap();
    let (b0, b1) = (
        empirical_moments(&sample_readouts(&c0, 100_000, 1, StorageMode::Compressed).unwrap()).unwrap(),
        empirical_moments(&sample_readouts(&c1, 100_000, 2, StorageMode::Compressed).unwrap()).unwrap(),
    );
    let shift = b1.mean_s - b0.mean_s;
    let se = (b0.se_mean_s.powi(2) + b1.se_mean_s.powi(2)).sqrt();
    assert!((shift - analytic.mean_shift).abs() <= 3.0 * se);
    let mc_snr = shift.abs() / b0.var_s.sqrt();
    assert!((mc_snr - analytic.snr).abs() <= 3.0 * se / analytic.std_dev + 0.01 * analytic.snr);
}

#[test]
fn empirical_fisher_tracks_exact_and_analytic() {
    let m = reference_model();
    let (beta, t) = (HIGH_T_BETA, 0.1);
    let exact = fisher_exact(DistributionFamily::Enumerated, 8, 0.0, &m, beta, t).unwrap().fisher;
    let emp = empirical_fisher(&m, beta, t, 8, 0.0, 100_000, 5, 1e-3 * beta).unwrap();
    assert!((emp.fisher - exact).abs() <= 3.0 * emp.standard_error, "{emp:?} vs {exact}");

    let t = LOW_T_TIME_CORRELATION;
    let analytic = fisher_low_t(&config(64, FRAC_PI_2, LOW_T_BETA, t)).unwrap().fisher;
    let emp = empirical_fisher(&m, LOW_T_BETA, t, 64, FRAC_PI_2, 100_000, 6, 1e-3 * LOW_T_BETA).unwrap();
    assert!((emp.fisher - analytic).abs() <= 3.0 * emp.standard_error, "{emp:?} vs {analytic}");
}

#[test]
fn optimize_time_on_a_single_point() {
    let r = optimize_time(&reference_model(), LOW_T_BETA, 4, 0.0, FisherObjective::Analytic(Regime::LowTemperature), &[0.3]).unwrap();
    assert_eq!(r.time, 0.3);
    assert!(optimize_time(&reference_model(), LOW_T_BETA, 4, 0.0, FisherObjective::Analytic(Regime::LowTemperature), &[]).is_err());
}

#[test]
fn regime_heuristic() {
    assert_eq!(Regime::heuristic(LOW_T_BETA, OMEGA_CO), Regime::LowTemperature);
    assert_eq!(Regime::heuristic(HIGH_T_BETA, OMEGA_CO), Regime::HighTemperature);
}

#[test]
fn exact_fisher_stops_growing_quadratically_near_crossover() {
    let m = reference_model();
    let t = LOW_T_TIME_CORRELATION;
    let d = decay_factors(&m, LOW_T_BETA, t).unwrap();
    let n_star = (2.0 * d.gamma_total).exp() / (2.0 * d.gamma_l);
    // local log-log slope between successive doublings; the knee is where it falls below 1
    let fisher = |n: usize| {
        fisher_exact(DistributionFamily::CollectiveField, n, FRAC_PI_2, &m, LOW_T_BETA, t).unwrap().fisher
    };
    let mut n = (n_star / 16.0).round() as usize;
    let mut f = fisher(n);
    let knee = loop {
        assert!(n as f64 <= 4.0 * n_star, "Fisher keeps growing quadratically past 4 N*");
        let f2 = fisher(2 * n);
        if (f2 / f).log2() < 1.0 {
            break (2.0f64).sqrt() * n as f64;
        }
        (n, f) = (2 * n, f2);
    };
    assert!(knee > n_star / 4.0 && knee < 4.0 * n_star, "knee {knee} vs {n_star}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn analytic_fisher_is_nonnegative(
        gl in 0.0f64..1.0, gh in 0.0f64..3.0, dl in -10.0f64..0.0, dh in -10.0f64..0.0, n in 1usize..10_000,
    ) {
        let d = DecayFactors::from_parts(gl, gh, dl, dh);
        for theta in [0.0, FRAC_PI_2] {
            let c = MeasurementConfig::new(n, theta, d).unwrap();
            prop_assert!(fisher_high_t(&c).unwrap().fisher >= 0.0);
            prop_assert!(fisher_low_t(&c).unwrap().fisher >= 0.0);
        }
    }

    #[test]
    fn cold_correlation_fisher_is_monotone_and_bounded(
        gl in 1e-6f64..1e-2, gh in 0.1f64..2.0, dl in -1.0f64..-1e-6, n in 1usize..1_000_000,
    ) {
        let d = DecayFactors::from_parts(gl, gh, dl, 0.0);
        let f = |n| fisher_low_t(&MeasurementConfig::new(n, FRAC_PI_2, d).unwrap()).unwrap().fisher;
        let limit = dl * dl / (2.0 * gl * gl);
        prop_assert!(f(n + 1) >= f(n));
        prop_assert!(f(n) < limit);
    }

    #[test]
    fn hot_independent_beats_correlation(n in 1usize..=128) {
        let hi0 = fisher_high_t(&config(n, 0.0, HIGH_T_BETA, HIGH_T_TIME_INDEPENDENT)).unwrap().fisher;
        let c = config(n, FRAC_PI_2, HIGH_T_BETA, HIGH_T_TIME_CORRELATION);
        let hi1 = fisher_high_t(&c).unwrap().fisher;
        prop_assert!(hi0 > hi1);
        prop_assert!(hi1 <= 2.0 * c.decay.d_gamma_h_d_beta.powi(2));
    }
}
