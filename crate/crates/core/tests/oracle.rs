use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::FRAC_PI_2;
use thermometry_core::decoherence::DecayFactors;
use thermometry_core::distributions::{collective_field_distribution, two_thermometer_state, MeasurementConfig};
use thermometry_core::oracle::{exact_p_of_s, exact_probability, exact_reduced_state, DecayMatrix, Enumerator};

fn general_matrix() -> DecayMatrix {
    DecayMatrix::new(
        4,
        vec![
            0.6, 0.2, 0.1, 0.05, //
            0.2, 0.5, 0.15, 0.1, //
            0.1, 0.15, 0.4, 0.2, //
            0.05, 0.1, 0.2, 0.7,
        ],
    )
    .unwrap()
}

/// Average of `Π_j (1 + s_j cos(θ + 2φ_j))/2` over `φ ~ N(0, Γ/2)`.
fn auxiliary_field_estimate(gamma: &DecayMatrix, theta: f64, readout: &[i8], samples: usize) -> (f64, f64) {
    let n = gamma.n();
    let cov = DMatrix::from_fn(n, n, |i, j| 0.5 * gamma.get(i, j));
    let root = cov.cholesky().expect("positive definite test matrix").l();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let z = DMatrix::from_fn(n, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
        let phi = &root * z;
        let v: f64 = readout
            .iter()
            .enumerate()
            .map(|(j, &s)| 0.5 * (1.0 + s as f64 * (theta + 2.0 * phi[j]).cos()))
            .product();
        sum += v;
        sum_sq += v * v;
    }
    let m = samples as f64;
    let mean = sum / m;
    (mean, ((sum_sq / m - mean * mean) / (m - 1.0)).sqrt())
}

#[test]
fn auxiliary_field_average_converges_to_enumeration() {
    let g = general_matrix();
    for &theta in &[0.0, 0.4, FRAC_PI_2] {
        for readout in [[1i8, 1, 1, 1], [1, -1, 1, -1], [-1, -1, 1, 1]] {
            let exact = exact_probability(&g, theta, &readout).unwrap();
            let (mc, se) = auxiliary_field_estimate(&g, theta, &readout, 200_000);
            assert!((mc - exact).abs() <= 3.0 * se, "θ={theta} {readout:?}: {mc} ± {se} vs {exact}");
        }
    }
}

#[test]
fn enumeration_matches_collective_field_average() {
    for &(n, theta, gl, gh) in &[(5usize, 0.0, 0.05, 0.4), (6, FRAC_PI_2, 0.02, 1.0), (4, 1.1, 0.3, 0.2)] {
        let config = MeasurementConfig::new(n, theta, DecayFactors::from_parts(gl, gh, 0.0, 0.0)).unwrap();
        let exact = Enumerator::default().distribution(&config).unwrap().s_table().unwrap();
        let quad = collective_field_distribution(&config).unwrap().s_table().unwrap();
        for (a, b) in exact.iter().zip(&quad) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn reduced_state_expansion_agrees_to_first_order() {
    for &gl in &[1e-2, 1e-3] {
        let gh = 0.5;
        let exact = exact_reduced_state(&DecayMatrix::collective(2, gl, gh).unwrap()).unwrap();
        let expanded = two_thermometer_state(&DecayFactors::from_parts(gl, gh, 0.0, 0.0));
        let diff = (exact - expanded).map(|z| z.norm()).max();
        assert!(diff < 0.5 * (2.0 * gl).powi(2), "Γ_L={gl}: {diff}");
    }
}

fn eigenvalues(rho: &Matrix4<Complex64>) -> Vec<f64> {
    assert!((rho - rho.adjoint()).map(|z| z.norm()).max() < 1e-15);
    // real symmetric here: every entry is real
    let re = rho.map(|z| z.re);
    re.symmetric_eigen().eigenvalues.iter().copied().collect()
}

#[test]
fn expanded_state_is_physical_in_checked_region() {
    // Γ_L ≤ 0.1 e^{-2Γ}, Γ_H ∈ [0, 3]
    for i in 0..=30 {
        let gh = 0.1 * i as f64;
        for k in 0..=10 {
            let gl = 0.1 * (k as f64 / 10.0) * (-2.0 * gh).exp() * 0.8;
            let rho = two_thermometer_state(&DecayFactors::from_parts(gl, gh, 0.0, 0.0));
            assert!((rho.trace().re - 1.0).abs() < 1e-15);
            assert!(eigenvalues(&rho).iter().all(|&e| e > -1e-12), "Γ_L={gl} Γ_H={gh}");
        }
    }
}

#[test]
fn exact_state_is_physical() {
    for &(gl, gh) in &[(0.0, 0.0), (0.5, 0.0), (1.0, 2.0), (0.01, 0.3)] {
        let rho = exact_reduced_state(&DecayMatrix::collective(2, gl, gh).unwrap()).unwrap();
        assert!(eigenvalues(&rho).iter().all(|&e| e > -1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn relabelling_thermometers_changes_nothing(
        perm_seed in 0u64..1000, theta in 0.0f64..FRAC_PI_2, bits in 0u32..16,
    ) {
        let g = general_matrix();
        let mut perm: Vec<usize> = (0..4).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(perm_seed);
        for i in (1..4).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let readout: Vec<i8> = (0..4).map(|j| if bits >> j & 1 == 0 { 1 } else { -1 }).collect();
        let permuted_readout: Vec<i8> = perm.iter().map(|&p| readout[p]).collect();
        let a = exact_probability(&g, theta, &readout).unwrap();
        let b = exact_probability(&g.permuted(&perm).unwrap(), theta, &permuted_readout).unwrap();
        prop_assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn marginal_over_s_is_normalised(
        gl in 0.0f64..0.5, gh in 0.0f64..2.0, theta in 0.0f64..FRAC_PI_2, n in 1usize..8,
    ) {
        let p = exact_p_of_s(&DecayMatrix::collective(n, gl, gh).unwrap(), theta).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&v| v >= -1e-15));
    }
}
