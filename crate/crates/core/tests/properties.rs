//! Randomized properties across modules.

use proptest::prelude::*;
use supergauss::distributions::{sample, Dataset, SourceSpec};
use supergauss::effective_rank::effective_rank_exact;
use supergauss::geometry::sample_sphere;
use supergauss::isotropy::angular_covariance;
use supergauss::rng::stream;
use supergauss::verifier::{certify, default_grid, fit_parameters, median_abs, tail_curve};

fn gaussian(n: usize, seed: u64, count: usize) -> Dataset {
    sample(&SourceSpec::gaussian(vec![1.0; n]), seed, count).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fitted_parameters_certify(n in 1usize..6, seed in any::<u64>(), length in 0.5f64..2.0) {
        let data = gaussian(n, seed, 4000);
        let theta = sample_sphere(&mut stream(seed, 9), n).unwrap();
        let m = median_abs(&data, &theta).unwrap();
        let curve = tail_curve(&data, &theta, m, &default_grid(length, 0.25).unwrap()).unwrap();
        let (alpha, beta) = fit_parameters(&curve, length).unwrap();
        prop_assert!(certify(&curve, alpha, beta, length).unwrap().pass);
    }

    #[test]
    fn weaker_envelopes_keep_passing(
        seed in any::<u64>(),
        alpha in 0.01f64..0.5,
        beta in 0.5f64..5.0,
        shrink in 0.1f64..1.0,
        widen in 1.0f64..4.0,
    ) {
        let data = gaussian(3, seed, 3000);
        let theta = sample_sphere(&mut stream(seed, 9), 3).unwrap();
        let m = median_abs(&data, &theta).unwrap();
        let curve = tail_curve(&data, &theta, m, &default_grid(2.0, 0.25).unwrap()).unwrap();
        if certify(&curve, alpha, beta, 2.0).unwrap().pass {
            prop_assert!(certify(&curve, alpha * shrink, beta / widen, 2.0).unwrap().pass);
            prop_assert!(certify(&curve, alpha, beta, 1.0).unwrap().pass);
        }
    }

    #[test]
    fn median_is_scale_equivariant(n in 1usize..6, seed in any::<u64>(), c in 1e-3f64..1e3) {
        let data = gaussian(n, seed, 501);
        let theta = sample_sphere(&mut stream(seed, 9), n).unwrap();
        let m = median_abs(&data, &theta).unwrap();
        let mc = median_abs(&data.scaled(c).unwrap(), &theta).unwrap();
        prop_assert!((mc - c * m).abs() <= 1e-12 * c * m.max(1e-300));
    }

    #[test]
    fn effective_rank_is_at_least_inverse_angular_spectrum(
        n in 2usize..5,
        atoms in 2usize..7,
        seed in any::<u64>(),
    ) {
        // P(E) ≤ dim E · λ_max for every subspace E, hence d* ≥ 1/λ_max.
        let mut rng = stream(seed, 0);
        let rows: Vec<f64> = (0..atoms)
            .flat_map(|_| sample_sphere(&mut rng, n).unwrap().into_inner())
            .collect();
        let total = (atoms * (atoms + 1) / 2) as f64;
        let weights: Vec<f64> = (1..=atoms).map(|i| i as f64 / total).collect();
        let data = Dataset::weighted(n, rows, weights).unwrap();
        let d_star = effective_rank_exact(&data).unwrap().d_star;
        let lambda = angular_covariance(&data).lambda_max();
        prop_assert!(d_star >= 1.0 / lambda - 1e-9, "d* {} λ {}", d_star, lambda);
    }
}
