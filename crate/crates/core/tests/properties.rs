use approx::assert_relative_eq;
use proptest::prelude::*;

use pme_core::barriers::*;
use pme_core::comparison::*;
use pme_core::geometry::sigma_of_gamma;
use pme_core::profile::*;
use pme_core::ModelManifold;

proptest! {
    #[test]
    fn sigma_is_nonincreasing_in_gamma(g1 in -10.0f64..2.0, g2 in -10.0f64..2.0) {
        let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
        prop_assert!(sigma_of_gamma(lo) >= sigma_of_gamma(hi));
        prop_assert!(sigma_of_gamma(hi) <= 2.0 && sigma_of_gamma(hi) >= 0.0);
    }

    #[test]
    fn weighted_norm_is_nonincreasing_in_r(
        coeffs in prop::collection::vec(0.0f64..2.0, 4),
        r1 in 0.5f64..3.0,
        dr in 0.0f64..3.0,
    ) {
        let radii: Vec<f64> = (0..=400).map(|k| k as f64 * 0.1).collect();
        let f: Vec<f64> = radii
            .iter()
            .map(|&x| coeffs[0] + coeffs[1] * x + coeffs[2] * (x * 0.3).sin().abs() + coeffs[3] * (-x).exp())
            .collect();
        let a = weighted_sup_norm(&f, &radii, &WeightedNorm { r: r1, sigma: 1.0, m: 2.0 }).unwrap();
        let b = weighted_sup_norm(&f, &radii, &WeightedNorm { r: r1 + dr, sigma: 1.0, m: 2.0 }).unwrap();
        prop_assert!(b.value <= a.value * (1.0 + 1e-12));
    }

    #[test]
    fn existence_time_scales_like_the_norm(norm in 0.01f64..100.0, a in 0.01f64..1.0, m in 1.1f64..4.0, k in 0.1f64..10.0) {
        let t1 = existence_time(norm, a, m).unwrap();
        let t2 = existence_time(k * norm, a, m).unwrap();
        prop_assert!((t2 / t1 - k.powf(1.0 - m)).abs() <= 1e-12 * k.powf(1.0 - m));
    }

    #[test]
    fn super_amplitude_decreases_with_the_bound(c in 0.1f64..10.0, dc in 0.01f64..5.0, m in 1.2f64..4.0, sigma in 0.0f64..2.0) {
        prop_assert!(super_amplitude(c + dc, sigma, m).unwrap() < super_amplitude(c, sigma, m).unwrap());
    }
}

/// Separable evolution `u = (1 − t/T)^{−1/(m−1)} W`: at `t = 0` the time
/// derivative `W / ((m−1)T)` equals `Δ W^m`, so the barrier residual sign of
/// a profile sample is zero up to discretisation.
#[test]
fn separable_sign_identity_on_profiles() {
    let man = ModelManifold::hyperbolic(3).unwrap();
    for (alpha, m) in [(1.0, 2.0), (0.5, 3.0), (2.0, 1.5)] {
        let p = integrate_profile(&man, alpha, m, 20.0).unwrap();
        let grid = pme_core::RadialGrid::new(&man, 15.0, 600).unwrap();
        let v = p.sample_on(&grid).unwrap().iter().map(|w| w.powf(m)).collect::<Vec<_>>();
        let mut ext = v.clone();
        ext.push(p.v_at(grid.ghost_center()).unwrap());
        let lap = man.radial_laplacian(&ext, &grid).unwrap();
        for (i, l) in lap.iter().enumerate() {
            let w = v[i].powf(1.0 / m);
            assert!((l * (m - 1.0) * p.t_horizon - w).abs() <= 1e-3 * w, "α={alpha} m={m} i={i}");
        }
    }
}

#[test]
fn sectional_upper_profile_exponent() {
    // γ = 1 gives σ = 1/2; with m = 3 the target growth is σ/(m−1) = 1/4.
    let man = ModelManifold::new(3, build_psi_star_upper(1.0, 1.0, 1.0, 3, 1000.0).unwrap()).unwrap();
    let p = integrate_profile(&man, 1.0, 3.0, 1000.0).unwrap();
    let fit = asymptotic_exponent(&p).unwrap();
    assert!((fit.exponent - 0.25).abs() <= 0.05, "exponent {}", fit.exponent);
}

#[test]
fn hyperbolic_certificate_constants() {
    let man = ModelManifold::hyperbolic(3).unwrap();
    let grid = certificate_grid(60.0);
    let up = certify_coeff_bound(&man, Side::Upper, 1.0, &grid).unwrap();
    // b ρ (1+ρ)^{σ−2} = 2ρ coth ρ / (1 + ρ), which stays below 2.
    let exact = grid.iter().map(|&r| 2.0 * r / r.tanh() / (1.0 + r)).fold(f64::MIN, f64::max);
    assert_relative_eq!(up.constant, exact, max_relative = 1e-9);
    assert!(up.constant < 2.0);
    assert!(up.is_valid());
    let lo = certify_coeff_bound(&man, Side::Lower, 1.0, &certificate_grid(60.0)).unwrap();
    assert!(lo.constant < up.constant);
    assert_relative_eq!(sigma_of_gamma(0.0), 1.0);
}
