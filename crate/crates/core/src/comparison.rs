//! Comparison warps generated from curvature bounds, and grid certificates
//! for the two-sided bounds
//!
//! ```text
//!   C″ / (ρ (1+ρ)^{σ−2})  ≤  b(ρ)  ≤  C′ / (ρ (1+ρ)^{σ−2})
//! ```
//!
//! on the radial Laplacian coefficient `b = (N−1) ψ'/ψ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ModelManifold, WarpFunction, WarpOde};

/// The warp with `(N−1) ψ''/ψ = C₀ κ_γ(ρ)`, i.e. the model whose radial Ricci
/// curvature equals the lower bound `−C₀ κ_γ`. For `γ ≥ 0`, `κ_γ = 1 + ρ^γ`;
/// for `γ < 0` the decaying `(1+ρ)^γ` is used so that the origin stays regular.
pub fn build_psi_star_lower(c0: f64, gamma: f64, n: usize, rho_max: f64) -> Result<WarpFunction> {
    if !(c0 > 0.0) {
        return Err(Error::param("c0", "must be positive"));
    }
    if !(gamma <= 2.0) {
        return Err(Error::param("gamma", "must be at most 2"));
    }
    if n < 2 {
        return Err(Error::param("n", "dimension must be at least 2"));
    }
    if !(rho_max > 0.0) {
        return Err(Error::param("rho_max", "must be positive"));
    }
    WarpFunction::from_ode(
        WarpOde::RicciLower {
            coeff: c0 / (n - 1) as f64,
            gamma,
        },
        rho_max,
    )
}

/// The warp equal to `ρ` on `(0, R₁]` and solving `ψ'' = C₁ ρ^γ ψ` beyond,
/// matched in `C¹` at `R₁`.
pub fn build_psi_star_upper(
    c1: f64,
    gamma: f64,
    r1: f64,
    n: usize,
    rho_max: f64,
) -> Result<WarpFunction> {
    if !(c1 > 0.0) {
        return Err(Error::param("c1", "must be positive"));
    }
    if !(r1 > 0.0) {
        return Err(Error::param("r1", "must be positive"));
    }
    if !(gamma > -2.0 && gamma < 2.0) {
        return Err(Error::param("gamma", "must lie in (-2, 2)"));
    }
    if n < 2 {
        return Err(Error::param("n", "dimension must be at least 2"));
    }
    if !(rho_max > r1) {
        return Err(Error::param("rho_max", "must exceed r1"));
    }
    WarpFunction::from_ode(WarpOde::SectionalUpper { c1, gamma, r1 }, rho_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Upper,
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffBoundCertificate {
    pub side: Side,
    pub constant: f64,
    pub sigma: f64,
    pub max_violation: f64,
    pub grid_span: (f64, f64),
}

impl CoeffBoundCertificate {
    pub fn is_valid(&self) -> bool {
        self.max_violation <= 0.0 && self.constant > 0.0 && self.constant.is_finite()
    }
}

/// `n` geometrically spaced radii from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let q = (hi / lo).ln() / (n - 1) as f64;
    let mut g: Vec<f64> = (0..n).map(|i| lo * (q * i as f64).exp()).collect();
    g[n - 1] = hi;
    g
}

/// Default certificate grid: 400 geometric points on `[1e−2, rho_max]`.
pub fn certificate_grid(rho_max: f64) -> Vec<f64> {
    geometric_grid(1e-2, rho_max, 400)
}

/// Extremal constant in `b(ρ) ρ (1+ρ)^{σ−2} ≤ C′` (Upper) or `≥ C″` (Lower)
/// over the sampled radii.
pub fn certify_coeff_bound(
    m: &ModelManifold,
    side: Side,
    sigma: f64,
    grid: &[f64],
) -> Result<CoeffBoundCertificate> {
    if grid.is_empty() || grid[0] <= 0.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("grid", "must be nonempty, positive and increasing"));
    }
    let scaled = grid
        .iter()
        .map(|&r| Ok(m.laplacian_coeff(r)? * r * (1.0 + r).powf(sigma - 2.0)))
        .collect::<Result<Vec<f64>>>()?;
    let (constant, max_violation) = match side {
        Side::Upper => {
            let c = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (c, scaled.iter().map(|v| v - c).fold(f64::NEG_INFINITY, f64::max))
        }
        Side::Lower => {
            let c = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
            (c, scaled.iter().map(|v| c - v).fold(f64::NEG_INFINITY, f64::max))
        }
    };
    Ok(CoeffBoundCertificate {
        side,
        constant,
        sigma,
        max_violation,
        grid_span: (grid[0], grid[grid.len() - 1]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sigma_of_gamma;
    use approx::assert_relative_eq;

    #[test]
    fn lower_warp_matches_sinh_closed_form() {
        let n = 3;
        let w = build_psi_star_lower((n - 1) as f64, 0.0, n, 12.0).unwrap();
        let s2 = 2f64.sqrt();
        for k in 1..=1000 {
            let r = k as f64 * 0.01;
            let exact = (s2 * r).sinh() / s2;
            let got = w.psi(r).unwrap();
            assert!((got / exact - 1.0).abs() < 1e-6, "rho={r}: {got} vs {exact}");
        }
    }

    #[test]
    fn lower_warp_quadratic_log_growth_for_gamma_two() {
        // q ≈ 2ρ² ⇒ log ψ ≈ ρ²/√2.
        let n = 3;
        let w = build_psi_star_lower(2.0 * (n - 1) as f64, 2.0, n, 80.0).unwrap();
        let r40 = w.log_psi(40.0).unwrap() / 1600.0;
        let r80 = w.log_psi(80.0).unwrap() / 6400.0;
        assert!(r80 > 0.0 && r80 < 1.0);
        assert!((r80 - 0.5f64.sqrt()).abs() < 2e-3, "{r80}");
        assert!((r40 - r80).abs() < 5e-3);
    }

    #[test]
    fn lower_warp_polynomial_growth_for_gamma_minus_two() {
        let (n, c0) = (3, 3.0);
        let c = c0 / (n - 1) as f64;
        let delta = (1.0 + (1.0 + 4.0 * c).sqrt()) / 2.0;
        let w = build_psi_star_lower(c0, -2.0, n, 2e4).unwrap();
        let a = w.psi(1e3).unwrap() / 1e3f64.powf(delta);
        let b = w.psi(2e4).unwrap() / 2e4f64.powf(delta);
        assert!((a / b - 1.0).abs() < 1e-2, "{a} vs {b}");
        let m = ModelManifold::new(n, w).unwrap();
        assert_relative_eq!(m.laplacian_coeff(2e4).unwrap() * 2e4, 2.0 * delta, max_relative = 1e-3);
    }

    #[test]
    fn upper_warp_exponential_piece() {
        let w = build_psi_star_upper(1.0, 0.0, 1.0, 3, 15.0).unwrap();
        for k in 1..=140 {
            let r = 1.0 + k as f64 * 0.1;
            let exact = (r - 1.0).cosh() + (r - 1.0).sinh();
            assert!((w.psi(r).unwrap() / exact - 1.0).abs() < 1e-8);
        }
        for r in [0.1, 0.5, 1.0] {
            assert_eq!(w.sectional_radial(r).unwrap(), 0.0);
            assert_relative_eq!(w.psi(r).unwrap(), r, max_relative = 1e-14);
        }
    }

    #[test]
    fn upper_warp_liouville_green_growth() {
        let w = build_psi_star_upper(1.0, 1.0, 1.0, 3, 2000.0).unwrap();
        let ratio = w.log_psi(2000.0).unwrap() / 2000f64.powf(1.5);
        assert!((ratio - 2.0 / 3.0).abs() < 1e-3, "{ratio}");
    }

    #[test]
    fn euclidean_upper_certificate_is_exact() {
        let m = ModelManifold::euclidean(3).unwrap();
        let c = certify_coeff_bound(&m, Side::Upper, 2.0, &certificate_grid(100.0)).unwrap();
        assert_relative_eq!(c.constant, 2.0, max_relative = 1e-14);
        assert!(c.is_valid());
    }

    #[test]
    fn hyperbolic_lower_certificate_matches_sweep() {
        let m = ModelManifold::hyperbolic(2).unwrap();
        let grid = certificate_grid(50.0);
        let c = certify_coeff_bound(&m, Side::Lower, 1.0, &grid).unwrap();
        // Independent oracle: dense sweep of ρ coth ρ/(1+ρ) over the same span.
        let oracle = (0..=200_000)
            .map(|k| {
                let r = 1e-2 * (k as f64 / 200_000.0 * (5000f64).ln()).exp();
                r / r.tanh() / (1.0 + r)
            })
            .fold(f64::INFINITY, f64::min);
        assert!(c.constant > 0.0);
        assert!((c.constant - oracle).abs() < 1e-3, "{} vs {oracle}", c.constant);
        assert!(c.is_valid());
    }

    #[test]
    fn certificates_exist_and_are_stable_under_doubling() {
        let n = 3;
        for gamma in [-1.0, 0.0, 1.0, 1.5] {
            let sigma = sigma_of_gamma(gamma);
            let up = |rmax: f64| {
                let w = build_psi_star_lower(1.0, gamma, n, rmax).unwrap();
                let m = ModelManifold::new(n, w).unwrap();
                certify_coeff_bound(&m, Side::Upper, sigma, &certificate_grid(rmax)).unwrap()
            };
            let (a, b) = (up(100.0), up(200.0));
            assert!(a.is_valid() && b.is_valid());
            assert!((b.constant / a.constant - 1.0).abs() < 0.05, "gamma={gamma}");
            let low = |rmax: f64| {
                let w = build_psi_star_upper(1.0, gamma, 1.0, n, rmax).unwrap();
                let m = ModelManifold::new(n, w).unwrap();
                certify_coeff_bound(&m, Side::Lower, sigma, &certificate_grid(rmax)).unwrap()
            };
            let (a, b) = (low(100.0), low(200.0));
            assert!(a.is_valid() && a.constant > 0.0);
            assert!((b.constant / a.constant - 1.0).abs() < 0.05, "gamma={gamma}");
        }
    }

    #[test]
    fn sturm_monotonicity_in_c0() {
        let lo = build_psi_star_lower(1.0, 0.5, 3, 20.0).unwrap();
        let hi = build_psi_star_lower(2.0, 0.5, 3, 20.0).unwrap();
        for k in 1..200 {
            let r = k as f64 * 0.1;
            assert!(hi.log_derivative(r).unwrap() >= lo.log_derivative(r).unwrap());
        }
    }

    #[test]
    fn tables_satisfy_their_ode() {
        for w in [
            build_psi_star_lower(1.0, -3.0, 3, 50.0).unwrap(),
            build_psi_star_lower(1.0, 1.0, 3, 50.0).unwrap(),
            build_psi_star_upper(1.0, 0.5, 1.0, 3, 50.0).unwrap(),
        ] {
            assert!(w.table().unwrap().ode_residual() <= 1e-8);
            assert!(w.class_report().admissible);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_psi_star_lower(0.0, 0.0, 3, 10.0).is_err());
        assert!(build_psi_star_lower(1.0, 2.5, 3, 10.0).is_err());
        assert!(build_psi_star_upper(1.0, 2.0, 1.0, 3, 10.0).is_err());
        assert!(build_psi_star_upper(1.0, 0.0, 1.0, 3, 0.5).is_err());
    }

    #[test]
    fn certificate_serializes() {
        let m = ModelManifold::euclidean(3).unwrap();
        let c = certify_coeff_bound(&m, Side::Upper, 2.0, &certificate_grid(10.0)).unwrap();
        let js = serde_json::to_value(&c).unwrap();
        assert_eq!(js["side"], "Upper");
        assert!(js["grid_span"].is_array());
    }
}
