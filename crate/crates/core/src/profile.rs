//! Stationary blow-up profiles.
//!
//! A separable solution `(1 − t/T)^{−1/(m−1)} W(ρ)` of the PME requires
//! `Δ(W^m) = W / ((m−1)T)`. With the normalisation `T = 1/(m−1)` and
//! `V = W^m` this is the radial Cauchy problem
//!
//! ```text
//!   V'' + b(ρ) V' = V^{1/m},   V(0) = α^m,  V'(0) = 0,
//! ```
//!
//! integrated here from a two-term series start. Other horizons follow by
//! [`rescale_profile`].

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::ModelManifold;
use crate::grid::RadialGrid;
use crate::ode::{self, Flow, Tolerances};

#[derive(Debug, Clone, Serialize)]
pub struct StationaryProfile {
    pub alpha: f64,
    pub m: f64,
    pub t_horizon: f64,
    pub dim: usize,
    pub rho: Vec<f64>,
    pub w: Vec<f64>,
    pub v: Vec<f64>,
    pub dv: Vec<f64>,
    /// `log(ψ^{N−1} V')`; `−∞` at the origin.
    pub log_flux: Vec<f64>,
    /// Radius where integration stopped short of the request (overflow).
    pub stopped_at: Option<f64>,
}

/// Integrates the normalised profile (`T = 1/(m−1)`) on `[0, rho_max]`.
pub fn integrate_profile(man: &ModelManifold, alpha: f64, m: f64, rho_max: f64) -> Result<StationaryProfile> {
    if !(alpha > 0.0) {
        return Err(Error::param("alpha", "must be positive"));
    }
    if !(m > 1.0) {
        return Err(Error::param("m", "must exceed 1"));
    }
    if !(rho_max > 0.0) || rho_max > man.rho_max() {
        return Err(Error::param("rho_max", "must be positive and inside the warp domain"));
    }
    let n = man.dim() as f64;
    let nm1 = n - 1.0;
    let v0 = alpha.powf(m);
    let rho_ser = (1e-3 * alpha.powf((1.0 - m) / 2.0).min(1.0)).min(rho_max / 2.0);
    let y0 = [v0 + alpha * rho_ser * rho_ser / (2.0 * n), alpha * rho_ser / n];

    let mut p = StationaryProfile {
        alpha,
        m,
        t_horizon: 1.0 / (m - 1.0),
        dim: man.dim(),
        rho: vec![0.0],
        w: vec![alpha],
        v: vec![v0],
        dv: vec![0.0],
        log_flux: vec![f64::NEG_INFINITY],
        stopped_at: None,
    };
    let tol = Tolerances {
        rtol: 1e-10,
        atol: 1e-14 * v0,
        h_init: rho_ser * 1e-2,
        h_max: 0.05,
        h_min: 1e-15,
    };
    let warp = man.warp();
    let mut err = None;
    let out = ode::integrate(
        |r, y: &[f64; 2]| {
            let b = man.laplacian_coeff(r).unwrap_or(f64::NAN);
            [y[1], y[0].max(0.0).powf(1.0 / m) - b * y[1]]
        },
        rho_ser,
        y0,
        rho_max,
        &tol,
        |r, y, _| {
            if !(y[0] < 1e300) {
                return Flow::Stop;
            }
            match warp.log_psi(r) {
                Ok(lp) => {
                    p.rho.push(r);
                    p.v.push(y[0]);
                    p.w.push(y[0].powf(1.0 / m));
                    p.dv.push(y[1]);
                    p.log_flux.push(nm1 * lp + y[1].ln());
                    Flow::Continue
                }
                Err(e) => {
                    err = Some(e);
                    Flow::Stop
                }
            }
        },
    );
    if let Some(e) = err {
        return Err(e);
    }
    match out {
        Ok(o) if o.stopped_early => p.stopped_at = Some(o.t),
        Ok(_) => {}
        Err(Error::StepUnderflow { last_good }) => p.stopped_at = Some(last_good),
        Err(e) => return Err(e),
    }
    Ok(p)
}

impl StationaryProfile {
    pub fn rho_max(&self) -> f64 {
        *self.rho.last().expect("non-empty profile")
    }

    /// `V = W^m` at `rho` by cubic Hermite interpolation of `(V, V')`.
    pub fn v_at(&self, rho: f64) -> Result<f64> {
        let hi = self.rho_max();
        if !(rho >= 0.0 && rho <= hi) {
            return Err(Error::Domain { rho, lo: 0.0, hi });
        }
        let k = self.rho.partition_point(|&r| r <= rho).clamp(1, self.rho.len() - 1) - 1;
        let (r0, r1) = (self.rho[k], self.rho[k + 1]);
        let h = r1 - r0;
        let t = (rho - r0) / h;
        let (t2, t3) = (t * t, t * t * t);
        Ok((2.0 * t3 - 3.0 * t2 + 1.0) * self.v[k]
            + (t3 - 2.0 * t2 + t) * h * self.dv[k]
            + (-2.0 * t3 + 3.0 * t2) * self.v[k + 1]
            + (t3 - t2) * h * self.dv[k + 1])
    }

    pub fn w_at(&self, rho: f64) -> Result<f64> {
        Ok(self.v_at(rho)?.max(0.0).powf(1.0 / self.m))
    }

    pub fn flux(&self) -> Vec<f64> {
        self.log_flux.iter().map(|l| l.exp()).collect()
    }

    /// `W` at the cell centres of `grid`.
    pub fn sample_on(&self, grid: &RadialGrid) -> Result<Vec<f64>> {
        grid.centers().iter().map(|&r| self.w_at(r)).collect()
    }
}

/// Rescales to horizon `t_new`: `W ↦ (T_old/T_new)^{1/(m−1)} W`, so that a
/// normalised profile becomes `((m−1)T_new)^{−1/(m−1)} W`.
pub fn rescale_profile(p: &StationaryProfile, t_new: f64) -> Result<StationaryProfile> {
    if !(t_new > 0.0) {
        return Err(Error::param("t_new", "must be positive"));
    }
    let f = (p.t_horizon / t_new).powf(1.0 / (p.m - 1.0));
    let fm = f.powf(p.m);
    let lfm = fm.ln();
    Ok(StationaryProfile {
        alpha: p.alpha * f,
        m: p.m,
        t_horizon: t_new,
        dim: p.dim,
        rho: p.rho.clone(),
        w: p.w.iter().map(|w| w * f).collect(),
        v: p.v.iter().map(|v| v * fm).collect(),
        dv: p.dv.iter().map(|v| v * fm).collect(),
        log_flux: p.log_flux.iter().map(|l| l + lfm).collect(),
        stopped_at: p.stopped_at,
    })
}

/// Largest `|(m−1)T Δ_h V − W|` minus its tolerance `10 h² (1 + (m−1)T|D²V|)`
/// over the cells of `grid`; nonpositive means the discrete equation holds.
pub fn profile_residual_excess(man: &ModelManifold, p: &StationaryProfile, grid: &RadialGrid) -> Result<f64> {
    let mut s = grid
        .centers()
        .iter()
        .map(|&r| p.v_at(r))
        .collect::<Result<Vec<f64>>>()?;
    s.push(p.v_at(grid.ghost_center())?);
    let lap = man.radial_laplacian(&s, grid)?;
    let k = (p.m - 1.0) * p.t_horizon;
    let h = grid.h();
    let mut worst = f64::NEG_INFINITY;
    for i in 0..grid.n_cells() {
        let left = if i == 0 { s[0] } else { s[i - 1] };
        let d2 = (s[i + 1] - 2.0 * s[i] + left).abs() / (h * h);
        let res = k * lap[i] - s[i].powf(1.0 / p.m);
        worst = worst.max(res.abs() - 10.0 * h * h * (1.0 + k * d2));
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentFit {
    pub exponent: f64,
    /// Two standard errors of the slope.
    pub width: f64,
    pub window: (f64, f64),
    pub points: usize,
}

/// Least-squares slope of `log f` against `log ρ` over samples in `[lo, hi]`.
pub fn fit_exponent(rho: &[f64], f: &[f64], lo: f64, hi: f64) -> Result<ExponentFit> {
    let pts: Vec<(f64, f64)> = rho
        .iter()
        .zip(f)
        .filter(|(&r, &v)| r >= lo && r <= hi && r > 0.0 && v > 0.0)
        .map(|(r, v)| (r.ln(), v.ln()))
        .collect();
    let n = pts.len();
    if n < 8 {
        return Err(Error::InsufficientTail(format!("{n} samples in [{lo}, {hi}]")));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientTail("degenerate radii".into()));
    }
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum();
    let se = (sse / (nf - 2.0).max(1.0) / sxx).sqrt();
    Ok(ExponentFit {
        exponent: slope,
        width: 2.0 * se,
        window: (lo, hi),
        points: n,
    })
}

/// Growth exponent of `W` fitted over the last decade of radii, trimmed by a
/// tenth of a decade at each end. Needs at least two decades beyond `ρ = 1`.
pub fn asymptotic_exponent(p: &StationaryProfile) -> Result<ExponentFit> {
    let top = p.rho_max();
    if top < 100.0 {
        return Err(Error::InsufficientTail(format!(
            "profile reaches only rho = {top}; two decades beyond 1 are required"
        )));
    }
    fit_exponent(&p.rho, &p.w, top * 10f64.powf(-0.9), top * 10f64.powf(-0.1))
}

#[derive(Debug, Clone, Serialize)]
pub struct RecursionTrace {
    pub beta: Vec<f64>,
    /// Constants `c_n`; empty unless produced by [`RecursionTrace::with_constants`].
    pub c: Vec<f64>,
    pub sigma: f64,
    pub m: f64,
    pub limit: f64,
}

/// `β_{n+1} = β_n/m + σ` from `β₀ = 0`, `n_steps` iterations.
pub fn recursion_lower_bound(sigma: f64, m: f64, n_steps: usize) -> Result<RecursionTrace> {
    if n_steps == 0 {
        return Err(Error::param("n_steps", "must be at least 1"));
    }
    if !(m > 1.0) {
        return Err(Error::param("m", "must exceed 1"));
    }
    let mut beta = Vec::with_capacity(n_steps + 1);
    beta.push(0.0);
    for i in 0..n_steps {
        beta.push(beta[i] / m + sigma);
    }
    Ok(RecursionTrace {
        beta,
        c: Vec::new(),
        sigma,
        m,
        limit: sigma * m / (m - 1.0),
    })
}

impl RecursionTrace {
    /// `|β_n − σm/(m−1)|` for the last stage.
    pub fn residual(&self) -> f64 {
        (self.beta[self.beta.len() - 1] - self.limit).abs()
    }

    /// Attaches `c₀ = α^m` and
    /// `c_{n+1} = min(C̃ c_n^{1/m} / (2^{β_n/m+1}(β_n/m+σ)), α^m / 2^{β_n/m+σ})`.
    pub fn with_constants(mut self, alpha: f64, c_tilde: f64) -> Self {
        let (m, s) = (self.m, self.sigma);
        let am = alpha.powf(m);
        let mut c = vec![am];
        for i in 0..self.beta.len() - 1 {
            let e = self.beta[i] / m + s;
            let next = (c_tilde * c[i].powf(1.0 / m) / (2f64.powf(self.beta[i] / m + 1.0) * e)).min(am / 2f64.powf(e));
            c.push(next);
        }
        self.c = c;
        self
    }
}

/// `C̃ = min_{ρ ∈ radii, ρ > 1} ρ^{1−σ} ∫_{ρ/2}^{ρ} ψ^{N−1}(s) ds / ψ^{N−1}(ρ)`.
pub fn volume_ratio_constant(man: &ModelManifold, sigma: f64, radii: &[f64]) -> Result<f64> {
    let mut best = f64::INFINITY;
    for &r in radii.iter().filter(|&&r| r > 1.0) {
        let la = man.log_area(r)?;
        // Composite Simpson in the ratio ψ^{N−1}(s)/ψ^{N−1}(ρ).
        let k = 200;
        let h = r / 2.0 / k as f64;
        let mut acc = 0.0;
        for j in 0..=k {
            let s = r / 2.0 + j as f64 * h;
            let w = if j == 0 || j == k {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * (man.log_area(s)? - la).exp();
        }
        best = best.min(r.powf(1.0 - sigma) * acc * h / 3.0);
    }
    Ok(best)
}

/// Smallest ratio `V / (c_n ρ^{β_n})` over profile samples in `(1, ρ_max)`
/// and all stages; `≥ 1` means every stage of the chain holds.
pub fn bound_chain_margin(p: &StationaryProfile, trace: &RecursionTrace) -> f64 {
    let mut worst = f64::INFINITY;
    for (&r, &v) in p.rho.iter().zip(&p.v) {
        if r <= 1.0 {
            continue;
        }
        for (b, c) in trace.beta.iter().zip(&trace.c) {
            worst = worst.min(v / (c * r.powf(*b)));
        }
    }
    worst
}

/// `true` iff `W₁ > W₀` at every sample of `p1` inside the common range.
pub fn ordering_check(p0: &StationaryProfile, p1: &StationaryProfile) -> bool {
    let top = p0.rho_max().min(p1.rho_max());
    p1.rho
        .iter()
        .zip(&p1.w)
        .filter(|(&r, _)| r <= top)
        .all(|(&r, &w1)| matches!(p0.w_at(r), Ok(w0) if w1 > w0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn h3() -> ModelManifold {
        ModelManifold::hyperbolic(3).unwrap()
    }

    #[test]
    fn series_start_is_fourth_order() {
        let man = ModelManifold::euclidean(3).unwrap();
        let p = integrate_profile(&man, 1.0, 2.0, 0.2).unwrap();
        // Next term: V = α^m + αρ²/(2N) + c₄ρ⁴ with c₄ = (α^{1−m}/m)(α/(2N))/(4(N+2)).
        let (n, m, alpha) = (3.0, 2.0, 1.0f64);
        let c4 = alpha.powf(1.0 - m) / m * (alpha / (2.0 * n)) / (4.0 * (n + 2.0));
        for r in [0.05, 0.1, 0.2] {
            let d = p.v_at(r).unwrap() - 1.0 - r * r / 6.0;
            assert_relative_eq!(d, c4 * r.powi(4), max_relative = 2e-2);
        }
    }

    #[test]
    fn invariants_at_origin_and_monotonicity() {
        let p = integrate_profile(&h3(), 1.5, 2.0, 30.0).unwrap();
        assert_eq!(p.w[0], 1.5);
        assert_eq!(p.flux()[0], 0.0);
        assert!(p.w.windows(2).all(|w| w[1] > w[0]));
        assert!(p.log_flux.windows(2).all(|w| w[1] > w[0]));
        assert!(p.stopped_at.is_none());
    }

    #[test]
    fn flux_matches_independent_quadrature() {
        let man = h3();
        let p = integrate_profile(&man, 1.0, 2.0, 10.0).unwrap();
        // Composite Simpson of ψ² V^{1/2} on a fine uniform grid.
        let k = 20_000;
        let h = 10.0 / k as f64;
        let f = |s: f64| {
            if s == 0.0 {
                0.0
            } else {
                (man.log_area(s).unwrap()).exp() * p.w_at(s).unwrap()
            }
        };
        let mut acc = f(0.0) + f(10.0);
        for j in 1..k {
            acc += if j % 2 == 1 { 4.0 } else { 2.0 } * f(j as f64 * h);
        }
        let integral = acc * h / 3.0;
        let flux = p.log_flux.last().unwrap().exp();
        assert_relative_eq!(flux, integral, max_relative = 1e-6);
    }

    #[test]
    fn hyperbolic_tail_exponent() {
        let p = integrate_profile(&h3(), 1.0, 2.0, 1000.0).unwrap();
        let fit = asymptotic_exponent(&p).unwrap();
        assert!((fit.exponent - 1.0).abs() < 0.05, "{fit:?}");
        // W = ρ/4 − (ln ρ)/8 + c + o(1) with c ≈ 1 for α = 1, so the local
        // slope of V still sits about 5% low on [30, 60] and closes in further out.
        let near = fit_exponent(&p.rho, &p.v, 30.0, 60.0).unwrap().exponent;
        let far = fit_exponent(&p.rho, &p.v, 300.0, 600.0).unwrap().exponent;
        assert!(near > 1.85 && near < 2.0, "{near}");
        assert!(far > near && (far - 2.0).abs() < 0.01, "{far}");
    }

    #[test]
    fn euclidean_surrogate_tail() {
        let man = ModelManifold::euclidean(3).unwrap();
        let p = integrate_profile(&man, 1.0, 2.0, 1000.0).unwrap();
        let fit = fit_exponent(&p.rho, &p.v, 100.0, 1000.0).unwrap();
        assert!((fit.exponent - 4.0).abs() < 0.05, "{fit:?}");
    }

    #[test]
    fn synthetic_power_law_fit() {
        let rho: Vec<f64> = (1..=10_000).map(|k| k as f64 * 0.1).collect();
        let w: Vec<f64> = rho.iter().map(|r| (1.0 + r * r).sqrt()).collect();
        let p = StationaryProfile {
            alpha: 1.0,
            m: 2.0,
            t_horizon: 1.0,
            dim: 3,
            v: w.iter().map(|x| x * x).collect(),
            dv: vec![0.0; w.len()],
            log_flux: vec![0.0; w.len()],
            rho,
            w,
            stopped_at: None,
        };
        let fit = asymptotic_exponent(&p).unwrap();
        assert!((fit.exponent - 1.0).abs() < 0.01);
    }

    #[test]
    fn short_profiles_are_flagged() {
        let p = integrate_profile(&h3(), 1.0, 2.0, 20.0).unwrap();
        assert!(matches!(asymptotic_exponent(&p), Err(Error::InsufficientTail(_))));
    }

    #[test]
    fn rescaling() {
        let p = integrate_profile(&h3(), 1.0, 2.0, 20.0).unwrap();
        let same = rescale_profile(&p, 1.0).unwrap();
        assert_eq!(same.w, p.w);
        let half = rescale_profile(&p, 2.0).unwrap();
        for (a, b) in half.w.iter().zip(&p.w) {
            assert_relative_eq!(*a, b / 2.0, max_relative = 1e-15);
        }
        let man = h3();
        let grid = RadialGrid::new(&man, 19.0, 760).unwrap();
        assert!(profile_residual_excess(&man, &half, &grid).unwrap() <= 0.0);
        let m3 = integrate_profile(&man, 1.0, 3.0, 20.0).unwrap();
        let r = rescale_profile(&m3, 1.0).unwrap();
        assert!(profile_residual_excess(&man, &r, &grid).unwrap() <= 0.0);
    }

    #[test]
    fn recursion_examples() {
        let t = recursion_lower_bound(1.0, 2.0, 200).unwrap();
        assert_eq!(&t.beta[..4], &[0.0, 1.0, 1.5, 1.75]);
        assert!(t.residual() <= 1e-10);
        assert!(t.beta[..40].windows(2).all(|w| w[1] > w[0]));
        assert!(t.beta.windows(2).all(|w| w[1] >= w[0]));
        assert!(recursion_lower_bound(2.0, 2.0, 200).unwrap().residual() <= 1e-10);
        assert_eq!(recursion_lower_bound(2.0, 2.0, 1).unwrap().limit, 4.0);
        assert!(recursion_lower_bound(0.0, 2.0, 50).unwrap().beta.iter().all(|&b| b == 0.0));
        assert!(recursion_lower_bound(1.0, 2.0, 0).is_err());
    }

    #[test]
    fn bound_chain_holds_on_hyperbolic_profile() {
        let man = h3();
        let p = integrate_profile(&man, 1.0, 2.0, 60.0).unwrap();
        let radii: Vec<f64> = (11..=600).map(|k| k as f64 * 0.1).collect();
        let ct = volume_ratio_constant(&man, 1.0, &radii).unwrap();
        assert!(ct > 0.0);
        let t = recursion_lower_bound(1.0, 2.0, 30).unwrap().with_constants(1.0, ct);
        assert!(bound_chain_margin(&p, &t) >= 1.0);
    }

    #[test]
    fn profiles_are_ordered_in_alpha() {
        let man = h3();
        let p0 = integrate_profile(&man, 1.0, 2.0, 30.0).unwrap();
        let p1 = integrate_profile(&man, 2.0, 2.0, 30.0).unwrap();
        assert!(ordering_check(&p0, &p1));
        assert!(!ordering_check(&p0, &p0));
    }
}
