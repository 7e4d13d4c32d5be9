//! Explicit comparison functions for the PME and their discrete residuals.
//!
//! * [`PowerBarrier`]: `W = a (r² + ρ²)^{σ/(2(m−1))} / T^{1/(m−1)}`, either a
//!   stationary supersolution (`W ≥ (m−1) T Δ(W^m)`) or subsolution.
//! * [`EtaBarrier`]: the exponential barrier used for uniqueness.
//! * [`HarmonicShell`]: the flat-space harmonic function on `[R−1, R]`.
//! * [`WeightedNorm`]: `sup |f| / (r² + ρ²)^{σ/(2(m−1))}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ModelManifold;
use crate::grid::RadialGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Super,
    Sub,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBarrier {
    pub a: f64,
    pub r: f64,
    pub sigma: f64,
    pub m: f64,
    pub t_horizon: f64,
    pub role: Role,
}

impl PowerBarrier {
    /// Super barriers need `r ≥ 1`; sub barriers accept any `r ≥ 0`.
    pub fn new(a: f64, r: f64, sigma: f64, m: f64, t_horizon: f64, role: Role) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::param("a", "must be positive"));
        }
        let r_min = if role == Role::Super { 1.0 } else { 0.0 };
        if !(r >= r_min) {
            return Err(Error::param("r", format!("must be at least {r_min}")));
        }
        if !(sigma > 0.0 && sigma <= 2.0) {
            return Err(Error::param("sigma", "must lie in (0, 2]"));
        }
        if !(m > 1.0) {
            return Err(Error::param("m", "must exceed 1"));
        }
        if !(t_horizon > 0.0) {
            return Err(Error::param("t_horizon", "must be positive"));
        }
        Ok(Self {
            a,
            r,
            sigma,
            m,
            t_horizon,
            role,
        })
    }

    /// Exponent of `(r² + ρ²)` in `W`.
    pub fn exponent(&self) -> f64 {
        self.sigma / (2.0 * (self.m - 1.0))
    }

    fn time_factor(&self) -> f64 {
        self.t_horizon.powf(-1.0 / (self.m - 1.0))
    }

    pub fn value(&self, rho: f64) -> f64 {
        self.a * (self.r * self.r + rho * rho).powf(self.exponent()) * self.time_factor()
    }

    pub fn sample(&self, radii: &[f64]) -> Vec<f64> {
        radii.iter().map(|&r| self.value(r)).collect()
    }

    /// Closed-form `(m−1) T Δ(W^m)` using the manifold's `b(ρ)`.
    pub fn scaled_laplacian_pow(&self, man: &ModelManifold, rho: f64) -> Result<f64> {
        let (m, s) = (self.m, self.sigma);
        let q = self.r * self.r + rho * rho;
        let drift = if rho == 0.0 {
            // ρ b(ρ) → N−1 at the origin.
            (man.dim() - 1) as f64
        } else {
            rho * man.laplacian_coeff(rho)?
        };
        let bracket = 1.0 + (s * m / (m - 1.0) - 2.0) * rho * rho / q + drift;
        Ok(self.a.powf(m) * s * m * q.powf(s * m / (2.0 * (m - 1.0)) - 1.0) * bracket * self.time_factor())
    }
}

/// `a = [σm(1 + |σm/(m−1) − 2| + 2^{2−σ} C′)]^{−1/(m−1)}`, valid with any `r ≥ 1`.
pub fn super_amplitude(c_prime: f64, sigma: f64, m: f64) -> Result<f64> {
    if !(c_prime > 0.0) {
        return Err(Error::param("c_prime", "must be positive"));
    }
    if !(sigma > 0.0 && sigma <= 2.0) {
        return Err(Error::param("sigma", "must lie in (0, 2]"));
    }
    if !(m > 1.0) {
        return Err(Error::param("m", "must exceed 1"));
    }
    let k = sigma * m * (1.0 + (sigma * m / (m - 1.0) - 2.0).abs() + 2f64.powf(2.0 - sigma) * c_prime);
    Ok(k.powf(-1.0 / (m - 1.0)))
}

/// `T = a^{m−1} ‖u₀‖^{1−m}`; a zero norm yields `+∞` (global existence).
pub fn existence_time(u0_norm: f64, a: f64, m: f64) -> Result<f64> {
    if !(u0_norm >= 0.0) {
        return Err(Error::param("u0_norm", "must be nonnegative"));
    }
    if u0_norm == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(a.powf(m - 1.0) * u0_norm.powf(1.0 - m))
}

/// `(r, a)` of the explicit subsolution. For `σ = 2` any `r > 0` works and
/// `r = 1` is returned; otherwise `c_doubleprime` is the lower coefficient
/// constant `C″`.
pub fn sub_parameters(c_doubleprime: Option<f64>, sigma: f64, n: usize, m: f64) -> Result<(f64, f64)> {
    if !(m > 1.0) {
        return Err(Error::param("m", "must exceed 1"));
    }
    if n < 2 {
        return Err(Error::param("n", "dimension must be at least 2"));
    }
    let nm1 = (n - 1) as f64;
    if sigma == 2.0 {
        return Ok((1.0, (nm1 * m).powf(-1.0 / (m - 1.0))));
    }
    if !(sigma > 0.0 && sigma < 2.0) {
        return Err(Error::param("sigma", "must lie in (0, 2]"));
    }
    let c2 = match c_doubleprime {
        Some(c) if c > 0.0 => c,
        _ => return Err(Error::param("c_doubleprime", "required and positive for sigma < 2")),
    };
    let dev = (sigma * m / (m - 1.0) - 2.0).abs();
    let floor = nm1.min(c2);
    let r_a = (2.0 * dev / floor).sqrt();
    let r_b = ((2.0 - sigma) / c2).powf(1.0 / (2.0 - sigma))
        * (sigma / (2.0 - sigma)).powf(sigma / (2.0 * (2.0 - sigma)))
        * dev.powf(1.0 / (2.0 - sigma));
    let r = r_a.max(r_b);
    let a = (2.0 * (r * r + 1.0).powf((2.0 - sigma) / 2.0) / (floor * sigma * m)).powf(1.0 / (m - 1.0));
    Ok((r, a))
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualRow {
    pub rho: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub role: Role,
    pub rows: Vec<ResidualRow>,
}

impl ResidualReport {
    pub fn passes(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    /// Row with the largest excess over its tolerance in the contract's
    /// forbidden direction.
    pub fn worst(&self) -> &ResidualRow {
        let excess = |r: &ResidualRow| match self.role {
            Role::Super => r.residual - r.tolerance,
            Role::Sub => -r.residual - r.tolerance,
        };
        self.rows
            .iter()
            .max_by(|a, b| excess(a).total_cmp(&excess(b)))
            .expect("non-empty report")
    }

    pub fn check(&self) -> Result<()> {
        if self.passes() {
            return Ok(());
        }
        let w = self.worst();
        Err(Error::SignContract {
            rho: w.rho,
            residual: w.residual,
            tolerance: w.tolerance,
        })
    }
}

/// `(m−1) T Δ_h(W^m) − W` per cell, with tolerance
/// `10 h² (1 + (m−1) T |D²_h W^m|)`.
pub fn barrier_residual(man: &ModelManifold, b: &PowerBarrier, grid: &RadialGrid) -> Result<ResidualReport> {
    let k = (b.m - 1.0) * b.t_horizon;
    let wm = |r: f64| b.value(r).powf(b.m);
    let mut samples: Vec<f64> = grid.centers().iter().map(|&r| wm(r)).collect();
    samples.push(wm(grid.ghost_center()));
    let lap = man.radial_laplacian(&samples, grid)?;
    let h = grid.h();
    let n = grid.n_cells();
    let rows = (0..n)
        .map(|i| {
            let rho = grid.centers()[i];
            let left = if i == 0 { samples[0] } else { samples[i - 1] };
            let d2 = (samples[i + 1] - 2.0 * samples[i] + left).abs() / (h * h);
            let tolerance = 10.0 * h * h * (1.0 + k * d2);
            let residual = k * lap[i] - b.value(rho);
            let pass = match b.role {
                Role::Super => residual <= tolerance,
                Role::Sub => residual >= -tolerance,
            };
            ResidualRow {
                rho,
                residual,
                tolerance,
                pass,
            }
        })
        .collect();
    Ok(ResidualReport { role: b.role, rows })
}

/// `(v^m − δ)^{1/m} ∨ 0` pointwise.
pub fn truncate_sub(v: &[f64], m: f64, delta: f64) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let y = x.powf(m) - delta;
            if y > 0.0 {
                y.powf(1.0 / m)
            } else {
                0.0
            }
        })
        .collect()
}

/// Parameters of the exponential barrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EtaBarrier {
    /// `λ exp(K (ρ+ρ₀)^{2−σ} / (t − T − t₀))`, `σ ∈ [0, 2)`.
    Exponential {
        lambda: f64,
        k: f64,
        t0: f64,
        rho0: f64,
        sigma: f64,
        t_horizon: f64,
    },
    /// `λ e^{α(T−t)} (1+ρ²)^{−β}` for `σ = 2`.
    Algebraic {
        lambda: f64,
        alpha: f64,
        beta: f64,
        t_horizon: f64,
    },
}

/// Inputs of [`eta_select`] beyond `(σ, C₂, T, t₀)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaContext {
    /// Radius of the support of the test datum ω (ω ≡ 1 on `B_{R₀}`).
    pub r0: f64,
    pub m: f64,
    pub dim: usize,
    /// Polynomial volume-growth exponent of the warp, `ψ ∼ ρ^δ` (σ = 2 only).
    pub delta: f64,
}

impl EtaContext {
    pub fn new(m: f64, dim: usize) -> Self {
        Self {
            r0: 1.0,
            m,
            dim,
            delta: 1.0,
        }
    }
}

/// Upper bound on `K` for the exponential barrier.
pub fn eta_k_bound(sigma: f64, c2: f64) -> f64 {
    let base = 1.0 / (c2 * (2.0 - sigma).powi(2));
    if sigma > 1.0 {
        base / 2.0
    } else {
        base
    }
}

/// Lower bound on `ρ₀` (zero unless `σ ∈ (1, 2)`).
pub fn eta_rho0_bound(sigma: f64, c2: f64, t_horizon: f64, t0: f64) -> f64 {
    if sigma > 1.0 && sigma < 2.0 {
        (2.0 * (2.0 - sigma) * (sigma - 1.0) * (t_horizon + t0) * c2).powf(1.0 / (2.0 - sigma))
    } else {
        0.0
    }
}

/// Midpoint selection inside the admissible region: `K` at half its bound,
/// `ρ₀ = 2 max(1, bound)`; for `σ = 2`, `β` one above its threshold and `α`
/// at twice its bound with `C₃ = 2C₂` (since `(1+ρ)² ≤ 2(1+ρ²)`).
pub fn eta_select(sigma: f64, c2: f64, t_horizon: f64, t0: f64, ctx: &EtaContext) -> Result<EtaBarrier> {
    if !(c2 > 0.0) {
        return Err(Error::param("c2", "must be positive"));
    }
    if !(t_horizon > 0.0) {
        return Err(Error::param("t_horizon", "must be positive"));
    }
    if !(t0 > 0.0 && t0 < t_horizon / 4.0) {
        return Err(Error::param("t0", "must lie in (0, T/4)"));
    }
    if !(0.0..=2.0).contains(&sigma) {
        return Err(Error::param("sigma", "must lie in [0, 2]"));
    }
    if sigma == 2.0 {
        if !(ctx.m > 1.0) || ctx.dim < 2 {
            return Err(Error::param("ctx", "needs m > 1 and dim >= 2"));
        }
        let c3 = 2.0 * c2;
        let beta = ctx.m / (ctx.m - 1.0) + (ctx.dim - 1) as f64 * ctx.delta / 2.0 + 1.0;
        let alpha = 2.0 * (2.0 * beta * c3 * (1.0 + 2.0 * beta));
        return Ok(EtaBarrier::Algebraic {
            lambda: (1.0 + ctx.r0 * ctx.r0).powf(beta),
            alpha,
            beta,
            t_horizon,
        });
    }
    let k = 0.5 * eta_k_bound(sigma, c2);
    let rho0 = 2.0 * eta_rho0_bound(sigma, c2, t_horizon, t0).max(1.0);
    let lambda = (k / t0 * (ctx.r0 + rho0).powf(2.0 - sigma)).exp();
    Ok(EtaBarrier::Exponential {
        lambda,
        k,
        t0,
        rho0,
        sigma,
        t_horizon,
    })
}

/// `(η_t, η_ρ, η_ρρ) / η`: the derivatives relative to η, which itself
/// underflows quickly as `t → T`.
pub fn eta_log_derivatives(e: &EtaBarrier, rho: f64, t: f64) -> (f64, f64, f64) {
    match *e {
        EtaBarrier::Exponential {
            k,
            t0,
            rho0,
            sigma,
            t_horizon,
            ..
        } => {
            let s = t - t_horizon - t0;
            let p = 2.0 - sigma;
            let x = rho + rho0;
            let et = -k * x.powf(p) / (s * s);
            let er = k * p * x.powf(p - 1.0) / s;
            let err = k * k * p * p * x.powf(2.0 * (p - 1.0)) / (s * s) + k * p * (1.0 - sigma) * x.powf(-sigma) / s;
            (et, er, err)
        }
        EtaBarrier::Algebraic { alpha, beta, .. } => {
            let q = 1.0 + rho * rho;
            let er = -2.0 * beta * rho / q;
            let err = 4.0 * beta * (beta + 1.0) * rho * rho / (q * q) - 2.0 * beta / q;
            (-alpha, er, err)
        }
    }
}

impl EtaBarrier {
    pub fn value(&self, rho: f64, t: f64) -> f64 {
        match *self {
            EtaBarrier::Exponential {
                lambda,
                k,
                t0,
                rho0,
                sigma,
                t_horizon,
            } => lambda * (k * (rho + rho0).powf(2.0 - sigma) / (t - t_horizon - t0)).exp(),
            EtaBarrier::Algebraic {
                lambda,
                alpha,
                beta,
                t_horizon,
            } => lambda * (alpha * (t_horizon - t)).exp() * (1.0 + rho * rho).powf(-beta),
        }
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            EtaBarrier::Exponential { sigma, .. } => sigma,
            EtaBarrier::Algebraic { .. } => 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EtaReport {
    /// Worst value of `(η_t + a Δη)/η`.
    pub worst: f64,
    pub rho: f64,
    pub t: f64,
    pub tolerance: f64,
}

impl EtaReport {
    pub fn passes(&self) -> bool {
        self.worst <= self.tolerance
    }
}

/// Worst `(η_t + a Δη)/η` with `a(ρ) = C₂ (1+ρ)^σ` over the given radii and
/// times. Radii must be positive; times must stay below `T`.
pub fn eta_residual(man: &ModelManifold, e: &EtaBarrier, c2: f64, radii: &[f64], times: &[f64]) -> Result<EtaReport> {
    if radii.is_empty() || times.is_empty() {
        return Err(Error::param("radii/times", "must be nonempty"));
    }
    let sigma = e.sigma();
    let mut rep = EtaReport {
        worst: f64::NEG_INFINITY,
        rho: f64::NAN,
        t: f64::NAN,
        tolerance: 0.0,
    };
    for &rho in radii {
        let b = man.laplacian_coeff(rho)?;
        let a = c2 * (1.0 + rho).powf(sigma);
        for &t in times {
            let (et, er, err) = eta_log_derivatives(e, rho, t);
            let v = et + a * (err + b * er);
            if v > rep.worst {
                let scale = et.abs() + a * (err.abs() + b * er.abs());
                rep = EtaReport {
                    worst: v,
                    rho,
                    t,
                    tolerance: 1e-10 * scale,
                };
            }
        }
    }
    Ok(rep)
}

/// `k₁ ρ^{2−N} + k₂` (N ≥ 3) or `−k̄₁ log ρ + k̄₂` (N = 2), vanishing at `R`
/// and equal to the boundary value at `R − 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicShell {
    pub dim: usize,
    pub radius: f64,
    pub boundary_value: f64,
    pub k1: f64,
    pub k2: f64,
}

pub fn harmonic_shell(dim: usize, radius: f64, boundary_value: f64) -> Result<HarmonicShell> {
    if dim < 2 {
        return Err(Error::param("dim", "must be at least 2"));
    }
    if !(radius > 1.0) {
        return Err(Error::param("radius", "must exceed 1"));
    }
    if !(boundary_value > 0.0) {
        return Err(Error::param("boundary_value", "must be positive"));
    }
    let (k1, k2) = if dim == 2 {
        let k1 = boundary_value / (radius.ln() - (radius - 1.0).ln());
        (k1, k1 * radius.ln())
    } else {
        let p = (dim - 2) as f64;
        let (rp, qp) = (radius.powf(p), (radius - 1.0).powf(p));
        (rp * qp / (rp - qp) * boundary_value, -qp / (rp - qp) * boundary_value)
    };
    Ok(HarmonicShell {
        dim,
        radius,
        boundary_value,
        k1,
        k2,
    })
}

impl HarmonicShell {
    pub fn value(&self, rho: f64) -> f64 {
        if self.dim == 2 {
            -self.k1 * rho.ln() + self.k2
        } else {
            self.k1 * rho.powf(2.0 - self.dim as f64) + self.k2
        }
    }

    pub fn derivative(&self, rho: f64) -> f64 {
        if self.dim == 2 {
            -self.k1 / rho
        } else {
            (2.0 - self.dim as f64) * self.k1 * rho.powf(1.0 - self.dim as f64)
        }
    }

    /// Outward normal derivative at `ρ = R`.
    pub fn boundary_flux(&self) -> f64 {
        self.derivative(self.radius)
    }

    /// Largest excess of the discrete Laplacian of `h` over its tolerance
    /// `10 h² (1 + |D²h|)` on the cells of `[0, R]` lying in `[R−1, R]`;
    /// a nonpositive return means `Δ_h h ≤ tol` there.
    pub fn laplacian_excess(&self, man: &ModelManifold, n_cells: usize) -> Result<f64> {
        let grid = RadialGrid::new(man, self.radius, n_cells)?;
        let lap = man.radial_laplacian_fn(&grid, |r| self.value(r))?;
        let h = grid.h();
        let mut worst = f64::NEG_INFINITY;
        for (i, &rho) in grid.centers().iter().enumerate() {
            if rho < self.radius - 1.0 {
                continue;
            }
            let d2 = (self.value(rho + h) - 2.0 * self.value(rho) + self.value(rho - h)).abs() / (h * h);
            worst = worst.max(lap[i] - 10.0 * h * h * (1.0 + d2));
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedNorm {
    pub r: f64,
    pub sigma: f64,
    pub m: f64,
}

impl WeightedNorm {
    pub fn weight(&self, rho: f64) -> f64 {
        (self.r * self.r + rho * rho).powf(self.sigma / (2.0 * (self.m - 1.0)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormReport {
    pub value: f64,
    /// Largest `|f|/ρ^{σ/(m−1)}` over the last decade of radii (`None` when
    /// the samples do not span a decade).
    pub tail_limsup: Option<f64>,
    /// Smallest such quotient over the same window.
    pub tail_liminf: Option<f64>,
}

pub fn weighted_sup_norm(f: &[f64], radii: &[f64], w: &WeightedNorm) -> Result<NormReport> {
    if f.len() != radii.len() || f.is_empty() {
        return Err(Error::param("f", "must match the radii and be nonempty"));
    }
    let value = f
        .iter()
        .zip(radii)
        .map(|(v, &r)| v.abs() / w.weight(r))
        .fold(0.0, f64::max);
    let rmax = radii.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let rmin = radii.iter().cloned().fold(f64::INFINITY, f64::min);
    let p = w.sigma / (w.m - 1.0);
    let (tail_limsup, tail_liminf) = if rmin.max(0.0) * 10.0 <= rmax && rmax > 0.0 {
        let tail: Vec<f64> = f
            .iter()
            .zip(radii)
            .filter(|(_, &r)| r >= rmax / 10.0)
            .map(|(v, &r)| v.abs() / r.powf(p))
            .collect();
        (
            Some(tail.iter().cloned().fold(0.0, f64::max)),
            Some(tail.iter().cloned().fold(f64::INFINITY, f64::min)),
        )
    } else {
        (None, None)
    };
    Ok(NormReport {
        value,
        tail_limsup,
        tail_liminf,
    })
}

/// Upper bound on the maximal existence time from the tail growth of the
/// datum, `(2a)^{m−1} · liminf^{1−m}`, where `a` comes from the subsolution.
pub fn maximal_time_bound(a_sub: f64, liminf: f64, m: f64) -> Option<f64> {
    if liminf > 0.0 && liminf.is_finite() {
        Some((2.0 * a_sub).powf(m - 1.0) * liminf.powf(1.0 - m))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn super_amplitude_examples() {
        assert_relative_eq!(super_amplitude(1.0, 1.0, 2.0).unwrap(), 1.0 / 6.0, max_relative = 1e-15);
        assert_relative_eq!(super_amplitude(1.0, 2.0, 2.0).unwrap(), 1.0 / 16.0, max_relative = 1e-15);
        assert!(super_amplitude(1e12, 1.0, 2.0).unwrap() < 1e-11);
        assert!(super_amplitude(1.0, 0.0, 2.0).is_err());
    }

    #[test]
    fn existence_time_examples() {
        assert_relative_eq!(existence_time(1.0, 1.0 / 6.0, 2.0).unwrap(), 1.0 / 6.0);
        assert_relative_eq!(existence_time(2.0, 1.0 / 6.0, 2.0).unwrap(), 1.0 / 12.0);
        assert!(existence_time(0.0, 1.0 / 6.0, 2.0).unwrap().is_infinite());
        assert!(existence_time(1e-12, 1.0 / 6.0, 2.0).unwrap() > 1e10);
    }

    #[test]
    fn sub_parameter_examples() {
        // a^{1−m} = (N−1)m.
        let (r, a) = sub_parameters(None, 2.0, 3, 2.0).unwrap();
        assert_eq!(r, 1.0);
        assert_relative_eq!(a, 0.25, max_relative = 1e-15);
        let (_, a) = sub_parameters(None, 2.0, 4, 2.0).unwrap();
        assert_relative_eq!(a, 1.0 / 6.0, max_relative = 1e-15);
        // σ = 1, m = 2: the deviation term vanishes, so both branches of r are 0.
        for c in [0.5, 1.0, 4.0] {
            let (r, a) = sub_parameters(Some(c), 1.0, 3, 2.0).unwrap();
            assert_eq!(r, 0.0);
            let expected = 2.0 * (r * r + 1.0f64).sqrt() / (2f64.min(c) * 2.0);
            assert_relative_eq!(a, expected, max_relative = 1e-15);
        }
        // C″ beyond N−1 only enters through the second branch of r.
        let (_, a1) = sub_parameters(Some(1e6), 1.0, 3, 2.0).unwrap();
        let (_, a2) = sub_parameters(Some(1e9), 1.0, 3, 2.0).unwrap();
        assert_eq!(a1, a2);
        assert!(sub_parameters(None, 1.0, 3, 2.0).is_err());
    }

    #[test]
    fn euclidean_super_barrier_matches_symbolic_laplacian() {
        let man = ModelManifold::euclidean(3).unwrap();
        let a = super_amplitude(2.0, 2.0, 2.0).unwrap();
        let b = PowerBarrier::new(a, 1.0, 2.0, 2.0, 1.0, Role::Super).unwrap();
        let grid = RadialGrid::new(&man, 50.0, 800).unwrap();
        let rep = barrier_residual(&man, &b, &grid).unwrap();
        assert!(rep.passes());
        for row in &rep.rows {
            // W² = a²(1+ρ²)², Δ(W²) in ℝ³ = a²(12 + 20ρ²).
            let oracle = a * a * (12.0 + 20.0 * row.rho * row.rho) - b.value(row.rho);
            assert!(oracle <= 0.0);
            assert!((row.residual - oracle).abs() <= row.tolerance, "{row:?} vs {oracle}");
            assert_relative_eq!(
                b.scaled_laplacian_pow(&man, row.rho).unwrap(),
                a * a * (12.0 + 20.0 * row.rho * row.rho),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn amplitude_direction_of_the_contracts() {
        // W is linear in a while (m−1)TΔ(W^m) scales like a^m: enlarging a
        // helps a subsolution, shrinking it far enough breaks it.
        let man = ModelManifold::hyperbolic(3).unwrap();
        let grid = RadialGrid::new(&man, 20.0, 400).unwrap();
        let (r, a) = sub_parameters(Some(1.0), 1.0, 3, 2.0).unwrap();
        let sub = PowerBarrier::new(a, r, 1.0, 2.0, 1.0, Role::Sub).unwrap();
        assert!(barrier_residual(&man, &sub, &grid).unwrap().passes());
        let doubled = PowerBarrier { a: 2.0 * a, ..sub };
        assert!(barrier_residual(&man, &doubled, &grid).unwrap().passes());
        let shrunk = PowerBarrier { a: a / 20.0, ..sub };
        assert!(!barrier_residual(&man, &shrunk, &grid).unwrap().passes());

        let euc = ModelManifold::euclidean(3).unwrap();
        let g = RadialGrid::new(&euc, 50.0, 800).unwrap();
        let a = super_amplitude(2.0, 2.0, 2.0).unwrap();
        let doubled = PowerBarrier::new(4.0 * a, 1.0, 2.0, 2.0, 1.0, Role::Super).unwrap();
        let rep = barrier_residual(&euc, &doubled, &g).unwrap();
        assert!(!rep.passes());
        assert!(matches!(rep.check(), Err(Error::SignContract { .. })));
    }

    #[test]
    fn truncation_examples() {
        let v = vec![0.0, 0.5, 1.0, 2.0];
        assert_eq!(truncate_sub(&v, 2.0, 0.0), v);
        let c = 0.3f64;
        assert!(truncate_sub(&[c.powf(0.5); 5], 2.0, c).iter().all(|&x| x == 0.0));
        let inc: Vec<f64> = (0..50).map(|k| (1.0 + (k as f64).powi(2)).sqrt()).collect();
        let cut = inc[20].powi(2);
        let t = truncate_sub(&inc, 2.0, cut);
        assert!(t[..=20].iter().all(|&x| x == 0.0));
        assert!(t[21..].iter().all(|&x| x > 0.0));
    }

    #[test]
    fn eta_selection_examples() {
        let ctx = EtaContext::new(2.0, 3);
        match eta_select(1.0, 1.0, 1.0, 0.2, &ctx).unwrap() {
            EtaBarrier::Exponential { k, rho0, .. } => {
                assert_eq!(eta_k_bound(1.0, 1.0), 1.0);
                assert_eq!(k, 0.5);
                assert!(rho0 > 1.0);
            }
            _ => panic!(),
        }
        assert_eq!(eta_k_bound(0.0, 1.0), 0.25);
        match eta_select(0.0, 1.0, 1.0, 0.2, &ctx).unwrap() {
            EtaBarrier::Exponential { k, .. } => assert_eq!(k, 0.125),
            _ => panic!(),
        }
        assert_relative_eq!(eta_rho0_bound(1.5, 1.0, 1.0, 0.2), 0.36, max_relative = 1e-12);
        match eta_select(1.5, 1.0, 1.0, 0.2, &ctx).unwrap() {
            EtaBarrier::Exponential { rho0, .. } => assert_eq!(rho0, 2.0),
            _ => panic!(),
        }
        match eta_select(2.0, 1.0, 1.0, 0.2, &ctx).unwrap() {
            EtaBarrier::Algebraic { alpha, beta, .. } => assert!(alpha > 2.0 * beta * 2.0 * (1.0 + 2.0 * beta)),
            _ => panic!(),
        }
        assert!(eta_select(1.0, 1.0, 1.0, 0.3, &ctx).is_err());
    }

    #[test]
    fn eta_derivatives_match_finite_differences() {
        let ctx = EtaContext::new(2.0, 3);
        for sigma in [0.0, 1.0, 1.5, 2.0] {
            let e = eta_select(sigma, 1.0, 1.0, 0.2, &ctx).unwrap();
            let (rho, t) = (2.3, 0.4);
            let (et, er, err) = eta_log_derivatives(&e, rho, t);
            let f = |r: f64, s: f64| e.value(r, s);
            let eta = f(rho, t);
            let d = 1e-5;
            let ft = (f(rho, t + d) - f(rho, t - d)) / (2.0 * d) / eta;
            let fr = (f(rho + d, t) - f(rho - d, t)) / (2.0 * d) / eta;
            let frr = (f(rho + d, t) - 2.0 * eta + f(rho - d, t)) / (d * d) / eta;
            // Central differences carry an O(d² α²) error on the σ = 2 branch.
            assert_relative_eq!(et, ft, max_relative = 1e-5);
            assert_relative_eq!(er, fr, max_relative = 1e-5);
            assert_relative_eq!(err, frr, max_relative = 1e-4);
        }
    }

    #[test]
    fn eta_residual_sign() {
        let man = ModelManifold::euclidean(3).unwrap();
        let radii: Vec<f64> = (1..=400).map(|k| 1.0 + k as f64 * 0.1).collect();
        let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.05).collect();
        let ctx = EtaContext::new(2.0, 3);
        let e = eta_select(1.0, 1.0, 1.0, 0.2, &ctx).unwrap();
        assert!(eta_residual(&man, &e, 1.0, &radii, &times).unwrap().passes());
        let EtaBarrier::Exponential { lambda, t0, rho0, sigma, t_horizon, .. } = e else { panic!() };
        let bad = EtaBarrier::Exponential {
            lambda,
            k: 1.5 * eta_k_bound(1.0, 1.0),
            t0,
            rho0,
            sigma,
            t_horizon,
        };
        assert!(!eta_residual(&man, &bad, 1.0, &radii, &times).unwrap().passes());
    }

    #[test]
    fn harmonic_shell_examples() {
        let h = harmonic_shell(3, 2.0, 1.0).unwrap();
        assert_eq!((h.k1, h.k2), (2.0, -1.0));
        assert_eq!(h.value(2.0), 0.0);
        assert_eq!(h.boundary_flux(), -0.5);
        let h2 = harmonic_shell(2, 2.0, 1.0).unwrap();
        assert_relative_eq!(h2.k1, 1.0 / 2f64.ln(), max_relative = 1e-15);
        assert!(h2.value(2.0).abs() < 1e-15);
        assert_relative_eq!(h2.value(1.0), 1.0, max_relative = 1e-15);
        for (n, m) in [(3, ModelManifold::hyperbolic(3).unwrap()), (2, ModelManifold::euclidean(2).unwrap())] {
            let s = harmonic_shell(n, 10.0, 1.0).unwrap();
            assert!(s.laplacian_excess(&m, 400).unwrap() <= 0.0);
        }
    }

    #[test]
    fn weighted_norm_examples() {
        let radii: Vec<f64> = (0..=5000).map(|k| k as f64 * 0.01).collect();
        let w = WeightedNorm { r: 2.0, sigma: 2.0, m: 2.0 };
        let ones = vec![1.0; radii.len()];
        // Weight exponent σ/(2(m−1)) = 1: sup is 1/r² at the origin.
        assert_relative_eq!(weighted_sup_norm(&ones, &radii, &w).unwrap().value, 0.25);
        let half = WeightedNorm { sigma: 1.0, ..w };
        assert_relative_eq!(weighted_sup_norm(&ones, &radii, &half).unwrap().value, 0.5);
        let exact: Vec<f64> = radii.iter().map(|&r| w.weight(r)).collect();
        assert_relative_eq!(weighted_sup_norm(&exact, &radii, &w).unwrap().value, 1.0);
        let w1 = WeightedNorm { r: 1.0, sigma: 1.0, m: 2.0 };
        let rep = weighted_sup_norm(&radii, &radii, &w1).unwrap();
        assert!(rep.value >= 0.999 && rep.value < 1.0);
        assert_relative_eq!(rep.tail_limsup.unwrap(), 1.0);
    }

    #[test]
    fn maximal_time_bound_needs_positive_liminf() {
        assert!(maximal_time_bound(0.5, 0.0, 2.0).is_none());
        assert_relative_eq!(maximal_time_bound(0.5, 2.0, 2.0).unwrap(), 0.5);
    }
}
