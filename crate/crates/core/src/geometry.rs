//! Model manifolds `M_ψ` with metric `dρ² + ψ(ρ)² dθ²`.
//!
//! Every quantity is expressed through three radial functions of the warp:
//! `log ψ`, the logarithmic derivative `ψ'/ψ` and the curvature ratio
//! `ψ''/ψ`. Working with `log ψ` keeps warps such as `exp(c ρ^{2-σ})`
//! representable far beyond the range where `ψ` itself overflows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::ode::{self, Flow, Tolerances};

/// `σ = min((2 − γ)/2, 2)`: the growth exponent attached to a Ricci lower
/// bound of order `ρ^γ`.
pub fn sigma_of_gamma(gamma: f64) -> f64 {
    ((2.0 - gamma) / 2.0).min(2.0)
}

/// Stable `ln sinh(x)` for `x > 0`.
pub(crate) fn ln_sinh(x: f64) -> f64 {
    if x > 20.0 {
        x - std::f64::consts::LN_2 + (-(-2.0 * x).exp()).ln_1p()
    } else {
        x.sinh().ln()
    }
}

/// Linear second-order ODE `ψ'' = q(ρ) ψ` generating a tabulated warp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WarpOde {
    /// `q = coeff · κ_γ(ρ)` with `κ_γ = 1 + ρ^γ` for `γ ≥ 0` and
    /// `κ_γ = (1 + ρ)^γ` for `γ < 0`.
    RicciLower { coeff: f64, gamma: f64 },
    /// `q = 0` on `(0, r1]` (so `ψ = ρ` there) and `q = c1 ρ^γ` beyond.
    SectionalUpper { c1: f64, gamma: f64, r1: f64 },
}

/// Radius where the two-term series hands over to the integrator.
const SERIES_RADIUS: f64 = 1e-3;

impl WarpOde {
    pub fn q(&self, rho: f64) -> f64 {
        match *self {
            WarpOde::RicciLower { coeff, gamma } => {
                if gamma >= 0.0 {
                    coeff * (1.0 + rho.powf(gamma))
                } else {
                    coeff * (1.0 + rho).powf(gamma)
                }
            }
            WarpOde::SectionalUpper { c1, gamma, r1 } => {
                if rho <= r1 {
                    0.0
                } else {
                    c1 * rho.powf(gamma)
                }
            }
        }
    }

    /// Right-continuous `q`, used inside tables: the first node of the
    /// sectional table sits exactly on the jump at `r1`.
    fn q_table(&self, rho: f64) -> f64 {
        match *self {
            WarpOde::SectionalUpper { c1, gamma, r1 } if rho >= r1 => c1 * rho.powf(gamma),
            _ => self.q(rho),
        }
    }

    /// `dq/dρ` of [`q_table`](Self::q_table).
    fn dq_table(&self, rho: f64) -> f64 {
        match *self {
            WarpOde::RicciLower { coeff, gamma } => {
                if gamma == 0.0 {
                    0.0
                } else if gamma > 0.0 {
                    coeff * gamma * rho.powf(gamma - 1.0)
                } else {
                    coeff * gamma * (1.0 + rho).powf(gamma - 1.0)
                }
            }
            WarpOde::SectionalUpper { c1, gamma, r1 } => {
                if rho >= r1 {
                    c1 * gamma * rho.powf(gamma - 1.0)
                } else {
                    0.0
                }
            }
        }
    }

    /// Radius at which tabulation starts.
    fn start(&self) -> f64 {
        match *self {
            WarpOde::RicciLower { .. } => SERIES_RADIUS,
            WarpOde::SectionalUpper { r1, .. } => r1,
        }
    }

    /// `(log ψ, ψ'/ψ)` on `(0, start]`, from the closed inner piece.
    fn inner(&self, rho: f64) -> (f64, f64) {
        match *self {
            WarpOde::RicciLower { coeff, gamma } => {
                let (psi, dpsi) = if gamma == 0.0 {
                    (
                        rho + 2.0 * coeff * rho.powi(3) / 6.0,
                        1.0 + 2.0 * coeff * rho * rho / 2.0,
                    )
                } else if gamma > 0.0 {
                    (
                        rho + coeff
                            * (rho.powi(3) / 6.0
                                + rho.powf(3.0 + gamma) / ((2.0 + gamma) * (3.0 + gamma))),
                        1.0 + coeff * (rho * rho / 2.0 + rho.powf(2.0 + gamma) / (2.0 + gamma)),
                    )
                } else {
                    (
                        rho + coeff * (rho.powi(3) / 6.0 + gamma * rho.powi(4) / 12.0),
                        1.0 + coeff * (rho * rho / 2.0 + gamma * rho.powi(3) / 3.0),
                    )
                };
                (psi.ln(), dpsi / psi)
            }
            WarpOde::SectionalUpper { .. } => (rho.ln(), 1.0 / rho),
        }
    }
}

/// Hermite table of `(ρ, log ψ, ψ'/ψ)` produced by integrating a [`WarpOde`].
#[derive(Debug, Clone)]
pub struct WarpTable {
    pub ode: WarpOde,
    pub rho: Vec<f64>,
    pub log_psi: Vec<f64>,
    pub dlog: Vec<f64>,
}

impl WarpTable {
    /// Integrates the Riccati form `z' = q − z²`, `(log ψ)' = z` of the
    /// generating ODE up to `rho_max`.
    pub fn generate(ode: WarpOde, rho_max: f64) -> Result<Self> {
        let start = ode.start();
        if !(rho_max > start) {
            return Err(Error::param(
                "rho_max",
                format!("must exceed the table start {start}"),
            ));
        }
        let (y0, z0) = ode.inner(start);
        let tol = Tolerances {
            rtol: 1e-11,
            atol: 1e-13,
            h_init: start * 1e-3,
            h_max: 0.05,
            h_min: 1e-15,
        };
        let mut rho = Vec::new();
        let mut log_psi = Vec::new();
        let mut dlog = Vec::new();
        ode::integrate(
            |r, s: &[f64; 2]| [s[1], ode.q_table(r) - s[1] * s[1]],
            start,
            [y0, z0],
            rho_max,
            &tol,
            |r, s, _| {
                rho.push(r);
                log_psi.push(s[0]);
                dlog.push(s[1]);
                Flow::Continue
            },
        )?;
        Ok(Self {
            ode,
            rho,
            log_psi,
            dlog,
        })
    }

    pub fn rho_max(&self) -> f64 {
        *self.rho.last().expect("non-empty table")
    }

    fn eval(&self, rho: f64) -> (f64, f64) {
        let start = self.rho[0];
        if rho <= start {
            return self.ode.inner(rho);
        }
        let k = self.rho.partition_point(|&r| r <= rho).min(self.rho.len() - 1);
        let k = k.max(1) - 1;
        let (r0, r1) = (self.rho[k], self.rho[k + 1]);
        let h = r1 - r0;
        let t = (rho - r0) / h;
        let (y0, y1) = (self.log_psi[k], self.log_psi[k + 1]);
        let (z0, z1) = (self.dlog[k], self.dlog[k + 1]);
        let zp0 = self.ode.q_table(r0) - z0 * z0;
        let zp1 = self.ode.q_table(r1) - z1 * z1;
        (
            hermite(t, h, y0, z0, y1, z1),
            hermite(t, h, z0, zp0, z1, zp1),
        )
    }

    /// Worst per-step defect of the stored samples against the generating
    /// ODE, measured with the end-corrected trapezoid rule relative to
    /// `max(1, |·|)` of each stored quantity.
    pub fn ode_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.rho.len() - 1 {
            let (r0, r1) = (self.rho[k], self.rho[k + 1]);
            let h = r1 - r0;
            let (z0, z1) = (self.dlog[k], self.dlog[k + 1]);
            let zp0 = self.ode.q_table(r0) - z0 * z0;
            let zp1 = self.ode.q_table(r1) - z1 * z1;
            let dy = self.log_psi[k + 1] - self.log_psi[k];
            let ry = dy - (h * (z0 + z1) / 2.0 + h * h * (zp0 - zp1) / 12.0);
            let zpp0 = self.ode.dq_table(r0) - 2.0 * z0 * zp0;
            let zpp1 = self.ode.dq_table(r1) - 2.0 * z1 * zp1;
            let rz = (z1 - z0) - (h * (zp0 + zp1) / 2.0 + h * h * (zpp0 - zpp1) / 12.0);
            let sy = self.log_psi[k].abs().max(1.0);
            let sz = z0.abs().max(1.0);
            worst = worst.max(ry.abs() / sy).max(rz.abs() / sz);
        }
        worst
    }
}

fn hermite(t: f64, h: f64, y0: f64, d0: f64, y1: f64, d1: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * h * d0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * h * d1
}

#[derive(Debug, Clone)]
pub enum WarpKind {
    /// `ψ = ρ`.
    Euclidean,
    /// `ψ = sinh ρ`.
    Hyperbolic,
    /// `ψ = ρ^δ`; only a far-field model, not in the admissible class unless `δ = 1`.
    PowerLaw { delta: f64 },
    /// `ψ = ρ exp(c ρ^{2−σ})`, so `log ψ ∼ c ρ^{2−σ}`; requires `σ ∈ [0, 2)`.
    ExpPower { c: f64, sigma: f64 },
    OdeGenerated(WarpTable),
}

/// The warping function ψ of a model manifold together with its evaluation
/// domain `[0, rho_max]`.
#[derive(Debug, Clone)]
pub struct WarpFunction {
    kind: WarpKind,
    rho_max: f64,
}

/// Limits of `ψ(ρ)/ρ` and `ψ'(ρ)` as `ρ → 0`, obtained by Aitken extrapolation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ClassReport {
    pub psi_over_rho_limit: f64,
    pub dpsi_limit: f64,
    pub admissible: bool,
}

impl WarpFunction {
    pub fn euclidean() -> Self {
        Self {
            kind: WarpKind::Euclidean,
            rho_max: f64::INFINITY,
        }
    }

    pub fn hyperbolic() -> Self {
        Self {
            kind: WarpKind::Hyperbolic,
            rho_max: f64::INFINITY,
        }
    }

    pub fn power_law(delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::param("delta", "must be positive"));
        }
        Ok(Self {
            kind: WarpKind::PowerLaw { delta },
            rho_max: f64::INFINITY,
        })
    }

    pub fn exp_power(c: f64, sigma: f64) -> Result<Self> {
        if !(c >= 0.0) {
            return Err(Error::param("c", "must be nonnegative"));
        }
        if !(0.0..2.0).contains(&sigma) {
            return Err(Error::param("sigma", "must lie in [0, 2)"));
        }
        Ok(Self {
            kind: WarpKind::ExpPower { c, sigma },
            rho_max: f64::INFINITY,
        })
    }

    pub fn from_ode(ode: WarpOde, rho_max: f64) -> Result<Self> {
        let table = WarpTable::generate(ode, rho_max)?;
        let rho_max = table.rho_max();
        Ok(Self {
            kind: WarpKind::OdeGenerated(table),
            rho_max,
        })
    }

    pub fn kind(&self) -> &WarpKind {
        &self.kind
    }

    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }

    pub fn table(&self) -> Option<&WarpTable> {
        match &self.kind {
            WarpKind::OdeGenerated(t) => Some(t),
            _ => None,
        }
    }

    fn check(&self, rho: f64, allow_zero: bool) -> Result<()> {
        let ok_lo = if allow_zero { rho >= 0.0 } else { rho > 0.0 };
        if !ok_lo || !(rho <= self.rho_max * (1.0 + 1e-12)) {
            return Err(Error::Domain {
                rho,
                lo: 0.0,
                hi: self.rho_max,
            });
        }
        Ok(())
    }

    /// `log ψ(ρ)`; `−∞` at the origin.
    pub fn log_psi(&self, rho: f64) -> Result<f64> {
        self.check(rho, true)?;
        if rho == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(match &self.kind {
            WarpKind::Euclidean => rho.ln(),
            WarpKind::Hyperbolic => ln_sinh(rho),
            WarpKind::PowerLaw { delta } => delta * rho.ln(),
            WarpKind::ExpPower { c, sigma } => rho.ln() + c * rho.powf(2.0 - sigma),
            WarpKind::OdeGenerated(t) => t.eval(rho).0,
        })
    }

    /// `ψ'(ρ)/ψ(ρ)` for `ρ > 0`.
    pub fn log_derivative(&self, rho: f64) -> Result<f64> {
        self.check(rho, false)?;
        Ok(match &self.kind {
            WarpKind::Euclidean => 1.0 / rho,
            WarpKind::Hyperbolic => 1.0 / rho.tanh(),
            WarpKind::PowerLaw { delta } => delta / rho,
            WarpKind::ExpPower { c, sigma } => {
                let p = 2.0 - sigma;
                1.0 / rho + c * p * rho.powf(p - 1.0)
            }
            WarpKind::OdeGenerated(t) => t.eval(rho).1,
        })
    }

    /// `ψ''(ρ)/ψ(ρ)` for `ρ > 0`. Tabulated warps return the generating
    /// coefficient `q(ρ)` directly.
    pub fn curvature_ratio(&self, rho: f64) -> Result<f64> {
        self.check(rho, false)?;
        Ok(match &self.kind {
            WarpKind::Euclidean => 0.0,
            WarpKind::Hyperbolic => 1.0,
            WarpKind::PowerLaw { delta } => delta * (delta - 1.0) / (rho * rho),
            WarpKind::ExpPower { c, sigma } => {
                let p = 2.0 - sigma;
                c * p * (p + 1.0) * rho.powf(p - 2.0) + c * c * p * p * rho.powf(2.0 * p - 2.0)
            }
            WarpKind::OdeGenerated(t) => t.ode.q(rho),
        })
    }

    pub fn psi(&self, rho: f64) -> Result<f64> {
        Ok(self.log_psi(rho)?.exp())
    }

    pub fn psi_prime(&self, rho: f64) -> Result<f64> {
        if rho == 0.0 {
            self.check(rho, true)?;
            return Ok(match &self.kind {
                WarpKind::PowerLaw { delta } if *delta < 1.0 => f64::INFINITY,
                WarpKind::PowerLaw { delta } if *delta > 1.0 => 0.0,
                _ => 1.0,
            });
        }
        Ok(self.log_derivative(rho)? * self.psi(rho)?)
    }

    /// Sectional curvature of radial planes, `−ψ''/ψ`.
    pub fn sectional_radial(&self, rho: f64) -> Result<f64> {
        Ok(-self.curvature_ratio(rho)?)
    }

    /// Checks `ψ(0) = 0`, `ψ'(0) = 1` by Aitken extrapolation of the
    /// sequences `ψ(ρ_k)/ρ_k` and `ψ'(ρ_k)` along `ρ_k = 10^{-k}`.
    pub fn class_report(&self) -> ClassReport {
        let radii = [1e-10, 1e-11, 1e-12];
        let ratio: Vec<f64> = radii
            .iter()
            .map(|&r| (self.log_psi(r).unwrap_or(f64::NAN) - r.ln()).exp())
            .collect();
        let deriv: Vec<f64> = radii
            .iter()
            .map(|&r| self.psi_prime(r).unwrap_or(f64::NAN))
            .collect();
        let a = aitken(&ratio);
        let b = aitken(&deriv);
        ClassReport {
            psi_over_rho_limit: a,
            dpsi_limit: b,
            admissible: (a - 1.0).abs() <= 1e-8 && (b - 1.0).abs() <= 1e-8,
        }
    }

    /// Convexity test `ψ'' ≥ −1e−10 · max(1, ψ)` on the given radii.
    pub fn is_cartan_hadamard_on(&self, radii: &[f64]) -> Result<bool> {
        for &r in radii {
            let ratio = self.curvature_ratio(r)?;
            let psi = self.psi(r)?;
            // ψ'' ≥ −tol·max(1, ψ)  ⇔  ψ''/ψ ≥ −tol·max(1/ψ, 1)
            if ratio < -1e-10 * (1.0 / psi).max(1.0) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `(ρ, ψ, ψ')` rows of a tabulated warp.
    pub fn samples(&self) -> Vec<(f64, f64, f64)> {
        match &self.kind {
            WarpKind::OdeGenerated(t) => t
                .rho
                .iter()
                .zip(&t.log_psi)
                .zip(&t.dlog)
                .map(|((&r, &y), &z)| (r, y.exp(), z * y.exp()))
                .collect(),
            _ => Vec::new(),
        }
    }

    fn known_convex(&self) -> bool {
        match &self.kind {
            WarpKind::Euclidean | WarpKind::Hyperbolic | WarpKind::OdeGenerated(_) => true,
            WarpKind::ExpPower { c, .. } => *c >= 0.0,
            WarpKind::PowerLaw { delta } => *delta >= 1.0,
        }
    }
}

fn aitken(s: &[f64]) -> f64 {
    let (a, b, c) = (s[0], s[1], s[2]);
    let d1 = b - a;
    let d2 = c - b;
    let den = d2 - d1;
    if den.abs() <= 1e-300 || d2.abs() <= 1e-15 * c.abs() {
        c
    } else {
        c - d2 * d2 / den
    }
}

/// `M_ψ` of dimension `N ≥ 2`.
#[derive(Debug, Clone)]
pub struct ModelManifold {
    dim: usize,
    warp: WarpFunction,
}

impl ModelManifold {
    pub fn new(dim: usize, warp: WarpFunction) -> Result<Self> {
        if dim < 2 {
            return Err(Error::param("dim", "dimension must be at least 2"));
        }
        Ok(Self { dim, warp })
    }

    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::new(dim, WarpFunction::euclidean())
    }

    pub fn hyperbolic(dim: usize) -> Result<Self> {
        Self::new(dim, WarpFunction::hyperbolic())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn warp(&self) -> &WarpFunction {
        &self.warp
    }

    pub fn rho_max(&self) -> f64 {
        self.warp.rho_max
    }

    fn nm1(&self) -> f64 {
        (self.dim - 1) as f64
    }

    /// `b(ρ) = (N−1) ψ'/ψ`, the drift coefficient of the radial Laplacian.
    pub fn laplacian_coeff(&self, rho: f64) -> Result<f64> {
        let b = self.nm1() * self.warp.log_derivative(rho)?;
        debug_assert!(
            !self.warp.known_convex() || b >= self.nm1() / rho * (1.0 - 1e-8),
            "Laplacian comparison violated at rho = {rho}"
        );
        Ok(b)
    }

    pub fn sectional_radial(&self, rho: f64) -> Result<f64> {
        self.warp.sectional_radial(rho)
    }

    /// `Ric_o = −(N−1) ψ''/ψ` in the radial direction.
    pub fn ricci_radial(&self, rho: f64) -> Result<f64> {
        Ok(self.nm1() * self.warp.sectional_radial(rho)?)
    }

    /// `log A(ρ) = (N−1) log ψ(ρ)`, the log area density of geodesic spheres
    /// (up to the constant angular factor).
    pub fn log_area(&self, rho: f64) -> Result<f64> {
        Ok(self.nm1() * self.warp.log_psi(rho)?)
    }

    /// Conservative discrete Laplacian `(1/A)(A g')'` on the cells of `grid`.
    ///
    /// `samples` holds `g` at the `n` cell centres followed by one ghost value
    /// at `R + h/2`; the result has one entry per cell. The face area at the
    /// origin vanishes, so no symmetry special case is needed there.
    pub fn radial_laplacian(&self, samples: &[f64], grid: &RadialGrid) -> Result<Vec<f64>> {
        let n = grid.n_cells();
        if samples.len() != n + 1 {
            return Err(Error::param(
                "samples",
                format!("expected {} values (cells + ghost), got {}", n + 1, samples.len()),
            ));
        }
        Ok((0..n)
            .map(|i| {
                let up = grid.coef_plus(i) * (samples[i + 1] - samples[i]);
                let down = if i == 0 {
                    0.0
                } else {
                    grid.coef_minus(i) * (samples[i] - samples[i - 1])
                };
                up - down
            })
            .collect())
    }

    /// [`radial_laplacian`](Self::radial_laplacian) of a closed-form `g`,
    /// sampled at the centres and the ghost centre.
    pub fn radial_laplacian_fn<F: Fn(f64) -> f64>(&self, grid: &RadialGrid, g: F) -> Result<Vec<f64>> {
        let mut s: Vec<f64> = grid.centers().iter().map(|&r| g(r)).collect();
        s.push(g(grid.ghost_center()));
        self.radial_laplacian(&s, grid)
    }

    /// Non-conservative central-difference form `g'' + b g'` at the cell
    /// centres (`g(−h/2) = g(h/2)` by symmetry). Used to cross-check the
    /// conservative operator.
    pub fn radial_laplacian_nonconservative<F: Fn(f64) -> f64>(
        &self,
        grid: &RadialGrid,
        g: F,
    ) -> Result<Vec<f64>> {
        let h = grid.h();
        grid.centers()
            .iter()
            .map(|&r| {
                let gm = if r - h < 0.0 { g(h - r) } else { g(r - h) };
                let g0 = g(r);
                let gp = g(r + h);
                Ok((gp - 2.0 * g0 + gm) / (h * h) + self.laplacian_coeff(r)? * (gp - gm) / (2.0 * h))
            })
            .collect()
    }
}

/// Curvature hypotheses: `Ric_o ≥ −C₀(1 + ρ^γ)` and, optionally,
/// `K_ω ≤ −C₁ ρ^γ` outside `B_{R₁}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureBounds {
    pub gamma: f64,
    pub c0: f64,
    pub c1: Option<f64>,
    pub r1: Option<f64>,
    pub sigma: f64,
}

impl CurvatureBounds {
    pub fn new(gamma: f64, c0: f64, c1: Option<f64>, r1: Option<f64>) -> Result<Self> {
        if !gamma.is_finite() || gamma > 2.0 {
            return Err(Error::param("gamma", "must be finite and at most 2"));
        }
        if !(c0 > 0.0) {
            return Err(Error::param("c0", "must be positive"));
        }
        if c1.is_some() != r1.is_some() {
            return Err(Error::param("c1/r1", "must be given together"));
        }
        if let (Some(c1), Some(r1)) = (c1, r1) {
            if !(c1 > 0.0 && r1 > 0.0) {
                return Err(Error::param("c1/r1", "must be positive"));
            }
        }
        let sigma = sigma_of_gamma(gamma);
        assert_eq!(sigma, ((2.0 - gamma) / 2.0).min(2.0));
        Ok(Self {
            gamma,
            c0,
            c1,
            r1,
            sigma,
        })
    }

    /// The sectional constants, which maximal-time and blow-up statements need
    /// whenever `γ ∈ (−2, 2)`.
    pub fn sectional(&self) -> Result<Option<(f64, f64)>> {
        match (self.c1, self.r1) {
            (Some(c1), Some(r1)) => Ok(Some((c1, r1))),
            _ if self.gamma > -2.0 && self.gamma < 2.0 => Err(Error::param(
                "c1/r1",
                "required for maximal-time checks when gamma lies in (-2, 2)",
            )),
            _ => Ok(None),
        }
    }
}
