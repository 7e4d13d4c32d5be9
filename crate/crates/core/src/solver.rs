//! Implicit finite-volume solver for the radial PME on a ball `B_R`.
//!
//! Cell-centred unknowns, fluxes `A (φ(u)_{i+1} − φ(u)_i)/h` through the
//! faces, `φ(u) = |u|^{m−1} u`, backward Euler in time and a damped Newton
//! iteration on the tridiagonal system. The scheme is monotone, so discrete
//! comparison and positivity hold up to the Newton tolerance.

use serde::Serialize;

use crate::barriers::{existence_time, maximal_time_bound, super_amplitude, weighted_sup_norm, WeightedNorm};
use crate::error::{Error, Result};
use crate::geometry::ModelManifold;
use crate::grid::RadialGrid;

fn phi(u: f64, m: f64) -> f64 {
    u.abs().powf(m - 1.0) * u
}

fn dphi(u: f64, m: f64) -> f64 {
    m * u.abs().powf(m - 1.0)
}

fn sup(u: &[f64]) -> f64 {
    u.iter().fold(0.0, |a, &x| a.max(x.abs()))
}

/// Dirichlet data imposed on `∂B_R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum OuterBoundary {
    /// `u = 0`.
    Zero,
    /// `u = c`, e.g. the essential infimum of a sign-changing datum.
    Floor(f64),
    /// `g(t) = (g₀^{1−m} − (m−1) λ t)^{−1/(m−1)}`: the boundary value evolves
    /// like a separable solution with local growth rate `λ = Δ(u₀^m)/u₀^m`
    /// at `R`. Exact for separable data, and lets truncated problems keep
    /// the far-field growth that drives blow-up.
    FarField { g0: f64, lambda: f64 },
}

impl OuterBoundary {
    /// [`OuterBoundary::FarField`] matched to a datum `f` defined slightly
    /// beyond `radius`.
    pub fn far_field_for<F: Fn(f64) -> f64>(man: &ModelManifold, f: F, m: f64, radius: f64) -> Result<Self> {
        let g0 = f(radius);
        if !(g0 > 0.0) {
            return Err(Error::param("datum", "must be positive at the outer radius"));
        }
        let e = 1e-3 * radius.max(1.0);
        let fm = |r: f64| phi(f(r), m);
        let d2 = (fm(radius + e) - 2.0 * fm(radius) + fm(radius - e)) / (e * e);
        let d1 = (fm(radius + e) - fm(radius - e)) / (2.0 * e);
        let lambda = (d2 + man.laplacian_coeff(radius)? * d1) / phi(g0, m);
        Ok(OuterBoundary::FarField { g0, lambda })
    }

    pub fn value(&self, t: f64, m: f64) -> f64 {
        match *self {
            OuterBoundary::Zero => 0.0,
            OuterBoundary::Floor(c) => c,
            OuterBoundary::FarField { g0, lambda } => {
                let base = g0.powf(1.0 - m) - (m - 1.0) * lambda * t;
                base.max(1e-300).powf(-1.0 / (m - 1.0))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialState {
    pub t: f64,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepInfo {
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SolveStatus {
    ReachedHorizon,
    BlowUp { t_est: f64 },
    StalledStep { t: f64, dt: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub weighted_norm: f64,
    pub max_u: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub trajectory: Vec<TrajectoryRow>,
    /// States at the requested output times (and the final state).
    pub snapshots: Vec<RadialState>,
    pub steps: usize,
    pub rejected: usize,
}

impl SolveReport {
    pub fn t_est(&self) -> Option<f64> {
        match self.status {
            SolveStatus::BlowUp { t_est } => Some(t_est),
            _ => None,
        }
    }

    pub fn snapshot_at(&self, t: f64) -> Option<&RadialState> {
        self.snapshots.iter().find(|s| (s.t - t).abs() <= 1e-12 * t.abs().max(1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveOptions {
    pub boundary: OuterBoundary,
    pub norm: WeightedNorm,
    /// Times at which the state is recorded exactly.
    pub outputs: Vec<f64>,
    /// Target relative sup-norm change per step.
    pub delta_max: f64,
    /// Blow-up is declared once `max u` exceeds this multiple of `max |u₀|`.
    pub blowup_factor: f64,
    pub max_steps: usize,
    pub dt_max: f64,
}

impl SolveOptions {
    pub fn new(norm: WeightedNorm) -> Self {
        Self {
            boundary: OuterBoundary::Zero,
            norm,
            outputs: Vec::new(),
            delta_max: 0.02,
            blowup_factor: 1e8,
            max_steps: 200_000,
            dt_max: f64::INFINITY,
        }
    }
}

pub struct Solver<'a> {
    grid: &'a RadialGrid,
    m: f64,
    boundary: OuterBoundary,
}

const NEWTON_MAX: usize = 30;

impl<'a> Solver<'a> {
    pub fn new(grid: &'a RadialGrid, m: f64, boundary: OuterBoundary) -> Result<Self> {
        if !(m > 1.0) {
            return Err(Error::param("m", "must exceed 1"));
        }
        Ok(Self { grid, m, boundary })
    }

    pub fn grid(&self) -> &RadialGrid {
        self.grid
    }

    /// Discrete `Δ φ(u)` per cell with the boundary value at time `t`.
    pub fn operator(&self, u: &[f64], t: f64) -> Vec<f64> {
        let g = self.grid;
        let n = g.n_cells();
        let p: Vec<f64> = u.iter().map(|&x| phi(x, self.m)).collect();
        let pb = phi(self.boundary.value(t, self.m), self.m);
        (0..n)
            .map(|i| {
                let up = if i + 1 < n {
                    g.coef_plus(i) * (p[i + 1] - p[i])
                } else {
                    g.boundary_coef() * (pb - p[i])
                };
                let down = if i == 0 { 0.0 } else { g.coef_minus(i) * (p[i] - p[i - 1]) };
                up - down
            })
            .collect()
    }

    fn residual(&self, u: &[f64], old: &[f64], dt: f64, t_new: f64) -> Vec<f64> {
        let l = self.operator(u, t_new);
        u.iter()
            .zip(old)
            .zip(&l)
            .map(|((a, b), c)| a - b - dt * c)
            .collect()
    }

    /// One backward-Euler step of length `dt`.
    pub fn step(&self, state: &RadialState, dt: f64) -> Result<(RadialState, StepInfo)> {
        if !(dt > 0.0) {
            return Err(Error::param("dt", "must be positive"));
        }
        let g = self.grid;
        let n = g.n_cells();
        let m = self.m;
        let t_new = state.t + dt;
        let old = &state.u;
        let mut u = old.clone();
        let scale = sup(old).max(self.boundary.value(t_new, m).abs()).max(1e-300);
        let tol = 1e-10 * scale;
        let mut res = self.residual(&u, old, dt, t_new);
        let mut rn = sup(&res);
        let (mut lo, mut di, mut up) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for it in 0..NEWTON_MAX {
            if rn <= tol {
                return Ok((RadialState { t: t_new, u }, StepInfo { iterations: it, residual: rn }));
            }
            for i in 0..n {
                let d = dphi(u[i], m);
                let cp = if i + 1 < n { g.coef_plus(i) } else { g.boundary_coef() };
                let cm = if i == 0 { 0.0 } else { g.coef_minus(i) };
                di[i] = 1.0 + dt * (cp + cm) * d;
                up[i] = if i + 1 < n { -dt * cp * dphi(u[i + 1], m) } else { 0.0 };
                lo[i] = if i == 0 { 0.0 } else { -dt * cm * dphi(u[i - 1], m) };
            }
            let rhs: Vec<f64> = res.iter().map(|r| -r).collect();
            let delta = thomas(&lo, &di, &up, &rhs);
            let mut lam = 1.0;
            loop {
                let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + lam * d).collect();
                let tr = self.residual(&trial, old, dt, t_new);
                let tn = sup(&tr);
                if tn.is_finite() && tn < (1.0 - 1e-4 * lam) * rn {
                    u = trial;
                    res = tr;
                    rn = tn;
                    break;
                }
                lam *= 0.5;
                if lam < 1.0 / 1024.0 {
                    return Err(Error::NewtonDivergence {
                        iterations: it + 1,
                        residual: rn,
                    });
                }
            }
        }
        if rn <= tol {
            return Ok((RadialState { t: t_new, u }, StepInfo { iterations: NEWTON_MAX, residual: rn }));
        }
        Err(Error::NewtonDivergence {
            iterations: NEWTON_MAX,
            residual: rn,
        })
    }

    fn row(&self, t: f64, u: &[f64], norm: &WeightedNorm) -> TrajectoryRow {
        let c = self.grid.centers();
        TrajectoryRow {
            t,
            weighted_norm: u.iter().zip(c).fold(0.0f64, |a, (v, &r)| a.max(v.abs() / norm.weight(r))),
            max_u: u.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            mass: self.grid.integrate(u),
        }
    }

    /// Adaptive time stepping from `u0` at `t = 0` up to `horizon`.
    pub fn solve(&self, u0: &[f64], horizon: f64, opts: &SolveOptions) -> Result<SolveReport> {
        let n = self.grid.n_cells();
        if u0.len() != n {
            return Err(Error::param("u0", format!("expected {n} cell values, got {}", u0.len())));
        }
        if !(horizon > 0.0) {
            return Err(Error::param("horizon", "must be positive"));
        }
        let m = self.m;
        let mut stops: Vec<f64> = opts.outputs.iter().cloned().filter(|&t| t > 0.0 && t < horizon).collect();
        stops.push(horizon);
        stops.sort_by(f64::total_cmp);
        stops.dedup();

        let u0_scale = sup(u0).max(self.boundary.value(0.0, m).abs());
        let mut state = RadialState { t: 0.0, u: u0.to_vec() };
        let mut rep = SolveReport {
            status: SolveStatus::ReachedHorizon,
            trajectory: vec![self.row(0.0, u0, &opts.norm)],
            snapshots: Vec::new(),
            steps: 0,
            rejected: 0,
        };
        let lu = sup(&self.operator(u0, 0.0));
        let mut dt = if lu > 0.0 && u0_scale > 0.0 {
            opts.delta_max * u0_scale / lu
        } else {
            horizon
        }
        .min(opts.dt_max);
        let mut dts: Vec<f64> = Vec::new();
        let mut next = 0;
        while next < stops.len() {
            if rep.steps >= opts.max_steps || dt < 1e-14 * state.t.max(1.0) {
                rep.status = SolveStatus::StalledStep { t: state.t, dt };
                rep.snapshots.push(state);
                return Ok(rep);
            }
            let target = stops[next];
            let hit = state.t + dt >= target * (1.0 - 1e-12);
            let this_dt = if hit { target - state.t } else { dt };
            let (new, info) = match self.step(&state, this_dt) {
                Ok(x) => x,
                Err(Error::NewtonDivergence { .. }) => {
                    rep.rejected += 1;
                    dt = this_dt * 0.5;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let denom = sup(&state.u).max(sup(&new.u)).max(1e-300);
            let change = state.u.iter().zip(&new.u).fold(0.0f64, |a, (x, y)| a.max((x - y).abs())) / denom;
            if change > 1.5 * opts.delta_max {
                rep.rejected += 1;
                dt = this_dt * (0.9 * opts.delta_max / change).clamp(0.1, 0.5);
                continue;
            }
            let mut factor = if change > 0.0 {
                (0.9 * opts.delta_max / change).clamp(0.5, 2.0)
            } else {
                2.0
            };
            if info.iterations > 4 {
                factor = factor.min(0.7);
            }
            rep.steps += 1;
            dts.push(this_dt);
            state = new;
            if hit {
                state.t = target;
                rep.snapshots.push(state.clone());
                next += 1;
                dt = dt.max(this_dt);
            } else {
                dt = this_dt * factor;
            }
            dt = dt.min(opts.dt_max);
            let row = self.row(state.t, &state.u, &opts.norm);
            rep.trajectory.push(row);
            if u0_scale > 0.0 && row.max_u > opts.blowup_factor * u0_scale && cascade(&dts) {
                rep.status = SolveStatus::BlowUp {
                    t_est: estimate_blowup_time(&rep.trajectory, m),
                };
                rep.snapshots.push(state);
                return Ok(rep);
            }
        }
        Ok(rep)
    }
}

/// The last accepted steps shrink: blow-up, not stiffness.
fn cascade(dts: &[f64]) -> bool {
    let k = dts.len();
    k >= 6 && dts[k - 6..].windows(2).all(|w| w[1] <= 1.05 * w[0]) && dts[k - 1] < dts[k - 6]
}

/// Zero crossing of a least-squares line through `max_u^{1−m}` against `t`
/// over the last decade of `max_u` values.
pub fn estimate_blowup_time(traj: &[TrajectoryRow], m: f64) -> f64 {
    let last = traj[traj.len() - 1];
    let pts: Vec<(f64, f64)> = traj
        .iter()
        .filter(|r| r.max_u > 0.0 && r.max_u >= last.max_u / 10.0)
        .map(|r| (r.t, r.max_u.powf(1.0 - m)))
        .collect();
    if pts.len() < 3 {
        return last.t;
    }
    let nf = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return last.t;
    }
    mx - my / slope
}

/// Tridiagonal solve; `lo[0]` and `up[n−1]` are ignored.
fn thomas(lo: &[f64], di: &[f64], up: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = di.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = up[0] / di[0];
    d[0] = rhs[0] / di[0];
    for i in 1..n {
        let den = di[i] - lo[i] * c[i - 1];
        c[i] = up[i] / den;
        d[i] = (rhs[i] - lo[i] * d[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Convenience wrapper: sample `u0` on a fresh grid and solve.
pub fn solve(
    grid: &RadialGrid,
    u0: &[f64],
    m: f64,
    horizon: f64,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    Solver::new(grid, m, opts.boundary)?.solve(u0, horizon, opts)
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub max_violation: f64,
    pub tolerance: f64,
    pub holds: bool,
}

/// Solves from `u_low ≤ u_high` and reports the largest `u_low − u_high`
/// over the output times; tolerance `10 h · max |u_high(0)|`.
pub fn comparison_test(
    grid: &RadialGrid,
    u_low: &[f64],
    u_high: &[f64],
    m: f64,
    horizon: f64,
    opts: &SolveOptions,
) -> Result<ComparisonReport> {
    if u_low.iter().zip(u_high).any(|(a, b)| a > b) {
        return Err(Error::param("u_low", "data must be ordered cellwise"));
    }
    let a = solve(grid, u_low, m, horizon, opts)?;
    let b = solve(grid, u_high, m, horizon, opts)?;
    let mut worst = 0.0f64;
    for sa in &a.snapshots {
        if let Some(sb) = b.snapshot_at(sa.t) {
            for (x, y) in sa.u.iter().zip(&sb.u) {
                worst = worst.max(x - y);
            }
        }
    }
    let tolerance = 10.0 * grid.h() * sup(u_high).max(sup(u_low));
    Ok(ComparisonReport {
        max_violation: worst,
        tolerance,
        holds: worst <= tolerance,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpansionReport {
    pub radii: Vec<f64>,
    pub reports: Vec<SolveReport>,
    /// Largest `u_{R_k} − u_{R_{k+1}}` on common cells at matched times.
    pub max_violation: f64,
    /// `sup |u_{R_{k+1}} − u_{R_k}|` on `B_{R_k}` per consecutive pair.
    pub sup_diffs: Vec<f64>,
    pub tolerance: f64,
    pub monotone: bool,
}

/// Nested zero-Dirichlet problems on `B_{R_k}` with a common cell width `h`.
pub fn expand_domain<F: Fn(f64) -> f64>(
    man: &ModelManifold,
    u0: F,
    m: f64,
    radii: &[f64],
    h: f64,
    horizon: f64,
    opts: &SolveOptions,
) -> Result<ExpansionReport> {
    if radii.windows(2).any(|w| w[1] <= w[0]) || radii.is_empty() {
        return Err(Error::param("radii", "must be nonempty and increasing"));
    }
    let mut reports = Vec::new();
    let mut scale: f64 = 0.0;
    for &r in radii {
        let cells = (r / h).round() as usize;
        if ((cells as f64) * h - r).abs() > 1e-9 * r {
            return Err(Error::param("h", format!("radius {r} is not a multiple of the cell width")));
        }
        let grid = RadialGrid::new(man, r, cells)?;
        let data: Vec<f64> = grid.centers().iter().map(|&x| u0(x)).collect();
        if data.iter().any(|&v| v < 0.0) {
            return Err(Error::param("u0", "must be nonnegative"));
        }
        scale = scale.max(sup(&data));
        let o = SolveOptions {
            boundary: OuterBoundary::Zero,
            ..opts.clone()
        };
        reports.push(solve(&grid, &data, m, horizon, &o)?);
    }
    let mut worst = 0.0f64;
    let mut sup_diffs = Vec::new();
    for k in 0..reports.len() - 1 {
        let mut d: f64 = 0.0;
        for s in &reports[k].snapshots {
            if let Some(big) = reports[k + 1].snapshot_at(s.t) {
                for (a, b) in s.u.iter().zip(&big.u) {
                    worst = worst.max(a - b);
                    d = d.max((b - a).abs());
                }
            }
        }
        sup_diffs.push(d);
    }
    let tolerance = 10.0 * h * scale;
    Ok(ExpansionReport {
        radii: radii.to_vec(),
        reports,
        max_violation: worst,
        sup_diffs,
        tolerance,
        monotone: worst <= tolerance,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExistenceWindow {
    pub t_lower: f64,
    pub t_upper: Option<f64>,
    pub consistent: bool,
}

/// `T_lower` from the supersolution amplitude (certified `C′`) and the
/// weighted norm of the datum; `T_upper` from the subsolution amplitude and
/// the tail liminf of `u₀/ρ^{σ/(m−1)}`, omitted when that liminf vanishes or
/// the samples do not reach a decade.
pub fn existence_window_check(
    radii: &[f64],
    u0: &[f64],
    m: f64,
    norm: &WeightedNorm,
    c_prime: f64,
    a_sub: Option<f64>,
) -> Result<ExistenceWindow> {
    let rep = weighted_sup_norm(u0, radii, norm)?;
    let a = super_amplitude(c_prime, norm.sigma, m)?;
    let t_lower = existence_time(rep.value, a, m)?;
    let t_upper = match (a_sub, rep.tail_liminf) {
        (Some(a2), Some(li)) if li > 1e-12 * rep.value.max(1e-300) => maximal_time_bound(a2, li, m),
        _ => None,
    };
    Ok(ExistenceWindow {
        t_lower,
        t_upper,
        consistent: t_upper.is_none_or(|u| t_lower <= u),
    })
}

/// Barenblatt solution `t^{−α} (C − k ρ² t^{−2β})_+^{1/(m−1)}` on `ℝ^N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Barenblatt {
    pub dim: usize,
    pub m: f64,
    pub c: f64,
}

impl Barenblatt {
    pub fn alpha(&self) -> f64 {
        let n = self.dim as f64;
        n / (n * (self.m - 1.0) + 2.0)
    }

    pub fn beta(&self) -> f64 {
        self.alpha() / self.dim as f64
    }

    pub fn k(&self) -> f64 {
        self.alpha() * (self.m - 1.0) / (2.0 * self.m * self.dim as f64)
    }

    pub fn value(&self, rho: f64, t: f64) -> f64 {
        let inner = self.c - self.k() * rho * rho * t.powf(-2.0 * self.beta());
        if inner <= 0.0 {
            0.0
        } else {
            t.powf(-self.alpha()) * inner.powf(1.0 / (self.m - 1.0))
        }
    }

    pub fn support_radius(&self, t: f64) -> f64 {
        (self.c / self.k()).sqrt() * t.powf(self.beta())
    }
}
