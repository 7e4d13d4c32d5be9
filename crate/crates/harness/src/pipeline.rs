//! Scenario pipeline: geometry → certificates → barriers → profile → solve.
//!
//! Every stage writes its artifacts into the scenario's output directory and
//! records metrics, warnings (residual checks) and assertions (declared
//! checks). Nothing time- or host-dependent is written, so identical configs
//! produce identical files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Serialize;

use pme_core::barriers::{
    barrier_residual, sub_parameters, super_amplitude, PowerBarrier, Role, WeightedNorm,
};
use pme_core::comparison::{certificate_grid, certify_coeff_bound, CoeffBoundCertificate, Side};
use pme_core::profile::{asymptotic_exponent, integrate_profile, rescale_profile, StationaryProfile};
use pme_core::solver::{expand_domain, solve, Barenblatt, OuterBoundary, SolveOptions, SolveReport, SolveStatus};
use pme_core::{ModelManifold, RadialGrid};

use crate::config::{BoundaryKind, DatumKind, ExpectedStatus, Format, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Geometry,
    Certify,
    Barriers,
    Profile,
    Solve,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Geometry, Stage::Certify, Stage::Barriers, Stage::Profile, Stage::Solve];
}

#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunOutcome {
    pub scenario: String,
    pub description: String,
    pub metrics: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
    pub assertions: Vec<Assertion>,
}

impl RunOutcome {
    pub fn passed(&self, strict: bool) -> bool {
        self.assertions.iter().all(|a| a.pass) && (!strict || self.warnings.is_empty())
    }

    fn check(&mut self, name: &str, pass: bool, detail: String) {
        self.assertions.push(Assertion {
            name: name.into(),
            pass,
            detail,
        });
    }
}

struct Ctx<'a> {
    sc: &'a Scenario,
    man: ModelManifold,
    out: PathBuf,
    outcome: RunOutcome,
    upper: Option<CoeffBoundCertificate>,
    lower: Option<CoeffBoundCertificate>,
}

impl Ctx<'_> {
    fn csv(&self) -> bool {
        self.sc.outputs.formats.contains(&Format::Csv)
    }

    fn json(&self) -> bool {
        self.sc.outputs.formats.contains(&Format::Json)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> anyhow::Result<()> {
        if self.json() {
            let text = serde_json::to_string_pretty(value)?;
            fs::write(self.out.join(name), text + "\n").with_context(|| format!("writing {name}"))?;
        }
        Ok(())
    }

    fn write_csv(&self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> anyhow::Result<()> {
        if !self.csv() {
            return Ok(());
        }
        let mut w = csv::Writer::from_path(self.out.join(name)).with_context(|| format!("writing {name}"))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        Ok(())
    }

    fn r_max(&self) -> f64 {
        *self.sc.solver.radii.last().expect("validated")
    }

    fn norm(&self) -> WeightedNorm {
        WeightedNorm {
            r: self.sc.solver.norm_r,
            sigma: self.sc.sigma(),
            m: self.sc.pme.m,
        }
    }
}

fn f(x: f64) -> String {
    format!("{x}")
}

/// Runs the selected stages and writes `summary.json`.
pub fn run(sc: &Scenario, out: &Path, stages: &[Stage]) -> anyhow::Result<RunOutcome> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut ctx = Ctx {
        sc,
        man: sc.build_manifold()?,
        out: out.to_path_buf(),
        outcome: RunOutcome {
            scenario: sc.name.clone(),
            description: sc.description.clone(),
            ..Default::default()
        },
        upper: None,
        lower: None,
    };
    for stage in Stage::ALL {
        if !stages.contains(&stage) {
            continue;
        }
        match stage {
            Stage::Geometry => geometry(&mut ctx)?,
            Stage::Certify => certify(&mut ctx)?,
            Stage::Barriers => barriers(&mut ctx)?,
            Stage::Profile => profile(&mut ctx)?,
            Stage::Solve => solve_stage(&mut ctx)?,
        }
    }
    ctx.write_json("summary.json", &ctx.outcome)?;
    Ok(ctx.outcome)
}

fn geometry(ctx: &mut Ctx) -> anyhow::Result<()> {
    let man = &ctx.man;
    let reach = ctx.r_max();
    let n = 200;
    let mut rows = Vec::with_capacity(n);
    for k in 1..=n {
        let rho = reach * k as f64 / n as f64;
        rows.push(vec![
            f(rho),
            f(man.warp().log_psi(rho)?),
            f(man.laplacian_coeff(rho)?),
            f(man.sectional_radial(rho)?),
            f(man.ricci_radial(rho)?),
        ]);
    }
    ctx.write_csv("geometry.csv", &["rho", "log_psi", "b", "sectional", "ricci"], rows)?;
    let class = man.warp().class_report();
    ctx.outcome.metrics.insert("geometry.psi_over_rho".into(), class.psi_over_rho_limit);
    ctx.outcome.metrics.insert("geometry.dpsi".into(), class.dpsi_limit);
    if !class.admissible {
        ctx.outcome.warnings.push("geometry: warp fails ψ(0)=0, ψ'(0)=1".into());
    }
    let radii: Vec<f64> = (1..=n).map(|k| reach * k as f64 / n as f64).collect();
    if !man.warp().is_cartan_hadamard_on(&radii)? {
        ctx.outcome.warnings.push("geometry: positive radial curvature on the sampled radii".into());
    }
    ctx.write_json("geometry.json", &class)?;
    Ok(())
}

fn certify(ctx: &mut Ctx) -> anyhow::Result<()> {
    let sigma = ctx.sc.sigma();
    let grid = certificate_grid(ctx.r_max());
    let upper = certify_coeff_bound(&ctx.man, Side::Upper, sigma, &grid)?;
    let lower = certify_coeff_bound(&ctx.man, Side::Lower, sigma, &grid)?;
    ctx.outcome.metrics.insert("certificate.upper".into(), upper.constant);
    ctx.outcome.metrics.insert("certificate.lower".into(), lower.constant);
    for c in [&upper, &lower] {
        if !c.is_valid() {
            ctx.outcome.warnings.push(format!("certify: {:?} certificate is not valid", c.side));
        }
    }
    ctx.write_json("certificates.json", &[&upper, &lower])?;
    ctx.upper = Some(upper);
    ctx.lower = Some(lower);
    Ok(())
}

fn certificates(ctx: &mut Ctx) -> anyhow::Result<(f64, f64)> {
    if ctx.upper.is_none() {
        let sigma = ctx.sc.sigma();
        let grid = certificate_grid(ctx.r_max());
        ctx.upper = Some(certify_coeff_bound(&ctx.man, Side::Upper, sigma, &grid)?);
        ctx.lower = Some(certify_coeff_bound(&ctx.man, Side::Lower, sigma, &grid)?);
    }
    Ok((ctx.upper.as_ref().unwrap().constant, ctx.lower.as_ref().unwrap().constant))
}

fn barrier_pair(ctx: &mut Ctx, t_horizon: f64) -> anyhow::Result<(PowerBarrier, PowerBarrier)> {
    let (cu, cl) = certificates(ctx)?;
    let (sigma, m) = (ctx.sc.sigma(), ctx.sc.pme.m);
    let a = super_amplitude(cu, sigma, m)?;
    let sup = PowerBarrier::new(a, ctx.sc.solver.norm_r.max(1.0), sigma, m, t_horizon, Role::Super)?;
    let c2 = if sigma < 2.0 { Some(cl) } else { None };
    let (r, a2) = sub_parameters(c2, sigma, ctx.man.dim(), m)?;
    let sub = PowerBarrier::new(a2, r, sigma, m, t_horizon, Role::Sub)?;
    Ok((sup, sub))
}

fn barriers(ctx: &mut Ctx) -> anyhow::Result<()> {
    let (sup, sub) = barrier_pair(ctx, ctx.sc.datum.t_horizon.unwrap_or(1.0))?;
    let r = ctx.r_max();
    let grid = RadialGrid::new(&ctx.man, r, (r / ctx.sc.solver.h).round() as usize)?;
    let mut rows = Vec::new();
    let mut all = true;
    for b in [&sup, &sub] {
        let rep = barrier_residual(&ctx.man, b, &grid)?;
        let tag = if b.role == Role::Super { "super" } else { "sub" };
        ctx.outcome.metrics.insert(format!("barrier.{tag}.a"), b.a);
        if !rep.passes() {
            let w = rep.worst();
            all = false;
            ctx.outcome.warnings.push(format!(
                "barriers: {tag} residual {:.3e} exceeds tolerance {:.3e} at ρ = {}",
                w.residual, w.tolerance, w.rho
            ));
        }
        rows.extend(rep.rows.iter().map(|row| {
            vec![tag.to_string(), f(row.rho), f(row.residual), f(row.tolerance), row.pass.to_string()]
        }));
    }
    if ctx.sc.checks.barrier_signs {
        ctx.outcome.check("barrier_signs", all, "super and sub residual sign contracts".into());
    }
    ctx.write_csv("barriers.csv", &["role", "rho", "residual", "tolerance", "pass"], rows)
}

fn profile(ctx: &mut Ctx) -> anyhow::Result<()> {
    let alpha = ctx.sc.datum.alpha.unwrap_or(1.0);
    let reach = ctx.sc.checks.profile_rho_max.unwrap_or(ctx.r_max());
    let p = integrate_profile(&ctx.man, alpha, ctx.sc.pme.m, reach)?;
    write_profile(ctx, &p)?;
    if let Some(stop) = p.stopped_at {
        ctx.outcome.warnings.push(format!("profile: integration stopped at ρ = {stop}"));
    }
    match asymptotic_exponent(&p) {
        Ok(fit) => {
            ctx.outcome.metrics.insert("profile.exponent".into(), fit.exponent);
            if let Some(tol) = ctx.sc.checks.exponent_rel_tol {
                let target = ctx.sc.sigma() / (ctx.sc.pme.m - 1.0);
                ctx.outcome.check(
                    "profile_exponent",
                    (fit.exponent - target).abs() <= tol * target,
                    format!(
                        "fitted {:.4} on [{:.1}, {:.1}], target {target}",
                        fit.exponent, fit.window.0, fit.window.1
                    ),
                );
            }
        }
        Err(e) => {
            if ctx.sc.checks.exponent_rel_tol.is_some() {
                ctx.outcome.check("profile_exponent", false, e.to_string());
            }
        }
    }
    Ok(())
}

fn write_profile(ctx: &Ctx, p: &StationaryProfile) -> anyhow::Result<()> {
    let flux = p.flux();
    let rows = (0..p.rho.len()).map(|i| vec![f(p.rho[i]), f(p.w[i]), f(p.v[i]), f(flux[i])]);
    ctx.write_csv("profile.csv", &["rho", "W", "V", "flux"], rows)
}

type Datum = Box<dyn Fn(f64) -> f64 + Send + Sync>;

fn datum(ctx: &mut Ctx) -> anyhow::Result<Datum> {
    let d = ctx.sc.datum.clone();
    let amp = d.amplitude;
    let m = ctx.sc.pme.m;
    Ok(match d.kind {
        DatumKind::Zero => Box::new(|_| 0.0),
        DatumKind::Profile => {
            let reach = ctx.r_max() + 2.0 * ctx.sc.solver.h + 1e-3 * ctx.r_max();
            let p = integrate_profile(&ctx.man, d.alpha.unwrap_or(1.0), m, reach)?;
            if p.stopped_at.is_some() {
                bail!("datum: profile does not reach the outer radius");
            }
            let p = rescale_profile(&p, d.t_horizon.unwrap_or(1.0))?;
            Box::new(move |r| amp * p.w_at(r).unwrap_or(f64::NAN))
        }
        DatumKind::Power => {
            let (s, c) = (d.exponent.unwrap_or(1.0), d.shift.unwrap_or(0.0));
            Box::new(move |r| amp * (c * c + r * r).powf(s / 2.0))
        }
        DatumKind::Bump => {
            let w = d.width.unwrap_or(1.0);
            Box::new(move |r| amp * (1.0 - (r / w).powi(2)).max(0.0))
        }
        DatumKind::Barenblatt => {
            let b = Barenblatt { dim: ctx.man.dim(), m, c: amp };
            let t0 = d.t0.unwrap_or(1.0);
            Box::new(move |r| b.value(r, t0))
        }
        DatumKind::SuperBarrier | DatumKind::SubBarrier => {
            let (sup, sub) = barrier_pair(ctx, d.t_horizon.unwrap_or(1.0))?;
            let b = if d.kind == DatumKind::SuperBarrier { sup } else { sub };
            Box::new(move |r| amp * b.value(r))
        }
        DatumKind::Csv => {
            let path = d.path.clone().unwrap_or_default();
            let table = read_datum_csv(Path::new(&path))?;
            Box::new(move |r| amp * interpolate(&table, r))
        }
    })
}

fn read_datum_csv(path: &Path) -> anyhow::Result<Vec<(f64, f64)>> {
    let mut rd = csv::Reader::from_path(path).with_context(|| format!("reading datum {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let get = |k: usize| -> anyhow::Result<f64> {
            rec.get(k)
                .with_context(|| format!("{}: row {} has fewer than 2 columns", path.display(), i + 2))?
                .trim()
                .parse::<f64>()
                .with_context(|| format!("{}: row {}", path.display(), i + 2))
        };
        rows.push((get(0)?, get(1)?));
    }
    if rows.len() < 2 || rows.windows(2).any(|w| w[1].0 <= w[0].0) {
        bail!("{}: need at least two rows with increasing rho", path.display());
    }
    Ok(rows)
}

fn interpolate(t: &[(f64, f64)], r: f64) -> f64 {
    let k = t.partition_point(|p| p.0 <= r);
    if k == 0 {
        return t[0].1;
    }
    if k == t.len() {
        return t[k - 1].1;
    }
    let (a, b) = (t[k - 1], t[k]);
    a.1 + (b.1 - a.1) * (r - a.0) / (b.0 - a.0)
}

fn options(ctx: &Ctx, radius: f64, u0: &Datum) -> anyhow::Result<SolveOptions> {
    let s = &ctx.sc.solver;
    let mut o = SolveOptions::new(ctx.norm());
    o.delta_max = s.delta_max;
    o.outputs = s.outputs.clone();
    o.boundary = match s.boundary {
        BoundaryKind::Zero => OuterBoundary::Zero,
        BoundaryKind::Floor => OuterBoundary::Floor(s.floor.unwrap_or(0.0)),
        BoundaryKind::FarField => OuterBoundary::far_field_for(&ctx.man, u0, ctx.sc.pme.m, radius)?,
    };
    Ok(o)
}

fn write_trajectory(ctx: &Ctx, radius: f64, rep: &SolveReport) -> anyhow::Result<()> {
    let rows = rep
        .trajectory
        .iter()
        .map(|r| vec![f(r.t), f(r.max_u), f(r.weighted_norm), f(r.mass)]);
    ctx.write_csv(&format!("trajectory_R{radius}.csv"), &["t", "max_u", "weighted_norm", "mass"], rows)?;
    ctx.write_json(&format!("report_R{radius}.json"), rep)
}

fn solve_stage(ctx: &mut Ctx) -> anyhow::Result<()> {
    if !ctx.sc.solver.refinement.is_empty() {
        return refinement(ctx);
    }
    let u0 = datum(ctx)?;
    let m = ctx.sc.pme.m;
    let s = ctx.sc.solver.clone();
    let checks = ctx.sc.checks.clone();
    let mut all_zero = true;
    for &radius in &s.radii {
        let grid = RadialGrid::new(&ctx.man, radius, (radius / s.h).round() as usize)?;
        let data: Vec<f64> = grid.centers().iter().map(|&r| u0(r)).collect();
        if data.iter().any(|v| !v.is_finite()) {
            bail!("datum: non-finite values on B_{radius}");
        }
        let opts = options(ctx, radius, &u0)?;
        let rep = solve(&grid, &data, m, s.horizon, &opts)?;
        write_trajectory(ctx, radius, &rep)?;
        all_zero &= rep.trajectory.iter().all(|r| r.max_u == 0.0);
        let tag = format!("R{radius}");
        if let Some(t) = rep.t_est() {
            ctx.outcome.metrics.insert(format!("t_est.{tag}"), t);
            ctx.outcome.metrics.insert("t_est".into(), t);
        }
        if let SolveStatus::StalledStep { t, dt } = rep.status {
            ctx.outcome.warnings.push(format!("solve {tag}: stalled at t = {t} with dt = {dt:e}"));
        }
        if let Some(want) = checks.status {
            let got = matches!(
                (want, rep.status),
                (ExpectedStatus::BlowUp, SolveStatus::BlowUp { .. }) | (ExpectedStatus::ReachedHorizon, SolveStatus::ReachedHorizon)
            );
            ctx.outcome.check(&format!("status.{tag}"), got, format!("{:?}", rep.status));
        }
        if let Some([lo, hi]) = checks.t_est_range {
            let t = rep.t_est();
            ctx.outcome.check(
                &format!("t_est.{tag}"),
                matches!(t, Some(x) if (lo..=hi).contains(&x)),
                format!("{t:?} vs [{lo}, {hi}]"),
            );
        }
        if let Some(tol) = checks.separable_spread {
            let mut spread: f64 = 0.0;
            for snap in rep.snapshots.iter().filter(|sn| s.outputs.iter().any(|&t| (t - sn.t).abs() < 1e-12)) {
                let ratios: Vec<f64> = snap.u.iter().zip(&data).map(|(u, w)| u / w).collect();
                let hi = ratios.iter().cloned().fold(f64::MIN, f64::max);
                let lo = ratios.iter().cloned().fold(f64::MAX, f64::min);
                spread = spread.max(hi / lo - 1.0);
            }
            ctx.outcome.metrics.insert(format!("separable_spread.{tag}"), spread);
            ctx.outcome.check(&format!("separable_spread.{tag}"), spread <= tol, format!("{spread:.3e} ≤ {tol}"));
        }
    }
    if ctx.sc.datum.kind == DatumKind::Zero {
        ctx.outcome.check("zero_trajectory", all_zero, "u ≡ 0 stays zero".into());
    }
    if checks.domain_monotonicity && s.radii.len() > 1 {
        let mut o = SolveOptions::new(ctx.norm());
        o.delta_max = s.delta_max;
        o.outputs = s.outputs.clone();
        let rep = expand_domain(&ctx.man, &u0, m, &s.radii, s.h, s.horizon, &o)?;
        let rows = rep
            .sup_diffs
            .iter()
            .enumerate()
            .map(|(k, d)| vec![f(s.radii[k]), f(s.radii[k + 1]), f(*d)]);
        ctx.write_csv("domain_monotonicity.csv", &["r_inner", "r_outer", "sup_diff"], rows)?;
        ctx.outcome.metrics.insert("domain.max_violation".into(), rep.max_violation);
        ctx.outcome.check(
            "domain_monotonicity",
            rep.monotone,
            format!("violation {:.3e} ≤ {:.3e}", rep.max_violation, rep.tolerance),
        );
    }
    Ok(())
}

/// Barenblatt refinement study on the largest radius.
fn refinement(ctx: &mut Ctx) -> anyhow::Result<()> {
    let s = ctx.sc.solver.clone();
    let m = ctx.sc.pme.m;
    let t0 = ctx.sc.datum.t0.unwrap_or(1.0);
    let b = Barenblatt {
        dim: ctx.man.dim(),
        m,
        c: ctx.sc.datum.amplitude,
    };
    let radius = ctx.r_max();
    let mut rows = Vec::new();
    let mut errors: Vec<f64> = Vec::new();
    for (k, &cells) in s.refinement.iter().enumerate() {
        let grid = RadialGrid::new(&ctx.man, radius, cells)?;
        let u0: Vec<f64> = grid.centers().iter().map(|&r| b.value(r, t0)).collect();
        let mut o = SolveOptions::new(ctx.norm());
        // Time error must shrink with h for the study to measure the scheme.
        o.delta_max = s.delta_max * grid.h() / (radius / s.refinement[0] as f64);
        let rep = solve(&grid, &u0, m, s.horizon, &o)?;
        let u = &rep.snapshots.last().context("no final state")?.u;
        let exact: Vec<f64> = grid.centers().iter().map(|&r| b.value(r, t0 + s.horizon)).collect();
        let diff: Vec<f64> = u.iter().zip(&exact).map(|(a, e)| (a - e).abs()).collect();
        let err = grid.integrate(&diff) / grid.integrate(&exact);
        let contraction = errors.last().map(|p| p / err);
        rows.push(vec![
            cells.to_string(),
            f(grid.h()),
            f(err),
            contraction.map(f).unwrap_or_default(),
        ]);
        errors.push(err);
        if k + 1 == s.refinement.len() {
            write_trajectory(ctx, radius, &rep)?;
        }
    }
    ctx.write_csv("convergence.csv", &["cells", "h", "l1_error", "contraction"], rows)?;
    let min_c = errors.windows(2).map(|w| w[0] / w[1]).fold(f64::INFINITY, f64::min);
    let last = *errors.last().context("empty refinement")?;
    ctx.outcome.metrics.insert("refinement.min_contraction".into(), min_c);
    ctx.outcome.metrics.insert("refinement.l1_error".into(), last);
    if let Some(want) = ctx.sc.checks.min_contraction {
        ctx.outcome.check("min_contraction", min_c >= want, format!("{min_c:.3} ≥ {want}"));
    }
    if let Some(tol) = ctx.sc.checks.max_l1_error {
        ctx.outcome.check("l1_error", last <= tol, format!("{last:.3e} ≤ {tol}"));
    }
    Ok(())
}
