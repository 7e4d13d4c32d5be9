//! Scenario files: TOML with one section per pipeline stage.

use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use pme_core::comparison::{build_psi_star_lower, build_psi_star_upper};
use pme_core::geometry::sigma_of_gamma;
use pme_core::{CurvatureBounds, ModelManifold, WarpFunction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub manifold: ManifoldSpec,
    pub curvature: CurvatureSpec,
    pub pme: PmeSpec,
    pub datum: DatumSpec,
    pub solver: SolverSpec,
    #[serde(default)]
    pub checks: Checks,
    #[serde(default)]
    pub outputs: OutputSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Warp {
    Euclidean,
    Hyperbolic,
    PowerLaw,
    ExpPower,
    /// Model built from the Ricci lower bound in `[curvature]`.
    PsiStarLower,
    /// Model built from the sectional upper bound in `[curvature]`.
    PsiStarUpper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSpec {
    pub dim: usize,
    pub warp: Warp,
    /// Exponent of `ρ^δ` for `power_law`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// `ψ = exp(c ρ^σ)`-type parameters for `exp_power`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Extent of generated warp tables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvatureSpec {
    pub gamma: f64,
    pub c0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmeSpec {
    pub m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatumKind {
    Zero,
    /// Stationary profile `W_{T,α}` rescaled to `t_horizon`.
    Profile,
    /// `amplitude · (shift² + ρ²)^{exponent/2}`.
    Power,
    /// `amplitude · (1 − (ρ/width)²)_+`.
    Bump,
    /// Barenblatt solution at `t0`; enables the refinement study.
    Barenblatt,
    SuperBarrier,
    SubBarrier,
    /// Two-column `rho,u0` file, linearly interpolated.
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatumSpec {
    pub kind: DatumKind,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Zero,
    Floor,
    FarField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub radii: Vec<f64>,
    /// Cell width shared by all radii.
    pub h: f64,
    pub horizon: f64,
    #[serde(default = "one")]
    pub norm_r: f64,
    #[serde(default = "zero_boundary")]
    pub boundary: BoundaryKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<f64>,
    #[serde(default = "default_delta")]
    pub delta_max: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outputs: Vec<f64>,
    /// Cell counts of a refinement study on the largest radius.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub refinement: Vec<usize>,
}

fn zero_boundary() -> BoundaryKind {
    BoundaryKind::Zero
}

fn default_delta() -> f64 {
    0.02
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedStatus {
    ReachedHorizon,
    BlowUp,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checks {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<ExpectedStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_est_range: Option<[f64; 2]>,
    /// Largest allowed spread of `u/u₀` at the output times.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub separable_spread: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_contraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_l1_error: Option<f64>,
    /// Relative tolerance of the fitted profile exponent around `σ/(m−1)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent_rel_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub domain_monotonicity: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub barrier_signs: bool,
    /// Profile extent for the exponent fit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile_rho_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            formats: default_formats(),
        }
    }
}

fn default_dir() -> String {
    "out".into()
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl Scenario {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| anyhow::anyhow!("config schema violation: {e}"))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn sigma(&self) -> f64 {
        sigma_of_gamma(self.curvature.gamma)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let m = &self.manifold;
        if m.dim < 2 {
            bail!("manifold.dim: must be at least 2");
        }
        match m.warp {
            Warp::PowerLaw if m.delta.is_none() => bail!("manifold.delta: required for power_law"),
            Warp::ExpPower if m.c.is_none() || m.sigma.is_none() => bail!("manifold.c, manifold.sigma: required for exp_power"),
            _ => {}
        }
        let c = &self.curvature;
        if !(c.gamma <= 2.0) {
            bail!("curvature.gamma: must not exceed 2");
        }
        if self.manifold.warp == Warp::PsiStarUpper && (c.c1.is_none() || c.r1.is_none()) {
            bail!("curvature.c1, curvature.r1: required for psi_star_upper");
        }
        CurvatureBounds::new(c.gamma, c.c0, c.c1, c.r1).map_err(|e| anyhow::anyhow!("curvature: {e}"))?;
        if !(self.pme.m > 1.0) {
            bail!("pme.m: must exceed 1");
        }
        let s = &self.solver;
        if s.radii.is_empty() || s.radii.windows(2).any(|w| w[1] <= w[0]) || s.radii[0] <= 0.0 {
            bail!("solver.radii: must be a nonempty increasing list of positive radii");
        }
        if !(s.h > 0.0) {
            bail!("solver.h: must be positive");
        }
        for r in &s.radii {
            let n = (r / s.h).round();
            if (n * s.h - r).abs() > 1e-9 * r || n < 4.0 {
                bail!("solver.radii: {r} is not a multiple (≥ 4) of solver.h");
            }
        }
        if !(s.horizon > 0.0) {
            bail!("solver.horizon: must be positive");
        }
        if s.boundary == BoundaryKind::Floor && s.floor.is_none() {
            bail!("solver.floor: required for the floor boundary");
        }
        if !(s.delta_max > 0.0 && s.delta_max < 1.0) {
            bail!("solver.delta_max: must lie in (0, 1)");
        }
        let d = &self.datum;
        match d.kind {
            DatumKind::Csv if d.path.is_none() => bail!("datum.path: required for csv data"),
            DatumKind::Power if d.exponent.is_none() => bail!("datum.exponent: required for power data"),
            DatumKind::Bump if d.width.is_none() => bail!("datum.width: required for bump data"),
            DatumKind::Barenblatt if s.refinement.is_empty() => bail!("solver.refinement: required for barenblatt data"),
            _ => {}
        }
        if !s.refinement.is_empty() && d.kind != DatumKind::Barenblatt {
            bail!("solver.refinement: only supported for barenblatt data");
        }
        Ok(())
    }

    /// Manifold with a warp long enough for every radius plus the profile
    /// and certificate extents.
    pub fn build_manifold(&self) -> anyhow::Result<ModelManifold> {
        let spec = &self.manifold;
        let c = &self.curvature;
        let reach = spec
            .rho_max
            .unwrap_or_else(|| (self.solver.radii.last().copied().unwrap_or(1.0) * 1.5).max(self.checks.profile_rho_max.unwrap_or(0.0) + 1.0).max(60.0));
        let warp = match spec.warp {
            Warp::Euclidean => WarpFunction::euclidean(),
            Warp::Hyperbolic => WarpFunction::hyperbolic(),
            Warp::PowerLaw => WarpFunction::power_law(spec.delta.unwrap_or(1.0))?,
            Warp::ExpPower => WarpFunction::exp_power(spec.c.unwrap_or(1.0), spec.sigma.unwrap_or(1.0))?,
            Warp::PsiStarLower => build_psi_star_lower(c.c0, c.gamma, spec.dim, reach)?,
            Warp::PsiStarUpper => build_psi_star_upper(
                c.c1.context("curvature.c1 missing")?,
                c.gamma,
                c.r1.context("curvature.r1 missing")?,
                spec.dim,
                reach,
            )?,
        };
        Ok(ModelManifold::new(spec.dim, warp)?)
    }
}

/// Sets a dotted numeric field (e.g. `pme.m`, `datum.amplitude`) of a parsed
/// scenario document.
pub fn set_field(doc: &mut toml::Table, path: &str, value: f64) -> anyhow::Result<()> {
    let mut keys = path.split('.').collect::<Vec<_>>();
    let last = keys.pop().filter(|k| !k.is_empty()).context("empty axis name")?;
    let mut table = doc;
    for k in keys {
        table = table
            .get_mut(k)
            .and_then(|v| v.as_table_mut())
            .with_context(|| format!("axis {path}: no section {k}"))?;
    }
    match table.get(last) {
        Some(toml::Value::Float(_)) | None => {
            table.insert(last.into(), toml::Value::Float(value));
        }
        Some(toml::Value::Integer(_)) if value.fract() == 0.0 => {
            table.insert(last.into(), toml::Value::Integer(value as i64));
        }
        Some(other) => bail!("axis {path}: field holds {}, not a number", other.type_str()),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "t"
[manifold]
dim = 3
warp = "hyperbolic"
[curvature]
gamma = 0.0
c0 = 1.0
[pme]
m = 2.0
[datum]
kind = "zero"
[solver]
radii = [5.0]
h = 0.1
horizon = 1.0
"#;

    #[test]
    fn minimal_config_round_trips() {
        let s = Scenario::parse(MINIMAL).unwrap();
        assert_eq!(s.datum.amplitude, 1.0);
        assert_eq!(s.outputs.formats, vec![Format::Csv, Format::Json]);
        let again = Scenario::parse(&s.to_toml().unwrap()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn unknown_fields_are_reported_with_their_name() {
        let bad = MINIMAL.replace("m = 2.0", "m = 2.0\nmm = 3.0");
        let err = format!("{:#}", Scenario::parse(&bad).unwrap_err());
        assert!(err.contains("mm"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let bad = MINIMAL.replace("radii = [5.0]", "radii = [5.05]");
        assert!(format!("{}", Scenario::parse(&bad).unwrap_err()).starts_with("solver.radii"));
        let bad = MINIMAL.replace("m = 2.0", "m = 1.0");
        assert!(format!("{}", Scenario::parse(&bad).unwrap_err()).starts_with("pme.m"));
    }

    #[test]
    fn set_field_edits_nested_numbers() {
        let mut doc: toml::Table = toml::from_str(MINIMAL).unwrap();
        set_field(&mut doc, "pme.m", 3.0).unwrap();
        set_field(&mut doc, "manifold.dim", 4.0).unwrap();
        set_field(&mut doc, "datum.amplitude", 2.0).unwrap();
        let s: Scenario = doc.clone().try_into().unwrap();
        assert_eq!((s.pme.m, s.manifold.dim, s.datum.amplitude), (3.0, 4, 2.0));
        assert!(set_field(&mut doc, "datum.kind", 1.0).is_err());
        assert!(set_field(&mut doc, "nosuch.x", 1.0).is_err());
    }
}
