//! Declarative scenario files.
//!
//! A scenario names a model space, a drift from a fixed family of presets and
//! a list of checks. Everything is plain TOML; nothing in a file is executed.

use std::f64::consts::TAU;
use std::path::Path;

use cdcert::{Dimension, FieldSpec, ModelSpace, Vec3};
use serde::Deserialize;
use thiserror::Error;

use crate::registry::{self, Param, SpaceClass};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("check #{index} ({name}): {reason}")]
    Check {
        index: usize,
        name: String,
        reason: String,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub space: SpaceSpec,
    #[serde(default)]
    pub field: FieldPreset,
    pub checks: Vec<CheckSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpaceSpec {
    Interval {
        lo: f64,
        hi: f64,
    },
    Circle {
        #[serde(default = "default_circumference")]
        circumference: f64,
    },
    Sphere {
        #[serde(default = "one")]
        radius: f64,
    },
    Torus {
        lx: f64,
        ly: f64,
    },
}

fn default_circumference() -> f64 {
    TAU
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldPreset {
    #[default]
    Zero,
    /// constant chart vector `(c, cy)`
    ConstantDrift {
        c: f64,
        #[serde(default)]
        cy: f64,
    },
    OuDrift {
        #[serde(default = "one")]
        strength: f64,
        #[serde(default)]
        center: f64,
    },
    RotationAlpha {
        alpha: f64,
    },
    /// `Z = −V'` with `V(x) = Σ coefficients[k] x^k`
    #[serde(rename = "gradient-of-V")]
    GradientOfV {
        coefficients: Vec<f64>,
    },
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// directory for curve files, relative to the scenario file
    pub csv_dir: Option<String>,
    /// report file, relative to the scenario file
    pub report: Option<String>,
}

/// One requested check. Only the parameters listed for the check in the
/// registry may be present.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub name: String,
    pub k: f64,
    #[serde(default)]
    pub n: Option<DimSpec>,
    /// a failing non-asserted check is reported but does not change the exit code
    #[serde(default = "yes")]
    pub assert: bool,
    pub cells: Option<usize>,
    pub pairs: Option<usize>,
    pub steps: Option<usize>,
    pub times: Option<Vec<f64>>,
    pub radii: Option<Vec<f64>>,
    pub center: Option<Vec<f64>>,
    pub geodesics: Option<usize>,
    pub inits: Option<usize>,
    pub trials: Option<usize>,
    pub eps: Option<Vec<f64>>,
    pub points: Option<usize>,
}

fn yes() -> bool {
    true
}

/// `N` as a number or the word `inf`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum DimSpec {
    Number(f64),
    Word(String),
}

impl DimSpec {
    fn resolve(&self) -> Result<Dimension, String> {
        match self {
            Self::Number(v) if v.is_finite() => Ok(Dimension::Finite(*v)),
            Self::Number(v) => Err(format!("N = {v} is not a number; write \"inf\"")),
            Self::Word(w) if matches!(w.as_str(), "inf" | "infinity" | "Inf") => {
                Ok(Dimension::Infinite)
            }
            Self::Word(w) => Err(format!("N = \"{w}\" is neither a number nor \"inf\"")),
        }
    }
}

impl Scenario {
    pub fn from_str(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_str(&text)
    }

    pub fn space(&self) -> ModelSpace {
        match self.space {
            SpaceSpec::Interval { lo, hi } => ModelSpace::interval(lo, hi),
            SpaceSpec::Circle { circumference } => ModelSpace::circle(circumference),
            SpaceSpec::Sphere { radius } => ModelSpace::sphere2(radius),
            SpaceSpec::Torus { lx, ly } => ModelSpace::flat_torus(lx, ly),
        }
    }

    pub fn field(&self) -> FieldSpec {
        match &self.field {
            FieldPreset::Zero => FieldSpec::zero(),
            FieldPreset::ConstantDrift { c, cy } => FieldSpec::constant(Vec3::new(*c, *cy, 0.0)),
            FieldPreset::OuDrift { strength, center } => FieldSpec::ou(*strength, *center),
            FieldPreset::RotationAlpha { alpha } => FieldSpec::rotation(*alpha),
            FieldPreset::GradientOfV { coefficients } => {
                FieldSpec::gradient_of_polynomial(coefficients.clone())
            }
        }
    }

    pub fn space_class(&self) -> SpaceClass {
        match self.space {
            SpaceSpec::Interval { .. } | SpaceSpec::Circle { .. } => SpaceClass::Line,
            SpaceSpec::Sphere { .. } => SpaceClass::Sphere,
            SpaceSpec::Torus { .. } => SpaceClass::Torus,
        }
    }

    /// Rotation strength of the fiber drift, zero for the zero field.
    pub fn rotation_alpha(&self) -> Option<f64> {
        match self.field {
            FieldPreset::Zero => Some(0.0),
            FieldPreset::RotationAlpha { alpha } => Some(alpha),
            _ => None,
        }
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        let positive = |v: f64| v.is_finite() && v > 0.0;
        match self.space {
            SpaceSpec::Interval { lo, hi } if !(lo.is_finite() && hi.is_finite() && lo < hi) => {
                return bad(format!("interval needs lo < hi, got [{lo}, {hi}]"))
            }
            SpaceSpec::Circle { circumference } if !positive(circumference) => {
                return bad(format!(
                    "circumference must be positive, got {circumference}"
                ))
            }
            SpaceSpec::Sphere { radius } if !positive(radius) => {
                return bad(format!("radius must be positive, got {radius}"))
            }
            SpaceSpec::Torus { lx, ly } if !(positive(lx) && positive(ly)) => {
                return bad(format!("torus sides must be positive, got {lx} x {ly}"))
            }
            _ => {}
        }
        let class = self.space_class();
        match &self.field {
            FieldPreset::Zero => {}
            FieldPreset::ConstantDrift { c, cy } => {
                if !(c.is_finite() && cy.is_finite()) {
                    return bad("constant drift must be finite".into());
                }
                if class == SpaceClass::Sphere {
                    return bad(
                        "constant-drift is not tangent to a sphere; use rotation-alpha".into(),
                    );
                }
                if class == SpaceClass::Line && *cy != 0.0 {
                    return bad("cy is only meaningful on a torus".into());
                }
            }
            FieldPreset::OuDrift { strength, center } => {
                if !matches!(self.space, SpaceSpec::Interval { .. }) {
                    return bad("ou-drift is defined on an interval only".into());
                }
                if !(strength.is_finite() && center.is_finite()) {
                    return bad("ou-drift parameters must be finite".into());
                }
            }
            FieldPreset::RotationAlpha { alpha } => {
                if class != SpaceClass::Sphere {
                    return bad("rotation-alpha is defined on a sphere only".into());
                }
                if !alpha.is_finite() {
                    return bad("alpha must be finite".into());
                }
            }
            FieldPreset::GradientOfV { coefficients } => {
                if !matches!(self.space, SpaceSpec::Interval { .. }) {
                    return bad("gradient-of-V is defined on an interval only".into());
                }
                if coefficients.is_empty()
                    || coefficients.len() > 9
                    || coefficients.iter().any(|c| !c.is_finite())
                {
                    return bad("gradient-of-V needs 1 to 9 finite coefficients".into());
                }
            }
        }
        if self.checks.is_empty() {
            return bad("a scenario needs at least one check".into());
        }
        for (index, c) in self.checks.iter().enumerate() {
            self.validate_check(c)
                .map_err(|reason| ScenarioError::Check {
                    index,
                    name: c.name.clone(),
                    reason,
                })?;
        }
        Ok(())
    }

    fn validate_check(&self, c: &CheckSpec) -> Result<(), String> {
        let info = registry::lookup(&c.name).ok_or_else(|| {
            format!(
                "unknown check; known checks: {}",
                registry::names().join(", ")
            )
        })?;
        if !info.spaces.contains(&self.space_class()) {
            return Err(format!(
                "not available on this space ({:?})",
                self.space_class()
            ));
        }
        if !c.k.is_finite() {
            return Err("K must be finite".into());
        }
        info.dimension.accepts(c.resolved_n()?)?;
        if info.name == "bonnet-myers" && c.k <= 0.0 {
            return Err("the diameter bound needs K > 0".into());
        }
        if info.name == "warped-sphere" {
            let alpha = self
                .rotation_alpha()
                .ok_or("the fiber drift must be zero or rotation-alpha")?;
            let n = c.resolved_n()?.and_then(|d| d.finite()).unwrap_or(0.0);
            // the unit rotation has drift constant 1, so alpha itself must stay below 1/2
            if !(0.0..=0.5).contains(&alpha)
                || alpha > n - 2.0
                || n < 2.0
                || (n == 2.0 && alpha > 0.0)
            {
                return Err(format!("needs N > 2 (or N = 2 without drift) and 0 <= alpha <= min(1/2, N - 2), got N = {n}, alpha = {alpha}"));
            }
            if !matches!(self.space, SpaceSpec::Sphere { radius } if radius == 1.0) {
                return Err("the fiber is the unit sphere".into());
            }
        }
        for (param, present) in c.present_params() {
            if present && !info.params.contains(&param) {
                return Err(format!(
                    "parameter `{}` is not used by this check",
                    param.key()
                ));
            }
        }
        let range = |name: &str, v: usize, lo: usize, hi: usize| {
            if (lo..=hi).contains(&v) {
                Ok(())
            } else {
                Err(format!("{name} = {v} outside [{lo}, {hi}]"))
            }
        };
        if let Some(v) = c.cells {
            let (lo, hi) = if info.params.contains(&Param::Times) {
                (16, 1024)
            } else {
                (16, 2000)
            };
            range("cells", v, lo, hi)?;
        }
        if let Some(v) = c.pairs {
            range("pairs", v, 1, 64)?;
        }
        if let Some(v) = c.steps {
            range("steps", v, 3, 201)?;
        }
        if let Some(v) = c.geodesics {
            range("geodesics", v, 1, 1024)?;
        }
        if let Some(v) = c.inits {
            range("inits", v, 1, 64)?;
        }
        if let Some(v) = c.trials {
            range("trials", v, 1, 10_000)?;
        }
        if let Some(v) = c.points {
            range("points", v, 4, 5000)?;
        }
        let increasing = |name: &str, xs: &[f64]| {
            if xs.is_empty() || xs.len() > 256 {
                return Err(format!("{name} needs 1 to 256 entries"));
            }
            if xs.iter().any(|x| !(x.is_finite() && *x > 0.0))
                || xs.windows(2).any(|w| w[1] <= w[0])
            {
                return Err(format!("{name} must be positive and strictly increasing"));
            }
            Ok(())
        };
        if let Some(t) = &c.times {
            increasing("times", t)?;
            if t.last().copied().unwrap_or(0.0) > 100.0 {
                return Err("times beyond 100 are not supported".into());
            }
        }
        if let Some(r) = &c.radii {
            increasing("radii", r)?;
            let limit = crate::runner::default_radius_limit(&self.space());
            if r.last().copied().unwrap_or(0.0) > limit * (1.0 + 1e-12) {
                return Err(format!("radii exceed the limit {limit}"));
            }
        }
        if info.name == "bishop-gromov"
            && c.k > 0.0
            && matches!(c.resolved_n()?, Some(Dimension::Finite(v)) if v == 1.0)
        {
            return Err("N = 1 needs K <= 0".into());
        }
        if let Some(e) = &c.eps {
            increasing("eps", e)?;
        }
        if let Some(p) = &c.center {
            let space = self.space();
            if p.len() != space.ambient_dim() {
                return Err(format!("center needs {} coordinates", space.ambient_dim()));
            }
            let mut q = Vec3::zeros();
            for (i, x) in p.iter().enumerate() {
                q[i] = *x;
            }
            if !space.contains(&q) {
                return Err("center is not a point of the space".into());
            }
        }
        Ok(())
    }
}

impl CheckSpec {
    pub fn resolved_n(&self) -> Result<Option<Dimension>, String> {
        self.n.as_ref().map(|d| d.resolve()).transpose()
    }

    fn present_params(&self) -> [(Param, bool); 11] {
        [
            (Param::Cells, self.cells.is_some()),
            (Param::Pairs, self.pairs.is_some()),
            (Param::Steps, self.steps.is_some()),
            (Param::Times, self.times.is_some()),
            (Param::Radii, self.radii.is_some()),
            (Param::Center, self.center.is_some()),
            (Param::Geodesics, self.geodesics.is_some()),
            (Param::Inits, self.inits.is_some()),
            (Param::Trials, self.trials.is_some()),
            (Param::Eps, self.eps.is_some()),
            (Param::Points, self.points.is_some()),
        ]
    }
}
