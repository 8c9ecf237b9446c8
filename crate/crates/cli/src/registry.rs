//! The static table of available checks.

use std::fmt::Write as _;

use cdcert::Dimension;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaceClass {
    /// interval or circle
    Line,
    Sphere,
    Torus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Param {
    Cells,
    Pairs,
    Steps,
    Times,
    Radii,
    Center,
    Geodesics,
    Inits,
    Trials,
    Eps,
    Points,
}

impl Param {
    pub fn key(self) -> &'static str {
        match self {
            Param::Cells => "cells",
            Param::Pairs => "pairs",
            Param::Steps => "steps",
            Param::Times => "times",
            Param::Radii => "radii",
            Param::Center => "center",
            Param::Geodesics => "geodesics",
            Param::Inits => "inits",
            Param::Trials => "trials",
            Param::Eps => "eps",
            Param::Points => "points",
        }
    }

    fn schema(self, flow: bool) -> &'static str {
        match self {
            Param::Cells if flow => "cells: integer in [16, 1024], default 256",
            Param::Cells => "cells: integer in [16, 2000], default 120",
            Param::Pairs if flow => "pairs: integer in [1, 64], default 2; random bump pairs from the seed, every second one a translate",
            Param::Pairs => "pairs: integer in [1, 64], default 4; random bump pairs drawn from the seed",
            Param::Steps => "steps: integer in [3, 201], default 21; time samples along each geodesic",
            Param::Times => "times: increasing list in (0, 100], default [0.1, 0.2, 0.5, 1.0]",
            Param::Radii => "radii: increasing positive list, default 12 radii up to the polar limit",
            Param::Center => "center: point in chart coordinates, default drawn from the seed",
            Param::Geodesics => "geodesics: integer in [1, 1024], default 64",
            Param::Inits => "inits: integer in [1, 64], default 8; symmetric initial derivatives per geodesic",
            Param::Trials => "trials: integer in [1, 10000], default 200",
            Param::Eps => "eps: increasing positive list of ball radii, default [0.2, 0.5]",
            Param::Points => "points: integer in [4, 5000], default 64",
        }
    }
}

/// What a check needs from `N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DimensionRule {
    /// `N` is not read
    Unused,
    /// a finite `N ≥ 1` is required
    Finite,
    /// a finite `N > 1` is required
    AboveOne,
    /// any `N ≥ 1` or `inf`, default `inf`
    Any,
}

impl DimensionRule {
    pub fn accepts(self, n: Option<Dimension>) -> Result<(), String> {
        match (self, n) {
            (DimensionRule::Unused, Some(_)) => Err("N is not used by this check".into()),
            (DimensionRule::Unused, None) | (DimensionRule::Any, None) => Ok(()),
            (DimensionRule::Finite | DimensionRule::AboveOne, None) => Err("N is required".into()),
            (DimensionRule::Finite | DimensionRule::AboveOne, Some(Dimension::Infinite)) => {
                Err("N must be finite".into())
            }
            (DimensionRule::Finite | DimensionRule::Any, Some(Dimension::Finite(v))) if v < 1.0 => {
                Err(format!("N = {v} is below 1"))
            }
            (DimensionRule::AboveOne, Some(Dimension::Finite(v))) if v <= 1.0 => {
                Err(format!("N = {v} must exceed 1"))
            }
            _ => Ok(()),
        }
    }

    fn schema(self) -> &'static str {
        match self {
            DimensionRule::Unused => "N: not used",
            DimensionRule::Finite => "N: required, finite, at least 1",
            DimensionRule::AboveOne => "N: required, finite, above 1",
            DimensionRule::Any => "N: number at least 1 or \"inf\", default \"inf\"",
        }
    }
}

#[derive(Debug)]
pub struct CheckInfo {
    pub name: &'static str,
    pub anchor: &'static str,
    pub spaces: &'static [SpaceClass],
    pub dimension: DimensionRule,
    pub params: &'static [Param],
}

const LINE: &[SpaceClass] = &[SpaceClass::Line];
const ALL: &[SpaceClass] = &[SpaceClass::Line, SpaceClass::Sphere, SpaceClass::Torus];
const TRANSPORT: &[Param] = &[Param::Cells, Param::Pairs, Param::Steps];
const FLOW: &[Param] = &[Param::Cells, Param::Pairs, Param::Times];

/// Every check, sorted by name.
pub const CHECKS: &[CheckInfo] = &[
    CheckInfo {
        name: "bakry-emery",
        anchor: "lower bound for the N-Bakry-Emery Ricci tensor",
        spaces: ALL,
        dimension: DimensionRule::Any,
        params: &[Param::Points],
    },
    CheckInfo {
        name: "bishop-gromov",
        anchor: "volume ratio comparison with the model space",
        spaces: ALL,
        dimension: DimensionRule::Finite,
        params: &[Param::Radii, Param::Center],
    },
    CheckInfo {
        name: "bonnet-myers",
        anchor: "diameter bound pi*sqrt((N-1)/K)",
        spaces: ALL,
        dimension: DimensionRule::AboveOne,
        params: &[],
    },
    CheckInfo {
        name: "cd-entropic",
        anchor: "entropic CD(K,N) with U_N along geodesics",
        spaces: LINE,
        dimension: DimensionRule::AboveOne,
        params: TRANSPORT,
    },
    CheckInfo {
        name: "cd-inf",
        anchor: "K-convex entropy minus drift line integral",
        spaces: LINE,
        dimension: DimensionRule::Unused,
        params: TRANSPORT,
    },
    CheckInfo {
        name: "cd-star",
        anchor: "reduced CD*(K,N) with sigma coefficients",
        spaces: LINE,
        dimension: DimensionRule::Finite,
        params: TRANSPORT,
    },
    CheckInfo {
        name: "contraction",
        anchor: "Wasserstein contraction with e^{-2Kt} envelope",
        spaces: LINE,
        dimension: DimensionRule::Unused,
        params: FLOW,
    },
    CheckInfo {
        name: "counterexample",
        anchor: "search for a transport violating the Jacobi inequality",
        spaces: ALL,
        dimension: DimensionRule::Any,
        params: &[Param::Trials],
    },
    CheckInfo {
        name: "evi",
        anchor: "evolution variational inequality for the dual flow",
        spaces: LINE,
        dimension: DimensionRule::Unused,
        params: FLOW,
    },
    CheckInfo {
        name: "gradient-estimate",
        anchor: "gradient estimate |grad P_t f|^2 <= e^{-2Kt} P_t|grad f|^2",
        spaces: LINE,
        dimension: DimensionRule::Unused,
        params: FLOW,
    },
    CheckInfo {
        name: "jacobi",
        anchor: "Jacobi field determinant inequalities",
        spaces: ALL,
        dimension: DimensionRule::Any,
        params: &[Param::Geodesics, Param::Inits],
    },
    CheckInfo {
        name: "kuwada",
        anchor: "metric speed bound for the dual flow",
        spaces: LINE,
        dimension: DimensionRule::Unused,
        params: FLOW,
    },
    CheckInfo {
        name: "packing",
        anchor: "packing ratio within e^{2|Z| D}",
        spaces: ALL,
        dimension: DimensionRule::Unused,
        params: &[Param::Eps],
    },
    CheckInfo {
        name: "pointwise",
        anchor: "pointwise density inequality with sigma coefficients",
        spaces: LINE,
        dimension: DimensionRule::AboveOne,
        params: TRANSPORT,
    },
    CheckInfo {
        name: "warped-sphere",
        anchor: "N-warped product over [0,pi] with the drifted sphere as fiber",
        spaces: &[SpaceClass::Sphere],
        dimension: DimensionRule::Finite,
        params: &[Param::Points],
    },
];

pub fn lookup(name: &str) -> Option<&'static CheckInfo> {
    CHECKS.iter().find(|c| c.name == name)
}

pub fn names() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.name).collect()
}

/// The text printed by `list-checks`.
pub fn listing() -> String {
    let mut out = String::new();
    for c in CHECKS {
        let flow = c.params == FLOW;
        let spaces: Vec<&str> = c
            .spaces
            .iter()
            .map(|s| match s {
                SpaceClass::Line => "interval, circle",
                SpaceClass::Sphere => "sphere",
                SpaceClass::Torus => "torus",
            })
            .collect();
        let _ = writeln!(out, "{}: {}", c.name, c.anchor);
        let _ = writeln!(out, "    spaces: {}", spaces.join(", "));
        let _ = writeln!(out, "    K: required, finite");
        let _ = writeln!(out, "    {}", c.dimension.schema());
        for p in c.params {
            let _ = writeln!(out, "    {}", p.schema(flow));
        }
        let _ = writeln!(out, "    assert: bool, default true");
    }
    out
}
