//! Boltzmann entropy, N-Rényi entropy, `U_N`, and the line-integral-weighted
//! Rényi entropy along a dynamical plan.

use thiserror::Error;

use crate::distortion::ExtendedReal;
use crate::fields::{line_integral, FieldSpec};
use crate::geometry::{ModelSpace, Vec3};
use crate::grid::Binning;
use crate::transport::DynamicalPlan;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EntropyError {
    #[error("measure has {mu} atoms but the reference has {reference}")]
    SupportMismatch { mu: usize, reference: usize },
    #[error("pushforward mass lands outside the reference support")]
    NotAbsolutelyContinuous,
    #[error("the Rényi entropy needs a finite N >= 1, got {0}")]
    BadDimension(f64),
}

/// Weighted atoms: a probability measure or a reference measure of cells.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    pub points: Vec<Vec3>,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Vec3>, weights: Vec<f64>) -> Self {
        assert_eq!(points.len(), weights.len());
        Self { points, weights }
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Atoms on the real line.
    pub fn on_line(xs: &[f64], weights: Vec<f64>) -> Self {
        Self::new(
            xs.iter().map(|&x| Vec3::new(x, 0.0, 0.0)).collect(),
            weights,
        )
    }
}

fn check_aligned(mu: &DiscreteMeasure, reference: &DiscreteMeasure) -> Result<(), EntropyError> {
    if mu.len() != reference.len() {
        return Err(EntropyError::SupportMismatch {
            mu: mu.len(),
            reference: reference.len(),
        });
    }
    Ok(())
}

/// `∫ ρ log ρ d(ref)` for `μ` given cell by cell on the reference cells;
/// `+∞` when mass sits on a cell of zero reference measure.
pub fn ent(
    mu: &DiscreteMeasure,
    reference: &DiscreteMeasure,
) -> Result<ExtendedReal, EntropyError> {
    check_aligned(mu, reference)?;
    let mut s = 0.0;
    for (&m, &r) in mu.weights.iter().zip(&reference.weights) {
        if m <= 0.0 {
            continue;
        }
        if r <= 0.0 {
            return Ok(ExtendedReal::Infinite);
        }
        s += m * (m / r).ln();
    }
    Ok(ExtendedReal::Finite(s))
}

/// `−∫ ρ^{1−1/N} d(ref)` over the absolutely continuous part; `N = 1` gives
/// minus the reference measure of the support.
pub fn renyi(
    mu: &DiscreteMeasure,
    reference: &DiscreteMeasure,
    n: f64,
) -> Result<f64, EntropyError> {
    check_aligned(mu, reference)?;
    if !(n >= 1.0) || !n.is_finite() {
        return Err(EntropyError::BadDimension(n));
    }
    let mut s = 0.0;
    for (&m, &r) in mu.weights.iter().zip(&reference.weights) {
        if m <= 0.0 || r <= 0.0 {
            continue;
        }
        s += if n == 1.0 {
            r
        } else {
            r * (m / r).powf(1.0 - 1.0 / n)
        };
    }
    Ok(-s)
}

/// `U_N = exp(−Ent/N)`, zero for infinite entropy.
pub fn u_n(mu: &DiscreteMeasure, reference: &DiscreteMeasure, n: f64) -> Result<f64, EntropyError> {
    Ok(match ent(mu, reference)? {
        ExtendedReal::Finite(e) => (-e / n).exp(),
        ExtendedReal::Infinite => 0.0,
    })
}

/// Bins the positions `γ_t` of the plan's geodesics into the cells of `bins`.
pub fn pushforward(
    plan: &DynamicalPlan,
    bins: &dyn Binning,
    t: f64,
) -> Result<(DiscreteMeasure, Vec<usize>), EntropyError> {
    let reference = bins.reference();
    let mut weights = vec![0.0; reference.len()];
    let mut cells = Vec::with_capacity(plan.geodesics.len());
    for g in &plan.geodesics {
        let (p, _) = g.path.eval(t);
        let cell = bins
            .cell_of(&p)
            .ok_or(EntropyError::NotAbsolutelyContinuous)?;
        if reference.weights[cell] <= 0.0 {
            return Err(EntropyError::NotAbsolutelyContinuous);
        }
        weights[cell] += g.mass;
        cells.push(cell);
    }
    Ok((DiscreteMeasure::new(reference.points, weights), cells))
}

/// `S^α_{N,t}(Π) = −∫ ρ_t(γ_t)^{−1/N} e^{φ_t(γ)/N} dΠ` with `ρ_t` from binning.
pub fn weighted_renyi(
    space: &ModelSpace,
    plan: &DynamicalPlan,
    field: &FieldSpec,
    bins: &dyn Binning,
    n: f64,
    t: f64,
) -> Result<f64, EntropyError> {
    if !(n >= 1.0) || !n.is_finite() {
        return Err(EntropyError::BadDimension(n));
    }
    let (mu_t, cells) = pushforward(plan, bins, t)?;
    let reference = bins.reference();
    let mut s = 0.0;
    for (g, &cell) in plan.geodesics.iter().zip(&cells) {
        let rho = mu_t.weights[cell] / reference.weights[cell];
        let phi = line_integral(space, &g.path, field, t);
        s += g.mass * rho.powf(-1.0 / n) * (phi / n).exp();
    }
    Ok(-s)
}
