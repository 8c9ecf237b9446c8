//! Comparison functions `sin_{K/N}` and the distortion coefficients σ and τ.

use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistortionError {
    #[error("distortion coefficients need a finite dimension parameter")]
    InfiniteDimension,
    #[error("dimension parameter {0} is below 1")]
    DimensionBelowOne(f64),
}

/// Dimension parameter: a real `N >= 1` or the `+∞` sentinel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Dimension {
    Finite(f64),
    Infinite,
}

impl Dimension {
    pub fn finite(self) -> Option<f64> {
        match self {
            Dimension::Finite(n) => Some(n),
            Dimension::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Dimension::Infinite)
    }

    /// `1/N`, zero at infinity.
    pub fn reciprocal(self) -> f64 {
        match self {
            Dimension::Finite(n) => 1.0 / n,
            Dimension::Infinite => 0.0,
        }
    }
}

impl std::fmt::Display for Dimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Dimension::Finite(n) => write!(f, "{n}"),
            Dimension::Infinite => write!(f, "inf"),
        }
    }
}

/// A curvature bound `K` paired with a dimension bound `N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvatureDimension {
    pub k: f64,
    pub n: Dimension,
}

impl CurvatureDimension {
    pub fn new(k: f64, n: f64) -> Result<Self, DistortionError> {
        if !(n >= 1.0) {
            return Err(DistortionError::DimensionBelowOne(n));
        }
        Ok(Self {
            k,
            n: Dimension::Finite(n),
        })
    }

    pub fn infinite(k: f64) -> Self {
        Self {
            k,
            n: Dimension::Infinite,
        }
    }

    fn finite_n(&self) -> Result<f64, DistortionError> {
        self.n.finite().ok_or(DistortionError::InfiniteDimension)
    }
}

/// A real value or `+∞`.
///
/// Infinity is carried as a tag so that it never mixes with `f64` arithmetic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    Infinite,
}

impl ExtendedReal {
    pub fn is_infinite(self) -> bool {
        matches!(self, ExtendedReal::Infinite)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(x) => Some(x),
            ExtendedReal::Infinite => None,
        }
    }

    /// Multiplication by a nonnegative weight; infinity absorbs.
    pub fn scale(self, w: f64) -> Self {
        match self {
            ExtendedReal::Finite(x) => ExtendedReal::Finite(x * w),
            ExtendedReal::Infinite => ExtendedReal::Infinite,
        }
    }

    pub fn add(self, other: Self) -> Self {
        match (self, other) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => ExtendedReal::Finite(a + b),
            _ => ExtendedReal::Infinite,
        }
    }

    /// `self <= other` in the extended order.
    pub fn le(self, other: Self) -> bool {
        match (self, other) {
            (_, ExtendedReal::Infinite) => true,
            (ExtendedReal::Infinite, ExtendedReal::Finite(_)) => false,
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => a <= b,
        }
    }
}

/// Solution of `u'' + κu = 0`, `u(0) = 0`, `u'(0) = 1`.
pub fn sin_kappa(kappa: f64, x: f64) -> f64 {
    let q = kappa * x * x;
    if q.abs() < 1e-8 {
        return x * (1.0 - q / 6.0 + q * q / 120.0);
    }
    if kappa > 0.0 {
        let s = kappa.sqrt();
        (s * x).sin() / s
    } else {
        let s = (-kappa).sqrt();
        (s * x).sinh() / s
    }
}

/// `sin_{K/N}(x)`.
pub fn sin_kn(k: f64, n: f64, x: f64) -> f64 {
    sin_kappa(k / n, x)
}

/// σ for a finite positive `n`; `n` may be below 1 (τ needs `N-1`).
pub(crate) fn sigma_raw(t: f64, theta: f64, k: f64, n: f64) -> ExtendedReal {
    if theta == 0.0 || k == 0.0 {
        return ExtendedReal::Finite(t);
    }
    if k > 0.0 && theta >= PI * (n / k).sqrt() {
        return ExtendedReal::Infinite;
    }
    let kappa = k / n;
    let denom = sin_kappa(kappa, theta);
    if denom <= 0.0 {
        return ExtendedReal::Infinite;
    }
    if t == 1.0 {
        return ExtendedReal::Finite(1.0);
    }
    ExtendedReal::Finite(sin_kappa(kappa, t * theta) / denom)
}

/// σ^{(t)}_{K,N}(θ) = sin_{K/N}(tθ) / sin_{K/N}(θ), or `+∞` past the first zero.
///
/// At θ = 0 the limit value `t` is returned.
pub fn sigma(t: f64, theta: f64, cd: CurvatureDimension) -> Result<ExtendedReal, DistortionError> {
    let n = cd.finite_n()?;
    Ok(sigma_raw(t, theta, cd.k, n))
}

/// τ^{(t)}_{K,N}(θ) = t^{1/N} [σ^{(t)}_{K,N-1}(θ)]^{1-1/N}.
pub fn tau(t: f64, theta: f64, cd: CurvatureDimension) -> Result<ExtendedReal, DistortionError> {
    let n = cd.finite_n()?;
    if n < 1.0 {
        return Err(DistortionError::DimensionBelowOne(n));
    }
    Ok(tau_raw(t, theta, cd.k, n))
}

pub(crate) fn tau_raw(t: f64, theta: f64, k: f64, n: f64) -> ExtendedReal {
    if theta == 0.0 || k == 0.0 {
        return ExtendedReal::Finite(t);
    }
    if n == 1.0 {
        return if k > 0.0 {
            ExtendedReal::Infinite
        } else {
            ExtendedReal::Finite(t)
        };
    }
    match sigma_raw(t, theta, k, n - 1.0) {
        ExtendedReal::Infinite => ExtendedReal::Infinite,
        ExtendedReal::Finite(s) => ExtendedReal::Finite(t.powf(1.0 / n) * s.powf(1.0 - 1.0 / n)),
    }
}

/// Which coefficient family a finite-dimensional check uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coefficient {
    Sigma,
    Tau,
}

impl Coefficient {
    pub fn eval(self, t: f64, theta: f64, k: f64, n: f64) -> ExtendedReal {
        match self {
            Coefficient::Sigma => sigma_raw(t, theta, k, n),
            Coefficient::Tau => tau_raw(t, theta, k, n),
        }
    }
}

/// `π √(N/K)`, the first zero of `sin_{K/N}`; `None` unless `K > 0`.
pub fn blow_up_threshold(k: f64, n: f64) -> Option<f64> {
    (k > 0.0).then(|| PI * (n / k).sqrt())
}
