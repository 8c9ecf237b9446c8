//! Numerical certificates for curvature-dimension conditions of nonsymmetric
//! diffusions `L = Δ + Z` on model Riemannian spaces.

pub mod cdcheck;
pub mod comparison;
pub mod distortion;
pub mod entropy;
pub mod fields;
pub mod geometry;
pub mod grid;
mod par;
pub mod quad;
pub mod semigroup;
pub mod transport;
pub mod warped;

pub use distortion::{CurvatureDimension, Dimension, ExtendedReal};
pub use entropy::DiscreteMeasure;
pub use fields::FieldSpec;
pub use geometry::{GeodesicPath, ModelSpace, Vec3};
pub use grid::{Density1d, Grid1d};
