//! Trend-periodicity decomposition and spherical autoregressive forecasting
//! for time series of points on a unit sphere.
//!
//! Compositions and densities are embedded with a square-root map, the
//! series is split into a smooth trend, a periodic component and stationary
//! residuals, and the residuals are forecast through a linear AR model on
//! their skew-symmetric log operators.

pub mod embed;
pub mod error;
pub mod harness;
pub mod simgen;
pub mod sphere;
pub mod stpd;
pub mod tpsar;

pub use embed::{comp_to_sphere, density_to_sphere, sphere_to_comp, sphere_to_density, Composition, DensityOnGrid};
pub use error::{Error, ErrorClass, Result};
pub use simgen::{simulate, SimConfig, SimulationBundle};
pub use sphere::{
    expm_apply, frechet_mean, geo_dist, inner, log_generator, remove, rotate, AmbientSpace, Rank2Generator,
    SkewOperator, SpherePoint,
};
pub use stpd::{decompose, DecomposeConfig, SeriesDecomposition, SphereSeries};
pub use tpsar::{
    fit_dsar, fit_sar, fit_tpsar, forecast_dsar, forecast_sar, forecast_tpsar, ARCoefficients, FittedModel, ModelKind,
};
