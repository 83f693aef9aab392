//! Trend-periodicity decomposition of sphere-valued series.
//!
//! The removal order is fixed: the trend is estimated and transported away
//! first, then the period is selected on the de-trended series, and finally
//! the periodic component is removed, leaving stationary residuals.

pub mod period;
pub mod trend;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{frechet_mean_with, remove, AmbientSpace, FrechetOptions, SpherePoint};

pub use period::{
    estimate_period, fit_periodic_model, phase_index, phase_means, rss, select_lambda, IcPoint,
    PeriodSearchConfig, PeriodSelection,
};
pub use trend::{estimate_trend, estimate_trend_with, local_weights, Kernel, TrendFit};

/// An equidistant series of sphere points sharing one ambient space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereSeries {
    points: Vec<SpherePoint>,
    ambient: AmbientSpace,
}

impl SphereSeries {
    pub fn new(points: Vec<SpherePoint>, ambient: AmbientSpace) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("a series needs at least 2 observations"));
        }
        if let Some(p) = points.iter().find(|p| p.dim() != ambient.dim()) {
            return Err(Error::DimensionMismatch {
                expected: ambient.dim(),
                got: p.dim(),
            });
        }
        Ok(Self { points, ambient })
    }

    /// Series on `S^{G-1}` with unit quadrature.
    pub fn euclidean(points: Vec<SpherePoint>) -> Result<Self> {
        let dim = points.first().ok_or(Error::Empty)?.dim();
        Self::new(points, AmbientSpace::euclidean(dim)?)
    }

    pub fn points(&self) -> &[SpherePoint] {
        &self.points
    }

    pub fn ambient(&self) -> &AmbientSpace {
        &self.ambient
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.ambient.dim()
    }

    /// Same ambient space, new points.
    pub fn with_points(&self, points: Vec<SpherePoint>) -> Result<Self> {
        Self::new(points, self.ambient.clone())
    }

    /// Observations `start..end` (0-based, half open).
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::invalid(format!(
                "window {start}..{end} out of range for length {}",
                self.len()
            )));
        }
        self.with_points(self.points[start..end].to_vec())
    }
}

/// Equal-weight Fréchet mean of the whole series.
pub fn series_frechet_mean(series: &SphereSeries) -> Result<SpherePoint> {
    series_frechet_mean_with(series, &FrechetOptions::default())
}

pub fn series_frechet_mean_with(series: &SphereSeries, opts: &FrechetOptions) -> Result<SpherePoint> {
    frechet_mean_with(series.points(), &vec![1.0; series.len()], opts)
}

/// `R̂_t⁽¹⁾ = M_{f̂(t/T) → y_t}(μ̂_Y)`.
pub fn detrend(series: &SphereSeries, trend: &TrendFit, mu_y: &SpherePoint) -> Result<SphereSeries> {
    if trend.len() != series.len() {
        return Err(Error::invalid("trend was fitted on a series of different length"));
    }
    detrend_with_path(series, &trend.values, mu_y)
}

/// [`detrend`] against an explicit trend path `f(t/T)`.
pub fn detrend_with_path(series: &SphereSeries, path: &[SpherePoint], mu_y: &SpherePoint) -> Result<SphereSeries> {
    if path.len() != series.len() {
        return Err(Error::invalid("trend path length differs from series length"));
    }
    let pts = series
        .points()
        .iter()
        .zip(path)
        .map(|(y, f)| remove(y, f, mu_y))
        .collect::<Result<Vec<_>>>()?;
    series.with_points(pts)
}

/// The cycle `ĝ(1..=θ̂)`; `ĝ(l + kθ̂) = ĝ(l)` by construction.
pub fn estimate_periodic_component(series: &SphereSeries, theta_hat: usize) -> Result<Vec<SpherePoint>> {
    phase_means(series, theta_hat, &FrechetOptions::default())
}

/// Periodic value `ĝ(t)` at 1-based time `t`, any `t ≥ 1`.
pub fn cycle_at(cycle: &[SpherePoint], t: usize) -> &SpherePoint {
    &cycle[phase_index(t, cycle.len()) - 1]
}

/// `R̂_t⁽²⁾ = M_{ĝ(t) → R̂_t⁽¹⁾}(μ̂_{R,1})`.
pub fn deseasonalize(series: &SphereSeries, cycle: &[SpherePoint], mu_r1: &SpherePoint) -> Result<SphereSeries> {
    if cycle.is_empty() {
        return Err(Error::Empty);
    }
    let pts = series
        .points()
        .iter()
        .enumerate()
        .map(|(i, r)| remove(r, cycle_at(cycle, i + 1), mu_r1))
        .collect::<Result<Vec<_>>>()?;
    series.with_points(pts)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DecomposeConfig {
    pub kernel: Kernel,
    pub period: PeriodSearchConfig,
    /// Skip the period search and use this period.
    pub known_period: Option<usize>,
    pub frechet: FrechetOptions,
}

/// Every estimated component and diagnostic of one decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesDecomposition {
    pub trend: TrendFit,
    pub mu_y: SpherePoint,
    pub mu_r1: SpherePoint,
    pub mu_r2: SpherePoint,
    pub period: usize,
    pub cycle: Vec<SpherePoint>,
    pub detrended: SphereSeries,
    pub residuals: SphereSeries,
    /// `RSS(θ)` for `θ = 1..=Θ_T`; empty when the period was given.
    pub rss_curve: Vec<f64>,
    pub ic_curve: Vec<IcPoint>,
    pub lambda_hat: Option<f64>,
    pub penalty_scale: Option<f64>,
    pub rss_floored: bool,
}

impl SeriesDecomposition {
    pub fn len(&self) -> usize {
        self.residuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residuals.is_empty()
    }
}

/// Runs trend estimation, de-trending, period selection, periodic-component
/// estimation and de-seasonalization, in that order.
pub fn decompose(series: &SphereSeries, h: f64, config: &DecomposeConfig) -> Result<SeriesDecomposition> {
    let opts = &config.frechet;
    let (trend, mu_y) = rayon::join(
        || estimate_trend_with(series, h, config.kernel, opts),
        || series_frechet_mean_with(series, opts),
    );
    let (trend, mu_y) = (trend?, mu_y?);
    let detrended = detrend(series, &trend, &mu_y)?;

    let (period, selection) = match config.known_period {
        Some(p) => {
            if p == 0 || p > series.len() {
                return Err(Error::invalid(format!("known period {p} out of range")));
            }
            (p, None)
        }
        None => {
            let sel = select_lambda(&detrended, &config.period, h, opts)?;
            (sel.theta_hat, Some(sel))
        }
    };

    let (cycle, mu_r1) = rayon::join(
        || phase_means(&detrended, period, opts),
        || series_frechet_mean_with(&detrended, opts),
    );
    let (cycle, mu_r1) = (cycle?, mu_r1?);
    let residuals = deseasonalize(&detrended, &cycle, &mu_r1)?;
    let mu_r2 = series_frechet_mean_with(&residuals, opts)?;

    let (rss_curve, ic_curve, lambda_hat, penalty_scale, rss_floored) = match selection {
        Some(s) => (
            s.rss_curve,
            s.ic_curve,
            Some(s.lambda_hat),
            Some(s.penalty_scale),
            s.rss_floored,
        ),
        None => (Vec::new(), Vec::new(), None, None, false),
    };
    Ok(SeriesDecomposition {
        trend,
        mu_y,
        mu_r1,
        mu_r2,
        period,
        cycle,
        detrended,
        residuals,
        rss_curve,
        ic_curve,
        lambda_hat,
        penalty_scale,
        rss_floored,
    })
}

/// Re-runs the period search on an arbitrary series (e.g. final residuals).
pub fn redetect_period(series: &SphereSeries, h: f64, config: &DecomposeConfig) -> Result<usize> {
    Ok(select_lambda(series, &config.period, h, &config.frechet)?.theta_hat)
}
