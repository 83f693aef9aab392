//! Period detection by penalized residual sum of squares.
//!
//! For each candidate period θ the periodic model fits one Fréchet mean per
//! phase; `RSS(θ)` measures the squared geodesic misfit. The period estimate
//! for a penalty λ minimizes `RSS(θ) + λθ`, and λ itself is chosen by the
//! information criterion `log(RSS(θ̂_λ)/T) + θ̂_λ ℓ(T)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SphereSeries;
use crate::error::{Error, Result};
use crate::sphere::{dist_unchecked, frechet_mean_with, FrechetOptions, SpherePoint};

/// Floor substituted for `RSS(θ̂_λ) = 0` inside the logarithm.
pub const RSS_FLOOR: f64 = 1e-300;
/// Residual angles below this count as exact fits, so rounding noise in the
/// phase means cannot decide between periods that fit equally well.
pub const ANGLE_RESOLUTION: f64 = 1e-10;
/// Cap for the default maximum candidate period.
pub const DEFAULT_THETA_CAP: usize = 40;
/// Number of λ values in the default geometric grid.
pub const DEFAULT_LAMBDA_COUNT: usize = 50;

/// `r(t, θ) = t + θ - θ ⌊(t + θ - 1)/θ⌋` for 1-based `t`; lies in `1..=θ`.
pub fn phase_index(t: usize, theta: usize) -> usize {
    assert!(t >= 1 && theta >= 1, "phase_index needs t >= 1 and theta >= 1");
    t + theta - theta * ((t + theta - 1) / theta)
}

/// Per-phase Fréchet means `ĝ(1..=θ)`.
///
/// The global Fréchet regression on the one-hot phase design puts a constant
/// positive weight on the observations sharing the target's phase and zero
/// elsewhere, so its minimizer is the equal-weight mean of that phase.
pub fn phase_means(series: &SphereSeries, theta: usize, opts: &FrechetOptions) -> Result<Vec<SpherePoint>> {
    let n = series.len();
    if theta == 0 || theta > n {
        return Err(Error::invalid(format!(
            "period {theta} must lie in 1..={n}"
        )));
    }
    let mut classes: Vec<Vec<SpherePoint>> = vec![Vec::new(); theta];
    for (i, p) in series.points().iter().enumerate() {
        classes[phase_index(i + 1, theta) - 1].push(p.clone());
    }
    classes
        .iter()
        .map(|pts| {
            if pts.is_empty() {
                return Err(Error::Empty);
            }
            frechet_mean_with(pts, &vec![1.0; pts.len()], opts)
        })
        .collect()
}

/// `ĝ_t(θ, T)` for every `t = 1..=T`.
pub fn fit_periodic_model(series: &SphereSeries, theta: usize) -> Result<Vec<SpherePoint>> {
    let cycle = phase_means(series, theta, &FrechetOptions::default())?;
    Ok((1..=series.len())
        .map(|t| cycle[phase_index(t, theta) - 1].clone())
        .collect())
}

fn rss_with(series: &SphereSeries, theta: usize, opts: &FrechetOptions) -> Result<f64> {
    if theta == series.len() {
        return Ok(0.0);
    }
    let cycle = phase_means(series, theta, opts)?;
    Ok(series
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let d = dist_unchecked(p.coords(), cycle[phase_index(i + 1, theta) - 1].coords());
            if d < ANGLE_RESOLUTION {
                0.0
            } else {
                d * d
            }
        })
        .sum())
}

/// `RSS(θ) = Σ_t d²(R_t, ĝ_t(θ, T))`.
pub fn rss(series: &SphereSeries, theta: usize) -> Result<f64> {
    rss_with(series, theta, &FrechetOptions::default())
}

/// `RSS(θ)` for `θ = 1..=theta_max`, computed in parallel.
pub fn rss_curve(series: &SphereSeries, theta_max: usize, opts: &FrechetOptions) -> Result<Vec<f64>> {
    (1..=theta_max)
        .into_par_iter()
        .map(|theta| rss_with(series, theta, opts))
        .collect()
}

/// Settings for the period search. Unset fields take data-driven defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PeriodSearchConfig {
    /// Largest candidate period Θ_T; defaults to `min(⌊T/3⌋, 40)`.
    pub theta_max: Option<usize>,
    /// Candidate penalties; defaults to 50 geometric values in `[1e-4 RSS(1), RSS(1)]`.
    pub lambda_grid: Option<Vec<f64>>,
    /// ℓ(T); defaults to `sqrt(log²(1/h) / (T h))`.
    pub penalty_scale: Option<f64>,
}

impl PeriodSearchConfig {
    pub fn resolved_theta_max(&self, n: usize) -> Result<usize> {
        let theta_max = self
            .theta_max
            .unwrap_or_else(|| (n / 3).clamp(1, DEFAULT_THETA_CAP));
        if theta_max == 0 || theta_max > n {
            return Err(Error::invalid(format!(
                "theta_max {theta_max} must lie in 1..={n}"
            )));
        }
        Ok(theta_max)
    }

    fn resolved_lambdas(&self, rss1: f64) -> Result<Vec<f64>> {
        if let Some(grid) = &self.lambda_grid {
            if grid.is_empty() || grid.iter().any(|l| !(*l > 0.0)) {
                return Err(Error::invalid("lambda grid must be nonempty and positive"));
            }
            let mut g = grid.clone();
            g.sort_by(f64::total_cmp);
            return Ok(g);
        }
        Ok(default_lambda_grid(rss1))
    }
}

/// 50 geometrically spaced values from `1e-4 * RSS(1)` to `RSS(1)`; anchored at 1
/// when `RSS(1) = 0`.
pub fn default_lambda_grid(rss1: f64) -> Vec<f64> {
    let top = if rss1 > 0.0 { rss1 } else { 1.0 };
    let lo = (1e-4f64).ln();
    (0..DEFAULT_LAMBDA_COUNT)
        .map(|i| top * (lo * (1.0 - i as f64 / (DEFAULT_LAMBDA_COUNT - 1) as f64)).exp())
        .collect()
}

/// `ℓ(T) = sqrt(log²(1/h) / (T h))`.
pub fn penalty_scale(n: usize, h: f64) -> f64 {
    let l = (1.0 / h).ln();
    (l * l / (n as f64 * h)).sqrt()
}

/// `argmin_θ RSS(θ) + λθ` over a precomputed curve (index 0 is θ = 1);
/// ties go to the smallest θ.
pub fn argmin_penalized(rss: &[f64], lambda: f64) -> usize {
    let mut best = (1, f64::INFINITY);
    for (i, r) in rss.iter().enumerate() {
        let theta = i + 1;
        let obj = r + lambda * theta as f64;
        if obj < best.1 {
            best = (theta, obj);
        }
    }
    best.0
}

pub fn estimate_period(series: &SphereSeries, config: &PeriodSearchConfig, lambda: f64) -> Result<usize> {
    if !(lambda > 0.0) {
        return Err(Error::invalid("lambda must be positive"));
    }
    let theta_max = config.resolved_theta_max(series.len())?;
    let curve = rss_curve(series, theta_max, &FrechetOptions::default())?;
    Ok(argmin_penalized(&curve, lambda))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcPoint {
    pub lambda: f64,
    pub theta: usize,
    pub ic: f64,
}

/// Outcome of the λ search, with the curves kept for diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodSelection {
    pub lambda_hat: f64,
    pub theta_hat: usize,
    pub penalty_scale: f64,
    /// `RSS(θ)` for `θ = 1..=Θ_T`.
    pub rss_curve: Vec<f64>,
    pub ic_curve: Vec<IcPoint>,
    /// Set when `RSS(θ̂_λ)` was zero and floored inside the logarithm.
    pub rss_floored: bool,
}

/// Scans the λ grid and keeps the penalty with the smallest information
/// criterion; ties go to the smallest λ.
pub fn select_lambda(
    series: &SphereSeries,
    config: &PeriodSearchConfig,
    h: f64,
    opts: &FrechetOptions,
) -> Result<PeriodSelection> {
    let n = series.len();
    let theta_max = config.resolved_theta_max(n)?;
    let curve = rss_curve(series, theta_max, opts)?;
    select_lambda_from_curve(curve, n, config, h)
}

pub fn select_lambda_from_curve(
    curve: Vec<f64>,
    n: usize,
    config: &PeriodSearchConfig,
    h: f64,
) -> Result<PeriodSelection> {
    let lambdas = config.resolved_lambdas(curve[0])?;
    let scale = match config.penalty_scale {
        Some(s) => s,
        None if h > 0.0 => penalty_scale(n, h),
        None => return Err(Error::invalid("bandwidth must be positive")),
    };
    let mut floored = false;
    let mut best: Option<(f64, usize, f64)> = None;
    let mut ic_curve = Vec::with_capacity(lambdas.len());
    for &lambda in &lambdas {
        let theta = argmin_penalized(&curve, lambda);
        let mut r = curve[theta - 1];
        if r <= 0.0 {
            r = RSS_FLOOR;
            floored = true;
        }
        let ic = (r / n as f64).ln() + theta as f64 * scale;
        ic_curve.push(IcPoint { lambda, theta, ic });
        if best.map_or(true, |(_, _, b)| ic < b) {
            best = Some((lambda, theta, ic));
        }
    }
    let (lambda_hat, theta_hat, _) = best.expect("nonempty lambda grid");
    Ok(PeriodSelection {
        lambda_hat,
        theta_hat,
        penalty_scale: scale,
        rss_curve: curve,
        ic_curve,
        rss_floored: floored,
    })
}
