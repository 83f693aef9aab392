//! Hyperparameter selection, model fitting and multi-horizon forecast evaluation.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::{default_bandwidth_grid, select_bandwidth, select_order};
use crate::error::{Error, Result};
use crate::simgen::{simulate, SimConfig};
use crate::sphere::geo_dist;
use crate::stpd::{DecomposeConfig, SphereSeries};
use crate::tpsar::{fit_dsar, fit_sar, fit_tpsar, FittedModel, ModelKind};

/// Cross-validation settings for bandwidth and AR order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvConfig {
    /// Validation fraction: `⌊Tκ⌋` one-step windows of length `T - ⌊Tκ⌋`.
    pub kappa: f64,
    pub max_order: usize,
    /// Bandwidth candidates; `None` uses [`default_bandwidth_grid`].
    pub bandwidth_grid: Option<Vec<f64>>,
    /// Fixed bandwidth; skips bandwidth CV.
    pub bandwidth: Option<f64>,
    /// Fixed AR order; skips order CV.
    pub order: Option<usize>,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            kappa: 0.2,
            max_order: 20,
            bandwidth_grid: None,
            bandwidth: None,
            order: None,
        }
    }
}

/// Everything a fit or evaluation run needs; also the schema of `--config` files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Training fraction of the evaluation split.
    pub kappa: f64,
    pub models: Vec<ModelKind>,
    pub cv: CvConfig,
    pub decompose: DecomposeConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            kappa: 0.8,
            models: ModelKind::ALL.to_vec(),
            cv: CvConfig::default(),
            decompose: DecomposeConfig::default(),
        }
    }
}

/// Selected hyperparameters of one fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub bandwidth: Option<f64>,
    pub order: usize,
}

/// Bandwidth used for decomposing `series`: fixed or rolling-CV with an
/// order-1 (or the fixed order) TPSAR.
pub fn choose_bandwidth(series: &SphereSeries, config: &EvalConfig) -> Result<f64> {
    if let Some(h) = config.cv.bandwidth {
        return Ok(h);
    }
    let grid = config
        .cv
        .bandwidth_grid
        .clone()
        .unwrap_or_else(|| default_bandwidth_grid(series.len()));
    let p = config.cv.order.unwrap_or(1);
    Ok(select_bandwidth(series, &grid, p, &config.decompose, config.cv.kappa)?.best)
}

/// Selects hyperparameters (bandwidth first, then order) and fits `kind`.
pub fn fit_model(series: &SphereSeries, kind: ModelKind, config: &EvalConfig) -> Result<(FittedModel, Selection)> {
    let h = match kind {
        ModelKind::Tpsar => Some(choose_bandwidth(series, config)?),
        _ => None,
    };
    let p = match config.cv.order {
        Some(p) => p,
        None => {
            select_order(
                kind,
                series,
                h.unwrap_or(1.0),
                &config.decompose,
                config.cv.max_order,
                config.cv.kappa,
            )?
            .best
        }
    };
    let model = match kind {
        ModelKind::Tpsar => FittedModel::Tpsar(Box::new(fit_tpsar(
            series,
            h.expect("set above"),
            &config.decompose,
            p,
        )?)),
        ModelKind::Sar => FittedModel::Sar(fit_sar(series, p)?),
        ModelKind::Dsar => FittedModel::Dsar(fit_dsar(series, p)?),
    };
    Ok((model, Selection { bandwidth: h, order: p }))
}

/// Per-horizon mean geodesic forecast errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `1..=T-⌊Tκ⌋`.
    pub horizons: Vec<usize>,
    /// `Dist(k, m)` per model, indexed like `horizons`; averaged over replicates.
    pub errors: BTreeMap<ModelKind, Vec<f64>>,
    pub replicates: usize,
    /// Hyperparameters chosen per model and horizon (single-series runs only).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub selections: BTreeMap<ModelKind, Vec<Selection>>,
    pub config: EvalConfig,
}

/// The evaluation split: horizons `m = 1..=T-K` with `K = ⌊Tκ⌋`. Horizon `m`
/// trains on 0-based `[T-K-m, T-m)` and scores targets `[T-m, T)`.
pub fn horizon_windows(n: usize, kappa: f64) -> Result<Vec<(usize, std::ops::Range<usize>, std::ops::Range<usize>)>> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::invalid(format!("kappa must lie in (0, 1), got {kappa}")));
    }
    let k = (n as f64 * kappa).floor() as usize;
    if k < 2 || k >= n {
        return Err(Error::invalid(format!("kappa = {kappa} gives no usable split of {n} points")));
    }
    Ok((1..=n - k).map(|m| (m, n - k - m..n - m, n - m..n)).collect())
}

fn evaluate_one(
    series: &SphereSeries,
    config: &EvalConfig,
) -> Result<(BTreeMap<ModelKind, Vec<f64>>, BTreeMap<ModelKind, Vec<Selection>>)> {
    if config.models.is_empty() {
        return Err(Error::invalid("no models to evaluate"));
    }
    let splits = horizon_windows(series.len(), config.kappa)?;
    let jobs: Vec<(ModelKind, usize)> = config
        .models
        .iter()
        .flat_map(|k| (0..splits.len()).map(move |i| (*k, i)))
        .collect();
    let results: Vec<(f64, Selection)> = jobs
        .par_iter()
        .map(|(kind, i)| {
            let (m, train, test) = &splits[*i];
            let train = series.slice(train.start, train.end)?;
            let (model, sel) = fit_model(&train, *kind, config)?;
            let forecast = model.forecast(*m)?;
            let mut total = 0.0;
            for (yhat, y) in forecast.iter().zip(&series.points()[test.clone()]) {
                total += geo_dist(yhat, y)?;
            }
            Ok((total / *m as f64, sel))
        })
        .collect::<Result<_>>()?;
    let mut errors = BTreeMap::new();
    let mut selections = BTreeMap::new();
    for ((kind, _), (err, sel)) in jobs.iter().zip(results) {
        errors.entry(*kind).or_insert_with(Vec::new).push(err);
        selections.entry(*kind).or_insert_with(Vec::new).push(sel);
    }
    Ok((errors, selections))
}

/// Multi-horizon evaluation of every configured model on one series.
pub fn evaluate_models(series: &SphereSeries, config: &EvalConfig) -> Result<EvalReport> {
    let (errors, selections) = evaluate_one(series, config)?;
    let horizons = horizon_windows(series.len(), config.kappa)?.into_iter().map(|s| s.0).collect();
    Ok(EvalReport {
        horizons,
        errors,
        replicates: 1,
        selections,
        config: config.clone(),
    })
}

/// Pairwise summation; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

/// Evaluation averaged over simulated replicates `0..replicates` of `sim`.
pub fn evaluate_simulation(sim: &SimConfig, replicates: usize, config: &EvalConfig) -> Result<EvalReport> {
    if replicates == 0 {
        return Err(Error::invalid("need at least one replicate"));
    }
    let per_rep: Vec<BTreeMap<ModelKind, Vec<f64>>> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let bundle = simulate(&sim.with_replicate(r))?;
            Ok(evaluate_one(&bundle.y, config)?.0)
        })
        .collect::<Result<_>>()?;
    let horizons: Vec<usize> = horizon_windows(sim.len, config.kappa)?.into_iter().map(|s| s.0).collect();
    let mut errors = BTreeMap::new();
    for kind in &config.models {
        let mean = (0..horizons.len())
            .map(|i| {
                let col: Vec<f64> = per_rep.iter().map(|m| m[kind][i]).collect();
                pairwise_sum(&col) / replicates as f64
            })
            .collect();
        errors.insert(*kind, mean);
    }
    Ok(EvalReport {
        horizons,
        errors,
        replicates,
        selections: BTreeMap::new(),
        config: config.clone(),
    })
}
