//! Local Fréchet regression for the trend component.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SphereSeries;
use crate::error::{Error, Result};
use crate::sphere::{frechet_mean_with, FrechetOptions, SpherePoint};

/// Below this value of `σ̂²` the local-linear weights are undefined.
pub const MIN_SIGMA2: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    #[default]
    Gaussian,
    Epanechnikov,
}

impl Kernel {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Kernel::Gaussian => (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            Kernel::Epanechnikov => {
                if x.abs() < 1.0 {
                    0.75 * (1.0 - x * x)
                } else {
                    0.0
                }
            }
        }
    }

    fn scaled(self, x: f64, h: f64) -> f64 {
        self.eval(x / h) / h
    }
}

/// Local-linear weights `ŵ(t/T, u)` for `t = 1..=T`.
///
/// `ŵ_t = σ̂⁻² K_h(t/T - u) [τ̂₂(u) - τ̂₁(u)(t/T - u)]`, normalized so that
/// `T⁻¹ Σ ŵ_t = 1` and `T⁻¹ Σ ŵ_t (t/T - u) = 0`.
pub fn local_weights(u: f64, len: usize, h: f64, kernel: Kernel) -> Result<Vec<f64>> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid(format!("bandwidth must be positive, got {h}")));
    }
    if len < 2 {
        return Err(Error::invalid("need at least 2 design points"));
    }
    let n = len as f64;
    let offsets: Vec<f64> = (1..=len).map(|t| t as f64 / n - u).collect();
    let k: Vec<f64> = offsets.iter().map(|x| kernel.scaled(*x, h)).collect();
    let mut tau = [0.0f64; 3];
    for (kt, x) in k.iter().zip(&offsets) {
        tau[0] += kt;
        tau[1] += kt * x;
        tau[2] += kt * x * x;
    }
    tau.iter_mut().for_each(|t| *t /= n);
    let sigma2 = tau[0] * tau[2] - tau[1] * tau[1];
    if !(sigma2 >= MIN_SIGMA2) {
        return Err(Error::DegenerateBandwidth { h, sigma2 });
    }
    Ok(k
        .iter()
        .zip(&offsets)
        .map(|(kt, x)| kt * (tau[2] - tau[1] * x) / sigma2)
        .collect())
}

/// Fitted local Fréchet trend. Holds the design so that `f̂(u)` can be
/// evaluated anywhere, including `u > 1` for forecasting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    pub bandwidth: f64,
    pub kernel: Kernel,
    /// `f̂(t/T)` for `t = 1..=T`.
    pub values: Vec<SpherePoint>,
    design: Vec<SpherePoint>,
    #[serde(default)]
    frechet: FrechetOptions,
}

impl TrendFit {
    pub fn len(&self) -> usize {
        self.design.len()
    }

    pub fn is_empty(&self) -> bool {
        self.design.is_empty()
    }

    /// `f̂(u) = argmin_ν Σ ŵ(t/T, u) d²(ν, y_t)`.
    pub fn eval(&self, u: f64) -> Result<SpherePoint> {
        let n = self.design.len();
        let pos = u * n as f64;
        if pos >= 1.0 && pos <= n as f64 && (pos - pos.round()).abs() < 1e-9 {
            return Ok(self.values[pos.round() as usize - 1].clone());
        }
        eval_at(&self.design, u, self.bandwidth, self.kernel, &self.frechet)
    }

    /// `f̂(t/T)` for 1-based `t`; `t` may exceed `T`.
    pub fn at_time(&self, t: usize) -> Result<SpherePoint> {
        if (1..=self.len()).contains(&t) {
            return Ok(self.values[t - 1].clone());
        }
        eval_at(
            &self.design,
            t as f64 / self.len() as f64,
            self.bandwidth,
            self.kernel,
            &self.frechet,
        )
    }
}

fn eval_at(
    design: &[SpherePoint],
    u: f64,
    h: f64,
    kernel: Kernel,
    opts: &FrechetOptions,
) -> Result<SpherePoint> {
    let w = local_weights(u, design.len(), h, kernel)?;
    frechet_mean_with(design, &w, opts)
}

pub fn estimate_trend(series: &SphereSeries, h: f64, kernel: Kernel) -> Result<TrendFit> {
    estimate_trend_with(series, h, kernel, &FrechetOptions::default())
}

pub fn estimate_trend_with(
    series: &SphereSeries,
    h: f64,
    kernel: Kernel,
    opts: &FrechetOptions,
) -> Result<TrendFit> {
    let design = series.points().to_vec();
    let n = design.len();
    let values = (1..=n)
        .into_par_iter()
        .map(|t| eval_at(&design, t as f64 / n as f64, h, kernel, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrendFit {
        bandwidth: h,
        kernel,
        values,
        design,
        frechet: *opts,
    })
}
