//! Spherical autoregression on log-operator series.
//!
//! Residual points are mapped to skew-symmetric generators `Ξ_t = R_t ⊖ μ`,
//! which live in a linear space with the Hilbert–Schmidt inner product. The
//! AR coefficients are fitted by Yule–Walker on the operator autocovariances
//! and forecasts are mapped back through the matrix exponential.
//!
//! Three models share the machinery:
//!
//! * TPSAR: decomposition first, then AR on the final residuals about `μ̂_{R,2}`;
//! * SAR: AR directly on `y_t ⊖ μ̂_Y`;
//! * DSAR: AR on the increments `y_t ⊖ y_{t-1}`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{
    expm_apply, generator_to_operator, hs_inner, log_generator, remove, SkewOperator, SpherePoint,
};
use crate::stpd::{cycle_at, decompose, series_frechet_mean, DecomposeConfig, SeriesDecomposition, SphereSeries};

/// Condition-number ceiling for the Toeplitz autocovariance matrix.
pub const MAX_CONDITION: f64 = 1e12;
/// Lag-0 autocovariance below this is treated as a constant series.
pub const DEGENERATE_VARIANCE: f64 = 1e-24;

/// Generators `Ξ_t` with their elementwise mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogSeries {
    pub ops: Vec<SkewOperator>,
    /// Shared base point `μ` for `Ξ_t = R_t ⊖ μ`; absent for increment series.
    pub base: Option<SpherePoint>,
    pub mean: SkewOperator,
}

impl LogSeries {
    pub fn from_ops(ops: Vec<SkewOperator>, base: Option<SpherePoint>) -> Result<Self> {
        let mean = SkewOperator::mean(&ops).ok_or(Error::Empty)?;
        Ok(Self { ops, base, mean })
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }
}

/// `Ξ̂_t = R_t ⊖ base` for every point of the series.
pub fn log_series(residuals: &SphereSeries, base: &SpherePoint) -> Result<LogSeries> {
    let ops = residuals
        .points()
        .iter()
        .map(|r| log_generator(base, r).map(|g| generator_to_operator(&g)))
        .collect::<Result<Vec<_>>>()?;
    LogSeries::from_ops(ops, Some(base.clone()))
}

/// `Ξ_t = y_t ⊖ y_{t-1}` for `t = 2..=T`.
pub fn increment_series(series: &SphereSeries) -> Result<LogSeries> {
    let ops = series
        .points()
        .windows(2)
        .map(|w| log_generator(&w[0], &w[1]).map(|g| generator_to_operator(&g)))
        .collect::<Result<Vec<_>>>()?;
    LogSeries::from_ops(ops, None)
}

/// `ρ̂_k = (T-k)⁻¹ Σ_{i=1}^{T-k} ⟨Ξ̂_i - μ̂, Ξ̂_{i+k} - μ̂⟩`.
pub fn autocov(ls: &LogSeries, k: usize) -> Result<f64> {
    let n = ls.len();
    if k >= n {
        return Err(Error::invalid(format!("lag {k} needs more than {n} observations")));
    }
    let centered: Vec<SkewOperator> = ls.ops.iter().map(|o| o.sub(&ls.mean)).collect();
    autocov_centered(&centered, k)
}

fn autocov_centered(centered: &[SkewOperator], k: usize) -> Result<f64> {
    let n = centered.len();
    let mut acc = 0.0;
    for i in 0..n - k {
        acc += hs_inner(&centered[i], &centered[i + k])?;
    }
    Ok(acc / (n - k) as f64)
}

/// `ρ̂_0..=ρ̂_p`.
pub fn autocov_sequence(ls: &LogSeries, p: usize) -> Result<Vec<f64>> {
    if p >= ls.len() {
        return Err(Error::invalid(format!(
            "order {p} needs more than {} observations",
            ls.len()
        )));
    }
    let centered: Vec<SkewOperator> = ls.ops.iter().map(|o| o.sub(&ls.mean)).collect();
    (0..=p).map(|k| autocov_centered(&centered, k)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ARCoefficients {
    phi: Vec<f64>,
}

impl ARCoefficients {
    pub fn new(phi: Vec<f64>) -> Result<Self> {
        if phi.is_empty() {
            return Err(Error::invalid("AR order must be at least 1"));
        }
        if phi.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("non-finite AR coefficient"));
        }
        Ok(Self { phi })
    }

    pub fn zeros(p: usize) -> Self {
        Self { phi: vec![0.0; p.max(1)] }
    }

    pub fn order(&self) -> usize {
        self.phi.len()
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }
}

fn toeplitz(rho: &[f64], p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| rho[i.abs_diff(j)])
}

/// Solves `Λ_ρ φ = (ρ_1..ρ_p)` for the symmetric Toeplitz matrix `Λ_ρ`.
///
/// Uses the Levinson–Durbin recursion and falls back to LU when a leading
/// minor vanishes. Errors when `Λ_ρ` is singular or its condition number
/// exceeds [`MAX_CONDITION`].
pub fn yule_walker(rho: &[f64]) -> Result<ARCoefficients> {
    if rho.len() < 2 {
        return Err(Error::invalid("need autocovariances for lags 0..=p with p >= 1"));
    }
    if rho.iter().any(|r| !r.is_finite()) {
        return Err(Error::invalid("non-finite autocovariance"));
    }
    let p = rho.len() - 1;
    let cond = condition_number(&toeplitz(rho, p));
    if !(cond <= MAX_CONDITION) {
        return Err(Error::Singular(cond));
    }
    let phi = levinson_durbin(rho).unwrap_or_else(|| {
        let rhs = DVector::from_column_slice(&rho[1..]);
        toeplitz(rho, p)
            .lu()
            .solve(&rhs)
            .expect("condition number checked")
            .as_slice()
            .to_vec()
    });
    ARCoefficients::new(phi)
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let ev = m.clone().symmetric_eigenvalues();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for e in ev.iter() {
        lo = lo.min(e.abs());
        hi = hi.max(e.abs());
    }
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

fn levinson_durbin(rho: &[f64]) -> Option<Vec<f64>> {
    let p = rho.len() - 1;
    let mut phi = vec![0.0; p];
    let mut err = rho[0];
    for k in 1..=p {
        if err.abs() <= 1e-14 * rho[0].abs() {
            return None;
        }
        let acc: f64 = (1..k).map(|j| phi[j - 1] * rho[k - j]).sum();
        let refl = (rho[k] - acc) / err;
        let prev = phi.clone();
        phi[k - 1] = refl;
        for j in 1..k {
            phi[j - 1] = prev[j - 1] - refl * prev[k - j - 1];
        }
        err *= 1.0 - refl * refl;
    }
    Some(phi)
}

/// True iff every root of `1 - φ₁z - … - φ_p z^p` lies outside the unit circle
/// (modulus above `1 + 1e-10`), checked by Schur–Cohn step-down recursion.
pub fn check_stationarity(coeffs: &ARCoefficients) -> bool {
    let mut phi = coeffs.phi.clone();
    while let Some(&k) = phi.last() {
        if k.abs() >= 1.0 - 1e-10 {
            return false;
        }
        let m = phi.len();
        let denom = 1.0 - k * k;
        phi = (0..m - 1)
            .map(|j| (phi[j] + k * phi[m - 2 - j]) / denom)
            .collect();
    }
    true
}

/// An AR fit on one log series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArFit {
    pub logseries: LogSeries,
    pub coeffs: ARCoefficients,
    /// `ρ̂_0..=ρ̂_p`.
    pub autocov: Vec<f64>,
    /// Set when the autocovariance system was singular; coefficients are then zero.
    pub degenerate: bool,
}

/// Yule–Walker fit of order `p`. Degenerate (constant or singular) series get
/// zero coefficients and the `degenerate` flag.
pub fn fit_ar(logseries: LogSeries, p: usize) -> Result<ArFit> {
    if p == 0 {
        return Err(Error::invalid("AR order must be at least 1"));
    }
    let autocov = autocov_sequence(&logseries, p)?;
    let (coeffs, degenerate) = if autocov[0] <= DEGENERATE_VARIANCE {
        (ARCoefficients::zeros(p), true)
    } else {
        match yule_walker(&autocov) {
            Ok(c) => (c, false),
            Err(Error::Singular(_)) => (ARCoefficients::zeros(p), true),
            Err(e) => return Err(e),
        }
    };
    Ok(ArFit {
        logseries,
        coeffs,
        autocov,
        degenerate,
    })
}

/// `Ξ̂_{T+j|T} = μ̂ + Σ_l φ̂_l (Ξ̃_{T+j-l} - μ̂)` for `j = 1..=m`, where `Ξ̃` is the
/// observed generator up to time `T` and the earlier forecast afterwards.
pub fn forecast_operators(fit: &ArFit, m: usize) -> Vec<SkewOperator> {
    let ops = &fit.logseries.ops;
    let mean = &fit.logseries.mean;
    let n = ops.len();
    let phi = fit.coeffs.phi();
    let mut out: Vec<SkewOperator> = Vec::with_capacity(m);
    for j in 1..=m {
        let mut next = mean.clone();
        for (l, coef) in phi.iter().enumerate().map(|(i, c)| (i + 1, c)) {
            if *coef == 0.0 {
                continue;
            }
            // 1-based index T + j - l
            let idx = n + j - l;
            let prev = if idx <= n { &ops[idx - 1] } else { &out[idx - n - 1] };
            next.axpy(*coef, prev);
            next.axpy(-coef, mean);
        }
        out.push(next);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedTPSAR {
    pub decomposition: SeriesDecomposition,
    pub ar: ArFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedSAR {
    pub mu_y: SpherePoint,
    pub ar: ArFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedDSAR {
    /// Last training observation `y_T`.
    pub last: SpherePoint,
    pub ar: ArFit,
}

fn check_order(p: usize, n: usize) -> Result<()> {
    if p == 0 || 2 * p >= n {
        return Err(Error::invalid(format!(
            "AR order {p} must satisfy 1 <= p < T/2 (T = {n})"
        )));
    }
    Ok(())
}

pub fn fit_tpsar(series: &SphereSeries, h: f64, config: &DecomposeConfig, p: usize) -> Result<FittedTPSAR> {
    check_order(p, series.len())?;
    let decomposition = decompose(series, h, config)?;
    fit_tpsar_from(decomposition, p)
}

/// AR stage of TPSAR on an existing decomposition.
pub fn fit_tpsar_from(decomposition: SeriesDecomposition, p: usize) -> Result<FittedTPSAR> {
    check_order(p, decomposition.len())?;
    let ls = log_series(&decomposition.residuals, &decomposition.mu_r2)?;
    let ar = fit_ar(ls, p)?;
    Ok(FittedTPSAR { decomposition, ar })
}

pub fn fit_sar(series: &SphereSeries, p: usize) -> Result<FittedSAR> {
    check_order(p, series.len())?;
    let mu_y = series_frechet_mean(series)?;
    let ar = fit_ar(log_series(series, &mu_y)?, p)?;
    Ok(FittedSAR { mu_y, ar })
}

pub fn fit_dsar(series: &SphereSeries, p: usize) -> Result<FittedDSAR> {
    if p == 0 || series.len() < p + 2 {
        return Err(Error::invalid(format!(
            "DSAR order {p} needs at least {} observations",
            p + 2
        )));
    }
    let ar = fit_ar(increment_series(series)?, p)?;
    Ok(FittedDSAR {
        last: series.points()[series.len() - 1].clone(),
        ar,
    })
}

fn check_horizon(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::invalid("forecast horizon must be at least 1"));
    }
    Ok(())
}

/// `m`-step forecasts `ŷ_{T+1|T}, …, ŷ_{T+m|T}`.
///
/// Each step maps the AR forecast to a residual point
/// `R̂⁽²⁾ = Exp(Ξ̂) μ̂_{R,2}`, re-imposes the periodic component
/// `R̂⁽¹⁾ = M_{μ̂_{R,1} → R̂⁽²⁾}(ĝ(T+j))` and then the trend
/// `ŷ = M_{μ̂_Y → R̂⁽¹⁾}(f̂((T+j)/T))`.
pub fn forecast_tpsar(model: &FittedTPSAR, m: usize) -> Result<Vec<SpherePoint>> {
    check_horizon(m)?;
    let d = &model.decomposition;
    let n = d.len();
    forecast_operators(&model.ar, m)
        .iter()
        .enumerate()
        .map(|(i, xi)| {
            let t = n + i + 1;
            let r2 = expm_apply(xi, &d.mu_r2)?;
            let r1 = remove(&r2, &d.mu_r1, cycle_at(&d.cycle, t))?;
            let f = d.trend.at_time(t)?;
            remove(&r1, &d.mu_y, &f)
        })
        .collect()
}

pub fn forecast_sar(model: &FittedSAR, m: usize) -> Result<Vec<SpherePoint>> {
    check_horizon(m)?;
    forecast_operators(&model.ar, m)
        .iter()
        .map(|xi| expm_apply(xi, &model.mu_y))
        .collect()
}

/// Composes forecast rotation increments onto the last observation.
pub fn forecast_dsar(model: &FittedDSAR, m: usize) -> Result<Vec<SpherePoint>> {
    check_horizon(m)?;
    let mut cur = model.last.clone();
    let mut out = Vec::with_capacity(m);
    for xi in forecast_operators(&model.ar, m) {
        cur = expm_apply(&xi, &cur)?;
        out.push(cur.clone());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Tpsar,
    Sar,
    Dsar,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Tpsar, ModelKind::Sar, ModelKind::Dsar];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Tpsar => "tpsar",
            ModelKind::Sar => "sar",
            ModelKind::Dsar => "dsar",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tpsar" => Ok(ModelKind::Tpsar),
            "sar" => Ok(ModelKind::Sar),
            "dsar" => Ok(ModelKind::Dsar),
            other => Err(Error::invalid(format!("unknown model '{other}'"))),
        }
    }
}

/// Any of the three fitted models, as stored in model files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum FittedModel {
    Tpsar(Box<FittedTPSAR>),
    Sar(FittedSAR),
    Dsar(FittedDSAR),
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            FittedModel::Tpsar(_) => ModelKind::Tpsar,
            FittedModel::Sar(_) => ModelKind::Sar,
            FittedModel::Dsar(_) => ModelKind::Dsar,
        }
    }

    pub fn ar(&self) -> &ArFit {
        match self {
            FittedModel::Tpsar(m) => &m.ar,
            FittedModel::Sar(m) => &m.ar,
            FittedModel::Dsar(m) => &m.ar,
        }
    }

    pub fn forecast(&self, m: usize) -> Result<Vec<SpherePoint>> {
        match self {
            FittedModel::Tpsar(model) => forecast_tpsar(model, m),
            FittedModel::Sar(model) => forecast_sar(model, m),
            FittedModel::Dsar(model) => forecast_dsar(model, m),
        }
    }
}
