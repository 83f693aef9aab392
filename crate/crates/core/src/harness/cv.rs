//! Rolling-window cross-validation for bandwidths and AR orders.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, ErrorClass, Result};
use crate::sphere::{geo_dist, SpherePoint};
use crate::stpd::{decompose, DecomposeConfig, SeriesDecomposition, SphereSeries};
use crate::tpsar::{fit_dsar, fit_sar, fit_tpsar, fit_tpsar_from, forecast_dsar, forecast_sar, forecast_tpsar, ModelKind};

/// One training window and its one-step target, as 0-based half-open ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CvWindow {
    pub start: usize,
    pub end: usize,
    pub target: usize,
}

/// Windows for `t₁ = 1..=⌊Tκ⌋`: train on `z_{⌊Tκ⌋-t₁+1}, …, z_{T-t₁}` and
/// predict `z_{T-t₁+1}` (1-based).
pub fn cv_windows(n: usize, kappa: f64) -> Result<Vec<CvWindow>> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::invalid(format!("kappa must lie in (0, 1), got {kappa}")));
    }
    let k = (n as f64 * kappa).floor() as usize;
    if k < 2 {
        return Err(Error::invalid(format!(
            "floor(T * kappa) = {k} leaves fewer than 2 validation windows"
        )));
    }
    Ok((1..=k)
        .map(|t1| CvWindow {
            start: k - t1,
            end: n - t1,
            target: n - t1,
        })
        .collect())
}

/// Training-window length shared by all windows of [`cv_windows`].
pub fn cv_train_len(n: usize, kappa: f64) -> usize {
    n - (n as f64 * kappa).floor() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome<C> {
    pub best: C,
    /// Mean one-step geodesic error per candidate; infinite when infeasible.
    pub scores: Vec<f64>,
}

fn pick_best<C: Clone + PartialOrd>(candidates: &[C], scores: Vec<f64>) -> CvOutcome<C> {
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * min.abs().max(1e-300);
    let best = candidates
        .iter()
        .zip(&scores)
        .filter(|(_, s)| **s <= min + tol)
        .map(|(c, _)| c)
        .fold(None::<&C>, |acc, c| match acc {
            Some(a) if a <= c => Some(a),
            _ => Some(c),
        })
        .expect("at least one finite score")
        .clone();
    CvOutcome { best, scores }
}

fn score_candidates<F>(n_candidates: usize, n_windows: usize, score: F) -> Result<Vec<f64>>
where
    F: Fn(usize, usize) -> Result<f64> + Sync,
{
    let cells: Vec<Result<f64>> = (0..n_candidates * n_windows)
        .into_par_iter()
        .map(|i| score(i / n_windows, i % n_windows))
        .collect();
    let mut scores = vec![0.0; n_candidates];
    let mut failure = None;
    for (i, cell) in cells.into_iter().enumerate() {
        let c = i / n_windows;
        match cell {
            Ok(d) => scores[c] += d,
            // A numerically infeasible candidate loses; bad input does not.
            Err(e) if e.class() == ErrorClass::Numerical => {
                scores[c] = f64::INFINITY;
                failure.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    if scores.iter().all(|s| !s.is_finite()) {
        return Err(failure.unwrap_or(Error::Empty));
    }
    scores.iter_mut().for_each(|s| *s /= n_windows as f64);
    Ok(scores)
}

/// Picks the candidate with the smallest mean one-step geodesic error over
/// the rolling windows. Ties go to the smallest candidate. Candidates whose
/// fit fails numerically on some window are scored as infinite.
pub fn rolling_cv<C, F>(series: &SphereSeries, candidates: &[C], fit_and_predict: F, kappa: f64) -> Result<CvOutcome<C>>
where
    C: Clone + PartialOrd + Sync,
    F: Fn(&SphereSeries, &C) -> Result<SpherePoint> + Sync,
{
    if candidates.is_empty() {
        return Err(Error::invalid("no cross-validation candidates"));
    }
    let windows = cv_windows(series.len(), kappa)?;
    let scores = score_candidates(candidates.len(), windows.len(), |c, w| {
        let win = windows[w];
        let train = series.slice(win.start, win.end)?;
        let pred = fit_and_predict(&train, &candidates[c])?;
        geo_dist(&pred, &series.points()[win.target])
    })?;
    Ok(pick_best(candidates, scores))
}

/// 10 log-spaced bandwidths on `[0.5, 4]·T^{-1/5}`.
pub fn default_bandwidth_grid(n: usize) -> Vec<f64> {
    let base = (n as f64).powf(-0.2);
    let (lo, hi) = ((0.5 * base).ln(), (4.0 * base).ln());
    (0..10).map(|i| (lo + (hi - lo) * i as f64 / 9.0).exp()).collect()
}

/// Orders `1..=max_order` that every training window can support.
pub fn feasible_orders(kind: ModelKind, train_len: usize, max_order: usize) -> Vec<usize> {
    (1..=max_order)
        .filter(|&p| match kind {
            ModelKind::Tpsar | ModelKind::Sar => 2 * p < train_len,
            ModelKind::Dsar => train_len >= p + 2,
        })
        .collect()
}

/// Bandwidth for TPSAR of order `p` by one-step rolling CV.
pub fn select_bandwidth(
    series: &SphereSeries,
    grid: &[f64],
    p: usize,
    config: &DecomposeConfig,
    kappa: f64,
) -> Result<CvOutcome<f64>> {
    rolling_cv(
        series,
        grid,
        |train, h| {
            let m = fit_tpsar(train, *h, config, p)?;
            Ok(forecast_tpsar(&m, 1)?.remove(0))
        },
        kappa,
    )
}

/// AR order by one-step rolling CV. For TPSAR the per-window decomposition is
/// computed once and shared across orders.
pub fn select_order(
    kind: ModelKind,
    series: &SphereSeries,
    h: f64,
    config: &DecomposeConfig,
    max_order: usize,
    kappa: f64,
) -> Result<CvOutcome<usize>> {
    let windows = cv_windows(series.len(), kappa)?;
    let orders = feasible_orders(kind, cv_train_len(series.len(), kappa), max_order);
    if orders.is_empty() {
        return Err(Error::invalid(format!(
            "training windows of length {} support no AR order",
            cv_train_len(series.len(), kappa)
        )));
    }
    let scores = match kind {
        ModelKind::Tpsar => {
            let decomps: Vec<SeriesDecomposition> = windows
                .par_iter()
                .map(|w| decompose(&series.slice(w.start, w.end)?, h, config))
                .collect::<Result<_>>()?;
            score_candidates(orders.len(), windows.len(), |c, w| {
                let m = fit_tpsar_from(decomps[w].clone(), orders[c])?;
                geo_dist(&forecast_tpsar(&m, 1)?[0], &series.points()[windows[w].target])
            })?
        }
        ModelKind::Sar => score_candidates(orders.len(), windows.len(), |c, w| {
            let train = series.slice(windows[w].start, windows[w].end)?;
            let m = fit_sar(&train, orders[c])?;
            geo_dist(&forecast_sar(&m, 1)?[0], &series.points()[windows[w].target])
        })?,
        ModelKind::Dsar => score_candidates(orders.len(), windows.len(), |c, w| {
            let train = series.slice(windows[w].start, windows[w].end)?;
            let m = fit_dsar(&train, orders[c])?;
            geo_dist(&forecast_dsar(&m, 1)?[0], &series.points()[windows[w].target])
        })?,
    };
    Ok(pick_best(&orders, scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::exp_map;

    /// Re-derivation of the window formula from 1-based indices.
    fn oracle(n: usize, kappa: f64) -> Vec<(Vec<usize>, usize)> {
        let k = (n as f64 * kappa).floor() as usize;
        let mut out = Vec::new();
        let mut t1 = 1;
        while t1 <= k {
            let lo = k - t1 + 1;
            let hi = n - t1;
            out.push(((lo..=hi).collect(), n - t1 + 1));
            t1 += 1;
        }
        out
    }

    #[test]
    fn ten_points_half_kappa() {
        let w = cv_windows(10, 0.5).unwrap();
        assert_eq!(w.len(), 5);
        // t1 = 1: train z5..z9, target z10; t1 = 5: train z1..z5, target z6.
        assert_eq!(w[0], CvWindow { start: 4, end: 9, target: 9 });
        assert_eq!(w[4], CvWindow { start: 0, end: 5, target: 5 });
    }

    #[test]
    fn windows_match_oracle_sweep() {
        for n in 10..=50 {
            for &kappa in &[0.3, 0.5, 0.7] {
                let got = cv_windows(n, kappa).unwrap();
                let want = oracle(n, kappa);
                assert_eq!(got.len(), want.len());
                for (g, (idx, target)) in got.iter().zip(want) {
                    let g_idx: Vec<usize> = (g.start + 1..=g.end).collect();
                    assert_eq!(g_idx, idx);
                    assert_eq!(g.target + 1, target);
                    assert_eq!(g.end - g.start, cv_train_len(n, kappa));
                }
            }
        }
    }

    #[test]
    fn bad_kappa_rejected() {
        assert!(cv_windows(10, 0.0).is_err());
        assert!(cv_windows(10, 1.0).is_err());
        assert!(cv_windows(10, 0.1).is_err());
    }

    #[test]
    fn constant_series_ties_to_smallest() {
        let c = SpherePoint::normalize(vec![0.2, 0.3, 0.9]).unwrap();
        let s = SphereSeries::euclidean(vec![c; 20]).unwrap();
        let out = select_order(ModelKind::Sar, &s, 0.3, &DecomposeConfig::default(), 5, 0.3).unwrap();
        assert_eq!(out.best, 1);
        let out = rolling_cv(&s, &[3usize, 1, 2], |t, _| Ok(t.points()[0].clone()), 0.5).unwrap();
        assert_eq!(out.best, 1);
    }

    #[test]
    fn moderate_bandwidth_beats_oversmoothing_on_curved_trend() {
        // Trend that bends back on itself; a huge bandwidth flattens it to a line.
        let base = SpherePoint::basis(3, 0);
        let n = 60;
        let pts: Vec<SpherePoint> = (1..=n)
            .map(|t| {
                let u = t as f64 / n as f64;
                exp_map(&base, &[0.0, 0.6 * (2.0 * std::f64::consts::PI * u).sin(), 0.3 * u])
            })
            .collect();
        let s = SphereSeries::euclidean(pts).unwrap();
        let cfg = DecomposeConfig {
            known_period: Some(1),
            ..Default::default()
        };
        let out = select_bandwidth(&s, &[0.08, 50.0], 1, &cfg, 0.3).unwrap();
        assert_eq!(out.best, 0.08);
    }

    #[test]
    fn numerically_infeasible_candidate_loses() {
        let c = SpherePoint::normalize(vec![0.2, 0.3, 0.9]).unwrap();
        let s = SphereSeries::euclidean(vec![c.clone(); 20]).unwrap();
        let out = rolling_cv(
            &s,
            &[1usize, 2],
            |t, cand| {
                if *cand == 1 {
                    Err(Error::Antipodal)
                } else {
                    Ok(t.points()[0].clone())
                }
            },
            0.5,
        )
        .unwrap();
        assert_eq!(out.best, 2);
        assert!(out.scores[0].is_infinite());
        let err = rolling_cv(&s, &[1usize], |_, _| Err(Error::invalid("nope")), 0.5);
        assert!(err.is_err());
    }

    #[test]
    fn grid_brackets_rate() {
        let g = default_bandwidth_grid(300);
        assert_eq!(g.len(), 10);
        let r = 300f64.powf(-0.2);
        assert!((g[0] - 0.5 * r).abs() < 1e-12 && (g[9] - 4.0 * r).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }
}
