//! Synthetic sphere-valued series with known trend, cycle and AR residuals.
//!
//! Generation runs in three steps: a stationary spherical AR series about a
//! base point, then a periodic rotation, then a trend rotation. Every
//! component is centered at the same base point, which also serves as the
//! reference for the transports.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{
    dist_unchecked, exp_map, expm_apply, generator_to_operator, remove, Rank2Generator, SkewOperator, SpherePoint,
};
use crate::stpd::{cycle_at, SphereSeries};
use crate::tpsar::{check_stationarity, ARCoefficients};

pub const BURN_IN: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub dim: usize,
    pub len: usize,
    pub theta0: usize,
    pub phi: Vec<f64>,
    /// Standard deviation (radians) of the innovation rotation angle.
    pub noise_scale: f64,
    /// Geodesic length (radians) of the trend path over `u ∈ [0, 1]`.
    pub trend_amplitude: f64,
    /// Angular radius of the small circle traced by the cycle.
    pub periodic_amplitude: f64,
    pub seed: u64,
    /// Stream index; replicate `r` of a sweep uses stream `r` of `seed`.
    pub replicate: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dim: 7,
            len: 120,
            theta0: 12,
            phi: vec![0.5],
            noise_scale: 0.1,
            trend_amplitude: 0.3,
            periodic_amplitude: 0.15,
            seed: 0,
            replicate: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 3 {
            return Err(Error::invalid("simulation needs dim >= 3"));
        }
        if self.len < 2 {
            return Err(Error::invalid("simulation needs len >= 2"));
        }
        if self.theta0 == 0 {
            return Err(Error::invalid("theta0 must be at least 1"));
        }
        let coeffs = ARCoefficients::new(self.phi.clone())?;
        if !check_stationarity(&coeffs) {
            return Err(Error::invalid("AR coefficients are not stationary"));
        }
        for (name, v) in [
            ("noise_scale", self.noise_scale),
            ("trend_amplitude", self.trend_amplitude),
            ("periodic_amplitude", self.periodic_amplitude),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite and non-negative")));
            }
        }
        Ok(())
    }

    pub fn with_replicate(&self, replicate: u64) -> Self {
        Self {
            replicate,
            ..self.clone()
        }
    }

    fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.replicate);
        rng
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationBundle {
    pub y: SphereSeries,
    pub r1: SphereSeries,
    pub r2: SphereSeries,
    /// True trend `f(t/T)` for `t = 1..=T`.
    pub f_path: Vec<SpherePoint>,
    pub g_cycle: Vec<SpherePoint>,
    /// Base point of the AR residuals and reference for both transports.
    pub base: SpherePoint,
    pub config: SimConfig,
}

/// Ground truth written next to a simulated series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTruth {
    pub f_path: Vec<SpherePoint>,
    pub g_cycle: Vec<SpherePoint>,
    pub base: SpherePoint,
    pub theta0: usize,
    pub phi: Vec<f64>,
    pub config: SimConfig,
}

impl SimulationBundle {
    pub fn truth(&self) -> SimTruth {
        SimTruth {
            f_path: self.f_path.clone(),
            g_cycle: self.g_cycle.clone(),
            base: self.base.clone(),
            theta0: self.config.theta0,
            phi: self.config.phi.clone(),
            config: self.config.clone(),
        }
    }
}

/// The point with all coordinates `1/√G`.
pub fn default_base(dim: usize) -> SpherePoint {
    SpherePoint::normalize(vec![1.0; dim]).expect("dim >= 1")
}

fn orthonormal_tangent(base: &SpherePoint, raw: Vec<f64>, others: &[Vec<f64>]) -> Option<Vec<f64>> {
    let mut v = raw;
    for u in std::iter::once(base.coords()).chain(others.iter().map(|o| o.as_slice())) {
        let c: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
        v.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
    }
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (n > 1e-8).then(|| v.into_iter().map(|x| x / n).collect())
}

fn random_tangent(rng: &mut ChaCha20Rng, base: &SpherePoint) -> Vec<f64> {
    loop {
        let raw: Vec<f64> = (0..base.dim()).map(|_| rng.sample(StandardNormal)).collect();
        if let Some(v) = orthonormal_tangent(base, raw, &[]) {
            return v;
        }
    }
}

fn check_hemisphere(points: &[&SpherePoint]) -> Result<()> {
    let mut worst = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            worst = worst.max(dist_unchecked(a.coords(), b.coords()));
        }
    }
    if worst > std::f64::consts::FRAC_PI_2 {
        return Err(Error::OutsideHemisphere(worst));
    }
    Ok(())
}

/// AR recursion `Ξ_t = Σ φ_l Ξ_{t-l} + ε_t` on skew operators, with
/// `ε_t = η_t (d_t ⊗ b - b ⊗ d_t)` for a uniform tangent direction `d_t` at
/// the base `b` and `η_t ~ N(0, σ²)`. Returns `R_t = Exp(Ξ_t) b`.
pub fn gen_ar_residuals(config: &SimConfig) -> Result<(SphereSeries, SpherePoint)> {
    config.validate()?;
    let mut rng = config.rng();
    gen_ar_residuals_with(config, &mut rng)
}

fn gen_ar_residuals_with(config: &SimConfig, rng: &mut ChaCha20Rng) -> Result<(SphereSeries, SpherePoint)> {
    let base = default_base(config.dim);
    let p = config.phi.len();
    let mut hist: Vec<SkewOperator> = vec![SkewOperator::zeros(config.dim); p];
    let mut pts = Vec::with_capacity(config.len);
    for step in 0..BURN_IN + config.len {
        let dir = random_tangent(rng, &base);
        let eta: f64 = config.noise_scale * rng.sample::<f64, _>(StandardNormal);
        let eps = generator_to_operator(&Rank2Generator {
            eta,
            zeta1: base.clone(),
            zeta2: SpherePoint::new(dir)?,
        });
        let mut xi = eps;
        for (l, c) in config.phi.iter().enumerate() {
            xi.axpy(*c, &hist[hist.len() - 1 - l]);
        }
        hist.remove(0);
        hist.push(xi);
        if step >= BURN_IN {
            pts.push(expm_apply(&hist[p - 1], &base)?);
        }
    }
    let series = SphereSeries::euclidean(pts)?;
    check_hemisphere(&series.points().iter().collect::<Vec<_>>())?;
    Ok((series, base))
}

/// `θ₀` points on the circle of angular radius `a` about `center`, at angles
/// `2πl/θ₀`. The plane of the circle is spanned by the first two coordinate
/// directions projected to the tangent space.
pub fn gen_periodic_cycle(config: &SimConfig, center: &SpherePoint) -> Result<Vec<SpherePoint>> {
    if config.theta0 == 0 {
        return Err(Error::invalid("theta0 must be at least 1"));
    }
    let dim = center.dim();
    let e1 = (0..dim)
        .find_map(|i| orthonormal_tangent(center, SpherePoint::basis(dim, i).into_coords(), &[]))
        .ok_or_else(|| Error::invalid("cannot build a tangent frame"))?;
    let e2 = (0..dim)
        .find_map(|i| orthonormal_tangent(center, SpherePoint::basis(dim, i).into_coords(), &[e1.clone()]))
        .ok_or_else(|| Error::invalid("cannot build a tangent frame"))?;
    let a = config.periodic_amplitude;
    Ok((1..=config.theta0)
        .map(|l| {
            let ang = 2.0 * std::f64::consts::PI * l as f64 / config.theta0 as f64;
            let (s, c) = ang.sin_cos();
            let v: Vec<f64> = e1.iter().zip(&e2).map(|(x, y)| a * (c * x + s * y)).collect();
            exp_map(center, &v)
        })
        .collect())
}

/// `R⁽¹⁾_t = Exp(-T_{g(t), ref}) R⁽²⁾_t`, the exact inverse of de-seasonalizing
/// with the true cycle and reference.
pub fn impose_periodic(r2: &SphereSeries, cycle: &[SpherePoint], reference: &SpherePoint) -> Result<SphereSeries> {
    if cycle.is_empty() {
        return Err(Error::Empty);
    }
    let pts = r2
        .points()
        .iter()
        .enumerate()
        .map(|(i, r)| remove(r, reference, cycle_at(cycle, i + 1)))
        .collect::<Result<Vec<_>>>()?;
    r2.with_points(pts)
}

/// `f(u) = Exp_b((u - 1/2) a w)` for a fixed unit tangent `w` at `b`.
pub fn trend_path(config: &SimConfig, base: &SpherePoint) -> Vec<SpherePoint> {
    let dim = base.dim();
    let mut raw = vec![0.0; dim];
    raw[dim - 1] = 1.0;
    raw[dim - 2] = -0.5;
    let w = orthonormal_tangent(base, raw, &[]).expect("dim >= 3");
    let n = config.len as f64;
    (1..=config.len)
        .map(|t| {
            let s = (t as f64 / n - 0.5) * config.trend_amplitude;
            exp_map(base, &w.iter().map(|x| x * s).collect::<Vec<_>>())
        })
        .collect()
}

/// `y_t = Exp(-T_{f(t/T), ref}) R⁽¹⁾_t`.
pub fn impose_trend(r1: &SphereSeries, f_path: &[SpherePoint], reference: &SpherePoint) -> Result<SphereSeries> {
    if f_path.len() != r1.len() {
        return Err(Error::invalid("trend path length differs from series length"));
    }
    let pts = r1
        .points()
        .iter()
        .zip(f_path)
        .map(|(r, f)| remove(r, reference, f))
        .collect::<Result<Vec<_>>>()?;
    r1.with_points(pts)
}

pub fn simulate(config: &SimConfig) -> Result<SimulationBundle> {
    config.validate()?;
    let mut rng = config.rng();
    let (r2, base) = gen_ar_residuals_with(config, &mut rng)?;
    let g_cycle = gen_periodic_cycle(config, &base)?;
    let r1 = impose_periodic(&r2, &g_cycle, &base)?;
    let f_path = trend_path(config, &base);
    let y = impose_trend(&r1, &f_path, &base)?;
    check_hemisphere(&y.points().iter().collect::<Vec<_>>())?;
    Ok(SimulationBundle {
        y,
        r1,
        r2,
        f_path,
        g_cycle,
        base,
        config: config.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{frechet_mean, geo_dist};
    use crate::stpd::{deseasonalize, detrend_with_path};
    use crate::tpsar::{autocov, fit_sar, log_series};

    fn cfg(len: usize) -> SimConfig {
        SimConfig {
            len,
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn zero_noise_gives_base() {
        let c = SimConfig {
            noise_scale: 0.0,
            phi: vec![0.3, -0.1, 0.4],
            ..cfg(30)
        };
        let (r2, base) = gen_ar_residuals(&c).unwrap();
        assert!(r2.points().iter().all(|p| geo_dist(p, &base).unwrap() < 1e-15));
    }

    #[test]
    fn white_noise_has_small_lag_one_autocov() {
        let c = SimConfig { phi: vec![0.0], ..cfg(2000) };
        let (r2, base) = gen_ar_residuals(&c).unwrap();
        let ls = log_series(&r2, &base).unwrap();
        let ratio = autocov(&ls, 1).unwrap() / autocov(&ls, 0).unwrap();
        assert!(ratio.abs() < 0.1, "{ratio}");
    }

    #[test]
    fn ar1_round_trip() {
        let c = SimConfig { phi: vec![0.5], ..cfg(2000) };
        let (r2, _) = gen_ar_residuals(&c).unwrap();
        let phi = fit_sar(&r2, 1).unwrap().ar.coeffs.phi()[0];
        assert!(phi > 0.4 && phi < 0.6, "{phi}");
    }

    #[test]
    fn nonstationary_config_rejected() {
        assert!(SimConfig { phi: vec![1.0], ..cfg(20) }.validate().is_err());
        assert!(SimConfig { theta0: 0, ..cfg(20) }.validate().is_err());
        assert!(SimConfig { noise_scale: -1.0, ..cfg(20) }.validate().is_err());
    }

    #[test]
    fn blow_up_is_rejected() {
        let c = SimConfig {
            noise_scale: 2.0,
            phi: vec![0.9],
            ..cfg(200)
        };
        assert!(matches!(simulate(&c), Err(Error::OutsideHemisphere(_))));
    }

    #[test]
    fn cycle_examples() {
        let base = default_base(7);
        let one = gen_periodic_cycle(&SimConfig { theta0: 1, ..cfg(10) }, &base).unwrap();
        assert_eq!(one.len(), 1);
        // θ₀ = 1 sits at angle 2π, i.e. on the circle; with radius 0 it is the center.
        let flat = gen_periodic_cycle(
            &SimConfig {
                periodic_amplitude: 0.0,
                ..cfg(10)
            },
            &base,
        )
        .unwrap();
        assert!(flat.iter().all(|g| g == &base));
        let c12 = gen_periodic_cycle(&cfg(10), &base).unwrap();
        for g in &c12 {
            assert!((geo_dist(g, &base).unwrap() - 0.15).abs() < 1e-12);
        }
        let m = frechet_mean(&c12, &[1.0; 12]).unwrap();
        assert!(geo_dist(&m, &base).unwrap() < 1e-9);
    }

    #[test]
    fn periodic_round_trip() {
        let c = cfg(60);
        let (r2, base) = gen_ar_residuals(&c).unwrap();
        let cycle = gen_periodic_cycle(&c, &base).unwrap();
        let r1 = impose_periodic(&r2, &cycle, &base).unwrap();
        let back = deseasonalize(&r1, &cycle, &base).unwrap();
        for (a, b) in back.points().iter().zip(r2.points()) {
            assert!(geo_dist(a, b).unwrap() < 1e-9);
        }
        let same = impose_periodic(&r2, &vec![base.clone(); 12], &base).unwrap();
        assert_eq!(same.points(), r2.points());
    }

    #[test]
    fn trend_round_trip() {
        let b = simulate(&cfg(80)).unwrap();
        let back = detrend_with_path(&b.y, &b.f_path, &b.base).unwrap();
        for (a, r) in back.points().iter().zip(b.r1.points()) {
            assert!(geo_dist(a, r).unwrap() < 1e-9);
        }
        let flat = simulate(&SimConfig {
            trend_amplitude: 0.0,
            ..cfg(80)
        })
        .unwrap();
        assert_eq!(flat.y.points(), flat.r1.points());
        let ends = geo_dist(&b.f_path[0], &b.f_path[79]).unwrap();
        assert!((ends - 0.3 * 79.0 / 80.0).abs() < 1e-12);
    }

    #[test]
    fn constant_when_everything_is_off() {
        let b = simulate(&SimConfig {
            noise_scale: 0.0,
            trend_amplitude: 0.0,
            periodic_amplitude: 0.0,
            ..cfg(40)
        })
        .unwrap();
        assert!(b.y.points().iter().all(|p| geo_dist(p, &b.base).unwrap() < 1e-15));
    }

    #[test]
    fn deterministic_and_stream_separated() {
        let a = simulate(&cfg(50)).unwrap();
        let b = simulate(&cfg(50)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = simulate(&cfg(50).with_replicate(1)).unwrap();
        assert_ne!(a.y, c.y);
    }
}
