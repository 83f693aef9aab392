//! Intrinsic geometry of the unit sphere.
//!
//! Points are stored in orthonormalized coordinates: raw function or vector
//! values pre-multiplied by the square roots of the quadrature weights, so the
//! ambient inner product is the plain dot product and skew-symmetric operators
//! are plain antisymmetric matrices. The same code path therefore serves the
//! finite-dimensional sphere `S^{m-1}` and discretized spheres of densities.
//!
//! The central objects are
//!
//! * the rank-2 generator `v3 ⊖ v2 = η (ζ2 ζ1ᵀ - ζ1 ζ2ᵀ)` whose exponential
//!   rotates `v2` onto `v3` inside `span{v2, v3}`,
//! * the removal operation `M_{b→a}(c) = Exp(T_{b,c}) a`, which applies the
//!   rotation carrying `b` to `c` to the point `a`,
//! * weighted Fréchet means, solved by an intrinsic gradient (Karcher) iteration.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the norm of a stored sphere point.
pub const UNIT_TOL: f64 = 1e-9;
/// Two points closer than this angle are treated as coincident.
pub const ZERO_ANGLE_TOL: f64 = 1e-9;
/// Points whose angle is within this distance of π are treated as antipodal.
pub const ANTIPODAL_TOL: f64 = 1e-8;

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// The coordinate space a series lives in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbientSpace {
    dim: usize,
    quadrature: Vec<f64>,
}

impl AmbientSpace {
    /// Finite-dimensional sphere `S^{dim-1}` with unit quadrature weights.
    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::with_quadrature(vec![1.0; dim])
    }

    pub fn with_quadrature(quadrature: Vec<f64>) -> Result<Self> {
        if quadrature.len() < 2 {
            return Err(Error::invalid("ambient dimension must be at least 2"));
        }
        if let Some(w) = quadrature.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::invalid(format!(
                "quadrature weights must be positive, found {w}"
            )));
        }
        Ok(Self {
            dim: quadrature.len(),
            quadrature,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn quadrature(&self) -> &[f64] {
        &self.quadrature
    }
}

/// A unit-norm coordinate vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SpherePoint {
    coords: Vec<f64>,
}

impl SpherePoint {
    /// Wraps coordinates that must already have unit norm.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::invalid("sphere points need at least 2 coordinates"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("non-finite coordinate"));
        }
        let n = norm(&coords);
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::NotUnit { norm: n });
        }
        Ok(Self { coords })
    }

    /// Projects a nonzero vector onto the sphere.
    pub fn normalize(mut coords: Vec<f64>) -> Result<Self> {
        let n = norm(&coords);
        if !(n > 1e-300) || !n.is_finite() {
            return Err(Error::invalid("cannot normalize a zero or non-finite vector"));
        }
        coords.iter_mut().for_each(|c| *c /= n);
        Self::new(coords)
    }

    /// The `i`-th standard basis vector of dimension `dim`.
    pub fn basis(dim: usize, i: usize) -> Self {
        assert!(i < dim && dim >= 2);
        let mut coords = vec![0.0; dim];
        coords[i] = 1.0;
        Self { coords }
    }

    pub(crate) fn from_raw_normalized(mut coords: Vec<f64>) -> Self {
        let n = norm(&coords);
        coords.iter_mut().for_each(|c| *c /= n);
        Self { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn neg(&self) -> Self {
        Self {
            coords: self.coords.iter().map(|c| -c).collect(),
        }
    }
}

impl TryFrom<Vec<f64>> for SpherePoint {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        SpherePoint::new(v)
    }
}

impl From<SpherePoint> for Vec<f64> {
    fn from(p: SpherePoint) -> Self {
        p.coords
    }
}

fn check_dims(u: &SpherePoint, v: &SpherePoint) -> Result<()> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            got: v.dim(),
        });
    }
    Ok(())
}

pub fn inner(u: &SpherePoint, v: &SpherePoint) -> Result<f64> {
    check_dims(u, v)?;
    Ok(dot(&u.coords, &v.coords))
}

/// Angle between two unit vectors together with the (unnormalized) component
/// of `v` orthogonal to `u`.
fn angle_and_orth(u: &[f64], v: &[f64]) -> (f64, Vec<f64>, f64) {
    let c = dot(u, v);
    let orth: Vec<f64> = v.iter().zip(u).map(|(vi, ui)| vi - c * ui).collect();
    let s = norm(&orth);
    // atan2 agrees with acos(clamp(c)) but keeps full precision near 0 and π.
    (s.atan2(c), orth, s)
}

/// Geodesic distance in radians, in `[0, π]`.
pub fn geo_dist(v1: &SpherePoint, v2: &SpherePoint) -> Result<f64> {
    check_dims(v1, v2)?;
    Ok(dist_unchecked(&v1.coords, &v2.coords))
}

#[inline]
pub(crate) fn dist_unchecked(a: &[f64], b: &[f64]) -> f64 {
    angle_and_orth(a, b).0
}

/// The generator `η (ζ2 ⊗ ζ1 - ζ1 ⊗ ζ2)` with `ζ1 = v2` and `ζ2` the unit
/// direction of `v3` orthogonal to `v2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rank2Generator {
    pub eta: f64,
    pub zeta1: SpherePoint,
    pub zeta2: SpherePoint,
}

impl Rank2Generator {
    pub fn is_zero(&self) -> bool {
        self.eta == 0.0
    }

    pub fn dim(&self) -> usize {
        self.zeta1.dim()
    }
}

/// Some unit vector orthogonal to `u`.
fn any_orthogonal(u: &[f64]) -> Vec<f64> {
    let k = u
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut e: Vec<f64> = vec![0.0; u.len()];
    e[k] = 1.0;
    let c = u[k];
    e.iter_mut().zip(u).for_each(|(ei, ui)| *ei -= c * ui);
    let n = norm(&e);
    e.iter_mut().for_each(|x| *x /= n);
    e
}

/// Builds `v3 ⊖ v2`, the generator of the geodesic rotation taking `v2` to `v3`.
pub fn log_generator(v2: &SpherePoint, v3: &SpherePoint) -> Result<Rank2Generator> {
    check_dims(v2, v3)?;
    let (eta, orth, s) = angle_and_orth(&v2.coords, &v3.coords);
    if eta > std::f64::consts::PI - ANTIPODAL_TOL {
        return Err(Error::Antipodal);
    }
    if eta < ZERO_ANGLE_TOL {
        return Ok(Rank2Generator {
            eta: 0.0,
            zeta1: v2.clone(),
            zeta2: SpherePoint {
                coords: any_orthogonal(&v2.coords),
            },
        });
    }
    let zeta2 = orth.into_iter().map(|x| x / s).collect();
    Ok(Rank2Generator {
        eta,
        zeta1: v2.clone(),
        zeta2: SpherePoint { coords: zeta2 },
    })
}

/// Applies `Exp(T) = id + (sin η / η) T + ((1 - cos η) / η²) T²` to `x`
/// through the rank-2 closed form.
pub fn rotate(g: &Rank2Generator, x: &SpherePoint) -> SpherePoint {
    if g.eta == 0.0 {
        return x.clone();
    }
    let z1 = &g.zeta1.coords;
    let z2 = &g.zeta2.coords;
    let a = dot(z1, &x.coords);
    let b = dot(z2, &x.coords);
    let (s, c) = g.eta.sin_cos();
    let one_c = 1.0 - c;
    // T x = η (a ζ2 - b ζ1),  T² x = -η² (a ζ1 + b ζ2)
    let out: Vec<f64> = x
        .coords
        .iter()
        .zip(z1.iter().zip(z2))
        .map(|(xi, (p, q))| xi + s * (a * q - b * p) - one_c * (a * p + b * q))
        .collect();
    SpherePoint::from_raw_normalized(out)
}

/// `M_{b→a}(c) = Exp(T_{b,c}) a`: transports the gap between `b` and `a` to `c`.
pub fn remove(a: &SpherePoint, b: &SpherePoint, c: &SpherePoint) -> Result<SpherePoint> {
    check_dims(a, b)?;
    let g = log_generator(b, c)?;
    Ok(rotate(&g, a))
}

/// A skew-symmetric operator, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SkewOperator {
    dim: usize,
    data: Vec<f64>,
}

impl SkewOperator {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    /// Validates antisymmetry to within `1e-10`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("operator matrix must be square"));
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        for i in 0..dim {
            for j in 0..dim {
                if (data[i * dim + j] + data[j * dim + i]).abs() > 1e-10 {
                    return Err(Error::invalid("operator matrix is not skew-symmetric"));
                }
            }
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| *x == 0.0)
    }

    /// `self + alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &SkewOperator) {
        debug_assert_eq!(self.dim, other.dim);
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += alpha * b);
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|x| alpha * x).collect(),
        }
    }

    pub fn sub(&self, other: &SkewOperator) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Elementwise average; `None` for an empty slice.
    pub fn mean(ops: &[SkewOperator]) -> Option<Self> {
        let first = ops.first()?;
        let mut acc = Self::zeros(first.dim);
        for op in ops {
            acc.axpy(1.0, op);
        }
        Some(acc.scaled(1.0 / ops.len() as f64))
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.data.chunks(self.dim).map(|row| dot(row, x)).collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for SkewOperator {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        SkewOperator::from_rows(rows)
    }
}

impl From<SkewOperator> for Vec<Vec<f64>> {
    fn from(op: SkewOperator) -> Self {
        op.data.chunks(op.dim).map(|r| r.to_vec()).collect()
    }
}

pub fn generator_to_operator(g: &Rank2Generator) -> SkewOperator {
    let dim = g.dim();
    let mut op = SkewOperator::zeros(dim);
    if g.eta == 0.0 {
        return op;
    }
    let z1 = g.zeta1.coords();
    let z2 = g.zeta2.coords();
    for i in 0..dim {
        for j in 0..dim {
            op.data[i * dim + j] = g.eta * (z2[i] * z1[j] - z1[i] * z2[j]);
        }
    }
    op
}

/// Hilbert–Schmidt inner product `tr(AᵀB)`.
pub fn hs_inner(a: &SkewOperator, b: &SkewOperator) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            got: b.dim,
        });
    }
    Ok(dot(&a.data, &b.data))
}

/// Applies the matrix exponential of a skew operator to `x`.
///
/// Uses scaling and squaring with Padé approximants on the dense matrix; the
/// result is renormalized since the exponential of a skew matrix is orthogonal.
pub fn expm_apply(a: &SkewOperator, x: &SpherePoint) -> Result<SpherePoint> {
    if a.dim != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            got: x.dim(),
        });
    }
    if a.is_zero() {
        return Ok(x.clone());
    }
    let e = a.to_matrix().exp();
    let y = e * DVector::from_column_slice(x.coords());
    Ok(SpherePoint::from_raw_normalized(y.as_slice().to_vec()))
}

/// Riemannian log map: the tangent vector at `base` pointing to `y` with
/// length equal to their geodesic distance.
pub fn log_map(base: &SpherePoint, y: &SpherePoint) -> Result<Vec<f64>> {
    check_dims(base, y)?;
    log_map_raw(&base.coords, &y.coords)
}

fn log_map_raw(base: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let (theta, mut orth, s) = angle_and_orth(base, y);
    if theta > std::f64::consts::PI - ANTIPODAL_TOL {
        return Err(Error::Antipodal);
    }
    if s == 0.0 {
        return Ok(vec![0.0; base.len()]);
    }
    let k = theta / s;
    orth.iter_mut().for_each(|x| *x *= k);
    Ok(orth)
}

/// Riemannian exponential map at `base` applied to the tangent vector `v`.
pub fn exp_map(base: &SpherePoint, v: &[f64]) -> SpherePoint {
    let t = norm(v);
    if t == 0.0 {
        return base.clone();
    }
    let (s, c) = t.sin_cos();
    let out = base
        .coords
        .iter()
        .zip(v)
        .map(|(b, vi)| c * b + s * vi / t)
        .collect();
    SpherePoint::from_raw_normalized(out)
}

/// Stopping rules for [`frechet_mean_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrechetOptions {
    /// Converged once a step moves the iterate by less than this angle.
    pub step_tol: f64,
    pub max_iter: usize,
    /// Maximum number of step halvings per iteration.
    pub max_halvings: usize,
}

impl Default for FrechetOptions {
    fn default() -> Self {
        Self {
            step_tol: 1e-12,
            max_iter: 500,
            max_halvings: 60,
        }
    }
}

fn weighted_objective(nu: &[f64], points: &[SpherePoint], weights: &[f64]) -> f64 {
    points
        .iter()
        .zip(weights)
        .map(|(p, w)| {
            let d = dist_unchecked(nu, &p.coords);
            w * d * d
        })
        .sum()
}

/// Weighted mean of the log maps, `Σ w_t log_ν(y_t) / Σ w_t`.
fn mean_log(nu: &SpherePoint, points: &[SpherePoint], weights: &[f64], wsum: f64) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; nu.dim()];
    for (p, w) in points.iter().zip(weights) {
        if *w == 0.0 {
            continue;
        }
        let l = log_map_raw(&nu.coords, &p.coords)?;
        acc.iter_mut().zip(&l).for_each(|(a, li)| *a += w * li);
    }
    acc.iter_mut().for_each(|a| *a /= wsum);
    Ok(acc)
}

/// Intrinsic gradient of `ν ↦ Σ w_t d²(ν, y_t)`, i.e. `-2 Σ w_t log_ν(y_t)`.
pub fn frechet_gradient(nu: &SpherePoint, points: &[SpherePoint], weights: &[f64]) -> Result<Vec<f64>> {
    let mut g = mean_log(nu, points, weights, 1.0)?;
    g.iter_mut().for_each(|x| *x *= -2.0);
    Ok(g)
}

pub fn frechet_objective(nu: &SpherePoint, points: &[SpherePoint], weights: &[f64]) -> f64 {
    weighted_objective(&nu.coords, points, weights)
}

pub fn frechet_mean(points: &[SpherePoint], weights: &[f64]) -> Result<SpherePoint> {
    frechet_mean_with(points, weights, &FrechetOptions::default())
}

/// Minimizes `ν ↦ Σ w_t d²(ν, y_t)` over the sphere.
///
/// Starts at the normalized weighted extrinsic average and takes unit Karcher
/// steps `ν ← Exp_ν(Σ w log_ν(y) / Σ w)`, halving the step whenever the
/// objective would increase. Negative weights are allowed as long as their sum
/// is positive; only stationarity is certified in that case.
pub fn frechet_mean_with(
    points: &[SpherePoint],
    weights: &[f64],
    opts: &FrechetOptions,
) -> Result<SpherePoint> {
    let first = points.first().ok_or(Error::Empty)?;
    if weights.len() != points.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            got: weights.len(),
        });
    }
    let dim = first.dim();
    if let Some(p) = points.iter().find(|p| p.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: p.dim(),
        });
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::invalid("non-finite weight"));
    }
    let wsum: f64 = weights.iter().sum();
    if !(wsum > 0.0) {
        return Err(Error::NonPositiveWeightSum(wsum));
    }

    let mut avg = vec![0.0; dim];
    for (p, w) in points.iter().zip(weights) {
        avg.iter_mut().zip(&p.coords).for_each(|(a, x)| *a += w * x);
    }
    let mut nu = if norm(&avg) > 1e-8 * wsum {
        SpherePoint::from_raw_normalized(avg)
    } else {
        let (i, _) = weights
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty");
        points[i].clone()
    };

    let mut f = weighted_objective(&nu.coords, points, weights);
    for _ in 0..opts.max_iter {
        let dir = mean_log(&nu, points, weights, wsum)?;
        let dir_norm = norm(&dir);
        if dir_norm < opts.step_tol {
            return Ok(nu);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let v: Vec<f64> = dir.iter().map(|d| step * d).collect();
            let cand = exp_map(&nu, &v);
            let fc = weighted_objective(&cand.coords, points, weights);
            if fc <= f + 1e-14 * (1.0 + f.abs()) {
                accepted = Some((cand, fc));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((cand, fc)) => {
                nu = cand;
                f = fc;
                if step * dir_norm < opts.step_tol {
                    return Ok(nu);
                }
            }
            // No descent possible at machine precision: stationary up to rounding.
            None if dir_norm < 1e-7 => return Ok(nu),
            None => return Err(Error::NoConvergence(opts.max_iter)),
        }
    }
    Err(Error::NoConvergence(opts.max_iter))
}
