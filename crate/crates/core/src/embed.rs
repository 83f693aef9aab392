//! Square-root embeddings of compositions and densities onto the sphere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{AmbientSpace, SpherePoint};

/// Default smoothing constant for [`Composition::smoothed`].
pub const DEFAULT_SMOOTHING: f64 = 1e-6;

/// A point of the closed simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Composition {
    shares: Vec<f64>,
}

impl Composition {
    pub fn new(shares: Vec<f64>) -> Result<Self> {
        if shares.len() < 2 {
            return Err(Error::invalid("a composition needs at least 2 parts"));
        }
        if let Some(s) = shares.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
            return Err(Error::invalid(format!("negative or non-finite share {s}")));
        }
        let total: f64 = shares.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("shares sum to {total}, expected 1")));
        }
        Ok(Self { shares })
    }

    pub fn shares(&self) -> &[f64] {
        &self.shares
    }

    /// Adds `eps` to every share and renormalizes, moving the point into the
    /// open simplex.
    pub fn smoothed(&self, eps: f64) -> Self {
        let total = 1.0 + eps * self.shares.len() as f64;
        Self {
            shares: self.shares.iter().map(|s| (s + eps) / total).collect(),
        }
    }
}

/// Coordinatewise square root.
pub fn comp_to_sphere(c: &Composition) -> Result<SpherePoint> {
    SpherePoint::new(c.shares.iter().map(|s| s.sqrt()).collect())
}

/// Coordinatewise square, with negative coordinates clamped to zero first.
pub fn sphere_to_comp(v: &SpherePoint) -> Composition {
    let sq: Vec<f64> = v.coords().iter().map(|x| x.max(0.0).powi(2)).collect();
    let total: f64 = sq.iter().sum();
    let shares = if total > 0.0 {
        sq.into_iter().map(|s| s / total).collect()
    } else {
        // Entirely in the negative orthant: nothing survives the clamp.
        vec![1.0 / v.dim() as f64; v.dim()]
    };
    Composition { shares }
}

/// Density values on a grid together with the quadrature used to integrate them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityOnGrid {
    grid: Vec<f64>,
    values: Vec<f64>,
    quadrature: Vec<f64>,
}

impl DensityOnGrid {
    pub fn new(grid: Vec<f64>, values: Vec<f64>, quadrature: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() || grid.len() != quadrature.len() {
            return Err(Error::invalid("grid, values and quadrature lengths differ"));
        }
        if grid.len() < 2 {
            return Err(Error::invalid("a density grid needs at least 2 points"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("grid must be strictly increasing"));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("negative or non-finite density value"));
        }
        if quadrature.iter().any(|q| !(*q > 0.0)) {
            return Err(Error::invalid("quadrature weights must be positive"));
        }
        let mass: f64 = values.iter().zip(&quadrature).map(|(v, q)| v * q).sum();
        if (mass - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("density integrates to {mass}, expected 1")));
        }
        Ok(Self {
            grid,
            values,
            quadrature,
        })
    }

    /// Values given per bin, evaluated at bin midpoints with bin-width weights.
    pub fn on_bins(edges: &[f64], values: Vec<f64>) -> Result<Self> {
        let (grid, widths) = midpoint_rule(edges)?;
        Self::new(grid, values, widths)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn quadrature(&self) -> &[f64] {
        &self.quadrature
    }

    pub fn ambient(&self) -> AmbientSpace {
        AmbientSpace::with_quadrature(self.quadrature.clone())
            .expect("quadrature validated at construction")
    }
}

/// Bin midpoints and widths for strictly increasing `edges`.
pub fn midpoint_rule(edges: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if edges.len() < 3 {
        return Err(Error::invalid("need at least 3 bin edges"));
    }
    if edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("bin edges must be strictly increasing"));
    }
    let mids = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let widths = edges.windows(2).map(|w| w[1] - w[0]).collect();
    Ok((mids, widths))
}

/// Equally spaced edges on `[0, 1]`.
pub fn unit_edges(bins: usize) -> Vec<f64> {
    (0..=bins).map(|i| i as f64 / bins as f64).collect()
}

/// Pointwise square root in orthonormalized coordinates, `√f(x_i) √q_i`.
pub fn density_to_sphere(d: &DensityOnGrid) -> Result<SpherePoint> {
    let coords = d
        .values
        .iter()
        .zip(&d.quadrature)
        .map(|(v, q)| (v * q).sqrt())
        .collect();
    SpherePoint::normalize(coords)
}

pub fn sphere_to_density(v: &SpherePoint, grid: &[f64], quadrature: &[f64]) -> Result<DensityOnGrid> {
    if v.dim() != quadrature.len() || grid.len() != quadrature.len() {
        return Err(Error::DimensionMismatch {
            expected: quadrature.len(),
            got: v.dim(),
        });
    }
    let mut values: Vec<f64> = v
        .coords()
        .iter()
        .zip(quadrature)
        .map(|(c, q)| (c / q.sqrt()).max(0.0).powi(2))
        .collect();
    let mass: f64 = values.iter().zip(quadrature).map(|(x, q)| x * q).sum();
    if mass > 0.0 {
        values.iter_mut().for_each(|x| *x /= mass);
    } else {
        let total: f64 = quadrature.iter().sum();
        values.iter_mut().for_each(|x| *x = 1.0 / total);
    }
    DensityOnGrid::new(grid.to_vec(), values, quadrature.to_vec())
}

/// Normalizes bin counts to a density: `(count / total) / width` per bin.
pub fn histogram_to_density(counts: &[u64], edges: &[f64]) -> Result<DensityOnGrid> {
    if edges.len() != counts.len() + 1 {
        return Err(Error::invalid(format!(
            "{} counts need {} edges, got {}",
            counts.len(),
            counts.len() + 1,
            edges.len()
        )));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::invalid("histogram has no positive counts"));
    }
    let (grid, widths) = midpoint_rule(edges)?;
    let values = counts
        .iter()
        .zip(&widths)
        .map(|(c, w)| (*c as f64 / total as f64) / w)
        .collect();
    DensityOnGrid::new(grid, values, widths)
}
