//! Cell-centred radial grid on `[0, R]` with finite-volume metric factors.
//!
//! Face areas and cell volumes are stored as logarithms: on strongly
//! expanding warps `ψ^{N−1}` overflows long before the radii of interest.
//! Only ratios `A/vol` ever enter the stencil.

use crate::error::{Error, Result};
use crate::geometry::ModelManifold;

// 5-point Gauss–Legendre on [-1, 1].
const GL_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

/// `log ∑ exp(x_i) w_i` without overflow.
fn log_weighted_sum(xs: &[f64], ws: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().zip(ws).map(|(x, w)| w * (x - m).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone)]
pub struct RadialGrid {
    radius: f64,
    h: f64,
    dim: usize,
    centers: Vec<f64>,
    log_face_area: Vec<f64>,
    log_volume: Vec<f64>,
    coef_plus: Vec<f64>,
    coef_minus: Vec<f64>,
    boundary_coef: f64,
}

impl RadialGrid {
    /// `n_cells` uniform cells of width `R / n_cells`. The warp must be
    /// defined up to `R + h/2` (the ghost centre).
    pub fn new(manifold: &ModelManifold, radius: f64, n_cells: usize) -> Result<Self> {
        if n_cells < 4 {
            return Err(Error::GridTooCoarse {
                cells: n_cells,
                min: 4,
            });
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::param("radius", "must be positive and finite"));
        }
        let h = radius / n_cells as f64;
        let ghost = radius + 0.5 * h;
        if ghost > manifold.rho_max() {
            return Err(Error::Domain {
                rho: ghost,
                lo: 0.0,
                hi: manifold.rho_max(),
            });
        }
        let centers: Vec<f64> = (0..n_cells).map(|i| (i as f64 + 0.5) * h).collect();
        let log_face_area = (0..=n_cells)
            .map(|i| manifold.log_area(i as f64 * h))
            .collect::<Result<Vec<_>>>()?;
        let log_volume = (0..n_cells)
            .map(|i| {
                let mid = (i as f64 + 0.5) * h;
                let xs = GL_NODES
                    .iter()
                    .map(|&x| manifold.log_area(mid + 0.5 * h * x))
                    .collect::<Result<Vec<_>>>()?;
                Ok(log_weighted_sum(&xs, &GL_WEIGHTS) + (0.5 * h).ln())
            })
            .collect::<Result<Vec<_>>>()?;
        let lh = h.ln();
        let coef_plus: Vec<f64> = (0..n_cells)
            .map(|i| (log_face_area[i + 1] - lh - log_volume[i]).exp())
            .collect();
        let coef_minus: Vec<f64> = (0..n_cells)
            .map(|i| (log_face_area[i] - lh - log_volume[i]).exp())
            .collect();
        // Dirichlet data sits on the face, half a cell from the last centre.
        let boundary_coef = 2.0 * coef_plus[n_cells - 1];
        Ok(Self {
            radius,
            h,
            dim: manifold.dim(),
            centers,
            log_face_area,
            log_volume,
            coef_plus,
            coef_minus,
            boundary_coef,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_cells(&self) -> usize {
        self.centers.len()
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn ghost_center(&self) -> f64 {
        self.radius + 0.5 * self.h
    }

    pub fn log_face_area(&self) -> &[f64] {
        &self.log_face_area
    }

    pub fn log_volume(&self) -> &[f64] {
        &self.log_volume
    }

    /// `A_{i+1/2} / (h · vol_i)`.
    pub fn coef_plus(&self, i: usize) -> f64 {
        self.coef_plus[i]
    }

    /// `A_{i−1/2} / (h · vol_i)`; zero for the first cell.
    pub fn coef_minus(&self, i: usize) -> f64 {
        self.coef_minus[i]
    }

    /// `A(R) / ((h/2) · vol_{n−1})`: coupling of the last cell to a Dirichlet
    /// value imposed at `R`.
    pub fn boundary_coef(&self) -> f64 {
        self.boundary_coef
    }

    /// Index of the cell containing `rho`.
    pub fn cell_of(&self, rho: f64) -> usize {
        ((rho / self.h).floor().max(0.0) as usize).min(self.n_cells() - 1)
    }

    /// Finite-volume integral `∑ u_i vol_i` (the angular factor is omitted).
    pub fn integrate(&self, u: &[f64]) -> f64 {
        u.iter()
            .zip(&self.log_volume)
            .map(|(v, lv)| v * lv.exp())
            .sum()
    }

    /// Linear interpolation of cell values at `rho`, clamped to the
    /// first/last centre.
    pub fn interpolate(&self, u: &[f64], rho: f64) -> f64 {
        let n = self.n_cells();
        let x = rho / self.h - 0.5;
        if x <= 0.0 {
            return u[0];
        }
        let k = x.floor() as usize;
        if k + 1 >= n {
            return u[n - 1];
        }
        let t = x - k as f64;
        u[k] * (1.0 - t) + u[k + 1] * t
    }
}
