//! Test grids on balls in position and phase space.

use serde::{Deserialize, Serialize};

use crate::levy_measure::direction_grid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub radius: f64,
    /// Points per axis in one dimension; radial shells in higher dimensions.
    pub resolution: usize,
    /// Directions per shell when `dim >= 2`.
    pub directions: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { radius: 20.0, resolution: 201, directions: 16 }
    }
}

impl GridSpec {
    pub fn with_radius(radius: f64) -> Self {
        Self { radius, ..Self::default() }
    }

    fn radii(&self, n: usize, max_radius: f64) -> Vec<f64> {
        let r = self.radius.min(max_radius);
        (1..=n).map(|k| r * k as f64 / n as f64).collect()
    }

    /// Points of the ball `|x| <= min(radius, max_radius)`.
    pub fn positions(&self, dim: usize, max_radius: f64) -> Vec<Vec<f64>> {
        let r = self.radius.min(max_radius);
        if dim == 1 {
            let n = self.resolution.max(2);
            return (0..n).map(|k| vec![-r + 2.0 * r * k as f64 / (n - 1) as f64]).collect();
        }
        let mut out = vec![vec![0.0; dim]];
        let dirs = direction_grid(dim, self.directions.max(2));
        for rad in self.radii(self.resolution.max(2) / 2, max_radius) {
            for e in &dirs {
                out.push(e.iter().map(|c| c * rad).collect());
            }
        }
        out
    }

    /// Pairs `(x, v)` covering `|x| <= min(radius, max_radius)`, `|v| <= radius`.
    pub fn phase_points(&self, dim: usize, max_radius: f64) -> Vec<(Vec<f64>, Vec<f64>)> {
        let coarse = GridSpec {
            radius: self.radius,
            resolution: if dim == 1 { self.resolution } else { (self.resolution / 8).max(4) },
            directions: if dim == 1 { self.directions } else { (self.directions / 2).max(4) },
        };
        let xs = coarse.positions(dim, max_radius);
        let vs = coarse.positions(dim, f64::INFINITY);
        let mut out = Vec::with_capacity(xs.len() * vs.len());
        for x in &xs {
            for v in &vs {
                out.push((x.clone(), v.clone()));
            }
        }
        out
    }
}
