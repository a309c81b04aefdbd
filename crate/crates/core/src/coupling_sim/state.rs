use serde::{Deserialize, Serialize};

use crate::vector::{norm, truncate};

/// Transform weight `alpha`, position weight `alpha0`, and truncation
/// threshold `kappa` of the coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingParams {
    pub alpha: f64,
    pub alpha0: f64,
    pub kappa: f64,
}

/// The coupled state `((x, v), (x', v'))`. Differences are derived on
/// demand so they never go stale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairState {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub xp: Vec<f64>,
    pub vp: Vec<f64>,
}

impl PairState {
    pub fn new(x: Vec<f64>, v: Vec<f64>, xp: Vec<f64>, vp: Vec<f64>) -> Self {
        Self { x, v, xp, vp }
    }

    pub fn diagonal(x: Vec<f64>, v: Vec<f64>) -> Self {
        Self { xp: x.clone(), vp: v.clone(), x, v }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn z(&self) -> Vec<f64> {
        self.x.iter().zip(&self.xp).map(|(a, b)| a - b).collect()
    }

    pub fn w(&self) -> Vec<f64> {
        self.v.iter().zip(&self.vp).map(|(a, b)| a - b).collect()
    }

    /// `q = z + w / alpha`
    pub fn q(&self, alpha: f64) -> Vec<f64> {
        (0..self.dim()).map(|i| (self.x[i] - self.xp[i]) + (self.v[i] - self.vp[i]) / alpha).collect()
    }

    /// `r = alpha0 |z| + |q|`
    pub fn r(&self, p: &CouplingParams) -> f64 {
        p.alpha0 * norm(&self.z()) + norm(&self.q(p.alpha))
    }

    /// The modification shift `alpha (q)_kappa`.
    pub fn shift(&self, p: &CouplingParams) -> Vec<f64> {
        if p.kappa == 0.0 {
            return vec![0.0; self.dim()];
        }
        truncate(&self.q(p.alpha), p.kappa).into_iter().map(|c| p.alpha * c).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        self.x == self.xp && self.v == self.vp
    }

    pub fn swapped(&self) -> Self {
        Self { x: self.xp.clone(), v: self.vp.clone(), xp: self.x.clone(), vp: self.v.clone() }
    }

    pub fn max_abs(&self) -> f64 {
        self.x.iter().chain(&self.v).chain(&self.xp).chain(&self.vp).fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.v).chain(&self.xp).chain(&self.vp).all(|c| c.is_finite())
    }
}
