use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::vector::dot;

/// Uniformly weighted samples of `(x, v)` states, flattened to `2d` coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalMeasure {
    pub samples: Vec<Vec<f64>>,
    pub time: f64,
    pub seed: u64,
}

impl EmpiricalMeasure {
    /// Drops non-finite samples.
    pub fn new(samples: Vec<Vec<f64>>, time: f64, seed: u64) -> Self {
        let samples = samples.into_iter().filter(|s| s.iter().all(|c| c.is_finite())).collect();
        Self { samples, time, seed }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }
}

/// Exact `W_1` between equal-size one-dimensional samples.
pub fn w1_sorted(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// `n` random unit directions in `R^dim`, deterministic in `seed`.
pub fn projections(dim: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dot(&g, &g).sqrt();
        if norm > 1e-12 {
            out.push(g.iter().map(|c| c / norm).collect());
        }
    }
    out
}

/// Average over `n` random projections of the one-dimensional `W_1`; exact
/// `W_1` when the samples are scalar. The larger sample is cut to the size
/// of the smaller one (its leading entries).
pub fn sliced_wasserstein(a: &EmpiricalMeasure, b: &EmpiricalMeasure, n: usize, seed: u64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    let m = a.len().min(b.len());
    let (sa, sb) = (&a.samples[..m], &b.samples[..m]);
    let proj = |dirs: &[Vec<f64>]| -> f64 {
        dirs.iter()
            .map(|e| {
                let pa: Vec<f64> = sa.iter().map(|s| dot(s, e)).collect();
                let pb: Vec<f64> = sb.iter().map(|s| dot(s, e)).collect();
                w1_sorted(&pa, &pb)
            })
            .sum::<f64>()
            / dirs.len() as f64
    };
    if a.dim() == 1 {
        return Ok(proj(&[vec![1.0]]));
    }
    Ok(proj(&projections(a.dim(), n.max(1), seed)))
}
