//! Jumps of size above a cutoff, generated as a marked Poisson point process.
//!
//! Each summand of `nu` is sampled from a polar series representation: points
//! of a unit-rate Poisson process in the "mass coordinate" `m` are mapped to
//! radii `rho = (K/m)^{1/theta}`, which reproduces the radial law
//! `K theta rho^{-1-theta} drho`. Stopping at `m >= K delta^{-theta}` keeps
//! exactly the points with `rho > delta`. Every proposal consumes the same
//! number of draws, so lowering the cutoff extends a realisation instead of
//! replacing it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{sphere_area, LevyKind, LevyMeasureSpec};
use crate::error::{Error, Result};

/// One jump: time in `[0, T)`, jump vector, and a uniform mark in `[0, 1)`
/// used to classify the jump in a coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub time: f64,
    pub u: Vec<f64>,
    pub mark: f64,
}

/// Samples `{(t, u) : |u| > cutoff}` from a Poisson random measure with
/// intensity `dt × nu(du)`.
#[derive(Debug, Clone)]
pub struct JumpSampler {
    spec: LevyMeasureSpec,
    cutoff: f64,
    budget: f64,
}

impl JumpSampler {
    /// `budget` caps the expected number of proposals per unit time.
    pub fn new(spec: LevyMeasureSpec, cutoff: f64, budget: f64) -> Result<Self> {
        if !(cutoff > 0.0) {
            return Err(Error::InvalidParameter(format!("cutoff must be positive, got {cutoff}")));
        }
        spec.validate()?;
        Ok(Self { spec, cutoff, budget })
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Expected number of proposals per unit time.
    pub fn proposal_rate(&self) -> f64 {
        self.spec.leaves().iter().map(|l| leaf_constants(l).0 * self.cutoff.powf(-leaf_constants(l).1)).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> Result<Vec<Jump>> {
        let rate = self.proposal_rate();
        if rate * horizon > self.budget * horizon.max(1.0) {
            return Err(Error::CutoffTooSmall {
                cutoff: self.cutoff,
                expected_jumps: rate * horizon,
                budget: self.budget * horizon.max(1.0),
            });
        }
        let leaves = self.spec.leaves();
        let seeds: Vec<u64> = leaves.iter().map(|_| rng.random::<u64>()).collect();
        let mut jumps = Vec::new();
        for (leaf, seed) in leaves.iter().zip(seeds) {
            let mut child = ChaCha8Rng::seed_from_u64(seed);
            sample_leaf(leaf, horizon, self.cutoff, &mut child, &mut jumps);
        }
        jumps.sort_by(|a, b| a.time.total_cmp(&b.time));
        Ok(jumps)
    }
}

/// `(K, theta)` with `nu_dom({|u| > rho}) = K rho^{-theta}` for the leaf or
/// its dominating isotropic measure.
fn leaf_constants(leaf: &LevyKind) -> (f64, f64) {
    match leaf {
        LevyKind::IsotropicStable(s) => (s.scale * sphere_area(s.dim) / s.alpha0, s.alpha0),
        LevyKind::SliceOnly(s) => (s.c * sphere_area(s.dim) / s.theta0, s.theta0),
        LevyKind::Sum { .. } => unreachable!("leaves are never sums"),
    }
}

fn sample_leaf(leaf: &LevyKind, horizon: f64, cutoff: f64, rng: &mut ChaCha8Rng, out: &mut Vec<Jump>) {
    let (k, theta) = leaf_constants(leaf);
    let d = leaf.dim();
    let m_stop = k * cutoff.powf(-theta);
    let mut m = 0.0;
    let mut dir = vec![0.0; d];
    loop {
        let gap: f64 = -(1.0 - rng.random::<f64>()).ln();
        m += gap / horizon;
        let time = horizon * rng.random::<f64>();
        draw_direction(rng, &mut dir);
        let mark = rng.random::<f64>();
        if m >= m_stop {
            break;
        }
        let rho = (k / m).powf(1.0 / theta);
        let u: Vec<f64> = dir.iter().map(|c| c * rho).collect();
        let keep = match leaf {
            LevyKind::SliceOnly(_) => u[0] > 0.0 && u[0] <= 1.0,
            _ => true,
        };
        if keep {
            out.push(Jump { time, u, mark });
        }
    }
}

fn draw_direction(rng: &mut ChaCha8Rng, dir: &mut [f64]) {
    if dir.len() == 1 {
        dir[0] = if rng.random::<bool>() { 1.0 } else { -1.0 };
        return;
    }
    loop {
        let mut n2 = 0.0;
        for c in dir.iter_mut() {
            *c = rng.sample(StandardNormal);
            n2 += *c * *c;
        }
        if n2 > 1e-300 {
            let n = n2.sqrt();
            dir.iter_mut().for_each(|c| *c /= n);
            return;
        }
    }
}

impl LevyMeasureSpec {
    /// Jumps with `|u| > cutoff` on `[0, horizon)`, sorted by time.
    pub fn sample_large_jumps<R: Rng + ?Sized>(
        &self,
        horizon: f64,
        cutoff: f64,
        budget: f64,
        rng: &mut R,
    ) -> Result<Vec<Jump>> {
        JumpSampler::new(self.clone(), cutoff, budget)?.sample(horizon, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn no_mass_above_cutoff_gives_no_jumps() {
        // a one-dimensional slice lives in (0, 1]
        let nu = LevyMeasureSpec::slice(1.0, 0.5, 1, 1.0).unwrap();
        for seed in 0..50 {
            assert!(nu.sample_large_jumps(3.0, 1.0, 1e6, &mut rng(seed)).unwrap().is_empty());
        }
    }

    #[test]
    fn stable_jump_rate_matches_tail_mass() {
        let nu = LevyMeasureSpec::stable(1.5, 1.0, 1, 1.0).unwrap();
        let oracle = 2.0 * 1.0 / 1.5; // 2 ∫_1^∞ u^{-2.5} du
        let runs = 10_000;
        let mut r = rng(7);
        let counts: Vec<f64> =
            (0..runs).map(|_| nu.sample_large_jumps(1.0, 1.0, 1e6, &mut r).unwrap().len() as f64).collect();
        let mean = counts.iter().sum::<f64>() / runs as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
        let se = (var / runs as f64).sqrt();
        assert!((mean - oracle).abs() < 3.0 * se, "mean {mean} oracle {oracle} se {se}");
    }

    #[test]
    fn slice_marks_stay_in_support() {
        let nu = LevyMeasureSpec::slice(1.0, 0.5, 1, 1.0).unwrap();
        let mut r = rng(3);
        for _ in 0..2000 {
            for j in nu.sample_large_jumps(1.0, 0.25, 1e6, &mut r).unwrap() {
                assert!(j.u[0] > 0.25 && j.u[0] <= 1.0);
                assert!((0.0..1.0).contains(&j.mark) && (0.0..1.0).contains(&j.time));
            }
        }
    }

    #[test]
    fn slice_jump_sizes_pass_kolmogorov_smirnov() {
        let (delta, t0) = (0.25f64, 0.5f64);
        let nu = LevyMeasureSpec::slice(1.0, t0, 1, 1.0).unwrap();
        let mut r = rng(11);
        let mut sizes = Vec::new();
        while sizes.len() < 10_000 {
            for j in nu.sample_large_jumps(1.0, delta, 1e6, &mut r).unwrap() {
                sizes.push(j.u[0]);
            }
        }
        sizes.truncate(10_000);
        sizes.sort_by(f64::total_cmp);
        let cdf = |u: f64| (delta.powf(-t0) - u.powf(-t0)) / (delta.powf(-t0) - 1.0);
        let n = sizes.len() as f64;
        let ks = sizes
            .iter()
            .enumerate()
            .map(|(i, &u)| (cdf(u) - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf(u)).abs()))
            .fold(0.0, f64::max);
        assert!(ks < 1.628 / n.sqrt(), "KS distance {ks}");
    }

    #[test]
    fn lowering_the_cutoff_extends_the_realisation() {
        let nu = LevyMeasureSpec::stable(1.2, 1.0, 2, 1.0).unwrap();
        let coarse = nu.sample_large_jumps(2.0, 0.5, 1e6, &mut rng(5)).unwrap();
        let fine = nu.sample_large_jumps(2.0, 0.1, 1e6, &mut rng(5)).unwrap();
        let big: Vec<_> = fine.into_iter().filter(|j| crate::vector::norm(&j.u) > 0.5).collect();
        assert_eq!(coarse, big);
    }

    #[test]
    fn rate_budget_is_enforced() {
        let nu = LevyMeasureSpec::stable(1.5, 1.0, 1, 1.0).unwrap();
        let err = nu.sample_large_jumps(1.0, 1e-6, 1e3, &mut rng(0)).unwrap_err();
        assert!(matches!(err, Error::CutoffTooSmall { .. }));
    }

    #[test]
    fn sums_merge_in_time_order() {
        let parts = vec![
            LevyKind::IsotropicStable(super::super::IsotropicStable::new(1.5, 1.0, 1).unwrap()),
            LevyKind::SliceOnly(super::super::SliceMeasure::new(1.0, 0.5, 1).unwrap()),
        ];
        let nu = LevyMeasureSpec::new(LevyKind::Sum { parts }, 1.0).unwrap();
        let jumps = nu.sample_large_jumps(5.0, 0.2, 1e6, &mut rng(9)).unwrap();
        assert!(jumps.windows(2).all(|w| w[0].time <= w[1].time));
        assert!(!jumps.is_empty());
    }
}
