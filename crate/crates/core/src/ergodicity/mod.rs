//! Monte Carlo decay of the contraction functional, rate fitting, and
//! equilibrium diagnostics.

mod fit;
mod wasserstein;

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use fit::{fit_log_linear, fit_window, ks_critical_01, ks_statistic, mean_and_se, LogLinearFit};
pub use wasserstein::{projections, sliced_wasserstein, w1_sorted, EmpiricalMeasure};

use crate::coupling_sim::{simulate_ensemble, simulate_single, PairState, SimConfig, Snapshots, Stepper};
use crate::error::{Error, Result};

/// Decay curve of `E[psi_tilde]` with its exponential fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    /// `E[psi]` on the same grid, for comparison.
    pub mean_psi: Vec<f64>,
    pub rate: f64,
    pub intercept: f64,
    pub r2: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub window: (usize, usize),
    pub replicas: usize,
    pub blow_ups: usize,
    pub stability: f64,
    pub lambda_star: Option<f64>,
    /// `rate >= lambda_star`; the theoretical rate is only a lower bound.
    pub rate_exceeds_lambda_star: Option<bool>,
}

impl DecayReport {
    pub fn ci_half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }

    /// Writes `t, mean, se, log_mean`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,mean,se,log_mean")?;
        for i in 0..self.times.len() {
            writeln!(out, "{},{},{},{}", self.times[i], self.mean[i], self.se[i], self.mean[i].ln())?;
        }
        Ok(())
    }
}

/// Bootstrap resamples used for the rate interval.
pub const BOOTSTRAP_SAMPLES: usize = 400;

/// Runs the pair ensemble and fits `ln E[psi_tilde_t]` after a burn-in of a
/// tenth of the horizon. `functional` returns `(psi_tilde, psi)`.
pub fn estimate_decay<I, F>(
    stepper: &Stepper,
    config: &SimConfig,
    initial: I,
    functional: F,
    lambda_star: Option<f64>,
) -> Result<DecayReport>
where
    I: Fn(usize) -> PairState + Sync,
    F: Fn(&PairState) -> (f64, f64) + Sync,
{
    let runs = simulate_ensemble(stepper, config, initial);
    let mut rows = Vec::new();
    let mut rows_psi = Vec::new();
    let mut times = Vec::new();
    let mut blow_ups = 0;
    let mut stability = 0.0f64;
    for run in runs {
        match run {
            Ok(tr) => {
                let vals: Vec<(f64, f64)> = tr.states.par_iter().map(&functional).collect();
                rows.push(vals.iter().map(|p| p.0).collect::<Vec<_>>());
                rows_psi.push(vals.iter().map(|p| p.1).collect::<Vec<_>>());
                stability = stability.max(tr.stability);
                times = tr.times;
            }
            Err(Error::NonFiniteState { .. }) => blow_ups += 1,
            Err(e) => return Err(e),
        }
    }
    if rows.is_empty() {
        return Err(Error::InsufficientDecay("every replica blew up".into()));
    }
    let (mean, se) = mean_and_se(&rows);
    let (mean_psi, _) = mean_and_se(&rows_psi);
    let window = fit_window(&times, &mean, &se, 0.1 * config.horizon)?;
    let fit = fit_log_linear(&times, &mean, &se, window)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xb007_57a9);
    let n = rows.len();
    let mut rates = Vec::with_capacity(BOOTSTRAP_SAMPLES);
    for _ in 0..BOOTSTRAP_SAMPLES {
        let sample: Vec<Vec<f64>> = (0..n).map(|_| rows[rng.random_range(0..n)].clone()).collect();
        let (m, s) = mean_and_se(&sample);
        if let Ok(f) = fit_log_linear(&times, &m, &s, window) {
            rates.push(f.rate);
        }
    }
    rates.sort_by(f64::total_cmp);
    let q = |p: f64| rates[((p * (rates.len() - 1) as f64).round() as usize).min(rates.len() - 1)];
    let (ci_low, ci_high) = if rates.is_empty() { (f64::NAN, f64::NAN) } else { (q(0.025), q(0.975)) };
    Ok(DecayReport {
        times,
        mean,
        se,
        mean_psi,
        rate: fit.rate,
        intercept: fit.intercept,
        r2: fit.r2,
        ci_low,
        ci_high,
        window,
        replicas: n,
        blow_ups,
        stability,
        lambda_star,
        rate_exceeds_lambda_star: lambda_star.map(|l| fit.rate >= l),
    })
}

/// Settings of [`equilibrium_diagnostics`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumSetup {
    pub projections: usize,
    pub projection_seed: u64,
    /// Master seed of the second ensemble.
    pub seed_b: u64,
    /// Random half splits averaged into the noise floor.
    pub floor_splits: usize,
    /// Distances pass when below `factor` times the noise floor.
    pub factor: f64,
    /// Exponent of the velocity moment tracked across checkpoints.
    pub moment_exponent: f64,
}

impl Default for EquilibriumSetup {
    fn default() -> Self {
        Self { projections: 64, projection_seed: 7, seed_b: 0x5eedb, floor_splits: 20, factor: 3.0, moment_exponent: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub t: f64,
    /// Ensembles A and B at time `t`.
    pub cross_distance: f64,
    /// Ensemble A at `t` against itself at `2 t`.
    pub stationarity_distance: f64,
    /// Distance expected between two independent samples of one law.
    pub noise_floor: f64,
    pub pass_cross: bool,
    pub pass_stationarity: bool,
    /// `(time, E|V|^p)` for ensemble A.
    pub velocity_moments: Vec<(f64, f64)>,
    pub blow_ups: usize,
}

/// Two single-process ensembles from `init_a` and `init_b`, run to `2 T`
/// with `T = config.horizon`.
pub fn equilibrium_diagnostics<A, B>(
    stepper: &Stepper,
    config: &SimConfig,
    setup: &EquilibriumSetup,
    init_a: A,
    init_b: B,
) -> Result<EquilibriumReport>
where
    A: Fn(usize) -> (Vec<f64>, Vec<f64>) + Sync,
    B: Fn(usize) -> (Vec<f64>, Vec<f64>) + Sync,
{
    let t = config.horizon;
    let long = SimConfig { horizon: 2.0 * t, sample_every: t.max(config.h) / 4.0, ..config.clone() };
    let long_b = SimConfig { seed: setup.seed_b, ..long.clone() };
    let run = |cfg: &SimConfig, init: &(dyn Fn(usize) -> (Vec<f64>, Vec<f64>) + Sync)| {
        (0..cfg.replicas)
            .into_par_iter()
            .map(|i| {
                let (x, v) = init(i);
                simulate_single(stepper, cfg, &x, &v, i)
            })
            .collect::<Vec<_>>()
    };
    let mut blow_ups = 0;
    let mut keep = |runs: Vec<Result<Snapshots>>| -> Result<Vec<Snapshots>> {
        let mut out = Vec::new();
        for r in runs {
            match r {
                Ok(p) => out.push(p),
                Err(Error::NonFiniteState { .. }) => blow_ups += 1,
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    };
    let a = keep(run(&long, &init_a))?;
    let b = keep(run(&long_b, &init_b))?;
    let (Some(first), false) = (a.first(), b.is_empty()) else {
        return Err(Error::EmptyMeasure);
    };
    let times = first.0.clone();
    let at = |runs: &[Snapshots], time: f64, seed: u64| {
        let k = times.iter().position(|&s| (s - time).abs() <= 1e-9 * (1.0 + time)).unwrap_or(times.len() - 1);
        let samples = runs.iter().map(|r| r.1[k].0.iter().chain(&r.1[k].1).copied().collect()).collect();
        EmpiricalMeasure::new(samples, time, seed)
    };
    let a_t = at(&a, t, long.seed);
    let a_2t = at(&a, 2.0 * t, long.seed);
    let b_t = at(&b, t, setup.seed_b);
    let sw = |p: &EmpiricalMeasure, q: &EmpiricalMeasure| sliced_wasserstein(p, q, setup.projections, setup.projection_seed);
    let cross_distance = sw(&a_t, &b_t)?;
    let stationarity_distance = sw(&a_t, &a_2t)?;

    // half splits are sqrt(2) noisier than full-size pairs
    let mut rng = ChaCha8Rng::seed_from_u64(setup.projection_seed ^ 0xf1005);
    let mut floor = 0.0;
    let n = a_2t.len();
    for _ in 0..setup.floor_splits {
        let mut idx: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            idx.swap(i, rng.random_range(0..=i));
        }
        let half = |r: std::ops::Range<usize>| {
            EmpiricalMeasure::new(idx[r].iter().map(|&i| a_2t.samples[i].clone()).collect(), 2.0 * t, long.seed)
        };
        floor += sw(&half(0..n / 2), &half(n / 2..n))? / std::f64::consts::SQRT_2;
    }
    let noise_floor = floor / setup.floor_splits.max(1) as f64;

    let p = setup.moment_exponent;
    let velocity_moments = times
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let m = a.iter().map(|r| crate::vector::norm(&r.1[k].1).powf(p)).sum::<f64>() / a.len() as f64;
            (s, m)
        })
        .collect();
    Ok(EquilibriumReport {
        t,
        cross_distance,
        stationarity_distance,
        noise_floor,
        pass_cross: cross_distance <= setup.factor * noise_floor,
        pass_stationarity: stationarity_distance <= setup.factor * noise_floor,
        velocity_moments,
        blow_ups,
    })
}

#[cfg(test)]
mod tests;
