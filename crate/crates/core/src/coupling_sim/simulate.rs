use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::state::PairState;
use super::step::Stepper;
use crate::error::{Error, Result};

/// Time step, jump cutoff, horizon and seeding of a pair simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub h: f64,
    pub delta: f64,
    pub horizon: f64,
    /// Subtract the compensated part of the modification (see [`Stepper::modification_correction`]).
    pub correction: bool,
    pub seed: u64,
    pub replicas: usize,
    /// Spacing of recorded snapshots; rounded to a multiple of `h`.
    pub sample_every: f64,
    /// Cap on expected jump proposals per unit time.
    pub jump_budget: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            h: 0.01,
            delta: 1e-3,
            horizon: 10.0,
            correction: true,
            seed: 1,
            replicas: 1000,
            sample_every: 0.5,
            jump_budget: 1e7,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad(format!("sim.h must be positive, got {}", self.h));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return bad(format!("sim.delta must lie in (0, 1], got {}", self.delta));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return bad(format!("sim.horizon must be finite and non-negative, got {}", self.horizon));
        }
        if self.replicas == 0 {
            return bad("sim.replicas must be at least 1".into());
        }
        if !(self.sample_every > 0.0) {
            return bad(format!("sim.sample_every must be positive, got {}", self.sample_every));
        }
        if !(self.jump_budget > 0.0) {
            return bad(format!("sim.jump_budget must be positive, got {}", self.jump_budget));
        }
        Ok(())
    }

    /// Window lengths covering `[0, horizon]`; the last one may be shorter.
    pub fn windows(&self) -> Vec<f64> {
        let n = (self.horizon / self.h - 1e-9).ceil().max(0.0) as usize;
        (0..n).map(|k| (self.horizon - k as f64 * self.h).min(self.h)).collect()
    }

    fn record_stride(&self) -> usize {
        ((self.sample_every / self.h).round() as usize).max(1)
    }
}

/// Snapshots of one replica.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PairState>,
    /// `h` times a drift Lipschitz estimate on the visited region; below
    /// 0.5 is the usual comfort zone for explicit Euler.
    pub stability: f64,
}

/// Independent rng stream of replica `replica` under `seed`.
pub fn replica_rng(seed: u64, replica: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica as u64);
    rng
}

/// Simulates one replica. Deterministic in `(config.seed, replica)`.
pub fn simulate_pair(stepper: &Stepper, config: &SimConfig, initial: &PairState, replica: usize) -> Result<Trajectory> {
    config.validate()?;
    if initial.dim() != stepper.sys.dim {
        return Err(Error::DimensionMismatch { expected: stepper.sys.dim, got: initial.dim() });
    }
    let mut rng = replica_rng(config.seed, replica);
    let stride = config.record_stride();
    let windows = config.windows();
    let mut traj = Trajectory { times: vec![0.0], states: vec![initial.clone()], stability: 0.0 };
    let mut p = initial.clone();
    let mut t = 0.0;
    let mut visited = p.max_abs();
    for (k, &dt) in windows.iter().enumerate() {
        let jumps = stepper.nu.sample_large_jumps(dt, config.delta, config.jump_budget, &mut rng)?;
        p = stepper.step_pair(&p, dt, &jumps, t)?;
        t = if k + 1 == windows.len() { config.horizon } else { t + dt };
        visited = visited.max(p.max_abs());
        if (k + 1) % stride == 0 || k + 1 == windows.len() {
            traj.times.push(t);
            traj.states.push(p.clone());
        }
    }
    let sys = stepper.sys;
    traj.stability = config.h * (sys.lipschitz_estimate(visited.max(1.0), 200) + sys.a.abs() + sys.b.abs());
    Ok(traj)
}

/// All replicas of an ensemble, in replica order. Replicas that blow up are
/// kept as `Err` so callers can count and exclude them.
pub fn simulate_ensemble<F>(stepper: &Stepper, config: &SimConfig, initial: F) -> Vec<Result<Trajectory>>
where
    F: Fn(usize) -> PairState + Sync,
{
    (0..config.replicas).into_par_iter().map(|i| simulate_pair(stepper, config, &initial(i), i)).collect()
}

/// Writes `t, x.., v.., x'.., v'.., r, psi_tilde`.
pub fn write_trajectory_csv<W: Write, F: Fn(&PairState) -> (f64, f64)>(
    mut out: W,
    traj: &Trajectory,
    r_and_psi: F,
) -> std::io::Result<()> {
    let d = traj.states.first().map_or(0, PairState::dim);
    let mut head = vec!["t".to_string()];
    for name in ["x", "v", "xp", "vp"] {
        head.extend((0..d).map(|i| format!("{name}{i}")));
    }
    head.push("r".into());
    head.push("psi_tilde".into());
    writeln!(out, "{}", head.join(","))?;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let (r, psi) = r_and_psi(s);
        let mut row = vec![t.to_string()];
        for part in [&s.x, &s.v, &s.xp, &s.vp] {
            row.extend(part.iter().map(f64::to_string));
        }
        row.push(r.to_string());
        row.push(psi.to_string());
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Recording times and `(x, v)` snapshots of one replica.
pub type Snapshots = (Vec<f64>, Vec<(Vec<f64>, Vec<f64>)>);

/// Snapshots of a single (uncoupled) replica at the recording grid of `config`.
pub fn simulate_single(
    stepper: &Stepper,
    config: &SimConfig,
    x: &[f64],
    v: &[f64],
    replica: usize,
) -> Result<Snapshots> {
    config.validate()?;
    let mut rng = replica_rng(config.seed, replica);
    let stride = config.record_stride();
    let windows = config.windows();
    let (mut x, mut v) = (x.to_vec(), v.to_vec());
    let mut times = vec![0.0];
    let mut states = vec![(x.clone(), v.clone())];
    let mut t = 0.0;
    for (k, &dt) in windows.iter().enumerate() {
        let jumps = stepper.nu.sample_large_jumps(dt, config.delta, config.jump_budget, &mut rng)?;
        (x, v) = stepper.step_single(&x, &v, dt, &jumps, t)?;
        t = if k + 1 == windows.len() { config.horizon } else { t + dt };
        if (k + 1) % stride == 0 || k + 1 == windows.len() {
            times.push(t);
            states.push((x.clone(), v.clone()));
        }
    }
    Ok((times, states))
}
