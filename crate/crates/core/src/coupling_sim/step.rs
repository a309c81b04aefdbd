//! Euler steps of the single and the coupled process, with jumps applied at
//! their exact times inside a window.

use super::state::{CouplingParams, PairState};
use crate::error::{Error, Result};
use crate::levy_measure::{Jump, LevyMeasureSpec, OverlapMeasure, SliceMeasure};
use crate::model::HamiltonianSystemSpec;
use crate::vector::{add, is_zero, sub, truncate};

/// States with a coordinate above this are treated as blown up.
pub const BLOW_UP: f64 = 1e12;

/// Which of the three jump branches a mark selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `v'` jumps by `u + y`
    Plus,
    /// `v'` jumps by `u - y`
    Minus,
    Synchronous,
}

/// Branch for the mark `l`, with `y = alpha (Q)_kappa`: `u + y` when
/// `l <= rho(-y, u) / 2`, `u - y` on the next `rho(y, u) / 2`, else `u`.
pub fn classify_branch(nu: &LevyMeasureSpec, slice: &SliceMeasure, u: &[f64], y: &[f64], l: f64) -> Branch {
    if is_zero(y) {
        return Branch::Synchronous;
    }
    let neg: Vec<f64> = y.iter().map(|c| -c).collect();
    let rho_minus = nu.overlap_ratio_unchecked(slice, &neg, u);
    if l <= 0.5 * rho_minus {
        return Branch::Plus;
    }
    let rho_plus = nu.overlap_ratio_unchecked(slice, y, u);
    if l <= 0.5 * (rho_minus + rho_plus) {
        Branch::Minus
    } else {
        Branch::Synchronous
    }
}

/// Jump of `v'` for a jump `u` of `v`, given the pre-jump `Q` and mark `l`.
pub fn classify_jump(nu: &LevyMeasureSpec, u: &[f64], q: &[f64], params: &CouplingParams, l: f64) -> Vec<f64> {
    let y = modification_shift(q, params);
    match classify_branch(nu, &nu.coupling_slice(), u, &y, l) {
        Branch::Plus => add(u, &y),
        Branch::Minus => sub(u, &y),
        Branch::Synchronous => u.to_vec(),
    }
}

/// `alpha (q)_kappa`, zero when `kappa = 0`.
pub fn modification_shift(q: &[f64], params: &CouplingParams) -> Vec<f64> {
    if params.kappa == 0.0 {
        return vec![0.0; q.len()];
    }
    truncate(q, params.kappa).into_iter().map(|c| params.alpha * c).collect()
}

/// Shared pieces of a simulation: the system, the noise, the cutoff and its
/// compensation drift.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    pub sys: &'a HamiltonianSystemSpec,
    pub nu: &'a LevyMeasureSpec,
    pub params: CouplingParams,
    pub delta: f64,
    pub correction: bool,
    slice: SliceMeasure,
    compensation: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(
        sys: &'a HamiltonianSystemSpec,
        nu: &'a LevyMeasureSpec,
        params: CouplingParams,
        delta: f64,
        correction: bool,
    ) -> Result<Self> {
        if nu.dim() != sys.dim {
            return Err(Error::DimensionMismatch { expected: sys.dim, got: nu.dim() });
        }
        let compensation = nu.small_jump_compensation(delta)?;
        Ok(Self { sys, nu, params, delta, correction, slice: nu.coupling_slice(), compensation })
    }

    /// `-int_{delta<|u|<=1} u nu(du)`, added to both velocities.
    pub fn compensation(&self) -> &[f64] {
        &self.compensation
    }

    /// Euler drift over `dt` plus the compensation drift.
    fn drift(&self, x: &mut [f64], v: &mut [f64], dt: f64, extra: Option<&[f64]>) -> Result<()> {
        if dt <= 0.0 {
            return Ok(());
        }
        let (dx, dv) = self.sys.drift(x, v)?;
        for i in 0..x.len() {
            x[i] += dt * dx[i];
            v[i] += dt * (dv[i] + self.compensation[i]);
        }
        if let Some(e) = extra {
            for i in 0..v.len() {
                v[i] += dt * e[i];
            }
        }
        Ok(())
    }

    /// One window of length `dt` for the single process. Jump times are
    /// relative to the window start.
    pub fn step_single(&self, x: &[f64], v: &[f64], dt: f64, jumps: &[Jump], t0: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let (mut x, mut v) = (x.to_vec(), v.to_vec());
        let mut s = 0.0;
        for j in jumps {
            self.drift(&mut x, &mut v, j.time - s, None)?;
            s = j.time;
            for (vi, ui) in v.iter_mut().zip(&j.u) {
                *vi += ui;
            }
        }
        self.drift(&mut x, &mut v, dt - s, None)?;
        check(&x, &v, t0 + dt)?;
        Ok((x, v))
    }

    /// The drift `-y (nu*_{-y} - nu*_y)({delta < |u| <= 1}) / 2` that removes
    /// the compensated part of the modification for simulated jumps.
    pub fn modification_correction(&self, y: &[f64]) -> Result<Vec<f64>> {
        if !self.correction || is_zero(y) || self.delta >= 1.0 {
            return Ok(vec![0.0; y.len()]);
        }
        let neg: Vec<f64> = y.iter().map(|c| -c).collect();
        let m_minus = OverlapMeasure::new(self.slice, neg)?.mass_in_shell(self.delta, 1.0).value;
        let m_plus = OverlapMeasure::new(self.slice, y.to_vec())?.mass_in_shell(self.delta, 1.0).value;
        let k = -0.5 * (m_minus - m_plus);
        Ok(y.iter().map(|c| k * c).collect())
    }

    /// One window for the pair. Both components share the sub-step grid
    /// given by the jump times, so a diagonal pair stays bitwise diagonal.
    pub fn step_pair(&self, pair: &PairState, dt: f64, jumps: &[Jump], t0: f64) -> Result<PairState> {
        let mut p = pair.clone();
        let mut s = 0.0;
        for j in jumps {
            self.drift_pair(&mut p, j.time - s)?;
            s = j.time;
            // Q_{t-} is the state right before this jump
            let y = p.shift(&self.params);
            let up = match classify_branch(self.nu, &self.slice, &j.u, &y, j.mark) {
                Branch::Plus => add(&j.u, &y),
                Branch::Minus => sub(&j.u, &y),
                Branch::Synchronous => j.u.clone(),
            };
            for ((v, vp), (a, b)) in p.v.iter_mut().zip(p.vp.iter_mut()).zip(j.u.iter().zip(&up)) {
                *v += a;
                *vp += b;
            }
        }
        self.drift_pair(&mut p, dt - s)?;
        check(&p.x, &p.v, t0 + dt)?;
        check(&p.xp, &p.vp, t0 + dt)?;
        Ok(p)
    }

    fn drift_pair(&self, p: &mut PairState, dt: f64) -> Result<()> {
        if dt <= 0.0 {
            return Ok(());
        }
        let y = p.shift(&self.params);
        let corr = self.modification_correction(&y)?;
        self.drift(&mut p.x, &mut p.v, dt, None)?;
        let extra = (!is_zero(&corr)).then_some(corr.as_slice());
        self.drift(&mut p.xp, &mut p.vp, dt, extra)
    }
}

fn check(x: &[f64], v: &[f64], t: f64) -> Result<()> {
    if x.iter().chain(v).all(|c| c.is_finite() && c.abs() <= BLOW_UP) {
        Ok(())
    } else {
        Err(Error::NonFiniteState { t })
    }
}
