//! The overlap measure `nu*_x = nu* ∧ (delta_x * nu*)` of the slice family.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{gamma_half_integer, LevyMeasureSpec, SliceMeasure};
use crate::error::{Error, Result};
use crate::quad;
use crate::vector::{norm, sub};

/// `nu*_x` for a slice base measure and a non-zero shift.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMeasure {
    pub base: SliceMeasure,
    pub shift: Vec<f64>,
}

/// Mass value with a standard error (zero for deterministic quadrature).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassEstimate {
    pub value: f64,
    pub std_error: f64,
}

const MC_SAMPLES: usize = 200_000;
const MC_SEED: u64 = 0x6f76_6572_6c61_7021;

impl OverlapMeasure {
    pub fn new(base: SliceMeasure, shift: Vec<f64>) -> Result<Self> {
        if shift.iter().all(|&s| s == 0.0) {
            return Err(Error::ShiftIsZero);
        }
        if shift.len() != base.dim {
            return Err(Error::DimensionMismatch { expected: base.dim, got: shift.len() });
        }
        Ok(Self { base, shift })
    }

    pub fn density(&self, u: &[f64]) -> f64 {
        let a = self.base.density(u);
        if a == 0.0 {
            return 0.0;
        }
        a.min(self.base.density(&sub(u, &self.shift)))
    }

    /// Total mass `nu*_x(R^d)`.
    pub fn mass(&self) -> MassEstimate {
        self.mass_in_shell(0.0, f64::INFINITY)
    }

    /// `nu*_x({lo < |u| <= hi})`.
    pub fn mass_in_shell(&self, lo: f64, hi: f64) -> MassEstimate {
        match self.base.dim {
            1 => MassEstimate { value: mass_1d(&self.base, self.shift[0], lo, hi), std_error: 0.0 },
            2 => MassEstimate { value: self.mass_2d(lo, hi), std_error: 0.0 },
            3 => MassEstimate { value: self.mass_3d(lo, hi), std_error: 0.0 },
            _ => self.mass_monte_carlo(lo, hi),
        }
    }

    fn u1_range(&self) -> Option<(f64, f64)> {
        let x1 = self.shift[0];
        let a = x1.max(0.0);
        let b = (1.0 + x1).min(1.0);
        (b > a).then_some((a, b))
    }

    fn shell_weight(&self, u: &[f64], lo: f64, hi: f64) -> f64 {
        let n = norm(u);
        if n > lo && n <= hi {
            self.density(u)
        } else {
            0.0
        }
    }

    fn tol(&self) -> f64 {
        1e-10 * (1.0 + self.base.c * norm(&self.shift).powf(-self.base.theta0))
    }

    fn mass_2d(&self, lo: f64, hi: f64) -> f64 {
        let Some((a, b)) = self.u1_range() else { return 0.0 };
        let (x1, x2) = (self.shift[0], self.shift[1]);
        let tol = self.tol();
        let inner = |u1: f64| -> f64 {
            let mut breaks = vec![0.0, x2];
            if x2 != 0.0 {
                breaks.push(((u1 - x1).powi(2) + x2 * x2 - u1 * u1) / (2.0 * x2));
            }
            for r in [lo, hi] {
                if r.is_finite() && r > u1 {
                    let s = (r * r - u1 * u1).sqrt();
                    breaks.extend([s, -s]);
                }
            }
            real_line(|s| self.shell_weight(&[u1, s], lo, hi), &breaks, tol)
        };
        let mut outer_breaks = vec![];
        for r in [lo, hi] {
            if r.is_finite() {
                outer_breaks.push(r);
            }
        }
        quad::integrate_with_breaks(inner, a, b, &outer_breaks, tol, 1e-9, 2_000_000)
            .map(|r| r.value)
            .unwrap_or(f64::NAN)
    }

    fn mass_3d(&self, lo: f64, hi: f64) -> f64 {
        let Some((a, b)) = self.u1_range() else { return 0.0 };
        let x = self.shift.clone();
        let xp = [x[1], x[2]];
        let xx = norm(&x).powi(2);
        let tol = self.tol();
        let phi_peak = xp[1].atan2(xp[0]);
        let inner = |u1: f64| -> f64 {
            let ring = |phi: f64| -> f64 {
                let e = [phi.cos(), phi.sin()];
                let ex = e[0] * xp[0] + e[1] * xp[1];
                let mut breaks = vec![];
                if ex > 0.0 {
                    breaks.push(ex);
                    let rb = (xx - 2.0 * u1 * x[0]) / (2.0 * ex);
                    if rb > 0.0 {
                        breaks.push(rb);
                    }
                } else if ex < 0.0 {
                    let rb = (xx - 2.0 * u1 * x[0]) / (2.0 * ex);
                    if rb > 0.0 {
                        breaks.push(rb);
                    }
                }
                for r in [lo, hi] {
                    if r.is_finite() && r > u1 {
                        breaks.push((r * r - u1 * u1).sqrt());
                    }
                }
                half_line(|rho| rho * self.shell_weight(&[u1, rho * e[0], rho * e[1]], lo, hi), &breaks, tol)
            };
            let mut angle_breaks = vec![];
            if xp[0] != 0.0 || xp[1] != 0.0 {
                let p = phi_peak.rem_euclid(2.0 * std::f64::consts::PI);
                angle_breaks.push(p);
            }
            quad::integrate_with_breaks(ring, 0.0, 2.0 * std::f64::consts::PI, &angle_breaks, tol, 1e-8, 400_000)
                .map(|r| r.value)
                .unwrap_or(f64::NAN)
        };
        let outer_breaks: Vec<f64> = [lo, hi].into_iter().filter(|r| r.is_finite()).collect();
        quad::integrate_with_breaks(inner, a, b, &outer_breaks, tol, 1e-8, 100_000)
            .map(|r| r.value)
            .unwrap_or(f64::NAN)
    }

    /// Importance sampling: `u_1` uniform on its support interval and the
    /// transverse part multivariate Cauchy centred between the two peaks.
    fn mass_monte_carlo(&self, lo: f64, hi: f64) -> MassEstimate {
        let Some((a, b)) = self.u1_range() else {
            return MassEstimate { value: 0.0, std_error: 0.0 };
        };
        let d = self.base.dim;
        let k = d - 1;
        let centre: Vec<f64> = self.shift[1..].iter().map(|v| 0.5 * v).collect();
        let scale = norm(&self.shift).max(b - a);
        let kf = k as f64;
        // normalising constant of the k-dim standard Cauchy density
        let log_norm = gamma_half_integer(k + 1).ln() - gamma_half_integer(1).ln() - 0.5 * kf * std::f64::consts::PI.ln();
        let mut rng = ChaCha8Rng::seed_from_u64(MC_SEED);
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        let mut u = vec![0.0; d];
        for _ in 0..MC_SAMPLES {
            let u1 = a + (b - a) * rng.random::<f64>();
            let w: f64 = rng.sample::<f64, _>(StandardNormal).abs().max(1e-300);
            let mut t2 = 0.0;
            u[0] = u1;
            for j in 0..k {
                let z: f64 = rng.sample(StandardNormal);
                let t = z / w;
                t2 += t * t;
                u[j + 1] = centre[j] + scale * t;
            }
            let log_q = log_norm - 0.5 * (kf + 1.0) * (1.0 + t2).ln() - kf * scale.ln() - (b - a).ln();
            let val = self.shell_weight(&u, lo, hi) / log_q.exp();
            sum += val;
            sum2 += val * val;
        }
        let n = MC_SAMPLES as f64;
        let mean = sum / n;
        let var = (sum2 / n - mean * mean).max(0.0);
        MassEstimate { value: mean, std_error: (var / n).sqrt() }
    }
}

fn real_line<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: f64) -> f64 {
    let lo = breaks.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = breaks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mid = quad::integrate_with_breaks(&f, lo, hi, breaks, tol, 1e-10, 200_000).map_or(f64::NAN, |r| r.value);
    let right = quad::integrate_to_infinity(&f, hi, tol, 1e-10, 200_000).map_or(f64::NAN, |r| r.value);
    let left = quad::integrate_to_infinity(|s| f(-s), -lo, tol, 1e-10, 200_000).map_or(f64::NAN, |r| r.value);
    mid + right + left
}

fn half_line<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: f64) -> f64 {
    let hi = breaks.iter().copied().fold(0.0, f64::max);
    let mid = if hi > 0.0 {
        quad::integrate_with_breaks(&f, 0.0, hi, breaks, tol, 1e-10, 200_000).map_or(f64::NAN, |r| r.value)
    } else {
        0.0
    };
    mid + quad::integrate_to_infinity(&f, hi, tol, 1e-10, 200_000).map_or(f64::NAN, |r| r.value)
}

/// Closed form of `nu*_x({lo < |u| <= hi})` for a one-dimensional slice.
pub(crate) fn mass_1d(base: &SliceMeasure, x: f64, lo: f64, hi: f64) -> f64 {
    let ax = x.abs();
    if x == 0.0 || ax >= 1.0 {
        return 0.0;
    }
    let (a, b) = if x > 0.0 { (ax.max(lo), hi.min(1.0)) } else { (lo + ax, (hi + ax).min(1.0)) };
    if b <= a {
        return 0.0;
    }
    let t = base.theta0;
    base.c / t * (a.powf(-t) - b.powf(-t))
}

impl LevyMeasureSpec {
    /// `rho(x, u) = nu*_x(du) / nu(du)`, zero where `nu` has no density.
    pub fn overlap_density_ratio(&self, x: &[f64], u: &[f64]) -> Result<f64> {
        if x.iter().all(|&s| s == 0.0) {
            return Err(Error::ShiftIsZero);
        }
        Ok(self.overlap_ratio_unchecked(&self.coupling_slice(), x, u))
    }

    pub(crate) fn overlap_ratio_unchecked(&self, slice: &SliceMeasure, x: &[f64], u: &[f64]) -> f64 {
        let q = self.density(u);
        if q <= 0.0 {
            return 0.0;
        }
        let a = slice.density(u);
        if a == 0.0 {
            return 0.0;
        }
        (a.min(slice.density(&sub(u, x))) / q).min(1.0)
    }

    /// `nu*_x(R^d)`.
    pub fn overlap_mass(&self, x: &[f64]) -> Result<f64> {
        Ok(self.overlap_mass_estimate(x)?.value)
    }

    pub fn overlap_mass_estimate(&self, x: &[f64]) -> Result<MassEstimate> {
        Ok(OverlapMeasure::new(self.coupling_slice(), x.to_vec())?.mass())
    }

    /// `J(s) = inf_{0<|x|<=s} nu*_x(R^d)` over a direction × radius grid,
    /// refined once around the minimiser.
    pub fn overlap_lower_bound_j(&self, s: f64) -> Result<f64> {
        self.overlap_lower_bound_j_grid(s, 64, 32)
    }

    pub fn overlap_lower_bound_j_grid(&self, s: f64, n_dirs: usize, n_radii: usize) -> Result<f64> {
        if !(s > 0.0) {
            return Err(Error::NonPositiveRadius(s));
        }
        let slice = self.coupling_slice();
        let dirs = direction_grid(slice.dim, n_dirs);
        let mass = |dir: &[f64], r: f64| -> f64 {
            let x: Vec<f64> = dir.iter().map(|c| c * r).collect();
            OverlapMeasure { base: slice, shift: x }.mass().value
        };
        let mut best = (f64::INFINITY, 0usize, 0usize);
        for (i, dir) in dirs.iter().enumerate() {
            for k in 1..=n_radii {
                let r = s * k as f64 / n_radii as f64;
                let m = mass(dir, r);
                if m < best.0 {
                    best = (m, i, k);
                }
            }
        }
        // local refinement between neighbouring radii along the best direction
        let (mut value, i, k) = best;
        let r_lo = s * (k.saturating_sub(1)) as f64 / n_radii as f64;
        let r_hi = s * ((k + 1).min(n_radii)) as f64 / n_radii as f64;
        for j in 1..n_radii {
            let r = r_lo + (r_hi - r_lo) * j as f64 / n_radii as f64;
            if r > 0.0 && r <= s {
                value = value.min(mass(&dirs[i], r));
            }
        }
        if slice.dim >= 2 {
            // perturb the direction towards its grid neighbours
            let ni = (i + 1) % dirs.len();
            let pi = (i + dirs.len() - 1) % dirs.len();
            for nb in [ni, pi] {
                for j in 1..8 {
                    let t = j as f64 / 8.0;
                    let mixed: Vec<f64> = dirs[i].iter().zip(&dirs[nb]).map(|(a, b)| (1.0 - t) * a + t * b).collect();
                    let n = norm(&mixed);
                    if n > 0.0 {
                        let d: Vec<f64> = mixed.iter().map(|c| c / n).collect();
                        value = value.min(mass(&d, s * k as f64 / n_radii as f64));
                    }
                }
            }
        }
        Ok(value)
    }

    /// Fit `J(s) >= c0 s^{-theta0}` on `(0, r0]`; returns `c0`.
    pub fn fit_j_power_law(&self, r0: f64) -> Result<f64> {
        if !(r0 > 0.0) {
            return Err(Error::NonPositiveRadius(r0));
        }
        let slice = self.coupling_slice();
        let (n_dirs, n_radii, n_s) = if slice.dim == 1 { (2, 32, 48) } else { (32, 16, 12) };
        let mut c0 = f64::INFINITY;
        for s in quad::geometric_edges(r0 * 1e-4, r0, 1.25).into_iter().step_by(1).take(n_s.max(2)) {
            let j = self.overlap_lower_bound_j_grid(s, n_dirs, n_radii)?;
            c0 = c0.min(j * s.powf(slice.theta0));
        }
        let j = self.overlap_lower_bound_j_grid(r0, n_dirs, n_radii)?;
        c0 = c0.min(j * r0.powf(slice.theta0));
        if !(c0 > 0.0) {
            return Err(Error::InvalidParameter(format!("J vanishes on (0, {r0}]; choose a smaller r0")));
        }
        Ok(0.99 * c0)
    }
}

/// Unit directions: `±1` in one dimension, equally spaced angles in two,
/// a Fibonacci lattice otherwise.
pub fn direction_grid(d: usize, n: usize) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..n)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * k as f64;
                    let mut v = vec![0.0; d];
                    v[0] = z;
                    v[1] = r * a.cos();
                    v[2] = r * a.sin();
                    v
                })
                .collect()
        }
    }
}
