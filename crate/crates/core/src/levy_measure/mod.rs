//! Lévy measures driving the velocity equation and the sub-measure used by
//! the coupling.
//!
//! Two families are supported, plus finite sums of them:
//!
//! * isotropic stable: density `scale * |u|^{-d-alpha0}` on all of `R^d`;
//! * slice: density `c * |u|^{-d-theta0}` on `{0 < u_1 <= 1}`.
//!
//! The coupling sub-measure `nu*` is always a [`SliceMeasure`]. For a pure
//! stable measure it is the slice `scale * |u|^{-d-alpha0} 1{0<u_1<=1}`,
//! which is dominated by the stable density.

mod overlap;
mod sampling;

pub use overlap::{direction_grid, MassEstimate, OverlapMeasure};
pub use sampling::{Jump, JumpSampler};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::quad;

/// Slice measure `c |u|^{-d-theta0}` restricted to `{0 < u_1 <= 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceMeasure {
    pub c: f64,
    pub theta0: f64,
    pub dim: usize,
}

/// Rotation-invariant stable Lévy measure `scale |u|^{-d-alpha0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsotropicStable {
    pub alpha0: f64,
    pub scale: f64,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LevyKind {
    IsotropicStable(IsotropicStable),
    SliceOnly(SliceMeasure),
    Sum { parts: Vec<LevyKind> },
}

/// A Lévy measure together with the moment exponent `theta` in `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyMeasureSpec {
    pub kind: LevyKind,
    pub theta: f64,
}

/// Value of an integral that may diverge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum Integral {
    Finite(f64),
    Divergent,
}

impl Integral {
    pub fn is_finite(&self) -> bool {
        matches!(self, Integral::Finite(_))
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Integral::Finite(v) => Some(*v),
            Integral::Divergent => None,
        }
    }
}

/// `(int (1 ∧ |u|^2) nu(du), int (|u|^2 ∧ |u|^theta) nu(du))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub small_jump: Integral,
    pub theta_moment: Integral,
}

const RADIAL_TOL: f64 = 1e-11;
const RADIAL_EVALS: usize = 400_000;

impl SliceMeasure {
    pub fn new(c: f64, theta0: f64, dim: usize) -> Result<Self> {
        ensure(c > 0.0 && c.is_finite(), || format!("slice scale c must be positive, got {c}"))?;
        ensure(theta0 > 0.0 && theta0 < 2.0, || format!("theta0 must lie in (0,2), got {theta0}"))?;
        ensure(dim >= 1, || "dimension must be at least 1".into())?;
        Ok(Self { c, theta0, dim })
    }

    pub fn in_support(&self, u: &[f64]) -> bool {
        u[0] > 0.0 && u[0] <= 1.0
    }

    pub fn density(&self, u: &[f64]) -> f64 {
        if !self.in_support(u) {
            return 0.0;
        }
        let n = crate::vector::norm(u);
        self.c * n.powf(-(self.dim as f64) - self.theta0)
    }

    /// Radial weight `w(rho)` with `int phi(|u|) nu(du) = int phi(rho) w(rho) d rho`.
    pub fn radial_weight(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            return 0.0;
        }
        let t = (1.0 / rho).min(1.0);
        self.c * rho.powf(-1.0 - self.theta0) * band_area(self.dim, t)
    }

    /// Tail index `p*`: `int_{|u|>1} |u|^p nu(du) < ∞` iff `p < p*`.
    pub fn tail_index(&self) -> f64 {
        if self.dim == 1 {
            f64::INFINITY
        } else {
            1.0 + self.theta0
        }
    }
}

impl IsotropicStable {
    pub fn new(alpha0: f64, scale: f64, dim: usize) -> Result<Self> {
        ensure(alpha0 > 0.0 && alpha0 < 2.0, || format!("alpha0 must lie in (0,2), got {alpha0}"))?;
        ensure(scale > 0.0 && scale.is_finite(), || format!("scale must be positive, got {scale}"))?;
        ensure(dim >= 1, || "dimension must be at least 1".into())?;
        Ok(Self { alpha0, scale, dim })
    }

    pub fn density(&self, u: &[f64]) -> f64 {
        let n = crate::vector::norm(u);
        if n == 0.0 {
            return 0.0;
        }
        self.scale * n.powf(-(self.dim as f64) - self.alpha0)
    }

    pub fn radial_weight(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            return 0.0;
        }
        self.scale * sphere_area(self.dim) * rho.powf(-1.0 - self.alpha0)
    }

    /// `nu({|u| > delta})`.
    pub fn mass_above(&self, delta: f64) -> f64 {
        self.scale * sphere_area(self.dim) * delta.powf(-self.alpha0) / self.alpha0
    }
}

impl LevyKind {
    pub fn dim(&self) -> usize {
        match self {
            LevyKind::IsotropicStable(s) => s.dim,
            LevyKind::SliceOnly(s) => s.dim,
            LevyKind::Sum { parts } => parts.first().map_or(0, |p| p.dim()),
        }
    }

    fn density(&self, u: &[f64]) -> f64 {
        match self {
            LevyKind::IsotropicStable(s) => s.density(u),
            LevyKind::SliceOnly(s) => s.density(u),
            LevyKind::Sum { parts } => parts.iter().map(|p| p.density(u)).sum(),
        }
    }

    fn radial_weight(&self, rho: f64) -> f64 {
        match self {
            LevyKind::IsotropicStable(s) => s.radial_weight(rho),
            LevyKind::SliceOnly(s) => s.radial_weight(rho),
            LevyKind::Sum { parts } => parts.iter().map(|p| p.radial_weight(rho)).sum(),
        }
    }

    fn tail_index(&self) -> f64 {
        match self {
            LevyKind::IsotropicStable(s) => s.alpha0,
            LevyKind::SliceOnly(s) => s.tail_index(),
            LevyKind::Sum { parts } => parts.iter().map(|p| p.tail_index()).fold(f64::INFINITY, f64::min),
        }
    }

    fn is_symmetric(&self) -> bool {
        match self {
            LevyKind::IsotropicStable(_) => true,
            LevyKind::SliceOnly(_) => false,
            LevyKind::Sum { parts } => parts.iter().all(|p| p.is_symmetric()),
        }
    }

    fn leaves<'a>(&'a self, out: &mut Vec<&'a LevyKind>) {
        match self {
            LevyKind::Sum { parts } => parts.iter().for_each(|p| p.leaves(out)),
            leaf => out.push(leaf),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            LevyKind::IsotropicStable(s) => {
                IsotropicStable::new(s.alpha0, s.scale, s.dim)?;
                ensure(s.dim == dim, || "summands must share one dimension".into())
            }
            LevyKind::SliceOnly(s) => {
                SliceMeasure::new(s.c, s.theta0, s.dim)?;
                ensure(s.dim == dim, || "summands must share one dimension".into())
            }
            LevyKind::Sum { parts } => {
                ensure(!parts.is_empty(), || "sum of measures needs at least one part".into())?;
                parts.iter().try_for_each(|p| p.validate(dim))
            }
        }
    }
}

impl LevyMeasureSpec {
    pub fn new(kind: LevyKind, theta: f64) -> Result<Self> {
        let spec = Self { kind, theta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn slice(c: f64, theta0: f64, dim: usize, theta: f64) -> Result<Self> {
        Self::new(LevyKind::SliceOnly(SliceMeasure::new(c, theta0, dim)?), theta)
    }

    pub fn stable(alpha0: f64, scale: f64, dim: usize, theta: f64) -> Result<Self> {
        Self::new(LevyKind::IsotropicStable(IsotropicStable::new(alpha0, scale, dim)?), theta)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.theta > 0.0 && self.theta <= 1.0, || {
            format!("moment exponent theta must lie in (0,1], got {}", self.theta)
        })?;
        let d = self.kind.dim();
        ensure(d >= 1, || "dimension must be at least 1".into())?;
        self.kind.validate(d)
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    /// Density of `nu` with respect to Lebesgue measure.
    pub fn density(&self, u: &[f64]) -> f64 {
        self.kind.density(u)
    }

    pub fn is_symmetric(&self) -> bool {
        self.kind.is_symmetric()
    }

    pub(crate) fn leaves(&self) -> Vec<&LevyKind> {
        let mut out = Vec::new();
        self.kind.leaves(&mut out);
        out
    }

    /// The coupling sub-measure `nu* <= nu`: the first slice summand, or the
    /// slice dominated by the first stable summand.
    pub fn coupling_slice(&self) -> SliceMeasure {
        let leaves = self.leaves();
        for leaf in &leaves {
            if let LevyKind::SliceOnly(s) = leaf {
                return *s;
            }
        }
        match leaves[0] {
            LevyKind::IsotropicStable(s) => SliceMeasure { c: s.scale, theta0: s.alpha0, dim: s.dim },
            _ => unreachable!("leaves are never sums"),
        }
    }

    /// `int_{lo < |u| <= hi} phi(|u|) nu(du)`; `hi` may be infinite.
    pub fn radial_integral<F: Fn(f64) -> f64>(&self, phi: F, lo: f64, hi: f64) -> Result<f64> {
        let g = |rho: f64| {
            let w = self.kind.radial_weight(rho);
            if w == 0.0 {
                0.0
            } else {
                phi(rho) * w
            }
        };
        let mut total = 0.0;
        let inner_hi = hi.min(1.0);
        if lo < inner_hi {
            total += quad::integrate(&g, lo, inner_hi, RADIAL_TOL, RADIAL_TOL, RADIAL_EVALS)?.value;
        }
        let outer_lo = lo.max(1.0);
        if hi > outer_lo {
            total += if hi.is_infinite() {
                quad::integrate_to_infinity(&g, outer_lo, RADIAL_TOL, RADIAL_TOL, RADIAL_EVALS)?.value
            } else {
                quad::integrate(&g, outer_lo, hi, RADIAL_TOL, RADIAL_TOL, RADIAL_EVALS)?.value
            };
        }
        Ok(total)
    }

    /// `nu({|u| > delta})`.
    pub fn mass_above(&self, delta: f64) -> Result<f64> {
        crate::error::ensure(delta > 0.0, || format!("cutoff must be positive, got {delta}"))?;
        let mut m = 0.0;
        for leaf in self.leaves() {
            m += match leaf {
                LevyKind::IsotropicStable(s) => s.mass_above(delta),
                LevyKind::SliceOnly(s) => {
                    let single = LevyMeasureSpec { kind: LevyKind::SliceOnly(*s), theta: self.theta };
                    single.radial_integral(|_| 1.0, delta, f64::INFINITY)?
                }
                LevyKind::Sum { .. } => unreachable!(),
            };
        }
        Ok(m)
    }

    /// `int (1 ∧ |u|^2) nu(du)`.
    pub fn small_jump_integral(&self) -> Result<f64> {
        self.radial_integral(|r| (r * r).min(1.0), 0.0, f64::INFINITY)
    }

    /// Numerical values of `int (1∧|u|^2) dnu` and `int (|u|^2∧|u|^theta) dnu`.
    pub fn moment_check(&self, theta: f64) -> Result<MomentReport> {
        ensure(theta > 0.0 && theta <= 1.0, || format!("theta must lie in (0,1], got {theta}"))?;
        let small = Integral::Finite(self.small_jump_integral()?);
        let theta_moment = if theta >= self.kind.tail_index() {
            Integral::Divergent
        } else {
            Integral::Finite(self.radial_integral(|r| (r * r).min(r.powf(theta)), 0.0, f64::INFINITY)?)
        };
        Ok(MomentReport { small_jump: small, theta_moment })
    }

    /// `int_{|u|>1} |u|^p nu(du)`, or `Divergent`.
    pub fn tail_moment(&self, p: f64) -> Result<Integral> {
        if p >= self.kind.tail_index() {
            return Ok(Integral::Divergent);
        }
        Ok(Integral::Finite(self.radial_integral(|r| r.powf(p), 1.0, f64::INFINITY)?))
    }

    /// Drift `-int_{delta<|u|<=1} u nu(du)` replacing the compensated jumps
    /// below 1 when only jumps above `delta` are simulated.
    pub fn small_jump_compensation(&self, delta: f64) -> Result<Vec<f64>> {
        ensure(delta > 0.0 && delta <= 1.0, || format!("cutoff must lie in (0,1], got {delta}"))?;
        let d = self.dim();
        let mut out = vec![0.0; d];
        for leaf in self.leaves() {
            if let LevyKind::SliceOnly(s) = leaf {
                let one_minus = 1.0 - s.theta0;
                let radial = if one_minus.abs() < 1e-12 {
                    -delta.ln()
                } else {
                    (1.0 - delta.powf(one_minus)) / one_minus
                };
                out[0] -= s.c * half_sphere_first_moment(d) * radial;
            }
        }
        Ok(out)
    }

    /// Second-moment matrix `int_{|u|<=rho} u u^T nu(du)` (row-major, `d x d`).
    pub fn second_moment_in_ball(&self, rho: f64) -> Vec<f64> {
        let d = self.dim();
        let mut diag = 0.0;
        for leaf in self.leaves() {
            diag += match leaf {
                LevyKind::IsotropicStable(s) => {
                    s.scale * sphere_area(d) / d as f64 * rho.powf(2.0 - s.alpha0) / (2.0 - s.alpha0)
                }
                LevyKind::SliceOnly(s) => {
                    let r = rho.min(1.0);
                    let ang = if d == 1 { 1.0 } else { sphere_area(d) / (2.0 * d as f64) };
                    let mut v = s.c * ang * r.powf(2.0 - s.theta0) / (2.0 - s.theta0);
                    if rho > 1.0 {
                        // beyond the unit ball the band constraint binds; integrate numerically
                        let single = LevyMeasureSpec { kind: LevyKind::SliceOnly(*s), theta: self.theta };
                        v += single
                            .radial_integral(|t| t * t / d as f64, 1.0, rho)
                            .unwrap_or(0.0);
                    }
                    v
                }
                LevyKind::Sum { .. } => unreachable!(),
            };
        }
        let mut m = vec![0.0; d * d];
        for i in 0..d {
            m[i * d + i] = diag;
        }
        m
    }

    /// `int_{|u|<=rho} |u|^3 nu(du)`.
    pub fn third_absolute_moment_in_ball(&self, rho: f64) -> Result<f64> {
        self.radial_integral(|t| t * t * t, 0.0, rho)
    }

    /// Largest radius with tail mass above it at most `mass`.
    pub fn radius_with_tail_mass(&self, mass: f64) -> Result<f64> {
        let mut r = 1.0;
        while self.mass_above(r)? > mass {
            r *= 2.0;
            if r > 1e300 {
                break;
            }
        }
        Ok(r)
    }
}

pub(crate) fn gamma_half_integer(n2: usize) -> f64 {
    // Γ(n2 / 2)
    if n2 == 1 {
        std::f64::consts::PI.sqrt()
    } else if n2 == 2 {
        1.0
    } else {
        let x = (n2 - 2) as f64 / 2.0;
        x * gamma_half_integer(n2 - 2)
    }
}

/// Surface area of the unit sphere in `R^d` (`2` for `d = 1`).
pub fn sphere_area(d: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / gamma_half_integer(d)
}

/// Volume of the unit ball in `R^k` (`1` for `k = 0`).
pub fn ball_volume(k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    std::f64::consts::PI.powf(k as f64 / 2.0) / gamma_half_integer(k + 2)
}

/// `int_{S^{d-1}, omega_1 > 0} omega_1 d sigma`.
pub fn half_sphere_first_moment(d: usize) -> f64 {
    ball_volume(d - 1)
}

/// Surface measure of `{omega in S^{d-1} : 0 < omega_1 <= t}` for `t in [0, 1]`.
pub fn band_area(d: usize, t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    match d {
        1 => {
            if t >= 1.0 {
                1.0
            } else {
                0.0
            }
        }
        2 => 2.0 * t.asin(),
        3 => 2.0 * std::f64::consts::PI * t,
        _ => {
            let e = (d as f64 - 3.0) / 2.0;
            let v = quad::integrate(|s: f64| (1.0 - s * s).max(0.0).powf(e), 0.0, t, 1e-13, 1e-13, 10_000)
                .map(|r| r.value)
                .unwrap_or(f64::NAN);
            sphere_area(d - 1) * v
        }
    }
}


impl SliceMeasure {
    /// `int phi(u) nu*(du)` over the slice `{0 < u_1 <= 1}`.
    ///
    /// Nested adaptive quadrature for `d <= 3`, importance-sampled Monte
    /// Carlo (fixed seed) above that.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, phi: F, tol: f64) -> Result<f64> {
        let dens = |u: &[f64]| self.density(u);
        let outer_edges = quad::geometric_edges(1e-12, 1.0, 2.0);
        match self.dim {
            1 => {
                let f = |t: f64| {
                    let u = [t];
                    phi(&u) * dens(&u)
                };
                Ok(quad::integrate_with_breaks(f, 0.0, 1.0, &outer_edges, tol, 1e-9, 2_000_000)?.value)
            }
            2 => {
                let inner = |u1: f64| -> f64 {
                    let g = |s: f64| {
                        let u = [u1, s];
                        phi(&u) * dens(&u)
                    };
                    let b = [-10.0 * u1, -u1, 0.0, u1, 10.0 * u1];
                    let mid = quad::integrate_with_breaks(&g, b[0], b[4], &b, tol, 1e-9, 200_000).map_or(f64::NAN, |r| r.value);
                    let right = quad::integrate_to_infinity(&g, b[4], tol, 1e-9, 200_000).map_or(f64::NAN, |r| r.value);
                    let left = quad::integrate_to_infinity(|s| g(-s), b[4], tol, 1e-9, 200_000).map_or(f64::NAN, |r| r.value);
                    mid + right + left
                };
                let v = quad::integrate_with_breaks(inner, 0.0, 1.0, &outer_edges, tol, 1e-8, 400_000)?.value;
                finite_or_budget(v)
            }
            3 => {
                let two_pi = 2.0 * std::f64::consts::PI;
                let inner = |u1: f64| -> f64 {
                    let ring = |phi_a: f64| -> f64 {
                        let (s, c) = phi_a.sin_cos();
                        let g = |rho: f64| {
                            let u = [u1, rho * c, rho * s];
                            rho * phi(&u) * dens(&u)
                        };
                        let b = [0.0, u1, 10.0 * u1];
                        quad::integrate_with_breaks(&g, 0.0, b[2], &b, tol, 1e-8, 100_000).map_or(f64::NAN, |r| r.value)
                            + quad::integrate_to_infinity(&g, b[2], tol, 1e-8, 100_000).map_or(f64::NAN, |r| r.value)
                    };
                    quad::integrate(ring, 0.0, two_pi, tol, 1e-8, 20_000).map_or(f64::NAN, |r| r.value)
                };
                let v = quad::integrate_with_breaks(inner, 0.0, 1.0, &outer_edges, tol, 1e-7, 20_000)?.value;
                finite_or_budget(v)
            }
            _ => Ok(self.integrate_monte_carlo(&phi, 400_000, 0x5eed_511c)),
        }
    }

    fn integrate_monte_carlo<F: Fn(&[f64]) -> f64>(&self, phi: &F, n: usize, seed: u64) -> f64 {
        use rand::{Rng, SeedableRng};
        // proposal: u_1 with density (1-a) u_1^{-a} on (0,1], transverse part
        // multivariate Cauchy of scale u_1
        let d = self.dim;
        let k = d - 1;
        let a = 0.5;
        let kf = k as f64;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let log_norm = gamma_half_integer(k + 1).ln() - gamma_half_integer(1).ln() - 0.5 * kf * std::f64::consts::PI.ln();
        let mut sum = 0.0;
        let mut u = vec![0.0; d];
        for _ in 0..n {
            let w = rng.random::<f64>().max(f64::MIN_POSITIVE);
            let u1 = w.powf(1.0 / (1.0 - a));
            let q1 = (1.0 - a) * u1.powf(-a);
            let g: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal).abs().max(1e-300);
            let mut t2 = 0.0;
            u[0] = u1;
            for uj in u.iter_mut().skip(1) {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                let t = z / g;
                t2 += t * t;
                *uj = u1 * t;
            }
            let log_q = log_norm - 0.5 * (kf + 1.0) * (1.0 + t2).ln() - kf * u1.ln();
            sum += phi(&u) * self.density(&u) / (q1 * log_q.exp());
        }
        sum / n as f64
    }
}

fn finite_or_budget(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::QuadratureBudgetExceeded(0))
    }
}
