//! The power-law rate function `sigma`, the exponent `g`, and the concave
//! distance profile `f`.
//!
//! For the constants this construction produces, `c2 g` is astronomically
//! steep: `f` rises over a length `L = (c2 g(1))^{-1/theta0}` that can be far
//! below `1e-300`, and `c1 = exp(-c2 g(2 R0))` underflows. Everything is
//! therefore carried in logarithms, and [`DistanceProfile::scaled`] exposes
//! `f / L`, which stays of order one.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad::kronrod_panel;

use super::super::generator::Profile;

/// `sigma(s) = A s^{1 - theta0}` with `A = exp(ln_scale)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerSigma {
    pub ln_scale: f64,
    pub theta0: f64,
}

impl PowerSigma {
    pub fn value(&self, s: f64) -> f64 {
        (self.ln_scale + (1.0 - self.theta0) * s.ln()).exp()
    }
}

/// `sigma_{alpha,kappa,R0}(s) = alpha^{-1} m sigma_{r0}(alpha m s)` with
/// `m = 1 ∧ kappa/R0` and `sigma_{r0}(r) = c_j r^{1 - theta0}`.
pub fn build_sigma(c_j: f64, theta0: f64, alpha: f64, kappa: f64, r0_big: f64) -> PowerSigma {
    let m = (kappa / r0_big).min(1.0);
    PowerSigma { ln_scale: c_j.ln() - theta0 * alpha.ln() + (2.0 - theta0) * m.ln(), theta0 }
}

/// Cumulative table of `F(t) = int_0^t exp(-tau^theta0) dtau`.
#[derive(Debug, Clone)]
struct ExpPowerIntegral {
    theta0: f64,
    edges: Vec<f64>,
    cumulative: Vec<f64>,
}

impl ExpPowerIntegral {
    fn new(theta0: f64) -> Self {
        // exp(-tau^theta0) < 1e-320 beyond this point
        let t_max = 740f64.powf(1.0 / theta0);
        let mut edges = vec![0.0];
        let mut t = 1e-30f64.min(t_max);
        while t < t_max {
            edges.push(t);
            t *= 1.5;
        }
        edges.push(t_max);
        let mut cumulative = vec![0.0];
        for w in edges.windows(2) {
            let last = *cumulative.last().unwrap();
            cumulative.push(last + Self::panel(theta0, w[0], w[1]));
        }
        Self { theta0, edges, cumulative }
    }

    fn panel(theta0: f64, a: f64, b: f64) -> f64 {
        kronrod_panel(a, b).iter().map(|(x, w)| w * (-x.powf(theta0)).exp()).sum()
    }

    fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    fn eval(&self, t: f64) -> f64 {
        if !(t > 0.0) {
            return 0.0;
        }
        if t >= *self.edges.last().unwrap() {
            return self.total();
        }
        let k = self.edges.partition_point(|e| *e <= t) - 1;
        self.cumulative[k] + Self::panel(self.theta0, self.edges[k], t)
    }
}

/// `f(s) = c1 s + int_0^s exp(-c2 g(l)) dl` on `[0, 2 R0]`, continued beyond
/// `2 R0` by `f(2R0) + f'(2R0) (s - 2R0) / (1 + s - 2R0)`.
///
/// `c2 g(s) = B s^{theta0}`; `L = B^{-1/theta0}`.
#[derive(Debug, Clone, Serialize)]
pub struct DistanceProfile {
    pub sigma: PowerSigma,
    pub r0_big: f64,
    pub c_star_big: f64,
    pub k0: f64,
    pub alpha0: f64,
    pub c2: f64,
    /// `ln B`.
    pub ln_b: f64,
    /// `ln c1 = -B (2 R0)^{theta0}`.
    pub ln_c1: f64,
    /// `ln L`.
    pub ln_unit: f64,
    #[serde(skip)]
    table: ExpPowerIntegral,
}

impl DistanceProfile {
    pub fn theta0(&self) -> f64 {
        self.sigma.theta0
    }

    pub fn c1(&self) -> f64 {
        self.ln_c1.exp()
    }

    /// `g(s) = C* int_0^s dl / sigma(l / (1 + k0 alpha0))`.
    pub fn g(&self, s: f64) -> f64 {
        (self.ln_b - self.c2.ln() + self.theta0() * s.ln()).exp()
    }

    pub fn g_prime(&self, s: f64) -> f64 {
        let k = 1.0 + self.k0 * self.alpha0;
        self.c_star_big / self.sigma.value(s / k)
    }

    /// `C* = 0`: no concave part, `f(s) = (1 + c1) s`.
    fn is_flat(&self) -> bool {
        self.ln_b == f64::NEG_INFINITY
    }

    /// `ln(2 R0 / L)`: the end of the explicit part in rescaled units.
    fn ln_t_end(&self) -> f64 {
        (2.0 * self.r0_big).ln() - self.ln_unit
    }

    /// `phi(t) = f(L t) / L = c1 t + int_0^t exp(-tau^theta0) dtau`, with the
    /// rational continuation past `2 R0`.
    pub fn phi(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if self.is_flat() {
            return (1.0 + self.c1()) * t;
        }
        let ln_end = self.ln_t_end();
        if t.ln() <= ln_end {
            return (self.ln_c1 + t.ln()).exp() + self.table.eval(t);
        }
        let t_end = ln_end.exp();
        let e = (t - t_end) * self.ln_unit.exp();
        self.phi(t_end) + self.phi_d1(t_end) * (t - t_end) / (1.0 + e)
    }

    /// `phi'(t) = f'(L t)`.
    pub fn phi_d1(&self, t: f64) -> f64 {
        if self.is_flat() {
            return 1.0 + self.c1();
        }
        let ln_end = self.ln_t_end();
        if t <= 0.0 || t.ln() <= ln_end {
            return self.ln_c1.exp() + (-t.max(0.0).powf(self.theta0())).exp();
        }
        let t_end = ln_end.exp();
        self.phi_d1(t_end) / (1.0 + (t - t_end) * self.ln_unit.exp()).powi(2)
    }

    /// `phi''(t) = L f''(L t)`.
    pub fn phi_d2(&self, t: f64) -> f64 {
        if self.is_flat() {
            return 0.0;
        }
        if t <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let ln_end = self.ln_t_end();
        if t.ln() <= ln_end {
            let th = self.theta0();
            return -th * t.powf(th - 1.0) * (-t.powf(th)).exp();
        }
        let t_end = ln_end.exp();
        let l = self.ln_unit.exp();
        -2.0 * l * self.phi_d1(t_end) / (1.0 + (t - t_end) * l).powi(3)
    }

    fn t_of(&self, s: f64) -> f64 {
        if s <= 0.0 {
            0.0
        } else {
            (s.ln() - self.ln_unit).exp()
        }
    }

    /// `f(s) / exp(ln_scale)`.
    fn eval(&self, s: f64, ln_scale: f64) -> f64 {
        let p = self.phi(self.t_of(s));
        if p == 0.0 {
            0.0
        } else {
            (p.ln() + self.ln_unit - ln_scale).exp()
        }
    }

    fn eval_d1(&self, s: f64, ln_scale: f64) -> f64 {
        self.phi_d1(self.t_of(s)) * (-ln_scale).exp()
    }

    fn eval_d2(&self, s: f64, ln_scale: f64) -> f64 {
        let p = self.phi_d2(self.t_of(s));
        if p == 0.0 || !p.is_finite() {
            return p;
        }
        -(p.abs().ln() - self.ln_unit - ln_scale).exp()
    }

    /// `f` itself. May underflow for steep constants; see [`Self::scaled`].
    pub fn f(&self, s: f64) -> f64 {
        self.eval(s, 0.0)
    }

    pub fn f_prime(&self, s: f64) -> f64 {
        self.eval_d1(s, 0.0)
    }

    pub fn f_second(&self, s: f64) -> f64 {
        self.eval_d2(s, 0.0)
    }

    /// `f / L`, an order-one view with the same shape.
    pub fn scaled(&self) -> ScaledProfile<'_> {
        ScaledProfile { f: self, ln_scale: self.ln_unit }
    }

    /// `f(s ∧ R0)` with `f'_-(s) = 0` for `s >= R0`, in units of `L`.
    pub fn hat(&self) -> HatProfile<'_> {
        HatProfile { f: self, ln_scale: self.ln_unit }
    }

    /// `f(s ∧ R0)` in natural units.
    pub fn hat_unscaled(&self) -> HatProfile<'_> {
        HatProfile { f: self, ln_scale: 0.0 }
    }
}

/// Builds `f` from `sigma` and the chain constants `C*`, `k0`, `alpha0`, `c2`.
pub fn build_f(
    sigma: PowerSigma,
    c_star_big: f64,
    k0: f64,
    alpha0: f64,
    c2: f64,
    r0_big: f64,
) -> Result<DistanceProfile> {
    let theta0 = sigma.theta0;
    if !(theta0 > 0.0) {
        return Err(Error::SigmaNotIntegrable(1.0 - theta0));
    }
    if theta0 >= 1.0 {
        return Err(Error::InvalidParameter(format!("sigma must be concave, theta0 = {theta0} >= 1")));
    }
    if !(r0_big > 0.0 && c2 > 0.0 && c_star_big >= 0.0) {
        return Err(Error::InvalidParameter(format!("build_f needs R0 > 0, c2 > 0, C* >= 0 (R0 = {r0_big}, c2 = {c2}, C* = {c_star_big})")));
    }
    let k = 1.0 + k0 * alpha0;
    // c2 g(s) = c2 C* K^{1-theta0} s^theta0 / (A theta0)
    let ln_b = c2.ln() + c_star_big.ln() + (1.0 - theta0) * k.ln() - sigma.ln_scale - theta0.ln();
    let ln_c1 = -(ln_b + theta0 * (2.0 * r0_big).ln()).exp();
    let ln_unit = if ln_b == f64::NEG_INFINITY { 0.0 } else { -ln_b / theta0 };
    Ok(DistanceProfile {
        sigma,
        r0_big,
        c_star_big,
        k0,
        alpha0,
        c2,
        ln_b,
        ln_c1,
        ln_unit,
        table: ExpPowerIntegral::new(theta0),
    })
}

/// `f` in units of `exp(ln_scale)`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledProfile<'a> {
    f: &'a DistanceProfile,
    ln_scale: f64,
}

impl Profile for ScaledProfile<'_> {
    fn value(&self, s: f64) -> f64 {
        self.f.eval(s, self.ln_scale)
    }
    fn d1(&self, s: f64) -> f64 {
        self.f.eval_d1(s, self.ln_scale)
    }
    fn d2(&self, s: f64) -> f64 {
        self.f.eval_d2(s, self.ln_scale)
    }
}

impl Profile for DistanceProfile {
    fn value(&self, s: f64) -> f64 {
        self.f(s)
    }
    fn d1(&self, s: f64) -> f64 {
        self.f_prime(s)
    }
    fn d2(&self, s: f64) -> f64 {
        self.f_second(s)
    }
}

/// `f(s ∧ R0)`.
#[derive(Debug, Clone, Copy)]
pub struct HatProfile<'a> {
    f: &'a DistanceProfile,
    ln_scale: f64,
}

impl Profile for HatProfile<'_> {
    fn value(&self, s: f64) -> f64 {
        self.f.eval(s.min(self.f.r0_big), self.ln_scale)
    }
    fn d1(&self, s: f64) -> f64 {
        if s >= self.f.r0_big {
            0.0
        } else {
            self.f.eval_d1(s, self.ln_scale)
        }
    }
    fn d2(&self, s: f64) -> f64 {
        if s >= self.f.r0_big {
            0.0
        } else {
            self.f.eval_d2(s, self.ln_scale)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use statrs::function::gamma::{gamma, gamma_lr};

    fn mild() -> DistanceProfile {
        let sigma = build_sigma(1.2, 0.4, 1.0, 0.25, 3.0);
        build_f(sigma, 2.0, 1.5, 2.0, 0.7, 3.0).unwrap()
    }

    #[test]
    fn sigma_unit_branch_and_hand_formula() {
        let s = build_sigma(1.3, 0.5, 1.0, 5.0, 2.0);
        assert_relative_eq!(s.value(0.7), 1.3 * 0.7f64.sqrt(), max_relative = 1e-14);
        // alpha = 2, m = 0.1: c alpha^{-theta0} m^{2-theta0}
        let s = build_sigma(1.3, 0.5, 2.0, 0.2, 2.0);
        assert_relative_eq!(s.value(1.0), 1.3 * 2f64.powf(-0.5) * 0.1f64.powf(1.5), max_relative = 1e-13);
    }

    #[test]
    fn f_matches_incomplete_gamma() {
        let f = mild();
        let th = 0.4;
        let b = f.ln_b.exp();
        for s in [1e-6, 0.01, 0.3, 1.0, 2.5, 6.0] {
            let exact = f.c1() * s + b.powf(-1.0 / th) / th * gamma(1.0 / th) * gamma_lr(1.0 / th, b * s.powf(th));
            assert_relative_eq!(f.f(s), exact, max_relative = 1e-11);
        }
    }

    #[test]
    fn g_prime_matches_finite_differences() {
        let f = mild();
        for s in [0.05, 0.5, 2.0, 5.5] {
            let h = 1e-6 * s;
            let fd = (f.g(s + h) - f.g(s - h)) / (2.0 * h);
            assert_relative_eq!(f.g_prime(s), fd, max_relative = 1e-8);
        }
    }

    #[test]
    fn zero_exponent_gives_linear_profile() {
        let sigma = build_sigma(1.0, 0.4, 1.0, 1.0, 1.0);
        let f = build_f(sigma, 0.0, 1.0, 2.0, 1.0, 1.0).unwrap();
        assert_eq!(f.c1(), 1.0);
        for s in [0.1, 0.5, 2.0] {
            assert_relative_eq!(f.f(s), 2.0 * s, max_relative = 1e-12);
        }
    }

    #[test]
    fn continuation_is_c1() {
        let f = mild();
        let end = 6.0;
        assert_relative_eq!(f.f(end + 1e-9), f.f(end), max_relative = 1e-9);
        assert_relative_eq!(f.f_prime(end + 1e-9), f.f_prime(end), max_relative = 1e-7);
    }

    #[test]
    fn scaled_view_is_a_constant_multiple() {
        let f = mild();
        let sc = f.scaled();
        let unit = f.ln_unit.exp();
        for s in [0.01, 1.0, 7.0] {
            assert_relative_eq!(sc.value(s) * unit, f.f(s), max_relative = 1e-12);
            assert_relative_eq!(sc.d1(s) * unit, f.f_prime(s), max_relative = 1e-12);
        }
        let hat = f.hat_unscaled();
        assert_eq!(hat.value(10.0), f.f(3.0));
        assert_eq!(hat.d1(3.0), 0.0);
    }

    #[test]
    fn non_integrable_sigma() {
        let sigma = PowerSigma { ln_scale: 0.0, theta0: 0.0 };
        assert!(matches!(build_f(sigma, 1.0, 1.0, 2.0, 1.0, 1.0), Err(Error::SigmaNotIntegrable(_))));
    }

    #[test]
    fn steep_constants_stay_finite_in_scaled_units() {
        let sigma = build_sigma(0.5, 0.4, 1.0, 0.25, 1e5);
        let f = build_f(sigma, 1e5, 8.5, 1e4, 1.5e5, 1e5).unwrap();
        assert!(f.c1() == 0.0 && f.ln_c1.is_finite());
        let sc = f.scaled();
        let far = sc.value(1.0);
        assert!(far.is_finite() && far > 0.0);
        assert_relative_eq!(far, gamma(1.0 + 1.0 / 0.4), max_relative = 1e-10);
    }
}
