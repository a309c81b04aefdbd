//! Lyapunov function `W = 1 + V^{theta/2}` and the drift quantities built
//! on it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::certificate::PotentialCertificate;
use super::grid::GridSpec;
use super::potential::{HamiltonianSystemSpec, KineticLangevinSpec, Potential};
use crate::error::{Error, Result};
use crate::levy_measure::SliceMeasure;
use crate::vector::{dot, norm};


/// `V0(x) = beta (U0(x) + l4 |x|^2 + l5)`, or zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum V0Spec {
    Zero,
    Potential { beta: f64, potential: Potential, lambda4: f64, lambda5: f64 },
}

impl V0Spec {
    pub fn from_certificate(spec: &KineticLangevinSpec, cert: &PotentialCertificate) -> Self {
        V0Spec::Potential {
            beta: spec.beta,
            potential: spec.potential.clone(),
            lambda4: cert.lambda4,
            lambda5: cert.lambda5,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            V0Spec::Zero => 0.0,
            V0Spec::Potential { beta, potential, lambda4, lambda5 } => {
                beta * (potential.value(x) + lambda4 * dot(x, x) + lambda5)
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            V0Spec::Zero => vec![0.0; x.len()],
            V0Spec::Potential { beta, potential, lambda4, .. } => {
                potential.gradient(x).iter().zip(x).map(|(g, xi)| beta * (g + 2.0 * lambda4 * xi)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSpec {
    pub r: f64,
    pub r0_cross: f64,
    pub theta: f64,
    pub v0: V0Spec,
    /// Drift constants `c`, `C` of `Gamma <= -c (V0 + |x|^2 + |v|^2) + C`.
    pub c: f64,
    pub big_c: f64,
    /// Jump-regularity constants `eta`, `c_star`.
    pub eta: f64,
    pub c_star: f64,
}

impl LyapunovSpec {
    pub fn new(r: f64, r0_cross: f64, theta: f64, v0: V0Spec) -> Result<Self> {
        if !(r0_cross.abs() < r) {
            return Err(Error::InvalidCross { r0: r0_cross, r });
        }
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::InvalidParameter(format!("theta must lie in (0,1], got {theta}")));
        }
        Ok(Self { r, r0_cross, theta, v0, c: 0.0, big_c: 0.0, eta: 0.5, c_star: 0.0 })
    }

    /// `V = 1 + V0 + r^2|x|^2/2 + |v|^2/2 + r0 <x, v>`
    pub fn v_value(&self, x: &[f64], v: &[f64]) -> f64 {
        1.0 + self.v0.value(x) + 0.5 * self.r * self.r * dot(x, x) + 0.5 * dot(v, v) + self.r0_cross * dot(x, v)
    }

    pub fn grad_x_v(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let g0 = self.v0.gradient(x);
        (0..x.len()).map(|i| g0[i] + self.r * self.r * x[i] + self.r0_cross * v[i]).collect()
    }

    pub fn grad_v_v(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        (0..x.len()).map(|i| v[i] + self.r0_cross * x[i]).collect()
    }

    pub fn w(&self, x: &[f64], v: &[f64]) -> f64 {
        1.0 + self.v_value(x, v).powf(0.5 * self.theta)
    }

    fn outer_derivative(&self, vv: f64) -> f64 {
        let p = 0.5 * self.theta;
        p * vv.powf(p - 1.0)
    }

    pub fn grad_x_w(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let s = self.outer_derivative(self.v_value(x, v));
        self.grad_x_v(x, v).into_iter().map(|g| s * g).collect()
    }

    pub fn grad_v_w(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let s = self.outer_derivative(self.v_value(x, v));
        self.grad_v_v(x, v).into_iter().map(|g| s * g).collect()
    }

    /// Row-major Hessian of `W` in `v`.
    pub fn hess_v_w(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let d = x.len();
        let vv = self.v_value(x, v);
        let p = 0.5 * self.theta;
        let a = p * vv.powf(p - 1.0);
        let b = p * (p - 1.0) * vv.powf(p - 2.0);
        let g = self.grad_v_v(x, v);
        let mut h = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                h[i * d + j] = b * g[i] * g[j] + if i == j { a } else { 0.0 };
            }
        }
        h
    }

    /// Lower and upper bounds `1 + V0 + (r^2 - r0^2)/4 (|x|^2 + |v|^2/r^2)`
    /// and `1 + V0 + r^2|x|^2 + |v|^2`.
    pub fn sandwich(&self, x: &[f64], v: &[f64]) -> (f64, f64) {
        let v0 = self.v0.value(x);
        let (xx, vvn) = (dot(x, x), dot(v, v));
        let k = (self.r * self.r - self.r0_cross * self.r0_cross) / 4.0;
        (1.0 + v0 + k * (xx + vvn / (self.r * self.r)), 1.0 + v0 + self.r * self.r * xx + vvn)
    }

    /// `Gamma(x, v) = <r^2 x + r0 v + grad V0, a x + b v> + <v + r0 x, U(x, v)>`
    pub fn gamma_drift(&self, sys: &HamiltonianSystemSpec, x: &[f64], v: &[f64]) -> Result<f64> {
        let (dx, dv) = sys.drift(x, v)?;
        Ok(dot(&self.grad_x_v(x, v), &dx) + dot(&self.grad_v_v(x, v), &dv))
    }
}
/// Parameters making `Gamma <= -c (V0 + |x|^2 + |v|^2) + C` hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Choice {
    pub r0_cross: f64,
    pub r: f64,
    pub eps_young: f64,
    pub c: f64,
    pub big_c: f64,
    /// Open window for `r^2` from `(r^2 + 2 beta l4 - alpha r0)^2 < 4 beta (l1 - l2 l4)(alpha - r0) r0`.
    pub r2_window: (f64, f64),
    /// Upper end of the alternative closed-form window
    /// `(r0^2/2 + alpha sqrt(beta (l1 - l2 l4)) - 2 beta l4)^{1/2}`, kept for comparison.
    pub alternative_upper: f64,
    /// Coefficients of `|v|^2` and `|x|^2` in the Young-inequality bound.
    pub coeff_v: f64,
    pub coeff_x: f64,
}

/// Picks `r0 = alpha/2`, `r` at the midpoint of the admissible window, a
/// Young parameter between its two bounds, and fits `(c, C)`.
pub fn choose_r_eps(spec: &KineticLangevinSpec, cert: &PotentialCertificate, grid: &GridSpec) -> Result<F1Choice> {
    let (alpha, beta) = (spec.alpha_damp, spec.beta);
    let gap = cert.lambda1 - cert.lambda2 * cert.lambda4;
    if !(gap > 0.0) {
        return Err(Error::EmptyWindow { margin: gap });
    }
    let r0 = alpha / 2.0;
    let shift = 2.0 * beta * cert.lambda4 - alpha * r0;
    let half_width = alpha * (beta * gap).sqrt();
    let lo = (r0 * r0).max(-shift - half_width);
    let hi = half_width - shift;
    let margin = hi - lo;
    if !(margin > 1e-12 * (1.0 + hi.abs())) {
        return Err(Error::EmptyWindow { margin });
    }
    let r = 0.5 * (lo.sqrt() + hi.sqrt());
    let dd = r * r + shift;
    let eps_lo = 1.0 / (beta * r0 * gap);
    let eps = if dd == 0.0 {
        2.0 * eps_lo
    } else {
        let eps_hi = 4.0 * (alpha - r0) / (dd * dd);
        (eps_lo * eps_hi).sqrt()
    };
    let coeff_v = alpha - r0 - eps / 4.0 * dd * dd;
    let coeff_x = beta * r0 * gap - 1.0 / eps;
    let c_analytic = beta * r0 * (cert.lambda3 + cert.lambda2 * cert.lambda5);

    let v0 = V0Spec::from_certificate(spec, cert);
    let lyap = LyapunovSpec::new(r, r0, 1.0, v0.clone())?;
    let sys = spec.hamiltonian();
    let points = grid.phase_points(spec.dim, spec.potential.safe_radius());
    let c = if cert.lambda2 > 0.0 {
        coeff_v.min(coeff_x).min(r0 * cert.lambda2)
    } else {
        let mut m = f64::INFINITY;
        for (x, v) in &points {
            let size = v0.value(x) + dot(x, x) + dot(v, v);
            if size >= 1.0 {
                m = m.min((c_analytic - lyap.gamma_drift(&sys, x, v)?) / size);
            }
        }
        0.9 * m
    };
    if !(c > 0.0) {
        return Err(Error::EmptyWindow { margin: c });
    }
    let mut worst = f64::NEG_INFINITY;
    for (x, v) in &points {
        let g = lyap.gamma_drift(&sys, x, v)?;
        worst = worst.max(g + c * (v0.value(x) + dot(x, x) + dot(v, v)));
    }
    let big_c = c_analytic.max(1.1 * worst).max(0.0);
    let alternative_upper = (r0 * r0 / 2.0 + half_width - 2.0 * beta * cert.lambda4).max(0.0).sqrt();
    Ok(F1Choice {
        r0_cross: r0,
        r,
        eps_young: eps,
        c,
        big_c,
        r2_window: (lo, hi),
        alternative_upper,
        coeff_v,
        coeff_x,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A2Report {
    pub eta: f64,
    pub c_star: f64,
    /// Grid supremum of `int |W(x, v+u) - W(x, v)| nu*(du) / W(x, v)^{1/2}`.
    pub sup_ratio: f64,
    pub worst_point: (Vec<f64>, Vec<f64>),
    /// `int (|u|^{theta/2} + |u|^theta) nu*(du)`.
    pub moment: f64,
}

/// Grid estimate of the jump-regularity constant `c_star` with `eta = 1/2`.
pub fn verify_a2ii(lyap: &LyapunovSpec, slice: &SliceMeasure, grid: &GridSpec) -> Result<A2Report> {
    let theta = lyap.theta;
    if !(slice.theta0 < theta / 2.0) {
        return Err(Error::MomentFailure(format!(
            "int (|u|^(theta/2) + |u|^theta) nu*(du) needs theta0 < theta/2; got theta0 = {}, theta = {theta}",
            slice.theta0
        )));
    }
    let moment = slice.integrate(|u| norm(u).powf(theta / 2.0) + norm(u).powf(theta), 1e-12)?;
    let d = slice.dim;
    let max_x = match &lyap.v0 {
        V0Spec::Potential { potential, .. } => potential.safe_radius(),
        V0Spec::Zero => f64::INFINITY,
    };
    let points = grid.phase_points(d, max_x);
    let ratios: Vec<f64> = points
        .par_iter()
        .map(|(x, v)| {
            let w0 = lyap.w(x, v);
            let integral = slice.integrate(
                |u| {
                    let vu: Vec<f64> = v.iter().zip(u).map(|(a, b)| a + b).collect();
                    (lyap.w(x, &vu) - w0).abs()
                },
                1e-7,
            )?;
            Ok(integral / w0.sqrt())
        })
        .collect::<Result<_>>()?;
    // first maximiser in grid order, independent of the thread count
    let mut best = (f64::NEG_INFINITY, (vec![], vec![]));
    for (ratio, p) in ratios.into_iter().zip(points) {
        if ratio > best.0 {
            best = (ratio, p);
        }
    }
    Ok(A2Report { eta: 0.5, c_star: 1.1 * best.0, sup_ratio: best.0, worst_point: best.1, moment })
}
