//! Potential certificates `(lambda_1..lambda_5)` and the drift parameters
//! `(r0, r, c, C)` they induce.

use serde::{Deserialize, Serialize};

use super::grid::GridSpec;
use super::potential::{KineticLangevinSpec, Potential};
use crate::error::{Error, Result};
use crate::vector::dot;

/// `<x, grad U0> >= l1 |x|^2 + l2 U0 - l3` and `U0 >= -l4 |x|^2 - l5`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialCertificate {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    pub lambda5: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalitySlack {
    /// Minimum over the grid of `LHS - RHS`.
    pub worst_slack: f64,
    pub worst_point: Vec<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct B1Report {
    pub radial_inequality: InequalitySlack,
    pub lower_bound: InequalitySlack,
    /// `min(l1 - l2 l4, alpha^2/4 + alpha sqrt(beta (l1 - l2 l4)) - 2 beta l4)`
    pub w3_margin: f64,
    pub w3_pass: bool,
    pub pass: bool,
}

impl PotentialCertificate {
    pub fn w3_margin(&self, alpha: f64, beta: f64) -> f64 {
        let gap = self.lambda1 - self.lambda2 * self.lambda4;
        if gap <= 0.0 {
            return gap;
        }
        let window = alpha * alpha / 4.0 + (beta * gap).sqrt() * alpha - 2.0 * beta * self.lambda4;
        gap.min(window)
    }
}

/// Grid check of the three certificate inequalities.
pub fn verify_b1(spec: &KineticLangevinSpec, cert: &PotentialCertificate, grid: &GridSpec) -> B1Report {
    let p = &spec.potential;
    let mut radial = InequalitySlack { worst_slack: f64::INFINITY, worst_point: vec![], pass: true };
    let mut lower = radial.clone();
    for x in grid.positions(spec.dim, p.safe_radius()) {
        let s = dot(&x, &x);
        let u0 = p.value(&x);
        let lhs = p.radial_derivative(&x);
        let slack1 = lhs - (cert.lambda1 * s + cert.lambda2 * u0 - cert.lambda3);
        let slack2 = u0 + cert.lambda4 * s + cert.lambda5;
        if slack1 < radial.worst_slack {
            radial.worst_slack = slack1;
            radial.worst_point = x.clone();
        }
        if slack2 < lower.worst_slack {
            lower.worst_slack = slack2;
            lower.worst_point = x;
        }
    }
    // relative floating tolerance for exact identities such as <x, x> = |x|^2
    radial.pass = radial.worst_slack >= -1e-12 * (1.0 + cert.lambda3);
    lower.pass = lower.worst_slack >= -1e-12 * (1.0 + cert.lambda5);
    let w3_margin = cert.w3_margin(spec.alpha_damp, spec.beta);
    let w3_pass = w3_margin > 0.0;
    let pass = radial.pass && lower.pass && w3_pass;
    B1Report { radial_inequality: radial, lower_bound: lower, w3_margin, w3_pass, pass }
}

/// Superquadratic growth proxy: `U0/|x|^2` increases along the outer shells
/// and ends at least ten times its value at a quarter of the radius.
fn growth_test(p: &Potential, dim: usize, radius: f64) -> Result<()> {
    let ratio = |t: f64| {
        let mut x = vec![0.0; dim];
        x[0] = t;
        p.value(&x) / (t * t)
    };
    let n = 32;
    let mut prev = ratio(radius / 4.0);
    let first = prev;
    for k in 1..=n {
        let t = radius / 4.0 + 0.75 * radius * k as f64 / n as f64;
        let cur = ratio(t);
        if !(cur >= prev) {
            return Err(Error::GrowthTestFailed(format!("U0/|x|^2 is not increasing near |x| = {t:.3}")));
        }
        prev = cur;
    }
    if !(prev >= 10.0 * first.max(f64::MIN_POSITIVE)) {
        return Err(Error::GrowthTestFailed(format!(
            "U0/|x|^2 grows from {first:.4} to {prev:.4} only between |x| = {:.2} and {radius:.2}",
            radius / 4.0
        )));
    }
    Ok(())
}

/// Certificate `l1 = l2 = c3/2, l4 = 0` for superquadratic potentials, with
/// `<x, grad U0> >= c3 U0 - c4` fitted on the grid.
pub fn auto_certificate(spec: &KineticLangevinSpec, grid: &GridSpec) -> Result<PotentialCertificate> {
    let p = &spec.potential;
    let radius = grid.radius.min(p.safe_radius());
    growth_test(p, spec.dim, radius)?;
    let points = grid.positions(spec.dim, p.safe_radius());
    let mut c3 = f64::INFINITY;
    for x in &points {
        let s = dot(x, x);
        let u0 = p.value(x);
        if s >= 1.0 && u0 > 0.0 {
            c3 = c3.min(p.radial_derivative(x) / u0);
        }
    }
    if !(c3.is_finite() && c3 > 0.0) {
        return Err(Error::GrowthTestFailed(format!("no positive c3 with <x, grad U0> >= c3 U0 - c4 (got {c3})")));
    }
    let c3 = 0.5 * c3;
    let (l1, l2) = (0.5 * c3, 0.5 * c3);
    let mut l3: f64 = 0.0;
    let mut l5: f64 = 0.0;
    for x in &points {
        let s = dot(x, x);
        let u0 = p.value(x);
        l3 = l3.max(l1 * s + l2 * u0 - p.radial_derivative(x));
        l5 = l5.max(-u0);
    }
    Ok(PotentialCertificate {
        lambda1: l1,
        lambda2: l2,
        lambda3: 1.1 * l3 + 1e-9,
        lambda4: 0.0,
        lambda5: 1.1 * l5 + 1e-9,
    })
}
