//! Shared quadrature nodes for jump integrals in polar coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy_measure::{LevyMeasureSpec, SliceMeasure};
use crate::quad::kronrod_panel;
use crate::vector::{dot, norm};

/// Radial/angular layout of the jump quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureScheme {
    /// Jumps with `|u| <= rho_in` enter through a second-order Taylor term.
    pub rho_in: f64,
    /// Outer truncation radius; `None` picks the radius whose tail mass is
    /// below `tail_mass`.
    pub rho_out: Option<f64>,
    /// Gauss-Kronrod panels per decade of radius.
    pub nodes_radial: usize,
    /// Directions on the circle (`d = 2`) or azimuths on the sphere (`d = 3`).
    pub nodes_angular: usize,
    pub tail_mass: f64,
}

impl Default for QuadratureScheme {
    fn default() -> Self {
        Self { rho_in: 1e-3, rho_out: None, nodes_radial: 8, nodes_angular: 64, tail_mass: 1e-8 }
    }
}

impl QuadratureScheme {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho_in > 0.0 && self.rho_in < 1.0 && self.nodes_radial >= 1 && self.nodes_angular >= 4) {
            return Err(Error::InvalidParameter(format!("invalid quadrature scheme {self:?}")));
        }
        if let Some(r) = self.rho_out {
            if !(r > self.rho_in) {
                return Err(Error::InvalidParameter(format!("rho_out {r} must exceed rho_in")));
            }
        }
        Ok(())
    }
}

/// A jump location with its Lebesgue weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub u: Vec<f64>,
    pub weight: f64,
    /// `|u| <= rho_in`.
    pub inner: bool,
}

/// Node table over the punctured ball of radius `rho_out`, with panel edges at every
/// radius where the integrands of a coupling step with shift `y` have kinks.
#[derive(Debug, Clone)]
pub struct JumpNodes {
    pub nodes: Vec<Node>,
    pub rho_in: f64,
    pub rho_out: f64,
    /// `nu({|u| > rho_out})`.
    pub tail_mass: f64,
}

fn directions(d: usize, n: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    use std::f64::consts::PI;
    match d {
        1 => Ok(vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)]),
        2 => Ok((0..n)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / n as f64;
                (vec![a.cos(), a.sin()], 2.0 * PI / n as f64)
            })
            .collect()),
        3 => {
            let nz = (n / 2).max(2);
            let mut out = Vec::with_capacity(nz * n);
            for i in 0..nz {
                let z = -1.0 + (2.0 * i as f64 + 1.0) / nz as f64;
                let s = (1.0 - z * z).sqrt();
                for k in 0..n {
                    let a = 2.0 * PI * (k as f64 + 0.5) / n as f64;
                    out.push((vec![z, s * a.cos(), s * a.sin()], 2.0 / nz as f64 * 2.0 * PI / n as f64));
                }
            }
            Ok(out)
        }
        _ => Err(Error::InvalidParameter(format!("jump quadrature supports d <= 3, got d = {d}"))),
    }
}

/// Radii along the unit direction `e` where some integrand changes form.
fn kinks(e: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = vec![1.0];
    let e1 = e[0];
    if e1 > 0.0 {
        out.push(1.0 / e1);
    }
    let yy = dot(y, y);
    if yy > 0.0 {
        for s in [1.0, -1.0] {
            let ey = s * dot(e, y);
            let y1 = s * y[0];
            if ey > 0.0 {
                out.push(ey);
                out.push(yy / (2.0 * ey));
            }
            if e1 != 0.0 {
                out.push(y1 / e1);
                out.push((1.0 + y1) / e1);
            }
            // |u - s y| = 1
            let disc = ey * ey - yy + 1.0;
            if disc >= 0.0 {
                out.push(ey + disc.sqrt());
                out.push(ey - disc.sqrt());
            }
        }
    }
    out.retain(|r| r.is_finite() && *r > 0.0);
    out
}

impl JumpNodes {
    pub fn build(spec: &LevyMeasureSpec, scheme: &QuadratureScheme, shift: Option<&[f64]>) -> Result<Self> {
        scheme.validate()?;
        let d = spec.dim();
        let zero = vec![0.0; d];
        let y = shift.unwrap_or(&zero);
        let rho_out = match scheme.rho_out {
            Some(r) => r,
            None => spec.radius_with_tail_mass(scheme.tail_mass)?.max(1.0),
        };
        let tail_mass = spec.mass_above(rho_out)?;
        let ratio = 10f64.powf(1.0 / scheme.nodes_radial as f64);
        let ny = norm(y);
        // Inner nodes only serve the overlap parts, whose density is bounded
        // below the scale of the shift.
        let floor = if ny > 0.0 { 1e-4 * scheme.rho_in.min(ny) } else { scheme.rho_in };

        let mut nodes = Vec::new();
        for (e, ang_w) in directions(d, scheme.nodes_angular)? {
            let mut edges = vec![floor, scheme.rho_in, rho_out];
            let mut t = scheme.rho_in;
            while t > floor {
                edges.push(t);
                t /= 2.0;
            }
            let mut t = scheme.rho_in;
            while t < rho_out {
                edges.push(t);
                t *= ratio;
            }
            for k in kinks(&e, y) {
                if k > floor && k < rho_out {
                    edges.push(k);
                }
            }
            if ny > 0.0 {
                edges.push(0.0);
            }
            edges.retain(|r| *r >= 0.0 && *r <= rho_out && (*r >= floor || ny > 0.0));
            edges.sort_by(f64::total_cmp);
            edges.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs().max(1e-300));
            for pair in edges.windows(2) {
                let (a, b) = (pair[0], pair[1]);
                if b <= a {
                    continue;
                }
                for (rho, wr) in kronrod_panel(a, b) {
                    let u: Vec<f64> = e.iter().map(|c| c * rho).collect();
                    nodes.push(Node { u, weight: wr * ang_w * rho.powi(d as i32 - 1), inner: rho <= scheme.rho_in });
                }
            }
        }
        Ok(Self { nodes, rho_in: scheme.rho_in, rho_out, tail_mass })
    }
}

/// Density of `nu*_y`, equal to `nu*` itself when `y = 0`.
pub fn overlap_density(slice: &SliceMeasure, y: &[f64], u: &[f64]) -> f64 {
    let a = slice.density(u);
    if a == 0.0 || y.iter().all(|c| *c == 0.0) {
        return a;
    }
    let shifted: Vec<f64> = u.iter().zip(y).map(|(ui, yi)| ui - yi).collect();
    a.min(slice.density(&shifted))
}
