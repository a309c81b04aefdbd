//! Grid fit of the Lyapunov drift constants `L W <= -c0 W + C0`.

use serde::Serialize;

use super::Generator;
use crate::error::Result;
use crate::model::{GridSpec, HamiltonianSystemSpec, LyapunovSpec, Potential, V0Spec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftFit {
    pub c0: f64,
    pub big_c0: f64,
    /// `max (L W + c0 W - C0)` over the grid, with quadrature errors added.
    pub worst_slack: f64,
    pub worst_point: (Vec<f64>, Vec<f64>),
    pub max_quadrature_error: f64,
    pub points: usize,
    pub pass: bool,
}

/// Fits `c0` as half the smallest decay ratio `-L W / W` over the outer
/// quarter of the grid (by `W`), then takes `C0` as 5% above the largest
/// `L W + c0 W`. Quadrature errors are added to `L W` throughout.
pub fn fit_lyapunov_drift(
    gen: &Generator,
    sys: &HamiltonianSystemSpec,
    lyap: &LyapunovSpec,
    grid: &GridSpec,
) -> Result<DriftFit> {
    let max_x = match &lyap.v0 {
        V0Spec::Potential { potential: p @ Potential::DoubleWellExp { .. }, .. } => p.safe_radius(),
        _ => f64::INFINITY,
    };
    let points = grid.phase_points(sys.dim, max_x);
    let mut rows = Vec::with_capacity(points.len());
    let mut max_err = 0.0f64;
    for (x, v) in &points {
        let lw = gen.apply_generator(sys, lyap, x, v)?;
        max_err = max_err.max(lw.error);
        rows.push((lw.value + lw.error, lyap.w(x, v)));
    }
    let mut ws: Vec<f64> = rows.iter().map(|r| r.1).collect();
    ws.sort_by(f64::total_cmp);
    let cut = ws[(3 * ws.len()) / 4];
    let min_ratio = rows.iter().filter(|r| r.1 >= cut).map(|r| -r.0 / r.1).fold(f64::INFINITY, f64::min);
    let c0 = if min_ratio.is_finite() && min_ratio > 0.0 { 0.5 * min_ratio } else { 0.0 };
    let top = rows.iter().map(|r| r.0 + c0 * r.1).fold(f64::NEG_INFINITY, f64::max);
    let big_c0 = 1.05 * top.max(0.0) + 1e-9;
    let (mut worst, mut at) = (f64::NEG_INFINITY, 0);
    for (i, r) in rows.iter().enumerate() {
        let s = r.0 + c0 * r.1 - big_c0;
        if s > worst {
            worst = s;
            at = i;
        }
    }
    Ok(DriftFit {
        c0,
        big_c0,
        worst_slack: worst,
        worst_point: points[at].clone(),
        max_quadrature_error: max_err,
        points: points.len(),
        pass: c0 > 0.0 && worst <= 0.0,
    })
}
