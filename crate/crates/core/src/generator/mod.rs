//! Numerical application of the single-process generator and the refined
//! basic coupling operator, plus the operator identities they satisfy.
//!
//! Jump integrals run on polar node tables ([`JumpNodes`]). Jumps with
//! `|u| <= rho_in` in the synchronous channel enter through the
//! second-order Taylor term `tr(Hess * M2) / 2`; everything else is summed
//! node by node. Every value comes with an error estimate made of the Taylor
//! remainder and the truncated tail.

mod drift_fit;
mod functions;
mod nodes;

pub use drift_fit::{fit_lyapunov_drift, DriftFit};
pub use functions::{
    GFn, GaussianBump, HFn, PairFunction, PairGradient, Profile, ProductFn, QuadraticInV, SeparableFn, TestFunction,
};
pub use nodes::{overlap_density, JumpNodes, Node, QuadratureScheme};

use serde::Serialize;

use crate::coupling_sim::{CouplingParams, PairState};
use crate::error::{Error, Result};
use crate::levy_measure::{LevyMeasureSpec, SliceMeasure};
use crate::model::{HamiltonianSystemSpec, LyapunovSpec};
use crate::vector::{dot, norm, unit_or_zero};

/// An operator value with its estimated quadrature error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatorValue {
    pub value: f64,
    pub error: f64,
}

/// Generator of the single process and of the coupled pair for one Lévy
/// measure and one quadrature layout.
#[derive(Debug, Clone)]
pub struct Generator {
    spec: LevyMeasureSpec,
    slice: SliceMeasure,
    scheme: QuadratureScheme,
    base: JumpNodes,
    m2: Vec<f64>,
    m3: f64,
}

fn third_derivative_bound(hess: impl Fn(&[f64]) -> Vec<f64>, v: &[f64], h: f64) -> f64 {
    let d = v.len();
    let mut l3 = 0.0f64;
    for j in 0..d {
        let mut a = v.to_vec();
        let mut b = v.to_vec();
        a[j] += h;
        b[j] -= h;
        let (ha, hb) = (hess(&a), hess(&b));
        let frob = ha.iter().zip(&hb).map(|(s, t)| ((s - t) / (2.0 * h)).powi(2)).sum::<f64>().sqrt();
        l3 = l3.max(frob);
    }
    l3 * (d as f64).sqrt()
}

impl Generator {
    pub fn new(spec: &LevyMeasureSpec, scheme: QuadratureScheme) -> Result<Self> {
        let base = JumpNodes::build(spec, &scheme, None)?;
        Ok(Self {
            spec: spec.clone(),
            slice: spec.coupling_slice(),
            m2: spec.second_moment_in_ball(scheme.rho_in),
            m3: spec.third_absolute_moment_in_ball(scheme.rho_in)?,
            scheme,
            base,
        })
    }

    pub fn spec(&self) -> &LevyMeasureSpec {
        &self.spec
    }

    pub fn scheme(&self) -> &QuadratureScheme {
        &self.scheme
    }

    fn taylor(&self, hess: &[f64]) -> f64 {
        0.5 * hess.iter().zip(&self.m2).map(|(h, m)| h * m).sum::<f64>()
    }

    /// Jump part of the single-process generator on a given node table.
    fn jump_part<F: TestFunction + ?Sized>(&self, nodes: &JumpNodes, f: &F, x: &[f64], v: &[f64]) -> OperatorValue {
        let f0 = f.value(x, v);
        let g = f.grad_v(x, v);
        let mut sum = self.taylor(&f.hess_v(x, v));
        let mut fmax = f0.abs();
        let mut vu = v.to_vec();
        for n in nodes.nodes.iter().filter(|n| !n.inner) {
            let dens = self.spec.density(&n.u);
            if dens == 0.0 {
                continue;
            }
            for (k, c) in vu.iter_mut().enumerate() {
                *c = v[k] + n.u[k];
            }
            let fu = f.value(x, &vu);
            fmax = fmax.max(fu.abs());
            let comp = if dot(&n.u, &n.u) <= 1.0 { dot(&g, &n.u) } else { 0.0 };
            sum += n.weight * dens * (fu - f0 - comp);
        }
        let l3 = third_derivative_bound(|w| f.hess_v(x, w), v, self.scheme.rho_in);
        OperatorValue { value: sum, error: l3 * self.m3 / 6.0 + 2.0 * fmax * nodes.tail_mass }
    }

    /// `(L f)(x, v)`: drift terms from the supplied gradients plus the
    /// compensated jump integral.
    pub fn apply_generator<F: TestFunction + ?Sized>(
        &self,
        sys: &HamiltonianSystemSpec,
        f: &F,
        x: &[f64],
        v: &[f64],
    ) -> Result<OperatorValue> {
        let (dx, dv) = sys.drift(x, v)?;
        let drift = dot(&dx, &f.grad_x(x, v)) + dot(&dv, &f.grad_v(x, v));
        let j = self.jump_part(&self.base, f, x, v);
        Ok(OperatorValue { value: drift + j.value, error: j.error })
    }

    /// Node table for a pair state; shared by every function evaluated at it.
    pub fn pair_nodes(&self, state: &PairState, params: &CouplingParams) -> Result<PairNodes<'_>> {
        check_dim(self.spec.dim(), state)?;
        let y = state.shift(params);
        let nodes = if y.iter().all(|c| *c == 0.0) { None } else { Some(JumpNodes::build(&self.spec, &self.scheme, Some(&y))?) };
        Ok(PairNodes { gen: self, state: state.clone(), y, nodes })
    }

    /// `(L~ F)` at a pair state.
    pub fn apply_coupling<F: PairFunction + ?Sized>(
        &self,
        sys: &HamiltonianSystemSpec,
        params: &CouplingParams,
        f: &F,
        state: &PairState,
    ) -> Result<OperatorValue> {
        self.pair_nodes(state, params)?.apply(sys, f)
    }

    /// Closed form of `L~ H` for `H = f(alpha0 |z| + |q|)`, with the
    /// derivative read as `f'_-`. Unit vectors of `z` or `q` below `1e-12`
    /// in norm are taken as zero.
    pub fn apply_coupling_drift<P: Profile + ?Sized>(
        &self,
        sys: &HamiltonianSystemSpec,
        params: &CouplingParams,
        profile: &P,
        state: &PairState,
    ) -> Result<f64> {
        check_dim(self.spec.dim(), state)?;
        if state.is_diagonal() {
            return Ok(0.0);
        }
        let (alpha, alpha0) = (params.alpha, params.alpha0);
        let (z, w, q) = (state.z(), state.w(), state.q(alpha));
        let r = state.r(params);
        let zh = unit_or_zero(&z, 1e-12);
        let qh = unit_or_zero(&q, 1e-12);
        let ux = sys.force(&state.x, &state.v)?;
        let uxp = sys.force(&state.xp, &state.vp)?;
        let inner: Vec<f64> =
            (0..z.len()).map(|i| sys.a * z[i] + sys.b * w[i] + (ux[i] - uxp[i]) / alpha).collect();
        let drift = profile.d1(r)
            * (alpha0 * (sys.a - sys.b * alpha) * norm(&z) + sys.b * alpha * alpha0 * dot(&zh, &q) + dot(&qh, &inner));
        let qn = norm(&q);
        if qn < 1e-12 {
            return Ok(drift);
        }
        let k = params.kappa.min(qn);
        let mass = self.spec.overlap_mass(&state.shift(params))?;
        Ok(drift + 0.5 * (profile.value(r + k) + profile.value(r - k) - 2.0 * profile.value(r)) * mass)
    }

    /// `|(L~ (g + h))(v, v') - (L_0 g)(v) - (L_0 h)(v')|` for the jump parts,
    /// all on the node table of the pair state.
    pub fn marginal_identity_residual<G: TestFunction + ?Sized, H: TestFunction + ?Sized>(
        &self,
        params: &CouplingParams,
        state: &PairState,
        g: &G,
        h: &H,
    ) -> Result<f64> {
        let pn = self.pair_nodes(state, params)?;
        let lhs = pn.jump(&SeparableFn(g, h));
        let table = pn.nodes.as_ref().unwrap_or(&self.base);
        let rhs = self.jump_part(table, g, &state.x, &state.v).value + self.jump_part(table, h, &state.xp, &state.vp).value;
        Ok((lhs.value - rhs).abs())
    }

    /// Relative residual of `L~(HG) = H L~G + G L~H + Pi` on shared nodes.
    pub fn product_rule_residual<A: PairFunction + ?Sized, B: PairFunction + ?Sized>(
        &self,
        sys: &HamiltonianSystemSpec,
        params: &CouplingParams,
        state: &PairState,
        h: &A,
        g: &B,
    ) -> Result<f64> {
        let pn = self.pair_nodes(state, params)?;
        let s = &pn.state;
        let (hv, gv) = (h.value(&s.x, &s.v, &s.xp, &s.vp), g.value(&s.x, &s.v, &s.xp, &s.vp));
        let lhs = pn.apply(sys, &ProductFn(h, g))?.value;
        let (lh, lg) = (pn.apply(sys, h)?.value, pn.apply(sys, g)?.value);
        let pi = pn.pi(h, g);
        let rhs = hv * lg + gv * lh + pi;
        let scale = [lhs, hv * lg, gv * lh, pi].iter().fold(f64::MIN_POSITIVE, |m, t| m.max(t.abs()));
        Ok((lhs - rhs).abs() / scale)
    }

    /// `Pi` for `H` and `G = 1 + eps (W + W')` together with the bound
    /// `2 c* eps H (W^eta + W'^eta)`.
    pub fn pi_term<P: Profile + ?Sized>(
        &self,
        params: &CouplingParams,
        state: &PairState,
        profile: &P,
        lyap: &LyapunovSpec,
        eps: f64,
    ) -> Result<PiReport> {
        let pn = self.pair_nodes(state, params)?;
        let h = HFn { profile, alpha: params.alpha, alpha0: params.alpha0 };
        let g = GFn { lyap, eps };
        let value = pn.pi(&h, &g);
        let s = &pn.state;
        let hv = h.value(&s.x, &s.v, &s.xp, &s.vp);
        let bound = 2.0 * lyap.c_star * eps * hv * (lyap.w(&s.x, &s.v).powf(lyap.eta) + lyap.w(&s.xp, &s.vp).powf(lyap.eta));
        Ok(PiReport { value, bound, slack: bound - value.abs() })
    }

    /// Compares `L~(H G)` with `-lambda_* H G`; passes when
    /// `lhs <= rhs + error + 0.05 |rhs|`.
    #[allow(clippy::too_many_arguments)]
    pub fn contraction_inequality_check<P: Profile + ?Sized>(
        &self,
        sys: &HamiltonianSystemSpec,
        params: &CouplingParams,
        state: &PairState,
        profile: &P,
        lyap: &LyapunovSpec,
        eps: f64,
        lambda_star: f64,
    ) -> Result<ContractionCheck> {
        let h = HFn { profile, alpha: params.alpha, alpha0: params.alpha0 };
        let g = GFn { lyap, eps };
        let s = state;
        let psi = h.value(&s.x, &s.v, &s.xp, &s.vp) * g.value(&s.x, &s.v, &s.xp, &s.vp);
        let lhs = self.apply_coupling(sys, params, &ProductFn(&h, &g), state)?;
        let rhs = -lambda_star * psi;
        let slack = rhs + lhs.error + 0.05 * rhs.abs() - lhs.value;
        Ok(ContractionCheck { lhs: lhs.value, rhs, error: lhs.error, slack, pass: slack >= 0.0 })
    }
}

fn check_dim(d: usize, s: &PairState) -> Result<()> {
    for part in [&s.x, &s.v, &s.xp, &s.vp] {
        if part.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: part.len() });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PiReport {
    pub value: f64,
    pub bound: f64,
    /// `bound - |value|`.
    pub slack: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub error: f64,
    pub slack: f64,
    pub pass: bool,
}

/// Quadrature nodes bound to one pair state.
pub struct PairNodes<'a> {
    gen: &'a Generator,
    state: PairState,
    /// `alpha (q)_kappa`.
    y: Vec<f64>,
    nodes: Option<JumpNodes>,
}

impl PairNodes<'_> {
    pub fn shift(&self) -> &[f64] {
        &self.y
    }

    pub fn apply<F: PairFunction + ?Sized>(&self, sys: &HamiltonianSystemSpec, f: &F) -> Result<OperatorValue> {
        let s = &self.state;
        let (dx, dv) = sys.drift(&s.x, &s.v)?;
        let (dxp, dvp) = sys.drift(&s.xp, &s.vp)?;
        let g = f.gradient(&s.x, &s.v, &s.xp, &s.vp);
        let drift = dot(&dx, &g.x) + dot(&dv, &g.v) + dot(&dxp, &g.xp) + dot(&dvp, &g.vp);
        let j = self.jump(f);
        Ok(OperatorValue { value: drift + j.value, error: j.error })
    }

    /// Jump part of the coupling operator: synchronous channel under the full
    /// measure, corrected by the two shifted channels under the overlap
    /// measures.
    pub fn jump<F: PairFunction + ?Sized>(&self, f: &F) -> OperatorValue {
        let gen = self.gen;
        let s = &self.state;
        let d = s.dim();
        let f0 = f.value(&s.x, &s.v, &s.xp, &s.vp);
        let g = f.gradient(&s.x, &s.v, &s.xp, &s.vp);
        let gs = g.sync();
        let table = self.nodes.as_ref().unwrap_or(&gen.base);
        let shifted = self.nodes.is_some();
        let neg_y: Vec<f64> = self.y.iter().map(|c| -c).collect();

        let mut sum = gen.taylor(&f.sync_hessian(&s.x, &s.v, &s.xp, &s.vp));
        let mut fmax = f0.abs();
        let (mut a, mut b) = (vec![0.0; d], vec![0.0; d]);
        let mut eval = |u: &[f64], off: f64, y: &[f64]| {
            for k in 0..d {
                a[k] = s.v[k] + u[k];
                b[k] = s.vp[k] + u[k] + off * y[k];
            }
            f.value(&s.x, &a, &s.xp, &b)
        };
        for n in &table.nodes {
            let u = &n.u;
            let small = dot(u, u) <= 1.0;
            let sync_int = |fu: f64| fu - f0 - if small { dot(&gs, u) } else { 0.0 };
            let mut c_int = None;
            if !n.inner {
                let dens = gen.spec.density(u);
                if dens > 0.0 {
                    let fu = eval(u, 0.0, &self.y);
                    fmax = fmax.max(fu.abs());
                    c_int = Some(sync_int(fu));
                    sum += n.weight * dens * c_int.unwrap();
                }
            }
            if !shifted {
                continue;
            }
            let m_minus = overlap_density(&gen.slice, &neg_y, u);
            let m_plus = overlap_density(&gen.slice, &self.y, u);
            if m_minus == 0.0 && m_plus == 0.0 {
                continue;
            }
            let c = match c_int {
                Some(c) => c,
                None => sync_int(eval(u, 0.0, &self.y)),
            };
            let gv_u = if small { dot(&g.v, u) } else { 0.0 };
            for (sign, m) in [(1.0, m_minus), (-1.0, m_plus)] {
                if m == 0.0 {
                    continue;
                }
                let uy: Vec<f64> = u.iter().zip(&self.y).map(|(ui, yi)| ui + sign * yi).collect();
                let comp = gv_u + if dot(&uy, &uy) <= 1.0 { dot(&g.vp, &uy) } else { 0.0 };
                let val = eval(u, sign, &self.y) - f0 - comp;
                sum += n.weight * 0.5 * m * (val - c);
            }
        }
        let l3 = third_derivative_bound(
            |w| {
                let shift: Vec<f64> = w.iter().zip(&s.v).map(|(a, b)| a - b).collect();
                let vp: Vec<f64> = s.vp.iter().zip(&shift).map(|(a, b)| a + b).collect();
                f.sync_hessian(&s.x, w, &s.xp, &vp)
            },
            &s.v,
            gen.scheme.rho_in,
        );
        OperatorValue { value: sum, error: l3 * gen.m3 / 6.0 + 2.0 * fmax * table.tail_mass }
    }

    /// `Pi` of the product rule for `H` and `G`.
    pub fn pi<A: PairFunction + ?Sized, B: PairFunction + ?Sized>(&self, h: &A, g: &B) -> f64 {
        let Some(table) = &self.nodes else { return 0.0 };
        let s = &self.state;
        let d = s.dim();
        let (h0, g0) = (h.value(&s.x, &s.v, &s.xp, &s.vp), g.value(&s.x, &s.v, &s.xp, &s.vp));
        let neg_y: Vec<f64> = self.y.iter().map(|c| -c).collect();
        let mut sum = 0.0;
        let (mut a, mut b) = (vec![0.0; d], vec![0.0; d]);
        for n in &table.nodes {
            for (sign, shift) in [(1.0, &neg_y), (-1.0, &self.y)] {
                let m = overlap_density(&self.gen.slice, shift, &n.u);
                if m == 0.0 {
                    continue;
                }
                for k in 0..d {
                    a[k] = s.v[k] + n.u[k];
                    b[k] = s.vp[k] + n.u[k] + sign * self.y[k];
                }
                let dh = h.value(&s.x, &a, &s.xp, &b) - h0;
                let dg = g.value(&s.x, &a, &s.xp, &b) - g0;
                sum += 0.5 * n.weight * m * dh * dg;
            }
        }
        sum
    }
}

#[cfg(test)]
mod tests;
