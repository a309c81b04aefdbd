//! Pass/fail checks shared by the `verify` command and the acceptance suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::coupling_sim::{CouplingParams, PairState};
use crate::distance_constants::{
    build_f, build_sigma, compute_alpha_alpha0, ConstantsReport, DistanceProfile, PropertyCheck,
};
use crate::error::Result;
use crate::generator::{GFn, GaussianBump, Generator, HFn, Profile};
use crate::model::{B1Report, HamiltonianSystemSpec, LyapunovSpec};

/// Tolerances of the operator checks.
pub const MARGINAL_TOL: f64 = 1e-4;
pub const PRODUCT_RULE_TOL: f64 = 1e-6;
pub const CLOSED_FORM_TOL: f64 = 1e-5;
/// Absolute floor of the closed-form comparison, for values near zero.
pub const CLOSED_FORM_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    /// Smallest `tolerance - residual` (or `rhs - lhs`) seen; negative means failure.
    pub worst_slack: f64,
    pub points: usize,
    pub worst_state: Option<PairState>,
    /// States that failed, with their slack.
    pub failures: Vec<(PairState, f64)>,
}

impl CheckResult {
    fn from_slacks(name: &str, slacks: Vec<(PairState, f64)>) -> Self {
        let points = slacks.len();
        let worst = slacks.iter().min_by(|a, b| a.1.total_cmp(&b.1)).cloned();
        let failures: Vec<(PairState, f64)> = slacks.into_iter().filter(|s| !(s.1 >= 0.0)).collect();
        Self {
            name: name.into(),
            pass: failures.is_empty(),
            worst_slack: worst.as_ref().map_or(f64::INFINITY, |w| w.1),
            points,
            worst_state: worst.map(|w| w.0),
            failures,
        }
    }

    pub fn scalar(name: &str, pass: bool, worst_slack: f64) -> Self {
        Self { name: name.into(), pass, worst_slack, points: 1, worst_state: None, failures: vec![] }
    }
}

impl From<&PropertyCheck> for CheckResult {
    fn from(p: &PropertyCheck) -> Self {
        Self {
            name: format!("f: {}", p.name),
            pass: p.pass,
            worst_slack: -p.worst_violation,
            points: p.points,
            worst_state: None,
            failures: vec![],
        }
    }
}

pub fn b1_checks(report: &B1Report) -> Vec<CheckResult> {
    vec![
        CheckResult::scalar("B1 radial inequality", report.radial_inequality.pass, report.radial_inequality.worst_slack),
        CheckResult::scalar("B1 lower bound", report.lower_bound.pass, report.lower_bound.worst_slack),
        CheckResult::scalar("B1 window margin", report.w3_pass, report.w3_margin),
    ]
}

/// `n` states with coordinates uniform on `[-radius, radius]`; diagonal
/// states when `diagonal` is set.
pub fn random_states(dim: usize, n: usize, seed: u64, radius: f64, diagonal: bool) -> Vec<PairState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut draw = || (0..dim).map(|_| rng.random_range(-radius..radius)).collect::<Vec<f64>>();
            if diagonal {
                PairState::diagonal(draw(), draw())
            } else {
                PairState::new(draw(), draw(), draw(), draw())
            }
        })
        .collect()
}

/// Coupling parameters for the identity checks: the chain's `alpha` and
/// `kappa` with a moderate `alpha0`, since the identities hold for any
/// `alpha0 > 0` and the chain's own value makes every state far from the
/// diagonal.
pub fn reference_params(sys: &HamiltonianSystemSpec, r0_jump: f64) -> CouplingParams {
    let (alpha, _, _) = compute_alpha_alpha0(sys.a, sys.b, 0.0);
    CouplingParams { alpha, alpha0: 3.0, kappa: r0_jump / (2.0 * alpha) }
}

/// A profile from the same family as the chain's `f`, with `C*` picked so
/// that it bends over unit distances (`L = 1`).
pub fn reference_profile(params: &CouplingParams, j_c0: f64, theta0: f64) -> Result<DistanceProfile> {
    let r0_big = 3.0;
    let sigma = build_sigma(j_c0, theta0, params.alpha, params.kappa, r0_big);
    let probe = build_f(sigma, 1.0, 1.0, params.alpha0, 1.0, r0_big)?;
    build_f(sigma, (-probe.ln_b).exp(), 1.0, params.alpha0, 1.0, r0_big)
}

/// Marginal identity, product rule, closed form of the coupling drift, and
/// the bound on the cross term, at each state.
pub fn operator_identities<P: Profile + ?Sized>(
    gen: &Generator,
    sys: &HamiltonianSystemSpec,
    params: &CouplingParams,
    profile: &P,
    lyap: &LyapunovSpec,
    states: &[PairState],
) -> Result<Vec<CheckResult>> {
    let h = HFn { profile, alpha: params.alpha, alpha0: params.alpha0 };
    // the product rule holds for any eps; a visible one exercises it
    let g = GFn { lyap, eps: 0.1 };
    let bump = GaussianBump { center: vec![0.5; sys.dim], width: 1.0 };
    let (mut marginal, mut product, mut closed, mut pi) = (vec![], vec![], vec![], vec![]);
    for s in states {
        let m = gen.marginal_identity_residual(params, s, lyap, &bump)?;
        marginal.push((s.clone(), MARGINAL_TOL - m));
        let p = gen.product_rule_residual(sys, params, s, &h, &g)?;
        product.push((s.clone(), PRODUCT_RULE_TOL - p));
        let cf = gen.apply_coupling_drift(sys, params, profile, s)?;
        let q = gen.apply_coupling(sys, params, &h, s)?.value;
        let scale = cf.abs().max(q.abs());
        closed.push((s.clone(), CLOSED_FORM_TOL * scale + CLOSED_FORM_FLOOR - (cf - q).abs()));
        pi.push((s.clone(), gen.pi_term(params, s, profile, lyap, 0.1)?.slack));
    }
    Ok(vec![
        CheckResult::from_slacks("marginal identity", marginal),
        CheckResult::from_slacks("product rule", product),
        CheckResult::from_slacks("coupling drift closed form", closed),
        CheckResult::from_slacks("cross term bound", pi),
    ])
}

/// `L~(Ĥ G) <= -lambda_* Ĥ G + error + 5% |rhs|` at each state, with the
/// chain's constants. `hat` is `Ĥ` in any fixed unit.
pub fn contraction_spot_check<P: Profile + ?Sized>(
    gen: &Generator,
    sys: &HamiltonianSystemSpec,
    report: &ConstantsReport,
    hat: &P,
    lyap: &LyapunovSpec,
    states: &[PairState],
) -> Result<CheckResult> {
    let params = report.params();
    let mut slacks = Vec::with_capacity(states.len());
    for s in states {
        let c = gen.contraction_inequality_check(sys, &params, s, hat, lyap, report.eps, report.rate)?;
        slacks.push((s.clone(), c.slack));
    }
    Ok(CheckResult::from_slacks("contraction inequality", slacks))
}

/// Fraction of passing states.
pub fn pass_fraction(c: &CheckResult) -> f64 {
    if c.points == 0 {
        return 0.0;
    }
    1.0 - c.failures.len() as f64 / c.points as f64
}
