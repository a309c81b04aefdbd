//! The constant chain `R0 -> lambda*(R0) -> (alpha, alpha0) -> kappa ->
//! sigma -> (k0, Lambda0, C*) -> (c1, c2, f) -> eps -> lambda_*`, the cost
//! functions built from it, and checks of the properties `f` must have.

mod chain;
mod profile;

pub use chain::{
    compute_alpha_alpha0, compute_c2, compute_eps, compute_k0_lambda0_cstar, compute_lipschitz, compute_ln_eps,
    compute_r0, compute_s_star, ln_rate_lambda_star, rate_lambda_star, sublevel_bounds, LipschitzDomain, R0Report,
};
pub use profile::{build_f, build_sigma, DistanceProfile, HatProfile, PowerSigma, ScaledProfile};

use serde::Serialize;

use crate::coupling_sim::{CouplingParams, PairState};
use crate::error::{Error, Result};
use crate::generator::{fit_lyapunov_drift, DriftFit, Generator, Profile, QuadratureScheme};
use crate::levy_measure::LevyMeasureSpec;
use crate::model::{
    auto_certificate, choose_r_eps, verify_a2ii, A2Report, F1Choice, GridSpec, HamiltonianSystemSpec,
    KineticLangevinSpec, LyapunovSpec, PotentialCertificate, V0Spec,
};
use crate::vector::norm;

/// Everything the chain consumes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantsInput {
    pub sys: HamiltonianSystemSpec,
    /// Lyapunov function with `eta` and `c_star` filled in.
    pub lyap: LyapunovSpec,
    pub c0_lyap: f64,
    pub big_c0_lyap: f64,
    /// Scale `r0` of the overlap bound `J(s) >= c_j s^{-theta0}` on `(0, r0]`.
    pub r0_jump: f64,
    pub j_c0: f64,
    pub theta0: f64,
    /// Ball for the Lipschitz supremum; defaults to the position bound of the
    /// sublevel set `{W + W' <= S*}`.
    pub position_radius: Option<f64>,
    pub lipschitz_samples: usize,
    /// Replaces the sampled Lipschitz constant (no inflation applied).
    pub lambda_star_r0: Option<f64>,
}

/// One sweep of `lambda*(R0) -> alpha0 -> R0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainPass {
    pub lambda_star_r0_sampled: f64,
    /// Sampled value inflated by 5%.
    pub lambda_star_r0: f64,
    pub alpha0: f64,
    pub r0: R0Report,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantsReport {
    pub alpha: f64,
    pub alpha0: f64,
    pub kappa: f64,
    pub r0_jump: f64,
    pub sigma_c0: f64,
    pub theta0: f64,
    pub k0: f64,
    pub lambda0: f64,
    pub c_star_big: f64,
    pub c1: f64,
    pub ln_c1: f64,
    pub c2: f64,
    pub r0_big: f64,
    pub lambda_star_r0: f64,
    pub eps: f64,
    pub ln_eps: f64,
    pub eta: f64,
    pub c_star_a2: f64,
    pub c0_lyap: f64,
    pub big_c0_lyap: f64,
    pub rate: f64,
    pub ln_rate: f64,
    /// `ln L`, the length over which `f` rises.
    pub ln_unit: f64,
    pub s_star: f64,
    pub position_radius: f64,
    pub velocity_radius: f64,
    pub passes: Vec<ChainPass>,
    /// `c1`, `eps`, or `lambda_*` fall below the smallest positive double;
    /// their logarithms remain exact.
    pub underflow: bool,
}

impl ConstantsReport {
    pub fn params(&self) -> CouplingParams {
        CouplingParams { alpha: self.alpha, alpha0: self.alpha0, kappa: self.kappa }
    }

    /// Named positivity invariants; `c1`, `eps`, `lambda_*` are judged by
    /// their logarithms.
    pub fn invariants(&self) -> Vec<(&'static str, bool)> {
        vec![
            ("alpha > 0", self.alpha > 0.0),
            ("alpha0 > 1", self.alpha0 > 1.0),
            ("kappa > 0", self.kappa > 0.0),
            ("kappa = r0/(2 alpha)", (self.kappa - self.r0_jump / (2.0 * self.alpha)).abs() <= 1e-15 * self.kappa),
            ("k0 > 0", self.k0 > 0.0),
            ("C* > 1", self.c_star_big > 1.0),
            ("c1 in (0,1]", self.ln_c1.is_finite() && self.ln_c1 <= 0.0),
            ("c2 > 0", self.c2 > 0.0),
            ("eps > 0", self.ln_eps.is_finite()),
            ("lambda_* > 0", self.ln_rate.is_finite()),
            ("kappa < R0", self.kappa < self.r0_big),
        ]
    }
}

/// Runs the chain. The result's profile is `f`; `Ĥ = f(r ∧ R0)` is
/// `profile.hat()`.
pub fn build_constants(input: &ConstantsInput) -> Result<(ConstantsReport, DistanceProfile)> {
    let sys = &input.sys;
    let lyap = &input.lyap;
    let (a, b) = (sys.a, sys.b);
    let (alpha, _, _) = compute_alpha_alpha0(a, b, 0.0);
    let kappa = input.r0_jump / (2.0 * alpha);
    let s_star = compute_s_star(input.c0_lyap, input.big_c0_lyap, lyap.c_star, lyap.eta)?;
    let v_bar = (s_star - 2.0).max(0.0).powf(2.0 / lyap.theta);
    let (p_bound, v_bound) = sublevel_bounds(lyap, sys.dim, v_bar);
    let position_radius = input.position_radius.unwrap_or(p_bound);
    if !(position_radius > 0.0) {
        return Err(Error::InvalidParameter(format!("position radius must be positive, got {position_radius}")));
    }
    let velocity_radius = v_bound.max(1.0);

    let mut passes = Vec::with_capacity(2);
    let mut r0_big = f64::INFINITY;
    let mut alpha0_prev = 1.0;
    for _ in 0..2 {
        let dom = LipschitzDomain { position_radius, velocity_radius, r0_big, alpha, alpha0: alpha0_prev };
        let (sampled, lam) = match input.lambda_star_r0 {
            Some(l) => (l, l),
            None => {
                let sampled = compute_lipschitz(sys, &dom, input.lipschitz_samples)?;
                (sampled, 1.05 * sampled)
            }
        };
        let (_, alpha0, _) = compute_alpha_alpha0(a, b, lam);
        let r0 = compute_r0(lyap, sys.dim, s_star, alpha, alpha0, kappa);
        r0_big = r0.r0_big;
        alpha0_prev = alpha0;
        passes.push(ChainPass { lambda_star_r0_sampled: sampled, lambda_star_r0: lam, alpha0, r0 });
    }
    let last = passes.last().unwrap();
    let (lambda_star_r0, alpha0) = (last.lambda_star_r0, last.alpha0);
    if alpha0 <= 1.0 {
        return Err(Error::DegenerateState("alpha0 <= 1: lambda*(R0) = 0 leaves no contraction"));
    }
    let (k0, lambda0, c_star_big) = compute_k0_lambda0_cstar(lambda_star_r0, a, b, alpha, alpha0);
    let c2 = compute_c2(alpha0, b, alpha, k0);
    let sigma = build_sigma(input.j_c0, input.theta0, alpha, kappa, r0_big);
    let profile = build_f(sigma, c_star_big, k0, alpha0, c2, r0_big)?;
    let ln_c1 = profile.ln_c1;
    let ln_eps = compute_ln_eps(ln_c1, alpha0, b, alpha, input.big_c0_lyap, lyap.c_star, lyap.eta, input.c0_lyap);
    let ln_rate = ln_rate_lambda_star(input.c0_lyap, ln_eps, ln_c1, alpha0, b, alpha);
    let (c1, eps, rate) = (ln_c1.exp(), ln_eps.exp(), ln_rate.exp());
    let underflow = [c1, eps, rate].iter().any(|v| *v < f64::MIN_POSITIVE);
    let report = ConstantsReport {
        alpha,
        alpha0,
        kappa,
        r0_jump: input.r0_jump,
        sigma_c0: input.j_c0,
        theta0: input.theta0,
        k0,
        lambda0,
        c_star_big,
        c1,
        ln_c1,
        c2,
        r0_big,
        lambda_star_r0,
        eps,
        ln_eps,
        eta: lyap.eta,
        c_star_a2: lyap.c_star,
        c0_lyap: input.c0_lyap,
        big_c0_lyap: input.big_c0_lyap,
        rate,
        ln_rate,
        ln_unit: profile.ln_unit,
        s_star,
        position_radius,
        velocity_radius,
        passes,
        underflow,
    };
    Ok((report, profile))
}

/// `Psi = ((|x - x'| + |v - v'|) ∧ 1)(W + W')`.
pub fn psi(state: &PairState, lyap: &LyapunovSpec) -> f64 {
    if state.is_diagonal() {
        return 0.0;
    }
    let dist = norm(&state.z()) + norm(&state.w());
    dist.min(1.0) * (lyap.w(&state.x, &state.v) + lyap.w(&state.xp, &state.vp))
}

/// `Psi~ = Ĥ (1 + eps (W + W'))` for a given `Ĥ` profile.
pub fn psi_tilde<P: Profile + ?Sized>(
    state: &PairState,
    hat: &P,
    params: &CouplingParams,
    lyap: &LyapunovSpec,
    eps: f64,
) -> f64 {
    if state.is_diagonal() {
        return 0.0;
    }
    hat.value(state.r(params)) * (1.0 + eps * (lyap.w(&state.x, &state.v) + lyap.w(&state.xp, &state.vp)))
}

/// One property of `f` checked on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyCheck {
    pub name: String,
    /// Largest violation (positive means the property fails by that much).
    pub worst_violation: f64,
    pub points: usize,
    pub pass: bool,
}

/// Checks of `f` in the rescaled variable `t = s / L`, where
/// `phi(t) = f(L t) / L = c1 t + int_0^t exp(-tau^theta0) dtau`. The
/// properties are invariant under this rescaling and `phi` is of order one.
pub fn f_property_suite(profile: &DistanceProfile, n_s: usize, n_delta: usize, tol: f64) -> Vec<PropertyCheck> {
    let phi = |t: f64| profile.phi(t);
    let phi1 = |t: f64| profile.phi_d1(t);
    let phi2 = |t: f64| profile.phi_d2(t);
    let t_hi = ((2.0 * profile.r0_big).ln() - profile.ln_unit).exp().min(1e300);
    let t_lo = (t_hi * 1e-12).max(1e-3).min(t_hi * 1e-3);
    let ts: Vec<f64> = (0..n_s)
        .map(|i| (t_lo.ln() + (t_hi.ln() - t_lo.ln()) * i as f64 / (n_s - 1).max(1) as f64).exp())
        .collect();
    let c1 = profile.ln_c1.exp();
    let ln_c1 = profile.ln_c1;
    let mut out = Vec::new();
    let mut push = |name: &str, viol: f64, pts: usize| {
        out.push(PropertyCheck { name: name.into(), worst_violation: viol, points: pts, pass: viol <= tol })
    };

    // (i) c1 t <= phi(t) <= (1 + c1) t, relative to the scale of phi
    let mut v = f64::NEG_INFINITY;
    for &t in &ts {
        let f = phi(t);
        let lo = (ln_c1 + t.ln()).exp();
        let scale = 1.0 + f.abs();
        v = v.max((lo - f) / scale).max((f - t - lo) / scale);
    }
    push("(i) c1 s <= f(s) <= (1 + c1) s", v, ts.len());

    let mut v = f64::NEG_INFINITY;
    for &t in &ts {
        let d = phi1(t);
        v = v.max(c1 - d).max(d - 1.0 - c1);
    }
    push("f' in [c1, 1 + c1]", v, ts.len());

    // (ii) sign pattern, each derivative differenced from the one below
    let (mut v1, mut v2, mut v3) = (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    // central differences stay inside (0, 2 R0]; the continuation is only C^1
    for &t in &ts {
        let h = 1e-4 * t;
        if t + h > t_hi {
            continue;
        }
        v1 = v1.max(-(phi(t + h) - phi(t - h)) / (2.0 * h));
        v2 = v2.max((phi1(t + h) - phi1(t - h)) / (2.0 * h));
        v3 = v3.max(-(phi2(t + h) - phi2(t - h)) / (2.0 * h));
    }
    push("(ii) f' >= 0", v1, ts.len());
    push("(ii) f'' <= 0", v2, ts.len());
    push("(ii) f''' >= 0", v3, ts.len());

    // (iii) and (iv) with -2 f(s) in the midpoint difference
    let (mut v3, mut v4, mut n3, mut n4) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0, 0);
    for &t in &ts {
        let mid = 2.0 * phi(t);
        let f2 = phi2(t);
        for j in 0..n_delta {
            let d = t * j as f64 / (n_delta - 1).max(1) as f64;
            let diff = phi(t + d) + phi(t - d) - mid;
            v3 = v3.max(diff);
            n3 += 1;
            if t <= 0.5 * t_hi {
                v4 = v4.max(diff - f2 * d * d);
                n4 += 1;
            }
        }
    }
    push("(iii) f(s+d) + f(s-d) - 2 f(s) <= 0", v3, n3);
    push("(iv) f(s+d) + f(s-d) - 2 f(s) <= f''(s) d^2", v4, n4);

    let mut v = f64::NEG_INFINITY;
    for &t in ts.iter().filter(|t| **t <= 0.5 * t_hi) {
        v = v.max(phi(2.0 * t) - 2.0 * phi(t));
    }
    push("f(2s) <= 2 f(s)", v, ts.len());
    out
}

/// Model-side inputs derived for a kinetic Langevin system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivedInputs {
    pub certificate: PotentialCertificate,
    pub f1: F1Choice,
    pub a2: A2Report,
    pub drift: DriftFit,
    pub input: ConstantsInput,
}

/// Certificate, Lyapunov function, jump-regularity constant, drift fit,
/// and overlap power law, all from grids.
pub fn derive_inputs(
    spec: &KineticLangevinSpec,
    nu: &LevyMeasureSpec,
    grid: &GridSpec,
    scheme: &QuadratureScheme,
    r0_jump: f64,
    certificate: Option<PotentialCertificate>,
) -> Result<DerivedInputs> {
    let certificate = match certificate {
        Some(c) => c,
        None => auto_certificate(spec, grid)?,
    };
    let f1 = choose_r_eps(spec, &certificate, grid)?;
    let mut lyap = LyapunovSpec::new(f1.r, f1.r0_cross, nu.theta, V0Spec::from_certificate(spec, &certificate))?;
    let slice = nu.coupling_slice();
    let a2 = verify_a2ii(&lyap, &slice, grid)?;
    lyap.eta = a2.eta;
    lyap.c_star = a2.c_star;
    lyap.c = f1.c;
    lyap.big_c = f1.big_c;
    let sys = spec.hamiltonian();
    let gen = Generator::new(nu, *scheme)?;
    let drift = fit_lyapunov_drift(&gen, &sys, &lyap, grid)?;
    let j_c0 = nu.fit_j_power_law(r0_jump)?;
    let input = ConstantsInput {
        sys,
        lyap,
        c0_lyap: drift.c0,
        big_c0_lyap: drift.big_c0,
        r0_jump,
        j_c0,
        theta0: slice.theta0,
        position_radius: None,
        lipschitz_samples: 100_000,
        lambda_star_r0: None,
    };
    Ok(DerivedInputs { certificate, f1, a2, drift, input })
}
