use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::model::{Force, KineticLangevinSpec, Potential, V0Spec};

struct Concave;
impl Profile for Concave {
    fn value(&self, s: f64) -> f64 {
        1.0 - (-s).exp()
    }
    fn d1(&self, s: f64) -> f64 {
        (-s).exp()
    }
}

struct Linear;
impl Profile for Linear {
    fn value(&self, s: f64) -> f64 {
        2.0 * s
    }
    fn d1(&self, _s: f64) -> f64 {
        2.0
    }
}

struct Constant;
impl TestFunction for Constant {
    fn value(&self, _x: &[f64], _v: &[f64]) -> f64 {
        3.0
    }
    fn grad_x(&self, x: &[f64], _v: &[f64]) -> Vec<f64> {
        vec![0.0; x.len()]
    }
    fn grad_v(&self, x: &[f64], _v: &[f64]) -> Vec<f64> {
        vec![0.0; x.len()]
    }
}

fn slice1() -> LevyMeasureSpec {
    LevyMeasureSpec::slice(1.0, 0.5, 1, 1.0).unwrap()
}

fn benchmark() -> (HamiltonianSystemSpec, LevyMeasureSpec, LyapunovSpec) {
    let spec = KineticLangevinSpec::new(1.0, 1.0, Potential::DoubleWellPoly { c1: 1.0, c2: 2.0, l: 2.0 }, 1).unwrap();
    let nu = LevyMeasureSpec::slice(1.0, 0.4, 1, 1.0).unwrap();
    let mut lyap = LyapunovSpec::new(1.0, 0.5, 1.0, V0Spec::Potential {
        beta: 1.0,
        potential: spec.potential.clone(),
        lambda4: 0.0,
        lambda5: 1.0,
    })
    .unwrap();
    lyap.c_star = 4.0;
    (spec.hamiltonian(), nu, lyap)
}

fn random_state<R: Rng>(rng: &mut R, d: usize, spread: f64) -> PairState {
    let mut v = || (0..d).map(|_| rng.random_range(-spread..spread)).collect::<Vec<f64>>();
    PairState::new(v(), v(), v(), v())
}

const PARAMS: CouplingParams = CouplingParams { alpha: 2.0, alpha0: 3.0, kappa: 0.4 };

#[test]
fn generator_kills_constants() {
    let gen = Generator::new(&slice1(), QuadratureScheme::default()).unwrap();
    let sys = HamiltonianSystemSpec::new(0.0, 1.0, Force::Linear { cx: -1.0, cv: -1.0 }, 1).unwrap();
    let out = gen.apply_generator(&sys, &Constant, &[0.3], &[-1.2]).unwrap();
    assert_eq!(out.value, 0.0);
}

#[test]
fn linear_function_in_symmetric_noise_sees_only_the_force() {
    let nu = LevyMeasureSpec::stable(1.5, 1.0, 2, 1.0).unwrap();
    let gen = Generator::new(&nu, QuadratureScheme::default()).unwrap();
    let sys = HamiltonianSystemSpec::new(0.0, 1.0, Force::Linear { cx: -1.0, cv: -0.5 }, 2).unwrap();
    let f = QuadraticInV { c: vec![0.7, -0.2], k: 0.0 };
    let (x, v) = ([0.4, 1.0], [-0.3, 0.8]);
    let force = sys.force(&x, &v).unwrap();
    let out = gen.apply_generator(&sys, &f, &x, &v).unwrap();
    assert_relative_eq!(out.value, dot(&f.c, &force), epsilon = 1e-12);
}

#[test]
fn squared_velocity_under_slice_noise() {
    let gen = Generator::new(&slice1(), QuadratureScheme::default()).unwrap();
    let sys = HamiltonianSystemSpec::new(0.0, 1.0, Force::Zero, 1).unwrap();
    let f = QuadraticInV { c: vec![0.0], k: 1.0 };
    let out = gen.apply_generator(&sys, &f, &[0.0], &[1.7]).unwrap();
    assert_relative_eq!(out.value, 2.0 / 3.0, max_relative = 1e-10);
    assert!(out.error < 1e-10);
}

#[test]
fn generator_is_linear_on_shared_nodes() {
    struct Combo<'a>(&'a GaussianBump, &'a QuadraticInV, f64, f64);
    impl TestFunction for Combo<'_> {
        fn value(&self, x: &[f64], v: &[f64]) -> f64 {
            self.2 * self.0.value(x, v) + self.3 * self.1.value(x, v)
        }
        fn grad_x(&self, x: &[f64], _v: &[f64]) -> Vec<f64> {
            vec![0.0; x.len()]
        }
        fn grad_v(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
            let (a, b) = (self.0.grad_v(x, v), self.1.grad_v(x, v));
            a.iter().zip(&b).map(|(s, t)| self.2 * s + self.3 * t).collect()
        }
        fn hess_v(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
            let (a, b) = (self.0.hess_v(x, v), self.1.hess_v(x, v));
            a.iter().zip(&b).map(|(s, t)| self.2 * s + self.3 * t).collect()
        }
    }
    let nu = LevyMeasureSpec::stable(1.2, 0.8, 2, 1.0).unwrap();
    let gen = Generator::new(&nu, QuadratureScheme::default()).unwrap();
    let sys = HamiltonianSystemSpec::new(0.5, 1.0, Force::Linear { cx: -1.0, cv: -1.0 }, 2).unwrap();
    let g = GaussianBump { center: vec![0.1, 0.2], width: 0.6 };
    let h = QuadraticInV { c: vec![1.0, -1.0], k: 0.3 };
    let (x, v) = ([0.2, -0.4], [0.5, 0.1]);
    let (a, b) = (1.7, -0.6);
    let lhs = gen.apply_generator(&sys, &Combo(&g, &h, a, b), &x, &v).unwrap().value;
    let rhs = a * gen.apply_generator(&sys, &g, &x, &v).unwrap().value + b * gen.apply_generator(&sys, &h, &x, &v).unwrap().value;
    assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
}

#[test]
fn coupling_drift_trivial_cases() {
    let gen = Generator::new(&slice1(), QuadratureScheme::default()).unwrap();
    let sys = HamiltonianSystemSpec::new(0.0, 1.0, Force::Linear { cx: -1.0, cv: -1.0 }, 1).unwrap();
    let diag = PairState::diagonal(vec![0.3], vec![1.0]);
    assert_eq!(gen.apply_coupling_drift(&sys, &PARAMS, &Concave, &diag).unwrap(), 0.0);

    // linear profile: the jump part vanishes, leaving f' times the drift bracket
    let s = PairState::new(vec![0.5], vec![0.2], vec![0.1], vec![-0.4]);
    let lin = gen.apply_coupling_drift(&sys, &PARAMS, &Linear, &s).unwrap();
    let (z, w, q) = (s.z()[0], s.w()[0], s.q(2.0)[0]);
    let du = sys.force(&s.x, &s.v).unwrap()[0] - sys.force(&s.xp, &s.vp).unwrap()[0];
    let bracket = 3.0 * (0.0 - 2.0) * z.abs() + 2.0 * 3.0 * z.signum() * q + q.signum() * (w + du / 2.0);
    assert_relative_eq!(lin, 2.0 * bracket, epsilon = 1e-12);
}

#[test]
fn coupling_drift_matches_flow_finite_difference() {
    let nu = slice1();
    let gen = Generator::new(&nu, QuadratureScheme::default()).unwrap();
    let sys = HamiltonianSystemSpec::new(0.0, 1.0, Force::Zero, 1).unwrap();
    let h = HFn { profile: &Concave, alpha: PARAMS.alpha, alpha0: PARAMS.alpha0 };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let s = random_state(&mut rng, 1, 1.0);
        let flow = |t: f64| h.value(&[s.x[0] + t * s.v[0]], &s.v, &[s.xp[0] + t * s.vp[0]], &s.vp);
        let dt = 1e-6;
        let fd = (flow(dt) - flow(-dt)) / (2.0 * dt);
        let q = s.q(PARAMS.alpha);
        let k = PARAMS.kappa.min(norm(&q));
        let r = s.r(&PARAMS);
        let jump = 0.5 * (Concave.value(r + k) + Concave.value(r - k) - 2.0 * Concave.value(r)) * nu.overlap_mass(&s.shift(&PARAMS)).unwrap();
        let closed = gen.apply_coupling_drift(&sys, &PARAMS, &Concave, &s).unwrap();
        assert_relative_eq!(closed, fd + jump, epsilon = 1e-6);
    }
}

#[test]
fn closed_form_matches_quadrature_in_one_dimension() {
    let (sys, nu, _) = benchmark();
    let gen = Generator::new(&nu, QuadratureScheme::default()).unwrap();
    let h = HFn { profile: &Concave, alpha: PARAMS.alpha, alpha0: PARAMS.alpha0 };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let s = random_state(&mut rng, 1, 1.5);
        let closed = gen.apply_coupling_drift(&sys, &PARAMS, &Concave, &s).unwrap();
        let quad = gen.apply_coupling(&sys, &PARAMS, &h, &s).unwrap();
        assert_relative_eq!(closed, quad.value, max_relative = 1e-5, epsilon = 1e-9);
    }
}

#[test]
fn closed_form_matches_quadrature_in_two_dimensions() {
    let nu = LevyMeasureSpec::slice(1.0, 0.5, 2, 1.0).unwrap();
    let sys = HamiltonianSystemSpec::new(0.0, 1.0, Force::Linear { cx: -1.0, cv: -1.0 }, 2).unwrap();
    let h = HFn { profile: &Concave, alpha: PARAMS.alpha, alpha0: PARAMS.alpha0 };
    let s = PairState::new(vec![0.3, -0.1], vec![0.2, 0.5], vec![0.1, 0.2], vec![-0.4, 0.1]);
    // The strip support of the slice is resolved only by fine angular grids.
    let gen = Generator::new(&nu, QuadratureScheme { rho_out: Some(30.0), nodes_angular: 512, ..Default::default() }).unwrap();
    let closed = gen.apply_coupling_drift(&sys, &PARAMS, &Concave, &s).unwrap();
    let quad = gen.apply_coupling(&sys, &PARAMS, &h, &s).unwrap();
    assert_relative_eq!(closed, quad.value, max_relative = 5e-3);
    assert!((closed - quad.value).abs() <= quad.error);
}

#[test]
fn marginal_identity_holds() {
    let nu = slice1();
    let gen = Generator::new(&nu, QuadratureScheme::default()).unwrap();
    let g = GaussianBump { center: vec![0.3], width: 0.5 };
    let h = GaussianBump { center: vec![-0.2], width: 0.8 };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let s = random_state(&mut rng, 1, 1.0);
        assert!(gen.marginal_identity_residual(&PARAMS, &s, &g, &h).unwrap() <= 1e-4);
    }
    assert_eq!(gen.marginal_identity_residual(&PARAMS, &s_const(), &Constant, &Constant).unwrap(), 0.0);
    let sync = PairState::diagonal(vec![0.2], vec![0.4]);
    assert!(gen.marginal_identity_residual(&PARAMS, &sync, &g, &h).unwrap() <= 1e-12);
}

fn s_const() -> PairState {
    PairState::new(vec![0.1], vec![0.2], vec![0.3], vec![0.4])
}

#[test]
fn product_rule_and_pi_bound() {
    let (sys, nu, lyap) = benchmark();
    let gen = Generator::new(&nu, QuadratureScheme::default()).unwrap();
    let h = HFn { profile: &Concave, alpha: PARAMS.alpha, alpha0: PARAMS.alpha0 };
    let g = GFn { lyap: &lyap, eps: 0.1 };
    let g1 = GFn { lyap: &lyap, eps: 0.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let s = random_state(&mut rng, 1, 2.0);
        assert!(gen.product_rule_residual(&sys, &PARAMS, &s, &h, &g).unwrap() <= 1e-6);
        assert!(gen.product_rule_residual(&sys, &PARAMS, &s, &h, &g1).unwrap() <= 1e-12);
        let pi = gen.pi_term(&PARAMS, &s, &Concave, &lyap, 0.1).unwrap();
        assert!(pi.slack >= 0.0, "{pi:?}");
        assert_eq!(gen.pi_term(&PARAMS, &s, &Concave, &lyap, 0.0).unwrap().value, 0.0);
    }
    let diag = PairState::diagonal(vec![0.5], vec![-0.5]);
    assert_eq!(gen.pi_term(&PARAMS, &diag, &Concave, &lyap, 0.1).unwrap().value, 0.0);
    let check = gen.contraction_inequality_check(&sys, &PARAMS, &diag, &Concave, &lyap, 0.1, 0.01).unwrap();
    assert!(check.pass && check.lhs == 0.0);
}
