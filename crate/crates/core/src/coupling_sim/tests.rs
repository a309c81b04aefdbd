use approx::assert_relative_eq;
use rand::Rng;

use super::*;
use crate::levy_measure::{Jump, LevyMeasureSpec, OverlapMeasure};
use crate::model::{Force, HamiltonianSystemSpec, KineticLangevinSpec, Potential};

const PARAMS: CouplingParams = CouplingParams { alpha: 1.0, alpha0: 2.0, kappa: 0.4 };

fn free(dim: usize) -> HamiltonianSystemSpec {
    HamiltonianSystemSpec::new(0.0, 1.0, Force::Zero, dim).unwrap()
}

fn slice_nu() -> LevyMeasureSpec {
    LevyMeasureSpec::slice(1.0, 0.4, 1, 1.0).unwrap()
}

fn jump(time: f64, u: f64, mark: f64) -> Jump {
    Jump { time, u: vec![u], mark }
}

#[test]
fn single_step_examples() {
    let sys = free(1);
    let nu = LevyMeasureSpec::stable(1.5, 1.0, 1, 1.0).unwrap();
    let st = Stepper::new(&sys, &nu, PARAMS, 0.01, true).unwrap();
    assert_eq!(st.compensation(), &[0.0]);
    let (x, v) = st.step_single(&[1.0], &[2.0], 0.1, &[], 0.0).unwrap();
    assert_relative_eq!(x[0], 1.2, epsilon = 1e-15);
    assert_eq!(v, vec![2.0]);
    let (_, v) = st.step_single(&[1.0], &[2.0], 0.1, &[jump(0.05, 0.7, 0.5)], 0.0).unwrap();
    assert_relative_eq!(v[0], 2.7, epsilon = 1e-15);

    // a = 0, b = 1, U = -v: x + h v, v - h v
    let lin = HamiltonianSystemSpec::new(0.0, 1.0, Force::Linear { cx: 0.0, cv: -1.0 }, 1).unwrap();
    let st = Stepper::new(&lin, &nu, PARAMS, 0.01, true).unwrap();
    let (x, v) = st.step_single(&[1.0], &[2.0], 0.1, &[], 0.0).unwrap();
    assert_relative_eq!(x[0], 1.2, epsilon = 1e-15);
    assert_relative_eq!(v[0], 1.8, epsilon = 1e-15);
}

#[test]
fn blow_up_is_reported() {
    let sys = free(1);
    let nu = slice_nu();
    let st = Stepper::new(&sys, &nu, PARAMS, 0.1, true).unwrap();
    let err = st.step_single(&[0.0], &[2e12], 0.5, &[], 1.0).unwrap_err();
    assert!(matches!(err, crate::Error::NonFiniteState { t } if t == 1.5));
}

#[test]
fn classification_examples() {
    let nu = slice_nu();
    assert_eq!(classify_jump(&nu, &[0.5], &[0.0], &PARAMS, 0.0), vec![0.5]);
    // y = 0.2; rho(-y, 0.5) = min(q(0.5), q(0.7)) / q(0.5) = (5/7)^1.4
    let y = modification_shift(&[0.2], &PARAMS);
    assert_eq!(y, vec![0.2]);
    let rho_m = (0.5f64 / 0.7).powf(1.4);
    assert_eq!(classify_jump(&nu, &[0.5], &[0.2], &PARAMS, 0.5 * rho_m - 1e-9), vec![0.7]);
    assert_eq!(classify_jump(&nu, &[0.5], &[0.2], &PARAMS, 0.5 * rho_m + 1e-9), vec![0.3]);
    assert_eq!(classify_jump(&nu, &[0.5], &[0.2], &PARAMS, 0.999), vec![0.5]);
    // truncation caps the shift at alpha kappa
    assert_eq!(modification_shift(&[3.0], &PARAMS), vec![0.4]);
}

#[test]
fn branch_frequencies_match_overlap_ratios() {
    let nu = slice_nu();
    let (u, q) = ([0.5], [0.2]);
    let y = modification_shift(&q, &PARAMS);
    let neg: Vec<f64> = y.iter().map(|c| -c).collect();
    let pm = 0.5 * nu.overlap_density_ratio(&neg, &u).unwrap();
    let pp = 0.5 * nu.overlap_density_ratio(&y, &u).unwrap();
    let mut rng = replica_rng(5, 0);
    let n = 100_000;
    let (mut cm, mut cp) = (0usize, 0usize);
    for _ in 0..n {
        let up = classify_jump(&nu, &u, &q, &PARAMS, rng.random::<f64>());
        if up[0] > 0.6 {
            cm += 1;
        } else if up[0] < 0.4 {
            cp += 1;
        }
    }
    for (count, p) in [(cm, pm), (cp, pp), (n - cm - cp, 1.0 - pm - pp)] {
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((count as f64 / n as f64 - p).abs() < 3.0 * se, "{count} vs {p}");
    }
}

#[test]
fn correction_matches_one_dimensional_masses() {
    let sys = free(1);
    let nu = slice_nu();
    let st = Stepper::new(&sys, &nu, PARAMS, 0.01, true).unwrap();
    let y = [0.2];
    let s = nu.coupling_slice();
    let m_minus = OverlapMeasure::new(s, vec![-0.2]).unwrap().mass_in_shell(0.01, 1.0).value;
    let m_plus = OverlapMeasure::new(s, vec![0.2]).unwrap().mass_in_shell(0.01, 1.0).value;
    let c = st.modification_correction(&y).unwrap();
    assert_relative_eq!(c[0], -0.1 * (m_minus - m_plus), max_relative = 1e-12);
    let off = Stepper::new(&sys, &nu, PARAMS, 0.01, false).unwrap();
    assert_eq!(off.modification_correction(&y).unwrap(), vec![0.0]);
}

fn benchmark_sys() -> HamiltonianSystemSpec {
    KineticLangevinSpec::new(1.0, 1.0, Potential::DoubleWellPoly { c1: 1.0, c2: 2.0, l: 2.0 }, 1).unwrap().hamiltonian()
}

#[test]
fn diagonal_pairs_stay_bitwise_equal() {
    let sys = benchmark_sys();
    let nu = slice_nu();
    let st = Stepper::new(&sys, &nu, PARAMS, 0.01, true).unwrap();
    let cfg = SimConfig { h: 0.01, horizon: 3.0, sample_every: 0.5, ..Default::default() };
    for seed in 0..10 {
        let cfg = SimConfig { seed, ..cfg.clone() };
        let tr = simulate_pair(&st, &cfg, &PairState::diagonal(vec![0.3], vec![-1.0]), 0).unwrap();
        assert!(tr.states.iter().all(PairState::is_diagonal));
    }
}

#[test]
fn zero_horizon_and_determinism() {
    let sys = benchmark_sys();
    let nu = slice_nu();
    let st = Stepper::new(&sys, &nu, PARAMS, 0.01, true).unwrap();
    let init = PairState::new(vec![1.0], vec![0.0], vec![-1.0], vec![0.5]);
    let zero = SimConfig { horizon: 0.0, ..Default::default() };
    let tr = simulate_pair(&st, &zero, &init, 0).unwrap();
    assert_eq!(tr.states, vec![init.clone()]);

    let cfg = SimConfig { horizon: 2.0, sample_every: 0.25, ..Default::default() };
    let a = simulate_pair(&st, &cfg, &init, 3).unwrap();
    let b = simulate_pair(&st, &cfg, &init, 3).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.times.len(), 9);
    assert_relative_eq!(*a.times.last().unwrap(), 2.0);
    let c = simulate_pair(&st, &cfg, &init, 4).unwrap();
    assert_ne!(a.states, c.states);
    assert!(a.stability > 0.0);
}

#[test]
fn zero_kappa_is_synchronous() {
    let sys = benchmark_sys();
    let nu = slice_nu();
    let params = CouplingParams { kappa: 0.0, ..PARAMS };
    let st = Stepper::new(&sys, &nu, params, 0.01, true).unwrap();
    let cfg = SimConfig { horizon: 1.0, sample_every: 0.01, ..Default::default() };
    let init = PairState::new(vec![1.0], vec![0.0], vec![-1.0], vec![0.5]);
    let tr = simulate_pair(&st, &cfg, &init, 0).unwrap();

    let mut rng = replica_rng(cfg.seed, 0);
    let (mut x, mut v, mut xp, mut vp) = (init.x.clone(), init.v.clone(), init.xp.clone(), init.vp.clone());
    let mut t = 0.0;
    for dt in cfg.windows() {
        let jumps = nu.sample_large_jumps(dt, cfg.delta, cfg.jump_budget, &mut rng).unwrap();
        (x, v) = st.step_single(&x, &v, dt, &jumps, t).unwrap();
        (xp, vp) = st.step_single(&xp, &vp, dt, &jumps, t).unwrap();
        t += dt;
    }
    assert_eq!(tr.states.last().unwrap(), &PairState::new(x, v, xp, vp));
}

#[test]
fn ensemble_keeps_replica_order() {
    let sys = benchmark_sys();
    let nu = slice_nu();
    let st = Stepper::new(&sys, &nu, PARAMS, 0.01, true).unwrap();
    let cfg = SimConfig { horizon: 0.5, replicas: 8, ..Default::default() };
    let init = |i: usize| PairState::new(vec![i as f64 * 0.1], vec![0.0], vec![-1.0], vec![0.0]);
    let all = simulate_ensemble(&st, &cfg, init);
    for (i, tr) in all.iter().enumerate() {
        assert_eq!(tr.as_ref().unwrap(), &simulate_pair(&st, &cfg, &init(i), i).unwrap());
    }
}

#[test]
fn trajectory_csv_columns() {
    let tr = Trajectory {
        times: vec![0.0, 1.0],
        states: vec![PairState::diagonal(vec![1.0], vec![2.0]); 2],
        stability: 0.1,
    };
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, &tr, |_| (0.0, 0.0)).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,x0,v0,xp0,vp0,r,psi_tilde");
    assert_eq!(text.lines().count(), 3);
}
