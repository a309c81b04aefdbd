use super::*;
use crate::coupling_sim::CouplingParams;
use crate::levy_measure::LevyMeasureSpec;
use crate::model::{HamiltonianSystemSpec, KineticLangevinSpec, Potential};

const PARAMS: CouplingParams = CouplingParams { alpha: 1.0, alpha0: 2.0, kappa: 0.4 };

fn quadratic() -> HamiltonianSystemSpec {
    KineticLangevinSpec::new(1.0, 1.0, Potential::Quadratic { k: 1.0 }, 1).unwrap().hamiltonian()
}

fn nu() -> LevyMeasureSpec {
    LevyMeasureSpec::slice(1.0, 0.4, 1, 1.0).unwrap()
}

fn distance(p: &PairState) -> (f64, f64) {
    let r = p.r(&PARAMS);
    (r, r.min(1.0))
}

#[test]
fn diagonal_start_has_no_decay_to_fit() {
    let (sys, nu) = (quadratic(), nu());
    let st = Stepper::new(&sys, &nu, PARAMS, 0.01, true).unwrap();
    let cfg = SimConfig { horizon: 2.0, replicas: 20, ..Default::default() };
    let err = estimate_decay(&st, &cfg, |_| PairState::diagonal(vec![1.0], vec![0.0]), distance, None).unwrap_err();
    assert!(matches!(err, Error::InsufficientDecay(_)));
}

#[test]
fn damped_linear_pairs_contract_reproducibly() {
    // overdamped, so the mean distance decays without oscillating
    let sys = KineticLangevinSpec::new(3.0, 1.0, Potential::Quadratic { k: 1.0 }, 1).unwrap().hamiltonian();
    let nu = nu();
    let st = Stepper::new(&sys, &nu, PARAMS, 0.01, true).unwrap();
    let cfg = SimConfig { horizon: 6.0, replicas: 200, sample_every: 0.25, ..Default::default() };
    let init = |_| PairState::new(vec![2.0], vec![0.0], vec![-2.0], vec![1.0]);
    let a = estimate_decay(&st, &cfg, init, distance, Some(0.1)).unwrap();
    assert!(a.rate > 0.2 && a.ci_low > 0.0, "{a:?}");
    assert!(a.r2 > 0.9, "{:?} {:?} {}", a.mean, a.window, a.r2);
    assert_eq!(a.blow_ups, 0);
    assert_eq!(a.rate_exceeds_lambda_star, Some(true));
    let b = estimate_decay(&st, &cfg, init, distance, Some(0.1)).unwrap();
    assert_eq!(a, b);
    let mut csv = Vec::new();
    a.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), a.times.len() + 1);
}

#[test]
fn identical_ensembles_are_at_distance_zero() {
    let (sys, nu) = (quadratic(), nu());
    let st = Stepper::new(&sys, &nu, PARAMS, 0.01, true).unwrap();
    let cfg = SimConfig { horizon: 1.0, replicas: 50, seed: 3, ..Default::default() };
    let setup = EquilibriumSetup { seed_b: 3, ..Default::default() };
    let init = |_| (vec![1.0], vec![0.0]);
    let rep = equilibrium_diagnostics(&st, &cfg, &setup, init, init).unwrap();
    assert_eq!(rep.cross_distance, 0.0);
    assert_eq!(rep.velocity_moments.len(), 9);
}

#[test]
fn far_apart_ensembles_meet() {
    let (sys, nu) = (quadratic(), nu());
    let st = Stepper::new(&sys, &nu, PARAMS, 0.01, true).unwrap();
    let cfg = SimConfig { horizon: 10.0, replicas: 400, ..Default::default() };
    let rep = equilibrium_diagnostics(
        &st,
        &cfg,
        &EquilibriumSetup::default(),
        |_| (vec![5.0], vec![0.0]),
        |_| (vec![-5.0], vec![2.0]),
    )
    .unwrap();
    assert!(rep.pass_cross && rep.pass_stationarity, "{rep:?}");
    assert!(rep.velocity_moments.iter().all(|m| m.1.is_finite()));
}
