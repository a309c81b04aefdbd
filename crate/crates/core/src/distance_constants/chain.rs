//! Scalar links of the constant chain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::levy_measure::direction_grid;
use crate::model::{HamiltonianSystemSpec, LyapunovSpec};
use crate::vector::norm;

/// `(alpha, alpha0, degenerate)`. Degenerate means `alpha0 = 1`, which
/// zeroes every factor `1 - 1/alpha0` downstream.
pub fn compute_alpha_alpha0(a: f64, b: f64, lambda_star_r0: f64) -> (f64, f64, bool) {
    let (alpha, alpha0) = if a == 0.0 {
        (1.0, 1.0 + 16.0 * lambda_star_r0 / b)
    } else {
        (16.0 * a / b, 3.0 + (1.0 / a + b / (16.0 * a * a)) * lambda_star_r0)
    };
    (alpha, alpha0, alpha0 <= 1.0)
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    hi
}

/// Largest root `S*` of `2 C0 + 4 c* (S/2)^eta = c0 S / 2`, the threshold
/// on `W + W'` below which the defining condition of `R0` can hold.
pub fn compute_s_star(c0: f64, big_c0: f64, c_star: f64, eta: f64) -> Result<f64> {
    if !(c0 > 0.0) {
        return Err(Error::NoRoot(format!("c0 = {c0} must be positive")));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter(format!("eta must lie in (0,1), got {eta}")));
    }
    if c_star == 0.0 {
        return Ok(4.0 * big_c0 / c0);
    }
    let h = |s: f64| c0 * s / 2.0 - 2.0 * big_c0 - 4.0 * c_star * (s / 2.0).powf(eta);
    let mut hi = 1.0;
    while h(hi) <= 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::NoRoot("S* search overflowed".into()));
        }
    }
    Ok(bisect(h, 0.0, hi))
}

/// Bounds on the sublevel set `{W(x, v) + W(x', v') <= S*}` and the
/// resulting `R0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct R0Report {
    pub s_star: f64,
    /// Bound on `V` for each marginal: `(S* - 2)^{2/theta}`.
    pub v_bar: f64,
    pub position_bound: f64,
    pub velocity_bound: f64,
    /// Upper bound of `r` over the sublevel set.
    pub r_sup: f64,
    pub r0_big: f64,
}

/// Position and velocity bounds of `{V <= v_bar}` from the lower bound
/// `1 + V0(x) + k (|x|^2 + |v|^2 / r^2) <= V`, `k = (r^2 - r0^2)/4`.
pub fn sublevel_bounds(lyap: &LyapunovSpec, dim: usize, v_bar: f64) -> (f64, f64) {
    let k = (lyap.r * lyap.r - lyap.r0_cross * lyap.r0_cross) / 4.0;
    let dirs = direction_grid(dim, 32);
    let min_v0 = dirs
        .iter()
        .flat_map(|e| (0..=400).map(move |i| e.iter().map(|c| c * i as f64 * 0.05).collect::<Vec<f64>>()))
        .map(|x| lyap.v0.value(&x))
        .fold(0.0f64, f64::min);
    let budget = v_bar - 1.0 - min_v0;
    if budget <= 0.0 {
        return (0.0, 0.0);
    }
    let cap = (budget / k).sqrt();
    let lower = |e: &[f64], rho: f64| {
        let x: Vec<f64> = e.iter().map(|c| c * rho).collect();
        1.0 + lyap.v0.value(&x) + k * rho * rho - v_bar
    };
    let mut pos = 0.0f64;
    for e in &dirs {
        let n = 4000;
        let mut last_in = 0.0;
        for i in 1..=n {
            let rho = cap * i as f64 / n as f64;
            if lower(e, rho) <= 0.0 {
                last_in = rho;
            }
        }
        let edge = bisect(|rho| lower(e, rho), last_in, (last_in + cap / n as f64).min(cap));
        pos = pos.max(edge);
    }
    (pos, lyap.r * cap)
}

/// `R0 = sup r over the sublevel set + (1 + alpha) kappa + 1`, with the
/// supremum bounded by `2 alpha0 P + 2 P + 2 V / alpha` for position bound
/// `P` and velocity bound `V`.
pub fn compute_r0(
    lyap: &LyapunovSpec,
    dim: usize,
    s_star: f64,
    alpha: f64,
    alpha0: f64,
    kappa: f64,
) -> R0Report {
    let v_bar = (s_star - 2.0).max(0.0).powf(2.0 / lyap.theta);
    let (p, v) = sublevel_bounds(lyap, dim, v_bar);
    let r_sup = 2.0 * alpha0 * p + 2.0 * p + 2.0 * v / alpha;
    // round up in the last place so the estimate stays conservative
    let r0_big = (r_sup + (1.0 + alpha) * kappa + 1.0) * (1.0 + 1e-12);
    R0Report { s_star, v_bar, position_bound: p, velocity_bound: v, r_sup, r0_big }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let (mut out, mut f) = (0.0, inv);
    while i > 0 {
        out += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    out
}

const PRIMES: [u64; 24] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89];

/// Sampling domain for the Lipschitz supremum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzDomain {
    pub position_radius: f64,
    pub velocity_radius: f64,
    /// Only pairs with `r < r0_big` count; `f64::INFINITY` drops the constraint.
    pub r0_big: f64,
    pub alpha: f64,
    pub alpha0: f64,
}

/// Supremum of `|U(x,v) - U(x',v')| / (|x - x'| + |v - v'|)` over sampled
/// pairs in the domain: Halton pairs (independent, near, and single-block
/// perturbations), then local random refinement around the best pair.
/// No inflation is applied here.
pub fn compute_lipschitz(sys: &HamiltonianSystemSpec, dom: &LipschitzDomain, samples: usize) -> Result<f64> {
    let d = sys.dim;
    if 4 * d > PRIMES.len() {
        return Err(Error::InvalidParameter(format!("Lipschitz sampling supports d <= 6, got {d}")));
    }
    let (pr, vr) = (dom.position_radius, dom.velocity_radius);
    let clamp = |x: &mut Vec<f64>, rad: f64| {
        let n = norm(x);
        if n > rad && n > 0.0 {
            x.iter_mut().for_each(|c| *c *= rad / n);
        }
    };
    let quotient = |p: &[Vec<f64>; 4]| -> Result<Option<f64>> {
        let z: Vec<f64> = p[0].iter().zip(&p[2]).map(|(a, b)| a - b).collect();
        let w: Vec<f64> = p[1].iter().zip(&p[3]).map(|(a, b)| a - b).collect();
        let den = norm(&z) + norm(&w);
        if den <= 1e-14 * (1.0 + pr + vr) {
            return Ok(None);
        }
        let q: Vec<f64> = z.iter().zip(&w).map(|(a, b)| a + b / dom.alpha).collect();
        if !(dom.alpha0 * norm(&z) + norm(&q) < dom.r0_big) {
            return Ok(None);
        }
        let (u1, u2) = (sys.force(&p[0], &p[1])?, sys.force(&p[2], &p[3])?);
        let diff: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| a - b).collect();
        Ok(Some(norm(&diff) / den))
    };
    let point = |i: u64, block: usize| -> Vec<f64> {
        let rad = if block.is_multiple_of(2) { pr } else { vr };
        let mut x: Vec<f64> =
            (0..d).map(|k| rad * (2.0 * radical_inverse(i, PRIMES[block * d + k]) - 1.0)).collect();
        clamp(&mut x, rad);
        x
    };
    let mut best = (0.0f64, None::<[Vec<f64>; 4]>);
    let consider = |p: [Vec<f64>; 4], best: &mut (f64, Option<[Vec<f64>; 4]>)| -> Result<()> {
        if let Some(qv) = quotient(&p)? {
            if qv > best.0 {
                *best = (qv, Some(p));
            }
        }
        Ok(())
    };
    let n = samples.max(8) as u64;
    for i in 1..=n {
        let (x, v, xp, vp) = (point(i, 0), point(i, 1), point(i, 2), point(i, 3));
        match i % 4 {
            0 => consider([x, v, xp, vp], &mut best)?,
            1 => {
                // near pair
                let h = 1e-3;
                let mut xq: Vec<f64> = x.iter().zip(&xp).map(|(a, b)| a + h * b / pr.max(1e-300)).collect();
                let mut vq: Vec<f64> = v.iter().zip(&vp).map(|(a, b)| a + h * b / vr.max(1e-300)).collect();
                clamp(&mut xq, pr);
                clamp(&mut vq, vr);
                consider([x, v, xq, vq], &mut best)?
            }
            2 => consider([x.clone(), v, x, vp], &mut best)?,
            _ => consider([x, v.clone(), xp, v], &mut best)?,
        }
    }
    // local refinement around the argmax
    if let Some(mut cur) = best.1.clone() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x11b5);
        let mut step = 0.05;
        for it in 0..2000 {
            // every few steps try pushing the pair outward; maxima often sit on the boundary
            if it % 4 == 0 {
                let mut cand = cur.clone();
                for (j, part) in cand.iter_mut().enumerate() {
                    let rad = if j % 2 == 0 { pr } else { vr };
                    part.iter_mut().for_each(|c| *c *= 1.0 + step);
                    clamp(part, rad);
                }
                if let Some(qv) = quotient(&cand)? {
                    if qv > best.0 {
                        best.0 = qv;
                        cur = cand;
                        continue;
                    }
                }
            }
            let mut cand = cur.clone();
            for (j, part) in cand.iter_mut().enumerate() {
                let rad = if j % 2 == 0 { pr } else { vr };
                for c in part.iter_mut() {
                    *c += step * rad * rng.random_range(-1.0..1.0);
                }
                clamp(part, rad);
            }
            if let Some(qv) = quotient(&cand)? {
                if qv > best.0 {
                    best.0 = qv;
                    cur = cand;
                    continue;
                }
            }
            step = (step * 0.995).max(1e-6);
        }
    }
    Ok(best.0)
}

/// `(k0, Lambda0, C*)`.
pub fn compute_k0_lambda0_cstar(lambda_star_r0: f64, a: f64, b: f64, alpha: f64, alpha0: f64) -> (f64, f64, f64) {
    let ba = b * alpha;
    let k0 = 8.0 * (lambda_star_r0 + ba * (1.0 + alpha0) + 3.0 * (1.0 - 1.0 / alpha0) * ba / 4.0) / ((alpha0 - 1.0) * ba);
    let lambda0 = (k0 * a + ba) * (1.0 + alpha0) + lambda_star_r0 * (1.0 + (1.0 + 1.0 / alpha) * k0);
    let c_star_big = 1.0 + 8.0 * lambda0 / (3.0 * (1.0 - 1.0 / alpha0) * ba);
    (k0, lambda0, c_star_big)
}

/// `c2 = 3 (1 - 1/alpha0) b alpha (1 + k0 alpha0) / 2`.
pub fn compute_c2(alpha0: f64, b: f64, alpha: f64, k0: f64) -> f64 {
    1.5 * (1.0 - 1.0 / alpha0) * b * alpha * (1.0 + k0 * alpha0)
}

fn eps_denominator(big_c0: f64, c_star: f64, eta: f64, c0: f64) -> f64 {
    2.0 * big_c0 + (1.0 - eta) * (2.0 * c_star * (eta / c0).powf(eta)).powf(1.0 / (1.0 - eta))
}

/// The weight `eps` of `G = 1 + eps (W + W')`.
#[allow(clippy::too_many_arguments)]
pub fn compute_eps(c1: f64, alpha0: f64, b: f64, alpha: f64, big_c0: f64, c_star: f64, eta: f64, c0: f64) -> f64 {
    3.0 * c1 * (1.0 - 1.0 / alpha0) * b * alpha / (16.0 * (1.0 + c1)) / eps_denominator(big_c0, c_star, eta, c0)
}

/// `ln eps` from `ln c1`, for when `c1` underflows.
#[allow(clippy::too_many_arguments)]
pub fn compute_ln_eps(ln_c1: f64, alpha0: f64, b: f64, alpha: f64, big_c0: f64, c_star: f64, eta: f64, c0: f64) -> f64 {
    (3.0 / 16.0f64).ln() + ln_c1 - ln_c1.exp().ln_1p() + ((1.0 - 1.0 / alpha0) * b * alpha).ln()
        - eps_denominator(big_c0, c_star, eta, c0).ln()
}

/// `lambda_* = min(c0 eps / (1 + 2 eps), 3 c1 (1 - 1/alpha0) b alpha / (8 (1 + c1)))`.
pub fn rate_lambda_star(c0: f64, eps: f64, c1: f64, alpha0: f64, b: f64, alpha: f64) -> f64 {
    (c0 * eps / (1.0 + 2.0 * eps)).min(3.0 * c1 * (1.0 - 1.0 / alpha0) * b * alpha / (8.0 * (1.0 + c1)))
}

/// `ln lambda_*` from `ln eps` and `ln c1`.
pub fn ln_rate_lambda_star(c0: f64, ln_eps: f64, ln_c1: f64, alpha0: f64, b: f64, alpha: f64) -> f64 {
    let first = c0.ln() + ln_eps - (2.0 * ln_eps.exp()).ln_1p();
    let second = (3.0 / 8.0f64).ln() + ln_c1 - ln_c1.exp().ln_1p() + ((1.0 - 1.0 / alpha0) * b * alpha).ln();
    first.min(second)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Force, KineticLangevinSpec, Potential, V0Spec};
    use approx::assert_relative_eq;

    #[test]
    fn alpha_alpha0_hand_cases() {
        assert_eq!(compute_alpha_alpha0(0.0, 1.0, 1.0), (1.0, 17.0, false));
        assert_eq!(compute_alpha_alpha0(2.0, 16.0, 4.0), (2.0, 6.0, false));
        assert_eq!(compute_alpha_alpha0(0.0, 1.0, 0.0), (1.0, 1.0, true));
    }

    #[test]
    fn s_star_cases() {
        assert_relative_eq!(compute_s_star(2.0, 3.0, 0.0, 0.5).unwrap(), 6.0);
        // t^2 - 4t - 2 = 0 with t = sqrt(S/2)
        let t = 2.0 + 6f64.sqrt();
        assert_relative_eq!(compute_s_star(1.0, 1.0, 1.0, 0.5).unwrap(), 2.0 * t * t, max_relative = 1e-12);
        assert!(matches!(compute_s_star(0.0, 1.0, 1.0, 0.5), Err(Error::NoRoot(_))));
    }

    #[test]
    fn r0_grows_with_big_c0() {
        let lyap = LyapunovSpec::new(1.0, 0.5, 1.0, V0Spec::Zero).unwrap();
        let r: Vec<f64> = [1.0, 2.0, 4.0]
            .iter()
            .map(|c| compute_r0(&lyap, 1, compute_s_star(0.5, *c, 1.0, 0.5).unwrap(), 1.0, 5.0, 0.25).r0_big)
            .collect();
        assert!(r[0] < r[1] && r[1] < r[2]);
    }

    #[test]
    fn sublevel_bounds_quadratic() {
        // V0 = 0, r = 1, r0 = 0: k = 1/4, so |x|^2 <= 4 (v_bar - 1)
        let lyap = LyapunovSpec::new(1.0, 0.0, 1.0, V0Spec::Zero).unwrap();
        let (p, v) = sublevel_bounds(&lyap, 2, 5.0);
        assert_relative_eq!(p, 4.0, max_relative = 1e-9);
        assert_relative_eq!(v, 4.0, max_relative = 1e-9);
    }

    #[test]
    fn lipschitz_examples() {
        let dom = LipschitzDomain { position_radius: 3.0, velocity_radius: 3.0, r0_big: f64::INFINITY, alpha: 1.0, alpha0: 2.0 };
        let damp = HamiltonianSystemSpec::new(0.0, 1.0, Force::Linear { cx: 0.0, cv: -1.0 }, 1).unwrap();
        assert_relative_eq!(compute_lipschitz(&damp, &dom, 4000).unwrap(), 1.0, max_relative = 1e-12);
        let both = HamiltonianSystemSpec::new(0.0, 1.0, Force::Linear { cx: -1.0, cv: -1.0 }, 2).unwrap();
        let l = compute_lipschitz(&both, &dom, 4000).unwrap();
        assert!((1.0..=2f64.sqrt() + 1e-12).contains(&l), "{l}");

        let spec = KineticLangevinSpec::new(1.0, 1.0, Potential::DoubleWellPoly { c1: 1.0, c2: 2.0, l: 2.0 }, 1).unwrap();
        let sys = spec.hamiltonian();
        let small = compute_lipschitz(&sys, &dom, 4000).unwrap();
        let big = compute_lipschitz(&sys, &LipschitzDomain { position_radius: 6.0, ..dom }, 4000).unwrap();
        assert!(big >= small);
        // grad U0 = 4 x^3: derivative 12 x^2 = 108 at |x| = 3
        assert!(small > 0.95 * 108.0 && small <= 108.0 + 1e-9, "{small}");
    }

    #[test]
    fn eps_and_rate_examples() {
        // 3 * 1 * (1/2) / (16 * 2) / 1
        assert_relative_eq!(compute_eps(1.0, 2.0, 1.0, 1.0, 0.5, 0.0, 0.5, 1.0), 3.0 / 64.0, max_relative = 1e-15);
        let e1 = compute_eps(0.3, 4.0, 1.0, 1.0, 1.0, 0.5, 0.5, 1.0);
        let e2 = compute_eps(0.3, 4.0, 1.0, 1.0, 2.0, 0.5, 0.5, 1.0);
        assert!(e2 < e1 && e2 > 0.0);
        assert_relative_eq!(compute_ln_eps(0.3f64.ln(), 4.0, 1.0, 1.0, 2.0, 0.5, 0.5, 1.0), e2.ln(), max_relative = 1e-13);
        // c0 = 1, eps = 1 makes the first term 1/3; second term 3/16 here
        assert_relative_eq!(rate_lambda_star(1.0, 1.0, 1.0, 2.0, 1.0, 1.0), 3.0 / 32.0);
        assert_relative_eq!(rate_lambda_star(1.0, 1.0, 1.0, 1e9, 10.0, 1.0), 1.0 / 3.0);
        assert_eq!(rate_lambda_star(1.0, 1.0, 1.0, 1.0, 1.0, 1.0), 0.0);
        assert_relative_eq!(
            ln_rate_lambda_star(1.0, 0.0, 0.0, 2.0, 1.0, 1.0),
            rate_lambda_star(1.0, 1.0, 1.0, 2.0, 1.0, 1.0).ln(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn k0_chain_is_positive() {
        let (k0, l0, cs) = compute_k0_lambda0_cstar(3.0, 0.0, 1.0, 1.0, 49.0);
        assert!(k0 > 0.0 && l0 > 0.0 && cs > 1.0);
        assert_relative_eq!(k0, 8.0 * (3.0 + 50.0 + 0.75 * 48.0 / 49.0) / 48.0, max_relative = 1e-14);
    }
}
