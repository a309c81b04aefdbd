//! Confining potentials `U0` and the force field `U(x, v)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::{dot, norm};

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A user-supplied potential with its gradient.
#[derive(Clone)]
pub struct CustomPotential {
    pub value: ScalarFn,
    pub gradient: VectorFn,
}

impl CustomPotential {
    pub fn new(
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self { value: Arc::new(value), gradient: Arc::new(gradient) }
    }
}

impl fmt::Debug for CustomPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomPotential")
    }
}

impl PartialEq for CustomPotential {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.value, &other.value) && Arc::ptr_eq(&self.gradient, &other.gradient)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    /// `k |x|^2 / 2`
    Quadratic { k: f64 },
    /// `c1 (1 + |x|^2)^l - c2 |x|^2`, `l > 1`
    DoubleWellPoly { c1: f64, c2: f64, l: f64 },
    /// `c1 exp((1 + |x|^2)^l) - c2 |x|^2`, `l > 0`
    DoubleWellExp { c1: f64, c2: f64, l: f64 },
    #[serde(skip)]
    Custom(CustomPotential),
}

impl Potential {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Potential::Quadratic { k } => k.is_finite(),
            Potential::DoubleWellPoly { c1, c2, l } => c1 > 0.0 && c2 >= 0.0 && l > 1.0 && l.is_finite(),
            Potential::DoubleWellExp { c1, c2, l } => c1 > 0.0 && c2 >= 0.0 && l > 0.0 && l.is_finite(),
            Potential::Custom(_) => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid potential parameters: {self:?}")))
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let s = dot(x, x);
        match *self {
            Potential::Quadratic { k } => 0.5 * k * s,
            Potential::DoubleWellPoly { c1, c2, l } => c1 * (1.0 + s).powf(l) - c2 * s,
            Potential::DoubleWellExp { c1, c2, l } => c1 * (1.0 + s).powf(l).exp() - c2 * s,
            Potential::Custom(ref p) => (p.value)(x),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let s = dot(x, x);
        let radial = match *self {
            Potential::Quadratic { k } => k,
            Potential::DoubleWellPoly { c1, c2, l } => 2.0 * l * c1 * (1.0 + s).powf(l - 1.0) - 2.0 * c2,
            Potential::DoubleWellExp { c1, c2, l } => {
                let p = (1.0 + s).powf(l);
                2.0 * l * c1 * p.exp() * p / (1.0 + s) - 2.0 * c2
            }
            Potential::Custom(ref p) => return (p.gradient)(x),
        };
        x.iter().map(|c| radial * c).collect()
    }

    /// `<x, grad U0(x)>`
    pub fn radial_derivative(&self, x: &[f64]) -> f64 {
        dot(x, &self.gradient(x))
    }

    /// Largest `|x|` worth probing before `U0` overflows.
    pub fn safe_radius(&self) -> f64 {
        match *self {
            Potential::DoubleWellExp { l, .. } => ((600f64).powf(1.0 / l) - 1.0).max(0.0).sqrt(),
            _ => f64::INFINITY,
        }
    }
}

/// Kinetic Langevin force `U(x, v) = -alpha_damp v - beta grad U0(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KineticLangevinSpec {
    pub alpha_damp: f64,
    pub beta: f64,
    pub potential: Potential,
    pub dim: usize,
}

impl KineticLangevinSpec {
    pub fn new(alpha_damp: f64, beta: f64, potential: Potential, dim: usize) -> Result<Self> {
        let spec = Self { alpha_damp, beta, potential, dim };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_damp > 0.0 && self.beta > 0.0 && self.dim >= 1) {
            return Err(Error::InvalidParameter(format!(
                "kinetic Langevin needs alpha_damp > 0, beta > 0, dim >= 1; got {}, {}, {}",
                self.alpha_damp, self.beta, self.dim
            )));
        }
        self.potential.validate()
    }

    pub fn hamiltonian(&self) -> HamiltonianSystemSpec {
        HamiltonianSystemSpec { a: 0.0, b: 1.0, force: Force::KineticLangevin(self.clone()), dim: self.dim }
    }
}

/// The velocity force `U(x, v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Force {
    Zero,
    /// `U(x, v) = cx x + cv v`
    Linear { cx: f64, cv: f64 },
    KineticLangevin(KineticLangevinSpec),
}

impl Force {
    pub fn eval(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        match self {
            Force::Zero => vec![0.0; x.len()],
            Force::Linear { cx, cv } => x.iter().zip(v).map(|(a, b)| cx * a + cv * b).collect(),
            Force::KineticLangevin(k) => {
                let g = k.potential.gradient(x);
                v.iter().zip(g).map(|(vi, gi)| -k.alpha_damp * vi - k.beta * gi).collect()
            }
        }
    }
}

/// `dX = (aX + bV) dt`, `dV = U(X, V) dt + dL`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSystemSpec {
    pub a: f64,
    pub b: f64,
    pub force: Force,
    pub dim: usize,
}

impl HamiltonianSystemSpec {
    pub fn new(a: f64, b: f64, force: Force, dim: usize) -> Result<Self> {
        let spec = Self { a, b, force, dim };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a >= 0.0 && self.b > 0.0 && self.a.is_finite() && self.b.is_finite() && self.dim >= 1) {
            return Err(Error::InvalidParameter(format!("need a >= 0, b > 0; got a={}, b={}", self.a, self.b)));
        }
        if let Force::KineticLangevin(k) = &self.force {
            k.validate()?;
            if k.dim != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, got: k.dim });
            }
        }
        Ok(())
    }

    pub fn langevin(&self) -> Option<&KineticLangevinSpec> {
        match &self.force {
            Force::KineticLangevin(k) => Some(k),
            _ => None,
        }
    }

    pub fn force(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let u = self.force.eval(x, v);
        if u.iter().all(|c| c.is_finite()) {
            Ok(u)
        } else {
            Err(Error::NonFiniteForce)
        }
    }

    /// `(a x + b v, U(x, v))`
    pub fn drift(&self, x: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let dx = x.iter().zip(v).map(|(xi, vi)| self.a * xi + self.b * vi).collect();
        Ok((dx, self.force(x, v)?))
    }

    /// Finite-difference Lipschitz estimate of `U` on the ball of radius
    /// `radius` in both arguments.
    pub fn lipschitz_estimate(&self, radius: f64, samples: usize) -> f64 {
        let d = self.dim;
        let mut best: f64 = 0.0;
        let h = 1e-6 * radius.max(1.0);
        for k in 0..samples {
            let t = (k as f64 + 0.5) / samples as f64;
            let x: Vec<f64> = (0..d).map(|i| radius * (2.0 * frac(t * (i as f64 + 1.0) * 0.618_034) - 1.0)).collect();
            let v: Vec<f64> = (0..d).map(|i| radius * (2.0 * frac(t * (i as f64 + 2.0) * 0.754_877) - 1.0)).collect();
            let u0 = self.force.eval(&x, &v);
            for i in 0..2 * d {
                let (mut xp, mut vp) = (x.clone(), v.clone());
                if i < d {
                    xp[i] += h;
                } else {
                    vp[i - d] += h;
                }
                let u1 = self.force.eval(&xp, &vp);
                let diff: Vec<f64> = u1.iter().zip(&u0).map(|(a, b)| a - b).collect();
                best = best.max(norm(&diff) / h);
            }
        }
        best
    }
}

fn frac(x: f64) -> f64 {
    x - x.floor()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn drift_examples() {
        let q = KineticLangevinSpec::new(1.0, 1.0, Potential::Quadratic { k: 1.0 }, 1).unwrap().hamiltonian();
        assert_eq!(q.drift(&[1.0], &[2.0]).unwrap(), (vec![2.0], vec![-3.0]));
        let dw = KineticLangevinSpec::new(1.0, 1.0, Potential::DoubleWellPoly { c1: 1.0, c2: 2.0, l: 2.0 }, 1)
            .unwrap()
            .hamiltonian();
        assert_eq!(dw.drift(&[0.0], &[0.0]).unwrap(), (vec![0.0], vec![0.0]));
        let (dx, dv) = dw.drift(&[1.0], &[0.0]).unwrap();
        assert_eq!(dx, vec![0.0]);
        assert_relative_eq!(dv[0], -4.0, epsilon = 1e-14);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let pots = [
            Potential::Quadratic { k: 2.5 },
            Potential::DoubleWellPoly { c1: 1.0, c2: 2.0, l: 2.0 },
            Potential::DoubleWellPoly { c1: 0.5, c2: 1.0, l: 1.5 },
            Potential::DoubleWellExp { c1: 1.0, c2: 1.0, l: 1.0 },
            Potential::DoubleWellExp { c1: 0.3, c2: 2.0, l: 0.5 },
        ];
        let x = [0.7, -0.4];
        for p in &pots {
            let g = p.gradient(&x);
            for i in 0..2 {
                let h = 1e-6;
                let mut xp = x;
                let mut xm = x;
                xp[i] += h;
                xm[i] -= h;
                let fd = (p.value(&xp) - p.value(&xm)) / (2.0 * h);
                assert_relative_eq!(g[i], fd, max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn non_finite_force_is_reported() {
        let s = KineticLangevinSpec::new(1.0, 1.0, Potential::DoubleWellExp { c1: 1.0, c2: 1.0, l: 1.0 }, 1)
            .unwrap()
            .hamiltonian();
        assert_eq!(s.drift(&[40.0], &[0.0]), Err(Error::NonFiniteForce));
    }

    #[test]
    fn linear_force_lipschitz() {
        let s = HamiltonianSystemSpec::new(0.0, 1.0, Force::Linear { cx: 0.0, cv: -1.0 }, 1).unwrap();
        assert_relative_eq!(s.lipschitz_estimate(3.0, 50), 1.0, max_relative = 1e-6);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(HamiltonianSystemSpec::new(-1.0, 1.0, Force::Zero, 1).is_err());
        assert!(KineticLangevinSpec::new(1.0, 1.0, Potential::DoubleWellPoly { c1: 1.0, c2: 2.0, l: 1.0 }, 1).is_err());
    }
}
