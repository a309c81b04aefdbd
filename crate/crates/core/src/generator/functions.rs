//! Test functions for the single-process generator and the coupling operator.

use crate::model::LyapunovSpec;
use crate::vector::{dot, norm, unit_or_zero};

const FD_STEP: f64 = 1e-4;

/// A `C^{1,2}` function of `(x, v)`.
pub trait TestFunction {
    fn value(&self, x: &[f64], v: &[f64]) -> f64;
    fn grad_x(&self, x: &[f64], v: &[f64]) -> Vec<f64>;
    fn grad_v(&self, x: &[f64], v: &[f64]) -> Vec<f64>;

    /// Row-major Hessian in `v`. The default differentiates `grad_v` centrally.
    fn hess_v(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let d = v.len();
        let mut out = vec![0.0; d * d];
        for j in 0..d {
            let h = FD_STEP * (1.0 + v[j].abs());
            let mut vp = v.to_vec();
            let mut vm = v.to_vec();
            vp[j] += h;
            vm[j] -= h;
            let (gp, gm) = (self.grad_v(x, &vp), self.grad_v(x, &vm));
            for i in 0..d {
                out[i * d + j] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        symmetrize(&mut out, d);
        out
    }
}

/// Gradient of a function of the pair `((x, v), (x', v'))`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGradient {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub xp: Vec<f64>,
    pub vp: Vec<f64>,
}

impl PairGradient {
    pub fn zeros(d: usize) -> Self {
        Self { x: vec![0.0; d], v: vec![0.0; d], xp: vec![0.0; d], vp: vec![0.0; d] }
    }

    fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        let mix = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(s, t)| a * s + b * t).collect();
        Self { x: mix(&self.x, &other.x), v: mix(&self.v, &other.v), xp: mix(&self.xp, &other.xp), vp: mix(&self.vp, &other.vp) }
    }

    /// Derivative along a synchronous velocity shift `(v + u, v' + u)`.
    pub fn sync(&self) -> Vec<f64> {
        self.v.iter().zip(&self.vp).map(|(a, b)| a + b).collect()
    }
}

/// A function of the pair, differentiable once in positions and twice
/// along synchronous velocity shifts.
pub trait PairFunction {
    fn value(&self, x: &[f64], v: &[f64], xp: &[f64], vp: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], v: &[f64], xp: &[f64], vp: &[f64]) -> PairGradient;

    /// Row-major Hessian of `u -> F(x, v + u, x', v' + u)` at `u = 0`.
    fn sync_hessian(&self, x: &[f64], v: &[f64], xp: &[f64], vp: &[f64]) -> Vec<f64> {
        let d = v.len();
        let mut out = vec![0.0; d * d];
        for j in 0..d {
            let h = FD_STEP * (1.0 + v[j].abs().max(vp[j].abs()));
            let shifted = |s: f64| {
                let mut a = v.to_vec();
                let mut b = vp.to_vec();
                a[j] += s;
                b[j] += s;
                self.gradient(x, &a, xp, &b).sync()
            };
            let (gp, gm) = (shifted(h), shifted(-h));
            for i in 0..d {
                out[i * d + j] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        symmetrize(&mut out, d);
        out
    }
}

fn symmetrize(m: &mut [f64], d: usize) {
    for i in 0..d {
        for j in 0..i {
            let s = 0.5 * (m[i * d + j] + m[j * d + i]);
            m[i * d + j] = s;
            m[j * d + i] = s;
        }
    }
}

/// A scalar profile on `[0, inf)` with a left derivative everywhere.
pub trait Profile {
    fn value(&self, s: f64) -> f64;
    /// Left derivative `f'_-(s)`.
    fn d1(&self, s: f64) -> f64;
    fn d2(&self, s: f64) -> f64 {
        let h = 1e-5 * (1.0 + s.abs());
        (self.d1(s + h) - self.d1((s - h).max(0.0))) / (s + h - (s - h).max(0.0))
    }
}

/// `H = f(alpha0 |z| + |q|)` with `z = x - x'`, `q = z + (v - v') / alpha`.
pub struct HFn<'a, P: Profile + ?Sized> {
    pub profile: &'a P,
    pub alpha: f64,
    pub alpha0: f64,
}

impl<P: Profile + ?Sized> HFn<'_, P> {
    fn zq(&self, x: &[f64], v: &[f64], xp: &[f64], vp: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let z: Vec<f64> = x.iter().zip(xp).map(|(a, b)| a - b).collect();
        let q = z.iter().zip(v.iter().zip(vp)).map(|(zi, (a, b))| zi + (a - b) / self.alpha).collect();
        (z, q)
    }

    pub fn distance(&self, x: &[f64], v: &[f64], xp: &[f64], vp: &[f64]) -> f64 {
        let (z, q) = self.zq(x, v, xp, vp);
        self.alpha0 * norm(&z) + norm(&q)
    }
}

impl<P: Profile + ?Sized> PairFunction for HFn<'_, P> {
    fn value(&self, x: &[f64], v: &[f64], xp: &[f64], vp: &[f64]) -> f64 {
        self.profile.value(self.distance(x, v, xp, vp))
    }

    fn gradient(&self, x: &[f64], v: &[f64], xp: &[f64], vp: &[f64]) -> PairGradient {
        let (z, q) = self.zq(x, v, xp, vp);
        let r = self.alpha0 * norm(&z) + norm(&q);
        let fp = self.profile.d1(r);
        let zh = unit_or_zero(&z, 1e-12);
        let qh = unit_or_zero(&q, 1e-12);
        let gx: Vec<f64> = zh.iter().zip(&qh).map(|(a, b)| fp * (self.alpha0 * a + b)).collect();
        let gv: Vec<f64> = qh.iter().map(|b| fp * b / self.alpha).collect();
        PairGradient {
            xp: gx.iter().map(|g| -g).collect(),
            vp: gv.iter().map(|g| -g).collect(),
            x: gx,
            v: gv,
        }
    }

    fn sync_hessian(&self, _x: &[f64], v: &[f64], _xp: &[f64], _vp: &[f64]) -> Vec<f64> {
        vec![0.0; v.len() * v.len()]
    }
}

/// `G = 1 + eps (W(x, v) + W(x', v'))`.
pub struct GFn<'a> {
    pub lyap: &'a LyapunovSpec,
    pub eps: f64,
}

impl PairFunction for GFn<'_> {
    fn value(&self, x: &[f64], v: &[f64], xp: &[f64], vp: &[f64]) -> f64 {
        1.0 + self.eps * (self.lyap.w(x, v) + self.lyap.w(xp, vp))
    }

    fn gradient(&self, x: &[f64], v: &[f64], xp: &[f64], vp: &[f64]) -> PairGradient {
        let s = |g: Vec<f64>| g.into_iter().map(|c| self.eps * c).collect();
        PairGradient {
            x: s(self.lyap.grad_x_w(x, v)),
            v: s(self.lyap.grad_v_w(x, v)),
            xp: s(self.lyap.grad_x_w(xp, vp)),
            vp: s(self.lyap.grad_v_w(xp, vp)),
        }
    }

    fn sync_hessian(&self, x: &[f64], v: &[f64], xp: &[f64], vp: &[f64]) -> Vec<f64> {
        let a = self.lyap.hess_v_w(x, v);
        let b = self.lyap.hess_v_w(xp, vp);
        a.iter().zip(&b).map(|(s, t)| self.eps * (s + t)).collect()
    }
}

/// Pointwise product of two pair functions.
pub struct ProductFn<'a, A: PairFunction + ?Sized, B: PairFunction + ?Sized>(pub &'a A, pub &'a B);

impl<A: PairFunction + ?Sized, B: PairFunction + ?Sized> PairFunction for ProductFn<'_, A, B> {
    fn value(&self, x: &[f64], v: &[f64], xp: &[f64], vp: &[f64]) -> f64 {
        self.0.value(x, v, xp, vp) * self.1.value(x, v, xp, vp)
    }

    fn gradient(&self, x: &[f64], v: &[f64], xp: &[f64], vp: &[f64]) -> PairGradient {
        let (a, b) = (self.0.value(x, v, xp, vp), self.1.value(x, v, xp, vp));
        self.0.gradient(x, v, xp, vp).combine(b, &self.1.gradient(x, v, xp, vp), a)
    }

    fn sync_hessian(&self, x: &[f64], v: &[f64], xp: &[f64], vp: &[f64]) -> Vec<f64> {
        let d = v.len();
        let (a, b) = (self.0.value(x, v, xp, vp), self.1.value(x, v, xp, vp));
        let (ga, gb) = (self.0.gradient(x, v, xp, vp).sync(), self.1.gradient(x, v, xp, vp).sync());
        let (ha, hb) = (self.0.sync_hessian(x, v, xp, vp), self.1.sync_hessian(x, v, xp, vp));
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let k = i * d + j;
                out[k] = a * hb[k] + b * ha[k] + ga[i] * gb[j] + gb[i] * ga[j];
            }
        }
        out
    }
}

/// `F = g(x, v) + h(x', v')`.
pub struct SeparableFn<'a, G: TestFunction + ?Sized, H: TestFunction + ?Sized>(pub &'a G, pub &'a H);

impl<G: TestFunction + ?Sized, H: TestFunction + ?Sized> PairFunction for SeparableFn<'_, G, H> {
    fn value(&self, x: &[f64], v: &[f64], xp: &[f64], vp: &[f64]) -> f64 {
        self.0.value(x, v) + self.1.value(xp, vp)
    }

    fn gradient(&self, x: &[f64], v: &[f64], xp: &[f64], vp: &[f64]) -> PairGradient {
        PairGradient { x: self.0.grad_x(x, v), v: self.0.grad_v(x, v), xp: self.1.grad_x(xp, vp), vp: self.1.grad_v(xp, vp) }
    }

    fn sync_hessian(&self, x: &[f64], v: &[f64], xp: &[f64], vp: &[f64]) -> Vec<f64> {
        let (a, b) = (self.0.hess_v(x, v), self.1.hess_v(xp, vp));
        a.iter().zip(&b).map(|(s, t)| s + t).collect()
    }
}

/// The Lyapunov function `W` as a test function.
impl TestFunction for LyapunovSpec {
    fn value(&self, x: &[f64], v: &[f64]) -> f64 {
        self.w(x, v)
    }
    fn grad_x(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        self.grad_x_w(x, v)
    }
    fn grad_v(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        self.grad_v_w(x, v)
    }
    fn hess_v(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        self.hess_v_w(x, v)
    }
}

/// `exp(-|v - center|^2 / (2 width^2))`, independent of `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBump {
    pub center: Vec<f64>,
    pub width: f64,
}

impl TestFunction for GaussianBump {
    fn value(&self, _x: &[f64], v: &[f64]) -> f64 {
        let r2: f64 = v.iter().zip(&self.center).map(|(a, b)| (a - b).powi(2)).sum();
        (-r2 / (2.0 * self.width * self.width)).exp()
    }
    fn grad_x(&self, x: &[f64], _v: &[f64]) -> Vec<f64> {
        vec![0.0; x.len()]
    }
    fn grad_v(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let g = self.value(x, v);
        let w2 = self.width * self.width;
        v.iter().zip(&self.center).map(|(a, b)| -g * (a - b) / w2).collect()
    }
    fn hess_v(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let d = v.len();
        let g = self.value(x, v);
        let w2 = self.width * self.width;
        let dv: Vec<f64> = v.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = g * (dv[i] * dv[j] / (w2 * w2) - if i == j { 1.0 / w2 } else { 0.0 });
            }
        }
        out
    }
}

/// `<c, v> + |v|^2 * k`, handy for closed-form checks.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticInV {
    pub c: Vec<f64>,
    pub k: f64,
}

impl TestFunction for QuadraticInV {
    fn value(&self, _x: &[f64], v: &[f64]) -> f64 {
        dot(&self.c, v) + self.k * dot(v, v)
    }
    fn grad_x(&self, x: &[f64], _v: &[f64]) -> Vec<f64> {
        vec![0.0; x.len()]
    }
    fn grad_v(&self, _x: &[f64], v: &[f64]) -> Vec<f64> {
        self.c.iter().zip(v).map(|(c, vi)| c + 2.0 * self.k * vi).collect()
    }
    fn hess_v(&self, _x: &[f64], v: &[f64]) -> Vec<f64> {
        let d = v.len();
        (0..d * d).map(|k| if k / d == k % d { 2.0 * self.k } else { 0.0 }).collect()
    }
}
