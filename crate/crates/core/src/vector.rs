//! Small dense-vector helpers on `&[f64]`; dimensions here are tiny.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `a + s * b`
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn is_zero(a: &[f64]) -> bool {
    a.iter().all(|&x| x == 0.0)
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Truncation map `(x)_kappa = min(1, kappa/|x|) x`, with zero mapped to zero.
pub fn truncate(x: &[f64], kappa: f64) -> Vec<f64> {
    assert!(kappa > 0.0, "truncation threshold must be positive");
    let n = norm(x);
    if n == 0.0 || n <= kappa {
        x.to_vec()
    } else {
        scale(x, kappa / n)
    }
}

/// Unit vector in direction `x`, or zero when `|x|` is below `tol`.
pub fn unit_or_zero(x: &[f64], tol: f64) -> Vec<f64> {
    let n = norm(x);
    if n < tol {
        vec![0.0; x.len()]
    } else {
        scale(x, 1.0 / n)
    }
}
