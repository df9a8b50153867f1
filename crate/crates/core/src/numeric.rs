//! Numeric helpers: compensated summation, adaptive quadrature, and the
//! handful of sample statistics the harness needs.

use crate::error::{Error, Result};

/// Kahan compensated accumulator. Running CV sums add thousands of terms of
/// mixed magnitude; compensation keeps the incremental path reproducible
/// against the brute-force oracle at 1e-12 relative.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance
/// `tol`. Recursion depth is capped; the cap is generous enough for the
/// integrands in this crate (smooth away from interval endpoints).
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let c = 0.5 * (a + b);
    let fa = f(a);
    let fb = f(b);
    let fc = f(c);
    let whole = simpson(a, b, fa, fc, fb);
    simpson_step(f, a, b, fa, fc, fb, whole, tol, 60)
}

#[inline]
fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fc: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let c = 0.5 * (a + b);
    let lm = 0.5 * (a + c);
    let rm = 0.5 * (c + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, c, fa, flm, fc);
    let right = simpson(c, b, fc, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, c, fa, flm, fc, left, 0.5 * tol, depth - 1)
            + simpson_step(f, c, b, fc, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    let mut acc = KahanSum::new();
    for &x in xs {
        acc.add(x);
    }
    acc.value() / xs.len() as f64
}

/// Unbiased sample variance (ddof = 1).
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let mut acc = KahanSum::new();
    for &x in xs {
        acc.add((x - m) * (x - m));
    }
    acc.value() / (xs.len() as f64 - 1.0)
}

/// Linear-interpolation quantile (R type 7) of an already sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::Domain("quantile of empty sample".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!("quantile level {q} outside [0,1]")));
    }
    let n = sorted.len();
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// Interquartile range of an unsorted sample.
pub fn iqr(xs: &[f64]) -> Result<f64> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in iqr"));
    Ok(quantile_sorted(&v, 0.75)? - quantile_sorted(&v, 0.25)?)
}
