//! The mean model `m0 + delta/sqrt(T)` with a piecewise-Lipschitz departure
//! function, the fixed design `x_n = G^{-1}(n/T)`, and the integral /
//! variation functionals of `delta` that the limit simulators consume.
//!
//! `delta` is right-continuous at its (finitely many) jumps, matching the
//! cadlag convention of the function spaces the limit theory lives in. The
//! first change point is `q1 = inf{s : delta(s) != 0}`; the theory requires
//! `q1 > gamma` for the window start `gamma` used downstream.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::KahanSum;

/// One piece of a piecewise function, in global coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Segment {
    Constant { value: f64 },
    /// `x ↦ intercept + slope·x` (global `x`, not segment-local).
    Linear { slope: f64, intercept: f64 },
    /// Samples joined by linear interpolation; the interpolant is Lipschitz
    /// with constant `max |Δy/Δx|`. `xs` must span the segment exactly.
    Tabulated { xs: Vec<f64>, ys: Vec<f64> },
}

impl Segment {
    fn validate(&self, lo: f64, hi: f64) -> Result<()> {
        match self {
            Segment::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::Validation("non-finite constant segment".into()));
                }
            }
            Segment::Linear { slope, intercept } => {
                if !slope.is_finite() || !intercept.is_finite() {
                    return Err(Error::Validation("non-finite linear segment".into()));
                }
            }
            Segment::Tabulated { xs, ys } => {
                if xs.len() < 2 || xs.len() != ys.len() {
                    return Err(Error::Validation(
                        "tabulated segment needs matching xs/ys with at least two samples".into(),
                    ));
                }
                if !xs.windows(2).all(|w| w[0] < w[1]) {
                    return Err(Error::Validation(
                        "tabulated xs must be strictly increasing".into(),
                    ));
                }
                if (xs[0] - lo).abs() > 1e-12 || (xs[xs.len() - 1] - hi).abs() > 1e-12 {
                    return Err(Error::Validation(format!(
                        "tabulated xs must span its segment [{lo}, {hi}]"
                    )));
                }
                if ys.iter().any(|y| !y.is_finite()) {
                    return Err(Error::Validation("non-finite tabulated value".into()));
                }
            }
        }
        Ok(())
    }

    fn value_at(&self, x: f64) -> f64 {
        match self {
            Segment::Constant { value } => *value,
            Segment::Linear { slope, intercept } => intercept + slope * x,
            Segment::Tabulated { xs, ys } => {
                if x <= xs[0] {
                    return ys[0];
                }
                if x >= xs[xs.len() - 1] {
                    return ys[ys.len() - 1];
                }
                let idx = xs.partition_point(|&v| v <= x) - 1;
                let frac = (x - xs[idx]) / (xs[idx + 1] - xs[idx]);
                ys[idx] + frac * (ys[idx + 1] - ys[idx])
            }
        }
    }

    /// Exact integral over `[a, b]` within the segment (trapezoid on the
    /// knots is exact for the linear interpolant).
    fn integral(&self, a: f64, b: f64) -> f64 {
        match self {
            Segment::Constant { value } => value * (b - a),
            Segment::Linear { slope, intercept } => {
                intercept * (b - a) + 0.5 * slope * (b * b - a * a)
            }
            Segment::Tabulated { xs, .. } => {
                let mut acc = 0.0;
                for i in 0..xs.len() - 1 {
                    let lo = xs[i].max(a);
                    let hi = xs[i + 1].min(b);
                    if lo < hi {
                        acc += 0.5 * (self.value_at(lo) + self.value_at(hi)) * (hi - lo);
                    }
                }
                acc
            }
        }
    }

    fn variation(&self, lo: f64, hi: f64) -> f64 {
        match self {
            Segment::Constant { .. } => 0.0,
            Segment::Linear { slope, .. } => slope.abs() * (hi - lo),
            Segment::Tabulated { ys, .. } => ys.windows(2).map(|w| (w[1] - w[0]).abs()).sum(),
        }
    }

    fn identically_zero(&self) -> bool {
        match self {
            Segment::Constant { value } => *value == 0.0,
            Segment::Linear { slope, intercept } => *slope == 0.0 && *intercept == 0.0,
            Segment::Tabulated { ys, .. } => ys.iter().all(|&y| y == 0.0),
        }
    }

    /// `inf{x in [lo, hi) : f(x) != 0}`, assuming the segment is not
    /// identically zero on the interval.
    fn first_nonzero(&self, lo: f64, _hi: f64) -> f64 {
        match self {
            Segment::Constant { .. } | Segment::Linear { .. } => lo,
            Segment::Tabulated { xs, ys } => {
                // interpolation between two zero knots is zero; between a
                // zero and a nonzero knot it is nonzero immediately after
                // the zero knot
                let mut last_zero = lo;
                for (x, y) in xs.iter().zip(ys) {
                    if *y != 0.0 {
                        return last_zero.max(lo);
                    }
                    last_zero = *x;
                }
                lo
            }
        }
    }

    fn sign_range(&self, lo: f64, hi: f64) -> (bool, bool) {
        // (takes a positive value, takes a negative value) on [lo, hi)
        let probe = |vals: &[f64]| {
            (
                vals.iter().any(|&v| v > 0.0),
                vals.iter().any(|&v| v < 0.0),
            )
        };
        match self {
            Segment::Constant { value } => probe(&[*value]),
            Segment::Linear { .. } => probe(&[self.value_at(lo), self.value_at(hi)]),
            Segment::Tabulated { ys, .. } => probe(ys),
        }
    }
}

/// Piecewise function on `[0, 1]`, right-continuous at its breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseFn {
    breakpoints: Vec<f64>,
    segments: Vec<Segment>,
}

impl PiecewiseFn {
    pub fn new(breakpoints: Vec<f64>, segments: Vec<Segment>) -> Result<Self> {
        if segments.len() != breakpoints.len() + 1 {
            return Err(Error::Validation(format!(
                "{} breakpoints require {} segments, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                segments.len()
            )));
        }
        if !breakpoints.iter().all(|b| b.is_finite() && *b > 0.0 && *b < 1.0) {
            return Err(Error::Validation(
                "breakpoints must lie strictly inside (0,1)".into(),
            ));
        }
        if !breakpoints.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Validation(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        let out = Self {
            breakpoints,
            segments,
        };
        for i in 0..out.segments.len() {
            let (lo, hi) = out.interval(i);
            out.segments[i].validate(lo, hi)?;
        }
        Ok(out)
    }

    pub fn constant(value: f64) -> Self {
        Self {
            breakpoints: vec![],
            segments: vec![Segment::Constant { value }],
        }
    }

    pub fn linear(slope: f64, intercept: f64) -> Self {
        Self {
            breakpoints: vec![],
            segments: vec![Segment::Linear { slope, intercept }],
        }
    }

    /// Single level shift from `before` to `after` at `at`.
    pub fn step(at: f64, before: f64, after: f64) -> Result<Self> {
        Self::new(
            vec![at],
            vec![
                Segment::Constant { value: before },
                Segment::Constant { value: after },
            ],
        )
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    fn interval(&self, i: usize) -> (f64, f64) {
        let lo = if i == 0 { 0.0 } else { self.breakpoints[i - 1] };
        let hi = if i == self.segments.len() - 1 {
            1.0
        } else {
            self.breakpoints[i]
        };
        (lo, hi)
    }

    fn segment_index(&self, x: f64) -> usize {
        // right-continuity: x equal to a breakpoint belongs to the segment
        // starting there
        self.breakpoints.partition_point(|&b| b <= x)
    }

    /// Right-continuous evaluation; `x` is clamped to `[0, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        self.segments[self.segment_index(x)].value_at(x)
    }

    /// `∫_0^u f(t) dt`, segment-wise with exact antiderivatives.
    pub fn integral_to(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::Domain(format!("integral endpoint {u} outside [0,1]")));
        }
        let mut acc = KahanSum::new();
        for (i, seg) in self.segments.iter().enumerate() {
            let (lo, hi) = self.interval(i);
            if lo >= u {
                break;
            }
            acc.add(seg.integral(lo, hi.min(u)));
        }
        Ok(acc.value())
    }

    /// Total variation: within-segment variation plus jump magnitudes.
    pub fn total_variation(&self) -> f64 {
        let mut tv = 0.0;
        for (i, seg) in self.segments.iter().enumerate() {
            let (lo, hi) = self.interval(i);
            tv += seg.variation(lo, hi);
        }
        for (i, &b) in self.breakpoints.iter().enumerate() {
            let left_limit = self.segments[i].value_at(b);
            let right_value = self.segments[i + 1].value_at(b);
            tv += (right_value - left_limit).abs();
        }
        tv
    }

    /// First change point `q1 = inf{x : f(x) != 0}`; `None` when `f ≡ 0`.
    pub fn first_nonzero(&self) -> Option<f64> {
        for (i, seg) in self.segments.iter().enumerate() {
            let (lo, hi) = self.interval(i);
            if !seg.identically_zero() {
                return Some(seg.first_nonzero(lo, hi));
            }
            // a jump to zero-valued segment is itself not a nonzero value
        }
        None
    }

    /// Whether all nonzero values share one sign (`f > 0` or `f < 0`
    /// wherever it departs from zero).
    pub fn is_sign_definite(&self) -> bool {
        let mut pos = false;
        let mut neg = false;
        for (i, seg) in self.segments.iter().enumerate() {
            let (lo, hi) = self.interval(i);
            let (p, n) = seg.sign_range(lo, hi);
            pos |= p;
            neg |= n;
        }
        !(pos && neg)
    }

    /// Sup-norm bound over segment endpoints and knots, recorded for
    /// diagnostics (the theory only needs boundedness).
    pub fn sup_bound(&self) -> f64 {
        let mut m: f64 = 0.0;
        for (i, seg) in self.segments.iter().enumerate() {
            let (lo, hi) = self.interval(i);
            match seg {
                Segment::Constant { value } => m = m.max(value.abs()),
                Segment::Linear { .. } => {
                    m = m.max(seg.value_at(lo).abs()).max(seg.value_at(hi).abs())
                }
                Segment::Tabulated { ys, .. } => {
                    for y in ys {
                        m = m.max(y.abs());
                    }
                }
            }
        }
        m
    }
}

/// Design distribution: observations sit at `x_n = G^{-1}(n/T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DesignDist {
    Identity,
    /// Quantile function tabulated as `(p, G^{-1}(p))` pairs covering
    /// `[0, 1]`, linearly interpolated; values must stay inside `[0, 1]`.
    TabulatedQuantile { ps: Vec<f64>, qs: Vec<f64> },
}

impl DesignDist {
    fn validate(&self) -> Result<()> {
        if let DesignDist::TabulatedQuantile { ps, qs } = self {
            if ps.len() < 2 || ps.len() != qs.len() {
                return Err(Error::Validation(
                    "design quantile table needs matching ps/qs, at least two rows".into(),
                ));
            }
            if !ps.windows(2).all(|w| w[0] < w[1]) || ps[0] != 0.0 || ps[ps.len() - 1] != 1.0 {
                return Err(Error::Validation(
                    "design ps must increase strictly from 0 to 1".into(),
                ));
            }
            if !qs.windows(2).all(|w| w[0] <= w[1])
                || qs.iter().any(|q| !(0.0..=1.0).contains(q))
            {
                return Err(Error::Validation(
                    "design quantiles must be nondecreasing within [0,1]".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn inverse(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("design argument {p} outside [0,1]")));
        }
        match self {
            DesignDist::Identity => Ok(p),
            DesignDist::TabulatedQuantile { ps, qs } => {
                let idx = ps.partition_point(|&v| v <= p).min(ps.len() - 1) - 1;
                let frac = (p - ps[idx]) / (ps[idx + 1] - ps[idx]);
                Ok(qs[idx] + frac * (qs[idx + 1] - qs[idx]))
            }
        }
    }
}

/// Mean model for one monitored sequence: `m(x_n) = m0(x_n) +
/// delta(x_n)/sqrt(T)` on the design `x_n = G^{-1}(n/T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeModel {
    pub m0: PiecewiseFn,
    pub delta: PiecewiseFn,
    pub design: DesignDist,
    pub t: usize,
}

impl ChangeModel {
    pub fn new(m0: PiecewiseFn, delta: PiecewiseFn, design: DesignDist, t: usize) -> Result<Self> {
        if t == 0 {
            return Err(Error::Validation("horizon T must be >= 1".into()));
        }
        design.validate()?;
        Ok(Self {
            m0,
            delta,
            design,
            t,
        })
    }

    /// Null model: `m0 ≡ 0`, `delta ≡ 0`, identity design.
    pub fn null(t: usize) -> Result<Self> {
        Self::new(
            PiecewiseFn::constant(0.0),
            PiecewiseFn::constant(0.0),
            DesignDist::Identity,
            t,
        )
    }

    /// `m(x_n)` for `n in 1..=T`.
    pub fn mean_at(&self, n: usize) -> Result<f64> {
        if n == 0 || n > self.t {
            return Err(Error::Index(format!(
                "observation index {n} outside 1..={}",
                self.t
            )));
        }
        let x = self.design.inverse(n as f64 / self.t as f64)?;
        Ok(self.m0.eval(x) + self.delta.eval(x) / (self.t as f64).sqrt())
    }

    /// The theorems require the first change point to lie past the window
    /// start: `q1 > gamma`. Only meaningful when `delta` is not null.
    pub fn validate_change_point(&self, gamma: f64) -> Result<()> {
        if let Some(q1) = self.delta.first_nonzero() {
            if q1 <= gamma {
                return Err(Error::Validation(format!(
                    "first change point q1 = {q1} must exceed gamma = {gamma}"
                )));
            }
        }
        Ok(())
    }

    /// Optional check that `delta` departs from zero with one sign only.
    pub fn validate_sign(&self) -> Result<()> {
        if self.delta.is_sign_definite() {
            Ok(())
        } else {
            Err(Error::Validation(
                "delta takes both signs; the detection theory assumes a one-sided departure"
                    .into(),
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step01() -> PiecewiseFn {
        PiecewiseFn::step(0.5, 0.0, 1.0).unwrap()
    }

    #[test]
    fn eval_is_right_continuous() {
        let f = step01();
        assert_eq!(f.eval(0.5), 1.0);
        assert_eq!(f.eval(0.4999999), 0.0);
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.eval(1.0), 1.0);
    }

    #[test]
    fn mean_at_examples() {
        let null = ChangeModel::null(100).unwrap();
        assert_eq!(null.mean_at(37).unwrap(), 0.0);

        let drift = ChangeModel::new(
            PiecewiseFn::constant(0.0),
            PiecewiseFn::constant(1.0),
            DesignDist::Identity,
            100,
        )
        .unwrap();
        assert!((drift.mean_at(50).unwrap() - 0.1).abs() < 1e-15);

        let stepm = ChangeModel::new(
            PiecewiseFn::constant(0.0),
            PiecewiseFn::step(0.5, 0.0, 2.0).unwrap(),
            DesignDist::Identity,
            100,
        )
        .unwrap();
        // delta(0.6) = 2, scaled by 1/sqrt(100)
        assert!((stepm.mean_at(60).unwrap() - 0.2).abs() < 1e-15);
        assert!(stepm.mean_at(0).is_err());
        assert!(stepm.mean_at(101).is_err());
    }

    #[test]
    fn integral_examples() {
        assert_eq!(PiecewiseFn::constant(0.0).integral_to(0.7).unwrap(), 0.0);
        assert!((PiecewiseFn::constant(1.0).integral_to(0.7).unwrap() - 0.7).abs() < 1e-15);
        assert!((step01().integral_to(0.75).unwrap() - 0.25).abs() < 1e-15);
        assert!(step01().integral_to(1.2).is_err());
    }

    #[test]
    fn variation_examples() {
        assert_eq!(PiecewiseFn::constant(3.0).total_variation(), 0.0);
        assert_eq!(step01().total_variation(), 1.0);

        // linear 0 -> 2 rising to 1.6 at 0.8, jump down to 0, then flat:
        // 1.6 (rise) + 1.6 (jump) + 0 = 3.2
        let f = PiecewiseFn::new(
            vec![0.8],
            vec![
                Segment::Linear {
                    slope: 2.0,
                    intercept: 0.0,
                },
                Segment::Constant { value: 0.0 },
            ],
        )
        .unwrap();
        assert!((f.total_variation() - 3.2).abs() < 1e-12);

        // independent enumeration oracle: summed |Δf| over a dense grid
        let n = 400_000;
        let mut tv = 0.0;
        let mut prev = f.eval(0.0);
        for i in 1..=n {
            let v = f.eval(i as f64 / n as f64);
            tv += (v - prev).abs();
            prev = v;
        }
        assert!((tv - 3.2).abs() < 1e-4);
    }

    #[test]
    fn riemann_koksma_bound() {
        let deltas = [step01(), PiecewiseFn::linear(2.0, 0.0)];
        for delta in &deltas {
            let v = delta.total_variation();
            for t in [10usize, 100, 1000] {
                for k in 1..=20 {
                    let u = k as f64 / 20.0;
                    let mut sum = 0.0;
                    let upper = (t as f64 * u).floor() as usize;
                    for i in 1..=upper {
                        sum += delta.eval(i as f64 / t as f64);
                    }
                    let riemann = sum / t as f64;
                    let integral = delta.integral_to(u).unwrap();
                    assert!(
                        (riemann - integral).abs() <= v / t as f64 + 1e-12,
                        "Koksma violated at T={t}, u={u}"
                    );
                }
            }
        }
    }

    #[test]
    fn first_nonzero_and_sign() {
        assert_eq!(PiecewiseFn::constant(0.0).first_nonzero(), None);
        assert_eq!(step01().first_nonzero(), Some(0.5));
        assert_eq!(PiecewiseFn::linear(2.0, 0.0).first_nonzero(), Some(0.0));
        assert!(step01().is_sign_definite());

        let mixed = PiecewiseFn::new(
            vec![0.5],
            vec![
                Segment::Constant { value: 1.0 },
                Segment::Constant { value: -1.0 },
            ],
        )
        .unwrap();
        assert!(!mixed.is_sign_definite());

        let model = ChangeModel::new(
            PiecewiseFn::constant(0.0),
            step01(),
            DesignDist::Identity,
            100,
        )
        .unwrap();
        assert!(model.validate_change_point(0.1).is_ok());
        assert!(model.validate_change_point(0.5).is_err());
        assert!(model.validate_sign().is_ok());
    }

    #[test]
    fn tabulated_segment_roundtrip() {
        let f = PiecewiseFn::new(
            vec![],
            vec![Segment::Tabulated {
                xs: vec![0.0, 0.25, 0.5, 1.0],
                ys: vec![0.0, 1.0, 1.0, 0.0],
            }],
        )
        .unwrap();
        assert!((f.eval(0.125) - 0.5).abs() < 1e-15);
        // trapezoid areas: 0.125 + 0.25 + 0.25
        assert!((f.integral_to(1.0).unwrap() - 0.625).abs() < 1e-15);
        assert!((f.total_variation() - 2.0).abs() < 1e-15);
        assert_eq!(f.first_nonzero(), Some(0.0));

        let zero_then_rise = PiecewiseFn::new(
            vec![],
            vec![Segment::Tabulated {
                xs: vec![0.0, 0.4, 0.6, 1.0],
                ys: vec![0.0, 0.0, 2.0, 2.0],
            }],
        )
        .unwrap();
        assert_eq!(zero_then_rise.first_nonzero(), Some(0.4));
    }

    #[test]
    fn mean_reduces_to_m0_without_change() {
        let m0 = PiecewiseFn::new(
            vec![0.3],
            vec![
                Segment::Linear {
                    slope: 1.0,
                    intercept: 0.0,
                },
                Segment::Constant { value: 0.3 },
            ],
        )
        .unwrap();
        let model = ChangeModel::new(
            m0.clone(),
            PiecewiseFn::constant(0.0),
            DesignDist::Identity,
            50,
        )
        .unwrap();
        for n in 1..=50 {
            assert_eq!(model.mean_at(n).unwrap(), m0.eval(n as f64 / 50.0));
        }
    }

    #[test]
    fn tabulated_quantile_design() {
        let design = DesignDist::TabulatedQuantile {
            ps: vec![0.0, 0.5, 1.0],
            qs: vec![0.0, 0.25, 1.0],
        };
        assert_eq!(design.inverse(0.5).unwrap(), 0.25);
        assert_eq!(design.inverse(1.0).unwrap(), 1.0);
        assert!((design.inverse(0.75).unwrap() - 0.625).abs() < 1e-15);

        // composing with the quantile moves the change point
        let model = ChangeModel::new(
            PiecewiseFn::constant(0.0),
            PiecewiseFn::step(0.5, 0.0, 2.0).unwrap(),
            design,
            100,
        )
        .unwrap();
        // x_80 = G^{-1}(0.8) = 0.625 >= 0.5, so the shift is active
        assert!((model.mean_at(80).unwrap() - 0.2).abs() < 1e-15);
        // x_50 = 0.25 < 0.5: still in control
        assert_eq!(model.mean_at(50).unwrap(), 0.0);
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(PiecewiseFn::new(vec![0.5, 0.4], vec![]).is_err());
        assert!(PiecewiseFn::new(
            vec![0.0],
            vec![
                Segment::Constant { value: 0.0 },
                Segment::Constant { value: 1.0 }
            ]
        )
        .is_err());
        assert!(PiecewiseFn::new(
            vec![0.5],
            vec![Segment::Constant { value: 0.0 }]
        )
        .is_err());
        assert!(PiecewiseFn::new(
            vec![],
            vec![Segment::Tabulated {
                xs: vec![0.0, 0.5],
                ys: vec![1.0, 2.0, 3.0]
            }]
        )
        .is_err());
        assert!(ChangeModel::null(0).is_err());
    }
}
