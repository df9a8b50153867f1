//! Smoothing kernels and their normalizers.
//!
//! Kernels live on `[0, ∞)` and must be Lipschitz, bounded and *strictly*
//! positive — positivity keeps the predictor denominators bounded away from
//! zero on the monitoring window. Compactly supported kernels
//! (Epanechnikov and friends) are therefore not admitted.
//!
//! Two normalizers appear throughout: the discrete
//!
//! ```text
//!   N_T(w) = (1/T) Σ_{j=⌊Tγ⌋}^{⌊Tw⌋-1} K(⌊Tw⌋/h - j/h),   h = T/ξ,
//! ```
//!
//! and its limit `N(w) = ∫_γ^w K(ξ(w-z)) dz`. Since both menu kernels
//! decrease monotonically from 1 to 0, their total variation on `[0, ∞)`
//! is 1 and Koksma's theorem bounds `|N_T(w) - N(w)|` by `V(K)/T`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::adaptive_simpson;

const QUAD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// `K(x) = exp(-x)`
    Exponential,
    /// `K(x) = exp(-x²/2)`
    HalfGaussian,
}

/// A kernel together with the constants the theory needs: a Lipschitz
/// constant, the sup bound `‖K‖_∞`, and the total variation `V(K)` used in
/// the Koksma bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub lipschitz_const: f64,
    pub total_variation: f64,
    pub sup_bound: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily) -> Self {
        let lipschitz_const = match family {
            // sup |K'| = 1 at x = 0
            KernelFamily::Exponential => 1.0,
            // sup |x e^{-x²/2}| = e^{-1/2} at x = 1
            KernelFamily::HalfGaussian => (-0.5f64).exp(),
        };
        Self {
            family,
            lipschitz_const,
            total_variation: 1.0,
            sup_bound: 1.0,
        }
    }

    /// Kernel selected by its config-file name.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "exponential" => Ok(Self::new(KernelFamily::Exponential)),
            "half_gaussian" => Ok(Self::new(KernelFamily::HalfGaussian)),
            other => Err(Error::Validation(format!(
                "unknown kernel family {other:?} (expected \"exponential\" or \"half_gaussian\")"
            ))),
        }
    }

    /// `K(x)` for `x ≥ 0`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::Domain(format!(
                "kernel argument {x} outside [0, inf)"
            )));
        }
        Ok(self.k(x))
    }

    /// Unchecked evaluation on the hot path; callers guarantee `x ≥ 0`.
    #[inline]
    pub(crate) fn k(&self, x: f64) -> f64 {
        debug_assert!(x >= 0.0);
        match self.family {
            KernelFamily::Exponential => (-x).exp(),
            KernelFamily::HalfGaussian => (-0.5 * x * x).exp(),
        }
    }

    /// Closed-form antiderivative `∫_0^a K(t) dt` where the family admits
    /// one; `None` routes callers to adaptive quadrature.
    fn antiderivative(&self, a: f64) -> Option<f64> {
        match self.family {
            KernelFamily::Exponential => Some(1.0 - (-a).exp()),
            KernelFamily::HalfGaussian => {
                // ∫_0^a e^{-t²/2} dt = sqrt(π/2) erf(a/√2)
                Some((std::f64::consts::PI / 2.0).sqrt() * statrs::function::erf::erf(a / std::f64::consts::SQRT_2))
            }
        }
    }
}

/// Window geometry shared by the normalizers: `ξ = lim T/h`, the window
/// start `γ`, and the horizon `T` used by the discrete version.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizerConfig {
    pub xi: f64,
    pub gamma: f64,
    pub t: usize,
}

impl NormalizerConfig {
    pub fn new(xi: f64, gamma: f64, t: usize) -> Result<Self> {
        if !(xi.is_finite() && xi > 0.0) {
            return Err(Error::Validation(format!("xi must be positive, got {xi}")));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::Validation(format!(
                "gamma must lie in (0,1), got {gamma}"
            )));
        }
        if t == 0 {
            return Err(Error::Validation("horizon T must be >= 1".into()));
        }
        Ok(Self { xi, gamma, t })
    }

    /// Real-valued bandwidth `h = T/ξ`; used in kernel arguments without
    /// rounding.
    pub fn bandwidth(&self) -> f64 {
        self.t as f64 / self.xi
    }
}

/// Discrete normalizer `N_T(w)`. An empty summation range yields 0.
pub fn normalizer_discrete(spec: &KernelSpec, cfg: &NormalizerConfig, w: f64) -> Result<f64> {
    if w < cfg.gamma {
        return Err(Error::Domain(format!(
            "w = {w} below window start gamma = {}",
            cfg.gamma
        )));
    }
    let t = cfg.t as f64;
    let h = cfg.bandwidth();
    let upper = (t * w).floor(); // ⌊Tw⌋
    let lower = (t * cfg.gamma).floor(); // ⌊Tγ⌋
    let mut sum = 0.0;
    let mut j = lower;
    while j <= upper - 1.0 {
        sum += spec.k((upper - j) / h);
        j += 1.0;
    }
    Ok(sum / t)
}

/// Limiting normalizer `N(w) = ∫_γ^w K(ξ(w-z)) dz`.
pub fn normalizer_limit(spec: &KernelSpec, cfg: &NormalizerConfig, w: f64) -> Result<f64> {
    if w < cfg.gamma {
        return Err(Error::Domain(format!(
            "w = {w} below window start gamma = {}",
            cfg.gamma
        )));
    }
    // substituting t = ξ(w - z): N(w) = (1/ξ) ∫_0^{ξ(w-γ)} K(t) dt
    let a = cfg.xi * (w - cfg.gamma);
    match spec.antiderivative(a) {
        Some(v) => Ok(v / cfg.xi),
        None => Ok(adaptive_simpson(&|z| spec.k(cfg.xi * (w - z)), cfg.gamma, w, QUAD_TOL)),
    }
}
