//! The previsible prediction smoother and the one-sided first-exit
//! detectors.
//!
//! At index `i` the predictor uses only `Y_{⌊Tγ⌋}..Y_{i-1}`:
//!
//! ```text
//!   m_hat_{h,-i} = Σ_{j=⌊Tγ⌋}^{i-1} K((i-j)/h) Y_j
//!                / Σ_{j=⌊Tγ⌋}^{i-1} K((i-j)/h),
//! ```
//!
//! a convex combination of past observations since `K > 0`. Monitoring
//! starts at `⌊s0·T⌋` and signals at the first index where the predictor
//! strictly crosses the threshold in the configured direction; reaching the
//! horizon without a signal is a censored run, reported explicitly rather
//! than by sentinel.
//!
//! The bandwidth is either a fixed `ξ` (so `h = T/ξ`) or an adapted
//! step-function path from sequential cross-validation, in which case index
//! `i` uses the bandwidth in force at time fraction `i/T`.

use serde::{Deserialize, Serialize};

use crate::crossval::{floor_index, lag_weights, predictor_from_weights, BandwidthPath};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::noise::SamplePath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig {
    pub gamma: f64,
    pub s0: f64,
    pub threshold: f64,
    pub direction: Direction,
}

impl MonitorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Validation(format!(
                "gamma must lie in (0,1), got {}",
                self.gamma
            )));
        }
        if !(self.s0 > self.gamma && self.s0 <= 1.0) {
            return Err(Error::Validation(format!(
                "monitoring start s0 = {} must exceed gamma = {}",
                self.s0, self.gamma
            )));
        }
        if !self.threshold.is_finite() {
            return Err(Error::Validation("threshold must be finite".into()));
        }
        Ok(())
    }
}

/// Predictor window geometry for a standalone [`predict`] call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictConfig {
    pub gamma: f64,
    pub t: usize,
    /// Real-valued bandwidth; `h = T/ξ` under the grid parameterization.
    pub h: f64,
}

/// `m_hat_{h,-i}` from `y[..i-1]` (indices are 1-based). Requires a
/// nonempty window, i.e. `i ≥ ⌊Tγ⌋ + 1`.
pub fn predict(y: &[f64], kernel: &KernelSpec, cfg: &PredictConfig, i: usize) -> Result<f64> {
    let t = cfg.t;
    if t != y.len() {
        return Err(Error::Config(format!(
            "config horizon {t} does not match path length {}",
            y.len()
        )));
    }
    if !(cfg.h.is_finite() && cfg.h > 0.0) {
        return Err(Error::Validation(format!(
            "bandwidth must be positive, got {}",
            cfg.h
        )));
    }
    let low = (t as f64 * cfg.gamma).floor() as usize;
    if low < 1 {
        return Err(Error::Window(format!(
            "window start ⌊Tγ⌋ = {low} must be >= 1"
        )));
    }
    if i <= low {
        return Err(Error::Window(format!(
            "prediction at i = {i} has an empty window (starts at ⌊Tγ⌋ = {low})"
        )));
    }
    if i > t {
        return Err(Error::Index(format!("index {i} beyond horizon {t}")));
    }
    let kv = lag_weights(kernel, t, cfg.h);
    Ok(predictor_from_weights(y, &kv, low, i))
}

/// Bandwidth supplied to the detector: fixed `ξ` or an adapted path.
#[derive(Debug, Clone)]
pub enum BandwidthChoice<'a> {
    Fixed { xi: f64 },
    Adaptive(&'a BandwidthPath),
}

/// Outcome of one monitored run. `signal_index` is present iff `signaled`;
/// the trajectory records the predictor over every monitored index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopResult {
    pub signal_index: Option<usize>,
    pub signaled: bool,
    pub trajectory: Vec<f64>,
}

/// Scan `i = ⌊s0·T⌋..T` in order and stop at the first strict threshold
/// crossing; equality does not signal.
pub fn run_detector(
    path: &SamplePath,
    kernel: &KernelSpec,
    cfg: &MonitorConfig,
    bandwidth: BandwidthChoice<'_>,
) -> Result<StopResult> {
    cfg.validate()?;
    let t = path.t();
    let low = (t as f64 * cfg.gamma).floor() as usize;
    let start = floor_index(t, cfg.s0);
    if low < 1 || start < low + 1 {
        return Err(Error::Window(format!(
            "horizon {t} too small for gamma = {}, s0 = {}",
            cfg.gamma, cfg.s0
        )));
    }
    match &bandwidth {
        BandwidthChoice::Fixed { xi } => {
            if !(xi.is_finite() && *xi > 0.0) {
                return Err(Error::Validation(format!("xi must be positive, got {xi}")));
            }
        }
        BandwidthChoice::Adaptive(bp) => {
            if bp.checkpoints.is_empty() || bp.checkpoints[0] > cfg.s0 {
                return Err(Error::Config(format!(
                    "bandwidth path must cover [s0, 1]; first checkpoint {:?} is past s0 = {}",
                    bp.checkpoints.first(),
                    cfg.s0
                )));
            }
        }
    }

    // weights per distinct bandwidth, materialized lazily: with a fixed ξ
    // there is a single table, with an adapted path one per step level
    let mut tables: Vec<(f64, Vec<f64>)> = Vec::new();

    let mut trajectory = Vec::with_capacity(t - start + 1);
    let mut signal_index = None;
    for i in start..=t {
        let xi = match &bandwidth {
            BandwidthChoice::Fixed { xi } => *xi,
            BandwidthChoice::Adaptive(bp) => bp.xi_at(i as f64 / t as f64)?,
        };
        let idx = match tables.iter().position(|(x, _)| *x == xi) {
            Some(pos) => pos,
            None => {
                tables.push((xi, lag_weights(kernel, t, t as f64 / xi)));
                tables.len() - 1
            }
        };
        let m_hat = predictor_from_weights(&path.y, &tables[idx].1, low, i);
        trajectory.push(m_hat);
        if signal_index.is_none() {
            let crossed = match cfg.direction {
                Direction::Upper => m_hat > cfg.threshold,
                Direction::Lower => m_hat < cfg.threshold,
            };
            if crossed {
                signal_index = Some(i);
            }
        }
    }
    Ok(StopResult {
        signal_index,
        signaled: signal_index.is_some(),
        trajectory,
    })
}
