//! Sequential change-point monitoring with a one-sided kernel prediction
//! smoother, streaming cross-validated bandwidth selection, simulators for
//! the associated functional limit processes, and random-time-horizon
//! (Anscombe-type) stopping.
//!
//! The observation model is
//!
//! ```text
//!   Y_n = m0(x_n) + delta(x_n)/sqrt(T) + eps_n,     x_n = G^{-1}(n/T),
//! ```
//!
//! with a known baseline `m0`, a piecewise-Lipschitz departure `delta`
//! shrinking at the local-alternative rate, and strictly stationary
//! martingale-difference errors (iid, GARCH, ...). Detection uses the
//! previsible kernel predictor
//!
//! ```text
//!   m_hat_{h,-i} = sum_{j=⌊Tγ⌋}^{i-1} K((i-j)/h) Y_j
//!                / sum_{j=⌊Tγ⌋}^{i-1} K((i-j)/h),
//! ```
//!
//! whose bandwidth `h = T/ξ` is chosen by sequential leave-one-out
//! cross-validation over a finite grid of `ξ` values. The scaled objective
//! `T·C_{T,s}(h)` converges to a stochastic-integral process `L_ξ(s)`
//! driven by `B_δ^σ = ∫δ dλ + σB`; the [`limits`] module simulates those
//! limit objects so that the [`harness`] can check the convergence claims
//! by Monte Carlo at desk scale.

pub mod anscombe;
pub mod change_model;
pub mod config;
pub mod crossval;
pub mod error;
pub mod harness;
pub mod kernel;
pub mod limits;
pub mod monitor;
pub mod noise;
pub mod numeric;
pub mod verify;

pub use error::{Error, Result};
