//! Random time-horizon machinery: stopping-time families `{τ_a : a > 0}`
//! satisfying the ratio condition `τ_a/a → λ`, the random change of time
//! `Φ(s) = (τ_a/T')·s` with `T' = ⌈a⌉`, randomly stopped CV evaluations,
//! and Monte Carlo diagnostics for `λ`.
//!
//! The embedding convention: data are generated once at horizon `T'` and
//! the stopped process is read through the time change,
//! `C̃_{τ_a}(s) = C̃_{T'}((τ_a/T')·s)`. This requires `τ_a ≤ T'` (the
//! `λ ≤ 1` regime); larger stopping times are rejected as unsupported
//! rather than extrapolated. When `Φ(s)` falls below the monitoring start
//! the evaluation is reported as a below-start marker, not fabricated.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::crossval::{evaluate_point, CvConfig};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::noise::{gen_errors, replicate_rng, ErrorConfig, GarchParams, Innovation, NoiseKind};
use rand_distr::{Distribution, StandardNormal};

/// Increment/observation streams with known mean and variance, enough for
/// the stopping families implemented here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IncrementKind {
    Constant { value: f64 },
    Gaussian { mean: f64, sd: f64 },
}

impl IncrementKind {
    pub fn mean(&self) -> f64 {
        match self {
            IncrementKind::Constant { value } => *value,
            IncrementKind::Gaussian { mean, .. } => *mean,
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            IncrementKind::Constant { .. } => 0.0,
            IncrementKind::Gaussian { sd, .. } => sd * sd,
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            IncrementKind::Constant { value } => *value,
            IncrementKind::Gaussian { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
        }
    }
}

/// First passage of the random walk over the level `a`:
/// `τ_a = inf{T : S_T > a}` (strict). Satisfies `τ_a/a → 1/μ`.
/// Generation is capped at `100·a/|μ|` steps.
pub fn first_passage_tau(
    increments: &IncrementKind,
    a: f64,
    seed: u64,
    replicate: u64,
) -> Result<u64> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::Validation(format!("level a must be positive, got {a}")));
    }
    let mu = increments.mean();
    if mu == 0.0 {
        return Err(Error::Validation(
            "first-passage increments need nonzero mean".into(),
        ));
    }
    let cap = (100.0 * a / mu.abs()).ceil() as u64;
    let mut rng = replicate_rng(seed, replicate);
    let mut sum = 0.0;
    let mut t = 0u64;
    loop {
        t += 1;
        sum += increments.sample(&mut rng);
        if sum > a {
            return Ok(t);
        }
        if t >= cap {
            return Err(Error::NonTermination(format!(
                "no passage of level {a} within {cap} steps (drift {mu})"
            )));
        }
    }
}

/// Sequential-estimation stopping: sample until the dispersion of the
/// running sample mean drops to `c_a = c0/√a`,
/// `τ_a = inf{n ≥ 2 : σ̂_n/√n ≤ c_a}` with `σ̂_n` the running sample
/// standard deviation (ddof = 1). With `known_sigma` the dispersion
/// estimate is replaced by `1/√n`, giving `τ_a = ⌈a⌉` for `c0 = 1`.
/// The ratio limit is `σ²/c0²`, which may exceed 1 — valid for the
/// λ-diagnostics but rejected by the stopped-CV embedding.
pub fn dispersion_tau(
    stream: &IncrementKind,
    c0: f64,
    a: f64,
    known_sigma: bool,
    seed: u64,
    replicate: u64,
) -> Result<u64> {
    if !(c0.is_finite() && c0 > 0.0) {
        return Err(Error::Validation(format!("c0 must be positive, got {c0}")));
    }
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::Validation(format!("level a must be positive, got {a}")));
    }
    let c_a = c0 / a.sqrt();
    let sigma2 = if known_sigma { 1.0 } else { stream.variance() };
    let cap = ((100.0 * a * sigma2 / (c0 * c0)).ceil() as u64).max(2);
    let mut rng = replicate_rng(seed, replicate);
    // Welford running mean / M2
    let mut n = 0u64;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    loop {
        n += 1;
        let x = stream.sample(&mut rng);
        let d = x - mean;
        mean += d / n as f64;
        m2 += d * (x - mean);
        if n >= 2 {
            let sd_hat = if known_sigma {
                1.0
            } else {
                (m2 / (n as f64 - 1.0)).sqrt()
            };
            if sd_hat / (n as f64).sqrt() <= c_a {
                return Ok(n);
            }
        }
        if n >= cap {
            return Err(Error::NonTermination(format!(
                "dispersion never reached c_a = {c_a} within {cap} steps"
            )));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RiskStop {
    Stopped(u64),
    /// The risk path stayed at or below the limit through the cap.
    NoStop,
}

/// Immediate-termination rule: first `n` with `r_n > r̄`, scanned up to
/// `t_cap` (or the whole path when unbounded).
pub fn risk_limit_tau(risk_path: &[f64], r_bar: f64, t_cap: Option<u64>) -> RiskStop {
    let limit = t_cap
        .map(|c| (c as usize).min(risk_path.len()))
        .unwrap_or(risk_path.len());
    for (idx, &r) in risk_path.iter().take(limit).enumerate() {
        if r > r_bar {
            return RiskStop::Stopped(idx as u64 + 1);
        }
    }
    RiskStop::NoStop
}

/// A parameterized random-index family with its expected ratio limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopFamily {
    pub kind: StopKind,
    /// `λ` when the family has a deterministic ratio limit.
    pub lambda_expected: Option<f64>,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum StopKind {
    FirstPassage {
        increments: IncrementKind,
    },
    Dispersion {
        stream: IncrementKind,
        c0: f64,
        known_sigma: bool,
    },
    /// Risk measured as the running sample standard deviation of a GARCH
    /// stream; stops when it exceeds `r_bar` within the horizon `⌈a⌉`.
    RiskLimit {
        garch: GarchParams,
        r_bar: f64,
    },
    /// `τ_a = round(a·U)` with `U` uniform over `scales`, independent of
    /// any data. The ratio converges in distribution to the random `Λ`,
    /// not to a constant.
    RandomScale {
        scales: Vec<f64>,
    },
}

impl StopFamily {
    pub fn first_passage(increments: IncrementKind) -> Self {
        let mu = increments.mean();
        Self {
            kind: StopKind::FirstPassage { increments },
            lambda_expected: if mu > 0.0 { Some(1.0 / mu) } else { None },
            description: "first passage of a random walk".into(),
        }
    }

    /// Whether the ratio limit is a nondegenerate random variable `Λ`
    /// rather than a constant `λ`.
    pub fn random_lambda(&self) -> bool {
        matches!(self.kind, StopKind::RandomScale { .. })
    }
}

/// Draw one stopping time from the family at level `a`. For the risk-limit
/// family a no-stop outcome is reported as nontermination so the
/// diagnostics can account for it.
pub fn sample_tau(family: &StopFamily, a: f64, seed: u64, replicate: u64) -> Result<u64> {
    match &family.kind {
        StopKind::FirstPassage { increments } => first_passage_tau(increments, a, seed, replicate),
        StopKind::Dispersion {
            stream,
            c0,
            known_sigma,
        } => dispersion_tau(stream, *c0, a, *known_sigma, seed, replicate),
        StopKind::RiskLimit { garch, r_bar } => {
            let t_prime = a.ceil() as usize;
            let cfg = ErrorConfig {
                kind: NoiseKind::Garch(garch.clone()),
                innovation: Innovation::Gaussian,
                burn_in: crate::noise::DEFAULT_BURN_IN,
            };
            let eps = gen_errors(&cfg, t_prime, seed, replicate)?;
            let risk = running_sample_std(&eps);
            match risk_limit_tau(&risk, *r_bar, None) {
                RiskStop::Stopped(n) => Ok(n),
                RiskStop::NoStop => Err(Error::NonTermination(format!(
                    "risk stayed below {r_bar} through the horizon {t_prime}"
                ))),
            }
        }
        StopKind::RandomScale { scales } => {
            if scales.is_empty() || scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                return Err(Error::Validation(
                    "random-scale family needs positive scales".into(),
                ));
            }
            let mut rng = replicate_rng(seed, replicate);
            let idx = rng.random_range(0..scales.len());
            Ok(((a * scales[idx]).round() as u64).max(1))
        }
    }
}

/// Running sample standard deviation `σ̂_n` (ddof = 1); entries for `n = 1`
/// are 0 by convention so the vector aligns with 1-based time.
pub fn running_sample_std(xs: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let n = (i + 1) as f64;
        let d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
        out.push(if i == 0 { 0.0 } else { (m2 / (n - 1.0)).sqrt() });
    }
    out
}

/// The random change of time `Φ(s) = (τ/T')·s` embedding the stopped
/// process into the horizon-`T'` one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeChange {
    pub tau: u64,
    pub t_prime: u64,
    pub ratio: f64,
}

impl TimeChange {
    pub fn new(tau: u64, t_prime: u64) -> Result<Self> {
        if tau == 0 || t_prime == 0 {
            return Err(Error::Validation("tau and T' must be >= 1".into()));
        }
        if tau > t_prime {
            return Err(Error::Unsupported(format!(
                "tau = {tau} exceeds T' = {t_prime}: outside the λ ≤ 1 embedding"
            )));
        }
        Ok(Self {
            tau,
            t_prime,
            ratio: tau as f64 / t_prime as f64,
        })
    }

    pub fn phi(&self, s: f64) -> f64 {
        self.ratio * s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StoppedCv {
    Value(f64),
    /// `Φ(s)` fell below the monitoring start; no value is fabricated.
    BelowStart,
}

/// Evaluate the stopped scaled criterion `C̃_{τ}(s) = T'·C_{T', Φ(s)}(T'/ξ)`
/// on a horizon-`T'` path, reading the unstopped process at the
/// time-changed index `⌊T'·Φ(s)⌋`.
pub fn stopped_cv(
    y: &[f64],
    kernel: &KernelSpec,
    cfg: &CvConfig,
    xi: f64,
    tau: u64,
    s: f64,
) -> Result<StoppedCv> {
    let t_prime = y.len() as u64;
    let tc = TimeChange::new(tau, t_prime)?;
    if !(cfg.s0..=1.0).contains(&s) {
        return Err(Error::Domain(format!(
            "evaluation point s = {s} outside [s0, 1] = [{}, 1]",
            cfg.s0
        )));
    }
    let phi_s = tc.phi(s);
    if phi_s < cfg.s0 {
        return Ok(StoppedCv::BelowStart);
    }
    let point = evaluate_point(y, kernel, cfg, phi_s, xi)?;
    Ok(StoppedCv::Value(t_prime as f64 * point.c))
}

/// One row of the `λ` diagnostic table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaRow {
    pub a: f64,
    pub mean_ratio: f64,
    pub std_ratio: f64,
    pub completed: u64,
    pub failures: u64,
}

/// Monte Carlo estimates of `τ_a/a` per level. Nontermination outcomes are
/// counted, never silently dropped. Replicate `r` at level index `k` uses
/// the derived stream id `(k << 32) | r`.
pub fn lambda_diagnostic(
    family: &StopFamily,
    a_values: &[f64],
    reps: u64,
    seed: u64,
) -> Result<Vec<LambdaRow>> {
    if reps == 0 {
        return Err(Error::Validation("reps must be >= 1".into()));
    }
    if a_values.is_empty() {
        return Err(Error::Config("no levels supplied".into()));
    }
    let mut rows = Vec::with_capacity(a_values.len());
    for (k, &a) in a_values.iter().enumerate() {
        let mut ratios = Vec::with_capacity(reps as usize);
        let mut failures = 0u64;
        for r in 0..reps {
            let stream = ((k as u64) << 32) | r;
            match sample_tau(family, a, seed, stream) {
                Ok(tau) => ratios.push(tau as f64 / a),
                Err(Error::NonTermination(_)) => failures += 1,
                Err(e) => return Err(e),
            }
        }
        let mean_ratio = if ratios.is_empty() {
            f64::NAN
        } else {
            crate::numeric::mean(&ratios)
        };
        let std_ratio = if ratios.len() > 1 {
            crate::numeric::sample_variance(&ratios).sqrt()
        } else {
            0.0
        };
        rows.push(LambdaRow {
            a,
            mean_ratio,
            std_ratio,
            completed: ratios.len() as u64,
            failures,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelFamily;

    fn exp_kernel() -> KernelSpec {
        KernelSpec::new(KernelFamily::Exponential)
    }

    #[test]
    fn first_passage_deterministic_cases() {
        let two = IncrementKind::Constant { value: 2.0 };
        assert_eq!(first_passage_tau(&two, 10.0, 0, 0).unwrap(), 6);
        // strict inequality: 2·6 = 12 is not > 12
        assert_eq!(first_passage_tau(&two, 12.0, 0, 0).unwrap(), 7);
        assert!(first_passage_tau(&two, -1.0, 0, 0).is_err());
        let neg = IncrementKind::Constant { value: -1.0 };
        assert!(matches!(
            first_passage_tau(&neg, 10.0, 0, 0),
            Err(Error::NonTermination(_))
        ));
    }

    #[test]
    fn first_passage_ratio_near_half() {
        let inc = IncrementKind::Gaussian { mean: 2.0, sd: 1.0 };
        let mut ratios = Vec::new();
        for rep in 0..100u64 {
            let tau = first_passage_tau(&inc, 1e4, 7, rep).unwrap();
            ratios.push(tau as f64 / 1e4);
        }
        let m = crate::numeric::mean(&ratios);
        assert!((m - 0.5).abs() <= 0.02, "mean ratio {m}");
    }

    #[test]
    fn first_passage_overshoot_invariant() {
        // regenerate the identical stream and check S_{τ} > a >= S_{τ-1}
        let inc = IncrementKind::Gaussian { mean: 2.0, sd: 1.0 };
        for rep in 0..50u64 {
            let a = 100.0;
            let tau = first_passage_tau(&inc, a, 42, rep).unwrap();
            let mut rng = replicate_rng(42, rep);
            let mut sum = 0.0;
            let mut before = 0.0;
            for t in 1..=tau {
                before = sum;
                sum += inc.sample(&mut rng);
                let _ = t;
            }
            assert!(sum > a, "S_tau = {sum} must exceed {a}");
            assert!(before <= a, "S_(tau-1) = {before} must not exceed {a}");
        }
    }

    #[test]
    fn dispersion_known_sigma_hits_ceiling() {
        let stream = IncrementKind::Gaussian { mean: 0.0, sd: 1.0 };
        assert_eq!(dispersion_tau(&stream, 1.0, 10.0, true, 0, 0).unwrap(), 10);
        assert_eq!(dispersion_tau(&stream, 1.0, 7.3, true, 0, 0).unwrap(), 8);
    }

    #[test]
    fn dispersion_constant_stream_stops_at_two() {
        let stream = IncrementKind::Constant { value: 3.0 };
        assert_eq!(dispersion_tau(&stream, 1.0, 100.0, false, 0, 0).unwrap(), 2);
    }

    #[test]
    fn dispersion_ratio_tracks_sigma_squared() {
        // N(0, 4), c0 = 1: tau_a / a -> sigma^2/c0^2 = 4
        let stream = IncrementKind::Gaussian { mean: 0.0, sd: 2.0 };
        let mut ratios = Vec::new();
        for rep in 0..100u64 {
            let tau = dispersion_tau(&stream, 1.0, 1e4, false, 11, rep).unwrap();
            ratios.push(tau as f64 / 1e4);
        }
        let m = crate::numeric::mean(&ratios);
        assert!((m - 4.0).abs() / 4.0 <= 0.1, "mean ratio {m} not within 10% of 4");
    }

    #[test]
    fn risk_limit_examples() {
        assert_eq!(risk_limit_tau(&[0.0, 0.0, 0.0], 1.0, None), RiskStop::NoStop);
        assert_eq!(
            risk_limit_tau(&[0.5, 1.2, 0.3], 1.0, None),
            RiskStop::Stopped(2)
        );
        // cap hides the exceedance
        assert_eq!(risk_limit_tau(&[0.5, 1.2, 0.3], 1.0, Some(1)), RiskStop::NoStop);
    }

    #[test]
    fn risk_limit_garch_calibrated_frequency() {
        // r_bar = 1.15 · long-run sd, horizon 300, calibrated beforehand to
        // stop with frequency inside (0.2, 0.8)
        let family = StopFamily {
            kind: StopKind::RiskLimit {
                garch: GarchParams {
                    alpha0: 0.5,
                    alpha: vec![0.1],
                    beta: vec![0.3],
                },
                r_bar: 1.15 * (0.5f64 / 0.6).sqrt(),
            },
            lambda_expected: None,
            description: "risk-limit".into(),
        };
        let mut stops = 0;
        let reps = 200u64;
        for rep in 0..reps {
            match sample_tau(&family, 300.0, 5, rep) {
                Ok(_) => stops += 1,
                Err(Error::NonTermination(_)) => {}
                Err(e) => panic!("unexpected error {e}"),
            }
        }
        let freq = stops as f64 / reps as f64;
        assert!(
            (0.2..=0.8).contains(&freq),
            "stop frequency {freq} outside the calibrated band"
        );
    }

    #[test]
    fn time_change_contract() {
        let tc = TimeChange::new(6, 10).unwrap();
        assert!((tc.phi(0.5) - 0.3).abs() < 1e-15);
        assert!(TimeChange::new(11, 10).is_err());
        assert!(TimeChange::new(0, 10).is_err());
        // linearity of increments, exact on dyadic points
        let tc = TimeChange::new(3, 4).unwrap();
        assert_eq!(tc.phi(1.0) - tc.phi(0.5), tc.ratio * 0.5);
        for (s, sp) in [(0.3, 0.7), (0.21, 0.94)] {
            assert!((tc.phi(sp) - tc.phi(s) - tc.ratio * (sp - s)).abs() < 1e-15);
        }
    }

    #[test]
    fn stopped_cv_identity_with_full_tau() {
        let y: Vec<f64> = (1..=10).map(|j| j as f64).collect();
        let cfg = CvConfig::new(0.1, 0.2).unwrap();
        let full = stopped_cv(&y, &exp_kernel(), &cfg, 10.0, 10, 0.5).unwrap();
        let direct = evaluate_point(&y, &exp_kernel(), &cfg, 0.5, 10.0).unwrap();
        match full {
            StoppedCv::Value(v) => assert_eq!(v, 10.0 * direct.c),
            _ => panic!("tau = T' must evaluate"),
        }
    }

    #[test]
    fn stopped_cv_time_change_arithmetic() {
        // tau = 6, T' = 10, s = 0.5 evaluates at Φ(s) = 0.3
        let y: Vec<f64> = (1..=10).map(|j| j as f64).collect();
        let cfg = CvConfig::new(0.1, 0.2).unwrap();
        let stopped = stopped_cv(&y, &exp_kernel(), &cfg, 10.0, 6, 0.5).unwrap();
        let direct = evaluate_point(&y, &exp_kernel(), &cfg, 0.3, 10.0).unwrap();
        match stopped {
            StoppedCv::Value(v) => assert_eq!(v, 10.0 * direct.c),
            _ => panic!("Φ(s) = 0.3 is inside the monitoring window"),
        }
    }

    #[test]
    fn stopped_cv_prefix_rederivation() {
        // independent re-derivation: the evaluation at index ⌊T'·Φ(s)⌋ must
        // depend only on the data prefix up to that index
        let mut rng = replicate_rng(3, 0);
        let t = 40usize;
        let y: Vec<f64> = (0..t)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z
            })
            .collect();
        let cfg = CvConfig::new(0.1, 0.2).unwrap();
        let tau = 20u64;
        let s = 0.8;
        let base = stopped_cv(&y, &exp_kernel(), &cfg, 10.0, tau, s).unwrap();
        let cut = (t as f64 * (tau as f64 / t as f64) * s).floor() as usize;
        let mut prefix = y.clone();
        for v in prefix.iter_mut().skip(cut) {
            *v = 9e9;
        }
        let again = stopped_cv(&prefix, &exp_kernel(), &cfg, 10.0, tau, s).unwrap();
        assert_eq!(base, again, "stopped value must be a prefix functional");
    }

    #[test]
    fn stopped_cv_deterministic_drift_value() {
        // sigma = 0, delta ≡ d at horizon T': value at Φ = 0.5 is
        // -d²(⌊0.5T⌋ - ⌊0.2T⌋ + 1)/T (the T·L and T·Q terms combine)
        let t = 400usize;
        let d = 1.5;
        let y = vec![d / (t as f64).sqrt(); t];
        let cfg = CvConfig::new(0.1, 0.2).unwrap();
        let v = stopped_cv(&y, &exp_kernel(), &cfg, 10.0, 200, 1.0).unwrap();
        let count = (200 - 80 + 1) as f64;
        let expect = -d * d * count / t as f64;
        match v {
            StoppedCv::Value(got) => {
                assert!((got - expect).abs() < 1e-10, "got {got}, want {expect}")
            }
            _ => panic!("inside window"),
        }
    }

    #[test]
    fn stopped_cv_below_start_marker() {
        let y = vec![1.0; 100];
        let cfg = CvConfig::new(0.1, 0.5).unwrap();
        // Φ(0.5) = (10/100)·0.5 = 0.05 < s0
        let v = stopped_cv(&y, &exp_kernel(), &cfg, 10.0, 10, 0.5).unwrap();
        assert_eq!(v, StoppedCv::BelowStart);
        // tau beyond the horizon is outside the embedding
        assert!(matches!(
            stopped_cv(&y, &exp_kernel(), &cfg, 10.0, 101, 0.5),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn lambda_diagnostic_deterministic_family() {
        let family = StopFamily::first_passage(IncrementKind::Constant { value: 2.0 });
        assert_eq!(family.lambda_expected, Some(0.5));
        assert!(!family.random_lambda());
        let rows = lambda_diagnostic(&family, &[10.0, 100.0, 1000.0], 3, 0).unwrap();
        for row in &rows {
            // deterministic ratio (floor(a/2)+1)/a, tending to 0.5
            let expect = ((row.a / 2.0).floor() + 1.0) / row.a;
            assert!((row.mean_ratio - expect).abs() < 1e-12);
            assert_eq!(row.std_ratio, 0.0);
            assert_eq!(row.failures, 0);
        }
        assert!((rows[2].mean_ratio - 0.5).abs() < 2e-3);
    }

    #[test]
    fn lambda_diagnostic_gaussian_tightens_with_a() {
        let family = StopFamily::first_passage(IncrementKind::Gaussian { mean: 2.0, sd: 1.0 });
        let rows = lambda_diagnostic(&family, &[100.0, 1000.0, 10000.0], 60, 13).unwrap();
        let tols = [0.05, 0.02, 0.01];
        for (row, tol) in rows.iter().zip(tols) {
            assert!(
                (row.mean_ratio - 0.5).abs() <= tol,
                "a = {}: ratio {} off by more than {tol}",
                row.a,
                row.mean_ratio
            );
        }
        assert!(
            rows[2].std_ratio < rows[0].std_ratio,
            "ratio dispersion should shrink with a"
        );
    }

    #[test]
    fn lambda_diagnostic_random_scale_family() {
        let family = StopFamily {
            kind: StopKind::RandomScale {
                scales: vec![0.5, 1.0],
            },
            lambda_expected: None,
            description: "independent randomized horizon".into(),
        };
        assert!(family.random_lambda());
        let rows = lambda_diagnostic(&family, &[1000.0], 400, 21).unwrap();
        let row = &rows[0];
        // two-point ratio distribution: mean near 0.75, std near 0.25
        assert!((row.mean_ratio - 0.75).abs() < 0.05);
        assert!((row.std_ratio - 0.25).abs() < 0.05);
    }

    #[test]
    fn running_std_matches_direct() {
        let xs = [1.0, 4.0, 2.0, 8.0];
        let r = running_sample_std(&xs);
        assert_eq!(r[0], 0.0);
        for n in 2..=4 {
            let direct = crate::numeric::sample_variance(&xs[..n]).sqrt();
            assert!((r[n - 1] - direct).abs() < 1e-12);
        }
    }
}
