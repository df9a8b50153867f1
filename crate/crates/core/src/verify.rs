//! The acceptance suite: every verification criterion pinned in code with
//! its tolerance, runnable from `cargo test` (the `acceptance` target) and
//! from the CLI `verify` subcommand. Each criterion returns a pass/fail
//! report with the measured quantities.
//!
//! Oracles used by the criteria (brute-force CV, closed forms, quadrature)
//! live in this module and are written against the definitions directly,
//! independent of the incremental implementation paths they check.
//!
//! One measured finding, recorded once here because criteria 5 and 8
//! depend on it: at fixed `ξ` the scaled quadratic term does not vanish.
//! `T·Q_T(1)` carries a deterministic drift `σ²∫N₂/N² ≈ 4.46` (this
//! config) from its diagonal, and the off-diagonal remainder `T·Q^off` has
//! variance ≈ 4.4 *constant in T* (measured over T = 100..1600) and
//! correlation ≈ -0.93 with `T·L`, leaving `Var(T·C) ≈ 5` against
//! `Var(L_ξ(1)) = 17.8`. The distributional criteria for `T·C` therefore
//! cannot meet their stated KS bounds with either `Q` variant; they are
//! implemented exactly as stated and report, alongside the gating
//! statistic, the `T·L`-only distance — the object whose FCLT the theory
//! directly controls, and which does meet the stated tolerance. The
//! scaling probe (criterion 10) measures the same phenomenon as
//! `κ̂ ≈ 1` for `Q^off` against the claimed `T²` rate.

use rayon::prelude::*;

use crate::change_model::{ChangeModel, PiecewiseFn};
use crate::crossval::{argmin_grid, bandwidth_path, decompose, evaluate_point, CvConfig};
use crate::error::Result;
use crate::harness::{ks_two_sample, moment_row, run_mc, scaling_fit, McTask};
use crate::kernel::{normalizer_discrete, normalizer_limit, KernelFamily, KernelSpec, NormalizerConfig};
use crate::limits::{simulate_l_at, variance_oracle, LimitGridConfig};
use crate::monitor::{predict, PredictConfig};
use crate::noise::{gen_errors, gen_path, ErrorConfig, GarchParams, Innovation, NoiseKind};
use crate::numeric::{mean, sample_variance};

#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
}

impl CriterionReport {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} [{}] {} — {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.details
        )
    }
}

const NAMES: [(u32, &str); 11] = [
    (1, "Koksma normalizer bound"),
    (2, "Riemann delta bound"),
    (3, "CV oracle equivalence"),
    (4, "deterministic drift limit"),
    (5, "distributional FCLT"),
    (6, "Ito isometry variance"),
    (7, "Anscombe first-passage ratio"),
    (8, "random time-horizon FCLT"),
    (9, "GARCH generator moments"),
    (10, "Q scaling probe"),
    (11, "contract suite"),
];

pub fn criterion_ids() -> Vec<u32> {
    NAMES.iter().map(|(id, _)| *id).collect()
}

pub fn run_criterion(id: u32) -> CriterionReport {
    let name = NAMES
        .iter()
        .find(|(k, _)| *k == id)
        .map(|(_, n)| *n)
        .unwrap_or("unknown");
    let outcome = match id {
        1 => c1_koksma(),
        2 => c2_riemann(),
        3 => c3_cv_oracle(),
        4 => c4_deterministic_drift(),
        5 => c5_fclt(),
        6 => c6_ito_isometry(),
        7 => c7_anscombe_ratio(),
        8 => c8_stopped_fclt(),
        9 => c9_garch(),
        10 => c10_q_scaling(),
        11 => c11_contracts(),
        _ => Err(crate::error::Error::Config(format!(
            "no criterion with id {id}"
        ))),
    };
    match outcome {
        Ok((passed, details)) => CriterionReport {
            id,
            name,
            passed,
            details,
        },
        Err(e) => CriterionReport {
            id,
            name,
            passed: false,
            details: format!("errored: {e}"),
        },
    }
}

/// Run every criterion (or the listed subset) in order.
pub fn run_all(only: Option<&[u32]>) -> Vec<CriterionReport> {
    criterion_ids()
        .into_iter()
        .filter(|id| only.map(|ids| ids.contains(id)).unwrap_or(true))
        .map(run_criterion)
        .collect()
}

fn exp_kernel() -> KernelSpec {
    KernelSpec::new(KernelFamily::Exponential)
}

fn iid_unit() -> ErrorConfig {
    ErrorConfig {
        kind: NoiseKind::Iid { sigma: 1.0 },
        innovation: Innovation::Gaussian,
        burn_in: 0,
    }
}

fn null_limit_cfg(grid_points: usize) -> LimitGridConfig {
    LimitGridConfig {
        grid_points,
        sigma: 1.0,
        delta: PiecewiseFn::constant(0.0),
        kernel: exp_kernel(),
        xi: 10.0,
        gamma: 0.1,
        s0: 0.2,
        from_zero: false,
    }
}

// criterion 1: max over a 100-point w grid of |N_T - N| <= V(K)/T for
// T in {10, 100, 1000, 10000}, Exponential, xi = 10, gamma = 0.1
fn c1_koksma() -> Result<(bool, String)> {
    let spec = exp_kernel();
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for t in [10usize, 100, 1000, 10_000] {
        let cfg = NormalizerConfig::new(10.0, 0.1, t)?;
        let lo = 0.1 + 2.0 / t as f64;
        let mut max_err: f64 = 0.0;
        for k in 0..100 {
            let w = lo + (1.0 - lo) * k as f64 / 99.0;
            let d = normalizer_discrete(&spec, &cfg, w)?;
            let n = normalizer_limit(&spec, &cfg, w)?;
            max_err = max_err.max((d - n).abs());
        }
        let bound = spec.total_variation / t as f64;
        ok &= max_err <= bound;
        worst = worst.max(max_err * t as f64);
    }
    Ok((ok, format!("max T·|N_T - N| = {worst:.4} (bound 1.0)")))
}

// criterion 2: |T^{-1} Σ δ(i/T) - ∫δ| <= V(δ)/T at 20 u points,
// T in {10, 100, 1000}, for the step and linear departures
fn c2_riemann() -> Result<(bool, String)> {
    let deltas = [
        PiecewiseFn::step(0.5, 0.0, 1.0)?,
        PiecewiseFn::linear(2.0, 0.0),
    ];
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for delta in &deltas {
        let v = delta.total_variation();
        for t in [10usize, 100, 1000] {
            for k in 1..=20 {
                let u = k as f64 / 20.0;
                let upper = (t as f64 * u).floor() as usize;
                let mut sum = 0.0;
                for i in 1..=upper {
                    sum += delta.eval(i as f64 / t as f64);
                }
                let err = (sum / t as f64 - delta.integral_to(u)?).abs();
                ok &= err <= v / t as f64 + 1e-12;
                worst = worst.max(err * t as f64 / v);
            }
        }
    }
    Ok((ok, format!("max T·err/V(δ) = {worst:.4} (bound 1.0)")))
}

/// Brute-force CV decomposition straight from the definitions: every
/// predictor recomputed from scratch as the plain weighted ratio. This is
/// the independent oracle for the incremental path.
pub fn brute_force_cv(
    y: &[f64],
    kernel: &KernelSpec,
    gamma: f64,
    s0: f64,
    s: f64,
    xi: f64,
) -> (f64, f64, f64, f64) {
    let t = y.len();
    let tf = t as f64;
    let h = tf / xi;
    let low = (tf * gamma).floor() as usize;
    let start = (tf * s0).floor() as usize;
    let upper = (tf * s).floor() as usize;
    let mut cv = 0.0;
    let mut l = 0.0;
    let mut q = 0.0;
    let mut q_off = 0.0;
    for i in start..=upper {
        let mut num = 0.0;
        let mut den = 0.0;
        let mut diag = 0.0;
        for j in low..i {
            let w = kernel.eval((i - j) as f64 / h).expect("positive lag");
            num += w * y[j - 1];
            den += w;
            diag += w * w * y[j - 1] * y[j - 1];
        }
        let m_hat = num / den;
        cv += (y[i - 1] - m_hat) * (y[i - 1] - m_hat);
        l += y[i - 1] * m_hat;
        q += m_hat * m_hat;
        q_off += (num * num - diag) / (den * den);
    }
    (cv / tf, -2.0 * l / tf, q / tf, q_off / tf)
}

// criterion 3: incremental decompose vs the brute-force double loop,
// T = 50, 10 seeded paths, all grid cells, relative error <= 1e-10
fn c3_cv_oracle() -> Result<(bool, String)> {
    let t = 50usize;
    let model = ChangeModel::null(t)?;
    let noise = iid_unit();
    let kernel = exp_kernel();
    let cfg = CvConfig::new(0.1, 0.3)?;
    let s_grid: Vec<f64> = (0..8).map(|k| 0.3 + 0.1 * k as f64).collect();
    let xi_grid = [2.0, 5.0, 10.0, 20.0];
    let mut worst: f64 = 0.0;
    for rep in 0..10u64 {
        let path = gen_path(&model, &noise, 303, rep)?;
        let eval = decompose(&path.y, &kernel, &cfg, &s_grid, &xi_grid)?;
        for (r, &s) in s_grid.iter().enumerate() {
            for (c, &xi) in xi_grid.iter().enumerate() {
                let (cv, l, q, q_off) = brute_force_cv(&path.y, &kernel, 0.1, 0.3, s, xi);
                for (got, want) in [
                    (eval.cv[r][c], cv),
                    (eval.l[r][c], l),
                    (eval.q[r][c], q),
                    (eval.q_off[r][c], q_off),
                    (eval.c[r][c], l + q),
                ] {
                    let rel = (got - want).abs() / (1.0 + want.abs());
                    worst = worst.max(rel);
                }
            }
        }
    }
    Ok((worst <= 1e-10, format!("max relative error {worst:.3e} (bound 1e-10)")))
}

// criterion 4: sigma = 0, delta ≡ 1 drift: |T·L_T(s) + 2(s-s0)| <= 5/T and
// the sigma = 0 limit simulator returns -2(s-s0) within twice the grid step
fn c4_deterministic_drift() -> Result<(bool, String)> {
    let kernel = exp_kernel();
    let cfg = CvConfig::new(0.1, 0.2)?;
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for t in [200usize, 800] {
        let y = vec![1.0 / (t as f64).sqrt(); t];
        for s in [0.5, 0.75, 1.0] {
            let p = evaluate_point(&y, &kernel, &cfg, s, 10.0)?;
            let err = (t as f64 * p.l - (-2.0 * (s - 0.2))).abs();
            ok &= err <= 5.0 / t as f64;
            worst = worst.max(err * t as f64);
        }
    }
    let lim_cfg = LimitGridConfig {
        sigma: 0.0,
        delta: PiecewiseFn::constant(1.0),
        ..null_limit_cfg(2000)
    };
    let pts = [0.5, 0.75, 1.0];
    let vals = simulate_l_at(&lim_cfg, &pts, 0, 0)?;
    let mut sim_err: f64 = 0.0;
    for (&s, &v) in pts.iter().zip(&vals) {
        let err = (v - (-2.0 * (s - 0.2))).abs();
        ok &= err <= 2.0 / 2000.0;
        sim_err = sim_err.max(err);
    }
    Ok((
        ok,
        format!("finite-T max T·err = {worst:.4} (bound 5), simulator max err = {sim_err:.2e} (bound 1e-3)"),
    ))
}

/// Scaled finite-horizon samples at one evaluation point:
/// `(T·C, T·(L+Q^off), T·L)` per replicate.
fn finite_tc_sample(
    t: usize,
    s: f64,
    reps: u64,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let model = ChangeModel::null(t)?;
    let noise = iid_unit();
    let kernel = exp_kernel();
    let cfg = CvConfig::new(0.1, 0.2)?;
    let rows: Vec<(f64, f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let path = gen_path(&model, &noise, seed, rep)?;
            let p = evaluate_point(&path.y, &kernel, &cfg, s, 10.0)?;
            let tf = t as f64;
            Ok((tf * p.c, tf * (p.l + p.q_off), tf * p.l))
        })
        .collect::<Result<_>>()?;
    let mut full = Vec::with_capacity(rows.len());
    let mut off = Vec::with_capacity(rows.len());
    let mut l_only = Vec::with_capacity(rows.len());
    for (a, b, c) in rows {
        full.push(a);
        off.push(b);
        l_only.push(c);
    }
    Ok((full, off, l_only))
}

fn limit_l_sample(s: f64, grid: usize, reps: u64, seed: u64) -> Result<Vec<f64>> {
    let cfg = null_limit_cfg(grid);
    (0..reps)
        .into_par_iter()
        .map(|rep| Ok(simulate_l_at(&cfg, &[s], seed, rep)?[0]))
        .collect()
}

// criterion 5, faithfully as stated: two-sample KS between T·C_{T,1}(T/ξ)
// at T = 400 and the simulated limit at s = 1 is <= 0.08, with the
// distance decreasing monotonically (within 0.02) over T in {100,200,400}.
// The non-vanishing T·Q term (see the module docs) makes the bound
// unattainable; the T·L-only distance is reported alongside as the
// diagnosis.
fn c5_fclt() -> Result<(bool, String)> {
    let reps = 2000u64;
    let limit = limit_l_sample(1.0, 2000, reps, 510)?;
    let mut ks_full = Vec::new();
    let mut diag = String::new();
    for (k, t) in [100usize, 200, 400].into_iter().enumerate() {
        let (full, off, l_only) = finite_tc_sample(t, 1.0, reps, 520 + k as u64)?;
        ks_full.push(ks_two_sample(&full, &limit)?);
        if t == 400 {
            diag = format!(
                "diagnosis at T=400: KS(T·(L+Q^off)) = {:.3}, KS(T·L only) = {:.3} with Var(T·L) = {:.1} vs Var(limit) = {:.1}",
                ks_two_sample(&off, &limit)?,
                ks_two_sample(&l_only, &limit)?,
                sample_variance(&l_only),
                sample_variance(&limit),
            );
        }
    }
    let mut ok = ks_full[2] <= 0.08;
    for k in 1..ks_full.len() {
        ok &= ks_full[k] <= ks_full[k - 1] + 0.02;
    }
    Ok((
        ok,
        format!(
            "KS(T·C at T=100,200,400 vs limit) = {:.4}, {:.4}, {:.4} (bound 0.08 at T=400, monotone within 0.02); {diag}",
            ks_full[0], ks_full[1], ks_full[2]
        ),
    ))
}

// criterion 6: MC variance of the simulated limit at s = 1 over 1e4
// replications within 10% of the quadrature variance oracle
fn c6_ito_isometry() -> Result<(bool, String)> {
    let cfg = null_limit_cfg(2000);
    let oracle = variance_oracle(&cfg)?;
    let sample = limit_l_sample(1.0, 2000, 10_000, 600)?;
    let var = sample_variance(&sample);
    let rel = (var - oracle).abs() / oracle;
    Ok((
        rel <= 0.10,
        format!("MC variance {var:.4} vs oracle {oracle:.4}, relative gap {rel:.4} (bound 0.10)"),
    ))
}

// criterion 7: first passage with N(2,1) increments at a = 1e4:
// |mean(tau/a) - 0.5| <= 0.02 over 100 replications
fn c7_anscombe_ratio() -> Result<(bool, String)> {
    let inc = crate::anscombe::IncrementKind::Gaussian { mean: 2.0, sd: 1.0 };
    let ratios: Vec<f64> = (0..100u64)
        .into_par_iter()
        .map(|rep| Ok(crate::anscombe::first_passage_tau(&inc, 1e4, 700, rep)? as f64 / 1e4))
        .collect::<Result<_>>()?;
    let m = mean(&ratios);
    Ok((
        (m - 0.5).abs() <= 0.02,
        format!("mean ratio {m:.5} (target 0.5 ± 0.02)"),
    ))
}

// criterion 8, faithfully as stated: constructed deterministic family
// tau = ⌊a/2⌋ at T' = 400, stopped process C̃_{τ}(1) = T'·C_{T'}(Φ(1))
// vs the simulated limit at λ·1 = 0.5, KS <= 0.10. Carries the same
// non-vanishing T·Q obstruction as criterion 5; the T·L-only distance is
// reported as the diagnosis.
fn c8_stopped_fclt() -> Result<(bool, String)> {
    let t_prime = 400usize;
    let tau = 200u64;
    let reps = 2000u64;
    let tc = crate::anscombe::TimeChange::new(tau, t_prime as u64)?;
    let phi = tc.phi(1.0);
    let (full, _, l_only) = finite_tc_sample(t_prime, phi, reps, 801)?;
    let limit = limit_l_sample(0.5, 2000, reps, 802)?;
    let ks = ks_two_sample(&full, &limit)?;
    let ks_l = ks_two_sample(&l_only, &limit)?;
    Ok((
        ks <= 0.10,
        format!(
            "KS(stopped T'·C at Φ(1) = {phi}) = {ks:.4} (bound 0.10); diagnosis: KS(T'·L only) = {ks_l:.3}"
        ),
    ))
}

// criterion 9: GARCH(0.5, 0.1, 0.3): sample variance of 1e6 draws within
// 5% of alpha0/(1-alpha-beta); lag-1 autocorrelation within 3 robust SE
fn c9_garch() -> Result<(bool, String)> {
    let cfg = ErrorConfig {
        kind: NoiseKind::Garch(GarchParams {
            alpha0: 0.5,
            alpha: vec![0.1],
            beta: vec![0.3],
        }),
        innovation: Innovation::Gaussian,
        burn_in: 1000,
    };
    let eps = gen_errors(&cfg, 1_000_000, 900, 0)?;
    let target = 0.5 / 0.6;
    let var = sample_variance(&eps);
    let var_ok = (var - target).abs() / target <= 0.05;
    let num: f64 = eps.windows(2).map(|w| w[0] * w[1]).sum();
    let den: f64 = eps.iter().map(|e| e * e).sum();
    let r1 = num / den;
    let se = eps
        .windows(2)
        .map(|w| (w[0] * w[1]).powi(2))
        .sum::<f64>()
        .sqrt()
        / den;
    let acf_ok = r1.abs() <= 3.0 * se;
    Ok((
        var_ok && acf_ok,
        format!(
            "variance {var:.5} vs {target:.5} (±5%), lag-1 acf {r1:.5} vs 3·SE = {:.5}",
            3.0 * se
        ),
    ))
}

// criterion 10: scaling exponent of Q^off(1) over T in {100,...,800};
// stderr <= 0.15 is the gate, the estimate itself is recorded either way
fn c10_q_scaling() -> Result<(bool, String)> {
    let kernel = exp_kernel();
    let cfg = CvConfig::new(0.1, 0.2)?;
    let noise = iid_unit();
    let mut samples = Vec::new();
    for (k, t) in [100usize, 200, 400, 800].into_iter().enumerate() {
        let model = ChangeModel::null(t)?;
        let vals: Vec<f64> = (0..500u64)
            .into_par_iter()
            .map(|rep| {
                let path = gen_path(&model, &noise, 1000 + k as u64, rep)?;
                Ok(evaluate_point(&path.y, &kernel, &cfg, 1.0, 10.0)?.q_off)
            })
            .collect::<Result<_>>()?;
        samples.push((t as u64, vals));
    }
    let fit = scaling_fit(&samples)?;
    let verdict = if (fit.kappa_hat - 2.0).abs() <= 3.0 * fit.stderr.max(0.05) {
        "consistent with the claimed T² rate"
    } else {
        "NOT consistent with the claimed T² rate (documented ambiguity)"
    };
    let mom = moment_row("Q_off(1) at T=400", &samples[2].1)?;
    Ok((
        fit.stderr <= 0.15,
        format!(
            "kappa_hat = {:.4} ± {:.4} (stderr bound 0.15): {verdict}; Q_off(1) mean at T=400 = {:.2e}",
            fit.kappa_hat, fit.stderr, mom.mean
        ),
    ))
}

// criterion 11: previsibility, tie-breaking, adaptedness, algebraic
// identities at 1e-12, and bitwise reproducibility under varying
// parallelism
fn c11_contracts() -> Result<(bool, String)> {
    let kernel = exp_kernel();
    let mut failures: Vec<&str> = Vec::new();

    // previsibility under future mutation
    let t = 100usize;
    let model = ChangeModel::null(t)?;
    let path = gen_path(&model, &iid_unit(), 1100, 0)?;
    let pcfg = PredictConfig {
        gamma: 0.1,
        t,
        h: 10.0,
    };
    for i in [30usize, 60, 90] {
        let base = predict(&path.y, &kernel, &pcfg, i)?;
        let mut mutated = path.y.clone();
        for v in mutated.iter_mut().skip(i - 1) {
            *v = 5e8;
        }
        if predict(&mutated, &kernel, &pcfg, i)? != base {
            failures.push("previsibility");
        }
    }

    // smallest-minimizer tie-breaking
    if argmin_grid(&[1.0, 1.0, 2.0], &[5.0, 10.0, 20.0])? != 5.0 {
        failures.push("argmin tie-break");
    }

    // adaptedness of the bandwidth checkpoints
    let cvcfg = CvConfig::new(0.1, 0.25)?;
    let checkpoints = [0.25, 0.5, 0.75];
    let xi_grid = [5.0, 10.0, 20.0];
    let bp = bandwidth_path(&path.y, &kernel, &cvcfg, &checkpoints, &xi_grid)?;
    for (k, &s) in checkpoints.iter().enumerate() {
        let cut = (t as f64 * s).floor() as usize;
        let mut mutated = path.y.clone();
        for v in mutated.iter_mut().skip(cut) {
            *v = -7e8;
        }
        let bp2 = bandwidth_path(&mutated, &kernel, &cvcfg, &checkpoints, &xi_grid)?;
        if bp2.xi_star[k] != bp.xi_star[k] {
            failures.push("adaptedness");
        }
    }

    // C = L + Q and CV reconstruction at 1e-12 relative
    let eval = decompose(&path.y, &kernel, &cvcfg, &[0.5, 1.0], &xi_grid)?;
    for (r, &s) in [0.5, 1.0].iter().enumerate() {
        let upper = (t as f64 * s).floor() as usize;
        let start = (t as f64 * 0.25).floor() as usize;
        let y2: f64 =
            (start..=upper).map(|i| path.y[i - 1] * path.y[i - 1]).sum::<f64>() / t as f64;
        for c in 0..xi_grid.len() {
            if (eval.c[r][c] - (eval.l[r][c] + eval.q[r][c])).abs()
                > 1e-12 * (1.0 + eval.c[r][c].abs())
            {
                failures.push("C = L + Q identity");
            }
            if (eval.cv[r][c] - (y2 + eval.c[r][c])).abs() > 1e-12 * (1.0 + eval.cv[r][c].abs()) {
                failures.push("CV reconstruction identity");
            }
        }
    }

    // bitwise reproducibility: same seed, different thread counts
    let cfg = crate::config::parse_config(
        r#"
[model]
t = 60

[cv]
gamma = 0.1
s0 = 0.3
xi_grid = [5.0, 10.0]
s_grid = [0.5, 1.0]

[run]
reps = 16
seed = 1106
"#,
    )?;
    let a = run_mc(&cfg, McTask::FiniteTCv)?.to_csv();
    let b = run_mc(&cfg, McTask::FiniteTCv)?.to_csv();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| crate::error::Error::Config(e.to_string()))?;
    let c = pool.install(|| run_mc(&cfg, McTask::FiniteTCv).map(|o| o.to_csv()))?;
    if a != b || a != c {
        failures.push("bitwise reproducibility");
    }

    failures.dedup();
    Ok((
        failures.is_empty(),
        if failures.is_empty() {
            "previsibility, tie-breaking, adaptedness, identities, reproducibility all hold".into()
        } else {
            format!("violated: {failures:?}")
        },
    ))
}
