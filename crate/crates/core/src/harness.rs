//! Monte Carlo engine and distributional diagnostics: replicated runs of
//! the finite-horizon and limit objects with per-replicate RNG streams,
//! two-sample Kolmogorov-Smirnov distances, moment tables, and empirical
//! scaling-exponent fits.
//!
//! Replications execute in parallel; every row is a pure function of
//! `(config, seed, replicate)`, so the emitted table is byte-identical
//! under any degree of parallelism. Failed replicates are counted and
//! reported, never silently dropped.

use rayon::prelude::*;
use serde_json::json;

use crate::anscombe::{sample_tau, stopped_cv, StoppedCv};
use crate::config::{ExperimentConfig, MonitorBandwidth};
use crate::crossval::{bandwidth_path, decompose};
use crate::error::{Error, Result};
use crate::limits::{argmin_limit, simulate_b_at, simulate_l_at, simulate_q_limit};
use crate::monitor::{run_detector, BandwidthChoice};
use crate::noise::gen_path;
use crate::numeric::{iqr, mean, sample_variance};

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    U64(u64),
    F64(f64),
    Str(String),
    /// Censored / undefined; serialized as an empty cell.
    Missing,
}

impl Field {
    fn write_csv(&self, out: &mut String) {
        match self {
            Field::U64(v) => out.push_str(&v.to_string()),
            Field::F64(v) => out.push_str(&v.to_string()),
            Field::Str(s) => out.push_str(s),
            Field::Missing => {}
        }
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            Field::U64(v) => json!(v),
            Field::F64(v) => json!(v),
            Field::Str(s) => json!(s),
            Field::Missing => serde_json::Value::Null,
        }
    }
}

/// A replicated sample table plus failure accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct McOutput {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Field>>,
    pub reps: u64,
    pub failures: Vec<(u64, String)>,
    pub metadata: Vec<(String, String)>,
}

impl McOutput {
    /// UTF-8 CSV with a header row and "." as the decimal separator.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            for (k, field) in row.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                field.write_csv(&mut out);
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "columns": self.columns,
            "rows": self.rows.iter()
                .map(|r| r.iter().map(Field::to_json).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
            "reps": self.reps,
            "failures": self.failures.iter()
                .map(|(rep, msg)| json!({"replicate": rep, "error": msg}))
                .collect::<Vec<_>>(),
            "metadata": self.metadata.iter()
                .cloned()
                .collect::<std::collections::BTreeMap<String, String>>(),
        })
    }

    /// Extract one numeric column (skipping missing cells).
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Config(format!("no column named {name:?}")))?;
        Ok(self
            .rows
            .iter()
            .filter_map(|r| match &r[idx] {
                Field::F64(v) => Some(*v),
                Field::U64(v) => Some(*v as f64),
                _ => None,
            })
            .collect())
    }
}

/// The replicated experiments the engine can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McTask {
    /// Emit the generated paths themselves.
    Generate,
    /// CV decomposition over the configured `(s, ξ)` grids.
    FiniteTCv,
    /// First-exit detector runs.
    Detector,
    /// Realized `B_δ^σ` values at the configured points.
    LimitB,
    /// Simulated `L_ξ` values at the configured points.
    LimitL,
    /// Simulated `Q`-limit diagonal entries at the configured points.
    LimitQ,
    /// Smallest minimizer of the simulated `{L_ξ}` family.
    LimitArgmin,
    /// Randomly stopped scaled CV through the time change.
    StoppedCv,
}

fn require<'a, T>(section: &'a Option<T>, what: &str) -> Result<&'a T> {
    section
        .as_ref()
        .ok_or_else(|| Error::Config(format!("task requires the [{what}] config section")))
}

/// Run `reps` independent replicates of `task`. Row sets are deterministic
/// in `(config, seed)` and independent of thread count; failed replicates
/// abort only their own rows and are reported in `failures`.
pub fn run_mc(cfg: &ExperimentConfig, task: McTask) -> Result<McOutput> {
    let reps = cfg.run.reps;
    let seed = cfg.run.seed;

    let columns: Vec<String> = match task {
        McTask::Generate => vec!["replicate", "n", "y", "eps"],
        McTask::FiniteTCv => vec!["replicate", "s", "xi", "CV", "L", "Q", "C", "T_C"],
        McTask::Detector => vec!["replicate", "signal_index", "signaled"],
        McTask::LimitB | McTask::LimitL | McTask::LimitQ => vec!["replicate", "s", "value"],
        McTask::LimitArgmin => vec!["replicate", "s", "xi"],
        McTask::StoppedCv => vec!["replicate", "s", "tau", "ratio", "phi_s", "value"],
    }
    .into_iter()
    .map(String::from)
    .collect();

    // per-task closures produce the rows of one replicate
    let results: Vec<(u64, Result<Vec<Vec<Field>>>)> = (0..reps)
        .into_par_iter()
        .map(|rep| (rep, run_replicate(cfg, task, seed, rep)))
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (rep, res) in results {
        match res {
            Ok(mut r) => rows.append(&mut r),
            Err(e) => failures.push((rep, e.to_string())),
        }
    }

    let mut metadata = vec![
        ("task".to_string(), format!("{task:?}")),
        ("seed".to_string(), seed.to_string()),
        (
            "mds_hypothesis".to_string(),
            cfg.noise.martingale_difference().to_string(),
        ),
    ];
    if !cfg.noise.martingale_difference() {
        metadata.push((
            "warning".to_string(),
            "error process is outside the martingale-difference hypotheses".to_string(),
        ));
    }

    Ok(McOutput {
        columns,
        rows,
        reps,
        failures,
        metadata,
    })
}

fn run_replicate(
    cfg: &ExperimentConfig,
    task: McTask,
    seed: u64,
    rep: u64,
) -> Result<Vec<Vec<Field>>> {
    match task {
        McTask::Generate => {
            let path = gen_path(&cfg.model, &cfg.noise, seed, rep)?;
            Ok(path
                .y
                .iter()
                .zip(&path.eps)
                .enumerate()
                .map(|(k, (y, e))| {
                    vec![
                        Field::U64(rep),
                        Field::U64(k as u64 + 1),
                        Field::F64(*y),
                        Field::F64(*e),
                    ]
                })
                .collect())
        }
        McTask::FiniteTCv => {
            let cv = require(&cfg.cv, "cv")?;
            let path = gen_path(&cfg.model, &cfg.noise, seed, rep)?;
            let eval = decompose(&path.y, &cfg.kernel, &cv.cfg, &cv.s_grid, &cv.xi_grid)?;
            let t = cfg.model.t as f64;
            let mut rows = Vec::with_capacity(cv.s_grid.len() * cv.xi_grid.len());
            for (r, &s) in cv.s_grid.iter().enumerate() {
                for (c, &xi) in cv.xi_grid.iter().enumerate() {
                    rows.push(vec![
                        Field::U64(rep),
                        Field::F64(s),
                        Field::F64(xi),
                        Field::F64(eval.cv[r][c]),
                        Field::F64(eval.l[r][c]),
                        Field::F64(eval.q[r][c]),
                        Field::F64(eval.c[r][c]),
                        Field::F64(t * eval.c[r][c]),
                    ]);
                }
            }
            Ok(rows)
        }
        McTask::Detector => {
            let mon = require(&cfg.monitor, "monitor")?;
            let path = gen_path(&cfg.model, &cfg.noise, seed, rep)?;
            let result = match &mon.bandwidth {
                MonitorBandwidth::Fixed { xi } => run_detector(
                    &path,
                    &cfg.kernel,
                    &mon.cfg,
                    BandwidthChoice::Fixed { xi: *xi },
                )?,
                MonitorBandwidth::Cv {
                    checkpoints,
                    xi_grid,
                } => {
                    let cvcfg = crate::crossval::CvConfig::new(mon.cfg.gamma, checkpoints[0])?;
                    let bp = bandwidth_path(&path.y, &cfg.kernel, &cvcfg, checkpoints, xi_grid)?;
                    run_detector(&path, &cfg.kernel, &mon.cfg, BandwidthChoice::Adaptive(&bp))?
                }
            };
            Ok(vec![vec![
                Field::U64(rep),
                result
                    .signal_index
                    .map(|i| Field::U64(i as u64))
                    .unwrap_or(Field::Missing),
                Field::Str(result.signaled.to_string()),
            ]])
        }
        McTask::LimitB => {
            let lim = require(&cfg.limit, "limit")?;
            let vals = simulate_b_at(&lim.grid, &lim.s_points, seed, rep)?;
            Ok(lim
                .s_points
                .iter()
                .zip(vals)
                .map(|(&s, v)| vec![Field::U64(rep), Field::F64(s), Field::F64(v)])
                .collect())
        }
        McTask::LimitL => {
            let lim = require(&cfg.limit, "limit")?;
            let vals = simulate_l_at(&lim.grid, &lim.s_points, seed, rep)?;
            Ok(lim
                .s_points
                .iter()
                .zip(vals)
                .map(|(&s, v)| vec![Field::U64(rep), Field::F64(s), Field::F64(v)])
                .collect())
        }
        McTask::LimitQ => {
            let lim = require(&cfg.limit, "limit")?;
            let vals = simulate_q_limit(&lim.grid, &lim.s_points, seed, rep)?;
            Ok(lim
                .s_points
                .iter()
                .zip(vals)
                .map(|(&s, v)| vec![Field::U64(rep), Field::F64(s), Field::F64(v)])
                .collect())
        }
        McTask::LimitArgmin => {
            let lim = require(&cfg.limit, "limit")?;
            if lim.xi_grid.is_empty() {
                return Err(Error::Config("argmin task needs [limit] xi_grid".into()));
            }
            lim.s_points
                .iter()
                .map(|&s| {
                    let xi = argmin_limit(&lim.grid, &lim.xi_grid, s, seed, rep)?;
                    Ok(vec![Field::U64(rep), Field::F64(s), Field::F64(xi)])
                })
                .collect()
        }
        McTask::StoppedCv => {
            let ans = require(&cfg.anscombe, "anscombe")?;
            let cv = require(&cfg.cv, "cv")?;
            let a = ans.a;
            let t_prime = a.ceil() as usize;
            // stopping stream and data stream are decoupled by a documented
            // seed offset: tau from (seed, rep), data from (seed+1, rep)
            let tau = match ans.fixed_ratio {
                Some(r) => ((r * a).floor() as u64).max(1),
                None => sample_tau(&ans.family, a, seed, rep)?,
            };
            let model = crate::change_model::ChangeModel::new(
                cfg.model.m0.clone(),
                cfg.model.delta.clone(),
                cfg.model.design.clone(),
                t_prime,
            )?;
            let path = gen_path(&model, &cfg.noise, seed.wrapping_add(1), rep)?;
            let ratio = tau as f64 / t_prime as f64;
            ans.s_points
                .iter()
                .map(|&s| {
                    let v = stopped_cv(&path.y, &cfg.kernel, &cv.cfg, ans.xi, tau, s)?;
                    Ok(vec![
                        Field::U64(rep),
                        Field::F64(s),
                        Field::U64(tau),
                        Field::F64(ratio),
                        Field::F64(ratio * s),
                        match v {
                            StoppedCv::Value(x) => Field::F64(x),
                            StoppedCv::BelowStart => Field::Missing,
                        },
                    ])
                })
                .collect()
        }
    }
}

/// Per-replicate stopping-time draws for the `anscombe` subcommand:
/// one row per `(a, replicate)`.
pub fn anscombe_table(cfg: &ExperimentConfig) -> Result<McOutput> {
    let ans = require(&cfg.anscombe, "anscombe")?;
    if ans.a_values.is_empty() {
        return Err(Error::Config("[anscombe] needs a_values".into()));
    }
    let reps = cfg.run.reps;
    let seed = cfg.run.seed;
    let columns = ["family", "a", "replicate", "tau", "ratio"]
        .into_iter()
        .map(String::from)
        .collect();

    let cells: Vec<((usize, u64), Result<u64>)> = ans
        .a_values
        .iter()
        .enumerate()
        .flat_map(|(k, &a)| (0..reps).map(move |r| (k, a, r)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(k, a, r)| {
            let stream = ((k as u64) << 32) | r;
            ((k, r), sample_tau(&ans.family, a, seed, stream))
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for ((k, r), res) in cells {
        let a = ans.a_values[k];
        match res {
            Ok(tau) => rows.push(vec![
                Field::Str(ans.family_name.clone()),
                Field::F64(a),
                Field::U64(r),
                Field::U64(tau),
                Field::F64(tau as f64 / a),
            ]),
            Err(e) => failures.push((r, format!("a = {a}: {e}"))),
        }
    }
    Ok(McOutput {
        columns,
        rows,
        reps,
        failures,
        metadata: vec![
            ("task".into(), "Anscombe".into()),
            ("seed".into(), seed.to_string()),
            (
                "random_lambda".into(),
                ans.family.random_lambda().to_string(),
            ),
        ],
    })
}

// ---------------------------------------------------------------------
// diagnostics
// ---------------------------------------------------------------------

/// Two-sample Kolmogorov-Smirnov statistic: the sup distance between the
/// empirical distribution functions, by merge scan. Ties advance both
/// pointers before the distance is measured.
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Domain("KS needs nonempty samples".into()));
    }
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in KS sample"));
    ys.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in KS sample"));
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let t = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] == t {
            i += 1;
        }
        while j < ys.len() && ys[j] == t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

/// Empirical scaling exponent: least-squares slope of `log IQR` against
/// `log T`, reported as `κ̂` with `T^κ̂ · X_T` stochastically stable
/// (so `κ̂ = -slope`), plus the OLS standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingFit {
    pub kappa_hat: f64,
    pub stderr: f64,
}

pub fn scaling_fit(samples: &[(u64, Vec<f64>)]) -> Result<ScalingFit> {
    let mut ts: Vec<u64> = samples.iter().map(|(t, _)| *t).collect();
    ts.sort_unstable();
    ts.dedup();
    if ts.len() < 3 {
        return Err(Error::Validation(
            "scaling fit needs at least 3 distinct T values".into(),
        ));
    }
    for (t, sample) in samples {
        if sample.len() < 200 {
            return Err(Error::Validation(format!(
                "scaling fit needs sample size >= 200 at T = {t}, got {}",
                sample.len()
            )));
        }
    }
    let mut pts = Vec::with_capacity(samples.len());
    for (t, sample) in samples {
        let range = iqr(sample)?;
        if range <= 0.0 {
            return Err(Error::Diagnostics(format!(
                "degenerate (zero-IQR) sample at T = {t}"
            )));
        }
        pts.push(((*t as f64).ln(), range.ln()));
    }
    let n = pts.len() as f64;
    let xbar = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ybar = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - xbar) * (p.0 - xbar)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - xbar) * (p.1 - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_res: f64 = pts
        .iter()
        .map(|p| {
            let r = p.1 - (intercept + slope * p.0);
            r * r
        })
        .sum();
    let stderr = (ss_res / (n - 2.0) / sxx).sqrt();
    Ok(ScalingFit {
        kappa_hat: -slope,
        stderr,
    })
}

/// Mean / variance with Monte Carlo standard errors. The variance SE uses
/// the Gaussian approximation `var · sqrt(2/(n-1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentRow {
    pub name: String,
    pub n: u64,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
}

pub fn moment_row(name: &str, xs: &[f64]) -> Result<MomentRow> {
    if xs.len() < 2 {
        return Err(Error::Diagnostics(format!(
            "moment table needs at least 2 values for {name}"
        )));
    }
    let n = xs.len() as f64;
    let var = sample_variance(xs);
    Ok(MomentRow {
        name: name.to_string(),
        n: xs.len() as u64,
        mean: mean(xs),
        mean_se: (var / n).sqrt(),
        variance: var,
        variance_se: var * (2.0 / (n - 1.0)).sqrt(),
    })
}

/// Assembled diagnostics for a verification run.
#[derive(Debug, Clone, Default)]
pub struct DiagnosticsReport {
    pub ks_stats: Vec<(String, f64)>,
    pub moments: Vec<MomentRow>,
    pub scaling: Vec<(String, ScalingFit)>,
}
