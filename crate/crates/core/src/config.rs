//! Declarative experiment configuration: a TOML file with `[model]`,
//! `[errors]`, `[kernel]`, `[monitor]`, `[cv]`, `[limit]`, `[anscombe]`
//! and `[run]` sections, validated into the typed configs the modules use.
//!
//! Minimal example:
//!
//! ```toml
//! [model]
//! t = 400
//! delta = [ { start = 0.0, kind = "constant", value = 0.0 } ]
//!
//! [errors]
//! kind = "iid"
//! sigma = 1.0
//!
//! [kernel]
//! family = "exponential"
//!
//! [cv]
//! gamma = 0.1
//! s0 = 0.2
//! xi_grid = [5.0, 10.0, 20.0]
//! s_grid = [1.0]
//!
//! [run]
//! reps = 100
//! seed = 42
//! ```
//!
//! Piecewise functions (`m0`, `delta`) are lists of segments: each entry
//! starts at `start` (the first must start at 0) and runs to the next
//! entry's start, the last to 1. Kinds: `constant {value}`,
//! `linear {slope, intercept}` (global coordinates), and
//! `tabulated {xs, ys}`.

use serde::Deserialize;

use crate::anscombe::{IncrementKind, StopFamily, StopKind};
use crate::change_model::{ChangeModel, DesignDist, PiecewiseFn, Segment};
use crate::crossval::CvConfig;
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::limits::LimitGridConfig;
use crate::monitor::{Direction, MonitorConfig};
use crate::noise::{ErrorConfig, GarchParams, Innovation, NoiseKind, DEFAULT_BURN_IN};

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: ChangeModel,
    pub noise: ErrorConfig,
    pub kernel: KernelSpec,
    pub monitor: Option<MonitorSettings>,
    pub cv: Option<CvSettings>,
    pub limit: Option<LimitSettings>,
    pub anscombe: Option<AnscombeSettings>,
    pub run: RunSettings,
}

#[derive(Debug, Clone)]
pub struct MonitorSettings {
    pub cfg: MonitorConfig,
    pub bandwidth: MonitorBandwidth,
}

#[derive(Debug, Clone)]
pub enum MonitorBandwidth {
    Fixed { xi: f64 },
    /// Cross-validated step-function bandwidth recomputed per replicate.
    Cv {
        checkpoints: Vec<f64>,
        xi_grid: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct CvSettings {
    pub cfg: CvConfig,
    pub xi_grid: Vec<f64>,
    pub s_grid: Vec<f64>,
    pub checkpoints: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LimitSettings {
    pub grid: LimitGridConfig,
    pub s_points: Vec<f64>,
    pub xi_grid: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct AnscombeSettings {
    pub family: StopFamily,
    pub family_name: String,
    pub a_values: Vec<f64>,
    /// Level used by the stopped-CV task (`T' = ⌈a⌉`).
    pub a: f64,
    pub s_points: Vec<f64>,
    pub xi: f64,
    /// Constructed deterministic family `τ_a = ⌊ratio·a⌋` for embedding
    /// experiments with a known `λ`.
    pub fixed_ratio: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunSettings {
    pub reps: u64,
    pub seed: u64,
    pub out: Option<String>,
    pub json: bool,
}

// ---------------------------------------------------------------------
// raw TOML schema
// ---------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: Option<RawModel>,
    errors: Option<RawErrors>,
    kernel: Option<RawKernel>,
    monitor: Option<RawMonitor>,
    cv: Option<RawCv>,
    limit: Option<RawLimit>,
    anscombe: Option<RawAnscombe>,
    run: Option<RawRun>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    #[serde(default = "default_t")]
    t: usize,
    #[serde(default)]
    m0: Vec<RawSegment>,
    #[serde(default)]
    delta: Vec<RawSegment>,
    #[serde(default = "default_design")]
    design: String,
    design_quantile: Option<RawQuantile>,
    #[serde(default)]
    enforce_sign: bool,
}

fn default_t() -> usize {
    400
}
fn default_design() -> String {
    "identity".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSegment {
    start: f64,
    kind: String,
    value: Option<f64>,
    slope: Option<f64>,
    intercept: Option<f64>,
    xs: Option<Vec<f64>>,
    ys: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuantile {
    ps: Vec<f64>,
    qs: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawErrors {
    #[serde(default = "default_errors_kind")]
    kind: String,
    #[serde(default = "default_innovation")]
    innovation: String,
    df: Option<f64>,
    #[serde(default = "default_sigma")]
    sigma: f64,
    alpha0: Option<f64>,
    alpha: Option<Vec<f64>>,
    beta: Option<Vec<f64>>,
    ma: Option<Vec<f64>>,
    burn_in: Option<usize>,
}

fn default_errors_kind() -> String {
    "iid".into()
}
fn default_innovation() -> String {
    "gaussian".into()
}
fn default_sigma() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernel {
    #[serde(default = "default_kernel")]
    family: String,
}

fn default_kernel() -> String {
    "exponential".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMonitor {
    gamma: f64,
    s0: f64,
    threshold: f64,
    #[serde(default = "default_direction")]
    direction: String,
    xi: Option<f64>,
    #[serde(default)]
    cv_bandwidth: bool,
    #[serde(default)]
    checkpoints: Vec<f64>,
    #[serde(default)]
    xi_grid: Vec<f64>,
}

fn default_direction() -> String {
    "upper".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCv {
    gamma: f64,
    s0: f64,
    xi_grid: Vec<f64>,
    #[serde(default)]
    s_grid: Vec<f64>,
    #[serde(default)]
    checkpoints: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLimit {
    #[serde(default = "default_grid_points")]
    grid_points: usize,
    #[serde(default = "default_sigma")]
    sigma: f64,
    xi: Option<f64>,
    #[serde(default)]
    xi_grid: Vec<f64>,
    gamma: f64,
    s0: f64,
    #[serde(default = "default_s_points")]
    s_points: Vec<f64>,
    #[serde(default)]
    from_zero: bool,
}

fn default_grid_points() -> usize {
    2000
}
fn default_s_points() -> Vec<f64> {
    vec![1.0]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnscombe {
    family: String,
    #[serde(default)]
    a_values: Vec<f64>,
    a: Option<f64>,
    mean: Option<f64>,
    sd: Option<f64>,
    c0: Option<f64>,
    #[serde(default)]
    known_sigma: bool,
    r_bar: Option<f64>,
    alpha0: Option<f64>,
    alpha: Option<Vec<f64>>,
    beta: Option<Vec<f64>>,
    scales: Option<Vec<f64>>,
    #[serde(default = "default_s_points")]
    s_points: Vec<f64>,
    xi: Option<f64>,
    fixed_ratio: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    #[serde(default = "default_reps")]
    reps: u64,
    #[serde(default)]
    seed: u64,
    out: Option<String>,
    #[serde(default)]
    json: bool,
}

fn default_reps() -> u64 {
    100
}

// ---------------------------------------------------------------------
// building
// ---------------------------------------------------------------------

fn build_piecewise(raw: &[RawSegment], what: &str) -> Result<PiecewiseFn> {
    if raw.is_empty() {
        return Ok(PiecewiseFn::constant(0.0));
    }
    if raw[0].start != 0.0 {
        return Err(Error::Config(format!(
            "{what}: first segment must start at 0, got {}",
            raw[0].start
        )));
    }
    let breakpoints: Vec<f64> = raw.iter().skip(1).map(|s| s.start).collect();
    let mut segments = Vec::with_capacity(raw.len());
    for seg in raw {
        let built = match seg.kind.as_str() {
            "constant" => Segment::Constant {
                value: seg.value.ok_or_else(|| {
                    Error::Config(format!("{what}: constant segment needs `value`"))
                })?,
            },
            "linear" => Segment::Linear {
                slope: seg
                    .slope
                    .ok_or_else(|| Error::Config(format!("{what}: linear segment needs `slope`")))?,
                intercept: seg.intercept.unwrap_or(0.0),
            },
            "tabulated" => Segment::Tabulated {
                xs: seg.xs.clone().ok_or_else(|| {
                    Error::Config(format!("{what}: tabulated segment needs `xs`"))
                })?,
                ys: seg.ys.clone().ok_or_else(|| {
                    Error::Config(format!("{what}: tabulated segment needs `ys`"))
                })?,
            },
            other => {
                return Err(Error::Config(format!(
                    "{what}: unknown segment kind {other:?}"
                )))
            }
        };
        segments.push(built);
    }
    PiecewiseFn::new(breakpoints, segments)
}

fn build_noise(raw: Option<RawErrors>) -> Result<ErrorConfig> {
    let raw = match raw {
        Some(r) => r,
        None => return Ok(ErrorConfig::iid_gaussian(1.0)),
    };
    let innovation = match raw.innovation.as_str() {
        "gaussian" => Innovation::Gaussian,
        "student_t" => Innovation::StudentT {
            df: raw
                .df
                .ok_or_else(|| Error::Config("student_t innovation needs `df`".into()))?,
        },
        other => {
            return Err(Error::Config(format!(
                "unknown innovation {other:?} (gaussian | student_t)"
            )))
        }
    };
    let kind = match raw.kind.as_str() {
        "iid" => NoiseKind::Iid { sigma: raw.sigma },
        "garch" => NoiseKind::Garch(GarchParams {
            alpha0: raw
                .alpha0
                .ok_or_else(|| Error::Config("garch errors need `alpha0`".into()))?,
            alpha: raw.alpha.unwrap_or_default(),
            beta: raw.beta.unwrap_or_default(),
        }),
        "ma" => NoiseKind::Ma {
            coeffs: raw
                .ma
                .ok_or_else(|| Error::Config("ma errors need `ma` coefficients".into()))?,
        },
        other => {
            return Err(Error::Config(format!(
                "unknown error kind {other:?} (iid | garch | ma)"
            )))
        }
    };
    let cfg = ErrorConfig {
        kind,
        innovation,
        burn_in: raw.burn_in.unwrap_or(DEFAULT_BURN_IN),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn build_anscombe(raw: RawAnscombe) -> Result<AnscombeSettings> {
    let family_name = raw.family.clone();
    let kind = match raw.family.as_str() {
        "first_passage" => StopKind::FirstPassage {
            increments: match raw.sd {
                Some(sd) => IncrementKind::Gaussian {
                    mean: raw
                        .mean
                        .ok_or_else(|| Error::Config("first_passage needs `mean`".into()))?,
                    sd,
                },
                None => IncrementKind::Constant {
                    value: raw
                        .mean
                        .ok_or_else(|| Error::Config("first_passage needs `mean`".into()))?,
                },
            },
        },
        "dispersion" => StopKind::Dispersion {
            stream: IncrementKind::Gaussian {
                mean: raw.mean.unwrap_or(0.0),
                sd: raw
                    .sd
                    .ok_or_else(|| Error::Config("dispersion needs `sd`".into()))?,
            },
            c0: raw
                .c0
                .ok_or_else(|| Error::Config("dispersion needs `c0`".into()))?,
            known_sigma: raw.known_sigma,
        },
        "risk_limit" => StopKind::RiskLimit {
            garch: GarchParams {
                alpha0: raw
                    .alpha0
                    .ok_or_else(|| Error::Config("risk_limit needs `alpha0`".into()))?,
                alpha: raw.alpha.unwrap_or_default(),
                beta: raw.beta.unwrap_or_default(),
            },
            r_bar: raw
                .r_bar
                .ok_or_else(|| Error::Config("risk_limit needs `r_bar`".into()))?,
        },
        "random_scale" => StopKind::RandomScale {
            scales: raw
                .scales
                .ok_or_else(|| Error::Config("random_scale needs `scales`".into()))?,
        },
        other => {
            return Err(Error::Config(format!(
                "unknown stopping family {other:?}"
            )))
        }
    };
    let lambda = match &kind {
        StopKind::FirstPassage { increments } => {
            let mu = increments.mean();
            (mu > 0.0).then(|| 1.0 / mu)
        }
        StopKind::Dispersion {
            stream,
            c0,
            known_sigma,
        } => Some(if *known_sigma {
            1.0 / (c0 * c0)
        } else {
            stream.variance() / (c0 * c0)
        }),
        _ => None,
    };
    Ok(AnscombeSettings {
        family: StopFamily {
            kind,
            lambda_expected: lambda,
            description: family_name.clone(),
        },
        family_name,
        a_values: raw.a_values,
        a: raw.a.unwrap_or(400.0),
        s_points: raw.s_points,
        xi: raw.xi.unwrap_or(10.0),
        fixed_ratio: raw.fixed_ratio,
    })
}

/// CLI-level overrides applied to the raw sections before validation, so
/// flag-supplied values go through exactly the same checks as file values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub reps: Option<u64>,
    pub out: Option<String>,
    pub json: Option<bool>,
    pub monitor_direction: Option<String>,
    pub monitor_threshold: Option<f64>,
    pub monitor_xi: Option<f64>,
    pub monitor_cv_bandwidth: Option<bool>,
    pub cv_xi_grid: Option<Vec<f64>>,
    pub cv_checkpoints: Option<Vec<f64>>,
    pub limit_grid_points: Option<usize>,
    pub anscombe_family: Option<String>,
    pub anscombe_a_values: Option<Vec<f64>>,
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_config_with(text, &Overrides::default())
}

pub fn parse_config_with(text: &str, over: &Overrides) -> Result<ExperimentConfig> {
    let mut raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;

    if let Some(m) = raw.monitor.as_mut() {
        if let Some(d) = &over.monitor_direction {
            m.direction = d.clone();
        }
        if let Some(c) = over.monitor_threshold {
            m.threshold = c;
        }
        if let Some(xi) = over.monitor_xi {
            m.xi = Some(xi);
        }
        if let Some(b) = over.monitor_cv_bandwidth {
            m.cv_bandwidth = b;
        }
    }
    if let Some(c) = raw.cv.as_mut() {
        if let Some(grid) = &over.cv_xi_grid {
            c.xi_grid = grid.clone();
        }
        if let Some(cp) = &over.cv_checkpoints {
            c.checkpoints = cp.clone();
        }
    }
    if let Some(l) = raw.limit.as_mut() {
        if let Some(g) = over.limit_grid_points {
            l.grid_points = g;
        }
    }
    if let Some(a) = raw.anscombe.as_mut() {
        if let Some(fam) = &over.anscombe_family {
            a.family = fam.clone();
        }
        if let Some(av) = &over.anscombe_a_values {
            a.a_values = av.clone();
        }
    }
    match raw.run.as_mut() {
        Some(r) => {
            if let Some(s) = over.seed {
                r.seed = s;
            }
            if let Some(n) = over.reps {
                r.reps = n;
            }
            if let Some(o) = &over.out {
                r.out = Some(o.clone());
            }
            if let Some(j) = over.json {
                r.json = j;
            }
        }
        None => {
            raw.run = Some(RawRun {
                reps: over.reps.unwrap_or_else(default_reps),
                seed: over.seed.unwrap_or(0),
                out: over.out.clone(),
                json: over.json.unwrap_or(false),
            });
        }
    }

    build_config(raw)
}

fn build_config(raw: RawConfig) -> Result<ExperimentConfig> {

    let model = match raw.model {
        Some(m) => {
            let m0 = build_piecewise(&m.m0, "m0")?;
            let delta = build_piecewise(&m.delta, "delta")?;
            let design = match m.design.as_str() {
                "identity" => DesignDist::Identity,
                "tabulated_quantile" => {
                    let q = m.design_quantile.ok_or_else(|| {
                        Error::Config("tabulated_quantile design needs [model.design_quantile]".into())
                    })?;
                    DesignDist::TabulatedQuantile { ps: q.ps, qs: q.qs }
                }
                other => {
                    return Err(Error::Config(format!(
                        "unknown design {other:?} (identity | tabulated_quantile)"
                    )))
                }
            };
            let model = ChangeModel::new(m0, delta, design, m.t)?;
            if m.enforce_sign {
                model.validate_sign()?;
            }
            model
        }
        None => ChangeModel::null(default_t())?,
    };

    let noise = build_noise(raw.errors)?;
    let kernel = KernelSpec::from_name(
        raw.kernel
            .map(|k| k.family)
            .unwrap_or_else(default_kernel)
            .as_str(),
    )?;

    let monitor = match raw.monitor {
        Some(m) => {
            let cfg = MonitorConfig {
                gamma: m.gamma,
                s0: m.s0,
                threshold: m.threshold,
                direction: match m.direction.as_str() {
                    "upper" => Direction::Upper,
                    "lower" => Direction::Lower,
                    other => {
                        return Err(Error::Config(format!(
                            "unknown direction {other:?} (upper | lower)"
                        )))
                    }
                },
            };
            cfg.validate()?;
            model.validate_change_point(m.gamma)?;
            let bandwidth = if m.cv_bandwidth {
                if m.checkpoints.is_empty() || m.xi_grid.is_empty() {
                    return Err(Error::Config(
                        "cv_bandwidth monitoring needs `checkpoints` and `xi_grid`".into(),
                    ));
                }
                if m.checkpoints[0] > m.s0 {
                    return Err(Error::Config(
                        "first bandwidth checkpoint must not exceed s0".into(),
                    ));
                }
                MonitorBandwidth::Cv {
                    checkpoints: m.checkpoints,
                    xi_grid: m.xi_grid,
                }
            } else {
                MonitorBandwidth::Fixed {
                    xi: m
                        .xi
                        .ok_or_else(|| Error::Config("monitor needs `xi` or cv_bandwidth".into()))?,
                }
            };
            Some(MonitorSettings { cfg, bandwidth })
        }
        None => None,
    };

    let cv = match raw.cv {
        Some(c) => {
            let cfg = CvConfig::new(c.gamma, c.s0)?;
            model.validate_change_point(c.gamma)?;
            for &s in c.s_grid.iter().chain(&c.checkpoints) {
                if !(c.s0..=1.0).contains(&s) {
                    return Err(Error::Config(format!(
                        "cv grid point {s} outside [s0, 1] = [{}, 1]",
                        c.s0
                    )));
                }
            }
            if c.xi_grid.is_empty() {
                return Err(Error::Config("cv needs a nonempty xi_grid".into()));
            }
            Some(CvSettings {
                cfg,
                xi_grid: c.xi_grid,
                s_grid: if c.s_grid.is_empty() {
                    vec![1.0]
                } else {
                    c.s_grid
                },
                checkpoints: c.checkpoints,
            })
        }
        None => None,
    };

    let limit = match raw.limit {
        Some(l) => {
            let grid = LimitGridConfig {
                grid_points: l.grid_points,
                sigma: l.sigma,
                delta: model.delta.clone(),
                kernel,
                xi: l.xi.unwrap_or(10.0),
                gamma: l.gamma,
                s0: l.s0,
                from_zero: l.from_zero,
            };
            grid.validate()?;
            for &s in &l.s_points {
                if !(l.s0..=1.0).contains(&s) {
                    return Err(Error::Config(format!(
                        "limit s point {s} outside [s0, 1] = [{}, 1]",
                        l.s0
                    )));
                }
            }
            Some(LimitSettings {
                grid,
                s_points: l.s_points,
                xi_grid: l.xi_grid,
            })
        }
        None => None,
    };

    let anscombe = raw.anscombe.map(build_anscombe).transpose()?;

    let run = match raw.run {
        Some(r) => RunSettings {
            reps: r.reps,
            seed: r.seed,
            out: r.out,
            json: r.json,
        },
        None => RunSettings {
            reps: default_reps(),
            seed: 0,
            out: None,
            json: false,
        },
    };

    Ok(ExperimentConfig {
        model,
        noise,
        kernel,
        monitor,
        cv,
        limit,
        anscombe,
        run,
    })
}

pub fn load_config(path: &std::path::Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn load_config_with(path: &std::path::Path, over: &Overrides) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_with(&text, over)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg.model.t, 400);
        assert!(cfg.cv.is_none());
        assert_eq!(cfg.run.reps, 100);
        assert!(cfg.noise.martingale_difference());
    }

    #[test]
    fn full_config_round_trip() {
        let text = r#"
[model]
t = 200
m0 = [ { start = 0.0, kind = "constant", value = 0.0 } ]
delta = [ { start = 0.0, kind = "constant", value = 0.0 },
          { start = 0.5, kind = "linear", slope = 2.0, intercept = -1.0 } ]

[errors]
kind = "garch"
alpha0 = 0.5
alpha = [0.1]
beta = [0.3]

[kernel]
family = "half_gaussian"

[monitor]
gamma = 0.1
s0 = 0.2
threshold = 1.0
direction = "upper"
xi = 10.0

[cv]
gamma = 0.1
s0 = 0.2
xi_grid = [5.0, 10.0, 20.0]
s_grid = [0.5, 1.0]
checkpoints = [0.2, 0.6]

[limit]
grid_points = 500
sigma = 1.0
xi = 10.0
gamma = 0.1
s0 = 0.2
s_points = [0.5, 1.0]

[anscombe]
family = "first_passage"
mean = 2.0
sd = 1.0
a_values = [100.0, 1000.0]
a = 400.0

[run]
reps = 10
seed = 7
"#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.model.t, 200);
        assert_eq!(cfg.model.delta.first_nonzero(), Some(0.5));
        let cv = cfg.cv.unwrap();
        assert_eq!(cv.xi_grid.len(), 3);
        let ans = cfg.anscombe.unwrap();
        assert_eq!(ans.family.lambda_expected, Some(0.5));
        assert_eq!(cfg.run.seed, 7);
    }

    #[test]
    fn cross_reference_validation() {
        // change point at 0.5 with gamma = 0.6 violates q1 > gamma
        let bad = r#"
[model]
delta = [ { start = 0.0, kind = "constant", value = 0.0 },
          { start = 0.5, kind = "constant", value = 1.0 } ]

[cv]
gamma = 0.6
s0 = 0.7
xi_grid = [10.0]
"#;
        assert!(parse_config(bad).is_err());

        let bad_grid = r#"
[cv]
gamma = 0.1
s0 = 0.5
xi_grid = [10.0]
s_grid = [0.3]
"#;
        assert!(parse_config(bad_grid).is_err());

        let bad_key = "[cv]\nnot_a_key = 1\n";
        assert!(matches!(parse_config(bad_key), Err(Error::Parse(_))));
    }

    #[test]
    fn sign_enforcement_flag() {
        let text = r#"
[model]
enforce_sign = true
delta = [ { start = 0.0, kind = "constant", value = 1.0 },
          { start = 0.5, kind = "constant", value = -1.0 } ]
"#;
        assert!(parse_config(text).is_err());
    }
}
