//! Experiment configuration: JSON file plus flat command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use majlab_core::stats::PersistenceDriver;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    NielsenDecay,
    UniformDecay,
    PiDist,
    CltCheck,
    QuadratureReport,
    Persistence,
    Concentration,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        Self::NielsenDecay,
        Self::UniformDecay,
        Self::PiDist,
        Self::CltCheck,
        Self::QuadratureReport,
        Self::Persistence,
        Self::Concentration,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::NielsenDecay => "nielsen-decay",
            Self::UniformDecay => "uniform-decay",
            Self::PiDist => "pi-dist",
            Self::CltCheck => "clt-check",
            Self::QuadratureReport => "quadrature-report",
            Self::Persistence => "persistence",
            Self::Concentration => "concentration",
        }
    }

    /// Experiments that sample Wishart matrices and therefore need an m rule.
    pub fn uses_wishart(self) -> bool {
        matches!(
            self,
            Self::NielsenDecay | Self::PiDist | Self::CltCheck | Self::Concentration
        )
    }

    fn default_n_values(self) -> Vec<usize> {
        match self {
            Self::NielsenDecay => vec![8, 16, 32, 64, 128],
            Self::UniformDecay => (7..=13).map(|e| 1 << e).collect(),
            Self::PiDist => vec![128],
            Self::CltCheck => vec![256],
            Self::QuadratureReport => vec![],
            Self::Persistence => (8..=13).map(|e| 1 << e).collect(),
            Self::Concentration => vec![100],
        }
    }

    fn default_m_rule(self) -> Option<MRule> {
        match self {
            Self::NielsenDecay | Self::PiDist | Self::CltCheck => Some(MRule::FixedRatio { c: 1.0 }),
            Self::Concentration => Some(MRule::Offset { gap_c: 10.0 }),
            _ => None,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ConfigError::UnknownExperiment(s.to_string()))
    }
}

/// How `m` is derived from `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum MRule {
    /// `m = round(c n)`.
    FixedRatio { c: f64 },
    /// `m = n + ceil(gap_c sqrt(n ln n))`.
    Offset { gap_c: f64 },
    /// One `m` per entry of `n_values`.
    Explicit { m_values: Vec<usize> },
}

impl MRule {
    pub fn m_for(&self, idx: usize, n: usize) -> usize {
        match self {
            Self::FixedRatio { c } => ((c * n as f64).round() as usize).max(1),
            Self::Offset { gap_c } => {
                let nf = n as f64;
                n + (gap_c * (nf * nf.ln()).sqrt()).ceil() as usize
            }
            Self::Explicit { m_values } => m_values[idx],
        }
    }
}

/// Eigenvalue scaling for `clt-check`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CltScaling {
    /// `μ_k / n` with the Marchenko–Pastur targets.
    Raw,
    /// `(μ_k - m) / (2 sqrt(mn))` with the semicircle targets.
    Shifted,
}

/// Validated configuration. `workers` and the output location do not
/// influence results and are left out of the summary echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n_values: Vec<usize>,
    pub m_rule: Option<MRule>,
    /// Trials per `(n, m)` cell.
    pub trials: usize,
    pub seed: u64,
    #[serde(skip)]
    pub workers: usize,
    /// Majorisation comparison tolerances reported side by side.
    pub tolerances: Vec<f64>,
    pub validate_sampler: bool,
    /// Degrees of the monomial test functions (`clt-check`).
    pub degrees: Vec<u32>,
    pub clt_scaling: CltScaling,
    /// Relative band (`concentration`).
    pub eps: f64,
    /// Threshold (`persistence`).
    pub threshold: f64,
    pub driver: PersistenceDriver,
    /// Degrees for the limit constants (`quadrature-report`).
    pub k_list: Vec<u32>,
    /// Ratios for the limit functionals (`quadrature-report`).
    pub c_list: Vec<f64>,
    #[serde(skip)]
    pub out_dir: Option<PathBuf>,
    #[serde(skip)]
    pub per_trial_csv: bool,
}

/// File schema; every field optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Option<String>,
    n_values: Option<Vec<usize>>,
    m_rule: Option<MRule>,
    trials: Option<usize>,
    seed: Option<u64>,
    workers: Option<usize>,
    tolerances: Option<Vec<f64>>,
    validate_sampler: Option<bool>,
    degrees: Option<Vec<u32>>,
    clt_scaling: Option<CltScaling>,
    eps: Option<f64>,
    threshold: Option<f64>,
    driver: Option<PersistenceDriver>,
    k_list: Option<Vec<u32>>,
    c_list: Option<Vec<f64>>,
    out: Option<PathBuf>,
    per_trial_csv: Option<bool>,
}

/// Flat command-line overrides; `None` leaves the file value in place.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub experiment: Option<String>,
    pub n_values: Option<Vec<usize>>,
    pub c: Option<f64>,
    pub gap_c: Option<f64>,
    pub m_values: Option<Vec<usize>>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub validate_sampler: bool,
    pub eps: Option<f64>,
    pub threshold: Option<f64>,
    pub degrees: Option<Vec<u32>>,
    pub clt_scaling: Option<CltScaling>,
    pub driver: Option<PersistenceDriver>,
    pub no_trial_csv: bool,
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    finish(parse_raw(text)?, Overrides::default())
}

fn parse_raw(text: &str) -> Result<RawConfig, ConfigError> {
    serde_json::from_str(text).map_err(|e| ConfigError::MalformedJson(e.to_string()))
}

/// Reads `path` (if any), applies `overrides`, validates.
pub fn load_config(path: Option<&Path>, overrides: Overrides) -> Result<ExperimentConfig, ConfigError> {
    let raw = match path {
        None => RawConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| ConfigError::Unreadable(format!("{}: {e}", p.display())))?;
            parse_raw(&text)?
        }
    };
    finish(raw, overrides)
}

fn finish(raw: RawConfig, o: Overrides) -> Result<ExperimentConfig, ConfigError> {
    let name = o
        .experiment
        .or(raw.experiment)
        .ok_or_else(|| ConfigError::Invalid("no experiment given".into()))?;
    let experiment: ExperimentKind = name.parse()?;

    let explicit_rule = match (o.c, o.gap_c, o.m_values) {
        (Some(_), Some(_), _) | (Some(_), _, Some(_)) | (_, Some(_), Some(_)) => {
            return Err(ConfigError::InconsistentMRule(
                "give at most one of --c, --gap-C, --m".into(),
            ))
        }
        (Some(c), None, None) => Some(MRule::FixedRatio { c }),
        (None, Some(gap_c), None) => Some(MRule::Offset { gap_c }),
        (None, None, Some(m_values)) => Some(MRule::Explicit { m_values }),
        (None, None, None) => None,
    };
    let given_rule = explicit_rule.or(raw.m_rule);
    let m_rule = if experiment.uses_wishart() {
        given_rule.or_else(|| experiment.default_m_rule())
    } else {
        if given_rule.is_some() {
            return Err(ConfigError::InconsistentMRule(format!(
                "{experiment} takes no m rule"
            )));
        }
        None
    };

    let n_values = o
        .n_values
        .or(raw.n_values)
        .unwrap_or_else(|| experiment.default_n_values());
    if experiment != ExperimentKind::QuadratureReport && n_values.is_empty() {
        return Err(ConfigError::Invalid("n_values must be non-empty".into()));
    }
    if n_values.contains(&0) {
        return Err(ConfigError::Invalid("every n must be >= 1".into()));
    }
    match &m_rule {
        Some(MRule::FixedRatio { c }) if !(*c > 0.0) || !c.is_finite() => {
            return Err(ConfigError::InconsistentMRule(format!("ratio must be positive (got {c})")))
        }
        Some(MRule::Offset { gap_c }) if !(*gap_c >= 0.0) || !gap_c.is_finite() => {
            return Err(ConfigError::InconsistentMRule(format!("gap constant must be >= 0 (got {gap_c})")))
        }
        Some(MRule::Explicit { m_values }) => {
            if m_values.len() != n_values.len() {
                return Err(ConfigError::InconsistentMRule(format!(
                    "{} m values for {} n values",
                    m_values.len(),
                    n_values.len()
                )));
            }
            if m_values.contains(&0) {
                return Err(ConfigError::InconsistentMRule("every m must be >= 1".into()));
            }
        }
        _ => {}
    }
    if matches!(experiment, ExperimentKind::Concentration | ExperimentKind::CltCheck) {
        if let Some(rule) = &m_rule {
            if n_values.iter().enumerate().any(|(i, &n)| rule.m_for(i, n) < n) {
                return Err(ConfigError::InconsistentMRule(format!("{experiment} needs m >= n")));
            }
        }
    }

    let trials = o.trials.or(raw.trials).unwrap_or(1000);
    if trials == 0 {
        return Err(ConfigError::Invalid("trials must be >= 1".into()));
    }
    let workers = o.workers.or(raw.workers).unwrap_or(1);
    if workers == 0 {
        return Err(ConfigError::Invalid("workers must be >= 1".into()));
    }
    let tolerances = raw.tolerances.unwrap_or_else(|| vec![0.0, 1e-12]);
    if tolerances.is_empty() || tolerances.iter().any(|t| !(*t >= 0.0)) {
        return Err(ConfigError::Invalid("tolerances must be non-empty and >= 0".into()));
    }
    let clt_scaling = o.clt_scaling.or(raw.clt_scaling).unwrap_or(CltScaling::Raw);
    let degrees = o.degrees.or(raw.degrees).unwrap_or_else(|| match clt_scaling {
        CltScaling::Raw => vec![1, 2, 3],
        CltScaling::Shifted => vec![1, 2, 3, 4],
    });
    if degrees.is_empty() || degrees.contains(&0) {
        return Err(ConfigError::Invalid("degrees must be non-empty and >= 1".into()));
    }
    let eps = o.eps.or(raw.eps).unwrap_or(0.3);
    if !(eps > 0.0) {
        return Err(ConfigError::Invalid("eps must be positive".into()));
    }
    let threshold = o.threshold.or(raw.threshold).unwrap_or(1.0);
    if !threshold.is_finite() {
        return Err(ConfigError::Invalid("threshold must be finite".into()));
    }
    let k_list = raw.k_list.unwrap_or_else(|| vec![100, 200, 400]);
    if k_list.is_empty() || k_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ConfigError::Invalid("k_list must be strictly increasing".into()));
    }
    let c_list = raw.c_list.unwrap_or_else(|| vec![1.0, 2.0, 4.0]);
    if c_list.iter().any(|c| !(*c >= 1.0)) {
        return Err(ConfigError::Invalid("every c in c_list must be >= 1".into()));
    }

    Ok(ExperimentConfig {
        experiment,
        n_values,
        m_rule,
        trials,
        seed: o.seed.or(raw.seed).unwrap_or(0),
        workers,
        tolerances,
        validate_sampler: o.validate_sampler || raw.validate_sampler.unwrap_or(false),
        degrees,
        clt_scaling,
        eps,
        threshold,
        driver: o.driver.or(raw.driver).unwrap_or(PersistenceDriver::Gaussian),
        k_list,
        c_list,
        out_dir: o.out.or(raw.out),
        per_trial_csv: !o.no_trial_csv && raw.per_trial_csv.unwrap_or(true),
    })
}

impl ExperimentConfig {
    /// Convenience constructor with defaults for everything else.
    pub fn new(experiment: ExperimentKind) -> Self {
        finish(
            RawConfig::default(),
            Overrides {
                experiment: Some(experiment.name().to_string()),
                ..Overrides::default()
            },
        )
        .expect("defaults are valid")
    }

    /// `(n, m)` cells; `m` is `None` for experiments without a Wishart matrix.
    pub fn cells(&self) -> Vec<(usize, Option<usize>)> {
        self.n_values
            .iter()
            .enumerate()
            .map(|(i, &n)| (n, self.m_rule.as_ref().map(|r| r.m_for(i, n))))
            .collect()
    }
}
