//! Trial dispatch, parallel execution and aggregation.

use std::panic::{catch_unwind, AssertUnwindSafe};

use majlab_core::ensembles::{sorted_uniform_simplex_renyi, trace_normalise, wishart_spectrum};
use majlab_core::limitlaws::{
    big_gamma, big_gamma_c_matrix, gamma_mp, gamma_semicircle, recommended_nodes, GammaMode, PrefactorMode,
};
use majlab_core::majorization::{suffix_sums, tails_dominated_at, vidal_pi};
use majlab_core::rng::derive_substream;
use majlab_core::stats::{
    clt_diagnostic, cor_normalized_statistic, linear_statistics, first_exit_time, fit_power_law, singular_report,
    trace_tail_table, within_band, CltDiagnostics, ConcentrationResult, CorollaryForm, MomentSummary,
    PersistenceResult, PowerLawFit, ScalingMode, SingularProbeReport, TraceTailTable,
};
use majlab_core::{EnsembleParams, RngStream, SamplerPath, TestFunction};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{CltScaling, ExperimentConfig, ExperimentKind};
use crate::error::CliError;
use crate::quadrature::{quadrature_report, QuadratureReport};

type CoreResult<T> = majlab_core::Result<T>;

/// One executed trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub experiment: ExperimentKind,
    pub n: usize,
    pub m: Option<usize>,
    /// Index within the cell.
    pub trial: u64,
    /// Global trial index, which is also the substream id.
    pub stream_id: u64,
    pub payload: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRecord {
    /// Wall-clock seconds since the Unix epoch. The only field that varies
    /// between identical runs; it is serialised on its own line.
    pub timestamp: String,
    pub run_id: String,
    pub config: ExperimentConfig,
    pub payload_columns: Vec<String>,
    pub total_trials: usize,
    pub cells: Vec<CellSummary>,
    pub aggregate: ExperimentAggregate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellSummary {
    pub n: usize,
    pub m: Option<usize>,
    pub trials: usize,
    /// Column means of the payload, accumulated in trial order.
    pub column_means: Vec<f64>,
    pub detail: CellDetail,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Proportion {
    pub probability: f64,
    pub stderr: f64,
}

impl Proportion {
    fn from_mean(p: f64, trials: usize) -> Self {
        Self {
            probability: p,
            stderr: (p * (1.0 - p) / trials as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SingleK {
    /// 1-based tail index.
    pub k: usize,
    pub event: Proportion,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatisticSummary {
    pub label: String,
    pub mean: f64,
    pub stderr: f64,
    /// Limit-law prediction of the mean, per prefactor convention.
    pub target_as_written: Option<f64>,
    pub target_density: Option<f64>,
    /// `(mean - target) / stderr` with the density-mode target.
    pub z_score: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CltCell {
    pub scaling: CltScaling,
    pub c: f64,
    pub statistics: Vec<StatisticSummary>,
    pub corollary: Vec<StatisticSummary>,
    pub calibration: Vec<CalibrationEntry>,
    pub covariance: Vec<Vec<f64>>,
    pub gamma_as_written: Vec<Vec<f64>>,
    pub gamma_calibrated: Vec<Vec<f64>>,
    /// `m/n`, the exact variance of the degree-one raw statistic.
    pub exact_var_x1: Option<f64>,
    pub var_x1_over_as_written: Option<f64>,
    pub diagnostics: Option<CltDiagnostics>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PiCell {
    pub mean: f64,
    pub stderr: f64,
    pub std_dev: f64,
    /// `(q, value)` by nearest rank.
    pub quantiles: Vec<(f64, f64)>,
    pub below_0_9: Proportion,
    pub equal_one: Proportion,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConcentrationCell {
    pub band: ConcentrationResult,
    pub singular: SingularProbeReport,
    pub trace_tail: TraceTailTable,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CellDetail {
    Decay {
        tolerances: Vec<f64>,
        dominated: Vec<Proportion>,
        single_k: Option<SingleK>,
        mean_pi: Option<f64>,
    },
    Pi(PiCell),
    Clt(Box<CltCell>),
    Persistence(PersistenceResult),
    Concentration(Box<ConcentrationCell>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitEntry {
    pub label: String,
    pub fit: Option<PowerLawFit>,
    pub error: Option<String>,
}

impl FitEntry {
    fn new(label: impl Into<String>, ns: &[f64], ps: &[f64], ses: &[f64]) -> Self {
        let (fit, error) = match fit_power_law(ns, ps, ses) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Self {
            label: label.into(),
            fit,
            error,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentAggregate {
    None,
    /// One fit per tolerance.
    Decay { fits: Vec<FitEntry> },
    Persistence { fit: FitEntry },
    Quadrature(Box<QuadratureReport>),
}

/// Row of the plot CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    pub n: usize,
    pub probability: f64,
    pub stderr: f64,
    pub fitted: f64,
}

pub struct RunOutput {
    pub summary: SummaryRecord,
    pub trials: Vec<TrialRecord>,
}

/// `(n, m)` units of work. Persistence runs every path to the largest `n`
/// and reads all survival indicators off one exit time.
pub fn trial_cells(cfg: &ExperimentConfig) -> Vec<(usize, Option<usize>)> {
    match cfg.experiment {
        ExperimentKind::QuadratureReport => Vec::new(),
        ExperimentKind::Persistence => vec![(cfg.n_values.iter().copied().max().unwrap_or(0), None)],
        _ => cfg.cells(),
    }
}

/// Payload column names for the trial CSV.
pub fn payload_columns(cfg: &ExperimentConfig) -> Vec<String> {
    let tol_cols = || cfg.tolerances.iter().map(|t| format!("dominated_tol_{t:e}"));
    match cfg.experiment {
        ExperimentKind::NielsenDecay => tol_cols()
            .chain(["single_k".to_string(), "pi".to_string()])
            .collect(),
        ExperimentKind::UniformDecay => tol_cols().collect(),
        ExperimentKind::PiDist => vec!["pi".into()],
        ExperimentKind::CltCheck => {
            let mut cols: Vec<String> = cfg.degrees.iter().map(|d| format!("x{d}")).collect();
            cols.extend(corollary_degrees(cfg).iter().map(|d| format!("corollary_{d}")));
            cols
        }
        ExperimentKind::Persistence => vec!["exit_time".into()],
        ExperimentKind::Concentration => vec![
            "in_band".into(),
            "sigma_min".into(),
            "sigma_max".into(),
            "n_mu_min".into(),
            "trace".into(),
        ],
        ExperimentKind::QuadratureReport => Vec::new(),
    }
}

fn corollary_degrees(cfg: &ExperimentConfig) -> Vec<u32> {
    match cfg.clt_scaling {
        CltScaling::Raw => cfg.degrees.iter().copied().filter(|&d| d >= 2).collect(),
        CltScaling::Shifted => cfg.degrees.iter().copied().filter(|&d| d % 2 == 0).collect(),
    }
}

/// Per-cell constants shared by every trial of the cell.
struct Cell {
    n: usize,
    m: Option<usize>,
    params: Option<EnsembleParams>,
    path: SamplerPath,
    functions: Vec<TestFunction>,
    corollary: Vec<CorollaryForm>,
    calibration: Vec<CalibrationEntry>,
}

/// Calibration draws use stream ids from here on, disjoint from trial ids.
pub const CALIBRATION_STREAM_BASE: u64 = 1 << 62;

/// Plug-in `E X_d` for a corollary statistic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationEntry {
    pub degree: u32,
    /// Mean over the calibration draws.
    pub plug_in: f64,
    /// `n γ_c(x^d)` (raw) or `n γ(x^d)` in density mode (shifted).
    pub asymptotic: f64,
}

fn quad_nodes(degrees: &[u32]) -> usize {
    recommended_nodes(degrees.iter().copied().max().unwrap_or(1))
}

/// Means of `sum_k s_k^d` over `cfg.trials` independent draws, where `s` is
/// the raw or shifted scaling.
fn calibrate(cfg: &ExperimentConfig, cell_index: usize, p: EnsembleParams, path: SamplerPath, degrees: &[u32]) -> CoreResult<Vec<f64>> {
    let mode = match cfg.clt_scaling {
        CltScaling::Raw => ScalingMode::Raw,
        CltScaling::Shifted => ScalingMode::Shifted,
    };
    let fs: Vec<TestFunction> = degrees.iter().map(|&d| TestFunction::monomial(d)).collect();
    let base = CALIBRATION_STREAM_BASE + cell_index as u64 * cfg.trials as u64;
    let draws = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let w = wishart_spectrum(p, path, &mut derive_substream(cfg.seed, base + t))?.padded(p.n);
            linear_statistics(&w.spectrum, &fs, mode)
        })
        .collect::<CoreResult<Vec<_>>>()?;
    let mut sums = vec![0.0; degrees.len()];
    for d in &draws {
        for (s, v) in sums.iter_mut().zip(d) {
            *s += v;
        }
    }
    Ok(sums.into_iter().map(|s| s / cfg.trials as f64).collect())
}

fn build_cell(cfg: &ExperimentConfig, cell_index: usize, n: usize, m: Option<usize>) -> CoreResult<Cell> {
    let params = m.map(|m| EnsembleParams::new(n, m)).transpose()?;
    let path = if cfg.validate_sampler {
        SamplerPath::Dense
    } else {
        SamplerPath::for_dimension(n)
    };
    let mut functions = Vec::new();
    let mut corollary = Vec::new();
    let mut calibration = Vec::new();
    if cfg.experiment == ExperimentKind::CltCheck {
        let p = params.expect("clt-check has an m rule");
        functions = cfg.degrees.iter().map(|&d| TestFunction::monomial(d)).collect();
        let nodes = quad_nodes(&cfg.degrees);
        let c = p.m as f64 / n as f64;
        let mut degrees = corollary_degrees(cfg);
        if cfg.clt_scaling == CltScaling::Raw && !degrees.is_empty() {
            degrees.insert(0, 1);
        }
        let plug_ins = calibrate(cfg, cell_index, p, path, &degrees)?;
        for (&d, &plug_in) in degrees.iter().zip(&plug_ins) {
            let f = TestFunction::monomial(d);
            let asymptotic = n as f64
                * match cfg.clt_scaling {
                    CltScaling::Raw => gamma_mp(&f, c, nodes)?,
                    CltScaling::Shifted => gamma_semicircle(&f, nodes, GammaMode::Density)?,
                };
            calibration.push(CalibrationEntry {
                degree: d,
                plug_in,
                asymptotic,
            });
        }
        for d in corollary_degrees(cfg) {
            let plug = |deg: u32| calibration.iter().find(|e| e.degree == deg).map(|e| e.plug_in).unwrap();
            corollary.push(match cfg.clt_scaling {
                CltScaling::Raw => CorollaryForm::Balanced {
                    i: d,
                    expected_x1: plug(1),
                    expected_xi: plug(d),
                },
                CltScaling::Shifted => CorollaryForm::Imbalanced {
                    i: d / 2,
                    m: p.m,
                    expected_x2i: plug(d),
                },
            });
        }
    }
    Ok(Cell {
        n,
        m,
        params,
        path,
        functions,
        corollary,
        calibration,
    })
}

fn build_cells(cfg: &ExperimentConfig) -> CoreResult<Vec<Cell>> {
    trial_cells(cfg)
        .into_iter()
        .enumerate()
        .map(|(i, (n, m))| build_cell(cfg, i, n, m))
        .collect()
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn wishart_pair(cell: &Cell, rng: &mut RngStream) -> CoreResult<(majlab_core::SimplexVector, majlab_core::SimplexVector)> {
    let p = cell.params.expect("wishart cell");
    let x = trace_normalise(&wishart_spectrum(p, cell.path, rng)?)?.padded(cell.n);
    let y = trace_normalise(&wishart_spectrum(p, cell.path, rng)?)?.padded(cell.n);
    Ok((x, y))
}

fn run_trial(cfg: &ExperimentConfig, cell: &Cell, rng: &mut RngStream) -> CoreResult<Vec<f64>> {
    match cfg.experiment {
        ExperimentKind::NielsenDecay => {
            let (x, y) = wishart_pair(cell, rng)?;
            let mut out: Vec<f64> = tails_dominated_at(&x, &y, &cfg.tolerances)?.into_iter().map(flag).collect();
            let k = (cell.n / 2).max(1);
            let sx = suffix_sums(x.values())?;
            let sy = suffix_sums(y.values())?;
            out.push(flag(sx[k - 1] <= sy[k - 1]));
            out.push(vidal_pi(&x, &y)?);
            Ok(out)
        }
        ExperimentKind::UniformDecay => {
            let x = sorted_uniform_simplex_renyi(cell.n, rng)?;
            let y = sorted_uniform_simplex_renyi(cell.n, rng)?;
            Ok(tails_dominated_at(&x, &y, &cfg.tolerances)?.into_iter().map(flag).collect())
        }
        ExperimentKind::PiDist => {
            let (x, y) = wishart_pair(cell, rng)?;
            Ok(vec![vidal_pi(&x, &y)?])
        }
        ExperimentKind::CltCheck => {
            let p = cell.params.expect("wishart cell");
            let w = wishart_spectrum(p, cell.path, rng)?.padded(p.n);
            let mode = match cfg.clt_scaling {
                CltScaling::Raw => ScalingMode::Raw,
                CltScaling::Shifted => ScalingMode::Shifted,
            };
            let mut out = linear_statistics(&w.spectrum, &cell.functions, mode)?;
            let y_mode = match cfg.clt_scaling {
                CltScaling::Raw => ScalingMode::Normalised,
                CltScaling::Shifted => ScalingMode::Centered,
            };
            for form in &cell.corollary {
                let d = match *form {
                    CorollaryForm::Balanced { i, .. } => i,
                    CorollaryForm::Imbalanced { i, .. } => 2 * i,
                };
                let y = linear_statistics(&w.spectrum, &[TestFunction::monomial(d)], y_mode)?[0];
                out.push(cor_normalized_statistic(y, p.n, *form)?);
            }
            Ok(out)
        }
        ExperimentKind::Persistence => {
            let exit = first_exit_time(cell.n, cfg.threshold, cfg.driver, rng);
            Ok(vec![exit.map_or(0.0, |e| e as f64)])
        }
        ExperimentKind::Concentration => {
            let p = cell.params.expect("wishart cell");
            let a = wishart_spectrum(p, cell.path, rng)?;
            let b = wishart_spectrum(p, cell.path, rng)?;
            let in_band = within_band(a.spectrum.values(), b.spectrum.values(), cfg.eps);
            let v = a.spectrum.values();
            let smallest = v[v.len() - 1].max(0.0);
            Ok(vec![
                flag(in_band),
                smallest.sqrt(),
                v[0].sqrt(),
                p.n as f64 * smallest,
                a.trace,
            ])
        }
        ExperimentKind::QuadratureReport => Ok(Vec::new()),
    }
}

fn panic_message(e: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = e.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = e.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".to_string()
    }
}

fn execute(cfg: &ExperimentConfig, cell: &Cell, cell_index: usize, trial: u64) -> Result<TrialRecord, CliError> {
    let stream_id = cell_index as u64 * cfg.trials as u64 + trial;
    let mut rng = derive_substream(cfg.seed, stream_id);
    let payload = match catch_unwind(AssertUnwindSafe(|| run_trial(cfg, cell, &mut rng))) {
        Ok(Ok(p)) => p,
        Ok(Err(source)) => {
            return Err(CliError::Trial {
                trial,
                stream_id,
                source,
            })
        }
        Err(e) => {
            return Err(CliError::Panic {
                trial,
                stream_id,
                message: panic_message(e),
            })
        }
    };
    Ok(TrialRecord {
        experiment: cfg.experiment,
        n: cell.n,
        m: cell.m,
        trial,
        stream_id,
        payload,
    })
}

/// Re-executes one trial from its cell index and in-cell trial index.
pub fn replay_trial(cfg: &ExperimentConfig, cell_index: usize, trial: u64) -> Result<TrialRecord, CliError> {
    let cells = trial_cells(cfg);
    let &(n, m) = cells
        .get(cell_index)
        .ok_or_else(|| CliError::Config(crate::error::ConfigError::Invalid(format!("no cell {cell_index}"))))?;
    if trial >= cfg.trials as u64 {
        return Err(CliError::Config(crate::error::ConfigError::Invalid(format!(
            "trial {trial} out of range"
        ))));
    }
    let cell = build_cell(cfg, cell_index, n, m)?;
    execute(cfg, &cell, cell_index, trial)
}

/// Runs every trial on a pool of `cfg.workers` threads and aggregates in
/// ascending trial order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::Config(crate::error::ConfigError::Invalid(format!("thread pool: {e}"))))?;
    pool.install(|| {
        let cells = build_cells(cfg)?;
        let per_cell = cfg.trials as u64;
        let total = cells.len() as u64 * per_cell;
        let results: Vec<Result<TrialRecord, CliError>> = (0..total)
            .into_par_iter()
            .map(|g| {
                let ci = (g / per_cell) as usize;
                execute(cfg, &cells[ci], ci, g % per_cell)
            })
            .collect();
        let trials = results.into_iter().collect::<Result<Vec<_>, _>>()?;
        let summary = summarise_cells(cfg, &cells, &trials)?;
        Ok(RunOutput { summary, trials })
    })
}

fn proportion_col(rows: &[&TrialRecord], col: usize) -> Proportion {
    let mean = rows.iter().map(|r| r.payload[col]).sum::<f64>() / rows.len() as f64;
    Proportion::from_mean(mean, rows.len())
}

fn column_means(rows: &[&TrialRecord], width: usize) -> Vec<f64> {
    let mut sums = vec![0.0; width];
    for r in rows {
        for (s, v) in sums.iter_mut().zip(&r.payload) {
            *s += v;
        }
    }
    sums.iter().map(|s| s / rows.len() as f64).collect()
}

/// Aggregates trial records. Used both after a run and when re-reading a
/// trial CSV.
pub fn summarise(cfg: &ExperimentConfig, trials: &[TrialRecord]) -> Result<SummaryRecord, CliError> {
    if cfg.experiment != ExperimentKind::QuadratureReport && trials.is_empty() {
        return Err(CliError::EmptyTrials);
    }
    summarise_cells(cfg, &build_cells(cfg)?, trials)
}

fn summarise_cells(cfg: &ExperimentConfig, built: &[Cell], trials: &[TrialRecord]) -> Result<SummaryRecord, CliError> {
    if cfg.experiment != ExperimentKind::QuadratureReport && trials.is_empty() {
        return Err(CliError::EmptyTrials);
    }
    let cells: Vec<(usize, Option<usize>)> = built.iter().map(|c| (c.n, c.m)).collect();
    let columns = payload_columns(cfg);
    let per_cell = cfg.trials as u64;
    let mut grouped: Vec<Vec<&TrialRecord>> = vec![Vec::new(); cells.len()];
    for r in trials {
        let ci = (r.stream_id / per_cell) as usize;
        let ok = ci < cells.len()
            && cells[ci] == (r.n, r.m)
            && r.trial == r.stream_id % per_cell
            && r.payload.len() == columns.len()
            && r.experiment == cfg.experiment;
        if !ok {
            return Err(CliError::Config(crate::error::ConfigError::Invalid(format!(
                "trial record (n={}, trial={}, stream={}) does not match the configuration",
                r.n, r.trial, r.stream_id
            ))));
        }
        grouped[ci].push(r);
    }
    for (ci, g) in grouped.iter_mut().enumerate() {
        if g.len() != cfg.trials {
            return Err(CliError::Config(crate::error::ConfigError::Invalid(format!(
                "cell {ci} has {} trials, expected {}",
                g.len(),
                cfg.trials
            ))));
        }
        g.sort_by_key(|r| r.trial);
    }

    let mut cell_summaries = Vec::with_capacity(cells.len());
    for ((&(n, m), cell), rows) in cells.iter().zip(built).zip(&grouped) {
        let detail = cell_detail(cfg, cell, rows)?;
        cell_summaries.push(CellSummary {
            n,
            m,
            trials: rows.len(),
            column_means: column_means(rows, columns.len()),
            detail,
        });
    }
    let aggregate = experiment_aggregate(cfg, &cell_summaries)?;
    let config_echo = serde_json::to_string(cfg).expect("config serialises");
    Ok(SummaryRecord {
        timestamp: crate::output::timestamp(),
        run_id: crate::output::run_id(&config_echo),
        config: cfg.clone(),
        payload_columns: columns,
        total_trials: trials.len(),
        cells: cell_summaries,
        aggregate,
    })
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

fn stat_summary(label: String, s: &MomentSummary, i: usize, as_written: Option<f64>, density: Option<f64>) -> StatisticSummary {
    let mean = s.mean[i];
    let stderr = s.std_error(i);
    StatisticSummary {
        label,
        mean,
        stderr,
        target_as_written: as_written,
        target_density: density,
        z_score: density.map(|t| (mean - t) / stderr),
    }
}

fn cell_detail(cfg: &ExperimentConfig, cell: &Cell, rows: &[&TrialRecord]) -> Result<CellDetail, CliError> {
    let (n, m) = (cell.n, cell.m);
    let t = rows.len();
    Ok(match cfg.experiment {
        ExperimentKind::NielsenDecay | ExperimentKind::UniformDecay => {
            let nt = cfg.tolerances.len();
            let dominated = (0..nt).map(|c| proportion_col(rows, c)).collect();
            let (single_k, mean_pi) = if cfg.experiment == ExperimentKind::NielsenDecay {
                (
                    Some(SingleK {
                        k: (n / 2).max(1),
                        event: proportion_col(rows, nt),
                    }),
                    Some(rows.iter().map(|r| r.payload[nt + 1]).sum::<f64>() / t as f64),
                )
            } else {
                (None, None)
            };
            CellDetail::Decay {
                tolerances: cfg.tolerances.clone(),
                dominated,
                single_k,
                mean_pi,
            }
        }
        ExperimentKind::PiDist => {
            let mut s = MomentSummary::new(1);
            for r in rows {
                s.push(&r.payload)?;
            }
            let mut sorted: Vec<f64> = rows.iter().map(|r| r.payload[0]).collect();
            sorted.sort_by(f64::total_cmp);
            let frac = |pred: &dyn Fn(f64) -> bool| {
                Proportion::from_mean(sorted.iter().filter(|&&v| pred(v)).count() as f64 / t as f64, t)
            };
            CellDetail::Pi(PiCell {
                mean: s.mean[0],
                stderr: s.std_error(0),
                std_dev: s.variance(0).sqrt(),
                quantiles: [0.05, 0.25, 0.5, 0.75, 0.95]
                    .iter()
                    .map(|&q| (q, quantile(&sorted, q)))
                    .collect(),
                below_0_9: frac(&|v| v < 0.9),
                equal_one: frac(&|v| v == 1.0),
            })
        }
        ExperimentKind::CltCheck => CellDetail::Clt(Box::new(clt_cell(cfg, cell, rows)?)),
        ExperimentKind::Persistence => {
            let exits: Vec<Option<usize>> = rows
                .iter()
                .map(|r| {
                    let e = r.payload[0];
                    (e > 0.0).then_some(e as usize)
                })
                .collect();
            CellDetail::Persistence(PersistenceResult::from_exit_times(&cfg.n_values, cfg.threshold, &exits)?)
        }
        ExperimentKind::Concentration => {
            let p = EnsembleParams::new(n, m.expect("m rule"))?;
            let flags: Vec<bool> = rows.iter().map(|r| r.payload[0] == 1.0).collect();
            let sigmas: Vec<(f64, f64)> = rows.iter().map(|r| (r.payload[1], r.payload[2])).collect();
            let traces: Vec<f64> = rows.iter().map(|r| r.payload[4]).collect();
            let sd = ((n * p.m) as f64).sqrt();
            let t_values: Vec<f64> = [0.5, 1.0, 2.0, 3.0].iter().map(|k| k * sd).collect();
            CellDetail::Concentration(Box::new(ConcentrationCell {
                band: ConcentrationResult::from_flags(p, cfg.eps, &flags)?,
                singular: singular_report(p, &sigmas)?,
                trace_tail: trace_tail_table(p, &t_values, &traces)?,
            }))
        }
        ExperimentKind::QuadratureReport => unreachable!("quadrature-report has no cells"),
    })
}

fn clt_cell(cfg: &ExperimentConfig, cell: &Cell, rows: &[&TrialRecord]) -> Result<CltCell, CliError> {
    let (n, m) = (cell.n, cell.m.expect("m rule"));
    let k = cfg.degrees.len();
    let width = k + corollary_degrees(cfg).len();
    let mut s = MomentSummary::new(width);
    for r in rows {
        s.push(&r.payload)?;
    }
    let mut main = MomentSummary::new(k);
    for r in rows {
        main.push(&r.payload[..k])?;
    }
    let nodes = quad_nodes(&cfg.degrees);
    let nf = n as f64;
    let c = m as f64 / nf;
    let fs: Vec<TestFunction> = cfg.degrees.iter().map(|&d| TestFunction::monomial(d)).collect();
    let (statistics, gamma_as_written, gamma_calibrated) = match cfg.clt_scaling {
        CltScaling::Raw => {
            let stats = cfg
                .degrees
                .iter()
                .enumerate()
                .map(|(i, &d)| {
                    let target = nf * gamma_mp(&fs[i], c, nodes)?;
                    Ok(stat_summary(format!("x{d}"), &s, i, Some(target), Some(target)))
                })
                .collect::<CoreResult<Vec<_>>>()?;
            (
                stats,
                big_gamma_c_matrix(&fs, c, nodes, PrefactorMode::AsWritten)?,
                big_gamma_c_matrix(&fs, c, nodes, PrefactorMode::CltCalibrated)?,
            )
        }
        CltScaling::Shifted => {
            let stats = cfg
                .degrees
                .iter()
                .enumerate()
                .map(|(i, &d)| {
                    let aw = nf * gamma_semicircle(&fs[i], nodes, GammaMode::AsWritten)?;
                    let de = nf * gamma_semicircle(&fs[i], nodes, GammaMode::Density)?;
                    Ok(stat_summary(format!("x{d}"), &s, i, Some(aw), Some(de)))
                })
                .collect::<CoreResult<Vec<_>>>()?;
            let gram = |mode| -> CoreResult<Vec<Vec<f64>>> {
                let mut g = vec![vec![0.0; k]; k];
                for i in 0..k {
                    for j in i..k {
                        let v = big_gamma(&fs[i], &fs[j], nodes, mode)?;
                        g[i][j] = v;
                        g[j][i] = v;
                    }
                }
                Ok(g)
            };
            (stats, gram(PrefactorMode::AsWritten)?, gram(PrefactorMode::CltCalibrated)?)
        }
    };
    let corollary = corollary_degrees(cfg)
        .iter()
        .enumerate()
        .map(|(j, d)| stat_summary(format!("corollary_{d}"), &s, k + j, None, Some(0.0)))
        .collect();
    let (exact_var_x1, var_x1_over_as_written) = match (cfg.clt_scaling, cfg.degrees.iter().position(|&d| d == 1)) {
        (CltScaling::Raw, Some(i)) => (Some(c), Some(main.variance(i) / gamma_as_written[i][i])),
        _ => (None, None),
    };
    let diagnostics = if rows.len() >= 1000 {
        let samples: Vec<Vec<f64>> = rows.iter().map(|r| r.payload[..k].to_vec()).collect();
        Some(clt_diagnostic(&main, &samples, Some(&gamma_calibrated))?)
    } else {
        None
    };
    Ok(CltCell {
        scaling: cfg.clt_scaling,
        c,
        statistics,
        corollary,
        calibration: cell.calibration.clone(),
        covariance: main.covariance(),
        gamma_as_written,
        gamma_calibrated,
        exact_var_x1,
        var_x1_over_as_written,
        diagnostics,
    })
}

fn experiment_aggregate(cfg: &ExperimentConfig, cells: &[CellSummary]) -> Result<ExperimentAggregate, CliError> {
    Ok(match cfg.experiment {
        ExperimentKind::NielsenDecay | ExperimentKind::UniformDecay => {
            let ns: Vec<f64> = cells.iter().map(|c| c.n as f64).collect();
            let fits = cfg
                .tolerances
                .iter()
                .enumerate()
                .map(|(ti, tol)| {
                    let (ps, ses): (Vec<f64>, Vec<f64>) = cells
                        .iter()
                        .map(|c| match &c.detail {
                            CellDetail::Decay { dominated, .. } => (dominated[ti].probability, dominated[ti].stderr),
                            _ => unreachable!(),
                        })
                        .unzip();
                    FitEntry::new(format!("tol={tol:e}"), &ns, &ps, &ses)
                })
                .collect();
            ExperimentAggregate::Decay { fits }
        }
        ExperimentKind::Persistence => match &cells[0].detail {
            CellDetail::Persistence(r) => {
                let ns: Vec<f64> = r.n_values.iter().map(|&n| n as f64).collect();
                ExperimentAggregate::Persistence {
                    fit: FitEntry::new(format!("t={}", r.t), &ns, &r.probabilities, &r.stderrs),
                }
            }
            _ => unreachable!(),
        },
        ExperimentKind::QuadratureReport => {
            ExperimentAggregate::Quadrature(Box::new(quadrature_report(&cfg.k_list, &cfg.c_list)?))
        }
        _ => ExperimentAggregate::None,
    })
}

/// Rows for the plot CSV: the primary tolerance for decay experiments, the
/// survival curve for persistence.
pub fn plot_rows(summary: &SummaryRecord) -> Option<Vec<PlotRow>> {
    match &summary.aggregate {
        ExperimentAggregate::Decay { fits } => {
            let fit = fits.first()?.fit.as_ref();
            Some(
                summary
                    .cells
                    .iter()
                    .map(|c| {
                        let CellDetail::Decay { dominated, .. } = &c.detail else { unreachable!() };
                        PlotRow {
                            n: c.n,
                            probability: dominated[0].probability,
                            stderr: dominated[0].stderr,
                            fitted: fit.map_or(f64::NAN, |f| f.fitted(c.n as f64)),
                        }
                    })
                    .collect(),
            )
        }
        ExperimentAggregate::Persistence { fit } => {
            let CellDetail::Persistence(r) = &summary.cells[0].detail else { unreachable!() };
            Some(
                r.n_values
                    .iter()
                    .zip(r.probabilities.iter().zip(&r.stderrs))
                    .map(|(&n, (&p, &se))| PlotRow {
                        n,
                        probability: p,
                        stderr: se,
                        fitted: fit.fit.as_ref().map_or(f64::NAN, |f| f.fitted(n as f64)),
                    })
                    .collect(),
            )
        }
        _ => None,
    }
}
