//! Linear eigenvalue statistics, moment accumulation, CLT diagnostics,
//! persistence of iterated sums, power-law fits and concentration probes.

pub mod ks;

use serde::{Deserialize, Serialize};

use crate::eigensolve::SpectrumRaw;
use crate::ensembles::{sample_gaussian_matrix, wishart_spectrum, EnsembleParams, SamplerPath};
use crate::error::{Error, Result};
use crate::limitlaws::TestFunction;
use crate::rng::{derive_substream, RngStream};
use ks::{ks_one_sample, normal_cdf, KsResult};

/// How eigenvalues are rescaled before a test function is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingMode {
    /// `μ_k / n`.
    Raw,
    /// `(μ_k - m) / (2 sqrt(mn))`.
    Shifted,
    /// `λ_k = μ_k / sum μ`.
    Normalised,
    /// `λ_k - 1/n`.
    Centered,
}

/// Rescaled eigenvalues. The spectrum must hold all `n` eigenvalues
/// (pad with zeros first when `m < n`).
pub fn scaled_values(spectrum: &SpectrumRaw, mode: ScalingMode) -> Result<Vec<f64>> {
    let v = spectrum.values();
    let n = spectrum.n();
    if v.len() != n {
        return Err(Error::invalid(format!(
            "spectrum holds {} of {n} eigenvalues; pad before computing statistics",
            v.len()
        )));
    }
    let nf = n as f64;
    Ok(match mode {
        ScalingMode::Raw => v.iter().map(|x| x / nf).collect(),
        ScalingMode::Shifted => {
            let m = spectrum.m();
            if m == 0 {
                return Err(Error::invalid("shifted scaling needs the width m"));
            }
            let mf = m as f64;
            let s = 2.0 * (mf * nf).sqrt();
            v.iter().map(|x| (x - mf) / s).collect()
        }
        ScalingMode::Normalised | ScalingMode::Centered => {
            let total = spectrum.sum();
            if !(total > 0.0) {
                return Err(Error::Degenerate("spectrum sums to zero".into()));
            }
            let shift = if mode == ScalingMode::Centered { 1.0 / nf } else { 0.0 };
            v.iter().map(|x| x / total - shift).collect()
        }
    })
}

/// `sum_k f_i(scaled μ_k)` for each function.
pub fn linear_statistics(spectrum: &SpectrumRaw, functions: &[TestFunction], mode: ScalingMode) -> Result<Vec<f64>> {
    let xs = scaled_values(spectrum, mode)?;
    Ok(functions
        .iter()
        .map(|f| xs.iter().rev().map(|&x| f.eval(x)).sum())
        .collect())
}

/// Normalisation of a trace-normalised moment `Y_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "form")]
pub enum CorollaryForm {
    /// `n (Y_i (E X_1)^i / E X_i - 1)` with `Y_i = sum λ_k^i`.
    Balanced { i: u32, expected_x1: f64, expected_xi: f64 },
    /// `n (Y_{2i} (mn/4)^i / E X_{2i} - 1)` with `Y_{2i} = sum (λ_k - 1/n)^{2i}`.
    Imbalanced { i: u32, m: usize, expected_x2i: f64 },
}

pub fn cor_normalized_statistic(y: f64, n: usize, form: CorollaryForm) -> Result<f64> {
    let nf = n as f64;
    let (scale, denom) = match form {
        CorollaryForm::Balanced { i, expected_x1, expected_xi } => (expected_x1.powi(i as i32), expected_xi),
        CorollaryForm::Imbalanced { i, m, expected_x2i } => ((m as f64 * nf / 4.0).powi(i as i32), expected_x2i),
    };
    if denom == 0.0 || !denom.is_finite() || !scale.is_finite() {
        return Err(Error::Degenerate(format!("normaliser {denom} is zero or non-finite")));
    }
    Ok(nf * (y * scale / denom - 1.0))
}

/// Streaming mean and covariance with a parallel merge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub count: u64,
    pub mean: Vec<f64>,
    /// Sum of outer products of deviations.
    comoment: Vec<Vec<f64>>,
}

impl MomentSummary {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            comoment: vec![vec![0.0; dim]; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn push(&mut self, obs: &[f64]) -> Result<()> {
        if obs.len() != self.dim() {
            return Err(Error::invalid(format!(
                "observation has dimension {}, summary has {}",
                obs.len(),
                self.dim()
            )));
        }
        self.count += 1;
        let n = self.count as f64;
        let delta: Vec<f64> = obs.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d / n;
        }
        for i in 0..delta.len() {
            let di = obs[i] - self.mean[i];
            for j in 0..delta.len() {
                self.comoment[i][j] += delta[j] * di;
            }
        }
        Ok(())
    }

    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::invalid("cannot merge summaries of different dimension"));
        }
        if other.count == 0 {
            return Ok(self.clone());
        }
        if self.count == 0 {
            return Ok(other.clone());
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        let mean = self.mean.iter().zip(&delta).map(|(a, d)| a + d * nb / n).collect();
        let k = self.dim();
        let mut comoment = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in 0..k {
                comoment[i][j] = self.comoment[i][j] + other.comoment[i][j] + delta[i] * delta[j] * na * nb / n;
            }
        }
        Ok(Self {
            count: self.count + other.count,
            mean,
            comoment,
        })
    }

    /// Sample covariance (divisor `count - 1`); zeros below two observations.
    pub fn covariance(&self) -> Vec<Vec<f64>> {
        let k = self.dim();
        if self.count < 2 {
            return vec![vec![0.0; k]; k];
        }
        let d = (self.count - 1) as f64;
        (0..k)
            .map(|i| (0..k).map(|j| 0.5 * (self.comoment[i][j] + self.comoment[j][i]) / d).collect())
            .collect()
    }

    pub fn variance(&self, i: usize) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.comoment[i][i] / (self.count - 1) as f64
        }
    }

    /// Standard error of the mean of coordinate `i`.
    pub fn std_error(&self, i: usize) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        (self.variance(i) / self.count as f64).sqrt()
    }
}

pub fn accumulate_moments(mut summary: MomentSummary, obs: &[f64]) -> Result<MomentSummary> {
    summary.push(obs)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateDiagnostic {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub ks: Option<KsResult>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltDiagnostics {
    pub coordinates: Vec<CoordinateDiagnostic>,
    pub covariance: Vec<Vec<f64>>,
    /// `|cov - target| / |target|` entrywise, when a target is supplied.
    pub covariance_relative_error: Option<Vec<Vec<f64>>>,
}

/// Studentises each coordinate of `samples` with `summary` and reports
/// shape statistics and a KS test against the standard normal.
pub fn clt_diagnostic(summary: &MomentSummary, samples: &[Vec<f64>], target: Option<&[Vec<f64>]>) -> Result<CltDiagnostics> {
    if samples.len() < 1000 {
        return Err(Error::invalid(format!("need at least 1000 samples (got {})", samples.len())));
    }
    let k = summary.dim();
    if samples.iter().any(|s| s.len() != k) {
        return Err(Error::invalid("sample dimension does not match summary"));
    }
    let covariance = summary.covariance();
    let mut coordinates = Vec::with_capacity(k);
    for i in 0..k {
        let mean = summary.mean[i];
        let variance = summary.variance(i);
        let degenerate = !(variance > 1e-28 * (1.0 + mean * mean)) || !variance.is_finite();
        if degenerate {
            coordinates.push(CoordinateDiagnostic {
                mean,
                variance,
                skewness: f64::NAN,
                excess_kurtosis: f64::NAN,
                ks: None,
                degenerate,
            });
            continue;
        }
        let sd = variance.sqrt();
        let z: Vec<f64> = samples.iter().map(|s| (s[i] - mean) / sd).collect();
        let nf = z.len() as f64;
        let m2 = z.iter().map(|v| v * v).sum::<f64>() / nf;
        let m3 = z.iter().map(|v| v * v * v).sum::<f64>() / nf;
        let m4 = z.iter().map(|v| (v * v) * (v * v)).sum::<f64>() / nf;
        coordinates.push(CoordinateDiagnostic {
            mean,
            variance,
            skewness: m3 / m2.powf(1.5),
            excess_kurtosis: m4 / (m2 * m2) - 3.0,
            ks: Some(ks_one_sample(&z, normal_cdf)),
            degenerate,
        });
    }
    let covariance_relative_error = match target {
        None => None,
        Some(t) => {
            if t.len() != k || t.iter().any(|r| r.len() != k) {
                return Err(Error::invalid("target covariance has the wrong shape"));
            }
            Some(
                (0..k)
                    .map(|i| (0..k).map(|j| (covariance[i][j] - t[i][j]).abs() / t[i][j].abs()).collect())
                    .collect(),
            )
        }
    };
    Ok(CltDiagnostics {
        coordinates,
        covariance,
        covariance_relative_error,
    })
}

/// `S_q = sum_{j<=q} sum_{i<=j} w_i` for every `q`.
pub fn iterated_partial_sums(w: &[f64]) -> Vec<f64> {
    let mut p = 0.0;
    let mut s = 0.0;
    w.iter()
        .map(|x| {
            p += x;
            s += p;
            s
        })
        .collect()
}

/// Increment law of the random walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PersistenceDriver {
    /// Standard normal increments.
    Gaussian,
    /// `Z - Z'` with independent mean-one exponentials.
    ExpDifference,
}

/// First `q` (1-based) with `S_q >= t`, or `None` if `S_q < t` for all
/// `q <= n_max`.
pub fn first_exit_time(n_max: usize, t: f64, driver: PersistenceDriver, rng: &mut RngStream) -> Option<usize> {
    let mut p = 0.0;
    let mut s = 0.0;
    for q in 1..=n_max {
        let w = match driver {
            PersistenceDriver::Gaussian => rng.normal(),
            PersistenceDriver::ExpDifference => rng.exponential() - rng.exponential(),
        };
        p += w;
        s += p;
        if s >= t {
            return Some(q);
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceResult {
    pub n_values: Vec<usize>,
    pub probabilities: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub t: f64,
    pub trials: usize,
}

impl PersistenceResult {
    /// Survival fractions at each cutoff from per-path exit times.
    pub fn from_exit_times(n_values: &[usize], t: f64, exits: &[Option<usize>]) -> Result<Self> {
        if exits.is_empty() {
            return Err(Error::invalid("no paths"));
        }
        let trials = exits.len();
        let nf = trials as f64;
        let mut probabilities = Vec::with_capacity(n_values.len());
        let mut stderrs = Vec::with_capacity(n_values.len());
        for &n in n_values {
            let alive = exits.iter().filter(|e| e.map_or(true, |q| q > n)).count();
            let p = alive as f64 / nf;
            probabilities.push(p);
            stderrs.push((p * (1.0 - p) / nf).sqrt());
        }
        Ok(Self {
            n_values: n_values.to_vec(),
            probabilities,
            stderrs,
            t,
            trials,
        })
    }
}

/// Survival probability of the iterated sums below `t` up to each cutoff.
/// Path `i` draws from substream `(seed, i)`; all cutoffs share the paths.
pub fn persistence_probability(
    n_values: &[usize],
    trials: usize,
    t: f64,
    driver: PersistenceDriver,
    seed: u64,
) -> Result<PersistenceResult> {
    if n_values.is_empty() || trials == 0 {
        return Err(Error::param("need at least one cutoff and one path"));
    }
    let n_max = *n_values.iter().max().expect("non-empty");
    let exits: Vec<Option<usize>> = (0..trials as u64)
        .map(|i| first_exit_time(n_max, t, driver, &mut derive_substream(seed, i)))
        .collect();
    PersistenceResult::from_exit_times(n_values, t, &exits)
}

/// Weighted least-squares fit of `log p = a - theta log n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub theta: f64,
    pub stderr: f64,
    pub r_squared: f64,
    pub intercept: f64,
    /// Indices of the input points dropped for a non-positive probability.
    pub excluded: Vec<usize>,
}

impl PowerLawFit {
    pub fn fitted(&self, n: f64) -> f64 {
        (self.intercept - self.theta * n.ln()).exp()
    }
}

/// Weights are `(p / stderr)²` (delta method on `log p`) when every
/// standard error is positive, uniform otherwise.
pub fn fit_power_law(n_values: &[f64], probabilities: &[f64], stderrs: &[f64]) -> Result<PowerLawFit> {
    if n_values.len() != probabilities.len() || n_values.len() != stderrs.len() {
        return Err(Error::invalid("fit inputs differ in length"));
    }
    let mut excluded = Vec::new();
    let mut pts = Vec::new();
    for i in 0..n_values.len() {
        let (n, p, s) = (n_values[i], probabilities[i], stderrs[i]);
        if !(n > 0.0) {
            return Err(Error::invalid(format!("n must be positive (got {n})")));
        }
        if !(p > 0.0) || !p.is_finite() {
            excluded.push(i);
            continue;
        }
        pts.push((n.ln(), p.ln(), p, s));
    }
    if pts.len() < 3 {
        return Err(Error::invalid(format!(
            "need at least 3 points with positive probability (got {})",
            pts.len()
        )));
    }
    let weighted = pts.iter().all(|p| p.3 > 0.0 && p.3.is_finite());
    let w: Vec<f64> = pts
        .iter()
        .map(|&(_, _, p, s)| if weighted { (p / s).powi(2) } else { 1.0 })
        .collect();
    let sw: f64 = w.iter().sum();
    let xbar = pts.iter().zip(&w).map(|(p, w)| w * p.0).sum::<f64>() / sw;
    let ybar = pts.iter().zip(&w).map(|(p, w)| w * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().zip(&w).map(|(p, w)| w * (p.0 - xbar).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::invalid("all n values coincide"));
    }
    let sxy: f64 = pts.iter().zip(&w).map(|(p, w)| w * (p.0 - xbar) * (p.1 - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ssr: f64 = pts
        .iter()
        .zip(&w)
        .map(|(p, w)| w * (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let sst: f64 = pts.iter().zip(&w).map(|(p, w)| w * (p.1 - ybar).powi(2)).sum();
    let dof = (pts.len() - 2) as f64;
    let sigma2 = if weighted { (ssr / dof).max(1.0) } else { ssr / dof };
    let r_squared = if sst > 1e-300 {
        (1.0 - ssr / sst).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(PowerLawFit {
        theta: -slope,
        stderr: (sigma2 / sxx).sqrt(),
        r_squared,
        intercept,
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceTailRow {
    pub t: f64,
    /// `P[|tr - mn| > t]`.
    pub exceedance: f64,
    /// `P[|tr - m| > t]`.
    pub exceedance_centered_at_m: f64,
    /// `exp(-min(t²/(mn), t))`.
    pub bernstein_shape: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceTailTable {
    pub n: usize,
    pub m: usize,
    pub trials: usize,
    pub mean_trace: f64,
    pub var_trace: f64,
    pub rows: Vec<TraceTailRow>,
}

/// Trace of `G G†` as `||G||_F²`.
pub fn sample_trace(p: EnsembleParams, rng: &mut RngStream) -> f64 {
    sample_gaussian_matrix(p, rng).frobenius_norm().powi(2)
}

pub fn trace_tail_table(p: EnsembleParams, t_values: &[f64], traces: &[f64]) -> Result<TraceTailTable> {
    if traces.is_empty() {
        return Err(Error::invalid("no trials"));
    }
    let mn = (p.n * p.m) as f64;
    let mf = p.m as f64;
    let nf = traces.len() as f64;
    let mut acc = MomentSummary::new(1);
    for &t in traces {
        acc.push(&[t])?;
    }
    let rows = t_values
        .iter()
        .map(|&t| TraceTailRow {
            t,
            exceedance: traces.iter().filter(|&&x| (x - mn).abs() > t).count() as f64 / nf,
            exceedance_centered_at_m: traces.iter().filter(|&&x| (x - mf).abs() > t).count() as f64 / nf,
            bernstein_shape: (-(t * t / mn).min(t)).exp(),
        })
        .collect();
    Ok(TraceTailTable {
        n: p.n,
        m: p.m,
        trials: traces.len(),
        mean_trace: acc.mean[0],
        var_trace: acc.variance(0),
        rows,
    })
}

/// Empirical tails of `|tr - mn|`; trial `i` uses substream `(seed, i)`.
pub fn trace_tail_probe(n: usize, m: usize, t_values: &[f64], trials: usize, seed: u64) -> Result<TraceTailTable> {
    let p = EnsembleParams::new(n, m)?;
    let traces: Vec<f64> = (0..trials as u64)
        .map(|i| sample_trace(p, &mut derive_substream(seed, i)))
        .collect();
    trace_tail_table(p, t_values, &traces)
}

/// Whether two independent spectra, drawn in turn from `rng`, satisfy
/// `μ_k ∈ [(1 - eps) ν_k, (1 + eps) ν_k]` for every `k`.
pub fn concentration_trial(p: EnsembleParams, eps: f64, path: SamplerPath, rng: &mut RngStream) -> Result<bool> {
    let a = wishart_spectrum(p, path, rng)?;
    let b = wishart_spectrum(p, path, rng)?;
    Ok(within_band(a.spectrum.values(), b.spectrum.values(), eps))
}

pub fn within_band(a: &[f64], b: &[f64], eps: f64) -> bool {
    a.iter()
        .zip(b)
        .all(|(&x, &y)| x >= (1.0 - eps) * y && x <= (1.0 + eps) * y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationResult {
    pub n: usize,
    pub m: usize,
    pub eps: f64,
    pub trials: usize,
    pub probability: f64,
    pub stderr: f64,
}

impl ConcentrationResult {
    pub fn from_flags(p: EnsembleParams, eps: f64, flags: &[bool]) -> Result<Self> {
        if flags.is_empty() {
            return Err(Error::invalid("no trials"));
        }
        let nf = flags.len() as f64;
        let probability = flags.iter().filter(|f| **f).count() as f64 / nf;
        Ok(Self {
            n: p.n,
            m: p.m,
            eps,
            trials: flags.len(),
            probability,
            stderr: (probability * (1.0 - probability) / nf).sqrt(),
        })
    }
}

/// Trial `i` uses substream `(seed, i)`.
pub fn eigenvalue_concentration_probe(n: usize, m: usize, eps: f64, trials: usize, seed: u64) -> Result<ConcentrationResult> {
    let p = EnsembleParams::new(n, m)?;
    if m < n {
        return Err(Error::param("concentration probe needs m >= n"));
    }
    let path = SamplerPath::for_dimension(n);
    let flags = (0..trials as u64)
        .map(|i| {
            concentration_trial(p, eps, path, &mut derive_substream(seed, i))
        })
        .collect::<Result<Vec<bool>>>()?;
    ConcentrationResult::from_flags(p, eps, &flags)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularProbeReport {
    pub n: usize,
    pub m: usize,
    pub trials: usize,
    pub mean_sigma_min: f64,
    pub mean_sigma_max: f64,
    /// `sqrt(m) - sqrt(n - 1)`.
    pub lower_reference: f64,
    /// `sqrt(m) + 4 sqrt(n)`.
    pub upper_reference: f64,
    /// Present when `n = m`: law of `n μ_n`.
    pub smallest: Option<SmallestEigenvalueLaw>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallestEigenvalueLaw {
    /// `1 / mean(n μ_n)`.
    pub rate: f64,
    pub ks_rate_one: KsResult,
    pub ks_rate_half: KsResult,
    pub ks_fitted_rate: KsResult,
}

fn exp_cdf(rate: f64) -> impl Fn(f64) -> f64 {
    move |x| if x <= 0.0 { 0.0 } else { -(-rate * x).exp_m1() }
}

/// Aggregates `(σ_min, σ_max)` draws.
pub fn singular_report(p: EnsembleParams, sigmas: &[(f64, f64)]) -> Result<SingularProbeReport> {
    if sigmas.is_empty() {
        return Err(Error::invalid("no trials"));
    }
    let nf = sigmas.len() as f64;
    let (n, m) = (p.n as f64, p.m as f64);
    let smallest = if p.n == p.m {
        let scaled: Vec<f64> = sigmas.iter().map(|s| n * s.0 * s.0).collect();
        let rate = nf / scaled.iter().sum::<f64>();
        Some(SmallestEigenvalueLaw {
            rate,
            ks_rate_one: ks_one_sample(&scaled, exp_cdf(1.0)),
            ks_rate_half: ks_one_sample(&scaled, exp_cdf(0.5)),
            ks_fitted_rate: ks_one_sample(&scaled, exp_cdf(rate)),
        })
    } else {
        None
    };
    Ok(SingularProbeReport {
        n: p.n,
        m: p.m,
        trials: sigmas.len(),
        mean_sigma_min: sigmas.iter().map(|s| s.0).sum::<f64>() / nf,
        mean_sigma_max: sigmas.iter().map(|s| s.1).sum::<f64>() / nf,
        lower_reference: m.sqrt() - (n - 1.0).sqrt(),
        upper_reference: m.sqrt() + 4.0 * n.sqrt(),
        smallest,
    })
}

/// Extreme singular values of one `n x m` draw.
pub fn extreme_singular_values(p: EnsembleParams, path: SamplerPath, rng: &mut RngStream) -> Result<(f64, f64)> {
    let w = wishart_spectrum(p, path, rng)?.padded(p.n);
    let v = w.spectrum.values();
    Ok((v[v.len() - 1].max(0.0).sqrt(), v[0].sqrt()))
}

/// Trial `i` uses substream `(seed, i)`.
pub fn singular_lower_bound_probe(n: usize, m: usize, trials: usize, seed: u64) -> Result<SingularProbeReport> {
    let p = EnsembleParams::new(n, m)?;
    if m < n {
        return Err(Error::param("singular-value probe needs m >= n"));
    }
    let path = SamplerPath::for_dimension(n);
    let sigmas = (0..trials as u64)
        .map(|i| extreme_singular_values(p, path, &mut derive_substream(seed, i)))
        .collect::<Result<Vec<_>>>()?;
    singular_report(p, &sigmas)
}
