//! Samplers for complex Gaussian matrices, Wishart–Laguerre spectra and
//! uniform points of the simplex.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigensolve::{clamp_psd, gram_spectrum, tridiagonal_eigenvalues, ComplexMatrix, SpectrumRaw, SymTridiagonal};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Shape `(n, m)` of the `n x m` Gaussian factor `G` in `G G†`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub n: usize,
    pub m: usize,
}

impl EnsembleParams {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::param(format!("ensemble needs n, m >= 1 (got n={n}, m={m})")));
        }
        Ok(Self { n, m })
    }

    pub fn transposed(self) -> Self {
        Self { n: self.m, m: self.n }
    }
}

/// Which Wishart sampler to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerPath {
    /// Build `G`, form `G G†`, run the dense eigensolver. O(n^2 m + n^3).
    Dense,
    /// Bidiagonal chi model, tridiagonal eigensolver. O(n^2).
    Fast,
}

impl SamplerPath {
    /// Fast for `n >= 64`, dense below.
    pub fn for_dimension(n: usize) -> Self {
        if n >= 64 {
            Self::Fast
        } else {
            Self::Dense
        }
    }
}

/// One draw of the (unnormalised) Wishart–Laguerre spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WishartSample {
    pub spectrum: SpectrumRaw,
    pub trace: f64,
}

impl WishartSample {
    /// Appends structural zero eigenvalues up to length `len`.
    pub fn padded(self, len: usize) -> Self {
        Self {
            spectrum: self.spectrum.padded(len),
            trace: self.trace,
        }
    }
}

/// Nonnegative vector summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexVector {
    values: Vec<f64>,
    sorted: bool,
}

pub(crate) const SIMPLEX_SUM_TOL: f64 = 1e-12;

impl SimplexVector {
    /// Validates nonnegativity, `|sum - 1| <= 1e-12`, and (when `sorted`)
    /// non-increasing order.
    pub fn new(values: Vec<f64>, sorted: bool) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("empty simplex vector"));
        }
        if values.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
            return Err(Error::invalid("simplex vector has a negative or non-finite entry"));
        }
        let s = neumaier_sum(values.iter().copied());
        if (s - 1.0).abs() > SIMPLEX_SUM_TOL {
            return Err(Error::invalid(format!("simplex vector sums to {s}")));
        }
        if sorted && values.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::invalid("simplex vector flagged sorted is not non-increasing"));
        }
        Ok(Self { values, sorted })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_sorted(&self) -> bool {
        self.sorted
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Decreasing rearrangement.
    pub fn into_sorted(mut self) -> Self {
        if !self.sorted {
            self.values.sort_unstable_by(|a, b| b.total_cmp(a));
            self.sorted = true;
        }
        self
    }

    /// Appends zero coordinates up to length `len`.
    pub fn padded(mut self, len: usize) -> Self {
        if self.values.len() < len {
            self.values.resize(len, 0.0);
        }
        self
    }
}

pub(crate) fn neumaier_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Matrix of i.i.d. standard complex Gaussians: real and imaginary parts are
/// independent `N(0, 1/2)`, so `E|G_ij|^2 = 1`. Entries are drawn row-major,
/// real part first.
pub fn sample_gaussian_matrix(p: EnsembleParams, rng: &mut RngStream) -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let data = (0..p.n * p.m)
        .map(|_| {
            let re = rng.normal() * s;
            let im = rng.normal() * s;
            Complex64::new(re, im)
        })
        .collect();
    ComplexMatrix::from_vec(p.n, p.m, data).expect("shape matches by construction")
}

/// Spectrum of `G G†` through the dense eigensolver. When `m < n` the
/// result holds the `m` nonzero eigenvalues; see [`WishartSample::padded`].
pub fn wishart_spectrum_dense(p: EnsembleParams, rng: &mut RngStream) -> Result<WishartSample> {
    let g = sample_gaussian_matrix(p, rng);
    let trace = neumaier_sum(g.as_slice().iter().map(Complex64::norm_sqr));
    let spectrum = gram_spectrum(&g)?;
    Ok(WishartSample { spectrum, trace })
}

/// Spectrum of `B Bᵀ` where `B` is lower bidiagonal with
/// `B_ii^2 ~ Gamma(m - i)` and `B_{i+1,i}^2 ~ Gamma(n - 1 - i)` (0-based),
/// i.e. the beta = 2 Laguerre chi model scaled to unit-variance entries.
/// Requires `m >= n`.
pub fn wishart_spectrum_fast(p: EnsembleParams, rng: &mut RngStream) -> Result<WishartSample> {
    let (n, m) = (p.n, p.m);
    if m < n {
        return Err(Error::param(format!(
            "fast Wishart sampler needs m >= n (got n={n}, m={m})"
        )));
    }
    let a2: Vec<f64> = (0..n).map(|i| rng.gamma((m - i) as f64)).collect();
    let b2: Vec<f64> = (0..n.saturating_sub(1))
        .map(|i| rng.gamma((n - 1 - i) as f64))
        .collect();
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    for i in 0..n {
        let below = if i > 0 { b2[i - 1] } else { 0.0 };
        diag.push(a2[i] + below);
        if i + 1 < n {
            off.push((a2[i] * b2[i]).sqrt());
        }
    }
    let trace = neumaier_sum(a2.iter().chain(&b2).copied());
    let t = SymTridiagonal::new(diag, off)?;
    let mut values = tridiagonal_eigenvalues(&t, f64::EPSILON)?;
    clamp_psd(&mut values, 1e-10 * t.frobenius_sq().sqrt())?;
    Ok(WishartSample {
        spectrum: SpectrumRaw::new(values, n, m)?,
        trace,
    })
}

/// Dispatches to a sampler. The fast path handles `m < n` by sampling the
/// transposed shape, which has the same nonzero spectrum; the returned
/// spectrum keeps the caller's `(n, m)`.
pub fn wishart_spectrum(p: EnsembleParams, path: SamplerPath, rng: &mut RngStream) -> Result<WishartSample> {
    match path {
        SamplerPath::Dense => wishart_spectrum_dense(p, rng),
        SamplerPath::Fast if p.m >= p.n => wishart_spectrum_fast(p, rng),
        SamplerPath::Fast => {
            let w = wishart_spectrum_fast(p.transposed(), rng)?;
            Ok(WishartSample {
                spectrum: SpectrumRaw::new(w.spectrum.into_values(), p.n, p.m)?,
                trace: w.trace,
            })
        }
    }
}

/// Divides the spectrum by the trace.
pub fn trace_normalise(w: &WishartSample) -> Result<SimplexVector> {
    if !(w.trace > 0.0) || !w.trace.is_finite() {
        return Err(Error::Degenerate(format!(
            "cannot trace-normalise a spectrum with trace {}",
            w.trace
        )));
    }
    // Normalise by the eigenvalue sum itself so the result closes exactly;
    // it agrees with `trace` to round-off.
    let s = neumaier_sum(w.spectrum.values().iter().rev().copied());
    if !(s > 0.0) {
        return Err(Error::Degenerate("spectrum sums to zero".into()));
    }
    let values = w.spectrum.values().iter().map(|x| x / s).collect();
    SimplexVector::new(values, true)
}

/// Uniform point of the simplex: `Z_i / sum Z` with i.i.d. mean-one
/// exponentials. Not sorted.
pub fn sample_uniform_simplex(n: usize, rng: &mut RngStream) -> Result<SimplexVector> {
    if n == 0 {
        return Err(Error::param("simplex dimension must be >= 1"));
    }
    let z: Vec<f64> = (0..n).map(|_| rng.exponential()).collect();
    let s = neumaier_sum(z.iter().copied());
    SimplexVector::new(z.into_iter().map(|x| x / s).collect(), false)
}

/// Ascending order statistics of `n` i.i.d. mean-one exponentials via the
/// Rényi representation: cumulative sums of `Z_i / (n - i + 1)`.
pub fn renyi_order_statistics(n: usize, rng: &mut RngStream) -> Vec<f64> {
    let mut acc = 0.0;
    (0..n)
        .map(|i| {
            acc += rng.exponential() / (n - i) as f64;
            acc
        })
        .collect()
}

/// Decreasing rearrangement of a uniform simplex point, built in O(n) from
/// the Rényi representation.
pub fn sorted_uniform_simplex_renyi(n: usize, rng: &mut RngStream) -> Result<SimplexVector> {
    if n == 0 {
        return Err(Error::param("simplex dimension must be >= 1"));
    }
    let asc = renyi_order_statistics(n, rng);
    let s = neumaier_sum(asc.iter().copied());
    let values = asc.iter().rev().map(|x| x / s).collect();
    SimplexVector::new(values, true)
}
