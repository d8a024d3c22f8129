//! Eigenvalues of Hermitian matrices and singular values of complex
//! rectangular matrices.
//!
//! The dense path reduces a Hermitian matrix to real symmetric tridiagonal
//! form with complex Householder reflectors, then runs implicit QL with a
//! Wilkinson shift. Only eigenvalues are computed.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense complex matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix with real entries from row slices.
    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::invalid("ragged rows"));
        }
        let data = rows
            .iter()
            .flat_map(|row| row.iter().map(|&x| Complex64::new(x, 0.0)))
            .collect();
        Self::from_vec(r, c, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn conj_transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::invalid("matrix shapes differ"));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }
}

/// Square complex matrix equal to its conjugate transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl HermitianMatrix {
    /// Validates conjugate symmetry to a relative tolerance of `1e-12` and
    /// finiteness of every entry.
    pub fn new(n: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::invalid(format!(
                "expected {} entries for an {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("non-finite matrix entry"));
        }
        let scale = data.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        for i in 0..n {
            for j in i..n {
                let a = data[i * n + j];
                let b = data[j * n + i].conj();
                if (a - b).norm() > 1e-12 * scale {
                    return Err(Error::invalid(format!(
                        "entries ({i},{j}) and ({j},{i}) are not conjugate"
                    )));
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = ComplexMatrix::from_real_rows(rows)?;
        if m.rows != m.cols {
            return Err(Error::invalid("matrix is not square"));
        }
        Self::new(m.rows, m.data)
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for (i, &v) in values.iter().enumerate() {
            data[i * n + i] = Complex64::new(v, 0.0);
        }
        Self { n, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    /// `G G†` for a rectangular `G`.
    pub fn gram(g: &ComplexMatrix) -> Self {
        let (n, m) = (g.rows, g.cols);
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            let gi = &g.data[i * m..(i + 1) * m];
            for j in 0..=i {
                let gj = &g.data[j * m..(j + 1) * m];
                let s: Complex64 = gi.iter().zip(gj).map(|(a, b)| a * b.conj()).sum();
                data[i * n + j] = s;
                data[j * n + i] = s.conj();
            }
            data[i * n + i].im = 0.0;
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i).re).sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(Complex64::norm_sqr).sum()
    }
}

/// Real symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymTridiagonal {
    diag: Vec<f64>,
    offdiag: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if offdiag.len() + 1 != diag.len().max(1) || (diag.is_empty() && !offdiag.is_empty()) {
            return Err(Error::invalid(format!(
                "tridiagonal with {} diagonal entries needs {} off-diagonal entries, got {}",
                diag.len(),
                diag.len().saturating_sub(1),
                offdiag.len()
            )));
        }
        if diag.iter().chain(&offdiag).any(|x| !x.is_finite()) {
            return Err(Error::invalid("non-finite tridiagonal entry"));
        }
        Ok(Self { diag, offdiag })
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn trace(&self) -> f64 {
        self.diag.iter().sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.diag.iter().map(|d| d * d).sum::<f64>()
            + 2.0 * self.offdiag.iter().map(|e| e * e).sum::<f64>()
    }
}

/// Eigenvalues sorted in non-increasing order, with the ensemble shape they
/// came from (`m == 0` when not applicable).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRaw {
    values: Vec<f64>,
    n: usize,
    m: usize,
}

impl SpectrumRaw {
    pub fn new(values: Vec<f64>, n: usize, m: usize) -> Result<Self> {
        if values.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::invalid("spectrum is not sorted in non-increasing order"));
        }
        Ok(Self { values, n, m })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> f64 {
        // ascending accumulation
        self.values.iter().rev().sum()
    }

    /// Appends structural zeros until the spectrum has `len` entries.
    pub fn padded(mut self, len: usize) -> Self {
        if self.values.len() < len {
            self.values.resize(len, 0.0);
        }
        self
    }
}

/// Reduces `h` to a unitarily similar real symmetric tridiagonal matrix.
pub fn householder_tridiagonalize(h: &HermitianMatrix) -> Result<SymTridiagonal> {
    let n = h.n;
    if h.data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::invalid("non-finite matrix entry"));
    }
    if n == 0 {
        return Ok(SymTridiagonal {
            diag: vec![],
            offdiag: vec![],
        });
    }
    let mut a = h.data.clone();
    let mut diag = vec![0.0; n];
    let mut offdiag = vec![0.0; n - 1];
    let zero = Complex64::new(0.0, 0.0);
    let mut v = vec![zero; n];
    let mut w = vec![zero; n];

    for k in 0..n - 1 {
        diag[k] = a[k * n + k].re;
        let r = n - k - 1;
        let x0 = a[(k + 1) * n + k];
        let tail_sq: f64 = (k + 2..n).map(|i| a[i * n + k].norm_sqr()).sum();
        let norm = (x0.norm_sqr() + tail_sq).sqrt();
        if tail_sq == 0.0 {
            // Already reduced in this column; the phase of x0 is removed by a
            // diagonal unitary similarity.
            offdiag[k] = x0.norm();
            continue;
        }
        offdiag[k] = norm;
        let phase = if x0.norm() > 0.0 {
            x0 / x0.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        // v = x + phase*|x| e1 avoids cancellation in the leading entry.
        let v = &mut v[..r];
        for (i, vi) in v.iter_mut().enumerate() {
            *vi = a[(k + 1 + i) * n + k];
        }
        v[0] += phase * norm;
        let vnorm_sq: f64 = v.iter().map(Complex64::norm_sqr).sum();
        let tau = 2.0 / vnorm_sq;

        // p = tau * A22 v, stored in w
        let w = &mut w[..r];
        for i in 0..r {
            let row = &a[(k + 1 + i) * n + k + 1..(k + 1 + i) * n + n];
            let s: Complex64 = row.iter().zip(v.iter()).map(|(aij, vj)| aij * vj).sum();
            w[i] = s * tau;
        }
        let vp: Complex64 = v.iter().zip(w.iter()).map(|(vi, pi)| vi.conj() * pi).sum();
        let kk = 0.5 * tau * vp.re;
        for (wi, vi) in w.iter_mut().zip(v.iter()) {
            *wi -= vi * kk;
        }
        for i in 0..r {
            let (vi, wi) = (v[i], w[i]);
            let row = &mut a[(k + 1 + i) * n + k + 1..(k + 1 + i) * n + n];
            for (j, aij) in row.iter_mut().enumerate() {
                *aij -= vi * w[j].conj() + wi * v[j].conj();
            }
        }
    }
    diag[n - 1] = a[(n - 1) * n + n - 1].re;
    Ok(SymTridiagonal { diag, offdiag })
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit QL with a
/// Wilkinson shift, sorted non-increasing.
///
/// An off-diagonal entry is treated as zero once
/// `|e_i| <= max(tol, eps) * (|d_i| + |d_{i+1}|)`.
#[inline]
fn pythag(a: f64, b: f64) -> f64 {
    let r2 = a * a + b * b;
    if r2.is_finite() && r2 >= 1e-290 {
        r2.sqrt()
    } else {
        a.hypot(b)
    }
}

pub fn tridiagonal_eigenvalues(t: &SymTridiagonal, tol: f64) -> Result<Vec<f64>> {
    let n = t.dim();
    let mut d = t.diag.clone();
    let mut e = t.offdiag.clone();
    e.push(0.0);
    let eps = tol.max(f64::EPSILON);
    let max_sweeps = 30 * n.max(1);
    let mut sweeps = 0;

    for l in 0..n {
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd || e[m].abs() < f64::MIN_POSITIVE {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > max_sweeps {
                return Err(Error::Convergence { index: l, sweeps });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = pythag(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut split = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = pythag(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    split = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if split {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_unstable_by(|a, b| b.total_cmp(a));
    Ok(d)
}

/// Eigenvalues of a Hermitian matrix, sorted non-increasing.
pub fn hermitian_eigenvalues(h: &HermitianMatrix) -> Result<SpectrumRaw> {
    let t = householder_tridiagonalize(h)?;
    let values = tridiagonal_eigenvalues(&t, f64::EPSILON)?;
    SpectrumRaw::new(values, h.n, 0)
}

/// Clamps round-off negatives of a positive semidefinite spectrum.
///
/// Values in `(-tol_eig, 0)` become zero; anything more negative is an error.
pub(crate) fn clamp_psd(values: &mut [f64], tol_eig: f64) -> Result<()> {
    for v in values.iter_mut() {
        if *v < 0.0 {
            if -*v <= tol_eig {
                *v = 0.0;
            } else {
                return Err(Error::Degenerate(format!(
                    "eigenvalue {v:e} of a Gram matrix is below -{tol_eig:e}"
                )));
            }
        }
    }
    Ok(())
}

/// Spectrum of `G G†` (or `G† G` when `G` has more rows than columns), with
/// `min(rows, cols)` entries. `n`/`m` in the result are the original shape.
pub fn gram_spectrum(g: &ComplexMatrix) -> Result<SpectrumRaw> {
    let (n, m) = (g.rows, g.cols);
    let h = if n <= m {
        HermitianMatrix::gram(g)
    } else {
        HermitianMatrix::gram(&g.conj_transpose())
    };
    let mut values = hermitian_eigenvalues(&h)?.into_values();
    let tol_eig = 1e-10 * h.frobenius_sq().sqrt();
    clamp_psd(&mut values, tol_eig)?;
    SpectrumRaw::new(values, n, m)
}

/// Singular values of `g`, sorted non-increasing, `min(rows, cols)` of them.
pub fn gaussian_singular_values(g: &ComplexMatrix) -> Result<Vec<f64>> {
    Ok(gram_spectrum(g)?.values.iter().map(|x| x.sqrt()).collect())
}
