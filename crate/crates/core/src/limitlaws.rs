//! Limit-law functionals of the Wishart–Laguerre and semicircle regimes.
//!
//! * `gamma_mp`: integral against the Marchenko–Pastur density of ratio `c`.
//! * `gamma_semicircle`: integral against the semicircle on `[-1, 1]`.
//! * `big_gamma`, `big_gamma_c`: the limiting covariance bilinear forms,
//!   built from divided differences and the kernel
//!   `(1 - xy) / (sqrt(1 - x^2) sqrt(1 - y^2))` on `[-1, 1]^2`.
//! * `exp_kernel_integral`: the double integral `I(A)` that governs
//!   `Γ(x^k, x^{Ak})` as `k` grows.
//!
//! The bilinear forms and the semicircle functional each come with two
//! prefactor conventions; see [`PrefactorMode`] and [`GammaMode`].

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::QuadratureGrid;

/// Prefactor of `Γ` and `Γ_c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrefactorMode {
    /// `1/π²`.
    AsWritten,
    /// `1/(4π²)`: the variance of a linear statistic of the complex ensemble.
    CltCalibrated,
}

impl PrefactorMode {
    fn scale(self) -> f64 {
        match self {
            Self::AsWritten => 1.0,
            Self::CltCalibrated => 0.25,
        }
    }
}

/// Prefactor of the semicircle functional `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaMode {
    /// `1/π`.
    AsWritten,
    /// `2/π`, which makes the weight a probability density.
    Density,
}

/// Marchenko–Pastur parameters for ratio `c >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpParams {
    pub c: f64,
    pub a_minus: f64,
    pub a_plus: f64,
    pub beta: f64,
}

impl MpParams {
    pub fn new(c: f64) -> Result<Self> {
        if !(c >= 1.0) || !c.is_finite() {
            return Err(Error::param(format!("ratio c must be finite and >= 1 (got {c})")));
        }
        let r = c.sqrt();
        let a_plus = (1.0 + r).powi(2);
        let a_minus = if c == 1.0 { 0.0 } else { (1.0 - r).powi(2) };
        Ok(Self {
            c,
            a_minus,
            a_plus,
            beta: 2.0 * r / a_plus,
        })
    }

    /// `Φ_c(x) = 2 sqrt(c) x + c + 1`, mapping `[-1, 1]` onto `[a_-, a_+]`.
    pub fn phi(&self, x: f64) -> f64 {
        2.0 * self.c.sqrt() * x + self.c + 1.0
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A function together with its derivative, for divided differences.
#[derive(Clone)]
pub struct GenericFn {
    pub label: String,
    f: ScalarFn,
    df: ScalarFn,
}

impl fmt::Debug for GenericFn {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("GenericFn").field("label", &self.label).finish()
    }
}

/// Test functions for linear statistics and the limit functionals.
#[derive(Debug, Clone)]
pub enum TestFunction {
    /// `x^k`.
    Monomial(u32),
    /// `(x / a_plus)^k`.
    ScaledMonomial { k: u32, a_plus: f64 },
    /// `inner(scale * x + shift)`.
    Affine {
        inner: Box<TestFunction>,
        scale: f64,
        shift: f64,
    },
    /// `sum_i a_i f_i`.
    Combination(Vec<(f64, TestFunction)>),
    Generic(GenericFn),
}

impl TestFunction {
    pub fn monomial(k: u32) -> Self {
        Self::Monomial(k)
    }

    /// `h_k(x) = (x / a_+)^k`.
    pub fn h(k: u32, mp: &MpParams) -> Self {
        Self::ScaledMonomial { k, a_plus: mp.a_plus }
    }

    pub fn generic(
        label: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::Generic(GenericFn {
            label: label.into(),
            f: Arc::new(f),
            df: Arc::new(df),
        })
    }

    pub fn affine(self, scale: f64, shift: f64) -> Self {
        Self::Affine {
            inner: Box::new(self),
            scale,
            shift,
        }
    }

    /// `f ∘ Φ_c`.
    pub fn compose_phi(&self, mp: &MpParams) -> Self {
        self.clone().affine(2.0 * mp.c.sqrt(), mp.c + 1.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Monomial(k) => powu(x, *k),
            Self::ScaledMonomial { k, a_plus } => powu(x / a_plus, *k),
            Self::Affine { inner, scale, shift } => inner.eval(scale * x + shift),
            Self::Combination(terms) => terms.iter().map(|(a, f)| a * f.eval(x)).sum(),
            Self::Generic(g) => (g.f)(x),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Self::Monomial(0) | Self::ScaledMonomial { k: 0, .. } => 0.0,
            Self::Monomial(k) => *k as f64 * powu(x, k - 1),
            Self::ScaledMonomial { k, a_plus } => *k as f64 * powu(x / a_plus, k - 1) / a_plus,
            Self::Affine { inner, scale, shift } => scale * inner.derivative(scale * x + shift),
            Self::Combination(terms) => terms.iter().map(|(a, f)| a * f.derivative(x)).sum(),
            Self::Generic(g) => (g.df)(x),
        }
    }

    /// `(f(x) - f(y)) / (x - y)`, with the derivative on the diagonal.
    pub fn divided_difference(&self, x: f64, y: f64) -> f64 {
        match self {
            Self::Monomial(k) => monomial_divided_difference(*k, x, y),
            Self::ScaledMonomial { k, a_plus } => {
                monomial_divided_difference(*k, x / a_plus, y / a_plus) / a_plus
            }
            Self::Affine { inner, scale, shift } => {
                scale * inner.divided_difference(scale * x + shift, scale * y + shift)
            }
            Self::Combination(terms) => terms
                .iter()
                .map(|(a, f)| a * f.divided_difference(x, y))
                .sum(),
            Self::Generic(g) => {
                if (x - y).abs() < 1e-7 * (1.0 + x.abs() + y.abs()) {
                    (g.df)(0.5 * (x + y))
                } else {
                    ((g.f)(x) - (g.f)(y)) / (x - y)
                }
            }
        }
    }

    fn is_zero_dd(&self) -> bool {
        matches!(self, Self::Monomial(0) | Self::ScaledMonomial { k: 0, .. })
    }
}

pub fn divided_difference(f: &TestFunction, x: f64, y: f64) -> f64 {
    f.divided_difference(x, y)
}

fn powu(x: f64, k: u32) -> f64 {
    match i32::try_from(k) {
        Ok(k) => x.powi(k),
        Err(_) => x.powf(k as f64),
    }
}

/// `sum_{j<k} x^j y^{k-1-j}`.
pub fn monomial_divided_difference(k: u32, x: f64, y: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if k <= 64 {
        let mut s = 1.0;
        let mut yp = 1.0;
        for _ in 1..k {
            yp *= y;
            s = s * x + yp;
        }
        return s;
    }
    let (a, b) = if x.abs() >= y.abs() { (x, y) } else { (y, x) };
    if a == 0.0 {
        return 0.0;
    }
    let lead = powu(a, k - 1);
    if lead == 0.0 {
        return 0.0;
    }
    let rho = b / a;
    if rho > 0.0 {
        // sum rho^j = expm1(k ln rho) / (rho - 1), rho - 1 formed without cancellation
        let d = (b - a) / a;
        if d == 0.0 {
            return k as f64 * lead;
        }
        lead * (k as f64 * d.ln_1p()).exp_m1() / d
    } else {
        lead * (1.0 - powu(rho, k)) / (1.0 - rho)
    }
}

fn require_nodes(n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(Error::param(format!("need at least {min} quadrature nodes (got {n})")));
    }
    Ok(())
}

/// Tensor Chebyshev quadrature of the kernel `(1/π²)(1 - xy)/sqrt((1-x²)(1-y²))`.
pub fn kernel_mass(n: usize) -> Result<f64> {
    require_nodes(n, 4)?;
    let g = QuadratureGrid::chebyshev1(n)?;
    let mut total = 0.0;
    for &x in &g.nodes {
        for &y in &g.nodes {
            total += 1.0 - x * y;
        }
    }
    Ok(total / (n * n) as f64)
}

/// Semicircle functional `(1/π or 2/π) ∫ f(x) sqrt(1 - x²) dx` on `[-1, 1]`.
pub fn gamma_semicircle(f: &TestFunction, n: usize, mode: GammaMode) -> Result<f64> {
    require_nodes(n, 1)?;
    let g = QuadratureGrid::chebyshev2(n)?;
    let pref = match mode {
        GammaMode::AsWritten => 1.0 / PI,
        GammaMode::Density => 2.0 / PI,
    };
    Ok(pref * g.integrate(|x| f.eval(x)))
}

/// Marchenko–Pastur functional
/// `(1/2π) ∫_{a_-}^{a_+} f(x) sqrt((a_+ - x)(x - a_-)) / x dx`.
pub fn gamma_mp(f: &TestFunction, c: f64, n: usize) -> Result<f64> {
    let mp = MpParams::new(c)?;
    require_nodes(n, 1)?;
    if c == 1.0 {
        // x = 2(1 + u): the weight becomes sqrt((1 - u)/(1 + u)) / π
        let g = QuadratureGrid::jacobi_half_minus_half(n)?;
        Ok(g.integrate(|u| f.eval(2.0 * (1.0 + u))) / PI)
    } else {
        let g = QuadratureGrid::chebyshev2(n)?;
        let s = 4.0 * c / (2.0 * PI);
        Ok(s * g.integrate(|u| {
            let x = mp.phi(u);
            f.eval(x) / x
        }))
    }
}

/// `Γ(f, g)` by tensor Gauss–Chebyshev of the first kind with `n` nodes per axis.
pub fn big_gamma(f: &TestFunction, g: &TestFunction, n: usize, mode: PrefactorMode) -> Result<f64> {
    require_nodes(n, 4)?;
    if f.is_zero_dd() || g.is_zero_dd() {
        return Ok(0.0);
    }
    let grid = QuadratureGrid::chebyshev1(n)?;
    let x = &grid.nodes;
    let mut total = 0.0;
    for i in 0..n {
        let xi = x[i];
        let mut row = 0.5 * f.divided_difference(xi, xi) * g.divided_difference(xi, xi) * (1.0 - xi * xi);
        for &xj in &x[i + 1..] {
            row += f.divided_difference(xi, xj) * g.divided_difference(xi, xj) * (1.0 - xi * xj);
        }
        total += row;
    }
    // (1/π²)(π/n)² per node pair, doubled for the strict upper triangle
    Ok(mode.scale() * 2.0 * total / (n * n) as f64)
}

/// `Γ_c(f, g) = Γ(f ∘ Φ_c, g ∘ Φ_c)`.
pub fn big_gamma_c(
    f: &TestFunction,
    g: &TestFunction,
    c: f64,
    n: usize,
    mode: PrefactorMode,
) -> Result<f64> {
    let mp = MpParams::new(c)?;
    big_gamma(&f.compose_phi(&mp), &g.compose_phi(&mp), n, mode)
}

/// Gram matrix `Γ_c(f_i, f_j)`.
pub fn big_gamma_c_matrix(
    fs: &[TestFunction],
    c: f64,
    n: usize,
    mode: PrefactorMode,
) -> Result<Vec<Vec<f64>>> {
    let k = fs.len();
    let mut out = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let v = big_gamma_c(&fs[i], &fs[j], c, n, mode)?;
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    Ok(out)
}

/// Node count that resolves degree-`k` monomials near the edges.
pub fn recommended_nodes(k_max: u32) -> usize {
    256.max((30.0 * (k_max as f64).sqrt()).ceil() as usize)
}

/// Closed form of `lim k^{3/2} γ_c(h_k)`: `(2c/(π a_+)) sqrt(π) / (sqrt(2) β^{3/2})`.
pub fn c_limit_constant(c: f64) -> Result<f64> {
    let mp = MpParams::new(c)?;
    Ok(2.0 * c / (PI * mp.a_plus) * edge_integral(mp.beta))
}

/// The same closed form with the leading factor `4c²` in place of `2c`.
/// Twice [`c_limit_constant`] at `c = 1`; kept for comparison.
pub fn c_limit_constant_as_printed(c: f64) -> Result<f64> {
    let mp = MpParams::new(c)?;
    Ok(4.0 * c * c / (PI * mp.a_plus) * edge_integral(mp.beta))
}

fn edge_integral(beta: f64) -> f64 {
    PI.sqrt() / (2f64.sqrt() * beta.powf(1.5))
}

/// `(e^{-a s} - e^{-a t}) / (s - t)`, equal to `-a e^{-a s}` on the diagonal.
pub fn exp_divided_difference(a: f64, s: f64, t: f64) -> f64 {
    let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
    let d = hi - lo;
    let base = (-a * lo).exp();
    if d == 0.0 {
        -a * base
    } else {
        base * (-a * d).exp_m1() / d
    }
}

/// Default per-axis node count for [`exp_kernel_integral`].
pub const EXP_KERNEL_NODES: usize = 512;

fn exp_kernel_at(a: f64, n: usize) -> Result<f64> {
    // s = u², t = v² removes 1/sqrt(st); the rational map handles the
    // algebraic decay along the axes
    let g = QuadratureGrid::rational_half_line(n, 1.0)?;
    let u2: Vec<f64> = g.nodes.iter().map(|u| u * u).collect();
    let mut total = 0.0;
    for i in 0..n {
        let s = u2[i];
        let mut row = 0.5 * g.weights[i] * exp_divided_difference(1.0, s, s) * exp_divided_difference(a, s, s) * 2.0 * s;
        for j in i + 1..n {
            let t = u2[j];
            row += g.weights[j] * exp_divided_difference(1.0, s, t) * exp_divided_difference(a, s, t) * (s + t);
        }
        total += g.weights[i] * row;
    }
    Ok(8.0 * total)
}

/// `I(A) = ∫∫_{(0,∞)²} D_1(s,t) D_A(s,t) (s + t) / sqrt(st) ds dt` with
/// `D_a` from [`exp_divided_difference`]. Evaluated at `n` and `2n` nodes
/// per axis; the finer value is returned when they agree to `1e-4`.
pub fn exp_kernel_integral(a: f64, n: usize) -> Result<f64> {
    if !(a >= 1.0) || !a.is_finite() {
        return Err(Error::param(format!("A must be finite and >= 1 (got {a})")));
    }
    require_nodes(n, 8)?;
    let coarse = exp_kernel_at(a, n)?;
    let fine = exp_kernel_at(a, 2 * n)?;
    let relative = (coarse - fine).abs() / fine.abs();
    if relative > 1e-4 {
        return Err(Error::Accuracy {
            coarse,
            fine,
            relative,
        });
    }
    Ok(fine)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeConstant {
    pub c: f64,
    /// [`c_limit_constant`].
    pub closed_form: f64,
    /// [`c_limit_constant_as_printed`].
    pub as_printed: f64,
    pub k: u32,
    /// `k^{3/2} γ_c(h_k)`.
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaC {
    pub c: f64,
    pub value: f64,
    /// `(k, Γ_c(h_k, h_k))` in as-written mode.
    pub sequence: Vec<(u32, f64)>,
}

/// Limit constants estimated at finite degree, with their integral
/// references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitConstants {
    pub c_c: Vec<EdgeConstant>,
    /// `Γ(x^k, x^k)` at the largest `k`, as-written.
    pub alpha: f64,
    pub alpha_sequence: Vec<(u32, f64)>,
    pub alpha_c: Vec<AlphaC>,
    /// `(A, I(A))` for `A = 1, 2, 4, ..., 64`.
    pub i_of_a: Vec<(f64, f64)>,
    /// `I(1) / π²`.
    pub alpha_reference: f64,
    /// `I(1) / (2π²)`.
    pub alpha_c_reference: f64,
    /// Successive `k` estimates all within 5% of each other.
    pub converged: bool,
}

/// Degree used for the edge constants `C_c`.
pub const EDGE_DEGREE: u32 = 10_000;

fn within(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

/// Evaluates `α`, `α_c`, `C_c` and the `I(A)` table. `n` overrides the
/// per-`k` node count of the bilinear forms.
pub fn estimate_limit_constants(k_list: &[u32], c_list: &[f64], n: Option<usize>) -> Result<LimitConstants> {
    if k_list.is_empty() || k_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("k_list must be non-empty and strictly increasing"));
    }
    let nodes = |k: u32| n.unwrap_or_else(|| recommended_nodes(k));
    let mut alpha_sequence = Vec::new();
    for &k in k_list {
        let f = TestFunction::monomial(k);
        alpha_sequence.push((k, big_gamma(&f, &f, nodes(k), PrefactorMode::AsWritten)?));
    }
    let mut converged = alpha_sequence.windows(2).all(|w| within(w[0].1, w[1].1, 0.05));
    let mut alpha_c = Vec::new();
    let mut c_c = Vec::new();
    for &c in c_list {
        let mp = MpParams::new(c)?;
        let mut sequence = Vec::new();
        for &k in k_list {
            let h = TestFunction::h(k, &mp);
            sequence.push((k, big_gamma_c(&h, &h, c, nodes(k), PrefactorMode::AsWritten)?));
        }
        converged &= sequence.windows(2).all(|w| within(w[0].1, w[1].1, 0.05));
        alpha_c.push(AlphaC {
            c,
            value: sequence.last().map(|p| p.1).unwrap_or(f64::NAN),
            sequence,
        });
        let k = EDGE_DEGREE;
        let numeric = (k as f64).powf(1.5) * gamma_mp(&TestFunction::h(k, &mp), c, recommended_nodes(k))?;
        c_c.push(EdgeConstant {
            c,
            closed_form: c_limit_constant(c)?,
            as_printed: c_limit_constant_as_printed(c)?,
            k,
            numeric,
        });
    }
    let mut i_of_a = Vec::new();
    for a in [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0] {
        i_of_a.push((a, exp_kernel_integral(a, EXP_KERNEL_NODES)?));
    }
    let i1 = i_of_a[0].1;
    Ok(LimitConstants {
        c_c,
        alpha: alpha_sequence.last().map(|p| p.1).unwrap_or(f64::NAN),
        alpha_sequence,
        alpha_c,
        i_of_a,
        alpha_reference: i1 / (PI * PI),
        alpha_c_reference: i1 / (2.0 * PI * PI),
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn x(k: u32) -> TestFunction {
        TestFunction::monomial(k)
    }

    #[test]
    fn mp_params() {
        let p = MpParams::new(1.0).unwrap();
        assert_eq!((p.a_minus, p.a_plus, p.beta), (0.0, 4.0, 0.5));
        let p = MpParams::new(4.0).unwrap();
        assert!((p.a_minus - 1.0).abs() < 1e-15 && (p.a_plus - 9.0).abs() < 1e-15);
        assert!(p.a_minus > 0.0);
        assert!(MpParams::new(0.5).is_err());
        assert_eq!(p.phi(1.0), 9.0);
        assert_eq!(p.phi(-1.0), 1.0);
    }

    #[test]
    fn divided_difference_examples() {
        assert_eq!(divided_difference(&x(3), 2.0, 2.0), 12.0);
        assert_eq!(divided_difference(&x(2), 1.0, 3.0), 4.0);
        let naive = (0.3f64.powi(5) - 0.31f64.powi(5)) / (0.3 - 0.31);
        let exact = divided_difference(&x(5), 0.3, 0.31);
        assert!((naive - exact).abs() <= 1e-12 * exact.abs());
    }

    #[test]
    fn large_degree_divided_difference_matches_series() {
        // brute-force power sum as oracle
        for (k, a, b) in [(100u32, 0.99f64, 0.97f64), (500, 0.999, 0.9985), (300, -0.98, 0.95), (200, 0.9, -0.9), (101, 0.5, 0.5)] {
            let brute: f64 = (0..k).map(|j| a.powi(j as i32) * b.powi((k - 1 - j) as i32)).sum();
            let got = monomial_divided_difference(k, a, b);
            assert!((got - brute).abs() <= 1e-11 * brute.abs().max(1e-300), "k={k}: {got} vs {brute}");
        }
    }

    #[test]
    fn generic_confluent_fallback() {
        let f = TestFunction::generic("exp", f64::exp, f64::exp);
        assert_eq!(f.divided_difference(1.0, 1.0), 1f64.exp());
        let q = f.divided_difference(0.0, 1.0);
        assert!((q - (1f64.exp() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn affine_divided_difference() {
        let mp = MpParams::new(4.0).unwrap();
        let f = x(3).compose_phi(&mp);
        let (a, b) = (0.2, -0.7);
        let direct = (mp.phi(a).powi(3) - mp.phi(b).powi(3)) / (a - b);
        assert!((f.divided_difference(a, b) - direct).abs() < 1e-12 * direct.abs());
    }

    #[test]
    fn kernel_mass_values() {
        assert!((kernel_mass(16).unwrap() - 1.0).abs() < 1e-4);
        assert!((kernel_mass(64).unwrap() - 1.0).abs() < 1e-10);
        assert!(kernel_mass(3).is_err());
        let g = QuadratureGrid::chebyshev1(64).unwrap();
        let mut cross = 0.0;
        for &a in &g.nodes {
            for &b in &g.nodes {
                cross -= a * b;
            }
        }
        assert!((cross / (64.0 * 64.0)).abs() < 1e-12);
    }

    #[test]
    fn semicircle_values() {
        for mode in [GammaMode::AsWritten, GammaMode::Density] {
            assert!(gamma_semicircle(&x(1), 256, mode).unwrap().abs() < 1e-14);
        }
        assert!((gamma_semicircle(&x(0), 256, GammaMode::Density).unwrap() - 1.0).abs() < 1e-12);
        assert!((gamma_semicircle(&x(2), 256, GammaMode::Density).unwrap() - 0.25).abs() < 1e-10);
        assert!((gamma_semicircle(&x(4), 256, GammaMode::Density).unwrap() - 0.125).abs() < 1e-10);
    }

    #[test]
    fn semicircle_odd_moments_vanish() {
        for j in 1..=8 {
            let v = gamma_semicircle(&x(2 * j - 1), 256, GammaMode::Density).unwrap();
            assert!(v.abs() < 1e-12, "j={j}: {v}");
        }
    }

    #[test]
    fn mp_moments() {
        for c in [1.0, 2.0, 4.0] {
            assert!((gamma_mp(&x(0), c, 256).unwrap() - 1.0).abs() < 1e-8, "c={c}");
            assert!((gamma_mp(&x(1), c, 256).unwrap() - c).abs() < 1e-8, "c={c}");
            assert!((gamma_mp(&x(2), c, 256).unwrap() - (c * c + c)).abs() < 1e-6, "c={c}");
        }
        assert!(gamma_mp(&x(0), 0.9, 64).is_err());
    }

    #[test]
    fn mp_third_moment() {
        // Narayana: c^3 + 3c^2 + c
        for c in [1.0, 3.0] {
            let v = gamma_mp(&x(3), c, 256).unwrap();
            assert!((v - (c * c * c + 3.0 * c * c + c)).abs() < 1e-8);
        }
    }

    #[test]
    fn big_gamma_values() {
        assert!((big_gamma(&x(1), &x(1), 256, PrefactorMode::AsWritten).unwrap() - 1.0).abs() < 1e-10);
        assert_eq!(big_gamma(&x(0), &x(5), 256, PrefactorMode::AsWritten).unwrap(), 0.0);
        assert!((big_gamma(&x(2), &x(2), 256, PrefactorMode::AsWritten).unwrap() - 0.5).abs() < 1e-8);
        let cal = big_gamma(&x(2), &x(2), 256, PrefactorMode::CltCalibrated).unwrap();
        assert!((cal - 0.125).abs() < 1e-8);
    }

    #[test]
    fn big_gamma_c_values() {
        for c in [1.0, 2.0, 4.0] {
            let v = big_gamma_c(&x(1), &x(1), c, 256, PrefactorMode::AsWritten).unwrap();
            assert!((v - 4.0 * c).abs() < 1e-8);
            assert_eq!(big_gamma_c(&x(0), &x(2), c, 256, PrefactorMode::AsWritten).unwrap(), 0.0);
        }
    }

    #[test]
    fn big_gamma_c_matches_lambda_variable_formula() {
        // (1/4π²) ∫∫ ((g(l1)-g(l2))/(l1-l2))² (4c - (l1-c-1)(l2-c-1)) /
        //   (sqrt(4c-(l1-c-1)²) sqrt(4c-(l2-c-1)²)) dl1 dl2 on [a_-, a_+]²,
        // integrated with Gauss–Legendre in the angle l = c + 1 + 2 sqrt(c) cos θ
        let c = 1.0f64;
        let r = c.sqrt();
        let g = QuadratureGrid::legendre(200).unwrap();
        let th: Vec<(f64, f64)> = g
            .nodes
            .iter()
            .zip(&g.weights)
            .map(|(&s, &w)| (0.5 * PI * (s + 1.0), 0.5 * PI * w))
            .collect();
        let mut total = 0.0;
        for &(t1, w1) in &th {
            for &(t2, w2) in &th {
                let l1 = c + 1.0 + 2.0 * r * t1.cos();
                let l2 = c + 1.0 + 2.0 * r * t2.cos();
                let dd = l1 + l2;
                let num = 4.0 * c - (l1 - c - 1.0) * (l2 - c - 1.0);
                let den = (4.0 * c - (l1 - c - 1.0).powi(2)).sqrt() * (4.0 * c - (l2 - c - 1.0).powi(2)).sqrt();
                let jac = 2.0 * r * t1.sin() * 2.0 * r * t2.sin();
                total += w1 * w2 * dd * dd * num / den * jac;
            }
        }
        let oracle = total / (4.0 * PI * PI);
        let v = big_gamma_c(&x(2), &x(2), c, 256, PrefactorMode::CltCalibrated).unwrap();
        assert!((v - oracle).abs() < 1e-6 * oracle, "{v} vs {oracle}");
    }

    #[test]
    fn edge_constants() {
        let c1 = c_limit_constant(1.0).unwrap();
        assert!((c1 - 1.0 / PI.sqrt()).abs() < 1e-14);
        let printed = c_limit_constant_as_printed(1.0).unwrap();
        assert!((printed - 2.0 / PI.sqrt()).abs() < 1e-14);
        for c in [1.0, 2.0, 4.0] {
            let mp = MpParams::new(c).unwrap();
            let k = EDGE_DEGREE;
            let h = TestFunction::h(k, &mp);
            let g = gamma_mp(&h, c, recommended_nodes(k)).unwrap();
            let scaled = (k as f64).powf(1.5) * g;
            let target = c_limit_constant(c).unwrap();
            assert!((scaled - target).abs() < 0.02 * target, "c={c}: {scaled} vs {target}");
            assert!(k as f64 * g < 0.05);
        }
    }

    #[test]
    fn exp_divided_difference_diagonal() {
        assert_eq!(exp_divided_difference(1.0, 1.0, 1.0), -(-1f64).exp());
        let near = exp_divided_difference(1.0, 1.0, 1.0 + 1e-12);
        assert!((near + (-1f64).exp()).abs() < 1e-11);
        let far = exp_divided_difference(2.0, 0.5, 3.0);
        let direct = ((-1f64).exp() - (-6f64).exp()) / (0.5 - 3.0);
        assert!((far - direct).abs() < 1e-15);
    }

    #[test]
    fn exp_kernel_closed_forms() {
        // I(1) = 2π and I(4) = 8π/5
        let i1 = exp_kernel_integral(1.0, EXP_KERNEL_NODES).unwrap();
        assert!((i1 - 2.0 * PI).abs() < 1e-6 * 2.0 * PI, "{i1}");
        let i4 = exp_kernel_integral(4.0, EXP_KERNEL_NODES).unwrap();
        assert!((i4 - 1.6 * PI).abs() < 1e-6 * 1.6 * PI, "{i4}");
    }

    #[test]
    fn exp_kernel_decreasing_and_bounded() {
        let mut prev = f64::INFINITY;
        let i1 = exp_kernel_integral(1.0, EXP_KERNEL_NODES).unwrap();
        for a in [1.0, 4.0, 16.0, 64.0] {
            let v = exp_kernel_integral(a, EXP_KERNEL_NODES).unwrap();
            assert!(v < prev);
            prev = v;
        }
        let b64 = prev * 8.0 / (1.0 + 64f64.ln());
        assert!(b64 <= 1.5 * i1);
    }

    #[test]
    fn exp_kernel_rejects_small_a() {
        assert!(exp_kernel_integral(0.5, 64).is_err());
    }

    #[test]
    fn alpha_sequence_converges() {
        let lc = estimate_limit_constants(&[100, 200, 400], &[1.0, 4.0], None).unwrap();
        assert!(lc.converged);
        assert!(lc.alpha > 0.0);
        assert!((lc.alpha - lc.alpha_reference).abs() <= 0.05 * lc.alpha_reference);
        for ac in &lc.alpha_c {
            assert!((ac.value - lc.alpha_c_reference).abs() <= 0.05 * lc.alpha_c_reference, "{ac:?}");
        }
    }

    #[test]
    fn off_diagonal_decay() {
        let k = 100u32;
        let mut prev = f64::INFINITY;
        for a in [1u32, 2, 4, 8, 16, 32, 64] {
            let n = recommended_nodes(a * k);
            let v = big_gamma(&x(k), &x(a * k), n, PrefactorMode::AsWritten).unwrap();
            assert!(v <= prev + 1e-12, "A={a}: {v} > {prev}");
            prev = v;
        }
    }

    #[test]
    fn resolution_stability() {
        let pairs = [(1u32, 1u32), (2, 3), (4, 4), (3, 7)];
        for (i, j) in pairs {
            let a = big_gamma(&x(i), &x(j), 256, PrefactorMode::AsWritten).unwrap();
            let b = big_gamma(&x(i), &x(j), 512, PrefactorMode::AsWritten).unwrap();
            assert!((a - b).abs() <= 1e-6 * a.abs() + 1e-13, "({i},{j}): {a} vs {b}");
            let a = big_gamma_c(&x(i), &x(j), 2.0, 256, PrefactorMode::AsWritten).unwrap();
            let b = big_gamma_c(&x(i), &x(j), 2.0, 512, PrefactorMode::AsWritten).unwrap();
            assert!((a - b).abs() <= 1e-6 * a.abs() + 1e-13, "({i},{j}): {a} vs {b}");
        }
        for f in [x(3), x(6)] {
            let a = gamma_mp(&f, 1.0, 256).unwrap();
            let b = gamma_mp(&f, 1.0, 512).unwrap();
            assert!((a - b).abs() <= 1e-6 * a.abs());
        }
    }

    #[test]
    fn gram_matrix_psd() {
        let fs: Vec<TestFunction> = (1..=5).map(x).collect();
        for c in [1.0, 4.0] {
            let m = big_gamma_c_matrix(&fs, c, 256, PrefactorMode::AsWritten).unwrap();
            // Cholesky with a small diagonal shift must succeed
            let k = m.len();
            let scale = m.iter().map(|r| r.iter().fold(0.0f64, |a, b| a.max(b.abs()))).fold(0.0, f64::max);
            let shift = 1e-8 * scale.max(1.0);
            let mut l = vec![vec![0.0; k]; k];
            for i in 0..k {
                for j in 0..=i {
                    let s: f64 = (0..j).map(|p| l[i][p] * l[j][p]).sum();
                    if i == j {
                        let d = m[i][i] + shift - s;
                        assert!(d > 0.0, "c={c}: pivot {i} = {d}");
                        l[i][i] = d.sqrt();
                    } else {
                        l[i][j] = (m[i][j] - s) / l[j][j];
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn bilinearity(a in -3.0f64..3.0, b in -3.0f64..3.0, i in 1u32..6, j in 1u32..6, h in 1u32..6) {
            let comb = TestFunction::Combination(vec![(a, x(i)), (b, x(j))]);
            let lhs = big_gamma(&comb, &x(h), 64, PrefactorMode::AsWritten).unwrap();
            let rhs = a * big_gamma(&x(i), &x(h), 64, PrefactorMode::AsWritten).unwrap()
                + b * big_gamma(&x(j), &x(h), 64, PrefactorMode::AsWritten).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        }

        #[test]
        fn divided_difference_symmetric(k in 0u32..200, a in -1.0f64..1.0, b in -1.0f64..1.0) {
            let p = monomial_divided_difference(k, a, b);
            let q = monomial_divided_difference(k, b, a);
            prop_assert!((p - q).abs() <= 1e-12 * (1.0 + p.abs()));
        }
    }
}
