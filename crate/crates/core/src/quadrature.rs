//! Gauss-type quadrature rules on `[-1, 1]` and a rational map of
//! Gauss–Legendre onto the half line.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureFamily {
    /// Weight `1/sqrt(1 - x^2)`.
    Chebyshev1,
    /// Weight `sqrt(1 - x^2)`.
    Chebyshev2,
    /// Weight `(1 - x)^alpha (1 + x)^beta`; only `(1/2, -1/2)` is built.
    Jacobi { alpha: f64, beta: f64 },
    /// Unit weight.
    Legendre,
    /// Unit weight on `(0, inf)` via `u = L w / (1 - w)`.
    RationalHalfLine { scale: f64 },
}

/// Nodes and positive weights; `sum_j w_j f(x_j)` approximates the weighted
/// integral of `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub family: QuadratureFamily,
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::param("quadrature needs at least one node"));
    }
    Ok(())
}

impl QuadratureGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Gauss–Chebyshev of the first kind.
    pub fn chebyshev1(n: usize) -> Result<Self> {
        check_n(n)?;
        let w = PI / n as f64;
        let nodes = (0..n)
            .map(|j| ((2 * j + 1) as f64 * PI / (2 * n) as f64).cos())
            .collect();
        Ok(Self {
            nodes,
            weights: vec![w; n],
            family: QuadratureFamily::Chebyshev1,
        })
    }

    /// Gauss–Chebyshev of the second kind.
    pub fn chebyshev2(n: usize) -> Result<Self> {
        check_n(n)?;
        let h = PI / (n + 1) as f64;
        let (nodes, weights) = (1..=n)
            .map(|j| {
                let t = j as f64 * h;
                (t.cos(), h * t.sin().powi(2))
            })
            .unzip();
        Ok(Self {
            nodes,
            weights,
            family: QuadratureFamily::Chebyshev2,
        })
    }

    /// Gauss–Jacobi with weight `sqrt((1 - x)/(1 + x))` (Chebyshev fourth kind).
    pub fn jacobi_half_minus_half(n: usize) -> Result<Self> {
        check_n(n)?;
        let d = (2 * n + 1) as f64;
        let (nodes, weights) = (1..=n)
            .map(|j| {
                let t = 2.0 * j as f64 * PI / d;
                (t.cos(), 4.0 * PI / d * (0.5 * t).sin().powi(2))
            })
            .unzip();
        Ok(Self {
            nodes,
            weights,
            family: QuadratureFamily::Jacobi { alpha: 0.5, beta: -0.5 },
        })
    }

    /// Gauss–Legendre by Newton iteration on the three-term recurrence.
    pub fn legendre(n: usize) -> Result<Self> {
        check_n(n)?;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_eval(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    dp = legendre_eval(n, x).1;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = x;
            nodes[n - 1 - i] = -x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(Self {
            nodes,
            weights,
            family: QuadratureFamily::Legendre,
        })
    }

    /// Gauss–Legendre on `w in (0, 1)` pushed to `(0, inf)` through
    /// `u = scale * w / (1 - w)`.
    pub fn rational_half_line(n: usize, scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::param("half-line map scale must be positive"));
        }
        let g = Self::legendre(n)?;
        let (nodes, weights) = g
            .nodes
            .iter()
            .zip(&g.weights)
            .map(|(&x, &w)| {
                let t = 0.5 * (x + 1.0);
                let om = 1.0 - t;
                (scale * t / om, 0.5 * w * scale / (om * om))
            })
            .unzip();
        Ok(Self {
            nodes,
            weights,
            family: QuadratureFamily::RationalHalfLine { scale },
        })
    }
}

/// `(P_n(x), P_n'(x))`.
fn legendre_eval(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
