//! Kolmogorov–Smirnov tests with the asymptotic Kolmogorov distribution.

use serde::{Deserialize, Serialize};
use libm::erfc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Effective sample size used in the p-value.
    pub n_eff: f64,
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    if lambda < 1.18 {
        let pi2 = std::f64::consts::PI.powi(2);
        let mut s = 0.0;
        for j in 1..=8 {
            let k = (2 * j - 1) as f64;
            s += (-k * k * pi2 / (8.0 * lambda * lambda)).exp();
        }
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        for j in 1..=100 {
            let jf = j as f64;
            let term = (-2.0 * jf * jf * lambda * lambda).exp();
            s += if j % 2 == 1 { term } else { -term };
            if term < 1e-18 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

fn p_value(d: f64, ne: f64) -> f64 {
    let sq = ne.sqrt();
    kolmogorov_q((sq + 0.12 + 0.11 / sq) * d)
}

/// One-sample test of `data` against a continuous CDF.
pub fn ks_one_sample(data: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let mut x = data.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d = 0.0f64;
    for (i, &v) in x.iter().enumerate() {
        let f = cdf(v);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    KsResult {
        statistic: d,
        p_value: p_value(d, n),
        n_eff: n,
    }
}

/// Two-sample test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n1 - j as f64 / n2).abs());
    }
    let ne = n1 * n2 / (n1 + n2);
    KsResult {
        statistic: d,
        p_value: p_value(d, ne),
        n_eff: ne,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_substream;

    #[test]
    fn kolmogorov_reference_values() {
        // Q(1.36) ≈ 0.0494, Q(1.63) ≈ 0.0098, Q(0.5) ≈ 0.9639
        assert!((kolmogorov_q(1.36) - 0.0494).abs() < 5e-4);
        assert!((kolmogorov_q(1.63) - 0.0098).abs() < 3e-4);
        assert!((kolmogorov_q(0.5) - 0.9639).abs() < 5e-4);
        // the two series agree where they meet
        let lo = kolmogorov_q(1.18 - 1e-12);
        let hi = kolmogorov_q(1.18 + 1e-12);
        assert!((lo - hi).abs() < 1e-9);
    }

    #[test]
    fn normal_cdf_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.96) - 0.975_002_1).abs() < 1e-6);
    }

    #[test]
    fn uniform_passes_and_shift_fails() {
        let mut rng = derive_substream(30, 0);
        let u: Vec<f64> = (0..5000).map(|_| rng.uniform()).collect();
        assert!(ks_one_sample(&u, |x| x.clamp(0.0, 1.0)).p_value > 0.01);
        assert!(ks_one_sample(&u, |x| (x - 0.1).clamp(0.0, 1.0)).p_value < 1e-6);
        let v: Vec<f64> = (0..5000).map(|_| rng.uniform()).collect();
        assert!(ks_two_sample(&u, &v).p_value > 0.01);
        let w: Vec<f64> = v.iter().map(|x| x * 0.9).collect();
        assert!(ks_two_sample(&u, &w).p_value < 1e-6);
    }
}
