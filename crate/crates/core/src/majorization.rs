//! Suffix-sum majorisation tests and the Vidal conversion probability.

use serde::{Deserialize, Serialize};

use crate::ensembles::SimplexVector;
use crate::error::{Error, Result};

/// Outcome of comparing the tails of `x` against the tails of `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajorizationReport {
    /// `suffix_x[k] <= suffix_y[k] + tol` for every `k`.
    pub dominated: bool,
    /// 1-based index of the first failing tail, if any.
    pub first_violation_k: Option<usize>,
    pub suffix_x: Vec<f64>,
    pub suffix_y: Vec<f64>,
    /// `min_k suffix_x[k] / suffix_y[k]`, capped at 1.
    pub pi: f64,
}

fn check_sorted(x: &[f64]) -> Result<()> {
    if let Some(i) = x.windows(2).position(|w| w[0] < w[1] || w[0].is_nan()) {
        return Err(Error::invalid(format!(
            "input must be non-increasing (entries {} and {})",
            i + 1,
            i + 2
        )));
    }
    Ok(())
}

/// `out[k] = x[k] + ... + x[n-1]`, accumulated from the smallest entry up.
pub fn suffix_sums(x: &[f64]) -> Result<Vec<f64>> {
    check_sorted(x)?;
    Ok(suffix_sums_unchecked(x))
}

pub(crate) fn suffix_sums_unchecked(x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    let mut acc = 0.0;
    for (o, v) in out.iter_mut().zip(x).rev() {
        acc += v;
        *o = acc;
    }
    out
}

fn ratio_pi(sx: &[f64], sy: &[f64]) -> f64 {
    let mut pi = f64::INFINITY;
    let mut reverse = true;
    for (a, b) in sx.iter().zip(sy) {
        if b > a {
            reverse = false;
        }
        if *b == 0.0 {
            continue;
        }
        pi = pi.min(a / b);
    }
    if reverse {
        1.0
    } else {
        // strictly below 1 whenever some tail of y exceeds the matching tail of x
        pi.min(1.0 - f64::EPSILON / 2.0)
    }
}

/// Tail comparison on raw sorted slices.
pub fn tails_dominated_slices(x: &[f64], y: &[f64], tol: f64) -> Result<MajorizationReport> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let suffix_x = suffix_sums(x)?;
    let suffix_y = suffix_sums(y)?;
    let first_violation_k = suffix_x
        .iter()
        .zip(&suffix_y)
        .position(|(a, b)| !(*a <= b + tol))
        .map(|k| k + 1);
    let pi = ratio_pi(&suffix_x, &suffix_y);
    Ok(MajorizationReport {
        dominated: first_violation_k.is_none(),
        first_violation_k,
        suffix_x,
        suffix_y,
        pi,
    })
}

/// Whether every tail sum of `x` is at most the matching tail of `y` plus `tol`.
pub fn tails_dominated(x: &SimplexVector, y: &SimplexVector, tol: f64) -> Result<MajorizationReport> {
    tails_dominated_slices(x.values(), y.values(), tol)
}

/// Dominance flags at several tolerances from one pass over the tails.
pub fn tails_dominated_at(x: &SimplexVector, y: &SimplexVector, tols: &[f64]) -> Result<Vec<bool>> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    let sx = suffix_sums(x.values())?;
    let sy = suffix_sums(y.values())?;
    Ok(tols
        .iter()
        .map(|&tol| sx.iter().zip(&sy).all(|(a, b)| *a <= b + tol))
        .collect())
}

/// Optimal conversion probability `min_k suffix_x[k] / suffix_y[k]`.
///
/// Tails with `suffix_y[k] = 0` are skipped (they contribute `+inf` or the
/// indeterminate `0/0`). The result is exactly 1 iff every tail of `x` is at
/// least the matching tail of `y`.
pub fn vidal_pi(x: &SimplexVector, y: &SimplexVector) -> Result<f64> {
    vidal_pi_slices(x.values(), y.values())
}

pub fn vidal_pi_slices(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let sx = suffix_sums(x)?;
    let sy = suffix_sums(y)?;
    for (name, s) in [("x", &sx), ("y", &sy)] {
        let total = s.first().copied().unwrap_or(0.0);
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("{name} sums to {total}, not 1")));
        }
    }
    Ok(ratio_pi(&sx, &sy))
}

/// Compares `sum f(x_k)` against `sum f(y_k) + 1e-9`.
///
/// Meaningful when `y`'s tails are all at most `x`'s tails and the totals
/// agree, i.e. `x` is majorised by `y`; the result is then `true` for every
/// convex `f`.
pub fn convex_dominance_check(x: &[f64], y: &[f64], f: impl Fn(f64) -> f64) -> bool {
    let fx: f64 = x.iter().map(|&t| f(t)).sum();
    let fy: f64 = y.iter().map(|&t| f(t)).sum();
    fx <= fy + 1e-9
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::sample_uniform_simplex;
    use crate::rng::derive_substream;
    use proptest::prelude::*;

    fn sv(v: &[f64]) -> SimplexVector {
        SimplexVector::new(v.to_vec(), true).unwrap()
    }

    #[test]
    fn suffix_examples() {
        let s = suffix_sums(&[0.5, 0.3, 0.2]).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-15 && (s[1] - 0.5).abs() < 1e-15 && s[2] == 0.2);
        assert_eq!(suffix_sums(&[1.0]).unwrap(), vec![1.0]);
        assert!(suffix_sums(&[0.2, 0.5]).is_err());
    }

    #[test]
    fn suffix_total_on_random_simplex() {
        let mut rng = derive_substream(20, 0);
        for _ in 0..10_000 {
            let x = sample_uniform_simplex(17, &mut rng).unwrap().into_sorted();
            let s = suffix_sums(x.values()).unwrap();
            assert!((s[0] - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn reflexive() {
        let x = sv(&[0.6, 0.3, 0.1]);
        assert!(tails_dominated(&x, &x, 0.0).unwrap().dominated);
        assert_eq!(vidal_pi(&x, &x).unwrap(), 1.0);
    }

    #[test]
    fn two_point_example() {
        let x = sv(&[0.5, 0.5]);
        let y = sv(&[1.0, 0.0]);
        let r = tails_dominated(&x, &y, 0.0).unwrap();
        assert_eq!(r.suffix_x, vec![1.0, 0.5]);
        assert_eq!(r.suffix_y, vec![1.0, 0.0]);
        assert!(!r.dominated);
        assert_eq!(r.first_violation_k, Some(2));
        assert!(tails_dominated(&y, &x, 0.0).unwrap().dominated);
    }

    #[test]
    fn three_point_example() {
        let x = sv(&[0.5, 0.3, 0.2]);
        let y = sv(&[0.6, 0.2, 0.2]);
        let r = tails_dominated(&x, &y, 0.0).unwrap();
        assert_eq!(r.first_violation_k, Some(2));
        assert!(r.suffix_x[1] > r.suffix_y[1]);
        assert!(tails_dominated(&y, &x, 0.0).unwrap().dominated);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(tails_dominated(&sv(&[1.0]), &sv(&[0.5, 0.5]), 0.0).is_err());
        assert!(vidal_pi(&sv(&[1.0]), &sv(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn vidal_examples() {
        assert_eq!(vidal_pi(&sv(&[1.0, 0.0]), &sv(&[0.5, 0.5])).unwrap(), 0.0);
        assert_eq!(vidal_pi(&sv(&[0.5, 0.5]), &sv(&[1.0, 0.0])).unwrap(), 1.0);
    }

    #[test]
    fn vidal_rejects_unnormalised() {
        assert!(vidal_pi_slices(&[0.5, 0.4], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn convex_examples() {
        assert!(convex_dominance_check(&[0.5, 0.5], &[1.0, 0.0], |t| t * t));
        let a: f64 = [0.5, 0.3, 0.2].iter().map(|t| 3.0 * t + 1.0).sum();
        let b: f64 = [0.6, 0.2, 0.2].iter().map(|t| 3.0 * t + 1.0).sum();
        assert!((a - b).abs() < 1e-12);
    }

    /// Replaces a few adjacent pairs of `y` by their average; the result is
    /// majorised by `y`.
    fn averaged(y: &[f64], picks: &[usize]) -> Vec<f64> {
        let mut x = y.to_vec();
        for &p in picks {
            let i = p % (x.len() - 1);
            let m = 0.5 * (x[i] + x[i + 1]);
            x[i] = m;
            x[i + 1] = m;
        }
        x
    }

    #[test]
    fn averaged_pairs_satisfy_convex_battery() {
        let mut rng = derive_substream(21, 0);
        for trial in 0..1000 {
            let y = sample_uniform_simplex(12, &mut rng).unwrap().into_sorted();
            let picks: Vec<usize> = (0..4).map(|_| (rng.next_u32() as usize) + trial).collect();
            let x = averaged(y.values(), &picks);
            // averaging adjacent sorted entries keeps the order; unchanged
            // tails may differ in the last bit
            assert!(tails_dominated_slices(y.values(), &x, 1e-12).unwrap().dominated);
            assert!(convex_dominance_check(&x, y.values(), |t| t.powi(4)));
        }
    }

    proptest! {
        #[test]
        fn multi_tolerance_agrees(seed in 0u64..10_000, n in 1usize..40) {
            let mut rng = derive_substream(seed, 24);
            let x = sample_uniform_simplex(n, &mut rng).unwrap().into_sorted();
            let y = sample_uniform_simplex(n, &mut rng).unwrap().into_sorted();
            let tols = [0.0, 1e-12, 0.05];
            let flags = tails_dominated_at(&x, &y, &tols).unwrap();
            for (f, &t) in flags.iter().zip(&tols) {
                prop_assert_eq!(*f, tails_dominated(&x, &y, t).unwrap().dominated);
            }
        }

        #[test]
        fn convex_battery(seed in 0u64..10_000, n in 2usize..24, rounds in 1usize..6) {
            let mut rng = derive_substream(seed, 22);
            let y = sample_uniform_simplex(n, &mut rng).unwrap().into_sorted();
            let picks: Vec<usize> = (0..rounds).map(|_| rng.next_u32() as usize).collect();
            let x = averaged(y.values(), &picks);
            prop_assert!(tails_dominated_slices(y.values(), &x, 1e-12).unwrap().dominated);
            let mut sorted = x.clone();
            sorted.sort_by(f64::total_cmp);
            let median = sorted[n / 2];
            prop_assert!(convex_dominance_check(&x, y.values(), |t| t * t));
            prop_assert!(convex_dominance_check(&x, y.values(), |t| t.powi(4)));
            prop_assert!(convex_dominance_check(&x, y.values(), |t| t.powi(8)));
            prop_assert!(convex_dominance_check(&x, y.values(), |t| (t - median).abs()));
            prop_assert!(convex_dominance_check(&x, y.values(), f64::exp));
        }

        #[test]
        fn pi_one_iff_reverse_dominance(seed in 0u64..10_000, n in 1usize..16) {
            let mut rng = derive_substream(seed, 23);
            let x = sample_uniform_simplex(n, &mut rng).unwrap().into_sorted();
            let y = sample_uniform_simplex(n, &mut rng).unwrap().into_sorted();
            let pi = vidal_pi(&x, &y).unwrap();
            prop_assert!((0.0..=1.0).contains(&pi));
            let rev = tails_dominated(&y, &x, 0.0).unwrap().dominated;
            prop_assert_eq!(pi == 1.0, rev);
        }

        #[test]
        fn mutual_dominance_means_equal_tails(seed in 0u64..10_000, n in 1usize..16) {
            let mut rng = derive_substream(seed, 24);
            let x = sample_uniform_simplex(n, &mut rng).unwrap().into_sorted();
            let a = tails_dominated(&x, &x, 0.0).unwrap();
            prop_assert!(a.dominated);
            for (p, q) in a.suffix_x.iter().zip(&a.suffix_y) {
                prop_assert!((p - q).abs() <= 1e-12);
            }
        }

        #[test]
        fn dominated_iff_no_violation(seed in 0u64..10_000, n in 1usize..10, tol in prop_oneof![Just(0.0), Just(1e-12), 0.0f64..0.1]) {
            let mut rng = derive_substream(seed, 25);
            let x = sample_uniform_simplex(n, &mut rng).unwrap().into_sorted();
            let y = sample_uniform_simplex(n, &mut rng).unwrap().into_sorted();
            let r = tails_dominated(&x, &y, tol).unwrap();
            prop_assert_eq!(r.dominated, r.first_violation_k.is_none());
            if let Some(k) = r.first_violation_k {
                prop_assert!(r.suffix_x[k - 1] > r.suffix_y[k - 1] + tol);
            }
        }
    }

    #[test]
    fn single_tail_symmetry_null() {
        let mut rng = derive_substream(26, 0);
        let trials = 20_000;
        let k = 5;
        let hits = (0..trials)
            .filter(|_| {
                let x = sample_uniform_simplex(10, &mut rng).unwrap().into_sorted();
                let y = sample_uniform_simplex(10, &mut rng).unwrap().into_sorted();
                let sx = suffix_sums(x.values()).unwrap();
                let sy = suffix_sums(y.values()).unwrap();
                sx[k] <= sy[k]
            })
            .count();
        let p = hits as f64 / trials as f64;
        let se = (0.25 / trials as f64).sqrt();
        assert!((p - 0.5).abs() < 3.0 * se, "p = {p}");
    }
}
