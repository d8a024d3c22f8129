//! Fixtures shared by the benchmarks.

use majlab_core::ensembles::{sorted_uniform_simplex_renyi, wishart_spectrum_fast};
use majlab_core::rng::derive_substream;
use majlab_core::{EnsembleParams, SimplexVector, SymTridiagonal};

/// Laguerre-type tridiagonal with the same spectrum law as a square Wishart draw.
pub fn laguerre_tridiagonal(n: usize, seed: u64) -> SymTridiagonal {
    let mut rng = derive_substream(seed, 0);
    let a2: Vec<f64> = (0..n).map(|i| rng.gamma((n - i) as f64)).collect();
    let b2: Vec<f64> = (0..n - 1).map(|i| rng.gamma((n - 1 - i) as f64)).collect();
    let diag = (0..n)
        .map(|i| a2[i] + if i > 0 { b2[i - 1] } else { 0.0 })
        .collect();
    let off = (0..n - 1).map(|i| (a2[i] * b2[i]).sqrt()).collect();
    SymTridiagonal::new(diag, off).expect("valid tridiagonal")
}

pub fn simplex_pair(n: usize, seed: u64) -> (SimplexVector, SimplexVector) {
    let mut rng = derive_substream(seed, 1);
    (
        sorted_uniform_simplex_renyi(n, &mut rng).expect("n >= 1"),
        sorted_uniform_simplex_renyi(n, &mut rng).expect("n >= 1"),
    )
}

/// Sum of the first eigenvalue over `draws` fast-path samples; keeps the
/// sampler from being optimised away.
pub fn fast_sampler_checksum(n: usize, m: usize, draws: u64, seed: u64) -> f64 {
    let p = EnsembleParams::new(n, m).expect("valid shape");
    (0..draws)
        .map(|i| wishart_spectrum_fast(p, &mut derive_substream(seed, i)).expect("m >= n").spectrum.values()[0])
        .sum()
}
