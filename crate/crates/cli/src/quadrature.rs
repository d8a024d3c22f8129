//! Deterministic tables of the limit functionals, reported under both
//! prefactor conventions.

use majlab_core::limitlaws::{
    big_gamma, big_gamma_c_matrix, estimate_limit_constants, gamma_mp, gamma_semicircle, kernel_mass,
    recommended_nodes, GammaMode, PrefactorMode,
};
use majlab_core::{LimitConstants, TestFunction};
use serde::{Deserialize, Serialize};

pub const REPORT_NODES: usize = 256;
/// `Γ(x^k, x^{A k})` is tabulated at this `k`.
pub const OFF_DIAGONAL_DEGREE: u32 = 200;
pub const OFF_DIAGONAL_RATIOS: [u32; 4] = [1, 4, 16, 64];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MpMoments {
    pub c: f64,
    /// `γ_c(x^j)` for `j = 0, 1, 2`.
    pub moments: [f64; 3],
    /// `1, c, c² + c`.
    pub expected: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GammaMatrices {
    pub c: f64,
    pub degrees: Vec<u32>,
    pub as_written: Vec<Vec<f64>>,
    pub calibrated: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SemicircleMoment {
    pub degree: u32,
    pub as_written: f64,
    pub density: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadratureReport {
    pub kernel_mass: f64,
    pub mp_moments: Vec<MpMoments>,
    pub semicircle_moments: Vec<SemicircleMoment>,
    /// `Γ(x², x²)` as written and calibrated.
    pub gamma_x2_x2: (f64, f64),
    /// `Γ_c` on `{x, x², x³}`.
    pub gamma_c: Vec<GammaMatrices>,
    /// `(A, Γ(x^k, x^{A k}))` as written.
    pub off_diagonal: Vec<(u32, f64)>,
    /// `(c, k γ_c(h_k))` at the edge degree.
    pub edge_decay: Vec<(f64, f64)>,
    pub limits: LimitConstants,
}

pub fn quadrature_report(k_list: &[u32], c_list: &[f64]) -> majlab_core::Result<QuadratureReport> {
    let n = REPORT_NODES;
    let x = TestFunction::monomial;
    let mut mp_moments = Vec::new();
    let mut gamma_c = Vec::new();
    let cubic = [x(1), x(2), x(3)];
    for &c in c_list {
        mp_moments.push(MpMoments {
            c,
            moments: [gamma_mp(&x(0), c, n)?, gamma_mp(&x(1), c, n)?, gamma_mp(&x(2), c, n)?],
            expected: [1.0, c, c * c + c],
        });
        gamma_c.push(GammaMatrices {
            c,
            degrees: vec![1, 2, 3],
            as_written: big_gamma_c_matrix(&cubic, c, n, PrefactorMode::AsWritten)?,
            calibrated: big_gamma_c_matrix(&cubic, c, n, PrefactorMode::CltCalibrated)?,
        });
    }
    let semicircle_moments = (0..=4)
        .map(|d| {
            Ok(SemicircleMoment {
                degree: d,
                as_written: gamma_semicircle(&x(d), n, GammaMode::AsWritten)?,
                density: gamma_semicircle(&x(d), n, GammaMode::Density)?,
            })
        })
        .collect::<majlab_core::Result<Vec<_>>>()?;
    let k = OFF_DIAGONAL_DEGREE;
    let off_nodes = recommended_nodes(k * OFF_DIAGONAL_RATIOS[OFF_DIAGONAL_RATIOS.len() - 1]);
    let off_diagonal = OFF_DIAGONAL_RATIOS
        .iter()
        .map(|&a| Ok((a, big_gamma(&x(k), &x(a * k), off_nodes, PrefactorMode::AsWritten)?)))
        .collect::<majlab_core::Result<Vec<_>>>()?;
    let limits = estimate_limit_constants(k_list, c_list, None)?;
    let edge_decay = limits
        .c_c
        .iter()
        .map(|e| (e.c, e.numeric / (e.k as f64).sqrt()))
        .collect();
    Ok(QuadratureReport {
        kernel_mass: kernel_mass(n)?,
        mp_moments,
        semicircle_moments,
        gamma_x2_x2: (
            big_gamma(&x(2), &x(2), n, PrefactorMode::AsWritten)?,
            big_gamma(&x(2), &x(2), n, PrefactorMode::CltCalibrated)?,
        ),
        gamma_c,
        off_diagonal,
        edge_decay,
        limits,
    })
}
