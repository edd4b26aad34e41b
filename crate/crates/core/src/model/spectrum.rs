use nalgebra::SymmetricEigen;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::Serialize;

use super::{build_reference_transfer, ModelSpec};
use crate::{Error, Result};

/// Spectrum of the normalised reference matrix `Q₀/‖Q₀‖₁` of a clock model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenReport {
    /// Eigenvalues from the DFT of the first row, indexed by frequency.
    pub eigenvalues: Vec<f64>,
    /// The same spectrum from a dense symmetric eigensolver, descending.
    pub dense_eigenvalues: Vec<f64>,
    /// `(1 − (q−1)e^{−βu}) / (1 + (q−1)e^{−βu})`.
    pub lower_bound: f64,
    /// Whether the lower bound is informative, i.e. `(q−1)e^{−βu} < 1`.
    pub bound_meaningful: bool,
    /// `(d−1)/(d+1) > (q−1)e^{−βu}`, sufficient for all eigenvalues ≠ 1/d.
    pub gap_condition: bool,
    /// `min_j |λ_j − 1/d|`.
    pub distance_to_inverse_d: f64,
}

impl EigenReport {
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn eigen_report(spec: &ModelSpec) -> Result<EigenReport> {
    if !spec.clock_flag() {
        return Err(Error::NotClock);
    }
    let q = spec.q();
    let q0 = build_reference_transfer(spec).normalized();

    let mut buffer: Vec<Complex<f64>> = (0..q).map(|j| Complex::new(q0.get(0, j), 0.0)).collect();
    FftPlanner::new().plan_fft_forward(q).process(&mut buffer);
    // Q₀ is symmetric circulant, so the transform is real.
    let eigenvalues: Vec<f64> = buffer.iter().map(|c| c.re).collect();

    let mut dense_eigenvalues: Vec<f64> = SymmetricEigen::new(q0.entries().clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    dense_eigenvalues.sort_by(|a, b| b.total_cmp(a));

    let excitation = (q as f64 - 1.0) * (-spec.beta() * spec.u_min()).exp();
    let d = spec.d() as f64;
    let inv_d = 1.0 / d;
    Ok(EigenReport {
        distance_to_inverse_d: eigenvalues
            .iter()
            .map(|l| (l - inv_d).abs())
            .fold(f64::INFINITY, f64::min),
        eigenvalues,
        dense_eigenvalues,
        lower_bound: (1.0 - excitation) / (1.0 + excitation),
        bound_meaningful: excitation < 1.0,
        gap_condition: (d - 1.0) / (d + 1.0) > excitation,
    })
}
