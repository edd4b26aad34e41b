use serde::Serialize;

use super::energy::excess_energy;
use crate::geometry::{enumerate_connected, BallGeometry, ConfigWindow, Vertex};
use crate::model::ModelSpec;
use crate::oracle::enumerate_gibbs;
use crate::{Error, Result, Spin};

/// Largest volume `|B_n|` the exhaustive Peierls check accepts.
pub const PEIERLS_VOLUME_LIMIT: u64 = 13;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContourRecord {
    /// Vertex paths of the support `γ`.
    pub support: Vec<String>,
    pub labels: Vec<Spin>,
    pub excess_energy: f64,
    /// `exp(−β · excess)`.
    pub activity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeierlsLedger {
    pub vertex: String,
    /// `μ_Λ^{ω⁰}(σ_v ≠ ω⁰_v)` by exhaustive enumeration.
    pub lhs: f64,
    /// Sum of activities of every labelled contour in `Λ` through `v`.
    pub rhs: f64,
    pub holds: bool,
    pub contours: Vec<ContourRecord>,
}

impl PeierlsLedger {
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// Exact Peierls inequality at `v` for the volume `B_n` of `geometry` with
/// boundary and reference configuration `ω⁰` (covering `B_n ∪ S_{n+1}`).
pub fn peierls_check(
    spec: &ModelSpec,
    geometry: &BallGeometry,
    reference: &ConfigWindow,
    v: Vertex,
) -> Result<PeierlsLedger> {
    let size = geometry.ball_size(geometry.depth());
    if size > PEIERLS_VOLUME_LIMIT {
        return Err(Error::Guard {
            what: "Peierls volume",
            needed: size as u128,
            limit: PEIERLS_VOLUME_LIMIT as u128,
        });
    }
    if !geometry.contains(v) {
        return Err(Error::OutsideVolume(v.to_string()));
    }
    let reference_spin = reference.spin(v)?;
    let exact = enumerate_gibbs(spec, geometry, reference)?;
    let lhs = 1.0 - exact.marginal(v)?[reference_spin];

    let q = spec.q();
    let mut contours = Vec::new();
    let mut rhs = 0.0;
    for gamma in enumerate_connected(geometry, v, size as usize)? {
        let refs: Vec<Spin> = gamma
            .iter()
            .map(|&x| reference.spin(x))
            .collect::<Result<_>>()?;
        let count = (q - 1).pow(gamma.len() as u32);
        for code in 0..count {
            let mut c = code;
            let labels: Vec<Spin> = refs
                .iter()
                .map(|&r| {
                    let k = c % (q - 1);
                    c /= q - 1;
                    (r + 1 + k) % q
                })
                .collect();
            let ex = excess_energy(spec, geometry, reference, &gamma, &labels)?;
            let activity = (-spec.beta() * ex.value).exp();
            rhs += activity;
            contours.push(ContourRecord {
                support: gamma.iter().map(|&x| geometry.path_string(x)).collect(),
                labels,
                excess_energy: ex.value,
                activity,
            });
        }
    }
    Ok(PeierlsLedger {
        vertex: geometry.path_string(v),
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + 1e-12),
        contours,
    })
}
