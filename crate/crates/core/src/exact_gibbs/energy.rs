use std::collections::BTreeSet;

use serde::Serialize;

use crate::geometry::{attached_edges, broken_bonds, BallGeometry, ConfigWindow, Vertex};
use crate::model::ModelSpec;
use crate::{Error, Result, Spin};

/// `Σ u_{ω_v,ω_w}` over the edges with at least one endpoint in `volume`.
pub fn pair_energy(
    spec: &ModelSpec,
    geometry: &BallGeometry,
    window: &ConfigWindow,
    volume: &[Vertex],
) -> Result<f64> {
    let mut total = 0.0;
    for e in attached_edges(geometry, volume) {
        total += spec.energy(window.spin(e.parent)?, window.spin(e.child)?);
    }
    Ok(total)
}

/// `Σ_{v ∈ volume} Ψ(ω_v)`.
pub fn field_energy(spec: &ModelSpec, window: &ConfigWindow, volume: &[Vertex]) -> Result<f64> {
    let distinct: BTreeSet<Vertex> = volume.iter().copied().collect();
    distinct
        .into_iter()
        .map(|v| window.spin(v).map(|s| spec.field()[s]))
        .sum()
}

/// `H_Λ(ω)`: pair energies on every edge touching `Λ` plus the field on `Λ`.
/// The window must cover `Λ ∪ ∂Λ`.
pub fn hamiltonian(
    spec: &ModelSpec,
    geometry: &BallGeometry,
    window: &ConfigWindow,
    volume: &[Vertex],
) -> Result<f64> {
    Ok(pair_energy(spec, geometry, window, volume)? + field_energy(spec, window, volume)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExcessEnergy {
    /// `H(ω') − H(ω⁰)`.
    pub value: f64,
    /// `(d−1)u|γ| − (U+u)|D(ω⁰) ∩ E(γ)| + Σ_{v∈γ}(Ψ(ω'_v) − Ψ(ω⁰_v))`.
    pub lower_bound: f64,
    /// `|D(ω⁰) ∩ E(γ)|`.
    pub broken_reference_bonds: usize,
}

/// Energy cost of replacing `ω⁰` by `labels` on the contour support `γ`.
///
/// Only the edges `E(γ)` and the field on `γ` change, so the difference is
/// evaluated there. Every label must differ from the reference.
pub fn excess_energy(
    spec: &ModelSpec,
    geometry: &BallGeometry,
    reference: &ConfigWindow,
    gamma: &[Vertex],
    labels: &[Spin],
) -> Result<ExcessEnergy> {
    if gamma.len() != labels.len() {
        return Err(Error::InvalidArgument(
            "contour support and labels differ in length".into(),
        ));
    }
    let mut flipped = reference.clone();
    for (&v, &s) in gamma.iter().zip(labels) {
        if s >= spec.q() {
            return Err(Error::InvalidArgument(format!(
                "label {s} outside 0..{}",
                spec.q()
            )));
        }
        if reference.spin(v)? == s {
            return Err(Error::NotAContour(geometry.path_string(v)));
        }
        flipped.set(v, s);
    }
    let value = hamiltonian(spec, geometry, &flipped, gamma)?
        - hamiltonian(spec, geometry, reference, gamma)?;
    let broken = broken_bonds(reference, &attached_edges(geometry, gamma))?;
    let (u, big_u) = (spec.u_min(), spec.u_max());
    let lower_bound = (spec.d() as f64 - 1.0) * u * gamma.len() as f64
        - (big_u + u) * broken as f64
        + field_energy(spec, &flipped, gamma)?
        - field_energy(spec, reference, gamma)?;
    Ok(ExcessEnergy {
        value,
        lower_bound,
        broken_reference_bonds: broken,
    })
}
