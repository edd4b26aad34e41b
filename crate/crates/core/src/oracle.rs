//! Brute-force ground truth for tiny instances.
//!
//! Everything here sums Boltzmann weights over full configuration tables.
//! Nothing goes through the message-passing code, so agreement with it is a
//! meaningful check.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::boundary_law::ChainKernel;
use crate::geometry::{
    attached_edges, enumerate_connected, BallGeometry, ConfigWindow, Provenance, Vertex,
};
use crate::model::ModelSpec;
use crate::{Error, Result, Spin};

/// Largest number of table entries any oracle routine will visit.
pub const ORACLE_STATE_LIMIT: u128 = 10_000_000;
/// Largest interior volume handled by [`enumerate_gibbs`].
pub const ORACLE_VOLUME_LIMIT: u64 = 13;

/// Deliberate corruption used to confirm that verification catches errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    /// Evaluate the pair part of the Hamiltonian with the wrong sign.
    FlipPairSign,
}

fn guard(what: &'static str, needed: u128) -> Result<()> {
    if needed > ORACLE_STATE_LIMIT {
        return Err(Error::Guard {
            what,
            needed,
            limit: ORACLE_STATE_LIMIT,
        });
    }
    Ok(())
}

fn table_size(q: usize, sites: u64) -> u128 {
    (q as u128).checked_pow(sites as u32).unwrap_or(u128::MAX)
}

/// Spins of configuration `code` (base-`q` digits, least significant first).
fn decode(mut code: usize, q: usize, out: &mut [Spin]) {
    for s in out.iter_mut() {
        *s = code % q;
        code /= q;
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    top + values.iter().map(|v| (v - top).exp()).sum::<f64>().ln()
}

/// Exact Gibbs distribution of the interior `B_n` given a boundary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactDistribution {
    pub volume: Vec<Vertex>,
    pub q: usize,
    /// Indexed by configuration code, digit `k` being the spin of `volume[k]`.
    pub probabilities: Vec<f64>,
    pub log_partition: f64,
}

impl ExactDistribution {
    pub fn marginal(&self, v: Vertex) -> Result<Vec<f64>> {
        let k = self
            .volume
            .iter()
            .position(|&x| x == v)
            .ok_or_else(|| Error::OutsideVolume(v.to_string()))?;
        let stride = self.q.pow(k as u32);
        let mut out = vec![0.0; self.q];
        for (code, p) in self.probabilities.iter().enumerate() {
            out[(code / stride) % self.q] += p;
        }
        Ok(out)
    }
}

/// `γ_{B_n}(· | ω)` by exhaustive summation of `exp(−βH)`.
pub fn enumerate_gibbs(
    spec: &ModelSpec,
    geometry: &BallGeometry,
    boundary: &ConfigWindow,
) -> Result<ExactDistribution> {
    enumerate_gibbs_with(spec, geometry, boundary, None)
}

pub fn enumerate_gibbs_with(
    spec: &ModelSpec,
    geometry: &BallGeometry,
    boundary: &ConfigWindow,
    fault: Option<Fault>,
) -> Result<ExactDistribution> {
    let n = geometry.depth();
    let size = geometry.ball_size(n);
    if size > ORACLE_VOLUME_LIMIT {
        return Err(Error::Guard {
            what: "oracle volume",
            needed: size as u128,
            limit: ORACLE_VOLUME_LIMIT as u128,
        });
    }
    let q = spec.q();
    let states = table_size(q, size);
    guard("oracle configurations", states)?;
    boundary.validate(q)?;

    let volume: Vec<Vertex> = geometry.ball(n).collect();
    let sphere: Vec<Vertex> = geometry.sphere(n + 1).collect();
    // Sites are the volume followed by the boundary sphere; edges and the
    // fixed boundary spins are resolved to positions once.
    let position: BTreeMap<Vertex, usize> = volume
        .iter()
        .chain(&sphere)
        .enumerate()
        .map(|(k, &v)| (v, k))
        .collect();
    let edges: Vec<(usize, usize)> = attached_edges(geometry, &volume)
        .iter()
        .map(|e| (position[&e.parent], position[&e.child]))
        .collect();
    let mut spins = vec![0; volume.len() + sphere.len()];
    for (k, &v) in sphere.iter().enumerate() {
        spins[volume.len() + k] = boundary.spin(v)?;
    }
    let pair_sign = match fault {
        Some(Fault::FlipPairSign) => -1.0,
        None => 1.0,
    };
    let mut log_weights = Vec::with_capacity(states as usize);
    for code in 0..states as usize {
        decode(code, q, &mut spins[..volume.len()]);
        let pair: f64 = edges
            .iter()
            .map(|&(a, b)| spec.energy(spins[a], spins[b]))
            .sum();
        let field: f64 = spins[..volume.len()].iter().map(|&s| spec.field()[s]).sum();
        log_weights.push(-spec.beta() * (pair_sign * pair + field));
    }
    let log_partition = log_sum_exp(&log_weights);
    let probabilities = log_weights
        .iter()
        .map(|w| (w - log_partition).exp())
        .collect();
    Ok(ExactDistribution {
        volume,
        q,
        probabilities,
        log_partition,
    })
}

/// Exact finite-depth statistics of the root predictor `π(σ₀ = · | ω)` with
/// `ω` drawn from the chain on `S_{n+1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactBoundaryStats {
    pub depth: u32,
    /// `q⁻¹ Σ_a Var(π(σ₀ = a | ω))`.
    pub qea: f64,
    /// `E[π(σ₀ = a | ω)]`, equal to the chain marginal.
    pub mean_root_marginal: Vec<f64>,
    /// `E[π(σ₀ = a | ω) | σ₀ = a]` for every `a`.
    pub reconstruction: Vec<f64>,
    /// Number of distinct boundary configurations summed over.
    pub boundaries: usize,
}

/// Enumerates every configuration of `B_{n+1}` with its chain weight
/// `marginal(σ₀) Π P(σ_parent, σ_child)`, collapses to the boundary sphere,
/// and evaluates the root predictor of each boundary by [`enumerate_gibbs`].
pub fn exact_boundary_stats(
    spec: &ModelSpec,
    kernel: &ChainKernel,
    n: u32,
) -> Result<ExactBoundaryStats> {
    exact_boundary_stats_with(spec, kernel, n, None)
}

pub fn exact_boundary_stats_with(
    spec: &ModelSpec,
    kernel: &ChainKernel,
    n: u32,
    fault: Option<Fault>,
) -> Result<ExactBoundaryStats> {
    let q = spec.q();
    let outer = BallGeometry::new(spec.d(), n + 1)?;
    let inner = BallGeometry::new(spec.d(), n)?;
    let all: Vec<Vertex> = outer.ball(n + 1).collect();
    let full_states = table_size(q, all.len() as u64);
    guard("broadcast configurations", full_states)?;
    let sphere_start = inner.ball_size(n) as usize;
    let sphere_states = table_size(q, (all.len() - sphere_start) as u64);
    guard(
        "boundary enumeration work",
        sphere_states.saturating_mul(table_size(q, sphere_start as u64)),
    )?;

    let parent_pos: Vec<Option<usize>> = all
        .iter()
        .map(|&v| outer.parent(v).map(|p| outer.address(p) as usize))
        .collect();
    // weights[boundary code][root spin]
    let mut weights: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut spins = vec![0; all.len()];
    for code in 0..full_states as usize {
        decode(code, q, &mut spins);
        let mut w = kernel.marginal[spins[0]];
        for (k, p) in parent_pos.iter().enumerate().skip(1) {
            w *= kernel.p[spins[p.unwrap()]][spins[k]];
        }
        let boundary_code = code / q.pow(sphere_start as u32);
        weights.entry(boundary_code).or_insert_with(|| vec![0.0; q])[spins[0]] += w;
    }

    let sphere: Vec<Vertex> = outer.sphere(n + 1).collect();
    let mut boundary_spins = vec![0; sphere.len()];
    let mut mean = vec![0.0; q];
    let mut second = vec![0.0; q];
    let mut recon = vec![0.0; q];
    for (&code, by_root) in &weights {
        decode(code, q, &mut boundary_spins);
        let window = ConfigWindow::from_pairs(
            Provenance::BoundarySphere,
            sphere.iter().copied().zip(boundary_spins.iter().copied()),
        )?;
        let pi = enumerate_gibbs_with(spec, &inner, &window, fault)?.marginal(Vertex::ROOT)?;
        let total: f64 = by_root.iter().sum();
        for a in 0..q {
            mean[a] += total * pi[a];
            second[a] += total * pi[a] * pi[a];
            recon[a] += by_root[a] * pi[a];
        }
    }
    let qea = (0..q).map(|a| second[a] - mean[a] * mean[a]).sum::<f64>() / q as f64;
    let reconstruction = (0..q).map(|a| recon[a] / kernel.marginal[a]).collect();
    Ok(ExactBoundaryStats {
        depth: n,
        qea,
        mean_root_marginal: mean,
        reconstruction,
        boundaries: weights.len(),
    })
}

/// Number of connected vertex sets of size exactly `size` containing the
/// root, by exhaustive enumeration. Fails if the count ever exceeds
/// `(d+1)^{2(ℓ−1)}`.
pub fn exact_connected_count(d: usize, size: usize) -> Result<u128> {
    if size == 0 || size > 8 {
        return Err(Error::InvalidArgument(format!(
            "connected-set size must lie in 1..=8, got {size}"
        )));
    }
    let geometry = BallGeometry::new(d, size as u32)?;
    let count = enumerate_connected(&geometry, Vertex::ROOT, size)?
        .filter(|set| set.len() == size)
        .count() as u128;
    let bound = ((d + 1) as u128).pow(2 * (size as u32 - 1));
    if count > bound {
        return Err(Error::InvalidArgument(format!(
            "entropy bound violated: {count} > {bound}"
        )));
    }
    Ok(count)
}
