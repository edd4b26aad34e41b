use serde::Serialize;

use super::{Broadcast, Domain, LazyConfig, StreamKey};
use crate::boundary_law::ChainKernel;
use crate::geometry::{attached_edges, enumerate_connected, BallGeometry, Vertex};
use crate::{Error, Result, Spin};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BadEventReport {
    pub vertex: Vertex,
    pub truncation: usize,
    pub found: bool,
    /// Support of the first contour found.
    pub witness: Option<Vec<Vertex>>,
    /// `|D(ω) ∩ E(γ)| / |γ|` for the witness.
    pub ratio: Option<f64>,
}

/// Truncated bad event at `v`: is there a connected `γ ∋ v` with
/// `|γ| ≤ L` and `|D(ω) ∩ E(γ)| ≥ δ₀|γ|`?
///
/// Every set of size `≤ L` is also searched at any larger truncation, so a
/// detection at `L` implies one at all `L′ > L`.
pub fn detect_bad(
    config: &mut LazyConfig<'_>,
    v: Vertex,
    truncation: usize,
    delta0: f64,
) -> Result<BadEventReport> {
    let d = config.geometry().d();
    // Deep enough that no contour through v reaches the edge of the ball.
    let geometry = BallGeometry::new(d, v.depth + truncation as u32)?;
    let mut report = BadEventReport {
        vertex: v,
        truncation,
        found: false,
        witness: None,
        ratio: None,
    };
    for gamma in enumerate_connected(&geometry, v, truncation)? {
        let broken = attached_edges(&geometry, &gamma)
            .iter()
            .filter(|e| config.spin(e.parent) != config.spin(e.child))
            .count();
        if broken as f64 >= delta0 * gamma.len() as f64 {
            report.found = true;
            report.ratio = Some(broken as f64 / gamma.len() as f64);
            report.witness = Some(gamma);
            break;
        }
    }
    Ok(report)
}

/// Size of the smallest connected `γ ∋ v` with `|γ| ≤ L` and
/// `|D(ω) ∩ E(γ)| ≥ δ₀|γ|`, if any. The bad event at truncation `L′ ≤ L`
/// occurred exactly when the result is at most `L′`.
pub fn smallest_bad_size(
    config: &mut LazyConfig<'_>,
    v: Vertex,
    truncation: usize,
    delta0: f64,
) -> Result<Option<usize>> {
    let d = config.geometry().d();
    let geometry = BallGeometry::new(d, v.depth + truncation as u32)?;
    let mut best: Option<usize> = None;
    for gamma in enumerate_connected(&geometry, v, truncation)? {
        if best.is_some_and(|b| gamma.len() >= b) {
            continue;
        }
        let broken = attached_edges(&geometry, &gamma)
            .iter()
            .filter(|e| config.spin(e.parent) != config.spin(e.child))
            .count();
        if broken as f64 >= delta0 * gamma.len() as f64 {
            best = Some(gamma.len());
            if gamma.len() == 1 {
                break;
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpMomentRow {
    pub root_spin: Spin,
    pub estimate: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpMomentReport {
    pub t: f64,
    pub samples: usize,
    /// `(p₁eᵗ + 1 − p₁)^{(d+1)|γ|}`.
    pub bound: f64,
    pub rows: Vec<ExpMomentRow>,
    pub holds: bool,
}

/// Monte Carlo check of `E[e^{t|D(ω) ∩ E(γ)|} | σ₀ = a] ≤ (p₁eᵗ + 1 − p₁)^{(d+1)|γ|}`
/// for a connected `γ` containing the root, for every `a`. A row passes when
/// its estimate is at most `bound · (1 + 5σ̂)` with `σ̂` the relative
/// standard error.
pub fn exp_moment_check(
    kernel: &ChainKernel,
    d: usize,
    gamma: &[Vertex],
    t: f64,
    samples: usize,
    seed: u64,
) -> Result<ExpMomentReport> {
    if !gamma.contains(&Vertex::ROOT) {
        return Err(Error::InvalidArgument("γ must contain the root".into()));
    }
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let depth = gamma.iter().map(|v| v.depth).max().unwrap_or(0);
    let geometry = BallGeometry::new(d, depth + 1)?;
    let edges = attached_edges(&geometry, gamma);
    let bound = (kernel.p1 * t.exp() + 1.0 - kernel.p1).powi(((d + 1) * gamma.len()) as i32);
    let mut rows = Vec::new();
    let mut holds = true;
    for a in 0..kernel.q() {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for i in 0..samples {
            let key = StreamKey::new(seed, (a * samples + i) as u64, Domain::Omega);
            let mut config = LazyConfig::new(Broadcast::new(kernel, geometry, key, Some(a))?);
            let broken = edges
                .iter()
                .filter(|e| config.spin(e.parent) != config.spin(e.child))
                .count();
            let x = (t * broken as f64).exp();
            sum += x;
            sum_sq += x * x;
        }
        let n = samples as f64;
        let mean = sum / n;
        let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        let stderr = (var / n).sqrt();
        holds &= mean <= bound * (1.0 + 5.0 * stderr / mean);
        rows.push(ExpMomentRow {
            root_spin: a,
            estimate: mean,
            stderr,
        });
    }
    Ok(ExpMomentReport {
        t,
        samples,
        bound,
        rows,
        holds,
    })
}
