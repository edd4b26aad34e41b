//! Exact finite-volume Gibbs computations on tree balls.
//!
//! The volume is the ball `B_n`; the boundary condition lives on the outer
//! sphere `S_{n+1}`. Upward messages are partial partition functions of
//! subtrees, normalised per vertex with the scale kept in log form.

mod energy;
mod peierls;

pub use energy::{excess_energy, field_energy, hamiltonian, pair_energy, ExcessEnergy};
pub use peierls::{peierls_check, ContourRecord, PeierlsLedger, PEIERLS_VOLUME_LIMIT};

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rayon::prelude::*;

use crate::geometry::{BallGeometry, ConfigWindow, Provenance, Vertex};
use crate::model::{build_transfer, ModelSpec};
use crate::{Error, Result, Spin};

/// Source of spins for a message pass.
///
/// Spins are produced while the pass walks down the tree, so a field may
/// generate them on the fly from the parent's state (a broadcast) or simply
/// look them up (a stored window).
pub trait SpinField: Sync {
    type State: Copy + Send + Sync;

    fn root_state(&self) -> Self::State;
    fn child_state(&self, parent: Self::State, child: Vertex) -> Self::State;
    /// Spin at `v`, if the field defines one there.
    fn spin(&self, state: Self::State, v: Vertex) -> Option<Spin>;
}

impl SpinField for ConfigWindow {
    type State = ();

    fn root_state(&self) {}

    fn child_state(&self, _parent: (), _child: Vertex) {}

    fn spin(&self, _state: (), v: Vertex) -> Option<Spin> {
        self.get(v)
    }
}

/// Row-major transfer matrix plus the model data a pass needs.
#[derive(Debug, Clone)]
pub struct Weights {
    q: usize,
    d: usize,
    beta: f64,
    q_matrix: Vec<f64>,
    field: Vec<f64>,
}

impl Weights {
    pub fn new(spec: &ModelSpec) -> Self {
        let t = build_transfer(spec);
        let q = spec.q();
        let q_matrix = (0..q)
            .flat_map(|i| (0..q).map(move |j| (i, j)))
            .map(|(i, j)| t.get(i, j))
            .collect();
        Weights {
            q,
            d: spec.d(),
            beta: spec.beta(),
            q_matrix,
            field: spec.field().to_vec(),
        }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    #[inline]
    fn get(&self, i: Spin, j: Spin) -> f64 {
        self.q_matrix[i * self.q + j]
    }

    /// `h(i) = Σ_j Q(i,j) m(j)`.
    fn apply(&self, m: &[f64], out: &mut [f64]) {
        for (i, slot) in out.iter_mut().enumerate() {
            let row = &self.q_matrix[i * self.q..(i + 1) * self.q];
            *slot = row.iter().zip(m).map(|(a, b)| a * b).sum();
        }
    }
}

/// Divide by the maximum entry and return its log.
fn renormalize(m: &mut [f64]) -> f64 {
    let top = m.iter().copied().fold(0.0, f64::max);
    for v in m.iter_mut() {
        *v /= top;
    }
    top.ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackedVertex {
    /// Upward message `m_v`, scaled to maximum 1.
    pub message: Vec<f64>,
    /// Spin the field assigns to `v`, if any.
    pub spin: Option<Spin>,
}

/// Result of a single subtree pass.
#[derive(Debug, Clone)]
struct Subtree {
    message: Vec<f64>,
    log_scale: f64,
    boundary_field: f64,
    tracked: Vec<(Vertex, TrackedVertex)>,
}

struct Frame<S> {
    v: Vertex,
    state: S,
    next: usize,
    log_scale: f64,
}

fn subtree_pass<F: SpinField>(
    weights: &Weights,
    geometry: &BallGeometry,
    field: &F,
    start: Vertex,
    start_state: F::State,
    tracked: &BTreeSet<Vertex>,
) -> Result<Subtree> {
    let q = weights.q;
    let n = geometry.depth();
    let levels = (n - start.depth + 1) as usize;
    let mut msgs = vec![1.0; levels * q];
    let mut h = vec![0.0; q];
    let mut frames: Vec<Frame<F::State>> = Vec::with_capacity(levels);
    frames.push(Frame {
        v: start,
        state: start_state,
        next: 0,
        log_scale: 0.0,
    });
    let mut boundary_field = 0.0;
    let mut records = Vec::new();

    loop {
        let top = frames.len() - 1;
        let frame = &mut frames[top];
        if frame.next < geometry.num_children(frame.v) {
            let c = geometry.child(frame.v, frame.next);
            frame.next += 1;
            let cs = field.child_state(frame.state, c);
            if c.depth > n {
                let s = field
                    .spin(cs, c)
                    .ok_or_else(|| Error::MissingSpin(geometry.path_string(c)))?;
                if s >= q {
                    return Err(Error::InvalidArgument(format!(
                        "boundary spin {s} at {} outside 0..{q}",
                        geometry.path_string(c)
                    )));
                }
                boundary_field += weights.field[s];
                let m = &mut msgs[top * q..(top + 1) * q];
                for (i, slot) in m.iter_mut().enumerate() {
                    *slot *= weights.get(i, s);
                }
                frame.log_scale += renormalize(m);
            } else {
                frames.push(Frame {
                    v: c,
                    state: cs,
                    next: 0,
                    log_scale: 0.0,
                });
                msgs[(top + 1) * q..(top + 2) * q].fill(1.0);
            }
            continue;
        }

        let done = frames.pop().expect("frame stack is non-empty");
        let m = &msgs[top * q..(top + 1) * q];
        if tracked.contains(&done.v) {
            records.push((
                done.v,
                TrackedVertex {
                    message: m.to_vec(),
                    spin: field.spin(done.state, done.v),
                },
            ));
        }
        if top == 0 {
            return Ok(Subtree {
                message: m.to_vec(),
                log_scale: done.log_scale,
                boundary_field,
                tracked: records,
            });
        }
        weights.apply(m, &mut h);
        let parent = &mut msgs[(top - 1) * q..top * q];
        for (p, x) in parent.iter_mut().zip(&h) {
            *p *= x;
        }
        let extra = renormalize(parent);
        let parent_frame = &mut frames[top - 1];
        parent_frame.log_scale += done.log_scale + extra;
    }
}

/// Upward messages of a full ball together with any tracked vertices.
#[derive(Debug, Clone)]
pub struct UpwardPass {
    weights: Weights,
    root_message: Vec<f64>,
    log_scale: f64,
    boundary_field: f64,
    tracked: BTreeMap<Vertex, TrackedVertex>,
}

/// Every vertex on the root paths of `targets`.
pub fn ancestry_closure(geometry: &BallGeometry, targets: &[Vertex]) -> BTreeSet<Vertex> {
    targets.iter().flat_map(|&t| geometry.ancestry(t)).collect()
}

/// Run the upward pass over `B_n` with boundary spins from `field` on
/// `S_{n+1}`, keeping the messages on the root paths of `track`.
///
/// The root's `d+1` subtrees are processed independently and merged in a
/// fixed order, so `parallel` never changes a single bit of the result.
pub fn upward<F: SpinField>(
    spec: &ModelSpec,
    geometry: &BallGeometry,
    field: &F,
    track: &[Vertex],
    parallel: bool,
) -> Result<UpwardPass> {
    if geometry.d() != spec.d() {
        return Err(Error::InvalidArgument(format!(
            "geometry has d = {}, model has d = {}",
            geometry.d(),
            spec.d()
        )));
    }
    if let Some(v) = track.iter().find(|v| !geometry.contains(**v)) {
        return Err(Error::OutsideVolume(v.to_string()));
    }
    let weights = Weights::new(spec);
    upward_with(
        &weights,
        geometry,
        field,
        &ancestry_closure(geometry, track),
        parallel,
    )
}

pub(crate) fn upward_with<F: SpinField>(
    weights: &Weights,
    geometry: &BallGeometry,
    field: &F,
    tracked: &BTreeSet<Vertex>,
    parallel: bool,
) -> Result<UpwardPass> {
    let q = weights.q;
    let root = Vertex::ROOT;
    let root_state = field.root_state();
    let children: Vec<Vertex> = geometry.children(root).collect();

    let child_result = |c: Vertex| -> Result<Subtree> {
        let cs = field.child_state(root_state, c);
        if geometry.depth() == 0 {
            let s = field
                .spin(cs, c)
                .ok_or_else(|| Error::MissingSpin(geometry.path_string(c)))?;
            if s >= q {
                return Err(Error::InvalidArgument(format!(
                    "boundary spin {s} outside 0..{q}"
                )));
            }
            // A boundary child acts like a subtree whose message is δ_s.
            let mut message = vec![0.0; q];
            message[s] = 1.0;
            Ok(Subtree {
                message,
                log_scale: 0.0,
                boundary_field: weights.field[s],
                tracked: Vec::new(),
            })
        } else {
            subtree_pass(weights, geometry, field, c, cs, tracked)
        }
    };
    let results: Vec<Subtree> = if parallel {
        children
            .par_iter()
            .map(|&c| child_result(c))
            .collect::<Result<_>>()?
    } else {
        children
            .iter()
            .map(|&c| child_result(c))
            .collect::<Result<_>>()?
    };

    let mut root_message = vec![1.0; q];
    let mut log_scale = 0.0;
    let mut boundary_field = 0.0;
    let mut h = vec![0.0; q];
    let mut tracked_map = BTreeMap::new();
    for sub in results {
        weights.apply(&sub.message, &mut h);
        for (r, x) in root_message.iter_mut().zip(&h) {
            *r *= x;
        }
        log_scale += sub.log_scale + renormalize(&mut root_message);
        boundary_field += sub.boundary_field;
        tracked_map.extend(sub.tracked);
    }
    if tracked.contains(&root) {
        tracked_map.insert(
            root,
            TrackedVertex {
                message: root_message.clone(),
                spin: field.spin(root_state, root),
            },
        );
    }
    Ok(UpwardPass {
        weights: weights.clone(),
        root_message,
        log_scale,
        boundary_field,
        tracked: tracked_map,
    })
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    v.iter().map(|x| x / total).collect()
}

/// Index `j` with `Σ_{k<j} w_k ≤ u·Σw < Σ_{k≤j} w_k`.
pub(crate) fn draw_index(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let mut target = u * total;
    for (j, &w) in weights.iter().enumerate() {
        if target < w {
            return j;
        }
        target -= w;
    }
    // Roundoff: fall back to the last positive weight.
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

impl UpwardPass {
    /// `γ_{B_n}(σ₀ = · | ω)`.
    pub fn root_marginal(&self) -> Vec<f64> {
        normalized(&self.root_message)
    }

    /// `log Z` for the Hamiltonian with edges touching `B_n` and the field on
    /// `B_n`; the boundary share of the split field is removed.
    pub fn log_partition(&self) -> f64 {
        let sum: f64 = self.root_message.iter().sum();
        self.log_scale
            + sum.ln()
            + self.weights.beta * self.boundary_field / (self.weights.d + 1) as f64
    }

    pub fn tracked(&self, v: Vertex) -> Option<&TrackedVertex> {
        self.tracked.get(&v)
    }

    /// Spin the field assigned to a tracked vertex.
    pub fn field_spin(&self, v: Vertex) -> Option<Spin> {
        self.tracked.get(&v).and_then(|t| t.spin)
    }

    fn message(&self, v: Vertex) -> Result<&[f64]> {
        self.tracked
            .get(&v)
            .map(|t| t.message.as_slice())
            .ok_or_else(|| Error::InvalidArgument(format!("vertex {v} was not tracked")))
    }

    /// `P(σ_w = · | σ_parent = i) ∝ Q(i, ·) m_w(·)`.
    fn transition_row(&self, i: Spin, m_w: &[f64], out: &mut [f64]) {
        for (j, slot) in out.iter_mut().enumerate() {
            *slot = self.weights.get(i, j) * m_w[j];
        }
    }

    /// Exact single-site marginals at `targets` by a downward pass along
    /// their root paths.
    pub fn marginals(&self, geometry: &BallGeometry, targets: &[Vertex]) -> Result<Vec<Vec<f64>>> {
        let q = self.weights.q;
        let mut cache: BTreeMap<Vertex, Vec<f64>> = BTreeMap::new();
        cache.insert(Vertex::ROOT, self.root_marginal());
        let mut row = vec![0.0; q];
        for v in ancestry_closure(geometry, targets) {
            if v.is_root() {
                continue;
            }
            let parent = geometry.parent(v).unwrap();
            let m_w = self.message(v)?;
            let parent_marginal = cache[&parent].clone();
            let mut out = vec![0.0; q];
            for (i, &pi) in parent_marginal.iter().enumerate() {
                self.transition_row(i, m_w, &mut row);
                let total: f64 = row.iter().sum();
                for (o, r) in out.iter_mut().zip(&row) {
                    *o += pi * r / total;
                }
            }
            cache.insert(v, out);
        }
        Ok(targets.iter().map(|t| cache[t].clone()).collect())
    }

    /// Exact joint draw of the spins on `targets` from `γ_{B_n}(· | ω)`:
    /// root from its marginal, then each vertex given its parent.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        geometry: &BallGeometry,
        targets: &[Vertex],
        rng: &mut R,
    ) -> Result<ConfigWindow> {
        let q = self.weights.q;
        let mut drawn: BTreeMap<Vertex, Spin> = BTreeMap::new();
        let mut row = vec![0.0; q];
        for v in ancestry_closure(geometry, targets) {
            let s = if v.is_root() {
                draw_index(&self.root_message, rng.random::<f64>())
            } else {
                let parent = geometry.parent(v).unwrap();
                self.transition_row(drawn[&parent], self.message(v)?, &mut row);
                draw_index(&row, rng.random::<f64>())
            };
            drawn.insert(v, s);
        }
        ConfigWindow::from_pairs(
            Provenance::BranchPath,
            targets.iter().map(|t| (*t, drawn[t])),
        )
    }
}

fn check_boundary(spec: &ModelSpec, boundary: &ConfigWindow) -> Result<()> {
    boundary.validate(spec.q())
}

/// `γ_{B_n}(σ₀ = · | ω)` for a boundary window covering `S_{n+1}`.
pub fn root_marginal(
    spec: &ModelSpec,
    geometry: &BallGeometry,
    boundary: &ConfigWindow,
) -> Result<Vec<f64>> {
    check_boundary(spec, boundary)?;
    Ok(upward(spec, geometry, boundary, &[], false)?.root_marginal())
}

/// `log Z_{B_n}^ω`.
pub fn log_partition(
    spec: &ModelSpec,
    geometry: &BallGeometry,
    boundary: &ConfigWindow,
) -> Result<f64> {
    check_boundary(spec, boundary)?;
    Ok(upward(spec, geometry, boundary, &[], false)?.log_partition())
}

/// Single-site conditional marginals at `targets`.
pub fn path_marginals(
    spec: &ModelSpec,
    geometry: &BallGeometry,
    boundary: &ConfigWindow,
    targets: &[Vertex],
) -> Result<Vec<Vec<f64>>> {
    check_boundary(spec, boundary)?;
    upward(spec, geometry, boundary, targets, false)?.marginals(geometry, targets)
}

/// One exact conditional draw of the spins at `targets`.
pub fn sample_interior<R: Rng + ?Sized>(
    spec: &ModelSpec,
    geometry: &BallGeometry,
    boundary: &ConfigWindow,
    targets: &[Vertex],
    rng: &mut R,
) -> Result<ConfigWindow> {
    check_boundary(spec, boundary)?;
    upward(spec, geometry, boundary, targets, false)?.sample(geometry, targets, rng)
}
