use std::collections::BTreeSet;

use super::{BallGeometry, Edge, Vertex};
use crate::{Error, Result};

/// Upper limit on the number of sets an enumeration may produce.
pub const ENUMERATION_GUARD: u128 = 10_000_000;

/// Number of connected vertex sets of size exactly `size` containing a fixed
/// vertex of the infinite tree, from the subtree generating function
/// `A = x(1+A)^d` (rooted at a non-root vertex) and `R = x(1+A)^{d+1}`.
pub fn connected_count_recursion(d: usize, size: usize) -> u128 {
    if size == 0 {
        return 0;
    }
    // Truncated power series with coefficient k of x^k.
    let mul = |a: &[u128], b: &[u128]| -> Vec<u128> {
        let mut out = vec![0u128; size + 1];
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate().take(size + 1 - i) {
                out[i + j] += x * y;
            }
        }
        out
    };
    let one_plus = |a: &[u128]| {
        let mut out = a.to_vec();
        out[0] += 1;
        out
    };
    let power = |base: &[u128], e: usize| {
        let mut acc = vec![0u128; size + 1];
        acc[0] = 1;
        for _ in 0..e {
            acc = mul(&acc, base);
        }
        acc
    };
    let shift = |a: &[u128]| {
        let mut out = vec![0u128; size + 1];
        out[1..].copy_from_slice(&a[..size]);
        out
    };
    // Fixed-point iteration fixes one more coefficient per pass.
    let mut a = vec![0u128; size + 1];
    for _ in 0..size {
        a = shift(&power(&one_plus(&a), d));
    }
    shift(&power(&one_plus(&a), d + 1))[size]
}

fn guard(d: usize, max_size: usize) -> Result<()> {
    let mut total: u128 = 0;
    for size in 1..=max_size {
        total = total.saturating_add(connected_count_recursion(d, size));
        if total > ENUMERATION_GUARD {
            return Err(Error::Guard {
                what: "connected-set enumeration",
                needed: total,
                limit: ENUMERATION_GUARD,
            });
        }
    }
    Ok(())
}

/// Streaming, duplicate-free enumeration of connected vertex sets of the
/// ball that contain a given vertex, up to a maximal size.
///
/// Each set is extended by one frontier vertex at a time; once a frontier
/// vertex has been tried it is never offered again on that branch, so each
/// set appears exactly once.
#[derive(Debug, Clone)]
pub struct ConnectedSets {
    geometry: BallGeometry,
    start: Vertex,
    max_size: usize,
    set: Vec<Vertex>,
    frontier: Vec<Vec<Vertex>>,
    started: bool,
}

impl ConnectedSets {
    fn extension(&self, w: Vertex) -> impl Iterator<Item = Vertex> + '_ {
        let members = &self.set;
        self.geometry
            .neighbors(w)
            .filter(move |x| self.geometry.contains(*x) && !members.contains(x))
    }
}

impl Iterator for ConnectedSets {
    type Item = Vec<Vertex>;

    fn next(&mut self) -> Option<Vec<Vertex>> {
        if !self.started {
            self.started = true;
            if self.max_size == 0 {
                return None;
            }
            self.set.push(self.start);
            if self.max_size > 1 {
                let ext: Vec<Vertex> = self.extension(self.start).collect();
                self.frontier.push(ext);
            }
            return Some(self.set.clone());
        }
        loop {
            let top = self.frontier.last_mut()?;
            match top.pop() {
                Some(w) => {
                    let mut ext = top.clone();
                    ext.extend(self.extension(w));
                    self.set.push(w);
                    let out = self.set.clone();
                    if self.set.len() < self.max_size {
                        self.frontier.push(ext);
                    } else {
                        self.set.pop();
                    }
                    return Some(out);
                }
                None => {
                    self.frontier.pop();
                    self.set.pop();
                }
            }
        }
    }
}

/// Connected subsets of the ball containing `v` with at most `max_size`
/// vertices.
pub fn enumerate_connected(
    geometry: &BallGeometry,
    v: Vertex,
    max_size: usize,
) -> Result<ConnectedSets> {
    if !geometry.contains(v) {
        return Err(Error::OutsideVolume(v.to_string()));
    }
    guard(geometry.d(), max_size)?;
    Ok(ConnectedSets {
        geometry: *geometry,
        start: v,
        max_size,
        set: Vec::with_capacity(max_size),
        frontier: Vec::with_capacity(max_size),
        started: false,
    })
}

/// `E(γ)`: edges of the infinite tree with at least one endpoint in `γ`.
pub fn attached_edges(geometry: &BallGeometry, gamma: &[Vertex]) -> Vec<Edge> {
    let edges: BTreeSet<Edge> = gamma
        .iter()
        .flat_map(|&v| {
            geometry
                .neighbors(v)
                .map(move |w| geometry.edge(v, w).expect("neighbours share an edge"))
        })
        .collect();
    edges.into_iter().collect()
}
