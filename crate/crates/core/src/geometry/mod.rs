//! Implicit Cayley-tree geometry.
//!
//! Vertices are addressed arithmetically: the root is `(0, 0)`, the `k`-th
//! sphere holds indices `0..(d+1)d^{k−1}`, and the children of `(k, i)` are
//! `(k+1, i·d + c)` for `c < d` (the root's `d+1` children are `(1, c)`).
//! Nothing is materialised.

mod connected;
mod plan;
mod window;

pub use connected::{
    attached_edges, connected_count_recursion, enumerate_connected, ConnectedSets,
    ENUMERATION_GUARD,
};
pub use plan::{branch_plan, largest_fitting_n, BranchPlan, Spacing};
pub use window::{broken_bonds, ConfigWindow, Provenance};

use std::fmt;

use serde::Serialize;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Vertex {
    pub depth: u32,
    pub index: u64,
}

impl Vertex {
    pub const ROOT: Vertex = Vertex { depth: 0, index: 0 };

    pub fn new(depth: u32, index: u64) -> Self {
        Vertex { depth, index }
    }

    pub fn is_root(&self) -> bool {
        self.depth == 0
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.depth, self.index)
    }
}

/// An undirected tree edge stored as `(parent, child)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Edge {
    pub parent: Vertex,
    pub child: Vertex,
}

/// The ball `B_n` of radius `depth` around the root of the Cayley tree of
/// order `d` (every vertex has `d+1` neighbours).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BallGeometry {
    d: usize,
    depth: u32,
}

impl BallGeometry {
    /// Addresses of the sphere one step outside the ball must fit in `u64`.
    pub fn new(d: usize, depth: u32) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidArgument(format!(
                "branching number must be at least 2, got {d}"
            )));
        }
        let geometry = BallGeometry { d, depth };
        if geometry
            .checked_ball_size(depth.saturating_add(1))
            .is_none()
        {
            return Err(Error::Guard {
                what: "vertex addresses",
                needed: depth as u128 + 1,
                limit: u64::MAX as u128,
            });
        }
        Ok(geometry)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn root(&self) -> Vertex {
        Vertex::ROOT
    }

    fn checked_sphere_size(&self, k: u32) -> Option<u64> {
        if k == 0 {
            return Some(1);
        }
        (self.d as u64)
            .checked_pow(k - 1)?
            .checked_mul(self.d as u64 + 1)
    }

    fn checked_ball_size(&self, n: u32) -> Option<u64> {
        (0..=n).try_fold(0u64, |acc, k| acc.checked_add(self.checked_sphere_size(k)?))
    }

    /// `|S_k| = (d+1)d^{k−1}` for `k ≥ 1`.
    pub fn sphere_size(&self, k: u32) -> u64 {
        self.checked_sphere_size(k)
            .expect("sphere size overflows u64")
    }

    /// `|B_n| = 1 + (d+1)(dⁿ − 1)/(d − 1)`.
    pub fn ball_size(&self, n: u32) -> u64 {
        self.checked_ball_size(n).expect("ball size overflows u64")
    }

    pub fn contains(&self, v: Vertex) -> bool {
        v.depth <= self.depth && self.is_valid(v)
    }

    /// Whether `v` is a well-formed vertex of the infinite tree.
    pub fn is_valid(&self, v: Vertex) -> bool {
        self.checked_sphere_size(v.depth)
            .is_some_and(|size| v.index < size)
    }

    pub fn num_children(&self, v: Vertex) -> usize {
        if v.is_root() {
            self.d + 1
        } else {
            self.d
        }
    }

    pub fn child(&self, v: Vertex, c: usize) -> Vertex {
        debug_assert!(c < self.num_children(v));
        if v.is_root() {
            Vertex::new(1, c as u64)
        } else {
            Vertex::new(v.depth + 1, v.index * self.d as u64 + c as u64)
        }
    }

    pub fn children(&self, v: Vertex) -> impl Iterator<Item = Vertex> + '_ {
        (0..self.num_children(v)).map(move |c| self.child(v, c))
    }

    pub fn parent(&self, v: Vertex) -> Option<Vertex> {
        match v.depth {
            0 => None,
            1 => Some(Vertex::ROOT),
            k => Some(Vertex::new(k - 1, v.index / self.d as u64)),
        }
    }

    /// Position of `v` among its parent's children.
    pub fn child_index(&self, v: Vertex) -> Option<usize> {
        match v.depth {
            0 => None,
            1 => Some(v.index as usize),
            _ => Some((v.index % self.d as u64) as usize),
        }
    }

    /// All `d+1` neighbours in the infinite tree.
    pub fn neighbors(&self, v: Vertex) -> impl Iterator<Item = Vertex> + '_ {
        self.parent(v).into_iter().chain(self.children(v))
    }

    pub fn edge(&self, a: Vertex, b: Vertex) -> Option<Edge> {
        if self.parent(b) == Some(a) {
            Some(Edge {
                parent: a,
                child: b,
            })
        } else if self.parent(a) == Some(b) {
            Some(Edge {
                parent: b,
                child: a,
            })
        } else {
            None
        }
    }

    /// Level-order address: root 0, then sphere by sphere.
    pub fn address(&self, v: Vertex) -> u64 {
        match v.depth {
            0 => 0,
            k => self.ball_size(k - 1) + v.index,
        }
    }

    pub fn vertex_at(&self, address: u64) -> Vertex {
        let mut k = 0;
        let mut offset = 0u64;
        loop {
            let size = self.sphere_size(k);
            if address < offset + size {
                return Vertex::new(k, address - offset);
            }
            offset += size;
            k += 1;
        }
    }

    /// Vertices from the root down to `v`, inclusive.
    pub fn ancestry(&self, v: Vertex) -> Vec<Vertex> {
        let mut path = Vec::with_capacity(v.depth as usize + 1);
        let mut cur = Some(v);
        while let Some(x) = cur {
            path.push(x);
            cur = self.parent(x);
        }
        path.reverse();
        path
    }

    pub fn is_ancestor(&self, ancestor: Vertex, v: Vertex) -> bool {
        if ancestor.depth > v.depth {
            return false;
        }
        let mut cur = v;
        while cur.depth > ancestor.depth {
            cur = self.parent(cur).expect("non-root vertex has a parent");
        }
        cur == ancestor
    }

    /// Graph distance in the tree.
    pub fn distance(&self, a: Vertex, b: Vertex) -> u32 {
        let (mut x, mut y) = (a, b);
        let mut steps = 0;
        while x.depth > y.depth {
            x = self.parent(x).unwrap();
            steps += 1;
        }
        while y.depth > x.depth {
            y = self.parent(y).unwrap();
            steps += 1;
        }
        while x != y {
            x = self.parent(x).unwrap();
            y = self.parent(y).unwrap();
            steps += 2;
        }
        steps
    }

    /// Vertex at depth `k` on the ray selected by `direction_seed`; seed 0
    /// is the leftmost ray `(k, 0)`.
    pub fn ray_vertex(&self, k: u32, direction_seed: u64) -> Vertex {
        let mut v = Vertex::ROOT;
        for level in 0..k {
            let c = if direction_seed == 0 {
                0
            } else {
                (splitmix(direction_seed ^ (level as u64).wrapping_mul(0x9e37_79b9))
                    % self.num_children(v) as u64) as usize
            };
            v = self.child(v, c);
        }
        v
    }

    /// Root-to-vertex child indices, e.g. `"0.2.1.1"`; the root prints as `"0"`.
    pub fn path_string(&self, v: Vertex) -> String {
        let mut out = String::from("0");
        for x in self.ancestry(v).into_iter().skip(1) {
            out.push('.');
            out.push_str(&self.child_index(x).unwrap().to_string());
        }
        out
    }

    pub fn parse_path(&self, text: &str) -> Result<Vertex> {
        let bad = |msg: String| Error::InvalidArgument(format!("bad vertex path {text:?}: {msg}"));
        let mut parts = text.trim().split('.');
        if parts.next() != Some("0") {
            return Err(bad("must start with the root label 0".into()));
        }
        let mut v = Vertex::ROOT;
        for part in parts {
            let c: usize = part
                .parse()
                .map_err(|_| bad(format!("{part:?} is not a child index")))?;
            if c >= self.num_children(v) {
                return Err(bad(format!("child index {c} out of range")));
            }
            if self.checked_sphere_size(v.depth + 1).is_none() {
                return Err(bad("path too deep".into()));
            }
            v = self.child(v, c);
        }
        Ok(v)
    }

    /// Every vertex of the sphere `S_k`, in index order.
    pub fn sphere(&self, k: u32) -> impl Iterator<Item = Vertex> {
        (0..self.sphere_size(k)).map(move |i| Vertex::new(k, i))
    }

    /// Every vertex of the ball `B_n`, level by level.
    pub fn ball(&self, n: u32) -> impl Iterator<Item = Vertex> + '_ {
        (0..=n).flat_map(move |k| self.sphere(k))
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
