use std::collections::BTreeMap;

use serde::Serialize;

use super::{Edge, Vertex};
use crate::{Error, Result, Spin};

/// Where a window's vertex set came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    BoundarySphere,
    BranchPath,
    Neighborhood,
    Volume,
}

/// Spins on an explicit vertex subset of an otherwise implicit tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfigWindow {
    provenance: Provenance,
    spins: BTreeMap<Vertex, Spin>,
}

impl ConfigWindow {
    pub fn new(provenance: Provenance) -> Self {
        ConfigWindow {
            provenance,
            spins: BTreeMap::new(),
        }
    }

    /// Fails on duplicate vertices.
    pub fn from_pairs(
        provenance: Provenance,
        pairs: impl IntoIterator<Item = (Vertex, Spin)>,
    ) -> Result<Self> {
        let mut window = ConfigWindow::new(provenance);
        for (v, s) in pairs {
            window.insert(v, s)?;
        }
        Ok(window)
    }

    pub fn constant(
        provenance: Provenance,
        vertices: impl IntoIterator<Item = Vertex>,
        spin: Spin,
    ) -> Result<Self> {
        Self::from_pairs(provenance, vertices.into_iter().map(|v| (v, spin)))
    }

    pub fn insert(&mut self, v: Vertex, spin: Spin) -> Result<()> {
        if self.spins.insert(v, spin).is_some() {
            return Err(Error::InvalidArgument(format!(
                "duplicate vertex {v} in window"
            )));
        }
        Ok(())
    }

    /// Insert or overwrite.
    pub fn set(&mut self, v: Vertex, spin: Spin) {
        self.spins.insert(v, spin);
    }

    pub fn get(&self, v: Vertex) -> Option<Spin> {
        self.spins.get(&v).copied()
    }

    pub fn spin(&self, v: Vertex) -> Result<Spin> {
        self.get(v)
            .ok_or_else(|| Error::MissingSpin(format!("no spin stored at {v}")))
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.spins.contains_key(&v)
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn iter(&self) -> impl Iterator<Item = (Vertex, Spin)> + '_ {
        self.spins.iter().map(|(&v, &s)| (v, s))
    }

    /// Every spin must lie in `0..q`.
    pub fn validate(&self, q: usize) -> Result<()> {
        match self.spins.iter().find(|(_, &s)| s >= q) {
            Some((v, s)) => Err(Error::InvalidArgument(format!(
                "spin {s} at {v} outside 0..{q}"
            ))),
            None => Ok(()),
        }
    }

    /// `self` with every spin of `other` laid on top.
    pub fn overlay(&self, other: &ConfigWindow) -> ConfigWindow {
        let mut out = self.clone();
        for (v, s) in other.iter() {
            out.set(v, s);
        }
        out
    }
}

/// `|{(v, w) ∈ edges : ω_v ≠ ω_w}|`.
pub fn broken_bonds(window: &ConfigWindow, edges: &[Edge]) -> Result<usize> {
    let mut count = 0;
    for e in edges {
        if window.spin(e.parent)? != window.spin(e.child)? {
            count += 1;
        }
    }
    Ok(count)
}
