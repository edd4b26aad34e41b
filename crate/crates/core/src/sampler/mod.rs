//! Broadcast sampling of the chain over the implicit tree.
//!
//! Every vertex owns a ChaCha8 stream selected by its level-order address
//! under a key derived from `(master_seed, replica, domain)`. A spin depends
//! only on the parent's spin and the vertex's own stream, so any vertex can
//! be regenerated on demand without storing the configuration.

mod bad;

pub use bad::{
    detect_bad, exp_moment_check, smallest_bad_size, BadEventReport, ExpMomentReport, ExpMomentRow,
};

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::boundary_law::ChainKernel;
use crate::exact_gibbs::{draw_index, SpinField};
use crate::geometry::{BallGeometry, ConfigWindow, Provenance, Vertex};
use crate::{Error, Result, Spin};

/// Independent randomness domains within one replica.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// The boundary configuration `ω`.
    Omega,
    /// An independent boundary `ω′`.
    OmegaPrime,
    /// Conditional interior draws `σ`.
    Sigma,
}

impl Domain {
    fn tag(self) -> u64 {
        match self {
            Domain::Omega => 0x6f6d_6567_6100_0001,
            Domain::OmegaPrime => 0x6f6d_6567_6100_0002,
            Domain::Sigma => 0x7369_676d_6100_0003,
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// ChaCha key for one `(master_seed, replica, domain)` triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey([u8; 32]);

impl StreamKey {
    pub fn new(master_seed: u64, replica: u64, domain: Domain) -> Self {
        let mut key = [0u8; 32];
        let mut state = splitmix(master_seed ^ 0x243f_6a88_85a3_08d3);
        state = splitmix(state ^ replica);
        state = splitmix(state ^ domain.tag());
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        StreamKey(key)
    }

    /// Generator positioned at the start of stream `stream`.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.0);
        rng.set_stream(stream);
        rng
    }

    /// First uniform of stream `stream`, in `[0, 1)`.
    pub fn uniform(&self, stream: u64) -> f64 {
        self.rng(stream).random::<f64>()
    }
}

/// The chain broadcast from the root: root from the marginal (or fixed),
/// every child from `P(parent, ·)`.
#[derive(Debug, Clone)]
pub struct Broadcast<'a> {
    kernel: &'a ChainKernel,
    geometry: BallGeometry,
    key: StreamKey,
    root_condition: Option<Spin>,
}

impl<'a> Broadcast<'a> {
    pub fn new(
        kernel: &'a ChainKernel,
        geometry: BallGeometry,
        key: StreamKey,
        root_condition: Option<Spin>,
    ) -> Result<Self> {
        if let Some(a) = root_condition {
            if a >= kernel.q() {
                return Err(Error::InvalidArgument(format!(
                    "root condition {a} outside 0..{}",
                    kernel.q()
                )));
            }
        }
        Ok(Broadcast {
            kernel,
            geometry,
            key,
            root_condition,
        })
    }

    pub fn geometry(&self) -> &BallGeometry {
        &self.geometry
    }

    /// Root spin before any conditioning.
    pub fn free_root(&self) -> Spin {
        draw_index(&self.kernel.marginal, self.key.uniform(0))
    }

    pub fn root(&self) -> Spin {
        self.root_condition.unwrap_or_else(|| self.free_root())
    }

    pub fn child(&self, parent_spin: Spin, child: Vertex) -> Spin {
        let u = self.key.uniform(self.geometry.address(child));
        draw_index(&self.kernel.p[parent_spin], u)
    }
}

impl SpinField for Broadcast<'_> {
    type State = Spin;

    fn root_state(&self) -> Spin {
        self.root()
    }

    fn child_state(&self, parent: Spin, child: Vertex) -> Spin {
        self.child(parent, child)
    }

    fn spin(&self, state: Spin, _v: Vertex) -> Option<Spin> {
        Some(state)
    }
}

/// Memoised random access to a broadcast configuration.
#[derive(Debug, Clone)]
pub struct LazyConfig<'a> {
    broadcast: Broadcast<'a>,
    cache: HashMap<Vertex, Spin>,
}

impl<'a> LazyConfig<'a> {
    pub fn new(broadcast: Broadcast<'a>) -> Self {
        let mut cache = HashMap::new();
        cache.insert(Vertex::ROOT, broadcast.root());
        LazyConfig { broadcast, cache }
    }

    pub fn geometry(&self) -> &BallGeometry {
        self.broadcast.geometry()
    }

    pub fn spin(&mut self, v: Vertex) -> Spin {
        if let Some(&s) = self.cache.get(&v) {
            return s;
        }
        let g = *self.broadcast.geometry();
        let mut pending = vec![v];
        let mut cur = v;
        let mut s = loop {
            cur = g.parent(cur).expect("root is always cached");
            match self.cache.get(&cur) {
                Some(&s) => break s,
                None => pending.push(cur),
            }
        };
        while let Some(w) = pending.pop() {
            s = self.broadcast.child(s, w);
            self.cache.insert(w, s);
        }
        s
    }

    pub fn cached(&self) -> usize {
        self.cache.len()
    }
}

/// Spins of the broadcast on `region`, every vertex inside the ball.
pub fn broadcast(
    b: &Broadcast<'_>,
    region: &[Vertex],
    provenance: Provenance,
) -> Result<ConfigWindow> {
    if let Some(v) = region.iter().find(|v| !b.geometry().contains(**v)) {
        return Err(Error::OutsideVolume(v.to_string()));
    }
    let mut lazy = LazyConfig::new(b.clone());
    ConfigWindow::from_pairs(provenance, region.iter().map(|&v| (v, lazy.spin(v))))
}
