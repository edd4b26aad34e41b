use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{BallGeometry, Vertex};
use crate::{Error, Result};

/// Gap rule `i ↦ r_i` (1-based) between successive sparse branch vertices.
///
/// Text forms: `geometric` or `geometric:B` (`r_i = 2^{⌈i/B⌉}`, default
/// `B = 4`), `constant:C`, `arithmetic:START,STEP`, `list:R1,R2,...`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Spacing {
    Geometric { block: u32 },
    Constant(u32),
    Arithmetic { start: u32, step: u32 },
    List(Vec<u32>),
}

impl Default for Spacing {
    fn default() -> Self {
        Spacing::Geometric { block: 4 }
    }
}

impl Spacing {
    /// `r_i` for `i ≥ 1`; `None` past the end of an explicit list or on
    /// overflow.
    pub fn gap(&self, i: usize) -> Option<u32> {
        debug_assert!(i >= 1);
        match self {
            Spacing::Geometric { block } => {
                let exp = (i as u64).div_ceil(*block as u64);
                u32::try_from(exp).ok().and_then(|e| 2u32.checked_pow(e))
            }
            Spacing::Constant(c) => Some(*c),
            Spacing::Arithmetic { start, step } => {
                let k = u32::try_from(i - 1).ok()?;
                start.checked_add(step.checked_mul(k)?)
            }
            Spacing::List(gaps) => gaps.get(i - 1).copied(),
        }
    }
}

impl FromStr for Spacing {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Config(format!("bad spacing {text:?}: {msg}"));
        let num = |s: &str| -> Result<u32> {
            match s.trim().parse::<u32>() {
                Ok(0) => Err(bad("gaps must be positive")),
                Ok(v) => Ok(v),
                Err(_) => Err(bad("expected a positive integer")),
            }
        };
        let (kind, args) = match text.trim().split_once(':') {
            Some((k, a)) => (k.trim(), Some(a)),
            None => (text.trim(), None),
        };
        match (kind, args) {
            ("geometric", None) => Ok(Spacing::default()),
            ("geometric", Some(a)) => Ok(Spacing::Geometric { block: num(a)? }),
            ("constant", Some(a)) => Ok(Spacing::Constant(num(a)?)),
            ("arithmetic", Some(a)) => {
                let (s, t) = a
                    .split_once(',')
                    .ok_or_else(|| bad("expected START,STEP"))?;
                let step = t
                    .trim()
                    .parse::<u32>()
                    .map_err(|_| bad("expected a non-negative step"))?;
                Ok(Spacing::Arithmetic {
                    start: num(s)?,
                    step,
                })
            }
            ("list", Some(a)) => {
                let gaps = a.split(',').map(num).collect::<Result<Vec<_>>>()?;
                Ok(Spacing::List(gaps))
            }
            _ => Err(bad("unknown rule")),
        }
    }
}

impl TryFrom<String> for Spacing {
    type Error = Error;

    fn try_from(text: String) -> Result<Self> {
        text.parse()
    }
}

impl From<Spacing> for String {
    fn from(s: Spacing) -> String {
        s.to_string()
    }
}

impl fmt::Display for Spacing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Spacing::Geometric { block } => write!(f, "geometric:{block}"),
            Spacing::Constant(c) => write!(f, "constant:{c}"),
            Spacing::Arithmetic { start, step } => write!(f, "arithmetic:{start},{step}"),
            Spacing::List(gaps) => {
                let parts: Vec<String> = gaps.iter().map(u32::to_string).collect();
                write!(f, "list:{}", parts.join(","))
            }
        }
    }
}

/// `n²` vertices on one ray, starting at the root, with prescribed gaps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchPlan {
    pub n: usize,
    pub vertices: Vec<Vertex>,
    pub depths: Vec<u32>,
    /// `Σ_{i<n²} r_i`, the depth of the last vertex.
    pub total_depth: u32,
}

impl BranchPlan {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// The first `m²` vertices, i.e. the plan for a smaller `m`.
    pub fn prefix(&self, m: usize) -> &[Vertex] {
        &self.vertices[..(m * m).min(self.vertices.len())]
    }
}

fn plan_depths(spacing: &Spacing, n: usize) -> Result<Vec<u32>> {
    let count = n
        .checked_mul(n)
        .ok_or_else(|| Error::InvalidArgument(format!("plan size n={n} overflows")))?;
    let mut depths = Vec::with_capacity(count);
    let mut depth = 0u32;
    for i in 0..count {
        if i > 0 {
            let gap = spacing.gap(i).ok_or_else(|| {
                Error::InvalidArgument(format!("spacing {spacing} has no gap r_{i}"))
            })?;
            depth = depth
                .checked_add(gap)
                .ok_or_else(|| Error::InvalidArgument("plan depth overflows".into()))?;
        }
        depths.push(depth);
    }
    Ok(depths)
}

/// Plan on the ray chosen by `direction_seed` (0 = leftmost) that must fit
/// inside the ball of `geometry`.
pub fn branch_plan(
    spacing: &Spacing,
    n: usize,
    geometry: &BallGeometry,
    direction_seed: u64,
) -> Result<BranchPlan> {
    let depths = plan_depths(spacing, n)?;
    let total_depth = depths.last().copied().unwrap_or(0);
    if total_depth > geometry.depth() {
        return Err(Error::OutsideVolume(format!(
            "branch plan needs depth {total_depth}, ball has depth {}",
            geometry.depth()
        )));
    }
    let vertices = depths
        .iter()
        .map(|&k| geometry.ray_vertex(k, direction_seed))
        .collect();
    Ok(BranchPlan {
        n,
        vertices,
        depths,
        total_depth,
    })
}

/// Largest `n` whose plan fits within `depth`.
pub fn largest_fitting_n(spacing: &Spacing, depth: u32) -> usize {
    let mut n = 0;
    while let Ok(depths) = plan_depths(spacing, n + 1) {
        if depths.last().copied().unwrap_or(0) > depth {
            break;
        }
        n += 1;
    }
    n
}
