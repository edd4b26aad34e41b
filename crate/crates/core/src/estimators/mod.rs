//! Monte Carlo estimators at finite depth.
//!
//! Every estimator draws `N` independent replicas. Replica `r` takes all of
//! its randomness from stream keys derived from `(seed, r)`, replicas run on
//! a dedicated thread pool and results are reduced in replica order, so a
//! report depends only on its inputs and never on the worker count.

mod bad_rate;
mod output;
mod overlap;
mod qea;
mod reconstruction;
pub mod stats;
mod sweep;

pub use bad_rate::{
    assess_decay, estimate_bad_rate, estimate_cov_decay, BadRateReport, BranchAveragePoint,
    CovDecayReport, CovPoint, DecayAssessment, TruncationPoint,
};
pub use output::{cov_csv, overlap_csv, sweep_csv};
pub use overlap::{
    estimate_overlap, spacing_diagnostic, OverlapPoint, OverlapSeries, SpacingCheck,
};
pub use qea::estimate_qea;
pub use reconstruction::estimate_reconstruction;
pub use sweep::{depth_sweep, SweepDelta, SweepReport};

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::model::{constants, BoundsReport, ModelSpec};
use crate::{Error, Result};

/// Smallest sample count an estimator accepts.
pub const MIN_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RunOptions {
    pub samples: usize,
    pub seed: u64,
    pub workers: usize,
}

impl RunOptions {
    pub fn new(samples: usize, seed: u64, workers: usize) -> Result<Self> {
        if samples < MIN_SAMPLES {
            return Err(Error::InvalidArgument(format!(
                "need at least {MIN_SAMPLES} samples, got {samples}"
            )));
        }
        if workers == 0 {
            return Err(Error::InvalidArgument("need at least one worker".into()));
        }
        Ok(RunOptions {
            samples,
            seed,
            workers,
        })
    }
}

/// One depth of a convergence series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesPoint {
    pub depth: u32,
    pub estimate: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorReport {
    pub name: String,
    pub estimate: f64,
    /// Sample standard deviation over `√N` unless a note says otherwise.
    pub stderr: f64,
    pub samples: usize,
    pub depth: u32,
    pub truncation: Option<usize>,
    pub seed: u64,
    /// Estimates at increasing depths, filled by [`depth_sweep`].
    pub series: Vec<SeriesPoint>,
    pub extras: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl EstimatorReport {
    fn new(name: &str, (estimate, stderr): (f64, f64), depth: u32, opts: &RunOptions) -> Self {
        EstimatorReport {
            name: name.to_string(),
            estimate,
            stderr,
            samples: opts.samples,
            depth,
            truncation: None,
            seed: opts.seed,
            series: Vec::new(),
            extras: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    fn extra(&mut self, key: &str, value: f64) {
        self.extras.insert(key.to_string(), value);
    }

    /// Number of standard errors separating the estimate from `value`.
    pub fn sigmas_from(&self, value: f64) -> f64 {
        (self.estimate - value) / self.stderr
    }
}

/// Run `replica(r)` for `r = 0..N` on `workers` threads and return the
/// results in replica order.
pub(crate) fn run_replicas<T, F>(opts: &RunOptions, replica: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| {
        (0..opts.samples as u64)
            .into_par_iter()
            .map(&replica)
            .collect::<Result<Vec<T>>>()
    })
}

/// Bound constants with the `p₁`-dependent fields filled whenever `p₁`
/// lies strictly inside `(0, 1)`; a chain frozen to roundoff leaves them
/// empty.
pub(crate) fn chain_bounds(spec: &ModelSpec, p1: f64) -> Result<BoundsReport> {
    let base = constants(spec);
    if p1 > 0.0 && p1 < 1.0 {
        base.with_p1(spec, p1)
    } else {
        Ok(base)
    }
}
