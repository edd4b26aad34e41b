use super::stats::mean_stderr;
use super::{run_replicas, EstimatorReport, RunOptions};
use crate::boundary_law::natural_kernel;
use crate::exact_gibbs::upward;
use crate::geometry::BallGeometry;
use crate::model::{epsilon1, ModelSpec};
use crate::sampler::{Broadcast, Domain, StreamKey};
use crate::{Error, Result, Spin};

/// Mean of `π_n(σ₀ = a | ω)` with `ω` broadcast on `S_{n+1}` from a root
/// fixed to `a`.
///
/// When `ε₁` is informative the report also carries the frequency of
/// `π_n ≤ 1 − ε₁` under `frequency_below_bound`.
pub fn estimate_reconstruction(
    spec: &ModelSpec,
    a: Spin,
    depth: u32,
    opts: &RunOptions,
) -> Result<EstimatorReport> {
    if a >= spec.q() {
        return Err(Error::InvalidArgument(format!(
            "spin {a} outside 0..{}",
            spec.q()
        )));
    }
    let kernel = natural_kernel(spec)?;
    let inner = BallGeometry::new(spec.d(), depth)?;
    let outer = BallGeometry::new(spec.d(), depth + 1)?;
    let values = run_replicas(opts, |r| {
        let key = StreamKey::new(opts.seed, r, Domain::Omega);
        let omega = Broadcast::new(&kernel, outer, key, Some(a))?;
        Ok(upward(spec, &inner, &omega, &[], false)?.root_marginal()[a])
    })?;

    let mut report = EstimatorReport::new("reconstruction", mean_stderr(&values), depth, opts);
    report.extra("spin", a as f64);
    report.extra("chance_level", kernel.marginal[a]);
    match epsilon1(spec).value() {
        Some(eps) => {
            let below: Vec<f64> = values
                .iter()
                .map(|&p| if p <= 1.0 - eps { 1.0 } else { 0.0 })
                .collect();
            let (freq, se) = mean_stderr(&below);
            report.extra("epsilon1", eps);
            report.extra("frequency_below_bound", freq);
            report.extra("frequency_below_bound_stderr", se);
        }
        None => report
            .notes
            .push("epsilon1 bound vacuous at these parameters".into()),
    }
    Ok(report)
}
