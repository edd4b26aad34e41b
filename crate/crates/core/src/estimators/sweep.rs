use serde::Serialize;

use super::{EstimatorReport, SeriesPoint};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepDelta {
    pub from: u32,
    pub to: u32,
    pub delta: f64,
    /// Combined standard error of the two estimates.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub reports: Vec<EstimatorReport>,
    pub series: Vec<SeriesPoint>,
    pub deltas: Vec<SweepDelta>,
    /// False when the last delta exceeds three standard errors.
    pub converged: bool,
}

/// Runs `estimate` at each depth of `depths` (strictly increasing) and
/// records successive differences. The caller reuses one seed for every
/// depth, so replica `r` sees the same broadcast at all depths.
pub fn depth_sweep<F>(depths: &[u32], mut estimate: F) -> Result<SweepReport>
where
    F: FnMut(u32) -> Result<EstimatorReport>,
{
    if depths.is_empty() {
        return Err(Error::InvalidArgument("empty depth list".into()));
    }
    if depths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "depths must be strictly increasing".into(),
        ));
    }
    let mut reports = depths
        .iter()
        .map(|&n| estimate(n))
        .collect::<Result<Vec<_>>>()?;
    let series: Vec<SeriesPoint> = reports
        .iter()
        .map(|r| SeriesPoint {
            depth: r.depth,
            estimate: r.estimate,
            stderr: r.stderr,
        })
        .collect();
    let deltas: Vec<SweepDelta> = series
        .windows(2)
        .map(|w| SweepDelta {
            from: w[0].depth,
            to: w[1].depth,
            delta: w[1].estimate - w[0].estimate,
            stderr: (w[0].stderr * w[0].stderr + w[1].stderr * w[1].stderr).sqrt(),
        })
        .collect();
    let converged = deltas
        .last()
        .is_none_or(|d| d.delta.abs() <= 3.0 * d.stderr || d.delta == 0.0);
    for r in &mut reports {
        r.series = series.clone();
        if !converged {
            r.notes
                .push("depth sweep not converged: last delta exceeds 3 sigma".into());
        }
    }
    Ok(SweepReport {
        reports,
        series,
        deltas,
        converged,
    })
}
