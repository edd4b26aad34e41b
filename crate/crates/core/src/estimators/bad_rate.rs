use serde::Serialize;

use super::stats::{linear_fit, mean_stderr, sample_variance};
use super::{chain_bounds, run_replicas, EstimatorReport, RunOptions};
use crate::boundary_law::natural_kernel;
use crate::geometry::{branch_plan, largest_fitting_n, BallGeometry, Spacing};
use crate::model::{delta0, ModelSpec};
use crate::sampler::{smallest_bad_size, Broadcast, Domain, LazyConfig, StreamKey};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationPoint {
    pub truncation: usize,
    pub rate: f64,
    pub stderr: f64,
}

/// Per-sample branch averages `|Λ_m|⁻¹ Σ_{v∈Λ_m} 1_{B_v}` over replicas.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchAveragePoint {
    pub m: usize,
    pub plan_size: usize,
    pub mean: f64,
    pub variance: f64,
    /// `|Λ_m| · variance`; flat when the indicators decorrelate.
    pub scaled_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BadRateReport {
    pub report: EstimatorReport,
    /// `m̂_{L′}` for `L′ = 1..=L`, all from the same configurations.
    pub by_truncation: Vec<TruncationPoint>,
    pub branch: Vec<BranchAveragePoint>,
}

/// Frequency of the truncated bad event at the depth-`depth` vertex of the
/// leftmost ray, plus branch averages along the plan of `spacing` inside
/// depth `depth`.
pub fn estimate_bad_rate(
    spec: &ModelSpec,
    truncation: usize,
    depth: u32,
    spacing: &Spacing,
    opts: &RunOptions,
) -> Result<BadRateReport> {
    if truncation == 0 {
        return Err(Error::InvalidArgument(
            "truncation must be at least 1".into(),
        ));
    }
    let kernel = natural_kernel(spec)?;
    let geometry = BallGeometry::new(spec.d(), depth + truncation as u32)?;
    let inner = BallGeometry::new(spec.d(), depth)?;
    let n = largest_fitting_n(spacing, depth);
    let plan = branch_plan(spacing, n, &inner, 0)?;
    let v = geometry.ray_vertex(depth, 0);
    let d0 = delta0(spec);

    // Per replica: smallest bad size at v, and bad flags along the plan.
    let rows = run_replicas(opts, |r| {
        let key = StreamKey::new(opts.seed, r, Domain::Omega);
        let mut config = LazyConfig::new(Broadcast::new(&kernel, geometry, key, None)?);
        let at_v = smallest_bad_size(&mut config, v, truncation, d0)?;
        let flags = plan
            .vertices
            .iter()
            .map(|&w| Ok(smallest_bad_size(&mut config, w, truncation, d0)?.is_some()))
            .collect::<Result<Vec<bool>>>()?;
        Ok((at_v, flags))
    })?;

    let by_truncation: Vec<TruncationPoint> = (1..=truncation)
        .map(|l| {
            let hits: Vec<f64> = rows
                .iter()
                .map(|(s, _)| if s.is_some_and(|s| s <= l) { 1.0 } else { 0.0 })
                .collect();
            let (rate, stderr) = mean_stderr(&hits);
            TruncationPoint {
                truncation: l,
                rate,
                stderr,
            }
        })
        .collect();
    let branch = (1..=n)
        .map(|m| {
            let size = m * m;
            let averages: Vec<f64> = rows
                .iter()
                .map(|(_, f)| f[..size].iter().filter(|&&b| b).count() as f64 / size as f64)
                .collect();
            let variance = sample_variance(&averages);
            BranchAveragePoint {
                m,
                plan_size: size,
                mean: mean_stderr(&averages).0,
                variance,
                scaled_variance: variance * size as f64,
            }
        })
        .collect();

    let last = by_truncation.last().expect("truncation ≥ 1");
    let mut report = EstimatorReport::new("bad-rate", (last.rate, last.stderr), depth, opts);
    report.truncation = Some(truncation);
    report.extra("delta0", d0);
    report.extra("p1", kernel.p1);
    match chain_bounds(spec, kernel.p1)?
        .epsilon2
        .and_then(|b| b.value())
    {
        Some(eps2) => {
            report.extra("epsilon2", eps2);
            if last.rate > eps2 + 5.0 * last.stderr {
                report
                    .notes
                    .push("estimate exceeds epsilon2 by more than 5 sigma".into());
            }
        }
        None => report
            .notes
            .push("epsilon2 bound vacuous at these parameters".into()),
    }
    Ok(BadRateReport {
        report,
        by_truncation,
        branch,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovPoint {
    pub distance: u32,
    /// Number of vertex pairs per replica averaged along the ray.
    pub pairs: usize,
    pub cov: f64,
    /// Delta-method standard error from per-replica influence values.
    pub stderr: f64,
}

/// Statistical reading of "decreasing in distance".
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayAssessment {
    /// No later distance exceeds an earlier one by more than three combined
    /// standard errors.
    pub no_significant_increase: bool,
    /// The first value exceeds the last by more than three combined
    /// standard errors.
    pub first_exceeds_last: bool,
    /// The largest-distance value is within three standard errors of zero.
    pub last_within_noise: bool,
    pub decreasing: bool,
}

pub fn assess_decay(points: &[CovPoint]) -> DecayAssessment {
    let apart =
        |a: &CovPoint, b: &CovPoint| 3.0 * (a.stderr * a.stderr + b.stderr * b.stderr).sqrt();
    let mut no_significant_increase = true;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            no_significant_increase &= b.cov - a.cov <= apart(a, b);
        }
    }
    let (first_exceeds_last, last_within_noise) = match (points.first(), points.last()) {
        (Some(f), Some(l)) if points.len() >= 2 => {
            (f.cov - l.cov > apart(f, l), l.cov.abs() <= 3.0 * l.stderr)
        }
        _ => (false, false),
    };
    DecayAssessment {
        no_significant_increase,
        first_exceeds_last,
        last_within_noise,
        decreasing: no_significant_increase && first_exceeds_last && last_within_noise,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovDecayReport {
    pub report: EstimatorReport,
    pub points: Vec<CovPoint>,
    pub assessment: DecayAssessment,
    /// `−slope` of `log Cov` against distance over the points significantly
    /// above zero, when there are at least two.
    pub fitted_rate: Option<f64>,
    pub lambda_p1: f64,
    /// `−log |λ₂(P)|`.
    pub spectral_rate: f64,
}

/// `Cov(1_{B_u}, 1_{B_v})` for `u, v` on the leftmost ray at each distance.
///
/// Each replica evaluates the bad indicators at depths `0..=depth` of one
/// ray and averages `1_{B_u}1_{B_v}` over all pairs at the given distance;
/// `m̂` is the average indicator over the ray. Homogeneity of the tree and
/// stationarity of the chain make every pair at a fixed distance
/// equivalent in law.
pub fn estimate_cov_decay(
    spec: &ModelSpec,
    distances: &[u32],
    truncation: usize,
    depth: u32,
    opts: &RunOptions,
) -> Result<CovDecayReport> {
    if truncation == 0 {
        return Err(Error::InvalidArgument(
            "truncation must be at least 1".into(),
        ));
    }
    if distances.is_empty() {
        return Err(Error::InvalidArgument("no distances given".into()));
    }
    if let Some(r) = distances.iter().find(|&&r| r > depth) {
        return Err(Error::OutsideVolume(format!(
            "distance {r} exceeds ray depth {depth}"
        )));
    }
    let kernel = natural_kernel(spec)?;
    let geometry = BallGeometry::new(spec.d(), depth + truncation as u32)?;
    let d0 = delta0(spec);
    let ray: Vec<_> = (0..=depth).map(|k| geometry.ray_vertex(k, 0)).collect();

    let flags = run_replicas(opts, |r| {
        let key = StreamKey::new(opts.seed, r, Domain::Omega);
        let mut config = LazyConfig::new(Broadcast::new(&kernel, geometry, key, None)?);
        ray.iter()
            .map(|&v| Ok(smallest_bad_size(&mut config, v, truncation, d0)?.is_some()))
            .collect::<Result<Vec<bool>>>()
    })?;

    let len = ray.len() as f64;
    let means: Vec<f64> = flags
        .iter()
        .map(|f| f.iter().filter(|&&b| b).count() as f64 / len)
        .collect();
    let (m_hat, m_se) = mean_stderr(&means);
    let points: Vec<CovPoint> = distances
        .iter()
        .map(|&r| {
            let r = r as usize;
            let pairs = ray.len() - r;
            // Influence of each replica on E[A_r] − E[Y]².
            let influence: Vec<f64> = flags
                .iter()
                .zip(&means)
                .map(|(f, &y)| {
                    let joint =
                        (0..pairs).filter(|&k| f[k] && f[k + r]).count() as f64 / pairs as f64;
                    joint - 2.0 * m_hat * y
                })
                .collect();
            let (mean_influence, stderr) = mean_stderr(&influence);
            CovPoint {
                distance: r as u32,
                pairs,
                // E[A_r] − m̂² = mean(A_r − 2m̂Y) + m̂².
                cov: mean_influence + m_hat * m_hat,
                stderr,
            }
        })
        .collect();

    let significant: Vec<&CovPoint> = points.iter().filter(|p| p.cov > 3.0 * p.stderr).collect();
    let fitted_rate = if significant.len() >= 2 {
        let x: Vec<f64> = significant.iter().map(|p| p.distance as f64).collect();
        let y: Vec<f64> = significant.iter().map(|p| p.cov.ln()).collect();
        linear_fit(&x, &y).map(|(slope, _)| -slope)
    } else {
        None
    };
    let bounds = chain_bounds(spec, kernel.p1)?;
    let lambda_p1 = bounds.lambda_p1.unwrap_or(0.0);
    let spectral_rate = -kernel.lambda2.abs().ln();
    let assessment = assess_decay(&points);

    let mut report = EstimatorReport::new("cov-decay", (m_hat, m_se), depth, opts);
    report.truncation = Some(truncation);
    report.extra("lambda_p1", lambda_p1);
    report.extra("spectral_rate", spectral_rate);
    report.extra("decreasing", if assessment.decreasing { 1.0 } else { 0.0 });
    if let Some(rate) = fitted_rate {
        report.extra("fitted_rate", rate);
    } else {
        report
            .notes
            .push("fewer than two distances with covariance above 3 sigma; no rate fitted".into());
    }
    report
        .notes
        .push("estimate is the mean bad indicator along the ray".into());
    Ok(CovDecayReport {
        report,
        points,
        assessment,
        fitted_rate,
        lambda_p1,
        spectral_rate,
    })
}
