use serde::Serialize;

use super::stats::mean_stderr;
use super::{chain_bounds, run_replicas, EstimatorReport, RunOptions};
use crate::boundary_law::natural_kernel;
use crate::exact_gibbs::upward;
use crate::geometry::{branch_plan, largest_fitting_n, BallGeometry, BranchPlan, Spacing};
use crate::model::ModelSpec;
use crate::sampler::{Broadcast, Domain, StreamKey};
use crate::{Error, Result};

/// Overlap means for the plan prefix of `m²` vertices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapPoint {
    pub m: usize,
    pub plan_size: usize,
    pub matched: f64,
    pub matched_stderr: f64,
    pub mismatched: f64,
    pub mismatched_stderr: f64,
    /// `matched − mismatched`, with the standard error of the per-replica
    /// differences (both modes share `ω`).
    pub gap: f64,
    pub gap_stderr: f64,
}

/// How closely one plan gap decorrelates its endpoints: the chain's
/// correlation over `r_i` steps is at most `λ₂^{r_i}`, compared with `i⁻²`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpacingCheck {
    pub i: usize,
    pub gap: u32,
    pub correlation: f64,
    pub target: f64,
    pub adequate: bool,
    /// Smallest gap meeting the target, when `0 < λ₂ < 1`.
    pub minimal_gap: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapSeries {
    pub depth: u32,
    pub samples: usize,
    pub seed: u64,
    pub spacing: Spacing,
    pub plan: BranchPlan,
    pub points: Vec<OverlapPoint>,
    /// `Σ_a μ(σ₀ = a)²`, the mismatched expectation.
    pub collision: f64,
    /// `1 − (ε₁ + ε₂)` when both bounds are informative.
    pub concentration_level: Option<f64>,
    pub spacing_checks: Vec<SpacingCheck>,
    pub notes: Vec<String>,
}

impl OverlapSeries {
    /// The point for the largest plan.
    pub fn last(&self) -> &OverlapPoint {
        self.points.last().expect("a series has at least one point")
    }

    /// The largest-plan gap as a scalar report, for depth sweeps.
    pub fn gap_report(&self) -> EstimatorReport {
        let p = self.last();
        let mut report = EstimatorReport {
            name: "overlap-gap".into(),
            estimate: p.gap,
            stderr: p.gap_stderr,
            samples: self.samples,
            depth: self.depth,
            truncation: None,
            seed: self.seed,
            series: Vec::new(),
            extras: Default::default(),
            notes: self.notes.clone(),
        };
        report.extra("matched", p.matched);
        report.extra("mismatched", p.mismatched);
        report.extra("plan_size", p.plan_size as f64);
        report
    }
}

pub fn spacing_diagnostic(spacing: &Spacing, count: usize, lambda2: f64) -> Vec<SpacingCheck> {
    let lam = lambda2.abs();
    (1..count)
        .filter_map(|i| spacing.gap(i).map(|gap| (i, gap)))
        .map(|(i, gap)| {
            let correlation = lam.powi(gap as i32);
            let target = 1.0 / (i * i) as f64;
            let minimal_gap =
                (lam > 0.0 && lam < 1.0).then(|| (target.ln() / lam.ln()).ceil().max(1.0) as u32);
            SpacingCheck {
                i,
                gap,
                correlation,
                target,
                adequate: correlation <= target,
                minimal_gap,
            }
        })
        .collect()
}

/// Branch overlaps `|Λ_m|⁻¹ Σ_{v∈Λ_m} 1{σ_v = ω_v}` for every plan prefix
/// that fits in `B_n`.
///
/// Each replica broadcasts `ω` and an independent `ω′` on `B_{n+1}`. The
/// matched overlap draws `σ` on the plan from `γ_{B_n}(· | ω)`; the
/// mismatched overlap draws it from `γ_{B_n}(· | ω′)`; both compare with
/// `ω` on the plan.
pub fn estimate_overlap(
    spec: &ModelSpec,
    spacing: &Spacing,
    depth: u32,
    direction_seed: u64,
    opts: &RunOptions,
) -> Result<OverlapSeries> {
    let n = largest_fitting_n(spacing, depth);
    if n == 0 {
        return Err(Error::OutsideVolume(format!(
            "no plan with spacing {spacing} fits in depth {depth}"
        )));
    }
    let kernel = natural_kernel(spec)?;
    let inner = BallGeometry::new(spec.d(), depth)?;
    let outer = BallGeometry::new(spec.d(), depth + 1)?;
    let plan = branch_plan(spacing, n, &inner, direction_seed)?;
    let targets = plan.vertices.clone();

    // Per replica: matching counts for the two modes, per prefix.
    let counts = run_replicas(opts, |r| {
        let omega = Broadcast::new(
            &kernel,
            outer,
            StreamKey::new(opts.seed, r, Domain::Omega),
            None,
        )?;
        let omega_prime = Broadcast::new(
            &kernel,
            outer,
            StreamKey::new(opts.seed, r, Domain::OmegaPrime),
            None,
        )?;
        let sigma_key = StreamKey::new(opts.seed, r, Domain::Sigma);

        let matched_pass = upward(spec, &inner, &omega, &targets, false)?;
        let sigma = matched_pass.sample(&inner, &targets, &mut sigma_key.rng(0))?;
        let mismatched_pass = upward(spec, &inner, &omega_prime, &targets, false)?;
        let sigma_prime = mismatched_pass.sample(&inner, &targets, &mut sigma_key.rng(1))?;

        let mut matched = Vec::with_capacity(targets.len());
        let mut mismatched = Vec::with_capacity(targets.len());
        let (mut a, mut b) = (0usize, 0usize);
        for &v in &targets {
            let w = matched_pass
                .field_spin(v)
                .expect("plan vertices are tracked");
            a += usize::from(sigma.spin(v)? == w);
            b += usize::from(sigma_prime.spin(v)? == w);
            matched.push(a);
            mismatched.push(b);
        }
        Ok((matched, mismatched))
    })?;

    let mut points = Vec::with_capacity(n);
    for m in 1..=n {
        let size = m * m;
        let norm = size as f64;
        let matched: Vec<f64> = counts
            .iter()
            .map(|(c, _)| c[size - 1] as f64 / norm)
            .collect();
        let mismatched: Vec<f64> = counts
            .iter()
            .map(|(_, c)| c[size - 1] as f64 / norm)
            .collect();
        let diffs: Vec<f64> = matched
            .iter()
            .zip(&mismatched)
            .map(|(x, y)| x - y)
            .collect();
        let (mm, ms) = mean_stderr(&matched);
        let (xm, xs) = mean_stderr(&mismatched);
        let (gm, gs) = mean_stderr(&diffs);
        points.push(OverlapPoint {
            m,
            plan_size: size,
            matched: mm,
            matched_stderr: ms,
            mismatched: xm,
            mismatched_stderr: xs,
            gap: gm,
            gap_stderr: gs,
        });
    }

    let bounds = chain_bounds(spec, kernel.p1)?;
    let concentration_level = match (
        bounds.epsilon1.value(),
        bounds.epsilon2.and_then(|b| b.value()),
    ) {
        (Some(e1), Some(e2)) => Some(1.0 - (e1 + e2)),
        _ => None,
    };
    let mut notes = Vec::new();
    if concentration_level.is_none() {
        notes.push("epsilon1 + epsilon2 bound vacuous at these parameters".into());
    }
    let spacing_checks = spacing_diagnostic(spacing, plan.len(), kernel.lambda2);
    if spacing_checks.iter().any(|c| !c.adequate) {
        notes.push("some plan gaps leave correlations above i^-2".into());
    }
    Ok(OverlapSeries {
        depth,
        samples: opts.samples,
        seed: opts.seed,
        spacing: spacing.clone(),
        plan,
        points,
        collision: kernel.marginal.iter().map(|m| m * m).sum(),
        concentration_level,
        spacing_checks,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independent_spins_overlap_at_chance() {
        let spec = ModelSpec::potts(3, 2, 1e-6).unwrap();
        let opts = RunOptions::new(2000, 4, 2).unwrap();
        let s = estimate_overlap(&spec, &Spacing::Constant(1), 5, 0, &opts).unwrap();
        assert_eq!(s.points.len(), 2);
        let p = s.last();
        for (mean, se) in [
            (p.matched, p.matched_stderr),
            (p.mismatched, p.mismatched_stderr),
        ] {
            assert!(((mean - 1.0 / 3.0) / se).abs() < 4.0, "{p:?}");
        }
        assert!(p.gap.abs() < 4.0 * p.gap_stderr);
    }

    #[test]
    fn low_temperature_gap() {
        let spec = ModelSpec::potts(2, 2, 3.0).unwrap();
        let opts = RunOptions::new(1000, 9, 2).unwrap();
        let s = estimate_overlap(&spec, &Spacing::default(), 8, 0, &opts).unwrap();
        let p = s.last();
        assert!(p.gap > 5.0 * p.gap_stderr, "{p:?}");
        assert!(((p.mismatched - 0.5) / p.mismatched_stderr).abs() < 4.0);
        assert!(s.points.iter().all(|p| (0.0..=1.0).contains(&p.matched)));
    }

    #[test]
    fn diagnostic_minimal_gaps() {
        let checks = spacing_diagnostic(&Spacing::Constant(1), 4, 0.5);
        assert_eq!(checks.len(), 3);
        // 0.5^r ≤ i⁻² needs r ≥ 2 log₂ i.
        assert_eq!(
            checks
                .iter()
                .map(|c| c.minimal_gap.unwrap())
                .collect::<Vec<_>>(),
            vec![1, 2, 4]
        );
        assert!(checks[0].adequate && !checks[1].adequate);
    }
}
