use serde::Serialize;

use super::ModelSpec;
use crate::{Error, Result};

/// A bound that is either informative (`< 1`) or vacuous.
///
/// A vacuous bound keeps its series value when the series converges but
/// sums to at least one; `series_sum` is `None` when the series diverges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bound {
    Value { value: f64 },
    Vacuous { series_sum: Option<f64> },
}

impl Bound {
    fn from_series(sum: Option<f64>) -> Bound {
        match sum {
            Some(v) if v < 1.0 => Bound::Value { value: v },
            other => Bound::Vacuous { series_sum: other },
        }
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            Bound::Value { value } => Some(value),
            Bound::Vacuous { .. } => None,
        }
    }

    pub fn is_vacuous(&self) -> bool {
        matches!(self, Bound::Vacuous { .. })
    }

    /// Series value whenever the series converges (informative or not).
    pub fn series_sum(&self) -> Option<f64> {
        match *self {
            Bound::Value { value } => Some(value),
            Bound::Vacuous { series_sum } => series_sum,
        }
    }
}

/// Closed form of `Σ_{ℓ≥1} (d+1)^{2(ℓ−1)} (q−1)^ℓ x^ℓ`, `None` if divergent.
pub(crate) fn entropy_series(q: usize, d: usize, x: f64) -> Option<f64> {
    let growth = ((d + 1) * (d + 1)) as f64 * (q - 1) as f64;
    let ratio = growth * x;
    if ratio < 1.0 {
        Some((q - 1) as f64 * x / (1.0 - ratio))
    } else {
        None
    }
}

/// `δ₀ = (d−1)u / (2(u+U))`.
pub fn delta0(spec: &ModelSpec) -> f64 {
    let (u, big_u) = (spec.u_min(), spec.u_max());
    (spec.d() as f64 - 1.0) * u / (2.0 * (u + big_u))
}

/// Contour sum with activity `exp(−β(d−1)u/4)` per vertex.
pub fn epsilon1(spec: &ModelSpec) -> Bound {
    let x = (-spec.beta() * (spec.d() as f64 - 1.0) * spec.u_min() / 4.0).exp();
    Bound::from_series(entropy_series(spec.q(), spec.d(), x))
}

/// `log` of the Chernoff objective `e^{−tδ₀}(p₁eᵗ + 1 − p₁)^{d+1}`.
pub fn lambda_objective(t: f64, p1: f64, delta0: f64, d: usize) -> f64 {
    let a = p1.ln() + t;
    let b = (1.0 - p1).ln();
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    let log_mix = hi + (lo - hi).exp().ln_1p();
    -t * delta0 + (d + 1) as f64 * log_mix
}

/// Result of the `λ(p₁)` minimisation together with the alternative closed
/// form `(p₁/δ₀)^{δ₀}((1−p₁)/(d+1−δ₀))^{1−δ₀}` for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaDetails {
    pub lambda: f64,
    pub t_star: f64,
    pub closed_form_lambda: f64,
    pub closed_form_agrees: bool,
}

pub fn lambda_details(p1: f64, spec: &ModelSpec) -> Result<LambdaDetails> {
    if !(p1 > 0.0 && p1 < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "p1 must lie in (0, 1), got {p1}"
        )));
    }
    let d = spec.d();
    let delta = delta0(spec);
    let slope = |t: f64| {
        let w = 1.0 / (1.0 + ((1.0 - p1).ln() - p1.ln() - t).exp());
        -delta + (d + 1) as f64 * w
    };

    let t_star = if slope(0.0) >= 0.0 {
        0.0
    } else {
        // Objective is convex: bisect on its derivative.
        let mut hi = 1.0;
        while slope(hi) < 0.0 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi.max(1.0) {
                break;
            }
        }
        0.5 * (lo + hi)
    };
    let lambda = (-lambda_objective(t_star, p1, delta, d)).max(0.0);

    let closed_form_lambda =
        -(delta * (p1 / delta).ln() + (1.0 - delta) * ((1.0 - p1) / (d as f64 + 1.0 - delta)).ln());
    let closed_form_agrees = (closed_form_lambda - lambda).abs() <= 1e-9 * lambda.abs().max(1.0);
    Ok(LambdaDetails {
        lambda,
        t_star,
        closed_form_lambda,
        closed_form_agrees,
    })
}

/// `λ(p₁) = −log inf_{t≥0} e^{−tδ₀}(p₁eᵗ + 1 − p₁)^{d+1}`.
pub fn lambda_of_p1(p1: f64, spec: &ModelSpec) -> Result<f64> {
    lambda_details(p1, spec).map(|l| l.lambda)
}

/// Contour sum with activity `e^{−λ(p₁)}` per vertex.
pub fn epsilon2(spec: &ModelSpec, p1: f64) -> Result<Bound> {
    let lambda = lambda_of_p1(p1, spec)?;
    Ok(Bound::from_series(entropy_series(
        spec.q(),
        spec.d(),
        (-lambda).exp(),
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub delta0: f64,
    pub epsilon1: Bound,
    pub p1: Option<f64>,
    pub lambda_p1: Option<f64>,
    pub epsilon2: Option<Bound>,
    /// Lower bound on the eigenvalues of the normalised reference matrix.
    pub eig_lower: f64,
    /// `(d−1)/(d+1) > (q−1)e^{−βu}`.
    pub gap_condition: bool,
}

impl BoundsReport {
    /// Fill the `p₁`-dependent fields.
    pub fn with_p1(mut self, spec: &ModelSpec, p1: f64) -> Result<Self> {
        self.p1 = Some(p1);
        self.lambda_p1 = Some(lambda_of_p1(p1, spec)?);
        self.epsilon2 = Some(epsilon2(spec, p1)?);
        Ok(self)
    }
}

pub fn constants(spec: &ModelSpec) -> BoundsReport {
    let q = spec.q() as f64;
    let d = spec.d() as f64;
    let excitation = (q - 1.0) * (-spec.beta() * spec.u_min()).exp();
    BoundsReport {
        delta0: delta0(spec),
        epsilon1: epsilon1(spec),
        p1: None,
        lambda_p1: None,
        epsilon2: None,
        eig_lower: (1.0 - excitation) / (1.0 + excitation),
        gap_condition: (d - 1.0) / (d + 1.0) > excitation,
    }
}
