//! Model specifications and transfer matrices.

mod bounds;
mod spectrum;

pub use bounds::{
    constants, delta0, epsilon1, epsilon2, lambda_details, lambda_objective, lambda_of_p1, Bound,
    BoundsReport, LambdaDetails,
};
pub use spectrum::{eigen_report, EigenReport};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Spin};

const SYMMETRY_TOL: f64 = 1e-12;

/// A ferromagnetic nearest-neighbour model on the Cayley tree of order `d`.
///
/// Energies are dimensionless; `beta` multiplies both the pair energies
/// `u_{i,j}` and the single-site field `Ψ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModelSpec", into = "RawModelSpec")]
pub struct ModelSpec {
    q: usize,
    d: usize,
    beta: f64,
    pair_energy: Vec<Vec<f64>>,
    field: Vec<f64>,
    clock_flag: bool,
}

/// Unvalidated mirror of [`ModelSpec`] used for (de)serialization.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawModelSpec {
    pub q: usize,
    pub d: usize,
    pub beta: f64,
    pub pair_energy: Vec<Vec<f64>>,
    #[serde(default)]
    pub field: Option<Vec<f64>>,
    #[serde(default)]
    pub clock_flag: bool,
}

impl TryFrom<RawModelSpec> for ModelSpec {
    type Error = Error;

    fn try_from(raw: RawModelSpec) -> Result<Self> {
        let field = raw.field.unwrap_or_else(|| vec![0.0; raw.q]);
        ModelSpec::new(
            raw.q,
            raw.d,
            raw.beta,
            raw.pair_energy,
            field,
            raw.clock_flag,
        )
    }
}

impl From<ModelSpec> for RawModelSpec {
    fn from(spec: ModelSpec) -> Self {
        RawModelSpec {
            q: spec.q,
            d: spec.d,
            beta: spec.beta,
            pair_energy: spec.pair_energy,
            field: Some(spec.field),
            clock_flag: spec.clock_flag,
        }
    }
}

/// Cyclic distance between two spins in `Z_q`.
pub fn cyclic_distance(i: Spin, j: Spin, q: usize) -> usize {
    let k = i.abs_diff(j) % q;
    k.min(q - k)
}

impl ModelSpec {
    pub fn new(
        q: usize,
        d: usize,
        beta: f64,
        pair_energy: Vec<Vec<f64>>,
        field: Vec<f64>,
        clock_flag: bool,
    ) -> Result<Self> {
        let invalid = |msg: String| Err(Error::InvalidModel(msg));
        if q < 2 {
            return invalid(format!("q must be at least 2, got {q}"));
        }
        if q > 64 {
            return invalid(format!("q must be at most 64, got {q}"));
        }
        if d < 2 {
            return invalid(format!("branching number d must be at least 2, got {d}"));
        }
        if d > 64 {
            return invalid(format!("branching number d must be at most 64, got {d}"));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return invalid(format!("beta must be positive and finite, got {beta}"));
        }
        if pair_energy.len() != q || pair_energy.iter().any(|row| row.len() != q) {
            return invalid(format!("pair_energy must be a {q}x{q} matrix"));
        }
        if field.len() != q {
            return invalid(format!("field must have {q} entries, got {}", field.len()));
        }
        if field.iter().any(|f| !f.is_finite()) {
            return invalid("field entries must be finite".into());
        }
        for i in 0..q {
            for j in 0..q {
                let u = pair_energy[i][j];
                if !u.is_finite() {
                    return invalid(format!("u[{i}][{j}] is not finite"));
                }
                if i == j && u != 0.0 {
                    return invalid(format!("diagonal energy u[{i}][{i}] must be 0, got {u}"));
                }
                if i != j && u <= 0.0 {
                    return invalid(format!(
                        "off-diagonal energy u[{i}][{j}] must be > 0, got {u}"
                    ));
                }
                let v = pair_energy[j][i];
                if (u - v).abs() > SYMMETRY_TOL * u.abs().max(1.0) {
                    return invalid(format!("pair_energy not symmetric at ({i},{j})"));
                }
            }
        }
        if clock_flag {
            for i in 0..q {
                for j in 0..q {
                    let k = cyclic_distance(i, j, q);
                    let expected = pair_energy[0][k];
                    if (pair_energy[i][j] - expected).abs() > SYMMETRY_TOL * expected.abs().max(1.0)
                    {
                        return invalid(format!(
                            "clock_flag set but u[{i}][{j}] differs from u[0][{k}]"
                        ));
                    }
                }
            }
        }
        Ok(ModelSpec {
            q,
            d,
            beta,
            pair_energy,
            field,
            clock_flag,
        })
    }

    /// q-state Potts model: `u_{i,j} = 1` for `i ≠ j`, zero field.
    pub fn potts(q: usize, d: usize, beta: f64) -> Result<Self> {
        let pair_energy = (0..q)
            .map(|i| (0..q).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect();
        Self::new(q, d, beta, pair_energy, vec![0.0; q], true)
    }

    /// Clock model with `u_{i,j} = profile[k − 1]` where `k` is the cyclic
    /// distance of `i` and `j`; `profile` has `⌊q/2⌋` entries.
    pub fn clock(q: usize, d: usize, beta: f64, profile: &[f64]) -> Result<Self> {
        if profile.len() != q / 2 {
            return Err(Error::InvalidModel(format!(
                "clock profile needs {} entries, got {}",
                q / 2,
                profile.len()
            )));
        }
        let pair_energy = (0..q)
            .map(|i| {
                (0..q)
                    .map(|j| match cyclic_distance(i, j, q) {
                        0 => 0.0,
                        k => profile[k - 1],
                    })
                    .collect()
            })
            .collect();
        Self::new(q, d, beta, pair_energy, vec![0.0; q], true)
    }

    pub fn with_field(&self, field: Vec<f64>) -> Result<Self> {
        Self::new(
            self.q,
            self.d,
            self.beta,
            self.pair_energy.clone(),
            field,
            self.clock_flag,
        )
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(
            self.q,
            self.d,
            beta,
            self.pair_energy.clone(),
            self.field.clone(),
            self.clock_flag,
        )
    }

    /// The same pair interaction with the single-site field removed.
    pub fn without_field(&self) -> Self {
        ModelSpec {
            field: vec![0.0; self.q],
            ..self.clone()
        }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn pair_energy(&self) -> &[Vec<f64>] {
        &self.pair_energy
    }

    pub fn energy(&self, a: Spin, b: Spin) -> f64 {
        self.pair_energy[a][b]
    }

    pub fn field(&self) -> &[f64] {
        &self.field
    }

    pub fn clock_flag(&self) -> bool {
        self.clock_flag
    }

    pub fn has_field(&self) -> bool {
        self.field.iter().any(|&f| f != 0.0)
    }

    /// `u = min_{i≠j} u_{i,j}`.
    pub fn u_min(&self) -> f64 {
        self.off_diagonal().fold(f64::INFINITY, f64::min)
    }

    /// `U = max_{i,j} u_{i,j}`.
    pub fn u_max(&self) -> f64 {
        self.off_diagonal().fold(0.0, f64::max)
    }

    fn off_diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.q).flat_map(move |i| {
            (0..self.q)
                .filter(move |&j| j != i)
                .map(move |j| self.pair_energy[i][j])
        })
    }

    /// Admissible field magnitude `u(d−1)/8`.
    pub fn field_bound(&self) -> f64 {
        self.u_min() * (self.d as f64 - 1.0) / 8.0
    }

    pub fn field_sup(&self) -> f64 {
        self.field.iter().fold(0.0, |m, f| m.max(f.abs()))
    }

    /// Whether `‖Ψ‖_∞ ≤ u(d−1)/8`. A violation is reported, never rejected.
    pub fn field_admissible(&self) -> bool {
        self.field_sup() <= self.field_bound()
    }
}

/// Strictly positive `q×q` matrix of Boltzmann factors.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    entries: DMatrix<f64>,
}

impl TransferMatrix {
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() || entries.nrows() < 2 {
            return Err(Error::InvalidArgument(
                "transfer matrix must be square with q >= 2".into(),
            ));
        }
        if entries.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
            return Err(Error::InvalidArgument(
                "transfer matrix entries must be finite and strictly positive".into(),
            ));
        }
        Ok(TransferMatrix { entries })
    }

    pub fn q(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: Spin, j: Spin) -> f64 {
        self.entries[(i, j)]
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Matrix 1-norm (largest column sum).
    pub fn norm1(&self) -> f64 {
        self.entries
            .column_iter()
            .map(|c| c.sum())
            .fold(0.0, f64::max)
    }

    /// `Q / ‖Q‖₁`.
    pub fn normalized(&self) -> TransferMatrix {
        TransferMatrix {
            entries: &self.entries / self.norm1(),
        }
    }

    pub fn scaled(&self, factor: f64) -> TransferMatrix {
        TransferMatrix {
            entries: &self.entries * factor,
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let q = self.q();
        (0..q).all(|i| (0..q).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.entries
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }
}

/// `Q(i,j) = exp(−β(u_{i,j} + (Ψ(i)+Ψ(j))/(d+1)))`.
pub fn build_transfer(spec: &ModelSpec) -> TransferMatrix {
    let q = spec.q();
    let split = (spec.d() + 1) as f64;
    let entries = DMatrix::from_fn(q, q, |i, j| {
        let e = spec.energy(i, j) + (spec.field()[i] + spec.field()[j]) / split;
        (-spec.beta() * e).exp()
    });
    TransferMatrix { entries }
}

/// Transfer matrix of the pair interaction alone (the clock reference `Q₀`).
pub fn build_reference_transfer(spec: &ModelSpec) -> TransferMatrix {
    build_transfer(&spec.without_field())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potts_transfer_at_ln2() {
        let spec = ModelSpec::potts(2, 2, std::f64::consts::LN_2).unwrap();
        let t = build_transfer(&spec);
        assert!((t.get(0, 0) - 1.0).abs() < 1e-15);
        assert!((t.get(1, 1) - 1.0).abs() < 1e-15);
        assert!((t.get(0, 1) - 0.5).abs() < 1e-15);
        assert!((t.get(1, 0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_nonpositive_beta() {
        assert!(matches!(
            ModelSpec::potts(2, 2, 0.0),
            Err(Error::InvalidModel(_))
        ));
        assert!(ModelSpec::potts(2, 2, -1.0).is_err());
        assert!(ModelSpec::potts(2, 2, f64::NAN).is_err());
    }

    #[test]
    fn rejects_bad_pair_energy() {
        let nonzero_diag = vec![vec![0.1, 1.0], vec![1.0, 0.0]];
        assert!(ModelSpec::new(2, 2, 1.0, nonzero_diag, vec![0.0; 2], false).is_err());
        let asym = vec![vec![0.0, 1.0], vec![2.0, 0.0]];
        assert!(ModelSpec::new(2, 2, 1.0, asym, vec![0.0; 2], false).is_err());
        let zero_off = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        assert!(ModelSpec::new(2, 2, 1.0, zero_off, vec![0.0; 2], false).is_err());
        let not_clock = vec![
            vec![0.0, 1.0, 2.0],
            vec![1.0, 0.0, 1.0],
            vec![2.0, 1.0, 0.0],
        ];
        assert!(ModelSpec::new(3, 2, 1.0, not_clock.clone(), vec![0.0; 3], true).is_err());
        assert!(ModelSpec::new(3, 2, 1.0, not_clock, vec![0.0; 3], false).is_ok());
    }

    #[test]
    fn field_admissibility_is_recorded_not_fatal() {
        let spec = ModelSpec::potts(2, 2, 1.0).unwrap();
        assert!((spec.field_bound() - 0.125).abs() < 1e-15);
        let ok = spec.with_field(vec![-0.1, 0.1]).unwrap();
        assert!(ok.field_admissible());
        let big = spec.with_field(vec![-1.0, 1.0]).unwrap();
        assert!(!big.field_admissible());
    }

    #[test]
    fn constant_field_is_a_gauge() {
        let spec = ModelSpec::potts(3, 2, 1.3).unwrap();
        let c = 0.4;
        let shifted = spec.with_field(vec![c; 3]).unwrap();
        let (t0, t1) = (build_transfer(&spec), build_transfer(&shifted));
        let factor = (-2.0 * spec.beta() * c / 3.0).exp();
        for i in 0..3 {
            for j in 0..3 {
                assert!((t1.get(i, j) - factor * t0.get(i, j)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn clock_profile_builds_cyclic_energies() {
        let spec = ModelSpec::clock(5, 2, 1.0, &[1.0, 2.5]).unwrap();
        assert_eq!(spec.energy(0, 1), 1.0);
        assert_eq!(spec.energy(0, 4), 1.0);
        assert_eq!(spec.energy(1, 3), 2.5);
        assert_eq!(spec.u_min(), 1.0);
        assert_eq!(spec.u_max(), 2.5);
        assert!(build_transfer(&spec).is_symmetric(0.0));
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = ModelSpec::clock(4, 3, 2.0, &[1.0, 1.5])
            .unwrap()
            .with_field(vec![0.0, 0.1, -0.1, 0.05])
            .unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        let back: ModelSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec, back);
    }
}
