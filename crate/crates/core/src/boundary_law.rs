//! Homogeneous boundary laws and the tree-indexed Markov chains they induce.
//!
//! A boundary law is a positive vector `x` with `F(x, Q) = 0`, where
//! `F_i(x, Q) = x(i) − Σ_j Q(i,j) x(j)^d` and `Q` is scaled so that the
//! reference clock matrix has `‖Q₀‖₁ = 1`. The chain has transition matrix
//! `P(i,j) ∝ Q(i,j) x(j)^d` and single-site marginal `∝ x^{d+1}`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::model::{build_reference_transfer, build_transfer, ModelSpec};
use crate::{Error, Result};

/// Residual accepted from a Newton iteration that can no longer improve.
const STALL_RESIDUAL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryLaw {
    pub x: Vec<f64>,
    /// `‖F(x, Q/scale)‖_∞`.
    pub residual: f64,
    /// The transfer matrix is divided by this (the reference `‖Q₀‖₁`), which
    /// fixes the normalising constant of the law equation to 1.
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomotopyOptions {
    pub steps: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for HomotopyOptions {
    fn default() -> Self {
        HomotopyOptions {
            steps: 20,
            max_iterations: 200,
            tolerance: 1e-12,
        }
    }
}

/// Law at every homotopy node `t_k = k/steps`, `t_0 = 0` being the constant law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomotopyTrace {
    pub t: Vec<f64>,
    pub x: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainKernel {
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    pub marginal: Vec<f64>,
    /// `max_i Σ_{j≠i} P(i,j)`.
    pub p1: f64,
    /// Second largest eigenvalue modulus of `P`.
    pub lambda2: f64,
    pub irreducible_aperiodic: bool,
}

impl ChainKernel {
    pub fn q(&self) -> usize {
        self.marginal.len()
    }
}

pub fn law_residual(q_matrix: &DMatrix<f64>, x: &[f64], d: usize) -> f64 {
    let xd: Vec<f64> = x.iter().map(|v| v.powi(d as i32)).collect();
    (0..x.len())
        .map(|i| {
            let s: f64 = (0..x.len()).map(|j| q_matrix[(i, j)] * xd[j]).sum();
            (x[i] - s).abs()
        })
        .fold(0.0, f64::max)
}

fn require_free_clock(spec: &ModelSpec) -> Result<()> {
    if !spec.clock_flag() {
        return Err(Error::NotClock);
    }
    if spec.has_field() {
        return Err(Error::InvalidModel(
            "the free law needs a field-free clock model".into(),
        ));
    }
    Ok(())
}

/// The constant law of a field-free clock model.
pub fn free_law(spec: &ModelSpec) -> Result<BoundaryLaw> {
    require_free_clock(spec)?;
    let q0 = build_reference_transfer(spec);
    let scale = q0.norm1();
    let x = vec![1.0; spec.q()];
    let residual = law_residual(&(q0.entries() / scale), &x, spec.d());
    Ok(BoundaryLaw { x, residual, scale })
}

fn eigen_gap_to_inverse_d(q0: &DMatrix<f64>, d: usize) -> f64 {
    let sym = (q0 + q0.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .map(|l| (l - 1.0 / d as f64).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Continue the constant law of `q0` (with `‖q0‖₁ = 1` and `q0·1 = 1`) to the
/// solution for `q1` along `Q(t) = q0 + t(q1 − q0)` with damped Newton steps.
pub fn continue_law(
    q0: &DMatrix<f64>,
    q1: &DMatrix<f64>,
    d: usize,
    options: &HomotopyOptions,
) -> Result<(Vec<f64>, HomotopyTrace)> {
    if options.steps == 0 {
        return Err(Error::InvalidArgument(
            "homotopy needs at least one step".into(),
        ));
    }
    let q = q0.nrows();
    let gap = eigen_gap_to_inverse_d(q0, d);
    if gap <= 1e-10 {
        return Err(Error::SingularJacobian {
            t: 0.0,
            eigen_gap: gap,
        });
    }
    let mut x = DVector::from_element(q, 1.0);
    let mut trace = HomotopyTrace {
        t: vec![0.0],
        x: vec![x.iter().copied().collect()],
    };
    for k in 1..=options.steps {
        let t = k as f64 / options.steps as f64;
        let qt = q0 + (q1 - q0) * t;
        x = newton(&qt, x, d, t, options, || eigen_gap_to_inverse_d(q0, d))?;
        trace.t.push(t);
        trace.x.push(x.iter().copied().collect());
    }
    Ok((x.iter().copied().collect(), trace))
}

fn newton(
    qt: &DMatrix<f64>,
    mut x: DVector<f64>,
    d: usize,
    t: f64,
    options: &HomotopyOptions,
    eigen_gap: impl Fn() -> f64,
) -> Result<DVector<f64>> {
    let q = x.len();
    let f = |x: &DVector<f64>| -> DVector<f64> {
        let xd = x.map(|v| v.powi(d as i32));
        x - qt * xd
    };
    let mut fx = f(&x);
    let mut residual = fx.amax();
    for _ in 0..options.max_iterations {
        if residual <= options.tolerance {
            return Ok(x);
        }
        let slope = x.map(|v| d as f64 * v.powi(d as i32 - 1));
        let jac = DMatrix::<f64>::identity(q, q) - qt * DMatrix::from_diagonal(&slope);
        let sv = jac.singular_values();
        if sv.min() <= 1e-12 * sv.max().max(1.0) {
            return Err(Error::SingularJacobian {
                t,
                eigen_gap: eigen_gap(),
            });
        }
        let step = jac.lu().solve(&fx).ok_or(Error::SingularJacobian {
            t,
            eigen_gap: eigen_gap(),
        })?;
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha > 1e-10 {
            let trial = &x - &step * alpha;
            if trial.iter().all(|&v| v > 0.0) {
                let ft = f(&trial);
                let r = ft.amax();
                if r < residual {
                    x = trial;
                    fx = ft;
                    residual = r;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            // Roundoff floor reached.
            if residual <= STALL_RESIDUAL {
                return Ok(x);
            }
            break;
        }
    }
    if residual <= options.tolerance {
        return Ok(x);
    }
    Err(Error::NoConvergence {
        t,
        residual,
        iterations: options.max_iterations,
    })
}

/// `‖x̄(Q₀ + εΔ) − 1 − ε(I − dQ₀)⁻¹Δ1‖_∞`, the defect of the first-order
/// expansion of the continued law around the constant law of `q0`.
pub fn expansion_defect(
    q0: &DMatrix<f64>,
    delta: &DMatrix<f64>,
    d: usize,
    eps: f64,
    options: &HomotopyOptions,
) -> Result<f64> {
    let n = q0.nrows();
    let lin = (DMatrix::identity(n, n) - q0 * d as f64)
        .lu()
        .solve(&(delta * DVector::from_element(n, 1.0)))
        .ok_or(Error::SingularJacobian {
            t: 0.0,
            eigen_gap: eigen_gap_to_inverse_d(q0, d),
        })?;
    let (x, _) = continue_law(q0, &(q0 + delta * eps), d, options)?;
    Ok((0..n)
        .map(|i| (x[i] - 1.0 - eps * lin[i]).abs())
        .fold(0.0, f64::max))
}

/// Scale factor and scaled matrices `(Q₀/s, Q/s)` for a perturbed model and
/// its clock reference.
fn scaled_pair(
    spec: &ModelSpec,
    reference: &ModelSpec,
) -> Result<(f64, DMatrix<f64>, DMatrix<f64>)> {
    require_free_clock(reference)?;
    if spec.q() != reference.q() || spec.d() != reference.d() {
        return Err(Error::InvalidModel(
            "perturbed model and reference must share q and d".into(),
        ));
    }
    let q0 = build_reference_transfer(reference);
    let scale = q0.norm1();
    let q1 = build_transfer(spec);
    Ok((scale, q0.entries() / scale, q1.entries() / scale))
}

/// Central-state law: the homotopy continuation of the reference's constant
/// law to `spec`.
pub fn solve_central(spec: &ModelSpec, reference: &ModelSpec) -> Result<BoundaryLaw> {
    solve_central_with(spec, reference, &HomotopyOptions::default()).map(|(law, _)| law)
}

pub fn solve_central_with(
    spec: &ModelSpec,
    reference: &ModelSpec,
    options: &HomotopyOptions,
) -> Result<(BoundaryLaw, HomotopyTrace)> {
    let (scale, q0, q1) = scaled_pair(spec, reference)?;
    let (x, trace) = continue_law(&q0, &q1, spec.d(), options)?;
    let residual = law_residual(&q1, &x, spec.d());
    Ok((BoundaryLaw { x, residual, scale }, trace))
}

/// Law of a model's natural Markov-chain state: the free law when the model
/// is a field-free clock model, otherwise the central law continued from
/// the field-free reference.
pub fn natural_law(spec: &ModelSpec) -> Result<BoundaryLaw> {
    if spec.has_field() {
        solve_central(spec, &spec.without_field())
    } else {
        free_law(spec)
    }
}

pub fn chain_from_law(spec: &ModelSpec, law: &BoundaryLaw) -> Result<ChainKernel> {
    let q = spec.q();
    if law.x.len() != q || law.x.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
        return Err(Error::InvalidArgument(
            "boundary law must be a positive vector of length q".into(),
        ));
    }
    let t = build_transfer(spec);
    let xd: Vec<f64> = law.x.iter().map(|v| v.powi(spec.d() as i32)).collect();
    let p: Vec<Vec<f64>> = (0..q)
        .map(|i| {
            let row: Vec<f64> = (0..q).map(|j| t.get(i, j) * xd[j]).collect();
            let total: f64 = row.iter().sum();
            row.into_iter().map(|v| v / total).collect()
        })
        .collect();

    let weights: Vec<f64> = law.x.iter().map(|v| v.powi(spec.d() as i32 + 1)).collect();
    let total: f64 = weights.iter().sum();
    let marginal: Vec<f64> = weights.iter().map(|w| w / total).collect();

    let p1 = (0..q).map(|i| 1.0 - p[i][i]).fold(0.0, f64::max);

    // P is reversible w.r.t. the marginal, so D^{1/2} P D^{-1/2} is symmetric.
    let sqrt_m: Vec<f64> = marginal.iter().map(|m| m.sqrt()).collect();
    let sym = DMatrix::from_fn(q, q, |i, j| {
        let a = sqrt_m[i] * p[i][j] / sqrt_m[j];
        let b = sqrt_m[j] * p[j][i] / sqrt_m[i];
        0.5 * (a + b)
    });
    let mut moduli: Vec<f64> = SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .map(|l| l.abs())
        .collect();
    moduli.sort_by(|a, b| b.total_cmp(a));

    let irreducible_aperiodic = p.iter().flatten().all(|&v| v > 0.0);
    Ok(ChainKernel {
        p,
        marginal,
        p1,
        lambda2: moduli[1],
        irreducible_aperiodic,
    })
}

/// Kernel of [`natural_law`].
pub fn natural_kernel(spec: &ModelSpec) -> Result<ChainKernel> {
    chain_from_law(spec, &natural_law(spec)?)
}

/// `p₁ ≤ (q−1)e^{−βu}` for the free state of a clock model.
pub fn p1_bound_check(spec: &ModelSpec, kernel: &ChainKernel) -> bool {
    let bound = (spec.q() as f64 - 1.0) * (-spec.beta() * spec.u_min()).exp();
    kernel.p1 <= bound * (1.0 + 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn potts(q: usize, d: usize, beta: f64) -> ModelSpec {
        ModelSpec::potts(q, d, beta).unwrap()
    }

    fn assert_kernel_invariants(k: &ChainKernel) {
        let q = k.q();
        for row in &k.p {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        for j in 0..q {
            let s: f64 = (0..q).map(|i| k.marginal[i] * k.p[i][j]).sum();
            assert!((s - k.marginal[j]).abs() < 1e-10);
        }
        assert!(k.p1 > 0.0 && k.p1 < 1.0);
    }

    #[test]
    fn free_potts3_is_uniform() {
        for beta in [0.1, 1.0, 5.0] {
            let spec = potts(3, 2, beta);
            let law = free_law(&spec).unwrap();
            assert!(law.residual <= 1e-12);
            let k = chain_from_law(&spec, &law).unwrap();
            for m in &k.marginal {
                assert!((m - 1.0 / 3.0).abs() < 1e-15);
            }
            assert_kernel_invariants(&k);
        }
    }

    #[test]
    fn ising_p1_and_lambda2() {
        let beta = 3f64.ln();
        let k = natural_kernel(&potts(2, 2, beta)).unwrap();
        assert!((k.p1 - 0.25).abs() < 1e-15);
        assert!((k.lambda2 - (beta / 2.0).tanh()).abs() < 1e-12);
        assert!(k.irreducible_aperiodic);
    }

    #[test]
    fn infinite_temperature_limit() {
        let k = natural_kernel(&potts(4, 3, 1e-9)).unwrap();
        assert!((k.p1 - 0.75).abs() < 1e-8);
    }

    #[test]
    fn p1_bound_examples() {
        let spec = potts(2, 2, 2.0);
        let k = natural_kernel(&spec).unwrap();
        assert!((k.p1 - 1.0 / (2f64.exp() + 1.0)).abs() < 1e-15);
        assert!(p1_bound_check(&spec, &k));
        let spec = potts(5, 2, 1.0);
        let k = natural_kernel(&spec).unwrap();
        assert!((k.p1 - 4.0 / (1f64.exp() + 4.0)).abs() < 1e-15);
        assert!(p1_bound_check(&spec, &k));
    }

    #[test]
    fn free_law_requires_clock() {
        let u = vec![
            vec![0.0, 1.0, 2.0],
            vec![1.0, 0.0, 1.0],
            vec![2.0, 1.0, 0.0],
        ];
        let spec = ModelSpec::new(3, 2, 1.0, u, vec![0.0; 3], false).unwrap();
        assert_eq!(free_law(&spec), Err(Error::NotClock));
    }

    #[test]
    fn central_at_reference_is_constant() {
        let spec = ModelSpec::clock(5, 2, 1.7, &[1.0, 1.6]).unwrap();
        let law = solve_central(&spec, &spec).unwrap();
        let spread = law.x.iter().fold(0.0f64, |m, v| m.max((v - 1.0).abs()));
        assert!(spread < 1e-10);
    }

    #[test]
    fn constant_field_leaves_kernel_unchanged() {
        let spec = potts(3, 2, 1.1);
        let shifted = spec.with_field(vec![0.05; 3]).unwrap();
        let k0 = natural_kernel(&spec).unwrap();
        let k1 = natural_kernel(&shifted).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((k0.p[i][j] - k1.p[i][j]).abs() < 1e-12);
            }
        }
    }

    /// Root of `g(r) = r − (Q10 + Q11 r^d)/(Q00 + Q01 r^d)` in `[lo, hi]` by
    /// bisection, where `r = x1/x0`.
    fn ising_ratio(spec: &ModelSpec, lo: f64, hi: f64) -> f64 {
        let t = build_transfer(spec);
        let d = spec.d() as i32;
        let g = |r: f64| {
            r - (t.get(1, 0) + t.get(1, 1) * r.powi(d)) / (t.get(0, 0) + t.get(0, 1) * r.powi(d))
        };
        let (mut a, mut b) = (lo, hi);
        let ga = g(a);
        assert!(ga * g(b) < 0.0, "bracket does not isolate a root");
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if g(m) * ga > 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn ising_field_in_uniqueness_regime_follows_field() {
        // β = 0.5: uniqueness, single fixed point; field favours spin 0.
        let h = 0.02;
        let spec = potts(2, 2, 0.5).with_field(vec![-h, h]).unwrap();
        assert!(spec.field_admissible());
        let law = solve_central(&spec, &spec.without_field()).unwrap();
        assert!(law.residual <= 1e-10);
        let k = chain_from_law(&spec, &law).unwrap();
        assert!(k.marginal[0] > k.marginal[1]);
        let r = ising_ratio(&spec, 0.5, 2.0);
        assert!((law.x[1] / law.x[0] - r).abs() < 1e-10);
        assert_kernel_invariants(&k);
    }

    #[test]
    fn ising_field_on_the_middle_branch_at_low_temperature() {
        // β = 3: three fixed points; the continued branch is the middle one,
        // which moves against the field.
        let h = 0.02;
        let spec = potts(2, 2, 3.0).with_field(vec![-h, h]).unwrap();
        assert!(spec.field_admissible());
        let law = solve_central(&spec, &spec.without_field()).unwrap();
        let r = ising_ratio(&spec, 0.9, 1.1);
        assert!((law.x[1] / law.x[0] - r).abs() < 1e-10);
        let k = chain_from_law(&spec, &law).unwrap();
        assert!(k.marginal[1] > k.marginal[0]);
        assert_kernel_invariants(&k);
    }

    #[test]
    fn first_order_expansion() {
        let spec = ModelSpec::clock(4, 2, 0.5, &[1.0, 1.5]).unwrap();
        let q0 = build_reference_transfer(&spec)
            .normalized()
            .entries()
            .clone();
        let n = q0.nrows();
        let delta = DMatrix::from_fn(n, n, |i, j| 0.1 * ((i + j + i * j) % 3) as f64 + 0.05);
        let eps = [1e-1, 1e-2, 1e-3, 1e-4];
        let defects: Vec<f64> = eps
            .iter()
            .map(|&e| expansion_defect(&q0, &delta, 2, e, &HomotopyOptions::default()).unwrap())
            .collect();
        for (pair, e) in defects.windows(2).zip(eps.windows(2)) {
            let order = (pair[0] / pair[1]).ln() / (e[0] / e[1]).ln();
            assert!(order >= 1.8, "order {order} from {defects:?}");
        }
    }

    #[test]
    fn homotopy_trace_is_continuous() {
        let spec = potts(3, 2, 1.0).with_field(vec![-0.05, 0.0, 0.05]).unwrap();
        let options = HomotopyOptions {
            steps: 40,
            ..Default::default()
        };
        let (_, trace) = solve_central_with(&spec, &spec.without_field(), &options).unwrap();
        for w in trace.x.windows(2) {
            let jump = w[0]
                .iter()
                .zip(&w[1])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(jump < 10.0 / options.steps as f64);
        }
    }

    #[test]
    fn singular_jacobian_is_reported() {
        // Potts q=2, d=2 with λ₂(Q₀/‖Q₀‖₁) = 1/2 exactly: e^{−β} = 1/3.
        let spec = potts(2, 2, 3f64.ln());
        let shifted = spec.with_field(vec![-0.01, 0.01]).unwrap();
        match solve_central(&shifted, &spec) {
            Err(Error::SingularJacobian { eigen_gap, .. }) => assert!(eigen_gap < 1e-10),
            other => panic!("expected a singular Jacobian, got {other:?}"),
        }
    }
}
