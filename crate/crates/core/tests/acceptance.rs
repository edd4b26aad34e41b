//! Acceptance gate. Each test prints one `PASS`/`FAIL` line for its
//! criterion straight to stdout (bypassing capture) and then asserts.
//!
//! Every Monte Carlo run uses seed 1, fixed before any run was made.

use std::collections::BTreeSet;
use std::io::Write;
use std::time::{Duration, Instant};

use cayley_gibbs::boundary_law::{free_law, natural_kernel};
use cayley_gibbs::estimators::{
    estimate_bad_rate, estimate_cov_decay, estimate_overlap, estimate_qea, estimate_reconstruction,
    RunOptions,
};
use cayley_gibbs::geometry::Spacing;
use cayley_gibbs::model::{
    constants, delta0, eigen_report, epsilon1, epsilon2, lambda_of_p1, Bound, ModelSpec,
};
use cayley_gibbs::oracle::exact_connected_count;
use cayley_gibbs::verify::{
    boundary_law_suite, entropy_suite, oracle_matrix, peierls_suite, VerifyCase,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 1;
const TEST_RNG_SEED: u64 = 20_261_019;

struct Criterion {
    number: u32,
    title: &'static str,
    started: Instant,
    checks: Vec<(String, bool)>,
}

impl Criterion {
    fn new(number: u32, title: &'static str) -> Self {
        Criterion {
            number,
            title,
            started: Instant::now(),
            checks: Vec::new(),
        }
    }

    fn check(&mut self, what: impl Into<String>, ok: bool) {
        self.checks.push((what.into(), ok));
    }

    fn cases(&mut self, cases: &[VerifyCase]) {
        for c in cases {
            self.check(
                format!(
                    "{}/{} error {:e} tol {:e}",
                    c.suite, c.name, c.error, c.tolerance
                ),
                c.passed,
            );
        }
    }

    fn within(&mut self, limit: Duration) {
        let elapsed = self.started.elapsed();
        self.check(
            format!("runtime {elapsed:.1?} under {limit:?}"),
            elapsed < limit,
        );
    }

    fn finish(self) {
        let failed: Vec<&String> = self
            .checks
            .iter()
            .filter(|(_, ok)| !ok)
            .map(|(w, _)| w)
            .collect();
        let mut line = format!(
            "{} criterion {}: {} ({}/{} checks, {:.1?})\n",
            if failed.is_empty() { "PASS" } else { "FAIL" },
            self.number,
            self.title,
            self.checks.len() - failed.len(),
            self.checks.len(),
            self.started.elapsed()
        );
        for (what, ok) in &self.checks {
            if !ok || self.checks.len() <= 12 {
                line.push_str(&format!(
                    "    {} {what}\n",
                    if *ok { "ok  " } else { "FAIL" }
                ));
            }
        }
        let mut out = std::io::stdout().lock();
        let _ = out.write_all(line.as_bytes());
        let _ = out.flush();
        assert!(
            failed.is_empty(),
            "criterion {} failed: {failed:?}",
            self.number
        );
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

#[test]
fn criterion_1_oracle_equivalence() {
    let mut c = Criterion::new(1, "message passing equals brute-force enumeration");
    let cases = oracle_matrix(None).unwrap();
    c.check(
        format!("{} cases (at least 100)", cases.len()),
        cases.len() >= 100,
    );
    c.check(
        "every case held to 1e-12",
        cases.iter().all(|k| k.tolerance <= 1e-12),
    );
    c.cases(&cases);
    c.within(Duration::from_secs(60));
    c.finish();
}

/// `x_i − Σ_j (Q_ij/s) x_j^d` with `Q` rebuilt here from the pair energies
/// and field, and `s` the row sum of the field-free matrix.
fn law_residual_here(spec: &ModelSpec, x: &[f64]) -> f64 {
    let q = spec.q();
    let d = spec.d() as i32;
    let beta = spec.beta();
    let split = (spec.d() + 1) as f64;
    let scale: f64 = (0..q)
        .map(|j| (-beta * spec.pair_energy()[0][j]).exp())
        .sum();
    (0..q)
        .map(|i| {
            let s: f64 = (0..q)
                .map(|j| {
                    let e = spec.pair_energy()[i][j] + (spec.field()[i] + spec.field()[j]) / split;
                    (-beta * e).exp() / scale * x[j].powi(d)
                })
                .sum();
            (x[i] - s).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn criterion_2_boundary_law_correctness() {
    let mut c = Criterion::new(
        2,
        "boundary laws: free residual, central constant, expansion order",
    );
    let suite = boundary_law_suite().unwrap();
    c.check(
        "suite covers free residual, central constancy and expansion order",
        ["free residual", "central at reference", "expansion order"]
            .iter()
            .all(|k| suite.iter().any(|s| s.name.starts_with(k))),
    );
    c.cases(&suite);
    for (q, d, beta, profile) in [
        (3usize, 2usize, 1.0, vec![1.0]),
        (4, 2, 0.5, vec![1.0, 1.5]),
        (5, 3, 2.0, vec![1.0, 1.2]),
    ] {
        let spec = ModelSpec::clock(q, d, beta, &profile).unwrap();
        let law = free_law(&spec).unwrap();
        let r = law_residual_here(&spec, &law.x);
        c.check(
            format!("free law residual recomputed q={q} d={d}: {r:e}"),
            r <= 1e-12,
        );
    }
    c.within(Duration::from_secs(10));
    c.finish();
}

/// `Σ_{ℓ≥1} (d+1)^{2(ℓ−1)} (q−1)^ℓ x^ℓ` summed term by term with
/// compensation; `None` when the terms do not shrink.
fn entropy_series_direct(q: usize, d: usize, x: f64) -> Option<f64> {
    let ratio = ((d + 1) * (d + 1) * (q - 1)) as f64 * x;
    if ratio >= 1.0 {
        return None;
    }
    let first = (q - 1) as f64 * x;
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for l in 0u64.. {
        let term = first * (l as f64 * ratio.ln()).exp();
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        if term <= 1e-20 * sum {
            break;
        }
    }
    Some(sum)
}

/// `−log inf_{t≥0} e^{−tδ}(p eᵗ + 1 − p)^{d+1}` by golden-section search.
fn lambda_direct(p: f64, delta: f64, d: usize) -> f64 {
    let f = |t: f64| -t * delta + (d + 1) as f64 * (p * t.exp() + 1.0 - p).ln();
    let mut hi = 1.0;
    while f(hi) < f(hi / 2.0) {
        hi *= 2.0;
    }
    let (mut a, mut b) = (0.0f64, hi);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..300 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        if f(x1) <= f(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let t = 0.5 * (a + b);
    (-f(t).min(f(0.0))).max(0.0)
}

/// Returns whether a convergent series value was compared.
fn bound_matches(name: &str, bound: Bound, direct: Option<f64>, c: &mut Criterion) -> bool {
    let ok = match (bound.series_sum(), direct) {
        (Some(v), Some(w)) => rel_err(v, w) <= 1e-12 && (v < 1.0) == !bound.is_vacuous(),
        (None, None) => bound.is_vacuous(),
        _ => false,
    };
    c.check(format!("{name}: {bound:?} vs {direct:?}"), ok);
    direct.is_some()
}

fn random_spec(rng: &mut ChaCha8Rng) -> ModelSpec {
    let q = rng.random_range(2..=7usize);
    let d = rng.random_range(2..=4usize);
    let beta = rng.random_range(0.2..12.0);
    if rng.random_bool(0.5) {
        ModelSpec::potts(q, d, beta).unwrap()
    } else {
        let profile: Vec<f64> = (0..q / 2).map(|_| rng.random_range(0.5..2.0)).collect();
        ModelSpec::clock(q, d, beta, &profile).unwrap()
    }
}

#[test]
fn criterion_3_closed_form_constants() {
    let mut c = Criterion::new(3, "closed-form constants");
    for q in [2usize, 3, 4, 5] {
        for beta in [0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
            let k = natural_kernel(&ModelSpec::potts(q, 2, beta).unwrap()).unwrap();
            let expected = (q as f64 - 1.0) / (beta.exp() + q as f64 - 1.0);
            c.check(
                format!("p1 potts q={q} beta={beta}"),
                (k.p1 - expected).abs() <= 1e-12,
            );
        }
    }
    for beta in [0.1, 0.5, 1.0, 2.0, 3.0, 5.0] {
        let k = natural_kernel(&ModelSpec::potts(2, 2, beta).unwrap()).unwrap();
        c.check(
            format!("lambda2 ising beta={beta}"),
            (k.lambda2 - (beta / 2.0).tanh()).abs() <= 1e-10,
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(TEST_RNG_SEED);
    let mut compared = 0;
    for i in 0..100 {
        let spec = random_spec(&mut rng);
        let (q, d) = (spec.q(), spec.d());
        let off: Vec<f64> = (0..q)
            .flat_map(|a| (0..q).filter(move |&b| b != a).map(move |b| (a, b)))
            .map(|(a, b)| spec.pair_energy()[a][b])
            .collect();
        let u = off.iter().copied().fold(f64::INFINITY, f64::min);
        let big_u = off.iter().copied().fold(0.0, f64::max);
        let delta = (d as f64 - 1.0) * u / (2.0 * (u + big_u));
        c.check(
            format!("delta0 #{i}"),
            rel_err(delta0(&spec), delta) <= 1e-12,
        );

        let x1 = (-spec.beta() * (d as f64 - 1.0) * u / 4.0).exp();
        compared += usize::from(bound_matches(
            &format!("epsilon1 #{i}"),
            epsilon1(&spec),
            entropy_series_direct(q, d, x1),
            &mut c,
        ));

        let natural = natural_kernel(&spec).unwrap().p1;
        let random_p1 = 10f64.powf(rng.random_range(-9.0..-0.5));
        for (tag, p1) in [("natural", natural), ("random", random_p1)] {
            if !(p1 > 0.0 && p1 < 1.0) {
                continue;
            }
            let lambda = lambda_direct(p1, delta, d);
            let got = lambda_of_p1(p1, &spec).unwrap();
            c.check(
                format!("lambda #{i} {tag} p1={p1:e}: {got} vs {lambda}"),
                (got - lambda).abs() <= 1e-12 * lambda.max(1.0),
            );
            compared += usize::from(bound_matches(
                &format!("epsilon2 #{i} {tag}"),
                epsilon2(&spec, p1).unwrap(),
                entropy_series_direct(q, d, (-lambda).exp()),
                &mut c,
            ));
        }
    }

    c.check(
        format!("{compared} convergent series compared (at least 50)"),
        compared >= 50,
    );

    // Eigenvalues of the normalised clock matrix from the cosine sum of
    // its first row, against the lower bound.
    let mut tested = 0;
    while tested < 100 {
        let q = rng.random_range(3..=9usize);
        let d = rng.random_range(2..=4usize);
        let beta = rng.random_range(0.5..8.0);
        let profile: Vec<f64> = (0..q / 2).map(|_| rng.random_range(0.5..2.0)).collect();
        let spec = ModelSpec::clock(q, d, beta, &profile).unwrap();
        let u = spec.u_min();
        let excitation = (q as f64 - 1.0) * (-beta * u).exp();
        if excitation >= 1.0 {
            continue;
        }
        tested += 1;
        let row: Vec<f64> = (0..q)
            .map(|j| (-beta * spec.pair_energy()[0][j]).exp())
            .collect();
        let norm: f64 = row.iter().sum();
        let min_eig = (0..q)
            .map(|k| {
                (0..q)
                    .map(|j| {
                        row[j] / norm
                            * (2.0 * std::f64::consts::PI * (j * k) as f64 / q as f64).cos()
                    })
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        let bound = (1.0 - excitation) / (1.0 + excitation);
        let report = eigen_report(&spec).unwrap();
        c.check(
            format!("eigenvalue bound clock #{tested} q={q}: min {min_eig} >= {bound}"),
            min_eig >= bound - 1e-12
                && rel_err(report.lower_bound, bound) <= 1e-12
                && (report.min_eigenvalue() - min_eig).abs() <= 1e-12
                && (constants(&spec).eig_lower - bound).abs() <= 1e-12,
        );
    }
    c.finish();
}

/// Connected vertex sets of the given size containing the root of the
/// `(d+1)`-regular tree, grown one neighbour at a time and deduplicated.
fn connected_sets_here(d: usize, size: usize) -> u128 {
    // Vertex = path of child indices; neighbours are parent and children.
    type V = Vec<usize>;
    let neighbours = |v: &V| -> Vec<V> {
        let mut out = Vec::new();
        if let Some((_, parent)) = v.split_last() {
            out.push(parent.to_vec());
        }
        let children = if v.is_empty() { d + 1 } else { d };
        for k in 0..children {
            let mut c = v.clone();
            c.push(k);
            out.push(c);
        }
        out
    };
    let mut layer: BTreeSet<BTreeSet<V>> = BTreeSet::new();
    layer.insert(BTreeSet::from([Vec::new()]));
    for _ in 1..size {
        let mut next = BTreeSet::new();
        for set in &layer {
            for v in set {
                for w in neighbours(v) {
                    if !set.contains(&w) {
                        let mut grown = set.clone();
                        grown.insert(w);
                        next.insert(grown);
                    }
                }
            }
        }
        layer = next;
    }
    layer.len() as u128
}

#[test]
fn criterion_4_entropy_and_peierls() {
    let mut c = Criterion::new(4, "connected-subset entropy bound and Peierls inequality");
    for d in [2usize, 3] {
        for size in 1..=6usize {
            let count = exact_connected_count(d, size).unwrap();
            let here = connected_sets_here(d, size);
            let bound = ((d + 1) as u128).pow(2 * (size as u32 - 1));
            c.check(
                format!("d={d} size={size}: {count} = {here} <= {bound}"),
                count == here && count <= bound,
            );
        }
    }
    c.cases(&entropy_suite().unwrap());
    let peierls = peierls_suite().unwrap();
    c.check(
        format!("{} Peierls cases on B_1", peierls.len()),
        !peierls.is_empty(),
    );
    c.cases(&peierls);
    c.within(Duration::from_secs(60));
    c.finish();
}

#[test]
fn criterion_5_qea_phase_fingerprint() {
    let mut c = Criterion::new(5, "q_EA near zero at beta 0.8, positive at beta 3");
    let opts = RunOptions::new(2000, SEED, 4).unwrap();
    let high = estimate_qea(&ModelSpec::potts(2, 2, 0.8).unwrap(), 12, &opts).unwrap();
    let z = high.sigmas_from(0.0);
    c.check(
        format!(
            "beta 0.8: {:.3e} +- {:.3e} ({z:.2} sigma from 0)",
            high.estimate, high.stderr
        ),
        z.abs() <= 3.0,
    );
    let low = estimate_qea(&ModelSpec::potts(2, 2, 3.0).unwrap(), 12, &opts).unwrap();
    let z = low.sigmas_from(0.0);
    c.check(
        format!(
            "beta 3: {:.4} +- {:.4} ({z:.1} sigma above 0)",
            low.estimate, low.stderr
        ),
        z >= 10.0,
    );
    c.within(Duration::from_secs(600));
    c.finish();
}

#[test]
fn criterion_6_overlap_gap() {
    let mut c = Criterion::new(6, "matched overlap exceeds mismatched, mismatched at 1/q");
    let spec = ModelSpec::potts(2, 2, 3.0).unwrap();
    let opts = RunOptions::new(1000, SEED, 4).unwrap();
    let s = estimate_overlap(&spec, &Spacing::default(), 14, 0, &opts).unwrap();
    let p = s.last();
    c.check(
        format!(
            "m={} plan {}: gap {:.4} +- {:.4} ({:.1} sigma)",
            p.m,
            p.plan_size,
            p.gap,
            p.gap_stderr,
            p.gap / p.gap_stderr
        ),
        p.matched > p.mismatched && p.gap >= 5.0 * p.gap_stderr,
    );
    let target = 1.0 / spec.q() as f64;
    let z = (p.mismatched - target) / p.mismatched_stderr;
    c.check(
        format!(
            "mismatched {:.4} +- {:.4} ({z:.2} sigma from 1/q)",
            p.mismatched, p.mismatched_stderr
        ),
        z.abs() <= 3.0,
    );
    c.within(Duration::from_secs(900));
    c.finish();
}

#[test]
fn criterion_7_bad_events() {
    let mut c = Criterion::new(7, "bad-event rate monotone in L, covariance decays");
    let spec = ModelSpec::potts(2, 2, 2.5).unwrap();
    let opts = RunOptions::new(2000, SEED, 4).unwrap();
    let bad = estimate_bad_rate(&spec, 6, 6, &Spacing::default(), &opts).unwrap();
    let rates: Vec<f64> = bad.by_truncation.iter().map(|t| t.rate).collect();
    c.check(
        format!("m_L for L=1..6: {rates:?}"),
        rates.len() == 6 && rates.windows(2).all(|w| w[1] >= w[0]),
    );

    let opts = RunOptions::new(5000, SEED, 4).unwrap();
    let cov = estimate_cov_decay(&spec, &[2, 4, 8, 16], 4, 32, &opts).unwrap();
    let points: Vec<String> = cov
        .points
        .iter()
        .map(|p| format!("{}:{:.2e}+-{:.1e}", p.distance, p.cov, p.stderr))
        .collect();
    c.check(
        format!("Cov decreasing over distances {}", points.join(" ")),
        cov.assessment.no_significant_increase && cov.assessment.first_exceeds_last,
    );
    let last = cov.points.last().unwrap();
    c.check(
        format!(
            "largest distance within 3 sigma of 0 ({:.2} sigma)",
            last.cov / last.stderr
        ),
        cov.assessment.last_within_noise && last.cov.abs() <= 3.0 * last.stderr,
    );
    c.within(Duration::from_secs(600));
    c.finish();
}

fn all_estimators_json(workers: usize) -> Vec<String> {
    let spec = ModelSpec::potts(3, 2, 2.0).unwrap();
    let opts = RunOptions::new(1000, SEED, workers).unwrap();
    let spacing = Spacing::default();
    vec![
        serde_json::to_string(&estimate_reconstruction(&spec, 1, 4, &opts).unwrap()).unwrap(),
        serde_json::to_string(&estimate_qea(&spec, 4, &opts).unwrap()).unwrap(),
        serde_json::to_string(&estimate_overlap(&spec, &spacing, 5, 3, &opts).unwrap()).unwrap(),
        serde_json::to_string(&estimate_bad_rate(&spec, 3, 3, &spacing, &opts).unwrap()).unwrap(),
        serde_json::to_string(&estimate_cov_decay(&spec, &[1, 2, 4], 2, 6, &opts).unwrap())
            .unwrap(),
    ]
}

#[test]
fn criterion_8_determinism() {
    let mut c = Criterion::new(
        8,
        "estimators byte-identical across reruns and worker counts",
    );
    let names = ["reconstruction", "qea", "overlap", "bad-rate", "cov-decay"];
    let first = all_estimators_json(1);
    let again = all_estimators_json(1);
    let wide = all_estimators_json(4);
    for (k, name) in names.iter().enumerate() {
        c.check(format!("{name} rerun"), first[k] == again[k]);
        c.check(format!("{name} workers 1 vs 4"), first[k] == wide[k]);
    }
    c.finish();
}
