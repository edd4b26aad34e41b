//! Small, order-fixed statistics helpers.

/// Sample mean and standard error `s/√N` (`s` with the `N−1` divisor).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0) / n).sqrt())
}

/// Unbiased sample variance.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}

/// `q⁻¹ Σ_a Var(x_a)` over rows `x` (one row per sample, one column per
/// spin) with its delete-one jackknife standard error.
pub fn mean_variance_jackknife(rows: &[Vec<f64>]) -> (f64, f64) {
    let n = rows.len();
    let q = rows.first().map_or(0, Vec::len);
    if n < 3 || q == 0 {
        return (f64::NAN, f64::NAN);
    }
    let nf = n as f64;
    let mut s1 = vec![0.0; q];
    let mut s2 = vec![0.0; q];
    for row in rows {
        for a in 0..q {
            s1[a] += row[a];
            s2[a] += row[a] * row[a];
        }
    }
    let stat = |s1: &[f64], s2: &[f64], m: f64| -> f64 {
        (0..q)
            .map(|a| (s2[a] - s1[a] * s1[a] / m) / (m - 1.0))
            .sum::<f64>()
            / q as f64
    };
    let full = stat(&s1, &s2, nf);
    let mut loo = Vec::with_capacity(n);
    let mut t1 = vec![0.0; q];
    let mut t2 = vec![0.0; q];
    for row in rows {
        for a in 0..q {
            t1[a] = s1[a] - row[a];
            t2[a] = s2[a] - row[a] * row[a];
        }
        loo.push(stat(&t1, &t2, nf - 1.0));
    }
    let bar = loo.iter().sum::<f64>() / nf;
    let var = (nf - 1.0) / nf * loo.iter().map(|v| (v - bar) * (v - bar)).sum::<f64>();
    (full, var.sqrt())
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}
