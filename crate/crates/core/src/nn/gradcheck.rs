/// Outcome of a central-difference gradient comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Compares `analytic` against central differences of `loss` around `x`.
///
/// The error of component `k` is `|a_k - n_k| / max(|a_k|, |n_k|, floor)`
/// where the floor is 1e-4 of the largest numerical gradient magnitude, so
/// components whose true gradient is zero are judged on absolute noise.
pub fn grad_check(
    x: &[f64],
    analytic: &[f64],
    h: f64,
    mut loss: impl FnMut(&[f64]) -> f64,
) -> GradCheckReport {
    assert_eq!(x.len(), analytic.len(), "gradient length mismatch");
    let mut probe = x.to_vec();
    let numeric: Vec<f64> = (0..x.len())
        .map(|k| {
            let orig = probe[k];
            probe[k] = orig + h;
            let plus = loss(&probe);
            probe[k] = orig - h;
            let minus = loss(&probe);
            probe[k] = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect();
    let floor = 1e-4 * numeric.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1e-300;
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    for (k, (&a, &n)) in analytic.iter().zip(&numeric).enumerate() {
        let err = (a - n).abs() / a.abs().max(n.abs()).max(floor);
        if err > report.max_relative_error || err.is_nan() {
            report = GradCheckReport {
                max_relative_error: if err.is_nan() { f64::INFINITY } else { err },
                worst_index: k,
                analytic: a,
                numeric: n,
            };
        }
    }
    report
}
