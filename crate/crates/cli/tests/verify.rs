use starrad::quad::{allocate, ErrorBounds};
use starrad::Interval64;
use starrad_cli::verify::{check_allocation_sums, check_bound_dominance, Battery};

#[test]
fn fresh_battery_passes() {
    let checks = Battery::default().run();
    for c in &checks {
        assert!(c.passed, "{c}");
    }
    assert_eq!(checks.len(), 9);
}

/// Raw ceilings without the adjustment loop.
fn unadjusted(maxima: &[f64], total: usize) -> starrad::Result<Vec<usize>> {
    let roots: Vec<f64> = maxima.iter().map(|m| m.sqrt()).collect();
    let sum: f64 = roots.iter().sum();
    Ok(roots
        .iter()
        .map(|r| if sum > 0.0 { (total as f64 * r / sum).ceil() as usize } else { 0 })
        .map(|c| c.max(1))
        .collect())
}

#[test]
fn skipping_the_adjustment_is_caught() {
    assert!(check_allocation_sums(&|m, n| allocate(m, n), 500, 1).passed);
    let check = check_allocation_sums(&unadjusted, 500, 1);
    assert!(!check.passed, "{check}");
}

/// The refined bound with `M_j / c_j` in place of `M_j / c_j^2`.
fn squareless(maxima: &[f64], iv: Interval64, total: usize) -> starrad::Result<ErrorBounds<f64>> {
    let k = maxima.len() as f64;
    let n = total as f64;
    let peak = maxima.iter().copied().fold(0.0, f64::max);
    let w3 = iv.width().powi(3);
    let uniform = w3 / (12.0 * n * n) * peak;
    let roots: Vec<f64> = maxima.iter().map(|m| m.sqrt()).collect();
    let sum: f64 = roots.iter().sum();
    let refined = roots
        .iter()
        .zip(maxima)
        .map(|(r, m)| {
            let c = (n * r / sum).ceil();
            if c > 0.0 { m / c } else { 0.0 }
        })
        .sum::<f64>()
        * w3
        / (12.0 * k * k * k);
    Ok(ErrorBounds { uniform, refined })
}

#[test]
fn dropping_the_square_is_caught() {
    let check = check_bound_dominance(&squareless, 1000, 7);
    assert!(!check.passed, "{check}");
}
