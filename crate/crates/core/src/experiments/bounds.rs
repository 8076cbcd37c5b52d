//! Executable forms of the convergence inequalities, evaluated on the
//! disclosed side from off-norm series and eigenvalue gaps.

use std::f64::consts::SQRT_2;

use super::ExperimentError;

/// `7 + 2√2`, the per-rotation error constant of the linear-rate bound.
pub const ROTATION_ERROR_CONSTANT: f64 = 7.0 + 2.0 * SQRT_2;

fn decay_exponent(n_t: usize) -> f64 {
    ((n_t - 1) * (n_t - 2)) as f64 / 2.0
}

/// `ρ = (1 − 2^{−(n−1)(n−2)/2})^{1/2}`.
pub fn linear_rate_coefficient(n_t: usize) -> Result<f64, ExperimentError> {
    if n_t < 3 {
        return Err(ExperimentError::Unsupported(format!("linear rate needs n_t >= 3, got {n_t}")));
    }
    Ok((1.0 - 2f64.powf(-decay_exponent(n_t))).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SufficiencyMode {
    /// Tabulated coefficients for `n_t ∈ {3, 4, 5, 6, 8}`.
    #[default]
    Table,
    /// Largest `a` with `(7+2√2)(n²−n)a² ≤ 2^{−(n−1)(n−2)/2}`.
    Formula,
}

/// Coefficient `a` such that `η = a·P_k/‖G‖` keeps the linear rate.
pub fn sufficiency_coefficient(n_t: usize, mode: SufficiencyMode) -> Result<f64, ExperimentError> {
    match mode {
        SufficiencyMode::Table => match n_t {
            3 => Ok(8e-2),
            4 => Ok(2e-2),
            5 => Ok(7e-3),
            6 => Ok(1e-3),
            8 => Ok(2e-5),
            _ => Err(ExperimentError::Unsupported(format!(
                "no tabulated sufficiency coefficient for n_t = {n_t}"
            ))),
        },
        SufficiencyMode::Formula => {
            if n_t < 3 {
                return Err(ExperimentError::Unsupported(format!("need n_t >= 3, got {n_t}")));
            }
            let n = n_t as f64;
            Ok((2f64.powf(-decay_exponent(n_t)) / (ROTATION_ERROR_CONSTANT * (n * n - n))).sqrt())
        }
    }
}

pub fn eta_sufficiency(n_t: usize, p_k: f64, norm_g: f64, mode: SufficiencyMode) -> Result<f64, ExperimentError> {
    Ok(sufficiency_coefficient(n_t, mode)? * p_k / norm_g)
}

/// Right-hand side of `P²_{k+m} ≤ P²_k(1 − 2^{−(n−2)(n−1)/2}) + (n²−n)(7+2√2)η²‖G‖²`.
pub fn linear_bound_rhs(n_t: usize, p_k: f64, eta: f64, norm_g: f64) -> f64 {
    let n = n_t as f64;
    p_k * p_k * (1.0 - 2f64.powf(-decay_exponent(n_t))) + (n * n - n) * ROTATION_ERROR_CONSTANT * eta * eta * norm_g * norm_g
}

/// Fixed point `P² = (n²−n)(7+2√2)η²‖G‖²·2^{(n−1)(n−2)/2}` of the
/// linear-rate recursion: below it the bound no longer forces a decrease.
pub fn linear_bound_fixed_point(n_t: usize, eta: f64, norm_g: f64) -> f64 {
    let n = n_t as f64;
    (n * n - n) * ROTATION_ERROR_CONSTANT * eta * eta * norm_g * norm_g * 2f64.powf(decay_exponent(n_t))
}

/// Explicit plateau term `2(2 n_t n_r − n_r² − n_r)·η²‖G‖²/δ`.
pub fn plateau_bound(n_t: usize, n_r: usize, eta: f64, norm_g: f64, delta: f64) -> f64 {
    let (nt, nr) = (n_t as f64, n_r as f64);
    2.0 * (2.0 * nt * nr - nr * nr - nr) * eta * eta * norm_g * norm_g / delta
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LinearCheck {
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LinearBoundReport {
    pub checks: Vec<LinearCheck>,
    pub violations: usize,
}

/// Evaluates the linear-rate inequality on an off-norm series `P_0..P_K`.
///
/// `etas[j]` is the accuracy used in phase `j + 1`; each window uses the
/// largest accuracy it contains. With `aligned`, only windows starting at
/// whole pivot cycles are checked; otherwise every phase offset is.
/// `skip_below` drops windows whose starting `P_k²` is under that level.
pub fn check_linear_bound(
    off_norms: &[f64],
    etas: &[f64],
    n_t: usize,
    norm_g: f64,
    aligned: bool,
    skip_below: f64,
) -> Result<LinearBoundReport, ExperimentError> {
    let m = n_t * (n_t - 1) / 2;
    if off_norms.len() < m + 1 || etas.len() + 1 < off_norms.len() {
        return Err(ExperimentError::Insufficient(format!(
            "trace of {} points is shorter than one cycle of {m} phases",
            off_norms.len()
        )));
    }
    let step = if aligned { m } else { 1 };
    let mut checks = Vec::new();
    let mut k = 0;
    while k + m < off_norms.len() {
        let p_k = off_norms[k];
        if p_k * p_k >= skip_below {
            let eta = etas[k..k + m].iter().copied().fold(0.0, f64::max);
            let lhs = off_norms[k + m].powi(2);
            let rhs = linear_bound_rhs(n_t, p_k, eta, norm_g);
            checks.push(LinearCheck {
                k,
                lhs,
                rhs,
                violated: lhs > rhs,
            });
        }
        k += step;
    }
    let violations = checks.iter().filter(|c| c.violated).count();
    Ok(LinearBoundReport { checks, violations })
}

/// Least-squares slope of `y` on `x`.
pub fn lsq_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// Fits `log P_{k+lag}` against `log P_k` over the pairs with
/// `P_k ≤ upper` and `P_{k+lag} ≥ floor`; at least three pairs are needed.
pub fn estimate_convergence_order(series: &[f64], lag: usize, upper: f64, floor: f64) -> Result<f64, ExperimentError> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for k in 0..series.len().saturating_sub(lag) {
        let (a, b) = (series[k], series[k + lag]);
        if a <= upper && b >= floor && a > 0.0 && b > 0.0 {
            x.push(a.ln());
            y.push(b.ln());
        }
    }
    if x.len() < 3 {
        return Err(ExperimentError::Insufficient(format!(
            "only {} pre-plateau pairs in the series",
            x.len()
        )));
    }
    lsq_slope(&x, &y).ok_or_else(|| ExperimentError::Insufficient("degenerate abscissae".into()))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PlateauSample {
    pub eta: f64,
    pub interference: f64,
    pub bound: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PlateauReport {
    /// Slope of log median interference against log η.
    pub slope: f64,
    /// `(η, violations, runs used, median interference)` per grid point.
    pub per_eta: Vec<(f64, usize, usize, f64)>,
    pub excluded: usize,
    pub slack: f64,
}

/// Fits the η-law of the converged interference and counts violations of
/// `slack × bound`. Non-converged runs are excluded and counted.
pub fn check_interference_plateau(samples: &[PlateauSample], slack: f64) -> Result<PlateauReport, ExperimentError> {
    let mut etas: Vec<f64> = samples.iter().map(|s| s.eta).collect();
    etas.sort_by(f64::total_cmp);
    etas.dedup();
    if etas.len() < 2 {
        return Err(ExperimentError::Insufficient("need at least two distinct eta values".into()));
    }
    let excluded = samples.iter().filter(|s| !s.converged).count();
    let mut per_eta = Vec::new();
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for eta in etas {
        let used: Vec<&PlateauSample> = samples.iter().filter(|s| s.eta == eta && s.converged).collect();
        if used.is_empty() {
            continue;
        }
        let violations = used.iter().filter(|s| s.interference > slack * s.bound).count();
        let med = median(&used.iter().map(|s| s.interference).collect::<Vec<_>>());
        per_eta.push((eta, violations, used.len(), med));
        lx.push(eta.ln());
        ly.push(med.ln());
    }
    let slope = lsq_slope(&lx, &ly).ok_or_else(|| ExperimentError::Insufficient("too few converged grid points".into()))?;
    Ok(PlateauReport {
        slope,
        per_eta,
        excluded,
        slack,
    })
}

/// Median of a non-empty sample (mean of the two central values for even
/// sizes); NaN for an empty one.
pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Linear-interpolation quantile.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_coefficient_values() {
        assert!((linear_rate_coefficient(3).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((linear_rate_coefficient(4).unwrap() - 0.935414346693485).abs() < 1e-12);
        assert!(linear_rate_coefficient(2).is_err());
        let mut prev = 0.0;
        for n in 3..20 {
            let r = linear_rate_coefficient(n).unwrap();
            assert!(r >= prev && r < 1.0 + 1e-15);
            prev = r;
        }
    }

    #[test]
    fn sufficiency_table_and_scaling() {
        assert_eq!(eta_sufficiency(3, 1.0, 1.0, SufficiencyMode::Table).unwrap(), 0.08);
        assert_eq!(eta_sufficiency(8, 1.0, 1.0, SufficiencyMode::Table).unwrap(), 2e-5);
        assert_eq!(eta_sufficiency(5, 2.0, 1.0, SufficiencyMode::Table).unwrap(), 2.0 * 7e-3);
        assert!(eta_sufficiency(7, 1.0, 1.0, SufficiencyMode::Table).is_err());
    }

    #[test]
    fn tabulated_coefficients_are_within_the_formula() {
        // each tabulated a must keep the linear term from exceeding the decay
        for n in [3, 4, 5, 6, 8] {
            let a = sufficiency_coefficient(n, SufficiencyMode::Table).unwrap();
            let f = sufficiency_coefficient(n, SufficiencyMode::Formula).unwrap();
            assert!(a <= f, "n={n}: table {a} vs formula {f}");
            let nn = n as f64;
            let contraction = 1.0 - 2f64.powf(-(((n - 1) * (n - 2)) as f64) / 2.0) + ROTATION_ERROR_CONSTANT * a * a * (nn * nn - nn);
            assert!(contraction <= 1.0);
        }
    }

    #[test]
    fn linear_bound_on_diagonal_trace() {
        let p = vec![0.0; 7];
        let etas = vec![1e-3; 6];
        let r = check_linear_bound(&p, &etas, 3, 1.0, true, 0.0).unwrap();
        assert_eq!(r.violations, 0);
        assert_eq!(r.checks.len(), 2);
    }

    #[test]
    fn linear_bound_flags_inflated_trace() {
        let p = vec![0.5, 0.4, 0.3, 0.6];
        let r = check_linear_bound(&p, &[1e-6; 3], 3, 1.0, false, 0.0).unwrap();
        assert_eq!(r.violations, 1);
        assert!(check_linear_bound(&p[..3], &[1e-6; 2], 3, 1.0, false, 0.0).is_err());
    }

    #[test]
    fn order_of_synthetic_sequences() {
        let mut quad = vec![0.5];
        for _ in 0..5 {
            let last = *quad.last().unwrap();
            quad.push(last * last);
        }
        let s = estimate_convergence_order(&quad, 1, 1.0, 0.0).unwrap();
        assert!((s - 2.0).abs() < 1e-12);

        let lin: Vec<f64> = (0..8).map(|i| 0.7f64.powi(i)).collect();
        let s = estimate_convergence_order(&lin, 1, 1.0, 0.0).unwrap();
        assert!((s - 1.0).abs() < 1e-12);

        assert!(estimate_convergence_order(&[0.1, 0.01], 1, 1.0, 0.0).is_err());
    }

    #[test]
    fn plateau_slope_of_exact_square_law() {
        let samples: Vec<PlateauSample> = [1e-1, 1e-2, 1e-4]
            .iter()
            .flat_map(|&eta| {
                (0..3).map(move |i| PlateauSample {
                    eta,
                    interference: (1.0 + 0.1 * i as f64) * eta * eta,
                    bound: 2.0 * eta * eta,
                    converged: true,
                })
            })
            .collect();
        let r = check_interference_plateau(&samples, 10.0).unwrap();
        assert!((r.slope - 2.0).abs() < 1e-12);
        assert!(r.per_eta.iter().all(|e| e.1 == 0));
    }

    #[test]
    fn quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.25), 2.0);
        assert!(median(&[]).is_nan());
    }
}
