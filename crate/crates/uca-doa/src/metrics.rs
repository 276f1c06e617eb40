//! Accuracy metrics, operation counts and the low-complexity condition.

use crate::array::DoA;
use crate::error::{invalid, Result};
use crate::estimators::{greedy_pairs, Method};

/// Squared error charged to a truth when a trial produced no estimates.
const MISSING_ALL: f64 = 90.0 * 90.0 + 180.0 * 180.0;

/// Result of one estimator run on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub truth: Vec<DoA>,
    pub estimates: Vec<DoA>,
    /// Seconds spent in the estimator, when recorded.
    pub wall_time: Option<f64>,
    pub flops: f64,
    pub iterations: usize,
}

/// Per-truth `(|Δθ|, |Δφ|)` after greedy nearest-neighbour pairing, or `None`
/// for truths left without an estimate.
pub fn paired_errors(truth: &[DoA], estimates: &[DoA]) -> Vec<Option<(f64, f64)>> {
    let mut out = vec![None; truth.len()];
    for (i, j) in greedy_pairs(truth, estimates) {
        let t = truth[i];
        let e = estimates[j];
        out[i] = Some((
            (t.elevation() - e.elevation()).abs(),
            crate::array::azimuth_distance(t.azimuth(), e.azimuth()),
        ));
    }
    out
}

/// Sum of squared errors over the truths of one trial. Unpaired truths are
/// charged their largest distance to any estimate.
pub fn trial_squared_error(o: &TrialOutcome) -> f64 {
    paired_errors(&o.truth, &o.estimates)
        .into_iter()
        .zip(&o.truth)
        .map(|(p, t)| match p {
            Some((a, b)) => a * a + b * b,
            None => o
                .estimates
                .iter()
                .map(|e| t.squared_error(e))
                .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))))
                .unwrap_or(MISSING_ALL),
        })
        .sum()
}

fn truth_count(outcomes: &[TrialOutcome]) -> Result<usize> {
    let n: usize = outcomes.iter().map(|o| o.truth.len()).sum();
    if n == 0 {
        return Err(invalid("no trials to aggregate"));
    }
    Ok(n)
}

/// Root-mean-square angular error in degrees.
pub fn rmse(outcomes: &[TrialOutcome]) -> Result<f64> {
    let n = truth_count(outcomes)?;
    Ok((outcomes.iter().map(trial_squared_error).sum::<f64>() / n as f64).sqrt())
}

/// Delta-method standard error of [`rmse`] across trials.
pub fn rmse_standard_error(outcomes: &[TrialOutcome]) -> Result<f64> {
    truth_count(outcomes)?;
    let per: Vec<f64> = outcomes
        .iter()
        .map(|o| trial_squared_error(o) / o.truth.len().max(1) as f64)
        .collect();
    let t = per.len() as f64;
    let mean = per.iter().sum::<f64>() / t;
    if per.len() < 2 || mean <= 0.0 {
        return Ok(0.0);
    }
    let var = per.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (t - 1.0);
    Ok((var / t).sqrt() / (2.0 * mean.sqrt()))
}

/// Fraction of sources whose paired error satisfies `|Δθ| + |Δφ| ≤ v_θ + v_φ`.
pub fn sdp(outcomes: &[TrialOutcome], step_theta: f64, step_phi: f64) -> Result<f64> {
    let n = truth_count(outcomes)?;
    let tol = step_theta + step_phi + 1e-9;
    let hits = outcomes
        .iter()
        .flat_map(|o| paired_errors(&o.truth, &o.estimates))
        .filter(|p| p.is_some_and(|(a, b)| a + b <= tol))
        .count();
    Ok(hits as f64 / n as f64)
}

/// Inputs of the per-iteration operation count.
#[derive(Debug, Clone, PartialEq)]
pub struct FlopParams {
    /// Bins used for focusing in the iteration.
    pub bins: usize,
    pub elements: usize,
    pub snapshots: usize,
    /// Sources detected in the previous iteration.
    pub previous_count: usize,
    /// `Σ R_θ R_φ` over the search regions, degrees².
    pub radii_sum: f64,
    pub step_theta: f64,
    pub step_phi: f64,
    pub grid_rows: usize,
    pub grid_cols: usize,
}

/// Floating-point operation estimate of one iteration of `method`.
pub fn flops_estimate(method: Method, p: &FlopParams) -> f64 {
    let m = p.elements as f64;
    let m2 = m * m;
    let z = p.bins as f64;
    let kf = p.snapshots as f64;
    let n = p.previous_count as f64;
    let regions = 16.0 * p.radii_sum / (p.step_theta * p.step_phi);
    let grid = 8.0 * m2 * (p.grid_rows * p.grid_cols) as f64;
    match method {
        Method::Ripf => 2.0 * z * m2 * (m + 8.0 * kf + regions),
        Method::CCsm | Method::CCsmSingle => 2.0 * z * m2 * (m + 8.0 * kf + 4.0 * n) + grid,
        Method::SeCsm => 2.0 * z * m2 * (m + 8.0 * kf + 20.0 * n) + grid,
        Method::RCsm | Method::I2dCsm => 2.0 * z * m2 * (m + 8.0 * kf + regions) + grid,
    }
}

/// Inputs of the low-complexity condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityParams {
    pub elements: usize,
    pub fft_size: usize,
    pub snapshots: usize,
    pub source_count: usize,
    pub avg_err_theta: f64,
    pub avg_err_phi: f64,
    pub bias: f64,
    pub step_theta: f64,
    pub step_phi: f64,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub max_iterations: usize,
    /// Expected iterations to convergence.
    pub convergence_iterations: f64,
}

/// Evaluation of the low-complexity condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityReport {
    pub satisfied: bool,
    /// `(rhs − lhs) / rhs`.
    pub margin: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// Upper bound on the number of focused bins.
    pub bin_bound: f64,
    /// Upper bound on `Σ R_θ R_φ`, degrees².
    pub radii_bound: f64,
}

/// Checks whether an iteration of the shrinking-region estimator costs fewer
/// operations than one iteration of the conventional coherent estimator.
pub fn appendix_b_check(p: &ComplexityParams) -> Result<ComplexityReport> {
    if p.max_iterations == 0 || !(p.convergence_iterations > 0.0) {
        return Err(invalid("iteration counts must be positive"));
    }
    if !(p.step_theta > 0.0 && p.step_phi > 0.0) {
        return Err(invalid("grid steps must be positive"));
    }
    let d = p.avg_err_theta + p.avg_err_phi;
    let ic = p.convergence_iterations;
    let i = p.max_iterations as f64;
    let z = p.fft_size as f64;
    let m = p.elements as f64;
    let kf = p.snapshots as f64;
    let n = p.source_count as f64;
    let bin_bound = 1.0 + d * (d * i + 2.0 * z) / (4.0 * ic * i);
    let q = 100f64.ln() / (2.0 * ic);
    let radii_bound = q * q * n * p.avg_err_theta * p.avg_err_phi * d * d * p.bias * (p.bias - 1.0);
    let lhs = bin_bound * (m + 8.0 * kf + 16.0 * radii_bound / (p.step_theta * p.step_phi));
    let rhs = z * (m + 4.0 * n + 8.0 * kf) + 4.0 * (p.grid_rows * p.grid_cols) as f64;
    Ok(ComplexityReport {
        satisfied: lhs < rhs,
        margin: (rhs - lhs) / rhs,
        lhs,
        rhs,
        bin_bound,
        radii_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(t: f64, p: f64) -> DoA {
        DoA::new(t, p).unwrap()
    }

    fn outcome(truth: Vec<DoA>, est: Vec<DoA>) -> TrialOutcome {
        TrialOutcome {
            truth,
            estimates: est,
            wall_time: None,
            flops: 0.0,
            iterations: 1,
        }
    }

    #[test]
    fn perfect_estimates() {
        let o = vec![outcome(vec![d(60.0, 150.0)], vec![d(60.0, 150.0)])];
        assert_eq!(rmse(&o).unwrap(), 0.0);
        assert_eq!(sdp(&o, 0.2, 0.2).unwrap(), 1.0);
    }

    #[test]
    fn errors_follow_pairing() {
        let o = vec![outcome(
            vec![d(60.0, 150.0), d(20.0, 45.0)],
            vec![d(20.3, 45.0), d(60.0, 151.0)],
        )];
        let want = ((0.09 + 1.0) / 2.0f64).sqrt();
        assert!((rmse(&o).unwrap() - want).abs() < 1e-12);
        assert_eq!(sdp(&o, 0.2, 0.2).unwrap(), 0.5);
        let wrap = vec![outcome(vec![d(10.0, 359.9)], vec![d(10.0, 0.1)])];
        assert!((rmse(&wrap).unwrap() - 0.2).abs() < 1e-9);
    }

    #[test]
    fn missing_estimates_are_penalised() {
        let o = vec![outcome(vec![d(10.0, 10.0), d(50.0, 200.0)], vec![d(10.0, 10.0)])];
        let far = d(50.0, 200.0).squared_error(&d(10.0, 10.0));
        assert!((rmse(&o).unwrap() - (far / 2.0).sqrt()).abs() < 1e-9);
        assert_eq!(sdp(&o, 1.0, 1.0).unwrap(), 0.5);
        assert!(rmse(&[]).is_err());
    }

    #[test]
    fn operation_count_examples() {
        let mut p = FlopParams {
            bins: 1,
            elements: 5,
            snapshots: 10,
            previous_count: 1,
            radii_sum: 0.0,
            step_theta: 1.0,
            step_phi: 1.0,
            grid_rows: 91,
            grid_cols: 360,
        };
        assert_eq!(flops_estimate(Method::Ripf, &p), 4250.0);
        p.bins = 32;
        assert_eq!(flops_estimate(Method::CCsm, &p), 6_694_400.0);
    }

    fn defaults() -> ComplexityParams {
        ComplexityParams {
            elements: 5,
            fft_size: 32,
            snapshots: 351,
            source_count: 1,
            avg_err_theta: 3.0,
            avg_err_phi: 3.0,
            bias: 3.0,
            step_theta: 0.2,
            step_phi: 0.2,
            grid_rows: 451,
            grid_cols: 1800,
            max_iterations: 15,
            convergence_iterations: 5.0,
        }
    }

    #[test]
    fn condition_holds_at_defaults() {
        let r = appendix_b_check(&defaults()).unwrap();
        assert!(r.satisfied);
        assert!(r.margin > 0.0 && r.margin < 1.0);
        assert!((r.bin_bound - (1.0 + 6.0 * 154.0 / 300.0)).abs() < 1e-12);
    }

    #[test]
    fn condition_fails_for_vanishing_steps_on_a_fixed_grid() {
        let mut p = defaults();
        p.step_theta = 1e-4;
        p.step_phi = 1e-4;
        assert!(!appendix_b_check(&p).unwrap().satisfied);
    }

    #[test]
    fn zero_sources_drop_the_region_term() {
        let mut p = defaults();
        p.source_count = 0;
        let r = appendix_b_check(&p).unwrap();
        assert_eq!(r.radii_bound, 0.0);
        assert!((r.lhs - r.bin_bound * (5.0 + 8.0 * 351.0)).abs() < 1e-9);
    }
}
