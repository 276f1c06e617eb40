//! Iteration bookkeeping shared by the estimators: convergence measure,
//! frequency growth and robustness regions.

use crate::array::DoA;
use crate::error::{invalid, Result};
use crate::estimators::{EstimatorState, RipfParams};
use crate::spectrum::AngleRegion;

/// Greedy one-to-one pairing of `a` with `b` by smallest `l1_distance`.
/// Returns `(index into a, index into b)` pairs.
pub fn greedy_pairs(a: &[DoA], b: &[DoA]) -> Vec<(usize, usize)> {
    let mut cand: Vec<(f64, usize, usize)> = a
        .iter()
        .enumerate()
        .flat_map(|(i, x)| b.iter().enumerate().map(move |(j, y)| (x.l1_distance(y), i, j)))
        .collect();
    cand.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2)));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut out = Vec::new();
    for (_, i, j) in cand {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            out.push((i, j));
        }
    }
    out
}

/// Mean per-angle change between consecutive estimate sets, in degrees.
///
/// With equal counts the sets are aligned by greedy nearest-neighbour
/// pairing; otherwise every current estimate is compared with its nearest
/// previous one.
pub fn delta_bar(previous: &[DoA], current: &[DoA]) -> Result<f64> {
    if previous.is_empty() || current.is_empty() {
        return Err(invalid("estimate sets must be non-empty"));
    }
    let n = current.len() as f64;
    let total: f64 = if previous.len() == current.len() {
        greedy_pairs(previous, current)
            .into_iter()
            .map(|(i, j)| previous[i].l1_distance(&current[j]))
            .sum()
    } else {
        current
            .iter()
            .map(|c| previous.iter().map(|p| p.l1_distance(c)).fold(f64::INFINITY, f64::min))
            .sum()
    };
    Ok(total / (2.0 * n))
}

/// Number of bins to add after `state`, given `fft_size` bins in total.
pub fn frequency_increment(state: &EstimatorState, fft_size: usize, params: &RipfParams) -> usize {
    let used = state.focus_bins.len().min(fft_size);
    let mu = fft_size as f64 / params.max_iterations as f64 + (params.avg_err_theta + params.avg_err_phi) / 2.0;
    let want = (mu * state.normalized_delta - 1e-9).ceil().max(0.0) as usize;
    want.min(fft_size - used)
}

/// Half-widths `(R_θ, R_φ)` of the search region around `estimate`.
pub fn robustness_radii(estimate: &DoA, normalized_delta: f64, iteration: usize, params: &RipfParams) -> (f64, f64) {
    let t = estimate.elevation().to_radians();
    let scale = normalized_delta / iteration.max(1) as f64;
    (
        params.avg_err_theta * (params.bias - t.cos()) * scale,
        params.avg_err_phi * (params.bias - t.sin()) * scale,
    )
}

/// Region spanned by the radii around `estimate`, with elevation clipped to
/// `[0, 90]` and the azimuth interval left unwrapped.
pub fn robustness_region(estimate: &DoA, radii: (f64, f64)) -> AngleRegion {
    let (rt, rp) = (radii.0.abs(), radii.1.abs());
    let t = estimate.elevation();
    let p = estimate.azimuth();
    AngleRegion {
        elevation: ((t - rt).max(0.0), (t + rt).min(90.0)),
        azimuth: (p - rp, p + rp),
    }
}
