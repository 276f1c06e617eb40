//! Rotational signal-subspace focusing.
//!
//! Focusing angle sets are stored row by row as equispaced azimuth arcs plus
//! isolated points. Long arcs are summed in closed form: with the
//! Jacobi-Anger expansion the correlation summand over an arc becomes a short
//! Bessel series times a geometric sum, exact up to a truncation far below
//! double precision.

use std::collections::BTreeMap;

use crate::array::{wrap_azimuth, ArrayGeometry, DoA};
use crate::error::{invalid, Error, Result};
use crate::par::{map_indexed, worker_count, Execution};
use crate::signal::NarrowbandStack;
use crate::subspace::{hermitize, CovarianceMatrix};
use crate::{CMatrix, C64};

const KEY_SCALE: f64 = 1e9;
const EPS: f64 = 1e-9;
/// Arcs shorter than this are summed point by point.
const SERIES_MIN_POINTS: usize = 24;

fn key(x: f64) -> i64 {
    (x * KEY_SCALE).round() as i64
}

/// `count` azimuths `start + k·step`, degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Arc {
    start: f64,
    step: f64,
    count: usize,
}

impl Arc {
    fn at(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    fn closes(&self) -> bool {
        self.count as f64 * self.step >= 360.0 - EPS
    }

    fn contains(&self, az: f64) -> bool {
        let q = (az - self.start).rem_euclid(360.0) / self.step;
        let k = q.round();
        if (q - k).abs() * self.step >= EPS {
            return false;
        }
        (k as usize) < self.count || (self.closes() && k * self.step >= 360.0 - EPS)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Row {
    elevation: f64,
    arcs: Vec<Arc>,
    points: Vec<f64>,
}

impl Row {
    fn covered(&self, az: f64) -> bool {
        self.arcs.iter().any(|a| a.contains(az)) || self.points.iter().any(|&p| key(wrap_azimuth(p)) == key(wrap_azimuth(az)))
    }

    fn insert_arc(&mut self, arc: Arc) {
        self.arcs.retain(|a| !(0..a.count).all(|k| arc.contains(a.at(k))));
        self.points.retain(|&p| !arc.contains(p));
        let mut run: Option<usize> = None;
        for k in 0..=arc.count {
            let free = k < arc.count && !self.arcs.iter().any(|a| a.contains(arc.at(k)));
            match (free, run) {
                (true, None) => run = Some(k),
                (false, Some(s)) => {
                    self.arcs.push(Arc {
                        start: arc.at(s),
                        step: arc.step,
                        count: k - s,
                    });
                    run = None;
                }
                _ => {}
            }
        }
    }
}

/// Set of directions used to build focusing matrices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FocusingAngleSet {
    rows: BTreeMap<i64, Row>,
}

impl FocusingAngleSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Set holding `angles` with duplicates removed.
    pub fn from_angles(angles: &[DoA]) -> Self {
        let mut s = Self::new();
        for d in angles {
            s.insert(*d);
        }
        s
    }

    fn row(&mut self, elevation: f64) -> &mut Row {
        self.rows.entry(key(elevation)).or_insert_with(|| Row {
            elevation,
            arcs: Vec::new(),
            points: Vec::new(),
        })
    }

    /// Adds one direction.
    pub fn insert(&mut self, doa: DoA) {
        let row = self.row(doa.elevation());
        let az = doa.azimuth();
        if !row.covered(az) {
            row.points.push(az);
        }
    }

    /// Number of distinct directions.
    pub fn len(&self) -> usize {
        self.rows
            .values()
            .map(|r| r.points.len() + r.arcs.iter().map(|a| a.count).sum::<usize>())
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All directions, expanded.
    pub fn angles(&self) -> Vec<DoA> {
        let mut out = Vec::with_capacity(self.len());
        for r in self.rows.values() {
            for a in &r.arcs {
                out.extend((0..a.count).map(|k| DoA::clamped(r.elevation, a.at(k))));
            }
            out.extend(r.points.iter().map(|&p| DoA::clamped(r.elevation, p)));
        }
        out
    }
}

/// Samples every region with elevation step `step_theta` and azimuth step
/// `step_phi`, each anchored at the interval's lower bound and including the
/// upper bound when it falls on the grid.
///
/// Regions are `(elevation interval, unwrapped azimuth interval)` in degrees.
pub fn sample_focusing_angles(
    regions: &[((f64, f64), (f64, f64))],
    step_theta: f64,
    step_phi: f64,
) -> Result<FocusingAngleSet> {
    if !(step_theta > 0.0 && step_phi > 0.0 && step_theta.is_finite() && step_phi.is_finite()) {
        return Err(invalid("focusing steps must be positive"));
    }
    let per_circle = 360.0 / step_phi;
    let mut set = FocusingAngleSet::new();
    for &((tl, th), (pl, ph)) in regions {
        if !(tl <= th && pl <= ph) {
            return Err(invalid("region bounds must be ordered"));
        }
        let nt = ((th - tl) / step_theta + EPS).floor() as usize + 1;
        let np = if ph - pl >= 360.0 - EPS {
            (per_circle - EPS).ceil() as usize
        } else {
            ((ph - pl) / step_phi + EPS).floor() as usize + 1
        };
        let arc = Arc {
            start: wrap_azimuth(pl),
            step: step_phi,
            count: np,
        };
        // an arc that overshoots the circle without closing it would revisit
        // azimuths off its own lattice, so it is kept as points
        let lattice_arc = np as f64 * step_phi < 360.0 - EPS || (per_circle - per_circle.round()).abs() < 1e-9 * per_circle;
        for i in 0..nt {
            let t = (tl + i as f64 * step_theta).clamp(0.0, 90.0);
            if lattice_arc {
                set.row(t).insert_arc(arc);
            } else {
                for j in 0..np {
                    set.insert(DoA::clamped(t, arc.at(j)));
                }
            }
        }
    }
    Ok(set)
}

/// `J_0(x), …, J_{n}(x)` for `x ≥ 0` by downward recurrence.
fn bessel_j(x: f64, out: &mut [f64]) {
    out.fill(0.0);
    if x < 1e-300 {
        out[0] = 1.0;
        return;
    }
    let n = out.len() - 1;
    let top = n.max(x.ceil() as usize) + 20 + (40.0 * n as f64).sqrt() as usize;
    let top = top + top % 2;
    let (mut next, mut cur, mut norm) = (0.0f64, 1e-30f64, 0.0f64);
    for k in (1..=top).rev() {
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        let idx = k - 1;
        if idx <= n {
            out[idx] = cur;
        }
        if idx > 0 && idx % 2 == 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    norm += cur;
    for v in out.iter_mut() {
        *v /= norm;
    }
}

/// `Σ_{l<L} e^{-i n h l}` for `n = 0..=order`.
fn geometric_sums(h: f64, count: usize, order: usize) -> Vec<C64> {
    (0..=order)
        .map(|n| {
            let t = n as f64 * h;
            let half = (t / 2.0).sin();
            if half.abs() < 1e-6 {
                (0..count).map(|l| C64::from_polar(1.0, -t * l as f64)).sum()
            } else {
                let mag = (t * count as f64 / 2.0).sin() / half;
                C64::from_polar(mag, -t * (count as f64 - 1.0) / 2.0)
            }
        })
        .collect()
}

/// Unitary matrix mapping the manifold at one frequency onto the reference.
#[derive(Debug, Clone, PartialEq)]
pub struct FocusingMatrix {
    pub matrix: CMatrix,
    pub frequency: f64,
}

/// Correlation `Σ_p a(f, p) a(f0, p)^H` for several frequencies at once.
pub fn focusing_correlations(
    geometry: &ArrayGeometry,
    frequencies: &[f64],
    reference: f64,
    set: &FocusingAngleSet,
) -> Result<Vec<CMatrix>> {
    if set.is_empty() {
        return Err(invalid("focusing angle set is empty"));
    }
    let m = geometry.element_count();
    let mut acc = Correlator::new(geometry, frequencies, reference);
    let mut proj = vec![0.0; m];
    for row in set.rows.values() {
        for a in &row.arcs {
            if a.count >= SERIES_MIN_POINTS {
                acc.add_arc(row.elevation, a);
            } else {
                for k in 0..a.count {
                    geometry.projections(&DoA::clamped(row.elevation, a.at(k)), &mut proj);
                    acc.add(&proj);
                }
            }
        }
        for &p in &row.points {
            geometry.projections(&DoA::clamped(row.elevation, p), &mut proj);
            acc.add(&proj);
        }
    }
    Ok(acc.finish())
}

struct Correlator<'a> {
    geometry: &'a ArrayGeometry,
    scales: Vec<f64>,
    reference_scale: f64,
    sums: Vec<Vec<C64>>,
    a: Vec<C64>,
    a0: Vec<C64>,
}

impl<'a> Correlator<'a> {
    fn new(geometry: &'a ArrayGeometry, frequencies: &[f64], reference: f64) -> Self {
        let m = geometry.element_count();
        Correlator {
            geometry,
            scales: frequencies.iter().map(|&f| geometry.phase_scale(f)).collect(),
            reference_scale: geometry.phase_scale(reference),
            sums: vec![vec![C64::new(0.0, 0.0); m * m]; frequencies.len()],
            a: vec![C64::new(0.0, 0.0); m],
            a0: vec![C64::new(0.0, 0.0); m],
        }
    }

    fn add(&mut self, proj: &[f64]) {
        let m = self.geometry.element_count();
        for (o, &p) in self.a0.iter_mut().zip(proj) {
            *o = C64::from_polar(1.0, -self.reference_scale * p);
        }
        for (s, &k) in self.sums.iter_mut().zip(&self.scales) {
            for (o, &p) in self.a.iter_mut().zip(proj) {
                *o = C64::from_polar(1.0, k * p);
            }
            for r in 0..m {
                let ar = self.a[r];
                let row = &mut s[r * m..(r + 1) * m];
                for (x, b) in row.iter_mut().zip(&self.a0) {
                    *x += ar * b;
                }
            }
        }
    }

    /// Adds a whole arc. The phase difference between elements `r` and `c` is
    /// `x cos(β − φ)` with `x, β` from `κ e^{iα_r} − κ0 e^{iα_c}`; `x` depends
    /// only on `c − r`.
    fn add_arc(&mut self, elevation: f64, arc: &Arc) {
        let m = self.geometry.element_count();
        let alphas = self.geometry.element_angles();
        let s = elevation.to_radians().sin();
        let k0 = self.reference_scale;
        let kmax = self.scales.iter().cloned().fold(0.0, f64::max);
        let xmax = s * (kmax + k0);
        let order = (xmax + 8.0 * xmax.cbrt()).ceil() as usize + 20;
        let h = arc.step.to_radians();
        let phi0 = arc.start.to_radians();
        let g = geometric_sums(h, arc.count, order);
        let len = arc.count as f64;
        // a closed circle leaves only orders that are multiples of its length
        let orders: Vec<usize> = (1..=order).filter(|&n| g[n].norm() > 1e-12 * len).collect();
        let mut jn = vec![0.0; order + 1];
        let mut bessel = vec![0.0; m * (order + 1)];
        let mut base = vec![0.0; m];
        for (sum, &k) in self.sums.iter_mut().zip(&self.scales) {
            for d in 0..m {
                let delta = alphas[d] - alphas[0];
                let w = C64::new(k, 0.0) - C64::from_polar(k0, delta);
                bessel_j(s * w.norm(), &mut jn);
                bessel[d * (order + 1)..(d + 1) * (order + 1)].copy_from_slice(&jn);
                base[d] = w.arg();
            }
            for r in 0..m {
                for c in 0..m {
                    let d = (c + m - r) % m;
                    let jd = &bessel[d * (order + 1)..(d + 1) * (order + 1)];
                    let psi = alphas[r] + base[d] - phi0;
                    let (mut re, mut im) = (jd[0] * len, 0.0);
                    let rot = C64::from_polar(1.0, psi);
                    let mut e = rot;
                    let mut last = 1;
                    for &n in &orders {
                        if n == last {
                            last += 1;
                        } else {
                            e = C64::from_polar(1.0, n as f64 * psi);
                            last = n + 1;
                        }
                        let t = 2.0 * jd[n] * (e * g[n]).re;
                        e *= rot;
                        match n % 4 {
                            0 => re += t,
                            1 => im += t,
                            2 => re -= t,
                            _ => im -= t,
                        }
                    }
                    sum[r * m + c] += C64::new(re, im);
                }
            }
        }
    }

    fn finish(self) -> Vec<CMatrix> {
        let m = self.geometry.element_count();
        self.sums
            .into_iter()
            .map(|s| CMatrix::from_row_slice(m, m, &s))
            .collect()
    }
}

/// Focusing matrix from the correlation `A(f) A(f0)^H`.
pub fn rss_from_correlation(correlation: &CMatrix, frequency: f64) -> Result<FocusingMatrix> {
    if !correlation.is_square() {
        return Err(invalid("correlation must be square"));
    }
    let m = correlation.nrows();
    let svd = faer::Mat::from_fn(m, m, |i, j| correlation[(i, j)])
        .svd()
        .map_err(|_| invalid("svd did not converge"))?;
    let (u, v) = (svd.U(), svd.V());
    if (0..m).all(|k| svd.S()[k].re < 1e-12) {
        return Err(Error::DegenerateFocusing { frequency });
    }
    let matrix = CMatrix::from_fn(m, m, |i, j| (0..m).map(|k| v[(i, k)] * u[(j, k)].conj()).sum());
    Ok(FocusingMatrix { matrix, frequency })
}

/// Unitary `B` minimising `‖A(f0) − B A(f)‖_F`.
pub fn rss_focusing_matrix(a_f: &CMatrix, a_ref: &CMatrix, frequency: f64) -> Result<FocusingMatrix> {
    if a_f.shape() != a_ref.shape() || a_f.ncols() == 0 {
        return Err(invalid("manifold matrices must share a non-empty shape"));
    }
    rss_from_correlation(&(a_f * a_ref.adjoint()), frequency)
}

/// Focusing matrices for bins `bins` built from `set`.
pub fn focusing_matrices(
    geometry: &ArrayGeometry,
    stack: &NarrowbandStack,
    bins: &[usize],
    reference: f64,
    set: &FocusingAngleSet,
    exec: Execution,
) -> Result<Vec<(usize, Result<FocusingMatrix>)>> {
    let freqs: Vec<f64> = bins.iter().map(|&z| stack.frequencies()[z]).collect();
    let per = freqs.len().div_ceil(worker_count(exec)).max(1);
    let parts = map_indexed(exec, freqs.len().div_ceil(per), |i| {
        let lo = i * per;
        focusing_correlations(geometry, &freqs[lo..(lo + per).min(freqs.len())], reference, set)
    });
    let mut correlations = Vec::with_capacity(freqs.len());
    for p in parts {
        correlations.extend(p?);
    }
    let mut out = Vec::with_capacity(bins.len());
    for ((&z, &f), c) in bins.iter().zip(&freqs).zip(&correlations) {
        out.push((z, rss_from_correlation(c, f)));
    }
    Ok(out)
}

/// `1/(K_f Z²) Σ_z B_z X_z X_z^H B_z^H` over the listed bins.
pub fn focused_covariance(stack: &NarrowbandStack, focusing: &[(usize, FocusingMatrix)]) -> Result<CovarianceMatrix> {
    if focusing.is_empty() {
        return Err(invalid("no focused bins"));
    }
    let m = stack.element_count();
    let z = stack.bin_count() as f64;
    let scale = 1.0 / (stack.snapshots_per_bin() as f64 * z * z);
    let mut r = CMatrix::zeros(m, m);
    for (bin, b) in focusing {
        if *bin >= stack.bin_count() || b.matrix.shape() != (m, m) {
            return Err(invalid(format!("bin {bin} or focusing matrix shape is invalid")));
        }
        r += &b.matrix * stack.outer_product(*bin) * b.matrix.adjoint();
    }
    r *= C64::new(scale, 0.0);
    hermitize(&mut r);
    CovarianceMatrix::new(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::manifold_matrix;

    fn geom() -> ArrayGeometry {
        ArrayGeometry::with_max_radius(5, 34.5e9, 3e8).unwrap()
    }

    fn brute(set: &FocusingAngleSet, f: f64) -> CMatrix {
        let g = geom();
        let angles = set.angles();
        let a = manifold_matrix(&g, f, &angles).unwrap();
        let a0 = manifold_matrix(&g, 30e9, &angles).unwrap();
        a * a0.adjoint()
    }

    #[test]
    fn samples_inclusive_grid() {
        let s = sample_focusing_angles(&[((58.0, 62.0), (150.0, 150.0))], 1.0, 1.0).unwrap();
        assert_eq!(s.len(), 5);
        let two = sample_focusing_angles(
            &[((58.0, 62.0), (150.0, 150.0)), ((60.0, 64.0), (150.0, 150.0))],
            1.0,
            1.0,
        )
        .unwrap();
        assert_eq!(two.len(), 7);
    }

    #[test]
    fn bessel_values() {
        let mut j = vec![0.0; 6];
        bessel_j(1.0, &mut j);
        assert!((j[0] - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((j[1] - 0.440_050_585_744_933_5).abs() < 1e-14);
        bessel_j(5.0, &mut j);
        assert!((j[0] + 0.177_596_771_314_338_3).abs() < 1e-14);
        assert!((j[2] - 0.046_565_116_277_752_2).abs() < 1e-14);
        bessel_j(0.0, &mut j);
        assert_eq!(j, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn overlapping_arcs_are_deduplicated() {
        let regions = [((30.0, 30.0), (10.0, 60.0)), ((30.0, 30.0), (40.0, 100.0)), ((30.0, 30.0), (-400.0, 400.0))];
        let s = sample_focusing_angles(&regions[..2], 1.0, 1.0).unwrap();
        assert_eq!(s.len(), 91);
        let s = sample_focusing_angles(&regions, 1.0, 1.0).unwrap();
        assert_eq!(s.len(), 360);
        let mut with_points = FocusingAngleSet::from_angles(&[DoA::new(30.0, 20.0).unwrap(), DoA::new(30.0, 20.5).unwrap()]);
        with_points.row(30.0).insert_arc(Arc { start: 0.0, step: 1.0, count: 30 });
        assert_eq!(with_points.len(), 31);
    }

    #[test]
    fn arc_series_matches_direct_sums() {
        let regions = [((10.0, 30.0), (100.0, 170.0)), ((40.0, 41.0), (-30.0, 20.0)), ((85.0, 90.0), (0.0, 359.0))];
        let s = sample_focusing_angles(&regions, 0.7, 0.9).unwrap();
        let fs = [30e9, 25.5e9, 34.5e9];
        let got = focusing_correlations(&geom(), &fs, 30e9, &s).unwrap();
        for (c, &f) in got.iter().zip(&fs) {
            let want = brute(&s, f);
            assert!((c - &want).norm() < 1e-10 * want.norm(), "f = {f}");
        }
    }

    #[test]
    fn full_circle_rows_are_summed_exactly() {
        let regions = [((0.0, 90.0), (-1125.0, 1125.0)), ((30.0, 31.0), (10.0, 12.0))];
        let s = sample_focusing_angles(&regions, 2.5, 2.5).unwrap();
        assert_eq!(s.len(), 37 * 144);
        let fs = [30e9, 25.5e9, 34.4e9];
        let got = focusing_correlations(&geom(), &fs, 30e9, &s).unwrap();
        for (c, &f) in got.iter().zip(&fs) {
            let want = brute(&s, f);
            assert!((c - &want).norm() < 1e-10 * want.norm(), "f = {f}");
        }
    }

    #[test]
    fn rss_is_unitary_and_focuses_exact_sets() {
        let g = geom();
        let angles = [DoA::new(60.0, 150.0).unwrap()];
        let a = manifold_matrix(&g, 33e9, &angles).unwrap();
        let a0 = manifold_matrix(&g, 30e9, &angles).unwrap();
        let b = rss_focusing_matrix(&a, &a0, 33e9).unwrap();
        let id = &b.matrix * b.matrix.adjoint();
        assert!((id - CMatrix::identity(5, 5)).norm() < 1e-12);
        assert!((&b.matrix * &a - &a0).norm() < 1e-10);
    }

    #[test]
    fn same_frequency_gives_identity() {
        let g = geom();
        let s = sample_focusing_angles(&[((20.0, 40.0), (0.0, 50.0))], 5.0, 5.0).unwrap();
        let c = focusing_correlations(&g, &[30e9], 30e9, &s).unwrap();
        let b = rss_from_correlation(&c[0], 30e9).unwrap();
        assert!((b.matrix - CMatrix::identity(5, 5)).norm() < 1e-10);
    }

    #[test]
    fn clustered_small_singular_values_still_give_identity() {
        let g = geom();
        let s = sample_focusing_angles(&[((24.0, 37.0), (77.0, 90.0))], 0.2, 0.2).unwrap();
        let c = focusing_correlations(&g, &[30e9], 30e9, &s).unwrap();
        let b = rss_from_correlation(&c[0], 30e9).unwrap();
        assert!((b.matrix - CMatrix::identity(5, 5)).norm() < 1e-10);
    }

    #[test]
    fn zero_correlation_is_degenerate() {
        assert!(matches!(
            rss_from_correlation(&CMatrix::zeros(5, 5), 1.0),
            Err(Error::DegenerateFocusing { .. })
        ));
    }
}
