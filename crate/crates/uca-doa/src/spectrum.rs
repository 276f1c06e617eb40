//! MUSIC pseudo-spectrum on an angular lattice and 2D peak search.
//!
//! Grid points always sit on the global lattice `θ = i·v_θ`, `φ = j·v_φ`, so
//! a spectrum restricted to sub-regions takes bit-identical values to the
//! full-range spectrum at every shared point.

use crate::array::{wrap_azimuth, ArrayGeometry, DoA};
use crate::error::{invalid, Result};
use crate::par::{for_each_chunk, map_indexed, Execution};
use crate::{CMatrix, C64};

const EPS: f64 = 1e-9;

/// Rectangular angular region. The azimuth interval is unwrapped: `lo` may be
/// negative and `hi` may exceed 360; widths of 360° or more cover the circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleRegion {
    pub elevation: (f64, f64),
    pub azimuth: (f64, f64),
}

impl AngleRegion {
    pub fn new(elevation: (f64, f64), azimuth: (f64, f64)) -> Result<Self> {
        let ok = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && a <= b;
        if !ok(elevation) || !ok(azimuth) {
            return Err(invalid("region bounds must be finite and ordered"));
        }
        if elevation.0 < -EPS || elevation.1 > 90.0 + EPS {
            return Err(invalid("region elevation must lie inside [0, 90]"));
        }
        Ok(AngleRegion { elevation, azimuth })
    }

    /// The whole visible hemisphere.
    pub fn full() -> Self {
        AngleRegion {
            elevation: (0.0, 90.0),
            azimuth: (0.0, 360.0),
        }
    }

    pub fn covers_circle(&self) -> bool {
        self.azimuth.1 - self.azimuth.0 >= 360.0 - EPS
    }

    /// Whether `doa` lies inside the region.
    pub fn contains(&self, doa: &DoA) -> bool {
        let t = doa.elevation();
        if t < self.elevation.0 - EPS || t > self.elevation.1 + EPS {
            return false;
        }
        if self.covers_circle() {
            return true;
        }
        let off = wrap_azimuth(doa.azimuth() - self.azimuth.0);
        off <= self.azimuth.1 - self.azimuth.0 + EPS || off >= 360.0 - EPS
    }
}

/// Uniform angular lattice covering the hemisphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    step_theta: f64,
    step_phi: f64,
    rows: usize,
    cols: usize,
}

impl Lattice {
    pub fn new(step_theta: f64, step_phi: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v > 0.0 && v <= 90.0;
        if !ok(step_theta) || !ok(step_phi) {
            return Err(invalid("grid steps must lie in (0, 90] degrees"));
        }
        Ok(Lattice {
            step_theta,
            step_phi,
            rows: (90.0 / step_theta + EPS).floor() as usize + 1,
            cols: (360.0 / step_phi - EPS).ceil() as usize,
        })
    }

    pub fn step_theta(&self) -> f64 {
        self.step_theta
    }

    pub fn step_phi(&self) -> f64 {
        self.step_phi
    }

    /// Number of elevation samples on the full range.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of azimuth samples on the full range.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn theta(&self, i: usize) -> f64 {
        i as f64 * self.step_theta
    }

    pub fn phi(&self, j: usize) -> f64 {
        j as f64 * self.step_phi
    }

    pub fn point(&self, i: usize, j: usize) -> DoA {
        DoA::clamped(self.theta(i), self.phi(j))
    }

    /// Smallest run of lattice rows covering the elevation interval.
    fn row_range(&self, (lo, hi): (f64, f64)) -> (usize, usize) {
        let last = self.rows as i64 - 1;
        let a = ((lo / self.step_theta + EPS).floor() as i64).clamp(0, last);
        let b = ((hi / self.step_theta - EPS).ceil() as i64).clamp(0, last);
        if a <= b {
            (a as usize, b as usize)
        } else {
            let c = (((lo + hi) / 2.0 / self.step_theta).round() as i64).clamp(0, last) as usize;
            (c, c)
        }
    }

    /// Start column and width of the smallest lattice arc covering the
    /// azimuth interval.
    fn col_arc(&self, (lo, hi): (f64, f64)) -> (usize, usize) {
        let l = self.cols as i64;
        let mut a = (lo / self.step_phi + EPS).floor() as i64;
        let mut b = (hi / self.step_phi - EPS).ceil() as i64;
        if a > b {
            a = ((lo + hi) / 2.0 / self.step_phi).round() as i64;
            b = a;
        }
        let w = b - a + 1;
        if w >= l {
            (0, self.cols)
        } else {
            (a.rem_euclid(l) as usize, w as usize)
        }
    }
}

/// Steering vectors at the reference frequency over the whole lattice.
#[derive(Debug)]
pub struct SteeringTable {
    lattice: Lattice,
    elements: usize,
    data: Vec<C64>,
}

impl SteeringTable {
    pub fn new(geometry: &ArrayGeometry, frequency: f64, lattice: Lattice, exec: Execution) -> Self {
        let m = geometry.element_count();
        let row_len = lattice.cols * m;
        let mut data = vec![C64::new(0.0, 0.0); lattice.rows * row_len];
        for_each_chunk(exec, &mut data, row_len, |i, row| {
            for j in 0..lattice.cols {
                geometry.steer_into(frequency, &lattice.point(i, j), &mut row[j * m..(j + 1) * m]);
            }
        });
        SteeringTable {
            lattice,
            elements: m,
            data,
        }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    fn at(&self, i: usize, j: usize) -> &[C64] {
        let o = (i * self.lattice.cols + j) * self.elements;
        &self.data[o..o + self.elements]
    }
}

/// Dense rectangular patch of the lattice with an optional validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumBlock {
    row0: usize,
    rows: usize,
    col0: usize,
    cols: usize,
    wraps: bool,
    mask: Option<Vec<bool>>,
    values: Vec<f64>,
}

impl SpectrumBlock {
    fn valid(&self, r: usize, c: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[r * self.cols + c])
    }

    fn value(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    fn lattice_index(&self, r: usize, c: usize, lattice: &Lattice) -> (usize, usize) {
        (self.row0 + r, (self.col0 + c) % lattice.cols)
    }

    /// Cheap rejection for unmasked blocks: some neighbour is strictly higher.
    fn beaten_fast(&self, r: usize, c: usize, v: f64) -> bool {
        let cols = self.cols;
        let (cl, cr) = if self.wraps {
            ((c + cols - 1) % cols, (c + 1) % cols)
        } else {
            (c.saturating_sub(1), (c + 1).min(cols - 1))
        };
        let r0 = r.saturating_sub(1);
        let r1 = (r + 1).min(self.rows - 1);
        for nr in r0..=r1 {
            let row = &self.values[nr * cols..(nr + 1) * cols];
            if row[cl] > v || row[c] > v || row[cr] > v {
                return true;
            }
        }
        false
    }

    fn neighbours(&self, r: usize, c: usize, out: &mut Vec<(usize, usize)>) {
        out.clear();
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let nr = r as i64 + dr;
                if nr < 0 || nr >= self.rows as i64 {
                    continue;
                }
                let mut nc = c as i64 + dc;
                if self.wraps {
                    nc = nc.rem_euclid(self.cols as i64);
                } else if nc < 0 || nc >= self.cols as i64 {
                    continue;
                }
                let (nr, nc) = (nr as usize, nc as usize);
                if (nr, nc) != (r, c) && !out.contains(&(nr, nc)) && self.valid(nr, nc) {
                    out.push((nr, nc));
                }
            }
        }
    }
}

/// MUSIC pseudo-spectrum sampled on lattice points.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    lattice: Lattice,
    blocks: Vec<SpectrumBlock>,
}

impl SpectrumGrid {
    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Number of sampled points.
    pub fn len(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| b.mask.as_ref().map_or(b.values.len(), |m| m.iter().filter(|&&x| x).count()))
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every sampled point with its value, block by block in row-major order.
    pub fn points(&self) -> Vec<(DoA, f64)> {
        let mut out = Vec::with_capacity(self.len());
        for b in &self.blocks {
            for r in 0..b.rows {
                for c in 0..b.cols {
                    if b.valid(r, c) {
                        let (i, j) = b.lattice_index(r, c, &self.lattice);
                        out.push((self.lattice.point(i, j), b.value(r, c)));
                    }
                }
            }
        }
        out
    }

    /// Value at lattice indices `(i, j)` if sampled.
    pub fn value_at(&self, i: usize, j: usize) -> Option<f64> {
        for b in &self.blocks {
            if i < b.row0 || i >= b.row0 + b.rows {
                continue;
            }
            let c = (j + self.lattice.cols - b.col0 % self.lattice.cols) % self.lattice.cols;
            if c < b.cols && b.valid(i - b.row0, c) {
                return Some(b.value(i - b.row0, c));
            }
        }
        None
    }
}

/// Projector onto the noise subspace.
struct Projector {
    m: usize,
    p: Vec<C64>,
}

impl Projector {
    fn new(noise: &CMatrix) -> Self {
        let p = noise * noise.adjoint();
        let m = p.nrows();
        let mut flat = Vec::with_capacity(m * m);
        for r in 0..m {
            for c in 0..m {
                flat.push(p[(r, c)]);
            }
        }
        Projector { m, p: flat }
    }

    /// `1 / (a^H P a)`, clamped for vanishing denominators.
    fn music(&self, a: &[C64]) -> f64 {
        let m = self.m;
        let mut diag = 0.0;
        let mut off = C64::new(0.0, 0.0);
        for r in 0..m {
            let row = &self.p[r * m..(r + 1) * m];
            diag += row[r].re * a[r].norm_sqr();
            let mut s = C64::new(0.0, 0.0);
            for c in r + 1..m {
                s += row[c] * a[c];
            }
            off += a[r].conj() * s;
        }
        let acc = diag + 2.0 * off.re;
        if acc < 1e-30 {
            1e30
        } else {
            1.0 / acc
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    i0: usize,
    i1: usize,
    j0: usize,
    w: usize,
}

fn arcs_touch(a: &Rect, b: &Rect, l: usize) -> bool {
    if a.w + 2 >= l || b.w >= l {
        return true;
    }
    let start = (a.j0 + l - 1) % l;
    let d = (b.j0 + l - start) % l;
    d < a.w + 2 || d + b.w > l
}

fn rects_touch(a: &Rect, b: &Rect, l: usize) -> bool {
    a.i0 <= b.i1 + 1 && b.i0 <= a.i1 + 1 && arcs_touch(a, b, l)
}

/// Merges touching rectangles into dense blocks with validity masks.
fn cluster(rects: Vec<Rect>, lattice: &Lattice) -> Vec<(Rect, Vec<Rect>)> {
    let l = lattice.cols;
    let mut groups: Vec<Vec<Rect>> = rects.into_iter().map(|r| vec![r]).collect();
    loop {
        let mut merged = false;
        'outer: for a in 0..groups.len() {
            for b in a + 1..groups.len() {
                if groups[a]
                    .iter()
                    .any(|x| groups[b].iter().any(|y| rects_touch(x, y, l)))
                {
                    let g = groups.remove(b);
                    groups[a].extend(g);
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            break;
        }
    }
    groups
        .into_iter()
        .map(|g| {
            let i0 = g.iter().map(|r| r.i0).min().unwrap();
            let i1 = g.iter().map(|r| r.i1).max().unwrap();
            let mut covered = vec![false; l];
            for r in &g {
                for t in 0..r.w.min(l) {
                    covered[(r.j0 + t) % l] = true;
                }
            }
            let bound = if covered.iter().all(|&c| c) {
                Rect { i0, i1, j0: 0, w: l }
            } else {
                // the bounding arc is the complement of the longest uncovered run
                let start = covered.iter().position(|&c| c).unwrap();
                let (mut best_len, mut best_end, mut run) = (0usize, start, 0usize);
                for t in 1..=l {
                    let j = (start + t) % l;
                    if covered[j] {
                        if run > best_len {
                            best_len = run;
                            best_end = j;
                        }
                        run = 0;
                    } else {
                        run += 1;
                    }
                }
                Rect { i0, i1, j0: best_end, w: l - best_len }
            };
            (bound, g)
        })
        .collect()
}

fn region_blocks(regions: &[AngleRegion], lattice: &Lattice) -> Vec<SpectrumBlock> {
    let rects = regions
        .iter()
        .map(|r| {
            let (i0, i1) = lattice.row_range(r.elevation);
            let (j0, w) = lattice.col_arc(r.azimuth);
            Rect { i0, i1, j0, w }
        })
        .collect();
    let l = lattice.cols;
    cluster(rects, lattice)
        .into_iter()
        .map(|(bound, members)| {
            let rows = bound.i1 - bound.i0 + 1;
            let cols = bound.w;
            let mut mask = vec![false; rows * cols];
            for m in &members {
                for i in m.i0..=m.i1 {
                    for t in 0..m.w {
                        let c = ((m.j0 + t) % l + l - bound.j0) % l;
                        mask[(i - bound.i0) * cols + c] = true;
                    }
                }
            }
            let full = mask.iter().all(|&x| x);
            SpectrumBlock {
                row0: bound.i0,
                rows,
                col0: bound.j0,
                cols,
                wraps: cols == l,
                mask: if full { None } else { Some(mask) },
                values: vec![f64::NAN; rows * cols],
            }
        })
        .collect()
}

/// MUSIC pseudo-spectrum over the lattice points inside `regions`.
pub fn music_spectrum(
    noise_subspace: &CMatrix,
    geometry: &ArrayGeometry,
    frequency: f64,
    regions: &[AngleRegion],
    lattice: &Lattice,
    exec: Execution,
) -> Result<SpectrumGrid> {
    check_subspace(noise_subspace, geometry)?;
    if regions.is_empty() {
        return Err(invalid("at least one search region is required"));
    }
    let proj = Projector::new(noise_subspace);
    let m = geometry.element_count();
    let mut blocks = region_blocks(regions, lattice);
    for b in &mut blocks {
        let (row0, col0, cols) = (b.row0, b.col0, b.cols);
        let mask = b.mask.clone();
        for_each_chunk(exec, &mut b.values, cols, |r, row| {
            let mut a = vec![C64::new(0.0, 0.0); m];
            for (c, v) in row.iter_mut().enumerate() {
                if mask.as_ref().is_none_or(|mk| mk[r * cols + c]) {
                    let (i, j) = (row0 + r, (col0 + c) % lattice.cols);
                    geometry.steer_into(frequency, &lattice.point(i, j), &mut a);
                    *v = proj.music(&a);
                }
            }
        });
    }
    Ok(SpectrumGrid {
        lattice: *lattice,
        blocks,
    })
}

/// MUSIC pseudo-spectrum over the full lattice using cached steering vectors.
pub fn music_spectrum_full(noise_subspace: &CMatrix, table: &SteeringTable, exec: Execution) -> Result<SpectrumGrid> {
    if noise_subspace.nrows() != table.elements || noise_subspace.ncols() == 0 {
        return Err(invalid("noise subspace does not match the steering table"));
    }
    let proj = Projector::new(noise_subspace);
    let lattice = table.lattice;
    let mut values = vec![0.0; lattice.rows * lattice.cols];
    for_each_chunk(exec, &mut values, lattice.cols, |i, row| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = proj.music(table.at(i, j));
        }
    });
    Ok(SpectrumGrid {
        lattice,
        blocks: vec![SpectrumBlock {
            row0: 0,
            rows: lattice.rows,
            col0: 0,
            cols: lattice.cols,
            wraps: true,
            mask: None,
            values,
        }],
    })
}

fn check_subspace(noise: &CMatrix, geometry: &ArrayGeometry) -> Result<()> {
    if noise.nrows() != geometry.element_count() || noise.ncols() == 0 || noise.ncols() > noise.nrows() {
        return Err(invalid("noise subspace must be M × (M - N) with M - N ≥ 1"));
    }
    Ok(())
}

/// Strict local maxima over the 8-neighbourhood, one per plateau, sorted by
/// descending value. Ties keep block and row-major scan order.
pub fn local_maxima(grid: &SpectrumGrid) -> Vec<(DoA, f64)> {
    let per_block = map_indexed(Execution::Sequential, grid.blocks.len(), |bi| {
        block_maxima(&grid.blocks[bi])
    });
    let mut out = Vec::new();
    for (b, peaks) in grid.blocks.iter().zip(per_block) {
        for (r, c) in peaks {
            let (i, j) = b.lattice_index(r, c, &grid.lattice);
            out.push((grid.lattice.point(i, j), b.value(r, c)));
        }
    }
    out.sort_by(|a, b| b.1.total_cmp(&a.1));
    out
}

fn block_maxima(b: &SpectrumBlock) -> Vec<(usize, usize)> {
    let mut peaks = Vec::new();
    let mut seen = vec![false; b.rows * b.cols];
    let mut nb = Vec::with_capacity(8);
    for r in 0..b.rows {
        for c in 0..b.cols {
            if !b.valid(r, c) || seen[r * b.cols + c] {
                continue;
            }
            let v = b.value(r, c);
            if b.mask.is_none() && b.beaten_fast(r, c, v) {
                continue;
            }
            b.neighbours(r, c, &mut nb);
            let mut tied = false;
            let mut higher = false;
            for &(nr, nc) in &nb {
                let w = b.value(nr, nc);
                if w > v {
                    higher = true;
                    break;
                }
                tied |= w == v;
            }
            if higher {
                continue;
            }
            if !tied {
                peaks.push((r, c));
                continue;
            }
            // flood the plateau; it counts once if every rim neighbour is lower
            let mut stack = vec![(r, c)];
            seen[r * b.cols + c] = true;
            let mut cells = Vec::new();
            let mut strict = true;
            let mut nb2 = Vec::with_capacity(8);
            while let Some((pr, pc)) = stack.pop() {
                cells.push((pr, pc));
                b.neighbours(pr, pc, &mut nb2);
                for &(nr, nc) in &nb2 {
                    let w = b.value(nr, nc);
                    if w == v {
                        if !seen[nr * b.cols + nc] {
                            seen[nr * b.cols + nc] = true;
                            stack.push((nr, nc));
                        }
                    } else if w > v {
                        strict = false;
                    }
                }
            }
            if strict {
                peaks.push(*cells.iter().min().unwrap());
            }
        }
    }
    peaks
}

/// The `count` highest peaks, padded with the highest remaining grid points
/// when fewer local maxima exist.
pub fn find_peaks(grid: &SpectrumGrid, count: usize) -> Result<Vec<DoA>> {
    if count > grid.len() {
        return Err(invalid(format!("requested {count} peaks from {} grid points", grid.len())));
    }
    let peaks = local_maxima(grid);
    let mut out: Vec<DoA> = peaks.iter().take(count).map(|p| p.0).collect();
    if out.len() < count {
        let mut rest: Vec<(DoA, f64)> = grid
            .points()
            .into_iter()
            .filter(|(d, _)| !out.contains(d))
            .collect();
        rest.sort_by(|a, b| b.1.total_cmp(&a.1));
        out.extend(rest.into_iter().take(count - out.len()).map(|p| p.0));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::steering_vector;
    use crate::subspace::{hermitian_eig, sample_covariance};

    fn geom() -> ArrayGeometry {
        ArrayGeometry::with_max_radius(5, 34.5e9, 3e8).unwrap()
    }

    fn noise_for(doas: &[DoA]) -> CMatrix {
        let g = geom();
        let a = crate::array::manifold_matrix(&g, 30e9, doas).unwrap();
        let r = sample_covariance(&a, 1.0).unwrap();
        hermitian_eig(&r).unwrap().noise_subspace(doas.len()).unwrap()
    }

    #[test]
    fn lattice_sizes() {
        let l = Lattice::new(0.2, 0.2).unwrap();
        assert_eq!((l.rows(), l.cols()), (451, 1800));
        let l = Lattice::new(1.0, 1.0).unwrap();
        assert_eq!((l.rows(), l.cols()), (91, 360));
    }

    #[test]
    fn noiseless_peak_hits_truth() {
        let truth = DoA::new(60.0, 150.0).unwrap();
        let en = noise_for(&[truth]);
        let lattice = Lattice::new(1.0, 1.0).unwrap();
        let grid = music_spectrum(&en, &geom(), 30e9, &[AngleRegion::full()], &lattice, Execution::Sequential).unwrap();
        assert_eq!(grid.len(), 91 * 360);
        assert_eq!(find_peaks(&grid, 1).unwrap(), vec![truth]);
    }

    #[test]
    fn regions_agree_with_full_table() {
        let truth = [DoA::new(40.0, 175.0).unwrap(), DoA::new(70.0, 250.0).unwrap()];
        let en = noise_for(&truth);
        let lattice = Lattice::new(0.5, 0.5).unwrap();
        let table = SteeringTable::new(&geom(), 30e9, lattice, Execution::Sequential);
        let full = music_spectrum_full(&en, &table, Execution::Sequential).unwrap();
        let regions = [
            AngleRegion::new((35.0, 45.0), (170.0, 180.0)).unwrap(),
            AngleRegion::new((60.0, 80.0), (240.3, 262.0)).unwrap(),
            AngleRegion::new((10.0, 12.0), (-5.0, 5.0)).unwrap(),
        ];
        let part = music_spectrum(&en, &geom(), 30e9, &regions, &lattice, Execution::Sequential).unwrap();
        for (d, v) in part.points() {
            let i = (d.elevation() / 0.5).round() as usize;
            let j = (d.azimuth() / 0.5).round() as usize;
            assert_eq!(full.value_at(i, j), Some(v));
        }
        let mut got = find_peaks(&part, 2).unwrap();
        got.sort_by(|a, b| a.elevation().total_cmp(&b.elevation()));
        assert_eq!(got, truth.to_vec());
    }

    #[test]
    fn seam_region_is_contiguous() {
        let lattice = Lattice::new(1.0, 1.0).unwrap();
        let blocks = region_blocks(&[AngleRegion::new((10.0, 12.0), (-3.0, 3.0)).unwrap()], &lattice);
        assert_eq!(blocks.len(), 1);
        assert_eq!((blocks[0].col0, blocks[0].cols), (357, 7));
    }

    #[test]
    fn overlapping_regions_share_points() {
        let lattice = Lattice::new(1.0, 1.0).unwrap();
        let regions = [
            AngleRegion::new((10.0, 20.0), (10.0, 20.0)).unwrap(),
            AngleRegion::new((15.0, 25.0), (15.0, 25.0)).unwrap(),
        ];
        let blocks = region_blocks(&regions, &lattice);
        assert_eq!(blocks.len(), 1);
        let en = noise_for(&[DoA::new(5.0, 5.0).unwrap()]);
        let g = music_spectrum(&en, &geom(), 30e9, &regions, &lattice, Execution::Sequential).unwrap();
        assert_eq!(g.len(), 121 + 121 - 36);
    }

    #[test]
    fn plateau_reports_single_peak() {
        let b = SpectrumBlock {
            row0: 0,
            rows: 3,
            col0: 0,
            cols: 4,
            wraps: false,
            mask: None,
            values: vec![0.0, 0.0, 0.0, 0.0, 0.0, 5.0, 5.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        };
        assert_eq!(block_maxima(&b), vec![(1, 1)]);
    }

    #[test]
    fn pads_when_peaks_are_scarce() {
        let lattice = Lattice::new(45.0, 90.0).unwrap();
        let grid = SpectrumGrid {
            lattice,
            blocks: vec![SpectrumBlock {
                row0: 0,
                rows: 3,
                col0: 0,
                cols: 4,
                wraps: true,
                mask: None,
                values: vec![1.0, 1.0, 1.0, 1.0, 2.0, 3.0, 2.5, 2.0, 0.5, 0.5, 0.5, 0.5],
            }],
        };
        let p = find_peaks(&grid, 3).unwrap();
        assert_eq!(p[0], DoA::new(45.0, 90.0).unwrap());
        assert_eq!(p[1], DoA::new(45.0, 180.0).unwrap());
        assert_eq!(p.len(), 3);
        assert!(find_peaks(&grid, 13).is_err());
    }

    #[test]
    fn clamps_vanishing_denominator() {
        let truth = DoA::new(0.0, 0.0).unwrap();
        let en = noise_for(&[truth]);
        let p = Projector::new(&en);
        let a = steering_vector(&geom(), 30e9, &truth).unwrap();
        assert!(p.music(a.as_slice()) > 1e12);
    }
}
