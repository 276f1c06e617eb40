//! Iterative wideband estimators: the shrinking-region estimator with
//! progressive frequency selection and the coherent-subspace benchmarks.

mod regions;

pub use regions::{delta_bar, frequency_increment, greedy_pairs, robustness_radii, robustness_region};

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::array::{quiescent_beamwidths, ArrayGeometry, DoA};
use crate::error::{invalid, Error, Result};
use crate::focusing::{focused_covariance, focusing_matrices, sample_focusing_angles, FocusingAngleSet};
use crate::par::Execution;
use crate::signal::NarrowbandStack;
use crate::spectrum::{
    find_peaks, local_maxima, music_spectrum, music_spectrum_full, AngleRegion, Lattice, SpectrumGrid, SteeringTable,
};
use crate::subspace::{estimate_source_count, hermitian_eig};

/// Estimation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ripf")]
    Ripf,
    #[serde(rename = "c-csm-1")]
    CCsmSingle,
    #[serde(rename = "c-csm")]
    CCsm,
    #[serde(rename = "se-csm")]
    SeCsm,
    #[serde(rename = "r-csm")]
    RCsm,
    #[serde(rename = "i-2d-csm")]
    I2dCsm,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Ripf,
        Method::CCsmSingle,
        Method::CCsm,
        Method::SeCsm,
        Method::RCsm,
        Method::I2dCsm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ripf => "ripf",
            Method::CCsmSingle => "c-csm-1",
            Method::CCsm => "c-csm",
            Method::SeCsm => "se-csm",
            Method::RCsm => "r-csm",
            Method::I2dCsm => "i-2d-csm",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| invalid(format!("unknown method {s}")))
    }
}

/// Tuning of the iterative estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RipfParams {
    /// Iteration cap `I`.
    pub max_iterations: usize,
    /// Region bias `b`; must exceed 1.
    pub bias: f64,
    /// Mean pre-estimate elevation error, degrees.
    pub avg_err_theta: f64,
    /// Mean pre-estimate azimuth error, degrees.
    pub avg_err_phi: f64,
    /// Elevation grid step, degrees.
    pub step_theta: f64,
    /// Azimuth grid step, degrees.
    pub step_phi: f64,
}

impl Default for RipfParams {
    fn default() -> Self {
        RipfParams {
            max_iterations: 15,
            bias: 3.0,
            avg_err_theta: 3.0,
            avg_err_phi: 3.0,
            step_theta: 0.2,
            step_phi: 0.2,
        }
    }
}

impl RipfParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations must be at least 1"));
        }
        if !(self.bias > 1.0 && self.bias.is_finite()) {
            return Err(invalid("bias must exceed 1"));
        }
        if !(self.avg_err_theta >= 0.0 && self.avg_err_phi >= 0.0) {
            return Err(invalid("average errors must be non-negative"));
        }
        Lattice::new(self.step_theta, self.step_phi).map(|_| ())
    }

    pub fn lattice(&self) -> Result<Lattice> {
        Lattice::new(self.step_theta, self.step_phi)
    }
}

/// Snapshot of one estimator iteration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EstimatorState {
    /// 1-based iteration index.
    pub iteration: usize,
    pub estimates: Vec<DoA>,
    /// Detected source count in this iteration.
    pub source_count: usize,
    /// Source count the iteration started from.
    pub previous_count: usize,
    /// Mean angular change from the previous iteration, degrees.
    pub delta_bar: f64,
    /// `delta_bar` divided by one degree.
    pub normalized_delta: f64,
    /// Bins used for focusing, sorted.
    pub focus_bins: Vec<usize>,
    /// Region half-widths `(R_θ, R_φ)` per previous estimate, degrees.
    pub radii: Vec<(f64, f64)>,
    /// Number of focusing directions.
    pub focusing_angles: usize,
    /// Bins skipped because their focusing correlation vanished.
    pub dropped_bins: Vec<usize>,
}

/// Final estimates with the per-iteration trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimation {
    pub estimates: Vec<DoA>,
    pub trace: Vec<EstimatorState>,
}

impl Estimation {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

enum Search<'a> {
    Regions(&'a [AngleRegion]),
    Full,
}

/// Estimator bound to an array, a reference frequency and tuning; caches the
/// full-lattice steering table and the quiescent beamwidths.
#[derive(Debug)]
pub struct Estimator {
    geometry: ArrayGeometry,
    reference: f64,
    params: RipfParams,
    lattice: Lattice,
    exec: Execution,
    full_search: bool,
    table: OnceLock<Arc<SteeringTable>>,
    beamwidths: OnceLock<(f64, f64)>,
}

const CONVERGED: f64 = 1e-12;

impl Estimator {
    pub fn new(geometry: ArrayGeometry, reference: f64, params: RipfParams) -> Result<Self> {
        params.validate()?;
        if !(reference.is_finite() && reference > 0.0) {
            return Err(invalid("reference frequency must be positive"));
        }
        let lattice = params.lattice()?;
        Ok(Estimator {
            geometry,
            reference,
            params,
            lattice,
            exec: Execution::default(),
            full_search: false,
            table: OnceLock::new(),
            beamwidths: OnceLock::new(),
        })
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    /// Makes the shrinking-region estimator search the full lattice instead
    /// of its regions.
    pub fn with_full_range_search(mut self, full: bool) -> Self {
        self.full_search = full;
        self
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn params(&self) -> &RipfParams {
        &self.params
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn reference_frequency(&self) -> f64 {
        self.reference
    }

    fn table(&self) -> &SteeringTable {
        self.table
            .get_or_init(|| Arc::new(SteeringTable::new(&self.geometry, self.reference, self.lattice, self.exec)))
    }

    /// Quiescent 3 dB beamwidths at the reference frequency.
    pub fn beamwidths(&self) -> Result<(f64, f64)> {
        if let Some(b) = self.beamwidths.get() {
            return Ok(*b);
        }
        let b = quiescent_beamwidths(&self.geometry, self.reference)?;
        Ok(*self.beamwidths.get_or_init(|| b))
    }

    /// Runs `method` on `stack`.
    pub fn run<R: Rng + ?Sized>(
        &self,
        method: Method,
        stack: &NarrowbandStack,
        pre_estimates: &[DoA],
        rng: &mut R,
    ) -> Result<Estimation> {
        match method {
            Method::Ripf => self.ripf_csm(stack, pre_estimates, rng),
            other => self.benchmark_csm(stack, pre_estimates, other),
        }
    }

    fn check_inputs(&self, stack: &NarrowbandStack, pre: &[DoA]) -> Result<()> {
        let m = self.geometry.element_count();
        if stack.element_count() != m {
            return Err(invalid(format!("stack has {} elements, array has {m}", stack.element_count())));
        }
        if pre.is_empty() || pre.len() >= m {
            return Err(invalid(format!("pre-estimate count {} must lie in [1, {m})", pre.len())));
        }
        Ok(())
    }

    /// Focuses the listed bins, detects the source count and evaluates the
    /// spectrum.
    fn focus_and_search(
        &self,
        stack: &NarrowbandStack,
        bins: &[usize],
        set: &FocusingAngleSet,
        search: Search<'_>,
    ) -> Result<(SpectrumGrid, usize, Vec<usize>)> {
        let mats = focusing_matrices(&self.geometry, stack, bins, self.reference, set, self.exec)?;
        let mut kept = Vec::with_capacity(mats.len());
        let mut dropped = Vec::new();
        for (z, b) in mats {
            match b {
                Ok(b) => kept.push((z, b)),
                Err(Error::DegenerateFocusing { .. }) => dropped.push(z),
                Err(e) => return Err(e),
            }
        }
        if kept.is_empty() {
            return Err(Error::DegenerateFocusing {
                frequency: self.reference,
            });
        }
        let r = focused_covariance(stack, &kept)?;
        let eig = hermitian_eig(&r)?;
        let count = estimate_source_count(&eig.values)?;
        let noise = eig.noise_subspace(count)?;
        let grid = match search {
            Search::Full => music_spectrum_full(&noise, self.table(), self.exec)?,
            Search::Regions(regions) => {
                music_spectrum(&noise, &self.geometry, self.reference, regions, &self.lattice, self.exec)?
            }
        };
        Ok((grid, count, dropped))
    }

    /// Shrinking-region estimator with progressive frequency selection.
    pub fn ripf_csm<R: Rng + ?Sized>(
        &self,
        stack: &NarrowbandStack,
        pre_estimates: &[DoA],
        rng: &mut R,
    ) -> Result<Estimation> {
        self.check_inputs(stack, pre_estimates)?;
        let p = &self.params;
        let total = stack.bin_count();
        let mut prev = pre_estimates.to_vec();
        let mut prev_count = prev.len();
        let mut d = 1.0;
        let mut bins: Vec<usize> = Vec::new();
        let mut trace: Vec<EstimatorState> = Vec::new();
        for i in 1..=p.max_iterations {
            let add = match trace.last() {
                None => 1,
                Some(s) => frequency_increment(s, total, p),
            };
            let free: Vec<usize> = (0..total).filter(|z| !bins.contains(z)).collect();
            let add = add.min(free.len());
            for k in rand::seq::index::sample(rng, free.len(), add) {
                bins.push(free[k]);
            }
            bins.sort_unstable();

            let radii: Vec<(f64, f64)> = prev.iter().map(|e| robustness_radii(e, d, i, p)).collect();
            let regions: Vec<AngleRegion> = prev.iter().zip(&radii).map(|(e, r)| robustness_region(e, *r)).collect();
            let bounds: Vec<_> = regions.iter().map(|r| (r.elevation, r.azimuth)).collect();
            let set = sample_focusing_angles(&bounds, p.step_theta, p.step_phi)?;
            let search = if self.full_search {
                Search::Full
            } else {
                Search::Regions(&regions)
            };
            let (grid, count, dropped) = self.focus_and_search(stack, &bins, &set, search)?;
            bins.retain(|z| !dropped.contains(z));
            let current = pick_estimates(&grid, count, &prev)?;
            let db = delta_bar(&prev, &current)?;
            trace.push(EstimatorState {
                iteration: i,
                estimates: current.clone(),
                source_count: count,
                previous_count: prev_count,
                delta_bar: db,
                normalized_delta: db,
                focus_bins: bins.clone(),
                radii,
                focusing_angles: set.len(),
                dropped_bins: dropped,
            });
            if db <= CONVERGED && count == prev_count {
                break;
            }
            d = db;
            prev = current;
            prev_count = count;
        }
        finish(trace)
    }

    /// Coherent-subspace benchmark estimators using every bin and the full
    /// lattice.
    pub fn benchmark_csm(&self, stack: &NarrowbandStack, pre_estimates: &[DoA], method: Method) -> Result<Estimation> {
        self.check_inputs(stack, pre_estimates)?;
        if method == Method::Ripf {
            return Err(invalid("not a benchmark method"));
        }
        let p = &self.params;
        let bins: Vec<usize> = (0..stack.bin_count()).collect();
        let iterations = if method == Method::CCsmSingle { 1 } else { p.max_iterations };
        let mut prev = pre_estimates.to_vec();
        let mut prev_count = prev.len();
        let mut trace = Vec::new();
        for i in 1..=iterations {
            let (set, radii) = self.benchmark_angles(method, &prev, i)?;
            let (grid, count, dropped) = self.focus_and_search(stack, &bins, &set, Search::Full)?;
            let current = find_peaks(&grid, count)?;
            let db = delta_bar(&prev, &current)?;
            trace.push(EstimatorState {
                iteration: i,
                estimates: current.clone(),
                source_count: count,
                previous_count: prev_count,
                delta_bar: db,
                normalized_delta: db,
                focus_bins: bins.iter().copied().filter(|z| !dropped.contains(z)).collect(),
                radii,
                focusing_angles: set.len(),
                dropped_bins: dropped,
            });
            if db <= CONVERGED && count == prev_count {
                break;
            }
            prev = current;
            prev_count = count;
        }
        finish(trace)
    }

    fn benchmark_angles(&self, method: Method, prev: &[DoA], i: usize) -> Result<(FocusingAngleSet, Vec<(f64, f64)>)> {
        let p = &self.params;
        let zero = vec![(0.0, 0.0); prev.len()];
        match method {
            Method::CCsm | Method::CCsmSingle => Ok((FocusingAngleSet::from_angles(prev), zero)),
            Method::SeCsm => {
                let (bt, bp) = self.beamwidths()?;
                let frac = if i == 1 { 0.25 } else { 0.125 };
                let mut angles = Vec::with_capacity(prev.len() * 5);
                for e in prev {
                    angles.push(*e);
                    for st in [1.0, -1.0] {
                        for sp in [1.0, -1.0] {
                            angles.push(DoA::clamped(
                                e.elevation() + st * frac * bt,
                                e.azimuth() + sp * frac * bp,
                            ));
                        }
                    }
                }
                Ok((FocusingAngleSet::from_angles(&angles), zero))
            }
            Method::RCsm | Method::I2dCsm => {
                let (et, ep) = if method == Method::RCsm {
                    (i as f64, i as f64)
                } else {
                    let cap_t = 2.0 * p.step_theta;
                    let cap_p = 2.0 * p.step_phi;
                    ((i as f64).min(cap_t), (i as f64).min(cap_p))
                };
                let sine_radius = 1.0 / (2.0 * et * et);
                let az_radius = 360.0 / (2.0 * ep * ep);
                let mut bounds = Vec::with_capacity(prev.len());
                let mut radii = Vec::with_capacity(prev.len());
                for e in prev {
                    let s = e.elevation().to_radians().sin();
                    let lo = (s - sine_radius).max(0.0).asin().to_degrees();
                    let hi = (s + sine_radius).min(1.0).asin().to_degrees();
                    bounds.push(((lo, hi), (e.azimuth() - az_radius, e.azimuth() + az_radius)));
                    radii.push(((hi - lo) / 2.0, az_radius));
                }
                Ok((sample_focusing_angles(&bounds, p.step_theta, p.step_phi)?, radii))
            }
            Method::Ripf => Err(invalid("not a benchmark method")),
        }
    }
}

fn finish(trace: Vec<EstimatorState>) -> Result<Estimation> {
    let last = trace.last().ok_or_else(|| invalid("estimator ran no iterations"))?;
    Ok(Estimation {
        estimates: last.estimates.clone(),
        trace,
    })
}

/// Peaks inside the search regions; missing ones are filled from previous
/// estimates that no peak claimed, then from the highest remaining points.
fn pick_estimates(grid: &SpectrumGrid, count: usize, previous: &[DoA]) -> Result<Vec<DoA>> {
    let mut out: Vec<DoA> = local_maxima(grid).into_iter().take(count).map(|p| p.0).collect();
    if out.len() < count {
        let claimed: Vec<usize> = greedy_pairs(previous, &out).into_iter().map(|(i, _)| i).collect();
        for (i, e) in previous.iter().enumerate() {
            if out.len() == count {
                break;
            }
            if !claimed.contains(&i) {
                out.push(*e);
            }
        }
    }
    if out.len() < count {
        let extra = find_peaks(grid, count.min(grid.len()))?;
        for e in extra {
            if out.len() == count {
                break;
            }
            if !out.contains(&e) {
                out.push(e);
            }
        }
    }
    Ok(out)
}
