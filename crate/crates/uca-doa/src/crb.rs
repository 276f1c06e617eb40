//! Deterministic Cramér-Rao bound for wideband arrival directions.
//!
//! The narrowband noise at every bin is circular Gaussian with covariance
//! `Zσ²I`. Source spectra are deterministic unknowns. The bound is derived in
//! radians and reported in both radians² and degrees².

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::array::{manifold_matrix, steering_derivatives, ArrayGeometry, DoA};
use crate::error::{invalid, Error, Result};
use crate::signal::{bin_frequency, source_spectra, ScenarioConfig};
use crate::{CMatrix, C64};

/// Real matrix type used for Fisher information.
pub type RMatrix = DMatrix<f64>;

const DEG2_PER_RAD2: f64 = (180.0 / PI) * (180.0 / PI);

/// Everything the bound depends on.
#[derive(Debug, Clone)]
pub struct CrbScenario {
    pub geometry: ArrayGeometry,
    pub doas: Vec<DoA>,
    /// Bin frequencies, Hz.
    pub frequencies: Vec<f64>,
    /// Source spectra per bin, each `N × K_f`.
    pub spectra: Vec<CMatrix>,
    /// Per-sample noise variance `σ²`.
    pub noise_variance: f64,
}

impl CrbScenario {
    pub fn new(
        geometry: ArrayGeometry,
        doas: Vec<DoA>,
        frequencies: Vec<f64>,
        spectra: Vec<CMatrix>,
        noise_variance: f64,
    ) -> Result<Self> {
        let n = doas.len();
        if n == 0 {
            return Err(invalid("at least one source is required"));
        }
        if frequencies.is_empty() || frequencies.len() != spectra.len() {
            return Err(invalid("one spectrum per frequency is required"));
        }
        let kf = spectra[0].ncols();
        if kf == 0 || spectra.iter().any(|s| s.shape() != (n, kf)) {
            return Err(invalid("spectra must all be N × K_f with K_f ≥ 1"));
        }
        if !(noise_variance.is_finite() && noise_variance > 0.0) {
            return Err(invalid("noise variance must be positive"));
        }
        Ok(CrbScenario {
            geometry,
            doas,
            frequencies,
            spectra,
            noise_variance,
        })
    }

    /// Scenario for the clean spectra of a synthetic configuration.
    /// Returns `Ok(None)` when the configuration is noiseless.
    pub fn from_config(geometry: &ArrayGeometry, cfg: &ScenarioConfig) -> Result<Option<Self>> {
        let Some(var) = cfg.noise_variance() else {
            return Ok(None);
        };
        let spectra = source_spectra(cfg)?;
        let freqs = (1..=cfg.fft_size)
            .map(|z| bin_frequency(z, cfg.center_frequency, cfg.sample_rate, cfg.fft_size))
            .collect::<Result<_>>()?;
        Self::new(geometry.clone(), cfg.path_doas.clone(), freqs, spectra, var).map(Some)
    }

    pub fn source_count(&self) -> usize {
        self.doas.len()
    }

    pub fn bin_count(&self) -> usize {
        self.frequencies.len()
    }

    pub fn snapshots(&self) -> usize {
        self.spectra[0].ncols()
    }

    fn z(&self) -> f64 {
        self.bin_count() as f64
    }

    /// `[ρθ_1..ρθ_N, ρφ_1..ρφ_N]` at bin `b`.
    fn derivative_matrix(&self, b: usize) -> Result<CMatrix> {
        let n = self.source_count();
        let m = self.geometry.element_count();
        let mut d = CMatrix::zeros(m, 2 * n);
        for (i, doa) in self.doas.iter().enumerate() {
            let (dt, dp) = steering_derivatives(&self.geometry, self.frequencies[b], doa)?;
            d.set_column(i, &dt);
            d.set_column(n + i, &dp);
        }
        Ok(d)
    }

    /// Diagonal of `Ξ(k, f_b)`: the spectrum repeated for both angle blocks.
    fn xi(&self, b: usize, k: usize) -> Vec<C64> {
        let s = self.spectra[b].column(k);
        s.iter().chain(s.iter()).copied().collect()
    }

    /// `I − A (A^H A)^{-1} A^H` at bin `b`.
    fn orthogonal_projector(&self, b: usize) -> Result<CMatrix> {
        let a = manifold_matrix(&self.geometry, self.frequencies[b], &self.doas)?;
        let sv = a.clone().svd(false, false).singular_values;
        let (hi, lo) = (sv.max(), sv.min());
        if !(lo > 1e-9 * hi) {
            return Err(Error::Unidentifiable("steering vectors are linearly dependent".into()));
        }
        let gram = a.adjoint() * &a;
        let inv = gram
            .cholesky()
            .ok_or_else(|| Error::Unidentifiable("singular manifold Gram matrix".into()))?
            .inverse();
        let m = self.geometry.element_count();
        Ok(CMatrix::identity(m, m) - &a * inv * a.adjoint())
    }
}

/// Bound on the arrival-direction parameters `[θ_1..θ_N, φ_1..φ_N]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrbResult {
    doa_block: RMatrix,
}

impl CrbResult {
    /// Covariance bound in radians².
    pub fn doa_block_rad2(&self) -> &RMatrix {
        &self.doa_block
    }

    /// Covariance bound in degrees².
    pub fn doa_block_deg2(&self) -> RMatrix {
        &self.doa_block * DEG2_PER_RAD2
    }

    /// `(var θ_n, var φ_n)` bounds in degrees².
    pub fn per_angle_bounds_deg2(&self) -> Vec<(f64, f64)> {
        let n = self.doa_block.nrows() / 2;
        (0..n)
            .map(|i| {
                (
                    self.doa_block[(i, i)] * DEG2_PER_RAD2,
                    self.doa_block[(n + i, n + i)] * DEG2_PER_RAD2,
                )
            })
            .collect()
    }

    /// Trace of the bound in degrees².
    pub fn trace_deg2(&self) -> f64 {
        self.doa_block.trace() * DEG2_PER_RAD2
    }
}

fn invert_information(j: RMatrix, scale: f64) -> Result<CrbResult> {
    let inv = j
        .cholesky()
        .ok_or_else(|| Error::Unidentifiable("direction information matrix is singular".into()))?
        .inverse();
    Ok(CrbResult {
        doa_block: inv * scale,
    })
}

/// Concentrated bound `(Zσ²/2) [Σ Re(Ξ^H D^H P⊥ D Ξ)]^{-1}`.
pub fn crb_closed_form(scn: &CrbScenario) -> Result<CrbResult> {
    let n2 = 2 * scn.source_count();
    let mut j = RMatrix::zeros(n2, n2);
    for b in 0..scn.bin_count() {
        let d = scn.derivative_matrix(b)?;
        let g = d.adjoint() * scn.orthogonal_projector(b)? * &d;
        for k in 0..scn.snapshots() {
            let xi = scn.xi(b, k);
            for p in 0..n2 {
                for q in 0..n2 {
                    j[(p, q)] += (xi[p].conj() * g[(p, q)] * xi[q]).re;
                }
            }
        }
    }
    invert_information(j, scn.z() * scn.noise_variance / 2.0)
}

/// Same bound assembled as `Re[(D^H P⊥ D) ⊙ R]` with `R = Σ_k ξ^* ξ^T`.
pub fn crb_hadamard(scn: &CrbScenario) -> Result<CrbResult> {
    let n2 = 2 * scn.source_count();
    let mut j = RMatrix::zeros(n2, n2);
    for b in 0..scn.bin_count() {
        let d = scn.derivative_matrix(b)?;
        let g = d.adjoint() * scn.orthogonal_projector(b)? * &d;
        let mut r = CMatrix::zeros(n2, n2);
        for k in 0..scn.snapshots() {
            let xi = nalgebra::DVector::from_vec(scn.xi(b, k));
            r += xi.conjugate() * xi.transpose();
        }
        j += g.component_mul(&r).map(|x| x.re);
    }
    invert_information(j, scn.z() * scn.noise_variance / 2.0)
}

/// Full Fisher information over `[σ², spectra, directions]`.
///
/// The spectra block is ordered by bin, then snapshot, then real parts
/// followed by imaginary parts of the `N` sources.
pub fn fisher_matrix(scn: &CrbScenario) -> Result<RMatrix> {
    let n = scn.source_count();
    let kf = scn.snapshots();
    let zc = scn.bin_count();
    let m = scn.geometry.element_count();
    let dim = 1 + 2 * n * kf * zc + 2 * n;
    let var = scn.noise_variance;
    let c = 2.0 / (scn.z() * var);
    let mut f = RMatrix::zeros(dim, dim);
    f[(0, 0)] = (kf * m * zc) as f64 / (var * var);
    let zeta = dim - 2 * n;
    for b in 0..zc {
        let a = manifold_matrix(&scn.geometry, scn.frequencies[b], &scn.doas)?;
        let d = scn.derivative_matrix(b)?;
        let lambda = a.adjoint() * &a * C64::new(c, 0.0);
        let ad = a.adjoint() * &d;
        let dd = d.adjoint() * &d;
        for k in 0..kf {
            let xi = scn.xi(b, k);
            let base = 1 + 2 * n * (k + kf * b);
            for r in 0..n {
                for s in 0..n {
                    let l = lambda[(r, s)];
                    f[(base + r, base + s)] = l.re;
                    f[(base + r, base + n + s)] = -l.im;
                    f[(base + n + r, base + s)] = l.im;
                    f[(base + n + r, base + n + s)] = l.re;
                }
            }
            for r in 0..n {
                for q in 0..2 * n {
                    let phi = ad[(r, q)] * xi[q] * c;
                    f[(base + r, zeta + q)] = phi.re;
                    f[(zeta + q, base + r)] = phi.re;
                    f[(base + n + r, zeta + q)] = phi.im;
                    f[(zeta + q, base + n + r)] = phi.im;
                }
            }
            for p in 0..2 * n {
                for q in 0..2 * n {
                    f[(zeta + p, zeta + q)] += c * (xi[p].conj() * dd[(p, q)] * xi[q]).re;
                }
            }
        }
    }
    Ok(f)
}

/// Log-likelihood of narrowband observations (one `M × K_f` matrix per bin).
pub fn log_likelihood(scn: &CrbScenario, observations: &[CMatrix]) -> Result<f64> {
    if observations.len() != scn.bin_count() {
        return Err(invalid("one observation matrix per bin is required"));
    }
    let m = scn.geometry.element_count();
    let kf = scn.snapshots();
    let zv = scn.z() * scn.noise_variance;
    let mut resid = 0.0;
    for (b, x) in observations.iter().enumerate() {
        if x.shape() != (m, kf) {
            return Err(invalid("observation shape must be M × K_f"));
        }
        let a = manifold_matrix(&scn.geometry, scn.frequencies[b], &scn.doas)?;
        resid += (x - a * &scn.spectra[b]).norm_squared();
    }
    let count = (kf * m * scn.bin_count()) as f64;
    Ok(-count * ((PI * scn.z()).ln() + scn.noise_variance.ln()) - resid / zv)
}

/// Root of the mean per-source bound over several scenarios, in degrees.
pub fn rmse_crb(results: &[CrbResult], sources: usize) -> Result<f64> {
    if results.is_empty() || sources == 0 {
        return Err(invalid("need at least one bound and one source"));
    }
    let total: f64 = results.iter().map(|r| r.trace_deg2()).sum();
    Ok((total / (results.len() * sources) as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scenario(seed: u64, n: usize) -> CrbScenario {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = ArrayGeometry::with_max_radius(5, 34.5e9, 3e8).unwrap();
        let doas = (0..n)
            .map(|i| DoA::new(20.0 + 25.0 * i as f64 + rng.random::<f64>() * 10.0, rng.random::<f64>() * 360.0).unwrap())
            .collect();
        let freqs = vec![29e9, 31e9];
        let spectra = (0..2)
            .map(|_| CMatrix::from_fn(n, 2, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * 4.0))
            .collect();
        CrbScenario::new(g, doas, freqs, spectra, 0.3).unwrap()
    }

    #[test]
    fn closed_form_matches_fisher_inverse() {
        for seed in 0..10 {
            let s = scenario(seed, 1);
            let f = fisher_matrix(&s).unwrap();
            let inv = f.clone().try_inverse().unwrap();
            let d = inv.nrows();
            let block = inv.view((d - 2, d - 2), (2, 2)).into_owned();
            let cf = crb_closed_form(&s).unwrap();
            let diff = (&block - cf.doa_block_rad2()).norm();
            assert!(diff <= 1e-8 * block.norm(), "seed {seed}: {diff}");
        }
    }

    #[test]
    fn hadamard_matches_closed_form() {
        for seed in 0..10 {
            let s = scenario(seed, 2);
            let a = crb_closed_form(&s).unwrap();
            let b = crb_hadamard(&s).unwrap();
            assert!((a.doa_block_rad2() - b.doa_block_rad2()).norm() <= 1e-10 * a.doa_block_rad2().norm());
        }
    }

    #[test]
    fn bound_scales_with_noise() {
        let mut s = scenario(3, 1);
        let a = crb_closed_form(&s).unwrap().trace_deg2();
        s.noise_variance *= 4.0;
        let b = crb_closed_form(&s).unwrap().trace_deg2();
        assert!((b / a - 4.0).abs() < 1e-9);
    }

    #[test]
    fn coincident_sources_are_unidentifiable() {
        let mut s = scenario(1, 2);
        s.doas[1] = s.doas[0];
        assert!(matches!(crb_closed_form(&s), Err(Error::Unidentifiable(_))));
    }

    #[test]
    fn degree_scaling_is_consistent() {
        let s = scenario(4, 1);
        let r = crb_closed_form(&s).unwrap();
        let deg = r.doa_block_deg2();
        let rad = r.doa_block_rad2();
        assert!((deg[(0, 0)] - rad[(0, 0)] * (180.0 / PI).powi(2)).abs() < 1e-9 * deg[(0, 0)]);
        assert!((rmse_crb(std::slice::from_ref(&r), 1).unwrap() - r.trace_deg2().sqrt()).abs() < 1e-12);
    }
}
