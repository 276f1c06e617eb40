//! Wideband scenario synthesis and conversion to narrowband snapshots.

mod iq;

pub use iq::{read_iq, write_iq, IQ_HEADER_LEN};

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::array::{ArrayGeometry, DoA};
use crate::error::{invalid, Result};
use crate::{CMatrix, C64};

/// Parameters of a synthetic wideband scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Carrier frequency `f0`, Hz.
    pub center_frequency: f64,
    /// Sweep bandwidth of the chirp, Hz.
    pub bandwidth: f64,
    /// Complex sampling rate, Hz.
    pub sample_rate: f64,
    /// Observation time, s.
    pub duration: f64,
    /// DFT length per snapshot segment.
    pub fft_size: usize,
    /// Per-element signal-to-noise ratio in dB; `None` disables noise.
    pub snr_db: Option<f64>,
    /// Arrival directions of the propagation paths.
    #[serde(default)]
    pub path_doas: Vec<DoA>,
    /// Delay between consecutive paths, s.
    #[serde(default = "default_path_delay")]
    pub path_delay: f64,
    #[serde(default)]
    pub seed: u64,
    /// Apply the array response as true per-element delays instead of
    /// per-bin phase shifts.
    #[serde(default)]
    pub time_domain_steering: bool,
}

fn default_path_delay() -> f64 {
    1e-9
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            center_frequency: 30e9,
            bandwidth: 9e9,
            sample_rate: 11.25e9,
            duration: 1e-6,
            fft_size: 32,
            snr_db: Some(10.0),
            path_doas: Vec::new(),
            path_delay: default_path_delay(),
            seed: 0,
            time_domain_steering: false,
        }
    }
}

impl ScenarioConfig {
    /// Number of time samples per element.
    pub fn sample_count(&self) -> usize {
        (self.duration * self.sample_rate * (1.0 + 1e-12)).floor() as usize
    }

    /// Snapshots per frequency bin.
    pub fn snapshots_per_bin(&self) -> usize {
        self.sample_count().checked_div(self.fft_size).unwrap_or(0)
    }

    /// Highest frequency occupied by the signal.
    pub fn max_frequency(&self) -> f64 {
        self.center_frequency + self.bandwidth / 2.0
    }

    /// Per-sample noise variance implied by the SNR, summed over path powers.
    pub fn noise_variance(&self) -> Option<f64> {
        self.snr_db
            .map(|snr| self.path_doas.len() as f64 * 10f64.powf(-snr / 10.0))
    }

    /// Checks the configuration against an array geometry.
    pub fn validate(&self, geometry: &ArrayGeometry) -> Result<()> {
        let positive = [
            ("center_frequency", self.center_frequency),
            ("bandwidth", self.bandwidth),
            ("sample_rate", self.sample_rate),
            ("duration", self.duration),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be positive")));
            }
        }
        if !(self.path_delay.is_finite() && self.path_delay >= 0.0) {
            return Err(invalid("path_delay must be non-negative"));
        }
        if self.sample_rate < self.bandwidth {
            return Err(invalid("sample_rate must be at least the bandwidth"));
        }
        if self.bandwidth / 2.0 >= self.center_frequency {
            return Err(invalid("band must stay above 0 Hz"));
        }
        if self.fft_size < 1 || self.fft_size >= self.sample_count() {
            return Err(invalid("fft_size must lie in [1, sample count)"));
        }
        if self.path_doas.is_empty() || self.path_doas.len() >= geometry.element_count() {
            return Err(invalid(format!(
                "path count {} must lie in [1, {})",
                self.path_doas.len(),
                geometry.element_count()
            )));
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(invalid("snr_db must be finite or null"));
            }
        }
        geometry.check_band(self.max_frequency())
    }
}

/// Multichannel complex baseband samples, `M × K_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSamples {
    pub data: CMatrix,
    pub sample_rate: f64,
}

/// Per-bin snapshot matrices produced by segment DFTs.
#[derive(Debug, Clone)]
pub struct NarrowbandStack {
    bins: Vec<CMatrix>,
    frequencies: Vec<f64>,
    covariances: Vec<CMatrix>,
}

impl NarrowbandStack {
    /// Builds a stack from `Z` matrices of shape `M × K_f` and their bin
    /// frequencies.
    pub fn new(bins: Vec<CMatrix>, frequencies: Vec<f64>) -> Result<Self> {
        if bins.is_empty() || bins.len() != frequencies.len() {
            return Err(invalid("bin and frequency counts must match and be non-zero"));
        }
        let (m, k) = bins[0].shape();
        if m == 0 || k == 0 || bins.iter().any(|b| b.shape() != (m, k)) {
            return Err(invalid("all bins must share a non-empty M × K_f shape"));
        }
        let covariances = bins.iter().map(|x| x * x.adjoint()).collect();
        Ok(NarrowbandStack {
            bins,
            frequencies,
            covariances,
        })
    }

    pub fn bin_count(&self) -> usize {
        self.bins.len()
    }

    pub fn element_count(&self) -> usize {
        self.bins[0].nrows()
    }

    pub fn snapshots_per_bin(&self) -> usize {
        self.bins[0].ncols()
    }

    pub fn bin(&self, z: usize) -> &CMatrix {
        &self.bins[z]
    }

    pub fn bins(&self) -> &[CMatrix] {
        &self.bins
    }

    /// Bin frequencies in Hz, indexed like [`bin`](Self::bin).
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// Unnormalised outer product `X X^H` of bin `z`.
    pub fn outer_product(&self, z: usize) -> &CMatrix {
        &self.covariances[z]
    }
}

/// Centre frequency of bin `z` (1-based) of a `fft_size`-point DFT.
pub fn bin_frequency(z: usize, center: f64, sample_rate: f64, fft_size: usize) -> Result<f64> {
    if fft_size == 0 || z == 0 || z > fft_size {
        return Err(invalid(format!("bin {z} outside 1..={fft_size}")));
    }
    let k = (z - 1) as f64;
    let zf = fft_size as f64;
    let offset = if 2 * (z - 1) < fft_size {
        k * sample_rate / zf
    } else {
        (k - zf) * sample_rate / zf
    };
    Ok(center + offset)
}

/// Baseband linear chirp sampled at `t`: sweeps `-B/2..B/2` over `duration`.
fn chirp(t: f64, bandwidth: f64, duration: f64) -> C64 {
    C64::from_polar(1.0, PI * (bandwidth / duration) * t * t - PI * bandwidth * t)
}

/// Clean baseband samples of path `n` before the array response.
fn path_samples(cfg: &ScenarioConfig, n: usize, advance: f64) -> Vec<C64> {
    let kt = cfg.sample_count();
    let tau = n as f64 * cfg.path_delay - advance;
    let carrier = C64::from_polar(1.0, -2.0 * PI * cfg.center_frequency * tau);
    (0..kt)
        .map(|k| {
            let t = k as f64 / cfg.sample_rate - tau;
            if t < 0.0 {
                C64::new(0.0, 0.0)
            } else {
                chirp(t, cfg.bandwidth, cfg.duration) * carrier
            }
        })
        .collect()
}

/// Complex circular Gaussian sample with variance `var`.
fn gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

/// Adds circular Gaussian noise of variance `var` to every sample.
pub fn add_noise<R: Rng + ?Sized>(data: &mut CMatrix, var: f64, rng: &mut R) {
    for x in data.iter_mut() {
        *x += gaussian(rng, var);
    }
}

/// Noise-only samples of shape `elements × samples`.
pub fn noise_samples<R: Rng + ?Sized>(elements: usize, samples: usize, var: f64, rng: &mut R) -> CMatrix {
    let mut d = CMatrix::zeros(elements, samples);
    add_noise(&mut d, var, rng);
    d
}

/// Synthesises the array output for a scenario.
pub fn synthesize_received<R: Rng + ?Sized>(
    geometry: &ArrayGeometry,
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> Result<TimeSamples> {
    cfg.validate(geometry)?;
    let mut data = if cfg.time_domain_steering {
        steer_time_domain(geometry, cfg)
    } else {
        steer_per_bin(geometry, cfg)?
    };
    if let Some(var) = cfg.noise_variance() {
        add_noise(&mut data, var, rng);
    }
    Ok(TimeSamples {
        data,
        sample_rate: cfg.sample_rate,
    })
}

/// Applies the array response in the DFT domain of each segment, so that the
/// narrowband model holds exactly at every bin.
fn steer_per_bin(geometry: &ArrayGeometry, cfg: &ScenarioConfig) -> Result<CMatrix> {
    let m = geometry.element_count();
    let kt = cfg.sample_count();
    let z = cfg.fft_size;
    let kf = kt / z;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(z);
    let inv = planner.plan_fft_inverse(z);
    let freqs: Vec<f64> = (1..=z)
        .map(|b| bin_frequency(b, cfg.center_frequency, cfg.sample_rate, z))
        .collect::<Result<_>>()?;
    let mut steer = vec![vec![C64::new(0.0, 0.0); m]; z];
    let mut out = CMatrix::zeros(m, kt);
    let mut acc = vec![C64::new(0.0, 0.0); m * z];
    let mut seg = vec![C64::new(0.0, 0.0); z];
    let paths: Vec<Vec<C64>> = (0..cfg.path_doas.len()).map(|n| path_samples(cfg, n, 0.0)).collect();
    for k in 0..kf {
        acc.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        for (n, doa) in cfg.path_doas.iter().enumerate() {
            seg.copy_from_slice(&paths[n][k * z..(k + 1) * z]);
            fwd.process(&mut seg);
            for (b, f) in freqs.iter().enumerate() {
                geometry.steer_into(*f, doa, &mut steer[b]);
                for e in 0..m {
                    acc[e * z + b] += steer[b][e] * seg[b];
                }
            }
        }
        for e in 0..m {
            let row = &mut acc[e * z..(e + 1) * z];
            inv.process(row);
            for (t, v) in row.iter().enumerate() {
                out[(e, k * z + t)] = *v / z as f64;
            }
        }
    }
    // samples past the last whole segment never reach a bin; steer them at f0
    let mut a0 = vec![C64::new(0.0, 0.0); m];
    for (n, doa) in cfg.path_doas.iter().enumerate() {
        geometry.steer_into(cfg.center_frequency, doa, &mut a0);
        for t in kf * z..kt {
            for e in 0..m {
                out[(e, t)] += a0[e] * paths[n][t];
            }
        }
    }
    Ok(out)
}

/// Applies the array response as a physical delay at every element.
fn steer_time_domain(geometry: &ArrayGeometry, cfg: &ScenarioConfig) -> CMatrix {
    let m = geometry.element_count();
    let kt = cfg.sample_count();
    let mut out = CMatrix::zeros(m, kt);
    let mut proj = vec![0.0; m];
    for (n, doa) in cfg.path_doas.iter().enumerate() {
        geometry.projections(doa, &mut proj);
        for e in 0..m {
            let lead = geometry.radius() / geometry.light_speed() * proj[e];
            let s = path_samples(cfg, n, lead);
            for t in 0..kt {
                out[(e, t)] += s[t];
            }
        }
    }
    out
}

/// Splits each row into `fft_size`-sample segments and takes their DFTs.
pub fn to_narrowband(samples: &TimeSamples, center: f64, fft_size: usize) -> Result<NarrowbandStack> {
    let (m, kt) = samples.data.shape();
    if fft_size == 0 || fft_size > kt {
        return Err(invalid(format!("fft size {fft_size} incompatible with {kt} samples")));
    }
    let kf = kt / fft_size;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(fft_size);
    let mut bins = vec![CMatrix::zeros(m, kf); fft_size];
    let mut seg = vec![C64::new(0.0, 0.0); fft_size];
    for e in 0..m {
        for k in 0..kf {
            for (t, s) in seg.iter_mut().enumerate() {
                *s = samples.data[(e, k * fft_size + t)];
            }
            fft.process(&mut seg);
            for (b, v) in seg.iter().enumerate() {
                bins[b][(e, k)] = *v;
            }
        }
    }
    let freqs = (1..=fft_size)
        .map(|z| bin_frequency(z, center, samples.sample_rate, fft_size))
        .collect::<Result<_>>()?;
    NarrowbandStack::new(bins, freqs)
}

/// DFT coefficients of each path's clean signal, indexed `[bin][path × snapshot]`.
pub fn source_spectra(cfg: &ScenarioConfig) -> Result<Vec<CMatrix>> {
    let z = cfg.fft_size;
    let kt = cfg.sample_count();
    if z == 0 || z > kt {
        return Err(invalid("fft size incompatible with sample count"));
    }
    let kf = kt / z;
    let n = cfg.path_doas.len();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(z);
    let mut out = vec![CMatrix::zeros(n, kf); z];
    let mut seg = vec![C64::new(0.0, 0.0); z];
    for p in 0..n {
        let s = path_samples(cfg, p, 0.0);
        for k in 0..kf {
            seg.copy_from_slice(&s[k * z..(k + 1) * z]);
            fft.process(&mut seg);
            for (b, v) in seg.iter().enumerate() {
                out[b][(p, k)] = *v;
            }
        }
    }
    Ok(out)
}

/// Perturbs the true directions by uniformly distributed errors whose mean
/// magnitudes are `avg_theta` and `avg_phi` degrees.
pub fn make_pre_estimates<R: Rng + ?Sized>(
    truth: &[DoA],
    avg_theta: f64,
    avg_phi: f64,
    rng: &mut R,
) -> Result<Vec<DoA>> {
    if !(avg_theta >= 0.0 && avg_phi >= 0.0) || !avg_theta.is_finite() || !avg_phi.is_finite() {
        return Err(invalid("average pre-estimate errors must be non-negative"));
    }
    let mut draw = |avg: f64| -> f64 {
        let mag = rng.random::<f64>() * 2.0 * avg;
        if rng.random::<bool>() {
            mag
        } else {
            -mag
        }
    };
    Ok(truth
        .iter()
        .map(|d| {
            let dt = draw(avg_theta);
            let dp = draw(avg_phi);
            DoA::clamped(d.elevation() + dt, d.azimuth() + dp)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::manifold_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_cfg(doas: Vec<DoA>) -> ScenarioConfig {
        ScenarioConfig {
            duration: 1e-7,
            snr_db: None,
            path_doas: doas,
            ..ScenarioConfig::default()
        }
    }

    fn geom() -> ArrayGeometry {
        ArrayGeometry::with_max_radius(5, 34.5e9, 3e8).unwrap()
    }

    #[test]
    fn bin_frequencies_follow_layout() {
        let f = |z| bin_frequency(z, 30e9, 11.25e9, 32).unwrap();
        assert_eq!(f(1), 30e9);
        assert_eq!(f(17), 30e9 - 11.25e9 / 2.0);
        assert!((f(2) - (30e9 + 11.25e9 / 32.0)).abs() < 1e-3);
        let mut all: Vec<f64> = (1..=32).map(f).collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        assert_eq!(all.len(), 32);
        assert!(all.iter().all(|&x| (30e9 - 11.25e9 / 2.0..30e9 + 11.25e9 / 2.0).contains(&x)));
        assert!(bin_frequency(0, 30e9, 1.0, 32).is_err());
    }

    #[test]
    fn pure_tone_lands_in_second_bin() {
        let z = 32;
        let fs = 11.25e9;
        let n = z * 4;
        let data = CMatrix::from_fn(1, n, |_, t| {
            C64::from_polar(1.0, 2.0 * PI * (fs / z as f64) * t as f64 / fs)
        });
        let stack = to_narrowband(&TimeSamples { data, sample_rate: fs }, 30e9, z).unwrap();
        for b in 0..z {
            let e: f64 = stack.bin(b).iter().map(|x| x.norm_sqr()).sum();
            if b == 1 {
                assert!((e - 4.0 * (z * z) as f64).abs() < 1e-6);
            } else {
                assert!(e < 1e-12);
            }
        }
    }

    #[test]
    fn parseval_holds_per_segment() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = noise_samples(3, 320, 1.0, &mut rng);
        let time_energy: f64 = data.iter().map(|x| x.norm_sqr()).sum();
        let stack = to_narrowband(&TimeSamples { data, sample_rate: 1e9 }, 1e10, 32).unwrap();
        let freq_energy: f64 = stack.bins().iter().flat_map(|b| b.iter()).map(|x| x.norm_sqr()).sum();
        assert!((freq_energy / 32.0 - time_energy).abs() < 1e-9 * time_energy);
    }

    #[test]
    fn per_bin_model_is_exact() {
        let g = geom();
        let cfg = small_cfg(vec![DoA::new(60.0, 150.0).unwrap(), DoA::new(20.0, 45.0).unwrap()]);
        let x = synthesize_received(&g, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let stack = to_narrowband(&x, cfg.center_frequency, cfg.fft_size).unwrap();
        let spectra = source_spectra(&cfg).unwrap();
        for z in 0..cfg.fft_size {
            let a = manifold_matrix(&g, stack.frequencies()[z], &cfg.path_doas).unwrap();
            let model = &a * &spectra[z];
            let err = (stack.bin(z) - &model).norm();
            assert!(err < 1e-9 * model.norm().max(1.0), "bin {z}: {err}");
        }
    }

    #[test]
    fn time_domain_steering_approximates_bins() {
        let g = geom();
        let mut cfg = small_cfg(vec![DoA::new(40.0, 100.0).unwrap()]);
        let a = synthesize_received(&g, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        cfg.time_domain_steering = true;
        let b = synthesize_received(&g, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let rel = (&a.data - &b.data).norm() / a.data.norm();
        assert!(rel < 0.2, "relative mismatch {rel}");
    }

    #[test]
    fn noise_power_matches_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = noise_samples(1, 1_000_000, 0.37, &mut rng);
        let p = d.iter().map(|x| x.norm_sqr()).sum::<f64>() / 1e6;
        assert!((p / 0.37 - 1.0).abs() < 0.01);
    }

    #[test]
    fn noiseless_runs_are_repeatable() {
        let g = geom();
        let cfg = small_cfg(vec![DoA::new(33.0, 50.0).unwrap()]);
        let a = synthesize_received(&g, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = synthesize_received(&g, &cfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let g = geom();
        let good = small_cfg(vec![DoA::new(10.0, 0.0).unwrap()]);
        assert!(good.validate(&g).is_ok());
        let mut c = good.clone();
        c.sample_rate = 1e9;
        assert!(c.validate(&g).is_err());
        let mut c = good.clone();
        c.fft_size = c.sample_count();
        assert!(c.validate(&g).is_err());
        let mut c = good.clone();
        c.path_doas = vec![DoA::new(10.0, 0.0).unwrap(); 5];
        assert!(c.validate(&g).is_err());
        let mut c = good;
        c.path_doas.clear();
        assert!(c.validate(&g).is_err());
    }

    #[test]
    fn pre_estimate_errors_have_requested_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let truth = vec![DoA::new(45.0, 180.0).unwrap()];
        let n = 20_000;
        let (mut st, mut sp) = (0.0, 0.0);
        for _ in 0..n {
            let p = make_pre_estimates(&truth, 3.0, 2.0, &mut rng).unwrap();
            st += (p[0].elevation() - 45.0).abs();
            sp += (p[0].azimuth() - 180.0).abs();
        }
        assert!((st / n as f64 - 3.0).abs() < 0.05);
        assert!((sp / n as f64 - 2.0).abs() < 0.05);
        let exact = make_pre_estimates(&truth, 0.0, 0.0, &mut rng).unwrap();
        assert_eq!(exact, truth);
    }
}
