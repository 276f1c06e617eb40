#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;
use uca_doa::crb::CrbScenario;
use uca_doa::focusing::{sample_focusing_angles, FocusingAngleSet};
use uca_doa::harness::{reference_groups, ExperimentConfig, SweepAxis, SweepConfig};
use uca_doa::{ArrayGeometry, CMatrix, DoA, Method, C64};

pub const F0: f64 = 30e9;
pub const F_MAX: f64 = 34.5e9;

pub fn desk_geometry() -> ArrayGeometry {
    ArrayGeometry::with_max_radius(5, F_MAX, 3e8).unwrap()
}

pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, var: f64) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_normal(rng, var))
}

pub fn random_doa<R: Rng + ?Sized>(rng: &mut R) -> DoA {
    DoA::new(rng.random_range(10.0..80.0), rng.random_range(0.0..360.0)).unwrap()
}

/// Random in-band scenario with well separated sources.
pub fn random_crb_scenario<R: Rng + ?Sized>(rng: &mut R, sources: usize, snapshots: usize, bins: usize) -> CrbScenario {
    let mut doas: Vec<DoA> = Vec::new();
    while doas.len() < sources {
        let d = random_doa(rng);
        if doas.iter().all(|e| e.l1_distance(&d) > 20.0) {
            doas.push(d);
        }
    }
    let freqs: Vec<f64> = (0..bins).map(|_| rng.random_range(25.5e9..F_MAX)).collect();
    let spectra = (0..bins).map(|_| random_matrix(rng, sources, snapshots, 1.0)).collect();
    let var = rng.random_range(0.1..2.0);
    CrbScenario::new(desk_geometry(), doas, freqs, spectra, var).unwrap()
}

/// Random focusing set of one to three rectangular regions clear of the zenith.
pub fn random_focusing_set<R: Rng + ?Sized>(rng: &mut R) -> FocusingAngleSet {
    let count = rng.random_range(1..=3);
    let regions: Vec<_> = (0..count)
        .map(|_| {
            let tl = rng.random_range(5.0..70.0);
            let pl = rng.random_range(0.0..360.0);
            (
                (tl, (tl + rng.random_range(5.0f64..20.0)).min(90.0)),
                (pl, pl + rng.random_range(10.0..400.0)),
            )
        })
        .collect();
    let step = rng.random_range(0.5..3.0);
    sample_focusing_angles(&regions, step, step).unwrap()
}

/// Single-source trials at the four reference noise levels.
pub fn snr_sweep_config(trials: usize, threads: usize, output: &std::path::Path) -> ExperimentConfig {
    ExperimentConfig {
        methods: vec![Method::Ripf, Method::RCsm, Method::I2dCsm],
        doa_groups: reference_groups().into_iter().filter(|g| g.len() == 1).collect(),
        trials,
        sweep: Some(SweepConfig {
            axis: SweepAxis::Snr,
            values: vec![-10.0, 0.0, 10.0, 20.0],
        }),
        master_seed: 2024,
        output_dir: output.to_path_buf(),
        record_wall_time: false,
        threads: Some(threads),
        ..ExperimentConfig::default()
    }
}
