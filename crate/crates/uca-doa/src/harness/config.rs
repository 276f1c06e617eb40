use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::array::{ArrayGeometry, DoA};
use crate::error::{Error, Result};
use crate::estimators::{Method, RipfParams};
use crate::signal::ScenarioConfig;

/// Array description in a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArrayConfig {
    pub element_count: usize,
    /// Radius in metres; the half-wavelength limit at the top of the band
    /// when absent.
    pub radius: Option<f64>,
    pub light_speed: f64,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        ArrayConfig {
            element_count: 5,
            radius: None,
            light_speed: 3e8,
        }
    }
}

/// Parameter varied across a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Snr,
    PreError,
    Steps,
    FftSize,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Snr => "snr",
            SweepAxis::PreError => "pre_error",
            SweepAxis::Steps => "steps",
            SweepAxis::FftSize => "fft_size",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "snr" => Ok(SweepAxis::Snr),
            "pre_error" => Ok(SweepAxis::PreError),
            "steps" => Ok(SweepAxis::Steps),
            "fft_size" => Ok(SweepAxis::FftSize),
            _ => Err(Error::Config(format!("unknown sweep axis {s}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

/// Complete description of a Monte-Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub array: ArrayConfig,
    pub scenario: ScenarioConfig,
    pub methods: Vec<Method>,
    pub ripf: RipfParams,
    /// Groups of arrival directions; trials of groups with equal size are
    /// pooled in the results.
    pub doa_groups: Vec<Vec<DoA>>,
    /// Trials per group.
    pub trials: usize,
    pub sweep: Option<SweepConfig>,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// Measure estimator wall time. Timings are the only non-reproducible
    /// output; disable for byte-identical tables.
    pub record_wall_time: bool,
    pub threads: Option<usize>,
    /// Expected iterations to convergence used by the complexity condition.
    pub convergence_iterations: f64,
}

fn d(t: f64, p: f64) -> DoA {
    DoA::new(t, p).expect("static direction")
}

/// Reference direction groups with one, two and three sources.
pub fn reference_groups() -> Vec<Vec<DoA>> {
    vec![
        vec![d(60.0, 150.0)],
        vec![d(33.0, 50.0)],
        vec![d(28.0, 230.0)],
        vec![d(60.0, 150.0), d(20.0, 45.0)],
        vec![d(40.0, 175.0), d(70.0, 250.0)],
        vec![d(25.0, 230.0), d(65.0, 150.0)],
        vec![d(60.0, 150.0), d(30.0, 95.0), d(45.0, 300.0)],
        vec![d(30.0, 50.0), d(40.0, 190.0), d(70.0, 250.0)],
        vec![d(25.0, 230.0), d(65.0, 150.0), d(35.0, 60.0)],
    ]
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            array: ArrayConfig::default(),
            scenario: ScenarioConfig::default(),
            methods: Method::ALL.to_vec(),
            ripf: RipfParams::default(),
            doa_groups: reference_groups(),
            trials: 50,
            sweep: None,
            master_seed: 1,
            output_dir: PathBuf::from("results"),
            record_wall_time: true,
            threads: None,
            convergence_iterations: 5.0,
        }
    }
}

fn cfg_err(e: impl fmt::Display) -> Error {
    Error::Config(e.to_string())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(cfg_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Switches to the full-length observation and trial count.
    pub fn paper_scale(mut self) -> Self {
        self.scenario.duration = 1e-5;
        self.trials = 200;
        self
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        let a = &self.array;
        let g = match a.radius {
            Some(r) => ArrayGeometry::new(a.element_count, r, a.light_speed)?,
            None => ArrayGeometry::with_max_radius(a.element_count, self.scenario.max_frequency(), a.light_speed)?,
        };
        Ok(g)
    }

    /// Sweep points as `(index, value)`; a single unlabelled point without a
    /// sweep.
    pub fn sweep_points(&self) -> Vec<(usize, Option<f64>)> {
        match &self.sweep {
            Some(s) => s.values.iter().enumerate().map(|(i, v)| (i, Some(*v))).collect(),
            None => vec![(0, None)],
        }
    }

    /// Configuration with the sweep axis set to `value`.
    pub fn at_sweep_value(&self, value: Option<f64>) -> Result<Self> {
        let mut c = self.clone();
        if let (Some(s), Some(v)) = (&self.sweep, value) {
            match s.axis {
                SweepAxis::Snr => c.scenario.snr_db = Some(v),
                SweepAxis::PreError => {
                    c.ripf.avg_err_theta = v;
                    c.ripf.avg_err_phi = v;
                }
                SweepAxis::Steps => {
                    c.ripf.step_theta = v;
                    c.ripf.step_phi = v;
                }
                SweepAxis::FftSize => {
                    if v.fract() != 0.0 || v < 1.0 {
                        return Err(Error::Config(format!("fft size {v} is not a positive integer")));
                    }
                    c.scenario.fft_size = v as usize;
                }
            }
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return Err(Error::Config("methods must be unique".into()));
        }
        if self.doa_groups.is_empty() || self.doa_groups.iter().any(|g| g.is_empty()) {
            return Err(Error::Config("doa_groups must be non-empty lists".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        if !(self.convergence_iterations > 0.0) {
            return Err(Error::Config("convergence_iterations must be positive".into()));
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() || s.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("sweep values must be finite and non-empty".into()));
            }
        }
        for (_, v) in self.sweep_points() {
            let c = self.at_sweep_value(v)?;
            let g = c.geometry().map_err(cfg_err)?;
            c.ripf.validate().map_err(cfg_err)?;
            for grp in &c.doa_groups {
                let mut s = c.scenario.clone();
                s.path_doas = grp.clone();
                s.validate(&g).map_err(cfg_err)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_json() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let back = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            ExperimentConfig::from_json(r#"{"trails": 3}"#),
            Err(Error::Config(_))
        ));
        assert!(ExperimentConfig::from_json(r#"{"scenario": {"center_frequency": 1}}"#).is_err());
    }

    #[test]
    fn sweep_values_override_fields() {
        let c = ExperimentConfig {
            sweep: Some(SweepConfig {
                axis: SweepAxis::Steps,
                values: vec![1.0],
            }),
            ..ExperimentConfig::default()
        };
        let v = c.at_sweep_value(Some(1.0)).unwrap();
        assert_eq!((v.ripf.step_theta, v.ripf.step_phi), (1.0, 1.0));
        assert_eq!("pre-error".parse::<SweepAxis>().unwrap(), SweepAxis::PreError);
    }

    #[test]
    fn geometry_defaults_to_band_limit() {
        let g = ExperimentConfig::default().geometry().unwrap();
        let want = 3e8 / (4.0 * 34.5e9 * (std::f64::consts::PI / 5.0).sin());
        assert!((g.radius() - want).abs() < 1e-15);
    }
}
