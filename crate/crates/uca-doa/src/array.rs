//! Uniform circular array geometry, steering vectors and beam patterns.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::{CMatrix, CVector, C64};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// Wraps an azimuth in degrees into `[0, 360)`.
pub fn wrap_azimuth(deg: f64) -> f64 {
    let w = deg.rem_euclid(360.0);
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

/// Shortest angular distance between two azimuths, in `[0, 180]`.
pub fn azimuth_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Direction of arrival: elevation in `[0, 90]` and azimuth in `[0, 360)`,
/// both in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DoaRepr", into = "DoaRepr")]
pub struct DoA {
    elevation: f64,
    azimuth: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DoaRepr {
    elevation: f64,
    azimuth: f64,
}

impl TryFrom<DoaRepr> for DoA {
    type Error = Error;
    fn try_from(r: DoaRepr) -> Result<Self> {
        DoA::new(r.elevation, r.azimuth)
    }
}

impl From<DoA> for DoaRepr {
    fn from(d: DoA) -> Self {
        DoaRepr {
            elevation: d.elevation,
            azimuth: d.azimuth,
        }
    }
}

impl DoA {
    /// Builds a direction, wrapping the azimuth. Elevation must lie in `[0, 90]`.
    pub fn new(elevation: f64, azimuth: f64) -> Result<Self> {
        if !elevation.is_finite() || !azimuth.is_finite() {
            return Err(invalid("direction angles must be finite"));
        }
        if !(0.0..=90.0).contains(&elevation) {
            return Err(invalid(format!("elevation {elevation} outside [0, 90]")));
        }
        Ok(DoA {
            elevation,
            azimuth: wrap_azimuth(azimuth),
        })
    }

    /// Builds a direction, clipping the elevation and wrapping the azimuth.
    pub fn clamped(elevation: f64, azimuth: f64) -> Self {
        DoA {
            elevation: elevation.clamp(0.0, 90.0),
            azimuth: wrap_azimuth(azimuth),
        }
    }

    pub fn elevation(&self) -> f64 {
        self.elevation
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    /// `|Δθ| + |Δφ|` with the azimuth difference wrapped.
    pub fn l1_distance(&self, other: &DoA) -> f64 {
        (self.elevation - other.elevation).abs() + azimuth_distance(self.azimuth, other.azimuth)
    }

    /// `Δθ² + Δφ²` with the azimuth difference wrapped.
    pub fn squared_error(&self, other: &DoA) -> f64 {
        let dt = self.elevation - other.elevation;
        let dp = azimuth_distance(self.azimuth, other.azimuth);
        dt * dt + dp * dp
    }
}

/// Geometry of an `M`-element uniform circular array.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    element_count: usize,
    radius: f64,
    light_speed: f64,
    angles: Vec<f64>,
}

impl ArrayGeometry {
    /// Array with `element_count` elements on a circle of `radius` metres.
    pub fn new(element_count: usize, radius: f64, light_speed: f64) -> Result<Self> {
        if element_count < 2 {
            return Err(invalid("array needs at least two elements"));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(invalid(format!("radius {radius} must be positive")));
        }
        if !(light_speed.is_finite() && light_speed > 0.0) {
            return Err(invalid("propagation speed must be positive"));
        }
        let angles = (0..element_count)
            .map(|m| 2.0 * PI * m as f64 / element_count as f64)
            .collect();
        Ok(ArrayGeometry {
            element_count,
            radius,
            light_speed,
            angles,
        })
    }

    /// Array using the largest radius that keeps adjacent elements within a
    /// half wavelength at `max_frequency`.
    pub fn with_max_radius(element_count: usize, max_frequency: f64, light_speed: f64) -> Result<Self> {
        let r = max_radius(element_count, max_frequency, light_speed)?;
        Self::new(element_count, r, light_speed)
    }

    /// Checks the spacing constraint against the highest frequency in use.
    pub fn check_band(&self, max_frequency: f64) -> Result<()> {
        let limit = max_radius(self.element_count, max_frequency, self.light_speed)?;
        if self.radius > limit * (1.0 + 1e-12) {
            return Err(invalid(format!(
                "radius {} exceeds the half-wavelength limit {} at {} Hz",
                self.radius, limit, max_frequency
            )));
        }
        Ok(())
    }

    pub fn element_count(&self) -> usize {
        self.element_count
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn light_speed(&self) -> f64 {
        self.light_speed
    }

    /// Polar angle of each element in radians.
    pub fn element_angles(&self) -> &[f64] {
        &self.angles
    }

    /// Phase scale `2π r f / c`.
    pub fn phase_scale(&self, frequency: f64) -> f64 {
        2.0 * PI * self.radius * frequency / self.light_speed
    }

    /// Writes `sinθ·cos(α_m − φ)` for every element into `out`.
    pub(crate) fn projections(&self, doa: &DoA, out: &mut [f64]) {
        let s = doa.elevation.to_radians().sin();
        let phi = doa.azimuth.to_radians();
        for (o, &a) in out.iter_mut().zip(&self.angles) {
            *o = s * (a - phi).cos();
        }
    }

    /// Writes the steering entries for precomputed projections.
    pub(crate) fn steer_from_projections(&self, frequency: f64, proj: &[f64], out: &mut [C64]) {
        let k = self.phase_scale(frequency);
        for (o, &p) in out.iter_mut().zip(proj) {
            *o = C64::from_polar(1.0, k * p);
        }
    }

    /// Writes the steering entries for `doa` into `out`.
    pub(crate) fn steer_into(&self, frequency: f64, doa: &DoA, out: &mut [C64]) {
        let mut proj = [0.0f64; 64];
        if self.element_count <= proj.len() {
            let p = &mut proj[..self.element_count];
            self.projections(doa, p);
            self.steer_from_projections(frequency, p, out);
        } else {
            let mut p = vec![0.0; self.element_count];
            self.projections(doa, &mut p);
            self.steer_from_projections(frequency, &p, out);
        }
    }
}

/// Largest radius keeping adjacent elements within a half wavelength.
pub fn max_radius(element_count: usize, max_frequency: f64, light_speed: f64) -> Result<f64> {
    if element_count < 2 {
        return Err(invalid("array needs at least two elements"));
    }
    if !(max_frequency.is_finite() && max_frequency > 0.0) {
        return Err(invalid("maximum frequency must be positive"));
    }
    let lambda = light_speed / max_frequency;
    Ok(lambda / (4.0 * (PI / element_count as f64).sin()))
}

/// Unit-modulus response of the array to a plane wave.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector(pub CVector);

impl SteeringVector {
    pub fn as_slice(&self) -> &[C64] {
        self.0.as_slice()
    }
}

fn check_frequency(frequency: f64) -> Result<()> {
    if frequency.is_finite() && frequency > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("frequency {frequency} must be positive")))
    }
}

/// Steering vector of `geometry` at `frequency` toward `doa`.
pub fn steering_vector(geometry: &ArrayGeometry, frequency: f64, doa: &DoA) -> Result<SteeringVector> {
    check_frequency(frequency)?;
    let mut v = CVector::zeros(geometry.element_count);
    geometry.steer_into(frequency, doa, v.as_mut_slice());
    Ok(SteeringVector(v))
}

/// `M × N` matrix whose columns are the steering vectors of `doas`.
pub fn manifold_matrix(geometry: &ArrayGeometry, frequency: f64, doas: &[DoA]) -> Result<CMatrix> {
    check_frequency(frequency)?;
    let m = geometry.element_count;
    let mut a = CMatrix::zeros(m, doas.len());
    let mut col = vec![C64::new(0.0, 0.0); m];
    for (n, d) in doas.iter().enumerate() {
        geometry.steer_into(frequency, d, &mut col);
        a.column_mut(n).copy_from_slice(&col);
    }
    Ok(a)
}

/// Derivatives of the steering vector with respect to elevation and azimuth,
/// per radian.
pub fn steering_derivatives(
    geometry: &ArrayGeometry,
    frequency: f64,
    doa: &DoA,
) -> Result<(CVector, CVector)> {
    let a = steering_vector(geometry, frequency, doa)?.0;
    let k = geometry.phase_scale(frequency);
    let theta = doa.elevation.to_radians();
    let phi = doa.azimuth.to_radians();
    let j = C64::new(0.0, 1.0);
    let mut d_theta = CVector::zeros(a.len());
    let mut d_phi = CVector::zeros(a.len());
    for (m, &alpha) in geometry.angles.iter().enumerate() {
        d_theta[m] = j * k * theta.cos() * (alpha - phi).cos() * a[m];
        d_phi[m] = j * k * theta.sin() * (alpha - phi).sin() * a[m];
    }
    Ok((d_theta, d_phi))
}

/// Power of the quiescent pattern steered at zenith in direction `doa`.
pub fn quiescent_power(geometry: &ArrayGeometry, frequency: f64, doa: &DoA) -> f64 {
    let mut a = vec![C64::new(0.0, 0.0); geometry.element_count];
    geometry.steer_into(frequency, doa, &mut a);
    a.iter().sum::<C64>().norm_sqr()
}

const BEAM_SCAN_STEP: f64 = 0.01;

/// Half-width of one side of a pattern cut: first elevation at which the
/// quiescent power falls 3 dB below the peak.
fn half_cut(geometry: &ArrayGeometry, frequency: f64, azimuth: f64) -> Option<f64> {
    let peak = quiescent_power(geometry, frequency, &DoA::clamped(0.0, azimuth));
    let threshold = peak * 10f64.powf(-0.3);
    let steps = (90.0 / BEAM_SCAN_STEP).round() as usize;
    (1..=steps)
        .map(|k| k as f64 * BEAM_SCAN_STEP)
        .find(|&t| quiescent_power(geometry, frequency, &DoA::clamped(t, azimuth)) <= threshold)
}

/// Full 3 dB widths, in degrees, of the quiescent beam steered at zenith,
/// along the elevation cut (azimuth 0°/180°) and the orthogonal cut
/// (azimuth 90°/270°).
pub fn quiescent_beamwidths(geometry: &ArrayGeometry, frequency: f64) -> Result<(f64, f64)> {
    check_frequency(frequency)?;
    let cut = |a: f64, b: f64| -> Result<f64> {
        match (half_cut(geometry, frequency, a), half_cut(geometry, frequency, b)) {
            (Some(x), Some(y)) => Ok(x + y),
            _ => Err(Error::DegeneratePattern(format!(
                "pattern never drops 3 dB along azimuth {a}°/{b}° at {frequency} Hz"
            ))),
        }
    };
    Ok((cut(0.0, 180.0)?, cut(90.0, 270.0)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn geom() -> ArrayGeometry {
        ArrayGeometry::with_max_radius(5, 34.5e9, 3e8).unwrap()
    }

    #[test]
    fn boresight_is_all_ones() {
        let a = steering_vector(&geom(), 30e9, &DoA::new(0.0, 0.0).unwrap()).unwrap();
        for x in a.as_slice() {
            assert_relative_eq!(x.re, 1.0, epsilon = 1e-15);
            assert_relative_eq!(x.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn matches_plane_wave_delays() {
        // independent oracle: element position dotted with propagation direction
        let g = geom();
        let f = 31.7e9;
        let d = DoA::new(37.0, 211.0).unwrap();
        let a = steering_vector(&g, f, &d).unwrap();
        let (t, p) = (37f64.to_radians(), 211f64.to_radians());
        let u = [t.sin() * p.cos(), t.sin() * p.sin()];
        for m in 0..5 {
            let alpha = 2.0 * PI * m as f64 / 5.0;
            let pos = [g.radius() * alpha.cos(), g.radius() * alpha.sin()];
            let delay = (pos[0] * u[0] + pos[1] * u[1]) / g.light_speed();
            let want = C64::from_polar(1.0, 2.0 * PI * f * delay);
            assert!((a.0[m] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn radius_limit_enforced() {
        let r = max_radius(5, 34.5e9, 3e8).unwrap();
        let want = 3e8 / (4.0 * 34.5e9 * (PI / 5.0).sin());
        assert_relative_eq!(r, want, max_relative = 1e-15);
        let g = ArrayGeometry::new(5, r * 1.01, 3e8).unwrap();
        assert!(g.check_band(34.5e9).is_err());
        assert!(geom().check_band(34.5e9).is_ok());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(DoA::new(91.0, 0.0).is_err());
        assert!(DoA::new(-0.5, 0.0).is_err());
        assert!(ArrayGeometry::new(1, 0.01, 3e8).is_err());
        assert!(steering_vector(&geom(), 0.0, &DoA::new(10.0, 0.0).unwrap()).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let g = geom();
        let f = 28e9;
        let d = DoA::new(41.0, 123.0).unwrap();
        let (dt, dp) = steering_derivatives(&g, f, &d).unwrap();
        let h: f64 = 1e-6;
        let fd = |a: DoA, b: DoA| {
            let x = steering_vector(&g, f, &a).unwrap().0;
            let y = steering_vector(&g, f, &b).unwrap().0;
            (x - y) / C64::new((2.0 * h).to_radians(), 0.0)
        };
        let ft = fd(DoA::new(41.0 + h, 123.0).unwrap(), DoA::new(41.0 - h, 123.0).unwrap());
        let fp = fd(DoA::new(41.0, 123.0 + h).unwrap(), DoA::new(41.0, 123.0 - h).unwrap());
        assert!((&ft - &dt).norm() < 1e-6 * dt.norm());
        assert!((&fp - &dp).norm() < 1e-6 * dp.norm());
    }

    #[test]
    fn beamwidths_match_fine_scan() {
        let g = geom();
        let (bt, bp) = quiescent_beamwidths(&g, 30e9).unwrap();
        let fine = |az: f64| {
            let peak = quiescent_power(&g, 30e9, &DoA::clamped(0.0, az));
            (1..=90_000)
                .map(|k| k as f64 * 0.001)
                .find(|&t| quiescent_power(&g, 30e9, &DoA::clamped(t, az)) <= peak * 10f64.powf(-0.3))
                .unwrap()
        };
        assert!((bt - fine(0.0) - fine(180.0)).abs() <= 0.02);
        assert!((bp - fine(90.0) - fine(270.0)).abs() <= 0.02);
    }

    #[test]
    fn small_aperture_pattern_is_degenerate() {
        let g = ArrayGeometry::new(5, 1e-4, 3e8).unwrap();
        assert!(matches!(
            quiescent_beamwidths(&g, 30e9),
            Err(Error::DegeneratePattern(_))
        ));
    }
}
