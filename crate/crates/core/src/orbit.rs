//! Doppler shift and Doppler rate profiles.
//!
//! The LEO model is an overhead pass: circular orbit, non-rotating Earth,
//! ground device on the ground track. `t = 0` is zenith. The slant range is
//!
//! ```text
//! d(t) = sqrt(R^2 + r^2 - 2 R r cos(w t)),   r = R + h,  w = sqrt(mu / r^3)
//! ```
//!
//! and the Doppler shift is `-d'(t) / c * F_C`, positive while the satellite
//! approaches (`t < 0`).

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;
pub const EARTH_MU_M3_S2: f64 = 3.986_004_418e14;
pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

// Slack on the visibility bound for times computed by float arithmetic.
const WINDOW_EPS_S: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct OrbitGeometry {
    altitude_m: f64,
    carrier_hz: f64,
}

impl OrbitGeometry {
    pub fn new(altitude_m: f64, carrier_hz: f64) -> Result<Self> {
        if !(altitude_m.is_finite() && altitude_m > 0.0) {
            return Err(Error::Altitude(altitude_m));
        }
        if !(carrier_hz.is_finite() && carrier_hz > 0.0) {
            return Err(Error::Parameter("carrier frequency must be positive"));
        }
        Ok(Self {
            altitude_m,
            carrier_hz,
        })
    }

    pub fn altitude_m(&self) -> f64 {
        self.altitude_m
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    pub fn orbit_radius_m(&self) -> f64 {
        EARTH_RADIUS_M + self.altitude_m
    }

    pub fn orbital_speed_m_s(&self) -> f64 {
        libm::sqrt(EARTH_MU_M3_S2 / self.orbit_radius_m())
    }

    pub fn angular_rate_rad_s(&self) -> f64 {
        self.orbital_speed_m_s() / self.orbit_radius_m()
    }

    /// Earth central angle between zenith and 0° elevation.
    pub fn horizon_central_angle_rad(&self) -> f64 {
        libm::acos(EARTH_RADIUS_M / self.orbit_radius_m())
    }

    /// Time from zenith to 0° elevation.
    pub fn visibility_half_window_s(&self) -> f64 {
        self.horizon_central_angle_rad() / self.angular_rate_rad_s()
    }

    pub fn slant_range_m(&self, t: f64) -> f64 {
        let r = self.orbit_radius_m();
        let re = EARTH_RADIUS_M;
        // R^2 + r^2 - 2 R r cos(x) = h^2 + 4 R r sin^2(x / 2), exact near zenith.
        let s = libm::sin(self.angular_rate_rad_s() * t / 2.0);
        libm::sqrt(self.altitude_m * self.altitude_m + 4.0 * re * r * s * s)
    }

    pub fn range_rate_m_s(&self, t: f64) -> f64 {
        let w = self.angular_rate_rad_s();
        EARTH_RADIUS_M * self.orbit_radius_m() * w * libm::sin(w * t) / self.slant_range_m(t)
    }

    pub fn range_accel_m_s2(&self, t: f64) -> f64 {
        let w = self.angular_rate_rad_s();
        let d = self.slant_range_m(t);
        let rate = self.range_rate_m_s(t);
        (EARTH_RADIUS_M * self.orbit_radius_m() * w * w * libm::cos(w * t) - rate * rate) / d
    }

    /// `d(t1) - d(t0)` without cancellation between two large ranges.
    fn range_difference_m(&self, t0: f64, t1: f64) -> f64 {
        let w = self.angular_rate_rad_s();
        let sq_diff = 4.0
            * EARTH_RADIUS_M
            * self.orbit_radius_m()
            * libm::sin(w * (t1 + t0) / 2.0)
            * libm::sin(w * (t1 - t0) / 2.0);
        sq_diff / (self.slant_range_m(t0) + self.slant_range_m(t1))
    }

    fn wavelengths_per_metre(&self) -> f64 {
        self.carrier_hz / SPEED_OF_LIGHT_M_S
    }

    fn check_visible(&self, t: f64) -> Result<()> {
        let half_window = self.visibility_half_window_s();
        if !t.is_finite() || t.abs() > half_window + WINDOW_EPS_S {
            return Err(Error::OutOfVisibility { t, half_window });
        }
        Ok(())
    }
}

pub fn visibility_half_window(geom: &OrbitGeometry) -> f64 {
    geom.visibility_half_window_s()
}

/// Carrier frequency offset as a function of pass time.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields))]
pub enum DopplerProfile {
    Zero,
    Static {
        f0_hz: f64,
    },
    LinearRamp {
        f0_hz: f64,
        slope_hz_per_s: f64,
        t_ref_s: f64,
    },
    LeoPass(OrbitGeometry),
}

impl DopplerProfile {
    pub fn doppler_shift(&self, t: f64) -> Result<f64> {
        Ok(match *self {
            Self::Zero => 0.0,
            Self::Static { f0_hz } => f0_hz,
            Self::LinearRamp {
                f0_hz,
                slope_hz_per_s,
                t_ref_s,
            } => f0_hz + slope_hz_per_s * (t - t_ref_s),
            Self::LeoPass(g) => {
                g.check_visible(t)?;
                -g.range_rate_m_s(t) * g.wavelengths_per_metre()
            }
        })
    }

    pub fn doppler_rate(&self, t: f64) -> Result<f64> {
        Ok(match *self {
            Self::Zero | Self::Static { .. } => 0.0,
            Self::LinearRamp { slope_hz_per_s, .. } => slope_hz_per_s,
            Self::LeoPass(g) => {
                g.check_visible(t)?;
                -g.range_accel_m_s2(t) * g.wavelengths_per_metre()
            }
        })
    }

    /// Fails if any part of `[t0, t1]` cannot be evaluated.
    pub fn check_span(&self, t0: f64, t1: f64) -> Result<()> {
        if let Self::LeoPass(g) = self {
            g.check_visible(t0)?;
            g.check_visible(t1)?;
        }
        Ok(())
    }

    /// Integrated Doppler phase `2 pi * int_{t0}^{t1} F_D` in radians.
    pub fn phase_between(&self, t0: f64, t1: f64) -> Result<f64> {
        let cycles = match *self {
            Self::Zero => 0.0,
            Self::Static { f0_hz } => f0_hz * (t1 - t0),
            Self::LinearRamp {
                f0_hz,
                slope_hz_per_s,
                t_ref_s,
            } => {
                let tau = t1 - t0;
                f0_hz * tau + slope_hz_per_s * (tau * (t0 - t_ref_s) + tau * tau / 2.0)
            }
            Self::LeoPass(g) => {
                g.check_visible(t0)?;
                g.check_visible(t1)?;
                -g.range_difference_m(t0, t1) * g.wavelengths_per_metre()
            }
        };
        Ok(2.0 * PI * cycles)
    }
}

pub fn doppler_shift(profile: &DopplerProfile, t: f64) -> Result<f64> {
    profile.doppler_shift(t)
}

pub fn doppler_rate(profile: &DopplerProfile, t: f64) -> Result<f64> {
    profile.doppler_rate(t)
}

/// Cumulative Doppler phase at `t_start + k / fs` for `k in 0..n`, with
/// `phi[0] = 0`. Every profile is integrated in closed form; the LEO pass
/// integrates to a slant-range difference.
pub fn phase_from_profile(profile: &DopplerProfile, t_start: f64, n: usize, fs: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    profile.check_span(t_start, t_start + (n - 1) as f64 / fs)?;
    (0..n)
        .map(|k| profile.phase_between(t_start, t_start + k as f64 / fs))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leo() -> DopplerProfile {
        DopplerProfile::LeoPass(OrbitGeometry::new(550e3, 868e6).unwrap())
    }

    // Independent route: per-sample trapezoidal accumulation of F_D.
    fn trapezoid_phase(p: &DopplerProfile, t0: f64, n: usize, fs: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        let mut acc = 0.0;
        let mut prev = p.doppler_shift(t0).unwrap();
        out.push(0.0);
        for k in 1..n {
            let f = p.doppler_shift(t0 + k as f64 / fs).unwrap();
            acc += 2.0 * PI * (prev + f) / 2.0 / fs;
            out.push(acc);
            prev = f;
        }
        out
    }

    #[test]
    fn landmarks() {
        let p = leo();
        assert_eq!(p.doppler_shift(0.0).unwrap(), 0.0);
        let edge = p.doppler_shift(-366.0).unwrap();
        assert!((edge - 20e3).abs() < 0.05 * 20e3, "{edge}");
        assert!(p.doppler_shift(366.0).unwrap() < 0.0);
        let DopplerProfile::LeoPass(g) = p else { unreachable!() };
        assert!((g.visibility_half_window_s() - 366.0).abs() < 2.0);
        assert!((g.horizon_central_angle_rad() - libm::acos(6371.0 / 6921.0)).abs() < 1e-12);
    }

    #[test]
    fn zenith_rate_matches_radial_acceleration() {
        let DopplerProfile::LeoPass(g) = leo() else { unreachable!() };
        let v = g.orbital_speed_m_s();
        let h = g.altitude_m();
        // Centripetal geometry at closest approach: d'' = (R / r) v^2 / h.
        let expected = -(868e6 / SPEED_OF_LIGHT_M_S) * (EARTH_RADIUS_M / g.orbit_radius_m()) * v * v / h;
        let p = leo();
        let rate = p.doppler_rate(0.0).unwrap();
        assert!((rate - expected).abs() < 1e-9 * expected.abs());
        let step = 10e-3;
        let fd = (p.doppler_shift(step).unwrap() - p.doppler_shift(-step).unwrap()) / (2.0 * step);
        assert!(((fd - expected) / expected).abs() < 1e-4);
    }

    #[test]
    fn visibility_shrinks_with_altitude() {
        let low = OrbitGeometry::new(1.0, 868e6).unwrap().visibility_half_window_s();
        assert!(low < 1.0, "{low}");
        assert!(OrbitGeometry::new(0.0, 868e6).is_err());
        assert!(OrbitGeometry::new(550e3, -1.0).is_err());
    }

    #[test]
    fn rejects_times_outside_window() {
        let p = leo();
        assert!(matches!(p.doppler_shift(-400.0), Err(Error::OutOfVisibility { .. })));
        assert!(matches!(p.doppler_rate(400.0), Err(Error::OutOfVisibility { .. })));
        assert!(phase_from_profile(&p, 366.0, 1_000_000, 125e3).is_err());
        assert!(DopplerProfile::Static { f0_hz: 1.0 }.doppler_shift(1e6).is_ok());
    }

    #[test]
    fn odd_symmetry_and_monotonic() {
        let p = leo();
        let mut prev = f64::INFINITY;
        let mut t = -366.0;
        while t <= 366.0 {
            let f = p.doppler_shift(t).unwrap();
            assert_eq!(f, -p.doppler_shift(-t).unwrap());
            assert!(f < prev);
            prev = f;
            t += 0.5;
        }
    }

    #[test]
    fn rate_is_derivative_of_shift() {
        let p = leo();
        let delta = 1e-3;
        for t in [-300.0, -200.0, -91.5, -10.0, 0.0, 42.0, 250.0] {
            let fd = (p.doppler_shift(t + delta).unwrap() - p.doppler_shift(t - delta).unwrap()) / (2.0 * delta);
            let rate = p.doppler_rate(t).unwrap();
            assert!(((fd - rate) / rate).abs() < 1e-3, "t={t}: {fd} vs {rate}");
        }
    }

    #[test]
    fn synthetic_profiles() {
        let s = DopplerProfile::Static { f0_hz: 1500.0 };
        assert_eq!(s.doppler_shift(-123.0).unwrap(), 1500.0);
        assert_eq!(s.doppler_rate(5.0).unwrap(), 0.0);
        let r = DopplerProfile::LinearRamp {
            f0_hz: 10.0,
            slope_hz_per_s: -300.0,
            t_ref_s: 2.0,
        };
        assert_eq!(r.doppler_rate(-50.0).unwrap(), -300.0);
        assert_eq!(r.doppler_shift(3.0).unwrap(), -290.0);
        assert_eq!(DopplerProfile::Zero.doppler_shift(7.0).unwrap(), 0.0);
    }

    #[test]
    fn static_phase_is_linear() {
        let fs = 125e3;
        let phi = phase_from_profile(&DopplerProfile::Static { f0_hz: 700.0 }, 3.0, 64, fs).unwrap();
        for (k, p) in phi.iter().enumerate() {
            assert!((*p - 2.0 * PI * (700.0 * (k as f64 / fs))).abs() < 1e-9);
        }
        assert!(phase_from_profile(&DopplerProfile::Zero, 0.0, 5, fs).unwrap().iter().all(|&p| p == 0.0));
        assert!(phase_from_profile(&leo(), 0.0, 0, fs).unwrap().is_empty());
    }

    #[test]
    fn ramp_phase_matches_trapezoid() {
        let fs = 125e3;
        let p = DopplerProfile::LinearRamp {
            f0_hz: 2000.0,
            slope_hz_per_s: -1500.0,
            t_ref_s: 0.3,
        };
        let closed = phase_from_profile(&p, 0.1, 4096, fs).unwrap();
        // Trapezoid is exact for affine integrands up to rounding.
        for (a, b) in closed.iter().zip(trapezoid_phase(&p, 0.1, 4096, fs)) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn leo_phase_matches_trapezoid() {
        let fs = 125e3;
        for t0 in [-366.0, -100.0, 0.0] {
            let closed = phase_from_profile(&leo(), t0, 8192, fs).unwrap();
            let trap = trapezoid_phase(&leo(), t0, 8192, fs);
            for (a, b) in closed.iter().zip(&trap) {
                assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn leo_phase_near_horizon_is_nearly_constant_tone() {
        let fs = 125e3;
        let n = 25_000;
        let phi = phase_from_profile(&leo(), -366.0, n + 1, fs).unwrap();
        let total = phi[n];
        let edge = leo().doppler_shift(-366.0).unwrap();
        assert!((total / (2.0 * PI * edge * 0.2) - 1.0).abs() < 0.01);
        assert!((total / (2.0 * PI * 20e3 * 0.2) - 1.0).abs() < 0.05);
    }
}
