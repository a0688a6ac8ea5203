//! Doppler phase rotation and additive white Gaussian noise.

use core::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::modem::{BasebandSignal, ModemConfig};
use crate::orbit::DopplerProfile;

/// Noise setting for the AWGN stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseLevel {
    Noiseless,
    /// In-band SNR `P / P_n` in dB, `P_n` measured over the bandwidth `B`.
    SnrDb(f64),
}

/// Complete channel realization for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub profile: DopplerProfile,
    pub noise: NoiseLevel,
    pub seed: u64,
    /// Pass time of the first frame sample.
    pub t_start_s: f64,
}

impl ChannelConfig {
    /// Places `signal` at `t_start_s`, applies the Doppler profile and adds
    /// noise from a ChaCha stream seeded with `seed`.
    pub fn apply(&self, signal: &BasebandSignal, oversampling: u32) -> Result<BasebandSignal> {
        let mut out = signal.clone();
        out.t0_s = self.t_start_s;
        apply_doppler_in_place(&mut out.samples, out.sample_rate_hz, out.t0_s, &self.profile)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        add_awgn(&mut out.samples, self.noise, oversampling, &mut rng);
        Ok(out)
    }
}

/// `out[k] = in[k] * exp(j phi[k])`, `phi` the integrated Doppler phase
/// from the signal's first sample.
pub fn apply_doppler(signal: &BasebandSignal, profile: &DopplerProfile) -> Result<BasebandSignal> {
    let mut out = signal.clone();
    apply_doppler_in_place(&mut out.samples, signal.sample_rate_hz, signal.t0_s, profile)?;
    Ok(out)
}

pub fn apply_doppler_in_place(
    samples: &mut [Complex64],
    sample_rate_hz: f64,
    t0_s: f64,
    profile: &DopplerProfile,
) -> Result<()> {
    match *profile {
        DopplerProfile::Zero => Ok(()),
        DopplerProfile::Static { f0_hz } => {
            // exp(j 2 pi f0 k / fs), evaluated directly to keep it exact per sample.
            let step = f0_hz / sample_rate_hz;
            for (k, x) in samples.iter_mut().enumerate() {
                *x *= Complex64::from_polar(1.0, 2.0 * PI * (step * k as f64));
            }
            Ok(())
        }
        _ => {
            if samples.is_empty() {
                return Ok(());
            }
            let t_end = t0_s + (samples.len() - 1) as f64 / sample_rate_hz;
            profile.check_span(t0_s, t_end)?;
            for (k, x) in samples.iter_mut().enumerate() {
                let phi = profile.phase_between(t0_s, t0_s + k as f64 / sample_rate_hz)?;
                *x *= Complex64::from_polar(1.0, phi);
            }
            Ok(())
        }
    }
}

/// Per-sample complex noise variance for a unit-power signal. Oversampled
/// signals get proportionally more noise so the in-band SNR is unchanged.
pub fn noise_variance(snr_db: f64, oversampling: u32) -> f64 {
    oversampling as f64 * libm::pow(10.0, -snr_db / 10.0)
}

/// Adds circularly-symmetric complex Gaussian noise.
pub fn add_awgn<R: Rng + ?Sized>(samples: &mut [Complex64], level: NoiseLevel, oversampling: u32, rng: &mut R) {
    let NoiseLevel::SnrDb(snr_db) = level else {
        return;
    };
    let sigma = libm::sqrt(noise_variance(snr_db, oversampling) / 2.0);
    for x in samples.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *x += Complex64::new(sigma * re, sigma * im);
    }
}

/// `SNR = Es/N0 / 2^sf`, in dB. LDRO does not change `B T_c`.
pub fn snr_from_esn0(cfg: &ModemConfig, esn0_db: f64) -> f64 {
    esn0_db_to_snr_db(esn0_db, cfg.sf() as u32)
}

pub fn esn0_db_to_snr_db(esn0_db: f64, sf: u32) -> f64 {
    esn0_db - 10.0 * libm::log10(libm::ldexp(1.0, sf as i32))
}
