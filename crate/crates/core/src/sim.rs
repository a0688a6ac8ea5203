//! Monte Carlo symbol error rate trials.
//!
//! A [`Simulator`] is prepared once per scenario cell and then runs
//! independent trials. Each trial draws a fresh payload and noise
//! realization from a seed derived from the master seed, the modem and
//! payload axes, and the trial index. The estimator, the satellite position
//! and the Es/N0 do not enter the seed, so cells that differ only in those
//! axes see the same payloads and noise (common random numbers).

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{add_awgn, apply_doppler_in_place, esn0_db_to_snr_db, NoiseLevel};
use crate::error::{Error, Result};
use crate::estimators::{build_plan, CompensationPlan, EstimateReport, EstimatorKind, GenieTruth};
use crate::modem::{payload_symbol_count, BasebandSignal, ChirpKind, FrameLayout, Modem, ModemConfig, SymbolSequence};
use crate::orbit::{DopplerProfile, OrbitGeometry};

/// Bandwidth used throughout the reference scenarios.
pub const DEFAULT_BANDWIDTH_HZ: f64 = 125e3;
pub const DEFAULT_ALTITUDE_M: f64 = 550e3;
pub const DEFAULT_CARRIER_HZ: f64 = 868e6;
pub const DEFAULT_PAYLOAD_BITS: usize = 120;
pub const DEFAULT_CR: u8 = 1;
pub const DEFAULT_N_UP: usize = 8;

/// Frame start for a device at the horizon (case 1) and at zenith (case 2).
pub const CASE1_T_START_S: f64 = -366.0;
pub const CASE2_T_START_S: f64 = 0.0;
/// Satellite positions of the position sweep, horizon to zenith.
pub const PASS_POSITIONS_S: [f64; 5] = [-366.0, -274.5, -183.0, -91.5, 0.0];

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NoiseSpec {
    EsN0Db(f64),
    SnrDb(f64),
    Noiseless,
}

impl NoiseSpec {
    pub fn level(self, cfg: &ModemConfig) -> NoiseLevel {
        match self {
            Self::EsN0Db(e) => NoiseLevel::SnrDb(esn0_db_to_snr_db(e, cfg.sf() as u32)),
            Self::SnrDb(s) => NoiseLevel::SnrDb(s),
            Self::Noiseless => NoiseLevel::Noiseless,
        }
    }

    pub fn esn0_db(self, cfg: &ModemConfig) -> Option<f64> {
        match self {
            Self::EsN0Db(e) => Some(e),
            Self::SnrDb(s) => Some(s + 10.0 * libm::log10(libm::ldexp(1.0, cfg.sf() as i32))),
            Self::Noiseless => None,
        }
    }

    pub fn snr_db(self, cfg: &ModemConfig) -> Option<f64> {
        match self.level(cfg) {
            NoiseLevel::SnrDb(s) => Some(s),
            NoiseLevel::Noiseless => None,
        }
    }
}

/// One cell of an experiment grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    pub modem: ModemConfig,
    pub n_up: usize,
    pub n_dw: usize,
    /// Data chirps between midambles; 0 disables midambles.
    pub n_int: usize,
    pub payload_bits: usize,
    pub cr: u8,
    pub profile: DopplerProfile,
    /// Pass time of the first frame sample.
    pub t_start_s: f64,
    pub estimator: EstimatorKind,
    pub noise: NoiseSpec,
    pub trials: u64,
    pub master_seed: u64,
}

impl ScenarioConfig {
    /// Reference settings: 550 km pass at 868 MHz, B = 125 kHz, 120-bit
    /// payload, CR 1, 8 upchirps, and the estimator's own downchirp count
    /// and midamble spacing. Es/N0 defaults to 14 dB.
    pub fn reference(sf: u8, ldro: bool, estimator: EstimatorKind, t_start_s: f64) -> Result<Self> {
        let modem = ModemConfig::new(sf, DEFAULT_BANDWIDTH_HZ, ldro)?;
        let geometry = OrbitGeometry::new(DEFAULT_ALTITUDE_M, DEFAULT_CARRIER_HZ)?;
        Ok(Self {
            modem,
            n_up: DEFAULT_N_UP,
            n_dw: estimator.default_n_dw(),
            n_int: estimator.default_n_int(sf),
            payload_bits: DEFAULT_PAYLOAD_BITS,
            cr: DEFAULT_CR,
            profile: DopplerProfile::LeoPass(geometry),
            t_start_s,
            estimator,
            noise: NoiseSpec::EsN0Db(14.0),
            trials: 1000,
            master_seed: 0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Parameter("trials must be at least 1"));
        }
        if !self.t_start_s.is_finite() {
            return Err(Error::Parameter("t_start must be finite"));
        }
        match self.noise {
            NoiseSpec::EsN0Db(v) | NoiseSpec::SnrDb(v) if !v.is_finite() => {
                return Err(Error::Parameter("noise level must be finite"))
            }
            _ => {}
        }
        self.layout()?;
        Ok(())
    }

    pub fn n_data(&self) -> Result<usize> {
        payload_symbol_count(&self.modem, self.payload_bits, self.cr)
    }

    pub fn layout(&self) -> Result<FrameLayout> {
        let layout = FrameLayout::new(self.n_up, self.n_dw, self.n_data()?, self.n_int);
        self.estimator.check_layout(&layout)?;
        Ok(layout)
    }

    /// Seed key of the cell: the axes that change what a trial transmits.
    pub fn cell_key(&self) -> u64 {
        let axes = [
            self.modem.sf() as u64,
            self.modem.ldro() as u64,
            self.modem.bandwidth_hz().to_bits(),
            self.modem.oversampling() as u64,
            self.payload_bits as u64,
            self.cr as u64,
        ];
        axes.iter().fold(mix(self.master_seed), |h, &a| mix(h ^ a))
    }
}

/// splitmix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn trial_seed(cell_key: u64, trial_index: u64) -> u64 {
    mix(cell_key ^ mix(trial_index))
}

const PAYLOAD_STREAM: u64 = 0;
const PAYLOAD_NOISE_STREAM: u64 = 1;
const PREAMBLE_NOISE_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrialOutcome {
    pub errors: u64,
    pub total: u64,
}

impl core::ops::Add for TrialOutcome {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            errors: self.errors + rhs.errors,
            total: self.total + rhs.total,
        }
    }
}

impl core::iter::Sum for TrialOutcome {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

/// Everything a single trial produced, for debugging and estimate dumps.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDetail {
    pub outcome: TrialOutcome,
    pub sent: Vec<u32>,
    pub decided: Vec<u32>,
    pub plan: CompensationPlan,
    pub report: EstimateReport,
}

/// A scenario cell with its frame layout and Doppler phasors precomputed.
#[derive(Debug, Clone)]
pub struct Simulator {
    scenario: ScenarioConfig,
    modem: Modem,
    layout: FrameLayout,
    noise: NoiseLevel,
    doppler: Option<Vec<Complex64>>,
    cell_key: u64,
}

impl Simulator {
    pub fn new(scenario: ScenarioConfig) -> Result<Self> {
        scenario.validate()?;
        let modem = Modem::new(scenario.modem);
        let layout = scenario.layout()?;
        let cfg = scenario.modem;
        let len = layout.total_chirps() * cfg.chirp_samples();
        let doppler = match scenario.profile {
            DopplerProfile::Zero => None,
            profile => {
                let mut phasors = alloc::vec![Complex64::new(1.0, 0.0); len];
                apply_doppler_in_place(&mut phasors, cfg.sample_rate_hz(), scenario.t_start_s, &profile)?;
                Some(phasors)
            }
        };
        Ok(Self {
            noise: scenario.noise.level(&cfg),
            cell_key: scenario.cell_key(),
            scenario,
            modem,
            layout,
            doppler,
        })
    }

    pub fn scenario(&self) -> &ScenarioConfig {
        &self.scenario
    }

    pub fn layout(&self) -> &FrameLayout {
        &self.layout
    }

    pub fn modem(&self) -> &Modem {
        &self.modem
    }

    /// Pass time of the first payload sample.
    pub fn payload_t0_s(&self) -> f64 {
        self.scenario.t_start_s + self.layout.payload_offset() as f64 * self.scenario.modem.chirp_duration_s()
    }

    pub fn run_trial(&self, trial_index: u64) -> Result<TrialOutcome> {
        self.trial(trial_index, false).map(|(outcome, _)| outcome)
    }

    pub fn run_trial_detailed(&self, trial_index: u64) -> Result<TrialDetail> {
        let (_, detail) = self.trial(trial_index, true)?;
        detail.ok_or(Error::Parameter("trial detail missing"))
    }

    /// Sum over trials `range`, in order.
    pub fn run_range(&self, range: core::ops::Range<u64>) -> Result<TrialOutcome> {
        let mut acc = TrialOutcome::default();
        for i in range {
            acc = acc + self.run_trial(i)?;
        }
        Ok(acc)
    }

    pub fn run(&self) -> Result<SerPoint> {
        let o = self.run_range(0..self.scenario.trials)?;
        Ok(SerPoint::from_counts(o.errors, o.total))
    }

    /// Payload symbols and the received frame (Doppler and noise applied)
    /// of trial `trial_index`.
    pub fn received_frame(&self, trial_index: u64) -> Result<(SymbolSequence, BasebandSignal)> {
        let cfg = &self.scenario.modem;
        let n = cfg.chirp_samples();
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(self.cell_key, trial_index));
        rng.set_stream(PAYLOAD_STREAM);
        let m = cfg.alphabet_size();
        let sent: Vec<u32> = (0..self.layout.n_data()).map(|_| rng.random_range(0..m)).collect();
        let payload = SymbolSequence::new(sent, cfg)?;

        let mut frame = self.modem.build_frame(&self.layout, &payload, self.scenario.t_start_s)?;
        if let Some(ph) = &self.doppler {
            for (x, p) in frame.samples.iter_mut().zip(ph) {
                *x *= p;
            }
        }
        // Payload noise runs forward from the payload start and preamble
        // noise backward from it, so layouts with different preamble
        // lengths share the noise on their common chirps.
        let (preamble, body) = frame.samples.split_at_mut(self.layout.payload_offset() * n);
        rng.set_stream(PAYLOAD_NOISE_STREAM);
        add_awgn(body, self.noise, cfg.oversampling(), &mut rng);
        rng.set_stream(PREAMBLE_NOISE_STREAM);
        preamble.reverse();
        add_awgn(preamble, self.noise, cfg.oversampling(), &mut rng);
        preamble.reverse();
        Ok((payload, frame))
    }

    fn trial(&self, trial_index: u64, detailed: bool) -> Result<(TrialOutcome, Option<TrialDetail>)> {
        let n = self.scenario.modem.chirp_samples();
        let (payload, frame) = self.received_frame(trial_index)?;
        let mut frame = frame.samples;

        let truth = GenieTruth {
            profile: &self.scenario.profile,
            payload_t0_s: self.payload_t0_s(),
        };
        let (plan, report) = build_plan(self.scenario.estimator, &self.modem, &self.layout, &frame, Some(truth))?;
        let body = &mut frame[self.layout.payload_offset() * n..];
        plan.apply(body)?;

        let mut scratch = Vec::with_capacity(n);
        let mut decided = Vec::new();
        let mut errors = 0u64;
        let mut sent_iter = payload.as_slice().iter();
        for j in 0..self.layout.n_sym() {
            if self.layout.is_midamble(j) {
                continue;
            }
            let peak = self.modem.dechirp_peak(&body[j * n..(j + 1) * n], ChirpKind::Up, &mut scratch)?;
            let symbol = self.modem.decide(&peak);
            if Some(&symbol) != sent_iter.next() {
                errors += 1;
            }
            if detailed {
                decided.push(symbol);
            }
        }
        let outcome = TrialOutcome {
            errors,
            total: self.layout.n_data() as u64,
        };
        let detail = detailed.then(|| TrialDetail {
            outcome,
            sent: payload.as_slice().to_vec(),
            decided,
            plan,
            report,
        });
        Ok((outcome, detail))
    }
}

/// Runs trial `trial_index` of `scenario` from scratch.
pub fn run_trial(scenario: &ScenarioConfig, trial_index: u64) -> Result<TrialOutcome> {
    Simulator::new(*scenario)?.run_trial(trial_index)
}

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SerPoint {
    pub symbol_errors: u64,
    pub symbols_total: u64,
    pub ser: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Filled in by callers that can read a clock.
    pub wall_time_s: f64,
}

impl SerPoint {
    pub fn from_counts(errors: u64, total: u64) -> Self {
        let (ci_lo, ci_hi) = wilson_interval(errors, total, Z95);
        Self {
            symbol_errors: errors,
            symbols_total: total,
            ser: if total == 0 { 0.0 } else { errors as f64 / total as f64 },
            ci_lo,
            ci_hi,
            wall_time_s: 0.0,
        }
    }
}

/// Wilson score interval for `k` successes in `n` trials. `(0, 1)` when
/// `n == 0`.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let centre = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * libm::sqrt(p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)) / denom;
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// `|ser - p| <= 3 sqrt(p (1 - p) / n)`.
pub fn within_three_sigma(errors: u64, total: u64, p: f64) -> bool {
    let sigma = libm::sqrt(p * (1.0 - p) / total as f64);
    (errors as f64 / total as f64 - p).abs() <= 3.0 * sigma
}

/// Symbol error probability of noncoherent detection of `m` orthogonal
/// signals at `Es/N0 = esn0` (linear).
///
/// Integrates the Rician envelope of the correct branch against the
/// probability that one of the `m - 1` Rayleigh branches exceeds it. Stable
/// for every alphabet size used here, including 4096.
pub fn awgn_ser_oracle(m: usize, esn0: f64) -> Result<f64> {
    if m < 2 {
        return Err(Error::Parameter("alphabet size must be at least 2"));
    }
    if !esn0.is_finite() || esn0 < 0.0 {
        return Err(Error::Parameter("Es/N0 must be finite and non-negative"));
    }
    // Envelopes normalized to unit noise variance per dimension.
    let a = libm::sqrt(2.0 * esn0);
    let others = (m - 1) as f64;
    let integrand = |r: f64| {
        let q = libm::exp(-0.5 * r * r);
        let loss = -libm::expm1(others * libm::log1p(-q));
        r * libm::exp(-0.5 * (r - a) * (r - a)) * bessel_i0e(a * r) * loss
    };
    let lo = (a - 14.0).max(0.0);
    let hi = a + 14.0;
    let steps = 8192;
    Ok(simpson(integrand, lo, hi, steps).clamp(0.0, 1.0))
}

/// The alternating closed form
/// `sum_{k=1}^{m-1} (-1)^{k+1} C(m-1, k) / (k+1) exp(-k/(k+1) esn0)`,
/// with log-domain binomials and separate accumulation of the positive and
/// negative terms. Cancellation makes it unreliable beyond a few dozen
/// symbols; it serves as a cross-check of [`awgn_ser_oracle`].
pub fn awgn_ser_series(m: usize, esn0: f64) -> Result<f64> {
    if m < 2 {
        return Err(Error::Parameter("alphabet size must be at least 2"));
    }
    let n = (m - 1) as f64;
    let ln_n_fact = libm::lgamma(n + 1.0);
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for k in 1..m {
        let kf = k as f64;
        let ln_binom = ln_n_fact - libm::lgamma(kf + 1.0) - libm::lgamma(n - kf + 1.0);
        let term = libm::exp(ln_binom - libm::log(kf + 1.0) - kf / (kf + 1.0) * esn0);
        if k % 2 == 1 {
            pos.push(term);
        } else {
            neg.push(term);
        }
    }
    Ok(pairwise_sum(&pos) - pairwise_sum(&neg))
}

fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1..=8 => v.iter().sum(),
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, steps: usize) -> f64 {
    let steps = steps + steps % 2;
    let h = (b - a) / steps as f64;
    let mut acc = f(a) + f(b);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// `I0(x) exp(-x)` for `x >= 0`.
fn bessel_i0e(x: f64) -> f64 {
    if x < 50.0 {
        // Power series, scaled as it accumulates.
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        while term > 1e-17 * sum {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        sum * libm::exp(-x)
    } else {
        // Asymptotic expansion, terms (1 * 9 * 25 ...) / (k! (8x)^k).
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..12 {
            let odd = (2 * k - 1) as f64;
            term *= odd * odd / (k as f64 * 8.0 * x);
            sum += term;
        }
        sum / libm::sqrt(2.0 * PI * x)
    }
}
