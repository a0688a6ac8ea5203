//! Doppler estimation from frame pilots and piecewise compensation.
//!
//! Every estimator turns a received frame into a [`CompensationPlan`]: a
//! list of payload segments, each with an affine frequency law. The plan is
//! removed from the payload before symbol demodulation.
//!
//! Times inside this module are measured from the first payload sample.
//! A pilot's FFT peak reports the mean frequency over the chirp, so each
//! estimate is anchored at the centre of the chirp it was taken from.
//!
//! * point: last preamble downchirp, constant frequency.
//! * linear: first and last preamble downchirps, one straight line.
//! * midamble-point: point start, then the residual measured on each
//!   compensated midamble is added to the running frequency.
//! * midamble-linear: linear start, then every midamble yields a new
//!   absolute anchor and the slope to the previous anchor drives the next
//!   segment.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::modem::{BasebandSignal, ChirpKind, FrameLayout, Modem, ModemConfig, Peak};
use crate::orbit::DopplerProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum EstimatorKind {
    /// No compensation.
    None,
    /// Compensation with the true profile.
    Genie,
    Point,
    Linear,
    MidamblePoint,
    MidambleLinear,
}

impl EstimatorKind {
    pub const ALL: [Self; 6] = [
        Self::None,
        Self::Genie,
        Self::Point,
        Self::Linear,
        Self::MidamblePoint,
        Self::MidambleLinear,
    ];

    /// The four pilot-based strategies.
    pub const STRATEGIES: [Self; 4] = [Self::Point, Self::Linear, Self::MidamblePoint, Self::MidambleLinear];

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Genie => "genie",
            Self::Point => "point",
            Self::Linear => "linear",
            Self::MidamblePoint => "midamble-point",
            Self::MidambleLinear => "midamble-linear",
        }
    }

    pub fn min_downchirps(self) -> usize {
        match self {
            Self::None | Self::Genie => 0,
            Self::Point | Self::MidamblePoint => 1,
            Self::Linear | Self::MidambleLinear => 2,
        }
    }

    pub fn uses_midambles(self) -> bool {
        matches!(self, Self::MidamblePoint | Self::MidambleLinear)
    }

    /// Preamble downchirps: 6 for the slope-based strategies, 2 otherwise.
    pub fn default_n_dw(self) -> usize {
        match self {
            Self::Linear | Self::MidambleLinear => 6,
            _ => 2,
        }
    }

    /// Midamble spacing in data chirps; 0 for strategies without midambles.
    pub fn default_n_int(self, sf: u8) -> usize {
        match self {
            Self::MidamblePoint => match sf {
                12 => 1,
                10 => 4,
                _ => 12,
            },
            Self::MidambleLinear => 6,
            _ => 0,
        }
    }

    /// Checks that `layout` carries the pilots this estimator reads.
    pub fn check_layout(self, layout: &FrameLayout) -> Result<()> {
        let required = self.min_downchirps();
        if layout.n_dw() < required {
            return Err(Error::MissingDownchirps {
                estimator: self.name(),
                required,
                actual: layout.n_dw(),
            });
        }
        if self.uses_midambles() && layout.n_int() == 0 {
            return Err(Error::MissingMidambles(self.name()));
        }
        Ok(())
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or(Error::Parameter("unknown estimator"))
    }
}

/// Payload samples `start_sample..end_sample` corrected with
/// `exp(-j theta)`, `theta(tau) = phase0 + 2 pi (f0 tau + slope tau^2 / 2)`
/// and `tau` the time since the segment start.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Segment {
    pub start_sample: usize,
    pub end_sample: usize,
    pub f0_hz: f64,
    pub slope_hz_per_s: f64,
    pub phase0_rad: f64,
}

impl Segment {
    fn phase_at(&self, tau: f64) -> f64 {
        self.phase0_rad + 2.0 * PI * (self.f0_hz * tau + 0.5 * self.slope_hz_per_s * tau * tau)
    }

    fn is_identity(&self) -> bool {
        self.f0_hz == 0.0 && self.slope_hz_per_s == 0.0 && self.phase0_rad == 0.0
    }
}

/// Piecewise frequency correction over the payload.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CompensationPlan {
    pub sample_rate_hz: f64,
    pub segments: Vec<Segment>,
}

impl CompensationPlan {
    pub fn empty(sample_rate_hz: f64) -> Self {
        Self {
            sample_rate_hz,
            segments: Vec::new(),
        }
    }

    pub fn identity(n_samples: usize, sample_rate_hz: f64) -> Self {
        let mut plan = Self::empty(sample_rate_hz);
        plan.push(n_samples, 0.0, 0.0);
        plan
    }

    /// Appends a segment from the current end to `end_sample`, starting its
    /// phase where the previous segment left off.
    pub fn push(&mut self, end_sample: usize, f0_hz: f64, slope_hz_per_s: f64) {
        let (start_sample, phase0_rad) = match self.segments.last() {
            Some(prev) => {
                let tau = (prev.end_sample - prev.start_sample) as f64 / self.sample_rate_hz;
                (prev.end_sample, libm::remainder(prev.phase_at(tau), 2.0 * PI))
            }
            None => (0, 0.0),
        };
        if end_sample <= start_sample {
            return;
        }
        self.segments.push(Segment {
            start_sample,
            end_sample,
            f0_hz,
            slope_hz_per_s,
            phase0_rad,
        });
    }

    pub fn end_sample(&self) -> usize {
        self.segments.last().map_or(0, |s| s.end_sample)
    }

    /// Segments must be contiguous, non-empty and cover `0..n_samples`.
    pub fn validate(&self, n_samples: usize) -> Result<()> {
        let mut next = 0;
        for s in &self.segments {
            if s.start_sample != next || s.end_sample <= s.start_sample {
                return Err(Error::PlanTiling { expected: n_samples });
            }
            next = s.end_sample;
        }
        if next != n_samples {
            return Err(Error::PlanTiling { expected: n_samples });
        }
        Ok(())
    }

    /// Correction frequency at payload sample `k`.
    pub fn frequency_at(&self, k: usize) -> Option<f64> {
        self.segments
            .iter()
            .find(|s| (s.start_sample..s.end_sample).contains(&k))
            .map(|s| s.f0_hz + s.slope_hz_per_s * (k - s.start_sample) as f64 / self.sample_rate_hz)
    }

    /// Multiplies the payload by `exp(-j theta)` segment by segment.
    pub fn apply(&self, payload: &mut [Complex64]) -> Result<()> {
        self.validate(payload.len())?;
        for seg in &self.segments {
            if seg.is_identity() {
                continue;
            }
            derotate(
                &mut payload[seg.start_sample..seg.end_sample],
                self.sample_rate_hz,
                seg.phase0_rad,
                seg.f0_hz,
                seg.slope_hz_per_s,
            );
        }
        Ok(())
    }
}

/// Multiplies `x[i]` by `exp(-j (phase0 + 2 pi (f0 tau + slope tau^2 / 2)))`,
/// `tau = i / fs`. Phasors are advanced by recurrence and re-anchored
/// exactly every `BLOCK` samples.
pub fn derotate(x: &mut [Complex64], fs: f64, phase0: f64, f0: f64, slope: f64) {
    const BLOCK: usize = 256;
    let dt = 1.0 / fs;
    let curvature = Complex64::from_polar(1.0, -2.0 * PI * slope * dt * dt);
    for (b, chunk) in x.chunks_mut(BLOCK).enumerate() {
        let tau = (b * BLOCK) as f64 * dt;
        let mut z = Complex64::from_polar(1.0, -(phase0 + 2.0 * PI * (f0 * tau + 0.5 * slope * tau * tau)));
        let f_start = f0 + slope * tau;
        let mut w = Complex64::from_polar(1.0, -2.0 * PI * (f_start * dt + 0.5 * slope * dt * dt));
        for v in chunk.iter_mut() {
            *v *= z;
            z *= w;
            w *= curvature;
        }
    }
}

pub fn apply_plan(payload: &BasebandSignal, plan: &CompensationPlan) -> Result<BasebandSignal> {
    let mut out = payload.clone();
    plan.apply(&mut out.samples)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "pilot", content = "index", rename_all = "kebab-case"))]
pub enum AnchorSource {
    /// Preamble downchirp, 1-based.
    Downchirp(usize),
    /// Midamble at this payload chirp index.
    Midamble(usize),
}

/// One pilot measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Anchor {
    pub source: AnchorSource,
    /// Centre of the pilot chirp, seconds from the payload start.
    pub time_s: f64,
    /// Peak bin of the dechirped pilot (after any compensation).
    pub signed_bin: i64,
    /// `signed_bin` times the FFT resolution.
    pub measured_hz: f64,
    /// Estimated absolute offset at `time_s`: the measurement plus the
    /// compensation already applied to the pilot.
    pub offset_hz: f64,
}

/// Diagnostics of one estimator run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EstimateReport {
    pub estimator: EstimatorKind,
    pub anchors: Vec<Anchor>,
    /// Slopes in Hz/s: `alpha` for linear, `alpha_mid[m]` for midamble-linear.
    pub slopes_hz_per_s: Vec<f64>,
    /// Correction frequency at the start of each plan segment.
    pub segment_freqs_hz: Vec<f64>,
}

impl EstimateReport {
    fn new(estimator: EstimatorKind) -> Self {
        Self {
            estimator,
            anchors: Vec::new(),
            slopes_hz_per_s: Vec::new(),
            segment_freqs_hz: Vec::new(),
        }
    }

    fn finish(mut self, plan: &CompensationPlan) -> Self {
        self.segment_freqs_hz = plan.segments.iter().map(|s| s.f0_hz).collect();
        self
    }
}

/// Signed frequency of the FFT peak of one dechirped pilot.
pub fn estimate_offset_bin(modem: &Modem, rx_chirp: &[Complex64], kind: ChirpKind) -> Result<Peak> {
    modem.dechirp_peak(rx_chirp, kind, &mut Vec::with_capacity(rx_chirp.len()))
}

/// Read-only view of a received frame split into chirps.
struct Frame<'a> {
    modem: &'a Modem,
    layout: &'a FrameLayout,
    samples: &'a [Complex64],
    n: usize,
    tc: f64,
    scratch: Vec<Complex64>,
}

impl<'a> Frame<'a> {
    fn new(modem: &'a Modem, layout: &'a FrameLayout, samples: &'a [Complex64]) -> Result<Self> {
        let n = modem.config().chirp_samples();
        let expected = layout.total_chirps() * n;
        if samples.len() != expected {
            return Err(Error::FrameLength {
                expected,
                actual: samples.len(),
            });
        }
        Ok(Self {
            modem,
            layout,
            samples,
            n,
            tc: modem.config().chirp_duration_s(),
            scratch: Vec::with_capacity(n),
        })
    }

    fn payload_len(&self) -> usize {
        self.layout.n_sym() * self.n
    }

    /// Preamble downchirp `i` (1-based): measurement anchored at its centre.
    fn downchirp(&mut self, i: usize) -> Result<Anchor> {
        let chirp = self.layout.n_up() + i - 1;
        let rx = &self.samples[chirp * self.n..(chirp + 1) * self.n];
        let peak = self.modem.dechirp_peak(rx, ChirpKind::Down, &mut self.scratch)?;
        Ok(Anchor {
            source: AnchorSource::Downchirp(i),
            time_s: -((self.layout.n_dw() - i) as f64 + 0.5) * self.tc,
            signed_bin: peak.signed_bin,
            measured_hz: peak.signed_freq_hz,
            offset_hz: peak.signed_freq_hz,
        })
    }

    /// Midamble at payload index `p`, compensated with a frequency law that
    /// reads `f_start` at the chirp start and ramps at `slope`.
    fn midamble(&mut self, p: usize, f_start: f64, slope: f64) -> Result<Anchor> {
        let fs = self.modem.config().sample_rate_hz();
        let start = (self.layout.payload_offset() + p) * self.n;
        let mut buf: Vec<Complex64> = self.samples[start..start + self.n].to_vec();
        derotate(&mut buf, fs, 0.0, f_start, slope);
        let peak = self.modem.dechirp_peak(&buf, ChirpKind::Up, &mut self.scratch)?;
        let applied = f_start + slope * self.tc / 2.0;
        Ok(Anchor {
            source: AnchorSource::Midamble(p),
            time_s: (p as f64 + 0.5) * self.tc,
            signed_bin: peak.signed_bin,
            measured_hz: peak.signed_freq_hz,
            offset_hz: applied + peak.signed_freq_hz,
        })
    }

    /// Straight line through the first and last preamble downchirps.
    fn preamble_line(&mut self, report: &mut EstimateReport) -> Result<(Anchor, f64)> {
        let n_dw = self.layout.n_dw();
        let first = self.downchirp(1)?;
        let last = self.downchirp(n_dw)?;
        let alpha = (last.offset_hz - first.offset_hz) / (self.tc * (n_dw - 1) as f64);
        report.anchors.push(first);
        report.anchors.push(last);
        report.slopes_hz_per_s.push(alpha);
        Ok((last, alpha))
    }
}

pub fn point_plan(modem: &Modem, layout: &FrameLayout, frame: &[Complex64]) -> Result<(CompensationPlan, EstimateReport)> {
    EstimatorKind::Point.check_layout(layout)?;
    let mut rx = Frame::new(modem, layout, frame)?;
    let mut report = EstimateReport::new(EstimatorKind::Point);
    let anchor = rx.downchirp(layout.n_dw())?;
    report.anchors.push(anchor);
    let mut plan = CompensationPlan::empty(modem.config().sample_rate_hz());
    plan.push(rx.payload_len(), anchor.offset_hz, 0.0);
    Ok((plan.clone(), report.finish(&plan)))
}

pub fn linear_plan(modem: &Modem, layout: &FrameLayout, frame: &[Complex64]) -> Result<(CompensationPlan, EstimateReport)> {
    EstimatorKind::Linear.check_layout(layout)?;
    let mut rx = Frame::new(modem, layout, frame)?;
    let mut report = EstimateReport::new(EstimatorKind::Linear);
    let (last, alpha) = rx.preamble_line(&mut report)?;
    let mut plan = CompensationPlan::empty(modem.config().sample_rate_hz());
    plan.push(rx.payload_len(), last.offset_hz + alpha * (0.0 - last.time_s), alpha);
    Ok((plan.clone(), report.finish(&plan)))
}

pub fn midamble_point_plan(
    modem: &Modem,
    layout: &FrameLayout,
    frame: &[Complex64],
) -> Result<(CompensationPlan, EstimateReport)> {
    EstimatorKind::MidamblePoint.check_layout(layout)?;
    let mut rx = Frame::new(modem, layout, frame)?;
    let mut report = EstimateReport::new(EstimatorKind::MidamblePoint);
    let initial = rx.downchirp(layout.n_dw())?;
    report.anchors.push(initial);
    let mut freq = initial.offset_hz;
    let mut plan = CompensationPlan::empty(modem.config().sample_rate_hz());
    for &p in layout.midamble_positions() {
        let anchor = rx.midamble(p, freq, 0.0)?;
        report.anchors.push(anchor);
        plan.push((p + 1) * rx.n, freq, 0.0);
        freq += anchor.measured_hz;
    }
    plan.push(rx.payload_len(), freq, 0.0);
    Ok((plan.clone(), report.finish(&plan)))
}

pub fn midamble_linear_plan(
    modem: &Modem,
    layout: &FrameLayout,
    frame: &[Complex64],
) -> Result<(CompensationPlan, EstimateReport)> {
    EstimatorKind::MidambleLinear.check_layout(layout)?;
    let mut rx = Frame::new(modem, layout, frame)?;
    let mut report = EstimateReport::new(EstimatorKind::MidambleLinear);
    let (mut prev, mut alpha) = rx.preamble_line(&mut report)?;
    let tc = rx.tc;
    let mut plan = CompensationPlan::empty(modem.config().sample_rate_hz());
    let mut seg_start_s = 0.0;
    for &p in layout.midamble_positions() {
        let law = |t: f64| prev.offset_hz + alpha * (t - prev.time_s);
        let anchor = rx.midamble(p, law(p as f64 * tc), alpha)?;
        report.anchors.push(anchor);
        plan.push((p + 1) * rx.n, law(seg_start_s), alpha);
        alpha = (anchor.offset_hz - prev.offset_hz) / (anchor.time_s - prev.time_s);
        report.slopes_hz_per_s.push(alpha);
        prev = anchor;
        seg_start_s = (p + 1) as f64 * tc;
    }
    plan.push(rx.payload_len(), prev.offset_hz + alpha * (seg_start_s - prev.time_s), alpha);
    Ok((plan.clone(), report.finish(&plan)))
}

/// One segment per payload chirp, frequency and slope read from the true
/// profile at the chirp start. `payload_t0_s` is the pass time of the first
/// payload sample.
pub fn genie_plan(
    cfg: &ModemConfig,
    layout: &FrameLayout,
    profile: &DopplerProfile,
    payload_t0_s: f64,
) -> Result<(CompensationPlan, EstimateReport)> {
    let n = cfg.chirp_samples();
    let tc = cfg.chirp_duration_s();
    let mut plan = CompensationPlan::empty(cfg.sample_rate_hz());
    for j in 0..layout.n_sym() {
        let t = payload_t0_s + j as f64 * tc;
        plan.push((j + 1) * n, profile.doppler_shift(t)?, profile.doppler_rate(t)?);
    }
    let report = EstimateReport::new(EstimatorKind::Genie).finish(&plan);
    Ok((plan, report))
}

/// Truth handed to the genie baseline.
#[derive(Debug, Clone, Copy)]
pub struct GenieTruth<'a> {
    pub profile: &'a DopplerProfile,
    pub payload_t0_s: f64,
}

/// Runs the estimator `kind` on a received frame (preamble included).
pub fn build_plan(
    kind: EstimatorKind,
    modem: &Modem,
    layout: &FrameLayout,
    frame: &[Complex64],
    truth: Option<GenieTruth<'_>>,
) -> Result<(CompensationPlan, EstimateReport)> {
    match kind {
        EstimatorKind::None => {
            let n = layout.n_sym() * modem.config().chirp_samples();
            let plan = CompensationPlan::identity(n, modem.config().sample_rate_hz());
            let report = EstimateReport::new(kind).finish(&plan);
            Ok((plan, report))
        }
        EstimatorKind::Genie => {
            let truth = truth.ok_or(Error::Parameter("genie compensation needs the true profile"))?;
            genie_plan(modem.config(), layout, truth.profile, truth.payload_t0_s)
        }
        EstimatorKind::Point => point_plan(modem, layout, frame),
        EstimatorKind::Linear => linear_plan(modem, layout, frame),
        EstimatorKind::MidamblePoint => midamble_point_plan(modem, layout, frame),
        EstimatorKind::MidambleLinear => midamble_linear_plan(modem, layout, frame),
    }
}

/// Output of the midamble spacing rule.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "advice", rename_all = "kebab-case"))]
pub enum MidambleAdvice {
    /// Zero Doppler rate: the preamble estimate holds for the whole frame.
    NotNeeded,
    Interval {
        /// Time over which the drift stays within `k` symbol spacings.
        update_interval_s: f64,
        /// Number of estimates per frame, preamble estimate included.
        n_star: usize,
        /// Data chirps between consecutive midambles.
        n_int: usize,
    },
}

/// Midamble spacing for a tolerated drift of `k * R_s` given the Doppler
/// rate `xi` (Hz/s) and `n_sym` payload chirps.
pub fn recommended_midamble_interval(cfg: &ModemConfig, k: f64, xi_hz_per_s: f64, n_sym: usize) -> Result<MidambleAdvice> {
    if !(k > 0.0 && k <= 0.5) {
        return Err(Error::Parameter("tolerance k must lie in (0, 0.5]"));
    }
    if !xi_hz_per_s.is_finite() {
        return Err(Error::Parameter("Doppler rate must be finite"));
    }
    if n_sym == 0 {
        return Err(Error::Parameter("payload must contain at least one chirp"));
    }
    if xi_hz_per_s == 0.0 {
        return Ok(MidambleAdvice::NotNeeded);
    }
    let update_interval_s = k * cfg.symbol_rate_hz() / xi_hz_per_s.abs();
    let n_star = libm::ceil(cfg.chirp_duration_s() * n_sym as f64 / update_interval_s) as usize;
    Ok(MidambleAdvice::Interval {
        update_interval_s,
        n_star,
        n_int: n_sym.div_ceil(n_star),
    })
}
