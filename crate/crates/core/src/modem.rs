//! LoRa chirp synthesis, frame assembly and FFT demodulation.
//!
//! Chirps are generated from the closed-form quadratic phase of the linear
//! frequency law. At sample `k` the phase in cycles is a rational number
//! with denominator `2 * 2^sf * osf^2`, so it is reduced exactly in integer
//! arithmetic and looked up in a table of roots of unity. The waveforms are
//! therefore bit-reproducible and carry no accumulated rounding error.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{peak_bin, Fft};

pub const MIN_SF: u8 = 7;
pub const MAX_SF: u8 = 12;

/// Modulation parameters and the constants derived from them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModemConfig {
    sf: u8,
    bandwidth_hz: f64,
    ldro: bool,
    oversampling: u32,
    alphabet_size: u32,
    chirp_samples: usize,
    chirp_duration_s: f64,
    symbol_rate_hz: f64,
    bin_width_hz: f64,
}

impl ModemConfig {
    /// Critically sampled configuration (one sample per chip).
    pub fn new(sf: u8, bandwidth_hz: f64, ldro: bool) -> Result<Self> {
        Self::with_oversampling(sf, bandwidth_hz, ldro, 1)
    }

    pub fn with_oversampling(sf: u8, bandwidth_hz: f64, ldro: bool, oversampling: u32) -> Result<Self> {
        if !(MIN_SF..=MAX_SF).contains(&sf) {
            return Err(Error::SpreadingFactor(sf));
        }
        if !(bandwidth_hz.is_finite() && bandwidth_hz > 0.0) {
            return Err(Error::Bandwidth(bandwidth_hz));
        }
        if !oversampling.is_power_of_two() {
            return Err(Error::Oversampling(oversampling));
        }
        let chips = 1u32 << sf;
        let alphabet_size = if ldro { chips >> 2 } else { chips };
        Ok(Self {
            sf,
            bandwidth_hz,
            ldro,
            oversampling,
            alphabet_size,
            chirp_samples: (chips * oversampling) as usize,
            chirp_duration_s: chips as f64 / bandwidth_hz,
            symbol_rate_hz: bandwidth_hz / chips as f64,
            bin_width_hz: bandwidth_hz / alphabet_size as f64,
        })
    }

    pub fn sf(&self) -> u8 {
        self.sf
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }

    pub fn ldro(&self) -> bool {
        self.ldro
    }

    pub fn oversampling(&self) -> u32 {
        self.oversampling
    }

    /// Symbols per chirp, `M`: `2^sf`, or `2^(sf-2)` with LDRO.
    pub fn alphabet_size(&self) -> u32 {
        self.alphabet_size
    }

    /// Chips per chirp, `2^sf`, independent of LDRO.
    pub fn chips(&self) -> u32 {
        1 << self.sf
    }

    /// Samples per chirp, `N = osf * 2^sf`.
    pub fn chirp_samples(&self) -> usize {
        self.chirp_samples
    }

    pub fn chirp_duration_s(&self) -> f64 {
        self.chirp_duration_s
    }

    pub fn symbol_rate_hz(&self) -> f64 {
        self.symbol_rate_hz
    }

    /// Frequency spacing between adjacent symbols, `B / M`.
    pub fn bin_width_hz(&self) -> f64 {
        self.bin_width_hz
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.bandwidth_hz * self.oversampling as f64
    }

    /// FFT bin spacing of a one-chirp transform, always `B / 2^sf`.
    pub fn fft_resolution_hz(&self) -> f64 {
        self.symbol_rate_hz
    }

    /// FFT bins between adjacent symbols: 1, or 4 with LDRO.
    pub fn symbol_stride(&self) -> u32 {
        self.chips() / self.alphabet_size
    }

    pub fn bits_per_symbol(&self) -> u32 {
        if self.ldro {
            self.sf as u32 - 2
        } else {
            self.sf as u32
        }
    }
}

/// Uniformly sampled complex envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct BasebandSignal {
    pub samples: Vec<Complex64>,
    pub sample_rate_hz: f64,
    /// Absolute time of the first sample on the satellite-pass clock.
    pub t0_s: f64,
}

impl BasebandSignal {
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64, t0_s: f64) -> Self {
        Self {
            samples,
            sample_rate_hz,
            t0_s,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Time of sample `k` on the pass clock.
    pub fn time_of(&self, k: usize) -> f64 {
        self.t0_s + k as f64 / self.sample_rate_hz
    }
}

/// Data symbols validated against an alphabet size.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SymbolSequence(Vec<u32>);

impl SymbolSequence {
    pub fn new(symbols: Vec<u32>, cfg: &ModemConfig) -> Result<Self> {
        let alphabet = cfg.alphabet_size();
        if let Some(&symbol) = symbols.iter().find(|&&s| s >= alphabet) {
            return Err(Error::SymbolOutOfRange { symbol, alphabet });
        }
        Ok(Self(symbols))
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Which way a received chirp sweeps. Selects the dechirping reference:
/// an upchirp is multiplied by a pure downchirp and vice versa.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChirpKind {
    Up,
    Down,
}

/// Strongest bin of a dechirped chirp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    /// Raw FFT index in `0..N`.
    pub bin: usize,
    /// Two-sided bin index in `-N/2..N/2`.
    pub signed_bin: i64,
    pub signed_freq_hz: f64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub peak: Peak,
    pub symbol: u32,
}

/// Layout of one frame: preamble upchirps, preamble downchirps and payload
/// chirps, some of which may be midamble pilots (symbol 0).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameLayout {
    n_up: usize,
    n_dw: usize,
    n_sym: usize,
    n_int: usize,
    midamble_positions: Vec<usize>,
}

impl FrameLayout {
    /// Places a midamble after every `n_int` data chirps, provided at least
    /// one data chirp follows it. `n_int = 0` disables midambles.
    pub fn new(n_up: usize, n_dw: usize, n_data: usize, n_int: usize) -> Self {
        let count = if n_int == 0 || n_data == 0 {
            0
        } else {
            (n_data - 1) / n_int
        };
        let midamble_positions = (1..=count).map(|i| i * (n_int + 1) - 1).collect();
        Self {
            n_up,
            n_dw,
            n_sym: n_data + count,
            n_int,
            midamble_positions,
        }
    }

    pub fn n_up(&self) -> usize {
        self.n_up
    }

    pub fn n_dw(&self) -> usize {
        self.n_dw
    }

    /// Payload chirps, data and midambles together.
    pub fn n_sym(&self) -> usize {
        self.n_sym
    }

    pub fn n_int(&self) -> usize {
        self.n_int
    }

    pub fn n_data(&self) -> usize {
        self.n_sym - self.midamble_positions.len()
    }

    /// Payload chirp indices carrying midambles, ascending.
    pub fn midamble_positions(&self) -> &[usize] {
        &self.midamble_positions
    }

    pub fn is_midamble(&self, payload_index: usize) -> bool {
        self.midamble_positions.binary_search(&payload_index).is_ok()
    }

    /// Chirp index (within the whole frame) of the first payload chirp.
    pub fn payload_offset(&self) -> usize {
        self.n_up + self.n_dw
    }

    pub fn total_chirps(&self) -> usize {
        self.n_up + self.n_dw + self.n_sym
    }

    pub fn time_on_air_s(&self, cfg: &ModemConfig) -> f64 {
        self.total_chirps() as f64 * cfg.chirp_duration_s()
    }
}

/// Payload chirps needed for `payload_bits` at coding rate `4/(4+cr)`.
/// Only the symbol count is modelled; no coding is performed.
pub fn payload_symbol_count(cfg: &ModemConfig, payload_bits: usize, cr: u8) -> Result<usize> {
    if !(1..=4).contains(&cr) {
        return Err(Error::CodingRate(cr));
    }
    if payload_bits == 0 {
        return Err(Error::EmptyPayload);
    }
    let coded = (payload_bits * (4 + cr as usize)).div_ceil(4);
    Ok(coded.div_ceil(cfg.bits_per_symbol() as usize))
}

/// Chirp synthesizer and demodulator for one configuration.
#[derive(Debug, Clone)]
pub struct Modem {
    cfg: ModemConfig,
    fft: Fft,
    roots: Vec<Complex64>,
    upchirp: Vec<Complex64>,
    downchirp: Vec<Complex64>,
}

impl Modem {
    pub fn new(cfg: ModemConfig) -> Self {
        let denom = phase_denominator(&cfg) as usize;
        let roots = (0..denom)
            .map(|r| {
                let a = 2.0 * PI * r as f64 / denom as f64;
                Complex64::new(libm::cos(a), libm::sin(a))
            })
            .collect();
        let mut modem = Self {
            cfg,
            fft: Fft::new(cfg.chirp_samples()),
            roots,
            upchirp: Vec::new(),
            downchirp: Vec::new(),
        };
        let mut up = vec![Complex64::new(0.0, 0.0); cfg.chirp_samples()];
        modem.write_slot(0, &mut up);
        modem.downchirp = up.iter().map(|z| z.conj()).collect();
        modem.upchirp = up;
        modem
    }

    pub fn config(&self) -> &ModemConfig {
        &self.cfg
    }

    pub fn upchirp(&self) -> &[Complex64] {
        &self.upchirp
    }

    pub fn downchirp(&self) -> &[Complex64] {
        &self.downchirp
    }

    /// Writes the chirp for symbol `s` into `out` (exactly `N` samples).
    pub fn write_symbol(&self, s: u32, out: &mut [Complex64]) -> Result<()> {
        self.check_symbol(s)?;
        self.check_len(out.len())?;
        self.write_slot(s * self.cfg.symbol_stride(), out);
        Ok(())
    }

    pub fn symbol_chirp(&self, s: u32) -> Result<Vec<Complex64>> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.cfg.chirp_samples()];
        self.write_symbol(s, &mut out)?;
        Ok(out)
    }

    // `slot` counts FFT bins: the start frequency is -B/2 + slot * B / 2^sf.
    fn write_slot(&self, slot: u32, out: &mut [Complex64]) {
        let chips = self.cfg.chips() as i64;
        let osf = self.cfg.oversampling() as i64;
        let denom = phase_denominator(&self.cfg);
        let slot = slot as i64;
        let wrap = (chips - slot) * osf;
        let linear = (2 * slot - chips) * osf;
        for (k, v) in out.iter_mut().enumerate() {
            let k = k as i64;
            let mut num = linear * k + k * k;
            if k > wrap {
                num -= 2 * chips * osf * (k - wrap);
            }
            *v = self.roots[num.rem_euclid(denom) as usize];
        }
    }

    fn check_symbol(&self, s: u32) -> Result<()> {
        let alphabet = self.cfg.alphabet_size();
        if s >= alphabet {
            return Err(Error::SymbolOutOfRange { symbol: s, alphabet });
        }
        Ok(())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        let expected = self.cfg.chirp_samples();
        if len != expected {
            return Err(Error::SegmentLength { expected, actual: len });
        }
        Ok(())
    }

    /// Assembles `n_up` upchirps, `n_dw` downchirps and the payload, with
    /// symbol 0 at the layout's midamble positions.
    pub fn build_frame(&self, layout: &FrameLayout, payload: &SymbolSequence, t0_s: f64) -> Result<BasebandSignal> {
        let midambles = layout.midamble_positions().len();
        if payload.len() + midambles != layout.n_sym() {
            return Err(Error::PayloadLength {
                payload: payload.len(),
                midambles,
                n_sym: layout.n_sym(),
            });
        }
        for &s in payload.as_slice() {
            self.check_symbol(s)?;
        }
        let n = self.cfg.chirp_samples();
        let mut samples = Vec::with_capacity(layout.total_chirps() * n);
        for _ in 0..layout.n_up() {
            samples.extend_from_slice(&self.upchirp);
        }
        for _ in 0..layout.n_dw() {
            samples.extend_from_slice(&self.downchirp);
        }
        let mut data = payload.as_slice().iter();
        for j in 0..layout.n_sym() {
            let start = samples.len();
            samples.resize(start + n, Complex64::new(0.0, 0.0));
            let s = if layout.is_midamble(j) {
                0
            } else {
                // Length was checked above.
                *data.next().expect("payload shorter than layout")
            };
            self.write_slot(s * self.cfg.symbol_stride(), &mut samples[start..]);
        }
        Ok(BasebandSignal::new(samples, self.cfg.sample_rate_hz(), t0_s))
    }

    /// Dechirps one chirp and locates the strongest FFT bin. `scratch` is
    /// resized as needed so callers can reuse it across chirps.
    pub fn dechirp_peak(&self, rx: &[Complex64], kind: ChirpKind, scratch: &mut Vec<Complex64>) -> Result<Peak> {
        self.check_len(rx.len())?;
        let reference = match kind {
            ChirpKind::Up => &self.downchirp,
            ChirpKind::Down => &self.upchirp,
        };
        scratch.clear();
        scratch.extend(rx.iter().zip(reference).map(|(x, r)| x * r));
        self.fft.forward(scratch);
        let (bin, power) = peak_bin(scratch);
        let n = scratch.len() as i64;
        let signed_bin = if (bin as i64) >= n / 2 { bin as i64 - n } else { bin as i64 };
        Ok(Peak {
            bin,
            signed_bin,
            signed_freq_hz: signed_bin as f64 * self.cfg.fft_resolution_hz(),
            magnitude: libm::sqrt(power),
        })
    }

    /// Maps a peak to a symbol: nearest multiple of the symbol stride,
    /// reduced modulo `M`.
    pub fn decide(&self, peak: &Peak) -> u32 {
        let stride = self.cfg.symbol_stride() as i64;
        let slot = (peak.signed_bin + stride / 2).div_euclid(stride);
        slot.rem_euclid(self.cfg.alphabet_size() as i64) as u32
    }

    pub fn demod_chirp(&self, rx: &[Complex64], kind: ChirpKind) -> Result<Decision> {
        let mut scratch = Vec::with_capacity(rx.len());
        let peak = self.dechirp_peak(rx, kind, &mut scratch)?;
        Ok(Decision {
            peak,
            symbol: self.decide(&peak),
        })
    }
}

fn phase_denominator(cfg: &ModemConfig) -> i64 {
    let osf = cfg.oversampling() as i64;
    2 * cfg.chips() as i64 * osf * osf
}

/// One chirp for symbol `s`, starting at `t0_s = 0`.
pub fn symbol_envelope(cfg: &ModemConfig, s: u32) -> Result<BasebandSignal> {
    let samples = Modem::new(*cfg).symbol_chirp(s)?;
    Ok(BasebandSignal::new(samples, cfg.sample_rate_hz(), 0.0))
}

/// Pure downchirp: the conjugate of the symbol-0 upchirp.
pub fn downchirp_envelope(cfg: &ModemConfig) -> BasebandSignal {
    let modem = Modem::new(*cfg);
    BasebandSignal::new(modem.downchirp().to_vec(), cfg.sample_rate_hz(), 0.0)
}

pub fn build_frame(
    cfg: &ModemConfig,
    layout: &FrameLayout,
    payload: &SymbolSequence,
    t0_s: f64,
) -> Result<BasebandSignal> {
    Modem::new(*cfg).build_frame(layout, payload, t0_s)
}

pub fn demod_chirp(cfg: &ModemConfig, rx: &[Complex64], kind: ChirpKind) -> Result<Decision> {
    Modem::new(*cfg).demod_chirp(rx, kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(sf: u8, ldro: bool) -> ModemConfig {
        ModemConfig::new(sf, 125e3, ldro).unwrap()
    }

    fn tone(n: usize, cycles_per_sample: f64) -> impl Iterator<Item = Complex64> {
        (0..n).map(move |k| Complex64::from_polar(1.0, 2.0 * PI * cycles_per_sample * k as f64))
    }

    // Instantaneous frequency from the phase difference of adjacent samples.
    fn inst_freq(x: &[Complex64], fs: f64) -> Vec<f64> {
        x.windows(2).map(|w| (w[1] * w[0].conj()).arg() * fs / (2.0 * PI)).collect()
    }

    #[test]
    fn derived_constants() {
        let c = ModemConfig::new(8, 500e3, false).unwrap();
        assert_eq!(c.alphabet_size(), 256);
        assert_eq!(c.chirp_samples(), 256);
        assert!((c.chirp_duration_s() - 5.12e-4).abs() < 1e-15);
        assert_eq!(c.bandwidth_hz() * c.chirp_duration_s(), 256.0);

        let off = cfg(12, false);
        let on = cfg(12, true);
        assert_eq!(on.alphabet_size(), 1024);
        assert_eq!(on.bin_width_hz(), 4.0 * off.bin_width_hz());
        assert_eq!(off.bin_width_hz(), off.symbol_rate_hz());
        assert_eq!(on.chirp_samples() % on.alphabet_size() as usize, 0);

        let osf = ModemConfig::with_oversampling(9, 125e3, false, 4).unwrap();
        assert_eq!(osf.chirp_samples(), 2048);
        assert_eq!(osf.fft_resolution_hz(), osf.symbol_rate_hz());
    }

    #[test]
    fn rejects_bad_configs() {
        assert_eq!(ModemConfig::new(6, 125e3, false), Err(Error::SpreadingFactor(6)));
        assert_eq!(ModemConfig::new(13, 125e3, false), Err(Error::SpreadingFactor(13)));
        assert!(matches!(ModemConfig::new(7, 0.0, false), Err(Error::Bandwidth(_))));
        assert!(matches!(ModemConfig::new(7, f64::NAN, false), Err(Error::Bandwidth(_))));
        assert_eq!(ModemConfig::with_oversampling(7, 125e3, false, 3), Err(Error::Oversampling(3)));
        assert_eq!(ModemConfig::with_oversampling(7, 125e3, false, 0), Err(Error::Oversampling(0)));
    }

    #[test]
    fn symbol_out_of_range() {
        let c = cfg(7, true);
        assert_eq!(
            symbol_envelope(&c, 32),
            Err(Error::SymbolOutOfRange { symbol: 32, alphabet: 32 })
        );
        assert!(SymbolSequence::new(vec![1, 200], &cfg(7, false)).is_err());
    }

    #[test]
    fn s91_start_frequency_and_wrap() {
        // M = 256, B = 500 kHz, oversampled so the sweep is resolvable.
        let c = ModemConfig::with_oversampling(8, 500e3, false, 8).unwrap();
        let x = symbol_envelope(&c, 91).unwrap();
        assert_eq!(x.len(), 2048);
        let f = inst_freq(&x.samples, x.sample_rate_hz);
        let slope = c.bandwidth_hz() / c.chirp_duration_s();
        let dt = 1.0 / x.sample_rate_hz;
        // Midpoint frequency of the first sample pair.
        let expected_start = -72_265.625 + slope * dt / 2.0;
        assert!((f[0] - expected_start).abs() < 1e-6, "{}", f[0]);
        // The only downward step is the wrap from +B/2 to -B/2.
        let wraps: Vec<usize> = f.windows(2).enumerate().filter(|(_, w)| w[1] < w[0]).map(|(i, _)| i).collect();
        assert_eq!(wraps.len(), 1);
        let t_wrap = (250_000.0 + 72_265.625) / slope;
        let k_wrap = wraps[0] as f64 + 1.0;
        assert!((k_wrap * dt - t_wrap).abs() <= dt, "{} vs {}", k_wrap * dt, t_wrap);
    }

    #[test]
    fn symbol_zero_is_pure_upchirp_and_unit_magnitude() {
        let c = cfg(9, false);
        let up = symbol_envelope(&c, 0).unwrap();
        let down = downchirp_envelope(&c);
        for (u, d) in up.samples.iter().zip(&down.samples) {
            assert_eq!(d.conj(), *u);
            assert!((u.norm() - 1.0).abs() < 1e-12);
            let p = u * d;
            assert!((p - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
        assert!(up.samples[0].re == 1.0 && up.samples[0].im == 0.0);
    }

    #[test]
    fn critically_sampled_symbol_is_upchirp_times_tone() {
        let c = cfg(7, false);
        let m = Modem::new(c);
        for s in [1u32, 5, 64, 127] {
            let x = m.symbol_chirp(s).unwrap();
            for ((v, u), t) in x.iter().zip(m.upchirp()).zip(tone(128, s as f64 / 128.0)) {
                assert!((v - u * t).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn downchirp_times_upchirp_peaks_at_dc() {
        let m = Modem::new(cfg(8, false));
        let peak = m.dechirp_peak(m.downchirp(), ChirpKind::Down, &mut Vec::new()).unwrap();
        assert_eq!(peak.bin, 0);
        assert!((peak.magnitude - 256.0).abs() < 1e-9);
    }

    #[test]
    fn loopback_all_symbols() {
        for sf in MIN_SF..=MAX_SF {
            for ldro in [false, true] {
                let m = Modem::new(cfg(sf, ldro));
                let mut scratch = Vec::new();
                let mut chirp = vec![Complex64::new(0.0, 0.0); m.config().chirp_samples()];
                for s in 0..m.config().alphabet_size() {
                    m.write_symbol(s, &mut chirp).unwrap();
                    let peak = m.dechirp_peak(&chirp, ChirpKind::Up, &mut scratch).unwrap();
                    assert_eq!(m.decide(&peak), s, "sf={sf} ldro={ldro}");
                }
            }
        }
    }

    #[test]
    fn oversampled_loopback() {
        for osf in [2u32, 4] {
            let m = Modem::new(ModemConfig::with_oversampling(7, 125e3, false, osf).unwrap());
            for s in 0..128 {
                let x = m.symbol_chirp(s).unwrap();
                assert_eq!(m.demod_chirp(&x, ChirpKind::Up).unwrap().symbol, s);
            }
        }
    }

    #[test]
    fn on_bin_offset_shifts_decision_cyclically() {
        let c = cfg(7, false);
        let m = Modem::new(c);
        for j in -3i64..=3 {
            let shift: Vec<Complex64> = tone(128, j as f64 / 128.0).collect();
            for s in 0..128u32 {
                let x: Vec<Complex64> = m.symbol_chirp(s).unwrap().iter().zip(&shift).map(|(a, b)| a * b).collect();
                let d = m.demod_chirp(&x, ChirpKind::Up).unwrap();
                assert_eq!(d.symbol as i64, (s as i64 + j).rem_euclid(128));
            }
        }
    }

    #[test]
    fn downchirp_under_static_offset_reads_offset() {
        let c = cfg(8, false);
        let m = Modem::new(c);
        for j in [-5i64, 5] {
            let x: Vec<Complex64> =
                m.downchirp().iter().zip(tone(256, j as f64 / 256.0)).map(|(a, b)| a * b).collect();
            let peak = m.demod_chirp(&x, ChirpKind::Down).unwrap().peak;
            assert_eq!(peak.signed_freq_hz, j as f64 * c.symbol_rate_hz());
        }
    }

    #[test]
    fn ldro_symbols_are_four_bins_apart() {
        let m = Modem::new(cfg(10, true));
        let mut scratch = Vec::new();
        for s in 0..255u32 {
            let a = m.dechirp_peak(&m.symbol_chirp(s).unwrap(), ChirpKind::Up, &mut scratch).unwrap();
            let b = m.dechirp_peak(&m.symbol_chirp(s + 1).unwrap(), ChirpKind::Up, &mut scratch).unwrap();
            assert_eq!(b.bin - a.bin, 4);
        }
    }

    #[test]
    fn demod_rejects_wrong_length() {
        let c = cfg(7, false);
        assert_eq!(
            demod_chirp(&c, &[Complex64::new(1.0, 0.0); 100], ChirpKind::Up),
            Err(Error::SegmentLength { expected: 128, actual: 100 })
        );
    }

    #[test]
    fn payload_symbols() {
        assert_eq!(payload_symbol_count(&cfg(10, false), 120, 1), Ok(15));
        assert_eq!(payload_symbol_count(&cfg(12, true), 120, 1), Ok(15));
        assert_eq!(payload_symbol_count(&cfg(7, false), 1, 1), Ok(1));
        assert_eq!(payload_symbol_count(&cfg(12, false), 120, 1), Ok(13));
        assert_eq!(payload_symbol_count(&cfg(7, false), 120, 0), Err(Error::CodingRate(0)));
        assert_eq!(payload_symbol_count(&cfg(7, false), 120, 5), Err(Error::CodingRate(5)));
        assert_eq!(payload_symbol_count(&cfg(7, false), 0, 1), Err(Error::EmptyPayload));
    }

    #[test]
    fn midamble_placement() {
        // Brute-force reference: walk the data chirps and emit a pilot
        // after every n_int of them unless the payload is exhausted.
        fn reference(n_data: usize, n_int: usize) -> Vec<usize> {
            let mut out = Vec::new();
            let mut pos = 0;
            for d in 1..=n_data {
                pos += 1;
                if d % n_int == 0 && d < n_data {
                    out.push(pos);
                    pos += 1;
                }
            }
            out
        }
        let l = FrameLayout::new(8, 2, 25, 6);
        assert_eq!(l.midamble_positions(), &[6, 13, 20, 27]);
        assert_eq!(l.n_sym(), 29);
        assert_eq!(l.n_data(), 25);
        for n_data in 1..40 {
            for n_int in 1..14 {
                let l = FrameLayout::new(8, 2, n_data, n_int);
                assert_eq!(l.midamble_positions(), reference(n_data, n_int).as_slice());
                assert!(l.midamble_positions().iter().all(|&p| p < l.n_sym() && p != 0));
                // Preamble estimate plus midambles gives ceil(n_data / n_int) anchors.
                assert_eq!(1 + l.midamble_positions().len(), n_data.div_ceil(n_int));
            }
        }
        assert!(FrameLayout::new(8, 2, 15, 0).midamble_positions().is_empty());
    }

    #[test]
    fn frame_lengths() {
        let c = cfg(7, false);
        let m = Modem::new(c);
        let layout = FrameLayout::new(8, 2, 25, 0);
        let payload = SymbolSequence::new((0..25).collect(), &c).unwrap();
        let frame = m.build_frame(&layout, &payload, -366.0).unwrap();
        assert_eq!(frame.len(), 35 * 128);
        assert_eq!(frame.t0_s, -366.0);

        let empty = m.build_frame(&FrameLayout::new(8, 2, 0, 0), &SymbolSequence::default(), 0.0).unwrap();
        assert_eq!(empty.len(), 10 * 128);

        assert!(matches!(
            m.build_frame(&layout, &SymbolSequence::new(vec![1; 24], &c).unwrap(), 0.0),
            Err(Error::PayloadLength { .. })
        ));
    }

    #[test]
    fn frame_carries_midambles_and_data() {
        let c = cfg(7, false);
        let m = Modem::new(c);
        let layout = FrameLayout::new(8, 2, 10, 4);
        let data: Vec<u32> = (1..=10).map(|i| i * 11).collect();
        let frame = m.build_frame(&layout, &SymbolSequence::new(data.clone(), &c).unwrap(), 0.0).unwrap();
        let n = c.chirp_samples();
        let mut decoded = Vec::new();
        for j in 0..layout.n_sym() {
            let start = (layout.payload_offset() + j) * n;
            let d = m.demod_chirp(&frame.samples[start..start + n], ChirpKind::Up).unwrap();
            if layout.is_midamble(j) {
                assert_eq!(d.symbol, 0);
            } else {
                decoded.push(d.symbol);
            }
        }
        assert_eq!(decoded, data);
        let first_dw = layout.n_up() * n;
        assert_eq!(&frame.samples[first_dw..first_dw + n], m.downchirp());
        assert!((layout.time_on_air_s(&c) - 22.0 * 1.024e-3).abs() < 1e-12);
    }
}
