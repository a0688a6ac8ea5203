//! TOML run manifests and their expansion into scenario grids.
//!
//! Every list-valued key is a sweep axis; a scalar is a one-point axis.
//! Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use lora_dts_core::sim::{NoiseSpec, DEFAULT_ALTITUDE_M, DEFAULT_CARRIER_HZ};
use lora_dts_core::{DopplerProfile, EstimatorKind, ModemConfig, OrbitGeometry, ScenarioConfig};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{0}")]
    Parse(#[from] toml::de::Error),

    #[error("{field}: {message}")]
    Invalid { field: &'static str, message: String },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            Self::One(v) => vec![v.clone()],
            Self::Many(v) => v.clone(),
        }
    }
}

impl<T> From<Vec<T>> for OneOrMany<T> {
    fn from(v: Vec<T>) -> Self {
        Self::Many(v)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub modem: ModemSection,
    #[serde(default)]
    pub frame: FrameSection,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub receiver: ReceiverSection,
}

/// Trial budget and seeding. With neither `trials` nor `min_symbols` set,
/// each cell runs [`DEFAULT_TRIALS`] frames.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub trials: Option<u64>,
    /// Frames per cell chosen so each cell carries at least this many data symbols.
    pub min_symbols: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    #[serde(default)]
    pub workers: usize,
}

pub const DEFAULT_TRIALS: u64 = 100;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModemSection {
    #[serde(default = "default_sf")]
    pub sf: OneOrMany<u8>,
    #[serde(default = "default_ldro")]
    pub ldro: OneOrMany<bool>,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_hz: f64,
    #[serde(default = "default_oversampling")]
    pub oversampling: u32,
}

impl Default for ModemSection {
    fn default() -> Self {
        Self {
            sf: default_sf(),
            ldro: default_ldro(),
            bandwidth_hz: default_bandwidth(),
            oversampling: default_oversampling(),
        }
    }
}

fn default_sf() -> OneOrMany<u8> {
    OneOrMany::One(7)
}

fn default_ldro() -> OneOrMany<bool> {
    OneOrMany::One(false)
}

fn default_bandwidth() -> f64 {
    125e3
}

fn default_oversampling() -> u32 {
    1
}

/// Frame layout. `n_dw` and `n_int` fall back to each estimator's own
/// values when absent; `n_int` only applies to midamble estimators.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSection {
    #[serde(default = "default_n_up")]
    pub n_up: usize,
    pub n_dw: Option<usize>,
    pub n_int: Option<OneOrMany<usize>>,
    pub payload_bytes: Option<OneOrMany<usize>>,
    pub payload_bits: Option<OneOrMany<usize>>,
    #[serde(default = "default_cr")]
    pub cr: u8,
}

impl Default for FrameSection {
    fn default() -> Self {
        Self {
            n_up: default_n_up(),
            n_dw: None,
            n_int: None,
            payload_bytes: None,
            payload_bits: None,
            cr: default_cr(),
        }
    }
}

fn default_n_up() -> usize {
    8
}

fn default_cr() -> u8 {
    1
}

/// Doppler profile, pass times and noise. Exactly one of `esn0_db`,
/// `snr_db` or `noiseless = true`; Es/N0 = 14 dB when none is given.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    #[serde(default = "default_profile")]
    pub profile: DopplerProfile,
    #[serde(default = "default_t_start")]
    pub t_start_s: OneOrMany<f64>,
    pub esn0_db: Option<OneOrMany<f64>>,
    pub snr_db: Option<OneOrMany<f64>>,
    #[serde(default)]
    pub noiseless: bool,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            profile: default_profile(),
            t_start_s: default_t_start(),
            esn0_db: None,
            snr_db: None,
            noiseless: false,
        }
    }
}

pub fn default_profile() -> DopplerProfile {
    DopplerProfile::LeoPass(OrbitGeometry::new(DEFAULT_ALTITUDE_M, DEFAULT_CARRIER_HZ).expect("valid default orbit"))
}

fn default_t_start() -> OneOrMany<f64> {
    OneOrMany::One(0.0)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverSection {
    #[serde(default = "default_estimators")]
    pub estimators: OneOrMany<EstimatorKind>,
}

impl Default for ReceiverSection {
    fn default() -> Self {
        Self {
            estimators: default_estimators(),
        }
    }
}

fn default_estimators() -> OneOrMany<EstimatorKind> {
    OneOrMany::Many(EstimatorKind::ALL.to_vec())
}

impl Manifest {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    fn noise_axis(&self) -> Result<Vec<NoiseSpec>, ConfigError> {
        let ch = &self.channel;
        let given = ch.esn0_db.is_some() as u8 + ch.snr_db.is_some() as u8 + ch.noiseless as u8;
        if given > 1 {
            return Err(invalid(
                "channel",
                "give exactly one of esn0_db, snr_db or noiseless = true",
            ));
        }
        let axis: Vec<NoiseSpec> = match (&ch.esn0_db, &ch.snr_db) {
            (Some(e), _) => e.to_vec().into_iter().map(NoiseSpec::EsN0Db).collect(),
            (_, Some(s)) => s.to_vec().into_iter().map(NoiseSpec::SnrDb).collect(),
            _ if ch.noiseless => vec![NoiseSpec::Noiseless],
            _ => vec![NoiseSpec::EsN0Db(14.0)],
        };
        if axis.is_empty() {
            return Err(invalid("channel", "noise axis is empty"));
        }
        for n in &axis {
            if let NoiseSpec::EsN0Db(v) | NoiseSpec::SnrDb(v) = n {
                if !v.is_finite() {
                    return Err(invalid("channel", "noise levels must be finite"));
                }
            }
        }
        Ok(axis)
    }

    fn payload_axis(&self) -> Result<Vec<usize>, ConfigError> {
        let f = &self.frame;
        let bits = match (&f.payload_bytes, &f.payload_bits) {
            (Some(_), Some(_)) => return Err(invalid("frame", "give payload_bytes or payload_bits, not both")),
            (Some(b), None) => b.to_vec().into_iter().map(|b| 8 * b).collect(),
            (None, Some(b)) => b.to_vec(),
            (None, None) => vec![lora_dts_core::sim::DEFAULT_PAYLOAD_BITS],
        };
        if bits.is_empty() || bits.contains(&0) {
            return Err(invalid("frame", "payload sizes must be positive"));
        }
        Ok(bits)
    }

    fn profile(&self) -> Result<DopplerProfile, ConfigError> {
        match self.channel.profile {
            DopplerProfile::LeoPass(g) => OrbitGeometry::new(g.altitude_m(), g.carrier_hz())
                .map(DopplerProfile::LeoPass)
                .map_err(|e| invalid("channel.profile", e.to_string())),
            DopplerProfile::Static { f0_hz } if !f0_hz.is_finite() => Err(invalid("channel.profile", "f0_hz must be finite")),
            DopplerProfile::LinearRamp {
                f0_hz,
                slope_hz_per_s,
                t_ref_s,
            } if !(f0_hz.is_finite() && slope_hz_per_s.is_finite() && t_ref_s.is_finite()) => {
                Err(invalid("channel.profile", "ramp parameters must be finite"))
            }
            p => Ok(p),
        }
    }

    /// Expands the manifest into grid cells in a fixed order: sf, ldro,
    /// payload, pass time, noise, estimator, midamble spacing.
    pub fn expand(&self) -> Result<Vec<ScenarioConfig>, ConfigError> {
        if self.run.trials == Some(0) || self.run.min_symbols == Some(0) {
            return Err(invalid("run", "trials and min_symbols must be positive"));
        }
        if self.run.trials.is_some() && self.run.min_symbols.is_some() {
            return Err(invalid("run", "give trials or min_symbols, not both"));
        }
        let profile = self.profile()?;
        let noise = self.noise_axis()?;
        let payloads = self.payload_axis()?;
        let estimators = self.receiver.estimators.to_vec();
        if estimators.is_empty() {
            return Err(invalid("receiver.estimators", "no estimator selected"));
        }
        let t_starts = self.channel.t_start_s.to_vec();
        if t_starts.is_empty() || t_starts.iter().any(|t| !t.is_finite()) {
            return Err(invalid("channel.t_start_s", "pass times must be finite"));
        }
        let mut cells = Vec::new();
        for sf in self.modem.sf.to_vec() {
            for ldro in self.modem.ldro.to_vec() {
                let modem = ModemConfig::with_oversampling(sf, self.modem.bandwidth_hz, ldro, self.modem.oversampling)
                    .map_err(|e| invalid("modem", e.to_string()))?;
                for &bits in &payloads {
                    for &t_start_s in &t_starts {
                        for &noise in &noise {
                            for &estimator in &estimators {
                                for n_int in self.n_int_axis(estimator, sf)? {
                                    let mut sc = ScenarioConfig::reference(sf, ldro, estimator, t_start_s)
                                        .map_err(|e| invalid("modem", e.to_string()))?;
                                    sc.modem = modem;
                                    sc.n_up = self.frame.n_up;
                                    sc.n_dw = self.frame.n_dw.unwrap_or(estimator.default_n_dw());
                                    sc.n_int = n_int;
                                    sc.payload_bits = bits;
                                    sc.cr = self.frame.cr;
                                    sc.profile = profile;
                                    sc.noise = noise;
                                    sc.master_seed = self.run.seed;
                                    sc.trials = self.trials_for(&sc)?;
                                    sc.validate().map_err(|e| invalid("frame", e.to_string()))?;
                                    cells.push(sc);
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(cells)
    }

    fn n_int_axis(&self, estimator: EstimatorKind, sf: u8) -> Result<Vec<usize>, ConfigError> {
        if !estimator.uses_midambles() {
            return Ok(vec![0]);
        }
        match &self.frame.n_int {
            None => Ok(vec![estimator.default_n_int(sf)]),
            Some(v) => {
                let v = v.to_vec();
                if v.is_empty() || v.contains(&0) {
                    return Err(invalid("frame.n_int", "midamble spacing must be at least 1"));
                }
                Ok(v)
            }
        }
    }

    fn trials_for(&self, sc: &ScenarioConfig) -> Result<u64, ConfigError> {
        match (self.run.trials, self.run.min_symbols) {
            (Some(t), _) => Ok(t),
            (None, Some(symbols)) => {
                let per_frame = sc.n_data().map_err(|e| invalid("frame", e.to_string()))? as u64;
                Ok(symbols.div_ceil(per_frame))
            }
            (None, None) => Ok(DEFAULT_TRIALS),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_manifest_uses_defaults() {
        let m = Manifest::parse("").unwrap();
        let cells = m.expand().unwrap();
        assert_eq!(cells.len(), 6);
        let point = cells.iter().find(|c| c.estimator == EstimatorKind::Point).unwrap();
        assert_eq!(point.n_dw, 2);
        assert_eq!(point.trials, DEFAULT_TRIALS);
        assert_eq!(point.noise, NoiseSpec::EsN0Db(14.0));
        assert_eq!(point.payload_bits, 120);
        let ml = cells.iter().find(|c| c.estimator == EstimatorKind::MidambleLinear).unwrap();
        assert_eq!((ml.n_dw, ml.n_int), (6, 6));
    }

    #[test]
    fn grid_expansion_counts_and_order() {
        let m = Manifest::parse(
            r#"
            [run]
            min_symbols = 1000
            seed = 9
            [modem]
            sf = [7, 12]
            ldro = [false, true]
            [frame]
            payload_bytes = [10, 15]
            n_int = [2, 4]
            [channel]
            t_start_s = [-366.0, 0.0]
            esn0_db = [10.0, 14.0]
            [receiver]
            estimators = ["point", "midamble-point"]
            "#,
        )
        .unwrap();
        let cells = m.expand().unwrap();
        // point: 1 n_int value, midamble-point: 2.
        assert_eq!(cells.len(), 2 * 2 * 2 * 2 * 2 * 3);
        assert_eq!(cells[0].modem.sf(), 7);
        assert_eq!(cells[0].estimator, EstimatorKind::Point);
        assert_eq!((cells[1].estimator, cells[1].n_int), (EstimatorKind::MidamblePoint, 2));
        assert_eq!(cells[2].n_int, 4);
        assert!(cells.iter().all(|c| c.master_seed == 9));
        for c in &cells {
            let n = c.n_data().unwrap() as u64;
            assert!(c.trials * n >= 1000 && (c.trials - 1) * n < 1000);
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            "bogus = 1",
            "[modem]\nspreading = 7",
            "[channel.profile]\nkind = \"leo-pass\"\naltitude_m = 5e5\ncarrier_hz = 8.68e8\nextra = 1",
            "[receiver]\nestimators = [\"kalman\"]",
        ] {
            assert!(matches!(Manifest::parse(text), Err(ConfigError::Parse(_))), "{text}");
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = Manifest::parse("[run]\nseed = 1\n\n[modem]\nsf = \"seven\"\n").unwrap_err();
        assert!(err.to_string().contains("line 5"), "{err}");
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in [
            "[modem]\nsf = 13",
            "[modem]\noversampling = 3",
            "[channel]\nesn0_db = 10.0\nsnr_db = -5.0",
            "[channel]\nesn0_db = []",
            "[frame]\npayload_bytes = 1\npayload_bits = 8",
            "[frame]\nn_dw = 1\n[receiver]\nestimators = \"linear\"",
            "[frame]\nn_int = 0\n[receiver]\nestimators = \"midamble-point\"",
            "[run]\ntrials = 0",
            "[run]\ntrials = 5\nmin_symbols = 10",
            "[channel.profile]\nkind = \"leo-pass\"\naltitude_m = -1.0\ncarrier_hz = 8.68e8",
        ] {
            let r = Manifest::parse(text).and_then(|m| m.expand());
            assert!(matches!(r, Err(ConfigError::Invalid { .. })), "{text}: {r:?}");
        }
    }

    #[test]
    fn synthetic_profiles_parse() {
        let m = Manifest::parse(
            "[channel]\nnoiseless = true\n[channel.profile]\nkind = \"linear-ramp\"\nf0_hz = 10.0\nslope_hz_per_s = -300.0\nt_ref_s = 0.0\n",
        )
        .unwrap();
        let cells = m.expand().unwrap();
        assert!(matches!(cells[0].profile, DopplerProfile::LinearRamp { .. }));
        assert_eq!(cells[0].noise, NoiseSpec::Noiseless);
        let z = Manifest::parse("[channel.profile]\nkind = \"zero\"\n").unwrap();
        assert_eq!(z.expand().unwrap()[0].profile, DopplerProfile::Zero);
    }
}
