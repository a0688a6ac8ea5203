use thiserror::Error;

/// Errors raised by the modem, channel, orbit and estimator code.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("spreading factor {0} outside 7..=12")]
    SpreadingFactor(u8),

    #[error("bandwidth must be positive and finite, got {0} Hz")]
    Bandwidth(f64),

    #[error("oversampling factor must be a power of two, got {0}")]
    Oversampling(u32),

    #[error("symbol {symbol} outside alphabet of size {alphabet}")]
    SymbolOutOfRange { symbol: u32, alphabet: u32 },

    #[error("chirp segment has {actual} samples, expected {expected}")]
    SegmentLength { expected: usize, actual: usize },

    #[error("payload of {payload} symbols plus {midambles} midambles does not fill {n_sym} payload chirps")]
    PayloadLength {
        payload: usize,
        midambles: usize,
        n_sym: usize,
    },

    #[error("coding rate {0} outside 1..=4")]
    CodingRate(u8),

    #[error("payload must carry at least one bit")]
    EmptyPayload,

    #[error("orbit altitude must be positive and finite, got {0} m")]
    Altitude(f64),

    #[error("t = {t} s lies outside the visibility window of ±{half_window} s")]
    OutOfVisibility { t: f64, half_window: f64 },

    #[error("{estimator} needs at least {required} preamble downchirps, layout has {actual}")]
    MissingDownchirps {
        estimator: &'static str,
        required: usize,
        actual: usize,
    },

    #[error("{0} needs midambles in the payload (n_int >= 1)")]
    MissingMidambles(&'static str),

    #[error("compensation plan does not tile 0..{expected} samples")]
    PlanTiling { expected: usize },

    #[error("received frame has {actual} samples, layout expects {expected}")]
    FrameLength { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    Parameter(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
