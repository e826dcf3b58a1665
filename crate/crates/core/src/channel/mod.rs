//! Uplink and feedback channel models.
//!
//! Symbols are real valued (BPSK-like, unit average power). A reception is
//! `y_i = a_i * c_i + n_i` with `n_i ~ N(0, 10^(-snr/10))`.

mod trace;

pub use trace::{SnrTrace, SnrTraceConfig, TraceKind, FIXED_TRACE_STEP_MS};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("non-finite input symbol at index {0}")]
    NonFiniteSymbol(usize),
    #[error("non-finite SNR value {0}")]
    NonFiniteSnr(f64),
    #[error("gain vector has length {gains} but {symbols} symbols were given")]
    GainLength { gains: usize, symbols: usize },
    #[error("invalid channel gain {0}: must be finite and non-zero")]
    InvalidGain(f64),
    #[error("invalid trace configuration: {0}")]
    Config(String),
    #[error("malformed trace csv at line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

/// Signal-to-noise ratio in decibels.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SnrDb(f64);

impl SnrDb {
    pub fn new(db: f64) -> Result<Self, ChannelError> {
        if db.is_finite() {
            Ok(SnrDb(db))
        } else {
            Err(ChannelError::NonFiniteSnr(db))
        }
    }

    /// Panics on a non-finite value. Meant for literals.
    pub fn db(db: f64) -> Self {
        Self::new(db).expect("finite SNR")
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn linear(self) -> f64 {
        10f64.powf(self.0 / 10.0)
    }

    /// Noise variance for unit signal power.
    pub fn noise_variance(self) -> f64 {
        10f64.powf(-self.0 / 10.0)
    }

    pub fn noise_std(self) -> f64 {
        self.noise_variance().sqrt()
    }
}

impl TryFrom<f64> for SnrDb {
    type Error = ChannelError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        SnrDb::new(v)
    }
}

impl From<SnrDb> for f64 {
    fn from(s: SnrDb) -> f64 {
        s.0
    }
}

impl std::fmt::Display for SnrDb {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} dB", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Uplink,
    Feedback,
}

/// Per-symbol channel response.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub enum Gain {
    /// Pure AWGN, `a_i = 1`.
    #[default]
    Unit,
    PerSymbol(Vec<f64>),
}

/// Additive noise setting. Noiseless mode is an explicit flag rather than
/// an infinite SNR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Noise {
    Awgn(SnrDb),
    Noiseless,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub gain: Gain,
    pub noise: Noise,
    pub direction: Direction,
}

impl ChannelParams {
    pub fn awgn(snr: SnrDb, direction: Direction) -> Self {
        ChannelParams { gain: Gain::Unit, noise: Noise::Awgn(snr), direction }
    }

    pub fn noiseless(direction: Direction) -> Self {
        ChannelParams { gain: Gain::Unit, noise: Noise::Noiseless, direction }
    }
}

/// Passes `symbols` through the channel.
///
/// One standard normal draw is consumed per symbol in both noise modes, so
/// the RNG advances identically regardless of the SNR.
pub fn apply_channel<R: Rng + ?Sized>(
    symbols: &[f64],
    params: &ChannelParams,
    rng: &mut R,
) -> Result<Vec<f64>, ChannelError> {
    if let Some(i) = symbols.iter().position(|s| !s.is_finite()) {
        return Err(ChannelError::NonFiniteSymbol(i));
    }
    if let Gain::PerSymbol(g) = &params.gain {
        if g.len() != symbols.len() {
            return Err(ChannelError::GainLength { gains: g.len(), symbols: symbols.len() });
        }
        if let Some(&bad) = g.iter().find(|a| !a.is_finite() || **a == 0.0) {
            return Err(ChannelError::InvalidGain(bad));
        }
    }
    let sigma = match params.noise {
        Noise::Awgn(snr) => snr.noise_std(),
        Noise::Noiseless => 0.0,
    };
    let out = symbols
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let a = match &params.gain {
                Gain::Unit => 1.0,
                Gain::PerSymbol(g) => g[i],
            };
            let z: f64 = rng.sample(StandardNormal);
            a * c + sigma * z
        })
        .collect();
    Ok(out)
}
