//! Attention-based feedback code at toy scale.
//!
//! A message of `K = m * num_blocks` bits is split into blocks of `m` bits,
//! one token per block. Each round the encoder emits one symbol per block;
//! the receiver returns a learned feedback vector with `fb_per_block`
//! symbols per block, and after `T` rounds a decoder classifies every block
//! into one of `2^m` messages. Differentiation is done on a small
//! reverse-mode tape over dense matrices.

mod checkpoint;
mod complexity;
pub mod gradcheck;
pub mod graph;
pub mod layers;
mod model;
pub mod tensor;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use complexity::{count_complexity, enumerate_encoder_params, measure_encoder_flops, Complexity};
pub use model::{
    bits_to_class, class_to_bits, AfcLink, AfcModel, EncoderState, ForwardBackward, Rollout, RolloutBatch,
};

use serde::{Deserialize, Serialize};

use crate::channel::{SnrDb, SnrTraceConfig};
use crate::codec::{CodecError, SessionConfig};

#[derive(Debug, thiserror::Error)]
pub enum NeuralError {
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    NonFinite(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<NeuralError> for CodecError {
    fn from(e: NeuralError) -> Self {
        match e {
            NeuralError::Protocol(m) => CodecError::ProtocolViolation(m),
            NeuralError::NonFinite(m) => CodecError::NonFinite(m),
            other => CodecError::Config(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AfcConfig {
    /// Bits per block `m`.
    pub block_size: usize,
    pub num_blocks: usize,
    /// Interaction rounds `T`.
    pub rounds: usize,
    /// Feedback lag `L`; 1 is synchronous.
    pub lag: usize,
    pub fb_per_block: usize,
    /// Encoder width.
    pub d_model: usize,
    pub ff_dim: usize,
    pub enc_layers: usize,
    /// Width of the feedback generator and decoder.
    pub dec_d_model: usize,
    pub dec_ff_dim: usize,
    pub dec_layers: usize,
    pub fb_layers: usize,
    pub snr_emb_dim: usize,
    pub snr_hidden: usize,
    pub lightweight: bool,
    /// When set, round `t` reads only feedback rounds
    /// `t-L-w ..= t-L` and skips not-yet-sent codeword slots.
    pub sparse_ff_window: Option<usize>,
    /// Learned per-block position vectors. Without them the model treats
    /// blocks symmetrically.
    pub positional: bool,
    pub init_seed: u64,
}

impl Default for AfcConfig {
    fn default() -> Self {
        AfcConfig::full()
    }
}

impl AfcConfig {
    /// `K = 48`, `T = 9`, 16 blocks of 3 bits, lag 2.
    pub fn full() -> Self {
        AfcConfig {
            block_size: 3,
            num_blocks: 16,
            rounds: 9,
            lag: 2,
            fb_per_block: 1,
            d_model: 16,
            ff_dim: 32,
            enc_layers: 2,
            dec_d_model: 16,
            dec_ff_dim: 32,
            dec_layers: 4,
            fb_layers: 1,
            snr_emb_dim: 16,
            snr_hidden: 16,
            lightweight: false,
            sparse_ff_window: None,
            positional: false,
            init_seed: 0,
        }
    }

    /// Shallower, narrower encoder with the sparse feedback pattern; the
    /// feedback generator and decoder are unchanged.
    pub fn light() -> Self {
        AfcConfig {
            d_model: 12,
            ff_dim: 24,
            enc_layers: 1,
            lightweight: true,
            sparse_ff_window: Some(2),
            ..AfcConfig::full()
        }
    }

    /// Small enough for finite-difference checks of every weight.
    pub fn tiny() -> Self {
        AfcConfig {
            block_size: 2,
            num_blocks: 3,
            rounds: 4,
            lag: 2,
            fb_per_block: 1,
            d_model: 4,
            ff_dim: 6,
            enc_layers: 1,
            dec_d_model: 4,
            dec_ff_dim: 6,
            dec_layers: 1,
            fb_layers: 1,
            snr_emb_dim: 3,
            snr_hidden: 3,
            lightweight: false,
            sparse_ff_window: None,
            positional: false,
            init_seed: 0,
        }
    }

    pub fn k(&self) -> usize {
        self.block_size * self.num_blocks
    }

    pub fn classes(&self) -> usize {
        1 << self.block_size
    }

    pub fn symbols_per_round(&self) -> usize {
        self.num_blocks
    }

    pub fn feedback_len(&self) -> usize {
        self.num_blocks * self.fb_per_block
    }

    pub fn enc_input_dim(&self) -> usize {
        self.block_size + self.rounds + self.rounds * self.fb_per_block + self.snr_emb_dim
    }

    pub fn fb_input_dim(&self) -> usize {
        self.rounds + self.snr_emb_dim
    }

    pub fn dec_input_dim(&self) -> usize {
        self.rounds + self.snr_emb_dim
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |m: &str| Err(NeuralError::Config(m.into()));
        if self.block_size == 0 || self.block_size > 12 {
            return bad("block_size must be in 1..=12");
        }
        for (name, v) in [
            ("num_blocks", self.num_blocks),
            ("rounds", self.rounds),
            ("lag", self.lag),
            ("fb_per_block", self.fb_per_block),
            ("d_model", self.d_model),
            ("ff_dim", self.ff_dim),
            ("enc_layers", self.enc_layers),
            ("dec_d_model", self.dec_d_model),
            ("dec_ff_dim", self.dec_ff_dim),
            ("dec_layers", self.dec_layers),
            ("fb_layers", self.fb_layers),
            ("snr_emb_dim", self.snr_emb_dim),
            ("snr_hidden", self.snr_hidden),
        ] {
            if v == 0 {
                return Err(NeuralError::Config(format!("{name} must be >= 1")));
            }
        }
        if self.enc_layers > self.dec_layers {
            return bad("enc_layers must not exceed dec_layers");
        }
        if self.lightweight && self.sparse_ff_window.is_none() {
            return bad("lightweight encoders use the sparse feedback pattern; set sparse_ff_window");
        }
        Ok(())
    }

    /// Checks that `self` is a lightweight variant of `full`.
    pub fn check_light_pair(&self, full: &AfcConfig) -> Result<(), NeuralError> {
        if !self.lightweight || full.lightweight {
            return Err(NeuralError::Config("expected a (lightweight, full) pair".into()));
        }
        if self.enc_layers > full.enc_layers || self.d_model > full.d_model {
            return Err(NeuralError::Config("lightweight encoder must not be deeper or wider".into()));
        }
        if self.enc_layers == full.enc_layers && self.d_model == full.d_model {
            return Err(NeuralError::Config("lightweight encoder must reduce depth or width".into()));
        }
        Ok(())
    }

    /// Session engine settings matching this model at a fixed uplink SNR.
    pub fn session_config(&self, uplink: SnrDb, noiseless_feedback: bool) -> SessionConfig {
        SessionConfig {
            k: self.k(),
            rounds: self.rounds,
            symbols_per_round: self.symbols_per_round(),
            feedback_len: self.feedback_len(),
            lag: self.lag,
            uplink: SnrTraceConfig::fixed(uplink),
            feedback: SnrTraceConfig::fixed(SnrDb::db(20.0)),
            noiseless_feedback,
            round_period_ms: 7.0,
        }
    }
}
