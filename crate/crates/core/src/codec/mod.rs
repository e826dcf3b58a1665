//! Codec abstraction, interactive session engine and conventional
//! HARQ baselines.

mod conv;
mod harq;
mod per;
mod session;

pub use conv::{coded_len, conv_encode, viterbi_decode, CONSTRAINT_LENGTH, GENERATORS_OCTAL};
pub use harq::{
    bits_to_bpsk, bpsk_llrs, chase_combine, crc16_append, crc16_check, run_harq_cc, HarqConfig, HarqLink, HarqOutcome,
};
pub use per::{
    binomial_normal_ci, measure_per, non_increasing_within_ci, LinkSimulator, PerPoint, SessionLink, StopRule,
    UncodedBpsk,
};
pub use session::{
    run_session, run_session_with_message, EncoderView, RoundDecoder, RoundEncoder, RoundRecord, SessionConfig,
    SessionTranscript,
};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelError;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    NonFinite(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Information bits of one packet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    bits: Vec<u8>,
}

impl Message {
    pub fn new(bits: Vec<u8>) -> Result<Self, CodecError> {
        if let Some(i) = bits.iter().position(|&b| b > 1) {
            return Err(CodecError::ProtocolViolation(format!("message bit {i} is {}", bits[i])));
        }
        Ok(Message { bits })
    }

    pub fn random<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Self {
        Message { bits: (0..k).map(|_| rng.random_range(0..2u8)).collect() }
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}
