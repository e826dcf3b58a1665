//! HARQ with Chase combining over the convolutional mother code.

use crc::{Crc, CRC_16_IBM_3740};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{conv_encode, viterbi_decode, CodecError, Message};
use crate::channel::{apply_channel, ChannelParams, Direction, Gain, Noise};

const CRC16: Crc<u16> = Crc::<u16>::new(&CRC_16_IBM_3740);
const CRC_BITS: usize = 16;

/// Maps bit 0 to +1 and bit 1 to -1.
pub fn bits_to_bpsk(bits: &[u8]) -> Vec<f64> {
    bits.iter().map(|&b| if b == 0 { 1.0 } else { -1.0 }).collect()
}

/// Channel LLRs `2y/sigma^2`. A noiseless channel uses unit scaling.
pub fn bpsk_llrs(received: &[f64], noise: Noise) -> Vec<f64> {
    let var = match noise {
        Noise::Awgn(snr) => snr.noise_variance(),
        Noise::Noiseless => 1.0,
    };
    received.iter().map(|y| 2.0 * y / var).collect()
}

/// Element-wise sum of replica LLRs.
pub fn chase_combine(llr_sets: &[Vec<f64>]) -> Result<Vec<f64>, CodecError> {
    let first =
        llr_sets.first().ok_or_else(|| CodecError::Config("chase combining needs at least one replica".into()))?;
    let mut out = first.clone();
    for (j, set) in llr_sets.iter().enumerate().skip(1) {
        if set.len() != out.len() {
            return Err(CodecError::ProtocolViolation(format!(
                "replica {j} has {} llrs, expected {}",
                set.len(),
                out.len()
            )));
        }
        out.iter_mut().zip(set).for_each(|(o, l)| *o += l);
    }
    Ok(out)
}

fn pack_bits(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8).map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | (b << (7 - i)))).collect()
}

pub fn crc16_append(bits: &[u8]) -> Vec<u8> {
    let crc = CRC16.checksum(&pack_bits(bits));
    let mut out = bits.to_vec();
    out.extend((0..CRC_BITS).rev().map(|i| ((crc >> i) & 1) as u8));
    out
}

/// Checks a block produced by [`crc16_append`].
pub fn crc16_check(block: &[u8]) -> bool {
    if block.len() < CRC_BITS {
        return false;
    }
    let (data, tail) = block.split_at(block.len() - CRC_BITS);
    crc16_append(data)[data.len()..] == *tail
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarqConfig {
    pub k: usize,
    /// Attempt budget, `>= 1`. Every attempt resends the full mother
    /// codeword.
    pub max_attempts: usize,
    /// ACK from a CRC-16 check instead of comparison with the true bits.
    #[serde(default)]
    pub crc16: bool,
}

impl Default for HarqConfig {
    fn default() -> Self {
        HarqConfig { k: 47, max_attempts: 3, crc16: false }
    }
}

impl HarqConfig {
    pub fn codeword_len(&self) -> usize {
        super::coded_len(self.k + if self.crc16 { CRC_BITS } else { 0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarqOutcome {
    pub success: bool,
    pub attempts_used: usize,
}

pub fn run_harq_cc<R: Rng + ?Sized>(config: &HarqConfig, noise: Noise, rng: &mut R) -> Result<HarqOutcome, CodecError> {
    if config.max_attempts == 0 {
        return Err(CodecError::Config("max_attempts must be >= 1".into()));
    }
    let message = Message::random(config.k, rng);
    let info = if config.crc16 { crc16_append(message.bits()) } else { message.bits().to_vec() };
    let symbols = bits_to_bpsk(&conv_encode(&info)?);
    let params = ChannelParams { gain: Gain::Unit, noise, direction: Direction::Uplink };

    let mut combined = vec![0.0; symbols.len()];
    for attempt in 1..=config.max_attempts {
        let y = apply_channel(&symbols, &params, rng)?;
        combined = chase_combine(&[combined, bpsk_llrs(&y, noise)])?;
        let decoded = viterbi_decode(&combined, info.len())?;
        let correct = decoded[..config.k] == *message.bits();
        let ack = if config.crc16 { crc16_check(&decoded) } else { correct };
        if ack {
            return Ok(HarqOutcome { success: correct, attempts_used: attempt });
        }
    }
    Ok(HarqOutcome { success: false, attempts_used: config.max_attempts })
}

/// HARQ-CC as a Monte-Carlo link.
#[derive(Debug, Clone)]
pub struct HarqLink(pub HarqConfig);
