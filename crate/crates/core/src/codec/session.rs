//! Round-based interactive coding sessions.
//!
//! In round `t` the encoder is handed feedback for rounds `0..=t-L` only,
//! where `L` is the feedback lag (`L = 1` is synchronous coding). The
//! restriction is structural: [`EncoderView::feedback`] is a slice that
//! ends at round `t - L`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{CodecError, Message};
use crate::channel::{apply_channel, ChannelParams, Direction, SnrDb, SnrTraceConfig};

/// What the encoder may look at when producing round `round`.
#[derive(Debug, Clone, Copy)]
pub struct EncoderView<'a> {
    pub round: usize,
    pub lag: usize,
    pub message: &'a Message,
    /// Codewords already sent, `c^(0..round)`.
    pub sent: &'a [Vec<f64>],
    /// Received feedback `~y^(0..=round-lag)`; empty when `round < lag`.
    pub feedback: &'a [Vec<f64>],
    /// Uplink SNR for rounds `0..=round`.
    pub snr: &'a [SnrDb],
}

impl EncoderView<'_> {
    pub fn current_snr(&self) -> SnrDb {
        self.snr[self.round]
    }

    /// Index of the newest visible feedback round.
    pub fn feedback_horizon(&self) -> Option<usize> {
        self.feedback.len().checked_sub(1)
    }
}

pub trait RoundEncoder {
    fn encode_round(&self, view: &EncoderView<'_>) -> Result<Vec<f64>, CodecError>;
}

pub trait RoundDecoder {
    /// Feedback vector for the newest reception, `received.last()`.
    fn feedback(&self, received: &[Vec<f64>], snr: &[SnrDb]) -> Result<Vec<f64>, CodecError>;

    /// Final decision after all rounds.
    fn decode(&self, received: &[Vec<f64>], snr: &[SnrDb]) -> Result<Vec<u8>, CodecError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    /// Information bits per packet.
    pub k: usize,
    pub rounds: usize,
    pub symbols_per_round: usize,
    pub feedback_len: usize,
    /// Feedback lag in rounds, `>= 1`.
    pub lag: usize,
    pub uplink: SnrTraceConfig,
    pub feedback: SnrTraceConfig,
    pub noiseless_feedback: bool,
    /// Spacing of rounds on the SNR trace time axis.
    pub round_period_ms: f64,
}

impl SessionConfig {
    /// `K = 48`, `T = 9`, `M = F = 16`, asynchronous lag 2, fixed 0 dB
    /// uplink and noiseless feedback.
    pub fn afc_default() -> Self {
        SessionConfig {
            k: 48,
            rounds: 9,
            symbols_per_round: 16,
            feedback_len: 16,
            lag: 2,
            uplink: SnrTraceConfig::fixed(SnrDb::db(0.0)),
            feedback: SnrTraceConfig::fixed(SnrDb::db(20.0)),
            noiseless_feedback: true,
            round_period_ms: 7.0,
        }
    }

    pub fn blocklength(&self) -> usize {
        self.rounds * self.symbols_per_round
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        let bad = |m: String| Err(CodecError::Config(m));
        if self.rounds == 0 {
            return bad("rounds must be >= 1".into());
        }
        if self.symbols_per_round == 0 {
            return bad("symbols_per_round must be >= 1".into());
        }
        if self.lag == 0 {
            return bad("lag must be >= 1".into());
        }
        if !(self.round_period_ms.is_finite() && self.round_period_ms > 0.0) {
            return bad("round_period_ms must be > 0".into());
        }
        self.uplink.validate()?;
        self.feedback.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub codeword: Vec<f64>,
    pub received: Vec<f64>,
    /// Feedback generated for this round; absent when no later round can
    /// consume it.
    pub feedback: Option<Vec<f64>>,
    pub feedback_received: Option<Vec<f64>>,
    pub snr_db: f64,
    /// Newest feedback round visible to the encoder in this round.
    pub feedback_horizon: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTranscript {
    pub message: Vec<u8>,
    pub rounds: Vec<RoundRecord>,
    pub decoded: Vec<u8>,
    pub success: bool,
}

impl SessionTranscript {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcript serializes")
    }
}

pub fn run_session<E, D, R>(
    encoder: &E,
    decoder: &D,
    config: &SessionConfig,
    rng: &mut R,
) -> Result<SessionTranscript, CodecError>
where
    E: RoundEncoder + ?Sized,
    D: RoundDecoder + ?Sized,
    R: Rng + ?Sized,
{
    let message = Message::random(config.k, rng);
    run_session_with_message(encoder, decoder, config, &message, rng)
}

pub fn run_session_with_message<E, D, R>(
    encoder: &E,
    decoder: &D,
    config: &SessionConfig,
    message: &Message,
    rng: &mut R,
) -> Result<SessionTranscript, CodecError>
where
    E: RoundEncoder + ?Sized,
    D: RoundDecoder + ?Sized,
    R: Rng + ?Sized,
{
    config.validate()?;
    if message.len() != config.k {
        return Err(CodecError::ProtocolViolation(format!(
            "message has {} bits, session expects {}",
            message.len(),
            config.k
        )));
    }
    let t_total = config.rounds;
    let duration = t_total as f64 * config.round_period_ms;

    let mut up_cfg = config.uplink.clone();
    up_cfg.seed ^= rng.random::<u64>();
    let mut fb_cfg = config.feedback.clone();
    fb_cfg.seed ^= rng.random::<u64>();
    let up_trace = up_cfg.sample(duration)?;
    let fb_trace = fb_cfg.sample(duration)?;
    let snr: Vec<SnrDb> = (0..t_total).map(|t| up_trace.at(t as f64 * config.round_period_ms)).collect();

    let mut sent: Vec<Vec<f64>> = Vec::with_capacity(t_total);
    let mut received: Vec<Vec<f64>> = Vec::with_capacity(t_total);
    let mut fb_received: Vec<Vec<f64>> = Vec::new();
    let mut records = Vec::with_capacity(t_total);

    for t in 0..t_total {
        let visible = (t + 1).saturating_sub(config.lag).min(fb_received.len());
        let view = EncoderView {
            round: t,
            lag: config.lag,
            message,
            sent: &sent,
            feedback: &fb_received[..visible],
            snr: &snr[..=t],
        };
        let horizon = view.feedback_horizon();
        let c = encoder.encode_round(&view)?;
        if c.len() != config.symbols_per_round {
            return Err(CodecError::ProtocolViolation(format!(
                "round {t} codeword has {} symbols, expected {}",
                c.len(),
                config.symbols_per_round
            )));
        }
        let y = apply_channel(&c, &ChannelParams::awgn(snr[t], Direction::Uplink), rng)?;
        sent.push(c.clone());
        received.push(y.clone());

        let (fb, fb_rx) = if t + config.lag < t_total {
            let fb = decoder.feedback(&received, &snr[..=t])?;
            if fb.len() != config.feedback_len {
                return Err(CodecError::ProtocolViolation(format!(
                    "round {t} feedback has {} symbols, expected {}",
                    fb.len(),
                    config.feedback_len
                )));
            }
            let params = if config.noiseless_feedback {
                ChannelParams::noiseless(Direction::Feedback)
            } else {
                ChannelParams::awgn(fb_trace.at(t as f64 * config.round_period_ms), Direction::Feedback)
            };
            let rx = apply_channel(&fb, &params, rng)?;
            fb_received.push(rx.clone());
            (Some(fb), Some(rx))
        } else {
            (None, None)
        };

        records.push(RoundRecord {
            round: t,
            codeword: c,
            received: y,
            feedback: fb,
            feedback_received: fb_rx,
            snr_db: snr[t].value(),
            feedback_horizon: horizon,
        });
    }

    let decoded = decoder.decode(&received, &snr)?;
    if decoded.len() != config.k {
        return Err(CodecError::ProtocolViolation(format!(
            "decoder returned {} bits, expected {}",
            decoded.len(),
            config.k
        )));
    }
    let success = decoded == message.bits();
    Ok(SessionTranscript { message: message.bits().to_vec(), rounds: records, decoded, success })
}
