//! Monte-Carlo packet error rate measurement with early stopping.
//!
//! Trials run in fixed-size waves. Each trial draws from its own RNG
//! stream derived from `(seed, grid index, trial index)`, and the stop
//! rule is applied by scanning the wave in trial order, so sequential and
//! parallel execution give identical counts.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    bits_to_bpsk, run_harq_cc, run_session, CodecError, HarqLink, Message, RoundDecoder, RoundEncoder, SessionConfig,
};
use crate::channel::{apply_channel, ChannelParams, Direction, Noise, SnrDb, SnrTraceConfig};
use crate::exec::{stream_rng, Execution};

const WAVE: u64 = 256;
const Z95: f64 = 1.959_963_984_540_054;

/// A packet-level link: one call simulates one packet end to end.
pub trait LinkSimulator: Sync {
    /// Returns `true` when the packet was delivered correctly.
    fn packet(&self, noise: Noise, rng: &mut ChaCha8Rng) -> Result<bool, CodecError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StopRule {
    pub max_trials: u64,
    pub target_errors: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule { max_trials: 1_000_000, target_errors: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerPoint {
    pub snr_db: f64,
    pub per: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: u64,
    pub errors: u64,
}

impl PerPoint {
    pub fn csv_header() -> &'static str {
        "snr_db,per,ci_low,ci_high,trials,errors"
    }
}

/// True when no point's PER is provably above an earlier point's, i.e.
/// every interval starts no higher than the previous interval ends.
pub fn non_increasing_within_ci(points: &[PerPoint]) -> bool {
    points.windows(2).all(|w| w[1].ci_low <= w[0].ci_high)
}

/// 95% normal-approximation interval, clipped to `[0, 1]`.
pub fn binomial_normal_ci(errors: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let p = errors as f64 / trials as f64;
    let half = Z95 * (p * (1.0 - p) / trials as f64).sqrt();
    ((p - half).max(0.0), (p + half).min(1.0))
}

pub fn measure_per<L: LinkSimulator + ?Sized>(
    link: &L,
    snr_grid: &[SnrDb],
    stop: StopRule,
    seed: u64,
    exec: Execution,
) -> Result<Vec<PerPoint>, CodecError> {
    if snr_grid.is_empty() {
        return Err(CodecError::Config("SNR grid is empty".into()));
    }
    if stop.max_trials < 100 {
        return Err(CodecError::Config(format!("max_trials {} must be >= 100", stop.max_trials)));
    }
    if stop.target_errors == 0 {
        return Err(CodecError::Config("target_errors must be >= 1".into()));
    }
    snr_grid
        .iter()
        .enumerate()
        .map(|(gi, &snr)| {
            let mut trials = 0u64;
            let mut errors = 0u64;
            'waves: while trials < stop.max_trials && errors < stop.target_errors {
                let start = trials;
                let n = WAVE.min(stop.max_trials - start);
                let outcomes = exec.map(n as usize, |i| {
                    let mut rng = stream_rng(seed, &[gi as u64, start + i as u64]);
                    link.packet(Noise::Awgn(snr), &mut rng)
                });
                for ok in outcomes {
                    trials += 1;
                    if !ok? {
                        errors += 1;
                        if errors >= stop.target_errors {
                            break 'waves;
                        }
                    }
                }
            }
            let (ci_low, ci_high) = binomial_normal_ci(errors, trials);
            Ok(PerPoint { snr_db: snr.value(), per: errors as f64 / trials as f64, ci_low, ci_high, trials, errors })
        })
        .collect()
}

/// Uncoded BPSK with hard decisions, one symbol per bit.
#[derive(Debug, Clone, Copy)]
pub struct UncodedBpsk {
    pub k: usize,
}

impl LinkSimulator for UncodedBpsk {
    fn packet(&self, noise: Noise, rng: &mut ChaCha8Rng) -> Result<bool, CodecError> {
        let msg = Message::random(self.k, rng);
        let params = ChannelParams { gain: Default::default(), noise, direction: Direction::Uplink };
        let y = apply_channel(&bits_to_bpsk(msg.bits()), &params, rng)?;
        Ok(y.iter().zip(msg.bits()).all(|(y, &b)| (*y < 0.0) == (b == 1)))
    }
}

impl LinkSimulator for HarqLink {
    fn packet(&self, noise: Noise, rng: &mut ChaCha8Rng) -> Result<bool, CodecError> {
        Ok(run_harq_cc(&self.0, noise, rng)?.success)
    }
}

/// Runs full interactive sessions with the uplink pinned to the grid SNR.
pub struct SessionLink<'a, E: ?Sized, D: ?Sized> {
    pub encoder: &'a E,
    pub decoder: &'a D,
    pub config: SessionConfig,
}

impl<E, D> LinkSimulator for SessionLink<'_, E, D>
where
    E: RoundEncoder + Sync + ?Sized,
    D: RoundDecoder + Sync + ?Sized,
{
    fn packet(&self, noise: Noise, rng: &mut ChaCha8Rng) -> Result<bool, CodecError> {
        let mut cfg = self.config.clone();
        match noise {
            Noise::Awgn(snr) => cfg.uplink = SnrTraceConfig::fixed(snr),
            Noise::Noiseless => return Err(CodecError::Config("session links need a finite uplink SNR".into())),
        }
        Ok(run_session(self.encoder, self.decoder, &cfg, rng)?.success)
    }
}
