use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ChannelError, SnrDb};

/// Sampling step used for `Fixed` traces.
pub const FIXED_TRACE_STEP_MS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", deny_unknown_fields)]
pub enum TraceKind {
    Fixed {
        level: SnrDb,
    },
    /// Exactly discretized Ornstein-Uhlenbeck process in dB.
    MeanReverting {
        mean: SnrDb,
        /// Reversion rate in 1/ms.
        reversion_rate: f64,
        /// Diffusion coefficient in dB/sqrt(ms).
        volatility: f64,
        step_ms: f64,
        /// Starting level; the mean when absent.
        #[serde(default)]
        initial: Option<SnrDb>,
    },
    /// Step-hold breakpoints `(time_ms, level)`.
    Piecewise {
        points: Vec<(f64, SnrDb)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnrTraceConfig {
    pub kind: TraceKind,
    #[serde(default)]
    pub seed: u64,
}

impl SnrTraceConfig {
    pub fn fixed(level: SnrDb) -> Self {
        SnrTraceConfig { kind: TraceKind::Fixed { level }, seed: 0 }
    }

    /// Mean-reverting trace whose 100 ms max-min spread has a median of
    /// about 2 dB and whose stationary spread is a few dB, matching an
    /// indoor measurement campaign.
    pub fn indoor(mean: SnrDb, seed: u64) -> Self {
        SnrTraceConfig {
            kind: TraceKind::MeanReverting {
                mean,
                reversion_rate: 1.0e-3,
                volatility: 0.136,
                step_ms: 1.0,
                initial: None,
            },
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        match &self.kind {
            TraceKind::Fixed { .. } => Ok(()),
            TraceKind::MeanReverting { reversion_rate, volatility, step_ms, .. } => {
                if !(reversion_rate.is_finite() && *reversion_rate >= 0.0) {
                    return Err(ChannelError::Config(format!("reversion_rate {reversion_rate} must be >= 0")));
                }
                if !(volatility.is_finite() && *volatility >= 0.0) {
                    return Err(ChannelError::Config(format!("volatility {volatility} must be >= 0")));
                }
                if !(step_ms.is_finite() && *step_ms > 0.0) {
                    return Err(ChannelError::Config(format!("step_ms {step_ms} must be > 0")));
                }
                Ok(())
            }
            TraceKind::Piecewise { points } => {
                if points.is_empty() {
                    return Err(ChannelError::Config("piecewise trace needs at least one point".into()));
                }
                if points.iter().any(|(t, _)| !t.is_finite()) {
                    return Err(ChannelError::Config("piecewise times must be finite".into()));
                }
                if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(ChannelError::Config("piecewise times must be strictly increasing".into()));
                }
                Ok(())
            }
        }
    }

    /// Samples the trace over `[0, duration_ms)`.
    pub fn sample(&self, duration_ms: f64) -> Result<SnrTrace, ChannelError> {
        sample_snr_trace(self, duration_ms)
    }
}

/// A sampled SNR trace, read with step-hold semantics.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrTrace {
    pub points: Vec<(f64, SnrDb)>,
}

pub fn sample_snr_trace(config: &SnrTraceConfig, duration_ms: f64) -> Result<SnrTrace, ChannelError> {
    config.validate()?;
    if !(duration_ms.is_finite() && duration_ms > 0.0) {
        return Err(ChannelError::Config(format!("duration {duration_ms} must be > 0")));
    }
    let points = match &config.kind {
        TraceKind::Fixed { level } => {
            let n = (duration_ms / FIXED_TRACE_STEP_MS).ceil() as usize;
            (0..n).map(|i| (i as f64 * FIXED_TRACE_STEP_MS, *level)).collect()
        }
        TraceKind::MeanReverting { mean, reversion_rate, volatility, step_ms, initial } => {
            let n = (duration_ms / step_ms).ceil() as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let mu = mean.value();
            let (decay, noise_sd) = if *reversion_rate > 0.0 {
                let decay = (-reversion_rate * step_ms).exp();
                let var = volatility * volatility * (1.0 - decay * decay) / (2.0 * reversion_rate);
                (decay, var.sqrt())
            } else {
                (1.0, volatility * step_ms.sqrt())
            };
            let mut x = initial.map_or(mu, SnrDb::value);
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                out.push((i as f64 * step_ms, SnrDb::new(x)?));
                let z: f64 = StandardNormal.sample(&mut rng);
                x = mu + (x - mu) * decay + noise_sd * z;
            }
            out
        }
        TraceKind::Piecewise { points } => {
            let mut out: Vec<(f64, SnrDb)> = points.iter().copied().filter(|(t, _)| *t < duration_ms).collect();
            if out.is_empty() {
                out.push((0.0, points[0].1));
            }
            out
        }
    };
    Ok(SnrTrace { points })
}

impl SnrTrace {
    /// Level in force at `time_ms`. Times before the first point read the
    /// first level.
    pub fn at(&self, time_ms: f64) -> SnrDb {
        let idx = self.points.partition_point(|(t, _)| *t <= time_ms);
        self.points[idx.saturating_sub(1)].1
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time_ms,snr_db")?;
        for (t, s) in &self.points {
            writeln!(w, "{:.6},{:.6}", t, s.value())?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<SnrTrace, ChannelError> {
        let mut points = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| ChannelError::Csv { line: i + 1, msg: e.to_string() })?;
            if i == 0 {
                if line.trim() != "time_ms,snr_db" {
                    return Err(ChannelError::Csv { line: 1, msg: format!("unexpected header {line:?}") });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let bad = |msg: String| ChannelError::Csv { line: i + 1, msg };
            let (t, s) = line.split_once(',').ok_or_else(|| bad("expected two columns".into()))?;
            let t: f64 = t.trim().parse().map_err(|e| bad(format!("{e}")))?;
            let s: f64 = s.trim().parse().map_err(|e| bad(format!("{e}")))?;
            points.push((t, SnrDb::new(s)?));
        }
        if points.is_empty() {
            return Err(ChannelError::Csv { line: 1, msg: "no samples".into() });
        }
        Ok(SnrTrace { points })
    }
}
