//! Discrete-event schedule of one coding session.
//!
//! Synchronous mode: round `t` starts encoding once the feedback of round
//! `t-1` has arrived and transmits as soon as encoding ends.
//!
//! Asynchronous mode with lag `L`: forward transmissions are granted on a
//! fixed grid. Slot `s` ends at `delta + g + s*P` with grant gap
//! `g = max(min_forward, (delta + delta_tilde)/L - delta_tilde)` and period
//! `P = g + delta_tilde`, so each slot's transmission is followed by its
//! feedback. Round `t >= L` starts encoding when the feedback of round
//! `t-L` has arrived; rounds `t < L` start at time 0. A round that is not
//! ready when its slot opens leaves the slot empty (one `SlotSkipped`
//! event) and takes the first grid slot that opens after its encoding
//! finishes. Later rounds keep their order behind it.

use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::{PipelineError, TimingParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Sync,
    Async,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Sync => "sync",
            Mode::Async => "async",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    EncodeStart,
    EncodeEnd,
    TxStart,
    TxEnd,
    FbStart,
    FbEnd,
    SlotSkipped,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::EncodeStart => "EncodeStart",
            EventKind::EncodeEnd => "EncodeEnd",
            EventKind::TxStart => "TxStart",
            EventKind::TxEnd => "TxEnd",
            EventKind::FbStart => "FbStart",
            EventKind::FbEnd => "FbEnd",
            EventKind::SlotSkipped => "SlotSkipped",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelineEvent {
    pub round: usize,
    pub kind: EventKind,
    pub time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub events: Vec<TimelineEvent>,
    pub total_latency_ms: f64,
}

impl Timeline {
    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn first(&self, round: usize, kind: EventKind) -> Option<f64> {
        self.events.iter().find(|e| e.round == round && e.kind == kind).map(|e| e.time_ms)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "round,kind,time_ms")?;
        for e in &self.events {
            writeln!(w, "{},{},{}", e.round, e.kind.name(), e.time_ms)?;
        }
        Ok(())
    }
}

/// Extra encoding time per round, in milliseconds.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", deny_unknown_fields)]
pub enum Jitter {
    #[default]
    None,
    /// Entry `t` is added to round `t`; missing entries are zero.
    PerRound {
        extra_ms: Vec<f64>,
    },
    Uniform {
        max_ms: f64,
        seed: u64,
    },
    Exponential {
        mean_ms: f64,
        seed: u64,
    },
}

impl Jitter {
    fn draws(&self, rounds: usize) -> Result<Vec<f64>, PipelineError> {
        let v: Vec<f64> = match self {
            Jitter::None => vec![0.0; rounds],
            Jitter::PerRound { extra_ms } => (0..rounds).map(|t| extra_ms.get(t).copied().unwrap_or(0.0)).collect(),
            Jitter::Uniform { max_ms, seed } => {
                if !(max_ms.is_finite() && *max_ms >= 0.0) {
                    return Err(PipelineError::Config(format!("jitter max_ms {max_ms} must be >= 0")));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..rounds).map(|_| rng.random::<f64>() * max_ms).collect()
            }
            Jitter::Exponential { mean_ms, seed } => {
                let exp = Exp::new(1.0 / mean_ms)
                    .map_err(|e| PipelineError::Config(format!("jitter mean_ms {mean_ms}: {e}")))?;
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..rounds).map(|_| exp.sample(&mut rng)).collect()
            }
        };
        if let Some(bad) = v.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(PipelineError::Config(format!("jitter value {bad} must be finite and >= 0")));
        }
        Ok(v)
    }
}

/// Builds the event schedule. `lag` is ignored in synchronous mode.
pub fn simulate_timeline(p: &TimingParams, mode: Mode, lag: usize, jitter: &Jitter) -> Result<Timeline, PipelineError> {
    p.validate()?;
    let extra = jitter.draws(p.rounds)?;
    let mut ev = Vec::with_capacity(p.rounds * 6);
    let mut push = |round, kind, time_ms| ev.push(TimelineEvent { round, kind, time_ms });
    let t_total = p.rounds;
    let total = match mode {
        Mode::Sync => {
            let mut start = 0.0;
            let mut tx_end = 0.0;
            for t in 0..t_total {
                let enc_end = start + p.tau_enc_ms + extra[t];
                tx_end = enc_end + p.tau_tx_ms;
                push(t, EventKind::EncodeStart, start);
                push(t, EventKind::EncodeEnd, enc_end);
                push(t, EventKind::TxStart, enc_end);
                push(t, EventKind::TxEnd, tx_end);
                if t + 1 < t_total {
                    start = tx_end + p.tau_fb_ms;
                    push(t, EventKind::FbStart, tx_end);
                    push(t, EventKind::FbEnd, start);
                }
            }
            tx_end
        }
        Mode::Async => {
            if lag == 0 {
                return Err(PipelineError::Config("lag must be >= 1".into()));
            }
            let (d, f) = (p.delta(), p.delta_tilde());
            let gap = ((d + f) / lag as f64 - f).max(p.min_forward_ms);
            let period = gap + f;
            if period <= 0.0 {
                return Err(PipelineError::Config("slot period is zero; set min_forward_ms > 0".into()));
            }
            let slot_end = |s: usize| d + gap + s as f64 * period;
            let slot_start = |s: usize| slot_end(s) - p.tau_tx_ms;
            let mut fb_end = vec![0.0; t_total];
            let mut next_slot = 0usize;
            let mut tx_end = 0.0;
            for t in 0..t_total {
                let start = if t < lag { 0.0 } else { fb_end[t - lag] };
                let ready = start + p.tau_enc_ms + extra[t];
                push(t, EventKind::EncodeStart, start);
                push(t, EventKind::EncodeEnd, ready);
                let mut s = next_slot;
                if slot_start(s) < ready {
                    push(t, EventKind::SlotSkipped, slot_start(s));
                    s += ((ready - slot_start(s)) / period).ceil() as usize;
                    while slot_start(s) < ready {
                        s += 1;
                    }
                }
                tx_end = slot_end(s);
                push(t, EventKind::TxStart, slot_start(s));
                push(t, EventKind::TxEnd, tx_end);
                fb_end[t] = tx_end + f;
                if t + lag < t_total {
                    push(t, EventKind::FbStart, tx_end);
                    push(t, EventKind::FbEnd, fb_end[t]);
                }
                next_slot = s + 1;
            }
            tx_end
        }
    };
    ev.sort_by(|a, b| a.time_ms.total_cmp(&b.time_ms));
    Ok(Timeline { events: ev, total_latency_ms: total })
}
