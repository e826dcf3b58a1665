//! Latency of synchronous and asynchronous feedback coding.
//!
//! The closed forms give the total session latency from the forward
//! interval `delta` (encode + transmit), the feedback interval
//! `delta_tilde` and the number of rounds. The event simulator builds the
//! explicit schedule, optionally with inference jitter, and agrees with the
//! closed forms exactly when jitter is off.

mod sim;

pub use sim::{simulate_timeline, EventKind, Jitter, Mode, Timeline, TimelineEvent};

use serde::{Deserialize, Serialize};

use crate::exec::Execution;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PipelineError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid timing parameters: {0}")]
    Config(String),
}

/// Per-round timing constants in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingParams {
    pub tau_enc_ms: f64,
    pub tau_tx_ms: f64,
    pub tau_fb_ms: f64,
    pub rounds: usize,
    #[serde(default = "default_min_forward")]
    pub min_forward_ms: f64,
}

fn default_min_forward() -> f64 {
    1.0
}

impl TimingParams {
    /// Splits `delta` into encode and transmit time, giving transmission
    /// the minimum forward time (or all of `delta` if it is shorter).
    pub fn from_intervals(delta_ms: f64, delta_tilde_ms: f64, rounds: usize) -> Self {
        let min_forward_ms = default_min_forward();
        let tau_tx_ms = min_forward_ms.min(delta_ms);
        TimingParams { tau_enc_ms: delta_ms - tau_tx_ms, tau_tx_ms, tau_fb_ms: delta_tilde_ms, rounds, min_forward_ms }
    }

    pub fn delta(&self) -> f64 {
        self.tau_enc_ms + self.tau_tx_ms
    }

    pub fn delta_tilde(&self) -> f64 {
        self.tau_fb_ms
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        for (name, v) in [
            ("tau_enc_ms", self.tau_enc_ms),
            ("tau_tx_ms", self.tau_tx_ms),
            ("tau_fb_ms", self.tau_fb_ms),
            ("min_forward_ms", self.min_forward_ms),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(PipelineError::Config(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        if self.rounds == 0 {
            return Err(PipelineError::Config("rounds must be >= 1".into()));
        }
        Ok(())
    }
}

/// `T*delta + (T-1)*delta_tilde`.
pub fn sync_latency(p: &TimingParams) -> f64 {
    let t = p.rounds as f64;
    t * p.delta() + (t - 1.0) * p.delta_tilde()
}

/// Steady-state gap between consecutive feedback transmissions:
/// `max((delta - delta_tilde)/2, min_forward)`.
pub fn async_delta_prime(p: &TimingParams) -> f64 {
    ((p.delta() - p.delta_tilde()) / 2.0).max(p.min_forward_ms)
}

/// `delta + (T-1)*delta_tilde + T*delta_prime`. Only defined for `T >= 2`;
/// a single round has no pipeline to fill.
pub fn async_latency(p: &TimingParams) -> Result<f64, PipelineError> {
    if p.rounds < 2 {
        return Err(PipelineError::Domain(format!("asynchronous latency needs at least 2 rounds, got {}", p.rounds)));
    }
    let t = p.rounds as f64;
    Ok(p.delta() + (t - 1.0) * p.delta_tilde() + t * async_delta_prime(p))
}

/// Fractional latency saving of the asynchronous pipeline.
pub fn latency_reduction(p: &TimingParams) -> Result<f64, PipelineError> {
    let s = sync_latency(p);
    Ok((s - async_latency(p)?) / s)
}

/// Share of the synchronous latency spent in forward intervals.
pub fn forward_share(p: &TimingParams) -> f64 {
    p.rounds as f64 * p.delta() / sync_latency(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub delta_ms: f64,
    pub delta_tilde_ms: f64,
    pub mode: Mode,
    /// Gap between feedback transmissions; equals `delta` for the
    /// synchronous pipeline.
    pub delta_prime_ms: f64,
    pub total_ms: f64,
}

impl SweepRecord {
    pub fn csv_header() -> &'static str {
        "delta_ms,delta_tilde_ms,mode,delta_prime_ms,total_ms"
    }
}

/// Closed-form latencies for every `(delta, delta_tilde)` pair, sync row
/// first. Output order follows the input order.
pub fn latency_sweep(
    deltas: &[f64],
    delta_tildes: &[f64],
    rounds: usize,
    exec: Execution,
) -> Result<Vec<SweepRecord>, PipelineError> {
    let pairs: Vec<(f64, f64)> = deltas.iter().flat_map(|&d| delta_tildes.iter().map(move |&f| (d, f))).collect();
    let rows = exec.map(pairs.len(), |i| {
        let (d, f) = pairs[i];
        let p = TimingParams::from_intervals(d, f, rounds);
        p.validate()?;
        Ok::<_, PipelineError>([
            SweepRecord {
                delta_ms: d,
                delta_tilde_ms: f,
                mode: Mode::Sync,
                delta_prime_ms: p.delta(),
                total_ms: sync_latency(&p),
            },
            SweepRecord {
                delta_ms: d,
                delta_tilde_ms: f,
                mode: Mode::Async,
                delta_prime_ms: async_delta_prime(&p),
                total_ms: async_latency(&p)?,
            },
        ])
    });
    let mut out = Vec::with_capacity(rows.len() * 2);
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(d: f64, f: f64, t: usize) -> TimingParams {
        TimingParams::from_intervals(d, f, t)
    }

    #[test]
    fn prototype_operating_point() {
        let x = p(10.0, 4.0, 9);
        assert_eq!(sync_latency(&x), 122.0);
        assert_eq!(async_delta_prime(&x), 3.0);
        assert_eq!(async_latency(&x).unwrap(), 69.0);
        assert!((latency_reduction(&x).unwrap() - 53.0 / 122.0).abs() < 1e-15);
        assert!((forward_share(&x) - 90.0 / 122.0).abs() < 1e-15);
    }

    #[test]
    fn long_feedback_interval() {
        let x = p(10.0, 8.0, 9);
        assert_eq!(async_delta_prime(&x), 1.0);
        assert_eq!(sync_latency(&x), 154.0);
        assert_eq!(async_latency(&x).unwrap(), 83.0);
        let r = latency_reduction(&x).unwrap();
        assert!((r - 0.461).abs() < 5e-4, "{r}");
    }

    #[test]
    fn degenerate_sync_cases() {
        assert_eq!(sync_latency(&p(7.0, 0.0, 5)), 35.0);
        assert_eq!(sync_latency(&p(7.0, 3.0, 1)), 7.0);
    }

    #[test]
    fn single_round_async_is_a_domain_error() {
        assert!(matches!(async_latency(&p(10.0, 4.0, 1)), Err(PipelineError::Domain(_))));
    }

    #[test]
    fn floor_active_when_forward_is_short() {
        for f in 0..16 {
            for d in 1..=(f + 2) {
                assert_eq!(async_delta_prime(&p(d as f64, f as f64, 9)), 1.0);
            }
        }
    }

    #[test]
    fn large_feedback_interval_grows_with_slope_t_minus_one() {
        let base = async_latency(&p(10.0, 20.0, 9)).unwrap();
        for k in 1..10 {
            let f = 20.0 + k as f64;
            assert_eq!(async_latency(&p(10.0, f, 9)).unwrap() - base, 8.0 * k as f64);
        }
    }

    #[test]
    fn monotone_and_dominated_above_one_ms() {
        for t in 2..=12usize {
            for d in 1..=30 {
                for f in 0..=15 {
                    let x = p(d as f64, f as f64, t);
                    let (s, a) = (sync_latency(&x), async_latency(&x).unwrap());
                    if d == 1 {
                        // delta' is floored at delta itself, and the pipeline
                        // start-up round costs one extra millisecond.
                        assert_eq!(a, s + 1.0, "{d} {f} {t}");
                    } else {
                        assert!(a <= s, "{d} {f} {t}");
                    }
                    for y in
                        [p(d as f64 + 1.0, f as f64, t), p(d as f64, f as f64 + 1.0, t), p(d as f64, f as f64, t + 1)]
                    {
                        assert!(sync_latency(&y) >= s);
                        assert!(async_latency(&y).unwrap() >= a);
                    }
                }
            }
        }
    }

    #[test]
    fn sweep_rows_pair_sync_and_async() {
        let rows = latency_sweep(&[10.0], &[4.0, 8.0], 9, Execution::Sequential).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!((rows[0].mode, rows[0].delta_prime_ms, rows[0].total_ms), (Mode::Sync, 10.0, 122.0));
        assert_eq!((rows[1].mode, rows[1].delta_prime_ms, rows[1].total_ms), (Mode::Async, 3.0, 69.0));
        assert_eq!(rows[3].total_ms, 83.0);
        let par = latency_sweep(&[10.0], &[4.0, 8.0], 9, Execution::Parallel).unwrap();
        assert_eq!(rows, par);
    }
}
