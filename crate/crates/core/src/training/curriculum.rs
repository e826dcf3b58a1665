//! SNR curriculum: training SNRs come from a mixture that shifts from a
//! benign anchor distribution to the target one, plus Gaussian jitter.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

use super::TrainError;
use crate::channel::SnrDb;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianDb {
    pub mean_db: f64,
    pub std_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", deny_unknown_fields)]
pub enum AlphaSchedule {
    /// 1 up to `k_start`, 0 from `k_end`, linear in between.
    Linear { k_start: u64, k_end: u64 },
    /// `exp(-rate * k)`.
    Exponential { rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurriculumConfig {
    pub p_orig: GaussianDb,
    pub p_targ: GaussianDb,
    pub alpha: AlphaSchedule,
    /// Standard deviation of the additive perturbation, dB.
    pub sigma_p: f64,
    pub total_steps: u64,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        CurriculumConfig::linear(2000)
    }
}

impl CurriculumConfig {
    /// `N(8, 1)` to `N(0, 1)` with linear decay over `total_steps` and
    /// 1 dB jitter.
    pub fn linear(total_steps: u64) -> Self {
        CurriculumConfig {
            p_orig: GaussianDb { mean_db: 8.0, std_db: 1.0 },
            p_targ: GaussianDb { mean_db: 0.0, std_db: 1.0 },
            alpha: AlphaSchedule::Linear { k_start: 0, k_end: total_steps },
            sigma_p: 1.0,
            total_steps,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        for (name, g) in [("p_orig", self.p_orig), ("p_targ", self.p_targ)] {
            if !(g.mean_db.is_finite() && g.std_db.is_finite() && g.std_db >= 0.0) {
                return bad(format!("{name} needs a finite mean and std >= 0"));
            }
        }
        if !(self.sigma_p.is_finite() && self.sigma_p >= 0.0) {
            return bad(format!("sigma_p {} must be >= 0", self.sigma_p));
        }
        match self.alpha {
            AlphaSchedule::Linear { k_start, k_end } if k_end < k_start => {
                bad(format!("alpha k_end {k_end} precedes k_start {k_start}"))
            }
            AlphaSchedule::Exponential { rate } if !(rate.is_finite() && rate >= 0.0) => {
                bad(format!("alpha rate {rate} must be >= 0"))
            }
            _ => Ok(()),
        }
    }

    /// Weight of the original anchor at step `k`.
    pub fn alpha(&self, k: u64) -> f64 {
        match self.alpha {
            AlphaSchedule::Linear { k_start, k_end } => {
                if k <= k_start {
                    1.0
                } else if k >= k_end {
                    0.0
                } else {
                    1.0 - (k - k_start) as f64 / (k_end - k_start) as f64
                }
            }
            AlphaSchedule::Exponential { rate } => (-rate * k as f64).exp(),
        }
    }

    /// CDF of the training SNR at mixing weight `alpha`.
    pub fn mixture_cdf(&self, alpha: f64, x: f64) -> f64 {
        let comp = |g: GaussianDb| {
            let s = (g.std_db * g.std_db + self.sigma_p * self.sigma_p).sqrt();
            if s == 0.0 {
                if x >= g.mean_db {
                    1.0
                } else {
                    0.0
                }
            } else {
                StatNormal::new(g.mean_db, s).expect("valid normal").cdf(x)
            }
        };
        alpha * comp(self.p_orig) + (1.0 - alpha) * comp(self.p_targ)
    }

    /// Mean and variance of the training SNR at mixing weight `alpha`.
    pub fn mixture_moments(&self, alpha: f64) -> (f64, f64) {
        let (a, b) = (self.p_orig, self.p_targ);
        let mean = alpha * a.mean_db + (1.0 - alpha) * b.mean_db;
        let second =
            alpha * (a.std_db.powi(2) + a.mean_db.powi(2)) + (1.0 - alpha) * (b.std_db.powi(2) + b.mean_db.powi(2));
        (mean, second - mean * mean + self.sigma_p.powi(2))
    }
}

fn draw<R: Rng + ?Sized>(g: GaussianDb, rng: &mut R) -> f64 {
    if g.std_db == 0.0 {
        // consume a draw either way so streams stay aligned
        let _: f64 = rng.sample(StandardNormal);
        g.mean_db
    } else {
        Normal::new(g.mean_db, g.std_db).expect("validated").sample(rng)
    }
}

/// `gamma_mix + N(0, sigma_p^2)`, with `gamma_mix` from the original
/// anchor with probability `alpha(k)` and from the target otherwise.
pub fn sample_train_snr<R: Rng + ?Sized>(k: u64, cfg: &CurriculumConfig, rng: &mut R) -> SnrDb {
    let u: f64 = rng.random();
    let mix = if u < cfg.alpha(k) { draw(cfg.p_orig, rng) } else { draw(cfg.p_targ, rng) };
    let z: f64 = rng.sample(StandardNormal);
    SnrDb::db(mix + cfg.sigma_p * z)
}

/// Kolmogorov-Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

/// Asymptotic p-value of a one-sample KS statistic `d` from `n` samples.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=200 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
