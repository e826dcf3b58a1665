//! End-to-end training of the feedback code.

mod curriculum;

pub use curriculum::{ks_p_value, ks_statistic, sample_train_snr, AlphaSchedule, CurriculumConfig, GaussianDb};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{Noise, SnrDb};
use crate::codec::{measure_per, CodecError, PerPoint, StopRule};
use crate::exec::{stream_rng, Execution};
use crate::neural::tensor::Mat;
use crate::neural::{AfcLink, AfcModel, NeuralError, RolloutBatch};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("non-finite value at step {step}: {detail}")]
    NonFinite { step: u64, detail: String },
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adaptive-moment gradient descent with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    lr: f64,
    m: Vec<Mat>,
    v: Vec<Mat>,
    t: i32,
}

impl Adam {
    pub fn new(shapes: &[Mat], lr: f64, cfg: AdamConfig) -> Self {
        let z: Vec<Mat> = shapes.iter().map(|m| Mat::zeros(m.rows, m.cols)).collect();
        Adam { cfg, lr, m: z.clone(), v: z, t: 0 }
    }

    pub fn step(&mut self, params: &mut [Mat], grads: &[Mat]) {
        self.t += 1;
        let (b1, b2) = (self.cfg.beta1, self.cfg.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = b1 * m.data[i] + (1.0 - b1) * gi;
                v.data[i] = b2 * v.data[i] + (1.0 - b2) * gi * gi;
                let mh = m.data[i] / c1;
                let vh = v.data[i] / c2;
                p.data[i] -= self.lr * mh / (vh.sqrt() + self.cfg.eps);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    #[serde(default)]
    pub adam: AdamConfig,
    pub seed: u64,
    /// Uplink SNRs used by [`evaluate_robustness`] after training.
    pub eval_snr_grid: Vec<f64>,
    /// Bypasses the curriculum: every sample uses this SNR.
    #[serde(default)]
    pub fixed_snr_db: Option<f64>,
    /// Trains without uplink noise.
    #[serde(default)]
    pub noiseless_uplink: bool,
    /// Feedback channel SNR; noiseless when absent.
    #[serde(default)]
    pub feedback_snr_db: Option<f64>,
    /// The batch is split into this many independently simulated chunks
    /// whose gradients are summed in chunk order.
    pub chunks: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            learning_rate: 1e-3,
            adam: AdamConfig::default(),
            seed: 0,
            eval_snr_grid: vec![0.0, 2.0, 4.0, 6.0, 8.0],
            fixed_snr_db: None,
            noiseless_uplink: false,
            feedback_snr_db: None,
            chunks: 8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.into()));
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be > 0");
        }
        if self.chunks == 0 || self.chunks > self.batch_size {
            return bad("chunks must be in 1..=batch_size");
        }
        let a = self.adam;
        if !((0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.eps > 0.0) {
            return bad("adam needs beta1, beta2 in [0, 1) and eps > 0");
        }
        if self.fixed_snr_db.is_some_and(|s| !s.is_finite()) || self.feedback_snr_db.is_some_and(|s| !s.is_finite()) {
            return bad("SNR settings must be finite");
        }
        Ok(())
    }

    pub fn feedback_noise(&self) -> Noise {
        match self.feedback_snr_db {
            Some(s) => Noise::Awgn(SnrDb::db(s)),
            None => Noise::Noiseless,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: u64,
    pub loss: f64,
    pub alpha: f64,
    pub mean_snr_db: f64,
}

impl LossRecord {
    pub fn csv_header() -> &'static str {
        "step,loss,alpha,mean_snr_db"
    }
}

/// Training SNRs for every session of step `k`.
pub fn step_snrs(k: u64, curriculum: &CurriculumConfig, cfg: &TrainConfig) -> Vec<f64> {
    let mut rng = stream_rng(cfg.seed, &[k, u64::MAX]);
    (0..cfg.batch_size)
        .map(|_| match cfg.fixed_snr_db {
            Some(s) => s,
            None => sample_train_snr(k, curriculum, &mut rng).value(),
        })
        .collect()
}

/// Builds the batch of chunk `c` for step `k`.
fn chunk_batch(model: &AfcModel, cfg: &TrainConfig, k: u64, c: usize, snrs: &[f64]) -> RolloutBatch {
    let mc = &model.config;
    let lo = c * cfg.batch_size / cfg.chunks;
    let hi = (c + 1) * cfg.batch_size / cfg.chunks;
    let mut rng = stream_rng(cfg.seed, &[k, c as u64]);
    let bits = (lo..hi).map(|_| (0..mc.k()).map(|_| rng.random_range(0..2u8)).collect()).collect();
    let snr = snrs[lo..hi].iter().map(|&s| vec![s; mc.rounds]).collect();
    RolloutBatch::sample(mc, bits, snr, cfg.noiseless_uplink, cfg.feedback_noise(), &mut rng)
}

/// One loss and gradient evaluation over the whole batch.
pub fn batch_gradient(
    model: &AfcModel,
    cfg: &TrainConfig,
    k: u64,
    snrs: &[f64],
    exec: Execution,
) -> Result<(f64, Vec<Mat>), NeuralError> {
    let parts = exec.map(cfg.chunks, |c| {
        let b = chunk_batch(model, cfg, k, c, snrs);
        let w = b.sessions() as f64 / cfg.batch_size as f64;
        model.forward_backward(&b).map(|fb| (w, fb))
    });
    let mut loss = 0.0;
    let mut grads: Vec<Mat> = model.params.values.iter().map(|m| Mat::zeros(m.rows, m.cols)).collect();
    for part in parts {
        let (w, fb) = part?;
        loss += w * fb.loss;
        for (g, d) in grads.iter_mut().zip(&fb.grads) {
            for (a, b) in g.data.iter_mut().zip(&d.data) {
                *a += w * b;
            }
        }
    }
    Ok((loss, grads))
}

/// Trains `model` in place for `curriculum.total_steps` steps and returns
/// the per-step loss history.
pub fn train(
    model: &mut AfcModel,
    curriculum: &CurriculumConfig,
    cfg: &TrainConfig,
    exec: Execution,
) -> Result<Vec<LossRecord>, TrainError> {
    curriculum.validate()?;
    cfg.validate()?;
    let mut opt = Adam::new(&model.params.values, cfg.learning_rate, cfg.adam);
    let mut history = Vec::with_capacity(curriculum.total_steps as usize);
    for k in 0..curriculum.total_steps {
        let snrs = step_snrs(k, curriculum, cfg);
        let (loss, grads) = batch_gradient(model, cfg, k, &snrs, exec).map_err(|e| match e {
            NeuralError::NonFinite(detail) => TrainError::NonFinite { step: k, detail },
            other => TrainError::Neural(other),
        })?;
        opt.step(&mut model.params.values, &grads);
        if let Some(i) = model.params.values.iter().position(|m| !m.is_finite()) {
            return Err(TrainError::NonFinite {
                step: k,
                detail: format!("weights of {} diverged after the update", model.params.names[i]),
            });
        }
        history.push(LossRecord {
            step: k,
            loss,
            alpha: if cfg.fixed_snr_db.is_some() { 0.0 } else { curriculum.alpha(k) },
            mean_snr_db: snrs.iter().sum::<f64>() / snrs.len() as f64,
        });
    }
    Ok(history)
}

/// Packet error rate of `model` over an SNR grid, through the codec
/// module's Monte-Carlo driver.
pub fn evaluate_robustness(
    model: &AfcModel,
    snr_grid: &[f64],
    feedback: Noise,
    stop: StopRule,
    seed: u64,
    exec: Execution,
) -> Result<Vec<PerPoint>, TrainError> {
    let grid = snr_grid
        .iter()
        .map(|&s| SnrDb::new(s).map_err(|e| TrainError::Config(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(measure_per(&AfcLink { model, feedback }, &grid, stop, seed, exec)?)
}

/// PER curves of a curriculum-trained and a fixed-SNR-trained model that
/// share everything except the SNR sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessComparison {
    pub curriculum: Vec<PerPoint>,
    pub fixed: Vec<PerPoint>,
}

pub fn compare_robustness(
    model_config: &crate::neural::AfcConfig,
    curriculum: &CurriculumConfig,
    cfg: &TrainConfig,
    fixed_snr_db: f64,
    stop: StopRule,
    exec: Execution,
) -> Result<RobustnessComparison, TrainError> {
    let run = |fixed: Option<f64>| -> Result<Vec<PerPoint>, TrainError> {
        let mut model = AfcModel::new(model_config.clone())?;
        let c = TrainConfig { fixed_snr_db: fixed, ..cfg.clone() };
        train(&mut model, curriculum, &c, exec)?;
        evaluate_robustness(&model, &cfg.eval_snr_grid, cfg.feedback_noise(), stop, cfg.seed ^ 0x5eed, exec)
    };
    Ok(RobustnessComparison { curriculum: run(None)?, fixed: run(Some(fixed_snr_db))? })
}
