use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::graph::{Graph, Var};
use super::layers::{Bound, ParamStore, SnrMlp, Stack, StackShape};
use super::tensor::Mat;
use super::{AfcConfig, NeuralError};
use crate::channel::{Noise, SnrDb};
use crate::codec::{CodecError, EncoderView, LinkSimulator, RoundDecoder, RoundEncoder};

/// Everything the encoder may use in round `round`. Feedback entries newer
/// than `round - lag` may be present but are never read.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderState {
    pub round: usize,
    pub bits: Vec<u8>,
    /// `c^(0..round)`.
    pub sent: Vec<Vec<f64>>,
    /// `~y^(0..)`, one vector per round.
    pub feedback: Vec<Vec<f64>>,
    /// Uplink SNR of the current round.
    pub snr_db: f64,
}

/// Inputs for a batch of complete sessions, noise included.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBatch {
    /// One message of `K` bits per session.
    pub bits: Vec<Vec<u8>>,
    /// Uplink SNR per session and round.
    pub snr_db: Vec<Vec<f64>>,
    /// Per round, the scaled uplink noise for all sessions stacked
    /// (`B*N x 1`).
    pub uplink_noise: Vec<Mat>,
    /// Per round that produces feedback, scaled feedback noise
    /// (`B*N x fb_per_block`).
    pub feedback_noise: Vec<Mat>,
}

impl RolloutBatch {
    /// Draws noise round by round: uplink for every session, then feedback
    /// for every session when that round's feedback is consumed. For a
    /// single session this is the order the session engine uses.
    pub fn sample<R: Rng + ?Sized>(
        cfg: &AfcConfig,
        bits: Vec<Vec<u8>>,
        snr_db: Vec<Vec<f64>>,
        uplink_noiseless: bool,
        feedback: Noise,
        rng: &mut R,
    ) -> Self {
        let b = bits.len();
        let n = cfg.num_blocks;
        let f = cfg.fb_per_block;
        let mut uplink_noise = Vec::with_capacity(cfg.rounds);
        let mut feedback_noise = Vec::new();
        let fb_sigma = match feedback {
            Noise::Awgn(s) => s.noise_std(),
            Noise::Noiseless => 0.0,
        };
        for t in 0..cfg.rounds {
            let mut up = Mat::zeros(b * n, 1);
            for s in 0..b {
                let sigma = if uplink_noiseless { 0.0 } else { 10f64.powf(-snr_db[s][t] / 20.0) };
                for j in 0..n {
                    let z: f64 = rng.sample(StandardNormal);
                    up.data[s * n + j] = sigma * z;
                }
            }
            uplink_noise.push(up);
            if t + cfg.lag < cfg.rounds {
                let mut fb = Mat::zeros(b * n, f);
                for v in fb.data.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = fb_sigma * z;
                }
                feedback_noise.push(fb);
            }
        }
        RolloutBatch { bits, snr_db, uplink_noise, feedback_noise }
    }

    pub fn sessions(&self) -> usize {
        self.bits.len()
    }
}

/// Tape handles produced by a batched rollout.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub codewords: Vec<Var>,
    pub received: Vec<Var>,
    pub feedback: Vec<Var>,
    pub logits: Var,
    pub targets: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ForwardBackward {
    pub loss: f64,
    /// Index-aligned with the parameter store.
    pub grads: Vec<Mat>,
}

/// Class index of an `m`-bit block, most significant bit first.
pub fn bits_to_class(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

pub fn class_to_bits(class: usize, m: usize) -> Vec<u8> {
    (0..m).rev().map(|i| ((class >> i) & 1) as u8).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AfcModel {
    pub config: AfcConfig,
    pub params: ParamStore,
    snr: SnrMlp,
    encoder: Stack,
    feedback: Stack,
    decoder: Stack,
    encoder_params: usize,
}

impl AfcModel {
    pub fn new(config: AfcConfig) -> Result<Self, NeuralError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let mut s = ParamStore::default();
        let c = &config;
        let snr = SnrMlp::new(&mut s, &mut rng, "snr", c.snr_hidden, c.snr_emb_dim);
        let encoder = Stack::new(
            &mut s,
            &mut rng,
            "enc",
            &StackShape {
                input: c.enc_input_dim(),
                d_model: c.d_model,
                ff: c.ff_dim,
                layers: c.enc_layers,
                output: 1,
                tokens: c.num_blocks,
                positional: c.positional,
            },
        );
        let encoder_params = s.len();
        let feedback = Stack::new(
            &mut s,
            &mut rng,
            "fb",
            &StackShape {
                input: c.fb_input_dim(),
                d_model: c.dec_d_model,
                ff: c.dec_ff_dim,
                layers: c.fb_layers,
                output: c.fb_per_block,
                tokens: c.num_blocks,
                positional: c.positional,
            },
        );
        let decoder = Stack::new(
            &mut s,
            &mut rng,
            "dec",
            &StackShape {
                input: c.dec_input_dim(),
                d_model: c.dec_d_model,
                ff: c.dec_ff_dim,
                layers: c.dec_layers,
                output: c.classes(),
                tokens: c.num_blocks,
                positional: c.positional,
            },
        );
        Ok(AfcModel { config, params: s, snr, encoder, feedback, decoder, encoder_params })
    }

    /// Parameter arrays of the encoder side (SNR embedding and encoder
    /// stack), as indices into the store.
    pub fn encoder_param_ids(&self) -> std::ops::Range<usize> {
        0..self.encoder_params
    }

    pub fn param_count(&self) -> usize {
        self.params.scalar_count()
    }

    /// Sets every weight to zero.
    pub fn zero_weights(&mut self) {
        for m in &mut self.params.values {
            m.data.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn snr_embed(&self, snr: SnrDb) -> Vec<f64> {
        let mut g = Graph::new();
        let p = self.params.bind(&mut g);
        let e = self.snr.forward(&mut g, &p, &[snr.value()]);
        g.value(e).data.clone()
    }

    pub fn snr_mlp(&self) -> &SnrMlp {
        &self.snr
    }

    /// Input features the encoder reads in round `t`; `None` means all.
    pub fn encoder_active_inputs(&self, t: usize) -> Option<Vec<bool>> {
        let c = &self.config;
        let w = c.sparse_ff_window?;
        let mut a = vec![true; c.block_size];
        a.extend((0..c.rounds).map(|s| s < t));
        let hi = t.checked_sub(c.lag);
        for tau in 0..c.rounds {
            let on = hi.is_some_and(|hi| tau <= hi && tau + c.lag + w >= t);
            a.extend(std::iter::repeat_n(on, c.fb_per_block));
        }
        a.extend(std::iter::repeat_n(true, c.snr_emb_dim));
        Some(a)
    }

    fn bits_leaf(&self, g: &mut Graph, bits: &[Vec<u8>]) -> Var {
        let m = self.config.block_size;
        let mut out = Mat::zeros(bits.len() * self.config.num_blocks, m);
        for (s, msg) in bits.iter().enumerate() {
            for (i, &b) in msg.iter().enumerate() {
                out.data[s * self.config.k() + i] = 2.0 * b as f64 - 1.0;
            }
        }
        g.leaf(out)
    }

    /// Codeword of round `t` for a stack of sessions. `sent` holds the
    /// earlier codewords, `fb` the received feedback visible at `t`.
    #[allow(clippy::too_many_arguments)]
    fn encoder_round(
        &self,
        g: &mut Graph,
        p: &Bound,
        t: usize,
        bits: Var,
        sent: &[Var],
        fb: &[Var],
        emb: Var,
        zeros: (Var, Var),
    ) -> Var {
        let c = &self.config;
        let mut parts = vec![bits];
        parts.extend((0..c.rounds).map(|s| if s < t { sent[s] } else { zeros.0 }));
        parts.extend((0..c.rounds).map(|tau| fb.get(tau).copied().unwrap_or(zeros.1)));
        parts.push(emb);
        let x = g.concat_cols(&parts);
        let z = self.encoder.forward(g, p, x, c.num_blocks, self.encoder_active_inputs(t));
        g.group_power_norm(z, c.num_blocks)
    }

    fn feedback_round(&self, g: &mut Graph, p: &Bound, received: &[Var], emb: Var, zero: Var) -> Var {
        let c = &self.config;
        let mut parts: Vec<Var> = (0..c.rounds).map(|s| received.get(s).copied().unwrap_or(zero)).collect();
        parts.push(emb);
        let x = g.concat_cols(&parts);
        let z = self.feedback.forward(g, p, x, c.num_blocks, None);
        g.group_power_norm(z, c.num_blocks)
    }

    fn decoder_logits(&self, g: &mut Graph, p: &Bound, received: &[Var], embs: &[Var]) -> Var {
        let c = &self.config;
        let mut acc = embs[0];
        for &e in &embs[1..] {
            acc = g.add(acc, e);
        }
        let mean = g.scale(acc, 1.0 / embs.len() as f64);
        let mean = g.repeat_rows(mean, c.num_blocks);
        let mut parts = received.to_vec();
        parts.push(mean);
        let x = g.concat_cols(&parts);
        self.decoder.forward(g, p, x, c.num_blocks, None)
    }

    fn zeros(&self, g: &mut Graph, sessions: usize) -> (Var, Var) {
        let rows = sessions * self.config.num_blocks;
        (g.leaf(Mat::zeros(rows, 1)), g.leaf(Mat::zeros(rows, self.config.fb_per_block)))
    }

    fn check_batch(&self, b: &RolloutBatch) -> Result<(), NeuralError> {
        let c = &self.config;
        let n_fb = c.rounds.saturating_sub(c.lag);
        let rows = b.sessions() * c.num_blocks;
        let ok = b.sessions() > 0
            && b.bits.iter().all(|m| m.len() == c.k() && m.iter().all(|&x| x <= 1))
            && b.snr_db.len() == b.sessions()
            && b.snr_db.iter().all(|s| s.len() == c.rounds && s.iter().all(|v| v.is_finite()))
            && b.uplink_noise.len() == c.rounds
            && b.uplink_noise.iter().all(|m| m.shape() == (rows, 1))
            && b.feedback_noise.len() == n_fb
            && b.feedback_noise.iter().all(|m| m.shape() == (rows, c.fb_per_block));
        if ok {
            Ok(())
        } else {
            Err(NeuralError::Protocol("rollout batch does not match the model configuration".into()))
        }
    }

    /// Runs complete sessions for every element of the batch on the tape.
    pub fn rollout(&self, g: &mut Graph, p: &Bound, batch: &RolloutBatch) -> Result<Rollout, NeuralError> {
        self.check_batch(batch)?;
        let c = &self.config;
        let b = batch.sessions();
        let bits = self.bits_leaf(g, &batch.bits);
        let zeros = self.zeros(g, b);
        let embs: Vec<Var> = (0..c.rounds)
            .map(|t| {
                let col: Vec<f64> = batch.snr_db.iter().map(|s| s[t]).collect();
                self.snr.forward(g, p, &col)
            })
            .collect();
        let mut codewords = Vec::with_capacity(c.rounds);
        let mut received = Vec::with_capacity(c.rounds);
        let mut feedback = Vec::new();
        let mut fb_rx = Vec::new();
        for t in 0..c.rounds {
            let emb = g.repeat_rows(embs[t], c.num_blocks);
            let visible = (t + 1).saturating_sub(c.lag);
            let cw = self.encoder_round(g, p, t, bits, &codewords, &fb_rx[..visible], emb, zeros);
            let noise = g.leaf(batch.uplink_noise[t].clone());
            let y = g.add(cw, noise);
            codewords.push(cw);
            received.push(y);
            if t + c.lag < c.rounds {
                let f = self.feedback_round(g, p, &received, emb, zeros.0);
                let noise = g.leaf(batch.feedback_noise[t].clone());
                fb_rx.push(g.add(f, noise));
                feedback.push(f);
            }
        }
        let logits = self.decoder_logits(g, p, &received, &embs);
        let m = c.block_size;
        let targets = batch.bits.iter().flat_map(|msg| msg.chunks(m).map(bits_to_class)).collect();
        Ok(Rollout { codewords, received, feedback, logits, targets })
    }

    /// Mean per-block cross-entropy and its gradient for every weight.
    pub fn forward_backward(&self, batch: &RolloutBatch) -> Result<ForwardBackward, NeuralError> {
        let mut g = Graph::new();
        let p = self.params.bind(&mut g);
        let r = self.rollout(&mut g, &p, batch)?;
        let loss = g.cross_entropy(r.logits, r.targets);
        let value = g.value(loss).data[0];
        if !value.is_finite() {
            return Err(NeuralError::NonFinite(format!("loss evaluated to {value}")));
        }
        let gr = g.backward(loss);
        let grads =
            self.params.values.iter().zip(&p.0).map(|(m, &v)| gr.get_or_zeros(v, m.rows, m.cols)).collect::<Vec<_>>();
        if let Some(i) = grads.iter().position(|m| !m.is_finite()) {
            return Err(NeuralError::NonFinite(format!("gradient of {} is not finite", self.params.names[i])));
        }
        Ok(ForwardBackward { loss: value, grads })
    }

    pub fn loss(&self, batch: &RolloutBatch) -> Result<f64, NeuralError> {
        let mut g = Graph::new();
        let p = self.params.bind(&mut g);
        let r = self.rollout(&mut g, &p, batch)?;
        let loss = g.cross_entropy(r.logits, r.targets);
        Ok(g.value(loss).data[0])
    }

    /// Decoded bits for each session in the batch.
    pub fn decode_batch(&self, batch: &RolloutBatch) -> Result<Vec<Vec<u8>>, NeuralError> {
        let mut g = Graph::new();
        let p = self.params.bind(&mut g);
        let r = self.rollout(&mut g, &p, batch)?;
        Ok(self.argmax_bits(g.value(r.logits), batch.sessions()))
    }

    fn argmax_bits(&self, logits: &Mat, sessions: usize) -> Vec<Vec<u8>> {
        let c = &self.config;
        (0..sessions)
            .map(|s| {
                (0..c.num_blocks)
                    .flat_map(|j| {
                        let row = logits.row(s * c.num_blocks + j);
                        let best = row
                            .iter()
                            .enumerate()
                            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc })
                            .0;
                        class_to_bits(best, c.block_size)
                    })
                    .collect()
            })
            .collect()
    }

    /// Builds one encoding round on `g` from explicit state. Returns the
    /// codeword and the leaves holding the visible feedback, so callers can
    /// differentiate with respect to them.
    pub fn encode_round_on(
        &self,
        g: &mut Graph,
        p: &Bound,
        state: &EncoderState,
    ) -> Result<(Var, Vec<Var>), NeuralError> {
        let c = &self.config;
        let t = state.round;
        if t >= c.rounds {
            return Err(NeuralError::Protocol(format!("round {t} beyond the {}-round session", c.rounds)));
        }
        if state.bits.len() != c.k() || state.bits.iter().any(|&b| b > 1) {
            return Err(NeuralError::Protocol(format!("message must have {} binary entries", c.k())));
        }
        if state.sent.len() != t {
            return Err(NeuralError::Protocol(format!(
                "round {t} needs {t} earlier codewords, state has {}",
                state.sent.len()
            )));
        }
        let visible = (t + 1).saturating_sub(c.lag);
        if state.feedback.len() < visible {
            return Err(NeuralError::Protocol(format!(
                "round {t} needs feedback for rounds 0..{visible}, state has {}",
                state.feedback.len()
            )));
        }
        let n = c.num_blocks;
        if let Some(s) = state.sent.iter().position(|v| v.len() != n) {
            return Err(NeuralError::Protocol(format!("codeword {s} must have {n} symbols")));
        }
        let bits = self.bits_leaf(g, std::slice::from_ref(&state.bits));
        let zeros = self.zeros(g, 1);
        let sent: Vec<Var> = state.sent.iter().map(|v| g.leaf(Mat::col(v.clone()))).collect();
        let mut fb = Vec::with_capacity(visible);
        for (tau, v) in state.feedback[..visible].iter().enumerate() {
            if v.len() != c.feedback_len() {
                return Err(NeuralError::Protocol(format!("feedback {tau} must have {} symbols", c.feedback_len())));
            }
            fb.push(g.leaf(Mat::from_vec(n, c.fb_per_block, v.clone())));
        }
        let e = self.snr.forward(g, p, &[state.snr_db]);
        let emb = g.repeat_rows(e, n);
        Ok((self.encoder_round(g, p, t, bits, &sent, &fb, emb, zeros), fb))
    }

    pub fn encode_round(&self, state: &EncoderState) -> Result<Vec<f64>, NeuralError> {
        let mut g = Graph::new();
        let p = self.params.bind(&mut g);
        let (c, _) = self.encode_round_on(&mut g, &p, state)?;
        Ok(g.value(c).data.clone())
    }

    /// Feedback for the newest reception `received.last()` at SNR
    /// `snr_db`.
    pub fn generate_feedback(&self, received: &[Vec<f64>], snr_db: f64) -> Result<Vec<f64>, NeuralError> {
        let c = &self.config;
        if received.is_empty() || received.len() > c.rounds {
            return Err(NeuralError::Protocol(format!("feedback needs 1..={} receptions", c.rounds)));
        }
        let mut g = Graph::new();
        let p = self.params.bind(&mut g);
        let rx = self.reception_leaves(&mut g, received)?;
        let zeros = self.zeros(&mut g, 1);
        let e = self.snr.forward(&mut g, &p, &[snr_db]);
        let emb = g.repeat_rows(e, c.num_blocks);
        let f = self.feedback_round(&mut g, &p, &rx, emb, zeros.0);
        Ok(g.value(f).data.clone())
    }

    /// Per-block class logits (`num_blocks x 2^m`) and the decoded bits.
    pub fn decode_final(&self, received: &[Vec<f64>], snr_db: &[f64]) -> Result<(Mat, Vec<u8>), NeuralError> {
        let c = &self.config;
        if received.len() != c.rounds || snr_db.len() != c.rounds {
            return Err(NeuralError::Protocol(format!(
                "decoding needs all {} rounds, got {} receptions and {} SNR values",
                c.rounds,
                received.len(),
                snr_db.len()
            )));
        }
        let mut g = Graph::new();
        let p = self.params.bind(&mut g);
        let rx = self.reception_leaves(&mut g, received)?;
        let embs: Vec<Var> = snr_db.iter().map(|&s| self.snr.forward(&mut g, &p, &[s])).collect();
        let l = self.decoder_logits(&mut g, &p, &rx, &embs);
        let logits = g.value(l).clone();
        let bits = self.argmax_bits(&logits, 1).remove(0);
        Ok((logits, bits))
    }

    fn reception_leaves(&self, g: &mut Graph, received: &[Vec<f64>]) -> Result<Vec<Var>, NeuralError> {
        let n = self.config.num_blocks;
        received
            .iter()
            .enumerate()
            .map(|(t, y)| {
                if y.len() != n {
                    return Err(NeuralError::Protocol(format!("reception {t} must have {n} symbols")));
                }
                Ok(g.leaf(Mat::col(y.clone())))
            })
            .collect()
    }
}

impl RoundEncoder for AfcModel {
    fn encode_round(&self, view: &EncoderView<'_>) -> Result<Vec<f64>, CodecError> {
        if view.lag != self.config.lag {
            return Err(CodecError::Config(format!(
                "session lag {} differs from the model's lag {}",
                view.lag, self.config.lag
            )));
        }
        let state = EncoderState {
            round: view.round,
            bits: view.message.bits().to_vec(),
            sent: view.sent.to_vec(),
            feedback: view.feedback.to_vec(),
            snr_db: view.current_snr().value(),
        };
        Ok(AfcModel::encode_round(self, &state)?)
    }
}

impl RoundDecoder for AfcModel {
    fn feedback(&self, received: &[Vec<f64>], snr: &[SnrDb]) -> Result<Vec<f64>, CodecError> {
        let s = snr.last().ok_or_else(|| CodecError::ProtocolViolation("no SNR for feedback".into()))?;
        Ok(self.generate_feedback(received, s.value())?)
    }

    fn decode(&self, received: &[Vec<f64>], snr: &[SnrDb]) -> Result<Vec<u8>, CodecError> {
        let s: Vec<f64> = snr.iter().map(|v| v.value()).collect();
        Ok(self.decode_final(received, &s)?.1)
    }
}

/// Packet link that runs one batched rollout per packet at a fixed uplink
/// SNR.
#[derive(Debug, Clone, Copy)]
pub struct AfcLink<'a> {
    pub model: &'a AfcModel,
    pub feedback: Noise,
}

impl LinkSimulator for AfcLink<'_> {
    fn packet(&self, noise: Noise, rng: &mut ChaCha8Rng) -> Result<bool, CodecError> {
        let c = &self.model.config;
        let bits: Vec<u8> = (0..c.k()).map(|_| rng.random_range(0..2u8)).collect();
        let (snr, noiseless) = match noise {
            Noise::Awgn(s) => (s.value(), false),
            Noise::Noiseless => (0.0, true),
        };
        let batch =
            RolloutBatch::sample(c, vec![bits.clone()], vec![vec![snr; c.rounds]], noiseless, self.feedback, rng);
        let decoded = self.model.decode_batch(&batch)?;
        Ok(decoded[0] == bits)
    }
}
