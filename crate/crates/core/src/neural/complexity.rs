//! Parameter and FLOP accounting. FLOPs count two per multiply-accumulate;
//! normalization, softmax and activation arithmetic are not counted.

use serde::{Deserialize, Serialize};

use super::graph::Graph;
use super::{AfcConfig, AfcModel, EncoderState, NeuralError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Complexity {
    /// SNR embedding plus encoder stack.
    pub encoder_params: u64,
    /// Encoder FLOPs summed over all `T` rounds of one session.
    pub encoder_flops_per_session: u64,
    pub feedback_params: u64,
    pub decoder_params: u64,
    pub total_params: u64,
}

fn stack_params(input: u64, d: u64, ff: u64, layers: u64, out: u64, pos_tokens: Option<u64>) -> u64 {
    let block = 2 * d + 3 * d * d + (d * d + d) + 2 * d + (d * ff + ff) + (ff * d + d);
    input * d + d + pos_tokens.map_or(0, |n| n * d) + layers * block + 2 * d + d * out + out
}

/// Closed-form counts from the configuration alone.
pub fn count_complexity(c: &AfcConfig) -> Result<Complexity, NeuralError> {
    c.validate()?;
    let u = |x: usize| x as u64;
    let n = u(c.num_blocks);
    let pos = c.positional.then_some(n);
    let (h, e) = (u(c.snr_hidden), u(c.snr_emb_dim));
    let snr = h + h + h * e + e;
    let encoder_params = snr + stack_params(u(c.enc_input_dim()), u(c.d_model), u(c.ff_dim), u(c.enc_layers), 1, pos);
    let (dd, dff) = (u(c.dec_d_model), u(c.dec_ff_dim));
    let feedback_params = stack_params(u(c.fb_input_dim()), dd, dff, u(c.fb_layers), u(c.fb_per_block), pos);
    let decoder_params = stack_params(u(c.dec_input_dim()), dd, dff, u(c.dec_layers), u(c.classes()), pos);

    let (d, ff, l) = (u(c.d_model), u(c.ff_dim), u(c.enc_layers));
    let mut macs = 0u64;
    for t in 0..c.rounds {
        let active = match c.sparse_ff_window {
            None => u(c.enc_input_dim()),
            Some(w) => {
                let fb_rounds = match t.checked_sub(c.lag) {
                    Some(hi) => hi - hi.saturating_sub(w) + 1,
                    None => 0,
                };
                u(c.block_size + t + fb_rounds * c.fb_per_block + c.snr_emb_dim)
            }
        };
        macs += n * active * d;
        macs += l * (4 * n * d * d + 2 * n * n * d + 2 * n * d * ff);
        macs += n * d;
        macs += h + h * e;
    }
    Ok(Complexity {
        encoder_params,
        encoder_flops_per_session: 2 * macs,
        feedback_params,
        decoder_params,
        total_params: encoder_params + feedback_params + decoder_params,
    })
}

/// Encoder parameter count obtained by walking the instantiated weight
/// arrays.
pub fn enumerate_encoder_params(model: &AfcModel) -> u64 {
    model.encoder_param_ids().map(|i| model.params.values[i].len() as u64).sum()
}

/// Encoder FLOPs of one session, counted on the tape while encoding all
/// rounds.
pub fn measure_encoder_flops(model: &AfcModel) -> Result<u64, NeuralError> {
    let c = &model.config;
    let mut g = Graph::new();
    let p = model.params.bind(&mut g);
    let before = g.macs();
    let mut state = EncoderState {
        round: 0,
        bits: vec![0; c.k()],
        sent: Vec::new(),
        feedback: vec![vec![0.0; c.feedback_len()]; c.rounds],
        snr_db: 0.0,
    };
    for t in 0..c.rounds {
        state.round = t;
        let (cw, _) = model.encode_round_on(&mut g, &p, &state)?;
        state.sent.push(g.value(cw).data.clone());
    }
    Ok(2 * (g.macs() - before))
}
