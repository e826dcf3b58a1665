//! Central finite-difference checks of the backward pass.
//!
//! Relative error per scalar is `|a - n| / max(|a|, |n|, floor)` where `a`
//! is the tape gradient and `n` the central difference; the floor keeps
//! the ratio meaningful for gradients that are themselves near zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var};
use super::layers::{Block, Bound, LayerNorm, Linear, ParamStore, SnrMlp};
use super::tensor::Mat;
use super::{AfcConfig, AfcModel, NeuralError, RolloutBatch};
use crate::channel::{Noise, SnrDb};

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckSettings {
    pub step: f64,
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradcheckSettings {
    fn default() -> Self {
        GradcheckSettings { step: DEFAULT_STEP, floor: DEFAULT_FLOOR, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckCase {
    pub name: String,
    pub scalars_checked: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub step: f64,
    pub floor: f64,
    pub cases: Vec<GradcheckCase>,
    pub max_rel_error: f64,
}

fn randn(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Mat {
    Mat::from_vec(rows, cols, (0..rows * cols).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect())
}

/// Checks `d loss / d inputs` for a loss built by `build` from leaves
/// holding `inputs`.
pub fn check_case<F>(name: &str, inputs: &[Mat], s: &GradcheckSettings, build: F) -> GradcheckCase
where
    F: Fn(&mut Graph, &[Var]) -> Var,
{
    let eval = |vals: &[Mat]| {
        let mut g = Graph::new();
        let vars: Vec<Var> = vals.iter().map(|m| g.leaf(m.clone())).collect();
        let l = build(&mut g, &vars);
        g.value(l).data[0]
    };
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|m| g.leaf(m.clone())).collect();
    let l = build(&mut g, &vars);
    let grads = g.backward(l);
    let mut vals = inputs.to_vec();
    let (mut rel, mut abs, mut n) = (0.0f64, 0.0f64, 0usize);
    for (i, m) in inputs.iter().enumerate() {
        let a = grads.get_or_zeros(vars[i], m.rows, m.cols);
        for j in 0..m.len() {
            let x = vals[i].data[j];
            vals[i].data[j] = x + s.step;
            let up = eval(&vals);
            vals[i].data[j] = x - s.step;
            let down = eval(&vals);
            vals[i].data[j] = x;
            let num = (up - down) / (2.0 * s.step);
            let err = (a.data[j] - num).abs();
            abs = abs.max(err);
            rel = rel.max(err / a.data[j].abs().max(num.abs()).max(s.floor));
            n += 1;
        }
    }
    GradcheckCase { name: name.into(), scalars_checked: n, max_rel_error: rel, max_abs_error: abs }
}

/// Projects a matrix output onto fixed random weights so every output
/// entry contributes to the scalar loss.
fn project(g: &mut Graph, y: Var, w: &Mat) -> Var {
    let wv = g.leaf(w.clone());
    let p = g.mul(y, wv);
    g.sum(p)
}

/// Runs a layer with parameters from `store` plus one data input; all of
/// them are checked.
fn layer_case<F>(
    name: &str,
    store: &ParamStore,
    x: Mat,
    out_shape: (usize, usize),
    s: &GradcheckSettings,
    rng: &mut ChaCha8Rng,
    f: F,
) -> GradcheckCase
where
    F: Fn(&mut Graph, &Bound, Var) -> Var,
{
    let w = randn(rng, out_shape.0, out_shape.1, 1.0);
    let mut inputs = store.values.clone();
    inputs.push(x);
    let np = store.len();
    check_case(name, &inputs, s, |g, v| {
        let p = Bound(v[..np].to_vec());
        let y = f(g, &p, v[np]);
        project(g, y, &w)
    })
}

fn perturb(store: &mut ParamStore, rng: &mut ChaCha8Rng) {
    for m in &mut store.values {
        for v in m.data.iter_mut() {
            *v += 0.3 * rng.sample::<f64, _>(StandardNormal);
        }
    }
}

fn tiny_batch(model: &AfcModel, rng: &mut ChaCha8Rng, sessions: usize) -> RolloutBatch {
    let c = &model.config;
    let bits = (0..sessions).map(|_| (0..c.k()).map(|_| rng.random_range(0..2u8)).collect()).collect();
    let snr = (0..sessions).map(|_| (0..c.rounds).map(|_| rng.random_range(-2.0..6.0)).collect()).collect();
    RolloutBatch::sample(c, bits, snr, false, Noise::Awgn(SnrDb::db(10.0)), rng)
}

/// Gradient of the mean cross-entropy of full sessions with respect to
/// every weight of `model`.
pub fn check_session_loss(model: &AfcModel, batch: &RolloutBatch, s: &GradcheckSettings, name: &str) -> GradcheckCase {
    let np = model.params.len();
    check_case(name, &model.params.values, s, |g, v| {
        let p = Bound(v[..np].to_vec());
        let r = model.rollout(g, &p, batch).expect("batch matches model");
        g.cross_entropy(r.logits, r.targets)
    })
}

/// Every layer type on its own, then complete sessions of small models.
pub fn run_gradcheck(s: &GradcheckSettings) -> Result<GradcheckReport, NeuralError> {
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut cases = Vec::new();
    let rows = 6;

    let mut st = ParamStore::default();
    let lin = Linear::new(&mut st, &mut rng, "lin", 5, 4, true);
    perturb(&mut st, &mut rng);
    let x = randn(&mut rng, rows, 5, 1.0);
    cases.push(layer_case("linear", &st, x.clone(), (rows, 4), s, &mut rng, |g, p, x| lin.forward(g, p, x)));
    let active = vec![true, false, true, true, false];
    cases.push(layer_case("masked_linear", &st, x, (rows, 4), s, &mut rng, |g, p, x| {
        lin.forward_masked(g, p, x, active.clone())
    }));

    let mut st = ParamStore::default();
    let ln = LayerNorm::new(&mut st, "ln", 5);
    perturb(&mut st, &mut rng);
    let x = randn(&mut rng, rows, 5, 1.5);
    cases.push(layer_case("layer_norm", &st, x, (rows, 5), s, &mut rng, |g, p, x| ln.forward(g, p, x)));

    let mut st = ParamStore::default();
    let blk = Block::new(&mut st, &mut rng, "blk", 4, 6);
    perturb(&mut st, &mut rng);
    let x = randn(&mut rng, rows, 4, 1.0);
    cases.push(layer_case("attention_block", &st, x, (rows, 4), s, &mut rng, |g, p, x| blk.forward(g, p, x, 3)));

    let mut st = ParamStore::default();
    let l1 = Linear::new(&mut st, &mut rng, "ff1", 4, 7, true);
    let l2 = Linear::new(&mut st, &mut rng, "ff2", 7, 3, true);
    perturb(&mut st, &mut rng);
    let x = randn(&mut rng, rows, 4, 1.0);
    cases.push(layer_case("gelu_mlp", &st, x, (rows, 3), s, &mut rng, |g, p, x| {
        let h = l1.forward(g, p, x);
        let h = g.gelu(h);
        l2.forward(g, p, h)
    }));

    let mut st = ParamStore::default();
    let mlp = SnrMlp::new(&mut st, &mut rng, "snr", 5, 4);
    perturb(&mut st, &mut rng);
    let snrs = [-3.0, 0.5, 4.0, 9.0];
    let w = randn(&mut rng, snrs.len(), 4, 1.0);
    cases.push(check_case("snr_embedding", &st.values, s, |g, v| {
        let p = Bound(v.to_vec());
        let e = mlp.forward(g, &p, &snrs);
        project(g, e, &w)
    }));

    let pos = randn(&mut rng, 3, 2, 1.0);
    let x = randn(&mut rng, rows, 2, 1.0);
    let w = randn(&mut rng, rows * 2, 4, 1.0);
    cases.push(check_case("tiling_and_power_norm", &[x, pos], s, |g, v| {
        let a = g.add_tiled(v[0], v[1]);
        let r = g.repeat_rows(a, 2);
        let c = g.concat_cols(&[r, r]);
        let n = g.group_power_norm(c, 3);
        let n = g.scale(n, 0.7);
        project(g, n, &w.clone())
    }));

    let logits = randn(&mut rng, rows, 4, 2.0);
    let targets: Vec<usize> = (0..rows).map(|_| rng.random_range(0..4)).collect();
    cases.push(check_case("cross_entropy", &[logits], s, |g, v| g.cross_entropy(v[0], targets.clone())));

    for (name, cfg) in [
        ("session_dense", AfcConfig::tiny()),
        (
            "session_sparse_positional",
            AfcConfig { sparse_ff_window: Some(0), positional: true, init_seed: 3, ..AfcConfig::tiny() },
        ),
        ("session_sync", AfcConfig { lag: 1, init_seed: 5, ..AfcConfig::tiny() }),
    ] {
        let mut model = AfcModel::new(cfg)?;
        perturb(&mut model.params, &mut rng);
        let batch = tiny_batch(&model, &mut rng, 2);
        cases.push(check_session_loss(&model, &batch, s, name));
    }

    let max_rel_error = cases.iter().fold(0.0f64, |m, c| m.max(c.max_rel_error));
    Ok(GradcheckReport { step: s.step, floor: s.floor, cases, max_rel_error })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_case_agrees_with_finite_differences() {
        let r = run_gradcheck(&GradcheckSettings::default()).unwrap();
        for c in &r.cases {
            assert!(c.max_rel_error < 1e-4, "{}: {:e} (abs {:e})", c.name, c.max_rel_error, c.max_abs_error);
            assert!(c.scalars_checked > 0);
        }
    }
}
