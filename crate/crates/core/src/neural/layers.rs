//! Trainable parameters and the layers built from them.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::graph::{Graph, Var};
use super::tensor::Mat;

/// Named weight arrays in declaration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    pub names: Vec<String>,
    pub values: Vec<Mat>,
}

impl ParamStore {
    pub fn add(&mut self, name: String, value: Mat) -> usize {
        self.names.push(name);
        self.values.push(value);
        self.values.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(Mat::len).sum()
    }

    /// Puts every parameter on the tape as a leaf.
    pub fn bind(&self, g: &mut Graph) -> Bound {
        Bound(self.values.iter().map(|m| g.leaf(m.clone())).collect())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Tape leaves for a [`ParamStore`], index-aligned with it.
#[derive(Debug, Clone)]
pub struct Bound(pub Vec<Var>);

impl Bound {
    pub fn var(&self, id: usize) -> Var {
        self.0[id]
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, std: f64) -> Mat {
    let n = Normal::new(0.0, std).expect("positive std");
    Mat::from_vec(rows, cols, (0..rows * cols).map(|_| n.sample(rng)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linear {
    pub w: usize,
    pub b: Option<usize>,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(
        s: &mut ParamStore,
        rng: &mut R,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        bias: bool,
    ) -> Self {
        let w = s.add(format!("{name}.w"), gaussian(rng, fan_in, fan_out, (1.0 / fan_in as f64).sqrt()));
        let b = bias.then(|| s.add(format!("{name}.b"), Mat::zeros(1, fan_out)));
        Linear { w, b, fan_in, fan_out }
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var) -> Var {
        let y = g.matmul(x, p.var(self.w));
        self.bias(g, p, y)
    }

    /// Only input features flagged in `active` take part.
    pub fn forward_masked(&self, g: &mut Graph, p: &Bound, x: Var, active: Vec<bool>) -> Var {
        let y = g.masked_matmul(x, p.var(self.w), active);
        self.bias(g, p, y)
    }

    fn bias(&self, g: &mut Graph, p: &Bound, y: Var) -> Var {
        match self.b {
            Some(b) => g.add_row(y, p.var(b)),
            None => y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerNorm {
    pub gamma: usize,
    pub beta: usize,
}

impl LayerNorm {
    pub fn new(s: &mut ParamStore, name: &str, d: usize) -> Self {
        LayerNorm {
            gamma: s.add(format!("{name}.gamma"), Mat::filled(1, d, 1.0)),
            beta: s.add(format!("{name}.beta"), Mat::zeros(1, d)),
        }
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var) -> Var {
        g.layer_norm(x, p.var(self.gamma), p.var(self.beta))
    }
}

/// Pre-norm transformer block: single-head self-attention then a GELU
/// feed-forward, each with a residual connection.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub ln1: LayerNorm,
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub ln2: LayerNorm,
    pub ff1: Linear,
    pub ff2: Linear,
}

impl Block {
    pub fn new<R: Rng + ?Sized>(s: &mut ParamStore, rng: &mut R, name: &str, d: usize, ff: usize) -> Self {
        Block {
            ln1: LayerNorm::new(s, &format!("{name}.ln1"), d),
            wq: Linear::new(s, rng, &format!("{name}.wq"), d, d, false),
            wk: Linear::new(s, rng, &format!("{name}.wk"), d, d, false),
            wv: Linear::new(s, rng, &format!("{name}.wv"), d, d, false),
            wo: Linear::new(s, rng, &format!("{name}.wo"), d, d, true),
            ln2: LayerNorm::new(s, &format!("{name}.ln2"), d),
            ff1: Linear::new(s, rng, &format!("{name}.ff1"), d, ff, true),
            ff2: Linear::new(s, rng, &format!("{name}.ff2"), ff, d, true),
        }
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var, group: usize) -> Var {
        let h = self.ln1.forward(g, p, x);
        let q = self.wq.forward(g, p, h);
        let k = self.wk.forward(g, p, h);
        let v = self.wv.forward(g, p, h);
        let a = g.attention(q, k, v, group);
        let a = self.wo.forward(g, p, a);
        let x = g.add(x, a);
        let h = self.ln2.forward(g, p, x);
        let h = self.ff1.forward(g, p, h);
        let h = g.gelu(h);
        let h = self.ff2.forward(g, p, h);
        g.add(x, h)
    }
}

/// Input projection, optional learned per-token positions, transformer
/// blocks, final norm and an output head. Sequences are consecutive
/// groups of `tokens` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Stack {
    pub input: Linear,
    pub position: Option<usize>,
    pub blocks: Vec<Block>,
    pub ln_f: LayerNorm,
    pub head: Linear,
}

pub struct StackShape {
    pub input: usize,
    pub d_model: usize,
    pub ff: usize,
    pub layers: usize,
    pub output: usize,
    pub tokens: usize,
    pub positional: bool,
}

impl Stack {
    pub fn new<R: Rng + ?Sized>(s: &mut ParamStore, rng: &mut R, name: &str, sh: &StackShape) -> Self {
        let input = Linear::new(s, rng, &format!("{name}.in"), sh.input, sh.d_model, true);
        let position = sh.positional.then(|| s.add(format!("{name}.pos"), gaussian(rng, sh.tokens, sh.d_model, 0.1)));
        let blocks =
            (0..sh.layers).map(|i| Block::new(s, rng, &format!("{name}.block{i}"), sh.d_model, sh.ff)).collect();
        Stack {
            input,
            position,
            blocks,
            ln_f: LayerNorm::new(s, &format!("{name}.ln_f"), sh.d_model),
            head: Linear::new(s, rng, &format!("{name}.head"), sh.d_model, sh.output, true),
        }
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var, tokens: usize, active: Option<Vec<bool>>) -> Var {
        let mut h = match active {
            Some(a) => self.input.forward_masked(g, p, x, a),
            None => self.input.forward(g, p, x),
        };
        if let Some(pos) = self.position {
            h = g.add_tiled(h, p.var(pos));
        }
        for b in &self.blocks {
            h = b.forward(g, p, h, tokens);
        }
        let h = self.ln_f.forward(g, p, h);
        self.head.forward(g, p, h)
    }
}

/// Maps an SNR in dB to an embedding vector: `W2 tanh(W1 (snr/10) + b1) + b2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrMlp {
    pub l1: Linear,
    pub l2: Linear,
}

/// Input scaling so typical SNRs land in the non-saturated tanh range.
pub const SNR_INPUT_SCALE: f64 = 0.1;

impl SnrMlp {
    pub fn new<R: Rng + ?Sized>(s: &mut ParamStore, rng: &mut R, name: &str, hidden: usize, out: usize) -> Self {
        SnrMlp {
            l1: Linear::new(s, rng, &format!("{name}.l1"), 1, hidden, true),
            l2: Linear::new(s, rng, &format!("{name}.l2"), hidden, out, true),
        }
    }

    /// `snr_db` is a column with one SNR per row.
    pub fn forward(&self, g: &mut Graph, p: &Bound, snr_db: &[f64]) -> Var {
        let x = g.leaf(Mat::col(snr_db.iter().map(|s| s * SNR_INPUT_SCALE).collect()));
        let h = self.l1.forward(g, p, x);
        let h = g.tanh(h);
        self.l2.forward(g, p, h)
    }
}
