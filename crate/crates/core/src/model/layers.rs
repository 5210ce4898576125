use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{ModelConfig, ModelError, Result};
use crate::numerics::{ParamId, ParamStore, Tape, Tensor, Var};

pub(crate) fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], limit: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-limit..=limit)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches")
}

pub(crate) fn normal(rng: &mut ChaCha8Rng, shape: &[usize], std: f64) -> Tensor {
    let dist = Normal::new(0.0, std).expect("finite std");
    let n = shape.iter().product();
    let data = (0..n).map(|_| dist.sample(rng)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches")
}

/// Affine map `x W + b` with Glorot-uniform weights and zero bias.
#[derive(Clone, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, din: usize, dout: usize) -> Result<Self> {
        let limit = (6.0 / (din + dout) as f64).sqrt();
        Ok(Linear {
            w: store.add(format!("{name}.w"), uniform(rng, &[din, dout], limit))?,
            b: store.add(format!("{name}.b"), Tensor::zeros(&[dout]))?,
        })
    }

    pub fn forward(&self, t: &mut Tape<'_>, x: Var) -> Result<Var> {
        let w = t.param(self.w);
        let b = t.param(self.b);
        let y = t.matmul(x, w)?;
        Ok(t.add(y, b)?)
    }
}

#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Result<Self> {
        Ok(LayerNorm {
            gamma: store.add(format!("{name}.gamma"), Tensor::filled(&[dim], 1.0))?,
            beta: store.add(format!("{name}.beta"), Tensor::zeros(&[dim]))?,
        })
    }

    pub fn forward(&self, t: &mut Tape<'_>, x: Var) -> Result<Var> {
        let g = t.param(self.gamma);
        let b = t.param(self.beta);
        Ok(t.layer_norm(x, g, b)?)
    }
}

/// Scaled dot-product self-attention over all positions of one sequence.
#[derive(Clone, Debug)]
pub struct MultiHeadAttention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub out: Linear,
    pub heads: usize,
    pub dim: usize,
}

impl MultiHeadAttention {
    pub fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, dim: usize, heads: usize) -> Result<Self> {
        if heads == 0 || !dim.is_multiple_of(heads) {
            return Err(ModelError::InvalidConfig(format!("{dim} not divisible into {heads} heads")));
        }
        Ok(MultiHeadAttention {
            q: Linear::new(store, rng, &format!("{name}.q"), dim, dim)?,
            k: Linear::new(store, rng, &format!("{name}.k"), dim, dim)?,
            v: Linear::new(store, rng, &format!("{name}.v"), dim, dim)?,
            out: Linear::new(store, rng, &format!("{name}.out"), dim, dim)?,
            heads,
            dim,
        })
    }

    pub fn forward(&self, t: &mut Tape<'_>, x: Var, dropout: f64) -> Result<Var> {
        let dh = self.dim / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let q = self.q.forward(t, x)?;
        let k = self.k.forward(t, x)?;
        let v = self.v.forward(t, x)?;
        let mut heads = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = t.slice_cols(q, h * dh, dh)?;
            let kh = t.slice_cols(k, h * dh, dh)?;
            let vh = t.slice_cols(v, h * dh, dh)?;
            let scores = t.matmul_t(qh, kh, false, true)?;
            let scores = t.scale(scores, scale)?;
            let attn = t.row_softmax(scores)?;
            let attn = t.dropout(attn, dropout)?;
            heads.push(t.matmul(attn, vh)?);
        }
        let joined = if heads.len() == 1 { heads[0] } else { t.concat_cols(&heads)? };
        self.out.forward(t, joined)
    }
}

/// Post-norm transformer block.
#[derive(Clone, Debug)]
pub struct EncoderBlock {
    pub attn: MultiHeadAttention,
    pub ln1: LayerNorm,
    pub ff1: Linear,
    pub ff2: Linear,
    pub ln2: LayerNorm,
}

impl EncoderBlock {
    fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, cfg: &ModelConfig) -> Result<Self> {
        Ok(EncoderBlock {
            attn: MultiHeadAttention::new(store, rng, &format!("{name}.attn"), cfg.d_model, cfg.encoder_heads)?,
            ln1: LayerNorm::new(store, &format!("{name}.ln1"), cfg.d_model)?,
            ff1: Linear::new(store, rng, &format!("{name}.ff1"), cfg.d_model, cfg.ffn_dim)?,
            ff2: Linear::new(store, rng, &format!("{name}.ff2"), cfg.ffn_dim, cfg.d_model)?,
            ln2: LayerNorm::new(store, &format!("{name}.ln2"), cfg.d_model)?,
        })
    }

    fn forward(&self, t: &mut Tape<'_>, x: Var, dropout: f64) -> Result<Var> {
        let a = self.attn.forward(t, x, dropout)?;
        let a = t.dropout(a, dropout)?;
        let x = t.add(x, a)?;
        let x = self.ln1.forward(t, x)?;
        let h = self.ff1.forward(t, x)?;
        let h = t.gelu(h)?;
        let h = self.ff2.forward(t, h)?;
        let h = t.dropout(h, dropout)?;
        let x = t.add(x, h)?;
        self.ln2.forward(t, x)
    }
}

/// Token and learned absolute position embeddings followed by a stack of
/// transformer blocks.
#[derive(Clone, Debug)]
pub struct Encoder {
    pub tok_emb: ParamId,
    pub pos_emb: ParamId,
    pub emb_ln: LayerNorm,
    pub blocks: Vec<EncoderBlock>,
    pub vocab_size: usize,
    pub max_seq_len: usize,
    pub dropout: f64,
}

impl Encoder {
    pub fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, cfg: &ModelConfig) -> Result<Self> {
        let tok_emb = store.add("enc.tok_emb", normal(rng, &[cfg.vocab_size, cfg.d_model], 0.1))?;
        let pos_emb = store.add("enc.pos_emb", normal(rng, &[cfg.max_seq_len, cfg.d_model], 0.1))?;
        let emb_ln = LayerNorm::new(store, "enc.emb_ln", cfg.d_model)?;
        let blocks = (0..cfg.encoder_layers)
            .map(|l| EncoderBlock::new(store, rng, &format!("enc.l{l}"), cfg))
            .collect::<Result<_>>()?;
        Ok(Encoder {
            tok_emb,
            pos_emb,
            emb_ln,
            blocks,
            vocab_size: cfg.vocab_size,
            max_seq_len: cfg.max_seq_len,
            dropout: cfg.dropout,
        })
    }

    /// Contextual embeddings `[seq, d_model]`.
    pub fn forward(&self, t: &mut Tape<'_>, ids: &[usize]) -> Result<Var> {
        if ids.is_empty() {
            return Err(ModelError::EmptySequence);
        }
        if ids.len() > self.max_seq_len {
            return Err(ModelError::SequenceTooLong {
                len: ids.len(),
                max: self.max_seq_len,
            });
        }
        if let Some(&id) = ids.iter().find(|&&i| i >= self.vocab_size) {
            return Err(ModelError::UnknownTokenId {
                id,
                size: self.vocab_size,
            });
        }
        let positions: Vec<usize> = (0..ids.len()).collect();
        let tok = t.embedding(self.tok_emb, ids)?;
        let pos = t.embedding(self.pos_emb, &positions)?;
        let x = t.add(tok, pos)?;
        let x = self.emb_ln.forward(t, x)?;
        let mut x = t.dropout(x, self.dropout)?;
        for b in &self.blocks {
            x = b.forward(t, x, self.dropout)?;
        }
        Ok(x)
    }
}
