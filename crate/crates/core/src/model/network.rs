//! Graph builders for the two-branch encoder and the attention decoder.
//!
//! Parameter names are stable and double as the checkpoint layout:
//! `enc.in`, `enc.NN.{attn.{q,k,v,o},mlp.{in,out},merge,norm}`, `ctc`,
//! `inter.NN.{norm,proj}`, `dec.embed`, `dec.NN.{self.*,norm1,cross.*,
//! norm2,ffn.{in,out},norm3}`, `dec.out`. Linear layers carry `.w`
//! (`in x out`) and `.b`; norms carry `.g` and `.b`.

use rand::Rng;

use super::config::{InterTarget, ModelConfig};
use crate::autodiff::{Bound, Graph, ParamStore, Tensor, Var};
use crate::corpus::FeatureMatrix;
use crate::ctc::{interctc_condition, ConditionParams};
use crate::error::{Error, Result};

/// Additive attention mask value for excluded positions.
const MASKED: f64 = -1e30;

pub(crate) fn layer_name(prefix: &str, l: usize) -> String {
    format!("{prefix}.{l:02}")
}

fn add_linear<R: Rng + ?Sized>(
    store: &mut ParamStore,
    name: &str,
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) {
    store.insert(format!("{name}.w"), Tensor::xavier(fan_in, fan_out, rng));
    store.insert(format!("{name}.b"), Tensor::zeros(&[fan_out]));
}

fn add_norm(store: &mut ParamStore, name: &str, width: usize) {
    store.insert(format!("{name}.g"), Tensor::filled(&[width], 1.0));
    store.insert(format!("{name}.b"), Tensor::zeros(&[width]));
}

fn add_attention<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, h: usize, rng: &mut R) {
    for part in ["q", "k", "v", "o"] {
        add_linear(store, &format!("{name}.{part}"), h, h, rng);
    }
}

/// Fresh parameters for `cfg` on `feature_dim`-dimensional input and a
/// vocabulary of `vocab` entries. The InterCTC projections start at zero
/// so conditioning initially reduces to the normalization.
pub fn init_params<R: Rng + ?Sized>(
    cfg: &ModelConfig,
    feature_dim: usize,
    vocab: usize,
    rng: &mut R,
) -> Result<ParamStore> {
    cfg.validate()?;
    let h = cfg.hidden;
    let mut s = ParamStore::new();
    add_linear(&mut s, "enc.in", feature_dim * cfg.subsample, h, rng);
    for l in 1..=cfg.num_layers {
        let p = layer_name("enc", l);
        add_attention(&mut s, &format!("{p}.attn"), h, rng);
        add_linear(&mut s, &format!("{p}.mlp.in"), h, 2 * cfg.mlp_hidden, rng);
        add_linear(&mut s, &format!("{p}.mlp.out"), cfg.mlp_hidden, h, rng);
        add_linear(&mut s, &format!("{p}.merge"), 2 * h, h, rng);
        add_norm(&mut s, &format!("{p}.norm"), h);
    }
    add_linear(&mut s, "ctc", h, vocab, rng);
    if cfg.self_condition {
        for &e in &cfg.interctc_layers {
            let p = layer_name("inter", e);
            add_norm(&mut s, &format!("{p}.norm"), h);
            s.insert(format!("{p}.proj.w"), Tensor::zeros(&[vocab, h]));
            s.insert(format!("{p}.proj.b"), Tensor::zeros(&[h]));
        }
    }
    s.insert("dec.embed", Tensor::xavier(vocab, h, rng));
    for l in 1..=cfg.decoder_layers {
        let p = layer_name("dec", l);
        add_attention(&mut s, &format!("{p}.self"), h, rng);
        add_norm(&mut s, &format!("{p}.norm1"), h);
        add_attention(&mut s, &format!("{p}.cross"), h, rng);
        add_norm(&mut s, &format!("{p}.norm2"), h);
        add_linear(&mut s, &format!("{p}.ffn.in"), h, cfg.decoder_ffn, rng);
        add_linear(&mut s, &format!("{p}.ffn.out"), cfg.decoder_ffn, h, rng);
        add_norm(&mut s, &format!("{p}.norm3"), h);
    }
    add_linear(&mut s, "dec.out", h, vocab, rng);
    Ok(s)
}

/// Sinusoidal position table, `frames x width`.
pub fn positional_encoding(frames: usize, width: usize) -> Vec<f64> {
    let mut out = vec![0.0; frames * width];
    for t in 0..frames {
        for i in 0..width {
            let pair = (i / 2) as f64;
            let angle = t as f64 / 10000f64.powf(2.0 * pair / width as f64);
            out[t * width + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    out
}

fn linear(g: &mut Graph, b: &mut Bound, x: Var, name: &str) -> Var {
    let w = b.var(g, &format!("{name}.w"));
    let bias = b.var(g, &format!("{name}.b"));
    let y = g.matmul(x, w);
    g.add_row(y, bias)
}

fn norm(g: &mut Graph, b: &mut Bound, x: Var, name: &str) -> Var {
    let gain = b.var(g, &format!("{name}.g"));
    let bias = b.var(g, &format!("{name}.b"));
    g.layer_norm(x, gain, bias)
}

/// Multi-head scaled dot-product attention. `mask` is added to the
/// `queries x keys` score matrix of every head.
fn attention(
    g: &mut Graph,
    b: &mut Bound,
    name: &str,
    query: Var,
    memory: Var,
    heads: usize,
    mask: Option<Var>,
) -> Var {
    let q = linear(g, b, query, &format!("{name}.q"));
    let k = linear(g, b, memory, &format!("{name}.k"));
    let v = linear(g, b, memory, &format!("{name}.v"));
    let width = g.shape(q).1;
    let dh = width / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut contexts = Vec::with_capacity(heads);
    for head in 0..heads {
        let qh = g.slice_cols(q, head * dh, dh);
        let kh = g.slice_cols(k, head * dh, dh);
        let vh = g.slice_cols(v, head * dh, dh);
        let kt = g.transpose(kh);
        let scores = g.matmul(qh, kt);
        let mut scores = g.scale(scores, scale);
        if let Some(m) = mask {
            scores = g.add(scores, m);
        }
        let weights = g.softmax(scores);
        contexts.push(g.matmul(weights, vh));
    }
    let ctx = if heads == 1 {
        contexts[0]
    } else {
        g.concat_cols(&contexts)
    };
    linear(g, b, ctx, &format!("{name}.o"))
}

/// One intermediate CTC tap.
#[derive(Debug, Clone, Copy)]
pub struct Tap {
    /// 1-based block index the lattice is read after.
    pub layer: usize,
    pub target: InterTarget,
    pub logits: Var,
    pub logp: Var,
}

#[derive(Debug, Clone)]
pub struct EncoderOutput {
    /// `L' x H`
    pub hidden: Var,
    /// Final CTC log-probabilities, `L' x V'`.
    pub logp: Var,
    pub taps: Vec<Tap>,
}

/// Input matrix after optional frame-pair stacking; an odd trailing frame
/// is paired with zeros.
fn stacked_input(features: &FeatureMatrix, subsample: usize) -> (usize, usize, Vec<f64>) {
    let (frames, dims) = (features.frames(), features.dims());
    let out_frames = frames.div_ceil(subsample);
    let width = dims * subsample;
    let mut data = vec![0.0; out_frames * width];
    for t in 0..frames {
        let (row, slot) = (t / subsample, t % subsample);
        let dst = &mut data[row * width + slot * dims..row * width + (slot + 1) * dims];
        for (d, &s) in dst.iter_mut().zip(features.row(t)) {
            *d = s as f64;
        }
    }
    (out_frames, width, data)
}

fn check_finite(g: &Graph, v: Var, what: &str) -> Result<()> {
    if g.is_finite(v) {
        Ok(())
    } else {
        Err(Error::NaNDetected(what.to_string()))
    }
}

pub fn encoder_forward(
    g: &mut Graph,
    b: &mut Bound,
    cfg: &ModelConfig,
    features: &FeatureMatrix,
) -> Result<EncoderOutput> {
    let expected = b
        .store()
        .get("enc.in.w")
        .map(|t| t.matrix_dims().0)
        .unwrap_or(0);
    if features.dims() * cfg.subsample != expected {
        return Err(Error::ShapeMismatch(format!(
            "features have {} dims, model expects {}",
            features.dims(),
            expected / cfg.subsample.max(1)
        )));
    }
    if features.frames() == 0 {
        return Err(Error::InvalidFeatures("utterance has no frames".into()));
    }
    let (frames, width, data) = stacked_input(features, cfg.subsample);
    let input = g.constant(frames, width, data);
    let projected = linear(g, b, input, "enc.in");
    let pe = g.constant(frames, cfg.hidden, positional_encoding(frames, cfg.hidden));
    let mut x = g.add(projected, pe);
    let mut taps = Vec::new();
    for l in 1..=cfg.num_layers {
        let p = layer_name("enc", l);
        let attn = attention(g, b, &format!("{p}.attn"), x, x, cfg.heads, None);
        let u = linear(g, b, x, &format!("{p}.mlp.in"));
        let gate = g.slice_cols(u, 0, cfg.mlp_hidden);
        let gate = g.gelu(gate);
        let value = g.slice_cols(u, cfg.mlp_hidden, cfg.mlp_hidden);
        let gated = g.mul(gate, value);
        let mlp = linear(g, b, gated, &format!("{p}.mlp.out"));
        let both = g.concat_cols(&[attn, mlp]);
        let merged = linear(g, b, both, &format!("{p}.merge"));
        let residual = g.add(x, merged);
        x = norm(g, b, residual, &format!("{p}.norm"));
        check_finite(g, x, &format!("encoder block {l} output"))?;
        if let Some(target) = cfg.tap_target(l) {
            let logits = linear(g, b, x, "ctc");
            let logp = g.log_softmax(logits);
            taps.push(Tap {
                layer: l,
                target,
                logits,
                logp,
            });
            if cfg.self_condition {
                let t = layer_name("inter", l);
                let params = ConditionParams {
                    norm_gain: b.var(g, &format!("{t}.norm.g")),
                    norm_bias: b.var(g, &format!("{t}.norm.b")),
                    proj_weight: b.var(g, &format!("{t}.proj.w")),
                    proj_bias: b.var(g, &format!("{t}.proj.b")),
                };
                x = interctc_condition(g, x, logits, &params)?;
            }
        }
    }
    let logits = linear(g, b, x, "ctc");
    let logp = g.log_softmax(logits);
    check_finite(g, logp, "final CTC log-probabilities")?;
    Ok(EncoderOutput {
        hidden: x,
        logp,
        taps,
    })
}

/// Decoder log-probabilities for every position of `ids` (which starts
/// with sos): row `k` is the distribution of the token following
/// `ids[..=k]`. Only the first `memory_len` rows of `memory` are attended.
pub fn decoder_forward(
    g: &mut Graph,
    b: &mut Bound,
    cfg: &ModelConfig,
    memory: Var,
    memory_len: usize,
    ids: &[usize],
) -> Var {
    let k = ids.len();
    let mem_rows = g.shape(memory).0;
    assert!(k > 0 && memory_len > 0 && memory_len <= mem_rows);
    let embed = b.var(g, "dec.embed");
    let emb = g.gather_rows(embed, ids);
    let pe = g.constant(k, cfg.hidden, positional_encoding(k, cfg.hidden));
    let mut x = g.add(emb, pe);

    let causal = (0..k * k)
        .map(|i| if i % k > i / k { MASKED } else { 0.0 })
        .collect();
    let causal = (k > 1).then(|| g.constant(k, k, causal));
    let cross_mask = (memory_len < mem_rows).then(|| {
        let m = (0..k * mem_rows)
            .map(|i| {
                if i % mem_rows >= memory_len {
                    MASKED
                } else {
                    0.0
                }
            })
            .collect();
        g.constant(k, mem_rows, m)
    });

    for l in 1..=cfg.decoder_layers {
        let p = layer_name("dec", l);
        let a = attention(g, b, &format!("{p}.self"), x, x, cfg.heads, causal);
        let r = g.add(x, a);
        x = norm(g, b, r, &format!("{p}.norm1"));
        let c = attention(
            g,
            b,
            &format!("{p}.cross"),
            x,
            memory,
            cfg.heads,
            cross_mask,
        );
        let r = g.add(x, c);
        x = norm(g, b, r, &format!("{p}.norm2"));
        let f = linear(g, b, x, &format!("{p}.ffn.in"));
        let f = g.gelu(f);
        let f = linear(g, b, f, &format!("{p}.ffn.out"));
        let r = g.add(x, f);
        x = norm(g, b, r, &format!("{p}.norm3"));
    }
    let logits = linear(g, b, x, "dec.out");
    g.log_softmax(logits)
}
