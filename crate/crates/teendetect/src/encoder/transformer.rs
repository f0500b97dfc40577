//! Transformer sentence encoder: learned token and position embeddings, a
//! stack of post-norm self-attention blocks, and a tanh pooler over the
//! first position. Forward and backward passes are written out explicitly;
//! the gradient tests check them against finite differences on small dims.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{Affine, ParamVector};

const LN_EPS: f64 = 1e-5;

fn gelu(x: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    let u = c * (x + 0.044715 * x.powi(3));
    0.5 * x * (1.0 + u.tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    let u = c * (x + 0.044715 * x.powi(3));
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3.0 * 0.044715 * x * x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone)]
struct LnCache {
    normalized: Vec<f64>,
    inv_std: f64,
}

impl LayerNorm {
    fn new(dim: usize) -> Self {
        LayerNorm {
            gamma: vec![1.0; dim],
            beta: vec![0.0; dim],
        }
    }

    fn forward(&self, x: &[f64]) -> (Vec<f64>, LnCache) {
        let d = x.len() as f64;
        let mean = x.iter().sum::<f64>() / d;
        let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / d;
        let inv_std = 1.0 / (var + LN_EPS).sqrt();
        let normalized: Vec<f64> = x.iter().map(|&v| (v - mean) * inv_std).collect();
        let y: Vec<f64> = normalized
            .iter()
            .zip(&self.gamma)
            .zip(&self.beta)
            .map(|((&n, &g), &b)| g * n + b)
            .collect();
        (y, LnCache { normalized, inv_std })
    }

    fn backward(&self, cache: &LnCache, dy: &[f64], grads: &mut LayerNorm) -> Vec<f64> {
        let d = dy.len() as f64;
        let mut dnorm = vec![0.0; dy.len()];
        for i in 0..dy.len() {
            grads.gamma[i] += dy[i] * cache.normalized[i];
            grads.beta[i] += dy[i];
            dnorm[i] = dy[i] * self.gamma[i];
        }
        let mean_dnorm = dnorm.iter().sum::<f64>() / d;
        let mean_dnorm_norm = dnorm
            .iter()
            .zip(&cache.normalized)
            .map(|(&a, &b)| a * b)
            .sum::<f64>()
            / d;
        dnorm
            .iter()
            .zip(&cache.normalized)
            .map(|(&dn, &n)| cache.inv_std * (dn - mean_dnorm - n * mean_dnorm_norm))
            .collect()
    }
}

impl ParamVector for LayerNorm {
    fn param_count(&self) -> usize {
        self.gamma.len() + self.beta.len()
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.gamma);
        out.extend_from_slice(&self.beta);
    }

    fn read_flat(&mut self, src: &[f64], pos: &mut usize) {
        let ng = self.gamma.len();
        self.gamma.copy_from_slice(&src[*pos..*pos + ng]);
        *pos += ng;
        let nb = self.beta.len();
        self.beta.copy_from_slice(&src[*pos..*pos + nb]);
        *pos += nb;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformerLayer {
    pub wq: Affine,
    pub wk: Affine,
    pub wv: Affine,
    pub wo: Affine,
    pub ln1: LayerNorm,
    pub ff1: Affine,
    pub ff2: Affine,
    pub ln2: LayerNorm,
}

impl ParamVector for TransformerLayer {
    fn param_count(&self) -> usize {
        self.wq.param_count()
            + self.wk.param_count()
            + self.wv.param_count()
            + self.wo.param_count()
            + self.ln1.param_count()
            + self.ff1.param_count()
            + self.ff2.param_count()
            + self.ln2.param_count()
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        self.wq.write_flat(out);
        self.wk.write_flat(out);
        self.wv.write_flat(out);
        self.wo.write_flat(out);
        self.ln1.write_flat(out);
        self.ff1.write_flat(out);
        self.ff2.write_flat(out);
        self.ln2.write_flat(out);
    }

    fn read_flat(&mut self, src: &[f64], pos: &mut usize) {
        self.wq.read_flat(src, pos);
        self.wk.read_flat(src, pos);
        self.wv.read_flat(src, pos);
        self.wo.read_flat(src, pos);
        self.ln1.read_flat(src, pos);
        self.ff1.read_flat(src, pos);
        self.ff2.read_flat(src, pos);
        self.ln2.read_flat(src, pos);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformerParams {
    pub tok_emb: Vec<f64>, // vocab x dim
    pub pos_emb: Vec<f64>, // max_tokens x dim
    pub layers: Vec<TransformerLayer>,
    pub pooler: Affine, // dim -> dim, tanh
    pub dim: usize,
    pub heads: usize,
    pub vocab: usize,
}

/// Per-layer intermediates kept for backprop.
#[derive(Debug, Clone)]
struct LayerCache {
    input: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
    k: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    attn: Vec<Vec<Vec<f64>>>, // [head][query][key]
    ctx: Vec<Vec<f64>>,
    ln1: Vec<LnCache>,
    h1: Vec<Vec<f64>>,
    z_ff: Vec<Vec<f64>>,
    a_ff: Vec<Vec<f64>>,
    ln2: Vec<LnCache>,
}

#[derive(Debug, Clone)]
pub struct TransformerCache {
    ids: Vec<usize>,
    layers: Vec<LayerCache>,
    first: Vec<f64>,
    pre_tanh: Vec<f64>,
}

impl TransformerParams {
    pub fn new(
        dim: usize,
        heads: usize,
        ff: usize,
        n_layers: usize,
        vocab: usize,
        max_tokens: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        assert!(dim % heads == 0, "embedding dim must divide head count");
        let scale = 0.02;
        let mut tok_emb = vec![0.0; vocab * dim];
        let mut pos_emb = vec![0.0; max_tokens * dim];
        for e in tok_emb.iter_mut().chain(pos_emb.iter_mut()) {
            *e = rng.random_range(-scale..scale);
        }
        let layers = (0..n_layers)
            .map(|_| TransformerLayer {
                wq: Affine::uniform(dim, dim, scale, rng),
                wk: Affine::uniform(dim, dim, scale, rng),
                wv: Affine::uniform(dim, dim, scale, rng),
                wo: Affine::uniform(dim, dim, scale, rng),
                ln1: LayerNorm::new(dim),
                ff1: Affine::uniform(dim, ff, scale, rng),
                ff2: Affine::uniform(ff, dim, scale, rng),
                ln2: LayerNorm::new(dim),
            })
            .collect();
        TransformerParams {
            tok_emb,
            pos_emb,
            layers,
            pooler: Affine::uniform(dim, dim, scale, rng),
            dim,
            heads,
            vocab,
        }
    }

    pub fn forward(&self, ids: &[usize]) -> (Vec<f64>, TransformerCache) {
        debug_assert!(!ids.is_empty());
        let d = self.dim;
        let mut h: Vec<Vec<f64>> = ids
            .iter()
            .enumerate()
            .map(|(pos, &id)| {
                let tok = &self.tok_emb[id * d..(id + 1) * d];
                let pe = &self.pos_emb[pos * d..(pos + 1) * d];
                tok.iter().zip(pe).map(|(&a, &b)| a + b).collect()
            })
            .collect();

        let mut layer_caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (next, cache) = self.layer_forward(layer, &h);
            layer_caches.push(cache);
            h = next;
        }

        let first = h[0].clone();
        let pre_tanh = self.pooler.forward(&first);
        let out: Vec<f64> = pre_tanh.iter().map(|&x| x.tanh()).collect();
        (
            out,
            TransformerCache {
                ids: ids.to_vec(),
                layers: layer_caches,
                first,
                pre_tanh,
            },
        )
    }

    fn layer_forward(&self, layer: &TransformerLayer, h: &[Vec<f64>]) -> (Vec<Vec<f64>>, LayerCache) {
        let n = h.len();
        let d = self.dim;
        let dh = d / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();

        let q: Vec<Vec<f64>> = h.iter().map(|x| layer.wq.forward(x)).collect();
        let k: Vec<Vec<f64>> = h.iter().map(|x| layer.wk.forward(x)).collect();
        let v: Vec<Vec<f64>> = h.iter().map(|x| layer.wv.forward(x)).collect();

        let mut attn = vec![vec![vec![0.0; n]; n]; self.heads];
        let mut ctx = vec![vec![0.0; d]; n];
        for head in 0..self.heads {
            let lo = head * dh;
            for i in 0..n {
                let qi = &q[i][lo..lo + dh];
                let scores: Vec<f64> = (0..n)
                    .map(|j| {
                        qi.iter()
                            .zip(&k[j][lo..lo + dh])
                            .map(|(&a, &b)| a * b)
                            .sum::<f64>()
                            * scale
                    })
                    .collect();
                let weights = crate::nn::softmax(&scores);
                for j in 0..n {
                    let w = weights[j];
                    for t in 0..dh {
                        ctx[i][lo + t] += w * v[j][lo + t];
                    }
                }
                attn[head][i] = weights;
            }
        }

        let attn_out: Vec<Vec<f64>> = ctx.iter().map(|c| layer.wo.forward(c)).collect();
        let ln1_in: Vec<Vec<f64>> = h
            .iter()
            .zip(&attn_out)
            .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| x + y).collect())
            .collect();
        let mut h1 = Vec::with_capacity(n);
        let mut ln1_caches = Vec::with_capacity(n);
        for x in &ln1_in {
            let (y, c) = layer.ln1.forward(x);
            h1.push(y);
            ln1_caches.push(c);
        }

        let z_ff: Vec<Vec<f64>> = h1.iter().map(|x| layer.ff1.forward(x)).collect();
        let a_ff: Vec<Vec<f64>> = z_ff
            .iter()
            .map(|z| z.iter().map(|&x| gelu(x)).collect())
            .collect();
        let ff_out: Vec<Vec<f64>> = a_ff.iter().map(|a| layer.ff2.forward(a)).collect();

        let mut out = Vec::with_capacity(n);
        let mut ln2_caches = Vec::with_capacity(n);
        for (x, f) in h1.iter().zip(&ff_out) {
            let sum: Vec<f64> = x.iter().zip(f).map(|(&a, &b)| a + b).collect();
            let (y, c) = layer.ln2.forward(&sum);
            out.push(y);
            ln2_caches.push(c);
        }

        (
            out,
            LayerCache {
                input: h.to_vec(),
                q,
                k,
                v,
                attn,
                ctx,
                ln1: ln1_caches,
                h1,
                z_ff,
                a_ff,
                ln2: ln2_caches,
            },
        )
    }

    pub fn backward(&self, cache: &TransformerCache, dout: &[f64], grads: &mut TransformerParams) {
        let d = self.dim;
        // pooler tanh
        let dpre: Vec<f64> = dout
            .iter()
            .zip(&cache.pre_tanh)
            .map(|(&g, &z)| {
                let t = z.tanh();
                g * (1.0 - t * t)
            })
            .collect();
        let dfirst = self.pooler.backward(&cache.first, &dpre, &mut grads.pooler);

        let n = cache.ids.len();
        let mut dh: Vec<Vec<f64>> = vec![vec![0.0; d]; n];
        dh[0] = dfirst;

        for (layer, lcache, lgrads) in itertools_rev(&self.layers, &cache.layers, &mut grads.layers)
        {
            dh = self.layer_backward(layer, lcache, &dh, lgrads);
        }

        for (pos, &id) in cache.ids.iter().enumerate() {
            let trow = &mut grads.tok_emb[id * d..(id + 1) * d];
            for (g, &x) in trow.iter_mut().zip(&dh[pos]) {
                *g += x;
            }
            let prow = &mut grads.pos_emb[pos * d..(pos + 1) * d];
            for (g, &x) in prow.iter_mut().zip(&dh[pos]) {
                *g += x;
            }
        }
    }

    fn layer_backward(
        &self,
        layer: &TransformerLayer,
        cache: &LayerCache,
        dout: &[Vec<f64>],
        grads: &mut TransformerLayer,
    ) -> Vec<Vec<f64>> {
        let n = dout.len();
        let d = self.dim;
        let dh_head = d / self.heads;
        let scale = 1.0 / (dh_head as f64).sqrt();

        // ln2 and the residual around the feed-forward block
        let mut dh1 = vec![vec![0.0; d]; n];
        let mut dff_out = vec![vec![0.0; d]; n];
        for i in 0..n {
            let dsum = layer.ln2.backward(&cache.ln2[i], &dout[i], &mut grads.ln2);
            for t in 0..d {
                dh1[i][t] += dsum[t];
                dff_out[i][t] = dsum[t];
            }
        }

        // feed-forward
        for i in 0..n {
            let da = layer.ff2.backward(&cache.a_ff[i], &dff_out[i], &mut grads.ff2);
            let dz: Vec<f64> = da
                .iter()
                .zip(&cache.z_ff[i])
                .map(|(&g, &z)| g * gelu_grad(z))
                .collect();
            let dx = layer.ff1.backward(&cache.h1[i], &dz, &mut grads.ff1);
            for t in 0..d {
                dh1[i][t] += dx[t];
            }
        }

        // ln1 and the residual around attention
        let mut dinput = vec![vec![0.0; d]; n];
        let mut dattn_out = vec![vec![0.0; d]; n];
        for i in 0..n {
            let dsum = layer.ln1.backward(&cache.ln1[i], &dh1[i], &mut grads.ln1);
            for t in 0..d {
                dinput[i][t] += dsum[t];
                dattn_out[i][t] = dsum[t];
            }
        }

        // output projection
        let mut dctx = vec![vec![0.0; d]; n];
        for i in 0..n {
            let dc = layer.wo.backward(&cache.ctx[i], &dattn_out[i], &mut grads.wo);
            dctx[i] = dc;
        }

        // attention
        let mut dq = vec![vec![0.0; d]; n];
        let mut dk = vec![vec![0.0; d]; n];
        let mut dv = vec![vec![0.0; d]; n];
        for head in 0..self.heads {
            let lo = head * dh_head;
            for i in 0..n {
                let weights = &cache.attn[head][i];
                // dL/da_ij and dv
                let mut da = vec![0.0; n];
                for j in 0..n {
                    let mut dot = 0.0;
                    for t in 0..dh_head {
                        dot += dctx[i][lo + t] * cache.v[j][lo + t];
                        dv[j][lo + t] += weights[j] * dctx[i][lo + t];
                    }
                    da[j] = dot;
                }
                // softmax backward
                let inner: f64 = weights.iter().zip(&da).map(|(&w, &g)| w * g).sum();
                for j in 0..n {
                    let ds = weights[j] * (da[j] - inner);
                    for t in 0..dh_head {
                        dq[i][lo + t] += ds * cache.k[j][lo + t] * scale;
                        dk[j][lo + t] += ds * cache.q[i][lo + t] * scale;
                    }
                }
            }
        }

        // q/k/v projections
        for i in 0..n {
            let dx = layer.wq.backward(&cache.input[i], &dq[i], &mut grads.wq);
            for t in 0..d {
                dinput[i][t] += dx[t];
            }
            let dx = layer.wk.backward(&cache.input[i], &dk[i], &mut grads.wk);
            for t in 0..d {
                dinput[i][t] += dx[t];
            }
            let dx = layer.wv.backward(&cache.input[i], &dv[i], &mut grads.wv);
            for t in 0..d {
                dinput[i][t] += dx[t];
            }
        }

        dinput
    }
}

/// Zips layers, caches and grads in reverse without fighting the borrow
/// checker inside the loop body.
fn itertools_rev<'a>(
    layers: &'a [TransformerLayer],
    caches: &'a [LayerCache],
    grads: &'a mut [TransformerLayer],
) -> impl Iterator<Item = (&'a TransformerLayer, &'a LayerCache, &'a mut TransformerLayer)> {
    layers
        .iter()
        .rev()
        .zip(caches.iter().rev())
        .zip(grads.iter_mut().rev())
        .map(|((l, c), g)| (l, c, g))
}

impl ParamVector for TransformerParams {
    fn param_count(&self) -> usize {
        self.tok_emb.len()
            + self.pos_emb.len()
            + self.layers.iter().map(|l| l.param_count()).sum::<usize>()
            + self.pooler.param_count()
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.tok_emb);
        out.extend_from_slice(&self.pos_emb);
        for l in &self.layers {
            l.write_flat(out);
        }
        self.pooler.write_flat(out);
    }

    fn read_flat(&mut self, src: &[f64], pos: &mut usize) {
        let nt = self.tok_emb.len();
        self.tok_emb.copy_from_slice(&src[*pos..*pos + nt]);
        *pos += nt;
        let np = self.pos_emb.len();
        self.pos_emb.copy_from_slice(&src[*pos..*pos + np]);
        *pos += np;
        for l in self.layers.iter_mut() {
            l.read_flat(src, pos);
        }
        self.pooler.read_flat(src, pos);
    }
}
