//! Small trainable encoder: mean-pooled hashed token embeddings followed by
//! a two-layer MLP. Exists so the full training loop and the adversarial
//! dynamics can run in seconds.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{relu, Affine, ParamVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyParams {
    pub embed: Vec<f64>, // vocab x dim, row-major
    pub l1: Affine,      // dim -> hidden
    pub l2: Affine,      // hidden -> dim
    pub vocab: usize,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub struct ToyCache {
    ids: Vec<usize>,
    pooled: Vec<f64>,
    z1: Vec<f64>,
    a1: Vec<f64>,
}

impl ToyParams {
    pub fn new(dim: usize, hidden: usize, vocab: usize, rng: &mut ChaCha8Rng) -> Self {
        let scale = 0.1;
        let mut embed = vec![0.0; vocab * dim];
        for e in embed.iter_mut() {
            *e = rng.random_range(-scale..scale);
        }
        ToyParams {
            embed,
            l1: Affine::uniform(dim, hidden, scale, rng),
            l2: Affine::uniform(hidden, dim, scale, rng),
            vocab,
            dim,
        }
    }

    pub fn forward(&self, ids: &[usize]) -> (Vec<f64>, ToyCache) {
        debug_assert!(!ids.is_empty());
        let mut pooled = vec![0.0; self.dim];
        for &id in ids {
            let row = &self.embed[id * self.dim..(id + 1) * self.dim];
            for (p, &r) in pooled.iter_mut().zip(row) {
                *p += r;
            }
        }
        let inv = 1.0 / ids.len() as f64;
        for p in pooled.iter_mut() {
            *p *= inv;
        }
        let z1 = self.l1.forward(&pooled);
        let a1: Vec<f64> = z1.iter().map(|&z| relu(z)).collect();
        let out = self.l2.forward(&a1);
        (
            out,
            ToyCache {
                ids: ids.to_vec(),
                pooled,
                z1,
                a1,
            },
        )
    }

    pub fn backward(&self, cache: &ToyCache, dout: &[f64], grads: &mut ToyParams) {
        let da1 = self.l2.backward(&cache.a1, dout, &mut grads.l2);
        let dz1: Vec<f64> = da1
            .iter()
            .zip(&cache.z1)
            .map(|(&d, &z)| if z > 0.0 { d } else { 0.0 })
            .collect();
        let dpooled = self.l1.backward(&cache.pooled, &dz1, &mut grads.l1);
        let inv = 1.0 / cache.ids.len() as f64;
        for &id in &cache.ids {
            let row = &mut grads.embed[id * self.dim..(id + 1) * self.dim];
            for (g, &d) in row.iter_mut().zip(&dpooled) {
                *g += d * inv;
            }
        }
    }
}

impl ParamVector for ToyParams {
    fn param_count(&self) -> usize {
        self.embed.len() + self.l1.param_count() + self.l2.param_count()
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.embed);
        self.l1.write_flat(out);
        self.l2.write_flat(out);
    }

    fn read_flat(&mut self, src: &[f64], pos: &mut usize) {
        let n = self.embed.len();
        self.embed.copy_from_slice(&src[*pos..*pos + n]);
        *pos += n;
        self.l1.read_flat(src, pos);
        self.l2.read_flat(src, pos);
    }
}
