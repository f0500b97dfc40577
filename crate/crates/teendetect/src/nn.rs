//! Small dense-network building blocks: affine layers, activations, Adam,
//! and a flat parameter-vector view used by the optimizer and by the
//! finite-difference checks in the test suite.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Floor used inside every `-log` term so losses stay finite.
pub const LOG_CLAMP: f64 = 1e-12;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn clamped_ln(x: f64) -> f64 {
    x.max(LOG_CLAMP).ln()
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// KL(p || q) in nats over two discrete distributions.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&pi, &qi)| {
            if pi <= 0.0 {
                0.0
            } else {
                pi * (clamped_ln(pi) - clamped_ln(qi))
            }
        })
        .sum()
}

/// FNV-1a 64-bit hash, used for token bucketing and content fingerprints.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Lowercased whitespace tokens hashed into `vocab` buckets, truncated to
/// `max_tokens`.
pub fn hash_tokens(text: &str, vocab: usize, max_tokens: usize) -> Vec<usize> {
    text.split_whitespace()
        .take(max_tokens)
        .map(|t| (fnv1a(t.to_lowercase().as_bytes()) % vocab as u64) as usize)
        .collect()
}

/// Anything whose trainable parameters can be copied to and from a flat
/// `f64` slice. The flattening order must be stable; optimizer state and
/// gradient vectors rely on it.
pub trait ParamVector {
    fn param_count(&self) -> usize;
    fn write_flat(&self, out: &mut Vec<f64>);
    fn read_flat(&mut self, src: &[f64], pos: &mut usize);
}

pub fn to_flat<P: ParamVector + ?Sized>(p: &P) -> Vec<f64> {
    let mut out = Vec::with_capacity(p.param_count());
    p.write_flat(&mut out);
    out
}

pub fn from_flat<P: ParamVector + ?Sized>(p: &mut P, src: &[f64]) {
    let mut pos = 0;
    p.read_flat(src, &mut pos);
    debug_assert_eq!(pos, src.len());
}

/// Zeroed clone with the same shape, used to accumulate gradients.
pub fn zeroed<P: ParamVector + Clone>(p: &P) -> P {
    let mut g = p.clone();
    let zeros = vec![0.0; p.param_count()];
    from_flat(&mut g, &zeros);
    g
}

/// Dense affine map `y = W x + b` with row-major weights.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Affine {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Affine {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Affine {
            w: vec![0.0; in_dim * out_dim],
            b: vec![0.0; out_dim],
            in_dim,
            out_dim,
        }
    }

    /// Small uniform init in ±`scale`.
    pub fn uniform(in_dim: usize, out_dim: usize, scale: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut a = Affine::zeros(in_dim, out_dim);
        for w in a.w.iter_mut() {
            *w = rng.random_range(-scale..scale);
        }
        for b in a.b.iter_mut() {
            *b = rng.random_range(-scale..scale);
        }
        a
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_dim);
        let mut y = self.b.clone();
        for (o, yo) in y.iter_mut().enumerate() {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            *yo += row.iter().zip(x).map(|(&w, &xi)| w * xi).sum::<f64>();
        }
        y
    }

    /// Accumulates dL/dW and dL/db into `grad` and returns dL/dx.
    pub fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Affine) -> Vec<f64> {
        debug_assert_eq!(dy.len(), self.out_dim);
        let mut dx = vec![0.0; self.in_dim];
        for (o, &dyo) in dy.iter().enumerate() {
            grad.b[o] += dyo;
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let grow = &mut grad.w[o * self.in_dim..(o + 1) * self.in_dim];
            for i in 0..self.in_dim {
                grow[i] += dyo * x[i];
                dx[i] += dyo * row[i];
            }
        }
        dx
    }
}

impl ParamVector for Affine {
    fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.w);
        out.extend_from_slice(&self.b);
    }

    fn read_flat(&mut self, src: &[f64], pos: &mut usize) {
        let nw = self.w.len();
        self.w.copy_from_slice(&src[*pos..*pos + nw]);
        *pos += nw;
        let nb = self.b.len();
        self.b.copy_from_slice(&src[*pos..*pos + nb]);
        *pos += nb;
    }
}

impl ParamVector for Vec<f64> {
    fn param_count(&self) -> usize {
        self.len()
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self);
    }

    fn read_flat(&mut self, src: &[f64], pos: &mut usize) {
        let n = self.len();
        self.copy_from_slice(&src[*pos..*pos + n]);
        *pos += n;
    }
}

/// Adam over a flat parameter vector.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64, n_params: usize) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn step_flat(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
    }

    /// Flatten, step, copy back.
    pub fn step<P: ParamVector>(&mut self, params: &mut P, grads: &P) {
        let mut flat = to_flat(params);
        let gflat = to_flat(grads);
        self.step_flat(&mut flat, &gflat);
        from_flat(params, &flat);
    }
}
