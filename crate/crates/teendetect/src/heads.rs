//! Trainable heads on top of sentence embeddings: the platform discriminator
//! and the label classifier (small-dataset adaptive variant plus a plain
//! single-layer baseline).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{relu, sigmoid, softmax, Affine, ParamVector};

pub const DEFAULT_DISCRIMINATOR_HIDDEN: usize = 256;
pub const ADAPTIVE_HIDDEN: usize = 512;
const INIT_SCALE: f64 = 0.05;

/// Two fully-connected layers finished with a sigmoid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discriminator {
    pub l1: Affine,
    pub l2: Affine,
}

#[derive(Debug, Clone)]
pub struct DiscriminatorCache {
    input: Vec<f64>,
    z1: Vec<f64>,
    a1: Vec<f64>,
}

impl Discriminator {
    pub fn new(embedding_dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Discriminator {
            l1: Affine::uniform(embedding_dim, hidden, INIT_SCALE, &mut rng),
            l2: Affine::uniform(hidden, 1, INIT_SCALE, &mut rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.l1.in_dim
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.l1.in_dim {
            return Err(Error::DimensionMismatch {
                expected: self.l1.in_dim,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Pre-sigmoid logit plus the cache needed for backprop.
    pub fn logit(&self, v: &[f64]) -> Result<(f64, DiscriminatorCache)> {
        self.check_dim(v)?;
        let z1 = self.l1.forward(v);
        let a1: Vec<f64> = z1.iter().map(|&z| relu(z)).collect();
        let out = self.l2.forward(&a1);
        Ok((
            out[0],
            DiscriminatorCache {
                input: v.to_vec(),
                z1,
                a1,
            },
        ))
    }

    /// Probability that `v` came from the source encoder, strictly in (0, 1).
    pub fn discriminate(&self, v: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.logit(v)?.0))
    }

    /// Backprop from dL/dlogit; accumulates parameter grads and returns
    /// dL/dinput for losses that flow into the encoder.
    pub fn backward(
        &self,
        cache: &DiscriminatorCache,
        dlogit: f64,
        grads: &mut Discriminator,
    ) -> Vec<f64> {
        let da1 = self.l2.backward(&cache.a1, &[dlogit], &mut grads.l2);
        let dz1: Vec<f64> = da1
            .iter()
            .zip(&cache.z1)
            .map(|(&d, &z)| if z > 0.0 { d } else { 0.0 })
            .collect();
        self.l1.backward(&cache.input, &dz1, &mut grads.l1)
    }
}

impl ParamVector for Discriminator {
    fn param_count(&self) -> usize {
        self.l1.param_count() + self.l2.param_count()
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        self.l1.write_flat(out);
        self.l2.write_flat(out);
    }

    fn read_flat(&mut self, src: &[f64], pos: &mut usize) {
        self.l1.read_flat(src, pos);
        self.l2.read_flat(src, pos);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierVariant {
    Adaptive,
    Baseline,
}

/// Label classifier head. Adaptive: FF-512-ReLU then softmax; baseline: a
/// single affine layer with softmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Classifier {
    Adaptive { l1: Affine, l2: Affine },
    Baseline { l: Affine },
}

#[derive(Debug, Clone)]
pub struct ClassifierCache {
    input: Vec<f64>,
    hidden: Option<(Vec<f64>, Vec<f64>)>, // (z1, a1)
}

impl Classifier {
    pub fn new(variant: ClassifierVariant, embedding_dim: usize, seed: u64) -> Self {
        Self::with_hidden(variant, embedding_dim, ADAPTIVE_HIDDEN, seed)
    }

    /// Adaptive variant with a custom hidden width (tests use small dims).
    pub fn with_hidden(
        variant: ClassifierVariant,
        embedding_dim: usize,
        hidden: usize,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match variant {
            ClassifierVariant::Adaptive => Classifier::Adaptive {
                l1: Affine::uniform(embedding_dim, hidden, INIT_SCALE, &mut rng),
                l2: Affine::uniform(hidden, 2, INIT_SCALE, &mut rng),
            },
            ClassifierVariant::Baseline => Classifier::Baseline {
                l: Affine::uniform(embedding_dim, 2, INIT_SCALE, &mut rng),
            },
        }
    }

    pub fn variant(&self) -> ClassifierVariant {
        match self {
            Classifier::Adaptive { .. } => ClassifierVariant::Adaptive,
            Classifier::Baseline { .. } => ClassifierVariant::Baseline,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Classifier::Adaptive { l1, .. } => l1.in_dim,
            Classifier::Baseline { l } => l.in_dim,
        }
    }

    pub fn hidden_dim(&self) -> Option<usize> {
        match self {
            Classifier::Adaptive { l1, .. } => Some(l1.out_dim),
            Classifier::Baseline { .. } => None,
        }
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Raw class logits plus the backprop cache.
    pub fn logits(&self, v: &[f64]) -> Result<([f64; 2], ClassifierCache)> {
        self.check_dim(v)?;
        match self {
            Classifier::Adaptive { l1, l2 } => {
                let z1 = l1.forward(v);
                let a1: Vec<f64> = z1.iter().map(|&z| relu(z)).collect();
                let out = l2.forward(&a1);
                Ok((
                    [out[0], out[1]],
                    ClassifierCache {
                        input: v.to_vec(),
                        hidden: Some((z1, a1)),
                    },
                ))
            }
            Classifier::Baseline { l } => {
                let out = l.forward(v);
                Ok((
                    [out[0], out[1]],
                    ClassifierCache {
                        input: v.to_vec(),
                        hidden: None,
                    },
                ))
            }
        }
    }

    /// Probability pair (adult, teenager) summing to 1.
    pub fn classify(&self, v: &[f64]) -> Result<[f64; 2]> {
        let (logits, _) = self.logits(v)?;
        let p = softmax(&logits);
        Ok([p[0], p[1]])
    }

    /// Backprop from dL/dlogits; accumulates parameter grads and returns
    /// dL/dinput.
    pub fn backward(
        &self,
        cache: &ClassifierCache,
        dlogits: &[f64; 2],
        grads: &mut Classifier,
    ) -> Vec<f64> {
        match (self, grads) {
            (Classifier::Adaptive { l1, l2 }, Classifier::Adaptive { l1: g1, l2: g2 }) => {
                let (z1, a1) = cache.hidden.as_ref().expect("adaptive cache");
                let da1 = l2.backward(a1, dlogits, g2);
                let dz1: Vec<f64> = da1
                    .iter()
                    .zip(z1)
                    .map(|(&d, &z)| if z > 0.0 { d } else { 0.0 })
                    .collect();
                l1.backward(&cache.input, &dz1, g1)
            }
            (Classifier::Baseline { l }, Classifier::Baseline { l: g }) => {
                l.backward(&cache.input, dlogits, g)
            }
            _ => panic!("classifier/grad variant mismatch"),
        }
    }
}

impl ParamVector for Classifier {
    fn param_count(&self) -> usize {
        match self {
            Classifier::Adaptive { l1, l2 } => l1.param_count() + l2.param_count(),
            Classifier::Baseline { l } => l.param_count(),
        }
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        match self {
            Classifier::Adaptive { l1, l2 } => {
                l1.write_flat(out);
                l2.write_flat(out);
            }
            Classifier::Baseline { l } => l.write_flat(out),
        }
    }

    fn read_flat(&mut self, src: &[f64], pos: &mut usize) {
        match self {
            Classifier::Adaptive { l1, l2 } => {
                l1.read_flat(src, pos);
                l2.read_flat(src, pos);
            }
            Classifier::Baseline { l } => l.read_flat(src, pos),
        }
    }
}

/// Sidecar manifest stored next to head checkpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeadManifest {
    pub kind: String,
    pub variant: Option<ClassifierVariant>,
    pub dims: Vec<usize>,
    pub seed: u64,
}
