//! Sentence encoder abstraction: maps a token sequence to a fixed-dimension
//! vector. Two backends share one interface: a transformer for real runs
//! and a small embedding-bag MLP for fast, fully tested experiments. Also
//! hosts supervised source training and source-to-target initialization.

pub mod toy;
pub mod transformer;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adaptation::Hyperparams;
use crate::corpus::PlatformDataset;
use crate::error::{Error, Result};
use crate::heads::Classifier;
use crate::nn::{self, clamped_ln, softmax, Adam, ParamVector};

use toy::{ToyCache, ToyParams};
use transformer::{TransformerCache, TransformerParams};

pub const TRANSFORMER_DIM: usize = 768;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendKind {
    Toy {
        hidden: usize,
        vocab: usize,
    },
    Transformer {
        layers: usize,
        heads: usize,
        ff: usize,
        vocab: usize,
    },
}

impl BackendKind {
    pub fn name(&self) -> &'static str {
        match self {
            BackendKind::Toy { .. } => "toy",
            BackendKind::Transformer { .. } => "pretrained_transformer",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub embedding_dim: usize,
    pub max_tokens: usize,
    pub backend: BackendKind,
}

impl EncoderConfig {
    /// Toy backend config used by tests and the synthetic experiment.
    pub fn toy(embedding_dim: usize) -> Self {
        EncoderConfig {
            embedding_dim,
            max_tokens: 512,
            backend: BackendKind::Toy {
                hidden: 2 * embedding_dim,
                vocab: 1024,
            },
        }
    }

    /// 768-dimensional transformer config.
    pub fn transformer() -> Self {
        EncoderConfig {
            embedding_dim: TRANSFORMER_DIM,
            max_tokens: 512,
            backend: BackendKind::Transformer {
                layers: 2,
                heads: 12,
                ff: 3072,
                vocab: 2048,
            },
        }
    }

    fn vocab(&self) -> usize {
        match self.backend {
            BackendKind::Toy { vocab, .. } => vocab,
            BackendKind::Transformer { vocab, .. } => vocab,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Source,
    Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EncoderParams {
    Toy(ToyParams),
    Transformer(TransformerParams),
}

#[derive(Debug, Clone)]
pub enum EncoderCache {
    Toy(ToyCache),
    Transformer(TransformerCache),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub config: EncoderConfig,
    pub role: Role,
    pub seed: u64,
    pub params: EncoderParams,
}

impl Encoder {
    pub fn new(config: EncoderConfig, role: Role, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = match config.backend {
            BackendKind::Toy { hidden, vocab } => EncoderParams::Toy(ToyParams::new(
                config.embedding_dim,
                hidden,
                vocab,
                &mut rng,
            )),
            BackendKind::Transformer {
                layers,
                heads,
                ff,
                vocab,
            } => EncoderParams::Transformer(TransformerParams::new(
                config.embedding_dim,
                heads,
                ff,
                layers,
                vocab,
                config.max_tokens,
                &mut rng,
            )),
        };
        Encoder {
            config,
            role,
            seed,
            params,
        }
    }

    pub fn embedding_dim(&self) -> usize {
        self.config.embedding_dim
    }

    fn token_ids(&self, text: &str) -> Result<Vec<usize>> {
        let ids = nn::hash_tokens(text, self.config.vocab(), self.config.max_tokens);
        if ids.is_empty() {
            return Err(Error::EmptyTokenization);
        }
        Ok(ids)
    }

    /// Forward pass keeping the intermediates needed for backprop.
    pub fn forward(&self, text: &str) -> Result<(Vec<f64>, EncoderCache)> {
        let ids = self.token_ids(text)?;
        Ok(match &self.params {
            EncoderParams::Toy(p) => {
                let (out, cache) = p.forward(&ids);
                (out, EncoderCache::Toy(cache))
            }
            EncoderParams::Transformer(p) => {
                let (out, cache) = p.forward(&ids);
                (out, EncoderCache::Transformer(cache))
            }
        })
    }

    /// Inference-mode embedding.
    pub fn encode(&self, text: &str) -> Result<Vec<f64>> {
        Ok(self.forward(text)?.0)
    }

    /// Accumulates parameter gradients from dL/doutput.
    pub fn backward(&self, cache: &EncoderCache, dout: &[f64], grads: &mut EncoderParams) {
        match (&self.params, cache, grads) {
            (EncoderParams::Toy(p), EncoderCache::Toy(c), EncoderParams::Toy(g)) => {
                p.backward(c, dout, g)
            }
            (
                EncoderParams::Transformer(p),
                EncoderCache::Transformer(c),
                EncoderParams::Transformer(g),
            ) => p.backward(c, dout, g),
            _ => panic!("encoder/cache/grad backend mismatch"),
        }
    }

    pub fn param_count(&self) -> usize {
        self.params.param_count()
    }
}

impl ParamVector for EncoderParams {
    fn param_count(&self) -> usize {
        match self {
            EncoderParams::Toy(p) => p.param_count(),
            EncoderParams::Transformer(p) => p.param_count(),
        }
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        match self {
            EncoderParams::Toy(p) => p.write_flat(out),
            EncoderParams::Transformer(p) => p.write_flat(out),
        }
    }

    fn read_flat(&mut self, src: &[f64], pos: &mut usize) {
        match self {
            EncoderParams::Toy(p) => p.read_flat(src, pos),
            EncoderParams::Transformer(p) => p.read_flat(src, pos),
        }
    }
}

/// Independent trainable copy of the source parameters, tagged as target.
pub fn init_target_from_source(source: &Encoder) -> Encoder {
    let mut target = source.clone();
    target.role = Role::Target;
    target
}

/// Sidecar manifest written next to encoder checkpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EncoderManifest {
    pub backend: String,
    pub embedding_dim: usize,
    pub max_tokens: usize,
    pub role: Role,
    pub seed: u64,
}

pub fn save_checkpoint(encoder: &Encoder, path: &Path) -> Result<()> {
    let json = serde_json::to_string(encoder).expect("encoder serializes");
    std::fs::write(path, json).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let manifest = EncoderManifest {
        backend: encoder.config.backend.name().to_string(),
        embedding_dim: encoder.config.embedding_dim,
        max_tokens: encoder.config.max_tokens,
        role: encoder.role,
        seed: encoder.seed,
    };
    let manifest_path = path.with_extension("manifest.json");
    std::fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )
    .map_err(|source| Error::Io {
        path: manifest_path,
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Encoder> {
    let content = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&content).map_err(|e| Error::Checkpoint {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Mean cross-entropy of the classifier over encoder outputs, with the
/// gradient path into both the head and the encoder. Returns per-epoch mean
/// losses; zero epochs leave all parameters untouched.
pub fn train_source_encoder(
    encoder: &mut Encoder,
    classifier: &mut Classifier,
    data: &PlatformDataset,
    hp: &Hyperparams,
) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("training data".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut opt_enc = Adam::new(hp.encoder_lr, encoder.param_count());
    let mut opt_head = Adam::new(hp.head_lr, classifier.param_count());
    let mut curve = Vec::with_capacity(hp.epochs);

    for epoch in 0..hp.epochs {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;

        for (step, chunk) in order.chunks(hp.batch_size.max(1)).enumerate() {
            let mut enc_grads = nn::zeroed(&encoder.params);
            let mut head_grads = nn::zeroed(&*classifier);
            let mut batch_loss = 0.0;
            let inv = 1.0 / chunk.len() as f64;

            for &idx in chunk {
                let record = &data.records[idx];
                let (emb, enc_cache) = encoder.forward(&record.text)?;
                let (logits, head_cache) = classifier.logits(&emb)?;
                let probs = softmax(&logits);
                let y = record.label as usize;
                batch_loss += -clamped_ln(probs[y]) * inv;

                let mut dlogits = [probs[0] * inv, probs[1] * inv];
                dlogits[y] -= inv;
                let demb = classifier.backward(&head_cache, &dlogits, &mut head_grads);
                encoder.backward(&enc_cache, &demb, &mut enc_grads);
            }

            if !batch_loss.is_finite() {
                return Err(Error::NanLoss { epoch, step });
            }
            opt_enc.step(&mut encoder.params, &enc_grads);
            opt_head.step(classifier, &head_grads);
            epoch_loss += batch_loss;
            batches += 1;
        }
        curve.push(epoch_loss / batches.max(1) as f64);
    }
    Ok(curve)
}

/// Training accuracy of an encoder/classifier pair on labelled data.
pub fn accuracy(encoder: &Encoder, classifier: &Classifier, data: &PlatformDataset) -> Result<f64> {
    let mut correct = 0usize;
    for record in &data.records {
        let p = classifier.classify(&encoder.encode(&record.text)?)?;
        let pred = if p[1] > p[0] { 1 } else { 0 };
        if pred == record.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}
