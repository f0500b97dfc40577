//! Adversarial adaptation of the target encoder: the discriminator game
//! plus the KL-based encoder measurer that keeps the target encoder close
//! to the source encoder on source inputs.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::PlatformDataset;
use crate::encoder::{Encoder, EncoderCache};
use crate::error::{Error, Result};
use crate::heads::{Classifier, Discriminator};
use crate::nn::{clamped_ln, kl_divergence, sigmoid, softmax, zeroed, Adam, ParamVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub batch_size: usize,
    pub encoder_lr: f64,
    pub head_lr: f64,
    pub epochs: usize,
    /// Weight of the encoder-measurer KL term; zero disables it.
    pub kl_weight: f64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            batch_size: 16,
            encoder_lr: 2e-5,
            head_lr: 1e-3,
            epochs: 4,
            kl_weight: 1.0,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        if self.encoder_lr <= 0.0 || self.head_lr <= 0.0 {
            return Err(Error::InvalidConfig("learning rates must be positive".into()));
        }
        if self.kl_weight < 0.0 {
            return Err(Error::InvalidConfig("kl_weight must be non-negative".into()));
        }
        Ok(())
    }
}

/// One row of the adaptation loss trace. Values are measured after the
/// updates of that step, so the trace reflects the state the step produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub d_loss: f64,
    pub adv_loss: f64,
    pub kl_loss: f64,
}

/// Writes loss traces as CSV: step, d_loss, adv_loss, kl_loss.
pub fn write_traces_csv(traces: &[TraceRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    })?;
    w.write_record(["step", "d_loss", "adv_loss", "kl_loss"])
        .and_then(|_| {
            for t in traces {
                w.write_record([
                    t.step.to_string(),
                    format!("{:.6}", t.d_loss),
                    format!("{:.6}", t.adv_loss),
                    format!("{:.6}", t.kl_loss),
                ])?;
            }
            w.flush().map_err(csv::Error::from)
        })
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e),
        })
}

#[derive(Debug, Clone)]
pub struct AdaptationState {
    pub source: Encoder,
    pub target: Encoder,
    pub discriminator: Discriminator,
    pub step: usize,
    pub traces: Vec<TraceRow>,
    opt_discriminator: Option<Adam>,
    opt_target: Option<Adam>,
}

impl AdaptationState {
    /// `target` must be initialized from `source`; `source` stays frozen
    /// for the whole adaptation.
    pub fn new(source: Encoder, target: Encoder, discriminator: Discriminator) -> Result<Self> {
        if source.config != target.config {
            return Err(Error::ConfigMismatch);
        }
        if discriminator.input_dim() != source.embedding_dim() {
            return Err(Error::DimensionMismatch {
                expected: source.embedding_dim(),
                got: discriminator.input_dim(),
            });
        }
        Ok(AdaptationState {
            source,
            target,
            discriminator,
            step: 0,
            traces: Vec::new(),
            opt_discriminator: None,
            opt_target: None,
        })
    }
}

/// Binary cross-entropy of the discriminator on precomputed embeddings:
/// mean of -log D(source) plus mean of -log(1 - D(target)).
pub fn discriminator_loss_on(
    discriminator: &Discriminator,
    source_embeddings: &[Vec<f64>],
    target_embeddings: &[Vec<f64>],
) -> Result<f64> {
    if source_embeddings.is_empty() || target_embeddings.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut loss = 0.0;
    for v in source_embeddings {
        loss += -clamped_ln(discriminator.discriminate(v)?) / source_embeddings.len() as f64;
    }
    for v in target_embeddings {
        loss += -clamped_ln(1.0 - discriminator.discriminate(v)?) / target_embeddings.len() as f64;
    }
    Ok(loss)
}

/// Discriminator loss over text batches: source texts go through the source
/// encoder, target texts through the target encoder.
pub fn discriminator_loss(
    discriminator: &Discriminator,
    source_encoder: &Encoder,
    target_encoder: &Encoder,
    source_batch: &[&str],
    target_batch: &[&str],
) -> Result<f64> {
    let src = encode_batch(source_encoder, source_batch)?;
    let tgt = encode_batch(target_encoder, target_batch)?;
    discriminator_loss_on(discriminator, &src, &tgt)
}

/// KL divergence between softmax-normalized batch-mean representations of
/// the two encoders over the same source inputs. Zero exactly when the
/// target encoder equals the source encoder.
pub fn encoder_measure_loss(
    source_encoder: &Encoder,
    target_encoder: &Encoder,
    source_batch: &[&str],
) -> Result<f64> {
    if source_batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if source_encoder.config != target_encoder.config {
        return Err(Error::ConfigMismatch);
    }
    let mean_s = mean_output(source_encoder, source_batch)?;
    let mean_t = mean_output(target_encoder, source_batch)?;
    let p = softmax(&mean_s);
    let q = softmax(&mean_t);
    Ok(kl_divergence(&p, &q))
}

/// Inverted-label objective for the target encoder: mean of
/// -log D(M_T(x_t)); small when the discriminator mistakes target for
/// source.
pub fn adversarial_encoder_loss(
    discriminator: &Discriminator,
    target_encoder: &Encoder,
    target_batch: &[&str],
) -> Result<f64> {
    if target_batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut loss = 0.0;
    for text in target_batch {
        let emb = target_encoder.encode(text)?;
        loss += -clamped_ln(discriminator.discriminate(&emb)?) / target_batch.len() as f64;
    }
    Ok(loss)
}

fn encode_batch(encoder: &Encoder, batch: &[&str]) -> Result<Vec<Vec<f64>>> {
    batch.iter().map(|t| encoder.encode(t)).collect()
}

fn mean_output(encoder: &Encoder, batch: &[&str]) -> Result<Vec<f64>> {
    let mut mean = vec![0.0; encoder.embedding_dim()];
    for text in batch {
        let out = encoder.encode(text)?;
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::NanLoss { epoch: 0, step: 0 });
        }
        for (m, o) in mean.iter_mut().zip(&out) {
            *m += o / batch.len() as f64;
        }
    }
    Ok(mean)
}

/// One discriminator update: minimize the batch BCE with both encoders
/// frozen.
fn discriminator_step(
    state: &mut AdaptationState,
    source_batch: &[&str],
    target_batch: &[&str],
) -> Result<f64> {
    let src = encode_batch(&state.source, source_batch)?;
    let tgt = encode_batch(&state.target, target_batch)?;
    let mut grads = zeroed(&state.discriminator);
    let mut loss = 0.0;
    for v in &src {
        let (logit, cache) = state.discriminator.logit(v)?;
        let p = sigmoid(logit);
        loss += -clamped_ln(p) / src.len() as f64;
        let dlogit = (p - 1.0) / src.len() as f64;
        state.discriminator.backward(&cache, dlogit, &mut grads);
    }
    for v in &tgt {
        let (logit, cache) = state.discriminator.logit(v)?;
        let p = sigmoid(logit);
        loss += -clamped_ln(1.0 - p) / tgt.len() as f64;
        let dlogit = p / tgt.len() as f64;
        state.discriminator.backward(&cache, dlogit, &mut grads);
    }
    let opt = state.opt_discriminator.as_mut().expect("optimizer initialized");
    opt.step(&mut state.discriminator, &grads);
    Ok(loss)
}

/// One target-encoder update: minimize adversarial loss plus the weighted
/// measurer KL, with the discriminator and source encoder frozen.
fn target_encoder_step(
    state: &mut AdaptationState,
    source_batch: &[&str],
    target_batch: &[&str],
    kl_weight: f64,
) -> Result<(f64, f64)> {
    let mut grads = zeroed(&state.target.params);
    let mut adv_loss = 0.0;

    // adversarial term over the target batch
    for text in target_batch {
        let (emb, enc_cache) = state.target.forward(text)?;
        let (logit, d_cache) = state.discriminator.logit(&emb)?;
        let p = sigmoid(logit);
        adv_loss += -clamped_ln(p) / target_batch.len() as f64;
        let dlogit = -(1.0 - p) / target_batch.len() as f64;
        let mut d_sink = zeroed(&state.discriminator);
        let demb = state.discriminator.backward(&d_cache, dlogit, &mut d_sink);
        state.target.backward(&enc_cache, &demb, &mut grads);
    }

    // measurer term over the source batch
    let mut kl_loss = 0.0;
    if kl_weight > 0.0 {
        let mean_s = mean_output(&state.source, source_batch)?;
        let mut caches: Vec<EncoderCache> = Vec::with_capacity(source_batch.len());
        let mut mean_t = vec![0.0; state.target.embedding_dim()];
        for text in source_batch {
            let (out, cache) = state.target.forward(text)?;
            for (m, o) in mean_t.iter_mut().zip(&out) {
                *m += o / source_batch.len() as f64;
            }
            caches.push(cache);
        }
        let p = softmax(&mean_s);
        let q = softmax(&mean_t);
        kl_loss = kl_divergence(&p, &q);
        // d KL / d mean_t = q - p
        let dmean: Vec<f64> = q
            .iter()
            .zip(&p)
            .map(|(&qi, &pi)| kl_weight * (qi - pi) / source_batch.len() as f64)
            .collect();
        for cache in &caches {
            state.target.backward(cache, &dmean, &mut grads);
        }
    }

    let opt = state.opt_target.as_mut().expect("optimizer initialized");
    opt.step(&mut state.target.params, &grads);
    Ok((adv_loss, kl_loss))
}

/// Alternating adversarial adaptation: per batch, one discriminator update
/// followed by one target-encoder update. The source encoder never changes.
pub fn adapt_target(
    mut state: AdaptationState,
    source_data: &PlatformDataset,
    target_data: &PlatformDataset,
    hp: &Hyperparams,
) -> Result<AdaptationState> {
    hp.validate()?;
    if hp.epochs == 0 {
        return Ok(state);
    }
    if source_data.is_empty() || target_data.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if state.opt_discriminator.is_none() {
        state.opt_discriminator = Some(Adam::new(hp.head_lr, state.discriminator.param_count()));
        state.opt_target = Some(Adam::new(hp.encoder_lr, state.target.param_count()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);

    for epoch in 0..hp.epochs {
        let mut src_order: Vec<usize> = (0..source_data.len()).collect();
        let mut tgt_order: Vec<usize> = (0..target_data.len()).collect();
        src_order.shuffle(&mut rng);
        tgt_order.shuffle(&mut rng);
        let n_batches = (src_order.len() / hp.batch_size)
            .min(tgt_order.len() / hp.batch_size)
            .max(1);

        for b in 0..n_batches {
            let take = |order: &[usize], data: &PlatformDataset| -> Vec<usize> {
                let lo = (b * hp.batch_size).min(order.len());
                let hi = ((b + 1) * hp.batch_size).min(order.len().max(lo + 1)).min(order.len());
                if lo >= hi {
                    vec![order[order.len() - 1]]
                } else {
                    order[lo..hi].to_vec()
                }
                .into_iter()
                .map(|i| i.min(data.len() - 1))
                .collect()
            };
            let src_idx = take(&src_order, source_data);
            let tgt_idx = take(&tgt_order, target_data);
            let src_batch: Vec<&str> = src_idx
                .iter()
                .map(|&i| source_data.records[i].text.as_str())
                .collect();
            let tgt_batch: Vec<&str> = tgt_idx
                .iter()
                .map(|&i| target_data.records[i].text.as_str())
                .collect();

            let _ = discriminator_step(&mut state, &src_batch, &tgt_batch)?;
            let _ = target_encoder_step(&mut state, &src_batch, &tgt_batch, hp.kl_weight)?;

            // post-update measurements so the trace reflects this step's result
            let d_loss = discriminator_loss(
                &state.discriminator,
                &state.source,
                &state.target,
                &src_batch,
                &tgt_batch,
            )?;
            let adv_loss =
                adversarial_encoder_loss(&state.discriminator, &state.target, &tgt_batch)?;
            let kl_loss = if hp.kl_weight > 0.0 {
                encoder_measure_loss(&state.source, &state.target, &src_batch)?
            } else {
                0.0
            };
            if !(d_loss.is_finite() && adv_loss.is_finite() && kl_loss.is_finite()) {
                return Err(Error::NanLoss {
                    epoch,
                    step: state.step,
                });
            }
            state.traces.push(TraceRow {
                step: state.step,
                d_loss,
                adv_loss,
                kl_loss,
            });
            state.step += 1;
        }
    }
    Ok(state)
}

/// Predicted labels for target records: argmax of the frozen source
/// classifier over target-encoder embeddings, ties broken toward adult (0).
pub fn predict_target(
    target_encoder: &Encoder,
    classifier: &Classifier,
    target_data: &PlatformDataset,
) -> Result<Vec<u8>> {
    target_data
        .records
        .iter()
        .map(|r| {
            let p = classifier.classify(&target_encoder.encode(&r.text)?)?;
            Ok(if p[1] > p[0] { 1 } else { 0 })
        })
        .collect()
}
