//! Synthetic corpus generator. Produces labelled platform datasets with a
//! shared age signal plus platform-specific style and noise, so the full
//! pipeline (concentration, source training, adversarial adaptation) can be
//! exercised quickly and deterministically without any real data.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adaptation::{adapt_target, AdaptationState, Hyperparams, TraceRow};
use crate::adaptation::predict_target;
use crate::concentrator::{align_corpus, build_lexicon, default_budget, DEFAULT_CAPACITY};
use crate::corpus::{
    dataset_stats, map_age_to_label, stratified_sample, train_test_split, Platform,
    PlatformDataset, TextRecord,
};
use crate::encoder::{init_target_from_source, train_source_encoder, Encoder, EncoderConfig, Role};
use crate::error::{Error, Result};
use crate::evaluation::macro_f1;
use crate::heads::{Classifier, ClassifierVariant, Discriminator, DEFAULT_DISCRIMINATOR_HIDDEN};

/// Age-marked vocabulary shared by every synthetic platform. The encoder has
/// to pick the label out of these; everything else is distraction.
const TEEN_TOKENS: &[&str] = &[
    "homework", "gamer", "crush", "sleepover", "skate", "detention", "anime", "emoji", "selfie",
    "prom",
];
const ADULT_TOKENS: &[&str] = &[
    "mortgage", "commute", "invoice", "pension", "landlord", "overtime", "casserole", "warranty",
    "networking", "audit",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// Platform name; the dataset is tagged `synthetic:<name>`.
    pub name: String,
    pub n_records: usize,
    /// Fraction of records with a teenager age.
    pub teen_ratio: f64,
    /// Mean token count; actual lengths vary uniformly around it.
    pub avg_tokens: usize,
    /// Fraction of tokens drawn from the age-marked vocabulary.
    pub signal_fraction: f64,
    /// Prefix for this platform's style tokens, which carry no age signal
    /// but make platforms separable for the discriminator.
    pub style_prefix: String,
    /// Size of the platform style vocabulary.
    pub style_vocab: usize,
    /// Prefix and size of a filler vocabulary shared across platforms.
    pub shared_prefix: String,
    pub shared_vocab: usize,
    /// Probability that a non-signal token comes from the shared pool
    /// rather than the platform pool.
    pub shared_rate: f64,
    /// Age skew of the shared filler pool on this platform: probability
    /// that a shared token comes from the writer's age-group half of the
    /// pool. 0.5 is neutral. A skewed platform has an age-correlated filler
    /// style that does not hold on platforms where the skew is 0.5.
    pub style_class_skew: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::InvalidConfig("synthetic name is empty".to_string()));
        }
        if self.n_records == 0 {
            return Err(Error::InvalidConfig(
                "synthetic n_records must be >= 1".to_string(),
            ));
        }
        if !(0.0..=1.0).contains(&self.teen_ratio) {
            return Err(Error::InvalidConfig(format!(
                "teen_ratio {} outside [0, 1]",
                self.teen_ratio
            )));
        }
        if self.avg_tokens < 2 {
            return Err(Error::InvalidConfig(
                "avg_tokens must be >= 2".to_string(),
            ));
        }
        if !(0.0..=1.0).contains(&self.signal_fraction) {
            return Err(Error::InvalidConfig(format!(
                "signal_fraction {} outside [0, 1]",
                self.signal_fraction
            )));
        }
        if self.style_vocab == 0 {
            return Err(Error::InvalidConfig(
                "style_vocab must be >= 1".to_string(),
            ));
        }
        if !(0.0..=1.0).contains(&self.style_class_skew) {
            return Err(Error::InvalidConfig(format!(
                "style_class_skew {} outside [0, 1]",
                self.style_class_skew
            )));
        }
        if !(0.0..=1.0).contains(&self.shared_rate) {
            return Err(Error::InvalidConfig(format!(
                "shared_rate {} outside [0, 1]",
                self.shared_rate
            )));
        }
        if self.shared_rate > 0.0 && self.shared_vocab == 0 {
            return Err(Error::InvalidConfig(
                "shared_vocab must be >= 1 when shared_rate > 0".to_string(),
            ));
        }
        Ok(())
    }
}

/// Generates the dataset described by `spec`. Every record carries an age
/// (13..=19 for teenagers, 20..=50 otherwise) and the label derived from it.
pub fn generate(spec: &SyntheticSpec) -> Result<PlatformDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_teen = (spec.n_records as f64 * spec.teen_ratio).round() as usize;
    let style_tokens: Vec<String> = (0..spec.style_vocab)
        .map(|i| format!("{}{}", spec.style_prefix, i))
        .collect();
    let shared_tokens: Vec<String> = (0..spec.shared_vocab)
        .map(|i| format!("{}{}", spec.shared_prefix, i))
        .collect();
    let platform = Platform::Synthetic(spec.name.clone());

    let lo = (spec.avg_tokens / 2).max(1);
    let hi = spec.avg_tokens + spec.avg_tokens / 2;

    let mut records = Vec::with_capacity(spec.n_records);
    for i in 0..spec.n_records {
        let teen = i < n_teen;
        let age: u32 = if teen {
            rng.random_range(13..=19)
        } else {
            rng.random_range(20..=50)
        };
        let signal: &[&str] = if teen { TEEN_TOKENS } else { ADULT_TOKENS };
        let len = rng.random_range(lo..=hi);
        let mut tokens = Vec::with_capacity(len);
        for _ in 0..len {
            if rng.random_bool(spec.signal_fraction) {
                tokens.push((*signal.choose(&mut rng).unwrap()).to_string());
            } else if spec.shared_rate > 0.0 && rng.random_bool(spec.shared_rate) {
                // each age group favors its own half of the shared pool
                let half = spec.shared_vocab / 2;
                let own_half = rng.random_bool(spec.style_class_skew);
                let pool: &[String] = match (teen, own_half) {
                    (true, true) | (false, false) => &shared_tokens[..half.max(1)],
                    _ => &shared_tokens[half.min(spec.shared_vocab - 1)..],
                };
                tokens.push(pool.choose(&mut rng).unwrap().clone());
            } else {
                tokens.push(style_tokens.choose(&mut rng).unwrap().clone());
            }
        }
        records.push(TextRecord {
            id: format!("{}-{:05}", spec.name, i),
            platform: platform.clone(),
            text: tokens.join(" "),
            age: Some(age),
            label: map_age_to_label(age),
        });
    }
    Ok(PlatformDataset::in_memory(platform, records))
}

/// A source/target pair sized for fast end-to-end runs: a longform platform
/// with diluted signal and a shortform one where the signal is dense. The
/// concentrator budget derived from the shortform side forces the longform
/// texts down to their signal-dense windows.
pub fn default_pair(seed: u64) -> (SyntheticSpec, SyntheticSpec) {
    let longform = SyntheticSpec {
        name: "longform".to_string(),
        n_records: 1000,
        teen_ratio: 0.5,
        avg_tokens: 120,
        signal_fraction: 0.2,
        style_prefix: "blather".to_string(),
        style_vocab: 10,
        shared_prefix: "chatter".to_string(),
        shared_vocab: 30,
        shared_rate: 0.5,
        style_class_skew: 0.7,
        seed,
    };
    let shortform = SyntheticSpec {
        name: "shortform".to_string(),
        n_records: 400,
        teen_ratio: 0.5,
        avg_tokens: 28,
        signal_fraction: 0.5,
        style_prefix: "snip".to_string(),
        style_vocab: 10,
        shared_prefix: "chatter".to_string(),
        shared_vocab: 30,
        shared_rate: 0.5,
        style_class_skew: 0.5,
        seed: seed ^ 0x5eed,
    };
    (longform, shortform)
}

/// Source-training hyperparameters sized for the toy encoder.
pub fn demo_train_hyperparams(seed: u64) -> Hyperparams {
    Hyperparams {
        batch_size: 16,
        encoder_lr: 1e-2,
        head_lr: 1e-2,
        epochs: 5,
        kl_weight: 1.0,
        seed,
    }
}

/// Adaptation hyperparameters for the demo pair: a deliberately gentle
/// adversarial game plus a heavy measurer weight so the target encoder
/// aligns the platforms without drifting off the classifier manifold.
pub fn demo_adapt_hyperparams(seed: u64) -> Hyperparams {
    Hyperparams {
        batch_size: 16,
        encoder_lr: 2e-4,
        head_lr: 2e-4,
        epochs: 18,
        kl_weight: 30_000.0,
        seed,
    }
}

/// Everything the end-to-end demo produces for one seed.
#[derive(Debug, Clone)]
pub struct DemoOutcome {
    /// Held-out discriminator accuracy after adaptation; near 0.5 means
    /// the platforms are aligned.
    pub discriminator_accuracy: f64,
    /// Target macro-F1 of the source-only baseline (raw texts, baseline
    /// head, no adaptation).
    pub baseline_f1: f64,
    /// Target macro-F1 of the full pipeline (concentrator, adaptive head,
    /// adversarial adaptation).
    pub adapted_f1: f64,
    /// Measurer loss recorded at the first and last adaptation step.
    pub kl_first: f64,
    pub kl_last: f64,
    pub traces: Vec<TraceRow>,
}

/// Runs the bundled demo end to end for one seed: 700 labelled source
/// records, no target labels. Deterministic per seed.
pub fn run_demo(seed: u64) -> Result<DemoOutcome> {
    let (long_spec, short_spec) = default_pair(seed);
    let source_full = generate(&long_spec)?;
    let target = generate(&short_spec)?;
    let source = stratified_sample(&source_full, 700.min(source_full.len()), seed)?;
    let labels = target.labels();
    let train_hp = demo_train_hyperparams(seed);

    // source-only baseline
    let mut enc_base = Encoder::new(EncoderConfig::toy(32), Role::Source, seed);
    let mut clf_base = Classifier::new(ClassifierVariant::Baseline, 32, seed ^ 1);
    train_source_encoder(&mut enc_base, &mut clf_base, &source, &train_hp)?;
    let baseline_f1 = macro_f1(&predict_target(&enc_base, &clf_base, &target)?, &labels)?;

    // full pipeline: concentrate, train with the adaptive head, adapt
    let budget = default_budget(&dataset_stats(&target)?);
    let lexicon = build_lexicon(&[], &[&source], DEFAULT_CAPACITY)?;
    let source_c = align_corpus(&source, &lexicon, budget);
    let target_c = align_corpus(&target, &lexicon, budget);
    let mut encoder = Encoder::new(EncoderConfig::toy(32), Role::Source, seed);
    let mut classifier = Classifier::new(ClassifierVariant::Adaptive, 32, seed ^ 1);
    train_source_encoder(&mut encoder, &mut classifier, &source_c, &train_hp)?;

    // hold out a slice of each platform for the discriminator check
    let (src_adapt, src_held) = train_test_split(&source_c, 0.2, seed ^ 3)?;
    let (tgt_adapt, tgt_held) = train_test_split(&target_c, 0.2, seed ^ 4)?;
    let discriminator = Discriminator::new(32, DEFAULT_DISCRIMINATOR_HIDDEN, seed ^ 2);
    let state = AdaptationState::new(
        encoder.clone(),
        init_target_from_source(&encoder),
        discriminator,
    )?;
    let state = adapt_target(state, &src_adapt, &tgt_adapt, &demo_adapt_hyperparams(seed))?;

    let mut correct = 0usize;
    let mut total = 0usize;
    for text in src_held.texts() {
        if state.discriminator.discriminate(&state.source.encode(text)?)? > 0.5 {
            correct += 1;
        }
        total += 1;
    }
    for text in tgt_held.texts() {
        if state.discriminator.discriminate(&state.target.encode(text)?)? <= 0.5 {
            correct += 1;
        }
        total += 1;
    }

    let adapted_f1 = macro_f1(&predict_target(&state.target, &classifier, &target_c)?, &labels)?;
    let kl_first = state.traces.first().map(|t| t.kl_loss).unwrap_or(0.0);
    let kl_last = state.traces.last().map(|t| t.kl_loss).unwrap_or(0.0);
    Ok(DemoOutcome {
        discriminator_accuracy: correct as f64 / total as f64,
        baseline_f1,
        adapted_f1,
        kl_first,
        kl_last,
        traces: state.traces,
    })
}
