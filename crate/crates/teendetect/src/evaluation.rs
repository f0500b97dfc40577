//! Macro-F1 metric, the component toggle system (C, S, A) and the
//! cross-platform / in-platform experiment grids.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adaptation::{adapt_target, predict_target, AdaptationState, Hyperparams};
use crate::concentrator::{align_corpus, build_lexicon, default_budget, DEFAULT_CAPACITY};
use crate::corpus::{
    dataset_stats, stratified_sample, train_test_split, Platform, PlatformDataset,
};
use crate::encoder::{init_target_from_source, train_source_encoder, Encoder, EncoderConfig, Role};
use crate::error::{Error, Result};
use crate::heads::{Classifier, ClassifierVariant, Discriminator, DEFAULT_DISCRIMINATOR_HIDDEN};
use crate::nn::{fnv1a, to_flat};

/// Component toggles: C concentrator, S small-dataset adaptive classifier,
/// A adversarial adaptation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Components {
    pub c: bool,
    pub s: bool,
    pub a: bool,
}

impl Components {
    pub const ALL: Components = Components {
        c: true,
        s: true,
        a: true,
    };
    pub const NONE: Components = Components {
        c: false,
        s: false,
        a: false,
    };

    pub fn new(c: bool, s: bool, a: bool) -> Self {
        Components { c, s, a }
    }

    /// Canonical variant name: "AB_" plus the enabled letters in C, S, A
    /// order; the empty set is the full-data baseline.
    pub fn variant_name(&self) -> String {
        if *self == Components::NONE {
            return "BASELINE".to_string();
        }
        let mut name = String::from("AB_");
        if self.c {
            name.push('C');
        }
        if self.s {
            name.push('S');
        }
        if self.a {
            name.push('A');
        }
        name
    }

    pub fn parse(name: &str) -> Result<Self> {
        if name == "BASELINE" {
            return Ok(Components::NONE);
        }
        let letters = name
            .strip_prefix("AB_")
            .ok_or_else(|| Error::UnknownVariant(name.to_string()))?;
        let mut out = Components::NONE;
        let mut last = 0;
        for ch in letters.chars() {
            let order = match ch {
                'C' => 1,
                'S' => 2,
                'A' => 3,
                _ => return Err(Error::UnknownVariant(name.to_string())),
            };
            if order <= last {
                return Err(Error::UnknownVariant(name.to_string()));
            }
            last = order;
            match ch {
                'C' => out.c = true,
                'S' => out.s = true,
                'A' => out.a = true,
                _ => unreachable!(),
            }
        }
        if out == Components::NONE {
            return Err(Error::UnknownVariant(name.to_string()));
        }
        Ok(out)
    }

    /// The eight subsets in the cross-platform table's column order.
    pub fn cross_platform_variants() -> Vec<Components> {
        vec![
            Components::NONE,
            Components::new(true, true, true),
            Components::new(true, true, false),
            Components::new(false, true, false),
            Components::new(true, false, false),
            Components::new(false, false, true),
            Components::new(true, false, true),
            Components::new(false, true, true),
        ]
    }

    /// The four non-adversarial subsets used in-platform.
    pub fn in_platform_variants() -> Vec<Components> {
        vec![
            Components::NONE,
            Components::new(true, false, false),
            Components::new(false, true, false),
            Components::new(true, true, false),
        ]
    }
}

/// Confusion counts with class 1 (teenager) as positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub r#fn: usize,
    pub tn: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub macro_f1: f64,
    pub class0: ClassScores,
    pub class1: ClassScores,
    pub confusion: Confusion,
}

fn class_scores(tp: usize, fp: usize, r#fn: usize) -> ClassScores {
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + r#fn == 0 {
        0.0
    } else {
        tp as f64 / (tp + r#fn) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassScores {
        precision,
        recall,
        f1,
    }
}

/// Full per-class precision/recall/F1 plus the confusion matrix.
pub fn evaluate(predictions: &[u8], labels: &[u8]) -> Result<EvalMetrics> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut c = Confusion {
        tp: 0,
        fp: 0,
        r#fn: 0,
        tn: 0,
    };
    for (&p, &y) in predictions.iter().zip(labels) {
        match (y, p) {
            (1, 1) => c.tp += 1,
            (0, 1) => c.fp += 1,
            (1, 0) => c.r#fn += 1,
            (0, 0) => c.tn += 1,
            _ => {
                return Err(Error::InvalidConfig(
                    "labels and predictions must be 0 or 1".to_string(),
                ))
            }
        }
    }
    let class1 = class_scores(c.tp, c.fp, c.r#fn);
    let class0 = class_scores(c.tn, c.r#fn, c.fp);
    Ok(EvalMetrics {
        macro_f1: (class0.f1 + class1.f1) / 2.0,
        class0,
        class1,
        confusion: c,
    })
}

/// Unweighted mean of the two per-class F1 scores.
pub fn macro_f1(predictions: &[u8], labels: &[u8]) -> Result<f64> {
    Ok(evaluate(predictions, labels)?.macro_f1)
}

/// Registry of loaded corpora plus the optional external lexicon feeding
/// the concentrator.
#[derive(Debug, Clone, Default)]
pub struct DatasetRegistry {
    datasets: BTreeMap<Platform, PlatformDataset>,
    pub external_lexicon: Vec<(String, f64)>,
}

impl DatasetRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, dataset: PlatformDataset) {
        self.datasets.insert(dataset.platform.clone(), dataset);
    }

    pub fn get(&self, platform: &Platform) -> Result<&PlatformDataset> {
        self.datasets
            .get(platform)
            .ok_or_else(|| Error::MissingCorpus(platform.to_string()))
    }

    pub fn platforms(&self) -> impl Iterator<Item = &Platform> {
        self.datasets.keys()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: Platform,
    pub target: Platform,
    pub components: Components,
    /// Training sample size; None uses the full training pool (baseline).
    pub n_train: Option<usize>,
    pub seed: u64,
    pub hyperparams: Hyperparams,
    /// Hyperparameters for the adversarial phase; None reuses `hyperparams`.
    /// The phases usually want different learning rates: source training can
    /// be aggressive, adaptation must be gentle.
    #[serde(default)]
    pub adapt_hyperparams: Option<Hyperparams>,
    pub encoder: EncoderConfig,
    pub allow_pan13_source: bool,
    /// Test fraction for in-platform runs.
    pub test_fraction: f64,
    /// Keep the adapted target encoder in the result so callers can write
    /// checkpoints. Off by default to keep grid results small.
    #[serde(default)]
    pub keep_target_checkpoint: bool,
}

impl ExperimentConfig {
    pub fn new(source: Platform, target: Platform, components: Components) -> Self {
        ExperimentConfig {
            source,
            target,
            components,
            n_train: Some(700),
            seed: 0,
            hyperparams: Hyperparams::default(),
            adapt_hyperparams: None,
            encoder: EncoderConfig::toy(32),
            allow_pan13_source: false,
            test_fraction: 0.2,
            keep_target_checkpoint: false,
        }
    }

    pub fn variant_name(&self) -> String {
        self.components.variant_name()
    }

    pub fn in_platform(&self) -> bool {
        self.source == self.target
    }
}

/// Stage fingerprints recorded per run so component isolation is checkable:
/// toggling C may only change the preprocessing hash, S only the head
/// architecture, A only the target-encoder hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageFingerprints {
    pub preprocessing: u64,
    pub head_architecture: String,
    pub target_encoder: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub source: Platform,
    pub target: Platform,
    pub variant: String,
    pub seed: u64,
    pub metrics: EvalMetrics,
    pub wall_secs: f64,
    pub fingerprints: StageFingerprints,
    pub train_loss_curve: Vec<f64>,
    pub adaptation_traces: Vec<crate::adaptation::TraceRow>,
    /// Present only when the config asked for it and A was enabled.
    pub target_checkpoint: Option<Encoder>,
}

fn hash_texts(datasets: &[&PlatformDataset]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for ds in datasets {
        for r in &ds.records {
            h ^= fnv1a(r.text.as_bytes());
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}

fn hash_params(encoder: &Encoder) -> u64 {
    let flat = to_flat(&encoder.params);
    let bytes: Vec<u8> = flat.iter().flat_map(|f| f.to_le_bytes()).collect();
    fnv1a(&bytes)
}

/// Runs the full pipeline for one configuration:
/// sample -> [C: align] -> train source encoder and head ([S: adaptive])
/// -> [A: adapt target encoder] -> predict on the target test set.
pub fn run_experiment(
    config: &ExperimentConfig,
    registry: &DatasetRegistry,
) -> Result<ExperimentResult> {
    let start = Instant::now();
    if config.source == Platform::Pan13 && !config.allow_pan13_source {
        return Err(Error::Pan13AsSource);
    }
    config.hyperparams.validate()?;

    let source_full = registry.get(&config.source)?;
    let target_full = registry.get(&config.target)?;

    // training pool and target test set
    let (train_pool, test_set) = if config.in_platform() {
        let (train, test) = train_test_split(source_full, config.test_fraction, config.seed)?;
        (train, test)
    } else {
        // no target labels are used in training, so the whole target
        // dataset is fair test material
        (source_full.clone(), target_full.clone())
    };

    let mut train_set = match config.n_train {
        Some(n) => stratified_sample(&train_pool, n.min(train_pool.len()), config.seed)?,
        None => train_pool,
    };
    let mut test_set = test_set;

    // C: lexicon-based input alignment, budget from the target's length
    if config.components.c {
        let target_stats = dataset_stats(target_full)?;
        let budget = default_budget(&target_stats);
        let lexicon = build_lexicon(
            &registry.external_lexicon,
            &[&train_set],
            DEFAULT_CAPACITY,
        )?;
        train_set = align_corpus(&train_set, &lexicon, budget);
        test_set = align_corpus(&test_set, &lexicon, budget);
    }
    let preprocessing = hash_texts(&[&train_set, &test_set]);

    // S: adaptive head vs plain baseline head
    let variant = if config.components.s {
        ClassifierVariant::Adaptive
    } else {
        ClassifierVariant::Baseline
    };
    let mut source_encoder = Encoder::new(config.encoder.clone(), Role::Source, config.seed);
    let mut classifier = Classifier::new(variant, config.encoder.embedding_dim, config.seed ^ 1);
    let head_architecture = match classifier.hidden_dim() {
        Some(h) => format!("adaptive[{}-{}-2]", config.encoder.embedding_dim, h),
        None => format!("baseline[{}-2]", config.encoder.embedding_dim),
    };
    let train_loss_curve = train_source_encoder(
        &mut source_encoder,
        &mut classifier,
        &train_set,
        &config.hyperparams,
    )?;

    // A: adversarial adaptation; otherwise the target encoder is literally
    // the source encoder
    let (target_encoder, adaptation_traces) = if config.components.a {
        let target = init_target_from_source(&source_encoder);
        let discriminator = Discriminator::new(
            config.encoder.embedding_dim,
            DEFAULT_DISCRIMINATOR_HIDDEN,
            config.seed ^ 2,
        );
        let adapt_hp = config.adapt_hyperparams.as_ref().unwrap_or(&config.hyperparams);
        adapt_hp.validate()?;
        let state = AdaptationState::new(source_encoder.clone(), target, discriminator)?;
        let state = adapt_target(state, &train_set, &test_set, adapt_hp)?;
        (state.target, state.traces)
    } else {
        (source_encoder.clone(), Vec::new())
    };
    let target_hash = hash_params(&target_encoder);
    let target_checkpoint = (config.keep_target_checkpoint && config.components.a)
        .then(|| target_encoder.clone());

    let predictions = predict_target(&target_encoder, &classifier, &test_set)?;
    let metrics = evaluate(&predictions, &test_set.labels())?;

    Ok(ExperimentResult {
        source: config.source.clone(),
        target: config.target.clone(),
        variant: config.variant_name(),
        seed: config.seed,
        metrics,
        wall_secs: start.elapsed().as_secs_f64(),
        fingerprints: StageFingerprints {
            preprocessing,
            head_architecture,
            target_encoder: target_hash,
        },
        train_loss_curve,
        adaptation_traces,
        target_checkpoint,
    })
}

/// The nine source→target pairs of the cross-platform grid; PAN13 appears
/// only as a target.
pub fn default_cross_platform_pairs() -> Vec<(Platform, Platform)> {
    use Platform::*;
    vec![
        (Blogger, Youtube),
        (Blogger, Myspace),
        (Blogger, Pan13),
        (Youtube, Blogger),
        (Youtube, Myspace),
        (Youtube, Pan13),
        (Myspace, Blogger),
        (Myspace, Youtube),
        (Myspace, Pan13),
    ]
}

pub fn default_in_platform_pairs() -> Vec<(Platform, Platform)> {
    use Platform::*;
    vec![
        (Blogger, Blogger),
        (Youtube, Youtube),
        (Myspace, Myspace),
        (Pan13, Pan13),
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridCell {
    pub source: Platform,
    pub target: Platform,
    pub variant: String,
    pub seed: u64,
    pub outcome: std::result::Result<ExperimentResult, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridResult {
    pub pairs: Vec<(Platform, Platform)>,
    pub variants: Vec<String>,
    pub seeds: Vec<u64>,
    pub cells: Vec<GridCell>,
}

impl GridResult {
    /// Median macro-F1 over seeds for one (pair, variant) cell; None when
    /// every seed failed.
    pub fn cell_score(&self, pair: &(Platform, Platform), variant: &str) -> Option<f64> {
        let mut scores: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.source == pair.0 && c.target == pair.1 && c.variant == variant)
            .filter_map(|c| c.outcome.as_ref().ok().map(|r| r.metrics.macro_f1))
            .collect();
        if scores.is_empty() {
            return None;
        }
        scores.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Some(if scores.len() % 2 == 1 {
            scores[scores.len() / 2]
        } else {
            0.5 * (scores[scores.len() / 2 - 1] + scores[scores.len() / 2])
        })
    }

    /// Arithmetic mean of a variant column over all pairs with a score.
    pub fn column_average(&self, variant: &str) -> Option<f64> {
        let scores: Vec<f64> = self
            .pairs
            .iter()
            .filter_map(|p| self.cell_score(p, variant))
            .collect();
        if scores.is_empty() {
            None
        } else {
            Some(scores.iter().sum::<f64>() / scores.len() as f64)
        }
    }

    /// Per-seed results CSV:
    /// source,target,variant,seed,macro_f1,f1_class0,f1_class1,tp,fp,fn,tn,wall_secs
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("source,target,variant,seed,macro_f1,f1_class0,f1_class1,tp,fp,fn,tn,wall_secs\n");
        for cell in &self.cells {
            match &cell.outcome {
                Ok(r) => {
                    let c = &r.metrics.confusion;
                    out.push_str(&format!(
                        "{},{},{},{},{:.6},{:.6},{:.6},{},{},{},{},{:.3}\n",
                        cell.source,
                        cell.target,
                        cell.variant,
                        cell.seed,
                        r.metrics.macro_f1,
                        r.metrics.class0.f1,
                        r.metrics.class1.f1,
                        c.tp,
                        c.fp,
                        c.r#fn,
                        c.tn,
                        r.wall_secs
                    ));
                }
                Err(e) => {
                    out.push_str(&format!(
                        "{},{},{},{},FAILED,,,,,,,{}\n",
                        cell.source,
                        cell.target,
                        cell.variant,
                        cell.seed,
                        e.replace(['\n', ','], " ")
                    ));
                }
            }
        }
        out
    }

    /// Formatted table mirroring the cross-platform results layout, with an
    /// average row of column means.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<22}", "Source->Target"));
        for v in &self.variants {
            out.push_str(&format!("{:>10}", v));
        }
        out.push('\n');
        for pair in &self.pairs {
            out.push_str(&format!("{:<22}", format!("{}->{}", pair.0, pair.1)));
            for v in &self.variants {
                match self.cell_score(pair, v) {
                    Some(f1) => out.push_str(&format!("{:>10.2}", f1)),
                    None => out.push_str(&format!("{:>10}", "failed")),
                }
            }
            out.push('\n');
        }
        out.push_str(&format!("{:<22}", "Average"));
        for v in &self.variants {
            match self.column_average(v) {
                Some(avg) => out.push_str(&format!("{:>10.2}", avg)),
                None => out.push_str(&format!("{:>10}", "-")),
            }
        }
        out.push('\n');
        out
    }
}

/// Re-renders the formatted table from a results CSV produced by `to_csv`,
/// preserving pair and variant order of first appearance. Failed cells
/// contribute no score.
pub fn table_from_csv(csv: &str) -> Result<String> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut variants: Vec<String> = Vec::new();
    let mut scores: BTreeMap<(String, String, String), Vec<f64>> = BTreeMap::new();
    let mut lines = csv.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidConfig("results CSV is empty".into()))?;
    if !header.starts_with("source,target,variant,seed,macro_f1") {
        return Err(Error::InvalidConfig(format!(
            "unrecognized results CSV header: {header:?}"
        )));
    }
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 5 {
            return Err(Error::InvalidConfig(format!(
                "results CSV row {} has {} fields",
                i + 2,
                fields.len()
            )));
        }
        let (source, target, variant) = (fields[0], fields[1], fields[2]);
        let pair = (source.to_string(), target.to_string());
        if !pairs.contains(&pair) {
            pairs.push(pair.clone());
        }
        if !variants.iter().any(|v| v == variant) {
            variants.push(variant.to_string());
        }
        if fields[4] == "FAILED" {
            continue;
        }
        let f1: f64 = fields[4].parse().map_err(|_| {
            Error::InvalidConfig(format!("results CSV row {}: bad macro_f1 {:?}", i + 2, fields[4]))
        })?;
        scores
            .entry((pair.0, pair.1, variant.to_string()))
            .or_default()
            .push(f1);
    }

    let median = |mut v: Vec<f64>| -> f64 {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if v.len() % 2 == 1 {
            v[v.len() / 2]
        } else {
            0.5 * (v[v.len() / 2 - 1] + v[v.len() / 2])
        }
    };

    let mut out = String::new();
    out.push_str(&format!("{:<22}", "Source->Target"));
    for v in &variants {
        out.push_str(&format!("{:>10}", v));
    }
    out.push('\n');
    let mut columns: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (s, t) in &pairs {
        out.push_str(&format!("{:<22}", format!("{s}->{t}")));
        for v in &variants {
            match scores.get(&(s.clone(), t.clone(), v.clone())) {
                Some(cell) => {
                    let m = median(cell.clone());
                    columns.entry(v.clone()).or_default().push(m);
                    out.push_str(&format!("{:>10.2}", m));
                }
                None => out.push_str(&format!("{:>10}", "failed")),
            }
        }
        out.push('\n');
    }
    out.push_str(&format!("{:<22}", "Average"));
    for v in &variants {
        match columns.get(v) {
            Some(col) if !col.is_empty() => {
                let avg = col.iter().sum::<f64>() / col.len() as f64;
                out.push_str(&format!("{:>10.2}", avg));
            }
            _ => out.push_str(&format!("{:>10}", "-")),
        }
    }
    out.push('\n');
    Ok(out)
}

/// Settings shared by every cell of a grid run.
#[derive(Debug, Clone)]
pub struct GridSettings {
    pub n_train: Option<usize>,
    pub hyperparams: Hyperparams,
    pub adapt_hyperparams: Option<Hyperparams>,
    pub encoder: EncoderConfig,
    pub allow_pan13_source: bool,
    pub test_fraction: f64,
    pub keep_target_checkpoints: bool,
}

impl Default for GridSettings {
    fn default() -> Self {
        GridSettings {
            n_train: Some(700),
            hyperparams: Hyperparams::default(),
            adapt_hyperparams: None,
            encoder: EncoderConfig::toy(32),
            allow_pan13_source: false,
            test_fraction: 0.2,
            keep_target_checkpoints: false,
        }
    }
}

/// Runs every (pair, variant, seed) cell exactly once; per-cell failures are
/// recorded without aborting the grid. The empty component set always runs
/// with the full training pool.
pub fn run_grid(
    pairs: &[(Platform, Platform)],
    variants: &[Components],
    seeds: &[u64],
    registry: &DatasetRegistry,
    settings: &GridSettings,
) -> GridResult {
    let mut cells = Vec::new();
    for pair in pairs {
        for components in variants {
            for &seed in seeds {
                let mut config =
                    ExperimentConfig::new(pair.0.clone(), pair.1.clone(), *components);
                config.seed = seed;
                config.hyperparams = Hyperparams {
                    seed,
                    ..settings.hyperparams.clone()
                };
                config.adapt_hyperparams = settings
                    .adapt_hyperparams
                    .as_ref()
                    .map(|hp| Hyperparams { seed, ..hp.clone() });
                config.keep_target_checkpoint = settings.keep_target_checkpoints;
                config.encoder = settings.encoder.clone();
                config.allow_pan13_source = settings.allow_pan13_source;
                config.test_fraction = settings.test_fraction;
                config.n_train = if *components == Components::NONE {
                    None
                } else {
                    settings.n_train
                };
                let outcome = run_experiment(&config, registry).map_err(|e| e.to_string());
                cells.push(GridCell {
                    source: pair.0.clone(),
                    target: pair.1.clone(),
                    variant: components.variant_name(),
                    seed,
                    outcome,
                });
            }
        }
    }
    GridResult {
        pairs: pairs.to_vec(),
        variants: variants.iter().map(|c| c.variant_name()).collect(),
        seeds: seeds.to_vec(),
        cells,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names() {
        assert_eq!(Components::ALL.variant_name(), "AB_CSA");
        assert_eq!(Components::new(false, false, true).variant_name(), "AB_A");
        assert_eq!(Components::new(true, false, true).variant_name(), "AB_CA");
        assert_eq!(Components::NONE.variant_name(), "BASELINE");
        for name in ["AB_CSA", "AB_CS", "AB_S", "AB_C", "AB_A", "AB_CA", "AB_SA", "BASELINE"] {
            assert_eq!(Components::parse(name).unwrap().variant_name(), name);
        }
        assert!(Components::parse("AB_X").is_err());
        assert!(Components::parse("AB_").is_err());
        assert!(Components::parse("AB_AC").is_err());
    }

    #[test]
    fn perfect_predictions_give_unit_macro_f1() {
        let labels = vec![0, 1, 0, 1, 1];
        assert_eq!(macro_f1(&labels, &labels).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_class_contributes_zero_f1() {
        // labels [0,0,0,1], all-0 predictions: class0 F1 = 6/7, class1 F1 = 0
        let f1 = macro_f1(&[0, 0, 0, 0], &[0, 0, 0, 1]).unwrap();
        assert!((f1 - 0.4286).abs() < 1e-4, "got {f1}");
        assert!((f1 - 3.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn macro_f1_rejects_bad_input() {
        assert!(matches!(
            macro_f1(&[0, 1], &[0]).unwrap_err(),
            Error::LengthMismatch { .. }
        ));
        assert!(matches!(macro_f1(&[], &[]).unwrap_err(), Error::EmptyBatch));
        assert!(macro_f1(&[2], &[0]).is_err());
    }

    /// Naive confusion-matrix oracle, kept independent of `evaluate`.
    pub(crate) fn macro_f1_oracle(predictions: &[u8], labels: &[u8]) -> f64 {
        let mut f1s = Vec::new();
        for class in [0u8, 1u8] {
            let tp = predictions
                .iter()
                .zip(labels)
                .filter(|&(&p, &y)| p == class && y == class)
                .count() as f64;
            let pred_pos = predictions.iter().filter(|&&p| p == class).count() as f64;
            let actual_pos = labels.iter().filter(|&&y| y == class).count() as f64;
            let precision = if pred_pos == 0.0 { 0.0 } else { tp / pred_pos };
            let recall = if actual_pos == 0.0 { 0.0 } else { tp / actual_pos };
            f1s.push(if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            });
        }
        (f1s[0] + f1s[1]) / 2.0
    }

    #[test]
    fn macro_f1_matches_oracle_on_random_vectors() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let n = rng.random_range(1..40);
            let preds: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
            let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
            let got = macro_f1(&preds, &labels).unwrap();
            let want = macro_f1_oracle(&preds, &labels);
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn macro_f1_invariant_under_relabeling() {
        let preds = vec![0, 1, 1, 0, 1, 0, 0];
        let labels = vec![0, 1, 0, 0, 1, 1, 0];
        let flip = |v: &[u8]| -> Vec<u8> { v.iter().map(|&x| 1 - x).collect() };
        let a = macro_f1(&preds, &labels).unwrap();
        let b = macro_f1(&flip(&preds), &flip(&labels)).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn pan13_rejected_as_source_by_default() {
        let registry = DatasetRegistry::new();
        let config = ExperimentConfig::new(Platform::Pan13, Platform::Blogger, Components::NONE);
        assert!(matches!(
            run_experiment(&config, &registry).unwrap_err(),
            Error::Pan13AsSource
        ));
    }

    #[test]
    fn default_cross_grid_shape() {
        let pairs = default_cross_platform_pairs();
        assert_eq!(pairs.len(), 9);
        assert!(pairs.iter().all(|(s, _)| *s != Platform::Pan13));
        assert_eq!(Components::cross_platform_variants().len(), 8);
        assert_eq!(Components::in_platform_variants().len(), 4);
    }
}
