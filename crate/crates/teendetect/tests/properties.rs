//! Property tests for the metric, the concentrator, the KL helper and the
//! synthetic generator.

use proptest::prelude::*;

use teendetect::concentrator::{build_lexicon, compute_budget, concentrate};
use teendetect::corpus::DatasetStats;
use teendetect::evaluation::{macro_f1, Components};
use teendetect::nn::kl_divergence;
use teendetect::synthetic::{default_pair, generate};

fn label_vec() -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..=1, 1..200)
}

proptest! {
    #[test]
    fn macro_f1_is_bounded_and_relabel_invariant(labels in label_vec(), flips in label_vec()) {
        let n = labels.len().min(flips.len());
        let labels = &labels[..n];
        // predictions derived from labels by random flips, so lengths match
        let predictions: Vec<u8> = labels
            .iter()
            .zip(&flips[..n])
            .map(|(&l, &f)| l ^ f)
            .collect();

        let f1 = macro_f1(&predictions, labels).unwrap();
        prop_assert!((0.0..=1.0).contains(&f1));

        let swapped_preds: Vec<u8> = predictions.iter().map(|&p| 1 - p).collect();
        let swapped_labels: Vec<u8> = labels.iter().map(|&l| 1 - l).collect();
        let swapped = macro_f1(&swapped_preds, &swapped_labels).unwrap();
        prop_assert!((f1 - swapped).abs() <= 1e-12);
    }

    #[test]
    fn kl_is_nonnegative_and_zero_on_identical(raw in prop::collection::vec(0.01f64..10.0, 2..16)) {
        let total: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let shifted: Vec<f64> = {
            let raw2: Vec<f64> = raw.iter().rev().cloned().collect();
            let t: f64 = raw2.iter().sum();
            raw2.iter().map(|x| x / t).collect()
        };
        prop_assert!(kl_divergence(&p, &shifted) >= -1e-15);
        prop_assert!(kl_divergence(&p, &p).abs() <= 1e-12);
    }

    #[test]
    fn budget_is_clamped(avg in 0.0f64..5000.0) {
        let stats = DatasetStats { size: 10, avg_length: avg, teenager_ratio: 0.5, year: None };
        let budget = compute_budget(&stats, 512, 16);
        prop_assert!(budget.max_tokens >= 16 && budget.max_tokens <= 512);
    }

    #[test]
    fn variant_names_roundtrip(c in any::<bool>(), s in any::<bool>(), a in any::<bool>()) {
        let components = Components::new(c, s, a);
        let name = components.variant_name();
        prop_assert_eq!(Components::parse(&name).unwrap(), components);
    }
}

#[test]
fn concentrate_respects_budget_and_preserves_tokens() {
    let (spec, _) = default_pair(11);
    let corpus = generate(&spec).unwrap();
    let lexicon = build_lexicon(&[], &[&corpus], 900).unwrap();
    let stats = DatasetStats {
        size: corpus.len(),
        avg_length: 30.0,
        teenager_ratio: 0.5,
        year: None,
    };
    let budget = compute_budget(&stats, 512, 16);
    for record in corpus.records.iter().take(200) {
        let out = concentrate(&record.text, &lexicon, budget);
        let out_tokens: Vec<&str> = out.split_whitespace().collect();
        assert!(out_tokens.len() <= budget.max_tokens.max(record.text.split_whitespace().count()));
        if record.text.split_whitespace().count() > budget.max_tokens {
            assert!(out_tokens.len() <= budget.max_tokens);
        } else {
            assert_eq!(out, record.text);
        }
        // every output token exists in the input
        let input_tokens: Vec<String> = record
            .text
            .split_whitespace()
            .map(|t| t.to_lowercase())
            .collect();
        for t in &out_tokens {
            assert!(input_tokens.iter().any(|i| i == t), "token {t:?} not in input");
        }
    }
}

#[test]
fn synthetic_generation_is_deterministic() {
    let (spec, _) = default_pair(5);
    let a = generate(&spec).unwrap();
    let b = generate(&spec).unwrap();
    assert_eq!(a.records, b.records);
}
