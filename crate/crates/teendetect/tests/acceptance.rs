//! Acceptance gate: eight numbered criteria covering loss oracles, gradient
//! checks, initialization identity, the metric oracle, concentrator
//! contracts, stratified sampling, the synthetic end-to-end demo and grid
//! structure. Each test prints one pass/fail line.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use teendetect::adaptation::{
    adapt_target, adversarial_encoder_loss, discriminator_loss_on, encoder_measure_loss,
    AdaptationState, Hyperparams,
};
use teendetect::concentrator::{build_lexicon, concentrate, default_budget};
use teendetect::corpus::{stratified_sample, DatasetStats, Platform, PlatformDataset, TextRecord};
use teendetect::encoder::{
    init_target_from_source, BackendKind, Encoder, EncoderConfig, EncoderParams, Role,
};
use teendetect::evaluation::{
    default_cross_platform_pairs, macro_f1, run_experiment, run_grid, Components,
    DatasetRegistry, ExperimentConfig, GridSettings,
};
use teendetect::heads::{Classifier, ClassifierVariant, Discriminator};
use teendetect::nn::{from_flat, sigmoid, to_flat, zeroed, ParamVector};
use teendetect::synthetic::{default_pair, generate, run_demo};

fn report(number: usize, name: &str, outcome: Result<(), String>) {
    match outcome {
        Ok(()) => println!("criterion {number} ({name}): PASS"),
        Err(reason) => {
            println!("criterion {number} ({name}): FAIL - {reason}");
            panic!("criterion {number} ({name}) failed: {reason}");
        }
    }
}

fn check(cond: bool, reason: impl Fn() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(reason())
    }
}

// ---------------------------------------------------------------- criterion 1

/// Independent discriminator forward: manual affine + relu + affine + sigmoid.
fn oracle_discriminate(d: &Discriminator, v: &[f64]) -> f64 {
    let hidden = d.l1.b.len();
    let mut a1 = vec![0.0; hidden];
    for i in 0..hidden {
        let mut z = d.l1.b[i];
        for (j, &x) in v.iter().enumerate() {
            z += d.l1.w[i * v.len() + j] * x;
        }
        a1[i] = z.max(0.0);
    }
    let mut z = d.l2.b[0];
    for (i, &a) in a1.iter().enumerate() {
        z += d.l2.w[i] * a;
    }
    1.0 / (1.0 + (-z).exp())
}

fn oracle_bce(d: &Discriminator, src: &[Vec<f64>], tgt: &[Vec<f64>]) -> f64 {
    let mut loss = 0.0;
    for v in src {
        loss += -oracle_discriminate(d, v).max(1e-12).ln() / src.len() as f64;
    }
    for v in tgt {
        loss += -(1.0 - oracle_discriminate(d, v)).max(1e-12).ln() / tgt.len() as f64;
    }
    loss
}

fn random_text(rng: &mut ChaCha8Rng) -> String {
    let len = rng.random_range(1..8);
    (0..len)
        .map(|_| format!("t{}", rng.random_range(0..200)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn small_encoder(seed: u64, role: Role) -> Encoder {
    let config = EncoderConfig {
        embedding_dim: 4,
        max_tokens: 16,
        backend: BackendKind::Toy {
            hidden: 8,
            vocab: 13,
        },
    };
    Encoder::new(config, role, seed)
}

#[test]
fn criterion_1_loss_oracles() {
    let start = Instant::now();
    let outcome = (|| -> Result<(), String> {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        for case in 0..1000 {
            let dim = rng.random_range(2..6);
            let d = Discriminator::new(dim, 4, rng.random_range(0..1_000_000));
            let n_s = rng.random_range(1..5);
            let n_t = rng.random_range(1..5);
            let draw = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
                (0..n_s.max(n_t))
                    .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
                    .collect()
            };
            let src: Vec<Vec<f64>> = draw(&mut rng).into_iter().take(n_s).collect();
            let tgt: Vec<Vec<f64>> = draw(&mut rng).into_iter().take(n_t).collect();
            let got = discriminator_loss_on(&d, &src, &tgt).map_err(|e| e.to_string())?;
            let want = oracle_bce(&d, &src, &tgt);
            check((got - want).abs() <= 1e-9, || {
                format!("bce case {case}: {got} vs oracle {want}")
            })?;

            // measurer loss against direct KL summation over softmaxed means
            let source = small_encoder(rng.random_range(0..1_000_000), Role::Source);
            let target = small_encoder(rng.random_range(0..1_000_000), Role::Target);
            let batch: Vec<String> = (0..rng.random_range(1..5))
                .map(|_| random_text(&mut rng))
                .collect();
            let batch_refs: Vec<&str> = batch.iter().map(|s| s.as_str()).collect();
            let got = encoder_measure_loss(&source, &target, &batch_refs)
                .map_err(|e| e.to_string())?;
            let mean = |enc: &Encoder| -> Vec<f64> {
                let mut m = vec![0.0; 4];
                for t in &batch_refs {
                    for (mi, o) in m.iter_mut().zip(enc.encode(t).unwrap()) {
                        *mi += o / batch_refs.len() as f64;
                    }
                }
                m
            };
            let soft = |v: &[f64]| -> Vec<f64> {
                let s: f64 = v.iter().map(|x| x.exp()).sum();
                v.iter().map(|x| x.exp() / s).collect()
            };
            let p = soft(&mean(&source));
            let q = soft(&mean(&target));
            let want: f64 = p
                .iter()
                .zip(&q)
                .map(|(&pi, &qi)| pi * (pi / qi).ln())
                .sum();
            check((got - want).abs() <= 1e-9, || {
                format!("kl case {case}: {got} vs oracle {want}")
            })?;
        }

        // worked examples to four decimals
        let mut d = Discriminator::new(3, 4, 0);
        let zeros = vec![0.0; d.param_count()];
        from_flat(&mut d, &zeros);
        let balanced =
            discriminator_loss_on(&d, &[vec![1.0, 2.0, 3.0]], &[vec![-1.0, 0.0, 1.0]])
                .map_err(|e| e.to_string())?;
        check((balanced - 1.3863).abs() < 5e-5, || {
            format!("balanced example: {balanced}")
        })?;

        let mut d = Discriminator::new(1, 1, 0);
        d.l1.w = vec![1.0];
        d.l1.b = vec![100.0];
        d.l2.w = vec![1.0];
        d.l2.b = vec![-100.0];
        let hand = discriminator_loss_on(
            &d,
            &[vec![(0.8_f64 / 0.2).ln()]],
            &[vec![(0.3_f64 / 0.7).ln()]],
        )
        .map_err(|e| e.to_string())?;
        check((hand - 0.5798).abs() < 5e-5, || format!("hand example: {hand}"))?;

        let kl = teendetect::nn::kl_divergence(&[0.5, 0.5], &[0.25, 0.75]);
        check((kl - 0.1438).abs() < 5e-5, || format!("kl example: {kl}"))?;

        let elapsed = start.elapsed().as_secs_f64();
        check(elapsed < 10.0, || format!("took {elapsed:.1}s, budget 10s"))
    })();
    report(1, "loss oracles", outcome);
}

// ---------------------------------------------------------------- criterion 2

/// Sets every hidden-layer bias far from zero so no relu kink sits within
/// the finite-difference step.
fn lift_discriminator_biases(d: &mut Discriminator) {
    for b in d.l1.b.iter_mut() {
        *b = 0.6;
    }
}

fn lift_encoder_biases(enc: &mut Encoder) {
    match &mut enc.params {
        EncoderParams::Toy(p) => {
            for b in p.l1.b.iter_mut() {
                *b = 0.6;
            }
        }
        EncoderParams::Transformer(_) => unreachable!("toy encoders only"),
    }
}

fn lift_classifier_biases(c: &mut Classifier) {
    if let Classifier::Adaptive { l1, .. } = c {
        for b in l1.b.iter_mut() {
            *b = 0.6;
        }
    }
}

fn randomize<P: ParamVector>(p: &mut P, rng: &mut ChaCha8Rng) {
    let flat: Vec<f64> = (0..p.param_count())
        .map(|_| rng.random_range(-0.15..0.15))
        .collect();
    from_flat(p, &flat);
}

/// Central finite differences vs analytic gradient over every coordinate.
fn fd_check<F: FnMut(&[f64]) -> f64>(
    flat: &[f64],
    analytic: &[f64],
    mut loss: F,
    label: &str,
) -> Result<(), String> {
    const H: f64 = 1e-3;
    for i in 0..flat.len() {
        let mut plus = flat.to_vec();
        plus[i] += H;
        let mut minus = flat.to_vec();
        minus[i] -= H;
        let fd = (loss(&plus) - loss(&minus)) / (2.0 * H);
        let a = analytic[i];
        let rel = (a - fd).abs() / (a.abs() + fd.abs()).max(1.0);
        if rel > 1e-4 {
            return Err(format!("{label} coord {i}: analytic {a} vs fd {fd} (rel {rel:.2e})"));
        }
    }
    Ok(())
}

#[test]
fn criterion_2_gradient_checks() {
    let start = Instant::now();
    let outcome = (|| -> Result<(), String> {
        let mut rng = ChaCha8Rng::seed_from_u64(200);
        let mut draws = 0usize;
        for iter in 0..25 {
            let texts: Vec<String> = (0..3).map(|_| random_text(&mut rng)).collect();
            let batch: Vec<&str> = texts.iter().map(|s| s.as_str()).collect();
            let n = batch.len() as f64;

            // (a) discriminator loss wrt discriminator parameters
            let mut d = Discriminator::new(4, 6, iter);
            randomize(&mut d, &mut rng);
            lift_discriminator_biases(&mut d);
            draws += 1;
            let src: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..4).map(|_| rng.random_range(-0.5..0.5)).collect())
                .collect();
            let tgt: Vec<Vec<f64>> = (0..2)
                .map(|_| (0..4).map(|_| rng.random_range(-0.5..0.5)).collect())
                .collect();
            let mut grads = zeroed(&d);
            for v in &src {
                let (z, cache) = d.logit(v).unwrap();
                d.backward(&cache, -(1.0 - sigmoid(z)) / src.len() as f64, &mut grads);
            }
            for v in &tgt {
                let (z, cache) = d.logit(v).unwrap();
                d.backward(&cache, sigmoid(z) / tgt.len() as f64, &mut grads);
            }
            let d0 = d.clone();
            fd_check(
                &to_flat(&d),
                &to_flat(&grads),
                |flat| {
                    let mut dd = d0.clone();
                    from_flat(&mut dd, flat);
                    discriminator_loss_on(&dd, &src, &tgt).unwrap()
                },
                "discriminator bce",
            )?;

            // (b) adversarial encoder loss wrt target encoder parameters
            let mut enc = small_encoder(iter, Role::Target);
            randomize(&mut enc.params, &mut rng);
            lift_encoder_biases(&mut enc);
            draws += 1;
            let mut egrads = zeroed(&enc.params);
            for t in &batch {
                let (emb, ecache) = enc.forward(t).unwrap();
                let (z, dcache) = d.logit(&emb).unwrap();
                let mut dsink = zeroed(&d);
                let dinput = d.backward(&dcache, -(1.0 - sigmoid(z)) / n, &mut dsink);
                enc.backward(&ecache, &dinput, &mut egrads);
            }
            let enc0 = enc.clone();
            fd_check(
                &to_flat(&enc.params),
                &to_flat(&egrads),
                |flat| {
                    let mut e = enc0.clone();
                    from_flat(&mut e.params, flat);
                    adversarial_encoder_loss(&d, &e, &batch).unwrap()
                },
                "adversarial encoder",
            )?;

            // (c) measurer loss wrt target encoder parameters
            let mut source = small_encoder(iter ^ 9, Role::Source);
            randomize(&mut source.params, &mut rng);
            lift_encoder_biases(&mut source);
            draws += 1;
            let mean_of = |e: &Encoder| -> Vec<f64> {
                let mut m = vec![0.0; 4];
                for t in &batch {
                    for (mi, o) in m.iter_mut().zip(e.encode(t).unwrap()) {
                        *mi += o / n;
                    }
                }
                m
            };
            let p = teendetect::nn::softmax(&mean_of(&source));
            let q = teendetect::nn::softmax(&mean_of(&enc));
            let mut kgrads = zeroed(&enc.params);
            let dmean: Vec<f64> = q.iter().zip(&p).map(|(&qi, &pi)| (qi - pi) / n).collect();
            for t in &batch {
                let (_, ecache) = enc.forward(t).unwrap();
                enc.backward(&ecache, &dmean, &mut kgrads);
            }
            let enc0 = enc.clone();
            fd_check(
                &to_flat(&enc.params),
                &to_flat(&kgrads),
                |flat| {
                    let mut e = enc0.clone();
                    from_flat(&mut e.params, flat);
                    encoder_measure_loss(&source, &e, &batch).unwrap()
                },
                "measurer",
            )?;

            // (d) classifier cross-entropy wrt classifier parameters;
            // small hidden width keeps the fd sweep fast
            let mut clf = Classifier::with_hidden(ClassifierVariant::Adaptive, 4, 6, iter);
            randomize(&mut clf, &mut rng);
            lift_classifier_biases(&mut clf);
            draws += 1;
            let labels: Vec<u8> = (0..batch.len()).map(|i| (i % 2) as u8).collect();
            let embs: Vec<Vec<f64>> = batch.iter().map(|t| enc.encode(t).unwrap()).collect();
            let ce = |c: &Classifier| -> f64 {
                embs.iter()
                    .zip(&labels)
                    .map(|(v, &y)| {
                        let p = c.classify(v).unwrap();
                        -(p[y as usize].max(1e-12)).ln() / n
                    })
                    .sum()
            };
            let mut cgrads = zeroed(&clf);
            for (v, &y) in embs.iter().zip(&labels) {
                let (logits, cache) = clf.logits(v).unwrap();
                let p = teendetect::nn::softmax(&logits);
                let mut dlogits = [p[0] / n, p[1] / n];
                dlogits[y as usize] -= 1.0 / n;
                clf.backward(&cache, &dlogits, &mut cgrads);
            }
            let clf0 = clf.clone();
            fd_check(
                &to_flat(&clf),
                &to_flat(&cgrads),
                |flat| {
                    let mut c = clf0.clone();
                    from_flat(&mut c, flat);
                    ce(&c)
                },
                "classifier ce",
            )?;
        }
        check(draws >= 100, || format!("only {draws} parameter draws"))?;
        let elapsed = start.elapsed().as_secs_f64();
        check(elapsed < 60.0, || format!("took {elapsed:.1}s, budget 60s"))
    })();
    report(2, "gradient checks", outcome);
}

// ---------------------------------------------------------------- criterion 3

#[test]
fn criterion_3_initialization_identity() {
    let outcome = (|| -> Result<(), String> {
        let source = Encoder::new(EncoderConfig::toy(32), Role::Source, 7);
        let target = init_target_from_source(&source);
        let sflat = to_flat(&source.params);
        let tflat = to_flat(&target.params);
        let max_diff = sflat
            .iter()
            .zip(&tflat)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        check(max_diff == 0.0, || format!("max param diff {max_diff}"))?;

        let (spec, _) = default_pair(7);
        let corpus = generate(&spec).map_err(|e| e.to_string())?;
        for record in corpus.records.iter().take(50) {
            let a = source.encode(&record.text).unwrap();
            let b = target.encode(&record.text).unwrap();
            check(a == b, || format!("encodings differ on {:?}", record.id))?;
        }

        // adapting the target must leave the source bitwise unchanged
        let discriminator = Discriminator::new(32, 16, 3);
        let state = AdaptationState::new(source.clone(), target, discriminator)
            .map_err(|e| e.to_string())?;
        let hp = Hyperparams {
            batch_size: 16,
            encoder_lr: 1e-3,
            head_lr: 1e-3,
            epochs: 1,
            kl_weight: 1.0,
            seed: 0,
        };
        let small = PlatformDataset::in_memory(
            corpus.platform.clone(),
            corpus.records[..64].to_vec(),
        );
        let state = adapt_target(state, &small, &small, &hp).map_err(|e| e.to_string())?;
        check(to_flat(&state.source.params) == sflat, || {
            "source encoder changed during adaptation".to_string()
        })?;
        check(to_flat(&state.target.params) != sflat, || {
            "target encoder did not move".to_string()
        })
    })();
    report(3, "initialization identity", outcome);
}

// ---------------------------------------------------------------- criterion 4

/// Independent confusion-matrix macro-F1.
fn oracle_macro_f1(predictions: &[u8], labels: &[u8]) -> f64 {
    let mut m = [[0usize; 2]; 2]; // m[label][pred]
    for (&p, &y) in predictions.iter().zip(labels) {
        m[y as usize][p as usize] += 1;
    }
    let f1 = |class: usize| -> f64 {
        let tp = m[class][class];
        let fp = m[1 - class][class];
        let fn_ = m[class][1 - class];
        let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        }
    };
    (f1(0) + f1(1)) / 2.0
}

#[test]
fn criterion_4_metric_oracle() {
    let outcome = (|| -> Result<(), String> {
        let mut rng = ChaCha8Rng::seed_from_u64(400);
        for case in 0..1000 {
            let len = rng.random_range(1..300);
            let labels: Vec<u8> = (0..len).map(|_| rng.random_range(0..2)).collect();
            let predictions: Vec<u8> = (0..len).map(|_| rng.random_range(0..2)).collect();
            let got = macro_f1(&predictions, &labels).map_err(|e| e.to_string())?;
            let want = oracle_macro_f1(&predictions, &labels);
            check((got - want).abs() <= 1e-12, || {
                format!("case {case}: {got} vs oracle {want}")
            })?;
        }
        let derived = macro_f1(&[0, 0, 0, 0], &[0, 0, 0, 1]).map_err(|e| e.to_string())?;
        check((derived - 0.4286).abs() < 5e-5, || format!("derived example: {derived}"))
    })();
    report(4, "metric oracle", outcome);
}

// ---------------------------------------------------------------- criterion 5

fn randomized_corpus(n: usize, seed: u64) -> PlatformDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..n)
        .map(|i| {
            let len = rng.random_range(1..120);
            let text: Vec<String> = (0..len)
                .map(|_| format!("w{}", rng.random_range(0..500)))
                .collect();
            TextRecord {
                id: format!("r{i:05}"),
                platform: Platform::Synthetic("random".into()),
                text: text.join(" "),
                age: None,
                label: (i % 2) as u8,
            }
        })
        .collect();
    PlatformDataset::in_memory(Platform::Synthetic("random".into()), records)
}

/// Brute-force lexicon oracle: recount unigrams/bigrams per class, add-one
/// smoothed absolute log-odds, sort by weight then term, truncate.
fn oracle_lexicon(corpus: &PlatformDataset, capacity: usize) -> Vec<(String, f64)> {
    let mut counts: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for record in &corpus.records {
        let toks: Vec<String> = record
            .text
            .split_whitespace()
            .map(|t| t.to_lowercase())
            .collect();
        let teen = record.label == 1;
        let mut bump = |term: String| {
            let e = counts.entry(term).or_insert((0, 0));
            if teen {
                e.1 += 1;
            } else {
                e.0 += 1;
            }
        };
        for t in &toks {
            bump(t.clone());
        }
        for pair in toks.windows(2) {
            bump(format!("{} {}", pair[0], pair[1]));
        }
    }
    let vocab = counts.len() as f64;
    let total_adult: u64 = counts.values().map(|c| c.0).sum();
    let total_teen: u64 = counts.values().map(|c| c.1).sum();
    let mut ranked: Vec<(String, f64)> = counts
        .into_iter()
        .map(|(term, (adult, teen))| {
            let p_teen = (teen as f64 + 1.0) / (total_teen as f64 + vocab);
            let p_adult = (adult as f64 + 1.0) / (total_adult as f64 + vocab);
            (term, (p_teen / p_adult).ln().abs())
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap()
            .then_with(|| a.0.cmp(&b.0))
    });
    ranked.truncate(capacity);
    ranked
}

#[test]
fn criterion_5_concentrator_contracts() {
    let start = Instant::now();
    let outcome = (|| -> Result<(), String> {
        // budget rule on published platform statistics
        let myspace = DatasetStats {
            size: 14_813,
            avg_length: 17.0,
            teenager_ratio: 0.096,
            year: Some(2011),
        };
        let blogger = DatasetStats {
            size: 19_320,
            avg_length: 3766.0,
            teenager_ratio: 0.42,
            year: Some(2009),
        };
        let short_budget = default_budget(&myspace);
        let long_budget = default_budget(&blogger);
        check(short_budget.max_tokens == 17, || {
            format!("myspace budget {}", short_budget.max_tokens)
        })?;
        check(long_budget.max_tokens == 512, || {
            format!("blogger budget {}", long_budget.max_tokens)
        })?;

        // lexicon oracle with >= 2000 candidates
        let corpus = randomized_corpus(300, 501);
        let oracle = oracle_lexicon(&corpus, usize::MAX);
        check(oracle.len() >= 2000, || {
            format!("only {} candidate terms", oracle.len())
        })?;
        let lexicon = build_lexicon(&[], &[&corpus], 900).map_err(|e| e.to_string())?;
        check(lexicon.len() == 900, || format!("lexicon has {} entries", lexicon.len()))?;
        for (i, (entry, (term, weight))) in
            lexicon.entries().iter().zip(oracle.iter().take(900)).enumerate()
        {
            check(&entry.term == term && (entry.weight - weight).abs() <= 1e-12, || {
                format!(
                    "rank {i}: got ({}, {}), oracle ({term}, {weight})",
                    entry.term, entry.weight
                )
            })?;
        }

        // budget respect on a 10,000-text randomized corpus
        let big = randomized_corpus(10_000, 502);
        for record in &big.records {
            let input_len = record.text.split_whitespace().count();
            for budget in [short_budget, long_budget] {
                let out = concentrate(&record.text, &lexicon, budget);
                let out_len = out.split_whitespace().count();
                check(out_len <= budget.max_tokens.max(input_len), || {
                    format!("{}: {} tokens out for budget {}", record.id, out_len, budget.max_tokens)
                })?;
                if input_len > budget.max_tokens {
                    check(out_len <= budget.max_tokens, || {
                        format!("{}: budget {} violated ({out_len})", record.id, budget.max_tokens)
                    })?;
                }
            }
        }
        let elapsed = start.elapsed().as_secs_f64();
        check(elapsed < 30.0, || format!("took {elapsed:.1}s, budget 30s"))
    })();
    report(5, "concentrator contracts", outcome);
}

// ---------------------------------------------------------------- criterion 6

#[test]
fn criterion_6_stratified_sampling() {
    let outcome = (|| -> Result<(), String> {
        let records: Vec<TextRecord> = (0..1000)
            .map(|i| TextRecord {
                id: format!("b{i:04}"),
                platform: Platform::Blogger,
                text: format!("text number {i}"),
                age: None,
                label: u8::from(i < 420),
            })
            .collect();
        let fixture = PlatformDataset::in_memory(Platform::Blogger, records);

        let sample = stratified_sample(&fixture, 700, 11).map_err(|e| e.to_string())?;
        check(sample.len() == 700, || format!("sample size {}", sample.len()))?;
        let teens = sample.records.iter().filter(|r| r.label == 1).count();
        check((293..=295).contains(&teens), || {
            format!("expected 294±1 teenagers, got {teens}")
        })?;

        let again = stratified_sample(&fixture, 700, 11).map_err(|e| e.to_string())?;
        check(sample.records == again.records, || "sampling is not deterministic".to_string())
    })();
    report(6, "stratified sampling", outcome);
}

// ---------------------------------------------------------------- criterion 7

#[test]
fn criterion_7_synthetic_end_to_end() {
    let start = Instant::now();
    let outcome = (|| -> Result<(), String> {
        let mut confused = 0;
        let mut improved = 0;
        let mut measurer_down = 0;
        for seed in 0..5u64 {
            let demo = run_demo(seed).map_err(|e| e.to_string())?;
            if (0.4..=0.6).contains(&demo.discriminator_accuracy) {
                confused += 1;
            }
            if demo.adapted_f1 >= demo.baseline_f1 {
                improved += 1;
            }
            if demo.kl_last <= demo.kl_first {
                measurer_down += 1;
            }
            println!(
                "  seed {seed}: disc acc {:.3}, baseline {:.4}, adapted {:.4}, kl {:.2e} -> {:.2e}",
                demo.discriminator_accuracy,
                demo.baseline_f1,
                demo.adapted_f1,
                demo.kl_first,
                demo.kl_last
            );
        }
        check(confused >= 4, || {
            format!("(a) discriminator confused in {confused}/5 seeds, need >= 4")
        })?;
        check(improved >= 4, || {
            format!("(b) adapted >= baseline in {improved}/5 seeds, need >= 4")
        })?;
        check(measurer_down >= 4, || {
            format!("(c) measurer loss non-increasing in {measurer_down}/5 seeds, need >= 4")
        })?;
        let elapsed = start.elapsed().as_secs_f64();
        check(elapsed < 300.0, || format!("took {elapsed:.1}s, budget 300s"))
    })();
    report(7, "synthetic end-to-end", outcome);
}

// ---------------------------------------------------------------- criterion 8

/// Synthetic stand-ins registered under the real platform names so the
/// default grids are runnable at desk scale.
fn stand_in_registry() -> DatasetRegistry {
    let mut registry = DatasetRegistry::new();
    for (i, platform) in [
        Platform::Blogger,
        Platform::Youtube,
        Platform::Myspace,
        Platform::Pan13,
    ]
    .into_iter()
    .enumerate()
    {
        let (mut spec, _) = default_pair(800 + i as u64);
        spec.name = platform.to_string();
        spec.n_records = 60;
        spec.avg_tokens = 30;
        spec.style_prefix = format!("style{i}");
        let generated = generate(&spec).unwrap();
        let records: Vec<TextRecord> = generated
            .records
            .into_iter()
            .map(|mut r| {
                r.platform = platform.clone();
                r
            })
            .collect();
        registry.insert(PlatformDataset::in_memory(platform, records));
    }
    registry
}

fn tiny_settings() -> GridSettings {
    GridSettings {
        n_train: Some(30),
        hyperparams: Hyperparams {
            batch_size: 16,
            encoder_lr: 1e-2,
            head_lr: 1e-2,
            epochs: 1,
            kl_weight: 1.0,
            seed: 0,
        },
        adapt_hyperparams: None,
        encoder: EncoderConfig {
            embedding_dim: 8,
            max_tokens: 64,
            backend: BackendKind::Toy {
                hidden: 16,
                vocab: 256,
            },
        },
        allow_pan13_source: false,
        test_fraction: 0.2,
        keep_target_checkpoints: false,
    }
}

#[test]
fn criterion_8_grid_structure() {
    let outcome = (|| -> Result<(), String> {
        let registry = stand_in_registry();
        let settings = tiny_settings();

        // cross-platform layout: 9 pairs x 8 variants, PAN13 target-only
        let pairs = default_cross_platform_pairs();
        check(pairs.len() == 9, || format!("{} default pairs", pairs.len()))?;
        check(pairs.iter().all(|p| p.0 != Platform::Pan13), || {
            "a default pair uses pan13 as source".to_string()
        })?;
        let variants = Components::cross_platform_variants();
        check(variants.len() == 8, || format!("{} cross variants", variants.len()))?;
        let grid = run_grid(&pairs, &variants, &[0], &registry, &settings);
        check(grid.cells.len() == 72, || format!("{} cells", grid.cells.len()))?;
        let mut seen = std::collections::BTreeSet::new();
        for cell in &grid.cells {
            let key = (
                cell.source.to_string(),
                cell.target.to_string(),
                cell.variant.clone(),
                cell.seed,
            );
            check(seen.insert(key.clone()), || format!("duplicate cell {key:?}"))?;
            check(cell.outcome.is_ok(), || {
                format!("cell {key:?} failed: {:?}", cell.outcome)
            })?;
        }

        // a pan13-source experiment is rejected
        let mut config = ExperimentConfig::new(
            Platform::Pan13,
            Platform::Blogger,
            Components::NONE,
        );
        config.encoder = settings.encoder.clone();
        check(run_experiment(&config, &registry).is_err(), || {
            "pan13 source was not rejected".to_string()
        })?;

        // average row equals independently computed column means to 1e-12
        for variant in &grid.variants {
            let scores: Vec<f64> = grid
                .pairs
                .iter()
                .filter_map(|p| grid.cell_score(p, variant))
                .collect();
            let mean = scores.iter().sum::<f64>() / scores.len() as f64;
            let avg = grid
                .column_average(variant)
                .ok_or_else(|| format!("no average for {variant}"))?;
            check((avg - mean).abs() <= 1e-12, || {
                format!("{variant}: average {avg} vs mean {mean}")
            })?;
        }

        // in-platform grid: 4 variants (pan13 allowed against itself)
        let in_variants = Components::in_platform_variants();
        check(in_variants.len() == 4, || format!("{} in-platform variants", in_variants.len()))?;
        let in_names: Vec<String> = in_variants.iter().map(|v| v.variant_name()).collect();
        check(
            in_names == ["BASELINE", "AB_C", "AB_S", "AB_CS"],
            || format!("in-platform variants {in_names:?}"),
        )?;
        let mut in_settings = settings.clone();
        in_settings.allow_pan13_source = true;
        let in_pairs = teendetect::evaluation::default_in_platform_pairs();
        let in_grid = run_grid(&in_pairs, &in_variants, &[0], &registry, &in_settings);
        check(
            in_grid.cells.iter().all(|c| c.outcome.is_ok()),
            || "in-platform grid has failed cells".to_string(),
        )?;

        // rerun with the identical config is byte-identical apart from
        // wall-clock timing
        let rerun = run_grid(&pairs, &variants, &[0], &registry, &settings);
        let strip = |csv: &str| -> String {
            csv.lines()
                .map(|l| l.rsplit_once(',').map(|(head, _)| head.to_string()).unwrap_or_else(|| l.to_string()))
                .collect::<Vec<_>>()
                .join("\n")
        };
        check(strip(&grid.to_csv()) == strip(&rerun.to_csv()), || {
            "rerun produced different results".to_string()
        })?;
        check(grid.render_table() == rerun.render_table(), || {
            "rerun produced a different table".to_string()
        })
    })();
    report(8, "grid structure", outcome);
}
