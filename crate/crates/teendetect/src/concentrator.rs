//! Lexicon construction and budgeted fragment extraction. The lexicon ranks
//! unigrams and bigrams by how strongly they separate teenager from adult
//! usage; the concentrator keeps the lexicon-densest contiguous windows of a
//! text within a token budget derived from the target platform's length.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{DatasetStats, PlatformDataset, LABEL_TEEN};
use crate::error::{Error, Result};

/// Lexicon capacity used throughout: 900 items.
pub const DEFAULT_CAPACITY: usize = 900;
pub const ENCODER_MAX_TOKENS: usize = 512;
pub const BUDGET_FLOOR: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub term: String,
    pub weight: f64,
}

/// Ranked term → weight map, capped at a fixed capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    index: HashMap<String, f64>,
    capacity: usize,
}

impl Lexicon {
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in rank order (highest weight first).
    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn weight(&self, term: &str) -> f64 {
        self.index.get(term).copied().unwrap_or(0.0)
    }

    pub fn contains(&self, term: &str) -> bool {
        self.index.contains_key(term)
    }

    fn from_ranked(entries: Vec<LexiconEntry>, capacity: usize) -> Self {
        let index = entries
            .iter()
            .map(|e| (e.term.clone(), e.weight))
            .collect();
        Lexicon {
            entries,
            index,
            capacity,
        }
    }

    /// Persists as a JSON array of {term, weight} in rank order.
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.entries).expect("lexicon serializes");
        std::fs::write(path, json).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path, capacity: usize) -> Result<Self> {
        let content = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let entries: Vec<LexiconEntry> =
            serde_json::from_str(&content).map_err(|e| Error::Checkpoint {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
        Ok(Lexicon::from_ranked(entries, capacity))
    }
}

/// Token budget for concentrated inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenBudget {
    pub max_tokens: usize,
}

fn lower_tokens(text: &str) -> Vec<String> {
    text.split_whitespace().map(|t| t.to_lowercase()).collect()
}

/// Unigram and bigram counts per class over labelled corpora.
fn ngram_class_counts(corpora: &[&PlatformDataset]) -> BTreeMap<String, (u64, u64)> {
    let mut counts: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for ds in corpora {
        for record in &ds.records {
            let toks = lower_tokens(&record.text);
            let teen = record.label == LABEL_TEEN;
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
    }
    counts
}

/// Add-one smoothed absolute log-odds of teenager vs adult usage.
pub(crate) fn log_odds_scores(counts: &BTreeMap<String, (u64, u64)>) -> Vec<(String, f64)> {
    let vocab = counts.len() as f64;
    let total_adult: u64 = counts.values().map(|c| c.0).sum();
    let total_teen: u64 = counts.values().map(|c| c.1).sum();
    counts
        .iter()
        .map(|(term, &(adult, teen))| {
            let p_teen = (teen as f64 + 1.0) / (total_teen as f64 + vocab);
            let p_adult = (adult as f64 + 1.0) / (total_adult as f64 + vocab);
            (term.clone(), (p_teen / p_adult).ln().abs())
        })
        .collect()
}

/// Builds the alignment lexicon by combining an external (term, weight) list
/// with corpus-derived unigram/bigram log-odds scores, keeping the
/// top-`capacity` terms. Ties break lexicographically.
pub fn build_lexicon(
    external: &[(String, f64)],
    corpora: &[&PlatformDataset],
    capacity: usize,
) -> Result<Lexicon> {
    if capacity == 0 {
        return Err(Error::ZeroCapacity);
    }
    if external.is_empty() && corpora.iter().all(|c| c.is_empty()) {
        return Err(Error::EmptyLexiconInput);
    }

    let counts = ngram_class_counts(corpora);
    let corpus_scores = log_odds_scores(&counts);

    // External weights are rescaled into the corpus-score range so the two
    // sources are comparable; without corpus candidates they pass through.
    let mut merged: BTreeMap<String, f64> = BTreeMap::new();
    for (term, score) in &corpus_scores {
        merged.insert(term.clone(), *score);
    }
    if !external.is_empty() {
        let abs: Vec<f64> = external.iter().map(|(_, w)| w.abs()).collect();
        let (lo, hi) = abs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &w| {
                (l.min(w), h.max(w))
            });
        let (clo, chi) = corpus_scores
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), (_, s)| {
                (l.min(*s), h.max(*s))
            });
        for ((term, w), &a) in external.iter().zip(&abs) {
            if !w.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "external lexicon weight for {term:?} is not finite"
                )));
            }
            let score = if corpus_scores.is_empty() {
                a
            } else if hi > lo {
                clo + (a - lo) / (hi - lo) * (chi - clo)
            } else {
                chi
            };
            let term = term.to_lowercase();
            let entry = merged.entry(term).or_insert(f64::NEG_INFINITY);
            *entry = entry.max(score);
        }
    }

    let mut ranked: Vec<(String, f64)> = merged.into_iter().collect();
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    ranked.truncate(capacity);
    let entries = ranked
        .into_iter()
        .map(|(term, weight)| LexiconEntry { term, weight })
        .collect();
    Ok(Lexicon::from_ranked(entries, capacity))
}

/// Token budget derived from the target platform's mean length, clamped to
/// [floor, encoder_max].
pub fn compute_budget(target_stats: &DatasetStats, encoder_max: usize, floor: usize) -> TokenBudget {
    let avg = target_stats.avg_length.round() as usize;
    TokenBudget {
        max_tokens: avg.clamp(floor, encoder_max),
    }
}

pub fn default_budget(target_stats: &DatasetStats) -> TokenBudget {
    compute_budget(target_stats, ENCODER_MAX_TOKENS, BUDGET_FLOOR)
}

/// Summed lexicon weight of the unigrams and bigrams inside a token window.
fn window_score(tokens: &[String], lexicon: &Lexicon) -> f64 {
    let mut score: f64 = tokens.iter().map(|t| lexicon.weight(t)).sum();
    for pair in tokens.windows(2) {
        score += lexicon.weight(&format!("{} {}", pair[0], pair[1]));
    }
    score
}

/// Extracts the lexicon-densest contiguous windows of `text` within the
/// budget, re-concatenated in original order. Texts already inside the
/// budget pass through unchanged; texts with no lexicon hits fall back to
/// prefix truncation (the start-position tie-break selects window 0).
pub fn concentrate(text: &str, lexicon: &Lexicon, budget: TokenBudget) -> String {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let b = budget.max_tokens;
    if tokens.len() <= b {
        return text.to_string();
    }
    let lowered = lower_tokens(text);
    let stride = (b / 2).max(1);

    // candidate windows: width b stepped by stride, plus the tail
    let mut windows: Vec<(usize, usize, f64)> = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + b).min(tokens.len());
        windows.push((start, end, window_score(&lowered[start..end], lexicon)));
        if end == tokens.len() {
            break;
        }
        start += stride;
    }
    windows.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });

    // greedy non-overlapping selection until the budget is exhausted
    let mut selected: Vec<(usize, usize)> = Vec::new();
    let mut remaining = b;
    for &(s, e, _) in &windows {
        let len = e - s;
        if len > remaining {
            continue;
        }
        if selected.iter().any(|&(ss, se)| s < se && ss < e) {
            continue;
        }
        selected.push((s, e));
        remaining -= len;
        if remaining == 0 {
            break;
        }
    }
    selected.sort_unstable();
    let mut out: Vec<&str> = Vec::with_capacity(b);
    for (s, e) in selected {
        out.extend_from_slice(&tokens[s..e]);
    }
    out.join(" ")
}

/// Applies `concentrate` to every record; ids and labels are untouched.
pub fn align_corpus(
    dataset: &PlatformDataset,
    lexicon: &Lexicon,
    budget: TokenBudget,
) -> PlatformDataset {
    let records = dataset
        .records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.text = concentrate(&r.text, lexicon, budget);
            r
        })
        .collect();
    PlatformDataset::new(dataset.platform.clone(), records, dataset.provenance.clone())
}
