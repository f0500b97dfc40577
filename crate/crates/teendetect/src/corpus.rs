//! Canonical record format for platform corpora, age-to-label mapping,
//! dataset statistics and stratified sampling.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Age threshold below which a record is labelled as a teenager.
pub const TEEN_AGE_LIMIT: u32 = 20;

pub const LABEL_ADULT: u8 = 0;
pub const LABEL_TEEN: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Platform {
    Blogger,
    Youtube,
    Myspace,
    Pan13,
    Synthetic(String),
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Platform::Blogger => write!(f, "blogger"),
            Platform::Youtube => write!(f, "youtube"),
            Platform::Myspace => write!(f, "myspace"),
            Platform::Pan13 => write!(f, "pan13"),
            Platform::Synthetic(name) => write!(f, "synthetic:{name}"),
        }
    }
}

impl FromStr for Platform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blogger" => Ok(Platform::Blogger),
            "youtube" => Ok(Platform::Youtube),
            "myspace" => Ok(Platform::Myspace),
            "pan13" => Ok(Platform::Pan13),
            other => match other.strip_prefix("synthetic:") {
                Some(name) if !name.is_empty() => Ok(Platform::Synthetic(name.to_string())),
                _ => Err(Error::UnknownPlatform(s.to_string())),
            },
        }
    }
}

impl Serialize for Platform {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Platform {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One user text with platform tag, optional age and a binary teenager label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextRecord {
    pub id: String,
    pub platform: Platform,
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub age: Option<u32>,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub path: String,
    pub format: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformDataset {
    pub platform: Platform,
    pub records: Vec<TextRecord>,
    pub provenance: Provenance,
}

impl PlatformDataset {
    pub fn new(platform: Platform, records: Vec<TextRecord>, provenance: Provenance) -> Self {
        PlatformDataset {
            platform,
            records,
            provenance,
        }
    }

    pub fn in_memory(platform: Platform, records: Vec<TextRecord>) -> Self {
        PlatformDataset {
            platform,
            records,
            provenance: Provenance {
                path: "<memory>".to_string(),
                format: "memory".to_string(),
            },
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.text.as_str()).collect()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.records.iter().map(|r| r.label).collect()
    }
}

/// Table-style dataset statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub size: usize,
    pub avg_length: f64,
    pub teenager_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Jsonl,
    Csv,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Format::Jsonl => write!(f, "jsonl"),
            Format::Csv => write!(f, "csv"),
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(Format::Jsonl),
            "csv" => Ok(Format::Csv),
            other => Err(Error::InvalidConfig(format!("unknown format {other:?}"))),
        }
    }
}

/// Maps an age in years onto the binary teenager label.
pub fn map_age_to_label(age: u32) -> u8 {
    if age < TEEN_AGE_LIMIT {
        LABEL_TEEN
    } else {
        LABEL_ADULT
    }
}

pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Deserialize)]
struct RawRow {
    id: String,
    text: String,
    #[serde(default)]
    age: Option<i64>,
    #[serde(default)]
    label: Option<i64>,
}

fn canonicalize(raw: RawRow, platform: &Platform, path: &Path, row: usize) -> Result<TextRecord> {
    let text = normalize_whitespace(&raw.text);
    if text.is_empty() {
        return Err(Error::MalformedRow {
            path: path.to_path_buf(),
            row,
            reason: "text is empty after whitespace normalization".to_string(),
        });
    }
    let age = match raw.age {
        Some(a) if a < 0 => return Err(Error::NegativeAge { age: a, row }),
        Some(a) => Some(a as u32),
        None => None,
    };
    let explicit = match raw.label {
        Some(l) if l == 0 || l == 1 => Some(l as u8),
        Some(l) => {
            return Err(Error::MalformedRow {
                path: path.to_path_buf(),
                row,
                reason: format!("label must be 0 or 1, got {l}"),
            })
        }
        None => None,
    };
    let label = match (age, explicit) {
        (Some(a), Some(l)) => {
            let derived = map_age_to_label(a);
            if derived != l {
                return Err(Error::LabelMismatch {
                    age: a,
                    expected: derived,
                    actual: l,
                    row,
                });
            }
            derived
        }
        (Some(a), None) => map_age_to_label(a),
        (None, Some(l)) => l,
        (None, None) => {
            return Err(Error::MalformedRow {
                path: path.to_path_buf(),
                row,
                reason: "row provides neither age nor label".to_string(),
            })
        }
    };
    Ok(TextRecord {
        id: raw.id,
        platform: platform.clone(),
        text,
        age,
        label,
    })
}

/// Loads a JSONL or CSV file into the canonical record format.
pub fn load_dataset(path: &Path, format: Format, platform: Platform) -> Result<PlatformDataset> {
    let rows: Vec<RawRow> = match format {
        Format::Jsonl => {
            let content = std::fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })?;
            let mut rows = Vec::new();
            for (i, line) in content.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let raw: RawRow =
                    serde_json::from_str(line).map_err(|e| Error::MalformedRow {
                        path: path.to_path_buf(),
                        row: i + 1,
                        reason: e.to_string(),
                    })?;
                rows.push(raw);
            }
            rows
        }
        Format::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(true)
                .from_path(path)
                .map_err(|e| Error::Io {
                    path: path.to_path_buf(),
                    source: std::io::Error::other(e),
                })?;
            let mut rows = Vec::new();
            for (i, row) in reader.deserialize::<CsvRow>().enumerate() {
                let row = row.map_err(|e| Error::MalformedRow {
                    path: path.to_path_buf(),
                    row: i + 2, // header is line 1
                    reason: e.to_string(),
                })?;
                rows.push(row.into_raw());
            }
            rows
        }
    };

    let mut records = Vec::with_capacity(rows.len());
    let mut seen = HashSet::new();
    for (i, raw) in rows.into_iter().enumerate() {
        let record = canonicalize(raw, &platform, path, i + 1)?;
        if !seen.insert(record.id.clone()) {
            return Err(Error::MalformedRow {
                path: path.to_path_buf(),
                row: i + 1,
                reason: format!("duplicate id {:?}", record.id),
            });
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset(path.display().to_string()));
    }
    Ok(PlatformDataset::new(
        platform,
        records,
        Provenance {
            path: path.display().to_string(),
            format: format.to_string(),
        },
    ))
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    id: String,
    text: String,
    #[serde(default, deserialize_with = "csv::invalid_option")]
    age: Option<i64>,
    #[serde(default, deserialize_with = "csv::invalid_option")]
    label: Option<i64>,
}

impl CsvRow {
    fn into_raw(self) -> RawRow {
        RawRow {
            id: self.id,
            text: self.text,
            age: self.age,
            label: self.label,
        }
    }
}

/// Writes records as canonical JSONL.
pub fn save_jsonl(dataset: &PlatformDataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    for record in &dataset.records {
        out.push_str(&serde_json::to_string(record).expect("record serializes"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn dataset_stats(dataset: &PlatformDataset) -> Result<DatasetStats> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset(dataset.platform.to_string()));
    }
    let size = dataset.len();
    let total_tokens: usize = dataset
        .records
        .iter()
        .map(|r| r.text.split_whitespace().count())
        .sum();
    let teens = dataset.records.iter().filter(|r| r.label == LABEL_TEEN).count();
    Ok(DatasetStats {
        size,
        avg_length: total_tokens as f64 / size as f64,
        teenager_ratio: teens as f64 / size as f64,
        year: None,
    })
}

/// Splits record indices by label.
fn class_indices(dataset: &PlatformDataset) -> (Vec<usize>, Vec<usize>) {
    let mut adults = Vec::new();
    let mut teens = Vec::new();
    for (i, r) in dataset.records.iter().enumerate() {
        if r.label == LABEL_TEEN {
            teens.push(i);
        } else {
            adults.push(i);
        }
    }
    (adults, teens)
}

/// Per-class counts that sum to `total` and stay within ±1 of exact
/// proportionality (largest-remainder rounding, capped by availability).
fn proportional_counts(total: usize, n0: usize, n1: usize) -> (usize, usize) {
    let size = n0 + n1;
    let exact1 = total as f64 * n1 as f64 / size as f64;
    let mut c1 = exact1.round() as usize;
    c1 = c1.min(n1).min(total);
    let mut c0 = total - c1;
    if c0 > n0 {
        // shift overflow into the other class
        c1 += c0 - n0;
        c0 = n0;
    }
    (c0, c1)
}

/// Deterministic stratified sample of `n` records.
pub fn stratified_sample(dataset: &PlatformDataset, n: usize, seed: u64) -> Result<PlatformDataset> {
    if n > dataset.len() {
        return Err(Error::SampleTooLarge {
            requested: n,
            available: dataset.len(),
        });
    }
    let (adults, teens) = class_indices(dataset);
    if n >= 2 && (adults.is_empty() || teens.is_empty()) {
        let only = if adults.is_empty() { LABEL_TEEN } else { LABEL_ADULT };
        return Err(Error::SingleClass { only });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (c0, c1) = proportional_counts(n, adults.len(), teens.len());
    let mut adults = adults;
    let mut teens = teens;
    adults.shuffle(&mut rng);
    teens.shuffle(&mut rng);
    let mut chosen: Vec<usize> = adults[..c0].iter().chain(teens[..c1].iter()).copied().collect();
    chosen.shuffle(&mut rng);
    let records = chosen
        .into_iter()
        .map(|i| dataset.records[i].clone())
        .collect();
    Ok(PlatformDataset::new(
        dataset.platform.clone(),
        records,
        dataset.provenance.clone(),
    ))
}

/// Deterministic stratified train/test split; the two parts are disjoint by
/// id and their union covers the input.
pub fn train_test_split(
    dataset: &PlatformDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(PlatformDataset, PlatformDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::DegenerateFraction(test_fraction));
    }
    if dataset.is_empty() {
        return Err(Error::EmptyDataset(dataset.platform.to_string()));
    }
    let n = dataset.len();
    let test_total = ((n as f64 * test_fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let (adults, teens) = class_indices(dataset);
    let (t0, t1) = proportional_counts(test_total, adults.len(), teens.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adults = adults;
    let mut teens = teens;
    adults.shuffle(&mut rng);
    teens.shuffle(&mut rng);
    let test_idx: HashSet<usize> = adults[..t0].iter().chain(teens[..t1].iter()).copied().collect();
    let mut train: Vec<usize> = (0..n).filter(|i| !test_idx.contains(i)).collect();
    let mut test: Vec<usize> = test_idx.into_iter().collect();
    test.sort_unstable();
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);
    let take = |idx: &[usize]| -> Vec<TextRecord> {
        idx.iter().map(|&i| dataset.records[i].clone()).collect()
    };
    Ok((
        PlatformDataset::new(dataset.platform.clone(), take(&train), dataset.provenance.clone()),
        PlatformDataset::new(dataset.platform.clone(), take(&test), dataset.provenance.clone()),
    ))
}
