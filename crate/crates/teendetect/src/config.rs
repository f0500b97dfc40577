//! Declarative run configuration: a versioned JSON document describing the
//! datasets, the experiment grid and the output directory, plus the executor
//! that turns one into results.csv / table.txt / manifest.json.
//!
//! Reruns with the same config are deterministic; the only output column that
//! varies between runs is wall_secs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adaptation::{write_traces_csv, Hyperparams};
use crate::corpus::{load_dataset, Format, Platform, PlatformDataset};
use crate::encoder::{save_checkpoint, EncoderConfig};
use crate::error::{Error, Result};
use crate::evaluation::{
    default_cross_platform_pairs, default_in_platform_pairs, run_grid, Components,
    DatasetRegistry, GridResult, GridSettings,
};
use crate::nn::fnv1a;
use crate::synthetic::{generate, SyntheticSpec};

pub const CONFIG_VERSION: u32 = 1;

/// Environment variable overriding `output_dir`.
pub const ENV_OUT: &str = "TEENDETECT_OUT";
/// Environment variable overriding `seeds` with a single seed.
pub const ENV_SEED: &str = "TEENDETECT_SEED";

/// One dataset: either a file on disk or a generated synthetic corpus.
/// Exactly one of the two shapes must be filled in.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub platform: Option<Platform>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

impl DatasetSource {
    pub fn from_file(platform: Platform, path: PathBuf, format: Format) -> Self {
        DatasetSource {
            synthetic: None,
            platform: Some(platform),
            path: Some(path),
            format: Some(format),
        }
    }

    pub fn from_synthetic(spec: SyntheticSpec) -> Self {
        DatasetSource {
            synthetic: Some(spec),
            ..Default::default()
        }
    }

    pub fn platform(&self) -> Result<Platform> {
        if let Some(spec) = &self.synthetic {
            return Ok(Platform::Synthetic(spec.name.clone()));
        }
        self.platform
            .clone()
            .ok_or_else(|| Error::InvalidConfig("dataset entry has no platform".into()))
    }

    fn validate(&self, index: usize) -> Result<()> {
        match (&self.synthetic, &self.platform, &self.path, &self.format) {
            (Some(spec), None, None, None) => spec.validate(),
            (None, Some(_), Some(_), Some(_)) => Ok(()),
            (Some(_), _, _, _) => Err(Error::InvalidConfig(format!(
                "datasets[{index}]: a synthetic entry must not also set platform/path/format"
            ))),
            _ => Err(Error::InvalidConfig(format!(
                "datasets[{index}]: a file entry needs platform, path and format"
            ))),
        }
    }

    fn load(&self, base_dir: &Path) -> Result<PlatformDataset> {
        if let Some(spec) = &self.synthetic {
            return generate(spec);
        }
        let path = resolve(base_dir, self.path.as_ref().unwrap());
        load_dataset(
            &path,
            *self.format.as_ref().unwrap(),
            self.platform.clone().unwrap(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMode {
    Cross,
    InPlatform,
}

/// Which cells to run. Omitted pairs/variants fall back to the defaults for
/// the chosen mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub mode: GridMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<(Platform, Platform)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variants: Option<Vec<String>>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            mode: GridMode::Cross,
            pairs: None,
            variants: None,
        }
    }
}

fn default_version() -> u32 {
    CONFIG_VERSION
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_n_train() -> Option<usize> {
    Some(700)
}

fn default_test_fraction() -> f64 {
    0.2
}

fn default_encoder() -> EncoderConfig {
    EncoderConfig::toy(32)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub datasets: Vec<DatasetSource>,
    /// Optional JSON file with externally curated lexicon terms:
    /// a list of [term, weight] pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_lexicon: Option<PathBuf>,
    #[serde(default = "default_encoder")]
    pub encoder: EncoderConfig,
    #[serde(default)]
    pub hyperparams: Hyperparams,
    /// Hyperparameters for the adversarial phase; omitted means reuse
    /// `hyperparams`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adapt_hyperparams: Option<Hyperparams>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_n_train")]
    pub n_train: Option<usize>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub allow_pan13_source: bool,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// Write the adapted target encoder of every A-enabled cell under
    /// checkpoints/. Off by default: checkpoints dwarf every other artifact.
    #[serde(default)]
    pub save_checkpoints: bool,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("config parse error: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.datasets.is_empty() {
            return Err(Error::InvalidConfig("datasets must not be empty".into()));
        }
        let mut seen = Vec::new();
        for (i, source) in self.datasets.iter().enumerate() {
            source.validate(i)?;
            let platform = source.platform()?;
            if seen.contains(&platform) {
                return Err(Error::InvalidConfig(format!(
                    "platform {platform} appears twice in datasets"
                )));
            }
            seen.push(platform);
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("seeds must not be empty".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::DegenerateFraction(self.test_fraction));
        }
        self.hyperparams.validate()?;
        if let Some(hp) = &self.adapt_hyperparams {
            hp.validate()?;
        }
        for pair in &self.resolved_pairs() {
            for platform in [&pair.0, &pair.1] {
                if !seen.contains(platform) {
                    return Err(Error::InvalidConfig(format!(
                        "grid pair {}->{} references platform {platform} with no dataset",
                        pair.0, pair.1
                    )));
                }
            }
        }
        self.resolved_variants()?;
        Ok(())
    }

    /// Applies the two supported environment overrides: output directory and
    /// a single replacement seed.
    pub fn apply_env_overrides(&mut self) -> Result<()> {
        let out = std::env::var(ENV_OUT).ok();
        let seed = std::env::var(ENV_SEED).ok();
        self.apply_overrides(out.as_deref(), seed.as_deref())
    }

    pub fn apply_overrides(&mut self, out: Option<&str>, seed: Option<&str>) -> Result<()> {
        if let Some(out) = out {
            self.output_dir = PathBuf::from(out);
        }
        if let Some(seed) = seed {
            let seed: u64 = seed.parse().map_err(|_| {
                Error::InvalidConfig(format!("{ENV_SEED} must be an unsigned integer, got {seed:?}"))
            })?;
            self.seeds = vec![seed];
        }
        Ok(())
    }

    pub fn resolved_pairs(&self) -> Vec<(Platform, Platform)> {
        match &self.grid.pairs {
            Some(pairs) => pairs.clone(),
            None => match self.grid.mode {
                GridMode::Cross => default_cross_platform_pairs(),
                GridMode::InPlatform => default_in_platform_pairs(),
            },
        }
    }

    pub fn resolved_variants(&self) -> Result<Vec<Components>> {
        match &self.grid.variants {
            Some(names) => names.iter().map(|n| Components::parse(n)).collect(),
            None => Ok(match self.grid.mode {
                GridMode::Cross => Components::cross_platform_variants(),
                GridMode::InPlatform => Components::in_platform_variants(),
            }),
        }
    }

    /// Content hash of the canonical JSON form, recorded in the manifest so
    /// a results directory can be tied back to the config that produced it.
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", fnv1a(canonical.as_bytes()))
    }
}

fn resolve(base_dir: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base_dir.join(path)
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Loads every dataset and the external lexicon into a registry.
pub fn build_registry(config: &RunConfig, base_dir: &Path) -> Result<DatasetRegistry> {
    let mut registry = DatasetRegistry::new();
    for source in &config.datasets {
        registry.insert(source.load(base_dir)?);
    }
    if let Some(rel) = &config.external_lexicon {
        let path = resolve(base_dir, rel);
        let text = fs::read_to_string(&path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        registry.external_lexicon = serde_json::from_str(&text).map_err(|e| {
            Error::InvalidConfig(format!("external lexicon {}: {e}", path.display()))
        })?;
    }
    Ok(registry)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: u32,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub pairs: Vec<String>,
    pub variants: Vec<String>,
    pub cells: usize,
    pub failed_cells: usize,
}

#[derive(Debug)]
pub struct RunOutput {
    pub output_dir: PathBuf,
    pub grid: GridResult,
    pub manifest: RunManifest,
}

fn artifact_stem(cell_source: &Platform, cell_target: &Platform, variant: &str, seed: u64) -> String {
    // ':' from synthetic platform names is not filename-safe everywhere
    format!("{cell_source}_{cell_target}_{variant}_{seed}").replace(':', "-")
}

/// Runs the configured grid and writes results.csv, table.txt, manifest.json
/// and per-cell adaptation traces into the output directory. Inputs are never
/// modified; rerunning overwrites the outputs with identical bytes except for
/// the wall_secs column.
pub fn execute(config: &RunConfig, base_dir: &Path) -> Result<RunOutput> {
    config.validate()?;
    let registry = build_registry(config, base_dir)?;
    let pairs = config.resolved_pairs();
    let variants = config.resolved_variants()?;
    let settings = GridSettings {
        n_train: config.n_train,
        hyperparams: config.hyperparams.clone(),
        adapt_hyperparams: config.adapt_hyperparams.clone(),
        encoder: config.encoder.clone(),
        allow_pan13_source: config.allow_pan13_source,
        test_fraction: config.test_fraction,
        keep_target_checkpoints: config.save_checkpoints,
    };
    let grid = run_grid(&pairs, &variants, &config.seeds, &registry, &settings);

    let out = resolve(base_dir, &config.output_dir);
    fs::create_dir_all(&out).map_err(|e| Error::Io {
        path: out.clone(),
        source: e,
    })?;
    write_file(&out.join("results.csv"), grid.to_csv().as_bytes())?;
    write_file(&out.join("table.txt"), grid.render_table().as_bytes())?;

    let traces_dir = out.join("traces");
    let checkpoints_dir = out.join("checkpoints");
    for cell in &grid.cells {
        let Ok(result) = &cell.outcome else { continue };
        let stem = artifact_stem(&cell.source, &cell.target, &cell.variant, cell.seed);
        if !result.adaptation_traces.is_empty() {
            fs::create_dir_all(&traces_dir).map_err(|e| Error::Io {
                path: traces_dir.clone(),
                source: e,
            })?;
            write_traces_csv(
                &result.adaptation_traces,
                &traces_dir.join(format!("{stem}.csv")),
            )?;
        }
        if let Some(encoder) = &result.target_checkpoint {
            fs::create_dir_all(&checkpoints_dir).map_err(|e| Error::Io {
                path: checkpoints_dir.clone(),
                source: e,
            })?;
            save_checkpoint(encoder, &checkpoints_dir.join(format!("{stem}.json")))?;
        }
    }

    let manifest = RunManifest {
        version: CONFIG_VERSION,
        config_hash: config.content_hash(),
        seeds: config.seeds.clone(),
        pairs: pairs
            .iter()
            .map(|(s, t)| format!("{s}->{t}"))
            .collect(),
        variants: variants.iter().map(|v| v.variant_name()).collect(),
        cells: grid.cells.len(),
        failed_cells: grid.cells.iter().filter(|c| c.outcome.is_err()).count(),
    };
    let manifest_json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::InvalidConfig(format!("manifest serialization: {e}")))?;
    write_file(&out.join("manifest.json"), manifest_json.as_bytes())?;

    Ok(RunOutput {
        output_dir: out,
        grid,
        manifest,
    })
}
