//! Run configuration: a TOML file, overridden by flags, resolved against the output root.

use std::path::{Path, PathBuf};

use aes3d_core::ablation::find_preset;
use aes3d_core::annotation::LabelVariant;
use aes3d_core::model::ModelConfig;
use aes3d_core::training::TrainConfig;
use aes3d_core::util::config_hash;
use anyhow::Context;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::Invalid;

pub const OUTPUT_ROOT_VAR: &str = "AES3D_OUTPUT_ROOT";
pub const DEFAULT_SEEDS: [u64; 3] = [7, 13, 42];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub scene_dir: Option<PathBuf>,
    pub camera_manifest: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    /// Scene index written by `ingest`.
    pub index: Option<PathBuf>,
    /// Label file written by `annotate`.
    pub labels: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            scene_dir: None,
            camera_manifest: None,
            annotations: None,
            index: None,
            labels: None,
            output_dir: PathBuf::from("runs"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub label_variant: LabelVariant,
    pub seeds: Vec<u64>,
    pub test_fraction: f64,
    pub ablation: Option<String>,
    pub parallel_seeds: bool,
    pub paths: Paths,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            label_variant: LabelVariant::Attr8,
            seeds: DEFAULT_SEEDS.to_vec(),
            test_fraction: 0.2,
            ablation: None,
            parallel_seeds: false,
            paths: Paths::default(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelSize {
    Default,
    Desk,
    Tiny,
}

impl ModelSize {
    fn config(self) -> ModelConfig {
        match self {
            ModelSize::Default => ModelConfig::default(),
            ModelSize::Desk => ModelConfig::desk(),
            ModelSize::Tiny => ModelConfig::tiny(),
        }
    }
}

/// Flags shared by every run command; each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub scene_dir: Option<PathBuf>,
    #[arg(long)]
    pub cameras: Option<PathBuf>,
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Relative paths land under $AES3D_OUTPUT_ROOT when it is set.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, value_parser = parse_variant)]
    pub label_variant: Option<LabelVariant>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[arg(long)]
    pub ablation: Option<String>,
    /// Run seeds on separate threads.
    #[arg(long)]
    pub parallel_seeds: bool,
    /// Replace the model section with a named size.
    #[arg(long, value_enum)]
    pub model_size: Option<ModelSize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

fn parse_variant(s: &str) -> Result<LabelVariant, String> {
    s.parse().map_err(|e| format!("{e}"))
}

/// The fully resolved configuration of one command invocation.
#[derive(Debug, Clone)]
pub struct Effective {
    pub run: RunConfig,
    pub hash: String,
}

impl Effective {
    pub fn output_dir(&self) -> &Path {
        &self.run.paths.output_dir
    }

    /// Training config for one seed.
    pub fn train_for(&self, seed: u64) -> TrainConfig {
        TrainConfig { seed, ..self.run.train.clone() }
    }

    /// Writes the effective config next to the outputs of `command`.
    pub fn write(&self, command: &str) -> anyhow::Result<PathBuf> {
        std::fs::create_dir_all(self.output_dir())?;
        let path = self.output_dir().join(format!("config.{command}.toml"));
        let body = toml::to_string_pretty(&self.run).context("serializing effective config")?;
        std::fs::write(&path, format!("# config hash {}\n{body}", self.hash))?;
        Ok(path)
    }
}

pub fn load(args: &RunArgs) -> anyhow::Result<Effective> {
    let mut run = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Invalid(format!("{}: {e}", path.display())))?;
            toml::from_str::<RunConfig>(&text).map_err(|e| Invalid(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    let p = &mut run.paths;
    override_opt(&mut p.scene_dir, &args.scene_dir);
    override_opt(&mut p.camera_manifest, &args.cameras);
    override_opt(&mut p.annotations, &args.annotations);
    override_opt(&mut p.index, &args.index);
    override_opt(&mut p.labels, &args.labels);
    if let Some(dir) = &args.output_dir {
        p.output_dir = dir.clone();
    }
    if let Some(v) = args.label_variant {
        run.label_variant = v;
    }
    if let Some(s) = &args.seeds {
        run.seeds = s.clone();
    }
    if let Some(f) = args.test_fraction {
        run.test_fraction = f;
    }
    if args.ablation.is_some() {
        run.ablation = args.ablation.clone();
    }
    run.parallel_seeds |= args.parallel_seeds;
    if let Some(size) = args.model_size {
        run.train.model = size.config();
    }
    if let Some(e) = args.epochs {
        run.train.epochs = e;
    }
    if let Some(lr) = args.learning_rate {
        run.train.learning_rate = lr;
    }
    if let Some(b) = args.batch_size {
        run.train.batch_size = b;
    }
    if let Some(name) = &run.ablation {
        let preset = find_preset(name).ok_or_else(|| Invalid(format!("unknown ablation preset {name:?}")))?;
        run.train = preset.apply(&run.train);
    }
    if run.paths.output_dir.is_relative() {
        if let Some(root) = std::env::var_os(OUTPUT_ROOT_VAR) {
            run.paths.output_dir = PathBuf::from(root).join(&run.paths.output_dir);
        }
    }
    validate(&run)?;
    let hash = config_hash(&run);
    Ok(Effective { run, hash })
}

fn override_opt(slot: &mut Option<PathBuf>, flag: &Option<PathBuf>) {
    if flag.is_some() {
        *slot = flag.clone();
    }
}

fn validate(run: &RunConfig) -> Result<(), Invalid> {
    let p = &run.paths;
    for (name, path) in [
        ("scene_dir", &p.scene_dir),
        ("camera_manifest", &p.camera_manifest),
        ("annotations", &p.annotations),
        ("index", &p.index),
        ("labels", &p.labels),
    ] {
        if let Some(path) = path {
            if !path.exists() {
                return Err(Invalid(format!("{name} {} does not exist", path.display())));
            }
        }
    }
    if run.seeds.is_empty() {
        return Err(Invalid("at least one seed is required".into()));
    }
    if !(run.test_fraction > 0.0 && run.test_fraction < 1.0) {
        return Err(Invalid(format!("test_fraction must lie in (0, 1), got {}", run.test_fraction)));
    }
    run.train.validate().map_err(|e| Invalid(e.to_string()))
}

/// The path `what` of the config, or a validation error naming the flag.
pub fn require<'a>(path: &'a Option<PathBuf>, what: &str, flag: &str) -> Result<&'a Path, Invalid> {
    path.as_deref().ok_or_else(|| Invalid(format!("{what} is required (set {flag} or paths in the config)")))
}
