use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use dmn_core::data::{DatasetConfig, LogFormat};
use dmn_core::model::ModelConfig;
use dmn_core::sampling::GenConfig;
use dmn_core::text::{BuiltinProvider, RemoteProvider, TextProvider};
use dmn_core::threads::ThreadConfig;
use dmn_core::train::TrainConfig;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "DMN_SEED";

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub path: Option<PathBuf>,
    /// Guessed from the extension when absent.
    pub format: Option<LogFormat>,
}

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProviderConfig {
    // a struct variant so that stray keys are rejected
    Builtin {},
    Remote {
        url: String,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
    },
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig::Builtin {}
    }
}

fn default_timeout() -> u64 {
    30
}

/// Whole-run configuration file. Relative paths are resolved against the
/// directory holding the file.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// When set, replaces the model init, training and generation seeds.
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    pub trials: usize,
    /// Run the thread engine on generated streams.
    pub emails: bool,
    pub data: DataSection,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub generate: GenConfig,
    pub threads: ThreadConfig,
    pub provider: ProviderConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            output_dir: PathBuf::from("out"),
            trials: 1,
            emails: false,
            data: DataSection::default(),
            dataset: DatasetConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            generate: GenConfig::default(),
            threads: ThreadConfig::default(),
            provider: ProviderConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))
    }

    /// Reads, resolves paths, applies the seed override and validates.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        if let Ok(v) = std::env::var(SEED_ENV) {
            let seed = v.trim().parse().map_err(|_| CliError::Usage(format!("{SEED_ENV} must be an unsigned integer, got `{v}`")))?;
            cfg.seed = Some(seed);
        }
        cfg.apply_seed();
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        self.output_dir = join(&self.output_dir);
        self.data.path = self.data.path.as_deref().map(join);
    }

    pub fn apply_seed(&mut self) {
        if let Some(s) = self.seed {
            self.model.init_seed = s;
            self.train.seed = s;
            self.generate.seed = s;
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        self.train.validate()?;
        self.threads.validate()?;
        self.generate.horizon()?;
        if self.trials == 0 {
            return Err(CliError::Usage("trials must be at least 1".into()));
        }
        let m = &self.model;
        if m.components == 0 || m.d_embed == 0 || m.d_hidden == 0 || m.d_sender_hidden == 0 {
            return Err(CliError::Usage("model sizes must be positive".into()));
        }
        if let ProviderConfig::Remote { url, .. } = &self.provider {
            if !(url.starts_with("http://") || url.starts_with("https://")) {
                return Err(CliError::Usage(format!("provider url must be http(s), got `{url}`")));
            }
        }
        Ok(())
    }

    /// The event log, which must exist.
    pub fn data_path(&self) -> CliResult<&Path> {
        let p = self.data.path.as_deref().ok_or_else(|| CliError::Usage("config has no [data] path".into()))?;
        if !p.is_file() {
            return Err(CliError::Usage(format!("dataset not found: {}", p.display())));
        }
        Ok(p)
    }

    pub fn data_format(&self) -> CliResult<LogFormat> {
        Ok(self.data.format.unwrap_or_else(|| LogFormat::from_path(self.data.path.as_deref().unwrap_or(Path::new("")))))
    }

    /// Builtin provider trained on `corpus` lines plus the bundled corpus, or the remote one.
    pub fn provider(&self, corpus: &[String]) -> Arc<dyn TextProvider> {
        match &self.provider {
            ProviderConfig::Builtin {} => Arc::new(BuiltinProvider::with_texts(corpus)),
            ProviderConfig::Remote { url, timeout_secs } => Arc::new(RemoteProvider::new(url, Duration::from_secs(*timeout_secs))),
        }
    }
}
