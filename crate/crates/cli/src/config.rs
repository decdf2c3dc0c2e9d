//! The TOML run file read by `polysrl train`.
//!
//! ```toml
//! variant = "simple_polyglot"        # mono | simple_polyglot | lang_id | lang_specific_lstm
//! languages = ["cat", "eng"]
//! output = "runs/cat-eng"
//!
//! [model]                            # all optional
//! scale = "desk"                     # desk (3x32) | full (4x300)
//! hidden_size = 64
//!
//! [train]                            # all optional
//! max_epochs = 40
//! seed = 3
//!
//! [data.cat]
//! train = "cat/train.conll09"
//! dev = "cat/dev.conll09"
//! vectors = "cat/vectors.100.txt"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use polysrl::model::{ModelConfig, Variant};
use polysrl::training::TrainConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Desk,
    Full,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default)]
    pub scale: Scale,
    pub shared_layers: Option<usize>,
    pub hidden_size: Option<usize>,
    pub indicator_dim: Option<usize>,
    pub lang_id_dim: Option<usize>,
    pub dropout: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub train: PathBuf,
    pub dev: Option<PathBuf>,
    pub vectors: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub variant: Variant,
    pub languages: Vec<String>,
    pub output: PathBuf,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainConfig,
    pub data: BTreeMap<String, DataPaths>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config: RunConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        for lang in &config.languages {
            if !config.data.contains_key(lang) {
                bail!("no [data.{}] section for listed language {}", lang, lang);
            }
        }
        Ok(config)
    }

    /// Rewrites relative data and output paths against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        self.output = resolve(base, &self.output);
        for d in self.data.values_mut() {
            d.train = resolve(base, &d.train);
            d.vectors = resolve(base, &d.vectors);
            d.dev = d.dev.as_ref().map(|p| resolve(base, p));
        }
    }

    pub fn model_config(&self, word_dim: usize) -> ModelConfig {
        let langs: Vec<&str> = self.languages.iter().map(String::as_str).collect();
        let base = match self.model.scale {
            Scale::Desk => ModelConfig::desk(self.variant, &langs, word_dim),
            Scale::Full => ModelConfig {
                word_dim,
                ..ModelConfig::paper_scale(self.variant, &langs)
            },
        };
        let m = &self.model;
        ModelConfig {
            shared_layers: m.shared_layers.unwrap_or(base.shared_layers),
            hidden_size: m.hidden_size.unwrap_or(base.hidden_size),
            indicator_dim: m.indicator_dim.unwrap_or(base.indicator_dim),
            lang_id_dim: m.lang_id_dim.unwrap_or(base.lang_id_dim),
            dropout: m.dropout.unwrap_or(base.dropout),
            ..base
        }
    }
}

pub fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}
