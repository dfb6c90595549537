//! The pipeline configuration document.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use lanlan_core::classify::Learner;
use lanlan_core::cooccur::CooccurConfig;
use lanlan_core::embed::TrainingConfig;
use lanlan_core::growth::{GrowthConfig, McmcConfig, NlsConfig};
use lanlan_core::ingest::ProgramSpec;
use lanlan_core::stats::AssociationConfig;

use crate::workspace::{CliError, CliResult};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputPaths {
    /// Stack Exchange `Posts.xml`.
    pub dump: Option<PathBuf>,
    /// Question TSV with `id, title, body, date, program` columns.
    pub questions: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub packages: Option<PathBuf>,
    /// Independent cumulative problem series (e.g. from a bug tracker) for
    /// the paired area test.
    pub reference_series: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSettings {
    pub learner: Learner,
    pub folds: usize,
}

impl Default for ClassifierSettings {
    fn default() -> Self {
        Self { learner: Learner::default(), folds: 10 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrowthSettings {
    pub nls: NlsConfig,
    pub mcmc: McmcConfig,
    pub train_fraction: f64,
    /// Fill in unannotated questions from `predictions.tsv`.
    pub use_predictions: bool,
}

impl Default for GrowthSettings {
    fn default() -> Self {
        Self {
            nls: NlsConfig::default(),
            mcmc: McmcConfig::default(),
            train_fraction: 0.5,
            use_predictions: true,
        }
    }
}

impl GrowthSettings {
    pub fn model(&self) -> GrowthConfig {
        GrowthConfig { nls: self.nls.clone(), mcmc: self.mcmc.clone() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub workspace: Option<PathBuf>,
    pub seed: Option<u64>,
    pub paths: InputPaths,
    pub programs: Vec<ProgramSpec>,
    pub cooccur: CooccurConfig,
    /// Independent accumulators merged after counting.
    pub cooccur_shards: usize,
    pub embedding: TrainingConfig,
    pub classifier: ClassifierSettings,
    pub stats: AssociationConfig,
    pub growth: GrowthSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            workspace: None,
            seed: None,
            paths: InputPaths::default(),
            programs: Vec::new(),
            cooccur: CooccurConfig::default(),
            cooccur_shards: 8,
            embedding: TrainingConfig::default(),
            classifier: ClassifierSettings::default(),
            stats: AssociationConfig::default(),
            growth: GrowthSettings::default(),
        }
    }
}

/// A parsed configuration plus the directory its relative paths hang off.
pub struct LoadedConfig {
    pub config: PipelineConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self { config: PipelineConfig::default(), base_dir: PathBuf::from(".") });
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        let config: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("invalid config {}: {e}", path.display())))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { config, base_dir })
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// The configuration as hashed into manifests; the workspace location
    /// is left out so that identical runs in different places agree.
    pub fn hash_view(&self) -> Value {
        let mut c = self.config.clone();
        c.workspace = None;
        serde_json::to_value(c).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c: PipelineConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c.classifier.folds, 10);
        assert_eq!(c.cooccur.window, 15);
        assert_eq!(c.growth.train_fraction, 0.5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"embeding": {}}"#).is_err());
    }

    #[test]
    fn learner_is_tagged() {
        let c: PipelineConfig =
            serde_json::from_str(r#"{"classifier": {"learner": {"kind": "linear_svm", "c": 2.0}}}"#).unwrap();
        assert!(matches!(c.classifier.learner, Learner::LinearSvm(ref s) if s.c == 2.0));
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let loaded = LoadedConfig { config: PipelineConfig::default(), base_dir: PathBuf::from("/data/run") };
        assert_eq!(loaded.resolve(Path::new("posts.xml")), PathBuf::from("/data/run/posts.xml"));
        assert_eq!(loaded.resolve(Path::new("/abs/x")), PathBuf::from("/abs/x"));
    }
}
