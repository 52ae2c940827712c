//! Experiment configuration: one TOML file with a section per module,
//! optionally layered over a named per-dataset profile.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::fuzzy::{FuzzyConfig, OptimConfig};
use crate::induce::Heuristic;
use crate::kb::{ExpressionThreshold, Stemmer};
use crate::synthetic::SyntheticConfig;

use super::{validate_ratios, HarnessError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationVariant {
    Tilde,
    TildeSimilar,
    TildeLtnConstants,
    TildeLtnAll,
    HandcraftedSimilar,
    HandcraftedLtnConstants,
    HandcraftedLtnAll,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 7] = [
        AblationVariant::Tilde,
        AblationVariant::TildeSimilar,
        AblationVariant::TildeLtnConstants,
        AblationVariant::TildeLtnAll,
        AblationVariant::HandcraftedSimilar,
        AblationVariant::HandcraftedLtnConstants,
        AblationVariant::HandcraftedLtnAll,
    ];

    pub fn id(self) -> &'static str {
        match self {
            AblationVariant::Tilde => "tilde",
            AblationVariant::TildeSimilar => "tilde_similar",
            AblationVariant::TildeLtnConstants => "tilde_ltn_constants",
            AblationVariant::TildeLtnAll => "tilde_ltn_all",
            AblationVariant::HandcraftedSimilar => "handcrafted_similar",
            AblationVariant::HandcraftedLtnConstants => "handcrafted_ltn_constants",
            AblationVariant::HandcraftedLtnAll => "handcrafted_ltn_all",
        }
    }

    /// Row label in the formatted table.
    pub fn label(self) -> &'static str {
        match self {
            AblationVariant::Tilde => "TILDE",
            AblationVariant::TildeSimilar => "TILDE+similar",
            AblationVariant::TildeLtnConstants => "TILDE+LTN constants",
            AblationVariant::TildeLtnAll => "TILDE+LTN all",
            AblationVariant::HandcraftedSimilar => "Hand-crafted+similar",
            AblationVariant::HandcraftedLtnConstants => "Hand-crafted+LTN constants",
            AblationVariant::HandcraftedLtnAll => "Hand-crafted+LTN all",
        }
    }

    pub fn is_handcrafted(self) -> bool {
        matches!(
            self,
            AblationVariant::HandcraftedSimilar | AblationVariant::HandcraftedLtnConstants | AblationVariant::HandcraftedLtnAll
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    /// Generated in process; no files needed.
    Synthetic {
        id: String,
        #[serde(default)]
        generator: SyntheticConfig,
    },
    /// Delimited `id,text,label` records plus a token-vector embedding file.
    Text {
        id: String,
        records: PathBuf,
        embeddings: PathBuf,
        #[serde(default = "default_delimiter")]
        delimiter: char,
        /// Binarizes numeric labels to "1"/"0" by `score > threshold`.
        #[serde(default)]
        label_threshold: Option<f64>,
        #[serde(default)]
        stemmer: Stemmer,
    },
    /// Expression, mutation and copy-number matrices plus a label file.
    Omics {
        id: String,
        expression: PathBuf,
        mutation: PathBuf,
        cna: PathBuf,
        labels: PathBuf,
        embeddings: PathBuf,
        #[serde(default = "default_delimiter")]
        delimiter: char,
        #[serde(default = "default_feature_cap")]
        feature_cap: usize,
        #[serde(default = "default_threshold")]
        threshold: ExpressionThreshold,
    },
    /// A ready-made fact file.
    Facts { id: String, facts: PathBuf, embeddings: PathBuf },
}

fn default_delimiter() -> char {
    ','
}
fn default_feature_cap() -> usize {
    1000
}
fn default_threshold() -> ExpressionThreshold {
    ExpressionThreshold::PerGeneMedian
}

impl DatasetConfig {
    pub fn id(&self) -> &str {
        match self {
            DatasetConfig::Synthetic { id, .. }
            | DatasetConfig::Text { id, .. }
            | DatasetConfig::Omics { id, .. }
            | DatasetConfig::Facts { id, .. } => id,
        }
    }

    /// Membership predicates coupled with `similar/2` by default.
    pub fn default_predicates(&self) -> Vec<String> {
        match self {
            DatasetConfig::Omics { .. } => vec!["expression".into(), "mutation".into(), "cna".into()],
            _ => vec!["contains_word".into()],
        }
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match self {
            DatasetConfig::Synthetic { .. } => {}
            DatasetConfig::Text { records, embeddings, .. } => {
                fix(records);
                fix(embeddings);
            }
            DatasetConfig::Omics { expression, mutation, cna, labels, embeddings, .. } => {
                for p in [expression, mutation, cna, labels, embeddings] {
                    fix(p);
                }
            }
            DatasetConfig::Facts { facts, embeddings, .. } => {
                fix(facts);
                fix(embeddings);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    /// Train, validation, test.
    pub ratios: [f64; 3],
    pub seed: u64,
    /// Draw this many instances (seeded) before splitting.
    #[serde(default)]
    pub sample: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InduceConfig {
    pub minimal_cases: usize,
    #[serde(default = "default_pool_cap")]
    pub constant_pool_cap: usize,
    #[serde(default)]
    pub heuristic: Heuristic,
    /// Class whose F1 is reported and which ranks pooled constants.
    pub positive_class: String,
    /// Membership predicates; the dataset kind decides when empty.
    #[serde(default)]
    pub predicates: Vec<String>,
}

fn default_pool_cap() -> usize {
    500
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationConfig {
    pub variants: Vec<AblationVariant>,
    pub undersample: bool,
    /// Rule file for the hand-crafted rows.
    #[serde(default)]
    pub handcrafted_rules: Option<PathBuf>,
    /// Seed sweep; `split.seed` alone when empty.
    #[serde(default)]
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub split: SplitConfig,
    pub induce: InduceConfig,
    pub fuzzy: FuzzyConfig,
    pub optim: OptimConfig,
    pub ablation: AblationConfig,
}

const COMMON: &str = r#"
[ablation]
variants = ["tilde", "tilde_similar", "tilde_ltn_constants", "tilde_ltn_all",
            "handcrafted_similar", "handcrafted_ltn_constants", "handcrafted_ltn_all"]
"#;

/// Per-dataset defaults. The three corpus profiles need a `[dataset]`
/// section from the user; `synthetic` is complete on its own.
pub const PROFILES: [(&str, &str); 4] = [
    (
        "hate",
        r#"
[split]
ratios = [0.5, 0.25, 0.25]
seed = 42
sample = 2000
[induce]
minimal_cases = 50
positive_class = "1"
[fuzzy]
tau = 0.75
[optim]
learning_rate = 1e-3
[ablation]
undersample = false
"#,
    ),
    (
        "spam",
        r#"
[split]
ratios = [0.7142857142857143, 0.14285714285714285, 0.14285714285714285]
seed = 42
sample = 3500
[induce]
minimal_cases = 50
positive_class = "spam"
[fuzzy]
tau = 0.7
[optim]
learning_rate = 1e-1
[ablation]
undersample = true
"#,
    ),
    (
        "drug",
        r#"
[split]
ratios = [0.6, 0.2, 0.2]
seed = 42
[induce]
minimal_cases = 20
positive_class = "responder"
[fuzzy]
tau = 0.5
[optim]
learning_rate = 5e-4
[ablation]
undersample = true
"#,
    ),
    (
        "synthetic",
        r#"
[dataset]
kind = "synthetic"
id = "synthetic"
[split]
ratios = [0.5, 0.25, 0.25]
seed = 42
[induce]
minimal_cases = 5
positive_class = "pos"
[fuzzy]
tau = 0.7
[optim]
learning_rate = 2e-2
max_epochs = 100
[ablation]
undersample = false
"#,
    ),
];

fn profile_table(name: &str) -> Result<toml::Table, HarnessError> {
    let (_, text) = PROFILES
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| HarnessError::Config(format!("unknown profile `{name}`; expected one of hate, spam, drug, synthetic")))?;
    let mut base: toml::Table = COMMON.parse().expect("built-in profile parses");
    merge(&mut base, text.parse().expect("built-in profile parses"));
    Ok(base)
}

/// Recursively overlays `top` onto `base`; tables merge, everything else replaces.
fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl ExperimentConfig {
    /// Parses a config; a top-level `profile = "<name>"` key layers the
    /// file over that profile's defaults. Relative paths resolve against
    /// `base_dir`. Schema errors name the offending key path.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, HarnessError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        if let Some(p) = table.remove("profile") {
            let name = p.as_str().ok_or_else(|| HarnessError::Config("`profile` must be a string".into()))?.to_owned();
            let mut base = profile_table(&name)?;
            merge(&mut base, table);
            table = base;
        }
        let mut cfg: ExperimentConfig = serde_path_to_error::deserialize(table).map_err(|e| {
            let path = e.path().to_string();
            HarnessError::Config(format!("at `{path}`: {}", e.into_inner()))
        })?;
        cfg.dataset.resolve(base_dir);
        if let Some(p) = cfg.ablation.handcrafted_rules.as_mut() {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn profile(name: &str) -> Result<Self, HarnessError> {
        Self::from_toml(&format!("profile = \"{name}\"\n"), Path::new("."))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        validate_ratios(self.split.ratios)?;
        if self.induce.minimal_cases == 0 || self.induce.constant_pool_cap == 0 {
            return Err(HarnessError::Config("minimal_cases and constant_pool_cap must be at least 1".into()));
        }
        self.fuzzy.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.ablation.variants.is_empty() {
            return Err(HarnessError::Config("ablation.variants is empty".into()));
        }
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        if self.ablation.seeds.is_empty() {
            vec![self.split.seed]
        } else {
            self.ablation.seeds.clone()
        }
    }

    pub fn predicates(&self) -> Vec<String> {
        if self.induce.predicates.is_empty() {
            self.dataset.default_predicates()
        } else {
            self.induce.predicates.clone()
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
