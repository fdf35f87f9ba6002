//! Audit run configuration: one JSON document drives the whole pipeline.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cf::{FitnessWeights, GeneticParams, Provenance};
use crate::error::{Error, Result};
use crate::model::ModelSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    /// Root seed; every random choice in the run derives from it.
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub models: ModelsConfig,
    pub cf: CfConfig,
    pub metrics: MetricsConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub csv: PathBuf,
    pub schema: PathBuf,
    pub test_fraction: f64,
    /// Separate split seed; derived from the root seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_seed: Option<u64>,
    /// Sensitive attribute the audit runs on; defaults to the schema's first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensitive: Option<String>,
    /// Drop features whose encoded columns correlate with the sensitive
    /// attribute beyond this threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation_filter: Option<f64>,
    /// Per-column category merges applied before encoding.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub condense: BTreeMap<String, BTreeMap<String, String>>,
    /// Cell values treated as missing; None keeps the parser defaults.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub missing_tokens: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelsConfig {
    pub decision: Vec<ModelEntry>,
    pub sensitive: Vec<ModelEntry>,
    /// Cross-validation folds for both tuning passes.
    #[serde(default = "default_folds")]
    pub folds: usize,
}

fn default_folds() -> usize {
    5
}

/// One named model slot: the grid is searched, the winner keeps the name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub name: String,
    pub grid: Vec<ModelSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CfConfig {
    pub strategies: Vec<Provenance>,
    /// Counterfactuals generated per sample; cut-offs truncate this pool.
    pub k: usize,
    /// Cap on audited samples per side-agnostic negative set; a larger set
    /// is subsampled deterministically.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_samples: Option<usize>,
    /// Features the generators must not touch, by name.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub immutable: Vec<String>,
    #[serde(default)]
    pub genetic: GeneticOverrides,
}

/// Optional knobs for the genetic generator; unset fields keep the defaults
/// sized for the configured k.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneticOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutation_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crossover_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<FitnessWeights>,
}

impl GeneticOverrides {
    pub fn resolve(&self, k: usize, seed: u64) -> GeneticParams {
        let mut p = GeneticParams::for_k(k, seed);
        if let Some(v) = self.population {
            p.population = v;
        }
        if let Some(v) = self.generations {
            p.generations = v;
        }
        if let Some(v) = self.mutation_rate {
            p.mutation_rate = v;
        }
        if let Some(v) = self.crossover_rate {
            p.crossover_rate = v;
        }
        if let Some(w) = &self.weights {
            p.weights = w.clone();
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    /// Ranking cut-offs reported per metric, e.g. [10, 50, 100].
    pub cutoffs: Vec<usize>,
    /// Also report the discounted metric after boundary-score re-ranking.
    #[serde(default)]
    pub rerank: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<ReportFormat>,
}

impl AuditConfig {
    /// Parse and validate a config file. Relative dataset and output paths
    /// are resolved against the config file's directory.
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<AuditConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: AuditConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            config.anchor_paths(base);
        }
        config.validate()?;
        Ok(config)
    }

    fn anchor_paths(&mut self, base: &Path) {
        for p in [
            &mut self.dataset.csv,
            &mut self.dataset.schema,
            &mut self.output.dir,
        ] {
            if p.is_relative() {
                *p = base.join(&p);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        let d = &self.dataset;
        if !(d.test_fraction > 0.0 && d.test_fraction < 1.0) {
            return fail(format!(
                "test_fraction must lie in (0,1), got {}",
                d.test_fraction
            ));
        }
        if let Some(t) = d.correlation_filter {
            if !(t > 0.0 && t <= 1.0) {
                return fail(format!(
                    "correlation_filter must lie in (0,1], got {t}"
                ));
            }
        }

        for (role, entries) in [
            ("decision", &self.models.decision),
            ("sensitive", &self.models.sensitive),
        ] {
            if entries.is_empty() {
                return fail(format!("models.{role} must name at least one model"));
            }
            let mut names = std::collections::BTreeSet::new();
            for e in entries {
                if e.grid.is_empty() {
                    return fail(format!("model '{}' has an empty grid", e.name));
                }
                if !names.insert(&e.name) {
                    return fail(format!("duplicate {role} model name '{}'", e.name));
                }
            }
        }
        if self.models.folds < 2 {
            return fail(format!("folds must be at least 2, got {}", self.models.folds));
        }

        let cf = &self.cf;
        if cf.strategies.is_empty() {
            return fail("cf.strategies must not be empty".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &cf.strategies {
            if !seen.insert(s.label()) {
                return fail(format!("duplicate strategy '{}'", s.label()));
            }
        }
        if cf.k < 1 {
            return fail("cf.k must be at least 1".into());
        }
        if let Some(m) = cf.max_samples {
            if m < 1 {
                return fail("cf.max_samples must be at least 1".into());
            }
        }

        let m = &self.metrics;
        if m.cutoffs.is_empty() {
            return fail("metrics.cutoffs must not be empty".into());
        }
        if let Some(&bad) = m.cutoffs.iter().find(|&&c| c < 1) {
            return fail(format!("cut-off {bad} is below 1"));
        }
        let max_cut = *m.cutoffs.iter().max().expect("non-empty");
        if cf.k < max_cut {
            return fail(format!(
                "cf.k = {} is smaller than the largest cut-off {max_cut}",
                cf.k
            ));
        }

        if self.output.formats.is_empty() {
            return fail("output.formats must not be empty".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LogregHyper;

    fn minimal() -> AuditConfig {
        AuditConfig {
            seed: 7,
            dataset: DatasetConfig {
                csv: "data.csv".into(),
                schema: "schema.json".into(),
                test_fraction: 0.2,
                split_seed: None,
                sensitive: None,
                correlation_filter: None,
                condense: BTreeMap::new(),
                missing_tokens: None,
            },
            models: ModelsConfig {
                decision: vec![ModelEntry {
                    name: "logreg".into(),
                    grid: vec![ModelSpec::Logreg(LogregHyper::default())],
                }],
                sensitive: vec![ModelEntry {
                    name: "sens".into(),
                    grid: vec![ModelSpec::Logreg(LogregHyper::default())],
                }],
                folds: 5,
            },
            cf: CfConfig {
                strategies: vec![Provenance::KnownSpace],
                k: 10,
                max_samples: None,
                immutable: vec![],
                genetic: GeneticOverrides::default(),
            },
            metrics: MetricsConfig {
                cutoffs: vec![5, 10],
                rerank: false,
            },
            output: OutputConfig {
                dir: "out".into(),
                formats: vec![ReportFormat::Csv],
            },
        }
    }

    #[test]
    fn minimal_config_round_trips_and_validates() {
        let config = minimal();
        config.validate().unwrap();
        let text = serde_json::to_string_pretty(&config).unwrap();
        let back: AuditConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn cutoff_above_k_is_rejected() {
        let mut config = minimal();
        config.metrics.cutoffs = vec![10, 50];
        let err = config.validate().unwrap_err();
        assert!(err.to_string().contains("cut-off"), "{err}");
    }

    #[test]
    fn structural_mistakes_are_rejected() {
        let mut c = minimal();
        c.cf.strategies.clear();
        assert!(c.validate().is_err());

        let mut c = minimal();
        c.models.decision.clear();
        assert!(c.validate().is_err());

        let mut c = minimal();
        c.models.decision[0].grid.clear();
        assert!(c.validate().is_err());

        let mut c = minimal();
        c.models.sensitive.push(c.models.sensitive[0].clone());
        assert!(c.validate().is_err());

        let mut c = minimal();
        c.dataset.test_fraction = 1.0;
        assert!(c.validate().is_err());

        let mut c = minimal();
        c.output.formats.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn file_loading_anchors_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let config = minimal();
        let path = dir.path().join("audit.json");
        std::fs::write(&path, serde_json::to_string(&config).unwrap()).unwrap();
        let loaded = AuditConfig::from_json_file(&path).unwrap();
        assert_eq!(loaded.dataset.csv, dir.path().join("data.csv"));
        assert_eq!(loaded.output.dir, dir.path().join("out"));

        std::fs::write(&path, "{\"seed\": 1}").unwrap();
        let err = AuditConfig::from_json_file(&path).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn genetic_overrides_fill_in_defaults() {
        let overrides = GeneticOverrides {
            population: Some(64),
            mutation_rate: Some(0.25),
            ..GeneticOverrides::default()
        };
        let p = overrides.resolve(10, 3);
        assert_eq!(p.population, 64);
        assert_eq!(p.mutation_rate, 0.25);
        let default = GeneticParams::for_k(10, 3);
        assert_eq!(p.generations, default.generations);
        assert_eq!(p.weights, default.weights);
        assert_eq!(p.seed, 3);
    }

    #[test]
    fn strategy_names_parse_from_snake_case() {
        let cf: CfConfig = serde_json::from_str(
            "{\"strategies\": [\"genetic\", \"known_space\"], \"k\": 100}",
        )
        .unwrap();
        assert_eq!(
            cf.strategies,
            vec![Provenance::Genetic, Provenance::KnownSpace]
        );
    }
}
