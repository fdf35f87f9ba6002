//! On-disk cache of generated counterfactual sets. Generation dominates the
//! run time, so sets are stored per sample and reused whenever the run
//! recipe (config digest, seed, k, trained model hashes) is unchanged.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audit::config::AuditConfig;
use crate::audit::report::AuditReport;
use crate::cf::{CounterfactualSet, Provenance};
use crate::error::{Error, Result};

/// Everything a cached set's validity depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheMeta {
    pub config_sha256: String,
    pub seed: u64,
    pub k: usize,
    /// Content hashes of the trained models the sets were generated against,
    /// keyed by report name (decision makers plus the sensitive oracle).
    pub model_hashes: BTreeMap<String, String>,
}

pub fn config_digest(config: &AuditConfig) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

pub struct AuditCache {
    root: PathBuf,
}

impl AuditCache {
    /// Cache directory under the configured output directory.
    pub fn new(output_dir: impl AsRef<Path>) -> AuditCache {
        AuditCache {
            root: output_dir.as_ref().join("cache"),
        }
    }

    pub fn at(dir: impl AsRef<Path>) -> AuditCache {
        AuditCache {
            root: dir.as_ref().to_path_buf(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn meta_path(&self) -> PathBuf {
        self.root.join("meta.json")
    }

    fn sets_dir(&self) -> PathBuf {
        self.root.join("sets")
    }

    fn set_path(&self, model: &str, strategy: Provenance, index: usize) -> PathBuf {
        self.sets_dir()
            .join(model)
            .join(strategy.label())
            .join(format!("{index}.json"))
    }

    /// Make the cache usable for this recipe. Returns true when the existing
    /// cache matches and its sets may be reused; otherwise stale sets are
    /// dropped and the new meta is recorded.
    pub fn prepare(&self, meta: &CacheMeta) -> Result<bool> {
        if self.load_meta().as_ref() == Some(meta) {
            return Ok(true);
        }
        let sets = self.sets_dir();
        if sets.exists() {
            std::fs::remove_dir_all(&sets).map_err(|e| Error::io(&sets, e))?;
        }
        std::fs::create_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))?;
        let path = self.meta_path();
        let text = serde_json::to_vec_pretty(meta)?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(false)
    }

    fn load_meta(&self) -> Option<CacheMeta> {
        let text = std::fs::read_to_string(self.meta_path()).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub fn load_set(
        &self,
        model: &str,
        strategy: Provenance,
        index: usize,
    ) -> Option<CounterfactualSet> {
        let text = std::fs::read_to_string(self.set_path(model, strategy, index)).ok()?;
        CounterfactualSet::from_json(&text).ok()
    }

    pub fn store_set(
        &self,
        model: &str,
        strategy: Provenance,
        index: usize,
        set: &CounterfactualSet,
    ) -> Result<()> {
        let path = self.set_path(model, strategy, index);
        let dir = path.parent().expect("set path has a parent");
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        std::fs::write(&path, set.to_json()?).map_err(|e| Error::io(&path, e))?;
        Ok(())
    }

    /// The assembled report, stored so it can be re-rendered in another
    /// format without re-running the pipeline.
    pub fn store_report(&self, report: &AuditReport) -> Result<()> {
        std::fs::create_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))?;
        let path = self.root.join("report.json");
        let text = serde_json::to_vec_pretty(report)?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(())
    }

    pub fn load_report(&self) -> Result<AuditReport> {
        let path = self.root.join("report.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
