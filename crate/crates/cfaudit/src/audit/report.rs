//! Report assembly and emission: flat CSVs for plotting, a JSON mirror for
//! machines, and a manifest of content hashes so reruns can be compared.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audit::config::ReportFormat;
use crate::cf::Provenance;
use crate::data::LoadReport;
use crate::error::{Error, Result};
use crate::proxy::ProxyRanking;

/// Literal marker for a group cell left undefined by an empty side. Kept
/// textual so downstream tools cannot mistake it for a measured zero.
pub const UNDEF: &str = "undef(0*)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Decision,
    Sensitive,
}

impl Role {
    pub fn label(self) -> &'static str {
        match self {
            Role::Decision => "decision",
            Role::Sensitive => "sensitive",
        }
    }
}

/// Test-split evaluation of one tuned model. The classical fairness gaps
/// apply to decision makers only and stay empty on sensitive rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEvalRow {
    pub name: String,
    pub role: Role,
    pub family: String,
    pub cv_objective: String,
    pub cv_mean: f64,
    pub auc: Option<f64>,
    pub acc: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub dsp: Option<f64>,
    pub deo: Option<f64>,
    pub dao: Option<f64>,
}

/// One metric at one cut-off for one decision model and strategy. `None`
/// sides are undefined (empty or fully skipped), never zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessRow {
    pub model: String,
    pub strategy: Provenance,
    pub k: usize,
    pub metric: String,
    pub privileged: Option<f64>,
    pub unprivileged: Option<f64>,
    pub delta: Option<f64>,
    pub contributing_privileged: usize,
    pub contributing_unprivileged: usize,
    pub skipped_privileged: usize,
    pub skipped_unprivileged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyBlock {
    pub model: String,
    pub strategy: Provenance,
    pub ranking: ProxyRanking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativeSetDiag {
    pub model: String,
    pub total: usize,
    pub privileged: usize,
    pub unprivileged: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsampled_to: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmptySetDiag {
    pub model: String,
    pub strategy: Provenance,
    pub empty_sets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub seed: u64,
    pub k: usize,
    pub cutoffs: Vec<usize>,
    pub strategies: Vec<Provenance>,
    pub sensitive_attribute: String,
    /// Sensitive model whose predictions label the counterfactuals.
    pub sensitive_oracle: String,
    pub ingest: LoadReport,
    pub filtered_columns: Vec<String>,
    pub train_rows: usize,
    pub test_rows: usize,
    /// Statistical parity of the raw labels, before any model.
    pub ex_ante_sp: f64,
    pub negative_sets: Vec<NegativeSetDiag>,
    pub empty_counterfactual_sets: Vec<EmptySetDiag>,
    /// Group cells in the fairness table left undefined.
    pub undefined_sides: usize,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub model_eval: Vec<ModelEvalRow>,
    pub fairness: Vec<FairnessRow>,
    pub proxy: Vec<ProxyBlock>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn undef_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| UNDEF.into())
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], manifest: &mut Vec<ManifestEntry>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    manifest.push(ManifestEntry {
        file: name.to_string(),
        sha256: hex_digest(bytes),
        bytes: bytes.len() as u64,
    });
    Ok(())
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn model_eval_csv(rows: &[ModelEvalRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "name", "role", "family", "cv_objective", "cv_mean", "auc", "acc", "precision",
        "recall", "f1", "dsp", "deo", "dao",
    ])?;
    for r in rows {
        w.write_record([
            r.name.clone(),
            r.role.label().into(),
            r.family.clone(),
            r.cv_objective.clone(),
            r.cv_mean.to_string(),
            opt_cell(r.auc),
            r.acc.to_string(),
            r.precision.to_string(),
            r.recall.to_string(),
            r.f1.to_string(),
            opt_cell(r.dsp),
            opt_cell(r.deo),
            opt_cell(r.dao),
        ])?;
    }
    Ok(w.into_inner().expect("vec writer"))
}

fn fairness_csv(rows: &[FairnessRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "strategy", "k", "metric", "side", "value", "contributing", "skipped"])?;
    for r in rows {
        let sides = [
            ("privileged", r.privileged, Some((r.contributing_privileged, r.skipped_privileged))),
            ("unprivileged", r.unprivileged, Some((r.contributing_unprivileged, r.skipped_unprivileged))),
            ("delta", r.delta, None),
        ];
        for (side, value, counts) in sides {
            let (contributing, skipped) = match counts {
                Some((c, s)) => (c.to_string(), s.to_string()),
                None => (String::new(), String::new()),
            };
            w.write_record([
                r.model.clone(),
                r.strategy.label().into(),
                r.k.to_string(),
                r.metric.clone(),
                side.into(),
                undef_cell(value),
                contributing,
                skipped,
            ])?;
        }
    }
    Ok(w.into_inner().expect("vec writer"))
}

fn proxy_csv(blocks: &[ProxyBlock]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "strategy", "column", "rho", "pairs"])?;
    for b in blocks {
        for e in &b.ranking.entries {
            w.write_record([
                b.model.clone(),
                b.strategy.label().into(),
                e.column.clone(),
                e.rho.to_string(),
                e.pairs.to_string(),
            ])?;
        }
    }
    Ok(w.into_inner().expect("vec writer"))
}

/// Write the report into `dir` in the requested formats and return the
/// manifest, which is also written as manifest.json. Rendering is fully
/// deterministic: identical reports produce byte-identical files.
pub fn emit_report(
    report: &AuditReport,
    formats: &[ReportFormat],
    dir: impl AsRef<Path>,
) -> Result<Vec<ManifestEntry>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = Vec::new();

    if formats.contains(&ReportFormat::Csv) {
        write_file(dir, "model_eval.csv", &model_eval_csv(&report.model_eval)?, &mut manifest)?;
        write_file(dir, "fairness.csv", &fairness_csv(&report.fairness)?, &mut manifest)?;
        write_file(dir, "proxy_rank.csv", &proxy_csv(&report.proxy)?, &mut manifest)?;
        let diag = serde_json::to_vec_pretty(&report.diagnostics)?;
        write_file(dir, "diagnostics.json", &diag, &mut manifest)?;
    }
    if formats.contains(&ReportFormat::Json) {
        let full = serde_json::to_vec_pretty(report)?;
        write_file(dir, "report.json", &full, &mut manifest)?;
    }

    manifest.sort_by(|a, b| a.file.cmp(&b.file));
    let listing = serde_json::to_vec_pretty(&manifest)?;
    let path = dir.join("manifest.json");
    std::fs::write(&path, &listing).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
