//! The orchestrated pipeline: a JSON config in, tuned models, counterfactual
//! sets, group metrics, a proxy ranking, and deterministic report files out.
//!
//! [`run_audit`] is the whole flow; [`sweep_k`] reuses its cache to trace
//! metric gaps across ranking cut-offs. Generated sets are cached per
//! (model, strategy, test row) under `<output>/cache`, so an interrupted run
//! resumes without regenerating and a sweep after an audit costs nothing.

pub mod cache;
pub mod config;
pub mod report;
pub mod run;

pub use cache::{config_digest, AuditCache, CacheMeta};
pub use config::{
    AuditConfig, CfConfig, DatasetConfig, GeneticOverrides, MetricsConfig, ModelEntry,
    ModelsConfig, OutputConfig, ReportFormat,
};
pub use report::{
    emit_report, AuditReport, Diagnostics, EmptySetDiag, FairnessRow, ManifestEntry,
    ModelEvalRow, NegativeSetDiag, ProxyBlock, Role, UNDEF,
};
pub use run::{run_audit, sweep_k, SweepCurve, SweepPoint, TunedModel};
