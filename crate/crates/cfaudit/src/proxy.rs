//! Proxy-feature probe: correlate counterfactual perturbations with shifts
//! in the sensitive classifier's score.
//!
//! Each counterfactual contributes one perturbation row (per-column feature
//! deltas) and one score delta. Pairs are pooled over every audited sample
//! and every rank into a single population, then each encoded column gets a
//! Pearson correlation against the score deltas. A strongly correlated
//! column moves the sensitive prediction whenever counterfactuals touch it,
//! which is what makes it a proxy.

use serde::{Deserialize, Serialize};

use crate::cf::CounterfactualSet;
use crate::data::{pearson, FeatureSchema};
use crate::error::{Error, Result};
use crate::metrics::NegativeSet;
use crate::model::Classifier;
use crate::par;

/// Feature-space difference of one counterfactual against its origin.
/// Scalar columns carry the raw difference; one-hot columns carry +1 for the
/// engaged category, -1 for the removed one, 0 elsewhere, so each block sums
/// to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRow {
    pub origin_index: Option<usize>,
    pub rank: usize,
    pub eps: Vec<f64>,
}

/// Shift of the sensitive classifier's score for one counterfactual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaScore {
    pub origin_index: Option<usize>,
    pub rank: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyEntry {
    pub column: String,
    pub rho: f64,
    pub pairs: usize,
}

/// Per-column correlations sorted by signed rho, most positive first.
/// Columns whose pooled perturbations never vary are listed separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyRanking {
    pub entries: Vec<ProxyEntry>,
    pub excluded: Vec<ExcludedColumn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedColumn {
    pub column: String,
    pub note: String,
}

/// One perturbation row per counterfactual, in rank order. One-hot blocks
/// need no special casing: the elementwise difference of two valid one-hot
/// vectors is exactly the +1/-1/0 coding.
pub fn perturbations(
    x: &[f64],
    set: &CounterfactualSet,
    schema: &FeatureSchema,
) -> Result<Vec<PerturbationRow>> {
    let width = schema.layout().width();
    if x.len() != width {
        return Err(Error::Metric(format!(
            "origin width {} does not match layout width {width}",
            x.len()
        )));
    }
    set.items
        .iter()
        .map(|item| {
            if item.vector.len() != width {
                return Err(Error::Metric(format!(
                    "counterfactual width {} does not match layout width {width}",
                    item.vector.len()
                )));
            }
            Ok(PerturbationRow {
                origin_index: set.origin_index,
                rank: item.rank,
                eps: item.vector.iter().zip(x).map(|(c, o)| c - o).collect(),
            })
        })
        .collect()
}

/// One score shift per counterfactual, aligned with `perturbations` order.
pub fn delta_scores<S>(sens: &S, x: &[f64], set: &CounterfactualSet) -> Vec<DeltaScore>
where
    S: Classifier + ?Sized,
{
    let base = sens.score(x);
    set.items
        .iter()
        .map(|item| DeltaScore {
            origin_index: set.origin_index,
            rank: item.rank,
            value: sens.score(&item.vector) - base,
        })
        .collect()
}

/// Pool perturbation/delta pairs across the audited samples and rank every
/// encoded column by its correlation with the score shifts.
pub fn proxy_rank<S>(
    neg: &NegativeSet,
    sets: &[CounterfactualSet],
    sens: &S,
    schema: &FeatureSchema,
) -> Result<ProxyRanking>
where
    S: Classifier + ?Sized,
{
    if sets.len() != neg.len() {
        return Err(Error::Metric(format!(
            "expected one counterfactual set per negative sample, got {} for {}",
            sets.len(),
            neg.len()
        )));
    }
    let layout = schema.layout();
    if sens.layout_hash() != layout.hash() {
        return Err(Error::Model(
            "model was trained on a different encoded layout".into(),
        ));
    }

    let per_sample: Vec<Result<(Vec<PerturbationRow>, Vec<DeltaScore>)>> =
        par::map_indexed(sets.len(), |i| {
            let set = &sets[i];
            let rows = perturbations(&set.origin, set, schema)?;
            let deltas = delta_scores(sens, &set.origin, set);
            Ok((rows, deltas))
        });

    let mut eps_cols: Vec<Vec<f64>> = vec![Vec::new(); layout.width()];
    let mut deltas: Vec<f64> = Vec::new();
    for sample in per_sample {
        let (rows, ds) = sample?;
        for (row, d) in rows.iter().zip(&ds) {
            for (col, &e) in row.eps.iter().enumerate() {
                eps_cols[col].push(e);
            }
            deltas.push(d.value);
        }
    }
    if deltas.len() < 2 {
        return Err(Error::Metric(format!(
            "proxy ranking needs at least 2 pooled pairs, got {}",
            deltas.len()
        )));
    }

    let mut entries = Vec::new();
    let mut excluded = Vec::new();
    for (col, values) in eps_cols.iter().enumerate() {
        let name = layout.columns[col].name.clone();
        match pearson(values, &deltas) {
            Some(rho) => entries.push(ProxyEntry {
                column: name,
                rho,
                pairs: deltas.len(),
            }),
            None => excluded.push(ExcludedColumn {
                column: name,
                note: "zero variance".into(),
            }),
        }
    }
    entries.sort_by(|a, b| b.rho.partial_cmp(&a.rho).unwrap());
    Ok(ProxyRanking { entries, excluded })
}
