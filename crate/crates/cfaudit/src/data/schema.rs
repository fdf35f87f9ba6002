//! Feature schemas and the encoded column layout they induce.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a raw column is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// Real-valued; encoded as one column, distance scaled by MAD.
    Numeric,
    /// Integer-indexed ordered values; treated numerically in distances.
    Ordinal,
    /// Unordered labels; encoded as a one-hot block.
    Categorical,
}

/// Declaration of one non-sensitive feature.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    /// Category labels in declared order (categorical only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    /// Observed [min, max] bounds (numeric/ordinal only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<(f64, f64)>,
    /// May the counterfactual generator change this feature?
    #[serde(default = "default_true")]
    pub mutable: bool,
}

fn default_true() -> bool {
    true
}

impl FeatureSpec {
    pub fn numeric(name: impl Into<String>, min: f64, max: f64) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Numeric,
            categories: Vec::new(),
            range: Some((min, max)),
            mutable: true,
        }
    }

    pub fn ordinal(name: impl Into<String>, min: f64, max: f64) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Ordinal,
            categories: Vec::new(),
            range: Some((min, max)),
            mutable: true,
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Categorical,
            categories: categories.into_iter().map(Into::into).collect(),
            range: None,
            mutable: true,
        }
    }

    pub fn immutable(mut self) -> Self {
        self.mutable = false;
        self
    }

    fn validate(&self) -> Result<()> {
        match self.kind {
            FeatureKind::Categorical => {
                if self.categories.len() < 2 {
                    return Err(Error::Schema(format!(
                        "categorical feature '{}' declares {} categories; need at least 2",
                        self.name,
                        self.categories.len()
                    )));
                }
                let unique: BTreeSet<&str> =
                    self.categories.iter().map(String::as_str).collect();
                if unique.len() != self.categories.len() {
                    return Err(Error::Schema(format!(
                        "categorical feature '{}' declares duplicate categories",
                        self.name
                    )));
                }
            }
            FeatureKind::Numeric | FeatureKind::Ordinal => {
                let (lo, hi) = self.range.ok_or_else(|| {
                    Error::Schema(format!("feature '{}' needs a range", self.name))
                })?;
                if !(lo <= hi) {
                    return Err(Error::Schema(format!(
                        "feature '{}' has inverted range [{lo}, {hi}]",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A sensitive attribute: column name plus the value marking the privileged group.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitiveSpec {
    pub name: String,
    pub privileged_value: String,
}

/// The target column and the value marking the favorable outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetSpec {
    pub name: String,
    pub positive_value: String,
}

/// Typed description of every column the audit uses.
///
/// The layout `d = <x, s, y>` is enforced structurally: sensitive and target
/// columns are declared apart from the feature list and never enter the
/// encoded feature matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<FeatureSpec>,
    pub sensitive: Vec<SensitiveSpec>,
    pub target: TargetSpec,
}

impl FeatureSchema {
    pub fn new(
        features: Vec<FeatureSpec>,
        sensitive: Vec<SensitiveSpec>,
        target: TargetSpec,
    ) -> Result<Self> {
        let schema = FeatureSchema {
            features,
            sensitive,
            target,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for spec in &self.features {
            spec.validate()?;
            if !seen.insert(spec.name.as_str()) {
                return Err(Error::Schema(format!(
                    "duplicate feature name '{}'",
                    spec.name
                )));
            }
        }
        for s in &self.sensitive {
            if seen.contains(s.name.as_str()) {
                return Err(Error::Schema(format!(
                    "sensitive column '{}' also listed as a feature",
                    s.name
                )));
            }
        }
        if seen.contains(self.target.name.as_str()) {
            return Err(Error::Schema(format!(
                "target column '{}' also listed as a feature",
                self.target.name
            )));
        }
        if self
            .sensitive
            .iter()
            .any(|s| s.name == self.target.name)
        {
            return Err(Error::Schema(format!(
                "target column '{}' also listed as sensitive",
                self.target.name
            )));
        }
        Ok(())
    }

    /// Every raw column the schema touches, in schema order.
    pub fn column_names(&self) -> Vec<&str> {
        self.features
            .iter()
            .map(|f| f.name.as_str())
            .chain(self.sensitive.iter().map(|s| s.name.as_str()))
            .chain(std::iter::once(self.target.name.as_str()))
            .collect()
    }

    pub fn feature(&self, name: &str) -> Option<&FeatureSpec> {
        self.features.iter().find(|f| f.name == name)
    }

    /// The encoded column layout this schema induces. Deterministic:
    /// column order follows feature order, category order as declared.
    pub fn layout(&self) -> EncodedLayout {
        let mut columns = Vec::new();
        let mut blocks = Vec::new();
        for (fi, spec) in self.features.iter().enumerate() {
            let start = columns.len();
            match spec.kind {
                FeatureKind::Numeric | FeatureKind::Ordinal => {
                    columns.push(EncodedColumn {
                        name: spec.name.clone(),
                        feature: fi,
                        kind: spec.kind,
                    });
                }
                FeatureKind::Categorical => {
                    for cat in &spec.categories {
                        columns.push(EncodedColumn {
                            name: format!("{}={}", spec.name, cat),
                            feature: fi,
                            kind: spec.kind,
                        });
                    }
                }
            }
            blocks.push(FeatureBlock {
                feature: fi,
                name: spec.name.clone(),
                kind: spec.kind,
                mutable: spec.mutable,
                start,
                width: columns.len() - start,
                range: spec.range,
                categories: spec.categories.clone(),
            });
        }
        EncodedLayout { columns, blocks }
    }
}

impl FeatureSchema {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let schema: FeatureSchema = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_json_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Build a schema by reading ranges and category sets off the data itself.
/// Kinds and order come from the caller; categories are sorted to keep the
/// one-hot layout independent of row order.
pub fn infer_schema(
    table: &super::table::RawTable,
    kinds: &[(&str, FeatureKind)],
    immutable: &[&str],
    sensitive: Vec<SensitiveSpec>,
    target: TargetSpec,
) -> Result<FeatureSchema> {
    let mut features = Vec::with_capacity(kinds.len());
    for &(name, kind) in kinds {
        let values = table.column(name)?;
        let mut spec = match kind {
            FeatureKind::Numeric | FeatureKind::Ordinal => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for v in &values {
                    let x: f64 = v.parse().map_err(|_| {
                        Error::Parse(format!("column '{name}' has non-numeric cell '{v}'"))
                    })?;
                    lo = lo.min(x);
                    hi = hi.max(x);
                }
                if values.is_empty() {
                    return Err(Error::Data(format!(
                        "cannot infer range of '{name}' from an empty table"
                    )));
                }
                FeatureSpec {
                    name: name.into(),
                    kind,
                    categories: Vec::new(),
                    range: Some((lo, hi)),
                    mutable: true,
                }
            }
            FeatureKind::Categorical => {
                let cats: BTreeSet<&str> = values.iter().copied().collect();
                FeatureSpec::categorical(name, cats)
            }
        };
        spec.mutable = !immutable.contains(&name);
        features.push(spec);
    }
    FeatureSchema::new(features, sensitive, target)
}

/// One column of the encoded feature matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedColumn {
    /// `feature` for scalars, `feature=category` for one-hot columns.
    pub name: String,
    /// Index into the schema's feature list.
    pub feature: usize,
    pub kind: FeatureKind,
}

/// The encoded span of one schema feature.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureBlock {
    pub feature: usize,
    pub name: String,
    pub kind: FeatureKind,
    pub mutable: bool,
    /// First encoded column of the block.
    pub start: usize,
    /// Number of encoded columns (1 for scalars, category count for one-hot).
    pub width: usize,
    pub range: Option<(f64, f64)>,
    pub categories: Vec<String>,
}

impl FeatureBlock {
    pub fn cols(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.width
    }

    /// Index of the active category in this block, if exactly one column is 1.
    pub fn active_category(&self, row: &[f64]) -> Option<usize> {
        let mut hit = None;
        for (j, col) in self.cols().enumerate() {
            if row[col] > 0.5 {
                if hit.is_some() {
                    return None;
                }
                hit = Some(j);
            }
        }
        hit
    }
}

/// Deterministic mapping from schema features to encoded matrix columns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EncodedLayout {
    pub columns: Vec<EncodedColumn>,
    pub blocks: Vec<FeatureBlock>,
}

impl EncodedLayout {
    pub fn width(&self) -> usize {
        self.columns.len()
    }

    /// Stable fingerprint of the layout; models refuse data whose hash differs.
    pub fn hash(&self) -> u64 {
        let mut h = crate::seed::label("layout");
        for col in &self.columns {
            h = crate::seed::derive(h, &[crate::seed::label(&col.name), col.kind as u64]);
        }
        h
    }

    /// Indices of scalar (numeric/ordinal) columns; the ones models standardize.
    pub fn scalar_columns(&self) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind != FeatureKind::Categorical)
            .map(|(i, _)| i)
            .collect()
    }
}
