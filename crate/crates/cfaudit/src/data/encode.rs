//! Encoding raw tables into numeric matrices, and back.

use std::path::Path;

use super::schema::{EncodedLayout, FeatureKind, FeatureSchema};
use super::table::RawTable;
use crate::error::{Error, Result};

/// Encoded dataset: feature matrix, sensitive bits, target bits.
///
/// Sensitive and target columns live outside `x`; models only ever see `x`.
/// `mad` is indexed by encoded column; one-hot columns hold 1.0 there, which
/// distance code never reads (categorical features contribute via mismatch).
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    /// One vector per sensitive attribute, 1 = privileged.
    pub s: Vec<Vec<u8>>,
    /// 1 = favorable outcome.
    pub y: Vec<u8>,
    pub schema: FeatureSchema,
    pub layout: EncodedLayout,
    pub mad: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn sensitive_index(&self, name: &str) -> Result<usize> {
        self.schema
            .sensitive
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| Error::Data(format!("sensitive attribute '{name}' not found")))
    }

    /// Rows at `indices`, in the given order, with MAD recomputed on the
    /// subset so train-split statistics come from the train split alone.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let x: Vec<Vec<f64>> = indices.iter().map(|&i| self.x[i].clone()).collect();
        let s = self
            .s
            .iter()
            .map(|col| indices.iter().map(|&i| col[i]).collect())
            .collect();
        let y = indices.iter().map(|&i| self.y[i]).collect();
        let mad = column_mads(&x, &self.layout);
        Dataset {
            x,
            s,
            y,
            schema: self.schema.clone(),
            layout: self.layout.clone(),
            mad,
        }
    }

    /// Human-readable values of one encoded row, in schema feature order.
    pub fn decode_row(&self, row: &[f64]) -> Result<Vec<String>> {
        decode_row(&self.layout, row)
    }

    /// Debug snapshot: encoded matrix plus sensitive and target columns.
    pub fn write_csv_snapshot(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let mut header: Vec<String> = self
            .layout
            .columns
            .iter()
            .map(|c| c.name.clone())
            .collect();
        for spec in &self.schema.sensitive {
            header.push(format!("s:{}", spec.name));
        }
        header.push("y".into());
        w.write_record(&header)?;
        for (i, row) in self.x.iter().enumerate() {
            let mut record: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            for col in &self.s {
                record.push(col[i].to_string());
            }
            record.push(self.y[i].to_string());
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Decode one encoded vector against a layout: scalars print their value,
/// one-hot blocks print the active category.
pub fn decode_row(layout: &EncodedLayout, row: &[f64]) -> Result<Vec<String>> {
    if row.len() != layout.width() {
        return Err(Error::Data(format!(
            "row width {} does not match layout width {}",
            row.len(),
            layout.width()
        )));
    }
    let mut out = Vec::with_capacity(layout.blocks.len());
    for block in &layout.blocks {
        match block.kind {
            FeatureKind::Numeric | FeatureKind::Ordinal => {
                out.push(format!("{}", row[block.start]));
            }
            FeatureKind::Categorical => {
                let j = block.active_category(row).ok_or_else(|| {
                    Error::Data(format!(
                        "one-hot block '{}' does not have exactly one active column",
                        block.name
                    ))
                })?;
                out.push(block.categories[j].clone());
            }
        }
    }
    Ok(out)
}

/// Encode a raw table under a schema. Numeric cells are range-checked,
/// categorical cells must be declared, sensitive and target columns are
/// mapped to {0,1}. MAD is computed per scalar column with a floor of 1.0.
pub fn encode(raw: &RawTable, schema: &FeatureSchema) -> Result<Dataset> {
    schema.validate()?;
    let layout = schema.layout();

    let mut feature_cols = Vec::with_capacity(schema.features.len());
    for spec in &schema.features {
        feature_cols.push(raw.column_index(&spec.name)?);
    }
    let mut sensitive_cols = Vec::with_capacity(schema.sensitive.len());
    for spec in &schema.sensitive {
        sensitive_cols.push(raw.column_index(&spec.name)?);
    }
    let target_col = raw.column_index(&schema.target.name)?;

    let mut x = Vec::with_capacity(raw.len());
    let mut s: Vec<Vec<u8>> = vec![Vec::with_capacity(raw.len()); schema.sensitive.len()];
    let mut y = Vec::with_capacity(raw.len());

    for row in &raw.rows {
        let mut enc = Vec::with_capacity(layout.width());
        for (spec, &col) in schema.features.iter().zip(&feature_cols) {
            let cell = row[col].as_str();
            match spec.kind {
                FeatureKind::Numeric | FeatureKind::Ordinal => {
                    let v: f64 = cell.parse().map_err(|_| {
                        Error::Parse(format!(
                            "feature '{}' has non-numeric cell '{cell}'",
                            spec.name
                        ))
                    })?;
                    let (lo, hi) = spec.range.expect("validated scalar has a range");
                    if v < lo || v > hi {
                        return Err(Error::Data(format!(
                            "feature '{}' value {v} outside declared range [{lo}, {hi}]",
                            spec.name
                        )));
                    }
                    enc.push(v);
                }
                FeatureKind::Categorical => {
                    let hit = spec.categories.iter().position(|c| c == cell);
                    let hit = hit.ok_or_else(|| {
                        Error::Data(format!(
                            "category '{cell}' not declared for feature '{}'",
                            spec.name
                        ))
                    })?;
                    for j in 0..spec.categories.len() {
                        enc.push(if j == hit { 1.0 } else { 0.0 });
                    }
                }
            }
        }
        x.push(enc);
        for (si, (spec, &col)) in schema.sensitive.iter().zip(&sensitive_cols).enumerate() {
            s[si].push(u8::from(row[col] == spec.privileged_value));
        }
        y.push(u8::from(row[target_col] == schema.target.positive_value));
    }

    let mad = column_mads(&x, &layout);
    Ok(Dataset {
        x,
        s,
        y,
        schema: schema.clone(),
        layout,
        mad,
    })
}

/// Per-column median absolute deviation for scalar columns, 1.0 elsewhere.
/// A zero MAD (constant column) is floored to 1.0.
pub fn column_mads(x: &[Vec<f64>], layout: &EncodedLayout) -> Vec<f64> {
    let mut mad = vec![1.0; layout.width()];
    for &col in &layout.scalar_columns() {
        let values: Vec<f64> = x.iter().map(|row| row[col]).collect();
        let m = mad_of(&values);
        mad[col] = if m > 0.0 { m } else { 1.0 };
    }
    mad
}

fn mad_of(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let med = median(values);
    let dev: Vec<f64> = values.iter().map(|v| (v - med).abs()).collect();
    median(&dev)
}

/// Standard sample median: middle value, or mean of the two middles.
pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in encoded data"));
    let n = sorted.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::{FeatureSpec, SensitiveSpec, TargetSpec};
    use crate::data::table::{load_csv_raw, ParseOptions};

    fn schema() -> FeatureSchema {
        FeatureSchema::new(
            vec![
                FeatureSpec::numeric("age", 0.0, 120.0),
                FeatureSpec::categorical("job", ["Private", "Public", "Unemployed"]),
                FeatureSpec::numeric("flat", 0.0, 10.0),
            ],
            vec![SensitiveSpec {
                name: "gender".into(),
                privileged_value: "male".into(),
            }],
            TargetSpec {
                name: "income".into(),
                positive_value: ">50K".into(),
            },
        )
        .unwrap()
    }

    fn table() -> RawTable {
        let csv = "age,job,flat,gender,income\n\
                   39,Private,5,male,>50K\n\
                   28,Public,5,female,<=50K\n\
                   45,Unemployed,5,male,<=50K\n\
                   51,Public,5,female,>50K\n\
                   33,Private,5,male,>50K\n";
        load_csv_raw(csv.as_bytes(), &ParseOptions::default())
            .unwrap()
            .0
    }

    #[test]
    fn one_hot_places_second_category_as_010() {
        let data = encode(&table(), &schema()).unwrap();
        // Row 1 has job=Public, the second declared category.
        assert_eq!(&data.x[1][1..4], &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn sensitive_and_target_map_to_bits() {
        let data = encode(&table(), &schema()).unwrap();
        assert_eq!(data.s[0], vec![1, 0, 1, 0, 1]);
        assert_eq!(data.y, vec![1, 0, 0, 1, 1]);
    }

    #[test]
    fn constant_column_mad_floors_to_one() {
        let data = encode(&table(), &schema()).unwrap();
        let flat_col = data.layout.blocks[2].start;
        assert_eq!(data.mad[flat_col], 1.0);
        // age column: values 39,28,45,51,33; median 39, deviations 0,11,6,12,6 -> median 6.
        assert_eq!(data.mad[0], 6.0);
    }

    #[test]
    fn undeclared_category_is_an_error() {
        let mut t = table();
        t.rows[0][1] = "Freelance".into();
        let err = encode(&t, &schema()).unwrap_err();
        assert!(err.to_string().contains("Freelance"));
    }

    #[test]
    fn out_of_range_value_is_an_error() {
        let mut t = table();
        t.rows[0][0] = "300".into();
        let err = encode(&t, &schema()).unwrap_err();
        assert!(err.to_string().contains("outside declared range"));
    }

    #[test]
    fn decode_round_trips_every_row() {
        let data = encode(&table(), &schema()).unwrap();
        let raw = table();
        for (i, row) in data.x.iter().enumerate() {
            let decoded = data.decode_row(row).unwrap();
            assert_eq!(decoded[0], raw.rows[i][0]);
            assert_eq!(decoded[1], raw.rows[i][1]);
        }
    }

    #[test]
    fn subset_recomputes_mad() {
        let data = encode(&table(), &schema()).unwrap();
        let sub = data.subset(&[0, 2]);
        assert_eq!(sub.len(), 2);
        assert_eq!(sub.y, vec![1, 0]);
        // ages 39,45: median 42, deviations 3,3 -> MAD 3.
        assert_eq!(sub.mad[0], 3.0);
    }

    #[test]
    fn snapshot_writes_encoded_columns() {
        let data = encode(&table(), &schema()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.csv");
        data.write_csv_snapshot(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "age,job=Private,job=Public,job=Unemployed,flat,s:gender,y"
        );
        assert_eq!(lines.next().unwrap(), "39,1,0,0,5,1,1");
    }
}
