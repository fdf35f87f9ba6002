//! Raw tabular ingestion: CSV parsing, missing-value handling, category
//! relabeling. Everything here stays in string space; encoding happens later.

use std::collections::BTreeMap;
use std::path::Path;

use super::schema::{FeatureKind, FeatureSchema};
use crate::error::{Error, Result};

/// Parsing knobs for the raw file. Defaults match ordinary headered CSV.
#[derive(Debug, Clone)]
pub struct ParseOptions {
    pub delimiter: u8,
    pub has_header: bool,
    /// Column names to use instead of (or in absence of) the header row.
    pub column_names: Option<Vec<String>>,
    /// Cell values treated as missing after trimming (e.g. "?", "").
    pub missing_tokens: Vec<String>,
    /// Strip surrounding whitespace from every cell.
    pub trim: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            delimiter: b',',
            has_header: true,
            column_names: None,
            missing_tokens: vec!["?".into(), String::new()],
            trim: true,
        }
    }
}

/// What the loader dropped and why. Rows are dropped, never imputed; callers
/// decide whether the counts are acceptable.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LoadReport {
    pub rows_read: usize,
    pub rows_kept: usize,
    pub rows_dropped_missing: usize,
    pub rows_dropped_malformed: usize,
    pub rows_dropped_unparseable: usize,
}

/// A parsed table: column names plus row-major string cells.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))
    }

    pub fn column(&self, name: &str) -> Result<Vec<&str>> {
        let idx = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[idx].as_str()).collect())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Keep only rows where `keep` returns true. Preserves order.
    pub fn filter<F: FnMut(&[String]) -> bool>(&self, mut keep: F) -> RawTable {
        RawTable {
            columns: self.columns.clone(),
            rows: self
                .rows
                .iter()
                .filter(|r| keep(r.as_slice()))
                .cloned()
                .collect(),
        }
    }

    /// Distinct values of a column in first-appearance order.
    pub fn distinct(&self, column: &str) -> Result<Vec<String>> {
        let idx = self.column_index(column)?;
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::new();
        for row in &self.rows {
            if seen.insert(row[idx].as_str()) {
                out.push(row[idx].clone());
            }
        }
        Ok(out)
    }
}

/// Replace every value of one column according to `mapping`. The mapping must
/// cover every distinct value present; row count is unchanged.
pub fn condense_categories(
    raw: &RawTable,
    column: &str,
    mapping: &BTreeMap<String, String>,
) -> Result<RawTable> {
    let idx = raw.column_index(column)?;
    let mut rows = raw.rows.clone();
    for row in &mut rows {
        match mapping.get(&row[idx]) {
            Some(new) => row[idx] = new.clone(),
            None => {
                return Err(Error::Data(format!(
                    "category '{}' in column '{column}' has no mapping",
                    row[idx]
                )))
            }
        }
    }
    Ok(RawTable {
        columns: raw.columns.clone(),
        rows,
    })
}

/// Load a delimited text file and keep only rows that are usable under the
/// schema: right field count, no missing tokens in schema columns, parseable
/// numeric cells. Dropped rows are counted per cause in the report.
pub fn load_csv(
    path: impl AsRef<Path>,
    schema: &FeatureSchema,
    opts: &ParseOptions,
) -> Result<(RawTable, LoadReport)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_csv_from(file, schema, opts)
}

/// `load_csv` over any reader.
pub fn load_csv_from<R: std::io::Read>(
    reader: R,
    schema: &FeatureSchema,
    opts: &ParseOptions,
) -> Result<(RawTable, LoadReport)> {
    let (table, mut report) = read_table(reader, opts)?;

    // Header must cover the schema before any row-level checks.
    let mut checked: Vec<(usize, bool)> = Vec::new();
    for name in schema.column_names() {
        let idx = table.column_index(name)?;
        let numeric = schema
            .feature(name)
            .map(|f| f.kind != FeatureKind::Categorical)
            .unwrap_or(false);
        checked.push((idx, numeric));
    }

    let mut rows = Vec::with_capacity(table.rows.len());
    'rows: for row in table.rows {
        for &(idx, numeric) in &checked {
            let cell = &row[idx];
            if opts.missing_tokens.iter().any(|t| t == cell) {
                report.rows_dropped_missing += 1;
                continue 'rows;
            }
            if numeric && cell.parse::<f64>().is_err() {
                report.rows_dropped_unparseable += 1;
                continue 'rows;
            }
        }
        rows.push(row);
    }
    report.rows_kept = rows.len();

    Ok((
        RawTable {
            columns: table.columns,
            rows,
        },
        report,
    ))
}

/// Schema-free parse: every cell kept verbatim (post trim), rows dropped only
/// for field-count mismatches or missing tokens in any column. Used when the
/// schema itself is being inferred from the file.
pub fn load_csv_raw<R: std::io::Read>(
    reader: R,
    opts: &ParseOptions,
) -> Result<(RawTable, LoadReport)> {
    let (table, mut report) = read_table(reader, opts)?;
    let mut rows = Vec::with_capacity(table.rows.len());
    for row in table.rows {
        if row
            .iter()
            .any(|cell| opts.missing_tokens.iter().any(|t| t == cell))
        {
            report.rows_dropped_missing += 1;
        } else {
            rows.push(row);
        }
    }
    report.rows_kept = rows.len();
    Ok((
        RawTable {
            columns: table.columns,
            rows,
        },
        report,
    ))
}

/// Shared parse stage: delimits, names columns, drops malformed rows.
/// Missing-token policy is applied by the callers above.
fn read_table<R: std::io::Read>(reader: R, opts: &ParseOptions) -> Result<(RawTable, LoadReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(opts.has_header)
        .flexible(true)
        .from_reader(reader);

    let columns: Vec<String> = if opts.has_header {
        let headers = rdr.headers()?.clone();
        let mut names: Vec<String> = headers.iter().map(|h| h.trim().to_string()).collect();
        if let Some(explicit) = &opts.column_names {
            if explicit.len() != names.len() {
                return Err(Error::Parse(format!(
                    "explicit column names count {} does not match header width {}",
                    explicit.len(),
                    names.len()
                )));
            }
            names = explicit.clone();
        }
        names
    } else {
        opts.column_names
            .clone()
            .ok_or_else(|| Error::Parse("headerless file needs explicit column names".into()))?
    };

    let width = columns.len();
    let mut report = LoadReport::default();
    let mut rows = Vec::new();

    for record in rdr.records() {
        let record = record?;
        // Trailing blank line or stray separator row: a single empty field.
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        report.rows_read += 1;
        if record.len() != width {
            report.rows_dropped_malformed += 1;
            continue;
        }
        let cells = record
            .iter()
            .map(|c| if opts.trim { c.trim() } else { c }.to_string())
            .collect();
        rows.push(cells);
    }

    Ok((RawTable { columns, rows }, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::{FeatureSpec, TargetSpec};

    fn schema() -> FeatureSchema {
        FeatureSchema::new(
            vec![
                FeatureSpec::numeric("age", 0.0, 120.0),
                FeatureSpec::categorical("job", ["Private", "Public"]),
            ],
            vec![],
            TargetSpec {
                name: "y".into(),
                positive_value: "1".into(),
            },
        )
        .unwrap()
    }

    #[test]
    fn drops_missing_malformed_and_unparseable_rows() {
        let csv = "age,job,y\n39,Private,1\n50,?,0\n38\nold,Public,1\n28,Public,1\n";
        let (table, report) = load_csv_from(csv.as_bytes(), &schema(), &ParseOptions::default()).unwrap();
        assert_eq!(report.rows_read, 5);
        assert_eq!(report.rows_kept, 2);
        assert_eq!(report.rows_dropped_missing, 1);
        assert_eq!(report.rows_dropped_malformed, 1);
        assert_eq!(report.rows_dropped_unparseable, 1);
        assert_eq!(table.rows[0], ["39", "Private", "1"]);
        assert_eq!(table.rows[1], ["28", "Public", "1"]);
    }

    #[test]
    fn missing_outside_schema_columns_is_kept() {
        let csv = "age,job,y,note\n39,Private,1,?\n";
        let (table, report) = load_csv_from(csv.as_bytes(), &schema(), &ParseOptions::default()).unwrap();
        assert_eq!(report.rows_kept, 1);
        assert_eq!(table.rows[0][3], "?");
    }

    #[test]
    fn empty_file_with_valid_header_gives_zero_rows() {
        let csv = "age,job,y\n";
        let (table, report) = load_csv_from(csv.as_bytes(), &schema(), &ParseOptions::default()).unwrap();
        assert_eq!(table.len(), 0);
        assert_eq!(report.rows_read, 0);
    }

    #[test]
    fn missing_schema_column_is_named() {
        let csv = "age,job\n39,Private\n";
        let err = load_csv_from(csv.as_bytes(), &schema(), &ParseOptions::default()).unwrap_err();
        assert!(err.to_string().contains("missing column 'y'"));
    }

    #[test]
    fn headerless_requires_names() {
        let csv = "1,2\n3,4\n";
        let opts = ParseOptions {
            has_header: false,
            ..ParseOptions::default()
        };
        assert!(load_csv_raw(csv.as_bytes(), &opts).is_err());

        let opts = ParseOptions {
            has_header: false,
            column_names: Some(vec!["a".into(), "b".into()]),
            ..ParseOptions::default()
        };
        let (table, _) = load_csv_raw(csv.as_bytes(), &opts).unwrap();
        assert_eq!(table.columns, ["a", "b"]);
        assert_eq!(table.len(), 2);
    }

    #[test]
    fn condense_relabels_all_values() {
        let csv = "status,y\nA91,1\nA92,0\nA93,1\n";
        let (table, _) = load_csv_raw(csv.as_bytes(), &ParseOptions::default()).unwrap();
        let mapping: BTreeMap<String, String> = [
            ("A91", "male"),
            ("A92", "female"),
            ("A93", "male"),
        ]
        .into_iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
        let out = condense_categories(&table, "status", &mapping).unwrap();
        assert_eq!(out.len(), table.len());
        assert_eq!(out.column("status").unwrap(), ["male", "female", "male"]);
        assert_eq!(out.distinct("status").unwrap(), ["male", "female"]);
    }

    #[test]
    fn condense_identity_mapping_is_identity() {
        let csv = "c,y\nx,1\nz,0\n";
        let (table, _) = load_csv_raw(csv.as_bytes(), &ParseOptions::default()).unwrap();
        let mapping: BTreeMap<String, String> = [("x", "x"), ("z", "z")]
            .into_iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        let out = condense_categories(&table, "c", &mapping).unwrap();
        assert_eq!(out.rows, table.rows);
    }

    #[test]
    fn condense_rejects_unmapped_category() {
        let csv = "c,y\nx,1\nq,0\n";
        let (table, _) = load_csv_raw(csv.as_bytes(), &ParseOptions::default()).unwrap();
        let mapping: BTreeMap<String, String> =
            [("x".to_string(), "x".to_string())].into_iter().collect();
        let err = condense_categories(&table, "c", &mapping).unwrap_err();
        assert!(err.to_string().contains("'q'"));
    }

    #[test]
    fn distinct_preserves_first_appearance_order() {
        let csv = "c,y\nb,1\na,0\nb,1\nc,0\n";
        let (table, _) = load_csv_raw(csv.as_bytes(), &ParseOptions::default()).unwrap();
        assert_eq!(table.distinct("c").unwrap(), ["b", "a", "c"]);
    }
}
