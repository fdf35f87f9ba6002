//! Stratified train/test splitting over joint (target, sensitive) cells.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encode::Dataset;
use crate::error::{Error, Result};
use crate::seed;

/// A deterministic stratified split. `assignments` records, per original row
/// index, which side the row went to; that is the manifest.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    pub seed: u64,
    pub test_fraction: f64,
    pub assignments: Vec<Side>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Train,
    Test,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    seed: u64,
    test_fraction: f64,
    assignments: Vec<Side>,
}

impl SplitPair {
    /// Manifest mapping row index to train/test, as JSON.
    pub fn manifest_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&Manifest {
            seed: self.seed,
            test_fraction: self.test_fraction,
            assignments: self.assignments.clone(),
        })?)
    }

    pub fn write_manifest(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.manifest_json()?).map_err(|e| Error::io(path, e))
    }
}

/// Split rows so each joint (y, s) cell contributes test rows in proportion
/// to `test_fraction`. Cell quotas use largest-remainder rounding against the
/// overall test-size target; membership within a cell is a seeded shuffle.
pub fn stratified_split(data: &Dataset, test_fraction: f64, split_seed: u64) -> Result<SplitPair> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test fraction must lie in (0,1), got {test_fraction}"
        )));
    }
    if data.is_empty() {
        return Err(Error::Data("cannot split an empty dataset".into()));
    }

    // Cell key: target bit then each sensitive bit, so iteration order is
    // stable regardless of row order.
    let mut cells: BTreeMap<Vec<u8>, Vec<usize>> = BTreeMap::new();
    for i in 0..data.len() {
        let mut key = vec![data.y[i]];
        for s in &data.s {
            key.push(s[i]);
        }
        cells.entry(key).or_default().push(i);
    }

    for (key, members) in &cells {
        if members.len() < 2 {
            return Err(Error::Data(format!(
                "stratification cell (y={}, s={:?}) has {} member(s); need at least 2",
                key[0],
                &key[1..],
                members.len()
            )));
        }
    }

    let n = data.len();
    let target_test = ((n as f64) * test_fraction).round() as usize;

    // Largest-remainder allocation of the test target across cells.
    let mut floors = Vec::with_capacity(cells.len());
    let mut fracs = Vec::with_capacity(cells.len());
    for members in cells.values() {
        let quota = members.len() as f64 * test_fraction;
        floors.push(quota.floor() as usize);
        fracs.push(quota - quota.floor());
    }
    let mut remainder = target_test.saturating_sub(floors.iter().sum::<usize>());
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by(|&a, &b| fracs[b].partial_cmp(&fracs[a]).unwrap().then(a.cmp(&b)));
    let sizes: Vec<usize> = cells.values().map(Vec::len).collect();
    for &ci in &order {
        if remainder == 0 {
            break;
        }
        if floors[ci] < sizes[ci] {
            floors[ci] += 1;
            remainder -= 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(split_seed, &[seed::label("split")]));
    let mut assignments = vec![Side::Train; n];
    for (ci, members) in cells.values().enumerate() {
        let mut pool = members.clone();
        pool.shuffle(&mut rng);
        for &row in pool.iter().take(floors[ci]) {
            assignments[row] = Side::Test;
        }
    }

    let train_idx: Vec<usize> = (0..n).filter(|&i| assignments[i] == Side::Train).collect();
    let test_idx: Vec<usize> = (0..n).filter(|&i| assignments[i] == Side::Test).collect();

    Ok(SplitPair {
        train: data.subset(&train_idx),
        test: data.subset(&test_idx),
        seed: split_seed,
        test_fraction,
        assignments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::encode::encode;
    use crate::data::schema::{FeatureSchema, FeatureSpec, SensitiveSpec, TargetSpec};
    use crate::data::table::RawTable;

    fn toy_dataset(rows: &[(f64, &str, &str)]) -> Dataset {
        let schema = FeatureSchema::new(
            vec![FeatureSpec::numeric("v", -1e9, 1e9)],
            vec![SensitiveSpec {
                name: "g".into(),
                privileged_value: "a".into(),
            }],
            TargetSpec {
                name: "y".into(),
                positive_value: "1".into(),
            },
        )
        .unwrap();
        let table = RawTable {
            columns: vec!["v".into(), "g".into(), "y".into()],
            rows: rows
                .iter()
                .map(|(v, g, y)| vec![v.to_string(), g.to_string(), y.to_string()])
                .collect(),
        };
        encode(&table, &schema).unwrap()
    }

    fn balanced_eight() -> Dataset {
        toy_dataset(&[
            (1.0, "a", "1"),
            (2.0, "a", "1"),
            (3.0, "a", "0"),
            (4.0, "a", "0"),
            (5.0, "b", "1"),
            (6.0, "b", "1"),
            (7.0, "b", "0"),
            (8.0, "b", "0"),
        ])
    }

    #[test]
    fn balanced_half_split_takes_one_per_cell() {
        let data = balanced_eight();
        let pair = stratified_split(&data, 0.5, 7).unwrap();
        assert_eq!(pair.test.len(), 4);
        assert_eq!(pair.train.len(), 4);
        // Each (y, s) cell keeps exactly one row on each side.
        for y in [0u8, 1] {
            for s in [0u8, 1] {
                let count = |d: &Dataset| {
                    (0..d.len())
                        .filter(|&i| d.y[i] == y && d.s[0][i] == s)
                        .count()
                };
                assert_eq!(count(&pair.test), 1);
                assert_eq!(count(&pair.train), 1);
            }
        }
    }

    #[test]
    fn same_seed_reproduces_assignments() {
        let data = balanced_eight();
        let a = stratified_split(&data, 0.5, 42).unwrap();
        let b = stratified_split(&data, 0.5, 42).unwrap();
        assert_eq!(a.assignments, b.assignments);
        assert_eq!(a.test.x, b.test.x);
        let c = stratified_split(&data, 0.5, 43).unwrap();
        assert!(a.assignments != c.assignments || a.test.x == c.test.x);
    }

    #[test]
    fn test_size_stays_within_one_row_of_requested() {
        let mut rows = Vec::new();
        for i in 0..103 {
            let g = if i % 3 == 0 { "a" } else { "b" };
            let y = if i % 5 == 0 { "1" } else { "0" };
            rows.push((i as f64, g, y));
        }
        let data = toy_dataset(&rows);
        for frac in [0.1, 0.25, 0.33] {
            let pair = stratified_split(&data, frac, 5).unwrap();
            let want = (103.0 * frac).round();
            assert!((pair.test.len() as f64 - want).abs() <= 1.0, "frac {frac}");
            assert_eq!(pair.test.len() + pair.train.len(), 103);
        }
    }

    #[test]
    fn tiny_cell_is_named_in_error() {
        let data = toy_dataset(&[
            (1.0, "a", "1"),
            (2.0, "a", "1"),
            (3.0, "a", "0"),
            (4.0, "a", "0"),
            (5.0, "b", "1"),
        ]);
        let err = stratified_split(&data, 0.5, 1).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("y=1") && msg.contains("[0]"), "{msg}");
    }

    #[test]
    fn manifest_covers_every_row() {
        let data = balanced_eight();
        let pair = stratified_split(&data, 0.5, 9).unwrap();
        let json = pair.manifest_json().unwrap();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["assignments"].as_array().unwrap().len(), 8);
        assert_eq!(value["seed"], 9);
    }

    #[test]
    fn rejects_bad_fraction() {
        let data = balanced_eight();
        assert!(stratified_split(&data, 0.0, 1).is_err());
        assert!(stratified_split(&data, 1.0, 1).is_err());
    }
}
