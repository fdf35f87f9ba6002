//! Counterfactuals drawn from observed data: the nearest reference rows the
//! model already scores as the desired class, returned verbatim.

use super::{
    changed_features, mad_distance_unchecked, Counterfactual, CounterfactualSet, Provenance,
    UtilityRule,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::Classifier;

/// Pick the `k` reference rows nearest to `x` (MAD-weighted) among those the
/// model predicts as `desired` and that agree with the origin on every
/// immutable feature (rows are returned verbatim, so agreement is the only
/// way to keep immutables untouched). Ties break toward the lower row index.
/// An empty candidate pool yields an empty set with a diagnostic, not an
/// error; immutable real-valued features rarely match exactly and usually
/// land there.
pub fn known_space_generate<C: Classifier + ?Sized>(
    model: &C,
    x: &[f64],
    desired: u8,
    k: usize,
    reference: &Dataset,
) -> Result<CounterfactualSet> {
    if k < 1 {
        return Err(Error::Generation("k must be at least 1".into()));
    }
    if reference.is_empty() {
        return Err(Error::Generation("reference dataset is empty".into()));
    }
    let layout = &reference.layout;
    if x.len() != layout.width() {
        return Err(Error::Generation(format!(
            "origin width {} does not match layout width {}",
            x.len(),
            layout.width()
        )));
    }
    if model.layout_hash() != layout.hash() {
        return Err(Error::Model(
            "model was trained on a different encoded layout".into(),
        ));
    }

    let frozen: Vec<usize> = layout
        .blocks
        .iter()
        .filter(|b| !b.mutable)
        .flat_map(|b| b.cols())
        .collect();
    let same_bits = |row: &[f64]| row.iter().zip(x).all(|(a, b)| a.to_bits() == b.to_bits());
    let frozen_match =
        |row: &[f64]| frozen.iter().all(|&c| row[c].to_bits() == x[c].to_bits());
    let mut pool: Vec<(f64, usize)> = reference
        .x
        .iter()
        .enumerate()
        .filter(|(_, row)| model.predict(row) == desired && frozen_match(row) && !same_bits(row))
        .map(|(i, row)| (mad_distance_unchecked(x, row, layout, &reference.mad), i))
        .collect();
    pool.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    pool.truncate(k);

    if pool.is_empty() {
        let diagnostic = if frozen.is_empty() {
            "no reference row predicted as the desired class"
        } else {
            "no reference row with the desired prediction matches the origin's immutable features"
        };
        return Ok(CounterfactualSet::empty(x.to_vec(), desired, k, diagnostic));
    }

    let items: Vec<Counterfactual> = pool
        .into_iter()
        .enumerate()
        .map(|(pos, (distance, row))| {
            let vector = reference.x[row].clone();
            let sparsity = changed_features(x, &vector, layout);
            Counterfactual {
                rank: pos + 1,
                vector,
                valid: true,
                distance,
                sparsity,
                utility: -distance,
                provenance: Provenance::KnownSpace,
            }
        })
        .collect();

    Ok(CounterfactualSet {
        origin_index: None,
        origin: x.to_vec(),
        desired,
        k_requested: k,
        utility_rule: UtilityRule::MadDistance,
        items,
        diagnostic: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{encode, FeatureSchema, FeatureSpec, RawTable, SensitiveSpec, TargetSpec};

    fn reference() -> Dataset {
        let schema = FeatureSchema::new(
            vec![FeatureSpec::numeric("v", 0.0, 20.0)],
            vec![SensitiveSpec {
                name: "g".into(),
                privileged_value: "m".into(),
            }],
            TargetSpec {
                name: "y".into(),
                positive_value: "1".into(),
            },
        )
        .unwrap();
        let raw = RawTable {
            columns: vec!["v".into(), "g".into(), "y".into()],
            rows: vec![
                vec!["1".into(), "f".into(), "0".into()],
                vec!["2".into(), "f".into(), "0".into()],
                vec!["9".into(), "m".into(), "1".into()],
                vec!["10".into(), "m".into(), "1".into()],
            ],
        };
        encode(&raw, &schema).unwrap()
    }

    struct Cut {
        at: f64,
        hash: u64,
    }
    impl Classifier for Cut {
        fn score(&self, x: &[f64]) -> f64 {
            if x[0] >= self.at {
                1.0
            } else {
                0.0
            }
        }
        fn layout_hash(&self) -> u64 {
            self.hash
        }
    }

    // MAD of {1,2,9,10}: median 5.5, deviations {4.5,3.5,3.5,4.5}, MAD 4.

    #[test]
    fn nearest_desired_row_wins() {
        let data = reference();
        let model = Cut {
            at: 9.0,
            hash: data.layout.hash(),
        };
        let set = known_space_generate(&model, &[2.0], 1, 1, &data).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.items[0].vector, vec![9.0]);
        assert!((set.items[0].distance - 7.0 / 4.0).abs() < 1e-12);
        assert_eq!(set.items[0].rank, 1);
        // Bit-identical to the stored reference row.
        assert_eq!(set.items[0].vector[0].to_bits(), data.x[2][0].to_bits());
    }

    #[test]
    fn pool_smaller_than_k_truncates_without_error() {
        let data = reference();
        let model = Cut {
            at: 9.0,
            hash: data.layout.hash(),
        };
        let set = known_space_generate(&model, &[2.0], 1, 100, &data).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.k_requested, 100);
        assert_eq!(set.items[0].vector, vec![9.0]);
        assert_eq!(set.items[1].vector, vec![10.0]);
    }

    #[test]
    fn origin_present_but_undesired_is_excluded() {
        let data = reference();
        let model = Cut {
            at: 9.5,
            hash: data.layout.hash(),
        };
        // Row 9 is the origin itself and scores below the cut; only 10 counts.
        let set = known_space_generate(&model, &[9.0], 1, 5, &data).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.items[0].vector, vec![10.0]);
    }

    #[test]
    fn distance_ties_break_on_lower_row_index() {
        let data = reference();
        let model = Cut {
            at: 0.0,
            hash: data.layout.hash(),
        };
        let set = known_space_generate(&model, &[5.5], 1, 4, &data).unwrap();
        let got: Vec<f64> = set.items.iter().map(|i| i.vector[0]).collect();
        // 2 and 9 tie at 3.5/4, 1 and 10 tie at 4.5/4.
        assert_eq!(got, vec![2.0, 9.0, 1.0, 10.0]);
    }

    #[test]
    fn empty_pool_reports_a_diagnostic() {
        let data = reference();
        let model = Cut {
            at: 100.0,
            hash: data.layout.hash(),
        };
        let set = known_space_generate(&model, &[2.0], 1, 3, &data).unwrap();
        assert!(set.is_empty());
        assert_eq!(
            set.diagnostic.as_deref(),
            Some("no reference row predicted as the desired class")
        );
    }

    fn sited_reference() -> Dataset {
        let mut site = FeatureSpec::categorical("site", ["north", "south"]);
        site.mutable = false;
        let schema = FeatureSchema::new(
            vec![FeatureSpec::numeric("v", 0.0, 20.0), site],
            vec![SensitiveSpec {
                name: "g".into(),
                privileged_value: "m".into(),
            }],
            TargetSpec {
                name: "y".into(),
                positive_value: "1".into(),
            },
        )
        .unwrap();
        let raw = RawTable {
            columns: vec!["v".into(), "site".into(), "g".into(), "y".into()],
            rows: vec![
                vec!["2".into(), "north".into(), "f".into(), "0".into()],
                vec!["9".into(), "north".into(), "m".into(), "1".into()],
                vec!["10".into(), "south".into(), "m".into(), "1".into()],
            ],
        };
        encode(&raw, &schema).unwrap()
    }

    #[test]
    fn rows_differing_on_an_immutable_feature_are_excluded() {
        let data = sited_reference();
        let model = Cut {
            at: 9.0,
            hash: data.layout.hash(),
        };
        // Origin sits in the north; the southern row 10 is off limits.
        let set = known_space_generate(&model, &[2.0, 1.0, 0.0], 1, 5, &data).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.items[0].vector, vec![9.0, 1.0, 0.0]);

        let southern = known_space_generate(&model, &[2.0, 0.0, 1.0], 1, 5, &data).unwrap();
        assert_eq!(southern.len(), 1);
        assert_eq!(southern.items[0].vector, vec![10.0, 0.0, 1.0]);
    }

    #[test]
    fn unmatched_immutables_empty_the_pool_with_their_own_diagnostic() {
        let mut data = sited_reference();
        // Freeze the numeric column too; no row shares the origin's v = 2.5.
        let set = {
            for block in &mut data.layout.blocks {
                block.mutable = false;
            }
            let model = Cut {
                at: 9.0,
                hash: data.layout.hash(),
            };
            known_space_generate(&model, &[2.5, 1.0, 0.0], 1, 3, &data).unwrap()
        };
        assert!(set.is_empty());
        assert_eq!(
            set.diagnostic.as_deref(),
            Some("no reference row with the desired prediction matches the origin's immutable features")
        );
    }

    #[test]
    fn layout_mismatch_and_bad_k_are_errors() {
        let data = reference();
        let wrong = Cut { at: 9.0, hash: 1 };
        assert!(known_space_generate(&wrong, &[2.0], 1, 1, &data).is_err());

        let model = Cut {
            at: 9.0,
            hash: data.layout.hash(),
        };
        assert!(known_space_generate(&model, &[2.0], 1, 0, &data).is_err());
    }
}
