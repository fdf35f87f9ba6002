//! Fairness metrics over ranked counterfactual sets.
//!
//! The audited population is the negative set: test rows the decision model
//! rejects and whose sensitive group the sensitive classifier recovers
//! correctly. For each such row a flip vector marks which of its ranked
//! counterfactuals the sensitive classifier places in the other group.
//! CFlips is the plain flip fraction; DCCF discounts flips by rank so that
//! group crossings near the top of the ranking cost more, and nDCCF divides
//! by the all-same-group ideal to land in [0,1]. Group aggregates keep an
//! explicit undefined state for empty sides instead of collapsing to zero.

use serde::{Deserialize, Serialize};

use crate::cf::CounterfactualSet;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::Classifier;

/// Side of the sensitive split. The privileged group carries s = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Privileged,
    Unprivileged,
}

impl Group {
    pub fn sensitive_value(self) -> u8 {
        match self {
            Group::Privileged => 1,
            Group::Unprivileged => 0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Group::Privileged => "privileged",
            Group::Unprivileged => "unprivileged",
        }
    }
}

/// Test rows rejected by the decision model whose sensitive group the
/// sensitive classifier predicts correctly, with that group per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativeSet {
    pub indices: Vec<usize>,
    pub group: Vec<u8>,
}

impl NegativeSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn count(&self, side: Group) -> usize {
        let s = side.sensitive_value();
        self.group.iter().filter(|&&g| g == s).count()
    }
}

/// Collect the negative set. An empty result is valid and left to the
/// caller to flag; the models must share the dataset's encoded layout.
pub fn negative_set<D, S>(
    decision: &D,
    sens: &S,
    test: &Dataset,
    sensitive_index: usize,
) -> Result<NegativeSet>
where
    D: Classifier + ?Sized,
    S: Classifier + ?Sized,
{
    let hash = test.layout.hash();
    if decision.layout_hash() != hash || sens.layout_hash() != hash {
        return Err(Error::Model(
            "model was trained on a different encoded layout".into(),
        ));
    }
    if sensitive_index >= test.s.len() {
        return Err(Error::Metric(format!(
            "sensitive index {sensitive_index} out of range"
        )));
    }
    let mut indices = Vec::new();
    let mut group = Vec::new();
    for (i, row) in test.x.iter().enumerate() {
        let s = test.s[sensitive_index][i];
        if decision.predict(row) == 0 && sens.predict(row) == s {
            indices.push(i);
            group.push(s);
        }
    }
    Ok(NegativeSet { indices, group })
}

/// Per-counterfactual indicators: 1 where the sensitive classifier assigns
/// the counterfactual to a different group than the origin, rank order kept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlipVector {
    pub indicators: Vec<u8>,
}

impl FlipVector {
    pub fn len(&self) -> usize {
        self.indicators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indicators.is_empty()
    }
}

/// Score the top-`k` counterfactuals of one set. An empty set produces an
/// empty vector so the caller can skip and count it.
pub fn flip_vector<S>(
    sens: &S,
    set: &CounterfactualSet,
    origin_group: u8,
    k: usize,
) -> Result<FlipVector>
where
    S: Classifier + ?Sized,
{
    if k < 1 {
        return Err(Error::Metric("k must be at least 1".into()));
    }
    let indicators = set
        .items
        .iter()
        .take(k)
        .map(|c| u8::from(sens.predict(&c.vector) != origin_group))
        .collect();
    Ok(FlipVector { indicators })
}

/// Fraction of counterfactuals that crossed groups. Undefined when empty;
/// stored as a fraction, rendered as a percentage in reports.
pub fn cflips_sample(fv: &FlipVector) -> Option<f64> {
    if fv.is_empty() {
        return None;
    }
    let flips: u32 = fv.indicators.iter().map(|&i| u32::from(i)).sum();
    Some(f64::from(flips) / fv.len() as f64)
}

/// Rank-discounted cumulative gain of staying in the origin group:
/// sum over 1-based ranks p of (2^(1 - indicator) - 1) / log2(p + 1).
pub fn dccf(fv: &FlipVector) -> Option<f64> {
    if fv.is_empty() {
        return None;
    }
    Some(
        fv.indicators
            .iter()
            .enumerate()
            .map(|(p0, &ind)| {
                let gain = (1.0 - f64::from(ind)).exp2() - 1.0;
                gain / ((p0 + 2) as f64).log2()
            })
            .sum(),
    )
}

/// Ideal discounted sum: every counterfactual stays in the origin group.
pub fn idccf(n: usize) -> Result<f64> {
    if n < 1 {
        return Err(Error::Metric(
            "ideal discounted sum needs at least one rank".into(),
        ));
    }
    Ok((1..=n).map(|p| 1.0 / ((p + 1) as f64).log2()).sum())
}

/// Normalized discounted score in [0,1]: 1 when no counterfactual crosses
/// groups, 0 when all do.
pub fn ndccf_sample(fv: &FlipVector) -> Option<f64> {
    let d = dccf(fv)?;
    Some(d / idccf(fv.len()).expect("non-empty vector"))
}

/// Group-level aggregate of a per-sample statistic at one cut-off. A side
/// without contributing samples stays undefined rather than reading as zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetric {
    pub privileged: Option<f64>,
    pub unprivileged: Option<f64>,
    pub k: usize,
    pub contributing_privileged: usize,
    pub contributing_unprivileged: usize,
    /// Samples whose generation produced nothing, excluded from the means.
    pub skipped_privileged: usize,
    pub skipped_unprivileged: usize,
}

impl GroupMetric {
    /// Absolute privileged/unprivileged gap; undefined unless both sides are.
    pub fn delta(&self) -> Option<f64> {
        delta_gap(self.privileged, self.unprivileged)
    }

    pub fn side(&self, side: Group) -> Option<f64> {
        match side {
            Group::Privileged => self.privileged,
            Group::Unprivileged => self.unprivileged,
        }
    }
}

fn aggregate(
    neg: &NegativeSet,
    fvs: &[FlipVector],
    k: usize,
    stat: fn(&FlipVector) -> Option<f64>,
) -> Result<GroupMetric> {
    if fvs.len() != neg.len() {
        return Err(Error::Metric(format!(
            "expected one flip vector per negative sample, got {} for {}",
            fvs.len(),
            neg.len()
        )));
    }
    let mut sums = [0.0f64; 2];
    let mut contributing = [0usize; 2];
    let mut skipped = [0usize; 2];
    for (fv, &g) in fvs.iter().zip(&neg.group) {
        let side = usize::from(g);
        match stat(fv) {
            Some(v) => {
                sums[side] += v;
                contributing[side] += 1;
            }
            None => skipped[side] += 1,
        }
    }
    let mean = |side: usize| {
        (contributing[side] > 0).then(|| sums[side] / contributing[side] as f64)
    };
    Ok(GroupMetric {
        privileged: mean(1),
        unprivileged: mean(0),
        k,
        contributing_privileged: contributing[1],
        contributing_unprivileged: contributing[0],
        skipped_privileged: skipped[1],
        skipped_unprivileged: skipped[0],
    })
}

/// Mean flip fraction per side over samples with at least one counterfactual.
pub fn cflips_group(neg: &NegativeSet, fvs: &[FlipVector], k: usize) -> Result<GroupMetric> {
    aggregate(neg, fvs, k, cflips_sample)
}

/// Mean normalized discounted score per side, same contribution rule.
pub fn ndccf_group(neg: &NegativeSet, fvs: &[FlipVector], k: usize) -> Result<GroupMetric> {
    aggregate(neg, fvs, k, ndccf_sample)
}

/// |privileged - unprivileged|, undefined when either side is.
pub fn delta_gap(privileged: Option<f64>, unprivileged: Option<f64>) -> Option<f64> {
    match (privileged, unprivileged) {
        (Some(p), Some(u)) => Some((p - u).abs()),
        _ => None,
    }
}

/// The three classical group-fairness gaps. Each stays undefined when one of
/// its conditioning cells is empty; the others are still returned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalFairness {
    /// Statistical parity gap |P(pred=1 | s=1) - P(pred=1 | s=0)|.
    pub dsp: Option<f64>,
    /// Equal-opportunity gap, conditioned on y = 1.
    pub deo: Option<f64>,
    /// Averaged-odds gap: half the absolute sum of the per-y rate gaps.
    pub dao: Option<f64>,
}

pub fn classical_fairness(predictions: &[u8], s: &[u8], y: &[u8]) -> Result<ClassicalFairness> {
    if predictions.len() != s.len() || predictions.len() != y.len() {
        return Err(Error::Metric(format!(
            "length mismatch: {} predictions, {} sensitive values, {} labels",
            predictions.len(),
            s.len(),
            y.len()
        )));
    }
    if predictions
        .iter()
        .chain(s)
        .chain(y)
        .any(|&v| v > 1)
    {
        return Err(Error::Metric("entries must be 0 or 1".into()));
    }

    // Positive-prediction rate over rows matching (s, optionally y).
    let rate = |group: u8, label: Option<u8>| -> Option<f64> {
        let mut hits = 0usize;
        let mut total = 0usize;
        for i in 0..predictions.len() {
            if s[i] == group && label.map_or(true, |l| y[i] == l) {
                total += 1;
                hits += usize::from(predictions[i]);
            }
        }
        (total > 0).then(|| hits as f64 / total as f64)
    };

    let dsp = match (rate(1, None), rate(0, None)) {
        (Some(a), Some(b)) => Some((a - b).abs()),
        _ => None,
    };
    let deo = match (rate(1, Some(1)), rate(0, Some(1))) {
        (Some(a), Some(b)) => Some((a - b).abs()),
        _ => None,
    };
    let dao = match (
        rate(1, Some(0)),
        rate(0, Some(0)),
        rate(1, Some(1)),
        rate(0, Some(1)),
    ) {
        (Some(p0), Some(u0), Some(p1), Some(u1)) => {
            Some(0.5 * ((p0 - u0) + (p1 - u1)).abs())
        }
        _ => None,
    };
    Ok(ClassicalFairness { dsp, deo, dao })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cf::{Counterfactual, CounterfactualSet, Provenance, UtilityRule};
    use crate::data::{encode, FeatureSchema, FeatureSpec, RawTable, SensitiveSpec, TargetSpec};

    fn fv(bits: &[u8]) -> FlipVector {
        FlipVector {
            indicators: bits.to_vec(),
        }
    }

    // Eight rows, v = 1..8; group is 1 exactly for v >= 5.
    fn dataset() -> Dataset {
        let schema = FeatureSchema::new(
            vec![FeatureSpec::numeric("v", 0.0, 10.0)],
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
        let rows = (1..=8)
            .map(|v| {
                vec![
                    v.to_string(),
                    if v >= 5 { "m" } else { "f" }.into(),
                    "1".into(),
                ]
            })
            .collect();
        let raw = RawTable {
            columns: vec!["v".into(), "g".into(), "y".into()],
            rows,
        };
        encode(&raw, &schema).unwrap()
    }

    struct Fn1 {
        f: fn(&[f64]) -> f64,
        hash: u64,
    }
    impl Classifier for Fn1 {
        fn score(&self, x: &[f64]) -> f64 {
            (self.f)(x)
        }
        fn layout_hash(&self) -> u64 {
            self.hash
        }
    }

    #[test]
    fn negative_set_applies_both_filters() {
        let data = dataset();
        let hash = data.layout.hash();
        // Rejects odd v; recovers the group exactly.
        let decision = Fn1 {
            f: |x| if x[0] as i64 % 2 == 0 { 1.0 } else { 0.0 },
            hash,
        };
        let sens = Fn1 {
            f: |x| if x[0] >= 5.0 { 1.0 } else { 0.0 },
            hash,
        };
        let neg = negative_set(&decision, &sens, &data, 0).unwrap();
        assert_eq!(neg.indices, vec![0, 2, 4, 6]);
        assert_eq!(neg.group, vec![0, 0, 1, 1]);
        assert_eq!(neg.count(Group::Privileged), 2);
        assert_eq!(neg.count(Group::Unprivileged), 2);
    }

    #[test]
    fn always_accepting_or_always_wrong_models_empty_the_set() {
        let data = dataset();
        let hash = data.layout.hash();
        let accept_all = Fn1 { f: |_| 1.0, hash };
        let sens_right = Fn1 {
            f: |x| if x[0] >= 5.0 { 1.0 } else { 0.0 },
            hash,
        };
        let neg = negative_set(&accept_all, &sens_right, &data, 0).unwrap();
        assert!(neg.is_empty());

        let reject_all = Fn1 { f: |_| 0.0, hash };
        let sens_wrong = Fn1 {
            f: |x| if x[0] >= 5.0 { 0.0 } else { 1.0 },
            hash,
        };
        let neg = negative_set(&reject_all, &sens_wrong, &data, 0).unwrap();
        assert!(neg.is_empty());
    }

    fn set_with(vals: &[f64]) -> CounterfactualSet {
        CounterfactualSet {
            origin_index: None,
            origin: vec![0.0],
            desired: 1,
            k_requested: vals.len(),
            utility_rule: UtilityRule::MadDistance,
            items: vals
                .iter()
                .enumerate()
                .map(|(i, &v)| Counterfactual {
                    rank: i + 1,
                    vector: vec![v],
                    valid: true,
                    distance: v,
                    sparsity: 1,
                    utility: -v,
                    provenance: Provenance::Genetic,
                })
                .collect(),
            diagnostic: None,
        }
    }

    #[test]
    fn flip_vector_marks_group_crossings_in_rank_order() {
        // Sensitive classifier: group 1 exactly when the value is negative.
        let sens = Fn1 {
            f: |x| if x[0] < 0.0 { 1.0 } else { 0.0 },
            hash: 0,
        };
        let set = set_with(&[-1.0, 2.0, -3.0, 4.0]);
        let got = flip_vector(&sens, &set, 0, 4).unwrap();
        assert_eq!(got.indicators, vec![1, 0, 1, 0]);

        // Truncation keeps the top of the ranking.
        let top2 = flip_vector(&sens, &set, 0, 2).unwrap();
        assert_eq!(top2.indicators, vec![1, 0]);

        // Constant classifiers bound the vector.
        let same = flip_vector(&Fn1 { f: |_| 0.0, hash: 0 }, &set, 0, 4).unwrap();
        assert_eq!(same.indicators, vec![0, 0, 0, 0]);
        let other = flip_vector(&Fn1 { f: |_| 1.0, hash: 0 }, &set, 0, 4).unwrap();
        assert_eq!(other.indicators, vec![1, 1, 1, 1]);

        // Empty set flows through as an empty vector; k = 0 is refused.
        let empty = CounterfactualSet::empty(vec![0.0], 1, 3, "none");
        assert!(flip_vector(&sens, &empty, 0, 3).unwrap().is_empty());
        assert!(flip_vector(&sens, &set, 0, 0).is_err());
    }

    #[test]
    fn cflips_is_the_flip_fraction() {
        assert_eq!(cflips_sample(&fv(&[1, 0, 1, 0])), Some(0.5));
        assert_eq!(cflips_sample(&fv(&[0, 0, 0])), Some(0.0));
        assert_eq!(cflips_sample(&fv(&[1, 1, 1])), Some(1.0));
        assert_eq!(cflips_sample(&fv(&[])), None);
    }

    #[test]
    fn discounted_sums_match_frozen_values() {
        assert_eq!(dccf(&fv(&[0, 0, 0])), Some(2.1309297535714578));
        assert_eq!(dccf(&fv(&[1, 1, 1])), Some(0.0));
        assert_eq!(dccf(&fv(&[0, 1, 0])), Some(1.5));
        assert_eq!(dccf(&fv(&[])), None);

        assert_eq!(idccf(1).unwrap(), 1.0);
        assert_eq!(idccf(2).unwrap(), 1.6309297535714575);
        assert_eq!(idccf(3).unwrap(), 2.1309297535714578);
        assert!(idccf(0).is_err());

        assert_eq!(ndccf_sample(&fv(&[0, 0, 0])), Some(1.0));
        assert_eq!(ndccf_sample(&fv(&[1, 1, 1])), Some(0.0));
        assert_eq!(ndccf_sample(&fv(&[0, 1, 0])), Some(0.7039180890341347));
    }

    #[test]
    fn dccf_matches_a_naive_oracle_over_all_short_vectors() {
        // Independent formulation: only zero indicators contribute 1/log2(p+1).
        let naive = |bits: &[u8]| -> f64 {
            let mut acc = 0.0;
            for (p0, &b) in bits.iter().enumerate() {
                if b == 0 {
                    acc += 1.0 / ((p0 as f64) + 2.0).log2();
                }
            }
            acc
        };
        for n in 1..=6usize {
            for mask in 0..(1u32 << n) {
                let bits: Vec<u8> = (0..n).map(|j| ((mask >> j) & 1) as u8).collect();
                let got = dccf(&fv(&bits)).unwrap();
                assert!(
                    (got - naive(&bits)).abs() < 1e-12,
                    "mismatch on {bits:?}"
                );
            }
        }
    }

    #[test]
    fn flips_at_the_top_of_the_ranking_cost_more() {
        let k = 8;
        let mut top = vec![0u8; k];
        top[0] = 1;
        let mut bottom = vec![0u8; k];
        bottom[k - 1] = 1;
        let clean = ndccf_sample(&fv(&vec![0u8; k])).unwrap();
        let top_v = ndccf_sample(&fv(&top)).unwrap();
        let bottom_v = ndccf_sample(&fv(&bottom)).unwrap();
        assert!(top_v < bottom_v, "{top_v} vs {bottom_v}");
        assert!(bottom_v < clean);

        // CFlips cannot tell the two apart.
        assert_eq!(cflips_sample(&fv(&top)), cflips_sample(&fv(&bottom)));
        assert_ne!(ndccf_sample(&fv(&[1, 0])), ndccf_sample(&fv(&[0, 1])));
    }

    #[test]
    fn group_means_skip_samples_without_counterfactuals() {
        let neg = NegativeSet {
            indices: vec![0, 1, 2, 3, 4],
            group: vec![0, 0, 0, 1, 1],
        };
        let fvs = vec![
            fv(&[1, 0, 0, 0, 0]), // unprivileged, 0.2
            fv(&[1, 1, 1, 0, 0]), // unprivileged, 0.6
            fv(&[]),              // unprivileged, skipped
            fv(&[0, 0, 0, 0, 0]), // privileged, 0.0
            fv(&[1, 0, 1, 0, 0]), // privileged, 0.4
        ];
        let m = cflips_group(&neg, &fvs, 5).unwrap();
        assert_eq!(m.unprivileged, Some(0.4));
        assert_eq!(m.privileged, Some(0.2));
        assert_eq!(m.delta(), Some(0.2));
        assert_eq!(m.contributing_unprivileged, 2);
        assert_eq!(m.skipped_unprivileged, 1);
        assert_eq!(m.skipped_privileged, 0);
        assert_eq!(m.k, 5);

        // One flip vector per sample is required.
        assert!(cflips_group(&neg, &fvs[..3], 5).is_err());
    }

    #[test]
    fn empty_side_stays_undefined_instead_of_zero() {
        let neg = NegativeSet {
            indices: vec![0, 1],
            group: vec![0, 0],
        };
        let fvs = vec![fv(&[1, 1]), fv(&[0, 0])];
        let m = cflips_group(&neg, &fvs, 2).unwrap();
        assert_eq!(m.privileged, None);
        assert_eq!(m.unprivileged, Some(0.5));
        assert_eq!(m.delta(), None);
        assert_eq!(m.side(Group::Privileged), None);

        let n = ndccf_group(&neg, &fvs, 2).unwrap();
        assert_eq!(n.unprivileged, Some(0.5));
        assert_eq!(n.privileged, None);
    }

    #[test]
    fn single_contributor_equals_its_own_score() {
        let neg = NegativeSet {
            indices: vec![7],
            group: vec![1],
        };
        let fvs = vec![fv(&[0, 1, 0])];
        let m = ndccf_group(&neg, &fvs, 3).unwrap();
        assert_eq!(m.privileged, Some(0.7039180890341347));
    }

    #[test]
    fn delta_gap_is_symmetric_and_propagates_undefined() {
        assert_eq!(delta_gap(Some(0.1), Some(0.7)), Some(0.6));
        assert_eq!(delta_gap(Some(0.7), Some(0.1)), delta_gap(Some(0.1), Some(0.7)));
        assert_eq!(delta_gap(Some(0.3), Some(0.3)), Some(0.0));
        assert_eq!(delta_gap(None, Some(0.5)), None);
        assert_eq!(delta_gap(Some(0.5), None), None);
    }

    #[test]
    fn classical_gaps_match_hand_counts() {
        // Privileged positive rate 0.8 (4/5), unprivileged 0.5 (2/4).
        let predictions = [1, 1, 1, 1, 0, 1, 1, 0, 0];
        let s = [1, 1, 1, 1, 1, 0, 0, 0, 0];
        let y = [1, 1, 0, 0, 1, 1, 0, 1, 0];
        let m = classical_fairness(&predictions, &s, &y).unwrap();
        assert!((m.dsp.unwrap() - 0.3).abs() < 1e-12);

        // Perfect predictions zero the label-conditioned gaps.
        let m = classical_fairness(&y, &s, &y).unwrap();
        assert_eq!(m.deo, Some(0.0));
        assert_eq!(m.dao, Some(0.0));
        assert!(m.dsp.unwrap() > 0.0);
    }

    #[test]
    fn classical_gaps_are_invariant_to_relabeling_the_groups() {
        let predictions = [1, 0, 1, 1, 0, 1, 0, 0];
        let s = [1, 1, 1, 0, 0, 0, 1, 0];
        let y = [1, 0, 1, 1, 1, 0, 0, 0];
        let a = classical_fairness(&predictions, &s, &y).unwrap();
        let flipped: Vec<u8> = s.iter().map(|&v| 1 - v).collect();
        let b = classical_fairness(&predictions, &flipped, &y).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_conditioning_cell_undefines_only_that_gap() {
        // No unprivileged rows with y = 1: DEO and DAO undefined, DSP fine.
        let predictions = [1, 0, 1, 0];
        let s = [1, 1, 0, 0];
        let y = [1, 0, 0, 0];
        let m = classical_fairness(&predictions, &s, &y).unwrap();
        assert!(m.dsp.is_some());
        assert_eq!(m.deo, None);
        assert_eq!(m.dao, None);

        // Mismatched lengths and non-binary entries are errors.
        assert!(classical_fairness(&predictions, &s[..3], &y).is_err());
        assert!(classical_fairness(&[2, 0, 0, 0], &s, &y).is_err());
    }
}
