//! End-to-end orchestration: ingest, split, tune, generate, measure, emit.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

use crate::audit::cache::{config_digest, AuditCache, CacheMeta};
use crate::audit::config::AuditConfig;
use crate::audit::report::{
    emit_report, AuditReport, Diagnostics, EmptySetDiag, FairnessRow, ModelEvalRow,
    NegativeSetDiag, ProxyBlock, Role,
};
use crate::cf::{
    genetic_generate, known_space_generate, rerank_by_boundary_score, CounterfactualSet,
    Provenance,
};
use crate::data::{
    condense_categories, correlation_filter, encode, ex_ante_sp, load_csv, stratified_split,
    FeatureSchema, LoadReport, ParseOptions, SplitPair,
};
use crate::error::{Error, Result};
use crate::metrics::{
    cflips_group, classical_fairness, flip_vector, ndccf_group, negative_set, FlipVector,
    GroupMetric, NegativeSet,
};
use crate::model::{
    evaluate, grid_search_cv, Classifier, CvReport, Objective, TrainView, TrainedModel,
};
use crate::proxy::proxy_rank;
use crate::{par, seed};

/// A named grid winner with its cross-validation record.
pub struct TunedModel {
    pub name: String,
    pub model: TrainedModel,
    pub cv: CvReport,
}

struct Prepared {
    split: SplitPair,
    sens_index: usize,
    sensitive_name: String,
    ingest: LoadReport,
    filtered: Vec<String>,
    ex_ante: f64,
    decision: Vec<TunedModel>,
    sensitive: Vec<TunedModel>,
    /// Position in `sensitive` of the classifier used as the group oracle.
    oracle: usize,
}

fn prepare(config: &AuditConfig) -> Result<Prepared> {
    let mut schema = FeatureSchema::from_json_file(&config.dataset.schema)?;
    for name in &config.cf.immutable {
        let feature = schema
            .features
            .iter_mut()
            .find(|f| f.name == *name)
            .ok_or_else(|| {
                Error::Config(format!("immutable feature '{name}' is not in the schema"))
            })?;
        feature.mutable = false;
    }

    let mut opts = ParseOptions::default();
    if let Some(tokens) = &config.dataset.missing_tokens {
        opts.missing_tokens = tokens.clone();
    }
    let (mut raw, ingest) = load_csv(&config.dataset.csv, &schema, &opts)?;
    for (column, map) in &config.dataset.condense {
        raw = condense_categories(&raw, column, map)?;
    }
    let data = encode(&raw, &schema)?;

    let sens_index = match &config.dataset.sensitive {
        Some(name) => schema
            .sensitive
            .iter()
            .position(|s| s.name == *name)
            .ok_or_else(|| {
                Error::Config(format!("sensitive attribute '{name}' is not in the schema"))
            })?,
        None => 0,
    };
    if schema.sensitive.is_empty() {
        return Err(Error::Config("schema declares no sensitive attribute".into()));
    }
    let sensitive_name = schema.sensitive[sens_index].name.clone();
    let ex_ante = ex_ante_sp(&data, sens_index)?;

    let (data, filtered) = match config.dataset.correlation_filter {
        Some(threshold) => correlation_filter(&data, threshold, &sensitive_name)?,
        None => (data, Vec::new()),
    };

    let split_seed = config
        .dataset
        .split_seed
        .unwrap_or_else(|| seed::derive(config.seed, &[seed::label("split")]));
    let split = stratified_split(&data, config.dataset.test_fraction, split_seed)?;

    let folds = config.models.folds;
    let s_train = split.train.s[sens_index].clone();

    let sens_view = TrainView::sensitive(&split.train, sens_index)?;
    let mut sensitive = Vec::new();
    for (i, entry) in config.models.sensitive.iter().enumerate() {
        let cv_seed = seed::derive(config.seed, &[seed::label("cv_sensitive"), i as u64]);
        let (model, cv) = grid_search_cv(
            &sens_view,
            Some(&s_train),
            &entry.grid,
            folds,
            Objective::F1,
            cv_seed,
        )?;
        sensitive.push(TunedModel {
            name: entry.name.clone(),
            model,
            cv,
        });
    }
    // The strongest recoverer of the sensitive attribute becomes the
    // oracle; ties keep the earlier entry.
    let cv_score = |t: &TunedModel| t.cv.mean[t.cv.winner];
    let mut oracle = 0;
    for (i, t) in sensitive.iter().enumerate().skip(1) {
        if cv_score(t) > cv_score(&sensitive[oracle]) {
            oracle = i;
        }
    }

    let decision_view = TrainView::decision(&split.train);
    let mut decision = Vec::new();
    for (i, entry) in config.models.decision.iter().enumerate() {
        let cv_seed = seed::derive(config.seed, &[seed::label("cv_decision"), i as u64]);
        let (model, cv) = grid_search_cv(
            &decision_view,
            Some(&s_train),
            &entry.grid,
            folds,
            Objective::Auc,
            cv_seed,
        )?;
        decision.push(TunedModel {
            name: entry.name.clone(),
            model,
            cv,
        });
    }

    Ok(Prepared {
        split,
        sens_index,
        sensitive_name,
        ingest,
        filtered,
        ex_ante,
        decision,
        sensitive,
        oracle,
    })
}

fn subsample(neg: NegativeSet, max: Option<usize>, pick_seed: u64) -> (NegativeSet, Option<usize>) {
    match max {
        Some(m) if neg.len() > m => {
            let mut order: Vec<usize> = (0..neg.len()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(pick_seed);
            order.shuffle(&mut rng);
            let mut keep: Vec<usize> = order.into_iter().take(m).collect();
            keep.sort_unstable();
            (
                NegativeSet {
                    indices: keep.iter().map(|&j| neg.indices[j]).collect(),
                    group: keep.iter().map(|&j| neg.group[j]).collect(),
                },
                Some(m),
            )
        }
        _ => (neg, None),
    }
}

/// Generate (or reload from cache) one ranked set per negative sample, in
/// negative-set order. Samples fan out in parallel; per-sample seeds derive
/// from the config seed, the strategy, and the test-row index.
fn generate_sets(
    config: &AuditConfig,
    split: &SplitPair,
    decision: &TunedModel,
    strategy: Provenance,
    neg: &NegativeSet,
    cache: &AuditCache,
) -> Result<Vec<CounterfactualSet>> {
    let test = &split.test;
    let train = &split.train;
    let cache_key = format!("decision_{}", decision.name);
    let k = config.cf.k;

    let produced: Vec<Result<(CounterfactualSet, bool)>> = par::map_indexed(neg.len(), |j| {
        let idx = neg.indices[j];
        if let Some(set) = cache.load_set(&cache_key, strategy, idx) {
            return Ok((set, true));
        }
        let x = &test.x[idx];
        let mut set = match strategy {
            Provenance::Genetic => {
                let sample_seed = seed::derive(
                    config.seed,
                    &[seed::label("generate"), seed::label(strategy.label()), idx as u64],
                );
                let params = config.cf.genetic.resolve(k, sample_seed);
                genetic_generate(&decision.model, x, 1, k, &test.schema, &train.mad, &params)?
            }
            Provenance::KnownSpace => known_space_generate(&decision.model, x, 1, k, train)?,
        };
        set.origin_index = Some(idx);
        Ok((set, false))
    });

    let mut sets = Vec::with_capacity(neg.len());
    for item in produced {
        let (set, from_cache) = item?;
        if !from_cache {
            let idx = set.origin_index.expect("set generated with an origin index");
            cache.store_set(&cache_key, strategy, idx, &set)?;
        }
        sets.push(set);
    }
    Ok(sets)
}

fn flip_vectors(
    oracle: &TrainedModel,
    sets: &[CounterfactualSet],
    neg: &NegativeSet,
    cut: usize,
) -> Result<Vec<FlipVector>> {
    sets.iter()
        .zip(&neg.group)
        .map(|(set, &g)| flip_vector(oracle, set, g, cut))
        .collect()
}

fn fairness_row(model: &str, strategy: Provenance, metric: &str, gm: &GroupMetric) -> FairnessRow {
    FairnessRow {
        model: model.to_string(),
        strategy,
        k: gm.k,
        metric: metric.to_string(),
        privileged: gm.privileged,
        unprivileged: gm.unprivileged,
        delta: gm.delta(),
        contributing_privileged: gm.contributing_privileged,
        contributing_unprivileged: gm.contributing_unprivileged,
        skipped_privileged: gm.skipped_privileged,
        skipped_unprivileged: gm.skipped_unprivileged,
    }
}

/// Run the full audit, write the cache and the report files, and return the
/// assembled report. Deterministic for a fixed config: rerunning produces
/// byte-identical artifacts.
pub fn run_audit(config: &AuditConfig) -> Result<AuditReport> {
    config.validate()?;
    let prep = prepare(config)?;
    let test = &prep.split.test;
    let s_test = &test.s[prep.sens_index];
    let oracle = &prep.sensitive[prep.oracle];

    let mut model_eval = Vec::new();
    for tuned in &prep.decision {
        let eval = evaluate(&tuned.model, &test.x, &test.y, &test.layout)?;
        let predictions: Vec<u8> = test.x.iter().map(|x| tuned.model.predict(x)).collect();
        let classical = classical_fairness(&predictions, s_test, &test.y)?;
        model_eval.push(ModelEvalRow {
            name: tuned.name.clone(),
            role: Role::Decision,
            family: tuned.model.family().to_string(),
            cv_objective: "auc".into(),
            cv_mean: tuned.cv.mean[tuned.cv.winner],
            auc: eval.auc,
            acc: eval.acc,
            precision: eval.precision,
            recall: eval.recall,
            f1: eval.f1,
            dsp: classical.dsp,
            deo: classical.deo,
            dao: classical.dao,
        });
    }
    for tuned in &prep.sensitive {
        let eval = evaluate(&tuned.model, &test.x, s_test, &test.layout)?;
        model_eval.push(ModelEvalRow {
            name: tuned.name.clone(),
            role: Role::Sensitive,
            family: tuned.model.family().to_string(),
            cv_objective: "f1".into(),
            cv_mean: tuned.cv.mean[tuned.cv.winner],
            auc: eval.auc,
            acc: eval.acc,
            precision: eval.precision,
            recall: eval.recall,
            f1: eval.f1,
            dsp: None,
            deo: None,
            dao: None,
        });
    }

    let mut model_hashes = BTreeMap::new();
    for tuned in &prep.decision {
        model_hashes.insert(format!("decision_{}", tuned.name), tuned.model.content_hash());
    }
    model_hashes.insert(
        format!("sensitive_{}", oracle.name),
        oracle.model.content_hash(),
    );
    let cache = AuditCache::new(&config.output.dir);
    cache.prepare(&CacheMeta {
        config_sha256: config_digest(config)?,
        seed: config.seed,
        k: config.cf.k,
        model_hashes,
    })?;

    let mut fairness = Vec::new();
    let mut proxy = Vec::new();
    let mut negative_sets = Vec::new();
    let mut empty_sets = Vec::new();

    for tuned in &prep.decision {
        let neg_full = negative_set(&tuned.model, &oracle.model, test, prep.sens_index)?;
        let total_before = neg_full.len();
        let pick_seed = seed::derive(
            config.seed,
            &[seed::label("negative_subsample"), seed::label(&tuned.name)],
        );
        let (neg, subsampled_to) = subsample(neg_full, config.cf.max_samples, pick_seed);
        negative_sets.push(NegativeSetDiag {
            model: tuned.name.clone(),
            total: total_before,
            privileged: neg.group.iter().filter(|&&g| g == 1).count(),
            unprivileged: neg.group.iter().filter(|&&g| g == 0).count(),
            subsampled_to,
        });

        for &strategy in &config.cf.strategies {
            let sets = generate_sets(config, &prep.split, tuned, strategy, &neg, &cache)?;
            empty_sets.push(EmptySetDiag {
                model: tuned.name.clone(),
                strategy,
                empty_sets: sets.iter().filter(|s| s.is_empty()).count(),
            });

            for &cut in &config.metrics.cutoffs {
                let fvs = flip_vectors(&oracle.model, &sets, &neg, cut)?;
                let cf = cflips_group(&neg, &fvs, cut)?;
                fairness.push(fairness_row(&tuned.name, strategy, "cflips", &cf));
                let nd = ndccf_group(&neg, &fvs, cut)?;
                fairness.push(fairness_row(&tuned.name, strategy, "ndccf", &nd));
            }
            if config.metrics.rerank {
                let reranked: Vec<CounterfactualSet> = sets
                    .iter()
                    .map(|s| rerank_by_boundary_score(&tuned.model, s.clone()))
                    .collect();
                for &cut in &config.metrics.cutoffs {
                    let fvs = flip_vectors(&oracle.model, &reranked, &neg, cut)?;
                    let nd = ndccf_group(&neg, &fvs, cut)?;
                    fairness.push(fairness_row(&tuned.name, strategy, "ndccf_sorted", &nd));
                }
            }

            let pairs: usize = sets.iter().map(|s| s.len()).sum();
            if pairs >= 2 {
                proxy.push(ProxyBlock {
                    model: tuned.name.clone(),
                    strategy,
                    ranking: proxy_rank(&neg, &sets, &oracle.model, &test.schema)?,
                });
            }
        }
    }

    let undefined_sides = fairness
        .iter()
        .map(|r| usize::from(r.privileged.is_none()) + usize::from(r.unprivileged.is_none()))
        .sum();

    let report = AuditReport {
        model_eval,
        fairness,
        proxy,
        diagnostics: Diagnostics {
            seed: config.seed,
            k: config.cf.k,
            cutoffs: config.metrics.cutoffs.clone(),
            strategies: config.cf.strategies.clone(),
            sensitive_attribute: prep.sensitive_name.clone(),
            sensitive_oracle: oracle.name.clone(),
            ingest: prep.ingest.clone(),
            filtered_columns: prep.filtered.clone(),
            train_rows: prep.split.train.len(),
            test_rows: prep.split.test.len(),
            ex_ante_sp: prep.ex_ante,
            negative_sets,
            empty_counterfactual_sets: empty_sets,
            undefined_sides,
            workers: par::workers(),
        },
    };

    cache.store_report(&report)?;
    emit_report(&report, &config.output.formats, &config.output.dir)?;
    Ok(report)
}

/// One point of a k-ablation curve. `partial` marks cut-offs above some
/// sample's generated pool, where truncation can no longer change the set.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SweepPoint {
    pub k: usize,
    pub delta_cflips: Option<f64>,
    pub delta_ndccf: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_ndccf_sorted: Option<f64>,
    pub partial: bool,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SweepCurve {
    pub model: String,
    pub strategy: Provenance,
    pub points: Vec<SweepPoint>,
}

/// Gap curves as a function of the ranking cut-off, from one generation pass
/// at the configured k. Shares the counterfactual cache with `run_audit`, so
/// a sweep after an audit reuses every generated set.
pub fn sweep_k(
    config: &AuditConfig,
    model_name: &str,
    strategy: Provenance,
    k_values: &[usize],
) -> Result<SweepCurve> {
    config.validate()?;
    if k_values.is_empty() {
        return Err(Error::Config("sweep needs at least one k value".into()));
    }
    if k_values.contains(&0) {
        return Err(Error::Config("sweep k values must be at least 1".into()));
    }

    let prep = prepare(config)?;
    let tuned = prep
        .decision
        .iter()
        .find(|t| t.name == model_name)
        .ok_or_else(|| {
            Error::Config(format!("'{model_name}' is not a configured decision model"))
        })?;
    let oracle = &prep.sensitive[prep.oracle];
    let test = &prep.split.test;

    let mut model_hashes = BTreeMap::new();
    for t in &prep.decision {
        model_hashes.insert(format!("decision_{}", t.name), t.model.content_hash());
    }
    model_hashes.insert(
        format!("sensitive_{}", oracle.name),
        oracle.model.content_hash(),
    );
    let cache = AuditCache::new(&config.output.dir);
    cache.prepare(&CacheMeta {
        config_sha256: config_digest(config)?,
        seed: config.seed,
        k: config.cf.k,
        model_hashes,
    })?;

    let neg_full = negative_set(&tuned.model, &oracle.model, test, prep.sens_index)?;
    let pick_seed = seed::derive(
        config.seed,
        &[seed::label("negative_subsample"), seed::label(&tuned.name)],
    );
    let (neg, _) = subsample(neg_full, config.cf.max_samples, pick_seed);
    let sets = generate_sets(config, &prep.split, tuned, strategy, &neg, &cache)?;
    let reranked: Option<Vec<CounterfactualSet>> = config.metrics.rerank.then(|| {
        sets.iter()
            .map(|s| rerank_by_boundary_score(&tuned.model, s.clone()))
            .collect()
    });

    let mut points = Vec::with_capacity(k_values.len());
    for &k in k_values {
        let fvs = flip_vectors(&oracle.model, &sets, &neg, k)?;
        let cf = cflips_group(&neg, &fvs, k)?;
        let nd = ndccf_group(&neg, &fvs, k)?;
        let sorted = match &reranked {
            Some(r) => {
                let fvs = flip_vectors(&oracle.model, r, &neg, k)?;
                ndccf_group(&neg, &fvs, k)?.delta()
            }
            None => None,
        };
        points.push(SweepPoint {
            k,
            delta_cflips: cf.delta(),
            delta_ndccf: nd.delta(),
            delta_ndccf_sorted: sorted,
            partial: sets.iter().any(|s| !s.is_empty() && s.len() < k),
        });
    }

    Ok(SweepCurve {
        model: model_name.to_string(),
        strategy,
        points,
    })
}
