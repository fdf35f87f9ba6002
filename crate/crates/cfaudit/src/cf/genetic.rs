//! Genetic search over the unexplored feature space: evolve perturbed
//! copies of the origin until enough of them cross the decision boundary.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use super::{
    changed_features, mad_distance_unchecked, rank_by_mad_distance, Counterfactual,
    CounterfactualSet, Provenance, UtilityRule,
};
use crate::data::{EncodedLayout, FeatureKind, FeatureSchema};
use crate::error::{Error, Result};
use crate::model::Classifier;

/// Non-negative weights of the fitness terms. Validity pulls candidates
/// across the boundary, proximity and sparsity pull them back toward the
/// origin, diversity spreads the elite apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessWeights {
    pub validity: f64,
    pub proximity: f64,
    pub sparsity: f64,
    pub diversity: f64,
}

impl Default for FitnessWeights {
    fn default() -> Self {
        FitnessWeights {
            validity: 2.0,
            proximity: 0.5,
            sparsity: 0.2,
            diversity: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneticParams {
    pub population: usize,
    pub generations: usize,
    /// Per-feature probability that mutation touches the gene.
    pub mutation_rate: f64,
    /// Probability that a child is produced by crossover instead of cloning.
    pub crossover_rate: f64,
    pub weights: FitnessWeights,
    pub seed: u64,
}

impl GeneticParams {
    /// Defaults sized for requesting `k` counterfactuals.
    pub fn for_k(k: usize, seed: u64) -> Self {
        GeneticParams {
            population: 10 * k.max(1),
            generations: 300,
            mutation_rate: 0.4,
            crossover_rate: 0.7,
            weights: FitnessWeights::default(),
            seed,
        }
    }

    fn validate(&self, k: usize) -> Result<()> {
        if self.population < k {
            return Err(Error::Generation(format!(
                "population {} is smaller than the {k} requested counterfactuals",
                self.population
            )));
        }
        for (name, rate) in [
            ("mutation_rate", self.mutation_rate),
            ("crossover_rate", self.crossover_rate),
        ] {
            if !(rate > 0.0 && rate < 1.0) {
                return Err(Error::Generation(format!(
                    "{name} must lie in (0,1), got {rate}"
                )));
            }
        }
        let w = &self.weights;
        for (name, value) in [
            ("validity", w.validity),
            ("proximity", w.proximity),
            ("sparsity", w.sparsity),
            ("diversity", w.diversity),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::Generation(format!(
                    "weight {name} must be finite and non-negative, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// Consecutive generations the full quota must persist before stopping early.
const STABLE_GENERATIONS: usize = 10;
/// Elite members the diversity bonus is measured against.
const DIVERSITY_ELITE: usize = 10;

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn bits_key(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

/// Mutate one feature block in place: Gaussian noise scaled to the MAD for
/// scalars (ordinals additionally rounded), a uniform category resample for
/// one-hot blocks. Values are clamped to the schema range.
fn mutate_block(
    vector: &mut [f64],
    block_idx: usize,
    layout: &EncodedLayout,
    mads: &[f64],
    rng: &mut ChaCha8Rng,
) {
    let block = &layout.blocks[block_idx];
    match block.kind {
        FeatureKind::Numeric | FeatureKind::Ordinal => {
            let i = block.start;
            let (lo, hi) = block.range.expect("scalar block has a range");
            let mut v = vector[i] + gaussian(rng) * mads[i];
            if block.kind == FeatureKind::Ordinal {
                v = v.round();
            }
            vector[i] = v.clamp(lo, hi);
        }
        FeatureKind::Categorical => {
            let pick = rng.gen_range(0..block.width);
            for (j, col) in block.cols().enumerate() {
                vector[col] = if j == pick { 1.0 } else { 0.0 };
            }
        }
    }
}

struct Eval {
    fitness: f64,
    valid: bool,
}

/// Evolve counterfactual candidates for one origin row. Deterministic for a
/// fixed seed. Returns up to `k` distinct valid candidates nearest-first;
/// an infeasible search yields an empty set with a diagnostic, not an error.
pub fn genetic_generate<C: Classifier + ?Sized>(
    model: &C,
    x: &[f64],
    desired: u8,
    k: usize,
    schema: &FeatureSchema,
    mads: &[f64],
    params: &GeneticParams,
) -> Result<CounterfactualSet> {
    if k < 1 {
        return Err(Error::Generation("k must be at least 1".into()));
    }
    params.validate(k)?;
    let layout = schema.layout();
    if x.len() != layout.width() || mads.len() != layout.width() {
        return Err(Error::Generation(format!(
            "origin width {} or mads width {} does not match layout width {}",
            x.len(),
            mads.len(),
            layout.width()
        )));
    }
    if model.layout_hash() != layout.hash() {
        return Err(Error::Model(
            "model was trained on a different encoded layout".into(),
        ));
    }

    let mutable: Vec<usize> = layout
        .blocks
        .iter()
        .enumerate()
        .filter(|(_, b)| b.mutable)
        .map(|(i, _)| i)
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut population: Vec<Vec<f64>> = (0..params.population)
        .map(|_| {
            let mut c = x.to_vec();
            for &bi in &mutable {
                if rng.gen::<f64>() < 0.5 {
                    mutate_block(&mut c, bi, &layout, mads, &mut rng);
                }
            }
            c
        })
        .collect();

    // Every distinct valid candidate ever seen, in first-seen order.
    let mut archive: Vec<Vec<f64>> = Vec::new();
    let mut archive_keys: HashSet<Vec<u64>> = HashSet::new();
    let origin_key = bits_key(x);
    let mut stable = 0usize;

    let elite_carry = (params.population / 5).max(1);

    for _gen in 0..params.generations {
        // Base fitness: validity hinge, proximity, sparsity.
        let mut evals: Vec<Eval> = population
            .iter()
            .map(|c| {
                let score = model.score(c);
                let hinge = if desired == 1 {
                    (0.5 - score).max(0.0)
                } else {
                    (score - 0.5).max(0.0)
                };
                let valid = u8::from(score >= 0.5) == desired;
                let dist = mad_distance_unchecked(x, c, &layout, mads);
                let changed = changed_features(x, c, &layout) as f64;
                Eval {
                    fitness: -params.weights.validity * hinge
                        - params.weights.proximity * dist
                        - params.weights.sparsity * changed,
                    valid,
                }
            })
            .collect();

        for (c, eval) in population.iter().zip(&evals) {
            if eval.valid {
                let key = bits_key(c);
                if key != origin_key && !archive_keys.contains(&key) {
                    archive_keys.insert(key);
                    archive.push(c.clone());
                }
            }
        }

        if archive.len() >= k {
            stable += 1;
            if stable >= STABLE_GENERATIONS {
                break;
            }
        } else {
            stable = 0;
        }

        // Order by base fitness to pick the elite.
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| evals[b].fitness.partial_cmp(&evals[a].fitness).unwrap());

        // Diversity bonus: mean distance to the best few candidates.
        let elite_ref: Vec<&Vec<f64>> = order
            .iter()
            .take(DIVERSITY_ELITE)
            .map(|&i| &population[i])
            .collect();
        if params.weights.diversity > 0.0 && !elite_ref.is_empty() {
            for (i, c) in population.iter().enumerate() {
                let mean: f64 = elite_ref
                    .iter()
                    .map(|e| mad_distance_unchecked(e, c, &layout, mads))
                    .sum::<f64>()
                    / elite_ref.len() as f64;
                evals[i].fitness += params.weights.diversity * mean;
            }
            order.sort_by(|&a, &b| evals[b].fitness.partial_cmp(&evals[a].fitness).unwrap());
        }

        // Next generation: elite carried over, rest bred by tournament
        // selection, uniform feature-level crossover, block mutation.
        let mut next: Vec<Vec<f64>> =
            order.iter().take(elite_carry).map(|&i| population[i].clone()).collect();
        while next.len() < params.population {
            let pick = |rng: &mut ChaCha8Rng| {
                let a = rng.gen_range(0..population.len());
                let b = rng.gen_range(0..population.len());
                if evals[a].fitness >= evals[b].fitness {
                    a
                } else {
                    b
                }
            };
            let pa = pick(&mut rng);
            let pb = pick(&mut rng);
            let mut child = if rng.gen::<f64>() < params.crossover_rate {
                let mut c = population[pa].clone();
                for block in &layout.blocks {
                    if rng.gen::<bool>() {
                        for col in block.cols() {
                            c[col] = population[pb][col];
                        }
                    }
                }
                c
            } else {
                population[pa].clone()
            };
            for &bi in &mutable {
                if rng.gen::<f64>() < params.mutation_rate {
                    mutate_block(&mut child, bi, &layout, mads, &mut rng);
                }
            }
            next.push(child);
        }
        population = next;
    }

    if archive.is_empty() {
        return Ok(CounterfactualSet::empty(
            x.to_vec(),
            desired,
            k,
            format!(
                "no valid candidates after {} generations",
                params.generations
            ),
        ));
    }

    let items: Vec<Counterfactual> = archive
        .into_iter()
        .map(|vector| {
            let distance = mad_distance_unchecked(x, &vector, &layout, mads);
            let sparsity = changed_features(x, &vector, &layout);
            Counterfactual {
                rank: 0,
                vector,
                valid: true,
                distance,
                sparsity,
                utility: -distance,
                provenance: Provenance::Genetic,
            }
        })
        .collect();

    let set = CounterfactualSet {
        origin_index: None,
        origin: x.to_vec(),
        desired,
        k_requested: k,
        utility_rule: UtilityRule::MadDistance,
        items,
        diagnostic: None,
    };
    Ok(rank_by_mad_distance(set).truncated(k))
}
