//! Marginal pseudo-negative estimation and adaptive mixup.
//!
//! Each corrupted triple is compared against the training positives sharing
//! its pattern. A corruption whose score lands in
//! `[min − δ_T, mean]` of those positives is a *marginal pseudo-negative*
//! (MPN): plausible enough that it may be a missing fact. MPNs are mixed with
//! a boundary positive from the pattern's candidate pool and receive a soft
//! label in `[0, 0.5]`; the remaining true negatives are mixed with another
//! true negative of the same positive and keep label 0.
//!
//! Patterns with fewer than `μ` training positives are never estimated.

use std::collections::HashMap;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};
use crate::kg_store::{EntityId, Pattern, PatternIndex, Side};
use crate::sampler::NegSampleBatch;
use crate::scalar::Scalar;
use crate::scoring::EmbeddingModel;

/// Largest number of positives scored for one pattern's statistics.
pub const STATS_SAMPLE_CAP: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemixConfig {
    /// δ, base width below the pattern minimum.
    pub delta: f64,
    /// β, cap on the schedule multiplier.
    pub beta: f64,
    /// T₀, epochs until the multiplier stops growing.
    pub t0: f64,
    /// μ, minimum pattern size for estimation.
    pub mu: usize,
    /// α of the Beta(α, α) mixing distribution.
    pub alpha: f64,
    /// W, warm-up epochs before refinement engages.
    pub warmup_epochs: usize,
}

impl Default for DemixConfig {
    fn default() -> Self {
        DemixConfig {
            delta: 0.1,
            beta: 3.0,
            t0: 8.0,
            mu: 3,
            alpha: 1.0,
            warmup_epochs: 8,
        }
    }
}

impl DemixConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::config("demix.delta must be finite and >= 0"));
        }
        if !(self.beta > 0.0) {
            return Err(Error::config("demix.beta must be > 0"));
        }
        if !(self.t0 >= 1.0 && self.t0.is_finite()) {
            return Err(Error::config("demix.t0 must be >= 1"));
        }
        if self.mu < 1 {
            return Err(Error::config("demix.mu must be >= 1"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::config("demix.alpha must be > 0"));
        }
        Ok(())
    }
}

/// `δ_T = δ · min(β, T / T₀)`.
pub fn delta_at_epoch(epoch: usize, config: &DemixConfig) -> f64 {
    config.delta * config.beta.min(epoch as f64 / config.t0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternStats<F> {
    pub pattern: Pattern,
    pub score_min: F,
    pub score_mean: F,
    /// `|T_pattern|` over the full pattern, even when the scores were subsampled.
    pub count: usize,
}

/// Min and mean of `scores`, with the mean clamped into `[min, max]` so
/// rounding can never put it below the minimum.
fn min_mean<F: Scalar>(scores: impl Iterator<Item = F>) -> Option<(F, F)> {
    let mut n = 0usize;
    let mut sum = 0.0f64;
    let mut min = F::infinity();
    let mut max = F::neg_infinity();
    for s in scores {
        n += 1;
        sum += s.as_f64();
        min = min.min(s);
        max = max.max(s);
    }
    if n == 0 {
        return None;
    }
    let mean = F::of(sum / n as f64).max(min).min(max);
    Some((min, mean))
}

/// Scores of the training positives sharing `pattern` under the current model.
///
/// Patterns with more than [`STATS_SAMPLE_CAP`] positives are summarized from
/// a uniform subsample. Returns `None` for patterns absent from the index.
pub fn pattern_stats<F: Scalar, R: Rng + ?Sized>(
    model: &EmbeddingModel<F>,
    pattern: &Pattern,
    index: &PatternIndex,
    rng: &mut R,
) -> Option<PatternStats<F>> {
    let entities = index.entities(pattern)?;
    let score = |&e: &EntityId| model.score(&pattern.complete(e));
    let (score_min, score_mean) = if entities.len() > STATS_SAMPLE_CAP {
        let picks = sample_indices(rng, entities.len(), STATS_SAMPLE_CAP);
        min_mean(picks.into_iter().map(|i| score(&entities[i])))?
    } else {
        min_mean(entities.iter().map(score))?
    };
    Some(PatternStats {
        pattern: *pattern,
        score_min,
        score_mean,
        count: entities.len(),
    })
}

/// Per-batch memo of pattern statistics; clear it whenever the model moves.
#[derive(Debug, Default)]
pub struct StatsCache<F> {
    stats: HashMap<Pattern, Option<PatternStats<F>>>,
}

impl<F: Scalar> StatsCache<F> {
    pub fn new() -> Self {
        StatsCache {
            stats: HashMap::new(),
        }
    }

    pub fn clear(&mut self) {
        self.stats.clear();
    }

    pub fn get<R: Rng + ?Sized>(
        &mut self,
        model: &EmbeddingModel<F>,
        pattern: &Pattern,
        index: &PatternIndex,
        rng: &mut R,
    ) -> Option<PatternStats<F>> {
        *self
            .stats
            .entry(*pattern)
            .or_insert_with(|| pattern_stats(model, pattern, index, rng))
    }
}

/// Split of one positive's corruption list into MPN and true-negative positions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MpnPartition {
    pub mpn: Vec<usize>,
    pub true_negative: Vec<usize>,
}

impl MpnPartition {
    pub fn all_negative(len: usize) -> Self {
        MpnPartition {
            mpn: Vec::new(),
            true_negative: (0..len).collect(),
        }
    }

    pub fn is_mpn(&self, k: usize) -> bool {
        self.mpn.binary_search(&k).is_ok()
    }

    pub fn len(&self) -> usize {
        self.mpn.len() + self.true_negative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Classifies each corruption score against its pattern's interval.
///
/// With `stats.count < mu` nothing is estimated and every position is a true
/// negative; otherwise position `k` is MPN iff
/// `score_min − delta_t ≤ neg_scores[k] ≤ score_mean`.
pub fn estimate_mpn<F: Scalar>(neg_scores: &[F], stats: &PatternStats<F>, delta_t: F, mu: usize) -> MpnPartition {
    if stats.count < mu {
        return MpnPartition::all_negative(neg_scores.len());
    }
    let lower = stats.score_min - delta_t;
    let mut partition = MpnPartition::default();
    for (k, &s) in neg_scores.iter().enumerate() {
        if lower <= s && s <= stats.score_mean {
            partition.mpn.push(k);
        } else {
            partition.true_negative.push(k);
        }
    }
    partition
}

/// Boundary positives per pattern: entities in the open slot whose fact
/// scores at or below the pattern mean.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CapPool {
    pools: HashMap<Pattern, Vec<EntityId>>,
}

impl CapPool {
    /// Rebuilds the pool for every pattern of `index` from the current model.
    pub fn build<F: Scalar>(model: &EmbeddingModel<F>, index: &PatternIndex) -> Self {
        let mut pools = HashMap::new();
        let mut scores = Vec::new();
        for side in Side::BOTH {
            for (pattern, entities) in index.patterns(side) {
                scores.clear();
                scores.extend(entities.iter().map(|&e| model.score(&pattern.complete(e))));
                let Some((_, mean)) = min_mean(scores.iter().copied()) else {
                    continue;
                };
                let members: Vec<EntityId> = entities
                    .iter()
                    .zip(&scores)
                    .filter(|(_, &s)| s <= mean)
                    .map(|(&e, _)| e)
                    .collect();
                pools.insert(pattern, members);
            }
        }
        CapPool { pools }
    }

    pub fn get(&self, pattern: &Pattern) -> Option<&[EntityId]> {
        self.pools.get(pattern).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.pools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pools.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Pattern, &[EntityId])> {
        self.pools.iter().map(|(p, v)| (p, v.as_slice()))
    }
}

/// Picks the mixing partner for position `k` of a corruption list.
///
/// MPN positions draw a boundary positive (label 1) from the pattern's pool;
/// true-negative positions draw one of the same list's true negatives
/// (label 0), possibly themselves.
pub fn select_partner<F: Scalar, R: Rng + ?Sized>(
    k: usize,
    partition: &MpnPartition,
    pool: &CapPool,
    pattern: &Pattern,
    neg_entities: &[EntityId],
    rng: &mut R,
) -> Result<(EntityId, F)> {
    if partition.is_mpn(k) {
        let members = pool
            .get(pattern)
            .filter(|m| !m.is_empty())
            .ok_or_else(|| Error::Invariant(format!("no candidate pool for pattern {pattern:?}")))?;
        Ok((members[rng.random_range(0..members.len())], F::one()))
    } else {
        let negatives = &partition.true_negative;
        if negatives.is_empty() {
            return Err(Error::Invariant(format!(
                "position {k} is neither MPN nor true negative"
            )));
        }
        let pick = negatives[rng.random_range(0..negatives.len())];
        Ok((neg_entities[pick], F::zero()))
    }
}

/// Output of one mixup draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixed<F> {
    pub vector: Vec<F>,
    pub label: F,
    /// λ′ = max(λ, 1 − λ) ∈ [0.5, 1].
    pub lambda: F,
}

/// Deterministic mixup at a fixed λ′ (callers pass λ′ already folded).
pub fn mix_with_lambda<F: Scalar>(e_i: &[F], y_i: F, e_j: &[F], y_j: F, lambda: F) -> Result<Mixed<F>> {
    if e_i.len() != e_j.len() {
        return Err(Error::Dimension {
            expected: e_i.len(),
            actual: e_j.len(),
        });
    }
    let rest = F::one() - lambda;
    Ok(Mixed {
        vector: e_i
            .iter()
            .zip(e_j)
            .map(|(&a, &b)| lambda * a + rest * b)
            .collect(),
        label: lambda * y_i + rest * y_j,
        lambda,
    })
}

/// Draws λ ~ Beta(α, α) and folds it to λ′ = max(λ, 1 − λ).
pub fn draw_lambda<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<f64> {
    let beta = Beta::new(alpha, alpha).map_err(|e| Error::config(format!("beta({alpha}): {e}")))?;
    let lambda: f64 = beta.sample(rng);
    Ok(lambda.max(1.0 - lambda))
}

/// Convex combination of two entity vectors and labels with a random λ′.
pub fn mix<F: Scalar, R: Rng + ?Sized>(e_i: &[F], y_i: F, e_j: &[F], y_j: F, alpha: f64, rng: &mut R) -> Result<Mixed<F>> {
    if e_i.len() != e_j.len() {
        return Err(Error::Dimension {
            expected: e_i.len(),
            actual: e_j.len(),
        });
    }
    let lambda = F::of(draw_lambda(alpha, rng)?);
    mix_with_lambda(e_i, y_i, e_j, y_j, lambda)
}

/// A refined corruption ready for the loss.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedTriple<F> {
    pub pattern: Pattern,
    /// Position in the originating corruption list.
    pub position: usize,
    /// Corrupted entity (mixed with weight λ′).
    pub source: EntityId,
    /// Partner entity (mixed with weight 1 − λ′).
    pub partner: EntityId,
    /// Whether the source was classified MPN.
    pub from_mpn: bool,
    pub vector: Vec<F>,
    pub label: F,
    pub lambda: F,
}

impl<F> MixedTriple<F> {
    pub fn side(&self) -> Side {
        self.pattern.side
    }
}

/// Refines one positive's corruption list into mixed triples.
///
/// `epoch` is the post-warm-up counter `T` driving `δ_T`.
#[allow(clippy::too_many_arguments)]
pub fn refine_batch<F: Scalar, R: Rng + ?Sized>(
    batch: &NegSampleBatch,
    model: &EmbeddingModel<F>,
    index: &PatternIndex,
    pool: &CapPool,
    stats: &mut StatsCache<F>,
    epoch: usize,
    config: &DemixConfig,
    rng: &mut R,
) -> Result<Vec<MixedTriple<F>>> {
    let pattern = batch.pattern();
    let partition = match stats.get(model, &pattern, index, rng) {
        Some(s) => {
            let neg_scores: Vec<F> = batch.triples().map(|t| model.score(&t)).collect();
            let delta_t = F::of(delta_at_epoch(epoch, config));
            estimate_mpn(&neg_scores, &s, delta_t, config.mu)
        }
        None => MpnPartition::all_negative(batch.entities.len()),
    };
    let mut out = Vec::with_capacity(batch.entities.len());
    for (k, &source) in batch.entities.iter().enumerate() {
        let (partner, y_j) = select_partner::<F, R>(k, &partition, pool, &pattern, &batch.entities, rng)?;
        let mixed = mix(
            model.entity(source),
            F::zero(),
            model.entity(partner),
            y_j,
            config.alpha,
            rng,
        )?;
        out.push(MixedTriple {
            pattern,
            position: k,
            source,
            partner,
            from_mpn: partition.is_mpn(k),
            vector: mixed.vector,
            label: mixed.label,
            lambda: mixed.lambda,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg_store::Triple;
    use crate::rng::{stream, Stream};
    use crate::scoring::{ModelConfig, ModelKind};

    fn stats(min: f64, mean: f64, count: usize) -> PatternStats<f64> {
        PatternStats {
            pattern: Pattern {
                side: Side::Tail,
                anchor: 0,
                relation: 0,
            },
            score_min: min,
            score_mean: mean,
            count,
        }
    }

    /// DistMult with d = 1: f(h, r, t) = h·r·t, so scores are easy to pin.
    fn scalar_model(values: &[f64]) -> EmbeddingModel<f64> {
        let cfg = ModelConfig::new(ModelKind::DistMult, 1, 0.0);
        EmbeddingModel::from_tables(cfg, values.len(), 1, values.to_vec(), vec![1.0]).unwrap()
    }

    #[test]
    fn delta_schedule() {
        let cfg = DemixConfig {
            delta: 1.0,
            beta: 3.0,
            t0: 10.0,
            ..DemixConfig::default()
        };
        assert_eq!(delta_at_epoch(5, &cfg), 0.5);
        assert_eq!(delta_at_epoch(40, &cfg), 3.0);
        let zero = DemixConfig { delta: 0.0, ..cfg };
        assert!((0..100).all(|t| delta_at_epoch(t, &zero) == 0.0));
        assert!((0..100).all(|t| delta_at_epoch(t, &cfg) <= delta_at_epoch(t + 1, &cfg)));
    }

    #[test]
    fn stats_min_and_mean() {
        // anchor 0 has value 1, tails 1 and 2 have values 2 and 4 -> scores 2, 4
        let model = scalar_model(&[1.0, 2.0, 4.0]);
        let index = PatternIndex::build(&[Triple::new(0, 0, 1), Triple::new(0, 0, 2)]);
        let p = Pattern {
            side: Side::Tail,
            anchor: 0,
            relation: 0,
        };
        let s = pattern_stats(&model, &p, &index, &mut stream(0, Stream::Stats)).unwrap();
        assert_eq!((s.score_min, s.score_mean, s.count), (2.0, 3.0, 2));

        let single = PatternIndex::build(&[Triple::new(0, 0, 2)]);
        let s = pattern_stats(&model, &p, &single, &mut stream(0, Stream::Stats)).unwrap();
        assert_eq!((s.score_min, s.score_mean), (4.0, 4.0));

        let absent = Pattern {
            side: Side::Head,
            anchor: 0,
            relation: 0,
        };
        assert!(pattern_stats(&model, &absent, &index, &mut stream(0, Stream::Stats)).is_none());
    }

    #[test]
    fn equal_scores_give_equal_min_and_mean() {
        let c = 0.1f64;
        let got = min_mean([c; 7].into_iter()).unwrap();
        assert_eq!(got, (c, c));
    }

    #[test]
    fn large_patterns_are_subsampled_but_counted_fully() {
        let n = STATS_SAMPLE_CAP + 200;
        let mut values = vec![1.0];
        values.extend((0..n).map(|i| 1.0 + i as f64 / n as f64));
        let model = scalar_model(&values);
        let triples: Vec<Triple> = (1..=n as u32).map(|t| Triple::new(0, 0, t)).collect();
        let index = PatternIndex::build(&triples);
        let p = Pattern::of(&triples[0], Side::Tail);
        let s = pattern_stats(&model, &p, &index, &mut stream(1, Stream::Stats)).unwrap();
        assert_eq!(s.count, n);
        assert!(s.score_min >= 1.0 && s.score_mean < 2.0);
    }

    #[test]
    fn interval_classification() {
        let p = estimate_mpn(&[2.5, 3.5, 1.0], &stats(2.0, 3.0, 5), 0.5, 3);
        assert_eq!(p.mpn, vec![0]);
        assert_eq!(p.true_negative, vec![1, 2]);
    }

    #[test]
    fn gate_blocks_small_patterns() {
        let p = estimate_mpn(&[2.5, 2.9, 2.0], &stats(2.0, 3.0, 2), 0.5, 3);
        assert!(p.mpn.is_empty());
        assert_eq!(p.true_negative, vec![0, 1, 2]);
    }

    #[test]
    fn huge_delta_leaves_only_upper_bound() {
        let scores = [-1e9, 2.9, 3.0, 3.1, -5.0];
        let p = estimate_mpn(&scores, &stats(2.0, 3.0, 5), 1e300, 1);
        assert_eq!(p.mpn, vec![0, 1, 2, 4]);
        let p = estimate_mpn(&scores, &stats(2.0, 3.0, 5), f64::INFINITY, 1);
        assert_eq!(p.mpn, vec![0, 1, 2, 4]);
    }

    #[test]
    fn cap_pool_membership() {
        let model = scalar_model(&[1.0, 2.0, 4.0, 3.0]);
        let index = PatternIndex::build(&[Triple::new(0, 0, 1), Triple::new(0, 0, 2)]);
        let pool = CapPool::build(&model, &index);
        let hr = Pattern {
            side: Side::Tail,
            anchor: 0,
            relation: 0,
        };
        assert_eq!(pool.get(&hr), Some(&[1][..]));
        // (r, t) patterns each have a single positive
        for t in [1, 2] {
            let rt = Pattern {
                side: Side::Head,
                anchor: t,
                relation: 0,
            };
            assert_eq!(pool.get(&rt), Some(&[0][..]));
        }

        let flat = scalar_model(&[1.0, 2.0, 2.0, 2.0]);
        let index = PatternIndex::build(&[
            Triple::new(0, 0, 1),
            Triple::new(0, 0, 2),
            Triple::new(0, 0, 3),
        ]);
        assert_eq!(CapPool::build(&flat, &index).get(&hr), Some(&[1, 2, 3][..]));
    }

    #[test]
    fn partner_selection() {
        let pattern = Pattern {
            side: Side::Tail,
            anchor: 0,
            relation: 0,
        };
        let mut pool = CapPool::default();
        pool.pools.insert(pattern, vec![7]);
        let partition = MpnPartition {
            mpn: vec![0],
            true_negative: vec![1],
        };
        let negs = [3, 4];
        let mut rng = stream(0, Stream::Demix);
        let (p, y) = select_partner::<f64, _>(0, &partition, &pool, &pattern, &negs, &mut rng).unwrap();
        assert_eq!((p, y), (7, 1.0));
        let (p, y) = select_partner::<f64, _>(1, &partition, &pool, &pattern, &negs, &mut rng).unwrap();
        assert_eq!((p, y), (4, 0.0));

        let empty = CapPool::default();
        assert!(matches!(
            select_partner::<f64, _>(0, &partition, &empty, &pattern, &negs, &mut rng),
            Err(Error::Invariant(_))
        ));
    }

    #[test]
    fn true_negative_partner_is_uniform() {
        let pattern = Pattern {
            side: Side::Head,
            anchor: 1,
            relation: 0,
        };
        let partition = MpnPartition::all_negative(3);
        let negs = [10, 11, 12];
        let mut rng = stream(9, Stream::Demix);
        let mut counts = [0usize; 3];
        let n = 10_000;
        for _ in 0..n {
            let (p, _) =
                select_partner::<f64, _>(0, &partition, &CapPool::default(), &pattern, &negs, &mut rng).unwrap();
            counts[(p - 10) as usize] += 1;
        }
        let expected = n as f64 / 3.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // χ²(2 dof) at p = 0.01
        assert!(chi2 < 9.210, "chi2 = {chi2}, counts = {counts:?}");
    }

    #[test]
    fn mix_examples() {
        let m = mix_with_lambda::<f64>(&[1.0, 0.0], 0.0, &[0.0, 1.0], 1.0, 0.7).unwrap();
        assert!((m.vector[0] - 0.7).abs() < 1e-15 && (m.vector[1] - 0.3).abs() < 1e-15);
        assert!((m.label - 0.3).abs() < 1e-15);
        for lambda in [0.5, 0.6, 0.99, 1.0] {
            let m = mix_with_lambda(&[1.0], 0.0, &[2.0], 0.0, lambda).unwrap();
            assert_eq!(m.label, 0.0);
        }
        assert!(matches!(
            mix_with_lambda(&[1.0], 0.0, &[1.0, 2.0], 0.0, 0.7),
            Err(Error::Dimension { .. })
        ));
        // λ = 0.3 folds to λ′ = 0.7
        assert_eq!(0.3f64.max(1.0 - 0.3), 0.7);
    }

    #[test]
    fn refine_with_rejecting_gate_gives_zero_labels() {
        let model = scalar_model(&[1.0, 2.0, 4.0, 3.0]);
        let index = PatternIndex::build(&[Triple::new(0, 0, 1)]);
        let pool = CapPool::build(&model, &index);
        let batch = NegSampleBatch {
            positive: Triple::new(0, 0, 1),
            side: Side::Tail,
            entities: vec![3],
            fallbacks: 0,
        };
        let cfg = DemixConfig {
            mu: 3,
            ..DemixConfig::default()
        };
        let out = refine_batch(
            &batch,
            &model,
            &index,
            &pool,
            &mut StatsCache::new(),
            4,
            &cfg,
            &mut stream(0, Stream::Demix),
        )
        .unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].label, 0.0);
        assert_eq!(out[0].partner, 3);
        assert_eq!(out[0].vector, vec![3.0]);
    }

    #[test]
    fn refine_planted_mpn() {
        // positives of (0, r): tails 1 (score 2) and 2 (score 4); corruption 3 scores 2.5
        let model = scalar_model(&[1.0, 2.0, 4.0, 2.5]);
        let index = PatternIndex::build(&[Triple::new(0, 0, 1), Triple::new(0, 0, 2)]);
        let pool = CapPool::build(&model, &index);
        let batch = NegSampleBatch {
            positive: Triple::new(0, 0, 1),
            side: Side::Tail,
            entities: vec![3],
            fallbacks: 0,
        };
        // δ_T = δ·min(β, T/T₀) = 0.5 at T = 5 with δ = 1, T₀ = 10
        let cfg = DemixConfig {
            delta: 1.0,
            beta: 3.0,
            t0: 10.0,
            mu: 1,
            ..DemixConfig::default()
        };
        for seed in 0..20 {
            let out = refine_batch(
                &batch,
                &model,
                &index,
                &pool,
                &mut StatsCache::new(),
                5,
                &cfg,
                &mut stream(seed, Stream::Demix),
            )
            .unwrap();
            let m = &out[0];
            assert!(m.from_mpn);
            assert_eq!(m.partner, 1);
            assert!((m.label - (1.0 - m.lambda)).abs() < 1e-15);
            assert!((0.0..=0.5).contains(&m.label));
        }
    }

    #[test]
    fn refine_above_mean_all_negative() {
        let model = scalar_model(&[1.0, 2.0, 4.0, 5.0, 6.0]);
        let index = PatternIndex::build(&[Triple::new(0, 0, 1), Triple::new(0, 0, 2)]);
        let pool = CapPool::build(&model, &index);
        let batch = NegSampleBatch {
            positive: Triple::new(0, 0, 1),
            side: Side::Tail,
            entities: vec![3, 4, 3],
            fallbacks: 0,
        };
        let cfg = DemixConfig {
            mu: 1,
            ..DemixConfig::default()
        };
        let out = refine_batch(
            &batch,
            &model,
            &index,
            &pool,
            &mut StatsCache::new(),
            3,
            &cfg,
            &mut stream(0, Stream::Demix),
        )
        .unwrap();
        assert!(out.iter().all(|m| m.label == 0.0 && !m.from_mpn));
        assert!(out.iter().all(|m| [3, 4].contains(&m.partner)));
    }
}
