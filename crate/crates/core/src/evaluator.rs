//! Filtered link-prediction ranking and the MPN estimation diagnostic.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::demix::{delta_at_epoch, estimate_mpn, pattern_stats, DemixConfig};
use crate::error::{Error, Result};
use crate::kg_store::{FilterIndex, Pattern, PatternIndex, RelationId, Side, Triple};
use crate::rng;
use crate::scalar::Scalar;
use crate::scoring::EmbeddingModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankResult {
    pub triple: Triple,
    pub side: Side,
    /// 1 + number of unfiltered candidates scoring strictly higher.
    pub rank: usize,
    /// Unfiltered candidates scoring exactly the same as the true entity.
    pub ties: usize,
    /// Unfiltered candidates compared against.
    pub candidates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
    pub count: usize,
}

/// Filtered rank of the true entity in the `side` slot of `triple`.
pub fn rank_triple<F: Scalar>(model: &EmbeddingModel<F>, triple: &Triple, side: Side, filter: &FilterIndex) -> RankResult {
    let mut scores = Vec::with_capacity(model.num_entities());
    rank_with_buffer(model, triple, side, filter, &mut scores)
}

fn rank_with_buffer<F: Scalar>(
    model: &EmbeddingModel<F>,
    triple: &Triple,
    side: Side,
    filter: &FilterIndex,
    scores: &mut Vec<F>,
) -> RankResult {
    let pattern = Pattern::of(triple, side);
    let truth = side.entity(triple);
    model.candidate_scores(&pattern, scores);
    let target = scores[truth as usize];
    let mut higher = 0usize;
    let mut ties = 0usize;
    let mut candidates = 0usize;
    for (e, &s) in scores.iter().enumerate() {
        let e = e as u32;
        if e == truth || filter.contains(&pattern, e) {
            continue;
        }
        candidates += 1;
        if s > target {
            higher += 1;
        } else if s == target {
            ties += 1;
        }
    }
    RankResult {
        triple: *triple,
        side,
        rank: higher + 1,
        ties,
        candidates,
    }
}

pub fn compute_metrics(ranks: &[RankResult]) -> Result<MetricsReport> {
    if ranks.is_empty() {
        return Err(Error::Empty("rank list"));
    }
    let n = ranks.len() as f64;
    let hits = |k: usize| ranks.iter().filter(|r| r.rank <= k).count() as f64 / n;
    Ok(MetricsReport {
        mrr: ranks.iter().map(|r| 1.0 / r.rank as f64).sum::<f64>() / n,
        hits1: hits(1),
        hits3: hits(3),
        hits10: hits(10),
        count: ranks.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: MetricsReport,
    /// Head query then tail query for each triple, in input order.
    pub ranks: Vec<RankResult>,
    pub per_relation: Vec<(RelationId, MetricsReport)>,
}

/// Ranks both sides of every triple and pools the results.
pub fn evaluate<F: Scalar>(model: &EmbeddingModel<F>, triples: &[Triple], filter: &FilterIndex) -> Result<Evaluation> {
    for t in triples {
        model.check_triple(t)?;
    }
    let ranks: Vec<RankResult> = triples
        .par_iter()
        .map_init(Vec::new, |buf, t| {
            [
                rank_with_buffer(model, t, Side::Head, filter, buf),
                rank_with_buffer(model, t, Side::Tail, filter, buf),
            ]
        })
        .flatten_iter()
        .collect();
    let report = compute_metrics(&ranks)?;
    let (ties, candidates) = ranks
        .iter()
        .fold((0usize, 0usize), |(t, c), r| (t + r.ties, c + r.candidates));
    if candidates > 0 && ties * 2 > candidates {
        log::warn!(
            "degenerate model: {ties} of {candidates} candidate scores tie with the true entity"
        );
    }
    let mut grouped: BTreeMap<RelationId, Vec<RankResult>> = BTreeMap::new();
    for r in &ranks {
        grouped.entry(r.triple.relation).or_default().push(*r);
    }
    let per_relation = grouped
        .into_iter()
        .map(|(rel, rs)| Ok((rel, compute_metrics(&rs)?)))
        .collect::<Result<_>>()?;
    Ok(Evaluation {
        report,
        ranks,
        per_relation,
    })
}

/// MPN recall of planted facts on one pattern side.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SideAccuracy {
    /// Planted triples whose pattern exists in training.
    pub evaluable: usize,
    /// Of those, how many fell inside the MPN interval.
    pub correct: usize,
    /// Mean fraction of all entities that the same interval would accept;
    /// the recall a score-blind classifier would get.
    pub interval_fraction: f64,
}

impl SideAccuracy {
    pub fn accuracy(&self) -> f64 {
        if self.evaluable == 0 {
            0.0
        } else {
            self.correct as f64 / self.evaluable as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EstimationAccuracy {
    /// `(h, r)` patterns: the tail is the estimated slot.
    pub head_relation: SideAccuracy,
    /// `(r, t)` patterns: the head is the estimated slot.
    pub relation_tail: SideAccuracy,
}

impl EstimationAccuracy {
    pub fn side(&self, side: Side) -> &SideAccuracy {
        match side {
            Side::Tail => &self.head_relation,
            Side::Head => &self.relation_tail,
        }
    }
}

/// Runs the MPN estimator on held-out true facts.
///
/// `epoch` is the post-warm-up counter used for `δ_T`; `seed` only drives
/// statistic subsampling for very large patterns.
pub fn estimation_accuracy<F: Scalar>(
    model: &EmbeddingModel<F>,
    planted: &[Triple],
    index: &PatternIndex,
    config: &DemixConfig,
    epoch: usize,
    seed: u64,
) -> EstimationAccuracy {
    let delta_t = F::of(delta_at_epoch(epoch, config));
    let per_query: Vec<(Side, bool, f64)> = planted
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, t)| {
            let mut rng = rng::stream(seed.wrapping_add(i as u64), rng::Stream::Diagnostics);
            let mut scores = Vec::new();
            Side::BOTH
                .into_iter()
                .filter_map(|side| {
                    let pattern = Pattern::of(t, side);
                    let stats = pattern_stats(model, &pattern, index, &mut rng)?;
                    let hit = !estimate_mpn(&[model.score(t)], &stats, delta_t, config.mu)
                        .mpn
                        .is_empty();
                    let fraction = if stats.count < config.mu {
                        0.0
                    } else {
                        model.candidate_scores(&pattern, &mut scores);
                        let lower = stats.score_min - delta_t;
                        let inside = scores
                            .iter()
                            .filter(|&&s| lower <= s && s <= stats.score_mean)
                            .count();
                        inside as f64 / scores.len() as f64
                    };
                    Some((side, hit, fraction))
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let mut out = EstimationAccuracy::default();
    for (side, hit, fraction) in per_query {
        let acc = match side {
            Side::Tail => &mut out.head_relation,
            Side::Head => &mut out.relation_tail,
        };
        acc.evaluable += 1;
        acc.correct += usize::from(hit);
        acc.interval_fraction += fraction;
    }
    for acc in [&mut out.head_relation, &mut out.relation_tail] {
        if acc.evaluable > 0 {
            acc.interval_fraction /= acc.evaluable as f64;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg_store::TripleSet;
    use crate::scoring::{ModelConfig, ModelKind};

    /// DistMult, d = 1, relation 1: score(h, t) = h·t.
    fn scalar_model(values: &[f64]) -> EmbeddingModel<f64> {
        let cfg = ModelConfig::new(ModelKind::DistMult, 1, 0.0);
        EmbeddingModel::from_tables(cfg, values.len(), 1, values.to_vec(), vec![1.0]).unwrap()
    }

    fn filter_of(triples: &[Triple]) -> FilterIndex {
        let set = TripleSet::new(triples.to_vec()).unwrap();
        FilterIndex::build(&[&set])
    }

    #[test]
    fn unique_maximum_ranks_first() {
        let model = scalar_model(&[1.0, 5.0, 2.0, 3.0]);
        let t = Triple::new(0, 0, 1);
        let r = rank_triple(&model, &t, Side::Tail, &filter_of(&[t]));
        assert_eq!(r.rank, 1);
    }

    #[test]
    fn hand_ranking_with_and_without_filter() {
        // tail slot of (0, r, ?), anchor value 1: candidate scores = entity values.
        // entities 1, 2, 3 have 2.0 (truth), 3.0, 1.0; anchor 0 itself scores 1.0.
        let model = scalar_model(&[1.0, 2.0, 3.0, 1.0]);
        let t = Triple::new(0, 0, 1);
        assert_eq!(rank_triple(&model, &t, Side::Tail, &filter_of(&[t])).rank, 2);
        let known = filter_of(&[t, Triple::new(0, 0, 2)]);
        assert_eq!(rank_triple(&model, &t, Side::Tail, &known).rank, 1);
    }

    #[test]
    fn ties_do_not_worsen_rank() {
        let model = scalar_model(&[1.0, 2.0, 2.0, 2.0]);
        let t = Triple::new(0, 0, 1);
        let r = rank_triple(&model, &t, Side::Tail, &filter_of(&[t]));
        assert_eq!((r.rank, r.ties), (1, 2));
    }

    #[test]
    fn metrics_examples() {
        let mk = |rank| RankResult {
            triple: Triple::new(0, 0, 0),
            side: Side::Tail,
            rank,
            ties: 0,
            candidates: 10,
        };
        let m = compute_metrics(&[mk(1), mk(2), mk(4)]).unwrap();
        assert!((m.mrr - 1.75 / 3.0).abs() < 1e-15);
        assert!((m.hits1 - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.hits3 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.hits10, 1.0);
        let ones = compute_metrics(&[mk(1); 5]).unwrap();
        assert_eq!((ones.mrr, ones.hits1, ones.hits3, ones.hits10), (1.0, 1.0, 1.0, 1.0));
        assert!(matches!(compute_metrics(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn estimation_counts_and_exclusions() {
        // (0, r): positives tails 1, 2 with scores 2, 4 -> interval [2 - δ, 3]
        let model = scalar_model(&[1.0, 2.0, 4.0, 2.5, 9.0]);
        let index = PatternIndex::build(&[Triple::new(0, 0, 1), Triple::new(0, 0, 2)]);
        let cfg = DemixConfig {
            mu: 1,
            delta: 0.0,
            ..DemixConfig::default()
        };
        let planted = [
            Triple::new(0, 0, 3), // (h, r) pattern exists, 2.5 inside
            Triple::new(0, 0, 4), // 9.0 outside
            Triple::new(3, 0, 4), // neither pattern in training
        ];
        let acc = estimation_accuracy(&model, &planted, &index, &cfg, 0, 0);
        assert_eq!(acc.head_relation.evaluable, 2);
        assert_eq!(acc.head_relation.correct, 1);
        assert_eq!(acc.relation_tail.evaluable, 0);
        // interval [2, 3] accepts entity values 2.0 and 2.5 among 5
        assert!((acc.head_relation.interval_fraction - 0.4).abs() < 1e-12);
    }
}
