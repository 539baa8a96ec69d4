//! Corrupted-triple generation and self-adversarial weighting.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::kg_store::{EntityId, FilterIndex, Pattern, PatternIndex, Side, Triple};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Uniform,
    Bernoulli,
    SelfAdversarial,
    Demix,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Uniform => "uniform",
            Strategy::Bernoulli => "bernoulli",
            Strategy::SelfAdversarial => "self_adversarial",
            Strategy::Demix => "demix",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Strategy::Uniform),
            "bernoulli" => Ok(Strategy::Bernoulli),
            "self_adversarial" | "self-adversarial" => Ok(Strategy::SelfAdversarial),
            "demix" => Ok(Strategy::Demix),
            _ => Err(Error::config(format!("unknown sampler strategy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub strategy: Strategy,
    /// M, corruptions per positive.
    pub negatives: usize,
    /// Also reject corruptions that hit validation/test facts.
    pub leakage_filter: bool,
    /// Skip rejection against training facts.
    pub allow_train_collisions: bool,
    /// α_t for self-adversarial weights.
    pub temperature: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            strategy: Strategy::Demix,
            negatives: 16,
            leakage_filter: false,
            allow_train_collisions: false,
            temperature: 1.0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.negatives == 0 {
            return Err(Error::config("sampler.negatives must be at least 1"));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(Error::config("sampler.temperature must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Per-relation average tails-per-head and heads-per-tail.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliStats {
    /// `(tph, hpt)` indexed by relation id; relations absent from the input get `(1, 1)`.
    pub per_relation: Vec<(f64, f64)>,
}

impl BernoulliStats {
    pub fn compute(train: &[Triple], num_relations: usize) -> Self {
        let index = PatternIndex::build(train);
        let mut sums = vec![(0usize, 0usize, 0usize, 0usize); num_relations];
        for (p, tails) in index.patterns(Side::Tail) {
            let s = &mut sums[p.relation as usize];
            s.0 += tails.len();
            s.1 += 1;
        }
        for (p, heads) in index.patterns(Side::Head) {
            let s = &mut sums[p.relation as usize];
            s.2 += heads.len();
            s.3 += 1;
        }
        let per_relation = sums
            .into_iter()
            .map(|(tails, heads_seen, heads, tails_seen)| {
                if heads_seen == 0 {
                    (1.0, 1.0)
                } else {
                    (
                        tails as f64 / heads_seen as f64,
                        heads as f64 / tails_seen as f64,
                    )
                }
            })
            .collect();
        BernoulliStats { per_relation }
    }

    /// Probability of replacing the head, `tph / (tph + hpt)`.
    pub fn head_probability(&self, relation: u32) -> f64 {
        let (tph, hpt) = self.per_relation[relation as usize];
        tph / (tph + hpt)
    }
}

/// Corruptions of one positive, all on the same side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegSampleBatch {
    pub positive: Triple,
    pub side: Side,
    pub entities: Vec<EntityId>,
    /// Draws accepted by the rejection fallback (may reproduce known facts).
    pub fallbacks: usize,
}

impl NegSampleBatch {
    pub fn pattern(&self) -> Pattern {
        Pattern::of(&self.positive, self.side)
    }

    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        let p = self.pattern();
        self.entities.iter().map(move |&e| p.complete(e))
    }
}

/// Draws corruptions for training positives.
#[derive(Debug, Clone)]
pub struct NegativeSampler<'a> {
    config: SamplerConfig,
    num_entities: u32,
    train: &'a PatternIndex,
    known: Option<&'a FilterIndex>,
    bernoulli: Option<BernoulliStats>,
}

impl<'a> NegativeSampler<'a> {
    /// `known` must cover train ∪ valid ∪ test when the leakage filter is on;
    /// `bernoulli` is required for the Bernoulli strategy.
    pub fn new(
        config: SamplerConfig,
        num_entities: usize,
        train: &'a PatternIndex,
        known: Option<&'a FilterIndex>,
        bernoulli: Option<BernoulliStats>,
    ) -> Result<Self> {
        config.validate()?;
        if num_entities == 0 {
            return Err(Error::Empty("entity vocabulary"));
        }
        if config.leakage_filter && known.is_none() {
            return Err(Error::config("leakage filter needs the index of all known facts"));
        }
        if config.strategy == Strategy::Bernoulli {
            let stats = bernoulli
                .as_ref()
                .ok_or_else(|| Error::config("bernoulli strategy needs relation statistics"))?;
            if stats
                .per_relation
                .iter()
                .any(|&(tph, hpt)| !(tph > 0.0 && hpt > 0.0))
            {
                return Err(Error::config("tph and hpt must be positive for every relation"));
            }
        }
        Ok(NegativeSampler {
            config,
            num_entities: num_entities as u32,
            train,
            known,
            bernoulli,
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    /// Same sampler with a different strategy (warm-up uses uniform).
    pub fn with_strategy(&self, strategy: Strategy) -> Result<Self> {
        let mut next = self.clone();
        next.config.strategy = strategy;
        if strategy == Strategy::Bernoulli && next.bernoulli.is_none() {
            return Err(Error::config("bernoulli strategy needs relation statistics"));
        }
        Ok(next)
    }

    pub fn choose_side<R: Rng + ?Sized>(&self, positive: &Triple, rng: &mut R) -> Side {
        let head_p = match (&self.config.strategy, &self.bernoulli) {
            (Strategy::Bernoulli, Some(stats)) => stats.head_probability(positive.relation),
            _ => 0.5,
        };
        if rng.random_bool(head_p) {
            Side::Head
        } else {
            Side::Tail
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, positive: &Triple, rng: &mut R) -> NegSampleBatch {
        let side = self.choose_side(positive, rng);
        self.sample_side(positive, side, rng)
    }

    /// Uniform draws with rejection of known facts; after `100·M` rejections the
    /// remaining slots accept any entity and count as fallbacks.
    pub fn sample_side<R: Rng + ?Sized>(&self, positive: &Triple, side: Side, rng: &mut R) -> NegSampleBatch {
        let m = self.config.negatives;
        let pattern = Pattern::of(positive, side);
        let budget = 100 * m;
        let mut rejections = 0usize;
        let mut fallbacks = 0usize;
        let mut entities = Vec::with_capacity(m);
        while entities.len() < m {
            let e = rng.random_range(0..self.num_entities);
            if rejections >= budget {
                fallbacks += 1;
                entities.push(e);
                continue;
            }
            let in_train = !self.config.allow_train_collisions && self.train.contains(&pattern, e);
            let leaked = self.config.leakage_filter
                && self.known.is_some_and(|k| k.contains(&pattern, e));
            if in_train || leaked {
                rejections += 1;
            } else {
                entities.push(e);
            }
        }
        if fallbacks > 0 {
            log::debug!("pattern {pattern:?}: {fallbacks} corruptions accepted without rejection");
        }
        NegSampleBatch {
            positive: *positive,
            side,
            entities,
            fallbacks,
        }
    }
}

/// Softmax of `temperature · scores`, computed with max subtraction.
///
/// The result is treated as constant by the losses.
pub fn self_adv_weights<F: Scalar>(scores: &[F], temperature: F) -> Vec<F> {
    if scores.is_empty() {
        return Vec::new();
    }
    let max = scores
        .iter()
        .fold(F::neg_infinity(), |m, &s| m.max(temperature * s));
    let exps: Vec<F> = scores
        .iter()
        .map(|&s| (temperature * s - max).exp())
        .collect();
    let total = exps.iter().fold(F::zero(), |acc, &x| acc + x);
    exps.into_iter().map(|x| x / total).collect()
}
