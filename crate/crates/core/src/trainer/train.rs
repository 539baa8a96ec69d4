//! The training loop: warm-up with plain negatives, then refinement with mixup.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;

use crate::demix::{refine_batch, CapPool, DemixConfig, MixedTriple, StatsCache};
use crate::error::{Error, Result};
use crate::evaluator::{evaluate, MetricsReport};
use crate::kg_store::{Dataset, FilterIndex, PatternIndex, Split, Triple};
use crate::rng::{self, Stream};
use crate::sampler::{BernoulliStats, NegSampleBatch, NegativeSampler, SamplerConfig, Strategy};
use crate::scalar::Scalar;
use crate::scoring::{EmbeddingModel, GradSink, ModelConfig};

use super::adam::{AdamConfig, AdamState};
use super::loss::{loss_terms, LossKind};

/// Loss weighting; `Auto` picks self-adversarial for the self-adversarial and
/// DeMix strategies and uniform otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossChoice {
    #[default]
    Auto,
    Fixed(LossKind),
}

impl LossChoice {
    pub fn resolve(self, strategy: Strategy) -> LossKind {
        match self {
            LossChoice::Fixed(kind) => kind,
            LossChoice::Auto => match strategy {
                Strategy::SelfAdversarial | Strategy::Demix => LossKind::SelfAdversarial,
                Strategy::Uniform | Strategy::Bernoulli => LossKind::Uniform,
            },
        }
    }
}

impl fmt::Display for LossChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossChoice::Auto => f.write_str("auto"),
            LossChoice::Fixed(kind) => kind.fmt(f),
        }
    }
}

impl FromStr for LossChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(LossChoice::Auto),
            other => other.parse().map(LossChoice::Fixed),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    /// E, total epochs including warm-up.
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub loss: LossChoice,
    /// Weight of the L3 penalty on positive-triple rows; 0 disables it.
    pub l3_regularization: f64,
    pub seed: u64,
    /// Evaluate every this many epochs (and after the last); 0 disables.
    pub eval_every: usize,
    pub eval_split: Split,
}

impl TrainConfig {
    pub fn new(model: ModelConfig) -> Self {
        TrainConfig {
            model,
            epochs: 100,
            batch_size: 512,
            learning_rate: 1e-4,
            loss: LossChoice::Auto,
            l3_regularization: 0.0,
            seed: 0,
            eval_every: 10,
            eval_split: Split::Valid,
        }
    }

    pub fn validate(&self, demix: &DemixConfig) -> Result<()> {
        self.model.validate()?;
        if demix.warmup_epochs > self.epochs {
            return Err(Error::config(format!(
                "warm-up epochs ({}) exceed total epochs ({})",
                demix.warmup_epochs, self.epochs
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::config("trainer.batch_size must be >= 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("trainer.learning_rate must be > 0"));
        }
        if !(self.l3_regularization >= 0.0 && self.l3_regularization.is_finite()) {
            return Err(Error::config("trainer.l3_regularization must be >= 0"));
        }
        Ok(())
    }
}

/// What happened in one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Whether negatives went through refinement this epoch.
    pub refined: bool,
    /// Mean per-positive loss.
    pub loss: f64,
    pub wall_clock_s: f64,
    pub fallbacks: usize,
    /// Share of corruptions classified MPN (0 outside refinement).
    pub mpn_fraction: f64,
    pub metrics: Option<(Split, MetricsReport)>,
}

/// Hooks called by [`train`]; errors abort training.
pub trait TrainObserver<F: Scalar> {
    fn on_start(&mut self, _model: &EmbeddingModel<F>) -> Result<()> {
        Ok(())
    }

    fn on_epoch_end(&mut self, _record: &EpochRecord, _model: &EmbeddingModel<F>) -> Result<()> {
        Ok(())
    }
}

impl<F: Scalar> TrainObserver<F> for () {}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput<F> {
    pub model: EmbeddingModel<F>,
    pub log: Vec<EpochRecord>,
    pub fallbacks: usize,
}

/// Corruptions of one positive, as consumed by the loss.
#[derive(Debug, Clone, Copy)]
pub enum Negatives<'a, F> {
    Plain(&'a NegSampleBatch),
    Mixed(&'a [MixedTriple<F>]),
}

/// Adds one positive's loss gradient (times `scale`) to `sink` and returns
/// the unscaled loss.
///
/// Mixed vectors receive their gradient once; it is then routed to the source
/// row with weight `λ′` and the partner row with weight `1 − λ′`.
pub fn accumulate_example<F: Scalar>(
    model: &EmbeddingModel<F>,
    positive: &Triple,
    negatives: Negatives<'_, F>,
    kind: LossKind,
    temperature: F,
    scale: F,
    sink: &mut GradSink<F>,
) -> Result<F> {
    let pos_score = model.score(positive);
    let (scores, labels): (Vec<F>, Vec<F>) = match negatives {
        Negatives::Plain(batch) => batch.triples().map(|t| (model.score(&t), F::zero())).unzip(),
        Negatives::Mixed(mixed) => mixed
            .iter()
            .map(|m| (model.score_with(&m.pattern, &m.vector), m.label))
            .unzip(),
    };
    let terms = loss_terms(kind, pos_score, &scores, &labels, temperature);
    if !terms.value.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite loss {} for positive ({}, {}, {})",
            terms.value, positive.head, positive.relation, positive.tail
        )));
    }
    model.score_and_grad(positive, terms.positive_grad * scale, sink)?;
    match negatives {
        Negatives::Plain(batch) => {
            for (t, &g) in batch.triples().zip(&terms.negative_grads) {
                model.score_and_grad(&t, g * scale, sink)?;
            }
        }
        Negatives::Mixed(mixed) => {
            let mut vector_grad = vec![F::zero(); model.dim()];
            for (m, &g) in mixed.iter().zip(&terms.negative_grads) {
                vector_grad.iter_mut().for_each(|x| *x = F::zero());
                model.score_and_grad_with(&m.pattern, &m.vector, g * scale, sink, &mut vector_grad)?;
                sink.add_entity(m.source, &vector_grad, m.lambda);
                sink.add_entity(m.partner, &vector_grad, F::one() - m.lambda);
            }
        }
    }
    Ok(terms.value)
}

/// `weight · (‖h‖₃³ + ‖r‖₃³ + ‖t‖₃³)`, gradient added to `sink` times `scale`.
pub fn l3_penalty<F: Scalar>(model: &EmbeddingModel<F>, triple: &Triple, weight: F, scale: F, sink: &mut GradSink<F>) -> F {
    let cube = |v: &[F]| v.iter().fold(F::zero(), |acc, &x| acc + (x * x * x).abs());
    let grad = |v: &[F]| -> Vec<F> { v.iter().map(|&x| F::of(3.0) * weight * x * x.abs()).collect() };
    let h = model.entity(triple.head);
    let r = model.relation(triple.relation);
    let t = model.entity(triple.tail);
    sink.add_entity(triple.head, &grad(h), scale);
    sink.add_relation(triple.relation, &grad(r), scale);
    sink.add_entity(triple.tail, &grad(t), scale);
    weight * (cube(h) + cube(r) + cube(t))
}

/// Trains from a fresh initialization.
pub fn train<F: Scalar>(
    data: &Dataset,
    config: &TrainConfig,
    demix: &DemixConfig,
    sampler: &SamplerConfig,
    observer: &mut dyn TrainObserver<F>,
) -> Result<TrainOutput<F>> {
    config.validate(demix)?;
    demix.validate()?;
    sampler.validate()?;
    if data.train.is_empty() {
        return Err(Error::Empty("training split"));
    }
    for split in [&data.train, &data.valid, &data.test] {
        split.check_bounds(data.num_entities(), data.num_relations())?;
    }

    let model = EmbeddingModel::init(config.model, data.num_entities(), data.num_relations(), config.seed)?;
    let index = PatternIndex::build(data.train.as_slice());
    let known = FilterIndex::from_dataset(data);
    let bernoulli = (sampler.strategy == Strategy::Bernoulli)
        .then(|| BernoulliStats::compute(data.train.as_slice(), data.num_relations()));
    let main_sampler = NegativeSampler::new(
        *sampler,
        data.num_entities(),
        &index,
        Some(&known),
        bernoulli,
    )?;
    let refining = sampler.strategy == Strategy::Demix;
    let warmup_sampler = if refining {
        main_sampler.with_strategy(Strategy::Uniform)?
    } else {
        main_sampler.clone()
    };
    let loss_kind = config.loss.resolve(sampler.strategy);
    let eval_triples = data.split(config.eval_split).as_slice();

    let adam = AdamState::new(&model, AdamConfig::new(config.learning_rate));
    let mut state = TrainState {
        model,
        adam,
        sink: GradSink::new(config.model.dim, config.model.relation_dim()),
        stats: StatsCache::new(),
        order: data.train.as_slice().to_vec(),
        shuffle_rng: rng::stream(config.seed, Stream::Shuffle),
        sampler_rng: rng::stream(config.seed, Stream::Sampler),
        demix_rng: rng::stream(config.seed, Stream::Demix),
    };

    observer.on_start(&state.model)?;
    let mut log = Vec::with_capacity(config.epochs);
    let mut total_fallbacks = 0;
    let started = Instant::now();
    for epoch in 1..=config.epochs {
        let refine = refining && epoch > demix.warmup_epochs;
        let phase = if refine {
            let pool = CapPool::build(&state.model, &index);
            Phase::Refine {
                pool,
                t: epoch - 1 - demix.warmup_epochs,
            }
        } else {
            Phase::Plain
        };
        let epoch_sampler = if refine { &main_sampler } else { &warmup_sampler };
        let summary = state.run_epoch(
            epoch_sampler,
            &phase,
            &index,
            config,
            demix,
            loss_kind,
            F::of(sampler.temperature),
        )?;
        total_fallbacks += summary.fallbacks;

        let evaluate_now = config.eval_every > 0
            && !eval_triples.is_empty()
            && (epoch.is_multiple_of(config.eval_every) || epoch == config.epochs);
        let metrics = if evaluate_now {
            Some((config.eval_split, evaluate(&state.model, eval_triples, &known)?.report))
        } else {
            None
        };
        let record = EpochRecord {
            epoch,
            refined: refine,
            loss: summary.loss,
            wall_clock_s: started.elapsed().as_secs_f64(),
            fallbacks: summary.fallbacks,
            mpn_fraction: summary.mpn_fraction,
            metrics,
        };
        log::info!(
            "epoch {epoch}{} loss {:.6}{}",
            if refine { " [demix]" } else { "" },
            record.loss,
            record
                .metrics
                .map(|(s, m)| format!(" {} mrr {:.4} hits@10 {:.4}", s.name(), m.mrr, m.hits10))
                .unwrap_or_default()
        );
        observer.on_epoch_end(&record, &state.model)?;
        log.push(record);
    }
    if total_fallbacks > 0 {
        log::warn!("{total_fallbacks} corruptions fell back to possibly-known facts");
    }
    Ok(TrainOutput {
        model: state.model,
        log,
        fallbacks: total_fallbacks,
    })
}

enum Phase {
    Plain,
    Refine { pool: CapPool, t: usize },
}

struct EpochSummary {
    loss: f64,
    fallbacks: usize,
    mpn_fraction: f64,
}

struct TrainState<F> {
    model: EmbeddingModel<F>,
    adam: AdamState<F>,
    sink: GradSink<F>,
    stats: StatsCache<F>,
    order: Vec<Triple>,
    shuffle_rng: rng::Rng,
    sampler_rng: rng::Rng,
    demix_rng: rng::Rng,
}

impl<F: Scalar> TrainState<F> {
    #[allow(clippy::too_many_arguments)]
    fn run_epoch(
        &mut self,
        sampler: &NegativeSampler<'_>,
        phase: &Phase,
        index: &PatternIndex,
        config: &TrainConfig,
        demix: &DemixConfig,
        loss_kind: LossKind,
        temperature: F,
    ) -> Result<EpochSummary> {
        self.order.shuffle(&mut self.shuffle_rng);
        let order = std::mem::take(&mut self.order);
        let mut loss_sum = 0.0;
        let mut fallbacks = 0;
        let (mut mpn, mut refined) = (0usize, 0usize);
        let l3 = F::of(config.l3_regularization);
        for batch in order.chunks(config.batch_size) {
            self.sink.clear();
            self.stats.clear();
            let scale = F::one() / F::of(batch.len() as f64);
            for positive in batch {
                let negs = sampler.sample(positive, &mut self.sampler_rng);
                fallbacks += negs.fallbacks;
                let value = match phase {
                    Phase::Plain => accumulate_example(
                        &self.model,
                        positive,
                        Negatives::Plain(&negs),
                        loss_kind,
                        temperature,
                        scale,
                        &mut self.sink,
                    )?,
                    Phase::Refine { pool, t } => {
                        let mixed = refine_batch(
                            &negs,
                            &self.model,
                            index,
                            pool,
                            &mut self.stats,
                            *t,
                            demix,
                            &mut self.demix_rng,
                        )?;
                        mpn += mixed.iter().filter(|m| m.from_mpn).count();
                        refined += mixed.len();
                        accumulate_example(
                            &self.model,
                            positive,
                            Negatives::Mixed(&mixed),
                            loss_kind,
                            temperature,
                            scale,
                            &mut self.sink,
                        )?
                    }
                };
                let reg = if l3 > F::zero() {
                    l3_penalty(&self.model, positive, l3, scale, &mut self.sink)
                } else {
                    F::zero()
                };
                loss_sum += (value + reg).as_f64();
            }
            self.adam.step(&mut self.model, &self.sink)?;
        }
        let n = order.len();
        self.order = order;
        Ok(EpochSummary {
            loss: loss_sum / n as f64,
            fallbacks,
            mpn_fraction: if refined == 0 { 0.0 } else { mpn as f64 / refined as f64 },
        })
    }
}
