use rand::Rng as _;

use super::grad::GradSink;
use super::kernels::{CandidateQuery, ModelKind, Norm, ScoreFn, SlotGrads};
use crate::error::{Error, Result};
use crate::kg_store::{EntityId, Pattern, RelationId, Side, Triple};
use crate::rng;
use crate::scalar::Scalar;

/// Architecture hyper-parameters of an embedding model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Entity row width (real values).
    pub dim: usize,
    /// γ; only distance-based kinds read it.
    pub margin: f64,
    pub norm: Norm,
}

impl ModelConfig {
    pub fn new(kind: ModelKind, dim: usize, margin: f64) -> Self {
        ModelConfig {
            kind,
            dim,
            margin,
            norm: kind.default_norm(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::config("model.dim must be positive"));
        }
        if self.kind.needs_even_dim() && !self.dim.is_multiple_of(2) {
            return Err(Error::config(format!(
                "{} needs an even model.dim, got {}",
                self.kind, self.dim
            )));
        }
        if !self.margin.is_finite() {
            return Err(Error::config("model.margin must be finite"));
        }
        Ok(())
    }

    pub fn relation_dim(&self) -> usize {
        self.kind.relation_dim(self.dim)
    }

    /// Half-width of the uniform initialization range for table entries.
    pub fn init_bound(&self) -> f64 {
        if self.kind.is_distance_based() {
            (self.margin + 2.0) / self.dim as f64
        } else {
            1.0 / (self.dim as f64).sqrt()
        }
    }
}

/// Entity and relation tables plus the score function that reads them.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel<F> {
    config: ModelConfig,
    score_fn: ScoreFn<F>,
    num_entities: usize,
    num_relations: usize,
    entities: Vec<F>,
    relations: Vec<F>,
}

impl<F: Scalar> EmbeddingModel<F> {
    /// Uniform initialization, deterministic in `seed`.
    pub fn init(config: ModelConfig, num_entities: usize, num_relations: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::stream(seed, rng::Stream::Init);
        let bound = config.init_bound();
        let entities = (0..num_entities * config.dim)
            .map(|_| F::of(rng.random_range(-bound..=bound)))
            .collect();
        let rel_bound = if config.kind == ModelKind::RotatE {
            std::f64::consts::PI
        } else {
            bound
        };
        let relations = (0..num_relations * config.relation_dim())
            .map(|_| F::of(rng.random_range(-rel_bound..=rel_bound)))
            .collect();
        Self::from_tables(config, num_entities, num_relations, entities, relations)
    }

    /// Wraps existing row-major tables.
    pub fn from_tables(
        config: ModelConfig,
        num_entities: usize,
        num_relations: usize,
        entities: Vec<F>,
        relations: Vec<F>,
    ) -> Result<Self> {
        config.validate()?;
        if entities.len() != num_entities * config.dim {
            return Err(Error::Dimension {
                expected: num_entities * config.dim,
                actual: entities.len(),
            });
        }
        if relations.len() != num_relations * config.relation_dim() {
            return Err(Error::Dimension {
                expected: num_relations * config.relation_dim(),
                actual: relations.len(),
            });
        }
        let model = EmbeddingModel {
            config,
            score_fn: ScoreFn {
                kind: config.kind,
                margin: F::of(config.margin),
                norm: config.norm,
            },
            num_entities,
            num_relations,
            entities,
            relations,
        };
        if !model.is_finite() {
            return Err(Error::Numeric("non-finite parameter in model tables".into()));
        }
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn kind(&self) -> ModelKind {
        self.config.kind
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn relation_dim(&self) -> usize {
        self.config.relation_dim()
    }

    pub fn num_entities(&self) -> usize {
        self.num_entities
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    pub fn score_fn(&self) -> ScoreFn<F> {
        self.score_fn
    }

    pub fn entity(&self, id: EntityId) -> &[F] {
        let d = self.config.dim;
        &self.entities[id as usize * d..(id as usize + 1) * d]
    }

    pub fn relation(&self, id: RelationId) -> &[F] {
        let d = self.relation_dim();
        &self.relations[id as usize * d..(id as usize + 1) * d]
    }

    pub fn entity_mut(&mut self, id: EntityId) -> &mut [F] {
        let d = self.config.dim;
        &mut self.entities[id as usize * d..(id as usize + 1) * d]
    }

    pub fn relation_mut(&mut self, id: RelationId) -> &mut [F] {
        let d = self.relation_dim();
        &mut self.relations[id as usize * d..(id as usize + 1) * d]
    }

    pub fn entity_table(&self) -> &[F] {
        &self.entities
    }

    pub fn relation_table(&self) -> &[F] {
        &self.relations
    }

    pub fn is_finite(&self) -> bool {
        self.entities.iter().chain(&self.relations).all(|x| x.is_finite())
    }

    pub fn check_triple(&self, t: &Triple) -> Result<()> {
        if t.head as usize >= self.num_entities
            || t.tail as usize >= self.num_entities
            || t.relation as usize >= self.num_relations
        {
            return Err(Error::Vocabulary(format!(
                "triple {t} outside model with {} entities and {} relations",
                self.num_entities, self.num_relations
            )));
        }
        Ok(())
    }

    /// Plausibility of a triple; higher is more plausible. Panics on ids out of range.
    pub fn score(&self, t: &Triple) -> F {
        self.score_fn
            .score(self.entity(t.head), self.relation(t.relation), self.entity(t.tail))
    }

    /// Score with an external vector occupying the open slot of `pattern`.
    pub fn score_with(&self, pattern: &Pattern, vector: &[F]) -> F {
        let anchor = self.entity(pattern.anchor);
        let rel = self.relation(pattern.relation);
        match pattern.side {
            Side::Head => self.score_fn.score(vector, rel, anchor),
            Side::Tail => self.score_fn.score(anchor, rel, vector),
        }
    }

    /// Score plus `upstream * ∂f` accumulated into `sink` for all three rows.
    pub fn score_and_grad(&self, t: &Triple, upstream: F, sink: &mut GradSink<F>) -> Result<F> {
        check_upstream(upstream)?;
        if upstream.is_zero() {
            return Ok(self.score(t));
        }
        let (d, dr) = (self.dim(), self.relation_dim());
        let mut gh = vec![F::zero(); d];
        let mut gr = vec![F::zero(); dr];
        let mut gt = vec![F::zero(); d];
        let f = self.score_fn.score_and_grad(
            self.entity(t.head),
            self.relation(t.relation),
            self.entity(t.tail),
            upstream,
            SlotGrads {
                head: &mut gh,
                relation: &mut gr,
                tail: &mut gt,
            },
        );
        sink.add_entity(t.head, &gh, F::one());
        sink.add_relation(t.relation, &gr, F::one());
        sink.add_entity(t.tail, &gt, F::one());
        Ok(f)
    }

    /// Like [`score_and_grad`](Self::score_and_grad) with an external vector in
    /// the open slot; its gradient is added into `vector_grad` instead of the sink.
    pub fn score_and_grad_with(
        &self,
        pattern: &Pattern,
        vector: &[F],
        upstream: F,
        sink: &mut GradSink<F>,
        vector_grad: &mut [F],
    ) -> Result<F> {
        check_upstream(upstream)?;
        if vector.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                actual: vector.len(),
            });
        }
        if vector_grad.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                actual: vector_grad.len(),
            });
        }
        if upstream.is_zero() {
            return Ok(self.score_with(pattern, vector));
        }
        let mut ga = vec![F::zero(); self.dim()];
        let mut gr = vec![F::zero(); self.relation_dim()];
        let anchor = self.entity(pattern.anchor);
        let rel = self.relation(pattern.relation);
        let f = match pattern.side {
            Side::Head => self.score_fn.score_and_grad(
                vector,
                rel,
                anchor,
                upstream,
                SlotGrads {
                    head: vector_grad,
                    relation: &mut gr,
                    tail: &mut ga,
                },
            ),
            Side::Tail => self.score_fn.score_and_grad(
                anchor,
                rel,
                vector,
                upstream,
                SlotGrads {
                    head: &mut ga,
                    relation: &mut gr,
                    tail: vector_grad,
                },
            ),
        };
        sink.add_entity(pattern.anchor, &ga, F::one());
        sink.add_relation(pattern.relation, &gr, F::one());
        Ok(f)
    }

    /// Scores every entity placed in the open slot of `pattern`.
    pub fn candidate_scores(&self, pattern: &Pattern, out: &mut Vec<F>) {
        let query = CandidateQuery::new(
            self.score_fn,
            self.entity(pattern.anchor),
            self.relation(pattern.relation),
            pattern.side == Side::Head,
        );
        out.clear();
        out.extend(self.entities.chunks_exact(self.dim()).map(|row| query.score(row)));
    }
}

fn check_upstream<F: Scalar>(upstream: F) -> Result<()> {
    if upstream.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric(format!("non-finite upstream gradient {upstream}")))
    }
}
