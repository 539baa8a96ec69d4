use std::collections::HashMap;

use crate::kg_store::{EntityId, RelationId};
use crate::scalar::Scalar;

/// Sparse gradient accumulator over entity and relation rows.
///
/// Rows are created on first touch and only ever summed into; untouched rows
/// stay absent so the optimizer can skip them.
#[derive(Debug, Clone)]
pub struct GradSink<F> {
    entity_dim: usize,
    relation_dim: usize,
    entities: HashMap<EntityId, Vec<F>>,
    relations: HashMap<RelationId, Vec<F>>,
}

impl<F: Scalar> GradSink<F> {
    pub fn new(entity_dim: usize, relation_dim: usize) -> Self {
        GradSink {
            entity_dim,
            relation_dim,
            entities: HashMap::new(),
            relations: HashMap::new(),
        }
    }

    pub fn entity_row(&mut self, id: EntityId) -> &mut [F] {
        let dim = self.entity_dim;
        self.entities
            .entry(id)
            .or_insert_with(|| vec![F::zero(); dim])
    }

    pub fn relation_row(&mut self, id: RelationId) -> &mut [F] {
        let dim = self.relation_dim;
        self.relations
            .entry(id)
            .or_insert_with(|| vec![F::zero(); dim])
    }

    /// Adds `scale * grad` into an entity row.
    pub fn add_entity(&mut self, id: EntityId, grad: &[F], scale: F) {
        for (acc, &g) in self.entity_row(id).iter_mut().zip(grad) {
            *acc += scale * g;
        }
    }

    pub fn add_relation(&mut self, id: RelationId, grad: &[F], scale: F) {
        for (acc, &g) in self.relation_row(id).iter_mut().zip(grad) {
            *acc += scale * g;
        }
    }

    pub fn entity(&self, id: EntityId) -> Option<&[F]> {
        self.entities.get(&id).map(Vec::as_slice)
    }

    pub fn relation(&self, id: RelationId) -> Option<&[F]> {
        self.relations.get(&id).map(Vec::as_slice)
    }

    pub fn entities(&self) -> impl Iterator<Item = (EntityId, &[F])> {
        self.entities.iter().map(|(&k, v)| (k, v.as_slice()))
    }

    pub fn relations(&self) -> impl Iterator<Item = (RelationId, &[F])> {
        self.relations.iter().map(|(&k, v)| (k, v.as_slice()))
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty() && self.relations.is_empty()
    }

    pub fn clear(&mut self) {
        self.entities.clear();
        self.relations.clear();
    }

    /// Associative merge of another sink into this one.
    pub fn merge(&mut self, other: &GradSink<F>) {
        for (id, g) in other.entities() {
            self.add_entity(id, g, F::one());
        }
        for (id, g) in other.relations() {
            self.add_relation(id, g, F::one());
        }
    }

    pub fn entity_dim(&self) -> usize {
        self.entity_dim
    }

    pub fn relation_dim(&self) -> usize {
        self.relation_dim
    }
}
