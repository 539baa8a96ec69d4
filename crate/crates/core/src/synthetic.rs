//! Latent-geometry knowledge graphs with held-out facts.
//!
//! Entities get Gaussian latent points and relations get Gaussian offsets;
//! `(h, r, t)` holds when `t` is among the `fanout` entities nearest to
//! `z_h + u_r`. A share of the facts is withheld from training so that the
//! sampler sees them as (false) negatives.

use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kg_store::{write_triples, Dataset, Triple, TripleSet, Vocab};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub entities: usize,
    pub relations: usize,
    pub latent_dim: usize,
    /// Tails per `(h, r)` pair that participates.
    pub fanout: usize,
    /// Probability that an `(h, r)` pair has any tails.
    pub participation: f64,
    /// Share of facts withheld, split evenly between valid and test.
    pub holdout: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            entities: 200,
            relations: 12,
            latent_dim: 8,
            fanout: 3,
            participation: 0.5,
            holdout: 0.2,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.entities < 2 || self.relations == 0 || self.latent_dim == 0 {
            return Err(Error::config("synthetic graph needs >= 2 entities, >= 1 relation, latent_dim >= 1"));
        }
        if self.fanout == 0 || self.fanout >= self.entities {
            return Err(Error::config("synthetic fanout must be in [1, entities)"));
        }
        if !(0.0..=1.0).contains(&self.participation) || !(0.0..1.0).contains(&self.holdout) {
            return Err(Error::config("participation must be in [0, 1] and holdout in [0, 1)"));
        }
        Ok(())
    }
}

/// Generated splits. `valid ∪ test` are the withheld facts.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticKg {
    pub dataset: Dataset,
    /// All generated facts before the split.
    pub all: TripleSet,
}

impl SyntheticKg {
    pub fn held_out(&self) -> Vec<Triple> {
        let mut out = self.dataset.valid.as_slice().to_vec();
        out.extend_from_slice(self.dataset.test.as_slice());
        out
    }

    /// Writes `train.txt`, `valid.txt`, `test.txt`, `entities.dict`, `relations.dict`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let d = &self.dataset;
        write_triples(&dir.join("train.txt"), &d.train, &d.vocab)?;
        write_triples(&dir.join("valid.txt"), &d.valid, &d.vocab)?;
        write_triples(&dir.join("test.txt"), &d.test, &d.vocab)?;
        d.vocab
            .write_dicts(&dir.join("entities.dict"), &dir.join("relations.dict"))
    }
}

pub fn generate(config: &SyntheticConfig) -> Result<SyntheticKg> {
    config.validate()?;
    let mut rng = rng::stream(config.seed, Stream::Synthetic);
    let k = config.latent_dim;
    let mut gauss = |n: usize| -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(&mut rng)).collect() };
    let points = gauss(config.entities * k);
    let offsets = gauss(config.relations * k);

    let mut facts = Vec::new();
    let mut dist: Vec<(f64, u32)> = Vec::with_capacity(config.entities);
    for h in 0..config.entities {
        for r in 0..config.relations {
            if !rng.random_bool(config.participation) {
                continue;
            }
            let target: Vec<f64> = (0..k).map(|i| points[h * k + i] + offsets[r * k + i]).collect();
            dist.clear();
            dist.extend((0..config.entities).filter(|&t| t != h).map(|t| {
                let d2: f64 = (0..k).map(|i| (points[t * k + i] - target[i]).powi(2)).sum();
                (d2, t as u32)
            }));
            dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            facts.extend(
                dist.iter()
                    .take(config.fanout)
                    .map(|&(_, t)| Triple::new(h as u32, r as u32, t)),
            );
        }
    }
    if facts.is_empty() {
        return Err(Error::Empty("synthetic fact list"));
    }

    // Withhold a random subset, keeping every entity and relation in training.
    let n_hold = (facts.len() as f64 * config.holdout).round() as usize;
    let mut order = sample_indices(&mut rng, facts.len(), facts.len()).into_vec();
    let mut entity_uses = vec![0usize; config.entities];
    let mut relation_uses = vec![0usize; config.relations];
    for t in &facts {
        entity_uses[t.head as usize] += 1;
        entity_uses[t.tail as usize] += 1;
        relation_uses[t.relation as usize] += 1;
    }
    let mut held = Vec::with_capacity(n_hold);
    let mut keep = vec![true; facts.len()];
    for i in order.drain(..) {
        if held.len() == n_hold {
            break;
        }
        let t = facts[i];
        if entity_uses[t.head as usize] > 1 && entity_uses[t.tail as usize] > 1 && relation_uses[t.relation as usize] > 1 {
            entity_uses[t.head as usize] -= 1;
            entity_uses[t.tail as usize] -= 1;
            relation_uses[t.relation as usize] -= 1;
            keep[i] = false;
            held.push(t);
        }
    }
    let train: Vec<Triple> = facts.iter().zip(&keep).filter(|(_, &k)| k).map(|(t, _)| *t).collect();
    let split_at = held.len() / 2;
    let test = held.split_off(split_at);

    let vocab = Vocab::from_names(
        (0..config.entities).map(|e| format!("e{e}")).collect(),
        (0..config.relations).map(|r| format!("r{r}")).collect(),
    )?;
    Ok(SyntheticKg {
        dataset: Dataset {
            vocab,
            train: TripleSet::new(train)?,
            valid: TripleSet::new(held)?,
            test: TripleSet::new(test)?,
        },
        all: TripleSet::new(facts)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn splits_partition_the_facts_and_cover_vocab() {
        let kg = generate(&SyntheticConfig::default()).unwrap();
        let d = &kg.dataset;
        let total = d.train.len() + d.valid.len() + d.test.len();
        assert_eq!(total, kg.all.len());
        let held = d.valid.len() + d.test.len();
        assert!((held as f64 / total as f64 - 0.2).abs() < 0.01);
        let train: HashSet<_> = d.train.iter().copied().collect();
        assert!(kg.held_out().iter().all(|t| !train.contains(t)));
        let mut seen_e = vec![false; d.num_entities()];
        let mut seen_r = vec![false; d.num_relations()];
        for t in d.train.iter() {
            seen_e[t.head as usize] = true;
            seen_e[t.tail as usize] = true;
            seen_r[t.relation as usize] = true;
        }
        assert!(seen_e.iter().all(|&s| s) && seen_r.iter().all(|&s| s));
    }

    #[test]
    fn seeded_generation_is_deterministic() {
        let cfg = SyntheticConfig {
            entities: 30,
            relations: 3,
            ..SyntheticConfig::default()
        };
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = generate(&SyntheticConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(generate(&cfg).unwrap().all, other.all);
    }

    #[test]
    fn written_files_reload() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SyntheticConfig {
            entities: 20,
            relations: 2,
            ..SyntheticConfig::default()
        };
        let kg = generate(&cfg).unwrap();
        kg.write(dir.path()).unwrap();
        let paths = crate::kg_store::DatasetPaths {
            train: dir.path().join("train.txt"),
            valid: Some(dir.path().join("valid.txt")),
            test: Some(dir.path().join("test.txt")),
            entities_dict: Some(dir.path().join("entities.dict")),
            relations_dict: Some(dir.path().join("relations.dict")),
        };
        let loaded = Dataset::load(&paths, Default::default()).unwrap();
        assert_eq!(loaded, kg.dataset);
    }
}
