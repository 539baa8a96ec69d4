use demix_kge::demix::{mix_with_lambda, refine_batch, CapPool, DemixConfig, StatsCache};
use demix_kge::evaluator::evaluate;
use demix_kge::kg_store::{Dataset, FilterIndex, PatternIndex, Triple, Vocab};
use demix_kge::rng::{stream, Stream};
use demix_kge::sampler::{self_adv_weights, NegativeSampler, SamplerConfig, Strategy};
use demix_kge::scoring::{write_checkpoint, GradSink, ModelConfig, ModelKind};
use demix_kge::synthetic::{generate, SyntheticConfig};
use demix_kge::trainer::{accumulate_example, train, LossKind, Negatives, TrainConfig};
use demix_kge::{Mixed64, Model64};

fn small_kg(seed: u64) -> Dataset {
    generate(&SyntheticConfig {
        entities: 50,
        relations: 4,
        fanout: 4,
        participation: 0.6,
        seed,
        ..SyntheticConfig::default()
    })
    .unwrap()
    .dataset
}

fn config(kind: ModelKind, epochs: usize, seed: u64) -> TrainConfig {
    let mut c = TrainConfig::new(ModelConfig::new(kind, 16, 6.0));
    c.epochs = epochs;
    c.batch_size = 64;
    c.learning_rate = 0.01;
    c.seed = seed;
    c.eval_every = 0;
    c
}

fn checkpoint_bytes(model: &demix_kge::Model) -> Vec<u8> {
    let mut buf = Vec::new();
    write_checkpoint(model, 0, &mut buf).unwrap();
    buf
}

#[test]
fn warmup_only_run_equals_self_adversarial_baseline() {
    let data = small_kg(1);
    let demix = DemixConfig {
        warmup_epochs: 4,
        ..DemixConfig::default()
    };
    let cfg = config(ModelKind::TransE, 4, 1);
    let a = train::<f32>(
        &data,
        &cfg,
        &demix,
        &SamplerConfig {
            strategy: Strategy::Demix,
            ..SamplerConfig::default()
        },
        &mut (),
    )
    .unwrap();
    let b = train::<f32>(
        &data,
        &cfg,
        &demix,
        &SamplerConfig {
            strategy: Strategy::SelfAdversarial,
            ..SamplerConfig::default()
        },
        &mut (),
    )
    .unwrap();
    assert!(a.log.iter().all(|r| !r.refined));
    assert_eq!(checkpoint_bytes(&a.model), checkpoint_bytes(&b.model));
}

#[test]
fn replay_is_bytewise_identical() {
    let data = small_kg(2);
    let demix = DemixConfig {
        warmup_epochs: 2,
        ..DemixConfig::default()
    };
    let sampler = SamplerConfig::default();
    let cfg = config(ModelKind::RotatE, 5, 7);
    let a = train::<f32>(&data, &cfg, &demix, &sampler, &mut ()).unwrap();
    let b = train::<f32>(&data, &cfg, &demix, &sampler, &mut ()).unwrap();
    assert!(a.log.iter().any(|r| r.refined));
    assert_eq!(checkpoint_bytes(&a.model), checkpoint_bytes(&b.model));
    let c = train::<f32>(&data, &config(ModelKind::RotatE, 5, 8), &demix, &sampler, &mut ()).unwrap();
    assert_ne!(checkpoint_bytes(&a.model), checkpoint_bytes(&c.model));
}

#[test]
fn loss_finite_and_trending_down() {
    let data = small_kg(3);
    let demix = DemixConfig {
        warmup_epochs: 8,
        ..DemixConfig::default()
    };
    let out = train::<f32>(&data, &config(ModelKind::TransE, 40, 3), &demix, &SamplerConfig::default(), &mut ()).unwrap();
    let losses: Vec<f64> = out.log.iter().map(|r| r.loss).collect();
    assert!(losses.iter().all(|l| l.is_finite()));
    let median = |w: &[f64]| {
        let mut w = w.to_vec();
        w.sort_by(f64::total_cmp);
        w[w.len() / 2]
    };
    // within each phase, windowed medians do not rise
    for phase in [&losses[..8], &losses[8..]] {
        let medians: Vec<f64> = phase.chunks(5).filter(|c| c.len() == 5).map(median).collect();
        for w in medians.windows(2) {
            assert!(w[1] <= w[0] * 1.02, "medians {medians:?}");
        }
    }
}

#[test]
fn validation_mrr_improves_after_warmup() {
    let mut better = 0;
    for seed in 0..5 {
        let data = small_kg(10 + seed);
        let filter = FilterIndex::from_dataset(&data);
        let demix = DemixConfig {
            warmup_epochs: 8,
            ..DemixConfig::default()
        };
        let mut at_warmup = None;
        struct Grab<'a>(&'a mut Option<demix_kge::Model>);
        impl demix_kge::trainer::TrainObserver<f32> for Grab<'_> {
            fn on_epoch_end(&mut self, r: &demix_kge::trainer::EpochRecord, m: &demix_kge::Model) -> demix_kge::Result<()> {
                if r.epoch == 8 {
                    *self.0 = Some(m.clone());
                }
                Ok(())
            }
        }
        let out = train::<f32>(
            &data,
            &config(ModelKind::TransE, 50, seed),
            &demix,
            &SamplerConfig::default(),
            &mut Grab(&mut at_warmup),
        )
        .unwrap();
        let valid = data.valid.as_slice();
        let early = evaluate(at_warmup.as_ref().unwrap(), valid, &filter).unwrap().report.mrr;
        let late = evaluate(&out.model, valid, &filter).unwrap().report.mrr;
        better += usize::from(late > early);
    }
    assert!(better >= 3, "improved in {better}/5 seeds");
}

#[test]
fn bernoulli_and_uniform_strategies_train() {
    let data = small_kg(4);
    let demix = DemixConfig {
        warmup_epochs: 0,
        ..DemixConfig::default()
    };
    for strategy in [Strategy::Uniform, Strategy::Bernoulli] {
        let sampler = SamplerConfig {
            strategy,
            ..SamplerConfig::default()
        };
        let out = train::<f32>(&data, &config(ModelKind::DistMult, 3, 0), &demix, &sampler, &mut ()).unwrap();
        assert_eq!(out.log.len(), 3);
        assert!(out.model.is_finite());
    }
}

#[test]
fn invalid_configs_rejected() {
    let data = small_kg(5);
    let demix = DemixConfig::default();
    assert!(train::<f32>(&data, &config(ModelKind::TransE, 3, 0), &demix, &SamplerConfig::default(), &mut ()).is_err());
    let mut cfg = config(ModelKind::TransE, 10, 0);
    cfg.learning_rate = 0.0;
    assert!(train::<f32>(&data, &cfg, &demix, &SamplerConfig::default(), &mut ()).is_err());
    let empty = Dataset {
        vocab: Vocab::from_names(vec!["a".into()], vec!["r".into()]).unwrap(),
        ..Dataset::default()
    };
    assert!(train::<f32>(&empty, &config(ModelKind::TransE, 10, 0), &demix, &SamplerConfig::default(), &mut ()).is_err());
}

fn oracle_bce(s: f64, y: f64) -> f64 {
    let p = 1.0 / (1.0 + (-s).exp());
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Loss for one positive with its mixed negatives, recomputing the mixed
/// vectors from the (possibly perturbed) model with the frozen draws and
/// holding the negative weights fixed.
fn mixed_loss(model: &Model64, positive: &Triple, frozen: &[Mixed64], weights: &[f64]) -> f64 {
    let mut total = oracle_bce(model.score(positive), 1.0);
    for (m, w) in frozen.iter().zip(weights) {
        let v = mix_with_lambda(model.entity(m.source), 0.0, model.entity(m.partner), 0.0, m.lambda).unwrap();
        total += w * oracle_bce(model.score_with(&m.pattern, &v.vector), m.label);
    }
    total
}

#[test]
fn mixed_gradients_route_through_both_entities() {
    let data = small_kg(6);
    let index = PatternIndex::build(data.train.as_slice());
    for kind in ModelKind::ALL {
        let model = Model64::init(ModelConfig::new(kind, 8, 3.0), data.num_entities(), data.num_relations(), 4).unwrap();
        let pool = CapPool::build(&model, &index);
        let sampler = NegativeSampler::new(SamplerConfig::default(), data.num_entities(), &index, None, None).unwrap();
        let cfg = DemixConfig {
            mu: 1,
            delta: 1.0,
            ..DemixConfig::default()
        };
        let mut rng = stream(11, Stream::Demix);
        for positive in data.train.as_slice().iter().take(4) {
            let batch = sampler.sample(positive, &mut rng);
            let mixed = refine_batch(&batch, &model, &index, &pool, &mut StatsCache::new(), 4, &cfg, &mut rng).unwrap();
            for loss in [LossKind::Uniform, LossKind::SelfAdversarial] {
                let mut sink = GradSink::new(model.dim(), model.relation_dim());
                accumulate_example(&model, positive, Negatives::Mixed(&mixed), loss, 1.0, 1.0, &mut sink).unwrap();
                let scores: Vec<f64> = mixed.iter().map(|m| model.score_with(&m.pattern, &m.vector)).collect();
                let weights = match loss {
                    LossKind::Uniform => vec![1.0; mixed.len()],
                    LossKind::SelfAdversarial => self_adv_weights(&scores, 1.0),
                };
                let m = &mixed[0];
                for e in [m.source, m.partner, positive.head, positive.tail] {
                    let g = sink.entity(e).map(<[f64]>::to_vec).unwrap_or(vec![0.0; 8]);
                    for i in 0..8 {
                        let mut plus = model.clone();
                        plus.entity_mut(e)[i] += 1e-4;
                        let mut minus = model.clone();
                        minus.entity_mut(e)[i] -= 1e-4;
                        let fd = (mixed_loss(&plus, positive, &mixed, &weights) - mixed_loss(&minus, positive, &mixed, &weights)) / 2e-4;
                        let err = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1.0);
                        assert!(err < 1e-4, "{kind} {loss} entity {e}[{i}]: fd {fd} analytic {}", g[i]);
                    }
                }
            }
        }
    }
}

#[test]
fn f64_training_matches_f32_shape() {
    let data = small_kg(7);
    let demix = DemixConfig {
        warmup_epochs: 1,
        ..DemixConfig::default()
    };
    let out = train::<f64>(&data, &config(ModelKind::ComplEx, 2, 0), &demix, &SamplerConfig::default(), &mut ()).unwrap();
    assert_eq!(out.model.num_entities(), data.num_entities());
    assert!(out.log.iter().all(|r| r.loss.is_finite()));
}
