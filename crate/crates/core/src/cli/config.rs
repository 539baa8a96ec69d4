//! Flat `section.key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Unknown keys are errors.
//! Paths are used as written, relative to the working directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::demix::DemixConfig;
use crate::error::{Error, Result};
use crate::kg_store::{DatasetPaths, DuplicatePolicy, Split};
use crate::sampler::{SamplerConfig, Strategy};
use crate::scoring::{ModelConfig, ModelKind, Norm};
use crate::trainer::{LossChoice, TrainConfig};

/// Fully resolved configuration; every default has been filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: DatasetPaths,
    pub duplicates: DuplicatePolicy,
    pub train: TrainConfig,
    pub sampler: SamplerConfig,
    pub demix: DemixConfig,
    pub checkpoint_every: usize,
    pub output_dir: PathBuf,
    pub seed: u64,
}

const KEYS: &[&str] = &[
    "seed",
    "output.dir",
    "data.train",
    "data.valid",
    "data.test",
    "data.entities_dict",
    "data.relations_dict",
    "data.duplicates",
    "model.kind",
    "model.dim",
    "model.margin",
    "model.norm",
    "sampler.strategy",
    "sampler.negatives",
    "sampler.leakage_filter",
    "sampler.allow_train_collisions",
    "sampler.temperature",
    "demix.delta",
    "demix.beta",
    "demix.t0",
    "demix.mu",
    "demix.alpha",
    "demix.warmup_epochs",
    "trainer.epochs",
    "trainer.batch_size",
    "trainer.learning_rate",
    "trainer.loss",
    "trainer.l3_regularization",
    "trainer.checkpoint_every",
    "trainer.eval_every",
    "trainer.eval_split",
];

/// Raw key/value pairs before defaults are applied.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawConfig(BTreeMap<String, String>);

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = RawConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key = value, got {line:?}", i + 1)))?;
            raw.set(key.trim(), value.trim())?;
        }
        Ok(raw)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(Error::config(format!("unknown config key {key:?}")));
        }
        self.0.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| Error::config(format!("override {spec:?} is not key=value")))?;
        self.set(key.trim(), value.trim())
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.0
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| Error::config(format!("{key} = {v:?}: {e}")))
            })
            .transpose()
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.0.get(key).filter(|v| !v.is_empty()).map(PathBuf::from)
    }

    /// Fills in defaults and validates every section.
    pub fn resolve(&self) -> Result<RunConfig> {
        let seed = self.get("seed")?.unwrap_or(0u64);
        let kind: ModelKind = self.get("model.kind")?.unwrap_or(ModelKind::TransE);
        let mut model = ModelConfig::new(
            kind,
            self.get("model.dim")?.unwrap_or(200),
            self.get("model.margin")?.unwrap_or(9.0),
        );
        if let Some(norm) = self.get::<Norm>("model.norm")? {
            model.norm = norm;
        }

        let strategy: Strategy = self.get("sampler.strategy")?.unwrap_or(Strategy::Demix);
        let default_negatives = if kind.is_distance_based() { 16 } else { 50 };
        let sampler = SamplerConfig {
            strategy,
            negatives: self.get("sampler.negatives")?.unwrap_or(default_negatives),
            leakage_filter: self.get("sampler.leakage_filter")?.unwrap_or(false),
            allow_train_collisions: self.get("sampler.allow_train_collisions")?.unwrap_or(false),
            temperature: self.get("sampler.temperature")?.unwrap_or(1.0),
        };

        let defaults = DemixConfig::default();
        let warmup_epochs = self.get("demix.warmup_epochs")?.unwrap_or(defaults.warmup_epochs);
        let demix = DemixConfig {
            delta: self.get("demix.delta")?.unwrap_or(defaults.delta),
            beta: self.get("demix.beta")?.unwrap_or(defaults.beta),
            t0: self.get("demix.t0")?.unwrap_or(warmup_epochs.max(1) as f64),
            mu: self.get("demix.mu")?.unwrap_or(defaults.mu),
            alpha: self.get("demix.alpha")?.unwrap_or(defaults.alpha),
            warmup_epochs,
        };

        let mut train = TrainConfig::new(model);
        train.seed = seed;
        train.epochs = self.get("trainer.epochs")?.unwrap_or(train.epochs);
        train.batch_size = self.get("trainer.batch_size")?.unwrap_or(train.batch_size);
        train.learning_rate = self.get("trainer.learning_rate")?.unwrap_or(train.learning_rate);
        train.loss = self.get::<LossChoice>("trainer.loss")?.unwrap_or_default();
        train.l3_regularization = self.get("trainer.l3_regularization")?.unwrap_or(0.0);
        train.eval_every = self.get("trainer.eval_every")?.unwrap_or(train.eval_every);
        if let Some(split) = self.0.get("trainer.eval_split") {
            train.eval_split = Split::parse(split)
                .ok_or_else(|| Error::config(format!("trainer.eval_split = {split:?}: expected train|valid|test")))?;
        }

        let duplicates = match self.0.get("data.duplicates").map(String::as_str) {
            None | Some("reject") => DuplicatePolicy::Reject,
            Some("dedup") => DuplicatePolicy::Dedup,
            Some(other) => {
                return Err(Error::config(format!("data.duplicates = {other:?}: expected reject|dedup")))
            }
        };
        let data = DatasetPaths {
            train: self
                .path("data.train")
                .ok_or_else(|| Error::config("data.train is required"))?,
            valid: self.path("data.valid"),
            test: self.path("data.test"),
            entities_dict: self.path("data.entities_dict"),
            relations_dict: self.path("data.relations_dict"),
        };

        let config = RunConfig {
            data,
            duplicates,
            train,
            sampler,
            demix,
            checkpoint_every: self.get("trainer.checkpoint_every")?.unwrap_or(10),
            output_dir: self.path("output.dir").unwrap_or_else(|| PathBuf::from("out")),
            seed,
        };
        config.validate()?;
        Ok(config)
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        RawConfig::parse(text)?.resolve()
    }

    /// Section invariants only; see [`RunConfig::check_files`] for paths.
    pub fn validate(&self) -> Result<()> {
        self.train.validate(&self.demix)?;
        self.sampler.validate()?;
        self.demix.validate()
    }

    pub fn check_files(&self) -> Result<()> {
        let d = &self.data;
        let all = std::iter::once(&d.train).chain(
            [&d.valid, &d.test, &d.entities_dict, &d.relations_dict]
                .into_iter()
                .flatten(),
        );
        for p in all {
            if !p.is_file() {
                return Err(Error::config(format!("file not found: {}", p.display())));
            }
        }
        Ok(())
    }

    /// Text form with every key set; parses back to an identical config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        let opt = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        put("seed", self.seed.to_string());
        put("output.dir", self.output_dir.display().to_string());
        put("data.train", self.data.train.display().to_string());
        put("data.valid", opt(&self.data.valid));
        put("data.test", opt(&self.data.test));
        put("data.entities_dict", opt(&self.data.entities_dict));
        put("data.relations_dict", opt(&self.data.relations_dict));
        put(
            "data.duplicates",
            match self.duplicates {
                DuplicatePolicy::Reject => "reject",
                DuplicatePolicy::Dedup => "dedup",
            }
            .into(),
        );
        let m = &self.train.model;
        put("model.kind", m.kind.to_string());
        put("model.dim", m.dim.to_string());
        put("model.margin", m.margin.to_string());
        put("model.norm", m.norm.to_string());
        let s = &self.sampler;
        put("sampler.strategy", s.strategy.to_string());
        put("sampler.negatives", s.negatives.to_string());
        put("sampler.leakage_filter", s.leakage_filter.to_string());
        put("sampler.allow_train_collisions", s.allow_train_collisions.to_string());
        put("sampler.temperature", s.temperature.to_string());
        let x = &self.demix;
        put("demix.delta", x.delta.to_string());
        put("demix.beta", x.beta.to_string());
        put("demix.t0", x.t0.to_string());
        put("demix.mu", x.mu.to_string());
        put("demix.alpha", x.alpha.to_string());
        put("demix.warmup_epochs", x.warmup_epochs.to_string());
        let t = &self.train;
        put("trainer.epochs", t.epochs.to_string());
        put("trainer.batch_size", t.batch_size.to_string());
        put("trainer.learning_rate", t.learning_rate.to_string());
        put("trainer.loss", t.loss.to_string());
        put("trainer.l3_regularization", t.l3_regularization.to_string());
        put("trainer.checkpoint_every", self.checkpoint_every.to_string());
        put("trainer.eval_every", t.eval_every.to_string());
        put("trainer.eval_split", t.eval_split.name().into());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_depend_on_kind() {
        let c = RunConfig::parse("data.train = t.txt").unwrap();
        assert_eq!(c.sampler.negatives, 16);
        assert_eq!(c.train.model.norm, Norm::L1);
        assert_eq!(c.demix.t0, 8.0);
        assert_eq!((c.train.model.dim, c.train.model.margin, c.train.learning_rate), (200, 9.0, 1e-4));
        let c = RunConfig::parse("data.train = t.txt\nmodel.kind = distmult\ndemix.warmup_epochs = 5").unwrap();
        assert_eq!(c.sampler.negatives, 50);
        assert_eq!(c.demix.t0, 5.0);
    }

    #[test]
    fn overrides_and_errors() {
        let mut raw = RawConfig::parse("# run\ndata.train = a.txt  # inline\nmodel.dim = 8\n").unwrap();
        raw.apply_override("model.dim=16").unwrap();
        assert_eq!(raw.resolve().unwrap().train.model.dim, 16);
        assert!(raw.apply_override("model.width=3").is_err());
        assert!(raw.apply_override("model.dim").is_err());
        assert!(RawConfig::parse("model.dim = 8").unwrap().resolve().is_err());
        assert!(RunConfig::parse("data.train = a\nmodel.dim = x").is_err());
        assert!(RunConfig::parse("data.train = a\ntrainer.epochs = 3").is_err());
        assert!(RunConfig::parse("data.train = a\nmodel.kind = rotate\nmodel.dim = 7").is_err());
    }

    #[test]
    fn snapshot_round_trips() {
        let text = "data.train = d/train.txt\ndata.test = d/test.txt\nmodel.kind = complex\nmodel.dim = 10\n\
                    sampler.strategy = bernoulli\ndemix.delta = 0.25\ntrainer.loss = uniform\ntrainer.learning_rate = 0.003\nseed = 7";
        let c = RunConfig::parse(text).unwrap();
        let again = RunConfig::parse(&c.to_text()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.to_text(), again.to_text());
    }
}
