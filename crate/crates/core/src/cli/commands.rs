use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::demix::delta_at_epoch;
use crate::error::Error;
use crate::evaluator::{estimation_accuracy, evaluate};
use crate::kg_store::{Dataset, FilterIndex, PatternIndex, Side, Split};
use crate::scoring::{load_checkpoint, CheckpointHeader, EmbeddingModel};
use crate::synthetic::{generate, SyntheticConfig};
use crate::trainer::{train, RunWriter, TrainObserver, METRICS_HEADER};

use super::config::{RawConfig, RunConfig};
use super::{CliError, CliResult};

fn invalid(e: Error) -> CliError {
    CliError::Validation(e)
}

fn runtime(e: Error) -> CliError {
    CliError::Runtime(e)
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(Error::io(path, e))
}

/// Reads the config, applies overrides, and checks referenced files.
pub fn load_config(path: &Path, overrides: &[String]) -> CliResult<RunConfig> {
    let mut raw = RawConfig::read(path).map_err(invalid)?;
    for o in overrides {
        raw.apply_override(o).map_err(invalid)?;
    }
    let config = raw.resolve().map_err(invalid)?;
    config.check_files().map_err(invalid)?;
    Ok(config)
}

fn load_dataset(config: &RunConfig) -> CliResult<Dataset> {
    Dataset::load(&config.data, config.duplicates).map_err(invalid)
}

fn load_model(path: &Path, data: Option<&Dataset>) -> CliResult<(EmbeddingModel<f32>, CheckpointHeader)> {
    if !path.is_file() {
        return Err(invalid(Error::config(format!("checkpoint not found: {}", path.display()))));
    }
    let (model, header) = load_checkpoint::<f32>(path).map_err(invalid)?;
    if let Some(d) = data {
        if header.num_entities != d.num_entities() || header.num_relations != d.num_relations() {
            return Err(invalid(Error::Vocabulary(format!(
                "checkpoint has {} entities / {} relations, dataset has {} / {}",
                header.num_entities,
                header.num_relations,
                d.num_entities(),
                d.num_relations()
            ))));
        }
    }
    Ok((model, header))
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn create_file(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

pub fn cmd_train(config: &RunConfig) -> CliResult<()> {
    let data = load_dataset(config)?;
    if data.train.is_empty() {
        return Err(invalid(Error::Empty("training split")));
    }
    create_dir(&config.output_dir)?;
    let snapshot = config.output_dir.join("config.resolved");
    fs::write(&snapshot, config.to_text()).map_err(io_err(&snapshot))?;
    let mut writer = RunWriter::create(&config.output_dir, config.checkpoint_every).map_err(runtime)?;
    let out = train::<f32>(&data, &config.train, &config.demix, &config.sampler, &mut writer).map_err(runtime)?;
    let final_path = writer.finish(&out.model).map_err(runtime)?;
    if let Some(r) = out.log.last() {
        println!("epoch {} loss {:.6}", r.epoch, r.loss);
        if let Some((split, m)) = r.metrics {
            println!(
                "{} mrr {:.4} hits@1 {:.4} hits@3 {:.4} hits@10 {:.4}",
                split.name(),
                m.mrr,
                m.hits1,
                m.hits3,
                m.hits10
            );
        }
    }
    match final_path {
        Some(p) => println!("wrote {}", p.display()),
        None => println!("no epochs run; wrote {}", config.output_dir.join("epoch_0000.ckpt").display()),
    }
    Ok(())
}

pub fn cmd_eval(config: &RunConfig, checkpoint: &Path, split: Split) -> CliResult<()> {
    let data = load_dataset(config)?;
    let (model, header) = load_model(checkpoint, Some(&data))?;
    let triples = data.split(split).as_slice();
    if triples.is_empty() {
        return Err(invalid(Error::Empty("evaluation split")));
    }
    let started = Instant::now();
    let filter = FilterIndex::from_dataset(&data);
    let eval = evaluate(&model, triples, &filter).map_err(runtime)?;
    let m = eval.report;
    let wall = started.elapsed().as_secs_f64();
    println!(
        "{} queries {} mrr {:.6} hits@1 {:.6} hits@3 {:.6} hits@10 {:.6}",
        split.name(),
        m.count,
        m.mrr,
        m.hits1,
        m.hits3,
        m.hits10
    );

    create_dir(&config.output_dir)?;
    let path = config.output_dir.join(format!("eval_{}.csv", split.name()));
    let mut f = create_file(&path)?;
    writeln!(f, "{METRICS_HEADER}").map_err(io_err(&path))?;
    writeln!(
        f,
        "{},{},{},{},{},{},,{:.3}",
        header.epoch,
        split.name(),
        m.mrr,
        m.hits1,
        m.hits3,
        m.hits10,
        wall
    )
    .map_err(io_err(&path))?;
    f.flush().map_err(io_err(&path))?;

    let path = config.output_dir.join(format!("eval_{}_relations.csv", split.name()));
    let mut f = create_file(&path)?;
    writeln!(f, "relation,queries,mrr,hits1,hits3,hits10").map_err(io_err(&path))?;
    for (rel, r) in &eval.per_relation {
        let name = data.vocab.relation_name(*rel).unwrap_or("?");
        writeln!(f, "{name},{},{},{},{},{}", r.count, r.mrr, r.hits1, r.hits3, r.hits10).map_err(io_err(&path))?;
    }
    f.flush().map_err(io_err(&path))
}

/// Checkpoints named `epoch_NNNN.ckpt` in `dir`, sorted by epoch.
pub fn epoch_checkpoints(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| invalid(Error::io(dir, e)))?;
    let mut found: Vec<(usize, PathBuf)> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter_map(|p| {
            let name = p.file_name()?.to_str()?;
            let epoch = name.strip_prefix("epoch_")?.strip_suffix(".ckpt")?.parse().ok()?;
            Some((epoch, p))
        })
        .collect();
    found.sort();
    Ok(found.into_iter().map(|(_, p)| p).collect())
}

pub fn cmd_estimation_accuracy(config: &RunConfig, checkpoints: &[PathBuf]) -> CliResult<()> {
    let data = load_dataset(config)?;
    let checkpoints = if checkpoints.is_empty() {
        epoch_checkpoints(&config.output_dir)?
    } else {
        checkpoints.to_vec()
    };
    if checkpoints.is_empty() {
        return Err(invalid(Error::config(format!(
            "no checkpoints given and none found in {}",
            config.output_dir.display()
        ))));
    }
    let index = PatternIndex::build(data.train.as_slice());
    let mut planted = data.valid.as_slice().to_vec();
    planted.extend_from_slice(data.test.as_slice());
    if planted.is_empty() {
        return Err(invalid(Error::Empty("valid and test splits")));
    }
    create_dir(&config.output_dir)?;
    let path = config.output_dir.join("estimation_accuracy.csv");
    let mut f = create_file(&path)?;
    writeln!(f, "epoch,t,delta_t,side,evaluable,correct,accuracy,interval_fraction").map_err(io_err(&path))?;
    for ckpt in &checkpoints {
        let (model, header) = load_model(ckpt, Some(&data))?;
        let t = header.epoch.saturating_sub(config.demix.warmup_epochs);
        let acc = estimation_accuracy(&model, &planted, &index, &config.demix, t, config.seed);
        for (side, label) in [(Side::Tail, "hr"), (Side::Head, "rt")] {
            let s = acc.side(side);
            writeln!(
                f,
                "{},{t},{},{label},{},{},{},{}",
                header.epoch,
                delta_at_epoch(t, &config.demix),
                s.evaluable,
                s.correct,
                s.accuracy(),
                s.interval_fraction
            )
            .map_err(io_err(&path))?;
            println!(
                "epoch {} {label} evaluable {} accuracy {:.4} interval_fraction {:.4}",
                header.epoch,
                s.evaluable,
                s.accuracy(),
                s.interval_fraction
            );
        }
    }
    f.flush().map_err(io_err(&path))
}

struct CurveLog<'a> {
    run: &'static str,
    out: &'a mut BufWriter<File>,
    path: &'a Path,
}

impl TrainObserver<f32> for CurveLog<'_> {
    fn on_epoch_end(&mut self, r: &crate::trainer::EpochRecord, _model: &EmbeddingModel<f32>) -> crate::error::Result<()> {
        let row = match r.metrics {
            Some((split, m)) => format!(
                "{},{},{},{},{},{},{},{},{:.3}",
                self.run,
                r.epoch,
                split.name(),
                m.mrr,
                m.hits1,
                m.hits3,
                m.hits10,
                r.loss,
                r.wall_clock_s
            ),
            None => format!("{},{},train,,,,,{},{:.3}", self.run, r.epoch, r.loss, r.wall_clock_s),
        };
        writeln!(self.out, "{row}").map_err(|e| Error::io(self.path, e))
    }
}

/// Trains twin runs differing only in the leakage filter.
pub fn cmd_leakage_compare(config: &RunConfig) -> CliResult<()> {
    let data = load_dataset(config)?;
    create_dir(&config.output_dir)?;
    let path = config.output_dir.join("leakage_compare.csv");
    let mut f = create_file(&path)?;
    writeln!(f, "run,{METRICS_HEADER}").map_err(io_err(&path))?;
    for (run, leak) in [("normal", false), ("leakage", true)] {
        let mut sampler = config.sampler;
        sampler.leakage_filter = leak;
        let mut log = CurveLog {
            run,
            out: &mut f,
            path: &path,
        };
        let out = train::<f32>(&data, &config.train, &config.demix, &sampler, &mut log).map_err(runtime)?;
        if let Some((split, m)) = out.log.iter().rev().find_map(|r| r.metrics) {
            println!("{run} final {} mrr {:.4} hits@10 {:.4}", split.name(), m.mrr, m.hits10);
        }
    }
    f.flush().map_err(io_err(&path))
}

/// Writes `entities.tsv` and `relations.tsv` as `id<TAB>v0<TAB>...` rows.
pub fn cmd_export_embeddings(checkpoint: &Path, out_dir: &Path) -> CliResult<()> {
    let (model, _) = load_model(checkpoint, None)?;
    create_dir(out_dir)?;
    let tables = [
        ("entities.tsv", model.num_entities(), model.dim(), model.entity_table()),
        (
            "relations.tsv",
            model.num_relations(),
            model.relation_dim(),
            model.relation_table(),
        ),
    ];
    for (name, rows, width, table) in tables {
        let path = out_dir.join(name);
        let mut f = create_file(&path)?;
        for id in 0..rows {
            write!(f, "{id}").map_err(io_err(&path))?;
            for v in &table[id * width..(id + 1) * width] {
                write!(f, "\t{v}").map_err(io_err(&path))?;
            }
            writeln!(f).map_err(io_err(&path))?;
        }
        f.flush().map_err(io_err(&path))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn cmd_synth(config: &SyntheticConfig, out_dir: &Path) -> CliResult<()> {
    let kg = generate(config).map_err(invalid)?;
    kg.write(out_dir).map_err(runtime)?;
    let d = &kg.dataset;
    println!(
        "entities {} relations {} train {} valid {} test {} -> {}",
        d.num_entities(),
        d.num_relations(),
        d.train.len(),
        d.valid.len(),
        d.test.len(),
        out_dir.display()
    );
    Ok(())
}
