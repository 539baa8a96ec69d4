use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scoring::{save_checkpoint, EmbeddingModel};

use super::train::{EpochRecord, TrainObserver};

pub const METRICS_HEADER: &str = "epoch,split,mrr,hits1,hits3,hits10,loss,wall_clock_s";

/// Writes `metrics.csv` and checkpoints into one directory.
///
/// Checkpoints: `epoch_NNNN.ckpt` at epoch 0 and every `checkpoint_every`
/// epochs, `best.ckpt` on each validation improvement, `final.ckpt` from
/// [`RunWriter::finish`] after at least one epoch.
#[derive(Debug)]
pub struct RunWriter {
    dir: PathBuf,
    checkpoint_every: usize,
    best_mrr: Option<f64>,
    last_epoch: usize,
    metrics: BufWriter<File>,
    metrics_path: PathBuf,
}

impl RunWriter {
    pub fn create(dir: impl AsRef<Path>, checkpoint_every: usize) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let metrics_path = dir.join("metrics.csv");
        let file = File::create(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?;
        let mut metrics = BufWriter::new(file);
        writeln!(metrics, "{METRICS_HEADER}").map_err(|e| Error::io(&metrics_path, e))?;
        Ok(RunWriter {
            dir,
            checkpoint_every,
            best_mrr: None,
            last_epoch: 0,
            metrics,
            metrics_path,
        })
    }

    pub fn checkpoint_path(&self, epoch: usize) -> PathBuf {
        self.dir.join(format!("epoch_{epoch:04}.ckpt"))
    }

    pub fn best_mrr(&self) -> Option<f64> {
        self.best_mrr
    }

    /// Writes `final.ckpt` (unless no epoch ran) and flushes the metrics file.
    pub fn finish<F: Scalar>(mut self, model: &EmbeddingModel<F>) -> Result<Option<PathBuf>> {
        self.metrics.flush().map_err(|e| Error::io(&self.metrics_path, e))?;
        if self.last_epoch == 0 {
            return Ok(None);
        }
        let path = self.dir.join("final.ckpt");
        save_checkpoint(model, self.last_epoch, &path)?;
        Ok(Some(path))
    }
}

impl<F: Scalar> TrainObserver<F> for RunWriter {
    fn on_start(&mut self, model: &EmbeddingModel<F>) -> Result<()> {
        save_checkpoint(model, 0, &self.checkpoint_path(0))
    }

    fn on_epoch_end(&mut self, record: &EpochRecord, model: &EmbeddingModel<F>) -> Result<()> {
        self.last_epoch = record.epoch;
        let io = |e| Error::io(&self.metrics_path, e);
        writeln!(
            self.metrics,
            "{},train,,,,,{},{:.3}",
            record.epoch, record.loss, record.wall_clock_s
        )
        .map_err(io)?;
        if let Some((split, m)) = record.metrics {
            writeln!(
                self.metrics,
                "{},{},{},{},{},{},{},{:.3}",
                record.epoch,
                split.name(),
                m.mrr,
                m.hits1,
                m.hits3,
                m.hits10,
                record.loss,
                record.wall_clock_s
            )
            .map_err(io)?;
            if self.best_mrr.is_none_or(|best| m.mrr > best) {
                self.best_mrr = Some(m.mrr);
                save_checkpoint(model, record.epoch, &self.dir.join("best.ckpt"))?;
            }
        }
        self.metrics.flush().map_err(io)?;
        if self.checkpoint_every > 0 && record.epoch.is_multiple_of(self.checkpoint_every) {
            save_checkpoint(model, record.epoch, &self.checkpoint_path(record.epoch))?;
        }
        Ok(())
    }
}
