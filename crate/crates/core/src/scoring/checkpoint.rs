//! Binary checkpoint format.
//!
//! ```text
//! DEMIXKGE1\n
//! kind=<k> dim=<d> entities=<|E|> relations=<|R|> margin=<γ> epoch=<n> norm=<l1|l2>\n
//! <|E|·d f32 LE, row-major> <|R|·d_r f32 LE, row-major>
//! ```
//!
//! `norm` is optional on read and defaults to the kind's default norm.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::kernels::{ModelKind, Norm};
use super::model::{EmbeddingModel, ModelConfig};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAGIC: &str = "DEMIXKGE1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckpointHeader {
    pub config: ModelConfig,
    pub num_entities: usize,
    pub num_relations: usize,
    pub epoch: usize,
}

pub fn write_checkpoint<F: Scalar, W: Write>(model: &EmbeddingModel<F>, epoch: usize, mut out: W) -> std::io::Result<()> {
    let cfg = model.config();
    writeln!(out, "{MAGIC}")?;
    writeln!(
        out,
        "kind={} dim={} entities={} relations={} margin={} epoch={} norm={}",
        cfg.kind,
        cfg.dim,
        model.num_entities(),
        model.num_relations(),
        cfg.margin,
        epoch,
        cfg.norm
    )?;
    for &x in model.entity_table().iter().chain(model.relation_table()) {
        let v = x.to_f32().unwrap_or(f32::NAN);
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()
}

pub fn save_checkpoint<F: Scalar>(model: &EmbeddingModel<F>, epoch: usize, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(model, epoch, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

fn read_header<R: BufRead>(reader: &mut R) -> Result<CheckpointHeader> {
    let mut line = String::new();
    reader
        .read_line(&mut line)
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    if line.trim_end() != MAGIC {
        return Err(Error::Checkpoint("missing DEMIXKGE1 magic".into()));
    }
    line.clear();
    reader
        .read_line(&mut line)
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut kind = None;
    let mut dim = None;
    let mut entities = None;
    let mut relations = None;
    let mut margin = None;
    let mut epoch = None;
    let mut norm = None;
    for field in line.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::Checkpoint(format!("bad header field {field:?}")))?;
        let bad = || Error::Checkpoint(format!("bad value for {key}: {value:?}"));
        match key {
            "kind" => kind = Some(value.parse::<ModelKind>().map_err(|_| bad())?),
            "dim" => dim = Some(value.parse::<usize>().map_err(|_| bad())?),
            "entities" => entities = Some(value.parse::<usize>().map_err(|_| bad())?),
            "relations" => relations = Some(value.parse::<usize>().map_err(|_| bad())?),
            "margin" => margin = Some(value.parse::<f64>().map_err(|_| bad())?),
            "epoch" => epoch = Some(value.parse::<usize>().map_err(|_| bad())?),
            "norm" => norm = Some(value.parse::<Norm>().map_err(|_| bad())?),
            _ => return Err(Error::Checkpoint(format!("unknown header key {key:?}"))),
        }
    }
    let missing = |k: &str| Error::Checkpoint(format!("header lacks {k}"));
    let kind = kind.ok_or_else(|| missing("kind"))?;
    let config = ModelConfig {
        kind,
        dim: dim.ok_or_else(|| missing("dim"))?,
        margin: margin.ok_or_else(|| missing("margin"))?,
        norm: norm.unwrap_or_else(|| kind.default_norm()),
    };
    config
        .validate()
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok(CheckpointHeader {
        config,
        num_entities: entities.ok_or_else(|| missing("entities"))?,
        num_relations: relations.ok_or_else(|| missing("relations"))?,
        epoch: epoch.ok_or_else(|| missing("epoch"))?,
    })
}

pub fn read_checkpoint<F: Scalar, R: Read>(reader: R) -> Result<(EmbeddingModel<F>, CheckpointHeader)> {
    let mut reader = BufReader::new(reader);
    let header = read_header(&mut reader)?;
    let cfg = header.config;
    let read_table = |reader: &mut BufReader<R>, n: usize| -> Result<Vec<F>> {
        let mut bytes = vec![0u8; n * 4];
        reader
            .read_exact(&mut bytes)
            .map_err(|_| Error::Checkpoint("truncated parameter block".into()))?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| F::of(f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]]))))
            .collect())
    };
    let entities = read_table(&mut reader, header.num_entities * cfg.dim)?;
    let relations = read_table(&mut reader, header.num_relations * cfg.relation_dim())?;
    let mut rest = [0u8; 1];
    if reader.read(&mut rest).map_err(|e| Error::Checkpoint(e.to_string()))? != 0 {
        return Err(Error::Checkpoint("trailing bytes after parameter block".into()));
    }
    let model = EmbeddingModel::from_tables(
        cfg,
        header.num_entities,
        header.num_relations,
        entities,
        relations,
    )
    .map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok((model, header))
}

pub fn load_checkpoint<F: Scalar>(path: &Path) -> Result<(EmbeddingModel<F>, CheckpointHeader)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(file)
}
