//! Checkpoint files: a version line, one JSON metadata line (config, tensor
//! names and shapes, batch-norm statistics), then every tensor's data as
//! little-endian `f64` in metadata order.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::config::ModelConfig;
use super::params::{init_params, ModelParams, RunningStats};

pub const CHECKPOINT_HEADER: &str = "GENHOP-CKPT v1";

#[derive(Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    shape: [usize; 2],
}

#[derive(Serialize, Deserialize)]
struct Meta {
    config: ModelConfig,
    tensors: Vec<TensorMeta>,
    running: Vec<RunningStats>,
}

fn ckpt(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

pub fn write_checkpoint<W: Write>(params: &ModelParams, mut out: W) -> Result<()> {
    let meta = Meta {
        config: params.config.clone(),
        tensors: params
            .store
            .names()
            .iter()
            .zip(params.store.tensors())
            .map(|(n, t)| TensorMeta {
                name: n.clone(),
                shape: t.shape(),
            })
            .collect(),
        running: params.running.clone(),
    };
    writeln!(out, "{CHECKPOINT_HEADER}")?;
    serde_json::to_writer(&mut out, &meta)?;
    writeln!(out)?;
    for t in params.store.tensors() {
        for x in t.data() {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(input: R) -> Result<ModelParams> {
    let mut r = BufReader::new(input);
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim_end() != CHECKPOINT_HEADER {
        return Err(ckpt(format!("unrecognized header {:?}", line.trim_end())));
    }
    line.clear();
    r.read_line(&mut line)?;
    let meta: Meta = serde_json::from_str(&line).map_err(|e| ckpt(format!("metadata: {e}")))?;
    let mut params = init_params(&meta.config, 0)?;
    if meta.tensors.len() != params.store.len() {
        return Err(ckpt(format!(
            "{} tensors stored, configuration defines {}",
            meta.tensors.len(),
            params.store.len()
        )));
    }
    if meta.running.len() != params.running.len() {
        return Err(ckpt("batch-norm statistics do not match the configuration"));
    }
    let names: Vec<String> = params.store.names().to_vec();
    for ((tm, slot), name) in meta.tensors.iter().zip(params.store.tensors_mut()).zip(&names) {
        if &tm.name != name || tm.shape != slot.shape() {
            return Err(ckpt(format!(
                "tensor {} {:?} does not match expected {} {:?}",
                tm.name,
                tm.shape,
                name,
                slot.shape()
            )));
        }
        let mut buf = vec![0u8; 8 * slot.len()];
        r.read_exact(&mut buf)
            .map_err(|_| ckpt(format!("data for {} is truncated", tm.name)))?;
        let data = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        *slot = Tensor::new(tm.shape[0], tm.shape[1], data)?;
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(ckpt(format!("{} trailing bytes", rest.len())));
    }
    params.running = meta.running;
    Ok(params)
}

pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_checkpoint(params, std::io::BufWriter::new(f))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    read_checkpoint(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut p = init_params(&ModelConfig::default(), 3).unwrap();
        p.running[0].mean[0] = 0.25;
        let mut buf = Vec::new();
        write_checkpoint(&p, &mut buf).unwrap();
        assert!(buf.starts_with(CHECKPOINT_HEADER.as_bytes()));
        let q = read_checkpoint(&buf[..]).unwrap();
        assert_eq!(p, q);

        let cut = &buf[..buf.len() - 3];
        assert!(matches!(read_checkpoint(cut), Err(Error::Checkpoint(_))));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_checkpoint(&bad[..]), Err(Error::Checkpoint(_))));
    }
}
