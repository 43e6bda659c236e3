//! Checkpoint format, little-endian: magic `BCGC`, u32 version, u32 config
//! length + config text, u32 parameter count, then per parameter: u32 name
//! length, name bytes, u32 rank, u32 dims, f32 data.

use super::TrainError;
use crate::tensor::{ParamStore, Tensor};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"BCGC";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn save_checkpoint(path: &Path, store: &ParamStore, config_text: &str) -> Result<(), TrainError> {
    let io_err = |source| TrainError::CheckpointIo {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    w.write_all(CHECKPOINT_MAGIC).map_err(io_err)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes()).map_err(io_err)?;
    let cfg = config_text.as_bytes();
    w.write_all(&(cfg.len() as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(cfg).map_err(io_err)?;
    w.write_all(&(store.len() as u32).to_le_bytes()).map_err(io_err)?;
    for (name, t) in store.iter() {
        let nb = name.as_bytes();
        w.write_all(&(nb.len() as u32).to_le_bytes()).map_err(io_err)?;
        w.write_all(nb).map_err(io_err)?;
        w.write_all(&(t.shape.len() as u32).to_le_bytes()).map_err(io_err)?;
        for &d in &t.shape {
            w.write_all(&(d as u32).to_le_bytes()).map_err(io_err)?;
        }
        for v in &t.data {
            w.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

/// Load parameters plus the embedded config echo.
pub fn load_checkpoint(path: &Path) -> Result<(ParamStore, String), TrainError> {
    let corrupt = |reason: String| TrainError::CorruptCheckpoint {
        path: path.display().to_string(),
        reason,
    };
    let file = File::open(path).map_err(|source| TrainError::CheckpointIo {
        path: path.display().to_string(),
        source,
    })?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| corrupt(format!("truncated magic: {e}")))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(corrupt(format!("bad magic {magic:?}")));
    }
    let read_u32 = |r: &mut BufReader<File>, what: &str| -> Result<u32, TrainError> {
        let mut b = [0u8; 4];
        r.read_exact(&mut b).map_err(|e| TrainError::CorruptCheckpoint {
            path: path.display().to_string(),
            reason: format!("truncated {what}: {e}"),
        })?;
        Ok(u32::from_le_bytes(b))
    };
    let version = read_u32(&mut r, "version")?;
    if version != CHECKPOINT_VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let cfg_len = read_u32(&mut r, "config length")? as usize;
    let mut cfg = vec![0u8; cfg_len];
    r.read_exact(&mut cfg).map_err(|e| corrupt(format!("truncated config: {e}")))?;
    let config_text = String::from_utf8(cfg).map_err(|e| corrupt(format!("config not utf-8: {e}")))?;

    let n_params = read_u32(&mut r, "parameter count")? as usize;
    let mut store = ParamStore::new();
    for k in 0..n_params {
        let name_len = read_u32(&mut r, "name length")? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name).map_err(|e| corrupt(format!("truncated name {k}: {e}")))?;
        let name = String::from_utf8(name).map_err(|e| corrupt(format!("name not utf-8: {e}")))?;
        let rank = read_u32(&mut r, "rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u32(&mut r, "dim")? as usize);
        }
        let n: usize = shape.iter().product();
        let mut bytes = vec![0u8; n * 4];
        r.read_exact(&mut bytes)
            .map_err(|e| corrupt(format!("truncated data for `{name}`: {e}")))?;
        let data: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunks")))
            .collect();
        let tensor = Tensor::from_vec(shape, data)?;
        store.insert(&name, tensor)?;
    }
    Ok((store, config_text))
}
