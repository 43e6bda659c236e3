//! Binary feature file format.
//!
//! Layout, little-endian throughout: magic `BCGF`, u32 version (1), u32 D_i,
//! u32 l_s, u32 snippet interval, then `D_i * l_s` f32 values in row-major
//! `[D_i x l_s]` order.

use super::{DataError, FeatureSequence};
use crate::tensor::Tensor;
use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

pub const FEATURE_MAGIC: &[u8; 4] = b"BCGF";
pub const FEATURE_VERSION: u32 = 1;

fn read_u32(r: &mut impl Read, path: &Path, what: &str) -> Result<u32, DataError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|e| DataError::CorruptHeader {
            path: path.display().to_string(),
            reason: format!("truncated {what}: {e}"),
        })?;
    Ok(u32::from_le_bytes(buf))
}

/// Load a feature sequence; the video id is the file stem.
pub fn load_features(path: &Path) -> Result<FeatureSequence, DataError> {
    let file = File::open(path).map_err(|e| {
        if e.kind() == ErrorKind::NotFound {
            DataError::MissingFile {
                path: path.display().to_string(),
                source: e,
            }
        } else {
            DataError::Io {
                path: path.display().to_string(),
                source: e,
            }
        }
    })?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|e| DataError::CorruptHeader {
            path: path.display().to_string(),
            reason: format!("truncated magic: {e}"),
        })?;
    if &magic != FEATURE_MAGIC {
        return Err(DataError::CorruptHeader {
            path: path.display().to_string(),
            reason: format!("bad magic {magic:?}"),
        });
    }
    let version = read_u32(&mut r, path, "version")?;
    if version != FEATURE_VERSION {
        return Err(DataError::CorruptHeader {
            path: path.display().to_string(),
            reason: format!("unsupported version {version}"),
        });
    }
    let d_i = read_u32(&mut r, path, "feature dimension")? as usize;
    let l_s = read_u32(&mut r, path, "sequence length")? as usize;
    let tau = read_u32(&mut r, path, "snippet interval")?;
    if d_i < 1 || l_s < 2 {
        return Err(DataError::CorruptHeader {
            path: path.display().to_string(),
            reason: format!("degenerate dimensions D_i={d_i}, l_s={l_s}"),
        });
    }

    let n = d_i * l_s;
    let mut bytes = vec![0u8; n * 4];
    r.read_exact(&mut bytes)
        .map_err(|e| DataError::CorruptHeader {
            path: path.display().to_string(),
            reason: format!("truncated payload (expected {n} f32): {e}"),
        })?;
    let mut data = Vec::with_capacity(n);
    for (i, chunk) in bytes.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("chunks_exact yields 4 bytes"));
        if !v.is_finite() {
            return Err(DataError::NonFiniteValue {
                path: path.display().to_string(),
                index: i,
            });
        }
        data.push(v);
    }

    let features = Tensor::from_vec(vec![d_i, l_s], data).map_err(|source| DataError::Tensor {
        context: "feature payload",
        source,
    })?;
    let video_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(FeatureSequence {
        video_id,
        features,
        snippet_interval: tau,
    })
}

pub fn write_features(path: &Path, seq: &FeatureSequence) -> Result<(), DataError> {
    let io_err = |e| DataError::Io {
        path: path.display().to_string(),
        source: e,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    w.write_all(FEATURE_MAGIC).map_err(io_err)?;
    w.write_all(&FEATURE_VERSION.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(seq.channels() as u32).to_le_bytes())
        .map_err(io_err)?;
    w.write_all(&(seq.len() as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(&seq.snippet_interval.to_le_bytes())
        .map_err(io_err)?;
    for v in &seq.features.data {
        w.write_all(&v.to_le_bytes()).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn sample() -> FeatureSequence {
        let data: Vec<f32> = (0..40).map(|v| v as f32 * 0.25).collect();
        FeatureSequence {
            video_id: "v0".into(),
            features: Tensor::from_vec(vec![4, 10], data).unwrap(),
            snippet_interval: 5,
        }
    }

    #[test]
    fn round_trip_preserves_shape_and_bytes() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("v0.bcgf");
        write_features(&path, &sample()).unwrap();
        let loaded = load_features(&path).unwrap();
        assert_eq!(loaded.features.shape, vec![4, 10]);
        assert_eq!(loaded.features.data, sample().features.data);
        assert_eq!(loaded.snippet_interval, 5);
        assert_eq!(loaded.video_id, "v0");
    }

    #[test]
    fn nan_payload_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.bcgf");
        let mut seq = sample();
        seq.features.data[7] = f32::NAN;
        write_features(&path, &seq).unwrap();
        match load_features(&path) {
            Err(DataError::NonFiniteValue { index: 7, .. }) => {}
            other => panic!("expected non-finite error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_a_corrupt_header() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("empty.bcgf");
        std::fs::write(&path, b"").unwrap();
        assert!(matches!(
            load_features(&path),
            Err(DataError::CorruptHeader { .. })
        ));
    }

    #[test]
    fn missing_file_is_distinct_from_corrupt() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("nope.bcgf");
        assert!(matches!(
            load_features(&path),
            Err(DataError::MissingFile { .. })
        ));
    }

    #[test]
    fn truncated_payload_is_reported() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("short.bcgf");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(FEATURE_MAGIC);
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&4u32.to_le_bytes());
        bytes.extend_from_slice(&10u32.to_le_bytes());
        bytes.extend_from_slice(&5u32.to_le_bytes());
        bytes.extend_from_slice(&[0u8; 16]); // far fewer than 160 bytes
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_features(&path),
            Err(DataError::CorruptHeader { .. })
        ));
    }
}
