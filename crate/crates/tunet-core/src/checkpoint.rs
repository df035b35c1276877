//! Checkpoint file I/O.
//!
//! Layout: the magic string `TUNET1\n`; a text header of `key=value` config
//! lines plus an ordered `tensor=<name> <d0> <d1> <d2>` manifest terminated
//! by an `end` line; little-endian 32-bit reals for each array in manifest
//! order; and a little-endian 32-bit CRC of all preceding bytes.
//!
//! Values are stored as `f32` regardless of the in-memory precision; loading
//! into `f64` widens. Normalization statistics ride along as optional header
//! keys so a saved model can score raw series without the training corpus.

use std::fs;
use std::path::Path;

use crate::dataset::NormStats;
use crate::error::{Error, Result};
use crate::model::{param_shapes, ParamStore, TUnetConfig};
use crate::tensor::{Element, Tensor3};

pub const MAGIC: &[u8] = b"TUNET1\n";

fn header_text(params_len: usize, cfg: &TUnetConfig, norm: Option<&NormStats>) -> String {
    let mut h = String::new();
    h.push_str(&format!("input_channels={}\n", cfg.input_channels));
    h.push_str(&format!("series_length={}\n", cfg.series_length));
    h.push_str(&format!("num_classes={}\n", cfg.num_classes));
    h.push_str(&format!("depth={}\n", cfg.depth));
    h.push_str(&format!("base_channels={}\n", cfg.base_channels));
    h.push_str(&format!("conv_kernel={}\n", cfg.conv_kernel));
    h.push_str(&format!("seed={}\n", cfg.seed));
    if let Some(stats) = norm {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{}", x))
                .collect::<Vec<_>>()
                .join(",")
        };
        h.push_str(&format!("norm_mean={}\n", join(&stats.mean)));
        h.push_str(&format!("norm_std={}\n", join(&stats.std)));
    }
    h.push_str(&format!("tensors={}\n", params_len));
    h
}

/// Serialize parameters and config (plus optional normalization statistics)
/// to `path`. Bit-exact: identical inputs yield identical files.
pub fn save_checkpoint<E: Element>(
    params: &ParamStore<E>,
    cfg: &TUnetConfig,
    norm: Option<&NormStats>,
    path: &Path,
) -> Result<()> {
    let mut bytes: Vec<u8> = Vec::new();
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(header_text(params.len(), cfg, norm).as_bytes());
    for p in params.iter() {
        let (d0, d1, d2) = p.tensor.shape();
        bytes.extend_from_slice(format!("tensor={} {} {} {}\n", p.name, d0, d1, d2).as_bytes());
    }
    bytes.extend_from_slice(b"end\n");
    for p in params.iter() {
        for &v in p.tensor.data() {
            bytes.extend_from_slice(&(v.into_f64() as f32).to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&bytes);
    bytes.extend_from_slice(&crc.to_le_bytes());
    fs::write(path, bytes)?;
    Ok(())
}

fn parse_usize(map: &std::collections::BTreeMap<String, String>, key: &str) -> Result<usize> {
    map.get(key)
        .ok_or_else(|| Error::Checkpoint(format!("missing header key `{}`", key)))?
        .parse()
        .map_err(|_| Error::Checkpoint(format!("bad value for header key `{}`", key)))
}

fn parse_f64_list(value: &str, key: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|f| {
            f.parse()
                .map_err(|_| Error::Checkpoint(format!("bad value in `{}`", key)))
        })
        .collect()
}

/// Load a checkpoint; validates the magic/version, the CRC, and that the
/// manifest matches the architecture walk implied by the recorded config.
pub fn load_checkpoint<E: Element>(
    path: &Path,
) -> Result<(ParamStore<E>, TUnetConfig, Option<NormStats>)> {
    let bytes = fs::read(path)?;
    if bytes.len() < MAGIC.len() + 4 {
        return Err(Error::Checkpoint(format!(
            "{}: too short to be a checkpoint",
            path.display()
        )));
    }
    if !bytes.starts_with(MAGIC) {
        if bytes.starts_with(b"TUNET") {
            return Err(Error::CheckpointVersion(format!(
                "{}: unsupported checkpoint version",
                path.display()
            )));
        }
        return Err(Error::Checkpoint(format!(
            "{}: not a checkpoint file",
            path.display()
        )));
    }

    let body_len = bytes.len() - 4;
    let stored_crc = u32::from_le_bytes(bytes[body_len..].try_into().unwrap());
    let actual_crc = crc32fast::hash(&bytes[..body_len]);
    if stored_crc != actual_crc {
        return Err(Error::ChecksumMismatch {
            expected: stored_crc,
            got: actual_crc,
        });
    }

    // Text header: parse line by line until `end`.
    let mut pos = MAGIC.len();
    let mut keys = std::collections::BTreeMap::new();
    let mut manifest: Vec<(String, (usize, usize, usize))> = Vec::new();
    loop {
        let rest = &bytes[pos..body_len];
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Checkpoint("unterminated header".into()))?;
        let line = std::str::from_utf8(&rest[..nl])
            .map_err(|_| Error::Checkpoint("header is not valid text".into()))?;
        pos += nl + 1;
        if line == "end" {
            break;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Checkpoint(format!("bad header line `{}`", line)))?;
        if key == "tensor" {
            let fields: Vec<&str> = value.split(' ').collect();
            if fields.len() != 4 {
                return Err(Error::Checkpoint(format!("bad manifest line `{}`", line)));
            }
            let dims: Vec<usize> = fields[1..]
                .iter()
                .map(|f| {
                    f.parse()
                        .map_err(|_| Error::Checkpoint(format!("bad manifest line `{}`", line)))
                })
                .collect::<Result<_>>()?;
            manifest.push((fields[0].to_string(), (dims[0], dims[1], dims[2])));
        } else {
            keys.insert(key.to_string(), value.to_string());
        }
    }

    let cfg = TUnetConfig {
        input_channels: parse_usize(&keys, "input_channels")?,
        series_length: parse_usize(&keys, "series_length")?,
        num_classes: parse_usize(&keys, "num_classes")?,
        depth: parse_usize(&keys, "depth")?,
        base_channels: parse_usize(&keys, "base_channels")?,
        conv_kernel: parse_usize(&keys, "conv_kernel")?,
        seed: keys
            .get("seed")
            .ok_or_else(|| Error::Checkpoint("missing header key `seed`".into()))?
            .parse()
            .map_err(|_| Error::Checkpoint("bad value for header key `seed`".into()))?,
    };
    let tensors = parse_usize(&keys, "tensors")?;
    if manifest.len() != tensors {
        return Err(Error::Checkpoint(format!(
            "manifest lists {} tensors, header says {}",
            manifest.len(),
            tensors
        )));
    }

    let norm = match (keys.get("norm_mean"), keys.get("norm_std")) {
        (Some(m), Some(s)) => Some(NormStats {
            mean: parse_f64_list(m, "norm_mean")?,
            std: parse_f64_list(s, "norm_std")?,
        }),
        (None, None) => None,
        _ => {
            return Err(Error::Checkpoint(
                "norm_mean and norm_std must appear together".into(),
            ))
        }
    };

    // The manifest must match the architecture implied by the config.
    let expected = param_shapes(&cfg);
    if expected.len() != manifest.len() {
        return Err(Error::ShapeMismatch(format!(
            "checkpoint has {} tensors, config implies {}",
            manifest.len(),
            expected.len()
        )));
    }
    for (spec, (name, shape)) in expected.iter().zip(manifest.iter()) {
        if &spec.name != name || spec.shape != *shape {
            return Err(Error::ShapeMismatch(format!(
                "checkpoint tensor `{}` {:?} does not match expected `{}` {:?}",
                name, shape, spec.name, spec.shape
            )));
        }
    }

    let total_values: usize = manifest.iter().map(|(_, (a, b, c))| a * b * c).sum();
    if body_len - pos != total_values * 4 {
        return Err(Error::Checkpoint(format!(
            "data section holds {} bytes, manifest implies {}",
            body_len - pos,
            total_values * 4
        )));
    }

    let mut store = ParamStore::new();
    for (name, (d0, d1, d2)) in manifest {
        let count = d0 * d1 * d2;
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            let v = f32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap());
            data.push(E::from_f64(v as f64));
            pos += 4;
        }
        store.push(name, Tensor3::from_vec(d0, d1, d2, data)?)?;
    }

    Ok((store, cfg, norm))
}

/// Architecture fields (everything but the seed) must agree between a loaded
/// checkpoint and the run configuration.
pub fn verify_compatible(loaded: &TUnetConfig, expected: &TUnetConfig) -> Result<()> {
    let mut a = loaded.clone();
    let mut b = expected.clone();
    a.seed = 0;
    b.seed = 0;
    if a != b {
        return Err(Error::ShapeMismatch(format!(
            "checkpoint architecture {:?} does not match configured {:?}",
            loaded, expected
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build;

    fn tiny_config() -> TUnetConfig {
        TUnetConfig {
            input_channels: 3,
            series_length: 16,
            num_classes: 2,
            depth: 2,
            base_channels: 4,
            conv_kernel: 3,
            seed: 77,
        }
    }

    #[test]
    fn round_trip_is_bit_exact_at_f32() {
        let cfg = tiny_config();
        let params = build::<f32>(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&params, &cfg, None, &path).unwrap();
        let (loaded, loaded_cfg, norm) = load_checkpoint::<f32>(&path).unwrap();
        assert_eq!(loaded, params);
        assert_eq!(loaded_cfg, cfg);
        assert!(norm.is_none());
    }

    #[test]
    fn saving_twice_yields_identical_bytes() {
        let cfg = tiny_config();
        let params = build::<f32>(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("a.ckpt"), dir.path().join("b.ckpt"));
        save_checkpoint(&params, &cfg, None, &p1).unwrap();
        save_checkpoint(&params, &cfg, None, &p2).unwrap();
        assert_eq!(std::fs::read(p1).unwrap(), std::fs::read(p2).unwrap());
    }

    #[test]
    fn norm_stats_round_trip() {
        let cfg = tiny_config();
        let params = build::<f32>(&cfg).unwrap();
        let stats = NormStats {
            mean: (0..52).map(|i| 0.125 * i as f64).collect(),
            std: (0..52).map(|i| 1.0 + 0.03125 * i as f64).collect(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&params, &cfg, Some(&stats), &path).unwrap();
        let (_, _, norm) = load_checkpoint::<f32>(&path).unwrap();
        assert_eq!(norm, Some(stats));
    }

    #[test]
    fn tampered_byte_fails_checksum() {
        let cfg = tiny_config();
        let params = build::<f32>(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&params, &cfg, None, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xff;
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            load_checkpoint::<f32>(&path),
            Err(Error::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn wrong_magic_is_a_version_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        std::fs::write(&path, b"TUNET9\nwhatever........").unwrap();
        assert!(matches!(
            load_checkpoint::<f32>(&path),
            Err(Error::CheckpointVersion(_))
        ));
        std::fs::write(&path, b"garbage garbage garbage").unwrap();
        assert!(matches!(
            load_checkpoint::<f32>(&path),
            Err(Error::Checkpoint(_))
        ));
    }

    #[test]
    fn depth_mismatch_is_rejected() {
        let cfg3 = TUnetConfig {
            depth: 3,
            series_length: 16,
            ..tiny_config()
        };
        let params = build::<f32>(&cfg3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&params, &cfg3, None, &path).unwrap();
        let (_, loaded_cfg, _) = load_checkpoint::<f32>(&path).unwrap();
        let expect2 = TUnetConfig {
            depth: 2,
            series_length: 16,
            ..tiny_config()
        };
        assert!(matches!(
            verify_compatible(&loaded_cfg, &expect2),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn missing_file_is_an_io_error() {
        assert!(matches!(
            load_checkpoint::<f32>(Path::new("/nonexistent/model.ckpt")),
            Err(Error::Io(_))
        ));
    }

    #[test]
    fn f64_save_narrows_to_f32_storage() {
        let cfg = tiny_config();
        let params = build::<f64>(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&params, &cfg, None, &path).unwrap();
        let (loaded, _, _) = load_checkpoint::<f64>(&path).unwrap();
        for (a, b) in loaded.iter().zip(params.iter()) {
            for (&x, &y) in a.tensor.data().iter().zip(b.tensor.data()) {
                assert_eq!(x, y as f32 as f64);
            }
        }
    }
}
