//! Self-describing checkpoint files.
//!
//! Layout (text, line-oriented):
//! ```text
//! rmfn-checkpoint v1
//! {"epoch":N,"config":{...}}
//! tensor<TAB>name<TAB>dims<TAB>b64(le f64 data)
//! ...
//! end<TAB>count
//! ```
//! Tensor payloads are raw little-endian f64 bytes, so a save/load cycle is
//! bit-exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_variant, ModelConfig, ModelParams};

const HEADER: &str = "rmfn-checkpoint v1";

#[derive(Serialize, Deserialize)]
struct Meta {
    epoch: usize,
    config: ModelConfig,
}

pub fn save_checkpoint(path: impl AsRef<Path>, params: &ModelParams, epoch: usize) -> Result<()> {
    let registry = params.registry()?;
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{HEADER}")?;
    let meta = Meta {
        epoch,
        config: params.config.clone(),
    };
    writeln!(
        out,
        "{}",
        serde_json::to_string(&meta).map_err(|e| Error::Checkpoint(e.to_string()))?
    )?;
    let mut count = 0usize;
    let mut write_tensor = |name: &str, tensor: &crate::numcore::Tensor| -> Result<()> {
        let dims = tensor
            .shape()
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let mut bytes = Vec::with_capacity(tensor.len() * 8);
        for v in tensor.to_vec() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        writeln!(out, "tensor\t{name}\t{dims}\t{}", B64.encode(bytes))?;
        Ok(())
    };
    for (name, tensor) in registry.iter() {
        write_tensor(name, tensor)?;
        count += 1;
    }
    if let Some(mfp) = &params.mfp {
        // The fixed fusion memory is not trainable but must survive reloads.
        write_tensor("fixed.fuse_init_memory", &mfp.fuse_init_memory)?;
        count += 1;
    }
    writeln!(out, "end\t{count}")?;
    out.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ModelParams, usize)> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();

    let header = lines
        .next()
        .ok_or_else(|| Error::Checkpoint("empty file".into()))??;
    if header != HEADER {
        return Err(Error::Checkpoint(format!(
            "unrecognized header '{header}'"
        )));
    }
    let meta_line = lines
        .next()
        .ok_or_else(|| Error::Checkpoint("missing metadata line".into()))??;
    let meta: Meta = serde_json::from_str(&meta_line)
        .map_err(|e| Error::Checkpoint(format!("bad metadata: {e}")))?;

    let params = build_variant(&meta.config)?;
    let registry = params.registry()?;
    let mut remaining: std::collections::HashSet<String> =
        registry.iter().map(|(n, _)| n.clone()).collect();
    remaining.insert("fixed.fuse_init_memory".to_string());
    if params.mfp.is_none() {
        remaining.remove("fixed.fuse_init_memory");
    }

    let mut count = 0usize;
    let mut saw_end = false;
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("end\t") {
            let declared: usize = rest
                .parse()
                .map_err(|e| Error::Checkpoint(format!("bad end count: {e}")))?;
            if declared != count {
                return Err(Error::Checkpoint(format!(
                    "end record declares {declared} tensors, file held {count}"
                )));
            }
            saw_end = true;
            break;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 || fields[0] != "tensor" {
            return Err(Error::Checkpoint(format!("malformed line '{line}'")));
        }
        let name = fields[1];
        let dims: Vec<usize> = fields[2]
            .split(',')
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|e| Error::Checkpoint(format!("bad dims for '{name}': {e}")))
            })
            .collect::<Result<_>>()?;
        let bytes = B64
            .decode(fields[3])
            .map_err(|e| Error::Checkpoint(format!("bad payload for '{name}': {e}")))?;
        let expected: usize = dims.iter().product();
        if bytes.len() != expected * 8 {
            return Err(Error::Checkpoint(format!(
                "tensor '{name}' holds {} bytes, dims {:?} require {}",
                bytes.len(),
                dims,
                expected * 8
            )));
        }
        let data: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();

        let target = if name == "fixed.fuse_init_memory" {
            params
                .mfp
                .as_ref()
                .map(|m| &m.fuse_init_memory)
                .ok_or_else(|| {
                    Error::Checkpoint("fuse memory present but variant has no fusion".into())
                })?
        } else {
            registry
                .get(name)
                .ok_or_else(|| Error::Checkpoint(format!("unknown tensor '{name}'")))?
        };
        if target.shape() != dims {
            return Err(Error::Checkpoint(format!(
                "tensor '{name}' has shape {:?} in file but {:?} in model",
                dims,
                target.shape()
            )));
        }
        if !remaining.remove(name) {
            return Err(Error::Checkpoint(format!("tensor '{name}' appears twice")));
        }
        target.set_data(data)?;
        count += 1;
    }
    if !saw_end {
        return Err(Error::Checkpoint("missing end record (truncated file)".into()));
    }
    if !remaining.is_empty() {
        let mut missing: Vec<&String> = remaining.iter().collect();
        missing.sort();
        return Err(Error::Checkpoint(format!(
            "file lacks {} tensors, first missing '{}'",
            missing.len(),
            missing[0]
        )));
    }
    Ok((params, meta.epoch))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Task, Variant};
    use std::fs;

    fn config() -> ModelConfig {
        ModelConfig {
            d_l: 2,
            d_v: 2,
            d_a: 2,
            h_l: 2,
            h_v: 3,
            h_a: 2,
            d_hl: 3,
            d_f: 3,
            d_z: 2,
            stages: 2,
            variant: Variant::Full,
            task: Task::Regression,
            dropout: 0.1,
            seed: 9,
        }
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let params = build_variant(&config()).unwrap();
        // Perturb away from the seeded values so the reload has to carry data.
        for (i, (_, t)) in params.registry().unwrap().iter().enumerate() {
            t.set(0, 0.1 + i as f64 * 0.01);
        }
        save_checkpoint(&path, &params, 17).unwrap();
        let (loaded, epoch) = load_checkpoint(&path).unwrap();
        assert_eq!(epoch, 17);

        let orig = params.registry().unwrap();
        let back = loaded.registry().unwrap();
        for ((n1, t1), (n2, t2)) in orig.iter().zip(back.iter()) {
            assert_eq!(n1, n2);
            assert_eq!(t1.to_vec(), t2.to_vec(), "{n1}");
        }
        assert_eq!(
            params.mfp.as_ref().unwrap().fuse_init_memory.to_vec(),
            loaded.mfp.as_ref().unwrap().fuse_init_memory.to_vec()
        );

        // Saving the reload reproduces the file byte for byte.
        let path2 = dir.path().join("model2.ckpt");
        save_checkpoint(&path2, &loaded, 17).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
    }

    #[test]
    fn truncated_checkpoint_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let params = build_variant(&config()).unwrap();
        save_checkpoint(&path, &params, 0).unwrap();
        let content = fs::read_to_string(&path).unwrap();
        let cut: String = content
            .lines()
            .take(5)
            .map(|l| format!("{l}\n"))
            .collect();
        fs::write(&path, cut).unwrap();
        assert!(load_checkpoint(&path).is_err());
    }

    #[test]
    fn wrong_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        fs::write(&path, "something else\n").unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::Checkpoint(_))
        ));
    }
}
