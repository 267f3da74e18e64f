//! Newline-delimited dataset records.
//!
//! One example per line:
//! `id<TAB>label<TAB>T<TAB>d_l,d_v,d_a<TAB>b64(x_l)<TAB>b64(x_v)<TAB>b64(x_a)`
//! where each payload is the little-endian f64 bytes of the sequence in
//! time-major row-major order. Labels are tagged `r:`/`c:` so files are
//! self-describing. Base64 keeps lines diffable and the byte round-trip
//! exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;

use crate::data::{Label, MultimodalExample};
use crate::error::{Error, Result};

fn encode_rows(rows: &[Vec<f64>]) -> String {
    let mut bytes = Vec::with_capacity(rows.len() * rows.first().map_or(0, |r| r.len()) * 8);
    for row in rows {
        for v in row {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    B64.encode(bytes)
}

fn decode_rows(field: &str, t: usize, d: usize, record: usize) -> Result<Vec<Vec<f64>>> {
    let bytes = B64.decode(field).map_err(|e| Error::Parse {
        record,
        msg: format!("bad base64 payload: {e}"),
    })?;
    if bytes.len() != t * d * 8 {
        return Err(Error::Parse {
            record,
            msg: format!(
                "payload holds {} bytes, expected {} for {t}x{d} f64 values",
                bytes.len(),
                t * d * 8
            ),
        });
    }
    let mut rows = Vec::with_capacity(t);
    let mut chunks = bytes.chunks_exact(8);
    for _ in 0..t {
        let mut row = Vec::with_capacity(d);
        for _ in 0..d {
            let chunk = chunks.next().expect("length checked above");
            row.push(f64::from_le_bytes(chunk.try_into().expect("8-byte chunk")));
        }
        rows.push(row);
    }
    Ok(rows)
}

fn format_label(label: &Label) -> String {
    match label {
        Label::Real(v) => format!("r:{v}"),
        Label::Class(c) => format!("c:{c}"),
    }
}

fn parse_label(field: &str, record: usize) -> Result<Label> {
    if let Some(rest) = field.strip_prefix("r:") {
        let v = rest.parse::<f64>().map_err(|e| Error::Parse {
            record,
            msg: format!("bad real label '{rest}': {e}"),
        })?;
        Ok(Label::Real(v))
    } else if let Some(rest) = field.strip_prefix("c:") {
        let c = rest.parse::<usize>().map_err(|e| Error::Parse {
            record,
            msg: format!("bad class label '{rest}': {e}"),
        })?;
        Ok(Label::Class(c))
    } else {
        Err(Error::Parse {
            record,
            msg: format!("label '{field}' lacks an r:/c: tag"),
        })
    }
}

pub fn save_dataset(path: impl AsRef<Path>, examples: &[MultimodalExample]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for ex in examples {
        let t = ex.seq_len()?;
        let (d_l, d_v, d_a) = ex.dims()?;
        writeln!(
            out,
            "{}\t{}\t{}\t{},{},{}\t{}\t{}\t{}",
            ex.id,
            format_label(&ex.label),
            t,
            d_l,
            d_v,
            d_a,
            encode_rows(&ex.x_l),
            encode_rows(&ex.x_v),
            encode_rows(&ex.x_a),
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<MultimodalExample>> {
    let reader = BufReader::new(File::open(path)?);
    let mut examples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let record = idx + 1;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 7 {
            return Err(Error::Parse {
                record,
                msg: format!("expected 7 tab-separated fields, found {}", fields.len()),
            });
        }
        let id = fields[0].to_string();
        let label = parse_label(fields[1], record)?;
        let t: usize = fields[2].parse().map_err(|e| Error::Parse {
            record,
            msg: format!("bad sequence length '{}': {e}", fields[2]),
        })?;
        let dims: Vec<usize> = fields[3]
            .split(',')
            .map(|s| {
                s.parse::<usize>().map_err(|e| Error::Parse {
                    record,
                    msg: format!("bad dimension '{s}': {e}"),
                })
            })
            .collect::<Result<_>>()?;
        if dims.len() != 3 {
            return Err(Error::Parse {
                record,
                msg: format!("expected 3 dimensions, found {}", dims.len()),
            });
        }
        examples.push(MultimodalExample {
            id,
            label,
            x_l: decode_rows(fields[4], t, dims[0], record)?,
            x_v: decode_rows(fields[5], t, dims[1], record)?,
            x_a: decode_rows(fields[6], t, dims[2], record)?,
        });
    }
    Ok(examples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, GenTask, GeneratorConfig, Interaction};
    use std::fs;

    fn sample() -> Vec<MultimodalExample> {
        gen_synthetic(&GeneratorConfig {
            n_examples: 5,
            seq_len: 3,
            d_l: 2,
            d_v: 3,
            d_a: 1,
            task: GenTask::Regression,
            interaction: Interaction::Synchronized,
            noise_sigma: 0.25,
            seed: 55,
        })
        .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.tsv");
        let examples = sample();
        save_dataset(&path, &examples).unwrap();
        let loaded = load_dataset(&path).unwrap();
        assert_eq!(examples, loaded);
    }

    #[test]
    fn class_labels_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.tsv");
        let mut examples = sample();
        for (i, ex) in examples.iter_mut().enumerate() {
            ex.label = Label::Class(i % 2);
        }
        save_dataset(&path, &examples).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), examples);
    }

    #[test]
    fn empty_dataset_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.tsv");
        save_dataset(&path, &[]).unwrap();
        assert!(load_dataset(&path).unwrap().is_empty());
    }

    #[test]
    fn truncated_record_reports_its_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.tsv");
        save_dataset(&path, &sample()).unwrap();
        let mut content = fs::read_to_string(&path).unwrap();
        let cut = content.len() - 20;
        content.truncate(cut);
        fs::write(&path, content).unwrap();
        match load_dataset(&path) {
            Err(Error::Parse { record, .. }) => assert_eq!(record, 5),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn same_seed_writes_identical_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.tsv");
        let b = dir.path().join("b.tsv");
        save_dataset(&a, &sample()).unwrap();
        save_dataset(&b, &sample()).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    }

    #[test]
    fn untagged_label_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.tsv");
        fs::write(&path, "x\t1.5\t1\t1,1,1\tAAAAAAAAAAA=\tAAAAAAAAAAA=\tAAAAAAAAAAA=\n")
            .unwrap();
        assert!(matches!(
            load_dataset(&path),
            Err(Error::Parse { record: 1, .. })
        ));
    }
}
