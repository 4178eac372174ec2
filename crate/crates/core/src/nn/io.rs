//! `.npm` model files: two ASCII header lines followed by the flat
//! little-endian `f64` payload in canonical parameter order.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::lstm::Peephole;
use super::model::{param_count, Hyper, ModelParams};

pub const MODEL_MAGIC: &str = "NEURALPDE-MODEL/1";

pub fn write_model<W: Write>(p: &ModelParams, mut out: W) -> Result<()> {
    let h = p.hyper;
    writeln!(out, "{MODEL_MAGIC}")?;
    writeln!(
        out,
        "d={} n_in={} m_out={} peephole={} count={}",
        h.hidden,
        h.n_in,
        h.m_out,
        h.peephole.as_str(),
        param_count(&h)
    )?;
    let mut buf = Vec::with_capacity(p.len() * 8);
    for block in p.blocks() {
        for v in block {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    out.flush()?;
    Ok(())
}

pub fn read_model<R: Read>(input: R) -> Result<ModelParams> {
    let mut reader = BufReader::new(input);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let magic = line.trim_end_matches('\n');
    if magic != MODEL_MAGIC {
        return Err(if magic.starts_with("NEURALPDE-MODEL/") {
            Error::Format(format!(
                "unsupported model format version '{magic}' (expected {MODEL_MAGIC})"
            ))
        } else {
            Error::Format(format!("not a model file (magic '{magic}')"))
        });
    }
    line.clear();
    reader.read_line(&mut line)?;
    let mut hidden = None;
    let mut n_in = None;
    let mut m_out = None;
    let mut peephole = None;
    let mut count = None;
    for field in line.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("malformed header field '{field}'")))?;
        let parse = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| Error::Format(format!("bad integer for '{key}': '{v}'")))
        };
        match key {
            "d" => hidden = Some(parse(value)?),
            "n_in" => n_in = Some(parse(value)?),
            "m_out" => m_out = Some(parse(value)?),
            "count" => count = Some(parse(value)?),
            "peephole" => {
                peephole = Some(
                    Peephole::parse(value)
                        .ok_or_else(|| Error::Format(format!("unknown peephole '{value}'")))?,
                )
            }
            other => return Err(Error::Format(format!("unknown header key '{other}'"))),
        }
    }
    let missing = |k: &str| Error::Format(format!("model header missing '{k}'"));
    let hyper = Hyper {
        hidden: hidden.ok_or_else(|| missing("d"))?,
        n_in: n_in.ok_or_else(|| missing("n_in"))?,
        m_out: m_out.ok_or_else(|| missing("m_out"))?,
        peephole: peephole.ok_or_else(|| missing("peephole"))?,
    };
    hyper
        .validate()
        .map_err(|e| Error::Format(format!("model header: {e}")))?;
    let count = count.ok_or_else(|| missing("count"))?;
    let expected = param_count(&hyper);
    if count != expected {
        return Err(Error::Format(format!(
            "header count {count} disagrees with {expected} parameters implied by d={} n_in={} m_out={}",
            hyper.hidden, hyper.n_in, hyper.m_out
        )));
    }
    let mut payload = Vec::new();
    reader.read_to_end(&mut payload)?;
    if payload.len() != expected * 8 {
        return Err(Error::Format(format!(
            "payload holds {} bytes, expected {} ({} parameters)",
            payload.len(),
            expected * 8,
            expected
        )));
    }
    let flat: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    ModelParams::from_flat(hyper, &flat)
}

pub fn save_model(p: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_model(p, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelParams> {
    read_model(fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init_params;

    fn bytes_of(p: &ModelParams) -> Vec<u8> {
        let mut buf = Vec::new();
        write_model(p, &mut buf).unwrap();
        buf
    }

    #[test]
    fn round_trip_is_bitwise() {
        let p = init_params(Hyper::new(4, 3, 5), 17).unwrap();
        let q = read_model(bytes_of(&p).as_slice()).unwrap();
        assert_eq!(p.to_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                   q.to_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(p, q);
    }

    #[test]
    fn header_is_ascii_and_documented() {
        let p = init_params(Hyper::default(), 0).unwrap();
        let buf = bytes_of(&p);
        let text = String::from_utf8_lossy(&buf[..80]);
        assert!(text.starts_with("NEURALPDE-MODEL/1\nd=48 n_in=30 m_out=10 peephole=diag count=87562\n"));
    }

    #[test]
    fn truncated_payload_rejected() {
        let p = init_params(Hyper::new(2, 2, 2), 1).unwrap();
        let mut buf = bytes_of(&p);
        buf.truncate(buf.len() - 8);
        let err = read_model(buf.as_slice()).unwrap_err();
        assert!(err.to_string().contains("payload"), "{err}");
    }

    #[test]
    fn count_disagreeing_with_hyper_rejected() {
        let p = init_params(Hyper::new(2, 2, 2), 1).unwrap();
        let buf = bytes_of(&p);
        let text = String::from_utf8_lossy(&buf).replacen("m_out=2", "m_out=3", 1);
        let err = read_model(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("disagrees"), "{err}");
    }

    #[test]
    fn version_mismatch_rejected() {
        let p = init_params(Hyper::new(2, 2, 2), 1).unwrap();
        let mut buf = bytes_of(&p);
        let pos = MODEL_MAGIC.len() - 1;
        buf[pos] = b'2';
        let err = read_model(buf.as_slice()).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
    }
}
