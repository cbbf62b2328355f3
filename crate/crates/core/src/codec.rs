//! Versioned artifact files: a magic line, one line of JSON metadata, then
//! the payload as little-endian `f64`s.
//!
//! ```text
//! OFITRADE-ALPHA-MODEL v1\n
//! {"spec":...,"payload_len":1234}\n
//! <1234 * 8 bytes>
//! ```
//!
//! JSON floats use shortest round-trip formatting, so both halves restore
//! bit-exactly.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Envelope<H> {
    payload_len: usize,
    #[serde(flatten)]
    header: H,
}

pub fn encode<H: Serialize>(magic: &str, header: &H, payload: &[f64]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(payload.len() * 8 + 256);
    writeln!(out, "{magic}")?;
    serde_json::to_writer(
        &mut out,
        &Envelope {
            payload_len: payload.len(),
            header,
        },
    )?;
    out.push(b'\n');
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode<H: DeserializeOwned, R: Read>(
    magic: &str,
    reader: R,
    origin: &Path,
) -> Result<(H, Vec<f64>)> {
    let bad = |message: String| Error::Artifact {
        path: origin.to_path_buf(),
        message,
    };
    let mut r = BufReader::new(reader);
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim_end_matches('\n') != magic {
        return Err(bad(format!(
            "expected magic `{magic}`, found `{}`",
            line.trim_end()
        )));
    }
    line.clear();
    r.read_line(&mut line)?;
    let env: Envelope<H> =
        serde_json::from_str(line.trim_end_matches('\n')).map_err(|e| bad(e.to_string()))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != env.payload_len * 8 {
        return Err(bad(format!(
            "payload is {} bytes, header declares {} values",
            bytes.len(),
            env.payload_len
        )));
    }
    let payload = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((env.header, payload))
}

pub fn write_file<H: Serialize>(
    path: impl AsRef<Path>,
    magic: &str,
    header: &H,
    payload: &[f64],
) -> Result<()> {
    let bytes = encode(magic, header, payload)?;
    std::fs::write(path.as_ref(), bytes)?;
    Ok(())
}

pub fn read_file<H: DeserializeOwned>(path: impl AsRef<Path>, magic: &str) -> Result<(H, Vec<f64>)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    decode(magic, file, path)
}

/// Reads just the magic line, to dispatch on artifact kind.
pub fn peek_magic(path: impl AsRef<Path>) -> Result<String> {
    let mut r = BufReader::new(std::fs::File::open(path.as_ref())?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    Ok(line.trim_end().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Meta {
        name: String,
        scale: f64,
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let meta = Meta {
            name: "x".into(),
            scale: 0.1 + 0.2,
        };
        let payload = vec![f64::MIN_POSITIVE, -0.0, 1.0 / 3.0, 1e300];
        let bytes = encode("TEST v1", &meta, &payload).unwrap();
        let (m, p): (Meta, Vec<f64>) = decode("TEST v1", bytes.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(m, meta);
        assert_eq!(
            p.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            payload.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn wrong_magic_and_truncation() {
        let bytes = encode("TEST v1", &Meta { name: "a".into(), scale: 1.0 }, &[1.0, 2.0]).unwrap();
        assert!(decode::<Meta, _>("OTHER v1", bytes.as_slice(), Path::new("m")).is_err());
        let cut = &bytes[..bytes.len() - 3];
        assert!(decode::<Meta, _>("TEST v1", cut, Path::new("m")).is_err());
    }
}
