//! Checkpoint file format.
//!
//! ```text
//! "GZEVO1"                 6 magic bytes
//! u32 LE                   format version
//! u64 LE                   manifest length in bytes
//! manifest                 UTF-8, one line per tensor: name <TAB> d0,d1,... <TAB> byte offset
//! payload                  little-endian f32 values, tensors back to back
//! ```
//!
//! Offsets are relative to the start of the payload.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::params::ParameterSet;
use super::tensor::Tensor;

pub const MAGIC: &[u8; 6] = b"GZEVO1";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode(params: &ParameterSet<f32>) -> Vec<u8> {
    let mut manifest = String::new();
    let mut offset = 0usize;
    for (name, t) in params.iter() {
        let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
        manifest.push_str(&format!("{name}\t{}\t{offset}\n", dims.join(",")));
        offset += t.len() * 4;
    }
    let mut out = Vec::with_capacity(18 + manifest.len() + offset);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
    out.extend_from_slice(manifest.as_bytes());
    for (_, t) in params.iter() {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<ParameterSet<f32>> {
    let err = |m: &str| Error::Checkpoint(m.to_string());
    if bytes.len() < 18 || &bytes[..6] != MAGIC {
        return Err(err("bad magic bytes"));
    }
    let version = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let manifest_len = u64::from_le_bytes(bytes[10..18].try_into().expect("8 bytes")) as usize;
    let manifest_end = 18usize
        .checked_add(manifest_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| err("manifest length exceeds file"))?;
    let manifest = std::str::from_utf8(&bytes[18..manifest_end])
        .map_err(|_| err("manifest is not UTF-8"))?;
    let payload = &bytes[manifest_end..];

    let mut params = ParameterSet::new();
    let mut expected_offset = 0usize;
    for line in manifest.lines() {
        let fields: Vec<&str> = line.split('\t').collect();
        let [name, dims, offset] = fields[..] else {
            return Err(Error::Checkpoint(format!("malformed manifest line `{line}`")));
        };
        let shape = dims
            .split(',')
            .map(|d| d.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::Checkpoint(format!("bad shape `{dims}` for `{name}`")))?;
        if shape.contains(&0) {
            return Err(Error::Checkpoint(format!("zero dimension in `{name}`")));
        }
        let offset: usize = offset
            .parse()
            .map_err(|_| Error::Checkpoint(format!("bad offset for `{name}`")))?;
        if offset != expected_offset {
            return Err(Error::Checkpoint(format!("unexpected offset for `{name}`")));
        }
        let n: usize = shape.iter().product();
        let end = offset + n * 4;
        let chunk = payload
            .get(offset..end)
            .ok_or_else(|| Error::Checkpoint(format!("payload truncated at `{name}`")))?;
        let data = chunk
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        params.insert(name, Tensor::from_vec(&shape, data)?)?;
        expected_offset = end;
    }
    if expected_offset != payload.len() {
        return Err(err("trailing bytes after payload"));
    }
    Ok(params)
}

pub fn save(path: &Path, params: &ParameterSet<f32>) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(params))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<ParameterSet<f32>> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::{EncoderConfig, Network};

    #[test]
    fn round_trip() {
        let net = Network::encoder(&EncoderConfig::desk(16)).unwrap();
        let p = net.init_params::<f32>(9).prefixed("online.encoder.");
        let back = decode(&encode(&p)).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn rejects_bad_magic_and_version() {
        let net = Network::encoder(&EncoderConfig::desk(16)).unwrap();
        let mut bytes = encode(&net.init_params(1));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(Error::Checkpoint(_))));
        bytes[6] = 2;
        assert!(matches!(decode(&bytes), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn rejects_truncation() {
        let net = Network::encoder(&EncoderConfig::desk(16)).unwrap();
        let bytes = encode(&net.init_params(1));
        assert!(decode(&bytes[..bytes.len() - 4]).is_err());
    }
}
