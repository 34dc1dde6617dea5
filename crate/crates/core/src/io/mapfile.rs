use std::path::Path;

use super::{io_error, ByteReader, FORMAT_VERSION};
use crate::error::{FormatError, Result};
use crate::map::{LinearMap, Provenance};
use crate::scalar::Real;

pub const MAP_MAGIC: &[u8; 4] = b"XMAP";

/// Raw contents of a map file. `metadata` is kept verbatim.
#[derive(Debug, Clone, PartialEq)]
pub struct MapFile {
    pub dim: u32,
    /// Row-major `dim × dim`.
    pub matrix: Vec<f64>,
    pub bias: Vec<f64>,
    pub metadata: String,
}

impl MapFile {
    pub fn from_map<T: Real>(map: &LinearMap<T>) -> Result<Self> {
        let dim = u32::try_from(map.dim())
            .map_err(|_| FormatError::InvalidHeader(format!("dim {} exceeds u32", map.dim())))?;
        let m = map.matrix();
        let matrix = (0..map.dim())
            .flat_map(|i| (0..map.dim()).map(move |j| m[(i, j)].to_f64_lossy()))
            .collect();
        Ok(Self {
            dim,
            matrix,
            bias: map.bias().iter().map(|v| v.to_f64_lossy()).collect(),
            metadata: map.provenance.to_json(),
        })
    }

    pub fn to_map<T: Real>(&self) -> Result<LinearMap<T>> {
        let provenance = if self.metadata.trim().is_empty() {
            Provenance::default()
        } else {
            Provenance::from_json(&self.metadata).map_err(|e| FormatError::InvalidMetadata(e.to_string()))?
        };
        let cast = |v: &[f64]| v.iter().map(|&x| T::lit(x)).collect::<Vec<_>>();
        Ok(
            LinearMap::from_row_slices(self.dim as usize, &cast(&self.matrix), &cast(&self.bias))?
                .with_provenance(provenance),
        )
    }
}

pub fn encode_map_file(file: &MapFile) -> Result<Vec<u8>> {
    let d = file.dim as usize;
    if file.matrix.len() != d * d || file.bias.len() != d {
        return Err(FormatError::InvalidHeader("payload does not match dim".into()).into());
    }
    let meta_len = u32::try_from(file.metadata.len())
        .map_err(|_| FormatError::InvalidHeader("metadata longer than u32".into()))?;
    let mut out = Vec::with_capacity(16 + 8 * (d * d + d) + 4 + file.metadata.len());
    out.extend_from_slice(MAP_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&file.dim.to_le_bytes());
    for v in file.matrix.iter().chain(&file.bias) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&meta_len.to_le_bytes());
    out.extend_from_slice(file.metadata.as_bytes());
    Ok(out)
}

pub fn decode_map_file(bytes: &[u8]) -> Result<MapFile> {
    let mut r = ByteReader::new(bytes);
    r.magic(MAP_MAGIC)?;
    r.version()?;
    let dim = r.u32()?;
    let d = dim as u64;
    let payload_len = d
        .checked_mul(d)
        .and_then(|x| x.checked_add(d))
        .and_then(|x| x.checked_mul(8));
    // Bound the payload by what the buffer holds before allocating.
    let payload_len = match payload_len {
        Some(len) if len <= r.remaining() as u64 => len as usize,
        other => {
            return Err(FormatError::Truncated {
                expected: other.map_or(u64::MAX, |len| len.saturating_add(r.position() as u64 + 4)),
                found: bytes.len() as u64,
            }
            .into())
        }
    };
    let payload: Vec<f64> = r
        .take(payload_len)?
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let meta_len = r.u32()?;
    r.expect_exact(meta_len as u64)?;
    let metadata = std::str::from_utf8(r.take(meta_len as usize)?)
        .map_err(|_| FormatError::InvalidUtf8("map metadata"))?
        .to_owned();
    let (matrix, bias) = payload.split_at((d * d) as usize);
    Ok(MapFile {
        dim,
        matrix: matrix.to_vec(),
        bias: bias.to_vec(),
        metadata,
    })
}

pub fn write_map_file(file: &MapFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_map_file(file)?).map_err(|e| io_error(path, e))?;
    Ok(())
}

pub fn read_map_file(path: impl AsRef<Path>) -> Result<MapFile> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| io_error(path, e))?;
    decode_map_file(&bytes)
}

pub fn write_map<T: Real>(map: &LinearMap<T>, path: impl AsRef<Path>) -> Result<()> {
    write_map_file(&MapFile::from_map(map)?, path)
}

pub fn read_map<T: Real>(path: impl AsRef<Path>) -> Result<LinearMap<T>> {
    read_map_file(path)?.to_map()
}
