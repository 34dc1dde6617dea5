use std::fs::File;
use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;

use super::{io_error, ByteReader, FORMAT_VERSION};
use crate::embedding::EmbeddingSet;
use crate::error::{Error, FormatError, Result};
use crate::scalar::Real;

pub const EMB_MAGIC: &[u8; 4] = b"XEMB";
const FIXED_HEADER_LEN: usize = 22;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbFileHeader {
    pub dim: u32,
    pub count: u64,
    pub lang: String,
}

impl EmbFileHeader {
    pub fn encoded_len(&self) -> usize {
        FIXED_HEADER_LEN + self.lang.len()
    }

    /// Payload bytes the header promises, if that fits in a `u64`.
    pub fn payload_len(&self) -> Option<u64> {
        self.count.checked_mul(self.dim as u64)?.checked_mul(4)
    }

    fn parse(r: &mut ByteReader<'_>) -> Result<Self, FormatError> {
        r.magic(EMB_MAGIC)?;
        r.version()?;
        let dim = r.u32()?;
        let count = r.u64()?;
        let lang_len = r.u16()? as usize;
        let lang = std::str::from_utf8(r.take(lang_len)?)
            .map_err(|_| FormatError::InvalidUtf8("language tag"))?
            .to_owned();
        Ok(Self { dim, count, lang })
    }

    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(EMB_MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.dim.to_le_bytes());
        out.extend_from_slice(&self.count.to_le_bytes());
        out.extend_from_slice(&(self.lang.len() as u16).to_le_bytes());
        out.extend_from_slice(self.lang.as_bytes());
    }
}

/// Serializes a set; coordinates are narrowed to `f32`.
pub fn encode_embeddings<T: Real>(set: &EmbeddingSet<T>) -> Result<Vec<u8>> {
    let dim =
        u32::try_from(set.dim()).map_err(|_| FormatError::InvalidHeader(format!("dim {} exceeds u32", set.dim())))?;
    if set.lang().len() > u16::MAX as usize {
        return Err(FormatError::InvalidHeader("language tag longer than 65535 bytes".into()).into());
    }
    let header = EmbFileHeader {
        dim,
        count: set.count() as u64,
        lang: set.lang().to_owned(),
    };
    let mut out = Vec::with_capacity(header.encoded_len() + 4 * set.count() * set.dim());
    header.write(&mut out);
    let data = set.data();
    for i in 0..set.count() {
        for j in 0..set.dim() {
            let v = data[(i, j)].to_f32().filter(|v| v.is_finite());
            let v = v.ok_or(Error::NonFinite { row: i, col: j })?;
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_embeddings<T: Real>(bytes: &[u8]) -> Result<EmbeddingSet<T>> {
    let mut r = ByteReader::new(bytes);
    let header = EmbFileHeader::parse(&mut r)?;
    let payload = header
        .payload_len()
        .ok_or_else(|| FormatError::InvalidHeader(format!("count {} × dim {} overflows", header.count, header.dim)))?;
    r.expect_exact(payload)?;
    let (count, dim) = (header.count as usize, header.dim as usize);
    if dim == 0 {
        return Err(FormatError::InvalidHeader("dim must be positive".into()).into());
    }
    let raw = r.take(payload as usize)?;
    let values: Vec<T> = raw
        .chunks_exact(4)
        .map(|c| T::lit(f32::from_le_bytes(c.try_into().expect("chunk of 4")) as f64))
        .collect();
    EmbeddingSet::new(header.lang, DMatrix::from_row_slice(count, dim, &values))
}

pub fn write_embeddings<T: Real>(set: &EmbeddingSet<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_embeddings(set)?;
    std::fs::write(path, bytes).map_err(|e| io_error(path, e))?;
    Ok(())
}

/// Reads an embedding file, checking the header against the file length
/// before the payload is read.
pub fn read_embeddings<T: Real>(path: impl AsRef<Path>) -> Result<EmbeddingSet<T>> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| io_error(path, e))?;
    let file_len = file.metadata().map_err(|e| io_error(path, e))?.len();

    let mut prefix = vec![0u8; FIXED_HEADER_LEN];
    let got = read_up_to(&mut file, &mut prefix).map_err(|e| io_error(path, e))?;
    prefix.truncate(got);
    if got == FIXED_HEADER_LEN {
        let lang_len = u16::from_le_bytes([prefix[20], prefix[21]]) as usize;
        let mut lang = vec![0u8; lang_len];
        let got = read_up_to(&mut file, &mut lang).map_err(|e| io_error(path, e))?;
        prefix.extend_from_slice(&lang[..got]);
    }
    // A short or malformed prefix is reported by the decoder itself.
    let mut r = ByteReader::new(&prefix);
    if let Ok(header) = EmbFileHeader::parse(&mut r) {
        let declared = header
            .payload_len()
            .and_then(|p| p.checked_add(header.encoded_len() as u64));
        match declared {
            Some(d) if d < file_len => {
                return Err(FormatError::SizeMismatch {
                    declared: d,
                    actual: file_len,
                }
                .into())
            }
            Some(d) if d > file_len => {
                return Err(FormatError::Truncated {
                    expected: d,
                    found: file_len,
                }
                .into())
            }
            _ => {}
        }
    }
    let mut bytes = prefix;
    file.read_to_end(&mut bytes).map_err(|e| io_error(path, e))?;
    decode_embeddings(&bytes)
}

fn read_up_to(file: &mut File, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match file.read(&mut buf[filled..])? {
            0 => break,
            n => filled += n,
        }
    }
    Ok(filled)
}
