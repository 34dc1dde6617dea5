//! On-disk formats.
//!
//! Both binary formats are little-endian throughout.
//!
//! Embedding file (`XEMB`):
//!
//! ```text
//! offset  size       field
//! 0       4          magic "XEMB"
//! 4       4          version (u32) = 1
//! 8       4          dim (u32)
//! 12      8          count (u64)
//! 20      2          lang_len (u16)
//! 22      lang_len   lang (UTF-8)
//! ...     4·count·dim  f32 payload, row-major
//! ```
//!
//! Map file (`XMAP`):
//!
//! ```text
//! offset  size       field
//! 0       4          magic "XMAP"
//! 4       4          version (u32) = 1
//! 8       4          dim (u32)
//! 12      8·dim²     A (f64, row-major)
//! ...     8·dim      b (f64)
//! ...     4          metadata_len (u32)
//! ...     metadata_len  metadata (UTF-8 JSON)
//! ```
//!
//! Any bytes after the declared end are rejected as a size mismatch.

mod embfile;
mod mapfile;
mod tsv;

pub use embfile::{decode_embeddings, encode_embeddings, read_embeddings, write_embeddings, EmbFileHeader};
pub use mapfile::{decode_map_file, encode_map_file, read_map, read_map_file, write_map, write_map_file, MapFile};
pub use tsv::{parse_pair_tsv, read_pair_tsv, TSV_HEADER};

use std::path::Path;

use crate::error::FormatError;

pub const FORMAT_VERSION: u32 = 1;

pub(crate) fn io_error(path: &Path, source: std::io::Error) -> FormatError {
    FormatError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Cursor over a byte buffer that reports truncation against the total
/// length the caller expects.
pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub(crate) fn position(&self) -> usize {
        self.pos
    }

    pub(crate) fn take(&mut self, len: usize) -> Result<&'a [u8], FormatError> {
        if self.remaining() < len {
            return Err(FormatError::Truncated {
                expected: (self.pos + len) as u64,
                found: self.bytes.len() as u64,
            });
        }
        let out = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    pub(crate) fn array<const N: usize>(&mut self) -> Result<[u8; N], FormatError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    pub(crate) fn u16(&mut self) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    pub(crate) fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub(crate) fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub(crate) fn magic(&mut self, expected: &[u8; 4]) -> Result<(), FormatError> {
        let found = self.array::<4>()?;
        if &found != expected {
            return Err(FormatError::BadMagic {
                expected: *expected,
                found,
            });
        }
        Ok(())
    }

    pub(crate) fn version(&mut self) -> Result<(), FormatError> {
        let found = self.u32()?;
        if found != FORMAT_VERSION {
            return Err(FormatError::VersionMismatch {
                expected: FORMAT_VERSION,
                found,
            });
        }
        Ok(())
    }

    /// Checks that exactly `len` bytes remain.
    pub(crate) fn expect_exact(&self, len: u64) -> Result<(), FormatError> {
        let declared = self.pos as u64 + len;
        let actual = self.bytes.len() as u64;
        if actual < declared {
            Err(FormatError::Truncated {
                expected: declared,
                found: actual,
            })
        } else if actual > declared {
            Err(FormatError::SizeMismatch { declared, actual })
        } else {
            Ok(())
        }
    }
}
