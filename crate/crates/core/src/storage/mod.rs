//! On-disk sorted runs.
//!
//! ```text
//! +---------------------------+ offset 0
//! | "LSMA" | u32 version = 1  |
//! +---------------------------+ offset 8
//! | data block 0              |  block_size bytes, crc32 in the last 4
//! | data block 1              |
//! | ...                       |
//! +---------------------------+ bloom_off
//! | bloom filter block        |  see BloomFilter::encode
//! +---------------------------+ fence_off
//! | u32 count                 |
//! | (u32 key_len, key,        |  one record per data block
//! |  u64 offset, u32 len)*    |
//! +---------------------------+
//! | u64 bloom_off             |
//! | u64 fence_off             |
//! | u32 crc32(offsets)        |
//! | "LSMZ"                    |
//! +---------------------------+
//! ```
//!
//! A data entry is `[u32 key_len][u32 val_len | 0xFFFFFFFF][u64 seq][key][value]`;
//! a zero `key_len` (or too little space left) ends the block.

mod manifest;
mod merge;
mod run;

pub use manifest::{Manifest, ManifestRun, MANIFEST_FILE};
pub use merge::{merge_entries, merge_runs, MergeIter};
pub use run::{write_run, FencePointers, FenceRecord, PointRead, RunHandle, RunIter, RunWriter};

pub const DEFAULT_BLOCK_SIZE: u32 = 4096;
pub const MIN_BLOCK_SIZE: u32 = 64;

pub(crate) const HEADER_MAGIC: &[u8; 4] = b"LSMA";
pub(crate) const FOOTER_MAGIC: &[u8; 4] = b"LSMZ";
pub(crate) const FORMAT_VERSION: u32 = 1;
pub(crate) const HEADER_LEN: u64 = 8;
pub(crate) const FOOTER_LEN: u64 = 24;
pub(crate) const ENTRY_HEADER_LEN: usize = 16;
pub(crate) const BLOCK_TRAILER_LEN: usize = 4;
pub(crate) const TOMBSTONE_LEN: u32 = u32::MAX;

/// Largest encoded entry (header, key and value) a block of `block_size` accepts.
pub fn max_entry_size(block_size: u32) -> usize {
    block_size as usize - 16
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub key: Vec<u8>,
    /// `None` is a tombstone.
    pub value: Option<Vec<u8>>,
    pub seq: u64,
}

impl Entry {
    pub fn put(key: impl Into<Vec<u8>>, value: impl Into<Vec<u8>>, seq: u64) -> Self {
        Entry {
            key: key.into(),
            value: Some(value.into()),
            seq,
        }
    }

    pub fn tombstone(key: impl Into<Vec<u8>>, seq: u64) -> Self {
        Entry {
            key: key.into(),
            value: None,
            seq,
        }
    }

    pub fn is_tombstone(&self) -> bool {
        self.value.is_none()
    }

    pub fn encoded_len(&self) -> usize {
        ENTRY_HEADER_LEN + self.key.len() + self.value.as_ref().map_or(0, Vec::len)
    }

    pub(crate) fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.key.len() as u32).to_le_bytes());
        let val_len = self.value.as_ref().map_or(TOMBSTONE_LEN, |v| v.len() as u32);
        out.extend_from_slice(&val_len.to_le_bytes());
        out.extend_from_slice(&self.seq.to_le_bytes());
        out.extend_from_slice(&self.key);
        if let Some(v) = &self.value {
            out.extend_from_slice(v);
        }
    }
}
