use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};

use super::{
    max_entry_size, Entry, BLOCK_TRAILER_LEN, ENTRY_HEADER_LEN, FOOTER_LEN, FOOTER_MAGIC,
    FORMAT_VERSION, HEADER_LEN, HEADER_MAGIC, MIN_BLOCK_SIZE, TOMBSTONE_LEN,
};
use crate::bloom::{BloomFilter, BloomParams, KeyDigest};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FenceRecord {
    pub first_key: Vec<u8>,
    pub offset: u64,
    pub len: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FencePointers {
    records: Vec<FenceRecord>,
}

impl FencePointers {
    pub fn records(&self) -> &[FenceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// The only block that may hold `key`: the last one whose first key is `<= key`.
    pub fn locate(&self, key: &[u8]) -> Option<&FenceRecord> {
        let idx = self.records.partition_point(|r| r.first_key.as_slice() <= key);
        idx.checked_sub(1).map(|i| &self.records[i])
    }

    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        for r in &self.records {
            out.extend_from_slice(&(r.first_key.len() as u32).to_le_bytes());
            out.extend_from_slice(&r.first_key);
            out.extend_from_slice(&r.offset.to_le_bytes());
            out.extend_from_slice(&r.len.to_le_bytes());
        }
        out
    }

    fn decode(bytes: &[u8]) -> Option<Self> {
        let mut cur = Cursor(bytes);
        let count = cur.u32()? as usize;
        let mut records = Vec::with_capacity(count.min(bytes.len() / 16));
        for _ in 0..count {
            let key_len = cur.u32()? as usize;
            let first_key = cur.take(key_len)?.to_vec();
            let offset = cur.u64()?;
            let len = cur.u32()?;
            records.push(FenceRecord {
                first_key,
                offset,
                len,
            });
        }
        if !cur.0.is_empty() {
            return None;
        }
        Some(FencePointers { records })
    }
}

struct Cursor<'a>(&'a [u8]);

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        if self.0.len() < n {
            return None;
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Some(head)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }
}

/// Streams sorted entries into a run file. The filter is sized by the caller
/// once the final entry count is known.
pub struct RunWriter {
    path: PathBuf,
    out: BufWriter<File>,
    block_size: u32,
    hash_seed: u64,
    block: Vec<u8>,
    block_first_key: Option<Vec<u8>>,
    offset: u64,
    fence: Vec<FenceRecord>,
    digests: Vec<KeyDigest>,
    last_key: Option<Vec<u8>>,
}

impl RunWriter {
    pub fn create(path: impl Into<PathBuf>, block_size: u32, hash_seed: u64) -> Result<Self> {
        if block_size < MIN_BLOCK_SIZE {
            return Err(Error::InvalidParams(format!(
                "block size {block_size} below minimum {MIN_BLOCK_SIZE}"
            )));
        }
        let path = path.into();
        let mut out = BufWriter::new(File::create(&path)?);
        out.write_all(HEADER_MAGIC)?;
        out.write_all(&FORMAT_VERSION.to_le_bytes())?;
        Ok(RunWriter {
            path,
            out,
            block_size,
            hash_seed,
            block: Vec::with_capacity(block_size as usize),
            block_first_key: None,
            offset: HEADER_LEN,
            fence: Vec::new(),
            digests: Vec::new(),
            last_key: None,
        })
    }

    pub fn entry_count(&self) -> u64 {
        self.digests.len() as u64
    }

    pub fn add(&mut self, entry: &Entry) -> Result<()> {
        if let Some(last) = &self.last_key {
            if entry.key <= *last {
                return Err(Error::UnsortedRun(self.digests.len()));
            }
        }
        let size = entry.encoded_len();
        let max = max_entry_size(self.block_size);
        if size > max {
            return Err(Error::EntryTooLarge { size, max });
        }
        if self.block.len() + size > self.block_size as usize - BLOCK_TRAILER_LEN {
            self.finish_block()?;
        }
        if self.block_first_key.is_none() {
            self.block_first_key = Some(entry.key.clone());
        }
        entry.encode_into(&mut self.block);
        self.digests.push(KeyDigest::new(&entry.key, self.hash_seed));
        self.last_key = Some(entry.key.clone());
        Ok(())
    }

    fn finish_block(&mut self) -> Result<()> {
        let Some(first_key) = self.block_first_key.take() else {
            return Ok(());
        };
        let payload = self.block_size as usize - BLOCK_TRAILER_LEN;
        self.block.resize(payload, 0);
        let crc = crc32fast::hash(&self.block);
        self.block.extend_from_slice(&crc.to_le_bytes());
        self.out.write_all(&self.block)?;
        self.fence.push(FenceRecord {
            first_key,
            offset: self.offset,
            len: self.block_size,
        });
        self.offset += self.block_size as u64;
        self.block.clear();
        Ok(())
    }

    /// Writes the filter, fence and footer. `size_filter` maps the entry count
    /// to the filter's `(m_bits, k_hashes)`; the hash seed is the writer's.
    pub fn finish(mut self, id: u64, size_filter: impl FnOnce(u64) -> (u32, u32)) -> Result<RunHandle> {
        if self.digests.is_empty() {
            drop(self.out);
            let _ = fs::remove_file(&self.path);
            return Err(Error::EmptyRun);
        }
        self.finish_block()?;
        let n = self.digests.len() as u64;
        let (m_bits, k_hashes) = size_filter(n);
        let mut bloom = BloomFilter::new(BloomParams::new(m_bits, k_hashes, self.hash_seed)?)?;
        for d in &self.digests {
            bloom.insert_digest(d);
        }
        let fence = FencePointers {
            records: std::mem::take(&mut self.fence),
        };

        let bloom_off = self.offset;
        let bloom_bytes = bloom.encode();
        self.out.write_all(&bloom_bytes)?;
        let fence_off = bloom_off + bloom_bytes.len() as u64;
        self.out.write_all(&fence.encode())?;
        let mut offsets = Vec::with_capacity(16);
        offsets.extend_from_slice(&bloom_off.to_le_bytes());
        offsets.extend_from_slice(&fence_off.to_le_bytes());
        self.out.write_all(&offsets)?;
        self.out.write_all(&crc32fast::hash(&offsets).to_le_bytes())?;
        self.out.write_all(FOOTER_MAGIC)?;
        self.out.flush()?;
        drop(self.out);

        let min_key = fence.records[0].first_key.clone();
        let max_key = self.last_key.take().expect("non-empty run");
        Ok(RunHandle {
            id,
            file: File::open(&self.path)?,
            path: self.path,
            block_size: self.block_size,
            fence,
            bloom,
            entry_count: n,
            min_key,
            max_key,
        })
    }
}

/// Writes `entries` (strictly sorted by key) as a complete run file.
pub fn write_run(
    path: impl Into<PathBuf>,
    id: u64,
    entries: &[Entry],
    block_size: u32,
    hash_seed: u64,
    size_filter: impl FnOnce(u64) -> (u32, u32),
) -> Result<RunHandle> {
    let mut w = RunWriter::create(path, block_size, hash_seed)?;
    for e in entries {
        w.add(e)?;
    }
    w.finish(id, size_filter)
}

/// Result of a point read: the entry if present and how many data blocks were read.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointRead {
    pub entry: Option<Entry>,
    pub pages_read: u32,
}

/// An immutable on-disk run with its in-memory fence pointers and filter.
#[derive(Debug)]
pub struct RunHandle {
    id: u64,
    path: PathBuf,
    file: File,
    block_size: u32,
    fence: FencePointers,
    bloom: BloomFilter,
    entry_count: u64,
    min_key: Vec<u8>,
    max_key: Vec<u8>,
}

impl RunHandle {
    /// Opens a run file, validating header, footer checksum, filter and fence.
    /// The entry count is not part of the file and is supplied by the manifest.
    pub fn open(path: impl Into<PathBuf>, id: u64, entry_count: u64) -> Result<Self> {
        let path = path.into();
        let file = File::open(&path)?;
        let len = file.metadata()?.len();
        let corrupt = |reason: &str| Error::corrupt(&path, reason);
        if len < HEADER_LEN + FOOTER_LEN {
            return Err(corrupt("file too short"));
        }
        let mut header = [0u8; HEADER_LEN as usize];
        file.read_exact_at(&mut header, 0)?;
        if &header[..4] != HEADER_MAGIC {
            return Err(corrupt("bad header magic"));
        }
        if u32::from_le_bytes(header[4..8].try_into().unwrap()) != FORMAT_VERSION {
            return Err(corrupt("unsupported format version"));
        }
        let mut footer = [0u8; FOOTER_LEN as usize];
        file.read_exact_at(&mut footer, len - FOOTER_LEN)?;
        if &footer[20..24] != FOOTER_MAGIC {
            return Err(corrupt("bad footer magic"));
        }
        let crc = u32::from_le_bytes(footer[16..20].try_into().unwrap());
        if crc32fast::hash(&footer[..16]) != crc {
            return Err(corrupt("footer checksum mismatch"));
        }
        let bloom_off = u64::from_le_bytes(footer[0..8].try_into().unwrap());
        let fence_off = u64::from_le_bytes(footer[8..16].try_into().unwrap());
        if !(HEADER_LEN <= bloom_off && bloom_off <= fence_off && fence_off <= len - FOOTER_LEN) {
            return Err(corrupt("footer offsets out of range"));
        }

        let mut bloom_bytes = vec![0u8; (fence_off - bloom_off) as usize];
        file.read_exact_at(&mut bloom_bytes, bloom_off)?;
        let mut bloom = BloomFilter::decode(&bloom_bytes).map_err(|e| corrupt(&e.to_string()))?;
        bloom.set_n_inserted(entry_count);

        let mut fence_bytes = vec![0u8; (len - FOOTER_LEN - fence_off) as usize];
        file.read_exact_at(&mut fence_bytes, fence_off)?;
        let fence = FencePointers::decode(&fence_bytes).ok_or_else(|| corrupt("malformed fence block"))?;
        let Some(first) = fence.records.first() else {
            return Err(corrupt("run has no data blocks"));
        };
        let block_size = first.len;
        let mut expected = HEADER_LEN;
        for r in &fence.records {
            if r.offset != expected || r.len != block_size {
                return Err(corrupt("fence records do not tile the data region"));
            }
            expected += r.len as u64;
        }
        if expected != bloom_off {
            return Err(corrupt("data region does not end at the filter block"));
        }

        let min_key = first.first_key.clone();
        let last = fence.records.last().unwrap().clone();
        let mut handle = RunHandle {
            id,
            min_key,
            max_key: Vec::new(),
            path,
            file,
            block_size,
            fence,
            bloom,
            entry_count,
        };
        let entries = handle.read_block(&last)?;
        handle.max_key = entries
            .last()
            .map(|e| e.key.clone())
            .ok_or_else(|| Error::corrupt(&handle.path, "empty trailing block"))?;
        Ok(handle)
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn file_name(&self) -> String {
        self.path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default()
    }

    pub fn block_size(&self) -> u32 {
        self.block_size
    }

    pub fn fence(&self) -> &FencePointers {
        &self.fence
    }

    pub fn bloom(&self) -> &BloomFilter {
        &self.bloom
    }

    pub fn entry_count(&self) -> u64 {
        self.entry_count
    }

    pub fn min_key(&self) -> &[u8] {
        &self.min_key
    }

    pub fn max_key(&self) -> &[u8] {
        &self.max_key
    }

    pub fn bloom_contains(&self, key: &[u8]) -> bool {
        self.bloom.contains(key)
    }

    /// Reads at most one data block: the fence pointers pick the only block
    /// that may hold `key`, and keys outside `[min_key, max_key]` read nothing.
    pub fn read_point(&self, key: &[u8]) -> Result<PointRead> {
        if key < self.min_key.as_slice() || key > self.max_key.as_slice() {
            return Ok(PointRead {
                entry: None,
                pages_read: 0,
            });
        }
        let record = self.fence.locate(key).expect("key >= min_key has a block");
        let entry = self.read_block(record)?.into_iter().find(|e| e.key == key);
        Ok(PointRead {
            entry,
            pages_read: 1,
        })
    }

    pub fn iter(&self) -> RunIter<'_> {
        RunIter {
            run: self,
            next_block: 0,
            pending: Vec::new().into_iter(),
            failed: false,
        }
    }

    pub fn read_block(&self, record: &FenceRecord) -> Result<Vec<Entry>> {
        let mut buf = vec![0u8; record.len as usize];
        self.file
            .read_exact_at(&mut buf, record.offset)
            .map_err(|e| Error::corrupt(&self.path, format!("short block read: {e}")))?;
        decode_block(&buf).map_err(|reason| Error::corrupt(&self.path, reason))
    }

    /// Deletes the backing file. The handle must not be used afterwards.
    pub fn remove_file(self) -> Result<()> {
        let path = self.path.clone();
        drop(self);
        fs::remove_file(path)?;
        Ok(())
    }
}

fn decode_block(block: &[u8]) -> std::result::Result<Vec<Entry>, String> {
    if block.len() < BLOCK_TRAILER_LEN + ENTRY_HEADER_LEN {
        return Err("block too small".into());
    }
    let (payload, trailer) = block.split_at(block.len() - BLOCK_TRAILER_LEN);
    if crc32fast::hash(payload) != u32::from_le_bytes(trailer.try_into().unwrap()) {
        return Err("data block checksum mismatch".into());
    }
    let mut cur = Cursor(payload);
    let mut entries = Vec::new();
    while cur.0.len() >= ENTRY_HEADER_LEN {
        let key_len = cur.u32().unwrap() as usize;
        if key_len == 0 {
            break;
        }
        let val_len = cur.u32().unwrap();
        let seq = cur.u64().unwrap();
        let key = cur.take(key_len).ok_or("entry key overruns block")?.to_vec();
        let value = if val_len == TOMBSTONE_LEN {
            None
        } else {
            Some(cur.take(val_len as usize).ok_or("entry value overruns block")?.to_vec())
        };
        entries.push(Entry { key, value, seq });
    }
    Ok(entries)
}

/// Sequential scan of a run in key order.
pub struct RunIter<'a> {
    run: &'a RunHandle,
    next_block: usize,
    pending: std::vec::IntoIter<Entry>,
    failed: bool,
}

impl Iterator for RunIter<'_> {
    type Item = Result<Entry>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if self.failed {
                return None;
            }
            if let Some(e) = self.pending.next() {
                return Some(Ok(e));
            }
            let record = self.run.fence.records.get(self.next_block)?;
            self.next_block += 1;
            match self.run.read_block(record) {
                Ok(entries) => self.pending = entries.into_iter(),
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            }
        }
    }
}
