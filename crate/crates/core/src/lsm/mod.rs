//! Leveled LSM store: a sorted memtable, one run per disk level once
//! compaction settles, and a Bloom filter in front of every run.

mod cost;
mod hardened;
mod params;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;

pub use cost::{LsmStats, ProbeScenario, RunStats, DISK_PAGE_COST, MEMORY_PAGE_COST};
pub use hardened::{HardenedLsm, KvStore, Store};
pub use params::{PublicParams, DEFAULT_HASH_SEED};

use crate::error::{Error, Result};
use crate::storage::{
    max_entry_size, write_run, Entry, Manifest, ManifestRun, MergeIter, RunHandle, RunWriter,
};

/// Monotone I/O counters. Atomic so lookups can take `&self`.
#[derive(Debug, Default)]
pub struct IoStats {
    bf_probes: AtomicU64,
    bf_false_positives: AtomicU64,
    run_probes: AtomicU64,
    pages_read: AtomicU64,
    memtable_probes: AtomicU64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct IoSnapshot {
    pub bf_probes: u64,
    pub bf_false_positives: u64,
    pub run_probes: u64,
    pub pages_read: u64,
    pub memtable_probes: u64,
}

impl IoStats {
    pub fn snapshot(&self) -> IoSnapshot {
        IoSnapshot {
            bf_probes: self.bf_probes.load(Ordering::Relaxed),
            bf_false_positives: self.bf_false_positives.load(Ordering::Relaxed),
            run_probes: self.run_probes.load(Ordering::Relaxed),
            pages_read: self.pages_read.load(Ordering::Relaxed),
            memtable_probes: self.memtable_probes.load(Ordering::Relaxed),
        }
    }

    fn bump(counter: &AtomicU64, by: u64) {
        counter.fetch_add(by, Ordering::Relaxed);
    }
}

impl IoSnapshot {
    /// Counter growth since `earlier`.
    pub fn since(&self, earlier: &IoSnapshot) -> IoSnapshot {
        IoSnapshot {
            bf_probes: self.bf_probes - earlier.bf_probes,
            bf_false_positives: self.bf_false_positives - earlier.bf_false_positives,
            run_probes: self.run_probes - earlier.run_probes,
            pages_read: self.pages_read - earlier.pages_read,
            memtable_probes: self.memtable_probes - earlier.memtable_probes,
        }
    }
}

/// Position of a run: `level` is 1-based, `index` counts from the newest run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct RunLocation {
    pub level: usize,
    pub index: usize,
}

/// Where an entry was found by a full scan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Source {
    Memtable,
    Run(RunLocation),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProbeStep {
    pub location: RunLocation,
    pub run_id: u64,
    pub bf_positive: bool,
    pub pages_read: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Outcome {
    Found(Vec<u8>),
    ZeroResult,
}

/// Probe-by-probe record of one lookup, in probe order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GetTrace {
    /// The memtable held an entry (value or tombstone) for the key.
    pub memtable_hit: bool,
    pub steps: Vec<ProbeStep>,
    /// The lookup stopped at a tombstone rather than running out of runs.
    pub deleted: bool,
    pub outcome: Outcome,
}

impl GetTrace {
    pub fn value(self) -> Option<Vec<u8>> {
        match self.outcome {
            Outcome::Found(v) => Some(v),
            Outcome::ZeroResult => None,
        }
    }

    pub fn pages_read(&self) -> u64 {
        self.steps.iter().map(|s| s.pages_read as u64).sum()
    }
}

#[derive(Clone, Debug)]
struct MemEntry {
    value: Option<Vec<u8>>,
    seq: u64,
}

pub struct Lsm {
    dir: PathBuf,
    params: PublicParams,
    memtable: BTreeMap<Vec<u8>, MemEntry>,
    memtable_bytes: usize,
    /// `levels[0]` is L1; each level lists runs newest first.
    levels: Vec<Vec<RunHandle>>,
    next_sequence: u64,
    next_run_id: u64,
    io: IoStats,
}

impl std::fmt::Debug for Lsm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Lsm")
            .field("dir", &self.dir)
            .field("memtable_entries", &self.memtable.len())
            .field("runs", &self.run_count())
            .finish()
    }
}

impl Lsm {
    /// Opens the store in `dir`, creating it when no manifest exists. An
    /// existing store keeps its persisted parameters; `params` only has to
    /// agree on whether the store is hardened.
    pub fn open(dir: impl AsRef<Path>, params: PublicParams) -> Result<Self> {
        params.validate()?;
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let Some(manifest) = Manifest::<PublicParams>::load(&dir)? else {
            let lsm = Lsm {
                dir,
                params,
                memtable: BTreeMap::new(),
                memtable_bytes: 0,
                levels: Vec::new(),
                next_sequence: 0,
                next_run_id: 1,
                io: IoStats::default(),
            };
            lsm.persist()?;
            return Ok(lsm);
        };
        let open_failed = |reason: String| Error::OpenFailed {
            path: dir.clone(),
            reason,
        };
        manifest
            .params
            .validate()
            .map_err(|e| open_failed(format!("stored parameters: {e}")))?;
        if manifest.params.hardened != params.hardened {
            return Err(open_failed(format!(
                "store was created with hardened={}, opened with hardened={}",
                manifest.params.hardened, params.hardened
            )));
        }
        let mut levels = Vec::with_capacity(manifest.levels.len());
        for level in &manifest.levels {
            let mut runs = Vec::with_capacity(level.len());
            for r in level {
                runs.push(RunHandle::open(dir.join(&r.file), r.id, r.entries)?);
            }
            levels.push(runs);
        }
        Ok(Lsm {
            dir,
            params: manifest.params,
            memtable: BTreeMap::new(),
            memtable_bytes: 0,
            levels,
            next_sequence: manifest.next_sequence,
            next_run_id: manifest.next_run_id,
            io: IoStats::default(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn params(&self) -> &PublicParams {
        &self.params
    }

    pub fn next_sequence(&self) -> u64 {
        self.next_sequence
    }

    pub fn io(&self) -> IoSnapshot {
        self.io.snapshot()
    }

    pub fn memtable_len(&self) -> usize {
        self.memtable.len()
    }

    pub fn levels(&self) -> &[Vec<RunHandle>] {
        &self.levels
    }

    pub fn run_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    /// All runs in probe order.
    pub fn runs(&self) -> impl Iterator<Item = (RunLocation, &RunHandle)> {
        self.levels.iter().enumerate().flat_map(|(l, runs)| {
            runs.iter().enumerate().map(move |(i, r)| {
                (
                    RunLocation {
                        level: l + 1,
                        index: i,
                    },
                    r,
                )
            })
        })
    }

    pub fn run(&self, loc: RunLocation) -> Result<&RunHandle> {
        loc.level
            .checked_sub(1)
            .and_then(|l| self.levels.get(l))
            .and_then(|runs| runs.get(loc.index))
            .ok_or(Error::UnknownRun {
                level: loc.level,
                index: loc.index,
            })
    }

    pub fn put(&mut self, key: &[u8], value: &[u8]) -> Result<()> {
        self.write(key, Some(value.to_vec()))
    }

    pub fn delete(&mut self, key: &[u8]) -> Result<()> {
        self.write(key, None)
    }

    fn write(&mut self, key: &[u8], value: Option<Vec<u8>>) -> Result<()> {
        if key.is_empty() {
            return Err(Error::EmptyKey);
        }
        let seq = self.next_sequence;
        let entry = Entry {
            key: key.to_vec(),
            value,
            seq,
        };
        let size = entry.encoded_len();
        let max = max_entry_size(self.params.block_size);
        if size > max {
            return Err(Error::EntryTooLarge { size, max });
        }
        self.next_sequence += 1;
        let old = self.memtable.insert(
            entry.key,
            MemEntry {
                value: entry.value,
                seq,
            },
        );
        self.memtable_bytes += size;
        if let Some(old) = old {
            let old_size = Entry {
                key: key.to_vec(),
                value: old.value,
                seq: old.seq,
            }
            .encoded_len();
            self.memtable_bytes -= old_size;
        }
        let full = self.memtable.len() >= self.params.memtable_capacity
            || self
                .params
                .memtable_bytes
                .is_some_and(|b| self.memtable_bytes >= b);
        if full {
            self.flush()?;
        }
        Ok(())
    }

    pub fn get(&self, key: &[u8]) -> Result<Option<Vec<u8>>> {
        Ok(self.get_traced(key)?.value())
    }

    /// Memtable first, then every run in probe order. A run's page is read
    /// only when its filter answers positive; the first entry found wins.
    pub fn get_traced(&self, key: &[u8]) -> Result<GetTrace> {
        IoStats::bump(&self.io.memtable_probes, 1);
        if let Some(e) = self.memtable.get(key) {
            return Ok(GetTrace {
                memtable_hit: true,
                steps: Vec::new(),
                deleted: e.value.is_none(),
                outcome: e.value.clone().map_or(Outcome::ZeroResult, Outcome::Found),
            });
        }
        let mut steps = Vec::new();
        for (location, run) in self.runs() {
            IoStats::bump(&self.io.bf_probes, 1);
            let positive = run.bloom_contains(key);
            let mut step = ProbeStep {
                location,
                run_id: run.id(),
                bf_positive: positive,
                pages_read: 0,
            };
            if !positive {
                steps.push(step);
                continue;
            }
            IoStats::bump(&self.io.run_probes, 1);
            let read = run.read_point(key)?;
            IoStats::bump(&self.io.pages_read, read.pages_read as u64);
            step.pages_read = read.pages_read;
            steps.push(step);
            match read.entry {
                Some(e) => {
                    return Ok(GetTrace {
                        memtable_hit: false,
                        steps,
                        deleted: e.value.is_none(),
                        outcome: e.value.map_or(Outcome::ZeroResult, Outcome::Found),
                    })
                }
                None => IoStats::bump(&self.io.bf_false_positives, 1),
            }
        }
        Ok(GetTrace {
            memtable_hit: false,
            steps,
            deleted: false,
            outcome: Outcome::ZeroResult,
        })
    }

    /// The O_Q predicate: does any run's filter answer positive for `key`?
    pub fn any_filter_positive(&self, key: &[u8]) -> bool {
        self.runs().any(|(_, r)| r.bloom_contains(key))
    }

    /// Writes the memtable as a new L1 run and cascades compaction while any
    /// level exceeds its capacity.
    pub fn flush(&mut self) -> Result<()> {
        if self.memtable.is_empty() {
            return Ok(());
        }
        let bottom = self.levels.iter().all(Vec::is_empty);
        let entries: Vec<Entry> = std::mem::take(&mut self.memtable)
            .into_iter()
            .filter(|(_, e)| !(bottom && e.value.is_none()))
            .map(|(key, e)| Entry {
                key,
                value: e.value,
                seq: e.seq,
            })
            .collect();
        self.memtable_bytes = 0;
        if !entries.is_empty() {
            let id = self.alloc_run_id();
            let params = &self.params;
            let run = write_run(
                self.dir.join(run_file_name(id)),
                id,
                &entries,
                params.block_size,
                params.hash_seed,
                |n| params.filter_size(n),
            )?;
            if self.levels.is_empty() {
                self.levels.push(Vec::new());
            }
            self.levels[0].insert(0, run);
        }

        let mut obsolete = Vec::new();
        if self.levels.first().is_some_and(|l| l.len() > 1) {
            obsolete.extend(self.compact(0, 0)?);
        }
        let mut i = 0;
        while i < self.levels.len() {
            if self.level_entries(i) > self.params.level_capacity(i + 1) {
                obsolete.extend(self.compact(i, i + 1)?);
            }
            i += 1;
        }
        self.persist()?;
        for run in obsolete {
            run.remove_file()?;
        }
        Ok(())
    }

    /// Flushes the memtable and rewrites the manifest. Unflushed writes are
    /// lost if the store is dropped without saving.
    pub fn save(&mut self) -> Result<()> {
        self.flush()?;
        self.persist()
    }

    /// Merges every level into a single run at the deepest level, rewriting
    /// filters from live keys only.
    pub fn compact_all(&mut self) -> Result<()> {
        self.flush()?;
        if self.run_count() == 0 {
            return Ok(());
        }
        let deepest = self.levels.iter().rposition(|l| !l.is_empty()).unwrap();
        let obsolete = self.compact(0, deepest)?;
        self.persist()?;
        for run in obsolete {
            run.remove_file()?;
        }
        Ok(())
    }

    fn level_entries(&self, level: usize) -> u64 {
        self.levels[level].iter().map(RunHandle::entry_count).sum()
    }

    fn alloc_run_id(&mut self) -> u64 {
        let id = self.next_run_id;
        self.next_run_id += 1;
        id
    }

    /// Merges all runs of levels `from..=to` into one run placed at `to`.
    /// Returns the replaced runs, whose files must outlive the next manifest write.
    fn compact(&mut self, from: usize, to: usize) -> Result<Vec<RunHandle>> {
        while self.levels.len() <= to {
            self.levels.push(Vec::new());
        }
        let drop_tombstones = self.levels[to + 1..].iter().all(Vec::is_empty);
        let id = self.alloc_run_id();
        let path = self.dir.join(run_file_name(id));
        let merged = (|| {
            let sources = self.levels[from..=to]
                .iter()
                .flatten()
                .map(RunHandle::iter)
                .collect();
            let mut w = RunWriter::create(&path, self.params.block_size, self.params.hash_seed)?;
            for e in MergeIter::new(sources, drop_tombstones) {
                w.add(&e?)?;
            }
            match w.finish(id, |n| self.params.filter_size(n)) {
                Ok(run) => Ok(Some(run)),
                Err(Error::EmptyRun) => Ok(None),
                Err(e) => Err(e),
            }
        })();
        let merged = match merged {
            Ok(m) => m,
            Err(e) => {
                let _ = fs::remove_file(&path);
                return Err(e);
            }
        };
        let mut obsolete = Vec::new();
        for level in &mut self.levels[from..=to] {
            obsolete.append(level);
        }
        if let Some(run) = merged {
            self.levels[to].push(run);
        }
        Ok(obsolete)
    }

    fn persist(&self) -> Result<()> {
        let keep = self
            .levels
            .iter()
            .rposition(|l| !l.is_empty())
            .map_or(0, |i| i + 1);
        let mut m = Manifest::new(self.params.clone());
        m.levels = self.levels[..keep]
            .iter()
            .map(|runs| {
                runs.iter()
                    .map(|r| ManifestRun {
                        file: r.file_name(),
                        id: r.id(),
                        entries: r.entry_count(),
                    })
                    .collect()
            })
            .collect();
        m.next_sequence = self.next_sequence;
        m.next_run_id = self.next_run_id;
        m.store(&self.dir)
    }

    /// Every stored entry, tombstones included, tagged with where it lives.
    pub fn all_entries(&self) -> Result<Vec<(Source, Entry)>> {
        let mut out: Vec<(Source, Entry)> = self
            .memtable
            .iter()
            .map(|(k, e)| {
                (
                    Source::Memtable,
                    Entry {
                        key: k.clone(),
                        value: e.value.clone(),
                        seq: e.seq,
                    },
                )
            })
            .collect();
        for (loc, run) in self.runs() {
            for e in run.iter() {
                out.push((Source::Run(loc), e?));
            }
        }
        Ok(out)
    }

    /// The visible key-value pairs in key order.
    pub fn live_entries(&self) -> Result<Vec<(Vec<u8>, Vec<u8>)>> {
        let mem: Vec<Entry> = self
            .memtable
            .iter()
            .map(|(k, e)| Entry {
                key: k.clone(),
                value: e.value.clone(),
                seq: e.seq,
            })
            .collect();
        let mut sources: Vec<Box<dyn Iterator<Item = Result<Entry>> + '_>> =
            vec![Box::new(mem.into_iter().map(Ok))];
        for (_, run) in self.runs() {
            sources.push(Box::new(run.iter()));
        }
        MergeIter::new(sources, true)
            .map(|e| e.map(|e| (e.key, e.value.expect("tombstones dropped"))))
            .collect()
    }
}

pub(crate) fn run_file_name(id: u64) -> String {
    format!("run-{id:08}.sst")
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use tempfile::TempDir;

    use super::*;

    fn small(memtable: usize) -> PublicParams {
        PublicParams {
            memtable_capacity: memtable,
            size_ratio: 2,
            block_size: 256,
            ..PublicParams::default()
        }
    }

    #[test]
    fn fresh_store_is_empty() {
        let dir = TempDir::new().unwrap();
        let lsm = Lsm::open(dir.path(), small(4)).unwrap();
        assert_eq!(lsm.next_sequence(), 0);
        let t = lsm.get_traced(b"x").unwrap();
        assert_eq!(t.outcome, Outcome::ZeroResult);
        assert_eq!(t.pages_read(), 0);
        assert!(dir.path().join(crate::storage::MANIFEST_FILE).exists());
    }

    #[test]
    fn basic_semantics() {
        let dir = TempDir::new().unwrap();
        let mut lsm = Lsm::open(dir.path(), small(4)).unwrap();
        lsm.put(b"a", b"1").unwrap();
        assert_eq!(lsm.get(b"a").unwrap(), Some(b"1".to_vec()));
        lsm.put(b"a", b"2").unwrap();
        assert_eq!(lsm.get(b"a").unwrap(), Some(b"2".to_vec()));
        lsm.delete(b"a").unwrap();
        assert_eq!(lsm.get(b"a").unwrap(), None);
        assert!(matches!(lsm.put(b"", b"x"), Err(Error::EmptyKey)));
        assert!(matches!(
            lsm.put(b"k", &[0u8; 300]),
            Err(Error::EntryTooLarge { .. })
        ));
    }

    #[test]
    fn leveling_keeps_one_run_per_level() {
        let dir = TempDir::new().unwrap();
        let mut lsm = Lsm::open(dir.path(), small(8)).unwrap();
        for i in 0u32..2000 {
            lsm.put(&i.to_be_bytes(), b"v").unwrap();
            for (l, level) in lsm.levels().iter().enumerate() {
                assert!(level.len() <= 1);
                let n: u64 = level.iter().map(RunHandle::entry_count).sum();
                assert!(n <= lsm.params().level_capacity(l + 1));
            }
        }
        assert!(lsm.levels().len() >= 4);
        let files = fs::read_dir(dir.path()).unwrap().count();
        assert_eq!(files, lsm.run_count() + 1);
    }

    #[test]
    fn upper_level_shadows_lower_and_returns_early() {
        let dir = TempDir::new().unwrap();
        let p = PublicParams {
            size_ratio: 4,
            ..small(4)
        };
        let mut lsm = Lsm::open(dir.path(), p).unwrap();
        // Five flushes overflow L1 (capacity 16) into L2.
        lsm.put(b"k", b"old").unwrap();
        for i in 0u32..19 {
            lsm.put(&i.to_be_bytes(), b"x").unwrap();
        }
        assert_eq!(lsm.levels()[0].len(), 0);
        assert_eq!(lsm.levels()[1].len(), 1);
        for key in [&b"k"[..], b"y1", b"y2", b"y3"] {
            lsm.put(key, b"new").unwrap();
        }
        let t = lsm.get_traced(b"k").unwrap();
        assert_eq!(t.outcome, Outcome::Found(b"new".to_vec()));
        assert_eq!(t.steps.len(), 1);
        assert_eq!(t.steps[0].location, RunLocation { level: 1, index: 0 });
        let old = lsm.run(RunLocation { level: 2, index: 0 }).unwrap();
        assert_eq!(old.read_point(b"k").unwrap().entry.unwrap().value, Some(b"old".to_vec()));
    }

    #[test]
    fn saturated_filters_read_every_run() {
        let dir = TempDir::new().unwrap();
        let mut p = small(4);
        p.bits_per_key = 0.1;
        p.bloom_k = 1;
        let mut lsm = Lsm::open(dir.path(), p).unwrap();
        // Each memtable batch spans the probe key, so it lies in every run's range.
        for b in 0u32..10 {
            lsm.put(&(b * 2).to_be_bytes(), b"v").unwrap();
            for j in 0..3 {
                lsm.put(&(100 + b * 3 + j).to_be_bytes(), b"v").unwrap();
            }
        }
        lsm.save().unwrap();
        assert!(lsm.run_count() >= 2);
        for (_, r) in lsm.runs() {
            assert!(r.bloom().is_saturated());
        }
        let before = lsm.io();
        let t = lsm.get_traced(&21u32.to_be_bytes()).unwrap();
        assert_eq!(t.outcome, Outcome::ZeroResult);
        let d = lsm.io().since(&before);
        assert_eq!(d.run_probes, lsm.run_count() as u64);
        assert_eq!(d.pages_read, lsm.run_count() as u64);
        assert_eq!(d.bf_false_positives, lsm.run_count() as u64);
    }

    #[test]
    fn reopen_preserves_contents() {
        let dir = TempDir::new().unwrap();
        let mut lsm = Lsm::open(dir.path(), small(16)).unwrap();
        for i in 0u32..300 {
            lsm.put(&i.to_be_bytes(), &(i * 7).to_le_bytes()).unwrap();
        }
        for i in (0u32..300).step_by(3) {
            lsm.delete(&i.to_be_bytes()).unwrap();
        }
        lsm.save().unwrap();
        let expected = lsm.live_entries().unwrap();
        let seq = lsm.next_sequence();
        drop(lsm);
        let lsm = Lsm::open(dir.path(), PublicParams::default()).unwrap();
        assert_eq!(lsm.params().memtable_capacity, 16);
        assert_eq!(lsm.next_sequence(), seq);
        assert_eq!(lsm.live_entries().unwrap(), expected);
        assert_eq!(expected.len(), 200);
        assert!(Lsm::open(dir.path(), PublicParams::default().hardened(true)).is_err());
    }

    #[test]
    fn compact_all_of_emptied_store_removes_every_run() {
        let dir = TempDir::new().unwrap();
        let mut lsm = Lsm::open(dir.path(), small(4)).unwrap();
        for i in 0u32..50 {
            lsm.put(&i.to_be_bytes(), b"v").unwrap();
        }
        for i in 0u32..50 {
            lsm.delete(&i.to_be_bytes()).unwrap();
        }
        lsm.save().unwrap();
        assert!(lsm.run_count() > 0);
        lsm.compact_all().unwrap();
        assert_eq!(lsm.run_count(), 0);
        assert_eq!(lsm.get_traced(&7u32.to_be_bytes()).unwrap().pages_read(), 0);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn differential_against_btreemap() {
        let dir = TempDir::new().unwrap();
        let mut lsm = Lsm::open(dir.path(), small(32)).unwrap();
        let mut oracle = BTreeMap::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for step in 0..20_000 {
            let key = rng.gen_range(0u16..600).to_be_bytes().to_vec();
            match rng.gen_range(0..10) {
                0..=4 => {
                    let v = rng.gen::<u32>().to_le_bytes().to_vec();
                    lsm.put(&key, &v).unwrap();
                    oracle.insert(key, v);
                }
                5..=6 => {
                    lsm.delete(&key).unwrap();
                    oracle.remove(&key);
                }
                _ => {
                    let t = lsm.get_traced(&key).unwrap();
                    if let Outcome::Found(_) = t.outcome {
                        let hit = t.steps.last().map(|s| s.location);
                        assert!(t.steps.iter().all(|s| Some(s.location) <= hit));
                    }
                    assert_eq!(t.value(), oracle.get(&key).cloned(), "step {step}");
                }
            }
            if step == 10_000 {
                lsm.save().unwrap();
                lsm = Lsm::open(dir.path(), small(32)).unwrap();
            }
        }
        let live: Vec<_> = oracle.into_iter().collect();
        assert_eq!(lsm.live_entries().unwrap(), live);
    }

    #[test]
    fn returned_value_has_max_sequence() {
        let dir = TempDir::new().unwrap();
        let mut lsm = Lsm::open(dir.path(), small(8)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..3000 {
            let k = [rng.gen_range(1u8..40)];
            if rng.gen_bool(0.8) {
                lsm.put(&k, &[rng.gen()]).unwrap();
            } else {
                lsm.delete(&k).unwrap();
            }
        }
        let entries = lsm.all_entries().unwrap();
        for k in 1u8..40 {
            let newest = entries
                .iter()
                .filter(|(_, e)| e.key == [k])
                .max_by_key(|(_, e)| e.seq)
                .map(|(_, e)| e.value.clone());
            assert_eq!(lsm.get(&[k]).unwrap(), newest.flatten());
        }
    }
}
