use super::{Entry, RunHandle};
use crate::error::Result;

/// K-way merge of sorted entry streams ordered newest first. For each key only
/// the entry from the newest stream survives; tombstones are dropped when
/// `drop_tombstones` is set.
pub struct MergeIter<I: Iterator<Item = Result<Entry>>> {
    sources: Vec<I>,
    heads: Vec<Option<Entry>>,
    drop_tombstones: bool,
    primed: bool,
}

impl<I: Iterator<Item = Result<Entry>>> MergeIter<I> {
    pub fn new(sources: Vec<I>, drop_tombstones: bool) -> Self {
        let n = sources.len();
        MergeIter {
            sources,
            heads: vec![None; n],
            drop_tombstones,
            primed: false,
        }
    }

    fn advance(&mut self, i: usize) -> Result<()> {
        self.heads[i] = self.sources[i].next().transpose()?;
        Ok(())
    }

    fn next_entry(&mut self) -> Result<Option<Entry>> {
        if !self.primed {
            self.primed = true;
            for i in 0..self.sources.len() {
                self.advance(i)?;
            }
        }
        loop {
            // Lowest key wins; on ties the lowest (newest) source index.
            let mut best: Option<usize> = None;
            for (i, head) in self.heads.iter().enumerate() {
                if let Some(e) = head {
                    match best {
                        Some(b) if self.heads[b].as_ref().unwrap().key <= e.key => {}
                        _ => best = Some(i),
                    }
                }
            }
            let Some(best) = best else {
                return Ok(None);
            };
            let winner = self.heads[best].take().unwrap();
            self.advance(best)?;
            for i in 0..self.heads.len() {
                if self.heads[i].as_ref().is_some_and(|e| e.key == winner.key) {
                    self.advance(i)?;
                }
            }
            if self.drop_tombstones && winner.is_tombstone() {
                continue;
            }
            return Ok(Some(winner));
        }
    }
}

impl<I: Iterator<Item = Result<Entry>>> Iterator for MergeIter<I> {
    type Item = Result<Entry>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_entry().transpose()
    }
}

/// Merges runs given newest first into one sorted, duplicate-free entry list.
pub fn merge_runs(inputs: &[&RunHandle], drop_tombstones: bool) -> Result<Vec<Entry>> {
    MergeIter::new(inputs.iter().map(|r| r.iter()).collect(), drop_tombstones).collect()
}

/// In-memory variant of [`merge_runs`] over sorted entry lists, newest first.
pub fn merge_entries(inputs: Vec<Vec<Entry>>, drop_tombstones: bool) -> Vec<Entry> {
    let sources = inputs.into_iter().map(|v| v.into_iter().map(Ok)).collect();
    MergeIter::new(sources, drop_tombstones)
        .collect::<Result<_>>()
        .expect("in-memory sources cannot fail")
}

#[cfg(test)]
mod tests {
    use std::collections::{BTreeMap, BTreeSet};

    use proptest::prelude::*;
    use tempfile::TempDir;

    use super::*;
    use crate::storage::write_run;

    fn run(dir: &TempDir, name: &str, es: &[Entry]) -> RunHandle {
        write_run(dir.path().join(name), 0, es, 256, 1, |n| ((n as u32 * 10).max(4), 4)).unwrap()
    }

    #[test]
    fn newer_shadows_older() {
        let dir = TempDir::new().unwrap();
        let newer = run(&dir, "a", &[Entry::put("a", "1", 5)]);
        let older = run(&dir, "b", &[Entry::put("a", "2", 1)]);
        assert_eq!(merge_runs(&[&newer, &older], false).unwrap(), vec![Entry::put("a", "1", 5)]);
    }

    #[test]
    fn tombstones_dropped_only_on_request() {
        let dir = TempDir::new().unwrap();
        let newer = run(&dir, "a", &[Entry::tombstone("a", 5)]);
        let older = run(&dir, "b", &[Entry::put("a", "2", 1)]);
        assert!(merge_runs(&[&newer, &older], true).unwrap().is_empty());
        assert_eq!(merge_runs(&[&newer, &older], false).unwrap(), vec![Entry::tombstone("a", 5)]);
    }

    #[test]
    fn disjoint_inputs_concatenate_in_order() {
        let dir = TempDir::new().unwrap();
        let x = run(&dir, "a", &[Entry::put("c", "3", 3), Entry::put("d", "4", 4)]);
        let y = run(&dir, "b", &[Entry::put("a", "1", 1), Entry::put("b", "2", 2)]);
        let keys: Vec<_> = merge_runs(&[&x, &y], false).unwrap().into_iter().map(|e| e.key).collect();
        assert_eq!(keys, vec![b"a".to_vec(), b"b".to_vec(), b"c".to_vec(), b"d".to_vec()]);
    }

    // Brute-force set-algebra oracle: the newest version of every key in the
    // union, minus tombstones when dropping.
    fn oracle(inputs: &[BTreeMap<u8, Option<u8>>], drop: bool) -> Vec<(u8, Option<u8>)> {
        let all: BTreeSet<u8> = inputs.iter().flat_map(|m| m.keys().copied()).collect();
        all.into_iter()
            .map(|k| (k, *inputs.iter().find_map(|m| m.get(&k)).unwrap()))
            .filter(|(_, v)| !(drop && v.is_none()))
            .collect()
    }

    proptest! {
        #[test]
        fn merge_matches_set_oracle(
            inputs in proptest::collection::vec(
                proptest::collection::btree_map(any::<u8>(), proptest::option::of(any::<u8>()), 0..40),
                1..5),
            drop in any::<bool>(),
        ) {
            let lists: Vec<Vec<Entry>> = inputs.iter().enumerate().map(|(age, m)| {
                m.iter().map(|(&k, v)| Entry {
                    key: vec![k],
                    value: v.map(|x| vec![x]),
                    seq: (inputs.len() - age) as u64,
                }).collect()
            }).collect();
            let merged = merge_entries(lists, drop);
            let got: Vec<(u8, Option<u8>)> =
                merged.iter().map(|e| (e.key[0], e.value.as_ref().map(|v| v[0]))).collect();
            prop_assert_eq!(got, oracle(&inputs, drop));
            prop_assert!(merged.windows(2).all(|w| w[0].key < w[1].key));
        }
    }
}
