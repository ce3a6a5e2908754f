use std::path::Path;

use super::{GetTrace, Lsm, PublicParams};
use crate::error::{Error, Result};
use crate::prp::{Prp, PrpBlock, PrpKey};

/// Store operations shared by the plain and hardened engines. Keys are the
/// caller's raw keys; a hardened store permutes them before they reach the engine.
pub trait KvStore {
    fn put(&mut self, key: &[u8], value: &[u8]) -> Result<()>;
    fn delete(&mut self, key: &[u8]) -> Result<()>;
    fn get_traced(&self, key: &[u8]) -> Result<GetTrace>;
    fn any_filter_positive(&self, key: &[u8]) -> Result<bool>;
    fn save(&mut self) -> Result<()>;
    fn engine(&self) -> &Lsm;
    fn engine_mut(&mut self) -> &mut Lsm;

    fn get(&self, key: &[u8]) -> Result<Option<Vec<u8>>> {
        Ok(self.get_traced(key)?.value())
    }
}

impl KvStore for Lsm {
    fn put(&mut self, key: &[u8], value: &[u8]) -> Result<()> {
        Lsm::put(self, key, value)
    }

    fn delete(&mut self, key: &[u8]) -> Result<()> {
        Lsm::delete(self, key)
    }

    fn get_traced(&self, key: &[u8]) -> Result<GetTrace> {
        Lsm::get_traced(self, key)
    }

    fn any_filter_positive(&self, key: &[u8]) -> Result<bool> {
        Ok(Lsm::any_filter_positive(self, key))
    }

    fn save(&mut self) -> Result<()> {
        Lsm::save(self)
    }

    fn engine(&self) -> &Lsm {
        self
    }

    fn engine_mut(&mut self) -> &mut Lsm {
        self
    }
}

/// Engine whose keys are the images of raw keys under a keyed permutation.
/// Values are stored unchanged.
pub struct HardenedLsm {
    inner: Lsm,
    prp: Prp,
}

impl HardenedLsm {
    pub fn open(dir: impl AsRef<Path>, params: PublicParams, key: &PrpKey) -> Result<Self> {
        Ok(HardenedLsm {
            inner: Lsm::open(dir, params.hardened(true))?,
            prp: Prp::new(key),
        })
    }

    fn permute(&self, key: &[u8]) -> Result<PrpBlock> {
        if key.is_empty() {
            return Err(Error::EmptyKey);
        }
        self.prp.permute_key(key)
    }

    /// Visible pairs with raw keys restored, in raw key order.
    pub fn live_entries(&self) -> Result<Vec<(Vec<u8>, Vec<u8>)>> {
        let mut out = self
            .inner
            .live_entries()?
            .into_iter()
            .map(|(k, v)| {
                let block = PrpBlock::try_from(k.as_slice())?;
                Ok((self.prp.unpermute_key(&block)?, v))
            })
            .collect::<Result<Vec<_>>>()?;
        out.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        Ok(out)
    }
}

impl KvStore for HardenedLsm {
    fn put(&mut self, key: &[u8], value: &[u8]) -> Result<()> {
        let k = self.permute(key)?;
        self.inner.put(k.as_bytes(), value)
    }

    fn delete(&mut self, key: &[u8]) -> Result<()> {
        let k = self.permute(key)?;
        self.inner.delete(k.as_bytes())
    }

    fn get_traced(&self, key: &[u8]) -> Result<GetTrace> {
        self.inner.get_traced(self.permute(key)?.as_bytes())
    }

    fn any_filter_positive(&self, key: &[u8]) -> Result<bool> {
        Ok(self.inner.any_filter_positive(self.permute(key)?.as_bytes()))
    }

    fn save(&mut self) -> Result<()> {
        self.inner.save()
    }

    fn engine(&self) -> &Lsm {
        &self.inner
    }

    fn engine_mut(&mut self) -> &mut Lsm {
        &mut self.inner
    }
}

/// Either engine, chosen by `params.hardened`.
pub enum Store {
    Plain(Lsm),
    Hardened(HardenedLsm),
}

impl Store {
    /// Opens a plain or hardened store. A hardened store without a supplied
    /// key gets a fresh one, which is returned so the caller can report it;
    /// the key is never written to the store directory.
    pub fn open(
        dir: impl AsRef<Path>,
        params: PublicParams,
        key: Option<PrpKey>,
        key_seed: Option<u64>,
    ) -> Result<(Store, Option<PrpKey>)> {
        if !params.hardened {
            if key.is_some() {
                return Err(Error::InvalidParams(
                    "a permutation key was supplied for a plain store".into(),
                ));
            }
            return Ok((Store::Plain(Lsm::open(dir, params)?), None));
        }
        let (key, generated) = match key {
            Some(k) => (k, false),
            None => (PrpKey::generate(key_seed), true),
        };
        let store = HardenedLsm::open(dir, params, &key)?;
        Ok((Store::Hardened(store), generated.then_some(key)))
    }

    pub fn is_hardened(&self) -> bool {
        matches!(self, Store::Hardened(_))
    }

    pub fn live_entries(&self) -> Result<Vec<(Vec<u8>, Vec<u8>)>> {
        match self {
            Store::Plain(s) => s.live_entries(),
            Store::Hardened(s) => s.live_entries(),
        }
    }

    fn kv(&self) -> &dyn KvStore {
        match self {
            Store::Plain(s) => s,
            Store::Hardened(s) => s,
        }
    }

    fn kv_mut(&mut self) -> &mut dyn KvStore {
        match self {
            Store::Plain(s) => s,
            Store::Hardened(s) => s,
        }
    }
}

impl KvStore for Store {
    fn put(&mut self, key: &[u8], value: &[u8]) -> Result<()> {
        self.kv_mut().put(key, value)
    }

    fn delete(&mut self, key: &[u8]) -> Result<()> {
        self.kv_mut().delete(key)
    }

    fn get_traced(&self, key: &[u8]) -> Result<GetTrace> {
        self.kv().get_traced(key)
    }

    fn any_filter_positive(&self, key: &[u8]) -> Result<bool> {
        self.kv().any_filter_positive(key)
    }

    fn save(&mut self) -> Result<()> {
        self.kv_mut().save()
    }

    fn engine(&self) -> &Lsm {
        self.kv().engine()
    }

    fn engine_mut(&mut self) -> &mut Lsm {
        self.kv_mut().engine_mut()
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use tempfile::TempDir;

    use super::*;

    fn params() -> PublicParams {
        PublicParams {
            memtable_capacity: 16,
            size_ratio: 2,
            block_size: 512,
            ..PublicParams::default()
        }
    }

    #[test]
    fn hardened_returns_correct_value() {
        let dir = TempDir::new().unwrap();
        let mut s = HardenedLsm::open(dir.path(), params(), &PrpKey::generate(Some(1))).unwrap();
        s.put(b"a", b"v1").unwrap();
        s.put(b"b", b"v2").unwrap();
        assert_eq!(s.get(b"a").unwrap(), Some(b"v1".to_vec()));
        assert!(matches!(s.put(&[1u8; 16], b"x"), Err(Error::KeyTooLong { .. })));
        assert!(matches!(s.put(b"", b"x"), Err(Error::EmptyKey)));
    }

    #[test]
    fn engine_never_sees_raw_keys() {
        let dir = TempDir::new().unwrap();
        let mut s = HardenedLsm::open(dir.path(), params(), &PrpKey::generate(Some(2))).unwrap();
        for i in 0u32..100 {
            s.put(&i.to_be_bytes(), b"v").unwrap();
        }
        s.save().unwrap();
        for (_, e) in s.engine().all_entries().unwrap() {
            assert_eq!(e.key.len(), 16);
        }
        let raw: Vec<_> = s.live_entries().unwrap().into_iter().map(|(k, _)| k).collect();
        assert_eq!(raw.len(), 100);
        assert!(raw.contains(&7u32.to_be_bytes().to_vec()));
    }

    #[test]
    fn store_generates_key_only_when_missing() {
        let dir = TempDir::new().unwrap();
        let p = params().hardened(true);
        let (s, generated) = Store::open(dir.path().join("a"), p.clone(), None, Some(3)).unwrap();
        assert!(s.is_hardened());
        assert_eq!(generated, Some(PrpKey::generate(Some(3))));
        let (_, generated) =
            Store::open(dir.path().join("b"), p, Some(PrpKey::generate(Some(4))), None).unwrap();
        assert!(generated.is_none());
        let (s, generated) = Store::open(dir.path().join("c"), params(), None, None).unwrap();
        assert!(!s.is_hardened() && generated.is_none());
    }

    #[test]
    fn plain_and_hardened_agree() {
        let dir = TempDir::new().unwrap();
        let (mut plain, _) = Store::open(dir.path().join("p"), params(), None, None).unwrap();
        let (mut hard, _) =
            Store::open(dir.path().join("h"), params().hardened(true), None, Some(5)).unwrap();
        let mut oracle = BTreeMap::new();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10_000 {
            let key = rng.gen_range(0u16..500).to_be_bytes();
            match rng.gen_range(0..3) {
                0 => {
                    let v = [rng.gen::<u8>()];
                    plain.put(&key, &v).unwrap();
                    hard.put(&key, &v).unwrap();
                    oracle.insert(key, v.to_vec());
                }
                1 => {
                    plain.delete(&key).unwrap();
                    hard.delete(&key).unwrap();
                    oracle.remove(&key);
                }
                _ => {
                    let want = oracle.get(&key).cloned();
                    assert_eq!(plain.get(&key).unwrap(), want);
                    assert_eq!(hard.get(&key).unwrap(), want);
                }
            }
        }
    }
}
