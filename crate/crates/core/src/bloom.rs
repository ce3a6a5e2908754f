//! Standard Bloom filter with a seeded double-hashing family, plus the
//! PRP-hardened wrapper that filters the permuted image of each key.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::error::{Error, Result};
use crate::prp::Prp;

const SECOND_HASH_TWEAK: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BloomParams {
    pub m_bits: u32,
    pub k_hashes: u32,
    pub hash_seed: u64,
}

impl BloomParams {
    pub fn new(m_bits: u32, k_hashes: u32, hash_seed: u64) -> Result<Self> {
        let p = BloomParams {
            m_bits,
            k_hashes,
            hash_seed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_bits == 0 || self.k_hashes == 0 {
            return Err(Error::InvalidParams(format!(
                "bloom filter needs m_bits >= 1 and k_hashes >= 1 (got m={}, k={})",
                self.m_bits, self.k_hashes
            )));
        }
        if self.k_hashes > self.m_bits {
            return Err(Error::InvalidParams(format!(
                "k_hashes ({}) exceeds m_bits ({})",
                self.k_hashes, self.m_bits
            )));
        }
        Ok(())
    }

    pub fn hashes(&self) -> HashFamily {
        HashFamily {
            m: self.m_bits as u64,
            k: self.k_hashes,
            seed: self.hash_seed,
        }
    }
}

/// `h_i(x) = (a(x) + i * b(x)) mod m`, with `a` and `b` two independently
/// seeded 64-bit hashes reduced mod `m` first.
#[derive(Clone, Copy, Debug)]
pub struct HashFamily {
    m: u64,
    k: u32,
    seed: u64,
}

impl HashFamily {
    /// The pair `(a mod m, b mod m)` that determines every position of `key`.
    #[inline]
    pub fn base(&self, key: &[u8]) -> (u32, u32) {
        self.base_of_digest(&KeyDigest::new(key, self.seed))
    }

    #[inline]
    pub fn base_of_digest(&self, d: &KeyDigest) -> (u32, u32) {
        ((d.a % self.m) as u32, (d.b % self.m) as u32)
    }

    #[inline]
    pub fn positions_from_base(&self, base: (u32, u32)) -> impl Iterator<Item = u32> {
        let (a, b, m) = (base.0 as u64, base.1 as u64, self.m);
        (0..self.k as u64).map(move |i| ((a + i * b) % m) as u32)
    }

    #[inline]
    pub fn positions(&self, key: &[u8]) -> impl Iterator<Item = u32> {
        self.positions_from_base(self.base(key))
    }

    pub fn m(&self) -> u32 {
        self.m as u32
    }

    pub fn k(&self) -> u32 {
        self.k
    }
}

/// Both 64-bit hashes of a key, before reduction mod `m`. Lets a run writer
/// hash keys while streaming and size the filter once the key count is known.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KeyDigest {
    a: u64,
    b: u64,
}

impl KeyDigest {
    #[inline]
    pub fn new(key: &[u8], hash_seed: u64) -> Self {
        KeyDigest {
            a: xxh3_64_with_seed(key, hash_seed),
            b: xxh3_64_with_seed(key, hash_seed ^ SECOND_HASH_TWEAK),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BloomFilter {
    params: BloomParams,
    words: Vec<u64>,
    set_count: u32,
    n_inserted: u64,
}

impl BloomFilter {
    pub fn new(params: BloomParams) -> Result<Self> {
        params.validate()?;
        Ok(BloomFilter {
            params,
            words: vec![0; word_count(params.m_bits)],
            set_count: 0,
            n_inserted: 0,
        })
    }

    pub fn params(&self) -> BloomParams {
        self.params
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn set_count(&self) -> u32 {
        self.set_count
    }

    pub fn n_inserted(&self) -> u64 {
        self.n_inserted
    }

    /// Overrides the insert counter, e.g. with a run's entry count after decoding.
    pub fn set_n_inserted(&mut self, n: u64) {
        self.n_inserted = n;
    }

    #[inline]
    pub fn bit(&self, pos: u32) -> bool {
        self.words[(pos / 64) as usize] >> (pos % 64) & 1 == 1
    }

    #[inline]
    fn set_bit(&mut self, pos: u32) {
        let w = &mut self.words[(pos / 64) as usize];
        let mask = 1u64 << (pos % 64);
        if *w & mask == 0 {
            *w |= mask;
            self.set_count += 1;
        }
    }

    pub fn insert(&mut self, key: &[u8]) {
        self.insert_digest(&KeyDigest::new(key, self.params.hash_seed));
    }

    /// Inserts a key given its digest, which must use this filter's hash seed.
    pub fn insert_digest(&mut self, digest: &KeyDigest) {
        let h = self.params.hashes();
        for pos in h.positions_from_base(h.base_of_digest(digest)) {
            self.set_bit(pos);
        }
        self.n_inserted += 1;
    }

    pub fn contains(&self, key: &[u8]) -> bool {
        self.params.hashes().positions(key).all(|pos| self.bit(pos))
    }

    pub fn fill_fraction(&self) -> f64 {
        self.set_count as f64 / self.params.m_bits as f64
    }

    pub fn is_saturated(&self) -> bool {
        self.set_count == self.params.m_bits
    }

    /// Fraction of `probes` random 16-byte keys the filter accepts. Keys are
    /// drawn uniformly, so a collision with an inserted key is negligible.
    pub fn measure_fpr(&self, probes: u64, rng_seed: u64) -> f64 {
        if probes == 0 {
            return 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let hits = (0..probes)
            .filter(|_| self.contains(&rng.gen::<[u8; 16]>()))
            .count();
        hits as f64 / probes as f64
    }

    /// `[u32 m_bits][u32 k_hashes][u64 hash_seed][ceil(m/64) x u64 words]`, little-endian.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&self.params.m_bits.to_le_bytes());
        out.extend_from_slice(&self.params.k_hashes.to_le_bytes());
        out.extend_from_slice(&self.params.hash_seed.to_le_bytes());
        for w in &self.words {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out
    }

    pub fn encoded_len(&self) -> usize {
        16 + 8 * self.words.len()
    }

    /// Decodes a filter block. The insert counter is not part of the block
    /// and starts at zero.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = |reason: &str| Error::InvalidParams(format!("bloom block: {reason}"));
        if bytes.len() < 16 {
            return Err(bad("truncated header"));
        }
        let m_bits = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
        let k_hashes = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        let hash_seed = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let params = BloomParams::new(m_bits, k_hashes, hash_seed)?;
        let n_words = word_count(m_bits);
        if bytes.len() != 16 + 8 * n_words {
            return Err(bad("length does not match m_bits"));
        }
        let words: Vec<u64> = bytes[16..]
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let tail = m_bits % 64;
        if tail != 0 && words[n_words - 1] >> tail != 0 {
            return Err(bad("bits set beyond m_bits"));
        }
        let set_count = words.iter().map(|w| w.count_ones()).sum();
        Ok(BloomFilter {
            params,
            words,
            set_count,
            n_inserted: 0,
        })
    }
}

fn word_count(m_bits: u32) -> usize {
    (m_bits as usize).div_ceil(64)
}

/// Standard estimate `(1 - (1 - 1/m)^(k n))^k`.
pub fn theoretical_fpr(params: &BloomParams, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let m = params.m_bits as f64;
    let k = params.k_hashes as f64;
    let unset = (k * n as f64 * (-1.0 / m).ln_1p()).exp();
    (1.0 - unset).powf(k)
}

/// `floor(m ln m / k)`: expected random insertions before every bit is set.
pub fn expected_random_saturation(params: &BloomParams) -> u64 {
    let m = params.m_bits as f64;
    (m * m.ln() / params.k_hashes as f64).floor() as u64
}

/// Inserts uniformly random keys into a fresh filter until it saturates and
/// returns how many insertions that took.
pub fn random_insertions_to_saturation<R: Rng>(params: BloomParams, rng: &mut R) -> Result<u64> {
    let mut filter = BloomFilter::new(params)?;
    let mut n = 0;
    while !filter.is_saturated() {
        filter.insert(&rng.gen::<[u8; 16]>());
        n += 1;
    }
    Ok(n)
}

/// Bloom filter over permuted keys: inserts and queries `F_k(x)` instead of `x`.
/// The bit layout is identical to a plain filter.
#[derive(Clone, Debug)]
pub struct SecureBloomFilter {
    inner: BloomFilter,
    prp: Prp,
}

impl SecureBloomFilter {
    pub fn new(params: BloomParams, prp: Prp) -> Result<Self> {
        Ok(SecureBloomFilter {
            inner: BloomFilter::new(params)?,
            prp,
        })
    }

    pub fn insert(&mut self, key: &[u8]) -> Result<()> {
        let block = self.prp.permute_key(key)?;
        self.inner.insert(block.as_bytes());
        Ok(())
    }

    pub fn contains(&self, key: &[u8]) -> Result<bool> {
        let block = self.prp.permute_key(key)?;
        Ok(self.inner.contains(block.as_bytes()))
    }

    pub fn filter(&self) -> &BloomFilter {
        &self.inner
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::Rng;

    use super::*;
    use crate::prp::PrpKey;

    fn params(m: u32, k: u32) -> BloomParams {
        BloomParams::new(m, k, 0x5eed).unwrap()
    }

    #[test]
    fn new_filter_is_empty() {
        let f = BloomFilter::new(params(8, 2)).unwrap();
        assert_eq!(f.words(), &[0]);
        assert_eq!(f.set_count(), 0);
        assert_eq!(f.fill_fraction(), 0.0);
        assert!(!f.contains(b"anything"));
    }

    #[test]
    fn invalid_params() {
        assert!(BloomParams::new(0, 1, 0).is_err());
        assert!(BloomParams::new(8, 0, 0).is_err());
        assert!(BloomParams::new(2, 3, 0).is_err());
    }

    #[test]
    fn insert_sets_exactly_the_hashed_positions() {
        let p = params(8, 2);
        let mut f = BloomFilter::new(p).unwrap();
        f.insert(b"x");
        let expected: std::collections::BTreeSet<u32> = p.hashes().positions(b"x").collect();
        for pos in 0..8 {
            assert_eq!(f.bit(pos), expected.contains(&pos), "bit {pos}");
        }
        assert_eq!(f.set_count() as usize, expected.len());
        let before = f.clone();
        f.insert(b"x");
        assert_eq!(f.words(), before.words());
        assert_eq!(f.n_inserted(), 2);
    }

    #[test]
    fn single_insert_fill_is_k_over_m() {
        let p = params(1024, 4);
        let key = (0u64..)
            .map(|c| c.to_be_bytes())
            .find(|k| {
                let pos: std::collections::HashSet<u32> = p.hashes().positions(k).collect();
                pos.len() == 4
            })
            .unwrap();
        let mut f = BloomFilter::new(p).unwrap();
        f.insert(&key);
        assert_eq!(f.fill_fraction(), 4.0 / 1024.0);
    }

    #[test]
    fn one_bit_set_rejects_fresh_keys_when_k_is_two() {
        let p = params(64, 2);
        // A key whose two positions coincide sets a single bit.
        let key = (0u64..)
            .map(|c| c.to_be_bytes())
            .find(|k| p.hashes().base(k).1 == 0)
            .unwrap();
        let mut f = BloomFilter::new(p).unwrap();
        f.insert(&key);
        assert_eq!(f.set_count(), 1);
        for c in 0..1000u64 {
            let probe = (c | 1 << 40).to_be_bytes();
            let distinct: std::collections::HashSet<u32> = p.hashes().positions(&probe).collect();
            if distinct.len() == 2 {
                assert!(!f.contains(&probe));
            }
        }
    }

    #[test]
    fn saturated_filter_accepts_everything() {
        let p = params(256, 3);
        let mut f = BloomFilter::new(p).unwrap();
        let mut c = 0u64;
        while !f.is_saturated() {
            f.insert(&c.to_le_bytes());
            c += 1;
        }
        assert_eq!(f.fill_fraction(), 1.0);
        assert_eq!(f.measure_fpr(10_000, 1), 1.0);
        assert!(f.contains(b"never inserted"));
    }

    #[test]
    fn fresh_filter_measures_zero_fpr() {
        assert_eq!(BloomFilter::new(params(512, 4)).unwrap().measure_fpr(10_000, 2), 0.0);
    }

    #[test]
    fn theoretical_fpr_edge_cases() {
        assert_eq!(theoretical_fpr(&params(1024, 4), 0), 0.0);
        let big = theoretical_fpr(&params(u32::MAX, 4), 100);
        assert!(big < 1e-20);
        let small = theoretical_fpr(&params(1024, 4), 100);
        assert!(small > big);
        assert_eq!(theoretical_fpr(&BloomParams::new(1, 1, 0).unwrap(), 1), 1.0);
    }

    // Monte Carlo oracle for the theoretical estimate: average the measured
    // FPR over independent fillings so per-filter variance washes out.
    #[test]
    fn theoretical_fpr_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let trials = 20;
        let mut total = 0.0;
        for t in 0..trials {
            let p = BloomParams::new(1024, 4, rng.gen()).unwrap();
            let mut f = BloomFilter::new(p).unwrap();
            for _ in 0..100 {
                f.insert(&rng.gen::<[u8; 8]>());
            }
            total += f.measure_fpr(5_000, t);
        }
        let empirical = total / trials as f64;
        let theory = theoretical_fpr(&params(1024, 4), 100);
        assert!((empirical - theory).abs() <= 0.01, "empirical {empirical} theory {theory}");
    }

    #[test]
    fn expected_random_saturation_formula() {
        assert_eq!(expected_random_saturation(&params(256, 1)), 1419);
        assert_eq!(expected_random_saturation(&params(2, 1)), 1);
        for m in [4u32, 16, 100, 1000] {
            assert_eq!(
                expected_random_saturation(&params(m, m)),
                (m as f64).ln().floor() as u64
            );
        }
    }

    // With m = 2, k = 1 the insertions-to-saturation count is 1 + Geometric(1/2),
    // mean exactly 2 * H_2 = 3, far from the closed form's 1.
    #[test]
    fn tiny_filter_saturation_diverges_from_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let trials = 20_000;
        let total: u64 = (0..trials)
            .map(|_| random_insertions_to_saturation(params(2, 1), &mut rng).unwrap())
            .sum();
        let mean = total as f64 / trials as f64;
        assert!((mean - 3.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn encode_decode_roundtrip_and_validation() {
        let p = params(100, 3);
        let mut f = BloomFilter::new(p).unwrap();
        for i in 0..20u32 {
            f.insert(&i.to_le_bytes());
        }
        let bytes = f.encode();
        assert_eq!(bytes.len(), f.encoded_len());
        assert_eq!(bytes.len(), 16 + 8 * 2);
        let mut g = BloomFilter::decode(&bytes).unwrap();
        g.set_n_inserted(20);
        assert_eq!(g, f);

        assert!(BloomFilter::decode(&bytes[..20]).is_err());
        let mut stray = bytes.clone();
        *stray.last_mut().unwrap() = 0x80; // bit 127 of a 100-bit filter
        assert!(BloomFilter::decode(&stray).is_err());
    }

    #[test]
    fn bit_order_is_lsb_first_little_endian() {
        let mut f = BloomFilter::new(params(128, 1)).unwrap();
        f.set_bit(0);
        f.set_bit(65);
        let bytes = f.encode();
        assert_eq!(bytes[16], 0x01);
        assert_eq!(bytes[24], 0x02);
    }

    #[test]
    fn secure_filter_is_complete_and_rejects_long_keys() {
        let prp = Prp::new(&PrpKey::generate(Some(1)));
        let mut f = SecureBloomFilter::new(params(1024, 4), prp).unwrap();
        for i in 0..200u32 {
            f.insert(&i.to_be_bytes()).unwrap();
        }
        for i in 0..200u32 {
            assert!(f.contains(&i.to_be_bytes()).unwrap());
        }
        assert!(matches!(f.insert(&[0; 16]), Err(Error::KeyTooLong { .. })));
        assert!(matches!(f.contains(&[0; 16]), Err(Error::KeyTooLong { .. })));
    }

    proptest! {
        #[test]
        fn completeness_and_monotone_fill(keys in proptest::collection::vec(
            proptest::collection::vec(any::<u8>(), 0..24), 1..200)) {
            let mut f = BloomFilter::new(params(512, 4)).unwrap();
            let mut last = 0;
            for k in &keys {
                f.insert(k);
                prop_assert!(f.set_count() >= last);
                last = f.set_count();
                let pop: u32 = f.words().iter().map(|w| w.count_ones()).sum();
                prop_assert_eq!(pop, f.set_count());
            }
            for k in &keys {
                prop_assert!(f.contains(k));
            }
        }
    }
}
