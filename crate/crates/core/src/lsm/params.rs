use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prp::LAMBDA_BITS;
use crate::storage::{DEFAULT_BLOCK_SIZE, MIN_BLOCK_SIZE};

pub const DEFAULT_HASH_SEED: u64 = 0x6c73_6d2d_626c_6f6f;

/// Public parameters of a store. Everything here is known to an adversary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PublicParams {
    /// Memtable flush threshold in entries.
    pub memtable_capacity: usize,
    /// Optional additional flush threshold in encoded bytes.
    pub memtable_bytes: Option<usize>,
    /// Level `i` holds up to `memtable_capacity * size_ratio^i` entries.
    pub size_ratio: u32,
    pub bits_per_key: f64,
    pub bloom_k: u32,
    pub block_size: u32,
    pub hash_seed: u64,
    pub hardened: bool,
    /// Secret key length in bits; 128 when hardened, 0 otherwise.
    pub lambda_bits: u32,
}

impl Default for PublicParams {
    fn default() -> Self {
        PublicParams {
            memtable_capacity: 4096,
            memtable_bytes: None,
            size_ratio: 4,
            bits_per_key: 10.0,
            bloom_k: 4,
            block_size: DEFAULT_BLOCK_SIZE,
            hash_seed: DEFAULT_HASH_SEED,
            hardened: false,
            lambda_bits: 0,
        }
    }
}

impl PublicParams {
    pub fn hardened(mut self, hardened: bool) -> Self {
        self.hardened = hardened;
        self.lambda_bits = if hardened { LAMBDA_BITS } else { 0 };
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParams(msg));
        if self.memtable_capacity == 0 {
            return fail("memtable capacity must be positive".into());
        }
        if self.memtable_bytes == Some(0) {
            return fail("memtable byte limit must be positive".into());
        }
        if self.size_ratio < 2 {
            return fail(format!("size ratio must be >= 2, got {}", self.size_ratio));
        }
        if !(self.bits_per_key.is_finite() && self.bits_per_key > 0.0) {
            return fail(format!("bits per key must be positive, got {}", self.bits_per_key));
        }
        if self.bloom_k == 0 {
            return fail("bloom k must be positive".into());
        }
        if self.block_size < MIN_BLOCK_SIZE {
            return fail(format!("block size must be >= {MIN_BLOCK_SIZE}, got {}", self.block_size));
        }
        let expected_lambda = if self.hardened { LAMBDA_BITS } else { 0 };
        if self.lambda_bits != expected_lambda {
            return fail(format!(
                "lambda_bits must be {expected_lambda} when hardened={}",
                self.hardened
            ));
        }
        Ok(())
    }

    /// Entry capacity of disk level `level` (1-based).
    pub fn level_capacity(&self, level: usize) -> u64 {
        let mut cap = self.memtable_capacity as u64;
        for _ in 0..level {
            cap = cap.saturating_mul(self.size_ratio as u64);
        }
        cap
    }

    /// Filter geometry for a run of `n` keys: `m = ceil(bits_per_key * n)`, never below k.
    pub fn filter_size(&self, n: u64) -> (u32, u32) {
        let m = (self.bits_per_key * n as f64).ceil().min(u32::MAX as f64) as u32;
        (m.max(self.bloom_k), self.bloom_k)
    }

    /// Parses a flat `key = value` config; unknown keys are errors, `#` starts a comment.
    pub fn from_config(text: &str) -> Result<Self> {
        let mut p = PublicParams::default();
        let mut hardened = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidParams(format!("config line {}: expected key = value", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || Error::InvalidParams(format!("config line {}: bad value for {key}", lineno + 1));
            match key {
                "memtable_cap" | "memtable_capacity" => p.memtable_capacity = value.parse().map_err(|_| bad())?,
                "memtable_bytes" => p.memtable_bytes = Some(value.parse().map_err(|_| bad())?),
                "size_ratio" => p.size_ratio = value.parse().map_err(|_| bad())?,
                "bits_per_key" => p.bits_per_key = value.parse().map_err(|_| bad())?,
                "k_hashes" | "bloom_k" => p.bloom_k = value.parse().map_err(|_| bad())?,
                "block_size" => p.block_size = value.parse().map_err(|_| bad())?,
                "hash_seed" => p.hash_seed = value.parse().map_err(|_| bad())?,
                "hardened" => hardened = value.parse().map_err(|_| bad())?,
                _ => {
                    return Err(Error::InvalidParams(format!(
                        "config line {}: unknown key {key}",
                        lineno + 1
                    )))
                }
            }
        }
        let p = p.hardened(hardened);
        p.validate()?;
        Ok(p)
    }

    pub fn to_config(&self) -> String {
        let mut s = format!(
            "memtable_cap = {}\nsize_ratio = {}\nbits_per_key = {}\nk_hashes = {}\nblock_size = {}\nhash_seed = {}\nhardened = {}\n",
            self.memtable_capacity,
            self.size_ratio,
            self.bits_per_key,
            self.bloom_k,
            self.block_size,
            self.hash_seed,
            self.hardened
        );
        if let Some(b) = self.memtable_bytes {
            s.push_str(&format!("memtable_bytes = {b}\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let p = PublicParams::default();
        p.validate().unwrap();
        assert_eq!(p.level_capacity(1), 16384);
        assert_eq!(p.level_capacity(2), 65536);
        assert_eq!(p.filter_size(100), (1000, 4));
        assert_eq!(p.filter_size(0), (4, 4));
        p.clone().hardened(true).validate().unwrap();
        assert_eq!(p.hardened(true).lambda_bits, 128);
    }

    #[test]
    fn invalid_params_rejected() {
        let base = PublicParams::default();
        for bad in [
            PublicParams { memtable_capacity: 0, ..base.clone() },
            PublicParams { size_ratio: 1, ..base.clone() },
            PublicParams { bits_per_key: 0.0, ..base.clone() },
            PublicParams { bits_per_key: f64::NAN, ..base.clone() },
            PublicParams { bloom_k: 0, ..base.clone() },
            PublicParams { block_size: 16, ..base.clone() },
            PublicParams { hardened: true, ..base.clone() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn config_roundtrip() {
        let p = PublicParams {
            memtable_capacity: 100,
            memtable_bytes: Some(1 << 20),
            size_ratio: 3,
            bits_per_key: 10.24,
            bloom_k: 5,
            block_size: 1024,
            hash_seed: 99,
            ..PublicParams::default()
        }
        .hardened(true);
        assert_eq!(PublicParams::from_config(&p.to_config()).unwrap(), p);
        let parsed = PublicParams::from_config("# comment\n size_ratio = 8 # trailing\n").unwrap();
        assert_eq!(parsed.size_ratio, 8);
        assert!(PublicParams::from_config("nonsense = 1").is_err());
        assert!(PublicParams::from_config("size_ratio").is_err());
        assert!(PublicParams::from_config("size_ratio = x").is_err());
    }
}
