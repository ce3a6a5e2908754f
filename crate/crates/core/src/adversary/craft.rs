use std::path::Path;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::bloom::{BloomParams, HashFamily};
use crate::error::{Error, Result};

/// Filters up to this many bits finish with an indexed candidate pool; larger
/// ones keep streaming with a decaying acceptance threshold.
const POOL_MAX_BITS: u32 = 4096;
/// Pool size as a multiple of `m^2`, the number of distinct hash bases.
const POOL_FACTOR: u64 = 3;
/// Default patience, in expected waits, before accepting a weaker candidate.
pub const DEFAULT_EFFORT: f64 = 16.0;

/// Bounds an offline key search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackBudget {
    /// Candidate keys that may be hashed before giving up.
    pub max_candidates: u64,
    pub rng_seed: u64,
}

impl AttackBudget {
    pub fn new(max_candidates: u64, rng_seed: u64) -> Result<Self> {
        if max_candidates == 0 {
            return Err(Error::InvalidParams("candidate budget must be positive".into()));
        }
        Ok(AttackBudget {
            max_candidates,
            rng_seed,
        })
    }
}

impl Default for AttackBudget {
    fn default() -> Self {
        AttackBudget {
            max_candidates: 1 << 32,
            rng_seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CraftOutcome {
    pub keys: Vec<Vec<u8>>,
    pub candidates_tried: u64,
    /// Fill fraction of a filter holding exactly `keys`.
    pub fill_fraction: f64,
}

/// Finds keys that together set every bit of a filter with `params`. Each
/// accepted key sets `min(k, unset)` new bits while such keys are cheap to
/// find; the remaining bits are covered greedily, best candidate first.
pub fn craft_saturating_keys(params: &BloomParams, budget: &AttackBudget) -> Result<Vec<Vec<u8>>> {
    Ok(craft_saturating(params, budget)?.keys)
}

pub fn craft_saturating(params: &BloomParams, budget: &AttackBudget) -> Result<CraftOutcome> {
    craft_saturating_with_effort(params, budget, DEFAULT_EFFORT)
}

/// As [`craft_saturating`], with `effort` expected waits spent looking for a
/// candidate before settling for one that sets fewer new bits. Lower effort
/// hashes fewer candidates and returns more keys.
pub fn craft_saturating_with_effort(
    params: &BloomParams,
    budget: &AttackBudget,
    effort: f64,
) -> Result<CraftOutcome> {
    let mut c = Crafter::new(params, budget, None)?;
    c.effort = effort.max(1.0);
    c.run()?;
    Ok(c.into_outcome())
}

/// Exactly `count` keys chosen to set as many bits as possible. Once the
/// filter saturates, the list is padded with further distinct candidates.
pub fn craft_pollution_keys(
    params: &BloomParams,
    count: usize,
    budget: &AttackBudget,
) -> Result<CraftOutcome> {
    let mut c = Crafter::new(params, budget, Some(count))?;
    c.run()?;
    while c.keys.len() < count {
        let (key, _) = c.next_candidate()?;
        c.keys.push(key.to_vec());
    }
    Ok(c.into_outcome())
}

/// Candidate `i` is the 8-byte big-endian encoding of `start + i`.
fn candidate_key(start: u64, i: u64) -> [u8; 8] {
    start.wrapping_add(i).to_be_bytes()
}

struct Crafter {
    hashes: HashFamily,
    m: u32,
    k: u32,
    bits: Vec<u64>,
    unset: u32,
    start: u64,
    tried: u64,
    max: u64,
    keys: Vec<Vec<u8>>,
    limit: Option<usize>,
    effort: f64,
}

impl Crafter {
    fn new(params: &BloomParams, budget: &AttackBudget, limit: Option<usize>) -> Result<Self> {
        params.validate()?;
        AttackBudget::new(budget.max_candidates, budget.rng_seed)?;
        Ok(Crafter {
            hashes: params.hashes(),
            m: params.m_bits,
            k: params.k_hashes,
            bits: vec![0; (params.m_bits as usize).div_ceil(64)],
            unset: params.m_bits,
            start: ChaCha20Rng::seed_from_u64(budget.rng_seed).next_u64(),
            tried: 0,
            max: budget.max_candidates,
            keys: Vec::new(),
            limit,
            effort: DEFAULT_EFFORT,
        })
    }

    fn into_outcome(self) -> CraftOutcome {
        CraftOutcome {
            fill_fraction: 1.0 - self.unset as f64 / self.m as f64,
            keys: self.keys,
            candidates_tried: self.tried,
        }
    }

    fn finished(&self) -> bool {
        self.unset == 0 || self.limit.is_some_and(|l| self.keys.len() >= l)
    }

    fn next_candidate(&mut self) -> Result<([u8; 8], (u32, u32))> {
        if self.tried >= self.max {
            return Err(Error::BudgetExhausted(self.max));
        }
        let key = candidate_key(self.start, self.tried);
        self.tried += 1;
        Ok((key, self.hashes.base(&key)))
    }

    fn is_set(&self, pos: u32) -> bool {
        self.bits[pos as usize / 64] >> (pos % 64) & 1 == 1
    }

    /// Distinct unset positions among the key's k positions.
    fn new_bits(&self, base: (u32, u32)) -> u32 {
        let mut seen = [u32::MAX; 64];
        let mut fresh = 0;
        for (i, pos) in self.hashes.positions_from_base(base).enumerate() {
            if self.is_set(pos) || seen[..i.min(64)].contains(&pos) {
                continue;
            }
            if i < 64 {
                seen[i] = pos;
            }
            fresh += 1;
        }
        fresh
    }

    fn accept(&mut self, key: &[u8], base: (u32, u32)) {
        for pos in self.hashes.positions_from_base(base) {
            let (w, b) = (pos as usize / 64, pos % 64);
            if self.bits[w] >> b & 1 == 0 {
                self.bits[w] |= 1 << b;
                self.unset -= 1;
            }
        }
        self.keys.push(key.to_vec());
    }

    fn run(&mut self) -> Result<()> {
        // A key's positions form an arithmetic progression mod m, so the
        // unset bits may hold no progression of k of them at all; stop
        // waiting after a bounded number of misses.
        let mut misses = 0;
        let mut give_up = self.miss_limit();
        while !self.finished() && self.unset > self.m / 16 && misses <= give_up {
            let (key, base) = self.next_candidate()?;
            if self.new_bits(base) >= self.k.min(self.unset) {
                self.accept(&key, base);
                misses = 0;
                give_up = self.miss_limit();
            } else {
                misses += 1;
            }
        }
        if self.finished() {
            return Ok(());
        }
        if self.m <= POOL_MAX_BITS {
            self.pool_phase()?;
        }
        self.stream_phase()
    }

    /// Hashes a pool of candidates into a table indexed by `(a, b)`, then
    /// repeatedly takes a candidate setting the most unset bits. Only bases
    /// whose progression passes through an unset bit are examined.
    fn pool_phase(&mut self) -> Result<()> {
        let m = self.m as u64;
        let want = (POOL_FACTOR * m * m).min(self.max - self.tried);
        let pool_start = self.tried;
        let mut table = vec![0u32; (m * m) as usize];
        for _ in 0..want {
            let (_, (a, b)) = self.next_candidate()?;
            let cell = &mut table[(a as u64 * m + b as u64) as usize];
            if *cell == 0 {
                *cell = (self.tried - pool_start) as u32;
            }
        }

        let mut target = self.k.min(self.unset);
        while !self.finished() {
            target = target.min(self.unset);
            match self.find_in_pool(&table, target) {
                Some(base) => {
                    let offset = table[(base.0 as u64 * m + base.1 as u64) as usize] as u64 - 1;
                    let key = candidate_key(self.start, pool_start + offset);
                    self.accept(&key, base);
                }
                None if target > 1 => target -= 1,
                None => return Ok(()),
            }
        }
        Ok(())
    }

    fn find_in_pool(&self, table: &[u32], target: u32) -> Option<(u32, u32)> {
        let m = self.m as u64;
        for anchor in (0..self.m).filter(|&p| !self.is_set(p)) {
            for b in 0..m {
                for i in 0..self.k as u64 {
                    let a = (anchor as u64 + m - (i * b) % m) % m;
                    if table[(a * m + b) as usize] == 0 {
                        continue;
                    }
                    let base = (a as u32, b as u32);
                    if self.new_bits(base) >= target {
                        return Some(base);
                    }
                }
            }
        }
        None
    }

    /// Streams candidates, lowering the acceptance threshold when a key that
    /// good has become too rare to wait for.
    fn stream_phase(&mut self) -> Result<()> {
        let mut target = self.k.min(self.unset);
        let mut misses = 0u64;
        let mut patience = self.effort * self.expected_wait(target);
        while !self.finished() {
            let (key, base) = self.next_candidate()?;
            if self.new_bits(base) >= target {
                self.accept(&key, base);
                target = target.min(self.unset);
                patience = self.effort * self.expected_wait(target);
                misses = 0;
                continue;
            }
            misses += 1;
            if target > 1 && misses as f64 > patience {
                target -= 1;
                patience = self.effort * self.expected_wait(target);
                misses = 0;
            }
        }
        Ok(())
    }

    fn miss_limit(&self) -> u64 {
        let m = self.m as u64;
        let wait = self.expected_wait(self.k.min(self.unset));
        ((4.0 * self.effort * wait).min(1e15) as u64).min(m * m).max(4096)
    }

    /// Expected candidates until one has `target` or more unset positions,
    /// treating positions as independent.
    fn expected_wait(&self, target: u32) -> f64 {
        let u = self.unset as f64 / self.m as f64;
        let k = self.k;
        let mut p = 0.0;
        let mut binom = 1.0;
        for j in 0..=k {
            if j >= target {
                p += binom * u.powi(j as i32) * (1.0 - u).powi((k - j) as i32);
            }
            binom = binom * (k - j) as f64 / (j + 1) as f64;
        }
        1.0 / p.max(1e-300)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub m_bits: u32,
    pub k_hashes: u32,
    pub seed: u64,
    pub seconds: f64,
    pub candidates_tried: u64,
    pub keys: usize,
}

/// Times the saturating search for every `m` in `m_values` and every seed.
pub fn saturation_timing(
    m_values: &[u32],
    k: u32,
    hash_seed: u64,
    seeds: &[u64],
    max_candidates: u64,
) -> Result<Vec<TimingRow>> {
    let mut rows = Vec::new();
    for &m in m_values {
        let params = BloomParams::new(m, k, hash_seed)?;
        for &seed in seeds {
            let budget = AttackBudget::new(max_candidates, seed)?;
            let t0 = Instant::now();
            let out = craft_saturating(&params, &budget)?;
            rows.push(TimingRow {
                m_bits: m,
                k_hashes: k,
                seed,
                seconds: t0.elapsed().as_secs_f64(),
                candidates_tried: out.candidates_tried,
                keys: out.keys.len(),
            });
        }
    }
    Ok(rows)
}

pub fn write_timing_csv(rows: &[TimingRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
