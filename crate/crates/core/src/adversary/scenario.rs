use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use super::craft::{craft_pollution_keys, AttackBudget};
use super::game::Target;
use crate::bloom::BloomParams;
use crate::error::Result;
use crate::lsm::{KvStore, PublicParams, RunStats, Store};
use crate::prp::PrpKey;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ScenarioConfig {
    /// Legitimate keys loaded before the attack. `None` loads
    /// `(size_ratio + 1) * memtable_capacity`, which leaves L1 empty.
    pub legit_keys: Option<u64>,
    /// Random probes per run when measuring filter false-positive rates.
    pub fpr_probes: u64,
    /// Zero-result lookups issued after each phase.
    pub lookups: u64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            legit_keys: None,
            fpr_probes: 10_000,
            lookups: 10_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioPhase {
    pub phase: String,
    pub runs: Vec<RunStats>,
    pub max_measured_fpr: f64,
    /// Largest excess of a run's measured over its theoretical FPR.
    pub max_fpr_excess: f64,
    pub zero_result_pages_mean: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioReport {
    pub target: Target,
    pub params: PublicParams,
    pub legit_keys: u64,
    pub crafted_keys: usize,
    /// Fill the crafted keys alone would give the run they flush to.
    pub crafted_fill: f64,
    /// Largest per-run theoretical FPR over every phase.
    pub epsilon: f64,
    pub phases: Vec<ScenarioPhase>,
}

impl ScenarioReport {
    pub fn phase(&self, name: &str) -> Option<&ScenarioPhase> {
        self.phases.iter().find(|p| p.phase == name)
    }
}

/// Loads legitimate keys, inserts one memtable of keys crafted against the
/// filter they will flush into, deletes them all, and finally recompacts
/// everything. Tombstones keep the crafted keys in their run until the full
/// recompaction rewrites it from live keys, so the polluted filter survives
/// the deletion.
pub fn deleted_insertion_scenario(
    params: &PublicParams,
    budget: &AttackBudget,
    cfg: &ScenarioConfig,
    target: Target,
    dir: &Path,
) -> Result<ScenarioReport> {
    let params = params.clone().hardened(target == Target::Hardened);
    params.validate()?;
    let key = (target == Target::Hardened).then(|| PrpKey::generate(Some(cfg.seed)));
    let (mut store, _) = Store::open(dir, params.clone(), key, None)?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);

    let m = params.memtable_capacity as u64;
    let legit = cfg.legit_keys.unwrap_or((params.size_ratio as u64 + 1) * m);
    for _ in 0..legit {
        store.put(&rng.gen::<[u8; 12]>(), b"v")?;
    }
    store.save()?;
    let mut phases = vec![measure(&store, "baseline", cfg, &mut rng)?];

    let (m_bits, k) = params.filter_size(m);
    let target_filter = BloomParams::new(m_bits, k, params.hash_seed)?;
    let crafted = craft_pollution_keys(&target_filter, m as usize, budget)?;
    for key in &crafted.keys {
        store.put(key, b"x")?;
    }
    store.save()?;
    phases.push(measure(&store, "after-insert", cfg, &mut rng)?);

    for key in &crafted.keys {
        store.delete(key)?;
    }
    store.save()?;
    phases.push(measure(&store, "after-delete", cfg, &mut rng)?);

    store.engine_mut().compact_all()?;
    phases.push(measure(&store, "after-full-compaction", cfg, &mut rng)?);

    let epsilon = phases
        .iter()
        .flat_map(|p| p.runs.iter().map(|r| r.theoretical_fpr))
        .fold(0.0, f64::max);
    Ok(ScenarioReport {
        target,
        params,
        legit_keys: legit,
        crafted_keys: crafted.keys.len(),
        crafted_fill: crafted.fill_fraction,
        epsilon,
        phases,
    })
}

fn measure(store: &Store, phase: &str, cfg: &ScenarioConfig, rng: &mut ChaCha20Rng) -> Result<ScenarioPhase> {
    let engine = store.engine();
    let stats = engine.stats(cfg.fpr_probes, rng.gen());
    let before = engine.io();
    for _ in 0..cfg.lookups {
        // 10-byte probes cannot collide with the 12-byte or 8-byte stored keys.
        store.get_traced(&rng.gen::<[u8; 10]>())?;
    }
    let pages = engine.io().since(&before).pages_read;
    Ok(ScenarioPhase {
        phase: phase.into(),
        max_measured_fpr: stats.runs.iter().map(|r| r.measured_fpr).fold(0.0, f64::max),
        max_fpr_excess: stats
            .runs
            .iter()
            .map(|r| r.measured_fpr - r.theoretical_fpr)
            .fold(f64::NEG_INFINITY, f64::max)
            .max(0.0),
        zero_result_pages_mean: if cfg.lookups == 0 {
            0.0
        } else {
            pages as f64 / cfg.lookups as f64
        },
        runs: stats.runs,
    })
}
