use rayon::prelude::*;
use serde::Serialize;

use super::{IoSnapshot, Lsm, RunLocation};
use crate::bloom::theoretical_fpr;
use crate::error::Result;

/// Cost of touching the in-memory level, in page units.
pub const MEMORY_PAGE_COST: f64 = 1.0;
/// Cost of one data-block read from a run.
pub const DISK_PAGE_COST: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeScenario {
    /// Lookup of a key absent from every run.
    ZeroResult,
    /// Lookup of a key whose newest entry lives in the given run.
    InRun(RunLocation),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunStats {
    pub location: RunLocation,
    pub id: u64,
    pub file: String,
    pub n: u64,
    pub m_bits: u32,
    pub k_hashes: u32,
    pub set_bits: u32,
    pub fill_fraction: f64,
    pub theoretical_fpr: f64,
    pub measured_fpr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LsmStats {
    pub io: IoSnapshot,
    pub memtable_entries: usize,
    pub runs: Vec<RunStats>,
}

impl LsmStats {
    pub fn total_run_entries(&self) -> u64 {
        self.runs.iter().map(|r| r.n).sum()
    }
}

impl Lsm {
    /// Per-level probe cost: index 0 is the memtable, index `i` is level `i`.
    pub fn cost_table(&self) -> Vec<f64> {
        let mut t = vec![MEMORY_PAGE_COST];
        t.extend(std::iter::repeat(DISK_PAGE_COST).take(self.levels.len()));
        t
    }

    /// Cost may never decrease with depth.
    pub fn cost_table_is_monotone(&self) -> bool {
        self.cost_table().windows(2).all(|w| w[0] <= w[1])
    }

    /// Filter false-positive probability of a run at its current load.
    pub fn run_fpr(&self, loc: RunLocation) -> Result<f64> {
        let run = self.run(loc)?;
        Ok(theoretical_fpr(&run.bloom().params(), run.entry_count()))
    }

    /// Expected disk-page cost of a lookup: every run probed before the
    /// target contributes its false-positive probability times its page
    /// cost, and the target run contributes its full page cost. The whole
    /// sum is scaled by the memtable's cost.
    pub fn expected_probe_cost(&self, scenario: ProbeScenario) -> Result<f64> {
        let table = self.cost_table();
        let target = match scenario {
            ProbeScenario::ZeroResult => None,
            ProbeScenario::InRun(loc) => {
                self.run(loc)?;
                Some(loc)
            }
        };
        let mut sum = 0.0;
        for (loc, run) in self.runs() {
            let page_cost = table[loc.level];
            if Some(loc) == target {
                sum += page_cost;
                break;
            }
            sum += theoretical_fpr(&run.bloom().params(), run.entry_count()) * page_cost;
        }
        Ok(table[0] * sum)
    }

    /// Counter snapshot plus per-run filter health. `fpr_probes` random keys
    /// are drawn per run to measure the false-positive rate.
    pub fn stats(&self, fpr_probes: u64, seed: u64) -> LsmStats {
        let runs: Vec<_> = self.runs().collect();
        let runs = runs
            .par_iter()
            .map(|(loc, run)| {
                let bloom = run.bloom();
                let params = bloom.params();
                RunStats {
                    location: *loc,
                    id: run.id(),
                    file: run.file_name(),
                    n: run.entry_count(),
                    m_bits: params.m_bits,
                    k_hashes: params.k_hashes,
                    set_bits: bloom.set_count(),
                    fill_fraction: bloom.fill_fraction(),
                    theoretical_fpr: theoretical_fpr(&params, run.entry_count()),
                    measured_fpr: if fpr_probes == 0 {
                        0.0
                    } else {
                        bloom.measure_fpr(fpr_probes, seed ^ run.id())
                    },
                }
            })
            .collect();
        LsmStats {
            io: self.io(),
            memtable_entries: self.memtable.len(),
            runs,
        }
    }
}
