use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spec::{Phase, PhaseKind, WorkloadSpec};
use crate::adversary::{craft_saturating_with_effort, AttackBudget};
use crate::bloom::BloomParams;
use crate::error::{Error, Result};
use crate::lsm::{KvStore, Outcome, PublicParams, RunStats, Store};
use crate::prp::PrpKey;

/// Smallest accepted repeat count; summaries report the median across repeats.
pub const MIN_REPEATS: usize = 5;

/// Per-phase metrics, in CSV column order.
pub const METRICS: [&str; 13] = [
    "ops",
    "p50_ns",
    "p95_ns",
    "p99_ns",
    "mean_ns",
    "pages_read_per_op",
    "hit_pages_per_op",
    "bf_false_positives_per_op",
    "hit_rate",
    "run_count",
    "max_measured_fpr",
    "mean_measured_fpr",
    "crafted_runs",
];

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub repeats: usize,
    /// Random probes per run when measuring filter false-positive rates.
    pub fpr_probes: u64,
    /// Patience of the crafter in crafted-insert phases; see
    /// [`craft_saturating_with_effort`].
    pub craft_effort: f64,
    pub craft_candidates: u64,
    /// Permutation key for hardened stores. `None` derives one per repeat
    /// from `key_seed`.
    pub prp_key: Option<PrpKey>,
    pub key_seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            repeats: MIN_REPEATS,
            fpr_probes: 10_000,
            craft_effort: 1.0,
            craft_candidates: 1 << 40,
            prp_key: None,
            key_seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PhaseMetrics {
    pub phase: usize,
    pub kind: PhaseKind,
    pub repeat: usize,
    pub ops: u64,
    pub p50_ns: f64,
    pub p95_ns: f64,
    pub p99_ns: f64,
    pub mean_ns: f64,
    pub pages_read_per_op: f64,
    /// Pages read by the run that held the answer, per op.
    pub hit_pages_per_op: f64,
    pub bf_false_positives_per_op: f64,
    pub hit_rate: f64,
    pub run_count: u64,
    pub max_measured_fpr: f64,
    pub mean_measured_fpr: f64,
    pub crafted_runs: u64,
    /// Entry counts per level, L1 first, runs newest first.
    pub layout: Vec<Vec<u64>>,
    pub runs: Vec<RunStats>,
}

impl PhaseMetrics {
    pub fn metric(&self, name: &str) -> Option<f64> {
        Some(match name {
            "ops" => self.ops as f64,
            "p50_ns" => self.p50_ns,
            "p95_ns" => self.p95_ns,
            "p99_ns" => self.p99_ns,
            "mean_ns" => self.mean_ns,
            "pages_read_per_op" => self.pages_read_per_op,
            "hit_pages_per_op" => self.hit_pages_per_op,
            "bf_false_positives_per_op" => self.bf_false_positives_per_op,
            "hit_rate" => self.hit_rate,
            "run_count" => self.run_count as f64,
            "max_measured_fpr" => self.max_measured_fpr,
            "mean_measured_fpr" => self.mean_measured_fpr,
            "crafted_runs" => self.crafted_runs as f64,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PhaseSummary {
    pub phase: usize,
    pub kind: PhaseKind,
    pub median: BTreeMap<String, f64>,
    pub sd: BTreeMap<String, f64>,
}

impl PhaseSummary {
    pub fn median(&self, metric: &str) -> f64 {
        self.median.get(metric).copied().unwrap_or(f64::NAN)
    }

    pub fn sd(&self, metric: &str) -> f64 {
        self.sd.get(metric).copied().unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub params: PublicParams,
    pub spec: WorkloadSpec,
    pub repeats: usize,
    pub summary: Vec<PhaseSummary>,
    /// `results[repeat][phase]`.
    pub results: Vec<Vec<PhaseMetrics>>,
}

impl BenchReport {
    pub fn is_empty(&self) -> bool {
        self.summary.is_empty()
    }

    pub fn phase(&self, phase: usize) -> Option<&PhaseSummary> {
        self.summary.get(phase)
    }

    /// Median of `metric` per phase, against the phase index.
    pub fn series(&self, metric: &str) -> Series {
        Series {
            title: format!("median {metric} per phase"),
            x_label: "phase".into(),
            y_label: metric.into(),
            points: self.summary.iter().map(|s| (s.phase as f64, s.median(metric))).collect(),
        }
    }
}

/// Runs every phase of `spec` against a fresh store under `dir`, `repeats`
/// times. Repeat `r` draws phase randomness from stream `r` of each phase's
/// seed, so identical inputs give identical page counts. The store is saved
/// and reopened before any lookup phase that follows a write phase, so
/// lookups see on-disk state only.
pub fn run_benchmark(
    spec: &WorkloadSpec,
    params: &PublicParams,
    cfg: &BenchConfig,
    dir: &Path,
) -> Result<BenchReport> {
    spec.validate()?;
    params.validate()?;
    if cfg.repeats < MIN_REPEATS {
        return Err(Error::InvalidSpec(format!(
            "at least {MIN_REPEATS} repeats are required, got {}",
            cfg.repeats
        )));
    }
    if cfg.prp_key.is_some() && !params.hardened {
        return Err(Error::InvalidParams("a permutation key was supplied for a plain store".into()));
    }
    let mut report = BenchReport {
        params: params.clone(),
        spec: spec.clone(),
        repeats: cfg.repeats,
        summary: Vec::new(),
        results: Vec::new(),
    };
    if spec.is_empty() {
        return Ok(report);
    }
    for repeat in 0..cfg.repeats {
        let store_dir = dir.join(format!("repeat-{repeat}"));
        if store_dir.exists() {
            fs::remove_dir_all(&store_dir)?;
        }
        let metrics = run_repeat(spec, params, cfg, &store_dir, repeat);
        fs::remove_dir_all(&store_dir)?;
        report.results.push(metrics?);
    }
    report.summary = summarize(&report.results);
    Ok(report)
}

fn run_repeat(
    spec: &WorkloadSpec,
    params: &PublicParams,
    cfg: &BenchConfig,
    dir: &Path,
    repeat: usize,
) -> Result<Vec<PhaseMetrics>> {
    let key = params.hardened.then(|| {
        cfg.prp_key
            .clone()
            .unwrap_or_else(|| PrpKey::generate(Some(cfg.key_seed ^ (repeat as u64).wrapping_mul(GOLDEN))))
    });
    let open = || Store::open(dir, params.clone(), key.clone(), None).map(|(s, _)| s);
    let mut store = open()?;
    let mut live = LiveSet::default();
    let mut dirty = false;
    let mut out = Vec::with_capacity(spec.phases.len());
    for (i, phase) in spec.phases.iter().enumerate() {
        if phase.kind.is_lookup() && dirty {
            store.save()?;
            drop(store);
            store = open()?;
            dirty = false;
        }
        let mut rng = ChaCha20Rng::seed_from_u64(phase.rng_seed);
        rng.set_stream(repeat as u64);
        let before = store.engine().io();
        let run = run_phase(&mut store, &mut live, phase, cfg, &mut rng)?;
        let io = store.engine().io().since(&before);
        dirty |= !phase.kind.is_lookup();

        let stats = store.engine().stats(cfg.fpr_probes, rng.gen());
        let mut layout = vec![Vec::new(); store.engine().levels().len()];
        for r in &stats.runs {
            layout[r.location.level - 1].push(r.n);
        }
        let per_op = |x: u64| if run.ops == 0 { 0.0 } else { x as f64 / run.ops as f64 };
        let fprs: Vec<f64> = stats.runs.iter().map(|r| r.measured_fpr).collect();
        let (p50, p95, p99, mean) = latency_summary(run.samples);
        out.push(PhaseMetrics {
            phase: i,
            kind: phase.kind,
            repeat,
            ops: run.ops,
            p50_ns: p50,
            p95_ns: p95,
            p99_ns: p99,
            mean_ns: mean,
            pages_read_per_op: per_op(io.pages_read),
            hit_pages_per_op: per_op(run.hit_pages),
            bf_false_positives_per_op: per_op(io.bf_false_positives),
            hit_rate: per_op(run.hits),
            run_count: stats.runs.len() as u64,
            max_measured_fpr: fprs.iter().copied().fold(0.0, f64::max),
            mean_measured_fpr: if fprs.is_empty() { 0.0 } else { fprs.iter().sum::<f64>() / fprs.len() as f64 },
            crafted_runs: run.crafted_runs,
            layout,
            runs: stats.runs,
        });
    }
    store.save()?;
    Ok(out)
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Default)]
struct PhaseRun {
    ops: u64,
    /// Nanoseconds per operation, one sample per batch.
    samples: Vec<f64>,
    hits: u64,
    hit_pages: u64,
    crafted_runs: u64,
}

fn run_phase(
    store: &mut Store,
    live: &mut LiveSet,
    phase: &Phase,
    cfg: &BenchConfig,
    rng: &mut ChaCha20Rng,
) -> Result<PhaseRun> {
    let mut run = PhaseRun::default();
    let keys: Vec<Vec<u8>> = match phase.kind {
        PhaseKind::UniformInsert => (0..phase.count).map(|_| rng.gen::<[u8; 12]>().to_vec()).collect(),
        PhaseKind::CraftedInsert => {
            let (keys, targeted) = crafted_keys(store, phase, cfg, rng)?;
            run.crafted_runs = targeted;
            keys
        }
        PhaseKind::Delete => {
            let n = phase.count.min(live.len() as u64);
            (0..n).map(|_| live.remove_random(rng)).collect()
        }
        PhaseKind::ExistingLookup => {
            if live.len() == 0 {
                Vec::new()
            } else {
                (0..phase.count).map(|_| live.sample(rng)).collect()
            }
        }
        PhaseKind::ZeroResultLookup => (0..phase.count)
            .map(|_| loop {
                let k = rng.gen::<[u8; 10]>();
                if !live.contains(&k) {
                    break k.to_vec();
                }
            })
            .collect(),
    };
    run.ops = keys.len() as u64;
    let value = [0u8; 8];
    for batch in keys.chunks(phase.batch_size.min(usize::MAX as u64) as usize) {
        let start = Instant::now();
        match phase.kind {
            PhaseKind::UniformInsert | PhaseKind::CraftedInsert => {
                for k in batch {
                    store.put(k, &value)?;
                }
            }
            PhaseKind::Delete => {
                for k in batch {
                    store.delete(k)?;
                }
            }
            PhaseKind::ExistingLookup | PhaseKind::ZeroResultLookup => {
                for k in batch {
                    let trace = store.get_traced(k)?;
                    if matches!(trace.outcome, Outcome::Found(_)) {
                        run.hits += 1;
                        run.hit_pages += trace.steps.last().map_or(0, |s| s.pages_read as u64);
                    }
                }
            }
        }
        run.samples.push(start.elapsed().as_nanos() as f64 / batch.len() as f64);
    }
    if matches!(phase.kind, PhaseKind::UniformInsert | PhaseKind::CraftedInsert) {
        for k in &keys {
            live.insert(k);
        }
    }
    if phase.kind == PhaseKind::ZeroResultLookup && run.hits > 0 {
        return Err(Error::InvalidSpec(format!(
            "{} zero-result lookups found a value",
            run.hits
        )));
    }
    Ok(run)
}

/// Crafts saturating keys against the filters of the first
/// `round(fraction * runs)` runs in probe order, reading only their public
/// sizes. Returns the keys, capped at the phase count, and the runs targeted.
fn crafted_keys(
    store: &Store,
    phase: &Phase,
    cfg: &BenchConfig,
    rng: &mut ChaCha20Rng,
) -> Result<(Vec<Vec<u8>>, u64)> {
    let stats = store.engine().stats(0, 0);
    let hash_seed = store.engine().params().hash_seed;
    let targeted = (phase.fraction * stats.runs.len() as f64).round() as usize;
    let jobs: Vec<(BloomParams, u64)> = stats.runs[..targeted]
        .iter()
        .map(|r| Ok((BloomParams::new(r.m_bits, r.k_hashes, hash_seed)?, rng.gen())))
        .collect::<Result<_>>()?;
    let crafted: Vec<Vec<Vec<u8>>> = jobs
        .par_iter()
        .map(|(p, seed)| {
            let budget = AttackBudget::new(cfg.craft_candidates, *seed)?;
            Ok(craft_saturating_with_effort(p, &budget, cfg.craft_effort)?.keys)
        })
        .collect::<Result<_>>()?;
    let keys = crafted.into_iter().flatten().take(phase.count.min(usize::MAX as u64) as usize).collect();
    Ok((keys, targeted as u64))
}

/// Nearest-rank p50/p95/p99 and the mean.
fn latency_summary(mut samples: Vec<f64>) -> (f64, f64, f64, f64) {
    if samples.is_empty() {
        return (0.0, 0.0, 0.0, 0.0);
    }
    samples.sort_by(f64::total_cmp);
    let rank = |q: f64| samples[((q * samples.len() as f64).ceil() as usize).clamp(1, samples.len()) - 1];
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    (rank(0.50), rank(0.95), rank(0.99), mean)
}

fn summarize(results: &[Vec<PhaseMetrics>]) -> Vec<PhaseSummary> {
    let Some(first) = results.first() else {
        return Vec::new();
    };
    first
        .iter()
        .map(|p| {
            let mut median = BTreeMap::new();
            let mut sd = BTreeMap::new();
            for name in METRICS {
                let values: Vec<f64> = results.iter().filter_map(|r| r[p.phase].metric(name)).collect();
                median.insert(name.to_string(), median_of(&values));
                sd.insert(name.to_string(), std_dev(&values));
            }
            PhaseSummary {
                phase: p.phase,
                kind: p.kind,
                median,
                sd,
            }
        })
        .collect()
}

pub fn median_of(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    }
}

/// Sample standard deviation; zero for fewer than two values.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    var.sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub phase: usize,
    pub kind: PhaseKind,
    pub repeat: usize,
    pub metric: String,
    pub value: f64,
}

/// One row per (phase, repeat, metric).
pub fn emit_csv(report: &BenchReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for repeat in &report.results {
        for p in repeat {
            for name in METRICS {
                w.serialize(CsvRow {
                    phase: p.phase,
                    kind: p.kind,
                    repeat: p.repeat,
                    metric: name.into(),
                    value: p.metric(name).unwrap_or(f64::NAN),
                })?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// A figure-style series of `(x, y)` points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn is_monotone_nondecreasing(&self) -> bool {
        self.points.windows(2).all(|w| w[1].1 >= w[0].1)
    }

    /// Two whitespace-separated columns with `#` comment headers, as gnuplot
    /// reads them.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        writeln!(f, "# {}", self.title)?;
        writeln!(f, "# {} {}", self.x_label, self.y_label)?;
        for (x, y) in &self.points {
            writeln!(f, "{x} {y}")?;
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Vec<(f64, f64)>> {
        let text = fs::read_to_string(path)?;
        text.lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
            .map(|l| {
                let mut cols = l.split_whitespace().map(str::parse::<f64>);
                match (cols.next(), cols.next()) {
                    (Some(Ok(x)), Some(Ok(y))) => Ok((x, y)),
                    _ => Err(Error::InvalidSpec(format!("bad series line `{l}`"))),
                }
            })
            .collect()
    }
}

/// Writes `<metric>.dat` under `dir` for the page-count and median-latency
/// series of `report`, returning the paths written.
pub fn emit_plot_data(report: &BenchReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    ["pages_read_per_op", "p50_ns"]
        .into_iter()
        .map(|metric| {
            let path = dir.join(format!("{metric}.dat"));
            report.series(metric).write(&path)?;
            Ok(path)
        })
        .collect()
}

/// Keys currently live in the store, with O(1) uniform sampling.
#[derive(Default)]
struct LiveSet {
    keys: Vec<SmallKey>,
    index: HashMap<SmallKey, u32>,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct SmallKey {
    len: u8,
    bytes: [u8; 15],
}

impl SmallKey {
    fn new(key: &[u8]) -> Self {
        let mut bytes = [0u8; 15];
        bytes[..key.len()].copy_from_slice(key);
        SmallKey {
            len: key.len() as u8,
            bytes,
        }
    }

    fn to_vec(self) -> Vec<u8> {
        self.bytes[..self.len as usize].to_vec()
    }
}

impl LiveSet {
    fn len(&self) -> usize {
        self.keys.len()
    }

    fn contains(&self, key: &[u8]) -> bool {
        self.index.contains_key(&SmallKey::new(key))
    }

    fn insert(&mut self, key: &[u8]) {
        let k = SmallKey::new(key);
        if !self.index.contains_key(&k) {
            self.index.insert(k, self.keys.len() as u32);
            self.keys.push(k);
        }
    }

    fn sample(&self, rng: &mut ChaCha20Rng) -> Vec<u8> {
        self.keys[rng.gen_range(0..self.keys.len())].to_vec()
    }

    fn remove_random(&mut self, rng: &mut ChaCha20Rng) -> Vec<u8> {
        let i = rng.gen_range(0..self.keys.len());
        let k = self.keys.swap_remove(i);
        self.index.remove(&k);
        if let Some(moved) = self.keys.get(i) {
            self.index.insert(*moved, i as u32);
        }
        k.to_vec()
    }
}
