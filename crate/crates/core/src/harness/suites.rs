use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bench::{run_benchmark, BenchConfig, BenchReport, Series};
use super::spec::{Phase, PhaseKind, WorkloadSpec};
use crate::error::Result;
use crate::lsm::PublicParams;
use crate::prp::PrpKey;

/// Attack intensities swept by [`intensity_sweep`]: fractions of runs whose
/// filters are targeted.
pub const INTENSITIES: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteScale {
    pub inserts: u64,
    pub lookups: u64,
    pub repeats: usize,
    pub fpr_probes: u64,
    pub seed: u64,
    pub craft_effort: f64,
}

impl Default for SuiteScale {
    fn default() -> Self {
        SuiteScale {
            inserts: 1_000_000,
            lookups: 50_000,
            repeats: 5,
            fpr_probes: 10_000,
            seed: 0,
            craft_effort: 1.0,
        }
    }
}

impl SuiteScale {
    fn bench_config(&self) -> BenchConfig {
        BenchConfig {
            repeats: self.repeats,
            fpr_probes: self.fpr_probes,
            craft_effort: self.craft_effort,
            key_seed: self.seed,
            ..BenchConfig::default()
        }
    }
}

/// Load, probe, attack the given fraction of runs, probe again.
pub fn attack_spec(scale: &SuiteScale, intensity: f64) -> WorkloadSpec {
    let s = scale.seed;
    WorkloadSpec::new(vec![
        Phase::new(PhaseKind::UniformInsert, scale.inserts, s),
        Phase::new(PhaseKind::ZeroResultLookup, scale.lookups, s.wrapping_add(1)),
        Phase::new(PhaseKind::CraftedInsert, u64::MAX, s.wrapping_add(2)).fraction(intensity),
        Phase::new(PhaseKind::ZeroResultLookup, scale.lookups, s.wrapping_add(3)),
    ])
}

#[derive(Clone, Debug, Serialize)]
pub struct AttackReport {
    pub hardened: bool,
    pub intensity: f64,
    pub runs_before: f64,
    pub runs_after: f64,
    pub crafted_keys: f64,
    pub pre_pages: f64,
    pub pre_pages_sd: f64,
    pub post_pages: f64,
    pub post_pages_sd: f64,
    /// Post-attack over pre-attack median pages per zero-result lookup.
    pub inflation: f64,
    pub report: BenchReport,
}

impl AttackReport {
    /// Post-attack median within two pre-attack standard deviations.
    pub fn within_two_sd(&self) -> bool {
        (self.post_pages - self.pre_pages).abs() <= 2.0 * self.pre_pages_sd
    }
}

pub fn attack_suite(params: &PublicParams, scale: &SuiteScale, intensity: f64, dir: &Path) -> Result<AttackReport> {
    attack_suite_keyed(params, scale, intensity, None, dir)
}

/// As [`attack_suite`], with a fixed permutation key for a hardened store.
pub fn attack_suite_keyed(
    params: &PublicParams,
    scale: &SuiteScale,
    intensity: f64,
    prp_key: Option<PrpKey>,
    dir: &Path,
) -> Result<AttackReport> {
    let cfg = BenchConfig {
        prp_key,
        ..scale.bench_config()
    };
    let report = run_benchmark(&attack_spec(scale, intensity), params, &cfg, dir)?;
    let (pre, crafted, post) = (&report.summary[1], &report.summary[2], &report.summary[3]);
    Ok(AttackReport {
        hardened: params.hardened,
        intensity,
        runs_before: pre.median("run_count"),
        runs_after: post.median("run_count"),
        crafted_keys: crafted.median("ops"),
        pre_pages: pre.median("pages_read_per_op"),
        pre_pages_sd: pre.sd("pages_read_per_op"),
        post_pages: post.median("pages_read_per_op"),
        post_pages_sd: post.sd("pages_read_per_op"),
        inflation: post.median("pages_read_per_op") / pre.median("pages_read_per_op"),
        report,
    })
}

/// Full-intensity attack on a plain store.
pub fn degrade_suite(params: &PublicParams, scale: &SuiteScale, dir: &Path) -> Result<AttackReport> {
    attack_suite(&params.clone().hardened(false), scale, 1.0, dir)
}

/// Full-intensity attack on a hardened store.
pub fn secure_suite(params: &PublicParams, scale: &SuiteScale, dir: &Path) -> Result<AttackReport> {
    attack_suite(&params.clone().hardened(true), scale, 1.0, dir)
}

/// Runs the attack at each intensity and returns the reports with the series
/// of post-attack median pages per zero-result lookup.
pub fn intensity_sweep(
    params: &PublicParams,
    scale: &SuiteScale,
    intensities: &[f64],
    dir: &Path,
) -> Result<(Vec<AttackReport>, Series)> {
    let reports = intensities
        .iter()
        .enumerate()
        .map(|(i, &x)| attack_suite(params, scale, x, &dir.join(format!("intensity-{i}"))))
        .collect::<Result<Vec<_>>>()?;
    let series = Series {
        title: format!(
            "zero-result pages per lookup vs attack intensity ({})",
            if params.hardened { "hardened" } else { "plain" }
        ),
        x_label: "fraction_of_runs_attacked".into(),
        y_label: "pages_read_per_op".into(),
        points: reports.iter().map(|r| (r.intensity, r.post_pages)).collect(),
    };
    Ok((reports, series))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OverheadScale {
    pub inserts: u64,
    pub lookups: u64,
    pub repeats: usize,
    /// Operations per latency sample.
    pub batch_size: u64,
    pub seed: u64,
}

impl Default for OverheadScale {
    fn default() -> Self {
        OverheadScale {
            inserts: 200_000,
            lookups: 50_000,
            repeats: 5,
            batch_size: 64,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OverheadReport {
    pub plain_insert_p50_ns: f64,
    pub hardened_insert_p50_ns: f64,
    pub plain_lookup_p50_ns: f64,
    pub hardened_lookup_p50_ns: f64,
    /// Relative median latency increase of hardened over plain.
    pub insert_overhead: f64,
    pub lookup_overhead: f64,
    /// A second plain run against the first.
    pub aa_insert_delta_p50_ns: f64,
    pub aa_insert_sd_ns: f64,
    pub aa_lookup_delta_p50_ns: f64,
    pub aa_lookup_sd_ns: f64,
    pub aa_within_noise: bool,
    pub plain_lookup_pages: f64,
    pub hardened_lookup_pages: f64,
    pub plain_lookup_hit_pages: f64,
    pub hardened_lookup_hit_pages: f64,
    pub plain: BenchReport,
    pub plain_again: BenchReport,
    pub hardened: BenchReport,
}

impl OverheadReport {
    /// Existing-key lookups read exactly the same pages from the run holding
    /// the key in both modes.
    pub fn hit_pages_parity(&self) -> bool {
        self.plain_lookup_hit_pages == self.hardened_lookup_hit_pages
    }
}

/// Plain against hardened insert and existing-key lookup latency, plus a
/// plain A/A run to size the noise.
pub fn overhead_benchmark(params: &PublicParams, scale: &OverheadScale, dir: &Path) -> Result<OverheadReport> {
    let spec = WorkloadSpec::new(vec![
        Phase::new(PhaseKind::UniformInsert, scale.inserts, scale.seed).batch_size(scale.batch_size),
        Phase::new(PhaseKind::ExistingLookup, scale.lookups, scale.seed.wrapping_add(1)).batch_size(scale.batch_size),
    ]);
    let cfg = BenchConfig {
        repeats: scale.repeats,
        fpr_probes: 0,
        key_seed: scale.seed,
        ..BenchConfig::default()
    };
    let plain_params = params.clone().hardened(false);
    let plain = run_benchmark(&spec, &plain_params, &cfg, &dir.join("plain"))?;
    let plain_again = run_benchmark(&spec, &plain_params, &cfg, &dir.join("plain-again"))?;
    let hardened = run_benchmark(&spec, &params.clone().hardened(true), &cfg, &dir.join("hardened"))?;

    let p50 = |r: &BenchReport, phase: usize| r.summary[phase].median("p50_ns");
    let sd = |r: &BenchReport, phase: usize| r.summary[phase].sd("p50_ns");
    let aa_insert_delta = p50(&plain_again, 0) - p50(&plain, 0);
    let aa_lookup_delta = p50(&plain_again, 1) - p50(&plain, 1);
    let aa_insert_sd = sd(&plain, 0).max(sd(&plain_again, 0));
    let aa_lookup_sd = sd(&plain, 1).max(sd(&plain_again, 1));
    Ok(OverheadReport {
        plain_insert_p50_ns: p50(&plain, 0),
        hardened_insert_p50_ns: p50(&hardened, 0),
        plain_lookup_p50_ns: p50(&plain, 1),
        hardened_lookup_p50_ns: p50(&hardened, 1),
        insert_overhead: p50(&hardened, 0) / p50(&plain, 0) - 1.0,
        lookup_overhead: p50(&hardened, 1) / p50(&plain, 1) - 1.0,
        aa_insert_delta_p50_ns: aa_insert_delta,
        aa_insert_sd_ns: aa_insert_sd,
        aa_lookup_delta_p50_ns: aa_lookup_delta,
        aa_lookup_sd_ns: aa_lookup_sd,
        aa_within_noise: aa_insert_delta.abs() <= 2.0 * aa_insert_sd && aa_lookup_delta.abs() <= 2.0 * aa_lookup_sd,
        plain_lookup_pages: plain.summary[1].median("pages_read_per_op"),
        hardened_lookup_pages: hardened.summary[1].median("pages_read_per_op"),
        plain_lookup_hit_pages: plain.summary[1].median("hit_pages_per_op"),
        hardened_lookup_hit_pages: hardened.summary[1].median("hit_pages_per_op"),
        plain,
        plain_again,
        hardened,
    })
}
