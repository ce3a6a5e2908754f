use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use smashlsm::adversary::{
    craft_saturating, deleted_insertion_scenario, saturation_timing, smash_bloom_game, smash_lsm_game,
    write_timing_csv, Adversary, AttackBudget, CraftedInsertStateRead, GameConfig, MemberEcho, QueryThenGuess,
    RandomGuess, ScenarioConfig, StateReadingBruteForce, Target,
};
use smashlsm::bloom::{BloomFilter, BloomParams};
use smashlsm::harness::{
    attack_suite_keyed, degrade_suite, emit_csv, emit_plot_data, intensity_sweep, overhead_benchmark,
    run_benchmark,
    AttackReport, BenchConfig, BenchReport, OverheadScale, SuiteScale, WorkloadSpec, INTENSITIES, METRICS,
};
use smashlsm::lsm::{KvStore, Outcome, PublicParams, Store};
use smashlsm::prp::PrpKey;
use smashlsm::storage::MANIFEST_FILE;

use crate::args::*;
use crate::Failure;

type Result<T> = std::result::Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Validated global flags.
struct Ctx {
    dir: PathBuf,
    params: PublicParams,
    key: Option<PrpKey>,
    out_dir: Option<PathBuf>,
    seed: Option<u64>,
    json: bool,
    verbose: u8,
}

impl Ctx {
    fn new(g: &GlobalArgs) -> Result<Ctx> {
        let mut params = match &g.config {
            Some(path) => PublicParams::from_config(
                &fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?,
            )?,
            None => PublicParams::default(),
        };
        if let Some(v) = g.bits_per_key {
            params.bits_per_key = v;
        }
        if let Some(v) = g.k_hashes {
            params.bloom_k = v;
        }
        if let Some(v) = g.size_ratio {
            params.size_ratio = v;
        }
        if let Some(v) = g.memtable_cap {
            params.memtable_capacity = v;
        }
        if g.memtable_bytes.is_some() {
            params.memtable_bytes = g.memtable_bytes;
        }
        if let Some(v) = g.block_size {
            params.block_size = v;
        }
        if let Some(v) = g.hash_seed {
            params.hash_seed = v;
        }
        let params = params.hardened(g.hardened);
        params.validate()?;
        let key = g.prp_key_hex.as_deref().map(PrpKey::from_hex).transpose()?;
        if key.is_some() && !g.hardened {
            return Err(usage("--prp-key-hex requires --hardened"));
        }
        Ok(Ctx {
            dir: g.dir.clone(),
            params,
            key,
            out_dir: g.out_dir.clone(),
            seed: g.seed,
            json: g.json,
            verbose: g.verbose,
        })
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn target(&self) -> Target {
        if self.params.hardened {
            Target::Hardened
        } else {
            Target::Plain
        }
    }

    fn progress(&self, msg: &str) {
        if self.verbose > 0 {
            eprintln!("{msg}");
        }
    }

    fn reject_key(&self, what: &str) -> Result<()> {
        match self.key {
            Some(_) => Err(usage(format!("--prp-key-hex does not apply to {what}; it draws its own keys"))),
            None => Ok(()),
        }
    }

    fn open_store(&self) -> Result<Store> {
        let exists = self.dir.join(MANIFEST_FILE).exists();
        if self.params.hardened && self.key.is_none() && exists {
            return Err(usage("this hardened store was created earlier; pass its --prp-key-hex"));
        }
        let (store, generated) = Store::open(&self.dir, self.params.clone(), self.key.clone(), self.seed)?;
        if let Some(k) = generated {
            eprintln!("generated permutation key (keep it to reopen this store): {}", k.to_hex());
        }
        Ok(store)
    }

    /// Creates the output directory when one was given.
    fn out(&self) -> Result<Option<&Path>> {
        match &self.out_dir {
            Some(d) => {
                fs::create_dir_all(d)?;
                Ok(Some(d))
            }
            None => Ok(None),
        }
    }

    fn write_json(&self, name: &str, value: &impl serde::Serialize) -> Result<()> {
        if let Some(d) = self.out()? {
            fs::write(d.join(name), serde_json::to_string_pretty(value)?)?;
        }
        Ok(())
    }

    /// Prints `value` as JSON in `--json` mode and `text` otherwise.
    fn emit(&self, value: &impl serde::Serialize, text: impl FnOnce() -> String) -> Result<()> {
        if self.json {
            println!("{}", serde_json::to_string_pretty(value)?);
        } else {
            print!("{}", text());
        }
        Ok(())
    }

    fn work_dir(&self, name: &str) -> Result<tempfile::TempDir> {
        fs::create_dir_all(&self.dir)?;
        Ok(tempfile::Builder::new().prefix(name).tempdir_in(&self.dir)?)
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx::new(&cli.global)?;
    match cli.command {
        Command::Db(cmd) => db(&ctx, cmd),
        Command::Attack(cmd) => attack(&ctx, cmd),
        Command::Game(cmd) => game(&ctx, cmd),
        Command::Scenario(cmd) => scenario(&ctx, cmd),
        Command::Bench(cmd) => bench(&ctx, cmd),
    }
}

fn decode(s: &str, enc: &KeyArgs) -> Result<Vec<u8>> {
    if enc.hex {
        hex::decode(s).map_err(|e| usage(format!("`{s}` is not hex: {e}")))
    } else {
        Ok(s.as_bytes().to_vec())
    }
}

fn encode(bytes: &[u8], hex_out: bool) -> String {
    if hex_out {
        hex::encode(bytes)
    } else {
        String::from_utf8_lossy(bytes).into_owned()
    }
}

fn db(ctx: &Ctx, cmd: DbCommand) -> Result<()> {
    match cmd {
        DbCommand::Put { key, value, enc } => {
            let (k, v) = (decode(&key, &enc)?, decode(&value, &enc)?);
            let mut store = ctx.open_store()?;
            store.put(&k, &v)?;
            store.save()?;
            ctx.emit(&json!({"op": "put", "key": key, "status": "OK"}), || "OK\n".into())
        }
        DbCommand::Del { key, enc } => {
            let k = decode(&key, &enc)?;
            let mut store = ctx.open_store()?;
            store.delete(&k)?;
            store.save()?;
            ctx.emit(&json!({"op": "del", "key": key, "status": "OK"}), || "OK\n".into())
        }
        DbCommand::Get { key, enc } => {
            let k = decode(&key, &enc)?;
            let store = ctx.open_store()?;
            let trace = store.get_traced(&k)?;
            let pages = trace.pages_read();
            match trace.outcome {
                Outcome::Found(v) => {
                    let shown = encode(&v, enc.hex);
                    ctx.emit(
                        &json!({"key": key, "found": true, "value": shown, "pages_read": pages}),
                        || format!("{shown}\n"),
                    )
                }
                Outcome::ZeroResult => ctx.emit(
                    &json!({"key": key, "found": false, "value": null, "pages_read": pages}),
                    || "NOT_FOUND\n".into(),
                ),
            }
        }
        DbCommand::Stats { fpr_probes } => {
            let store = ctx.open_store()?;
            let engine = store.engine();
            let stats = engine.stats(fpr_probes, ctx.seed());
            let value = json!({
                "params": engine.params(),
                "hardened": store.is_hardened(),
                "memtable_entries": stats.memtable_entries,
                "run_count": stats.runs.len(),
                "total_run_entries": stats.total_run_entries(),
                "io": stats.io,
                "runs": stats.runs,
            });
            ctx.emit(&value, || {
                let mut s = format!(
                    "hardened: {}\nruns: {}\nentries on disk: {}\n",
                    store.is_hardened(),
                    stats.runs.len(),
                    stats.total_run_entries()
                );
                for r in &stats.runs {
                    s.push_str(&format!(
                        "L{} #{} {} n={} m={} k={} fill={:.4} fpr(theory)={:.5} fpr(measured)={:.5}\n",
                        r.location.level,
                        r.location.index,
                        r.file,
                        r.n,
                        r.m_bits,
                        r.k_hashes,
                        r.fill_fraction,
                        r.theoretical_fpr,
                        r.measured_fpr
                    ));
                }
                s
            })
        }
        DbCommand::DumpRun { run, limit } => {
            let store = ctx.open_store()?;
            let engine = store.engine();
            let (loc, handle) = engine
                .runs()
                .find(|(_, h)| h.file_name() == run || h.id().to_string() == run)
                .ok_or_else(|| usage(format!("no run `{run}` in the store")))?;
            let mut entries = Vec::new();
            for e in handle.iter().take(limit.unwrap_or(usize::MAX)) {
                let e = e?;
                entries.push(json!({
                    "key": hex::encode(&e.key),
                    "value": e.value.as_deref().map(hex::encode),
                    "seq": e.seq,
                }));
            }
            let bloom = handle.bloom();
            let fence: Vec<Value> = handle
                .fence()
                .records()
                .iter()
                .map(|r| json!({"first_key": hex::encode(&r.first_key), "offset": r.offset, "len": r.len}))
                .collect();
            let value = json!({
                "file": handle.file_name(),
                "id": handle.id(),
                "level": loc.level,
                "index": loc.index,
                "entries_total": handle.entry_count(),
                "block_size": handle.block_size(),
                "blocks": fence.len(),
                "fence": fence,
                "bloom": {
                    "m_bits": bloom.params().m_bits,
                    "k_hashes": bloom.params().k_hashes,
                    "set_bits": bloom.set_count(),
                    "fill_fraction": bloom.fill_fraction(),
                },
                "entries": entries,
            });
            ctx.emit(&value, || {
                let mut s = format!(
                    "{} id={} L{} #{} entries={}\nblocks: {} of {} bytes\nbloom: m={} k={} set={} fill={:.4}\n",
                    handle.file_name(),
                    handle.id(),
                    loc.level,
                    loc.index,
                    handle.entry_count(),
                    handle.fence().len(),
                    handle.block_size(),
                    bloom.params().m_bits,
                    bloom.params().k_hashes,
                    bloom.set_count(),
                    bloom.fill_fraction()
                );
                for r in handle.fence().records() {
                    s.push_str(&format!("block @{} len {} first {}\n", r.offset, r.len, hex::encode(&r.first_key)));
                }
                for e in &entries {
                    s.push_str(&format!(
                        "{} {} seq={}\n",
                        e["key"].as_str().unwrap_or(""),
                        e["value"].as_str().unwrap_or("<tombstone>"),
                        e["seq"]
                    ));
                }
                s
            })
        }
    }
}

fn attack(ctx: &Ctx, cmd: AttackCommand) -> Result<()> {
    match cmd {
        AttackCommand::Saturate { m, k, max_candidates } => {
            let params = BloomParams::new(m, k, ctx.params.hash_seed)?;
            let budget = AttackBudget::new(max_candidates, ctx.seed())?;
            ctx.progress(&format!("crafting against m={m} k={k}"));
            let out = craft_saturating(&params, &budget)?;
            let mut filter = BloomFilter::new(params)?;
            for key in &out.keys {
                filter.insert(key);
            }
            let fpr = filter.measure_fpr(10_000, ctx.seed());
            let keys: Vec<String> = out.keys.iter().map(hex::encode).collect();
            let value = json!({
                "m_bits": m,
                "k_hashes": k,
                "hash_seed": ctx.params.hash_seed,
                "keys_crafted": keys.len(),
                "bound": (m as u64).div_ceil(k as u64),
                "candidates_tried": out.candidates_tried,
                "fill_fraction": filter.fill_fraction(),
                "measured_fpr": fpr,
                "keys": keys,
            });
            if let Some(d) = ctx.out()? {
                fs::write(d.join("saturating-keys.txt"), keys.join("\n") + "\n")?;
            }
            ctx.write_json("saturate.json", &value)?;
            ctx.emit(&value, || {
                format!(
                    "keys: {} (m/k = {})\ncandidates tried: {}\nfill: {}\nmeasured fpr: {}\n",
                    keys.len(),
                    (m as u64).div_ceil(k as u64),
                    out.candidates_tried,
                    filter.fill_fraction(),
                    fpr
                )
            })
        }
        AttackCommand::Timing {
            m_values,
            k,
            seeds,
            max_candidates,
        } => {
            let base = ctx.seed();
            let seeds: Vec<u64> = (0..seeds).map(|i| base.wrapping_add(i)).collect();
            ctx.progress("timing saturation");
            let rows = saturation_timing(&m_values, k, ctx.params.hash_seed, &seeds, max_candidates)?;
            if let Some(d) = ctx.out()? {
                write_timing_csv(&rows, &d.join("saturation_timing.csv"))?;
            }
            ctx.emit(&rows, || {
                let mut s = "m_bits k seed seconds candidates keys\n".to_string();
                for r in &rows {
                    s.push_str(&format!(
                        "{} {} {} {:.4} {} {}\n",
                        r.m_bits, r.k_hashes, r.seed, r.seconds, r.candidates_tried, r.keys
                    ));
                }
                s
            })
        }
    }
}

fn adversary(name: AdversaryName) -> Box<dyn Adversary> {
    match name {
        AdversaryName::StateReadingBruteForce => Box::new(StateReadingBruteForce::default()),
        AdversaryName::CraftedInsertStateRead => Box::new(CraftedInsertStateRead::default()),
        AdversaryName::MemberEcho => Box::new(MemberEcho),
        AdversaryName::RandomGuess => Box::new(RandomGuess),
        AdversaryName::QueryThenGuess => Box::new(QueryThenGuess),
    }
}

fn game(ctx: &Ctx, cmd: GameCommand) -> Result<()> {
    ctx.reject_key("games")?;
    let result = match cmd {
        GameCommand::SmashLsm { game } => {
            let mut cfg = GameConfig::new(game.n, game.t, game.trials, ctx.seed());
            cfg.transcript_samples = game.transcripts;
            cfg.work_dir = Some(ctx.dir.clone());
            ctx.progress("running smash-lsm");
            let params = ctx.params.clone().hardened(false);
            smash_lsm_game(adversary(game.adversary).as_ref(), &cfg, &params, ctx.target())?
        }
        GameCommand::SmashBloom { game, m, k } => {
            let mut cfg = GameConfig::new(game.n, game.t, game.trials, ctx.seed());
            cfg.transcript_samples = game.transcripts;
            ctx.progress("running smash-bloom");
            let params = BloomParams::new(m, k, ctx.params.hash_seed)?;
            smash_bloom_game(adversary(game.adversary).as_ref(), &cfg, params, ctx.target())?
        }
    };
    ctx.write_json(&format!("{}.json", result.game), &result)?;
    ctx.write_json(&format!("{}-transcripts.json", result.game), &result.transcripts)?;
    ctx.emit(&result, || {
        format!(
            "{} vs {} ({:?}): {}/{} wins, win rate {:.4} [{:.4}, {:.4}], forfeits {}, epsilon {:.5}\n\
             hygiene violations {}/{}, transcript mismatches {}/{}\n",
            result.adversary,
            result.game,
            result.target,
            result.wins,
            result.trials,
            result.win_rate,
            result.ci95.0,
            result.ci95.1,
            result.forfeits,
            result.epsilon,
            result.hygiene_violations,
            result.hygiene_checks,
            result.transcript_mismatches,
            result.verified_transcripts
        )
    })
}

fn scenario(ctx: &Ctx, cmd: ScenarioCommand) -> Result<()> {
    ctx.reject_key("scenarios")?;
    let ScenarioCommand::DeletedInserts {
        legit_keys,
        lookups,
        fpr_probes,
        max_candidates,
    } = cmd;
    let cfg = ScenarioConfig {
        legit_keys,
        fpr_probes,
        lookups,
        seed: ctx.seed(),
    };
    let budget = AttackBudget::new(max_candidates, ctx.seed())?;
    let work = ctx.work_dir("scenario-")?;
    ctx.progress("running deleted-inserts scenario");
    let r = deleted_insertion_scenario(&ctx.params, &budget, &cfg, ctx.target(), work.path())?;
    ctx.write_json("deleted-inserts.json", &r)?;
    ctx.emit(&r, || {
        let mut s = format!(
            "{:?} store, {} legitimate keys, {} crafted keys (fill {:.4}), epsilon {:.5}\n",
            r.target, r.legit_keys, r.crafted_keys, r.crafted_fill, r.epsilon
        );
        for p in &r.phases {
            s.push_str(&format!(
                "{:<22} runs {:>2}  max fpr {:.4}  zero-result pages {:.4}\n",
                p.phase,
                p.runs.len(),
                p.max_measured_fpr,
                p.zero_result_pages_mean
            ));
        }
        s
    })
}

fn suite_scale(ctx: &Ctx, s: &ScaleArgs) -> SuiteScale {
    SuiteScale {
        inserts: s.inserts,
        lookups: s.lookups,
        repeats: s.repeats,
        fpr_probes: s.fpr_probes,
        seed: ctx.seed(),
        craft_effort: s.effort,
    }
}

fn write_bench(ctx: &Ctx, report: &BenchReport) -> Result<()> {
    if let Some(d) = ctx.out()? {
        emit_csv(report, &d.join("bench.csv"))?;
        emit_plot_data(report, &d.join("plots"))?;
    }
    Ok(())
}

fn attack_text(r: &AttackReport) -> String {
    format!(
        "{} store: runs {} -> {}, crafted keys {}\n\
         zero-result pages per lookup: before {:.4} (sd {:.4}), after {:.4} (sd {:.4}), ratio {:.2}\n",
        if r.hardened { "hardened" } else { "plain" },
        r.runs_before,
        r.runs_after,
        r.crafted_keys,
        r.pre_pages,
        r.pre_pages_sd,
        r.post_pages,
        r.post_pages_sd,
        r.inflation
    )
}

fn summary_text(r: &BenchReport) -> String {
    let mut s = String::from("phase kind ops p50_ns p95_ns p99_ns pages/op runs\n");
    for p in &r.summary {
        s.push_str(&format!(
            "{} {} {} {:.0} {:.0} {:.0} {:.4} {}\n",
            p.phase,
            p.kind,
            p.median("ops"),
            p.median("p50_ns"),
            p.median("p95_ns"),
            p.median("p99_ns"),
            p.median("pages_read_per_op"),
            p.median("run_count")
        ));
    }
    s
}

fn bench(ctx: &Ctx, cmd: BenchCommand) -> Result<()> {
    let work = ctx.work_dir("bench-")?;
    match cmd {
        BenchCommand::Degrade { scale } => {
            ctx.reject_key("bench degrade")?;
            ctx.progress("running degradation suite");
            let r = degrade_suite(&ctx.params, &suite_scale(ctx, &scale), work.path())?;
            write_bench(ctx, &r.report)?;
            ctx.write_json("degrade.json", &r)?;
            ctx.emit(&r, || attack_text(&r))
        }
        BenchCommand::Secure { scale } => {
            ctx.progress("running hardened suite");
            let params = ctx.params.clone().hardened(true);
            let r = attack_suite_keyed(&params, &suite_scale(ctx, &scale), 1.0, ctx.key.clone(), work.path())?;
            write_bench(ctx, &r.report)?;
            ctx.write_json("secure.json", &r)?;
            ctx.emit(&r, || attack_text(&r))
        }
        BenchCommand::Sweep { scale } => {
            ctx.reject_key("bench sweep")?;
            ctx.progress("running intensity sweep");
            let (reports, series) = intensity_sweep(&ctx.params, &suite_scale(ctx, &scale), &INTENSITIES, work.path())?;
            if let Some(d) = ctx.out()? {
                series.write(&d.join("sweep.dat"))?;
            }
            let value = json!({ "series": series, "reports": reports });
            ctx.write_json("sweep.json", &value)?;
            ctx.emit(&value, || {
                let mut s = "intensity pages/op\n".to_string();
                for (x, y) in &series.points {
                    s.push_str(&format!("{x} {y:.4}\n"));
                }
                s
            })
        }
        BenchCommand::Overhead {
            inserts,
            lookups,
            repeats,
            batch_size,
        } => {
            ctx.reject_key("bench overhead")?;
            let scale = OverheadScale {
                inserts,
                lookups,
                repeats,
                batch_size,
                seed: ctx.seed(),
            };
            ctx.progress("running overhead benchmark");
            let r = overhead_benchmark(&ctx.params, &scale, work.path())?;
            ctx.write_json("overhead.json", &r)?;
            ctx.emit(&r, || {
                format!(
                    "insert p50: plain {:.0} ns, hardened {:.0} ns, overhead {:+.1}%\n\
                     lookup p50: plain {:.0} ns, hardened {:.0} ns, overhead {:+.1}%\n\
                     lookup pages/op: plain {:.4}, hardened {:.4}; hit pages/op: plain {}, hardened {}\n\
                     A/A: insert delta {:.0} ns (sd {:.0}), lookup delta {:.0} ns (sd {:.0}), within noise: {}\n",
                    r.plain_insert_p50_ns,
                    r.hardened_insert_p50_ns,
                    100.0 * r.insert_overhead,
                    r.plain_lookup_p50_ns,
                    r.hardened_lookup_p50_ns,
                    100.0 * r.lookup_overhead,
                    r.plain_lookup_pages,
                    r.hardened_lookup_pages,
                    r.plain_lookup_hit_pages,
                    r.hardened_lookup_hit_pages,
                    r.aa_insert_delta_p50_ns,
                    r.aa_insert_sd_ns,
                    r.aa_lookup_delta_p50_ns,
                    r.aa_lookup_sd_ns,
                    r.aa_within_noise
                )
            })
        }
        BenchCommand::Custom {
            spec,
            repeats,
            fpr_probes,
            effort,
        } => {
            let text = fs::read_to_string(&spec).map_err(|e| usage(format!("{}: {e}", spec.display())))?;
            let spec = WorkloadSpec::parse(&text)?;
            let cfg = BenchConfig {
                repeats,
                fpr_probes,
                craft_effort: effort,
                prp_key: ctx.key.clone(),
                key_seed: ctx.seed(),
                ..BenchConfig::default()
            };
            ctx.progress("running custom workload");
            let r = run_benchmark(&spec, &ctx.params, &cfg, work.path())?;
            write_bench(ctx, &r)?;
            ctx.write_json("summary.json", &summary_json(&r))?;
            ctx.emit(&summary_json(&r), || summary_text(&r))
        }
    }
}

fn summary_json(r: &BenchReport) -> Value {
    json!({
        "params": r.params,
        "spec": r.spec,
        "repeats": r.repeats,
        "metrics": METRICS,
        "phases": r.summary,
    })
}
