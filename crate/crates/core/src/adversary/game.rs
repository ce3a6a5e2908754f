//! Challengers for the Smash-Bloom and Smash-Lsm games. An adversary picks the
//! initial contents, then may make up to `t` membership queries and read the
//! filters' bit arrays as often as it likes; it wins by naming a fresh key that
//! some filter accepts.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use super::craft::{craft_pollution_keys, AttackBudget};
use crate::bloom::{theoretical_fpr, BloomFilter, BloomParams, SecureBloomFilter};
use crate::error::{Error, Result};
use crate::lsm::{KvStore, PublicParams, RunLocation, Store};
use crate::prp::{Prp, PrpKey, LAMBDA_BITS};

const ADVERSARY_DOMAIN: u64 = 1;
const CHALLENGER_DOMAIN: u64 = 2;

/// Independent RNG stream for one party in one trial.
fn trial_rng(seed: u64, domain: u64, trial: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ domain.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    rng.set_stream(trial);
    rng
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GameConfig {
    /// Size of the adversary's initial list.
    pub n: usize,
    /// Membership-query budget.
    pub t: u64,
    pub lambda_bits: u32,
    pub trials: u64,
    pub seed: u64,
    /// Transcripts kept, and re-verified, from the first trials.
    pub transcript_samples: usize,
    /// Parent of the per-trial store directories in the LSM game; the system
    /// temporary directory when `None`.
    pub work_dir: Option<PathBuf>,
}

impl GameConfig {
    pub fn new(n: usize, t: u64, trials: u64, seed: u64) -> Self {
        GameConfig {
            n,
            t,
            lambda_bits: LAMBDA_BITS,
            trials,
            seed,
            transcript_samples: 20,
            work_dir: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Plain,
    Hardened,
}

/// Bit array and public parameters of one filter, as returned by O_R.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BloomState {
    pub location: Option<RunLocation>,
    pub params: BloomParams,
    pub words: Vec<u64>,
}

impl BloomState {
    fn of(location: Option<RunLocation>, filter: &BloomFilter) -> Self {
        BloomState {
            location,
            params: filter.params(),
            words: filter.words().to_vec(),
        }
    }

    /// Would this filter accept `key` if the key were inserted unmodified?
    pub fn accepts(&self, key: &[u8]) -> bool {
        self.params
            .hashes()
            .positions(key)
            .all(|p| self.words[p as usize / 64] >> (p % 64) & 1 == 1)
    }
}

/// Everything O_R reveals. Holds no key material by construction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OracleView {
    pub filters: Vec<BloomState>,
}

impl OracleView {
    /// Binary serialization: each filter's parameters then its words, little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for f in &self.filters {
            out.extend_from_slice(&f.params.m_bits.to_le_bytes());
            out.extend_from_slice(&f.params.k_hashes.to_le_bytes());
            out.extend_from_slice(&f.params.hash_seed.to_le_bytes());
            for w in &f.words {
                out.extend_from_slice(&w.to_le_bytes());
            }
        }
        out
    }

    pub fn contains_bytes(&self, needle: &[u8]) -> bool {
        let json = serde_json::to_vec(self).expect("view serializes");
        [self.to_bytes(), json]
            .iter()
            .any(|hay| !needle.is_empty() && hay.windows(needle.len()).any(|w| w == needle))
    }

    pub fn any_accepts(&self, key: &[u8]) -> bool {
        self.filters.iter().any(|f| f.accepts(key))
    }
}

/// Oracle access handed to the adversary's query phase.
pub trait Oracles {
    /// O_Q. `None` once the budget is spent; the trial is then forfeited.
    fn query(&mut self, key: &[u8]) -> Option<bool>;
    /// O_R.
    fn read_state(&mut self) -> OracleView;
    fn queries_left(&self) -> u64;
}

/// Public information available to the adversary.
#[derive(Clone, Debug)]
pub enum PublicInfo {
    Bloom(BloomParams),
    Lsm(PublicParams),
}

#[derive(Clone, Debug)]
pub struct GameContext {
    pub n: usize,
    pub t: u64,
    pub lambda_bits: u32,
    pub public: PublicInfo,
}

impl GameContext {
    /// Geometry of the filter the initial list will land in: the game filter,
    /// or the single run a list of `n` keys flushes to.
    pub fn expected_filter(&self) -> Result<BloomParams> {
        match &self.public {
            PublicInfo::Bloom(p) => Ok(*p),
            PublicInfo::Lsm(p) => {
                let (m, k) = p.filter_size(self.n as u64);
                BloomParams::new(m, k, p.hash_seed)
            }
        }
    }
}

pub type ListEntry = (Vec<u8>, Option<Vec<u8>>);

/// A two-phase adversary.
pub trait Adversary: Sync {
    fn name(&self) -> String;
    /// Step 1: the initial list. Smash-Bloom uses only the keys.
    fn choose(&self, ctx: &GameContext, rng: &mut ChaCha20Rng) -> Result<Vec<ListEntry>>;
    /// Step 3: output a candidate false positive.
    fn query(
        &self,
        ctx: &GameContext,
        list: &[ListEntry],
        oracles: &mut dyn Oracles,
        rng: &mut ChaCha20Rng,
    ) -> Vec<u8>;
}

fn hex_key<S: Serializer>(key: &[u8], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&hex(key))
}

fn hex_list<S: Serializer>(list: &[ListEntry], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(list.iter().map(|(k, v)| (hex(k), v.as_deref().map(hex))))
}

fn hex_queries<S: Serializer>(q: &[(Vec<u8>, bool)], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(q.iter().map(|(k, a)| (hex(k), *a)))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Everything observable about one trial; enough to re-score it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Transcript {
    pub trial: u64,
    #[serde(serialize_with = "hex_list")]
    pub list: Vec<ListEntry>,
    #[serde(serialize_with = "hex_queries")]
    pub queries: Vec<(Vec<u8>, bool)>,
    pub state_reads: u64,
    #[serde(serialize_with = "hex_key")]
    pub output: Vec<u8>,
    pub over_budget: bool,
    /// The list was rejected by the challenger (wrong size or unstorable keys).
    pub invalid_list: bool,
    pub win: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GameResult {
    pub game: String,
    pub adversary: String,
    pub target: Target,
    pub n: usize,
    pub t: u64,
    pub trials: u64,
    pub wins: u64,
    pub forfeits: u64,
    pub win_rate: f64,
    /// 95% Wilson score interval for the win rate.
    pub ci95: (f64, f64),
    /// Largest per-filter theoretical false-positive rate seen across trials.
    pub epsilon: f64,
    pub hygiene_checks: u64,
    pub hygiene_violations: u64,
    pub verified_transcripts: u64,
    pub transcript_mismatches: u64,
    #[serde(skip)]
    pub transcripts: Vec<Transcript>,
}

pub fn wilson_interval(wins: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = wins as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

struct TrialOutcome {
    transcript: Transcript,
    epsilon: f64,
    hygiene_violation: bool,
}

/// Counts queries against the budget and records the transcript side of O_Q.
struct Recorder<'a, Q: Fn(&[u8]) -> bool, R: Fn() -> OracleView> {
    query_fn: Q,
    read_fn: R,
    secret: Option<&'a [u8]>,
    budget: u64,
    queries: Vec<(Vec<u8>, bool)>,
    reads: u64,
    over_budget: bool,
    hygiene_violation: bool,
}

impl<Q: Fn(&[u8]) -> bool, R: Fn() -> OracleView> Oracles for Recorder<'_, Q, R> {
    fn query(&mut self, key: &[u8]) -> Option<bool> {
        if self.queries.len() as u64 >= self.budget {
            self.over_budget = true;
            return None;
        }
        let answer = (self.query_fn)(key);
        self.queries.push((key.to_vec(), answer));
        Some(answer)
    }

    fn read_state(&mut self) -> OracleView {
        self.reads += 1;
        let view = (self.read_fn)();
        if self.secret.is_some_and(|s| view.contains_bytes(s)) {
            self.hygiene_violation = true;
        }
        view
    }

    fn queries_left(&self) -> u64 {
        self.budget.saturating_sub(self.queries.len() as u64)
    }
}

/// Step 4: fresh output that the oracle accepts, within budget.
fn score(list: &[ListEntry], queries: &[(Vec<u8>, bool)], output: &[u8], accepted: bool, over_budget: bool) -> bool {
    !over_budget
        && accepted
        && !list.iter().any(|(k, _)| k == output)
        && !queries.iter().any(|(k, _)| k == output)
}

enum ChallengeFilter {
    Plain(BloomFilter),
    Hardened(SecureBloomFilter),
}

impl ChallengeFilter {
    fn build(params: BloomParams, secret: Option<&PrpKey>, keys: &[&[u8]]) -> Result<Self> {
        Ok(match secret {
            None => {
                let mut f = BloomFilter::new(params)?;
                for k in keys {
                    f.insert(k);
                }
                ChallengeFilter::Plain(f)
            }
            Some(key) => {
                let mut f = SecureBloomFilter::new(params, Prp::new(key))?;
                for k in keys {
                    f.insert(k)?;
                }
                ChallengeFilter::Hardened(f)
            }
        })
    }

    fn contains(&self, key: &[u8]) -> bool {
        match self {
            ChallengeFilter::Plain(f) => f.contains(key),
            ChallengeFilter::Hardened(f) => f.contains(key).unwrap_or(false),
        }
    }

    fn filter(&self) -> &BloomFilter {
        match self {
            ChallengeFilter::Plain(f) => f,
            ChallengeFilter::Hardened(f) => f.filter(),
        }
    }
}

fn challenger_secret(cfg: &GameConfig, target: Target, trial: u64) -> Option<PrpKey> {
    match target {
        Target::Plain => None,
        Target::Hardened => {
            let mut rng = trial_rng(cfg.seed, CHALLENGER_DOMAIN, trial);
            Some(PrpKey::generate(Some(rng.next_u64())))
        }
    }
}

/// Distinct keys of the list, first occurrence kept.
fn list_keys(list: &[ListEntry]) -> Vec<&[u8]> {
    let mut seen = HashSet::new();
    list.iter()
        .map(|(k, _)| k.as_slice())
        .filter(|k| seen.insert(*k))
        .collect()
}

fn forfeit(trial: u64, list: Vec<ListEntry>) -> TrialOutcome {
    TrialOutcome {
        transcript: Transcript {
            trial,
            list,
            queries: Vec::new(),
            state_reads: 0,
            output: Vec::new(),
            over_budget: false,
            invalid_list: true,
            win: false,
        },
        epsilon: 0.0,
        hygiene_violation: false,
    }
}

fn bloom_trial(
    adv: &dyn Adversary,
    cfg: &GameConfig,
    params: BloomParams,
    target: Target,
    trial: u64,
) -> Result<TrialOutcome> {
    let ctx = GameContext {
        n: cfg.n,
        t: cfg.t,
        lambda_bits: cfg.lambda_bits,
        public: PublicInfo::Bloom(params),
    };
    let mut rng = trial_rng(cfg.seed, ADVERSARY_DOMAIN, trial);
    let list = adv.choose(&ctx, &mut rng)?;
    let secret = challenger_secret(cfg, target, trial);
    let keys = list_keys(&list);
    let filter = match ChallengeFilter::build(params, secret.as_ref(), &keys) {
        Ok(f) => f,
        Err(Error::KeyTooLong { .. }) => return Ok(forfeit(trial, list)),
        Err(e) => return Err(e),
    };
    let epsilon = theoretical_fpr(&params, keys.len() as u64);
    let read = || OracleView {
        filters: vec![BloomState::of(None, filter.filter())],
    };
    let secret_bytes = secret.as_ref().map(|k| &k.as_bytes()[..]);
    let mut rec = Recorder {
        query_fn: |k: &[u8]| filter.contains(k),
        read_fn: read,
        secret: secret_bytes,
        budget: cfg.t,
        queries: Vec::new(),
        reads: 0,
        over_budget: false,
        hygiene_violation: false,
    };
    // Scan the view once per trial even if the adversary never reads it.
    let pre_scan = secret_bytes.is_some_and(|s| read().contains_bytes(s));
    let output = adv.query(&ctx, &list, &mut rec, &mut rng);
    let win = score(&list, &rec.queries, &output, filter.contains(&output), rec.over_budget);
    Ok(TrialOutcome {
        transcript: Transcript {
            trial,
            queries: rec.queries,
            state_reads: rec.reads,
            over_budget: rec.over_budget,
            invalid_list: false,
            list,
            output,
            win,
        },
        epsilon,
        hygiene_violation: pre_scan || rec.hygiene_violation,
    })
}

fn lsm_trial(
    adv: &dyn Adversary,
    cfg: &GameConfig,
    params: &PublicParams,
    target: Target,
    trial: u64,
    work_dir: &Path,
) -> Result<TrialOutcome> {
    let params = params.clone().hardened(target == Target::Hardened);
    let ctx = GameContext {
        n: cfg.n,
        t: cfg.t,
        lambda_bits: cfg.lambda_bits,
        public: PublicInfo::Lsm(params.clone()),
    };
    let mut rng = trial_rng(cfg.seed, ADVERSARY_DOMAIN, trial);
    let list = adv.choose(&ctx, &mut rng)?;
    if list.len() != cfg.n {
        return Ok(forfeit(trial, list));
    }
    let secret = challenger_secret(cfg, target, trial);
    let dir = work_dir.join(format!("trial-{trial}"));
    let Some(store) = build_store(&dir, &params, secret.clone(), &list)? else {
        let _ = std::fs::remove_dir_all(&dir);
        return Ok(forfeit(trial, list));
    };
    let engine = store.engine();
    let epsilon = engine
        .runs()
        .map(|(_, r)| theoretical_fpr(&r.bloom().params(), r.entry_count()))
        .fold(0.0, f64::max);
    let read = || OracleView {
        filters: engine
            .runs()
            .map(|(loc, r)| BloomState::of(Some(loc), r.bloom()))
            .collect(),
    };
    let o_q = |k: &[u8]| store.any_filter_positive(k).unwrap_or(false);
    let secret_bytes = secret.as_ref().map(|k| &k.as_bytes()[..]);
    let mut rec = Recorder {
        query_fn: o_q,
        read_fn: read,
        secret: secret_bytes,
        budget: cfg.t,
        queries: Vec::new(),
        reads: 0,
        over_budget: false,
        hygiene_violation: false,
    };
    let pre_scan = secret_bytes.is_some_and(|s| read().contains_bytes(s));
    let output = adv.query(&ctx, &list, &mut rec, &mut rng);
    let win = score(&list, &rec.queries, &output, o_q(&output), rec.over_budget);
    let outcome = TrialOutcome {
        transcript: Transcript {
            trial,
            queries: rec.queries,
            state_reads: rec.reads,
            over_budget: rec.over_budget,
            invalid_list: false,
            list,
            output,
            win,
        },
        epsilon,
        hygiene_violation: pre_scan || rec.hygiene_violation,
    };
    drop(store);
    std::fs::remove_dir_all(&dir)?;
    Ok(outcome)
}

/// Step 2: a fresh store holding the list, flushed so every entry sits in a
/// filtered run. `None` when the list cannot be stored.
fn build_store(dir: &Path, params: &PublicParams, secret: Option<PrpKey>, list: &[ListEntry]) -> Result<Option<Store>> {
    let (mut store, _) = Store::open(dir, params.clone(), secret, None)?;
    for (k, v) in list {
        let r = match v {
            Some(v) => store.put(k, v),
            None => store.delete(k),
        };
        match r {
            Ok(()) => {}
            Err(Error::KeyTooLong { .. } | Error::EmptyKey | Error::EntryTooLarge { .. }) => return Ok(None),
            Err(e) => return Err(e),
        }
    }
    store.save()?;
    Ok(Some(store))
}

fn aggregate(
    game: &str,
    adv: &dyn Adversary,
    cfg: &GameConfig,
    target: Target,
    outcomes: Vec<TrialOutcome>,
    verify: impl Fn(&Transcript) -> Result<bool>,
) -> Result<GameResult> {
    let wins = outcomes.iter().filter(|o| o.transcript.win).count() as u64;
    let forfeits = outcomes
        .iter()
        .filter(|o| o.transcript.over_budget || o.transcript.invalid_list)
        .count() as u64;
    let epsilon = outcomes.iter().map(|o| o.epsilon).fold(0.0, f64::max);
    let hygiene_violations = outcomes.iter().filter(|o| o.hygiene_violation).count() as u64;
    let transcripts: Vec<Transcript> = outcomes
        .into_iter()
        .take(cfg.transcript_samples)
        .map(|o| o.transcript)
        .collect();
    let mut mismatches = 0;
    for t in &transcripts {
        if !verify(t)? {
            mismatches += 1;
        }
    }
    Ok(GameResult {
        game: game.into(),
        adversary: adv.name(),
        target,
        n: cfg.n,
        t: cfg.t,
        trials: cfg.trials,
        wins,
        forfeits,
        win_rate: if cfg.trials == 0 { 0.0 } else { wins as f64 / cfg.trials as f64 },
        ci95: wilson_interval(wins, cfg.trials),
        epsilon,
        hygiene_checks: if target == Target::Hardened { cfg.trials } else { 0 },
        hygiene_violations,
        verified_transcripts: transcripts.len() as u64,
        transcript_mismatches: mismatches,
        transcripts,
    })
}

/// Plays Smash-Bloom `cfg.trials` times against a filter with `params`.
pub fn smash_bloom_game(
    adv: &dyn Adversary,
    cfg: &GameConfig,
    params: BloomParams,
    target: Target,
) -> Result<GameResult> {
    params.validate()?;
    let outcomes = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| bloom_trial(adv, cfg, params, target, trial))
        .collect::<Result<Vec<_>>>()?;
    aggregate("smash-bloom", adv, cfg, target, outcomes, |t| {
        verify_bloom_transcript(t, cfg, params, target)
    })
}

/// Plays Smash-Lsm `cfg.trials` times, each against a fresh store with
/// `params` (hardened according to `target`).
pub fn smash_lsm_game(
    adv: &dyn Adversary,
    cfg: &GameConfig,
    params: &PublicParams,
    target: Target,
) -> Result<GameResult> {
    params.validate()?;
    let work = match &cfg.work_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            tempfile::TempDir::new_in(dir)?
        }
        None => tempfile::TempDir::new()?,
    };
    let outcomes = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| lsm_trial(adv, cfg, params, target, trial, work.path()))
        .collect::<Result<Vec<_>>>()?;
    aggregate("smash-lsm", adv, cfg, target, outcomes, |t| {
        verify_lsm_transcript(t, cfg, params, target, work.path())
    })
}

/// Re-scores a Smash-Bloom transcript from scratch: rebuilds the filter from
/// the list, replays every query, and re-evaluates the winning condition.
pub fn verify_bloom_transcript(
    t: &Transcript,
    cfg: &GameConfig,
    params: BloomParams,
    target: Target,
) -> Result<bool> {
    if t.invalid_list {
        return Ok(!t.win);
    }
    let secret = challenger_secret(cfg, target, t.trial);
    let prp = secret.as_ref().map(Prp::new);
    let mut filter = BloomFilter::new(params)?;
    let image = |k: &[u8]| -> Option<Vec<u8>> {
        match &prp {
            None => Some(k.to_vec()),
            Some(p) => p.permute_key(k).ok().map(|b| b.0.to_vec()),
        }
    };
    for (k, _) in &t.list {
        filter.insert(&image(k).expect("list was accepted"));
    }
    let oracle = |k: &[u8]| image(k).is_some_and(|x| filter.contains(&x));
    Ok(recheck(t, cfg, oracle))
}

/// Re-scores a Smash-Lsm transcript against a store rebuilt from the list.
pub fn verify_lsm_transcript(
    t: &Transcript,
    cfg: &GameConfig,
    params: &PublicParams,
    target: Target,
    work_dir: &Path,
) -> Result<bool> {
    if t.invalid_list {
        return Ok(!t.win);
    }
    let params = params.clone().hardened(target == Target::Hardened);
    let dir = work_dir.join(format!("verify-{}", t.trial));
    let secret = challenger_secret(cfg, target, t.trial);
    let store = build_store(&dir, &params, secret, &t.list)?.expect("list was accepted");
    let ok = recheck(t, cfg, |k| store.any_filter_positive(k).unwrap_or(false));
    drop(store);
    std::fs::remove_dir_all(&dir)?;
    Ok(ok)
}

fn recheck(t: &Transcript, cfg: &GameConfig, oracle: impl Fn(&[u8]) -> bool) -> bool {
    let answers_match = t.queries.iter().all(|(k, a)| oracle(k) == *a);
    let within_budget = t.queries.len() as u64 <= cfg.t && !t.over_budget;
    let fresh = t.list.iter().all(|(k, _)| *k != t.output) && t.queries.iter().all(|(k, _)| *k != t.output);
    answers_match && t.win == (within_budget && fresh && oracle(&t.output))
}

fn random_list(ctx: &GameContext, rng: &mut ChaCha20Rng) -> Vec<ListEntry> {
    // 12-byte keys: storable by a hardened store and disjoint from the
    // 8-byte counter keys the searching adversaries output.
    (0..ctx.n)
        .map(|_| (rng.gen::<[u8; 12]>().to_vec(), Some(rng.gen::<[u8; 4]>().to_vec())))
        .collect()
}

/// Searches 8-byte counter keys from a random start for one that some
/// filter in the revealed state accepts. Returns the last candidate tried
/// if none is found.
fn search_state(view: &OracleView, list: &[ListEntry], limit: u64, rng: &mut ChaCha20Rng) -> Vec<u8> {
    let listed: HashSet<&[u8]> = list.iter().map(|(k, _)| k.as_slice()).collect();
    let start = rng.next_u64();
    let mut key = start.to_be_bytes();
    for i in 0..limit.max(1) {
        key = start.wrapping_add(i).to_be_bytes();
        if !listed.contains(&key[..]) && view.any_accepts(&key) {
            break;
        }
    }
    key.to_vec()
}

/// Outputs a key from its own list; can never win.
pub struct MemberEcho;

impl Adversary for MemberEcho {
    fn name(&self) -> String {
        "member-echo".into()
    }

    fn choose(&self, ctx: &GameContext, rng: &mut ChaCha20Rng) -> Result<Vec<ListEntry>> {
        Ok(random_list(ctx, rng))
    }

    fn query(&self, _: &GameContext, list: &[ListEntry], _: &mut dyn Oracles, rng: &mut ChaCha20Rng) -> Vec<u8> {
        list.first()
            .map(|(k, _)| k.clone())
            .unwrap_or_else(|| rng.gen::<[u8; 8]>().to_vec())
    }
}

/// Outputs a fresh random key; wins with the filter's false-positive rate.
pub struct RandomGuess;

impl Adversary for RandomGuess {
    fn name(&self) -> String {
        "random-guess".into()
    }

    fn choose(&self, ctx: &GameContext, rng: &mut ChaCha20Rng) -> Result<Vec<ListEntry>> {
        Ok(random_list(ctx, rng))
    }

    fn query(&self, _: &GameContext, _: &[ListEntry], _: &mut dyn Oracles, rng: &mut ChaCha20Rng) -> Vec<u8> {
        rng.gen::<[u8; 10]>().to_vec()
    }
}

/// Inserts random keys, reads every filter's bits and hashes candidates
/// offline until one lands on set bits only.
pub struct StateReadingBruteForce {
    pub search_limit: u64,
}

impl Default for StateReadingBruteForce {
    fn default() -> Self {
        StateReadingBruteForce { search_limit: 1 << 24 }
    }
}

impl Adversary for StateReadingBruteForce {
    fn name(&self) -> String {
        "state-reading-brute-force".into()
    }

    fn choose(&self, ctx: &GameContext, rng: &mut ChaCha20Rng) -> Result<Vec<ListEntry>> {
        Ok(random_list(ctx, rng))
    }

    fn query(&self, _: &GameContext, list: &[ListEntry], o: &mut dyn Oracles, rng: &mut ChaCha20Rng) -> Vec<u8> {
        let view = o.read_state();
        search_state(&view, list, self.search_limit, rng)
    }
}

/// Chooses keys crafted to set as many bits as possible of the filter the
/// list will land in, then searches the revealed state like
/// [`StateReadingBruteForce`].
pub struct CraftedInsertStateRead {
    pub search_limit: u64,
    pub craft_candidates: u64,
}

impl Default for CraftedInsertStateRead {
    fn default() -> Self {
        CraftedInsertStateRead {
            search_limit: 1 << 24,
            craft_candidates: 1 << 34,
        }
    }
}

impl Adversary for CraftedInsertStateRead {
    fn name(&self) -> String {
        "crafted-insert-state-read".into()
    }

    fn choose(&self, ctx: &GameContext, rng: &mut ChaCha20Rng) -> Result<Vec<ListEntry>> {
        let params = ctx.expected_filter()?;
        let budget = AttackBudget::new(self.craft_candidates, rng.next_u64())?;
        let crafted = craft_pollution_keys(&params, ctx.n, &budget)?;
        Ok(crafted
            .keys
            .into_iter()
            .map(|k| (k, Some(b"x".to_vec())))
            .collect())
    }

    fn query(&self, _: &GameContext, list: &[ListEntry], o: &mut dyn Oracles, rng: &mut ChaCha20Rng) -> Vec<u8> {
        let view = o.read_state();
        search_state(&view, list, self.search_limit, rng)
    }
}

/// Probes random keys with O_Q and, having spent the budget, outputs a key
/// it never queried; the queries only tell it what it may not output.
pub struct QueryThenGuess;

impl Adversary for QueryThenGuess {
    fn name(&self) -> String {
        "query-then-guess".into()
    }

    fn choose(&self, ctx: &GameContext, rng: &mut ChaCha20Rng) -> Result<Vec<ListEntry>> {
        Ok(random_list(ctx, rng))
    }

    fn query(&self, _: &GameContext, _: &[ListEntry], o: &mut dyn Oracles, rng: &mut ChaCha20Rng) -> Vec<u8> {
        while o.queries_left() > 0 {
            o.query(&rng.gen::<[u8; 10]>());
        }
        rng.gen::<[u8; 10]>().to_vec()
    }
}
