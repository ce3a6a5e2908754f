use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "smashlsm",
    version,
    about = "LSM-tree store with Bloom filter saturation attacks and keyed-permutation hardening"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// Store directory; also holds scratch stores for games, scenarios and benchmarks.
    #[arg(long, global = true, default_value = "smashlsm-data")]
    pub dir: PathBuf,
    /// Store parameter file of `key = value` lines; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub bits_per_key: Option<f64>,
    #[arg(long, global = true)]
    pub k_hashes: Option<u32>,
    #[arg(long, global = true)]
    pub size_ratio: Option<u32>,
    /// Memtable capacity in entries.
    #[arg(long, global = true)]
    pub memtable_cap: Option<usize>,
    /// Optional memtable limit in encoded bytes.
    #[arg(long, global = true)]
    pub memtable_bytes: Option<usize>,
    #[arg(long, global = true)]
    pub block_size: Option<u32>,
    #[arg(long, global = true)]
    pub hash_seed: Option<u64>,
    /// Permute keys with a secret key before they reach the store.
    #[arg(long, global = true)]
    pub hardened: bool,
    /// 32 hex digits; without it a hardened store gets a fresh key, printed once to stderr.
    #[arg(long, global = true)]
    pub prp_key_hex: Option<String>,
    /// Directory for CSV, JSON and plot files.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Seed for every random stream of the invocation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// Progress messages on stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Store operations.
    #[command(subcommand)]
    Db(DbCommand),
    /// Filter saturation attacks.
    #[command(subcommand)]
    Attack(AttackCommand),
    /// Security games between a challenger and a built-in adversary.
    #[command(subcommand)]
    Game(GameCommand),
    /// Attack scenarios against a store.
    #[command(subcommand)]
    Scenario(ScenarioCommand),
    /// Benchmarks.
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Args, Debug, Clone)]
pub struct KeyArgs {
    /// Keys and values are hex strings.
    #[arg(long)]
    pub hex: bool,
}

#[derive(Subcommand, Debug)]
pub enum DbCommand {
    /// Store a value and persist it.
    Put {
        key: String,
        value: String,
        #[command(flatten)]
        enc: KeyArgs,
    },
    /// Print a value, or NOT_FOUND.
    Get {
        key: String,
        #[command(flatten)]
        enc: KeyArgs,
    },
    /// Delete a key and persist the tombstone.
    Del {
        key: String,
        #[command(flatten)]
        enc: KeyArgs,
    },
    /// Level layout, I/O counters and per-run filter health.
    Stats {
        /// Random probes per run when measuring false-positive rates.
        #[arg(long, default_value_t = 10_000)]
        fpr_probes: u64,
    },
    /// Print the entries of one run, by file name or run id.
    DumpRun {
        run: String,
        /// Stop after this many entries.
        #[arg(long)]
        limit: Option<usize>,
    },
}

#[derive(Subcommand, Debug)]
pub enum AttackCommand {
    /// Craft keys that set every bit of an m-bit, k-hash filter.
    Saturate {
        #[arg(long)]
        m: u32,
        #[arg(long)]
        k: u32,
        #[arg(long, default_value_t = 1 << 34)]
        max_candidates: u64,
    },
    /// Time saturation across filter sizes.
    Timing {
        /// Comma-separated filter sizes in bits.
        #[arg(long, value_delimiter = ',', default_values_t = [256u32, 512, 1024, 2048, 4096])]
        m_values: Vec<u32>,
        #[arg(long, default_value_t = 4)]
        k: u32,
        /// Seeds per size.
        #[arg(long, default_value_t = 3)]
        seeds: u64,
        #[arg(long, default_value_t = 1 << 34)]
        max_candidates: u64,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdversaryName {
    StateReadingBruteForce,
    CraftedInsertStateRead,
    MemberEcho,
    RandomGuess,
    QueryThenGuess,
}

#[derive(Args, Debug, Clone)]
pub struct GameArgs {
    /// Size of the adversary's initial list.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Membership-query budget.
    #[arg(long, default_value_t = 0)]
    pub t: u64,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long, value_enum, default_value_t = AdversaryName::StateReadingBruteForce)]
    pub adversary: AdversaryName,
    /// Transcripts kept and re-verified.
    #[arg(long, default_value_t = 20)]
    pub transcripts: usize,
}

#[derive(Subcommand, Debug)]
pub enum GameCommand {
    /// The adversary attacks a store built from its list.
    SmashLsm {
        #[command(flatten)]
        game: GameArgs,
    },
    /// The adversary attacks a single Bloom filter built from its list.
    SmashBloom {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, default_value_t = 1024)]
        m: u32,
        #[arg(long, default_value_t = 4)]
        k: u32,
    },
}

#[derive(Subcommand, Debug)]
pub enum ScenarioCommand {
    /// Insert crafted keys, delete them, then recompact, measuring filters after each step.
    DeletedInserts {
        /// Legitimate keys loaded first; defaults to (size_ratio + 1) memtables.
        #[arg(long)]
        legit_keys: Option<u64>,
        #[arg(long, default_value_t = 10_000)]
        lookups: u64,
        #[arg(long, default_value_t = 10_000)]
        fpr_probes: u64,
        #[arg(long, default_value_t = 1 << 34)]
        max_candidates: u64,
    },
}

#[derive(Args, Debug, Clone)]
pub struct ScaleArgs {
    #[arg(long, default_value_t = 1_000_000)]
    pub inserts: u64,
    #[arg(long, default_value_t = 50_000)]
    pub lookups: u64,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long, default_value_t = 10_000)]
    pub fpr_probes: u64,
    /// Crafter patience; lower is faster and crafts more keys.
    #[arg(long, default_value_t = 1.0)]
    pub effort: f64,
}

#[derive(Subcommand, Debug)]
pub enum BenchCommand {
    /// Saturate every run of a plain store and compare zero-result I/O.
    Degrade {
        #[command(flatten)]
        scale: ScaleArgs,
    },
    /// The same attack against a hardened store.
    Secure {
        #[command(flatten)]
        scale: ScaleArgs,
    },
    /// The attack at 0, 25, 50, 75 and 100% of runs.
    Sweep {
        #[command(flatten)]
        scale: ScaleArgs,
    },
    /// Plain against hardened insert and lookup latency.
    Overhead {
        #[arg(long, default_value_t = 200_000)]
        inserts: u64,
        #[arg(long, default_value_t = 50_000)]
        lookups: u64,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 64)]
        batch_size: u64,
    },
    /// Run a workload file.
    Custom {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 10_000)]
        fpr_probes: u64,
        #[arg(long, default_value_t = 1.0)]
        effort: f64,
    },
}
