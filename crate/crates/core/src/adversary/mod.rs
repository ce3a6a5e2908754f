//! Filter-saturation attacks, the Smash-Bloom and Smash-Lsm games, and the
//! deleted-insertions scenario.

mod craft;
mod game;
mod scenario;

pub use craft::{
    craft_pollution_keys, craft_saturating, craft_saturating_keys, craft_saturating_with_effort,
    saturation_timing,
    write_timing_csv, AttackBudget, CraftOutcome, TimingRow, DEFAULT_EFFORT,
};
pub use game::{
    smash_bloom_game, smash_lsm_game, verify_bloom_transcript, verify_lsm_transcript,
    wilson_interval, Adversary, BloomState, CraftedInsertStateRead, GameConfig, GameContext,
    GameResult, ListEntry, MemberEcho, OracleView, Oracles, PublicInfo, QueryThenGuess,
    RandomGuess, StateReadingBruteForce, Target, Transcript,
};
pub use scenario::{deleted_insertion_scenario, ScenarioConfig, ScenarioPhase, ScenarioReport};
