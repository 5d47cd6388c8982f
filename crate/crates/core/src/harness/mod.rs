//! Desk-scale security games, the randomness battery and disclosure
//! verification.
//!
//! A statistical battery is a necessary, not sufficient, stand-in for "no
//! efficient distinguisher exists"; passing it says only that these
//! particular tests see nothing.

pub mod game;
pub mod stats;
pub mod verify;

pub use game::{
    challenge, play_script, run_execution_game, run_transcript_game, AdvantageEstimate, Adversary,
    BoundaryScript, ChallengeView, ExecutionVerdict, GameError, GameScript, ScriptStep,
};
pub use stats::{
    battery_over, stat_battery, StatError, StatReport, StatTest, DEFAULT_ALPHA, MIN_COINS,
};
pub use verify::{verify_disclosure, DisclosureVerdict, Mismatch};
