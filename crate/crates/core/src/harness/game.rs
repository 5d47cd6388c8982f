//! Distinguishing games.
//!
//! The transcript game hands the adversary everything it could ask for
//! about the public channel (envelopes, coins, plaintexts, the public key)
//! and asks it to tell random coins from injected hidden chunks. The
//! execution game runs one boundary-call script in both unlock modes and
//! compares what the Normal World observed.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{EntropySource, Key16, Key32, SeededEntropy, WorkFactor};
use crate::enclave::{
    BoundaryError, Divergence, Enclave, EnclaveConfig, ExecutionTranscript, IoMode, PeerId,
};
use crate::hidden::{cover_count, ChunkQueue, HiddenKey, ReassemblyState};
use crate::public::{
    open_public, seal_public, AuthKey, ChannelProfile, PublicEnvelope, PublicPlaintext, RandomCoin,
};

use super::stats::{stat_battery, DEFAULT_ALPHA};

pub const MIN_TRIALS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error("at least {MIN_TRIALS} trials required, got {0}")]
    TooFewTrials(usize),
    #[error("script has no hidden message")]
    NoHiddenMessage,
    #[error("hidden message needs {needed} public messages, script has {available}")]
    HiddenTooLong { needed: usize, available: usize },
    #[error("public message {0} has an unsealable body")]
    BadPublicMessage(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameScript {
    pub public_messages: Vec<Vec<u8>>,
    pub hidden: Option<Vec<u8>>,
    pub profile: ChannelProfile,
    pub seed: u64,
}

impl GameScript {
    /// `k` random-length chat lines and a hidden message that fits.
    pub fn random(profile: ChannelProfile, k: usize, hidden_len: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let public_messages = (0..k)
            .map(|_| {
                let n = rng.gen_range(1..=200);
                (0..n).map(|_| rng.gen_range(b' '..=b'~')).collect()
            })
            .collect();
        let hidden = (hidden_len > 0).then(|| (0..hidden_len).map(|_| rng.gen()).collect());
        Self {
            public_messages,
            hidden,
            profile,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), GameError> {
        let hidden = self.hidden.as_ref().ok_or(GameError::NoHiddenMessage)?;
        let needed =
            cover_count(hidden.len(), self.profile).map_err(|_| GameError::NoHiddenMessage)?;
        if needed > self.public_messages.len() {
            return Err(GameError::HiddenTooLong {
                needed,
                available: self.public_messages.len(),
            });
        }
        for (i, m) in self.public_messages.iter().enumerate() {
            if m.is_empty() || m.len() > crate::public::MAX_BODY_LEN {
                return Err(GameError::BadPublicMessage(i));
            }
        }
        Ok(())
    }
}

/// Everything the adversary receives in one trial.
#[derive(Debug, Clone)]
pub struct ChallengeView {
    pub profile: ChannelProfile,
    pub auth_key: AuthKey,
    pub envelopes: Vec<PublicEnvelope>,
    pub plaintexts: Vec<PublicPlaintext>,
    /// Only populated for the out-of-model oracle.
    pub hidden_key: Option<HiddenKey>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "adversary", rename_all = "snake_case")]
pub enum Adversary {
    /// Always outputs the given bit.
    Constant { guess: bool },
    /// Opens every envelope with the public key, then guesses "hidden" iff
    /// the coin stream fails the battery or a structural check.
    StatBattery { alpha: f64 },
    /// Holds the hidden key and guesses "hidden" iff a frame decodes.
    HmkOracle,
    /// Ignores the transcript.
    CoinFlip,
}

impl Adversary {
    pub fn stat_battery() -> Self {
        Self::StatBattery {
            alpha: DEFAULT_ALPHA,
        }
    }

    fn sees_hidden_key(&self) -> bool {
        matches!(self, Self::HmkOracle)
    }

    fn guess(&self, view: &ChallengeView, rng: &mut ChaCha8Rng) -> bool {
        match *self {
            Self::Constant { guess } => guess,
            Self::CoinFlip => rng.gen(),
            Self::StatBattery { alpha } => {
                let mut coins = Vec::with_capacity(view.envelopes.len());
                for (env, pt) in view.envelopes.iter().zip(&view.plaintexts) {
                    let Ok(p) = open_public(view.profile, &view.auth_key, env) else {
                        return true;
                    };
                    if &p.plaintext != pt {
                        return true;
                    }
                    coins.push(p.coin);
                }
                // Structure: a repeated coin has probability below 2^-100.
                let mut sorted: Vec<&[u8]> = coins.iter().map(RandomCoin::as_bytes).collect();
                sorted.sort_unstable();
                if sorted.windows(2).any(|w| w[0] == w[1]) {
                    return true;
                }
                match stat_battery(&coins, alpha) {
                    Ok(r) => !r.passed(),
                    Err(_) => false,
                }
            }
            Self::HmkOracle => {
                let Some(key) = &view.hidden_key else {
                    return false;
                };
                let mut st = ReassemblyState::new(view.profile);
                view.envelopes.iter().any(|env| {
                    open_public(view.profile, &view.auth_key, env)
                        .ok()
                        .and_then(|p| st.ingest_coin(p.plaintext.seq_no, &p.coin, key))
                        .is_some()
                })
            }
        }
    }
}

/// Empirical win rate minus one half, with a 95% Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvantageEstimate {
    pub trials: usize,
    pub wins: usize,
    pub win_rate: f64,
    pub advantage: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl AdvantageEstimate {
    pub fn from_wins(wins: usize, trials: usize) -> Self {
        let (lo, hi) = wilson(wins, trials, 1.96);
        let p = wins as f64 / trials as f64;
        Self {
            trials,
            wins,
            win_rate: p,
            advantage: p - 0.5,
            ci_low: lo - 0.5,
            ci_high: hi - 0.5,
        }
    }

    pub fn ci_contains_zero(&self) -> bool {
        self.ci_low <= 0.0 && 0.0 <= self.ci_high
    }
}

pub fn wilson(successes: usize, n: usize, z: f64) -> (f64, f64) {
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z / denom * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Challenger side of one trial: seals the script with random coins
/// (`inject = false`) or with the hidden message injected.
pub fn challenge(script: &GameScript, inject: bool, trial_seed: u64) -> ChallengeView {
    let profile = script.profile;
    let mut rng = SeededEntropy::new(trial_seed);
    let auth = AuthKey::generate(&mut rng).expect("seeded entropy is infallible");
    let hidden_key =
        HiddenKey::new(Key16::from_slice(&rng.fill(16).expect("infallible")).expect("16 octets"));
    let mut session_id = [0u8; 8];
    rng.try_fill(&mut session_id).expect("infallible");

    let mut queue = ChunkQueue::empty(profile);
    if inject {
        let msg = script.hidden.as_deref().expect("validated");
        queue
            .enqueue(&hidden_key, msg, &mut rng)
            .expect("validated");
    }
    let mut envelopes = Vec::with_capacity(script.public_messages.len());
    let mut plaintexts = Vec::with_capacity(script.public_messages.len());
    for (i, body) in script.public_messages.iter().enumerate() {
        let coin = queue.next_coin(&mut rng).expect("infallible");
        let pt = PublicPlaintext {
            session_id,
            seq_no: i as u64,
            body: body.clone(),
        };
        envelopes.push(
            seal_public(profile, &auth, &pt, &coin, &mut rng)
                .expect("validated")
                .envelope,
        );
        plaintexts.push(pt);
    }
    ChallengeView {
        profile,
        auth_key: auth,
        envelopes,
        plaintexts,
        hidden_key: Some(hidden_key),
    }
}

pub fn run_transcript_game(
    script: &GameScript,
    adversary: Adversary,
    trials: usize,
) -> Result<AdvantageEstimate, GameError> {
    if trials < MIN_TRIALS {
        return Err(GameError::TooFewTrials(trials));
    }
    script.validate()?;

    let mut master = ChaCha8Rng::seed_from_u64(script.seed);
    let plan: Vec<(bool, u64, u64)> = (0..trials)
        .map(|_| (master.gen(), master.next_u64(), master.next_u64()))
        .collect();

    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(16);
    let per = plan.len().div_ceil(workers);
    let wins: usize = std::thread::scope(|s| {
        let handles: Vec<_> = plan
            .chunks(per)
            .map(|chunk| {
                s.spawn(move || {
                    chunk
                        .iter()
                        .filter(|&&(b, challenger_seed, adversary_seed)| {
                            let mut view = challenge(script, b, challenger_seed);
                            if !adversary.sees_hidden_key() {
                                view.hidden_key = None;
                            }
                            let mut arng = ChaCha8Rng::seed_from_u64(adversary_seed);
                            adversary.guess(&view, &mut arng) == b
                        })
                        .count()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("trial worker"))
            .sum()
    });
    Ok(AdvantageEstimate::from_wins(wins, trials))
}

/// One step of a boundary-call script, from the user's point of view.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum ScriptStep {
    /// Alice sends a public message to Bob.
    Send { body: Vec<u8> },
    /// Bob sends a public message and Alice opens it.
    Receive { body: Vec<u8> },
    /// Alice composes a hidden message on the enclave screen. Skipped in
    /// public-only mode, where that screen does not exist.
    QueueHidden { msg: Vec<u8> },
    /// Bob queues a hidden message for Alice.
    PeerQueueHidden { msg: Vec<u8> },
    /// Alice looks at her hidden inbox.
    ReadInbox,
}

impl ScriptStep {
    pub fn is_hidden_io(&self) -> bool {
        matches!(self, Self::QueueHidden { .. } | Self::ReadInbox)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryScript {
    pub profile: ChannelProfile,
    pub seed: u64,
    pub steps: Vec<ScriptStep>,
}

impl BoundaryScript {
    pub fn random(profile: ChannelProfile, len: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let line = |rng: &mut ChaCha8Rng| -> Vec<u8> {
            let n = rng.gen_range(1..=120);
            (0..n).map(|_| rng.gen_range(b' '..=b'~')).collect()
        };
        let mut steps = vec![ScriptStep::QueueHidden {
            msg: line(&mut rng),
        }];
        for _ in 1..len {
            let s = match rng.gen_range(0..10) {
                0..=3 => ScriptStep::Send {
                    body: line(&mut rng),
                },
                4..=6 => ScriptStep::Receive {
                    body: line(&mut rng),
                },
                7 => ScriptStep::QueueHidden {
                    msg: line(&mut rng),
                },
                8 => ScriptStep::PeerQueueHidden {
                    msg: line(&mut rng),
                },
                _ => ScriptStep::ReadInbox,
            };
            steps.push(s);
        }
        Self {
            profile,
            seed,
            steps,
        }
    }

    pub fn has_hidden_io(&self) -> bool {
        self.steps.iter().any(ScriptStep::is_hidden_io)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionVerdict {
    pub equal: bool,
    pub events: usize,
    pub divergence: Option<Divergence>,
}

const ALICE: PeerId = *b"alice-ex";
const BOB: PeerId = *b"bob---ex";
const PASSWORDS: [&str; 3] = ["public-password", "hidden-password", "disclosure-password"];

fn party(profile: ChannelProfile, io: IoMode, seed: u64) -> Enclave {
    let mut cfg = EnclaveConfig::new(profile, Key32::from_array([0x42; 32]));
    cfg.work_factor = WorkFactor::FAST;
    cfg.io_mode = io;
    let mut e = Enclave::new(cfg, Box::new(SeededEntropy::new(seed)));
    e.setup_ceremony(PASSWORDS[0], PASSWORDS[1], PASSWORDS[2], "execution game")
        .expect("fixed passwords are valid");
    e
}

/// Plays `script` with Alice unlocked in the given mode and returns her
/// execution transcript.
pub fn play_script(
    script: &BoundaryScript,
    hidden: bool,
    io: IoMode,
) -> Result<ExecutionTranscript, BoundaryError> {
    let mut alice = party(script.profile, io, script.seed);
    let mut bob = party(script.profile, IoMode::Unified, script.seed ^ 1);
    let pw = PASSWORDS[hidden as usize];
    alice.verify_password(pw)?;
    bob.verify_password(pw)?;
    let auth = AuthKey::generate(&mut SeededEntropy::new(script.seed ^ 2)).expect("infallible");
    alice.provision_peer(BOB, &auth, [7; 8])?;
    bob.provision_peer(ALICE, &auth, [7; 8])?;
    if hidden {
        let secret = [script.seed as u8; 128];
        alice.secure()?.add_contact(BOB, &secret)?;
        bob.secure()?.add_contact(ALICE, &secret)?;
    }
    for step in &script.steps {
        match step {
            ScriptStep::Send { body } => {
                let env = alice.enclave_seal(BOB, body)?;
                bob.enclave_open(ALICE, &env)?;
            }
            ScriptStep::Receive { body } => {
                let env = bob.enclave_seal(ALICE, body)?;
                alice.enclave_open(BOB, &env)?;
            }
            ScriptStep::QueueHidden { msg } if hidden => {
                alice.secure()?.queue_hidden(BOB, msg)?;
            }
            ScriptStep::PeerQueueHidden { msg } if hidden => {
                bob.secure()?.queue_hidden(ALICE, msg)?;
            }
            ScriptStep::ReadInbox if hidden => {
                alice.secure()?.read_inbox();
            }
            _ => {}
        }
    }
    alice.shutdown()?;
    Ok(alice.transcript().clone())
}

pub fn run_execution_game(
    script: &BoundaryScript,
    io: IoMode,
) -> Result<ExecutionVerdict, BoundaryError> {
    let public = play_script(script, false, io)?;
    let hidden = play_script(script, true, io)?;
    let divergence = public.first_divergence(&hidden);
    Ok(ExecutionVerdict {
        equal: divergence.is_none(),
        events: public.len().max(hidden.len()),
        divergence,
    })
}
