//! Plausibly-deniable messaging over an ordinary end-to-end encrypted
//! channel.
//!
//! Every public message carries a per-message random coin (a salt or IV).
//! A simulated trusted enclave owns all keys and decides what goes into
//! that coin: fresh randomness, or one chunk of an encrypted hidden
//! message. Because encrypted chunks are indistinguishable from random
//! octets, the wire transcript and the Normal-World view of the enclave
//! look the same in both modes, and disclosing the public keys lets a
//! coercer verify every public message without learning that a hidden
//! channel exists.
//!
//! Layers, bottom up:
//!
//! - [`crypto`]: SHA-256, AES-IGE, AES-CTR, key schedule, password digests,
//!   entropy.
//! - [`public`]: payload layout and envelope sealing with a caller-supplied
//!   coin.
//! - [`hidden`]: chunking hidden messages into coins and reassembling them.
//! - [`enclave`]: the Secure-World state machine and its boundary.
//! - [`transport`]: framed envelope delivery and wire transcripts.
//! - [`harness`]: distinguishing games, statistical battery and disclosure
//!   verification.

pub mod crypto;
pub mod enclave;
pub mod harness;
pub mod hidden;
pub mod public;
pub mod transport;

pub use enclave::{Enclave, EnclaveConfig, IoMode, Mode};
pub use hidden::{ChunkQueue, HiddenKey, ReassemblyState};
pub use public::{AuthKey, ChannelProfile, PublicEnvelope, PublicPlaintext, RandomCoin};

/// Symmetric security parameter, in bits.
pub const LAMBDA_BITS: usize = 128;
