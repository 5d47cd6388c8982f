//! Deterministic primitives shared by every layer: SHA-256, AES-IGE,
//! AES-CTR, the per-message key schedule, password digests and the
//! entropy source used for random coins.
//!
//! Everything here is a pure function of its inputs except the entropy
//! source. Each thread keeps a set of operation counters ([`op_counts`])
//! so callers can compare the amount of primitive work two code paths
//! perform.

mod cipher;
mod entropy;
mod kdf;
mod keys;
mod password;

use std::cell::Cell;

use sha2::{Digest as _, Sha256};
use thiserror::Error;

pub use cipher::{ctr_xcrypt, ige_decrypt, ige_encrypt, BLOCK_LEN};
pub use entropy::{prng_fill, EntropySource, OsEntropy, SeededEntropy};
pub(crate) use kdf::keys_for_msg_key as kdf_for_msg_key;
pub use kdf::{derive_message_keys, MessageKeys, MSG_KEY_LEN};
pub use keys::{Digest, IgePair, Key16, Key32, SymmetricKey};
pub use password::{password_digest, verify_digest, Salt, WorkFactor};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("input length {0} is not a multiple of the 16-octet block")]
    NotBlockMultiple(usize),
    #[error("expected {expected} octets, got {actual}")]
    BadLength { expected: usize, actual: usize },
    #[error("entropy source failure: {0}")]
    Entropy(String),
    #[error("password must not be empty")]
    EmptyPassword,
    #[error("password hashing failed: {0}")]
    PasswordHash(String),
}

/// Counts of primitive operations performed on the current thread.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub block_encryptions: u64,
    pub block_decryptions: u64,
    pub sha256_calls: u64,
    pub entropy_draws: u64,
    pub entropy_octets: u64,
}

thread_local! {
    static COUNTS: Cell<OpCounts> = const { Cell::new(OpCounts {
        block_encryptions: 0,
        block_decryptions: 0,
        sha256_calls: 0,
        entropy_draws: 0,
        entropy_octets: 0,
    }) };
}

pub(crate) fn count(f: impl FnOnce(&mut OpCounts)) {
    COUNTS.with(|c| {
        let mut v = c.get();
        f(&mut v);
        c.set(v);
    });
}

/// Snapshot of this thread's counters.
pub fn op_counts() -> OpCounts {
    COUNTS.with(Cell::get)
}

pub fn reset_op_counts() {
    COUNTS.with(|c| c.set(OpCounts::default()));
}

/// Runs `f` and returns its result with the primitive work it performed.
pub fn measure<T>(f: impl FnOnce() -> T) -> (T, OpCounts) {
    let before = op_counts();
    let out = f();
    let after = op_counts();
    let delta = OpCounts {
        block_encryptions: after.block_encryptions - before.block_encryptions,
        block_decryptions: after.block_decryptions - before.block_decryptions,
        sha256_calls: after.sha256_calls - before.sha256_calls,
        entropy_draws: after.entropy_draws - before.entropy_draws,
        entropy_octets: after.entropy_octets - before.entropy_octets,
    };
    (out, delta)
}

pub fn sha256(data: &[u8]) -> Digest {
    sha256_parts(&[data])
}

/// SHA-256 over the concatenation of `parts`, without materializing it.
pub fn sha256_parts(parts: &[&[u8]]) -> Digest {
    count(|c| c.sha256_calls += 1);
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    Digest::from_array(h.finalize().into())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hex(d: &Digest) -> String {
        d.as_bytes().iter().map(|b| format!("{b:02x}")).collect()
    }

    #[test]
    fn sha256_known_vectors() {
        assert_eq!(
            hex(&sha256(b"")),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            hex(&sha256(b"abc")),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    // Reference digest computed with Python's hashlib.
    #[test]
    fn sha256_one_mebibyte_of_zeros() {
        let data = vec![0u8; 1 << 20];
        assert_eq!(
            hex(&sha256(&data)),
            "30e14955ebf1352266dc2ff8067e68104607e750abb9d3b36582b8af909fcb58"
        );
        let pieces: Vec<&[u8]> = data.chunks(1000).collect();
        assert_eq!(sha256_parts(&pieces), sha256(&data));
    }

    #[test]
    fn sha256_parts_matches_concatenation() {
        let whole = sha256(b"hello world");
        let split = sha256_parts(&[b"hello", b" ", b"world"]);
        assert_eq!(whole, split);
    }

    #[test]
    fn measure_reports_delta() {
        let (_, counts) = measure(|| {
            sha256(b"x");
            sha256(b"y");
        });
        assert_eq!(counts.sha256_calls, 2);
    }
}
