use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{count, CryptoError};

/// Source of random coins, padding, IVs and salts.
///
/// Implementations must fail loudly: a source that cannot produce entropy
/// returns an error instead of predictable output.
pub trait EntropySource: Send {
    fn try_fill(&mut self, buf: &mut [u8]) -> Result<(), CryptoError>;

    fn fill(&mut self, len: usize) -> Result<Vec<u8>, CryptoError> {
        let mut out = vec![0u8; len];
        self.try_fill(&mut out)?;
        count(|c| {
            c.entropy_draws += 1;
            c.entropy_octets += len as u64;
        });
        Ok(out)
    }
}

/// Operating-system CSPRNG.
#[derive(Debug, Default, Clone, Copy)]
pub struct OsEntropy;

impl EntropySource for OsEntropy {
    fn try_fill(&mut self, buf: &mut [u8]) -> Result<(), CryptoError> {
        getrandom::getrandom(buf).map_err(|e| CryptoError::Entropy(e.to_string()))
    }
}

/// ChaCha20 stream seeded from a 64-bit seed. Reproducible runs only
/// (games, tests, scripted demos); never for real traffic.
#[derive(Debug, Clone)]
pub struct SeededEntropy(ChaCha20Rng);

impl SeededEntropy {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha20Rng::seed_from_u64(seed))
    }
}

impl EntropySource for SeededEntropy {
    fn try_fill(&mut self, buf: &mut [u8]) -> Result<(), CryptoError> {
        self.0.fill_bytes(buf);
        Ok(())
    }
}

/// `len` octets from the OS CSPRNG.
pub fn prng_fill(len: usize) -> Result<Vec<u8>, CryptoError> {
    OsEntropy.fill(len)
}
