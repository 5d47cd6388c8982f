use argon2::{Algorithm, Argon2, Params, Version};
use serde::{Deserialize, Serialize};

use super::{CryptoError, Digest};

pub type Salt = [u8; 16];

/// Argon2id cost parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkFactor {
    pub memory_kib: u32,
    pub iterations: u32,
}

impl WorkFactor {
    /// Cheap parameters for tests and games. Not for real passwords.
    pub const FAST: WorkFactor = WorkFactor {
        memory_kib: 64,
        iterations: 1,
    };
}

impl Default for WorkFactor {
    /// 64 MiB, three passes: well over 100 ms on a desktop core.
    fn default() -> Self {
        WorkFactor {
            memory_kib: 64 * 1024,
            iterations: 3,
        }
    }
}

pub fn password_digest(
    password: &str,
    salt: &Salt,
    cost: WorkFactor,
) -> Result<Digest, CryptoError> {
    if password.is_empty() {
        return Err(CryptoError::EmptyPassword);
    }
    let params = Params::new(cost.memory_kib, cost.iterations, 1, Some(32))
        .map_err(|e| CryptoError::PasswordHash(e.to_string()))?;
    let mut out = [0u8; 32];
    Argon2::new(Algorithm::Argon2id, Version::V0x13, params)
        .hash_password_into(password.as_bytes(), salt, &mut out)
        .map_err(|e| CryptoError::PasswordHash(e.to_string()))?;
    Ok(Digest::from_array(out))
}

/// Constant-time check of `password` against a stored digest.
pub fn verify_digest(
    password: &str,
    salt: &Salt,
    cost: WorkFactor,
    expected: &Digest,
) -> Result<bool, CryptoError> {
    Ok(password_digest(password, salt, cost)? == *expected)
}
