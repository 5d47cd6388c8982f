use std::fmt;

use subtle::ConstantTimeEq;
use zeroize::{Zeroize, ZeroizeOnDrop};

use super::CryptoError;

/// Fixed-width secret key. Equality is constant-time.
#[derive(Clone, Zeroize, ZeroizeOnDrop)]
pub struct SymmetricKey<const N: usize>([u8; N]);

pub type Key16 = SymmetricKey<16>;
pub type Key32 = SymmetricKey<32>;

impl<const N: usize> SymmetricKey<N> {
    pub const LEN: usize = N;

    pub fn from_array(bytes: [u8; N]) -> Self {
        Self(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; N] = bytes.try_into().map_err(|_| CryptoError::BadLength {
            expected: N,
            actual: bytes.len(),
        })?;
        Ok(Self(arr))
    }

    pub fn as_bytes(&self) -> &[u8; N] {
        &self.0
    }
}

impl<const N: usize> PartialEq for SymmetricKey<N> {
    fn eq(&self, other: &Self) -> bool {
        self.0.ct_eq(&other.0).into()
    }
}

impl<const N: usize> Eq for SymmetricKey<N> {}

impl<const N: usize> fmt::Debug for SymmetricKey<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymmetricKey<{N}>(..)")
    }
}

/// IGE initialization pair: `y0` plays the previous ciphertext block and
/// `x0` the previous plaintext block.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct IgePair {
    pub y0: [u8; 16],
    pub x0: [u8; 16],
}

/// 32-octet SHA-256 output.
#[derive(Clone, Copy)]
pub struct Digest([u8; 32]);

impl Digest {
    pub fn from_array(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn prefix<const M: usize>(&self) -> [u8; M] {
        let mut out = [0u8; M];
        out.copy_from_slice(&self.0[..M]);
        out
    }
}

impl PartialEq for Digest {
    fn eq(&self, other: &Self) -> bool {
        self.0.ct_eq(&other.0).into()
    }
}

impl Eq for Digest {}

impl std::hash::Hash for Digest {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.0.hash(state);
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest(")?;
        for b in &self.0[..8] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..)")
    }
}
