//! Fixed-size encrypted persistent blob.
//!
//! File layout: `nonce(16) || ciphertext(2^20 - 48) || tag(32)`. The
//! ciphertext is AES-128-CTR of the plaintext table below, the tag an
//! HMAC-SHA256 over nonce and ciphertext. Both keys are derived from the
//! device key.
//!
//! Plaintext table:
//!
//! ```text
//! 0    magic "CVST"
//! 4    flags (bit 0 initialized, bit 1 locked out)
//! 5    failed attempts, u32 BE
//! 9    salt (16)
//! 25   public, hidden, disclosure digests (3 x 32)
//! 121  work factor: memory KiB u32 BE, iterations u32 BE
//! 129  watermark length u16 BE, watermark (240)
//! 371  record count u32 BE
//! 375  reserved (9)
//! 384  records, 136 octets each: contact_id(8) || secret(128)
//! ...  random fill to the end
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use hmac::{Hmac, Mac};
use sha2::Sha256;
use subtle::ConstantTimeEq;
use zeroize::{Zeroize, ZeroizeOnDrop};

use crate::crypto::{
    ctr_xcrypt, sha256_parts, CryptoError, Digest, EntropySource, Key16, Key32, Salt, WorkFactor,
};

pub const BLOB_LEN: usize = 1 << 20;
const NONCE_LEN: usize = 16;
const TAG_LEN: usize = 32;
pub const BLOB_BODY_LEN: usize = BLOB_LEN - NONCE_LEN - TAG_LEN;
pub const TABLE_HEADER_LEN: usize = 384;
pub const RECORD_LEN: usize = 136;
pub const SECRET_LEN: usize = 128;
pub const MAX_WATERMARK_LEN: usize = 240;
pub const CAPACITY: usize = (BLOB_BODY_LEN - TABLE_HEADER_LEN) / RECORD_LEN;
const MAGIC: &[u8; 4] = b"CVST";

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum StoreError {
    #[error("blob failed its integrity check")]
    Tamper,
    #[error("blob is {0} octets, expected {BLOB_LEN}")]
    Size(usize),
    #[error("blob contents malformed")]
    Malformed,
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// One hidden contact: identifier and the out-of-band shared secret.
#[derive(Clone, PartialEq, Eq, Zeroize, ZeroizeOnDrop)]
pub struct ContactRecord {
    pub contact_id: [u8; 8],
    pub secret: [u8; SECRET_LEN],
}

impl ContactRecord {
    /// 16-octet working key: `sha256(0x10 || secret)[..16]`.
    pub fn working_hmk(&self) -> Key16 {
        Key16::from_array(sha256_parts(&[&[0x10], &self.secret]).prefix())
    }
}

impl std::fmt::Debug for ContactRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ContactRecord({:02x?}, ..)", self.contact_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredCredentials {
    pub salt: Salt,
    pub public: Digest,
    pub hidden: Digest,
    pub disclosure: Digest,
    pub work_factor: WorkFactor,
    pub watermark: String,
}

/// Everything that persists across reboots.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StoreContents {
    pub credentials: Option<StoredCredentials>,
    pub locked_out: bool,
    pub failed_attempts: u32,
    pub contacts: Vec<ContactRecord>,
}

fn blob_keys(device_key: &Key32) -> (Key16, Key32) {
    let enc = Key16::from_array(sha256_parts(&[&[0x30], device_key.as_bytes()]).prefix());
    let mac = Key32::from_array(*sha256_parts(&[&[0x31], device_key.as_bytes()]).as_bytes());
    (enc, mac)
}

fn tag(mac_key: &Key32, nonce: &[u8], ct: &[u8]) -> [u8; TAG_LEN] {
    let mut m = <Hmac<Sha256> as Mac>::new_from_slice(mac_key.as_bytes()).expect("any key length");
    m.update(nonce);
    m.update(ct);
    m.finalize().into_bytes().into()
}

impl StoreContents {
    /// Encrypts to exactly [`BLOB_LEN`] octets with a fresh nonce.
    pub fn seal(
        &self,
        device_key: &Key32,
        rng: &mut dyn EntropySource,
    ) -> Result<Vec<u8>, StoreError> {
        if self.contacts.len() > CAPACITY {
            return Err(StoreError::Malformed);
        }
        let mut plain = rng.fill(BLOB_BODY_LEN)?;
        plain[..TABLE_HEADER_LEN].fill(0);
        plain[..4].copy_from_slice(MAGIC);
        let mut flags = 0u8;
        if let Some(c) = &self.credentials {
            flags |= 1;
            plain[9..25].copy_from_slice(&c.salt);
            plain[25..57].copy_from_slice(c.public.as_bytes());
            plain[57..89].copy_from_slice(c.hidden.as_bytes());
            plain[89..121].copy_from_slice(c.disclosure.as_bytes());
            plain[121..125].copy_from_slice(&c.work_factor.memory_kib.to_be_bytes());
            plain[125..129].copy_from_slice(&c.work_factor.iterations.to_be_bytes());
            let w = c.watermark.as_bytes();
            if w.len() > MAX_WATERMARK_LEN {
                return Err(StoreError::Malformed);
            }
            plain[129..131].copy_from_slice(&(w.len() as u16).to_be_bytes());
            plain[131..131 + w.len()].copy_from_slice(w);
        }
        if self.locked_out {
            flags |= 2;
        }
        plain[4] = flags;
        plain[5..9].copy_from_slice(&self.failed_attempts.to_be_bytes());
        plain[371..375].copy_from_slice(&(self.contacts.len() as u32).to_be_bytes());
        for (i, rec) in self.contacts.iter().enumerate() {
            let at = TABLE_HEADER_LEN + i * RECORD_LEN;
            plain[at..at + 8].copy_from_slice(&rec.contact_id);
            plain[at + 8..at + RECORD_LEN].copy_from_slice(&rec.secret);
        }

        let (enc, mac) = blob_keys(device_key);
        let nonce: [u8; NONCE_LEN] = rng.fill(NONCE_LEN)?.try_into().unwrap();
        let ct = ctr_xcrypt(&enc, &nonce, &plain);
        plain.zeroize();
        let t = tag(&mac, &nonce, &ct);

        let mut out = Vec::with_capacity(BLOB_LEN);
        out.extend_from_slice(&nonce);
        out.extend_from_slice(&ct);
        out.extend_from_slice(&t);
        debug_assert_eq!(out.len(), BLOB_LEN);
        Ok(out)
    }

    pub fn open(blob: &[u8], device_key: &Key32) -> Result<Self, StoreError> {
        if blob.len() != BLOB_LEN {
            return Err(StoreError::Size(blob.len()));
        }
        let (nonce, rest) = blob.split_at(NONCE_LEN);
        let (ct, t) = rest.split_at(BLOB_BODY_LEN);
        let (enc, mac) = blob_keys(device_key);
        if !bool::from(tag(&mac, nonce, ct).ct_eq(t)) {
            return Err(StoreError::Tamper);
        }
        let mut plain = ctr_xcrypt(&enc, nonce.try_into().unwrap(), ct);
        let out = Self::parse(&plain);
        plain.zeroize();
        out
    }

    fn parse(plain: &[u8]) -> Result<Self, StoreError> {
        if &plain[..4] != MAGIC {
            return Err(StoreError::Malformed);
        }
        let u32_at = |i: usize| u32::from_be_bytes(plain[i..i + 4].try_into().unwrap());
        let digest_at = |i: usize| Digest::from_array(plain[i..i + 32].try_into().unwrap());
        let flags = plain[4];
        let credentials = if flags & 1 != 0 {
            let wlen = u16::from_be_bytes(plain[129..131].try_into().unwrap()) as usize;
            if wlen > MAX_WATERMARK_LEN {
                return Err(StoreError::Malformed);
            }
            let watermark = String::from_utf8(plain[131..131 + wlen].to_vec())
                .map_err(|_| StoreError::Malformed)?;
            Some(StoredCredentials {
                salt: plain[9..25].try_into().unwrap(),
                public: digest_at(25),
                hidden: digest_at(57),
                disclosure: digest_at(89),
                work_factor: WorkFactor {
                    memory_kib: u32_at(121),
                    iterations: u32_at(125),
                },
                watermark,
            })
        } else {
            None
        };
        let count = u32_at(371) as usize;
        if count > CAPACITY {
            return Err(StoreError::Malformed);
        }
        let contacts = (0..count)
            .map(|i| {
                let at = TABLE_HEADER_LEN + i * RECORD_LEN;
                ContactRecord {
                    contact_id: plain[at..at + 8].try_into().unwrap(),
                    secret: plain[at + 8..at + RECORD_LEN].try_into().unwrap(),
                }
            })
            .collect();
        Ok(Self {
            credentials,
            locked_out: flags & 2 != 0,
            failed_attempts: u32_at(5),
            contacts,
        })
    }
}

pub fn store_save(path: &Path, blob: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| StoreError::Io(e.to_string()))?;
    f.write_all(blob)
        .map_err(|e| StoreError::Io(e.to_string()))?;
    f.sync_all().map_err(|e| StoreError::Io(e.to_string()))?;
    fs::rename(&tmp, path).map_err(|e| StoreError::Io(e.to_string()))
}

pub fn store_load(path: &Path, device_key: &Key32) -> Result<StoreContents, StoreError> {
    let blob = fs::read(path).map_err(|e| StoreError::Io(e.to_string()))?;
    StoreContents::open(&blob, device_key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::SeededEntropy;

    fn contacts(n: usize) -> Vec<ContactRecord> {
        (0..n)
            .map(|i| ContactRecord {
                contact_id: (i as u64).to_be_bytes(),
                secret: [(i % 251) as u8; SECRET_LEN],
            })
            .collect()
    }

    #[test]
    fn capacity_exceeds_three_thousand() {
        assert_eq!(CAPACITY, 7706);
        const { assert!(CAPACITY >= 3000) };
    }

    #[test]
    fn size_is_constant_and_contents_round_trip() {
        let key = Key32::from_array([7; 32]);
        let mut r = SeededEntropy::new(1);
        for n in [0usize, 1, 100, 3000] {
            let s = StoreContents {
                contacts: contacts(n),
                ..Default::default()
            };
            let blob = s.seal(&key, &mut r).unwrap();
            assert_eq!(blob.len(), BLOB_LEN);
            assert_eq!(StoreContents::open(&blob, &key).unwrap(), s);
        }
    }

    #[test]
    fn resealing_uses_fresh_nonce() {
        let key = Key32::from_array([7; 32]);
        let mut r = SeededEntropy::new(2);
        let s = StoreContents {
            contacts: contacts(3),
            ..Default::default()
        };
        let a = s.seal(&key, &mut r).unwrap();
        let b = s.seal(&key, &mut r).unwrap();
        assert_ne!(a, b);
        assert_eq!(
            StoreContents::open(&a, &key).unwrap(),
            StoreContents::open(&b, &key).unwrap()
        );
    }

    #[test]
    fn bit_flip_is_tamper() {
        let key = Key32::from_array([7; 32]);
        let mut blob = StoreContents::default()
            .seal(&key, &mut SeededEntropy::new(3))
            .unwrap();
        blob[5000] ^= 0x10;
        assert_eq!(StoreContents::open(&blob, &key), Err(StoreError::Tamper));
        assert_eq!(
            StoreContents::open(&blob[..100], &key),
            Err(StoreError::Size(100))
        );
    }

    #[test]
    fn wrong_device_key_is_tamper() {
        let blob = StoreContents::default()
            .seal(&Key32::from_array([1; 32]), &mut SeededEntropy::new(3))
            .unwrap();
        assert_eq!(
            StoreContents::open(&blob, &Key32::from_array([2; 32])),
            Err(StoreError::Tamper)
        );
    }

    #[test]
    fn credentials_persist() {
        let key = Key32::from_array([9; 32]);
        let s = StoreContents {
            credentials: Some(StoredCredentials {
                salt: [4; 16],
                public: Digest::from_array([1; 32]),
                hidden: Digest::from_array([2; 32]),
                disclosure: Digest::from_array([3; 32]),
                work_factor: WorkFactor::FAST,
                watermark: "blue heron".into(),
            }),
            locked_out: false,
            failed_attempts: 3,
            contacts: contacts(2),
        };
        let blob = s.seal(&key, &mut SeededEntropy::new(4)).unwrap();
        assert_eq!(StoreContents::open(&blob, &key).unwrap(), s);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.bin");
        let key = Key32::from_array([5; 32]);
        let s = StoreContents {
            contacts: contacts(10),
            ..Default::default()
        };
        store_save(&path, &s.seal(&key, &mut SeededEntropy::new(5)).unwrap()).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), BLOB_LEN as u64);
        assert_eq!(store_load(&path, &key).unwrap(), s);
    }

    #[test]
    fn working_hmk_derivation() {
        let rec = ContactRecord {
            contact_id: [0; 8],
            secret: [0x33; SECRET_LEN],
        };
        let expected: [u8; 16] = sha256_parts(&[&[0x10], &[0x33; SECRET_LEN]]).prefix();
        assert_eq!(rec.working_hmk().as_bytes(), &expected);
    }
}
