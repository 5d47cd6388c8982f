use super::{sha256_parts, CryptoError, IgePair, Key32, BLOCK_LEN};

pub const MSG_KEY_LEN: usize = 16;

/// Output of the per-message key schedule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageKeys {
    pub msg_key: [u8; MSG_KEY_LEN],
    pub ige_key: Key32,
    pub ige_iv: IgePair,
}

/// Per-message key schedule.
///
/// `msg_key` is the first 16 octets of `sha256(auth_key || payload)`. The
/// IGE key and both IV halves come from `sha256(tag || msg_key || auth_key)`
/// with domain tags `0x01` (key), `0x02` (`y0`) and `0x03` (`x0`).
pub fn derive_message_keys(auth_key: &[u8], payload: &[u8]) -> Result<MessageKeys, CryptoError> {
    if !payload.len().is_multiple_of(BLOCK_LEN) {
        return Err(CryptoError::NotBlockMultiple(payload.len()));
    }
    let msg_key: [u8; MSG_KEY_LEN] = sha256_parts(&[auth_key, payload]).prefix();
    Ok(keys_for_msg_key(auth_key, msg_key))
}

pub(crate) fn keys_for_msg_key(auth_key: &[u8], msg_key: [u8; MSG_KEY_LEN]) -> MessageKeys {
    let ige_key = Key32::from_array(*sha256_parts(&[&[0x01], &msg_key, auth_key]).as_bytes());
    let y0 = sha256_parts(&[&[0x02], &msg_key, auth_key]).prefix();
    let x0 = sha256_parts(&[&[0x03], &msg_key, auth_key]).prefix();
    MessageKeys {
        msg_key,
        ige_key,
        ige_iv: IgePair { y0, x0 },
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use rand::{Rng, RngCore, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    use super::*;

    #[test]
    fn deterministic() {
        let a = derive_message_keys(&[7u8; 160], &[1u8; 32]).unwrap();
        let b = derive_message_keys(&[7u8; 160], &[1u8; 32]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_unaligned_payload() {
        assert_eq!(
            derive_message_keys(&[0u8; 160], &[0u8; 20]),
            Err(CryptoError::NotBlockMultiple(20))
        );
    }

    #[test]
    fn one_bit_flip_changes_msg_key() {
        let mut r = ChaCha20Rng::seed_from_u64(11);
        let auth: Vec<u8> = (0..160).map(|_| r.gen()).collect();
        let mut seen = HashSet::new();
        for _ in 0..1000 {
            let mut p = vec![0u8; 64];
            r.fill_bytes(&mut p);
            let a = derive_message_keys(&auth, &p).unwrap().msg_key;
            let bit = r.gen_range(0..p.len() * 8);
            p[bit / 8] ^= 1 << (bit % 8);
            let b = derive_message_keys(&auth, &p).unwrap().msg_key;
            assert_ne!(a, b);
            assert!(seen.insert(a));
        }
    }

    // Known-answer vector computed independently with Python's hashlib.
    #[test]
    fn golden_vector() {
        let keys = derive_message_keys(&[0xAA; 160], &[0u8; 16]).unwrap();
        let hex = |b: &[u8]| b.iter().map(|x| format!("{x:02x}")).collect::<String>();
        assert_eq!(hex(&keys.msg_key), GOLDEN_MSG_KEY);
        assert_eq!(hex(keys.ige_key.as_bytes()), GOLDEN_IGE_KEY);
        assert_eq!(hex(&keys.ige_iv.y0), GOLDEN_Y0);
        assert_eq!(hex(&keys.ige_iv.x0), GOLDEN_X0);
    }

    const GOLDEN_MSG_KEY: &str = "ca2a56cfd4b36fd94b4201f52069703e";
    const GOLDEN_IGE_KEY: &str = "8a9ef56771b637fbd1ebe38a751b7b4f2a98139eca31d1b33723f16631f683ac";
    const GOLDEN_Y0: &str = "9d3909a41263fd46ac12fb1088a1ef59";
    const GOLDEN_X0: &str = "86f71343226e3ab7abedc675db64f23c";
}
