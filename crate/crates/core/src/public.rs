//! The public E2EE channel.
//!
//! Payload layout, all integers big-endian:
//!
//! ```text
//! coin (w) | session_id (8) | seq_no (8) | body_len (4) | body | padding (12..=27)
//! ```
//!
//! The payload is padded to a multiple of 16 and encrypted with AES-256-IGE
//! under keys derived from the shared auth key and the payload itself. The
//! coin is an opaque caller input; nothing here branches on its content.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use subtle::ConstantTimeEq;
use thiserror::Error;
use zeroize::{Zeroize, ZeroizeOnDrop};

use crate::crypto::{
    self, ctr_xcrypt, derive_message_keys, ige_decrypt, ige_encrypt, sha256, CryptoError,
    EntropySource, Key16, BLOCK_LEN, MSG_KEY_LEN,
};

pub const AUTH_KEY_LEN: usize = 160;
pub const MAX_BODY_LEN: usize = 4096;
pub const MIN_PADDING: usize = 12;
/// session_id + seq_no + body_len.
const FIXED_FIELDS: usize = 8 + 8 + 4;
pub const METADATA_LEN: usize = 33;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChannelError {
    #[error("body length {0} outside 1..=4096")]
    BodySize(usize),
    #[error("coin is {actual} octets, profile needs {expected}")]
    CoinWidth { expected: usize, actual: usize },
    #[error("envelope addressed to a different auth key")]
    Routing,
    #[error("message key mismatch")]
    Integrity,
    #[error("malformed: {0}")]
    Framing(&'static str),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// Which messenger's coin slot is being used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelProfile {
    /// 15-octet MTProto-style salt.
    TelegramLike,
    /// 16-octet sealed-sender metadata IV.
    SignalLike,
    /// 32-octet salt and 16-octet IV used as one 48-octet coin.
    BriarLike,
}

impl ChannelProfile {
    pub const ALL: [ChannelProfile; 3] = [Self::TelegramLike, Self::SignalLike, Self::BriarLike];

    pub const fn coin_width(self) -> usize {
        match self {
            Self::TelegramLike => 15,
            Self::SignalLike => 16,
            Self::BriarLike => 48,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            Self::TelegramLike => "telegram",
            Self::SignalLike => "signal",
            Self::BriarLike => "briar",
        }
    }
}

impl fmt::Display for ChannelProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChannelProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim_end_matches("-like") {
            "telegram" => Ok(Self::TelegramLike),
            "signal" => Ok(Self::SignalLike),
            "briar" => Ok(Self::BriarLike),
            other => Err(format!("unknown profile '{other}' (telegram|signal|briar)")),
        }
    }
}

/// Per-message randomness slot, exactly one profile's coin width.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomCoin(Vec<u8>);

impl RandomCoin {
    pub fn new(profile: ChannelProfile, bytes: Vec<u8>) -> Result<Self, ChannelError> {
        if bytes.len() != profile.coin_width() {
            return Err(ChannelError::CoinWidth {
                expected: profile.coin_width(),
                actual: bytes.len(),
            });
        }
        Ok(Self(bytes))
    }

    pub fn random(
        profile: ChannelProfile,
        rng: &mut dyn EntropySource,
    ) -> Result<Self, CryptoError> {
        Ok(Self(rng.fill(profile.coin_width())?))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for RandomCoin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RandomCoin(")?;
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        write!(f, ")")
    }
}

/// Long-term key shared by the two endpoints of a session.
#[derive(Clone, Zeroize, ZeroizeOnDrop)]
pub struct AuthKey {
    id: [u8; 8],
    key: Box<[u8; AUTH_KEY_LEN]>,
}

impl AuthKey {
    pub fn new(key: [u8; AUTH_KEY_LEN]) -> Self {
        let id = sha256(&key).prefix();
        Self {
            id,
            key: Box::new(key),
        }
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, ChannelError> {
        let arr: [u8; AUTH_KEY_LEN] = bytes.try_into().map_err(|_| {
            ChannelError::Crypto(CryptoError::BadLength {
                expected: AUTH_KEY_LEN,
                actual: bytes.len(),
            })
        })?;
        Ok(Self::new(arr))
    }

    pub fn generate(rng: &mut dyn EntropySource) -> Result<Self, CryptoError> {
        let bytes = rng.fill(AUTH_KEY_LEN)?;
        Ok(Self::new(
            bytes.try_into().expect("fill returns requested length"),
        ))
    }

    pub fn id(&self) -> [u8; 8] {
        self.id
    }

    pub fn key(&self) -> &[u8; AUTH_KEY_LEN] {
        &self.key
    }
}

impl PartialEq for AuthKey {
    fn eq(&self, other: &Self) -> bool {
        self.key.ct_eq(&*other.key).into()
    }
}

impl Eq for AuthKey {}

impl fmt::Debug for AuthKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AuthKey(id=")?;
        for b in &self.id {
            write!(f, "{b:02x}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicPlaintext {
    pub session_id: [u8; 8],
    pub seq_no: u64,
    pub body: Vec<u8>,
}

/// One encrypted public message as it travels on the wire.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PublicEnvelope {
    pub auth_key_id: [u8; 8],
    pub msg_key: [u8; MSG_KEY_LEN],
    pub ciphertext: Vec<u8>,
}

impl PublicEnvelope {
    // auth_key_id + msg_key + ciphertext length prefix
    pub const HEADER_LEN: usize = 8 + MSG_KEY_LEN + 4;

    /// `auth_key_id(8) || msg_key(16) || len(4, BE) || ciphertext`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::HEADER_LEN + self.ciphertext.len());
        out.extend_from_slice(&self.auth_key_id);
        out.extend_from_slice(&self.msg_key);
        out.extend_from_slice(&(self.ciphertext.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.ciphertext);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ChannelError> {
        if bytes.len() < Self::HEADER_LEN {
            return Err(ChannelError::Framing("envelope shorter than header"));
        }
        let len = u32::from_be_bytes(bytes[24..28].try_into().unwrap()) as usize;
        if bytes.len() != Self::HEADER_LEN + len {
            return Err(ChannelError::Framing("envelope length prefix mismatch"));
        }
        Ok(Self {
            auth_key_id: bytes[..8].try_into().unwrap(),
            msg_key: bytes[8..24].try_into().unwrap(),
            ciphertext: bytes[28..].to_vec(),
        })
    }

    pub fn wire_len(&self) -> usize {
        Self::HEADER_LEN + self.ciphertext.len()
    }
}

/// Payload length for a given coin width and body length.
pub fn payload_len(coin_width: usize, body_len: usize) -> usize {
    (coin_width + FIXED_FIELDS + body_len + MIN_PADDING).next_multiple_of(BLOCK_LEN)
}

/// Padding octets needed after the body: always in 12..=27.
pub fn padding_len(coin_width: usize, body_len: usize) -> usize {
    payload_len(coin_width, body_len) - coin_width - FIXED_FIELDS - body_len
}

fn check_inputs(
    profile: ChannelProfile,
    pt: &PublicPlaintext,
    coin: &RandomCoin,
) -> Result<(), ChannelError> {
    if pt.body.is_empty() || pt.body.len() > MAX_BODY_LEN {
        return Err(ChannelError::BodySize(pt.body.len()));
    }
    if coin.len() != profile.coin_width() {
        return Err(ChannelError::CoinWidth {
            expected: profile.coin_width(),
            actual: coin.len(),
        });
    }
    Ok(())
}

/// Assembles a payload with explicitly supplied padding octets.
pub fn build_payload_with_padding(
    profile: ChannelProfile,
    pt: &PublicPlaintext,
    coin: &RandomCoin,
    padding: &[u8],
) -> Result<Vec<u8>, ChannelError> {
    check_inputs(profile, pt, coin)?;
    if padding.len() != padding_len(coin.len(), pt.body.len()) {
        return Err(ChannelError::Framing(
            "padding length does not reach block boundary",
        ));
    }
    let mut out = Vec::with_capacity(payload_len(coin.len(), pt.body.len()));
    out.extend_from_slice(coin.as_bytes());
    out.extend_from_slice(&pt.session_id);
    out.extend_from_slice(&pt.seq_no.to_be_bytes());
    out.extend_from_slice(&(pt.body.len() as u32).to_be_bytes());
    out.extend_from_slice(&pt.body);
    out.extend_from_slice(padding);
    Ok(out)
}

/// Assembles a payload with fresh random padding; returns the payload and
/// the padding used.
pub fn build_payload(
    profile: ChannelProfile,
    pt: &PublicPlaintext,
    coin: &RandomCoin,
    rng: &mut dyn EntropySource,
) -> Result<(Vec<u8>, Vec<u8>), ChannelError> {
    check_inputs(profile, pt, coin)?;
    let padding = rng.fill(padding_len(coin.len(), pt.body.len()))?;
    let payload = build_payload_with_padding(profile, pt, coin, &padding)?;
    Ok((payload, padding))
}

/// Fields recovered from a decrypted payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedPayload {
    pub plaintext: PublicPlaintext,
    pub coin: RandomCoin,
    pub padding: Vec<u8>,
}

pub fn parse_payload(
    profile: ChannelProfile,
    payload: &[u8],
) -> Result<ParsedPayload, ChannelError> {
    let w = profile.coin_width();
    if !payload.len().is_multiple_of(BLOCK_LEN) || payload.len() < w + FIXED_FIELDS + 1 + MIN_PADDING {
        return Err(ChannelError::Framing("payload size"));
    }
    let (coin, rest) = payload.split_at(w);
    let session_id: [u8; 8] = rest[..8].try_into().unwrap();
    let seq_no = u64::from_be_bytes(rest[8..16].try_into().unwrap());
    let body_len = u32::from_be_bytes(rest[16..20].try_into().unwrap()) as usize;
    if body_len == 0 || body_len > MAX_BODY_LEN || payload.len() != payload_len(w, body_len) {
        return Err(ChannelError::Framing("body length field"));
    }
    let body = rest[20..20 + body_len].to_vec();
    let padding = rest[20 + body_len..].to_vec();
    Ok(ParsedPayload {
        plaintext: PublicPlaintext {
            session_id,
            seq_no,
            body,
        },
        coin: RandomCoin(coin.to_vec()),
        padding,
    })
}

/// An envelope together with the padding that went into it; the padding is
/// what makes later re-encryption bit-exact.
#[derive(Debug, Clone)]
pub struct Sealed {
    pub envelope: PublicEnvelope,
    pub padding: Vec<u8>,
}

/// Deterministic sealing: same `(auth, pt, coin, padding)` always yields
/// the same envelope.
pub fn seal_public_with_padding(
    profile: ChannelProfile,
    auth: &AuthKey,
    pt: &PublicPlaintext,
    coin: &RandomCoin,
    padding: &[u8],
) -> Result<PublicEnvelope, ChannelError> {
    let payload = build_payload_with_padding(profile, pt, coin, padding)?;
    let keys = derive_message_keys(auth.key(), &payload)?;
    let ciphertext = ige_encrypt(&keys.ige_key, &keys.ige_iv, &payload)?;
    Ok(PublicEnvelope {
        auth_key_id: auth.id(),
        msg_key: keys.msg_key,
        ciphertext,
    })
}

pub fn seal_public(
    profile: ChannelProfile,
    auth: &AuthKey,
    pt: &PublicPlaintext,
    coin: &RandomCoin,
    rng: &mut dyn EntropySource,
) -> Result<Sealed, ChannelError> {
    check_inputs(profile, pt, coin)?;
    let padding = rng.fill(padding_len(coin.len(), pt.body.len()))?;
    let envelope = seal_public_with_padding(profile, auth, pt, coin, &padding)?;
    Ok(Sealed { envelope, padding })
}

/// Decrypts and authenticates an envelope. Nothing from the payload is
/// released unless the recomputed message key matches.
pub fn open_public(
    profile: ChannelProfile,
    auth: &AuthKey,
    env: &PublicEnvelope,
) -> Result<ParsedPayload, ChannelError> {
    if env.auth_key_id != auth.id() {
        return Err(ChannelError::Routing);
    }
    if env.ciphertext.is_empty() || !env.ciphertext.len().is_multiple_of(BLOCK_LEN) {
        return Err(ChannelError::Framing("ciphertext not block aligned"));
    }
    let keys = crypto::kdf_for_msg_key(auth.key(), env.msg_key);
    let payload = ige_decrypt(&keys.ige_key, &keys.ige_iv, &env.ciphertext)?;
    let recomputed: [u8; MSG_KEY_LEN] = crypto::sha256_parts(&[auth.key(), &payload]).prefix();
    if !bool::from(recomputed.ct_eq(&env.msg_key)) {
        return Err(ChannelError::Integrity);
    }
    parse_payload(profile, &payload)
}

/// Sealed-sender style metadata: 16-octet IV (the coin) and CTR
/// ciphertext of exactly 33 octets. No integrity tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SealedMetadata {
    pub iv: [u8; 16],
    pub ciphertext: [u8; METADATA_LEN],
}

pub fn seal_metadata(
    key: &Key16,
    metadata: &[u8],
    iv: &RandomCoin,
) -> Result<SealedMetadata, ChannelError> {
    let metadata: &[u8; METADATA_LEN] = metadata.try_into().map_err(|_| {
        ChannelError::Crypto(CryptoError::BadLength {
            expected: METADATA_LEN,
            actual: metadata.len(),
        })
    })?;
    let iv: [u8; 16] = iv
        .as_bytes()
        .try_into()
        .map_err(|_| ChannelError::CoinWidth {
            expected: 16,
            actual: iv.len(),
        })?;
    let ct = ctr_xcrypt(key, &iv, metadata);
    Ok(SealedMetadata {
        iv,
        ciphertext: ct.try_into().expect("ctr preserves length"),
    })
}

pub fn open_metadata(key: &Key16, sealed: &SealedMetadata) -> [u8; METADATA_LEN] {
    ctr_xcrypt(key, &sealed.iv, &sealed.ciphertext)
        .try_into()
        .expect("ctr preserves length")
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    use super::*;
    use crate::crypto::SeededEntropy;

    const TG: ChannelProfile = ChannelProfile::TelegramLike;

    fn auth(seed: u64) -> AuthKey {
        AuthKey::generate(&mut SeededEntropy::new(seed)).unwrap()
    }

    fn pt(body: &[u8]) -> PublicPlaintext {
        PublicPlaintext {
            session_id: *b"sess0001",
            seq_no: 42,
            body: body.to_vec(),
        }
    }

    fn coin(fill: u8) -> RandomCoin {
        RandomCoin::new(TG, vec![fill; 15]).unwrap()
    }

    #[test]
    fn payload_length_arithmetic() {
        // 15 + 8 + 8 + 4 + 2 + 12 = 49, next multiple of 16 is 64.
        assert_eq!(payload_len(15, 2), 64);
        let (p, pad) = build_payload(TG, &pt(b"hi"), &coin(1), &mut SeededEntropy::new(0)).unwrap();
        assert_eq!(p.len(), 64);
        assert_eq!(pad.len(), 64 - 49 + 12);
    }

    #[test]
    fn padding_always_between_12_and_27() {
        for w in [15, 16, 48] {
            for n in 1..=MAX_BODY_LEN {
                let p = padding_len(w, n);
                assert!((12..=27).contains(&p), "w={w} n={n} pad={p}");
            }
        }
    }

    #[test]
    fn build_rejects_bad_sizes() {
        let mut r = SeededEntropy::new(0);
        assert_eq!(
            build_payload(TG, &pt(b""), &coin(0), &mut r).unwrap_err(),
            ChannelError::BodySize(0)
        );
        assert_eq!(
            build_payload(TG, &pt(&[0; 4097]), &coin(0), &mut r).unwrap_err(),
            ChannelError::BodySize(4097)
        );
        let wide = RandomCoin::new(ChannelProfile::SignalLike, vec![0; 16]).unwrap();
        assert!(matches!(
            build_payload(TG, &pt(b"x"), &wide, &mut r),
            Err(ChannelError::CoinWidth {
                expected: 15,
                actual: 16
            })
        ));
    }

    #[test]
    fn random_padding_differs_but_parses_identically() {
        let mut r = SeededEntropy::new(9);
        let mut payloads = std::collections::HashSet::new();
        for _ in 0..100 {
            let (p, _) = build_payload(TG, &pt(b"hello"), &coin(3), &mut r).unwrap();
            let parsed = parse_payload(TG, &p).unwrap();
            assert_eq!(parsed.plaintext, pt(b"hello"));
            assert_eq!(parsed.coin, coin(3));
            payloads.insert(p);
        }
        assert_eq!(payloads.len(), 100);
    }

    #[test]
    fn seal_open_round_trip() {
        let a = auth(1);
        let mut r = SeededEntropy::new(2);
        let sealed = seal_public(TG, &a, &pt(b"hello"), &coin(7), &mut r).unwrap();
        let opened = open_public(TG, &a, &sealed.envelope).unwrap();
        assert_eq!(opened.plaintext, pt(b"hello"));
        assert_eq!(opened.coin, coin(7));
        assert_eq!(opened.padding, sealed.padding);
    }

    #[test]
    fn different_coins_give_different_envelopes() {
        let a = auth(1);
        let mut r = SeededEntropy::new(2);
        let padding = r.fill(padding_len(15, 5)).unwrap();
        let e1 = seal_public_with_padding(TG, &a, &pt(b"hello"), &coin(1), &padding).unwrap();
        let e2 = seal_public_with_padding(TG, &a, &pt(b"hello"), &coin(2), &padding).unwrap();
        assert_ne!(e1.msg_key, e2.msg_key);
        assert_ne!(e1.ciphertext, e2.ciphertext);
    }

    #[test]
    fn resealing_disclosed_inputs_is_bit_exact() {
        let a = auth(5);
        let mut r = SeededEntropy::new(6);
        let sealed = seal_public(TG, &a, &pt(b"meet at noon"), &coin(9), &mut r).unwrap();
        let again =
            seal_public_with_padding(TG, &a, &pt(b"meet at noon"), &coin(9), &sealed.padding)
                .unwrap();
        assert_eq!(again.to_bytes(), sealed.envelope.to_bytes());
    }

    #[test]
    fn bit_flips_are_rejected() {
        let a = auth(1);
        let mut r = ChaCha20Rng::seed_from_u64(3);
        let mut ent = SeededEntropy::new(4);
        let sealed = seal_public(TG, &a, &pt(b"some public text"), &coin(1), &mut ent).unwrap();
        for _ in 0..100 {
            let mut env = sealed.envelope.clone();
            let bit = r.gen_range(0..env.ciphertext.len() * 8);
            env.ciphertext[bit / 8] ^= 1 << (bit % 8);
            assert_eq!(open_public(TG, &a, &env), Err(ChannelError::Integrity));
        }
    }

    #[test]
    fn forged_key_id_with_wrong_key_fails_integrity() {
        let a = auth(1);
        let b = auth(2);
        let sealed = seal_public(TG, &a, &pt(b"x"), &coin(0), &mut SeededEntropy::new(0)).unwrap();
        let mut env = sealed.envelope;
        assert_eq!(open_public(TG, &b, &env), Err(ChannelError::Routing));
        env.auth_key_id = b.id();
        assert_eq!(open_public(TG, &b, &env), Err(ChannelError::Integrity));
    }

    #[test]
    fn coin_content_does_not_change_shape() {
        let a = auth(1);
        let mut r = SeededEntropy::new(1);
        let mut hidden_like = vec![0u8; 15];
        r.try_fill(&mut hidden_like).unwrap();
        let coins = [
            coin(0x00),
            coin(0xff),
            RandomCoin::random(TG, &mut r).unwrap(),
            RandomCoin::new(TG, hidden_like).unwrap(),
        ];
        let sizes: Vec<usize> = coins
            .iter()
            .map(|c| {
                let s = seal_public(TG, &a, &pt(b"same body"), c, &mut r).unwrap();
                let o = open_public(TG, &a, &s.envelope).unwrap();
                assert_eq!(o.plaintext.body, b"same body");
                assert_eq!(&o.coin, c);
                s.envelope.wire_len()
            })
            .collect();
        assert!(sizes.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn envelope_wire_layout() {
        let env = PublicEnvelope {
            auth_key_id: [1; 8],
            msg_key: [2; 16],
            ciphertext: vec![3; 32],
        };
        let b = env.to_bytes();
        assert_eq!(&b[..8], &[1; 8]);
        assert_eq!(&b[8..24], &[2; 16]);
        assert_eq!(&b[24..28], &32u32.to_be_bytes());
        assert_eq!(PublicEnvelope::from_bytes(&b).unwrap(), env);
        assert!(PublicEnvelope::from_bytes(&b[..40]).is_err());
    }

    #[test]
    fn metadata_round_trip_and_properties() {
        let key = Key16::from_array([4; 16]);
        let sig = ChannelProfile::SignalLike;
        let mut r = SeededEntropy::new(8);
        let meta = r.fill(METADATA_LEN).unwrap();
        let iv = RandomCoin::random(sig, &mut r).unwrap();
        let sealed = seal_metadata(&key, &meta, &iv).unwrap();
        assert_eq!(sealed.ciphertext.len(), 33);
        assert_eq!(open_metadata(&key, &sealed).to_vec(), meta);

        let wrong = open_metadata(&Key16::from_array([5; 16]), &sealed);
        assert_ne!(wrong.to_vec(), meta);

        let zero_iv = RandomCoin::new(sig, vec![0; 16]).unwrap();
        let sealed = seal_metadata(&key, &meta, &zero_iv).unwrap();
        assert_eq!(open_metadata(&key, &sealed).to_vec(), meta);

        assert!(seal_metadata(&key, &meta[..32], &iv).is_err());
    }

    #[test]
    fn profile_parsing() {
        assert_eq!("telegram".parse::<ChannelProfile>().unwrap(), TG);
        assert_eq!(
            "signal-like".parse::<ChannelProfile>().unwrap(),
            ChannelProfile::SignalLike
        );
        assert!("icq".parse::<ChannelProfile>().is_err());
    }

    proptest! {
        #[test]
        fn prop_seal_open(body in proptest::collection::vec(any::<u8>(), 1..=512), seq in any::<u64>(), seed in any::<u64>()) {
            for profile in ChannelProfile::ALL {
                let mut r = SeededEntropy::new(seed);
                let a = AuthKey::generate(&mut r).unwrap();
                let c = RandomCoin::random(profile, &mut r).unwrap();
                let p = PublicPlaintext { session_id: [9; 8], seq_no: seq, body: body.clone() };
                let s = seal_public(profile, &a, &p, &c, &mut r).unwrap();
                prop_assert_eq!(s.envelope.ciphertext.len(), payload_len(profile.coin_width(), body.len()));
                let o = open_public(profile, &a, &PublicEnvelope::from_bytes(&s.envelope.to_bytes()).unwrap()).unwrap();
                prop_assert_eq!(o.plaintext, p);
                prop_assert_eq!(o.coin, c);
            }
        }
    }
}
