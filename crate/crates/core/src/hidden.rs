//! Hidden messages carried in public-message coins.
//!
//! A hidden message of `n` octets becomes `ceil(n / w) + 2` coin-width
//! chunks, `w` being the profile's coin width:
//!
//! - two header chunks: `iv(16) || CTR(header_key, iv, len(8) || 0...)`,
//!   filling exactly `2w` octets. The zero run (6 octets for the 15-octet
//!   profile) is the redundancy the receiver uses to tell a header from
//!   random coins.
//! - body chunks: `CTR(hmk, iv, msg)` split into `w`-octet pieces, the
//!   last one topped up with random fill.
//!
//! Without the hidden key every chunk is indistinguishable from a fresh
//! random coin.

use std::collections::{BTreeMap, VecDeque};

use thiserror::Error;

use crate::crypto::{ctr_xcrypt, sha256_parts, CryptoError, EntropySource, Key16};
use crate::public::{ChannelProfile, RandomCoin};

pub const MAX_HIDDEN_LEN: usize = 1 << 20;
const IV_LEN: usize = 16;
const LEN_FIELD: usize = 8;
/// Coins older than this many sequence numbers behind the newest one are
/// forgotten while scanning.
pub const SCAN_RETENTION: u64 = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HiddenError {
    #[error("hidden message must not be empty")]
    Empty,
    #[error("hidden message of {0} octets exceeds the {MAX_HIDDEN_LEN} octet limit")]
    TooLong(usize),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// Number of cover messages needed to carry `n` hidden octets.
pub fn cover_count(n: usize, profile: ChannelProfile) -> Result<usize, HiddenError> {
    if n == 0 {
        return Err(HiddenError::Empty);
    }
    Ok(n.div_ceil(profile.coin_width()) + 2)
}

/// Working hidden key plus the header subkey derived from it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HiddenKey {
    body: Key16,
    header: Key16,
}

impl HiddenKey {
    pub fn new(hmk: Key16) -> Self {
        let header = Key16::from_array(sha256_parts(&[&[0x20], hmk.as_bytes()]).prefix());
        Self { body: hmk, header }
    }

    pub fn hmk(&self) -> &Key16 {
        &self.body
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HiddenFrameHeader {
    pub iv: [u8; 16],
    pub length: u64,
}

impl HiddenFrameHeader {
    /// Plaintext header, `iv || len(8, BE) || zeros`, exactly two coins long.
    pub fn to_bytes(&self, profile: ChannelProfile) -> Vec<u8> {
        let mut out = vec![0u8; 2 * profile.coin_width()];
        out[..IV_LEN].copy_from_slice(&self.iv);
        out[IV_LEN..IV_LEN + LEN_FIELD].copy_from_slice(&self.length.to_be_bytes());
        out
    }

    /// Octets of the zero run for a profile.
    pub fn redundancy_len(profile: ChannelProfile) -> usize {
        2 * profile.coin_width() - IV_LEN - LEN_FIELD
    }

    fn seal(&self, key: &HiddenKey, profile: ChannelProfile) -> Vec<u8> {
        let plain = self.to_bytes(profile);
        let mut out = plain[..IV_LEN].to_vec();
        out.extend(ctr_xcrypt(&key.header, &self.iv, &plain[IV_LEN..]));
        out
    }
}

enum HeaderProbe {
    Header(HiddenFrameHeader),
    /// Redundancy matched but the length field is implausible.
    FalsePositive,
    NotHeader,
}

fn probe_header(key: &HiddenKey, first: &[u8], second: &[u8]) -> HeaderProbe {
    // The iv straddles the two coins when they are narrower than 16 octets.
    let mut joined = Vec::with_capacity(first.len() + second.len());
    joined.extend_from_slice(first);
    joined.extend_from_slice(second);
    let iv: [u8; 16] = joined[..IV_LEN].try_into().unwrap();
    let plain = ctr_xcrypt(&key.header, &iv, &joined[IV_LEN..]);
    if plain[LEN_FIELD..].iter().any(|&b| b != 0) {
        return HeaderProbe::NotHeader;
    }
    let length = u64::from_be_bytes(plain[..LEN_FIELD].try_into().unwrap());
    if length == 0 || length > MAX_HIDDEN_LEN as u64 {
        return HeaderProbe::FalsePositive;
    }
    HeaderProbe::Header(HiddenFrameHeader { iv, length })
}

/// Encrypts and frames one hidden message into coin-width chunks.
fn frame_chunks(
    key: &HiddenKey,
    msg: &[u8],
    profile: ChannelProfile,
    rng: &mut dyn EntropySource,
) -> Result<Vec<Vec<u8>>, HiddenError> {
    if msg.is_empty() {
        return Err(HiddenError::Empty);
    }
    if msg.len() > MAX_HIDDEN_LEN {
        return Err(HiddenError::TooLong(msg.len()));
    }
    let w = profile.coin_width();
    let iv: [u8; 16] = rng.fill(IV_LEN)?.try_into().expect("requested 16");
    let header = HiddenFrameHeader {
        iv,
        length: msg.len() as u64,
    };

    let mut body = ctr_xcrypt(&key.body, &iv, msg);
    let tail = body.len().next_multiple_of(w) - body.len();
    body.extend(rng.fill(tail)?);

    let mut chunks: Vec<Vec<u8>> = header
        .seal(key, profile)
        .chunks(w)
        .map(<[u8]>::to_vec)
        .collect();
    chunks.extend(body.chunks(w).map(<[u8]>::to_vec));
    Ok(chunks)
}

/// FIFO pool of chunks waiting to ride in outgoing coins.
#[derive(Debug, Clone)]
pub struct ChunkQueue {
    profile: ChannelProfile,
    pending: VecDeque<Vec<u8>>,
}

impl ChunkQueue {
    pub fn empty(profile: ChannelProfile) -> Self {
        Self {
            profile,
            pending: VecDeque::new(),
        }
    }

    pub fn profile(&self) -> ChannelProfile {
        self.profile
    }

    pub fn remaining(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    /// Appends one more framed message behind whatever is already pooled.
    /// Returns the number of chunks it added.
    pub fn enqueue(
        &mut self,
        key: &HiddenKey,
        msg: &[u8],
        rng: &mut dyn EntropySource,
    ) -> Result<usize, HiddenError> {
        let chunks = frame_chunks(key, msg, self.profile, rng)?;
        let n = chunks.len();
        self.pending.extend(chunks);
        Ok(n)
    }

    /// Coin for the next outgoing public message.
    ///
    /// A fresh random coin is always drawn; when a chunk is pending it
    /// overwrites the random one. Both branches do the same work.
    pub fn next_coin(&mut self, rng: &mut dyn EntropySource) -> Result<RandomCoin, CryptoError> {
        let mut coin = rng.fill(self.profile.coin_width())?;
        if let Some(chunk) = self.pending.pop_front() {
            coin.copy_from_slice(&chunk);
        }
        Ok(RandomCoin::new(self.profile, coin).expect("width fixed by profile"))
    }
}

/// Encodes `msg` as a fresh queue of `cover_count(|msg|)` chunks.
pub fn encode_hidden(
    key: &HiddenKey,
    msg: &[u8],
    profile: ChannelProfile,
    rng: &mut dyn EntropySource,
) -> Result<ChunkQueue, HiddenError> {
    let mut q = ChunkQueue::empty(profile);
    q.enqueue(key, msg, rng)?;
    Ok(q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Scanning,
    Collecting,
}

/// Receiver-side state: buffers coins by sequence number, finds frame
/// headers among seq-adjacent pairs and reassembles bodies in seq order.
#[derive(Debug, Clone)]
pub struct ReassemblyState {
    profile: ChannelProfile,
    phase: Phase,
    header: Option<HiddenFrameHeader>,
    first_seq: u64,
    buffer: BTreeMap<u64, Vec<u8>>,
    newest: u64,
    ready: VecDeque<Vec<u8>>,
    false_positives: u64,
}

impl ReassemblyState {
    pub fn new(profile: ChannelProfile) -> Self {
        Self {
            profile,
            phase: Phase::Scanning,
            header: None,
            first_seq: 0,
            buffer: BTreeMap::new(),
            newest: 0,
            ready: VecDeque::new(),
            false_positives: 0,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn header(&self) -> Option<HiddenFrameHeader> {
        self.header
    }

    /// Header candidates whose redundancy matched but whose length field
    /// was rejected.
    pub fn false_positives(&self) -> u64 {
        self.false_positives
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    /// Body chunks still missing for the frame being collected.
    pub fn pending_chunks(&self) -> usize {
        match (self.phase, self.header) {
            (Phase::Collecting, Some(h)) => {
                let body = self.body_chunks(h);
                let start = self.first_seq + 2;
                (start..start + body as u64)
                    .filter(|s| !self.buffer.contains_key(s))
                    .count()
            }
            _ => 0,
        }
    }

    /// Feeds one received coin. Returns a completed hidden message, if
    /// this coin finished one. Further messages completed by the same coin
    /// are returned by [`ReassemblyState::take_ready`].
    pub fn ingest_coin(&mut self, seq: u64, coin: &RandomCoin, key: &HiddenKey) -> Option<Vec<u8>> {
        if coin.len() != self.profile.coin_width() || self.buffer.contains_key(&seq) {
            return self.ready.pop_front();
        }
        self.buffer.insert(seq, coin.as_bytes().to_vec());
        self.newest = self.newest.max(seq);

        // Reordering can complete a later header pair before an earlier
        // one, so while collecting keep looking for a frame that starts
        // below the current one and switch to it when found.
        let below = match self.phase {
            Phase::Scanning => u64::MAX,
            Phase::Collecting => self.first_seq,
        };
        let candidates = [seq.checked_sub(1), Some(seq)];
        for s in candidates.into_iter().flatten() {
            if s.checked_add(1).is_some_and(|n| n < below) && self.try_header_at(s, key) {
                break;
            }
        }
        self.advance(key);
        self.prune();
        self.ready.pop_front()
    }

    pub fn take_ready(&mut self) -> Option<Vec<u8>> {
        self.ready.pop_front()
    }

    fn body_chunks(&self, h: HiddenFrameHeader) -> usize {
        (h.length as usize).div_ceil(self.profile.coin_width())
    }

    fn try_header_at(&mut self, s: u64, key: &HiddenKey) -> bool {
        let Some(next) = s.checked_add(1) else {
            return false;
        };
        let (Some(a), Some(b)) = (self.buffer.get(&s), self.buffer.get(&next)) else {
            return false;
        };
        match probe_header(key, a, b) {
            HeaderProbe::Header(h) => {
                self.phase = Phase::Collecting;
                self.header = Some(h);
                self.first_seq = s;
                true
            }
            HeaderProbe::FalsePositive => {
                self.false_positives += 1;
                false
            }
            HeaderProbe::NotHeader => false,
        }
    }

    // Completes frames while possible, rescanning the buffer after each.
    fn advance(&mut self, key: &HiddenKey) {
        while let (Phase::Collecting, Some(h)) = (self.phase, self.header) {
            let n = self.body_chunks(h);
            let start = self.first_seq + 2;
            if !(start..start + n as u64).all(|s| self.buffer.contains_key(&s)) {
                return;
            }
            let mut body = Vec::with_capacity(n * self.profile.coin_width());
            for s in start..start + n as u64 {
                body.extend(self.buffer.remove(&s).expect("checked present"));
            }
            self.buffer.remove(&self.first_seq);
            self.buffer.remove(&(self.first_seq + 1));
            body.truncate(h.length as usize);
            self.ready.push_back(ctr_xcrypt(&key.body, &h.iv, &body));

            self.phase = Phase::Scanning;
            self.header = None;
            let keys: Vec<u64> = self.buffer.keys().copied().collect();
            for s in keys {
                if self.try_header_at(s, key) {
                    break;
                }
            }
        }
    }

    fn prune(&mut self) {
        let horizon = self.newest.saturating_sub(SCAN_RETENTION);
        let keep_from = match self.phase {
            Phase::Scanning => u64::MAX,
            Phase::Collecting => self.first_seq,
        };
        while let Some((&k, _)) = self.buffer.first_key_value() {
            if k < horizon && k < keep_from {
                self.buffer.remove(&k);
            } else {
                break;
            }
        }
    }
}
