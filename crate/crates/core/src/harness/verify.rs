//! Coercer-side check of a disclosure bundle against a wire transcript.

use serde::{Deserialize, Serialize};

use crate::crypto::sha256;
use crate::enclave::{Direction, DisclosedSession, DisclosureBundle};
use crate::public::{seal_public_with_padding, AuthKey, PublicPlaintext, RandomCoin};
use crate::transport::{FrameDirection, MessageTranscript};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub session: usize,
    pub index: usize,
    pub seq_no: u64,
    pub direction: Direction,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisclosureVerdict {
    pub checked: usize,
    pub matched: usize,
    pub mismatches: Vec<Mismatch>,
    /// `(records, frames)` per direction when the counts differ.
    pub count_mismatch: Vec<(Direction, usize, usize)>,
}

impl DisclosureVerdict {
    pub fn all_match(&self) -> bool {
        self.checked > 0 && self.mismatches.is_empty()
    }
}

fn reseal(bundle: &DisclosureBundle, s: &DisclosedSession, i: usize) -> Result<Vec<u8>, String> {
    let rec = &s.records[i];
    let auth = AuthKey::from_slice(&s.auth_key).map_err(|e| e.to_string())?;
    let coin = RandomCoin::new(bundle.profile, rec.coin.clone()).map_err(|e| e.to_string())?;
    let pt = PublicPlaintext {
        session_id: s.session_id,
        seq_no: rec.seq_no,
        body: rec.body.clone(),
    };
    let env = seal_public_with_padding(bundle.profile, &auth, &pt, &coin, &rec.padding)
        .map_err(|e| e.to_string())?;
    Ok(env.to_bytes())
}

/// Re-seals every disclosed record and looks for the resulting envelope
/// among the on-wire frames of the matching direction. Frames may have
/// been delivered out of order, so matching is by multiset.
pub fn verify_disclosure(
    bundle: &DisclosureBundle,
    transcript: &MessageTranscript,
) -> DisclosureVerdict {
    let mut wire: [Vec<Option<Vec<u8>>>; 2] = [FrameDirection::Outbound, FrameDirection::Inbound]
        .map(|d| {
            transcript
                .entries()
                .iter()
                .filter(|e| e.direction == d)
                .map(|e| e.frame.get(4..).map(<[u8]>::to_vec))
                .collect()
        });

    let mut v = DisclosureVerdict {
        checked: 0,
        matched: 0,
        mismatches: Vec::new(),
        count_mismatch: Vec::new(),
    };
    let mut counts = [0usize; 2];
    let sessions = bundle
        .sessions
        .iter()
        .enumerate()
        .filter(|(_, s)| transcript.session_id.is_none_or(|id| id == s.session_id));

    for (si, s) in sessions {
        for (i, rec) in s.records.iter().enumerate() {
            let slot = match rec.direction {
                Direction::Sent => 0,
                Direction::Received => 1,
            };
            counts[slot] += 1;
            v.checked += 1;
            let flag = |reason: String| Mismatch {
                session: si,
                index: i,
                seq_no: rec.seq_no,
                direction: rec.direction,
                reason,
            };
            let bytes = match reseal(bundle, s, i) {
                Ok(b) => b,
                Err(e) => {
                    v.mismatches.push(flag(e));
                    continue;
                }
            };
            if sha256(&bytes).as_bytes() != &rec.envelope_digest {
                v.mismatches.push(flag(
                    "re-sealed envelope differs from recorded digest".into(),
                ));
                continue;
            }
            match wire[slot]
                .iter_mut()
                .find(|f| f.as_deref() == Some(bytes.as_slice()))
            {
                Some(f) => {
                    *f = None;
                    v.matched += 1;
                }
                None => v
                    .mismatches
                    .push(flag("no identical envelope on the wire".into())),
            }
        }
    }
    for (slot, dir) in [(0, Direction::Sent), (1, Direction::Received)] {
        if counts[slot] != wire[slot].len() {
            v.count_mismatch.push((dir, counts[slot], wire[slot].len()));
        }
    }
    v
}
