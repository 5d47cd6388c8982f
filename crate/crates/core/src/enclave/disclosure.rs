use serde::{Deserialize, Serialize};

use crate::public::ChannelProfile;

use super::PeerId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Sent,
    Received,
}

/// What a coercer needs to re-encrypt one public message bit-exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisclosureRecord {
    pub direction: Direction,
    pub seq_no: u64,
    pub body: Vec<u8>,
    pub coin: Vec<u8>,
    pub padding: Vec<u8>,
    pub envelope_digest: [u8; 32],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisclosedSession {
    pub peer: PeerId,
    pub auth_key: Vec<u8>,
    pub session_id: [u8; 8],
    pub records: Vec<DisclosureRecord>,
}

/// Public keys and retained per-message metadata. Has no field that could
/// carry hidden keys, hidden plaintext or pool state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisclosureBundle {
    pub profile: ChannelProfile,
    pub sessions: Vec<DisclosedSession>,
}

/// Every field name that may appear anywhere in a serialized bundle.
pub const BUNDLE_FIELDS: &[&str] = &[
    "profile",
    "sessions",
    "peer",
    "auth_key",
    "session_id",
    "records",
    "direction",
    "seq_no",
    "body",
    "coin",
    "padding",
    "envelope_digest",
];
