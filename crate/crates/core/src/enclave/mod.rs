//! Simulated Secure World.
//!
//! The enclave is the only holder of passwords, auth keys, hidden keys and
//! hidden traffic. The Normal World reaches it through [`Enclave::call`],
//! whose responses have the same shape whichever password unlocked the
//! device. Hidden input and output go through [`SecureChannel`], a separate
//! surface that exists only in public-hidden mode and never appears in the
//! [`ExecutionTranscript`] (unless the legacy interrupt-driven I/O mode is
//! configured, where every secure-channel use raises an observable
//! interrupt).

pub mod disclosure;
pub mod store;
pub mod transcript;

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{
    password_digest, sha256, CryptoError, Digest, EntropySource, Key32, Salt, WorkFactor,
};
use crate::hidden::{ChunkQueue, HiddenError, HiddenKey, ReassemblyState};
use crate::public::{
    open_public, seal_public, AuthKey, ChannelError, ChannelProfile, PublicEnvelope,
    PublicPlaintext, MAX_BODY_LEN,
};

pub use disclosure::{Direction, DisclosedSession, DisclosureBundle, DisclosureRecord};
pub use store::{ContactRecord, StoreContents, StoreError, StoredCredentials, BLOB_LEN, CAPACITY};
pub use transcript::{Divergence, ExecutionEvent, ExecutionTranscript};

pub type PeerId = [u8; 8];

pub const DEFAULT_LOCKOUT: u32 = 10;
pub const DEFAULT_RETENTION: usize = 10_000;
pub const MIN_PASSWORD_CHARS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Locked,
    PublicOnly,
    PublicHidden,
}

/// How hidden input reaches the enclave.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IoMode {
    /// All user input, public or hidden, goes through the enclave screen;
    /// nothing distinguishes hidden input from the outside.
    #[default]
    Unified,
    /// Hidden input is requested by an interrupt the Normal World can see.
    LegacyInterrupt,
}

#[derive(Debug, Clone)]
pub struct EnclaveConfig {
    pub profile: ChannelProfile,
    pub work_factor: WorkFactor,
    pub lockout_threshold: u32,
    /// Disclosure records kept per session.
    pub retention: usize,
    pub io_mode: IoMode,
    pub store_path: Option<PathBuf>,
    pub device_key: Key32,
}

impl EnclaveConfig {
    pub fn new(profile: ChannelProfile, device_key: Key32) -> Self {
        Self {
            profile,
            work_factor: WorkFactor::default(),
            lockout_threshold: DEFAULT_LOCKOUT,
            retention: DEFAULT_RETENTION,
            io_mode: IoMode::Unified,
            store_path: None,
            device_key,
        }
    }
}

/// Normal-World calls into the enclave.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "call", rename_all = "snake_case")]
pub enum BoundaryCall {
    Setup {
        public_password: String,
        hidden_password: String,
        disclosure_password: String,
        watermark: String,
    },
    Unlock {
        password: String,
    },
    ProvisionPeer {
        peer: PeerId,
        auth_key: Vec<u8>,
        session_id: [u8; 8],
    },
    Seal {
        peer: PeerId,
        body: Vec<u8>,
    },
    Open {
        peer: PeerId,
        envelope: Vec<u8>,
    },
    Disclose {
        password: String,
    },
    ResetDisclosurePassword {
        password: String,
    },
    Shutdown,
}

impl BoundaryCall {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Setup { .. } => "setup",
            Self::Unlock { .. } => "unlock",
            Self::ProvisionPeer { .. } => "provision_peer",
            Self::Seal { .. } => "seal",
            Self::Open { .. } => "open",
            Self::Disclose { .. } => "disclose",
            Self::ResetDisclosurePassword { .. } => "reset_disclosure_password",
            Self::Shutdown => "shutdown",
        }
    }

    // Credentials are typed on the enclave screen, so their sizes are not
    // part of what the Normal World sees.
    fn param_sizes(&self) -> Vec<usize> {
        match self {
            Self::Setup { .. }
            | Self::Unlock { .. }
            | Self::Disclose { .. }
            | Self::ResetDisclosurePassword { .. }
            | Self::Shutdown => vec![],
            Self::ProvisionPeer { auth_key, .. } => vec![8, auth_key.len(), 8],
            Self::Seal { body, .. } => vec![8, body.len()],
            Self::Open { envelope, .. } => vec![8, envelope.len()],
        }
    }
}

impl fmt::Debug for BoundaryCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "BoundaryCall::{}(sizes={:?})",
            self.name(),
            self.param_sizes()
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "response", rename_all = "snake_case")]
pub enum BoundaryResponse {
    Ack,
    Verified { verified: bool },
    Envelope { bytes: Vec<u8> },
    Opened { seq_no: u64, body: Vec<u8> },
    Disclosure { bundle: DisclosureBundle },
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryError {
    #[error("unknown command")]
    UnknownCommand,
    #[error("enclave not initialized")]
    NotInitialized,
    #[error("enclave already initialized")]
    AlreadyInitialized,
    #[error("passwords must be distinct and at least 8 characters; watermark 1..=240 octets")]
    WeakPassword,
    #[error("locked permanently after too many failed attempts")]
    LockedOut,
    #[error("enclave is locked")]
    NotUnlocked,
    #[error("denied")]
    Denied,
    #[error("unknown peer")]
    UnknownPeer,
    #[error("envelope addressed to another key")]
    Routing,
    #[error("envelope failed integrity check")]
    Integrity,
    #[error("malformed input")]
    Framing,
    #[error("message size out of range")]
    Size,
    #[error("contact store full")]
    CapacityExceeded,
    #[error("contact already present")]
    DuplicateContact,
    #[error("no such contact")]
    UnknownContact,
    #[error("persistent store failed its integrity check")]
    Tamper,
    #[error("persistent store unavailable")]
    Storage,
    #[error("entropy source failure")]
    Entropy,
}

impl BoundaryError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::UnknownCommand => "unknown_command",
            Self::NotInitialized => "not_initialized",
            Self::AlreadyInitialized => "already_initialized",
            Self::WeakPassword => "weak_password",
            Self::LockedOut => "locked_out",
            Self::NotUnlocked => "not_unlocked",
            Self::Denied => "denied",
            Self::UnknownPeer => "unknown_peer",
            Self::Routing => "routing",
            Self::Integrity => "integrity",
            Self::Framing => "framing",
            Self::Size => "size",
            Self::CapacityExceeded => "capacity_exceeded",
            Self::DuplicateContact => "duplicate_contact",
            Self::UnknownContact => "unknown_contact",
            Self::Tamper => "tamper",
            Self::Storage => "storage",
            Self::Entropy => "entropy",
        }
    }
}

impl From<ChannelError> for BoundaryError {
    fn from(e: ChannelError) -> Self {
        match e {
            ChannelError::BodySize(_) => Self::Size,
            ChannelError::CoinWidth { .. } | ChannelError::Framing(_) => Self::Framing,
            ChannelError::Routing => Self::Routing,
            ChannelError::Integrity => Self::Integrity,
            ChannelError::Crypto(c) => c.into(),
        }
    }
}

impl From<CryptoError> for BoundaryError {
    fn from(e: CryptoError) -> Self {
        match e {
            CryptoError::Entropy(_) => Self::Entropy,
            CryptoError::EmptyPassword => Self::WeakPassword,
            _ => Self::Framing,
        }
    }
}

impl From<HiddenError> for BoundaryError {
    fn from(e: HiddenError) -> Self {
        match e {
            HiddenError::Empty | HiddenError::TooLong(_) => Self::Size,
            HiddenError::Crypto(c) => c.into(),
        }
    }
}

impl From<StoreError> for BoundaryError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Tamper | StoreError::Size(_) | StoreError::Malformed => Self::Tamper,
            StoreError::Io(_) => Self::Storage,
            StoreError::Crypto(c) => c.into(),
        }
    }
}

/// Result of opening a public envelope: all that crosses the boundary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpenedMessage {
    pub seq_no: u64,
    pub body: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HiddenMessage {
    pub from: PeerId,
    pub body: Vec<u8>,
}

/// Hidden inbox as rendered on the enclave screen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InboxView {
    pub watermark: String,
    pub messages: Vec<HiddenMessage>,
}

struct PeerState {
    auth: AuthKey,
    session_id: [u8; 8],
    next_seq: u64,
    records: VecDeque<DisclosureRecord>,
}

pub struct Enclave {
    config: EnclaveConfig,
    rng: Box<dyn EntropySource>,
    credentials: Option<StoredCredentials>,
    mode: Mode,
    failed_attempts: u32,
    locked_out: bool,
    disclosure_reset_allowed: bool,
    contacts: Vec<ContactRecord>,
    hidden_keys: BTreeMap<PeerId, HiddenKey>,
    peers: BTreeMap<PeerId, PeerState>,
    pools: BTreeMap<PeerId, ChunkQueue>,
    reassembly: BTreeMap<PeerId, ReassemblyState>,
    inbox: Vec<HiddenMessage>,
    transcript: ExecutionTranscript,
}

impl Enclave {
    /// Fresh, uninitialized enclave.
    pub fn new(config: EnclaveConfig, rng: Box<dyn EntropySource>) -> Self {
        Self {
            config,
            rng,
            credentials: None,
            mode: Mode::Locked,
            failed_attempts: 0,
            locked_out: false,
            disclosure_reset_allowed: false,
            contacts: Vec::new(),
            hidden_keys: BTreeMap::new(),
            peers: BTreeMap::new(),
            pools: BTreeMap::new(),
            reassembly: BTreeMap::new(),
            inbox: Vec::new(),
            transcript: ExecutionTranscript::default(),
        }
    }

    /// Starts the enclave, reading the persistent blob when one exists at
    /// the configured path. A blob that fails its integrity check is
    /// refused.
    pub fn boot(config: EnclaveConfig, rng: Box<dyn EntropySource>) -> Result<Self, BoundaryError> {
        let existing = match &config.store_path {
            Some(p) if p.exists() => Some(store::store_load(p, &config.device_key)?),
            _ => None,
        };
        let mut e = Self::new(config, rng);
        if let Some(contents) = existing {
            e.restore(contents);
        }
        Ok(e)
    }

    fn restore(&mut self, contents: StoreContents) {
        self.credentials = contents.credentials.clone();
        self.locked_out = contents.locked_out;
        self.failed_attempts = contents.failed_attempts;
        self.hidden_keys = contents
            .contacts
            .iter()
            .map(|c| (c.contact_id, HiddenKey::new(c.working_hmk())))
            .collect();
        self.contacts = contents.contacts.clone();
    }

    fn contents(&self) -> StoreContents {
        StoreContents {
            credentials: self.credentials.clone(),
            locked_out: self.locked_out,
            failed_attempts: self.failed_attempts,
            contacts: self.contacts.clone(),
        }
    }

    pub fn profile(&self) -> ChannelProfile {
        self.config.profile
    }

    pub fn config(&self) -> &EnclaveConfig {
        &self.config
    }

    /// Inspection hook for tests and the harness. The Normal-World boundary
    /// never reports the mode.
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn transcript(&self) -> &ExecutionTranscript {
        &self.transcript
    }

    /// Encrypted persistent blob for the current state, freshly
    /// randomized.
    pub fn sealed_store(&mut self) -> Result<Vec<u8>, BoundaryError> {
        let contents = self.contents();
        Ok(contents.seal(&self.config.device_key, &mut *self.rng)?)
    }

    /// Writes the blob to the configured path (no-op without one).
    pub fn store_save(&mut self) -> Result<(), BoundaryError> {
        let Some(path) = self.config.store_path.clone() else {
            return Ok(());
        };
        let blob = self.sealed_store()?;
        Ok(store::store_save(&path, &blob)?)
    }

    /// Replaces persistent state with the blob at the configured path.
    pub fn store_load(&mut self) -> Result<(), BoundaryError> {
        let path = self
            .config
            .store_path
            .clone()
            .ok_or(BoundaryError::Storage)?;
        let contents = store::store_load(&path, &self.config.device_key)?;
        self.restore(contents);
        Ok(())
    }

    /// Normal-World entry point. Every call, successful or not, is appended
    /// to the execution transcript.
    pub fn call(&mut self, call: BoundaryCall) -> Result<BoundaryResponse, BoundaryError> {
        let name = call.name();
        let params = call.param_sizes();
        let out = if self.locked_out && !matches!(call, BoundaryCall::Shutdown) {
            Err(BoundaryError::LockedOut)
        } else {
            self.dispatch(call)
        };
        let (kind, size, content) = observe(&out);
        self.transcript.push(name, params, kind, size, content);
        out
    }

    fn dispatch(&mut self, call: BoundaryCall) -> Result<BoundaryResponse, BoundaryError> {
        match call {
            BoundaryCall::Setup {
                public_password,
                hidden_password,
                disclosure_password,
                watermark,
            } => self
                .do_setup(
                    &public_password,
                    &hidden_password,
                    &disclosure_password,
                    &watermark,
                )
                .map(|_| BoundaryResponse::Ack),
            BoundaryCall::Unlock { password } => self
                .do_unlock(&password)
                .map(|verified| BoundaryResponse::Verified { verified }),
            BoundaryCall::ProvisionPeer {
                peer,
                auth_key,
                session_id,
            } => {
                self.require_unlocked()?;
                let auth = AuthKey::from_slice(&auth_key)?;
                // Re-provisioning the same session keeps its sequence
                // counter and records.
                let same = self
                    .peers
                    .get(&peer)
                    .is_some_and(|s| s.auth == auth && s.session_id == session_id);
                if !same {
                    self.peers.insert(
                        peer,
                        PeerState {
                            auth,
                            session_id,
                            next_seq: 0,
                            records: VecDeque::new(),
                        },
                    );
                }
                Ok(BoundaryResponse::Ack)
            }
            BoundaryCall::Seal { peer, body } => {
                self.do_seal(peer, body)
                    .map(|env| BoundaryResponse::Envelope {
                        bytes: env.to_bytes(),
                    })
            }
            BoundaryCall::Open { peer, envelope } => {
                let env = PublicEnvelope::from_bytes(&envelope)?;
                self.do_open(peer, &env).map(|m| BoundaryResponse::Opened {
                    seq_no: m.seq_no,
                    body: m.body,
                })
            }
            BoundaryCall::Disclose { password } => self
                .do_disclose(&password)
                .map(|bundle| BoundaryResponse::Disclosure { bundle }),
            BoundaryCall::ResetDisclosurePassword { password } => self
                .do_reset_disclosure(&password)
                .map(|_| BoundaryResponse::Ack),
            BoundaryCall::Shutdown => self.do_shutdown().map(|_| BoundaryResponse::Ack),
        }
    }

    pub fn setup_ceremony(
        &mut self,
        public_password: &str,
        hidden_password: &str,
        disclosure_password: &str,
        watermark: &str,
    ) -> Result<(), BoundaryError> {
        self.call(BoundaryCall::Setup {
            public_password: public_password.into(),
            hidden_password: hidden_password.into(),
            disclosure_password: disclosure_password.into(),
            watermark: watermark.into(),
        })
        .map(|_| ())
    }

    pub fn verify_password(&mut self, password: &str) -> Result<bool, BoundaryError> {
        match self.call(BoundaryCall::Unlock {
            password: password.into(),
        })? {
            BoundaryResponse::Verified { verified } => Ok(verified),
            _ => unreachable!("unlock answers with Verified"),
        }
    }

    pub fn provision_peer(
        &mut self,
        peer: PeerId,
        auth: &AuthKey,
        session_id: [u8; 8],
    ) -> Result<(), BoundaryError> {
        self.call(BoundaryCall::ProvisionPeer {
            peer,
            auth_key: auth.key().to_vec(),
            session_id,
        })
        .map(|_| ())
    }

    pub fn enclave_seal(
        &mut self,
        peer: PeerId,
        body: &[u8],
    ) -> Result<PublicEnvelope, BoundaryError> {
        match self.call(BoundaryCall::Seal {
            peer,
            body: body.to_vec(),
        })? {
            BoundaryResponse::Envelope { bytes } => Ok(PublicEnvelope::from_bytes(&bytes)?),
            _ => unreachable!("seal answers with Envelope"),
        }
    }

    pub fn enclave_open(
        &mut self,
        peer: PeerId,
        env: &PublicEnvelope,
    ) -> Result<OpenedMessage, BoundaryError> {
        match self.call(BoundaryCall::Open {
            peer,
            envelope: env.to_bytes(),
        })? {
            BoundaryResponse::Opened { seq_no, body } => Ok(OpenedMessage { seq_no, body }),
            _ => unreachable!("open answers with Opened"),
        }
    }

    pub fn disclose(&mut self, password: &str) -> Result<DisclosureBundle, BoundaryError> {
        match self.call(BoundaryCall::Disclose {
            password: password.into(),
        })? {
            BoundaryResponse::Disclosure { bundle } => Ok(bundle),
            _ => unreachable!("disclose answers with Disclosure"),
        }
    }

    pub fn reset_disclosure_password(&mut self, password: &str) -> Result<(), BoundaryError> {
        self.call(BoundaryCall::ResetDisclosurePassword {
            password: password.into(),
        })
        .map(|_| ())
    }

    /// Graceful shutdown: persists the blob in every mode and drops all
    /// volatile hidden state.
    pub fn shutdown(&mut self) -> Result<(), BoundaryError> {
        self.call(BoundaryCall::Shutdown).map(|_| ())
    }

    /// The enclave-direct surface. Only exists in public-hidden mode; in
    /// every other state the refusal is indistinguishable from any other
    /// unknown command.
    pub fn secure(&mut self) -> Result<SecureChannel<'_>, BoundaryError> {
        if self.mode == Mode::PublicHidden && !self.locked_out {
            Ok(SecureChannel { enclave: self })
        } else {
            Err(BoundaryError::UnknownCommand)
        }
    }

    fn require_initialized(&self) -> Result<&StoredCredentials, BoundaryError> {
        self.credentials
            .as_ref()
            .ok_or(BoundaryError::NotInitialized)
    }

    fn require_unlocked(&self) -> Result<(), BoundaryError> {
        self.require_initialized()?;
        if self.mode == Mode::Locked {
            return Err(BoundaryError::NotUnlocked);
        }
        Ok(())
    }

    fn do_setup(
        &mut self,
        public: &str,
        hidden: &str,
        disclosure: &str,
        watermark: &str,
    ) -> Result<(), BoundaryError> {
        if self.credentials.is_some() {
            return Err(BoundaryError::AlreadyInitialized);
        }
        let strong = |p: &str| p.chars().count() >= MIN_PASSWORD_CHARS;
        if !(strong(public) && strong(hidden) && strong(disclosure))
            || public == hidden
            || public == disclosure
            || hidden == disclosure
            || watermark.is_empty()
            || watermark.len() > store::MAX_WATERMARK_LEN
        {
            return Err(BoundaryError::WeakPassword);
        }
        let salt: Salt = self.rng.fill(16)?.try_into().expect("requested 16");
        let wf = self.config.work_factor;
        self.credentials = Some(StoredCredentials {
            salt,
            public: password_digest(public, &salt, wf)?,
            hidden: password_digest(hidden, &salt, wf)?,
            disclosure: password_digest(disclosure, &salt, wf)?,
            work_factor: wf,
            watermark: watermark.to_owned(),
        });
        self.store_save()
    }

    fn digest_attempt(&self, password: &str) -> Result<Option<Digest>, BoundaryError> {
        let creds = self.require_initialized()?;
        match password_digest(password, &creds.salt, creds.work_factor) {
            Ok(d) => Ok(Some(d)),
            Err(CryptoError::EmptyPassword) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    fn record_failure(&mut self) -> Result<(), BoundaryError> {
        self.failed_attempts += 1;
        if self.failed_attempts >= self.config.lockout_threshold {
            self.locked_out = true;
            self.mode = Mode::Locked;
            // Persist immediately so a reboot cannot reset the counter.
            self.store_save()?;
            return Err(BoundaryError::LockedOut);
        }
        Ok(())
    }

    fn do_unlock(&mut self, password: &str) -> Result<bool, BoundaryError> {
        let attempt = self.digest_attempt(password)?;
        let creds = self.require_initialized()?;
        let (is_public, is_hidden) = match attempt {
            Some(d) => (d == creds.public, d == creds.hidden),
            None => (false, false),
        };
        if is_hidden {
            self.mode = Mode::PublicHidden;
        } else if is_public {
            self.mode = Mode::PublicOnly;
        } else {
            self.record_failure()?;
            return Ok(false);
        }
        self.failed_attempts = 0;
        Ok(true)
    }

    fn do_seal(&mut self, peer: PeerId, body: Vec<u8>) -> Result<PublicEnvelope, BoundaryError> {
        self.require_unlocked()?;
        if body.is_empty() || body.len() > MAX_BODY_LEN {
            return Err(BoundaryError::Size);
        }
        let profile = self.config.profile;
        let retention = self.config.retention;
        let state = self
            .peers
            .get_mut(&peer)
            .ok_or(BoundaryError::UnknownPeer)?;

        // Same code path in both modes; only the queue feeding the coin
        // differs.
        let mut no_pool = ChunkQueue::empty(profile);
        let queue = match self.mode {
            Mode::PublicHidden => self.pools.get_mut(&peer).unwrap_or(&mut no_pool),
            _ => &mut no_pool,
        };
        let coin = queue.next_coin(&mut *self.rng)?;

        let pt = PublicPlaintext {
            session_id: state.session_id,
            seq_no: state.next_seq,
            body,
        };
        let sealed = seal_public(profile, &state.auth, &pt, &coin, &mut *self.rng)?;
        state.next_seq += 1;
        push_bounded(
            &mut state.records,
            retention,
            DisclosureRecord {
                direction: Direction::Sent,
                seq_no: pt.seq_no,
                body: pt.body,
                coin: coin.into_bytes(),
                padding: sealed.padding,
                envelope_digest: *sha256(&sealed.envelope.to_bytes()).as_bytes(),
            },
        );
        Ok(sealed.envelope)
    }

    fn do_open(
        &mut self,
        peer: PeerId,
        env: &PublicEnvelope,
    ) -> Result<OpenedMessage, BoundaryError> {
        self.require_unlocked()?;
        let profile = self.config.profile;
        let retention = self.config.retention;
        let state = self
            .peers
            .get_mut(&peer)
            .ok_or(BoundaryError::UnknownPeer)?;
        let parsed = open_public(profile, &state.auth, env)?;
        let seq_no = parsed.plaintext.seq_no;

        if self.mode == Mode::PublicHidden {
            if let Some(key) = self.hidden_keys.get(&peer) {
                let st = self
                    .reassembly
                    .entry(peer)
                    .or_insert_with(|| ReassemblyState::new(profile));
                let mut done = st.ingest_coin(seq_no, &parsed.coin, key);
                while let Some(body) = done {
                    self.inbox.push(HiddenMessage { from: peer, body });
                    done = st.take_ready();
                }
            }
        }

        push_bounded(
            &mut state.records,
            retention,
            DisclosureRecord {
                direction: Direction::Received,
                seq_no,
                body: parsed.plaintext.body.clone(),
                coin: parsed.coin.into_bytes(),
                padding: parsed.padding,
                envelope_digest: *sha256(&env.to_bytes()).as_bytes(),
            },
        );
        Ok(OpenedMessage {
            seq_no,
            body: parsed.plaintext.body,
        })
    }

    fn do_disclose(&mut self, password: &str) -> Result<DisclosureBundle, BoundaryError> {
        let attempt = self.digest_attempt(password)?;
        let creds = self.require_initialized()?;
        if !attempt.is_some_and(|d| d == creds.disclosure) {
            self.record_failure()?;
            return Err(BoundaryError::Denied);
        }
        self.disclosure_reset_allowed = true;
        Ok(DisclosureBundle {
            profile: self.config.profile,
            sessions: self
                .peers
                .iter()
                .map(|(peer, s)| DisclosedSession {
                    peer: *peer,
                    auth_key: s.auth.key().to_vec(),
                    session_id: s.session_id,
                    records: s.records.iter().cloned().collect(),
                })
                .collect(),
        })
    }

    fn do_reset_disclosure(&mut self, password: &str) -> Result<(), BoundaryError> {
        self.require_initialized()?;
        if !self.disclosure_reset_allowed {
            return Err(BoundaryError::Denied);
        }
        let creds = self.credentials.as_ref().expect("checked");
        if password.chars().count() < MIN_PASSWORD_CHARS {
            return Err(BoundaryError::WeakPassword);
        }
        let d = password_digest(password, &creds.salt, creds.work_factor)?;
        if d == creds.public || d == creds.hidden {
            return Err(BoundaryError::WeakPassword);
        }
        self.credentials.as_mut().expect("checked").disclosure = d;
        self.disclosure_reset_allowed = false;
        Ok(())
    }

    fn do_shutdown(&mut self) -> Result<(), BoundaryError> {
        if self.credentials.is_some() {
            self.store_save()?;
        }
        self.mode = Mode::Locked;
        self.pools.clear();
        self.reassembly.clear();
        self.inbox.clear();
        Ok(())
    }
}

fn push_bounded<T>(q: &mut VecDeque<T>, cap: usize, item: T) {
    if cap == 0 {
        return;
    }
    while q.len() >= cap {
        q.pop_front();
    }
    q.push_back(item);
}

/// What the Normal World learns from a response: its kind, its size and,
/// when it does not depend on enclave randomness, its content.
fn observe(
    out: &Result<BoundaryResponse, BoundaryError>,
) -> (&'static str, usize, Option<Vec<u8>>) {
    match out {
        Ok(BoundaryResponse::Ack) => ("ack", 0, Some(Vec::new())),
        Ok(BoundaryResponse::Verified { verified }) => ("verified", 1, Some(vec![*verified as u8])),
        Ok(BoundaryResponse::Envelope { bytes }) => ("envelope", bytes.len(), None),
        Ok(BoundaryResponse::Opened { seq_no, body }) => {
            let mut c = seq_no.to_be_bytes().to_vec();
            c.extend_from_slice(body);
            ("opened", c.len(), Some(c))
        }
        Ok(BoundaryResponse::Disclosure { bundle }) => (
            "disclosure",
            serde_json::to_vec(bundle).map(|v| v.len()).unwrap_or(0),
            None,
        ),
        Err(e) => ("error", e.code().len(), Some(e.code().as_bytes().to_vec())),
    }
}

/// Enclave-direct I/O: hidden contacts, hidden compose and the hidden inbox.
pub struct SecureChannel<'a> {
    enclave: &'a mut Enclave,
}

impl SecureChannel<'_> {
    fn interrupt(&mut self) {
        if self.enclave.config.io_mode == IoMode::LegacyInterrupt {
            self.enclave
                .transcript
                .push("secure_io_interrupt", vec![], "ack", 0, Some(Vec::new()));
        }
    }

    pub fn watermark(&self) -> &str {
        &self
            .enclave
            .credentials
            .as_ref()
            .expect("hidden mode implies setup")
            .watermark
    }

    /// Fresh 128-octet secret for out-of-band exchange with a new contact.
    pub fn generate_contact_secret(&mut self) -> Result<[u8; store::SECRET_LEN], BoundaryError> {
        self.interrupt();
        Ok(self
            .enclave
            .rng
            .fill(store::SECRET_LEN)?
            .try_into()
            .expect("requested length"))
    }

    pub fn add_contact(&mut self, contact_id: PeerId, secret: &[u8]) -> Result<(), BoundaryError> {
        self.interrupt();
        let secret: [u8; store::SECRET_LEN] = secret.try_into().map_err(|_| BoundaryError::Size)?;
        let e = &mut *self.enclave;
        if e.contacts.iter().any(|c| c.contact_id == contact_id) {
            return Err(BoundaryError::DuplicateContact);
        }
        if e.contacts.len() >= CAPACITY {
            return Err(BoundaryError::CapacityExceeded);
        }
        let rec = ContactRecord { contact_id, secret };
        e.hidden_keys
            .insert(contact_id, HiddenKey::new(rec.working_hmk()));
        e.contacts.push(rec);
        Ok(())
    }

    pub fn contact_count(&self) -> usize {
        self.enclave.contacts.len()
    }

    /// Queues a hidden message for a contact. Returns the number of cover
    /// messages still needed to flush that contact's whole pool.
    pub fn queue_hidden(&mut self, contact_id: PeerId, msg: &[u8]) -> Result<usize, BoundaryError> {
        self.interrupt();
        let e = &mut *self.enclave;
        let key = e
            .hidden_keys
            .get(&contact_id)
            .ok_or(BoundaryError::UnknownContact)?;
        let profile = e.config.profile;
        let pool = e
            .pools
            .entry(contact_id)
            .or_insert_with(|| ChunkQueue::empty(profile));
        pool.enqueue(key, msg, &mut *e.rng)?;
        Ok(pool.remaining())
    }

    pub fn covers_needed(&self, contact_id: PeerId) -> usize {
        self.enclave
            .pools
            .get(&contact_id)
            .map_or(0, ChunkQueue::remaining)
    }

    /// Body chunks still missing for a partially received hidden message.
    pub fn pending_incoming(&self, contact_id: PeerId) -> usize {
        self.enclave
            .reassembly
            .get(&contact_id)
            .map_or(0, ReassemblyState::pending_chunks)
    }

    /// Messages after the first `seen`, as the enclave itself would paint
    /// them onto an already open screen. No user input is involved, so no
    /// interrupt is raised.
    pub fn refresh_inbox(&self, seen: usize) -> Vec<HiddenMessage> {
        self.enclave.inbox.get(seen..).unwrap_or_default().to_vec()
    }

    pub fn read_inbox(&mut self) -> InboxView {
        self.interrupt();
        InboxView {
            watermark: self.watermark().to_owned(),
            messages: self.enclave.inbox.clone(),
        }
    }
}
