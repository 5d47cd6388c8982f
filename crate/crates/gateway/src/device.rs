//! One simulated phone: an enclave, at most one peer link, and the two
//! event streams a UI attaches to.

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread;
use std::time::{Duration, Instant};

use coinveil_core::crypto::{
    sha256_parts, EntropySource, Key32, OsEntropy, SeededEntropy, WorkFactor,
};
use coinveil_core::enclave::{BoundaryError, PeerId};
use coinveil_core::harness::{
    run_execution_game, run_transcript_game, verify_disclosure, Adversary, BoundaryScript,
    GameScript,
};
use coinveil_core::hidden::cover_count;
use coinveil_core::transport::{
    accept, connect, encode_frame, BoxWrite, FrameWriter, MessageTranscript, Session,
    SharedTranscript, TransportError,
};
use coinveil_core::{AuthKey, ChannelProfile, Enclave, EnclaveConfig, IoMode, PublicEnvelope};
use serde_json::{json, Value};
use tokio::sync::broadcast;

use crate::schema::{
    NormalCommand, NormalEvent, Response, SecureCommand, SecureEvent, WireDirection,
};

#[derive(Debug, thiserror::Error)]
pub enum DeviceError {
    #[error("enclave: {0}")]
    Enclave(#[from] BoundaryError),
    #[error("transport: {0}")]
    Transport(#[from] TransportError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Config(String),
}

#[derive(Debug, Clone)]
pub struct DeviceConfig {
    pub profile: ChannelProfile,
    /// Deterministic enclave entropy for reproducible demos. Never for real
    /// traffic.
    pub seed: Option<u64>,
    pub store: Option<PathBuf>,
    pub io_mode: IoMode,
    pub work_factor: WorkFactor,
    /// Remote party, used both as public peer and hidden contact.
    pub peer_id: PeerId,
    pub auth_key: Option<AuthKey>,
}

impl DeviceConfig {
    pub fn new(profile: ChannelProfile) -> Self {
        Self {
            profile,
            seed: None,
            store: None,
            io_mode: IoMode::Unified,
            work_factor: WorkFactor::default(),
            peer_id: peer_id("peer"),
            auth_key: None,
        }
    }
}

/// Eight-octet peer identifier from a name: truncated or zero-padded.
pub fn peer_id(name: &str) -> PeerId {
    let mut id = [0u8; 8];
    let b = name.as_bytes();
    let n = b.len().min(8);
    id[..n].copy_from_slice(&b[..n]);
    id
}

pub fn peer_name(id: &PeerId) -> String {
    String::from_utf8_lossy(id)
        .trim_end_matches('\0')
        .to_owned()
}

/// Both ends derive the same session identifier from the shared key.
pub fn session_id_for(auth: &AuthKey) -> [u8; 8] {
    sha256_parts(&[b"session", auth.key()]).prefix()
}

pub fn read_auth_key(path: &Path) -> Result<AuthKey, DeviceError> {
    let text = std::fs::read_to_string(path)?;
    let bytes =
        hex::decode(text.trim()).map_err(|e| DeviceError::Config(format!("auth key: {e}")))?;
    AuthKey::from_slice(&bytes).map_err(|e| DeviceError::Config(format!("auth key: {e}")))
}

pub fn write_auth_key(path: &Path) -> Result<(), DeviceError> {
    let key = AuthKey::generate(&mut OsEntropy).map_err(|e| DeviceError::Config(e.to_string()))?;
    std::fs::write(path, hex::encode(key.key()) + "\n")?;
    Ok(())
}

// Stands in for a key fused into the device; kept next to the store.
fn device_key(store: Option<&Path>, rng: &mut dyn EntropySource) -> Result<Key32, DeviceError> {
    let fresh = |rng: &mut dyn EntropySource| -> Result<Key32, DeviceError> {
        let b = rng
            .fill(32)
            .map_err(|e| DeviceError::Config(e.to_string()))?;
        Ok(Key32::from_slice(&b).expect("32 octets"))
    };
    let Some(store) = store else {
        return fresh(rng);
    };
    let path = store.with_extension("devkey");
    if path.exists() {
        let b = std::fs::read(&path)?;
        return Key32::from_slice(&b)
            .map_err(|_| DeviceError::Config("device key file corrupt".into()));
    }
    let k = fresh(rng)?;
    std::fs::write(&path, k.as_bytes())?;
    Ok(k)
}

struct Link {
    writer: FrameWriter<BoxWrite>,
    transcript: SharedTranscript,
}

struct Inner {
    cfg: DeviceConfig,
    enclave: Mutex<Enclave>,
    link: Mutex<Option<Link>>,
    /// Envelopes that arrived while the enclave could not open them yet.
    backlog: Mutex<Vec<PublicEnvelope>>,
    shown_hidden: Mutex<usize>,
    normal_tx: broadcast::Sender<NormalEvent>,
    secure_tx: broadcast::Sender<SecureEvent>,
}

#[derive(Clone)]
pub struct Device {
    inner: Arc<Inner>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

fn err(e: BoundaryError) -> Response {
    Response::err(e.code())
}

impl Device {
    pub fn boot(cfg: DeviceConfig) -> Result<Self, DeviceError> {
        let mut rng: Box<dyn EntropySource> = match cfg.seed {
            Some(s) => Box::new(SeededEntropy::new(s)),
            None => Box::new(OsEntropy),
        };
        let key = device_key(cfg.store.as_deref(), &mut *rng)?;
        let mut ecfg = EnclaveConfig::new(cfg.profile, key);
        ecfg.work_factor = cfg.work_factor;
        ecfg.io_mode = cfg.io_mode;
        ecfg.store_path = cfg.store.clone();
        let enclave = Enclave::boot(ecfg, rng)?;
        let (normal_tx, _) = broadcast::channel(1024);
        let (secure_tx, _) = broadcast::channel(1024);
        Ok(Self {
            inner: Arc::new(Inner {
                cfg,
                enclave: Mutex::new(enclave),
                link: Mutex::new(None),
                backlog: Mutex::new(Vec::new()),
                shown_hidden: Mutex::new(0),
                normal_tx,
                secure_tx,
            }),
        })
    }

    pub fn config(&self) -> &DeviceConfig {
        &self.inner.cfg
    }

    pub fn subscribe_normal(&self) -> broadcast::Receiver<NormalEvent> {
        self.inner.normal_tx.subscribe()
    }

    pub fn subscribe_secure(&self) -> broadcast::Receiver<SecureEvent> {
        self.inner.secure_tx.subscribe()
    }

    pub fn wire_transcript(&self) -> Option<MessageTranscript> {
        lock(&self.inner.link)
            .as_ref()
            .map(|l| lock(&l.transcript).clone())
    }

    fn emit(&self, e: NormalEvent) {
        let _ = self.inner.normal_tx.send(e);
    }

    fn emit_secure(&self, e: SecureEvent) {
        let _ = self.inner.secure_tx.send(e);
    }

    /// Accepts one peer connection on `addr` in the background.
    pub fn listen_peer(&self, addr: &str) -> Result<std::net::SocketAddr, DeviceError> {
        let listener = std::net::TcpListener::bind(addr)?;
        let local = listener.local_addr()?;
        let dev = self.clone();
        thread::spawn(move || match accept(&listener) {
            Ok(s) => dev.attach(s),
            Err(e) => eprintln!("peer accept failed: {e}"),
        });
        Ok(local)
    }

    /// Connects to a listening peer, retrying for up to `patience`.
    pub fn connect_peer(&self, addr: String, patience: Duration) {
        let dev = self.clone();
        let sid = self
            .inner
            .cfg
            .auth_key
            .as_ref()
            .map(session_id_for)
            .unwrap_or_default();
        thread::spawn(move || {
            let deadline = Instant::now() + patience;
            loop {
                match connect(addr.as_str(), sid) {
                    Ok(s) => return dev.attach(s),
                    Err(e) if Instant::now() >= deadline => {
                        return eprintln!("peer connect failed: {e}")
                    }
                    Err(_) => thread::sleep(Duration::from_millis(100)),
                }
            }
        });
    }

    /// Wires a transport session to this device and starts its reader.
    pub fn attach(&self, session: Session) {
        let (mut reader, writer, transcript) = session.split();
        *lock(&self.inner.link) = Some(Link { writer, transcript });
        let dev = self.clone();
        thread::spawn(move || loop {
            match reader.recv() {
                Ok(env) => {
                    dev.emit(NormalEvent::TranscriptFrame {
                        direction: WireDirection::In,
                        frame: hex::encode(encode_frame(&env)),
                    });
                    dev.deliver(env);
                }
                Err(TransportError::EndOfStream) => break,
                Err(e) => {
                    eprintln!("peer link: {e}");
                    break;
                }
            }
        });
    }

    pub fn is_linked(&self) -> bool {
        lock(&self.inner.link).is_some()
    }

    fn deliver(&self, env: PublicEnvelope) {
        let peer = self.inner.cfg.peer_id;
        let mut e = lock(&self.inner.enclave);
        match e.enclave_open(peer, &env) {
            Ok(m) => {
                self.emit(NormalEvent::PublicMsg {
                    direction: WireDirection::In,
                    seq_no: Some(m.seq_no),
                    body: String::from_utf8_lossy(&m.body).into_owned(),
                });
                self.paint_hidden(&mut e);
            }
            Err(BoundaryError::NotUnlocked | BoundaryError::UnknownPeer) => {
                lock(&self.inner.backlog).push(env)
            }
            Err(err) => eprintln!("dropped inbound envelope: {}", err.code()),
        }
    }

    // New hidden messages go straight to the enclave screen.
    fn paint_hidden(&self, e: &mut Enclave) {
        let Ok(sc) = e.secure() else { return };
        let mut shown = lock(&self.inner.shown_hidden);
        let fresh = sc.refresh_inbox(*shown);
        *shown += fresh.len();
        let watermark = sc.watermark().to_owned();
        for m in fresh {
            self.emit_secure(SecureEvent::HiddenMsg {
                from: peer_name(&m.from),
                body: String::from_utf8_lossy(&m.body).into_owned(),
                watermark: watermark.clone(),
            });
        }
    }

    fn drain_backlog(&self) {
        let pending = std::mem::take(&mut *lock(&self.inner.backlog));
        for env in pending {
            self.deliver(env);
        }
    }

    /// Handles one raw request from the normal endpoint.
    pub fn handle_normal_raw(&self, raw: &str) -> Response {
        match crate::schema::parse_request::<NormalCommand>(raw) {
            Some(c) => self.handle_normal(c),
            None => Response::err(crate::schema::UNKNOWN_COMMAND),
        }
    }

    /// Handles one raw request from the secure endpoint.
    pub fn handle_secure_raw(&self, raw: &str) -> Response {
        match crate::schema::parse_request::<SecureCommand>(raw) {
            Some(c) => self.handle_secure(c),
            None => Response::err(crate::schema::UNKNOWN_COMMAND),
        }
    }

    pub fn handle_normal(&self, cmd: NormalCommand) -> Response {
        let cfg = &self.inner.cfg;
        match cmd {
            NormalCommand::Init {
                public_password,
                hidden_password,
                disclosure_password,
                watermark,
            } => match lock(&self.inner.enclave).setup_ceremony(
                &public_password,
                &hidden_password,
                &disclosure_password,
                &watermark,
            ) {
                Ok(()) => Response::ok(json!({})),
                Err(e) => err(e),
            },
            NormalCommand::Unlock { password } => {
                let verified = {
                    let mut e = lock(&self.inner.enclave);
                    let verified = match e.verify_password(&password) {
                        Ok(v) => v,
                        Err(x) => return err(x),
                    };
                    if verified {
                        *lock(&self.inner.shown_hidden) = 0;
                        if let Some(auth) = &cfg.auth_key {
                            if let Err(x) =
                                e.provision_peer(cfg.peer_id, auth, session_id_for(auth))
                            {
                                return err(x);
                            }
                        }
                    }
                    verified
                };
                if verified {
                    self.drain_backlog();
                }
                Response::ok(json!({ "verified": verified }))
            }
            NormalCommand::Send { body } => self.send(body.as_bytes()),
            NormalCommand::Disclose { password } => {
                let bundle = match lock(&self.inner.enclave).disclose(&password) {
                    Ok(b) => b,
                    Err(x) => return err(x),
                };
                let verdict = self
                    .wire_transcript()
                    .map(|t| verify_disclosure(&bundle, &t));
                Response::ok(json!({ "bundle": bundle, "verdict": verdict }))
            }
            NormalCommand::ResetDisclosurePassword { password } => {
                match lock(&self.inner.enclave).reset_disclosure_password(&password) {
                    Ok(()) => Response::ok(json!({})),
                    Err(x) => err(x),
                }
            }
            NormalCommand::Shutdown => match lock(&self.inner.enclave).shutdown() {
                Ok(()) => Response::ok(json!({})),
                Err(x) => err(x),
            },
            NormalCommand::Status => Response::ok(json!({
                "profile": cfg.profile.name(),
                "linked": self.is_linked(),
                "peer": peer_name(&cfg.peer_id),
            })),
            NormalCommand::GameTranscript { trials, adversary } => {
                let adv = match adversary.as_deref().unwrap_or("stat") {
                    "stat" | "stat_battery" => Adversary::stat_battery(),
                    "oracle" | "hmk_oracle" => Adversary::HmkOracle,
                    "constant" => Adversary::Constant { guess: false },
                    "coin" | "coin_flip" => Adversary::CoinFlip,
                    _ => return Response::err("bad_argument"),
                };
                let script = GameScript::random(cfg.profile, 64, 200, cfg.seed.unwrap_or(0));
                match run_transcript_game(&script, adv, trials) {
                    Ok(est) => {
                        let report =
                            json!({ "game": "transcript", "adversary": adv, "estimate": est });
                        self.emit(NormalEvent::GameReport(report.clone()));
                        Response::ok(report)
                    }
                    Err(_) => Response::err("bad_argument"),
                }
            }
            NormalCommand::GameExecution { scripts, legacy } => {
                let io = if legacy {
                    IoMode::LegacyInterrupt
                } else {
                    IoMode::Unified
                };
                let base = cfg.seed.unwrap_or(0);
                let mut equal = 0;
                let mut first_divergence = Vec::new();
                for i in 0..scripts as u64 {
                    let s = BoundaryScript::random(cfg.profile, 20, base.wrapping_add(i));
                    match run_execution_game(&s, io) {
                        Ok(v) if v.equal => equal += 1,
                        Ok(v) => first_divergence.push(v.divergence.map(|d| d.index)),
                        Err(x) => return err(x),
                    }
                }
                let report = json!({
                    "game": "execution",
                    "io_mode": io,
                    "scripts": scripts,
                    "equal": equal,
                    "divergence_indices": first_divergence,
                });
                self.emit(NormalEvent::GameReport(report.clone()));
                Response::ok(report)
            }
            NormalCommand::Bandwidth { n, profile } => {
                let p = match profile.as_deref().map(str::parse::<ChannelProfile>) {
                    None => cfg.profile,
                    Some(Ok(p)) => p,
                    Some(Err(_)) => return Response::err("bad_argument"),
                };
                match cover_count(n, p) {
                    Ok(c) => Response::ok(json!({ "n": n, "profile": p.name(), "covers": c })),
                    Err(_) => Response::err("bad_argument"),
                }
            }
        }
    }

    fn send(&self, body: &[u8]) -> Response {
        let peer = self.inner.cfg.peer_id;
        let mut e = lock(&self.inner.enclave);
        let env = match e.enclave_seal(peer, body) {
            Ok(env) => env,
            Err(x) => return err(x),
        };
        let frame = encode_frame(&env);
        let sent = match lock(&self.inner.link).as_mut() {
            Some(l) => l.writer.send(&env).is_ok(),
            None => false,
        };
        self.emit(NormalEvent::TranscriptFrame {
            direction: WireDirection::Out,
            frame: hex::encode(&frame),
        });
        self.emit(NormalEvent::PublicMsg {
            direction: WireDirection::Out,
            seq_no: None,
            body: String::from_utf8_lossy(body).into_owned(),
        });
        if let Ok(sc) = e.secure() {
            let remaining = sc.covers_needed(peer);
            self.emit_secure(SecureEvent::CoversNeeded {
                contact: peer_name(&peer),
                remaining,
            });
        }
        Response::ok(json!({ "frame_len": frame.len(), "delivered": sent }))
    }

    pub fn handle_secure(&self, cmd: SecureCommand) -> Response {
        let peer = self.inner.cfg.peer_id;
        let mut e = lock(&self.inner.enclave);
        let mut sc = match e.secure() {
            Ok(sc) => sc,
            Err(x) => return err(x),
        };
        match cmd {
            SecureCommand::ContactSecret => match sc.generate_contact_secret() {
                Ok(s) => Response::ok(json!({ "secret": hex::encode(s) })),
                Err(x) => err(x),
            },
            SecureCommand::ContactAdd { secret, contact_id } => {
                let Ok(bytes) = hex::decode(secret.trim()) else {
                    return Response::err("bad_argument");
                };
                let id = contact_id.as_deref().map(peer_id).unwrap_or(peer);
                match sc.add_contact(id, &bytes) {
                    Ok(()) => Response::ok(json!({ "contacts": sc.contact_count() })),
                    Err(x) => err(x),
                }
            }
            SecureCommand::HiddenSend { msg } => match sc.queue_hidden(peer, msg.as_bytes()) {
                Ok(remaining) => {
                    self.emit_secure(SecureEvent::CoversNeeded {
                        contact: peer_name(&peer),
                        remaining,
                    });
                    Response::ok(json!({ "covers_needed": remaining }))
                }
                Err(x) => err(x),
            },
            SecureCommand::HiddenInbox => {
                let view = sc.read_inbox();
                let messages: Vec<Value> = view
                    .messages
                    .iter()
                    .map(|m| json!({ "from": peer_name(&m.from), "body": String::from_utf8_lossy(&m.body) }))
                    .collect();
                Response::ok(json!({ "watermark": view.watermark, "messages": messages }))
            }
            SecureCommand::CoversNeeded => {
                Response::ok(json!({ "covers_needed": sc.covers_needed(peer) }))
            }
        }
    }
}
