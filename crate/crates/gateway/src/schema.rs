//! Versioned JSON schema shared by the HTTP API, the WebSocket endpoints
//! and the command-line client.
//!
//! Requests carry `{"v": 1, "kind": <command>, ...fields}`. Responses carry
//! `{"v": 1, "ok": bool, "result"?: object, "error"?: code}`. Events carry
//! `{"v": 1, "channel": "normal"|"secure", "kind": <event>, "payload": object}`.
//!
//! Normal and secure events are distinct Rust types, so a `hidden_msg`
//! cannot be constructed for the normal channel.

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const VERSION: u32 = 1;

/// Commands accepted on the normal endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NormalCommand {
    Init {
        public_password: String,
        hidden_password: String,
        disclosure_password: String,
        watermark: String,
    },
    Unlock {
        password: String,
    },
    Send {
        body: String,
    },
    Disclose {
        password: String,
    },
    ResetDisclosurePassword {
        password: String,
    },
    Shutdown,
    Status,
    GameTranscript {
        trials: usize,
        #[serde(default)]
        adversary: Option<String>,
    },
    GameExecution {
        scripts: usize,
        #[serde(default)]
        legacy: bool,
    },
    Bandwidth {
        n: usize,
        #[serde(default)]
        profile: Option<String>,
    },
}

/// Commands accepted on the secure endpoint (the enclave screen).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SecureCommand {
    ContactSecret,
    ContactAdd {
        /// 128 octets, hex.
        secret: String,
        #[serde(default)]
        contact_id: Option<String>,
    },
    HiddenSend {
        msg: String,
    },
    HiddenInbox,
    CoversNeeded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request<C> {
    pub v: u32,
    #[serde(flatten)]
    pub command: C,
}

impl<C> Request<C> {
    pub fn new(command: C) -> Self {
        Self {
            v: VERSION,
            command,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub v: u32,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Response {
    pub fn ok(result: Value) -> Self {
        Self {
            v: VERSION,
            ok: true,
            result: Some(result),
            error: None,
        }
    }

    pub fn err(code: &str) -> Self {
        Self {
            v: VERSION,
            ok: false,
            result: None,
            error: Some(code.to_owned()),
        }
    }
}

/// Anything that fails to parse as a command for an endpoint, including a
/// well-formed command meant for the other endpoint.
pub const UNKNOWN_COMMAND: &str = "unknown_command";

pub fn parse_request<C: for<'de> Deserialize<'de>>(raw: &str) -> Option<C> {
    let req: Request<C> = serde_json::from_str(raw).ok()?;
    (req.v == VERSION).then_some(req.command)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Normal,
    Secure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WireDirection {
    Out,
    In,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum NormalEvent {
    PublicMsg {
        direction: WireDirection,
        /// Known for inbound messages only; the enclave keeps the
        /// outbound counter to itself.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seq_no: Option<u64>,
        body: String,
    },
    TranscriptFrame {
        direction: WireDirection,
        /// Whole wire frame, hex.
        frame: String,
    },
    GameReport(Value),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum SecureEvent {
    HiddenMsg {
        from: String,
        body: String,
        watermark: String,
    },
    CoversNeeded {
        contact: String,
        remaining: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventEnvelope<E> {
    pub v: u32,
    pub channel: Channel,
    #[serde(flatten)]
    pub event: E,
}

impl NormalEvent {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&EventEnvelope {
            v: VERSION,
            channel: Channel::Normal,
            event: self,
        })
        .expect("serializable")
    }
}

impl SecureEvent {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&EventEnvelope {
            v: VERSION,
            channel: Channel::Secure,
            event: self,
        })
        .expect("serializable")
    }
}

/// Field names that must never appear in anything sent on the normal
/// endpoint.
pub const SECURE_ONLY_NAMES: &[&str] =
    &["hidden_msg", "hmk", "watermark", "secret", "covers_needed"];

/// Every object key and every string value under `kind`, recursively.
pub fn names_in(v: &Value, out: &mut Vec<String>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                out.push(k.clone());
                if k == "kind" {
                    if let Value::String(s) = x {
                        out.push(s.clone());
                    }
                }
                names_in(x, out);
            }
        }
        Value::Array(a) => a.iter().for_each(|x| names_in(x, out)),
        _ => {}
    }
}

/// True if a serialized normal-endpoint message carries nothing reserved for
/// the secure endpoint.
pub fn normal_payload_is_clean(raw: &str) -> bool {
    let Ok(v) = serde_json::from_str::<Value>(raw) else {
        return false;
    };
    let mut names = Vec::new();
    names_in(&v, &mut names);
    !names
        .iter()
        .any(|n| SECURE_ONLY_NAMES.contains(&n.as_str()))
}
