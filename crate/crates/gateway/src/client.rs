//! Blocking client for a running gateway.

use serde::Serialize;

use crate::schema::{NormalCommand, Request, Response, SecureCommand};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("gateway unreachable: {0}")]
    Http(#[from] ureq::Error),
}

pub struct Client {
    base: String,
}

impl Client {
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            base: base.into().trim_end_matches('/').to_owned(),
        }
    }

    fn post<C: Serialize>(&self, path: &str, cmd: C) -> Result<Response, ClientError> {
        let resp = ureq::post(&format!("{}{path}", self.base))
            .send_json(Request::new(cmd))?
            .body_mut()
            .read_json::<Response>()?;
        Ok(resp)
    }

    pub fn normal(&self, cmd: NormalCommand) -> Result<Response, ClientError> {
        self.post("/api/normal", cmd)
    }

    pub fn secure(&self, cmd: SecureCommand) -> Result<Response, ClientError> {
        self.post("/api/secure", cmd)
    }
}
