use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::ngram::{render_body, render_subject, NgramModel};
use super::resources::CORPUS;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextKind {
    Subject,
    Body,
}

/// Wire request of `POST /v1/generate`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenRequest {
    pub kind: TextKind,
    pub prompt: String,
    #[serde(default)]
    pub context: Vec<String>,
    pub max_tokens: usize,
    pub seed: u64,
}

impl GenRequest {
    pub fn validate(&self) -> Result<()> {
        if self.kind == TextKind::Subject && self.prompt.trim().is_empty() {
            return Err(Error::Contract("subject requests need a non-empty prompt".into()));
        }
        if self.max_tokens == 0 {
            return Err(Error::Contract("max_tokens must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Deserialize)]
struct GenReply {
    text: String,
}

#[derive(Clone, Debug, Deserialize)]
struct ErrorReply {
    error: String,
}

pub trait TextProvider: Send + Sync {
    fn name(&self) -> &str;
    fn generate(&self, req: &GenRequest) -> Result<String>;
    /// Startup probe; the default accepts.
    fn check(&self) -> Result<()> {
        Ok(())
    }
}

/// In-process n-gram generator.
#[derive(Clone, Debug)]
pub struct BuiltinProvider {
    model: NgramModel,
}

impl BuiltinProvider {
    pub fn new(model: NgramModel) -> Self {
        Self { model }
    }

    /// Trained on `texts` plus the bundled corpus.
    pub fn with_texts<S: AsRef<str>>(texts: &[S]) -> Self {
        let mut all: Vec<&str> = texts.iter().map(AsRef::as_ref).collect();
        all.push(CORPUS);
        Self::new(NgramModel::train(&all))
    }

    pub fn model(&self) -> &NgramModel {
        &self.model
    }
}

impl Default for BuiltinProvider {
    fn default() -> Self {
        Self::new(NgramModel::train(&[CORPUS]))
    }
}

impl TextProvider for BuiltinProvider {
    fn name(&self) -> &str {
        "builtin"
    }

    fn generate(&self, req: &GenRequest) -> Result<String> {
        req.validate()?;
        Ok(match req.kind {
            TextKind::Subject => render_subject(&self.model.subject(&req.prompt, req.max_tokens, req.seed)),
            TextKind::Body => {
                let prompt = std::iter::once(req.prompt.as_str())
                    .chain(req.context.iter().map(String::as_str))
                    .collect::<Vec<_>>()
                    .join(" ");
                render_body(&self.model.body(&prompt, req.max_tokens, req.seed))
            }
        })
    }
}

/// Client of an external provider speaking the wire protocol.
#[derive(Clone, Debug)]
pub struct RemoteProvider {
    endpoint: String,
    agent: ureq::Agent,
    label: String,
}

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

impl RemoteProvider {
    /// `base` is the server root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: &str, timeout: Duration) -> Self {
        let endpoint = format!("{}/v1/generate", base.trim_end_matches('/'));
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        Self { label: format!("remote {base}"), endpoint, agent }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Provider { provider: self.label.clone(), msg: msg.into() }
    }
}

impl TextProvider for RemoteProvider {
    fn name(&self) -> &str {
        &self.label
    }

    fn generate(&self, req: &GenRequest) -> Result<String> {
        req.validate()?;
        let resp = match self.agent.post(&self.endpoint).send_json(req) {
            Ok(r) => r,
            Err(ureq::Error::Status(code, r)) => {
                let detail = r.into_json::<ErrorReply>().map(|e| e.error).unwrap_or_default();
                return Err(self.err(format!("HTTP {code}: {detail}")));
            }
            Err(e) => return Err(self.err(e.to_string())),
        };
        let reply: GenReply = resp.into_json().map_err(|e| self.err(format!("malformed reply: {e}")))?;
        if reply.text.trim().is_empty() {
            return Err(self.err("empty text"));
        }
        Ok(reply.text)
    }

    fn check(&self) -> Result<()> {
        let probe = GenRequest { kind: TextKind::Subject, prompt: "update".into(), context: vec![], max_tokens: 4, seed: 0 };
        self.generate(&probe).map(|_| ())
    }
}
