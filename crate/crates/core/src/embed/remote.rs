use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::embed::{Embedder, EmbeddingVector};
use crate::error::{Error, Result};

/// Environment variable that may supply the remote endpoint.
pub const EMBED_URL_ENV: &str = "NF_EMBED_URL";

/// Body of `POST /embed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub texts: Vec<String>,
    #[serde(default)]
    pub normalize: bool,
}

/// `200` response of `POST /embed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub vectors: Vec<Vec<f64>>,
    pub dim: usize,
    pub model: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    /// Base URL, e.g. `http://127.0.0.1:8080`. Empty means "take it from
    /// the environment".
    #[serde(default)]
    pub endpoint: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    /// Texts per request.
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_true")]
    pub normalize: bool,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    /// Learned from the service when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
}

fn default_timeout_ms() -> u64 {
    30_000
}
fn default_max_in_flight() -> usize {
    4
}
fn default_batch_size() -> usize {
    32
}
fn default_true() -> bool {
    true
}
fn default_max_attempts() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    100
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        RemoteConfig {
            endpoint: endpoint.into(),
            timeout_ms: default_timeout_ms(),
            max_in_flight: default_max_in_flight(),
            batch_size: default_batch_size(),
            normalize: true,
            max_attempts: default_max_attempts(),
            backoff_ms: default_backoff_ms(),
            dim: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.endpoint.trim().is_empty() {
            return Err(Error::Config("remote embedder endpoint is empty".into()));
        }
        if self.timeout_ms == 0 {
            return Err(Error::Config(
                "remote embedder timeout must be positive".into(),
            ));
        }
        if self.max_in_flight == 0 || self.batch_size == 0 || self.max_attempts == 0 {
            return Err(Error::Config(
                "remote embedder max_in_flight, batch_size and max_attempts must be positive"
                    .into(),
            ));
        }
        if matches!(self.dim, Some(d) if d < super::MIN_DIM) {
            return Err(Error::Config(
                "remote embedder dim is below the minimum".into(),
            ));
        }
        Ok(())
    }
}

/// Client for the `/embed` protocol. Large inputs are split into batches of
/// `batch_size`, sent with at most `max_in_flight` concurrent requests, and
/// reassembled in input order.
pub struct RemoteEmbedder {
    cfg: RemoteConfig,
    agent: ureq::Agent,
    dim: usize,
    retries: AtomicUsize,
}

impl std::fmt::Debug for RemoteEmbedder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteEmbedder")
            .field("endpoint", &self.cfg.endpoint)
            .field("dim", &self.dim)
            .finish()
    }
}

enum Attempt {
    Retry(String),
    Fatal(Error),
}

impl RemoteEmbedder {
    /// Build a client; without a configured dim one probe request is sent.
    pub fn connect(cfg: RemoteConfig) -> Result<Self> {
        cfg.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(cfg.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        let mut client = RemoteEmbedder {
            dim: cfg.dim.unwrap_or(0),
            cfg,
            agent,
            retries: AtomicUsize::new(0),
        };
        if client.dim == 0 {
            let probe = client.request(&["dimension probe".to_string()])?;
            client.dim = probe.dim;
        }
        Ok(client)
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.cfg
    }

    /// Retries performed so far across all requests.
    pub fn retries(&self) -> usize {
        self.retries.load(Ordering::Relaxed)
    }

    fn url(&self) -> String {
        format!("{}/embed", self.cfg.endpoint.trim_end_matches('/'))
    }

    fn attempt(&self, body: &EmbedRequest) -> std::result::Result<EmbedResponse, Attempt> {
        let mut resp = match self.agent.post(&self.url()).send_json(body) {
            Ok(r) => r,
            Err(e) => return Err(Attempt::Retry(format!("{}: {e}", self.cfg.endpoint))),
        };
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            let msg = format!("{} returned HTTP {status}: {}", self.url(), text.trim());
            // 408, 429 and 5xx are transient; other client errors are not.
            return if status == 408 || status == 429 || status >= 500 {
                Err(Attempt::Retry(msg))
            } else {
                Err(Attempt::Fatal(Error::Protocol(msg)))
            };
        }
        resp.body_mut()
            .read_json::<EmbedResponse>()
            .map_err(|e| Attempt::Fatal(Error::Protocol(format!("invalid response body: {e}"))))
    }

    fn request(&self, texts: &[String]) -> Result<EmbedResponse> {
        let body = EmbedRequest {
            texts: texts.to_vec(),
            normalize: self.cfg.normalize,
        };
        let mut last = String::new();
        for attempt in 0..self.cfg.max_attempts {
            if attempt > 0 {
                self.retries.fetch_add(1, Ordering::Relaxed);
                let backoff = self
                    .cfg
                    .backoff_ms
                    .saturating_mul(1 << (attempt - 1).min(16));
                thread::sleep(Duration::from_millis(backoff));
            }
            match self.attempt(&body) {
                Ok(resp) => return self.check_response(texts.len(), resp),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => last = msg,
            }
        }
        Err(Error::Transport(format!(
            "giving up after {} attempts: {last}",
            self.cfg.max_attempts
        )))
    }

    fn check_response(&self, expected: usize, resp: EmbedResponse) -> Result<EmbedResponse> {
        if resp.vectors.len() != expected {
            return Err(Error::Protocol(format!(
                "sent {expected} texts, received {} vectors",
                resp.vectors.len()
            )));
        }
        if let Some(v) = resp.vectors.iter().find(|v| v.len() != resp.dim) {
            return Err(Error::Protocol(format!(
                "vector of length {} in a response declaring dim {}",
                v.len(),
                resp.dim
            )));
        }
        if self.dim != 0 && resp.dim != self.dim {
            return Err(Error::Protocol(format!(
                "dimension changed from {} to {}",
                self.dim, resp.dim
            )));
        }
        Ok(resp)
    }
}

impl Embedder for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let owned: Vec<String> = texts.iter().map(|t| t.to_string()).collect();
        let batches: Vec<&[String]> = owned.chunks(self.cfg.batch_size).collect();
        let slots: Vec<Mutex<Option<Result<EmbedResponse>>>> =
            batches.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = self.cfg.max_in_flight.min(batches.len());

        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= batches.len() {
                        break;
                    }
                    let result = self.request(batches[i]);
                    let failed = result.is_err();
                    *slots[i].lock().expect("slot lock") = Some(result);
                    if failed {
                        next.store(batches.len(), Ordering::SeqCst);
                    }
                });
            }
        });

        let mut out = Vec::with_capacity(texts.len());
        for slot in slots {
            let resp = match slot.into_inner().expect("slot lock") {
                Some(r) => r?,
                None => continue,
            };
            for v in resp.vectors {
                out.push(EmbeddingVector::new(v).map_err(|e| Error::Protocol(e.to_string()))?);
            }
        }
        if out.len() != texts.len() {
            return Err(Error::Transport("embedding request aborted".into()));
        }
        Ok(out)
    }
}
