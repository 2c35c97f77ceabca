//! Mock `/embed` service backed by [`hash_embed`](super::hash_embed).
//!
//! Serves `POST /embed` and `GET /healthz` with the same status codes a real
//! embedding service uses: 400 for a bad body, 413 for an oversized batch and
//! 503 while "warming up".

use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde_json::json;
use tiny_http::{Header, Method, Request, Response, Server};

use crate::embed::{hash_embed, EmbedRequest, EmbedResponse};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct MockServerConfig {
    pub host: String,
    /// 0 picks a free port.
    pub port: u16,
    pub dim: usize,
    pub max_batch: usize,
    /// Number of initial `/embed` requests answered with 503.
    pub unavailable_for: usize,
    pub workers: usize,
}

impl Default for MockServerConfig {
    fn default() -> Self {
        MockServerConfig {
            host: "127.0.0.1".into(),
            port: 0,
            dim: super::DEFAULT_HASH_DIM,
            max_batch: 64,
            unavailable_for: 0,
            workers: 4,
        }
    }
}

struct Shared {
    cfg: MockServerConfig,
    embed_calls: AtomicUsize,
}

/// A running mock server; stops when dropped.
pub struct MockEmbedServer {
    server: Arc<Server>,
    addr: SocketAddr,
    shared: Arc<Shared>,
    workers: Vec<JoinHandle<()>>,
}

impl MockEmbedServer {
    pub fn start(cfg: MockServerConfig) -> Result<Self> {
        if cfg.dim < super::MIN_DIM || cfg.max_batch == 0 {
            return Err(Error::Config(
                "mock server needs dim >= 8 and max_batch >= 1".into(),
            ));
        }
        let bind = format!("{}:{}", cfg.host, cfg.port);
        let server =
            Server::http(&bind).map_err(|e| Error::Transport(format!("bind {bind}: {e}")))?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| Error::Transport("mock server has no IP address".into()))?;
        let server = Arc::new(server);
        let shared = Arc::new(Shared {
            cfg: cfg.clone(),
            embed_calls: AtomicUsize::new(0),
        });
        let workers = (0..cfg.workers.max(1))
            .map(|_| {
                let server = Arc::clone(&server);
                let shared = Arc::clone(&shared);
                std::thread::spawn(move || {
                    for request in server.incoming_requests() {
                        handle(&shared, request);
                    }
                })
            })
            .collect();
        Ok(MockEmbedServer {
            server,
            addr,
            shared,
            workers,
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Number of `/embed` requests received, including rejected ones.
    pub fn embed_calls(&self) -> usize {
        self.shared.embed_calls.load(Ordering::SeqCst)
    }

    /// Block until the process is terminated.
    pub fn wait(mut self) {
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for MockEmbedServer {
    fn drop(&mut self) {
        for _ in 0..self.workers.len() {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

fn json_response(status: u16, body: serde_json::Value) -> Response<std::io::Cursor<Vec<u8>>> {
    let header = Header::from_bytes("Content-Type", "application/json").expect("static header");
    Response::from_data(body.to_string().into_bytes())
        .with_status_code(status)
        .with_header(header)
}

fn handle(shared: &Shared, mut request: Request) {
    let response = match (request.method(), request.url()) {
        (Method::Get, "/healthz") => json_response(200, json!({"status": "ok"})),
        (Method::Post, "/embed") => {
            let call = shared.embed_calls.fetch_add(1, Ordering::SeqCst);
            let mut body = String::new();
            if request.as_reader().read_to_string(&mut body).is_err() {
                json_response(400, json!({"error": "unreadable body"}))
            } else if call < shared.cfg.unavailable_for {
                json_response(503, json!({"error": "model not ready"}))
            } else {
                embed(&shared.cfg, &body)
            }
        }
        (_, "/embed") | (_, "/healthz") => {
            json_response(405, json!({"error": "method not allowed"}))
        }
        _ => json_response(404, json!({"error": "not found"})),
    };
    let _ = request.respond(response);
}

fn embed(cfg: &MockServerConfig, body: &str) -> Response<std::io::Cursor<Vec<u8>>> {
    let req: EmbedRequest = match serde_json::from_str(body) {
        Ok(r) => r,
        Err(e) => return json_response(400, json!({"error": format!("bad request body: {e}")})),
    };
    if req.texts.len() > cfg.max_batch {
        return json_response(
            413,
            json!({"error": format!("batch of {} exceeds limit {}", req.texts.len(), cfg.max_batch)}),
        );
    }
    let vectors = req
        .texts
        .iter()
        .map(|t| hash_embed(t, cfg.dim).into_values())
        .collect();
    let resp = EmbedResponse {
        vectors,
        dim: cfg.dim,
        model: format!("hash-fnv1a-{}", cfg.dim),
    };
    json_response(200, serde_json::to_value(resp).expect("serializable"))
}
