//! Conformance checks for any service speaking the `/embed` protocol.
//!
//! Run against the bundled mock in tests, or against a real deployment with
//! `nframes contract-check --url ...`.

use std::time::Duration;

use serde::Serialize;
use serde_json::json;

use crate::embed::EmbedResponse;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContractCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(30)))
        .http_status_as_error(false)
        .build()
        .into()
}

struct Reply {
    status: u16,
    body: String,
}

fn post(agent: &ureq::Agent, url: &str, body: &str) -> Result<Reply, String> {
    let mut resp = agent
        .post(url)
        .header("Content-Type", "application/json")
        .send(body)
        .map_err(|e| e.to_string())?;
    let status = resp.status().as_u16();
    let body = resp
        .body_mut()
        .read_to_string()
        .map_err(|e| e.to_string())?;
    Ok(Reply { status, body })
}

fn embed(agent: &ureq::Agent, url: &str, texts: &[String]) -> Result<EmbedResponse, String> {
    let body = json!({"texts": texts, "normalize": true}).to_string();
    let reply = post(agent, url, &body)?;
    if reply.status != 200 {
        return Err(format!("HTTP {}: {}", reply.status, reply.body.trim()));
    }
    let resp: EmbedResponse = serde_json::from_str(&reply.body).map_err(|e| e.to_string())?;
    if resp.vectors.len() != texts.len() {
        return Err(format!(
            "{} texts, {} vectors",
            texts.len(),
            resp.vectors.len()
        ));
    }
    if resp.vectors.iter().any(|v| v.len() != resp.dim) {
        return Err(format!(
            "vector length differs from declared dim {}",
            resp.dim
        ));
    }
    Ok(resp)
}

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn check(name: &'static str, outcome: Result<String, String>) -> ContractCheck {
    match outcome {
        Ok(detail) => ContractCheck {
            name,
            passed: true,
            detail,
        },
        Err(detail) => ContractCheck {
            name,
            passed: false,
            detail,
        },
    }
}

/// Run every check. `max_batch` is the batch limit the service advertises;
/// a batch one larger must be refused with 413.
pub fn run_contract_suite(base_url: &str, max_batch: usize) -> Vec<ContractCheck> {
    let base = base_url.trim_end_matches('/');
    let embed_url = format!("{base}/embed");
    let agent = agent();
    let mut out = Vec::new();

    out.push(check(
        "healthz",
        (|| {
            let mut resp = agent
                .get(&format!("{base}/healthz"))
                .call()
                .map_err(|e| e.to_string())?;
            let status = resp.status().as_u16();
            let body = resp
                .body_mut()
                .read_to_string()
                .map_err(|e| e.to_string())?;
            let v: serde_json::Value = serde_json::from_str(&body).map_err(|e| e.to_string())?;
            if status == 200 && v["status"] == "ok" {
                Ok("status ok".into())
            } else {
                Err(format!("HTTP {status}: {body}"))
            }
        })(),
    ));

    let texts: Vec<String> = [
        "Carbon emissions rose again this year.",
        "The senator blamed regulators for the outage.",
        "Farmers lost their harvest to the drought.",
        "",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();

    let batch = embed(&agent, &embed_url, &texts);
    out.push(check(
        "batch_shape",
        batch
            .as_ref()
            .map(|r| format!("{} vectors of dim {}", r.vectors.len(), r.dim))
            .map_err(Clone::clone),
    ));

    out.push(check(
        "order_preserved",
        (|| {
            let all = batch.clone()?;
            for (i, t) in texts.iter().enumerate() {
                let single = embed(&agent, &embed_url, std::slice::from_ref(t))?;
                if cos(&single.vectors[0], &all.vectors[i]) < 1.0 - 1e-6 && !t.is_empty() {
                    return Err(format!("text {i} embeds differently alone than in a batch"));
                }
            }
            let reversed: Vec<String> = texts.iter().rev().cloned().collect();
            let rev = embed(&agent, &embed_url, &reversed)?;
            for i in 0..texts.len() {
                if rev.vectors[texts.len() - 1 - i] != all.vectors[i] {
                    return Err(format!("reversing the batch changed vector {i}"));
                }
            }
            Ok("vectors follow input order".into())
        })(),
    ));

    out.push(check(
        "normalized",
        (|| {
            let all = batch.clone()?;
            for (i, v) in all.vectors.iter().enumerate() {
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if !(n == 0.0 || (n - 1.0).abs() <= 1e-6) {
                    return Err(format!("vector {i} has norm {n}"));
                }
            }
            Ok("all norms are 1 (or 0 for empty text)".into())
        })(),
    ));

    out.push(check(
        "identical_texts",
        (|| {
            let t = texts[0].clone();
            let r = embed(&agent, &embed_url, &[t.clone(), t])?;
            let c = cos(&r.vectors[0], &r.vectors[1]);
            if (c - 1.0).abs() <= 1e-6 {
                Ok(format!("cosine {c:.9}"))
            } else {
                Err(format!("cosine {c}"))
            }
        })(),
    ));

    out.push(check(
        "dim_consistent",
        (|| {
            let a = batch.clone()?;
            let b = embed(&agent, &embed_url, &["another text".to_string()])?;
            if a.dim == b.dim {
                Ok(format!("dim {}", a.dim))
            } else {
                Err(format!("dim {} then {}", a.dim, b.dim))
            }
        })(),
    ));

    for (name, body) in [
        ("rejects_malformed_json", "{not json"),
        ("rejects_missing_texts", r#"{"normalize": true}"#),
    ] {
        out.push(check(
            name,
            (|| {
                let r = post(&agent, &embed_url, body)?;
                if r.status == 400 {
                    Ok("HTTP 400".into())
                } else {
                    Err(format!("expected 400, got {}", r.status))
                }
            })(),
        ));
    }

    out.push(check(
        "rejects_oversized_batch",
        (|| {
            let big: Vec<String> = (0..=max_batch).map(|i| format!("text {i}")).collect();
            let r = post(&agent, &embed_url, &json!({"texts": big}).to_string())?;
            if r.status == 413 {
                Ok(format!("HTTP 413 for {} texts", big.len()))
            } else {
                Err(format!("expected 413, got {}", r.status))
            }
        })(),
    ));

    out
}
