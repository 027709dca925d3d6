//! A local chat-completions endpoint with scripted replies, for tests and
//! dry runs. Talk to it with `OpenAiClient::unpooled`.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde_json::{json, Value};

pub enum StubReply {
    Text(String),
    Status(u16),
}

type Responder = dyn Fn(&str, &str) -> StubReply + Send + Sync;

pub struct StubServer {
    server: Arc<tiny_http::Server>,
    url: String,
    requests: Arc<AtomicUsize>,
    handles: Vec<JoinHandle<()>>,
}

impl StubServer {
    /// Serves on an ephemeral localhost port. `respond(model, prompt)`
    /// decides each reply.
    pub fn start<F>(respond: F) -> std::io::Result<StubServer>
    where
        F: Fn(&str, &str) -> StubReply + Send + Sync + 'static,
    {
        let server = tiny_http::Server::http("127.0.0.1:0")
            .map_err(|e| std::io::Error::other(e.to_string()))?;
        let port = server
            .server_addr()
            .to_ip()
            .map(|a| a.port())
            .ok_or_else(|| std::io::Error::other("no ip address"))?;
        let server = Arc::new(server);
        let respond: Arc<Responder> = Arc::new(respond);
        let requests = Arc::new(AtomicUsize::new(0));
        let handles = (0..4)
            .map(|_| {
                let server = Arc::clone(&server);
                let respond = Arc::clone(&respond);
                let requests = Arc::clone(&requests);
                std::thread::spawn(move || {
                    for req in server.incoming_requests() {
                        requests.fetch_add(1, Ordering::SeqCst);
                        handle(req, respond.as_ref());
                    }
                })
            })
            .collect();
        Ok(StubServer {
            server,
            url: format!("http://127.0.0.1:{port}/v1"),
            requests,
            handles,
        })
    }

    pub fn base_url(&self) -> &str {
        &self.url
    }

    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.server.unblock();
        for _ in 1..self.handles.len() {
            self.server.unblock();
        }
        for h in self.handles.drain(..) {
            let _ = h.join();
        }
    }
}

fn handle(mut req: tiny_http::Request, respond: &Responder) {
    let mut body = String::new();
    if req.as_reader().read_to_string(&mut body).is_err() {
        let _ = req.respond(tiny_http::Response::empty(400));
        return;
    }
    let parsed: Value = match serde_json::from_str(&body) {
        Ok(v) => v,
        Err(_) => {
            let _ = req.respond(tiny_http::Response::empty(400));
            return;
        }
    };
    let model = parsed["model"].as_str().unwrap_or_default();
    let prompt = parsed["messages"]
        .as_array()
        .and_then(|m| m.last())
        .and_then(|m| m["content"].as_str())
        .unwrap_or_default();
    let reply = match respond(model, prompt) {
        StubReply::Status(code) => {
            let _ = req.respond(tiny_http::Response::empty(code));
            return;
        }
        StubReply::Text(t) => t,
    };
    let payload = json!({
        "id": "stub",
        "object": "chat.completion",
        "model": model,
        "choices": [{"index": 0, "message": {"role": "assistant", "content": reply}, "finish_reason": "stop"}],
        "usage": {
            "prompt_tokens": prompt.split_whitespace().count(),
            "completion_tokens": reply.split_whitespace().count(),
        },
    });
    let header = tiny_http::Header::from_bytes("Content-Type", "application/json")
        .expect("static header");
    let _ = req.respond(tiny_http::Response::from_string(payload.to_string()).with_header(header));
}

/// The reply a model following the default procedure would give.
pub fn predicted_answer(prep: &crate::runner::Prepared) -> String {
    match etrbench_core::render::render_clause(&prep.problem.predicted, &prep.mapping) {
        Ok(clause) => format!("Answer: From the premises, we can conclude that {clause}."),
        Err(_) => NOTHING_FOLLOWS.to_owned(),
    }
}

pub const NOTHING_FOLLOWS: &str = "Answer: From the premises, nothing follows.";

/// Prompt-to-reply script: the predicted conclusion for original orders and
/// "nothing follows" for reversed ones.
pub fn order_effect_script(
    problems: &[etrbench_core::generate::Problem],
    style: etrbench_core::render::PromptStyle,
) -> Result<std::collections::HashMap<String, String>, crate::HarnessError> {
    use etrbench_core::record::Order;
    let mut script = std::collections::HashMap::new();
    for p in problems {
        for order in Order::BOTH {
            let prep = crate::runner::prepare(p, order, style)?;
            let reply = match order {
                Order::Original => predicted_answer(&prep),
                Order::Reversed => NOTHING_FOLLOWS.to_owned(),
            };
            script.insert(prep.prompt, reply);
        }
    }
    Ok(script)
}
