//! Mock knowledge-graph API serving a fixed response table.
//!
//! `POST /<function_name>` with `{"args": [...]}` answers with the matching
//! entry of the table, or 404. `GET /health` answers 200. The bound address is
//! printed on the first line of stdout.

use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Parser;
use rag_core::kg::{FunctionCall, StubKgApi};
use serde_json::{json, Value};
use tiny_http::{Header, Method, Response, Server};

#[derive(Parser)]
#[command(name = "kg-stub", version, about = "Mock knowledge-graph API")]
struct Cli {
    /// Response table, as read by the in-process stub.
    #[arg(long)]
    table: PathBuf,
    /// Port 0 picks a free port.
    #[arg(long, default_value = "127.0.0.1:0")]
    addr: String,
}

fn reply(status: u16, body: &Value) -> Response<std::io::Cursor<Vec<u8>>> {
    let header = Header::from_bytes("Content-Type", "application/json").expect("static header");
    Response::from_string(body.to_string()).with_status_code(status).with_header(header)
}

fn handle(stub: &StubKgApi, method: &Method, url: &str, body: &str) -> (u16, Value) {
    let path = url.split('?').next().unwrap_or("");
    match (method, path) {
        (Method::Get, "/health") => (200, json!({"status": "ok"})),
        (Method::Post, p) => {
            let name = p.trim_start_matches('/');
            let args = serde_json::from_str::<Value>(body)
                .ok()
                .and_then(|v| v.get("args").cloned())
                .and_then(|a| serde_json::from_value::<Vec<String>>(a).ok());
            let Some(args) = args else {
                return (400, json!({"error": "body must be {\"args\": [string, ...]}"}));
            };
            let call = FunctionCall { function_name: name.to_string(), args };
            match stub.lookup(&call) {
                Some(v) => (200, v.clone()),
                None => (404, json!({"error": format!("no data for {}", call.signature())})),
            }
        }
        _ => (404, json!({"error": "not found"})),
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let stub = StubKgApi::from_file(&cli.table)?;
    let server = Server::http(&cli.addr).map_err(|e| anyhow::anyhow!("binding {}: {e}", cli.addr))?;
    let addr = server.server_addr().to_ip().context("not an IP listener")?;
    println!("listening on http://{addr}");
    std::io::stdout().flush()?;
    for mut request in server.incoming_requests() {
        let mut body = String::new();
        let (status, value) = match request.as_reader().read_to_string(&mut body) {
            Ok(_) => handle(&stub, request.method(), request.url(), &body),
            Err(e) => (400, json!({"error": e.to_string()})),
        };
        log::info!("{} {} -> {status}", request.method(), request.url());
        if let Err(e) = request.respond(reply(status, &value)) {
            log::warn!("failed to respond: {e}");
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stub() -> StubKgApi {
        StubKgApi::from_json(r#"{"music_get_members": [{"args": ["eagles"], "response": {"members": ["Don Henley"]}}]}"#)
            .unwrap()
    }

    #[test]
    fn routes() {
        let s = stub();
        assert_eq!(handle(&s, &Method::Get, "/health", "").0, 200);
        let (code, v) = handle(&s, &Method::Post, "/music_get_members", r#"{"args": ["Eagles"]}"#);
        assert_eq!(code, 200);
        assert_eq!(v["members"][0], "Don Henley");
        assert_eq!(handle(&s, &Method::Post, "/music_get_members", r#"{"args": ["x"]}"#).0, 404);
        assert_eq!(handle(&s, &Method::Post, "/music_get_members", "nope").0, 400);
    }
}
