//! A scripted JSON-RPC server on a loopback port.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;

use serde_json::Value;

/// What the server sends back for one request.
pub enum Reply {
    /// A JSON-RPC `result`.
    Result(Value),
    /// A JSON-RPC `error` object.
    Error(i64, &'static str),
    /// A bare HTTP status with an empty body.
    Status(u16),
    /// Raw body text with HTTP 200.
    Raw(&'static str),
}

type Handler = dyn FnMut(&str, &Value) -> Reply + Send;

/// Serves until dropped. Every request is answered with `Connection: close`.
pub struct MockRpc {
    pub url: String,
    calls: Arc<Mutex<Vec<(String, Value)>>>,
}

impl MockRpc {
    pub fn start(handler: impl FnMut(&str, &Value) -> Reply + Send + 'static) -> MockRpc {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind loopback");
        let url = format!("http://{}", listener.local_addr().unwrap());
        let calls = Arc::new(Mutex::new(Vec::new()));
        let log = Arc::clone(&calls);
        let handler: Arc<Mutex<Box<Handler>>> = Arc::new(Mutex::new(Box::new(handler)));
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { break };
                let _ = serve(stream, &handler, &log);
            }
        });
        MockRpc { url, calls }
    }

    /// Methods and params received so far, in order.
    pub fn calls(&self) -> Vec<(String, Value)> {
        self.calls.lock().unwrap().clone()
    }

    pub fn methods(&self) -> Vec<String> {
        self.calls().into_iter().map(|(m, _)| m).collect()
    }
}

fn serve(stream: TcpStream, handler: &Mutex<Box<Handler>>, log: &Mutex<Vec<(String, Value)>>) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut len = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            return Ok(());
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                len = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; len];
    reader.read_exact(&mut body)?;
    let req: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
    let method = req["method"].as_str().unwrap_or("").to_string();
    let params = req["params"].clone();
    log.lock().unwrap().push((method.clone(), params.clone()));
    let reply = (handler.lock().unwrap())(&method, &params);
    let id = req["id"].clone();
    let (status, text) = match reply {
        Reply::Result(v) => (200, serde_json::json!({"jsonrpc": "2.0", "id": id, "result": v}).to_string()),
        Reply::Error(code, msg) => (
            200,
            serde_json::json!({"jsonrpc": "2.0", "id": id, "error": {"code": code, "message": msg}}).to_string(),
        ),
        Reply::Status(s) => (s, String::new()),
        Reply::Raw(s) => (200, s.to_string()),
    };
    let mut out = stream;
    write!(
        out,
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
        text.len()
    )?;
    out.flush()
}
