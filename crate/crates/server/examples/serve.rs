// Start the steering service on an ephemeral port and drive one session over HTTP.
//
// cargo run -p csng-server --example serve

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};

use csng_server::api::{serve_on, ServiceConfig};
use serde_json::{json, Value};

fn request(addr: SocketAddr, method: &str, path: &str, body: Option<&Value>) -> std::io::Result<(u16, Value)> {
    let body = body.map(Value::to_string).unwrap_or_default();
    let mut stream = TcpStream::connect(addr)?;
    write!(
        stream,
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )?;
    let mut raw = String::new();
    stream.read_to_string(&mut raw)?;
    let (head, payload) = raw.split_once("\r\n\r\n").unwrap_or((&raw, ""));
    let status = head.split(' ').nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let chunked = head.to_ascii_lowercase().contains("transfer-encoding: chunked");
    let payload = if chunked { dechunk(payload) } else { payload.to_string() };
    Ok((status, serde_json::from_str(&payload).unwrap_or(Value::Null)))
}

fn dechunk(mut s: &str) -> String {
    let mut out = String::new();
    while let Some((size, rest)) = s.split_once("\r\n") {
        let n = usize::from_str_radix(size.trim(), 16).unwrap_or(0);
        if n == 0 {
            break;
        }
        out.push_str(&rest[..n]);
        s = rest[n..].trim_start_matches("\r\n");
    }
    out
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let rt = tokio::runtime::Runtime::new()?;
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
    let addr = listener.local_addr()?;
    rt.spawn(serve_on(listener, ServiceConfig::default()));
    println!("listening on http://{addr}");

    let (_, created) = request(addr, "POST", "/sessions", None)?;
    let s = created["session"].as_str().ok_or("no session id")?.to_string();
    let trace = json!({ "trace": {
        "field": "circular",
        "cfg": { "seeding": { "kind": "random", "count": 16, "seed": 1 }, "step_size": 0.05, "max_steps": 64 }
    }});
    let steps = [
        ("dataset", trace),
        ("decompose", json!({ "L": 4 })),
        ("graph", json!({ "method": "knn", "k": 8 })),
        ("communities", json!({ "resolution": 1.0, "seed": 0 })),
    ];
    for (what, body) in steps {
        let (status, reply) = request(addr, "POST", &format!("/sessions/{s}/{what}"), Some(&body))?;
        println!("POST {what:<12} {status} generation {}", reply["generation"]);
        if status >= 300 {
            return Err(format!("{what}: {reply}").into());
        }
    }
    let (_, layout) = request(addr, "GET", &format!("/sessions/{s}/layout"), None)?;
    println!("layout: {} nodes, converged = {}", layout["nodes"].as_array().map_or(0, Vec::len), layout["converged"]);
    let (_, audit) = request(addr, "GET", &format!("/sessions/{s}/audit"), None)?;
    println!("audit: {} entries", audit["entries"].as_array().map_or(0, Vec::len));
    rt.shutdown_background();
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
