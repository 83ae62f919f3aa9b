//! Starts the API on an ephemeral port, uploads a fold log and fetches a
//! superclass view, all in one process.

use std::sync::Arc;

use temporal_confusion::service::{serve, Store};
use tokio::io::{AsyncReadExt, AsyncWriteExt};

async fn request(addr: std::net::SocketAddr, method: &str, path: &str, body: &[u8]) -> String {
    let mut stream = tokio::net::TcpStream::connect(addr).await.unwrap();
    let head = format!(
        "{method} {path} HTTP/1.1\r\nHost: localhost\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    );
    stream.write_all(head.as_bytes()).await.unwrap();
    stream.write_all(body).await.unwrap();
    let mut out = String::new();
    stream.read_to_string(&mut out).await.unwrap();
    out
}

#[tokio::main]
async fn main() {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(serve(listener, Arc::new(Store::default())));

    let log = std::fs::read(format!("{data}/cifar10-test.json")).unwrap();
    let reply = request(addr, "POST", "/api/runs", &log).await;
    println!("{}", reply.lines().next().unwrap());

    let groups = "animals%3Abird%7Ccat%7Cdeer%7Cdog%7Cfrog%7Chorse,vehicles%3Aplane%7Cauto%7Cship%7Ctruck";
    let reply = request(addr, "GET", &format!("/api/view?groups={groups}&to=9"), b"").await;
    let body = reply.split("\r\n\r\n").nth(1).unwrap_or_default();
    println!("view: {} bytes", body.len());
    let reply = request(addr, "GET", "/api/metrics?run=test&metric=accuracy", b"").await;
    println!(
        "{}",
        reply
            .split("\r\n\r\n")
            .nth(1)
            .unwrap_or_default()
            .chars()
            .take(120)
            .collect::<String>()
    );
}
