//! Test-only oracles and generators. The oracles rescan raw predictions and
//! never touch the crate's count matrices.

#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::Rng;
use temporal_confusion::{confusion_from_epochs, ClassAlphabet, ConfusionCube, CountMatrix, EpochConfusion};

/// Raw per-instance data of one run: labels and predictions per iteration.
#[derive(Debug, Clone)]
pub struct RawRun {
    pub k: usize,
    pub iterations: Vec<i64>,
    pub labels: Vec<Vec<i64>>,
    pub predictions: Vec<Vec<i64>>,
}

impl RawRun {
    pub fn cube(&self) -> ConfusionCube {
        let alphabet = ClassAlphabet::numbered(self.k).unwrap();
        confusion_from_epochs(
            &alphabet,
            self.iterations
                .iter()
                .zip(&self.labels)
                .zip(&self.predictions)
                .map(|((&t, l), p)| (t, l.as_slice(), p.as_slice())),
        )
        .unwrap()
    }
}

/// Random run with N ≤ `max_n`, K in `[2, max_k]`, at most `max_epochs`
/// iterations; instance counts may vary per iteration. Predictions are biased
/// towards the truth so that accuracy is spread out, and some classes are
/// occasionally left out entirely to exercise zero denominators.
pub fn random_run(rng: &mut StdRng, max_n: usize, max_k: usize, max_epochs: usize) -> RawRun {
    let k = rng.random_range(2..=max_k);
    let epochs = rng.random_range(1..=max_epochs);
    let skill: f64 = rng.random_range(0.0..1.0);
    // restrict to a random subset of classes sometimes
    let active: Vec<i64> = if rng.random_bool(0.3) {
        let keep = rng.random_range(1..=k);
        (0..k as i64).take(keep).collect()
    } else {
        (0..k as i64).collect()
    };
    let mut t = rng.random_range(0..5i64);
    let mut iterations = Vec::new();
    let mut labels = Vec::new();
    let mut predictions = Vec::new();
    for _ in 0..epochs {
        let n = rng.random_range(1..=max_n);
        let l: Vec<i64> = (0..n).map(|_| active[rng.random_range(0..active.len())]).collect();
        let p: Vec<i64> = l
            .iter()
            .map(|&y| {
                if rng.random_bool(skill) {
                    y
                } else {
                    rng.random_range(0..k as i64)
                }
            })
            .collect();
        iterations.push(t);
        labels.push(l);
        predictions.push(p);
        t += rng.random_range(1..4i64);
    }
    RawRun {
        k,
        iterations,
        labels,
        predictions,
    }
}

/// Random cube with arbitrary counts in `[0, max_count]`.
pub fn random_cube(rng: &mut StdRng, k: usize, epochs: usize, max_count: i64) -> ConfusionCube {
    let alphabet = ClassAlphabet::numbered(k).unwrap();
    let epochs = (0..epochs)
        .map(|t| {
            let mut m = CountMatrix::zeros(k);
            for i in 0..k {
                for j in 0..k {
                    m.set(i, j, rng.random_range(0..=max_count));
                }
            }
            EpochConfusion::new(t as i64, m)
        })
        .collect();
    ConfusionCube::new(alphabet, epochs).unwrap()
}

pub struct OracleCounts {
    pub tp: i64,
    pub fp: i64,
    pub fn_: i64,
}

/// Counts for class `j` by scanning instances.
pub fn scan_counts(labels: &[i64], predictions: &[i64], j: i64) -> OracleCounts {
    let mut c = OracleCounts { tp: 0, fp: 0, fn_: 0 };
    for (&y, &p) in labels.iter().zip(predictions) {
        match (y == j, p == j) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => {}
        }
    }
    c
}

pub fn scan_accuracy(labels: &[i64], predictions: &[i64]) -> f64 {
    let correct = labels.iter().zip(predictions).filter(|(y, p)| y == p).count();
    correct as f64 / labels.len() as f64
}

pub fn scan_precision(c: &OracleCounts) -> Option<f64> {
    (c.tp + c.fp > 0).then(|| c.tp as f64 / (c.tp + c.fp) as f64)
}

pub fn scan_recall(c: &OracleCounts) -> Option<f64> {
    (c.tp + c.fn_ > 0).then(|| c.tp as f64 / (c.tp + c.fn_) as f64)
}

/// F1 via the count form 2TP / (2TP + FP + FN); ABSENT when precision or
/// recall is ABSENT or TP = 0 (both rates zero).
pub fn scan_f1(c: &OracleCounts) -> Option<f64> {
    if c.tp + c.fp == 0 || c.tp + c.fn_ == 0 || c.tp == 0 {
        None
    } else {
        Some(2.0 * c.tp as f64 / (2 * c.tp + c.fp + c.fn_) as f64)
    }
}

pub fn opt_close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => (x - y).abs() <= tol,
        _ => false,
    }
}

/// Blocking one-shot HTTP/1.1 request over a fresh connection.
pub async fn http(addr: std::net::SocketAddr, method: &str, path: &str, body: &[u8]) -> (u16, Vec<u8>) {
    use tokio::io::{AsyncReadExt, AsyncWriteExt};
    let mut stream = tokio::net::TcpStream::connect(addr).await.unwrap();
    let head = format!(
        "{method} {path} HTTP/1.1\r\nHost: localhost\r\nContent-Type: application/json\r\n\
         Content-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    );
    stream.write_all(head.as_bytes()).await.unwrap();
    stream.write_all(body).await.unwrap();
    let mut buf = Vec::new();
    stream.read_to_end(&mut buf).await.unwrap();
    let split = buf.windows(4).position(|w| w == b"\r\n\r\n").expect("response head");
    let head = String::from_utf8_lossy(&buf[..split]).to_string();
    let status: u16 = head.split_whitespace().nth(1).unwrap().parse().unwrap();
    let mut payload = buf[split + 4..].to_vec();
    if head.to_ascii_lowercase().contains("transfer-encoding: chunked") {
        payload = dechunk(&payload);
    }
    (status, payload)
}

fn dechunk(mut data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    loop {
        let line_end = data.windows(2).position(|w| w == b"\r\n").unwrap();
        let size = usize::from_str_radix(std::str::from_utf8(&data[..line_end]).unwrap().trim(), 16).unwrap();
        data = &data[line_end + 2..];
        if size == 0 {
            return out;
        }
        out.extend_from_slice(&data[..size]);
        data = &data[size + 2..];
    }
}

/// Starts the API on an ephemeral port and returns its address.
pub async fn spawn_server(store: temporal_confusion::service::Store) -> std::net::SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(temporal_confusion::service::serve(listener, std::sync::Arc::new(store)));
    addr
}
