//! Shared test support: a minimal programmable HTTP stub server, an
//! independent Jacobi eigensolver used as an eigendecomposition oracle,
//! and synthetic data generators.

#![allow(dead_code)]

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Handler = dyn Fn(usize, &serde_json::Value) -> (u16, serde_json::Value) + Send + Sync;

/// One-request-per-connection HTTP/1.1 stub. The handler receives the
/// zero-based request index and the parsed JSON body.
pub struct StubServer {
    addr: SocketAddr,
    hits: Arc<AtomicUsize>,
    requests: Arc<Mutex<Vec<serde_json::Value>>>,
    headers: Arc<Mutex<Vec<Vec<String>>>>,
    shutdown: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl StubServer {
    pub fn start<F>(handler: F) -> Self
    where
        F: Fn(usize, &serde_json::Value) -> (u16, serde_json::Value) + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub server");
        let addr = listener.local_addr().unwrap();
        let hits = Arc::new(AtomicUsize::new(0));
        let requests = Arc::new(Mutex::new(Vec::new()));
        let headers = Arc::new(Mutex::new(Vec::new()));
        let shutdown = Arc::new(AtomicBool::new(false));

        let handler: Arc<Handler> = Arc::new(handler);
        let thread_hits = hits.clone();
        let thread_requests = requests.clone();
        let thread_headers = headers.clone();
        let thread_shutdown = shutdown.clone();
        let handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if thread_shutdown.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let index = thread_hits.fetch_add(1, Ordering::SeqCst);
                if let Err(e) = serve_one(
                    stream,
                    index,
                    handler.as_ref(),
                    &thread_requests,
                    &thread_headers,
                ) {
                    eprintln!("stub server error: {e}");
                }
            }
        });

        Self {
            addr,
            hits,
            requests,
            headers,
            shutdown,
            handle: Some(handle),
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }

    /// Number of requests received so far.
    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    /// Parsed JSON bodies of all requests, in arrival order.
    pub fn requests(&self) -> Vec<serde_json::Value> {
        self.requests.lock().unwrap().clone()
    }

    /// Raw header lines of all requests, in arrival order.
    pub fn headers(&self) -> Vec<Vec<String>> {
        self.headers.lock().unwrap().clone()
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr); // unblock accept
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn serve_one(
    mut stream: TcpStream,
    index: usize,
    handler: &Handler,
    requests: &Mutex<Vec<serde_json::Value>>,
    headers_log: &Mutex<Vec<Vec<String>>>,
) -> std::io::Result<()> {
    let mut buffer = Vec::new();
    let mut chunk = [0u8; 4096];
    let header_end;
    loop {
        let read = stream.read(&mut chunk)?;
        if read == 0 {
            return Ok(()); // disconnected (e.g. the shutdown poke)
        }
        buffer.extend_from_slice(&chunk[..read]);
        if let Some(pos) = find_header_end(&buffer) {
            header_end = pos;
            break;
        }
        if buffer.len() > 1 << 20 {
            return Ok(());
        }
    }

    let header_text = String::from_utf8_lossy(&buffer[..header_end]).to_string();
    let header_lines: Vec<String> = header_text.lines().map(str::to_string).collect();
    let content_length = header_lines
        .iter()
        .find_map(|line| {
            let (name, value) = line.split_once(':')?;
            name.eq_ignore_ascii_case("content-length")
                .then(|| value.trim().parse::<usize>().ok())?
        })
        .unwrap_or(0);

    let mut body = buffer[header_end + 4..].to_vec();
    while body.len() < content_length {
        let read = stream.read(&mut chunk)?;
        if read == 0 {
            break;
        }
        body.extend_from_slice(&chunk[..read]);
    }

    let parsed: serde_json::Value =
        serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null);
    requests.lock().unwrap().push(parsed.clone());
    headers_log.lock().unwrap().push(header_lines);

    let (status, reply) = handler(index, &parsed);
    let reply_bytes = reply.to_string().into_bytes();
    let reason = match status {
        200 => "OK",
        400 => "Bad Request",
        429 => "Too Many Requests",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        _ => "Status",
    };
    let head = format!(
        "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n",
        reply_bytes.len()
    );
    stream.write_all(head.as_bytes())?;
    stream.write_all(&reply_bytes)?;
    stream.flush()
}

fn find_header_end(buffer: &[u8]) -> Option<usize> {
    buffer.windows(4).position(|w| w == b"\r\n\r\n")
}

/// Cyclic Jacobi eigenvalue iteration for symmetric matrices; test-only
/// oracle, independent of the library's eigensolver.
pub fn jacobi_eigenvalues(mut a: Array2<f64>) -> Vec<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    for _sweep in 0..100 {
        let mut off_diagonal = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off_diagonal += a[[p, q]] * a[[p, q]];
            }
        }
        if off_diagonal < 1e-22 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eigenvalues: Vec<f64> = (0..n).map(|i| a[[i, i]]).collect();
    eigenvalues.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eigenvalues
}

/// Isotropic Gaussian blobs (sigma = 1) around k centers placed mutually
/// `separation` apart; returns the points and true labels.
pub fn gaussian_blobs(
    points_per_cluster: usize,
    k: usize,
    dims: usize,
    separation: f64,
    seed: u64,
) -> (Array2<f64>, Vec<usize>) {
    assert!(dims >= k, "need dims >= k to place equidistant centers");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    // centers at (separation / sqrt(2)) * e_i are mutually `separation` apart
    let scale = separation / 2.0f64.sqrt();
    let n = points_per_cluster * k;
    let mut x = Array2::<f64>::zeros((n, dims));
    let mut labels = Vec::with_capacity(n);
    for cluster in 0..k {
        for row in 0..points_per_cluster {
            let i = cluster * points_per_cluster + row;
            for d in 0..dims {
                let center = if d == cluster { scale } else { 0.0 };
                x[[i, d]] = center + normal.sample(&mut rng);
            }
            labels.push(cluster);
        }
    }
    (x, labels)
}

/// Deterministic bag-of-words corpus with per-class vocabularies; the
/// texts are crude but cluster cleanly.
pub fn synthetic_corpus_jsonl(name: &str, docs_per_class: usize, classes: usize, seed: u64) -> String {
    let vocab: Vec<Vec<String>> = (0..classes)
        .map(|c| (0..12).map(|w| format!("{name}w{c}x{w}")).collect())
        .collect();
    let shared: Vec<String> = (0..6).map(|w| format!("{name}common{w}")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    for class in 0..classes {
        for doc in 0..docs_per_class {
            let mut words = Vec::new();
            for _ in 0..10 {
                words.push(vocab[class][rng.random_range(0..vocab[class].len())].clone());
            }
            for _ in 0..2 {
                words.push(shared[rng.random_range(0..shared.len())].clone());
            }
            let record = serde_json::json!({
                "id": format!("{name}-{class}-{doc}"),
                "text": words.join(" "),
                "label": format!("class{class}"),
            });
            out.push_str(&record.to_string());
            out.push('\n');
        }
    }
    out
}
