//! File transfer with per-MIME-type approximation, modeled on a web server
//! that answers selected requests over a SAP back-connection.
//!
//! Request text (lines end in `\n`; `\r\n` is accepted):
//!
//! ```text
//! GET <path>
//! X-SAP-Approx: <mime>[,<mime>...]
//! X-SAP-Port: <port>
//! X-SAP-Force-Precise: 1
//! ```
//!
//! The request and a status line (`200 <length>` or `404`) travel precisely
//! on the request connection. A file whose MIME type the client listed, or any
//! file when precise delivery is forced, is then sent over a new SAP
//! connection to the client's port in 1 KB datagrams, followed by FIN. Other
//! files follow the status line in-band.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Component, Path, PathBuf};

use crate::sap::{Mode, MsgType, SapError, SocketId, StationId, Timeouts, World};
use crate::time::Micros;

use super::{AppError, RECV_WAIT_US};

pub const HTTP_PORT: u16 = 80;
pub const CHUNK: usize = 1024;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct XferRequest {
    pub path: String,
    pub approx_mime_types: Vec<String>,
    pub sap_port: Option<u16>,
    pub force_precise: bool,
}

impl XferRequest {
    pub fn plain(path: &str) -> Self {
        Self { path: path.into(), ..Self::default() }
    }

    pub fn approximate(path: &str, mime_types: &[&str], sap_port: u16) -> Self {
        Self {
            path: path.into(),
            approx_mime_types: mime_types.iter().map(|m| m.to_string()).collect(),
            sap_port: Some(sap_port),
            force_precise: false,
        }
    }

    pub fn uses_sap(&self) -> bool {
        !self.approx_mime_types.is_empty() || self.force_precise
    }
}

fn malformed(msg: impl Into<String>) -> AppError {
    AppError::MalformedRequest(msg.into())
}

pub fn parse_request(text: &str) -> Result<XferRequest, AppError> {
    let mut lines = text.lines().map(|l| l.trim_end_matches('\r'));
    let request_line = lines.next().ok_or_else(|| malformed("empty request"))?;
    let mut parts = request_line.split(' ');
    if parts.next() != Some("GET") {
        return Err(malformed(format!("bad request line: {request_line}")));
    }
    let path = parts.next().filter(|p| p.starts_with('/')).ok_or_else(|| malformed("missing path"))?;
    match parts.next() {
        None => {}
        Some(v) if v.starts_with("HTTP/") && parts.next().is_none() => {}
        Some(_) => return Err(malformed(format!("bad request line: {request_line}"))),
    }

    let mut req = XferRequest::plain(path);
    for line in lines {
        if line.is_empty() {
            break;
        }
        let (name, value) = line.split_once(':').ok_or_else(|| malformed(format!("bad header: {line}")))?;
        let value = value.trim();
        match name.trim().to_ascii_lowercase().as_str() {
            "x-sap-approx" => {
                req.approx_mime_types = value.split(',').map(str::trim).filter(|m| !m.is_empty()).map(String::from).collect();
            }
            "x-sap-port" => {
                let port = value.parse::<u16>().map_err(|_| malformed(format!("bad X-SAP-Port: {value}")))?;
                req.sap_port = Some(port);
            }
            "x-sap-force-precise" => {
                req.force_precise = match value {
                    "1" => true,
                    "0" => false,
                    _ => return Err(malformed(format!("bad X-SAP-Force-Precise: {value}"))),
                };
            }
            _ => {}
        }
    }
    if req.sap_port.is_some() != req.uses_sap() {
        return Err(malformed("X-SAP-Port must accompany X-SAP-Approx or X-SAP-Force-Precise"));
    }
    Ok(req)
}

pub fn format_request(req: &XferRequest) -> String {
    let mut out = format!("GET {}\n", req.path);
    if !req.approx_mime_types.is_empty() {
        let _ = writeln!(out, "X-SAP-Approx: {}", req.approx_mime_types.join(","));
    }
    if let Some(port) = req.sap_port {
        let _ = writeln!(out, "X-SAP-Port: {port}");
    }
    if req.force_precise {
        out.push_str("X-SAP-Force-Precise: 1\n");
    }
    out
}

pub fn mime_for_path(path: &str) -> &'static str {
    let ext = path.rsplit_once('.').map(|(_, e)| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("html" | "htm") => "text/html",
        _ => "application/octet-stream",
    }
}

pub trait ContentStore {
    fn fetch(&self, path: &str) -> Option<Vec<u8>>;
}

#[derive(Debug, Default, Clone)]
pub struct MemoryStore {
    files: BTreeMap<String, Vec<u8>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, path: &str, body: Vec<u8>) {
        self.files.insert(path.into(), body);
    }
}

impl ContentStore for MemoryStore {
    fn fetch(&self, path: &str) -> Option<Vec<u8>> {
        self.files.get(path).cloned()
    }
}

/// Files under a directory; paths may not escape it.
#[derive(Debug, Clone)]
pub struct DirStore {
    root: PathBuf,
}

impl DirStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
}

impl ContentStore for DirStore {
    fn fetch(&self, path: &str) -> Option<Vec<u8>> {
        let rel = Path::new(path.trim_start_matches('/'));
        if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
            return None;
        }
        std::fs::read(self.root.join(rel)).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delivery {
    Approximate,
    PreciseSap,
    InBand,
}

/// What the server did with one request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Served {
    pub delivery: Delivery,
    pub datagrams: u64,
}

/// Server side: answers one parsed request that arrived on `request_sock`.
pub fn xfer_serve(
    world: &mut World,
    server: StationId,
    request_sock: SocketId,
    req: &XferRequest,
    store: &dyn ContentStore,
) -> Result<Served, AppError> {
    let Some(body) = store.fetch(&req.path) else {
        world.sap_send(request_sock, b"404\n", 0)?;
        return Err(AppError::NotFound(req.path.clone()));
    };
    world.sap_send(request_sock, format!("200 {}\n", body.len()).as_bytes(), 0)?;

    let mime = mime_for_path(&req.path);
    let via_sap = match req.sap_port {
        Some(_) if req.force_precise => Some(Mode::Precise),
        Some(_) if req.approx_mime_types.iter().any(|m| m == mime) => Some(Mode::Approximate),
        _ => None,
    };
    let chunks = body.chunks(CHUNK).count() as u64;
    let Some(mode) = via_sap else {
        for chunk in body.chunks(CHUNK) {
            world.sap_send(request_sock, chunk, 0)?;
        }
        return Ok(Served { delivery: Delivery::InBand, datagrams: chunks });
    };

    let client = world.socket(request_sock).and_then(|s| s.peer).ok_or(SapError::NotConnected)?;
    let port = req.sap_port.expect("checked above");
    let sock = world.sap_connect(server, crate::sap::Endpoint { addr: client.addr, port }, Timeouts::default())?;
    world.set_mode(sock, mode)?;
    for chunk in body.chunks(CHUNK) {
        world.sap_send(sock, chunk, 0)?;
    }
    world.sap_close(sock);
    let delivery = if mode == Mode::Precise { Delivery::PreciseSap } else { Delivery::Approximate };
    Ok(Served { delivery, datagrams: chunks })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XferOutcome {
    pub body: Vec<u8>,
    pub delivery: Delivery,
    /// From the end of the request to the end of the response (the FIN's
    /// arrival on the SAP path, the last chunk's arrival in-band).
    pub transfer_time_us: Micros,
    /// Chunks that never arrived; zero-filled in `body`.
    pub missing_chunks: u64,
    pub data_on_air: u64,
}

/// Client and server together: the client requests `req` from `server`, which
/// answers from `store`.
pub fn xfer_fetch(
    world: &mut World,
    client: StationId,
    server: StationId,
    store: &dyn ContentStore,
    req: &XferRequest,
) -> Result<XferOutcome, AppError> {
    let server_listener = match world.sap_listen(server, HTTP_PORT) {
        Ok(s) => s,
        Err(SapError::PortInUse(_)) => crate::sap::SocketId { station: server, port: HTTP_PORT },
        Err(e) => return Err(e.into()),
    };
    let request_conn = world.sap_connect(client, world.endpoint(server, HTTP_PORT), Timeouts::default())?;
    let sap_listener = match req.sap_port {
        Some(port) if req.uses_sap() => Some(world.sap_listen(client, port)?),
        _ => None,
    };

    world.sap_send(request_conn, format_request(req).as_bytes(), 0)?;
    let start = world.now();
    let data_before = world.stats().on_air(MsgType::Data);

    // server
    let (text, _) = world.sap_recv(server_listener, RECV_WAIT_US)?;
    let text = String::from_utf8(text).map_err(|_| malformed("request is not ASCII"))?;
    let parsed = parse_request(&text)?;
    let served = xfer_serve(world, server, server_listener, &parsed, store);

    // client
    let (status, _) = world.sap_recv(request_conn, RECV_WAIT_US)?;
    let status = String::from_utf8_lossy(&status).trim().to_string();
    let outcome = match served {
        Err(e) => Err(e),
        Ok(served) => {
            let len: usize = status
                .strip_prefix("200 ")
                .and_then(|n| n.parse().ok())
                .ok_or_else(|| AppError::Protocol(format!("bad status line: {status}")))?;
            let (body, missing, end) = match (served.delivery, sap_listener) {
                (Delivery::InBand, _) => read_in_band(world, request_conn, len)?,
                (_, Some(l)) => read_sap(world, l, len)?,
                (_, None) => return Err(AppError::Protocol("SAP delivery without a listener".into())),
            };
            Ok(XferOutcome {
                body,
                delivery: served.delivery,
                transfer_time_us: end.saturating_sub(start),
                missing_chunks: missing,
                data_on_air: world.stats().on_air(MsgType::Data) - data_before,
            })
        }
    };

    if let Some(l) = sap_listener {
        world.sap_close(l);
    }
    world.sap_close(request_conn);
    world.sap_close(server_listener);
    outcome
}

fn read_in_band(world: &mut World, conn: SocketId, len: usize) -> Result<(Vec<u8>, u64, Micros), AppError> {
    let mut body = Vec::with_capacity(len);
    let mut end = world.now();
    while body.len() < len {
        let (chunk, meta) = world.sap_recv(conn, RECV_WAIT_US)?;
        body.extend_from_slice(&chunk);
        end = meta.arrived_at;
    }
    body.truncate(len);
    Ok((body, 0, end))
}

fn read_sap(world: &mut World, listener: SocketId, len: usize) -> Result<(Vec<u8>, u64, Micros), AppError> {
    let chunks = len.div_ceil(CHUNK);
    let mut body = vec![0u8; len];
    let mut got = vec![false; chunks];
    loop {
        match world.sap_recv(listener, RECV_WAIT_US) {
            Ok((data, meta)) => {
                let i = meta.seq as usize;
                if i >= chunks || got[i] {
                    continue;
                }
                got[i] = true;
                let lo = i * CHUNK;
                let hi = (lo + data.len()).min(len);
                body[lo..hi].copy_from_slice(&data[..hi - lo]);
            }
            Err(SapError::PeerClosed) => break,
            Err(SapError::RecvTimeout) => return Err(AppError::Protocol("transfer ended without FIN".into())),
            Err(e) => return Err(e.into()),
        }
    }
    let end = world
        .socket(listener)
        .and_then(|s| s.peer_closed_at())
        .unwrap_or_else(|| world.now());
    let missing = got.iter().filter(|g| !**g).count() as u64;
    Ok((body, missing, end))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_sap_request() {
        let r = parse_request("GET /a.jpg\nX-SAP-Approx: image/jpeg\nX-SAP-Port: 9000\n").unwrap();
        assert_eq!(r, XferRequest::approximate("/a.jpg", &["image/jpeg"], 9000));
        let r = parse_request("GET /a.jpg HTTP/1.1\r\nHost: x\r\nX-SAP-Approx: image/jpeg, image/png\r\nX-SAP-Port: 1\r\n\r\n").unwrap();
        assert_eq!(r.approx_mime_types, vec!["image/jpeg", "image/png"]);
    }

    #[test]
    fn plain_request() {
        let r = parse_request("GET /index.html\n").unwrap();
        assert_eq!(r, XferRequest::plain("/index.html"));
        assert!(!r.uses_sap());
    }

    #[test]
    fn malformed_requests() {
        for bad in [
            "",
            "POST /a\n",
            "GET\n",
            "GET a.jpg\n",
            "GET /a.jpg\nX-SAP-Approx: image/jpeg\nX-SAP-Port: 70000\n",
            "GET /a.jpg\nX-SAP-Approx: image/jpeg\n",
            "GET /a.jpg\nX-SAP-Port: 9000\n",
            "GET /a.jpg\nX-SAP-Force-Precise: yes\nX-SAP-Port: 9000\n",
            "GET /a.jpg\nnonsense\n",
        ] {
            assert!(matches!(parse_request(bad), Err(AppError::MalformedRequest(_))), "{bad:?}");
        }
    }

    #[test]
    fn mime_table() {
        assert_eq!(mime_for_path("/x/pic.JPG"), "image/jpeg");
        assert_eq!(mime_for_path("/index.html"), "text/html");
        assert_eq!(mime_for_path("/blob.bin"), "application/octet-stream");
        assert_eq!(mime_for_path("/noext"), "application/octet-stream");
    }

    #[test]
    fn dir_store_stays_inside_root() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.bin"), b"abc").unwrap();
        let store = DirStore::new(dir.path());
        assert_eq!(store.fetch("/a.bin").unwrap(), b"abc");
        assert!(store.fetch("/../etc/passwd").is_none());
        assert!(store.fetch("/missing").is_none());
    }

    fn mime() -> impl Strategy<Value = String> {
        "[a-z]{1,8}/[a-z0-9.+-]{1,12}"
    }

    proptest! {
        #[test]
        fn format_then_parse_is_identity(
            path in "/[A-Za-z0-9._/-]{0,30}",
            mimes in proptest::collection::vec(mime(), 0..4),
            port in any::<u16>(),
            force in any::<bool>(),
        ) {
            let uses = !mimes.is_empty() || force;
            let req = XferRequest { path, approx_mime_types: mimes, sap_port: uses.then_some(port), force_precise: force };
            prop_assert_eq!(parse_request(&format_request(&req)).unwrap(), req);
        }
    }
}
