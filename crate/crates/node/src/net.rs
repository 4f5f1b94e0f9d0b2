//! TCP transport for wire messages, plus an in-process endpoint for tests.

use std::io::{BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use log::{debug, warn};

use crate::authority::Authority;
use crate::wire::{read_message, write_message, Message, WireError};

/// Something that answers a request with a response.
pub trait Endpoint: Send + Sync {
    fn call(&self, msg: Message) -> Result<Message, WireError>;

    fn describe(&self) -> String;
}

/// Calls a remote peer, one connection per request.
#[derive(Clone, Debug)]
pub struct TcpEndpoint {
    addr: String,
    timeout: Duration,
}

impl TcpEndpoint {
    pub fn new(addr: impl Into<String>) -> Self {
        Self { addr: addr.into(), timeout: Duration::from_secs(300) }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }
}

impl Endpoint for TcpEndpoint {
    fn call(&self, msg: Message) -> Result<Message, WireError> {
        let addr = self
            .addr
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| WireError::Frame(format!("cannot resolve {}", self.addr)))?;
        let stream = TcpStream::connect_timeout(&addr, Duration::from_secs(10))?;
        stream.set_read_timeout(Some(self.timeout))?;
        stream.set_write_timeout(Some(self.timeout))?;
        write_message(&mut BufWriter::new(&stream), &msg)?;
        read_message(&mut BufReader::new(&stream))?
            .ok_or_else(|| WireError::Frame("connection closed before response".into()))
    }

    fn describe(&self) -> String {
        self.addr.clone()
    }
}

/// Calls an authority in the same process.
#[derive(Clone)]
pub struct LocalAuthority(pub Arc<Authority>);

impl Endpoint for LocalAuthority {
    fn call(&self, msg: Message) -> Result<Message, WireError> {
        Ok(self.0.handle(msg))
    }

    fn describe(&self) -> String {
        format!("local:{}", &self.0.public_key().to_hex()[..8])
    }
}

pub type Handler = Arc<dyn Fn(Message, SocketAddr) -> Message + Send + Sync>;

/// A listening server; each connection gets a thread and may carry any
/// number of request/response exchanges.
pub struct Server {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl Server {
    pub fn bind(addr: &str, handler: Handler) -> std::io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let accept = thread::spawn(move || {
            for conn in listener.incoming() {
                if flag.load(Ordering::SeqCst) {
                    break;
                }
                match conn {
                    Ok(stream) => {
                        let handler = handler.clone();
                        thread::spawn(move || serve_connection(stream, handler));
                    }
                    Err(e) => warn!("accept failed: {e}"),
                }
            }
        });
        Ok(Self { addr, stop, accept: Some(accept) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) {
        self.stop_accepting();
    }

    fn stop_accepting(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.stop_accepting();
    }
}

fn serve_connection(stream: TcpStream, handler: Handler) {
    let Ok(peer) = stream.peer_addr() else { return };
    let mut reader = BufReader::new(&stream);
    let mut writer = BufWriter::new(&stream);
    loop {
        match read_message(&mut reader) {
            Ok(Some(msg)) => {
                debug!("{peer}: {}", msg.op());
                let reply = handler(msg, peer);
                if let Err(e) = write_message(&mut writer, &reply) {
                    debug!("{peer}: write failed: {e}");
                    return;
                }
            }
            Ok(None) => return,
            Err(e) => {
                debug!("{peer}: {e}");
                return;
            }
        }
    }
}
