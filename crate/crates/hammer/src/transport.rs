//! Stream transports: TCP and an in-process loopback, behind one
//! byte-stream abstraction. Stand-ins for the BLE/serial/WiFi links of real
//! deployments.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Mutex, OnceLock};
use std::time::Duration;

pub trait Stream: Read + Write + Send {}
impl<T: Read + Write + Send> Stream for T {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportType {
    Tcp,
    Loopback,
}

impl TransportType {
    pub fn from_str_ci(s: &str) -> Option<TransportType> {
        if s.eq_ignore_ascii_case("tcp") {
            Some(TransportType::Tcp)
        } else if s.eq_ignore_ascii_case("loopback") {
            Some(TransportType::Loopback)
        } else {
            None
        }
    }
}

impl fmt::Display for TransportType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransportType::Tcp => f.write_str("TCP"),
            TransportType::Loopback => f.write_str("LOOPBACK"),
        }
    }
}

/// One end of an in-memory duplex pipe.
pub struct PipeStream {
    rx: Receiver<Vec<u8>>,
    pending: VecDeque<u8>,
    tx: Sender<Vec<u8>>,
}

impl Read for PipeStream {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        if self.pending.is_empty() {
            match self.rx.recv() {
                Ok(chunk) => self.pending.extend(chunk),
                Err(_) => return Ok(0), // peer gone: EOF
            }
        }
        let n = buf.len().min(self.pending.len());
        for b in buf.iter_mut().take(n) {
            *b = self.pending.pop_front().unwrap();
        }
        Ok(n)
    }
}

impl Write for PipeStream {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.tx
            .send(buf.to_vec())
            .map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "peer closed"))?;
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// A connected pair of in-memory streams.
pub fn duplex() -> (PipeStream, PipeStream) {
    let (tx_a, rx_b) = channel();
    let (tx_b, rx_a) = channel();
    (
        PipeStream { rx: rx_a, pending: VecDeque::new(), tx: tx_a },
        PipeStream { rx: rx_b, pending: VecDeque::new(), tx: tx_b },
    )
}

type Acceptor = Box<dyn Fn(PipeStream) + Send + Sync>;

fn loopback_registry() -> &'static Mutex<HashMap<String, Acceptor>> {
    static REGISTRY: OnceLock<Mutex<HashMap<String, Acceptor>>> = OnceLock::new();
    REGISTRY.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Registers an in-process device under `locator`. The acceptor is invoked
/// with the server end of each new connection.
pub fn loopback_bind(locator: &str, acceptor: Acceptor) {
    loopback_registry().lock().unwrap().insert(locator.to_string(), acceptor);
}

pub fn loopback_unbind(locator: &str) {
    loopback_registry().lock().unwrap().remove(locator);
}

fn loopback_connect(locator: &str) -> io::Result<PipeStream> {
    let registry = loopback_registry().lock().unwrap();
    let acceptor = registry.get(locator).ok_or_else(|| {
        io::Error::new(io::ErrorKind::NotFound, format!("no loopback device at {locator}"))
    })?;
    let (client, server) = duplex();
    acceptor(server);
    Ok(client)
}

pub fn connect(
    transport: TransportType,
    locator: &str,
    timeout: Duration,
) -> io::Result<Box<dyn Stream>> {
    match transport {
        TransportType::Tcp => {
            let addr: SocketAddr = locator
                .parse()
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, format!("{e}")))?;
            let stream = TcpStream::connect_timeout(&addr, timeout)?;
            stream.set_read_timeout(Some(timeout))?;
            stream.set_write_timeout(Some(timeout))?;
            Ok(Box::new(stream))
        }
        TransportType::Loopback => Ok(Box::new(loopback_connect(locator)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplex_carries_bytes_both_ways() {
        let (mut a, mut b) = duplex();
        a.write_all(b"ping").unwrap();
        let mut buf = [0u8; 4];
        b.read_exact(&mut buf).unwrap();
        assert_eq!(&buf, b"ping");
        b.write_all(b"pong").unwrap();
        a.read_exact(&mut buf).unwrap();
        assert_eq!(&buf, b"pong");
    }

    #[test]
    fn read_after_peer_drop_is_eof() {
        let (mut a, b) = duplex();
        drop(b);
        let mut buf = [0u8; 1];
        assert_eq!(a.read(&mut buf).unwrap(), 0);
    }

    #[test]
    fn loopback_connect_unknown_locator_fails() {
        assert!(loopback_connect("nowhere").is_err());
    }
}
