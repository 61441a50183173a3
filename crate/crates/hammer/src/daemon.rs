//! Device simulator daemon: hosts at most one RuneInstance behind RunicOS
//! and speaks the framed wire protocol.
//!
//! Uploads accumulate in per-connection buffers and the running instance is
//! only replaced after the whole bundle has been digest-verified, decoded,
//! and manifested, so concurrent observers always see either the previous
//! instance or the new one.

use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use rune_core::crc32::crc32;
use rune_core::runefile::CapabilityKind;
use rune_core::runicos::{load, DeviceProfile, InstanceState, RuneInstance, RuntimeError};
use rune_core::tensor::{encode_tensor, Codec};

use crate::transport::{loopback_bind, Stream};
use crate::wire::{
    get_u32, get_u64, put_string, read_frame, write_frame, Frame, MsgType, WireError, MAX_CHUNK,
    REJECT_BAD_BUNDLE, REJECT_CAPABILITY_DENIED, REJECT_INSUFFICIENT_MEMORY,
    REJECT_TRANSFER_CORRUPT,
};

/// Uploads beyond this are refused before buffering.
const MAX_BUNDLE_SIZE: usize = 1 << 24;

pub struct DeviceServer {
    pub name: String,
    pub fqdn: String,
    profile: DeviceProfile,
    instance: Mutex<Option<RuneInstance>>,
}

struct Upload {
    expected_len: usize,
    digest: u32,
    buf: Vec<u8>,
}

fn state_byte(state: InstanceState) -> u8 {
    match state {
        InstanceState::Loaded => 0,
        InstanceState::Manifested => 1,
        InstanceState::Ready => 2,
        InstanceState::Faulted => 3,
    }
}

impl DeviceServer {
    pub fn new(
        name: impl Into<String>,
        fqdn: impl Into<String>,
        profile: DeviceProfile,
    ) -> Arc<DeviceServer> {
        Arc::new(DeviceServer {
            name: name.into(),
            fqdn: fqdn.into(),
            profile,
            instance: Mutex::new(None),
        })
    }

    /// Serves TCP connections until the process exits, one thread each.
    pub fn serve_tcp(self: &Arc<Self>, listener: TcpListener) {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { continue };
            let _ = stream.set_nodelay(true);
            let server = Arc::clone(self);
            thread::spawn(move || {
                let mut stream = stream;
                server.handle_connection(&mut stream);
            });
        }
    }

    /// Registers this device as an in-process loopback target.
    pub fn bind_loopback(self: &Arc<Self>, locator: &str) {
        let server = Arc::clone(self);
        loopback_bind(
            locator,
            Box::new(move |pipe| {
                let server = Arc::clone(&server);
                thread::spawn(move || {
                    let mut pipe = pipe;
                    server.handle_connection(&mut pipe);
                });
            }),
        );
    }

    /// True once a Rune is deployed and READY.
    pub fn has_instance(&self) -> bool {
        self.instance.lock().unwrap().is_some()
    }

    fn error_and_close(&self, stream: &mut dyn Stream, message: &str) {
        let mut payload = Vec::new();
        put_string(&mut payload, message);
        let _ = write_frame(stream, &Frame::new(MsgType::Error, payload));
    }

    /// Serves one connection until it closes or a protocol violation occurs.
    /// Never panics on malformed input.
    pub fn handle_connection(&self, stream: &mut dyn Stream) {
        let mut upload: Option<Upload> = None;
        loop {
            let frame = match read_frame(stream) {
                Ok(f) => f,
                Err(WireError::Closed) => return,
                Err(e) => {
                    self.error_and_close(stream, &e.to_string());
                    return;
                }
            };
            match frame.msg_type {
                MsgType::Ping => {
                    let mut payload = Vec::new();
                    put_string(&mut payload, &self.name);
                    if write_frame(stream, &Frame::new(MsgType::Pong, payload)).is_err() {
                        return;
                    }
                }
                MsgType::Identify => {
                    let mut payload = Vec::new();
                    put_string(&mut payload, &self.fqdn);
                    put_string(&mut payload, &self.name);
                    if write_frame(stream, &Frame::new(MsgType::Identity, payload)).is_err() {
                        return;
                    }
                }
                MsgType::CastBegin => {
                    let mut pos = 0;
                    let (Some(len), Some(digest)) =
                        (get_u32(&frame.payload, &mut pos), get_u32(&frame.payload, &mut pos))
                    else {
                        self.error_and_close(stream, "malformed CAST_BEGIN");
                        return;
                    };
                    if len as usize > MAX_BUNDLE_SIZE {
                        self.error_and_close(stream, "bundle too large");
                        return;
                    }
                    upload = Some(Upload {
                        expected_len: len as usize,
                        digest,
                        buf: Vec::with_capacity(len as usize),
                    });
                }
                MsgType::CastChunk => {
                    let Some(up) = upload.as_mut() else {
                        self.error_and_close(stream, "CAST_CHUNK before CAST_BEGIN");
                        return;
                    };
                    if frame.payload.len() > MAX_CHUNK
                        || up.buf.len() + frame.payload.len() > up.expected_len
                    {
                        self.error_and_close(stream, "oversized upload chunk");
                        return;
                    }
                    up.buf.extend_from_slice(&frame.payload);
                }
                MsgType::CastFinish => {
                    let Some(up) = upload.take() else {
                        self.error_and_close(stream, "CAST_FINISH before CAST_BEGIN");
                        return;
                    };
                    let reply = self.finish_cast(up);
                    if write_frame(stream, &reply).is_err() {
                        return;
                    }
                }
                MsgType::Invoke => {
                    let mut pos = 0;
                    let Some(seed) = get_u64(&frame.payload, &mut pos) else {
                        self.error_and_close(stream, "malformed INVOKE");
                        return;
                    };
                    let reply = self.invoke(seed);
                    if write_frame(stream, &reply).is_err() {
                        return;
                    }
                }
                MsgType::Health => {
                    let reply = self.health_report();
                    if write_frame(stream, &reply).is_err() {
                        return;
                    }
                }
                other => {
                    self.error_and_close(stream, &format!("unexpected message {other:?}"));
                    return;
                }
            }
        }
    }

    /// Digest-verify, decode, and manifest the uploaded bundle; only on full
    /// success is the previous instance replaced.
    fn finish_cast(&self, up: Upload) -> Frame {
        let reject = |code: u8, message: &str| {
            let mut payload = vec![code];
            put_string(&mut payload, message);
            Frame::new(MsgType::CastRejected, payload)
        };

        if up.buf.len() != up.expected_len || crc32(&up.buf) != up.digest {
            return reject(REJECT_TRANSFER_CORRUPT, "upload digest mismatch");
        }
        let mut instance = match load(&up.buf, self.profile.clone()) {
            Ok(i) => i,
            Err(e) => {
                let code = match &e {
                    RuntimeError::Bundle(_) => REJECT_TRANSFER_CORRUPT,
                    _ => REJECT_BAD_BUNDLE,
                };
                return reject(code, &e.to_string());
            }
        };
        if let Err(e) = instance.manifest() {
            let code = match &e {
                RuntimeError::CapabilityDenied(_) => REJECT_CAPABILITY_DENIED,
                RuntimeError::InsufficientMemory { .. } => REJECT_INSUFFICIENT_MEMORY,
                _ => REJECT_BAD_BUNDLE,
            };
            let message = match &e {
                RuntimeError::CapabilityDenied(kind) => kind.keyword().to_string(),
                other => other.to_string(),
            };
            return reject(code, &message);
        }
        *self.instance.lock().unwrap() = Some(instance);
        Frame::empty(MsgType::CastAccepted)
    }

    fn invoke(&self, seed: u64) -> Frame {
        let mut guard = self.instance.lock().unwrap();
        let Some(instance) = guard.as_mut() else {
            return Frame::empty(MsgType::NoRune);
        };
        let result = instance.reseed(seed).and_then(|_| instance.call(Codec::Fixed));
        match result {
            Ok(tensor) => Frame::new(MsgType::InvokeResult, encode_tensor(&tensor, Codec::Fixed)),
            Err(e) => {
                let mut payload = Vec::new();
                put_string(&mut payload, &e.to_string());
                Frame::new(MsgType::Error, payload)
            }
        }
    }

    fn health_report(&self) -> Frame {
        let guard = self.instance.lock().unwrap();
        let Some(instance) = guard.as_ref() else {
            return Frame::empty(MsgType::NoRune);
        };
        let saga = instance.health();
        let mut payload = Vec::new();
        payload.extend_from_slice(&saga.invocations.to_le_bytes());
        payload.extend_from_slice(&saga.total_exec_nanos.to_le_bytes());
        payload.extend_from_slice(&saga.boot_time_nanos.to_le_bytes());
        payload.push(state_byte(instance.state()));
        match &saga.last_error {
            Some(msg) => {
                payload.push(1);
                put_string(&mut payload, msg);
            }
            None => payload.push(0),
        }
        Frame::new(MsgType::HealthReport, payload)
    }
}

/// Parses `kind:binding` capability specs used by the daemon CLI, e.g.
/// `rand:seed=7`, `audio:const=0.5`, `audio:file=/tmp/samples.f32`.
pub fn parse_capability_spec(
    spec: &str,
) -> Result<(CapabilityKind, rune_core::runicos::ProviderBinding), String> {
    use rune_core::runicos::ProviderBinding;
    let mut parts = spec.splitn(2, ':');
    let kind_str = parts.next().unwrap();
    let kind = match kind_str.to_ascii_lowercase().as_str() {
        "audio" => CapabilityKind::Audio,
        "rand" => CapabilityKind::Rand,
        other => return Err(format!("unknown capability kind `{other}`")),
    };
    let binding = match parts.next() {
        None => ProviderBinding::Seeded(0),
        Some(b) => {
            let mut kv = b.splitn(2, '=');
            let key = kv.next().unwrap();
            let value = kv.next().ok_or_else(|| format!("binding `{b}` needs a value"))?;
            match key {
                "seed" => ProviderBinding::Seeded(
                    value.parse().map_err(|e| format!("bad seed: {e}"))?,
                ),
                "const" => ProviderBinding::Constant(
                    value.parse().map_err(|e| format!("bad constant: {e}"))?,
                ),
                "file" => ProviderBinding::File(value.into()),
                other => return Err(format!("unknown binding `{other}`")),
            }
        }
    };
    Ok((kind, binding))
}
