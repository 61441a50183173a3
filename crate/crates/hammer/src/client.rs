//! The Hammer client side: target discovery, cast, invoke, and health
//! queries over any stream transport.

use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Duration;

use thiserror::Error;

use rune_core::bundle::decode_bundle;
use rune_core::crc32::crc32;
use rune_core::tensor::{decode_tensor, Codec, Tensor};

use crate::registry::TargetEntry;
use crate::transport::{connect, Stream, TransportType};
use crate::wire::{
    get_string, get_u64, read_frame, write_frame, Frame, MsgType, MAX_CHUNK,
    REJECT_CAPABILITY_DENIED, REJECT_TRANSFER_CORRUPT,
};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(3);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Target {
    pub locator: String,
    pub transport: TransportType,
    pub name: String,
    pub available: bool,
}

/// Probes one locator with a PING; returns the device's reported name.
pub fn ping(transport: TransportType, locator: &str, timeout: Duration) -> Option<String> {
    let mut stream = connect(transport, locator, timeout).ok()?;
    write_frame(stream.as_mut(), &Frame::empty(MsgType::Ping)).ok()?;
    let frame = read_frame(stream.as_mut()).ok()?;
    if frame.msg_type != MsgType::Pong {
        return None;
    }
    let mut pos = 0;
    get_string(&frame.payload, &mut pos)
}

/// Probes every registry entry. Unreachable targets are listed unavailable.
pub fn targets_ls(entries: &[TargetEntry], timeout: Duration) -> Vec<Target> {
    entries
        .iter()
        .map(|entry| match ping(entry.transport, &entry.locator, timeout) {
            Some(name) => Target {
                locator: entry.locator.clone(),
                transport: entry.transport,
                name,
                available: true,
            },
            None => Target {
                locator: entry.locator.clone(),
                transport: entry.transport,
                name: entry.name.clone(),
                available: false,
            },
        })
        .collect()
}

pub fn render_targets_table(targets: &[Target]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<27} {:<9} {:<12} {:<9}\n",
        "Target", "Type", "Name", "Available"
    ));
    out.push_str(&format!("{} {} {} {}\n", "-".repeat(27), "-".repeat(9), "-".repeat(12), "-".repeat(9)));
    for t in targets {
        out.push_str(&format!(
            "{:<27} {:<9} {:<12} {:<9}\n",
            t.locator,
            t.transport.to_string(),
            t.name,
            if t.available { "True" } else { "False" }
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageId {
    VerifyProvider,
    Upload,
    VerifyRune,
    CapabilityCheck,
}

impl StageId {
    pub const ALL: [StageId; 4] =
        [StageId::VerifyProvider, StageId::Upload, StageId::VerifyRune, StageId::CapabilityCheck];

    pub fn label(self) -> &'static str {
        match self {
            StageId::VerifyProvider => "Verifying provider",
            StageId::Upload => "Uploading rune",
            StageId::VerifyRune => "Verifying rune",
            StageId::CapabilityCheck => "Capability check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageStatus {
    NotStarted,
    Passed,
    Failed,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CastError {
    #[error("{0} is not a valid bundle: {1}")]
    LocalBundleInvalid(String, String),
    #[error("target {0} unreachable")]
    TargetUnreachable(String),
    #[error("provider mismatch: expected {expected}, device reports {actual}")]
    ProviderMismatch { expected: String, actual: String },
    #[error("transfer corrupt: {0}")]
    TransferCorrupt(String),
    #[error("capability denied by device: {0}")]
    CapabilityDenied(String),
    #[error("device rejected the bundle: {0}")]
    Rejected(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

#[derive(Debug)]
pub struct CastSession {
    pub target: String,
    pub provider_fqdn: Option<String>,
    pub stages: [(StageId, StageStatus); 4],
    pub outcome: Result<(), CastError>,
}

impl CastSession {
    fn new(target: &str) -> CastSession {
        CastSession {
            target: target.to_string(),
            provider_fqdn: None,
            stages: [
                (StageId::VerifyProvider, StageStatus::NotStarted),
                (StageId::Upload, StageStatus::NotStarted),
                (StageId::VerifyRune, StageStatus::NotStarted),
                (StageId::CapabilityCheck, StageStatus::NotStarted),
            ],
            outcome: Ok(()),
        }
    }

    fn set(&mut self, stage: StageId, status: StageStatus) {
        for slot in &mut self.stages {
            if slot.0 == stage {
                slot.1 = status;
            }
        }
    }

    pub fn status(&self, stage: StageId) -> StageStatus {
        self.stages.iter().find(|(s, _)| *s == stage).map(|(_, st)| *st).unwrap()
    }

    pub fn succeeded(&self) -> bool {
        self.outcome.is_ok()
    }
}

/// Deploys a bundle: provider identification, chunked upload, device-side
/// digest verification, then the device's manifest phase. Stages advance
/// strictly in order; a failure leaves later stages not-started.
pub fn cast(
    entry: &TargetEntry,
    rune_path: &Path,
    expected_provider: Option<&str>,
    timeout: Duration,
    progress: &mut dyn FnMut(StageId, u8, Option<&str>),
) -> CastSession {
    let mut session = CastSession::new(&entry.locator);

    // Validate locally before any network traffic.
    let bytes = match fs::read(rune_path) {
        Ok(b) => b,
        Err(e) => {
            session.outcome = Err(CastError::LocalBundleInvalid(
                rune_path.display().to_string(),
                e.to_string(),
            ));
            return session;
        }
    };
    if let Err(e) = decode_bundle(&bytes) {
        session.outcome = Err(CastError::LocalBundleInvalid(
            rune_path.display().to_string(),
            e.to_string(),
        ));
        return session;
    }

    let mut stream = match connect(entry.transport, &entry.locator, timeout) {
        Ok(s) => s,
        Err(_) => {
            session.outcome = Err(CastError::TargetUnreachable(entry.locator.clone()));
            return session;
        }
    };

    match run_cast(&mut session, stream.as_mut(), &bytes, expected_provider, progress) {
        Ok(()) => session.outcome = Ok(()),
        Err(e) => session.outcome = Err(e),
    }
    session
}

fn run_cast(
    session: &mut CastSession,
    stream: &mut dyn Stream,
    bytes: &[u8],
    expected_provider: Option<&str>,
    progress: &mut dyn FnMut(StageId, u8, Option<&str>),
) -> Result<(), CastError> {
    let proto = |e: fmt::Arguments| CastError::Protocol(e.to_string());

    // VERIFY_PROVIDER
    write_frame(stream, &Frame::empty(MsgType::Identify))
        .map_err(|e| proto(format_args!("identify: {e}")))?;
    let reply = read_frame(stream).map_err(|e| proto(format_args!("identify: {e}")))?;
    if reply.msg_type != MsgType::Identity {
        session.set(StageId::VerifyProvider, StageStatus::Failed);
        return Err(proto(format_args!("expected IDENTITY, got {:?}", reply.msg_type)));
    }
    let mut pos = 0;
    let fqdn = get_string(&reply.payload, &mut pos)
        .ok_or_else(|| proto(format_args!("malformed IDENTITY")))?;
    session.provider_fqdn = Some(fqdn.clone());
    if let Some(expected) = expected_provider {
        if expected != fqdn {
            session.set(StageId::VerifyProvider, StageStatus::Failed);
            return Err(CastError::ProviderMismatch {
                expected: expected.to_string(),
                actual: fqdn,
            });
        }
    }
    session.set(StageId::VerifyProvider, StageStatus::Passed);
    progress(StageId::VerifyProvider, 100, Some(&fqdn));

    // UPLOAD
    let mut begin = Vec::new();
    begin.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
    begin.extend_from_slice(&crc32(bytes).to_le_bytes());
    write_frame(stream, &Frame::new(MsgType::CastBegin, begin))
        .map_err(|e| proto(format_args!("upload: {e}")))?;
    let mut sent = 0usize;
    for chunk in bytes.chunks(MAX_CHUNK) {
        write_frame(stream, &Frame::new(MsgType::CastChunk, chunk.to_vec()))
            .map_err(|e| proto(format_args!("upload: {e}")))?;
        sent += chunk.len();
        progress(StageId::Upload, (sent * 100 / bytes.len()) as u8, None);
    }
    write_frame(stream, &Frame::empty(MsgType::CastFinish))
        .map_err(|e| proto(format_args!("upload: {e}")))?;
    session.set(StageId::Upload, StageStatus::Passed);

    // VERIFY_RUNE + CAPABILITY_CHECK, reported by the device in one reply
    let reply = read_frame(stream).map_err(|e| proto(format_args!("finish: {e}")))?;
    match reply.msg_type {
        MsgType::CastAccepted => {
            session.set(StageId::VerifyRune, StageStatus::Passed);
            progress(StageId::VerifyRune, 100, None);
            session.set(StageId::CapabilityCheck, StageStatus::Passed);
            progress(StageId::CapabilityCheck, 100, None);
            Ok(())
        }
        MsgType::CastRejected => {
            let code = *reply.payload.first().unwrap_or(&0);
            let mut pos = 1;
            let message = get_string(&reply.payload, &mut pos).unwrap_or_default();
            match code {
                REJECT_TRANSFER_CORRUPT => {
                    session.set(StageId::VerifyRune, StageStatus::Failed);
                    Err(CastError::TransferCorrupt(message))
                }
                REJECT_CAPABILITY_DENIED => {
                    session.set(StageId::VerifyRune, StageStatus::Passed);
                    progress(StageId::VerifyRune, 100, None);
                    session.set(StageId::CapabilityCheck, StageStatus::Failed);
                    Err(CastError::CapabilityDenied(message))
                }
                _ => {
                    session.set(StageId::VerifyRune, StageStatus::Passed);
                    progress(StageId::VerifyRune, 100, None);
                    session.set(StageId::CapabilityCheck, StageStatus::Failed);
                    Err(CastError::Rejected(message))
                }
            }
        }
        other => Err(proto(format_args!("unexpected reply {other:?}"))),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceHealth {
    pub invocations: u64,
    pub total_exec_nanos: u64,
    pub boot_time_nanos: u64,
    /// 0 loaded, 1 manifested, 2 ready, 3 faulted.
    pub state: u8,
    pub last_error: Option<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClientError {
    #[error("target {0} unreachable")]
    TargetUnreachable(String),
    #[error("no Rune deployed on the device")]
    NoRuneDeployed,
    #[error("device error: {0}")]
    Device(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

fn open(entry: &TargetEntry, timeout: Duration) -> Result<Box<dyn Stream>, ClientError> {
    connect(entry.transport, &entry.locator, timeout)
        .map_err(|_| ClientError::TargetUnreachable(entry.locator.clone()))
}

pub fn health_query(entry: &TargetEntry, timeout: Duration) -> Result<DeviceHealth, ClientError> {
    let mut stream = open(entry, timeout)?;
    write_frame(stream.as_mut(), &Frame::empty(MsgType::Health))
        .map_err(|e| ClientError::Protocol(e.to_string()))?;
    let reply =
        read_frame(stream.as_mut()).map_err(|e| ClientError::Protocol(e.to_string()))?;
    match reply.msg_type {
        MsgType::NoRune => Err(ClientError::NoRuneDeployed),
        MsgType::HealthReport => {
            let p = &reply.payload;
            let mut pos = 0;
            let invocations =
                get_u64(p, &mut pos).ok_or_else(|| ClientError::Protocol("short report".into()))?;
            let total_exec_nanos =
                get_u64(p, &mut pos).ok_or_else(|| ClientError::Protocol("short report".into()))?;
            let boot_time_nanos =
                get_u64(p, &mut pos).ok_or_else(|| ClientError::Protocol("short report".into()))?;
            if pos + 2 > p.len() {
                return Err(ClientError::Protocol("short report".into()));
            }
            let state = p[pos];
            let has_error = p[pos + 1];
            pos += 2;
            let last_error = if has_error != 0 {
                Some(
                    get_string(p, &mut pos)
                        .ok_or_else(|| ClientError::Protocol("short report".into()))?,
                )
            } else {
                None
            };
            Ok(DeviceHealth { invocations, total_exec_nanos, boot_time_nanos, state, last_error })
        }
        other => Err(ClientError::Protocol(format!("unexpected reply {other:?}"))),
    }
}

/// Triggers one inference on the device with the given provider seed.
pub fn invoke(entry: &TargetEntry, seed: u64, timeout: Duration) -> Result<Tensor, ClientError> {
    let mut stream = open(entry, timeout)?;
    write_frame(stream.as_mut(), &Frame::new(MsgType::Invoke, seed.to_le_bytes().to_vec()))
        .map_err(|e| ClientError::Protocol(e.to_string()))?;
    let reply =
        read_frame(stream.as_mut()).map_err(|e| ClientError::Protocol(e.to_string()))?;
    match reply.msg_type {
        MsgType::NoRune => Err(ClientError::NoRuneDeployed),
        MsgType::InvokeResult => decode_tensor(&reply.payload, Codec::Fixed)
            .map_err(|e| ClientError::Protocol(e.to_string())),
        MsgType::Error => {
            let mut pos = 0;
            Err(ClientError::Device(get_string(&reply.payload, &mut pos).unwrap_or_default()))
        }
        other => Err(ClientError::Protocol(format!("unexpected reply {other:?}"))),
    }
}
