//! The `.rune` container: manifest, pipeline bytecode, model blobs, and the
//! bit-exact on-disk layout.
//!
//! ```text
//! magic "RUNE" | version u16
//! manifest section: len u32 | bytes
//! bytecode section: len u32 | bytes
//! blob table: count u16 | per blob: digest u32 | len u32 | bytes
//! crc32 u32 over all preceding bytes
//! ```
//!
//! All integers are little-endian. The manifest section uses the FIXED
//! conventions: enums as one byte, lists count-prefixed with a u16, strings
//! as u16 length + UTF-8 bytes.

use thiserror::Error;

use crate::crc32::crc32;
use crate::runefile::{BlockId, CapabilityKind, OutputKind};

pub const RUNE_MAGIC: &[u8; 4] = b"RUNE";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapabilityRequest {
    pub kind: CapabilityKind,
    pub params: Vec<(String, u32)>,
}

impl CapabilityRequest {
    pub fn param(&self, key: &str) -> Option<u32> {
        self.params.iter().find(|(k, _)| k == key).map(|&(_, v)| v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelInfo {
    pub name: String,
    pub input_shape: Vec<u32>,
    pub output_shape: Vec<u32>,
    pub digest: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub capabilities: Vec<CapabilityRequest>,
    pub out: OutputKind,
    pub models: Vec<ModelInfo>,
}

/// The pipeline instruction set: a linear sequence mirroring the RUN chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Instr {
    ReadCap(CapabilityKind),
    Proc(BlockId),
    Infer(u8),
    WriteOut,
}

const OP_READ_CAP: u8 = 0x01;
const OP_PROC: u8 = 0x02;
const OP_INFER: u8 = 0x03;
const OP_WRITE_OUT: u8 = 0x04;

#[derive(Debug, Clone, PartialEq)]
pub struct RuneBundle {
    pub format_version: u16,
    pub manifest: Manifest,
    pub bytecode: Vec<Instr>,
    /// (crc32 digest, bytes) per model, in manifest order.
    pub model_blobs: Vec<(u32, Vec<u8>)>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BundleError {
    #[error("not a .rune bundle (bad magic)")]
    BadMagic,
    #[error("unsupported bundle format version {0}")]
    UnsupportedVersion(u16),
    #[error("bundle digest mismatch (corrupted data)")]
    DigestMismatch,
    #[error("truncated bundle at byte {0}")]
    Truncated(usize),
    #[error("bytecode references missing {what} {index}")]
    DanglingReference { what: &'static str, index: u8 },
    #[error("malformed bundle: {0}")]
    Malformed(String),
}

fn cap_kind_byte(kind: CapabilityKind) -> u8 {
    match kind {
        CapabilityKind::Audio => 0,
        CapabilityKind::Rand => 1,
    }
}

fn cap_kind_from_byte(b: u8) -> Option<CapabilityKind> {
    match b {
        0 => Some(CapabilityKind::Audio),
        1 => Some(CapabilityKind::Rand),
        _ => None,
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Reader<'a> {
        Reader { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], BundleError> {
        let end = self.pos.checked_add(n).ok_or(BundleError::Truncated(self.pos))?;
        if end > self.bytes.len() {
            return Err(BundleError::Truncated(self.pos));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, BundleError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, BundleError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, BundleError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, BundleError> {
        let len = self.u16()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| BundleError::Malformed("invalid UTF-8 string".into()))
    }

    fn shape(&mut self) -> Result<Vec<u32>, BundleError> {
        let n = self.u16()? as usize;
        let mut dims = Vec::with_capacity(n);
        for _ in 0..n {
            dims.push(self.u32()?);
        }
        Ok(dims)
    }

    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

fn write_string(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u16).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn write_shape(out: &mut Vec<u8>, dims: &[u32]) {
    out.extend_from_slice(&(dims.len() as u16).to_le_bytes());
    for &d in dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
}

pub fn encode_manifest(m: &Manifest) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(m.capabilities.len() as u16).to_le_bytes());
    for cap in &m.capabilities {
        out.push(cap_kind_byte(cap.kind));
        out.extend_from_slice(&(cap.params.len() as u16).to_le_bytes());
        for (k, v) in &cap.params {
            write_string(&mut out, k);
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.push(match m.out {
        OutputKind::Serial => 0,
    });
    out.extend_from_slice(&(m.models.len() as u16).to_le_bytes());
    for model in &m.models {
        write_string(&mut out, &model.name);
        write_shape(&mut out, &model.input_shape);
        write_shape(&mut out, &model.output_shape);
        out.extend_from_slice(&model.digest.to_le_bytes());
    }
    out
}

pub fn decode_manifest(bytes: &[u8]) -> Result<Manifest, BundleError> {
    let mut r = Reader::new(bytes);
    let cap_count = r.u16()? as usize;
    let mut capabilities = Vec::with_capacity(cap_count);
    for _ in 0..cap_count {
        let kind = cap_kind_from_byte(r.u8()?)
            .ok_or_else(|| BundleError::Malformed("unknown capability kind".into()))?;
        let param_count = r.u16()? as usize;
        let mut params = Vec::with_capacity(param_count);
        for _ in 0..param_count {
            let key = r.string()?;
            let value = r.u32()?;
            params.push((key, value));
        }
        capabilities.push(CapabilityRequest { kind, params });
    }
    let out = match r.u8()? {
        0 => OutputKind::Serial,
        b => return Err(BundleError::Malformed(format!("unknown output kind {b}"))),
    };
    let model_count = r.u16()? as usize;
    let mut models = Vec::with_capacity(model_count);
    for _ in 0..model_count {
        let name = r.string()?;
        let input_shape = r.shape()?;
        let output_shape = r.shape()?;
        let digest = r.u32()?;
        models.push(ModelInfo { name, input_shape, output_shape, digest });
    }
    if !r.done() {
        return Err(BundleError::Malformed("trailing bytes in manifest section".into()));
    }
    Ok(Manifest { capabilities, out, models })
}

pub fn encode_bytecode(code: &[Instr]) -> Vec<u8> {
    let mut out = Vec::with_capacity(2 + code.len() * 2);
    out.extend_from_slice(&(code.len() as u16).to_le_bytes());
    for instr in code {
        let (op, operand) = match *instr {
            Instr::ReadCap(kind) => (OP_READ_CAP, cap_kind_byte(kind)),
            Instr::Proc(BlockId::Fft) => (OP_PROC, 0),
            Instr::Proc(BlockId::Normalize) => (OP_PROC, 1),
            Instr::Infer(idx) => (OP_INFER, idx),
            Instr::WriteOut => (OP_WRITE_OUT, 0),
        };
        out.push(op);
        out.push(operand);
    }
    out
}

pub fn decode_bytecode(bytes: &[u8]) -> Result<Vec<Instr>, BundleError> {
    let mut r = Reader::new(bytes);
    let count = r.u16()? as usize;
    let mut code = Vec::with_capacity(count);
    for _ in 0..count {
        let op = r.u8()?;
        let operand = r.u8()?;
        code.push(match op {
            OP_READ_CAP => Instr::ReadCap(
                cap_kind_from_byte(operand)
                    .ok_or_else(|| BundleError::Malformed("unknown capability kind".into()))?,
            ),
            OP_PROC => Instr::Proc(match operand {
                0 => BlockId::Fft,
                1 => BlockId::Normalize,
                b => return Err(BundleError::Malformed(format!("unknown proc block {b}"))),
            }),
            OP_INFER => Instr::Infer(operand),
            OP_WRITE_OUT => Instr::WriteOut,
            b => return Err(BundleError::Malformed(format!("unknown opcode {b:#04x}"))),
        });
    }
    if !r.done() {
        return Err(BundleError::Malformed("trailing bytes in bytecode section".into()));
    }
    Ok(code)
}

/// Encodes without reference validation. Useful for building deliberately
/// inconsistent bundles in robustness tests; [`encode_bundle`] is the
/// validating entry point.
pub fn encode_bundle_raw(manifest: &Manifest, bytecode: &[Instr], model_blobs: &[Vec<u8>]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(RUNE_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let manifest_bytes = encode_manifest(manifest);
    out.extend_from_slice(&(manifest_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&manifest_bytes);
    let code_bytes = encode_bytecode(bytecode);
    out.extend_from_slice(&(code_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&code_bytes);
    out.extend_from_slice(&(model_blobs.len() as u16).to_le_bytes());
    for blob in model_blobs {
        out.extend_from_slice(&crc32(blob).to_le_bytes());
        out.extend_from_slice(&(blob.len() as u32).to_le_bytes());
        out.extend_from_slice(blob);
    }
    out.extend_from_slice(&crc32(&out).to_le_bytes());
    out
}

pub fn encode_bundle(
    manifest: &Manifest,
    bytecode: &[Instr],
    model_blobs: &[Vec<u8>],
) -> Result<Vec<u8>, BundleError> {
    if manifest.models.len() != model_blobs.len() {
        return Err(BundleError::Malformed(format!(
            "manifest declares {} models but {} blobs were supplied",
            manifest.models.len(),
            model_blobs.len()
        )));
    }
    for (i, (info, blob)) in manifest.models.iter().zip(model_blobs).enumerate() {
        if crc32(blob) != info.digest {
            return Err(BundleError::Malformed(format!("model blob {i} digest mismatch")));
        }
    }
    for instr in bytecode {
        match *instr {
            Instr::ReadCap(kind) => {
                if !manifest.capabilities.iter().any(|c| c.kind == kind) {
                    return Err(BundleError::DanglingReference {
                        what: "capability",
                        index: cap_kind_byte(kind),
                    });
                }
            }
            Instr::Infer(idx) => {
                if idx as usize >= model_blobs.len() {
                    return Err(BundleError::DanglingReference { what: "model", index: idx });
                }
            }
            _ => {}
        }
    }

    Ok(encode_bundle_raw(manifest, bytecode, model_blobs))
}

pub fn decode_bundle(bytes: &[u8]) -> Result<RuneBundle, BundleError> {
    if bytes.len() < 4 {
        return Err(BundleError::Truncated(bytes.len()));
    }
    if &bytes[..4] != RUNE_MAGIC {
        return Err(BundleError::BadMagic);
    }
    if bytes.len() < 10 {
        return Err(BundleError::Truncated(bytes.len()));
    }
    let version = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(BundleError::UnsupportedVersion(version));
    }
    let body = &bytes[..bytes.len() - 4];
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    if crc32(body) != stored {
        return Err(BundleError::DigestMismatch);
    }

    let mut r = Reader::new(body);
    r.take(6)?; // magic + version, validated above
    let manifest_len = r.u32()? as usize;
    let manifest = decode_manifest(r.take(manifest_len)?)?;
    let code_len = r.u32()? as usize;
    let bytecode = decode_bytecode(r.take(code_len)?)?;
    let blob_count = r.u16()? as usize;
    let mut model_blobs = Vec::with_capacity(blob_count);
    for i in 0..blob_count {
        let digest = r.u32()?;
        let len = r.u32()? as usize;
        let blob = r.take(len)?.to_vec();
        if crc32(&blob) != digest {
            return Err(BundleError::Malformed(format!("model blob {i} digest mismatch")));
        }
        model_blobs.push((digest, blob));
    }
    if !r.done() {
        return Err(BundleError::Malformed("trailing bytes after blob table".into()));
    }

    if manifest.models.len() != model_blobs.len() {
        return Err(BundleError::Malformed("manifest model count != blob count".into()));
    }
    for (info, (digest, _)) in manifest.models.iter().zip(&model_blobs) {
        if info.digest != *digest {
            return Err(BundleError::Malformed("manifest digest != blob table digest".into()));
        }
    }
    for instr in &bytecode {
        if let Instr::Infer(idx) = instr {
            if *idx as usize >= model_blobs.len() {
                return Err(BundleError::DanglingReference { what: "model", index: *idx });
            }
        }
        // READ_CAP of a kind absent from the manifest is left for the runtime
        // permission check, which names the offending kind.
    }

    Ok(RuneBundle { format_version: version, manifest, bytecode, model_blobs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Activation, DenseModel, Layer};

    fn identity_model_bytes() -> Vec<u8> {
        DenseModel::new(vec![Layer {
            in_dim: 1,
            out_dim: 1,
            activation: Activation::Linear,
            weights: vec![1.0],
            biases: vec![0.0],
        }])
        .unwrap()
        .to_bytes()
    }

    fn minimal_bundle_parts() -> (Manifest, Vec<Instr>, Vec<Vec<u8>>) {
        let blob = identity_model_bytes();
        let manifest = Manifest {
            capabilities: vec![CapabilityRequest {
                kind: CapabilityKind::Rand,
                params: vec![("samples".into(), 1)],
            }],
            out: OutputKind::Serial,
            models: vec![ModelInfo {
                name: "m".into(),
                input_shape: vec![1],
                output_shape: vec![1],
                digest: crc32(&blob),
            }],
        };
        let code = vec![Instr::ReadCap(CapabilityKind::Rand), Instr::Infer(0), Instr::WriteOut];
        (manifest, code, vec![blob])
    }

    #[test]
    fn minimal_bundle_starts_with_magic() {
        let (m, code, blobs) = minimal_bundle_parts();
        let bytes = encode_bundle(&m, &code, &blobs).unwrap();
        assert_eq!(&bytes[..4], &[0x52, 0x55, 0x4E, 0x45]);
    }

    #[test]
    fn bundle_round_trip() {
        let (m, code, blobs) = minimal_bundle_parts();
        let bytes = encode_bundle(&m, &code, &blobs).unwrap();
        let bundle = decode_bundle(&bytes).unwrap();
        assert_eq!(bundle.manifest, m);
        assert_eq!(bundle.bytecode, code);
        assert_eq!(bundle.model_blobs[0].1, blobs[0]);
    }

    #[test]
    fn dangling_model_reference_rejected() {
        let (m, mut code, blobs) = minimal_bundle_parts();
        code[1] = Instr::Infer(1);
        let err = encode_bundle(&m, &code, &blobs).unwrap_err();
        assert_eq!(err, BundleError::DanglingReference { what: "model", index: 1 });
    }

    #[test]
    fn dangling_capability_reference_rejected_at_encode() {
        let (m, mut code, blobs) = minimal_bundle_parts();
        code[0] = Instr::ReadCap(CapabilityKind::Audio);
        let err = encode_bundle(&m, &code, &blobs).unwrap_err();
        assert!(matches!(err, BundleError::DanglingReference { what: "capability", .. }));
    }

    #[test]
    fn empty_input_is_truncated() {
        assert_eq!(decode_bundle(&[]), Err(BundleError::Truncated(0)));
    }

    #[test]
    fn encode_is_deterministic() {
        let (m, code, blobs) = minimal_bundle_parts();
        assert_eq!(
            encode_bundle(&m, &code, &blobs).unwrap(),
            encode_bundle(&m, &code, &blobs).unwrap()
        );
    }

    #[test]
    fn every_flipped_byte_is_detected() {
        let (m, code, blobs) = minimal_bundle_parts();
        let bytes = encode_bundle(&m, &code, &blobs).unwrap();
        for i in 0..bytes.len() {
            let mut corrupt = bytes.clone();
            corrupt[i] ^= 0x01;
            assert!(decode_bundle(&corrupt).is_err(), "flip at byte {i} was accepted");
        }
    }
}
