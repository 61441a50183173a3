//! Tensors crossing the host-guest boundary, and the two boundary codecs.
//!
//! FIXED is a flat little-endian layout:
//!
//! ```text
//! dtype(u8) | rank(u8) | dims(u32 le each) | raw payload
//! ```
//!
//! VARINT is a tag-length-value layout with base-128 varints: three records
//! (dtype, dims, payload), each `tag(u8) | varint length | value`, where the
//! dims value is itself a run of varint-encoded dims and the payload value is
//! the raw element bytes.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum DType {
    F32 = 0,
    U8 = 1,
    I32 = 2,
}

impl DType {
    pub fn element_size(self) -> usize {
        match self {
            DType::F32 | DType::I32 => 4,
            DType::U8 => 1,
        }
    }

    pub fn from_byte(b: u8) -> Option<DType> {
        match b {
            0 => Some(DType::F32),
            1 => Some(DType::U8),
            2 => Some(DType::I32),
            _ => None,
        }
    }
}

/// Codec applied to every tensor crossing a pipeline stage boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Codec {
    Fixed,
    Varint,
}

/// Contiguous row-major tensor, little-endian element bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tensor {
    dtype: DType,
    dims: Vec<u32>,
    payload: Vec<u8>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TensorError {
    #[error("invalid tensor: {0}")]
    Invalid(String),
    #[error("malformed tensor encoding at byte {0}")]
    Malformed(usize),
}

impl Tensor {
    pub fn new(dtype: DType, dims: Vec<u32>, payload: Vec<u8>) -> Result<Tensor, TensorError> {
        if dims.is_empty() {
            return Err(TensorError::Invalid("rank must be >= 1".into()));
        }
        if dims.len() > u8::MAX as usize {
            return Err(TensorError::Invalid("rank exceeds 255".into()));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(TensorError::Invalid("all dims must be >= 1".into()));
        }
        let elems: usize = dims.iter().map(|&d| d as usize).product();
        let expected = elems * dtype.element_size();
        if payload.len() != expected {
            return Err(TensorError::Invalid(format!(
                "payload length {} != expected {}",
                payload.len(),
                expected
            )));
        }
        Ok(Tensor { dtype, dims, payload })
    }

    pub fn from_f32(dims: Vec<u32>, values: &[f32]) -> Result<Tensor, TensorError> {
        let mut payload = Vec::with_capacity(values.len() * 4);
        for v in values {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        Tensor::new(DType::F32, dims, payload)
    }

    pub fn scalar_f32(v: f32) -> Tensor {
        Tensor::from_f32(vec![1], &[v]).unwrap()
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[u32] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.iter().map(|&d| d as usize).product()
    }

    pub fn is_empty(&self) -> bool {
        false // dims are all >= 1
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn byte_size(&self) -> usize {
        self.payload.len()
    }

    /// Element view for F32 tensors. Panics on other dtypes.
    pub fn as_f32(&self) -> Vec<f32> {
        assert_eq!(self.dtype, DType::F32);
        self.payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect()
    }
}

pub fn encode_tensor(t: &Tensor, codec: Codec) -> Vec<u8> {
    match codec {
        Codec::Fixed => encode_fixed(t),
        Codec::Varint => encode_varint(t),
    }
}

pub fn decode_tensor(bytes: &[u8], codec: Codec) -> Result<Tensor, TensorError> {
    match codec {
        Codec::Fixed => decode_fixed(bytes),
        Codec::Varint => decode_varint(bytes),
    }
}

fn encode_fixed(t: &Tensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(2 + 4 * t.rank() + t.payload.len());
    out.push(t.dtype as u8);
    out.push(t.rank() as u8);
    for &d in &t.dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    out.extend_from_slice(&t.payload);
    out
}

fn decode_fixed(bytes: &[u8]) -> Result<Tensor, TensorError> {
    if bytes.len() < 2 {
        return Err(TensorError::Malformed(bytes.len()));
    }
    let dtype = DType::from_byte(bytes[0]).ok_or(TensorError::Malformed(0))?;
    let rank = bytes[1] as usize;
    if rank == 0 {
        return Err(TensorError::Malformed(1));
    }
    let mut pos = 2;
    let mut dims = Vec::with_capacity(rank);
    for _ in 0..rank {
        let end = pos + 4;
        if end > bytes.len() {
            return Err(TensorError::Malformed(pos));
        }
        dims.push(u32::from_le_bytes(bytes[pos..end].try_into().unwrap()));
        pos = end;
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(TensorError::Malformed(2));
    }
    let elems: usize = dims.iter().map(|&d| d as usize).product();
    let expected = elems * dtype.element_size();
    if bytes.len() - pos != expected {
        return Err(TensorError::Malformed(pos));
    }
    Tensor::new(dtype, dims, bytes[pos..].to_vec())
}

const TAG_DTYPE: u8 = 0x01;
const TAG_DIMS: u8 = 0x02;
const TAG_PAYLOAD: u8 = 0x03;

pub fn write_varint_u32(out: &mut Vec<u8>, mut v: u32) {
    loop {
        let byte = (v & 0x7F) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            break;
        }
        out.push(byte | 0x80);
    }
}

/// Reads one base-128 varint u32; at most 5 bytes.
pub fn read_varint_u32(bytes: &[u8], pos: &mut usize) -> Result<u32, TensorError> {
    let mut v: u32 = 0;
    for i in 0..5 {
        let b = *bytes.get(*pos).ok_or(TensorError::Malformed(*pos))?;
        *pos += 1;
        let payload = (b & 0x7F) as u32;
        if i == 4 && payload > 0x0F {
            return Err(TensorError::Malformed(*pos - 1));
        }
        v |= payload << (7 * i);
        if b & 0x80 == 0 {
            return Ok(v);
        }
    }
    Err(TensorError::Malformed(*pos))
}

fn write_record(out: &mut Vec<u8>, tag: u8, value: &[u8]) {
    out.push(tag);
    write_varint_u32(out, value.len() as u32);
    out.extend_from_slice(value);
}

fn encode_varint(t: &Tensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(t.payload.len() + 16);
    write_record(&mut out, TAG_DTYPE, &[t.dtype as u8]);
    let mut dims = Vec::new();
    for &d in &t.dims {
        write_varint_u32(&mut dims, d);
    }
    write_record(&mut out, TAG_DIMS, &dims);
    write_record(&mut out, TAG_PAYLOAD, &t.payload);
    out
}

fn read_record<'a>(bytes: &'a [u8], pos: &mut usize, tag: u8) -> Result<&'a [u8], TensorError> {
    let got = *bytes.get(*pos).ok_or(TensorError::Malformed(*pos))?;
    if got != tag {
        return Err(TensorError::Malformed(*pos));
    }
    *pos += 1;
    let len = read_varint_u32(bytes, pos)? as usize;
    let end = pos.checked_add(len).ok_or(TensorError::Malformed(*pos))?;
    if end > bytes.len() {
        return Err(TensorError::Malformed(*pos));
    }
    let value = &bytes[*pos..end];
    *pos = end;
    Ok(value)
}

fn decode_varint(bytes: &[u8]) -> Result<Tensor, TensorError> {
    let mut pos = 0;
    let dtype_val = read_record(bytes, &mut pos, TAG_DTYPE)?;
    if dtype_val.len() != 1 {
        return Err(TensorError::Malformed(pos));
    }
    let dtype = DType::from_byte(dtype_val[0]).ok_or(TensorError::Malformed(pos - 1))?;

    let dims_val = read_record(bytes, &mut pos, TAG_DIMS)?.to_vec();
    let mut dims = Vec::new();
    let mut dpos = 0;
    while dpos < dims_val.len() {
        dims.push(read_varint_u32(&dims_val, &mut dpos)?);
    }

    let payload = read_record(bytes, &mut pos, TAG_PAYLOAD)?.to_vec();
    if pos != bytes.len() {
        return Err(TensorError::Malformed(pos));
    }
    Tensor::new(dtype, dims, payload).map_err(|_| TensorError::Malformed(pos))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_zero_scalar_layout() {
        let t = Tensor::scalar_f32(0.0);
        let bytes = encode_tensor(&t, Codec::Fixed);
        assert_eq!(bytes, vec![0x00, 0x01, 0x01, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00]);
        assert_eq!(decode_tensor(&bytes, Codec::Fixed).unwrap(), t);
    }

    #[test]
    fn varint_300_is_ac_02() {
        let mut out = Vec::new();
        write_varint_u32(&mut out, 300);
        assert_eq!(out, vec![0xAC, 0x02]);
        let mut pos = 0;
        assert_eq!(read_varint_u32(&out, &mut pos).unwrap(), 300);
    }

    #[test]
    fn fixed_truncated_payload() {
        let t = Tensor::from_f32(vec![4], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut bytes = encode_tensor(&t, Codec::Fixed);
        bytes.pop();
        assert!(matches!(decode_tensor(&bytes, Codec::Fixed), Err(TensorError::Malformed(_))));
    }

    #[test]
    fn varint_overlong_length_rejected() {
        // 6-byte varint in the payload-length slot
        let bytes = vec![TAG_DTYPE, 1, 0, TAG_DIMS, 1, 1, TAG_PAYLOAD, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0x7F];
        assert!(matches!(decode_tensor(&bytes, Codec::Varint), Err(TensorError::Malformed(_))));
    }

    #[test]
    fn fixed_size_formula() {
        let t = Tensor::from_f32(vec![3, 2], &[0.0; 6]).unwrap();
        assert_eq!(encode_tensor(&t, Codec::Fixed).len(), 2 + 4 * 2 + 24);
    }

    #[test]
    fn nan_payload_preserved() {
        let t = Tensor::from_f32(vec![2], &[f32::NAN, -0.0]).unwrap();
        for codec in [Codec::Fixed, Codec::Varint] {
            let back = decode_tensor(&encode_tensor(&t, codec), codec).unwrap();
            assert_eq!(back.payload(), t.payload());
        }
    }
}
