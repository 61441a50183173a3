//! Minimal dense-network model and its `.rmodel` container.
//!
//! `.rmodel` layout (all integers little-endian):
//!
//! ```text
//! magic "RMDL" | layer_count u16
//! per layer: in_dim u32 | out_dim u32 | activation u8
//!            | weights out*in f32 (row-major, row = output neuron)
//!            | biases out f32
//! crc32 u32 over everything before it
//! ```

use thiserror::Error;

use crate::crc32::crc32;

pub const RMODEL_MAGIC: &[u8; 4] = b"RMDL";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Activation {
    Linear = 0,
    Relu = 1,
    Tanh = 2,
}

impl Activation {
    fn from_byte(b: u8) -> Option<Activation> {
        match b {
            0 => Some(Activation::Linear),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Tanh),
            _ => None,
        }
    }

    pub fn apply(self, x: f32) -> f32 {
        match self {
            Activation::Linear => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    /// Row-major `[out_dim x in_dim]`.
    pub weights: Vec<f32>,
    pub biases: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseModel {
    pub layers: Vec<Layer>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("not an .rmodel file (bad magic); only the RMDL dense-network format is supported")]
    BadMagic,
    #[error("truncated .rmodel data at byte {0}")]
    Truncated(usize),
    #[error("model checksum mismatch")]
    ChecksumMismatch,
    #[error("invalid model: {0}")]
    Invalid(String),
}

impl DenseModel {
    pub fn new(layers: Vec<Layer>) -> Result<DenseModel, ModelError> {
        if layers.is_empty() {
            return Err(ModelError::Invalid("model must have at least one layer".into()));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.in_dim == 0 || layer.out_dim == 0 {
                return Err(ModelError::Invalid(format!("layer {i} has a zero dimension")));
            }
            if layer.weights.len() != layer.in_dim * layer.out_dim {
                return Err(ModelError::Invalid(format!("layer {i} weight count mismatch")));
            }
            if layer.biases.len() != layer.out_dim {
                return Err(ModelError::Invalid(format!("layer {i} bias count mismatch")));
            }
            if layer.weights.iter().chain(&layer.biases).any(|w| !w.is_finite()) {
                return Err(ModelError::Invalid(format!("layer {i} has non-finite parameters")));
            }
            if i > 0 && layers[i - 1].out_dim != layer.in_dim {
                return Err(ModelError::Invalid(format!(
                    "layer {} output dim {} does not feed layer {i} input dim {}",
                    i - 1,
                    layers[i - 1].out_dim,
                    layer.in_dim
                )));
            }
        }
        Ok(DenseModel { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(RMODEL_MAGIC);
        out.extend_from_slice(&(self.layers.len() as u16).to_le_bytes());
        for layer in &self.layers {
            out.extend_from_slice(&(layer.in_dim as u32).to_le_bytes());
            out.extend_from_slice(&(layer.out_dim as u32).to_le_bytes());
            out.push(layer.activation as u8);
            for w in layer.weights.iter().chain(&layer.biases) {
                out.extend_from_slice(&w.to_le_bytes());
            }
        }
        let digest = crc32(&out);
        out.extend_from_slice(&digest.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<DenseModel, ModelError> {
        if bytes.len() < 4 || &bytes[..4] != RMODEL_MAGIC {
            return Err(ModelError::BadMagic);
        }
        if bytes.len() < 10 {
            return Err(ModelError::Truncated(bytes.len()));
        }
        let body = &bytes[..bytes.len() - 4];
        let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
        if crc32(body) != stored {
            return Err(ModelError::ChecksumMismatch);
        }

        let mut pos = 4;
        let layer_count = u16::from_le_bytes(body[pos..pos + 2].try_into().unwrap()) as usize;
        pos += 2;
        let mut layers = Vec::with_capacity(layer_count);
        for _ in 0..layer_count {
            if pos + 9 > body.len() {
                return Err(ModelError::Truncated(pos));
            }
            let in_dim = u32::from_le_bytes(body[pos..pos + 4].try_into().unwrap()) as usize;
            let out_dim = u32::from_le_bytes(body[pos + 4..pos + 8].try_into().unwrap()) as usize;
            let activation = Activation::from_byte(body[pos + 8])
                .ok_or_else(|| ModelError::Invalid("unknown activation byte".into()))?;
            pos += 9;
            let n_params = in_dim
                .checked_mul(out_dim)
                .and_then(|n| n.checked_add(out_dim))
                .ok_or_else(|| ModelError::Invalid("layer dimensions overflow".into()))?;
            let end = pos + n_params * 4;
            if end > body.len() {
                return Err(ModelError::Truncated(pos));
            }
            let mut params = Vec::with_capacity(n_params);
            for chunk in body[pos..end].chunks_exact(4) {
                params.push(f32::from_le_bytes(chunk.try_into().unwrap()));
            }
            pos = end;
            let biases = params.split_off(in_dim * out_dim);
            layers.push(Layer { in_dim, out_dim, activation, weights: params, biases });
        }
        if pos != body.len() {
            return Err(ModelError::Invalid("trailing bytes after last layer".into()));
        }
        DenseModel::new(layers)
    }

    /// Forward pass, f32 accumulation.
    pub fn forward(&self, input: &[f32]) -> Result<Vec<f32>, ModelError> {
        if input.len() != self.input_dim() {
            return Err(ModelError::Invalid(format!(
                "input length {} != model input dim {}",
                input.len(),
                self.input_dim()
            )));
        }
        let mut x = input.to_vec();
        for layer in &self.layers {
            let mut y = Vec::with_capacity(layer.out_dim);
            for row in 0..layer.out_dim {
                let mut acc = layer.biases[row];
                let w = &layer.weights[row * layer.in_dim..(row + 1) * layer.in_dim];
                for (wi, xi) in w.iter().zip(&x) {
                    acc += wi * xi;
                }
                y.push(layer.activation.apply(acc));
            }
            x = y;
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(w: f32, b: f32, activation: Activation) -> DenseModel {
        DenseModel::new(vec![Layer {
            in_dim: 1,
            out_dim: 1,
            activation,
            weights: vec![w],
            biases: vec![b],
        }])
        .unwrap()
    }

    #[test]
    fn identity_layer() {
        let m = single(1.0, 0.0, Activation::Linear);
        assert_eq!(m.forward(&[0.5]).unwrap(), vec![0.5]);
    }

    #[test]
    fn relu_clamps() {
        let m = single(2.0, 1.0, Activation::Relu);
        assert_eq!(m.forward(&[-3.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn rmodel_round_trip() {
        let m = DenseModel::new(vec![
            Layer {
                in_dim: 2,
                out_dim: 3,
                activation: Activation::Tanh,
                weights: vec![0.1, -0.2, 0.3, 0.4, -0.5, 0.6],
                biases: vec![0.0, 0.1, -0.1],
            },
            Layer {
                in_dim: 3,
                out_dim: 1,
                activation: Activation::Linear,
                weights: vec![1.0, 2.0, 3.0],
                biases: vec![-0.5],
            },
        ])
        .unwrap();
        let bytes = m.to_bytes();
        assert_eq!(&bytes[..4], RMODEL_MAGIC);
        assert_eq!(DenseModel::from_bytes(&bytes).unwrap(), m);
    }

    #[test]
    fn corrupt_rmodel_rejected() {
        let mut bytes = single(1.0, 0.0, Activation::Linear).to_bytes();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert_eq!(DenseModel::from_bytes(&bytes), Err(ModelError::ChecksumMismatch));
    }

    #[test]
    fn non_rmodel_file_names_supported_format() {
        let err = DenseModel::from_bytes(b"TFL3...whatever").unwrap_err();
        assert!(err.to_string().contains(".rmodel") || err.to_string().contains("RMDL"));
    }

    #[test]
    fn mismatched_chain_rejected() {
        let res = DenseModel::new(vec![
            Layer { in_dim: 1, out_dim: 2, activation: Activation::Linear, weights: vec![1.0, 1.0], biases: vec![0.0, 0.0] },
            Layer { in_dim: 3, out_dim: 1, activation: Activation::Linear, weights: vec![1.0, 1.0, 1.0], biases: vec![0.0] },
        ]);
        assert!(res.is_err());
    }
}
