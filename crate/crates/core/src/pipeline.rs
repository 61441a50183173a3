//! Stage kernels: FFT magnitude and normalize processing blocks, and the
//! dense-model inference stage.
//!
//! The FFT block emits the full mirrored magnitude spectrum so the block is
//! shape-preserving: `[n,1] -> [n,1]`. A radix-2 in-place FFT handles
//! power-of-two lengths; other lengths fall back to the direct DFT. All
//! accumulation is in f64.

use thiserror::Error;

use crate::model::DenseModel;
use crate::tensor::Tensor;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StageError {
    #[error("stage shape mismatch: got {got:?}, expected {expected:?}")]
    ShapeMismatch { got: Vec<u32>, expected: Vec<u32> },
    #[error("stage expects an f32 tensor")]
    WrongDType,
    #[error("model error: {0}")]
    Model(String),
}

fn f32_elems(t: &Tensor) -> Result<Vec<f32>, StageError> {
    if t.dtype() != crate::tensor::DType::F32 {
        return Err(StageError::WrongDType);
    }
    Ok(t.as_f32())
}

/// Magnitude of the n-point DFT: `out[k] = |sum_t x[t] e^{-2pi i k t / n}|`.
pub fn fft_magnitude(x: &Tensor) -> Result<Tensor, StageError> {
    let values = f32_elems(x)?;
    let n = values.len();
    let mags = if n.is_power_of_two() {
        fft_radix2_magnitude(&values)
    } else {
        dft_magnitude(&values)
    };
    let out: Vec<f32> = mags.iter().map(|&m| m as f32).collect();
    Ok(Tensor::from_f32(x.dims().to_vec(), &out).expect("shape preserved"))
}

fn dft_magnitude(x: &[f32]) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut re = 0.0f64;
        let mut im = 0.0f64;
        for (t, &v) in x.iter().enumerate() {
            let angle = -2.0 * std::f64::consts::PI * (k as f64) * (t as f64) / (n as f64);
            re += v as f64 * angle.cos();
            im += v as f64 * angle.sin();
        }
        out.push(re.hypot(im));
    }
    out
}

fn fft_radix2_magnitude(x: &[f32]) -> Vec<f64> {
    let n = x.len();
    let mut re: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    let mut im = vec![0.0f64; n];

    // bit-reversal permutation
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = (i as u32).reverse_bits() >> (32 - bits.max(1));
        let j = if n == 1 { 0 } else { j as usize };
        if j > i {
            re.swap(i, j);
            im.swap(i, j);
        }
    }

    let mut len = 2;
    while len <= n {
        let step = -2.0 * std::f64::consts::PI / len as f64;
        for start in (0..n).step_by(len) {
            for k in 0..len / 2 {
                let angle = step * k as f64;
                let (wr, wi) = (angle.cos(), angle.sin());
                let a = start + k;
                let b = start + k + len / 2;
                let tr = wr * re[b] - wi * im[b];
                let ti = wr * im[b] + wi * re[b];
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
            }
        }
        len <<= 1;
    }

    re.iter().zip(&im).map(|(&r, &i)| r.hypot(i)).collect()
}

/// Min-max rescale into [0, 1]; all zeros when the range is degenerate.
pub fn normalize(x: &Tensor) -> Result<Tensor, StageError> {
    let values = f32_elems(x)?;
    let min = values.iter().copied().fold(f32::INFINITY, f32::min);
    let max = values.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let out: Vec<f32> = if max == min {
        vec![0.0; values.len()]
    } else {
        values.iter().map(|&v| (v - min) / (max - min)).collect()
    };
    Ok(Tensor::from_f32(x.dims().to_vec(), &out).expect("shape preserved"))
}

/// Dense-network inference. The input tensor is flattened; the output tensor
/// takes the declared output shape.
pub fn infer(model: &DenseModel, x: &Tensor, output_shape: &[u32]) -> Result<Tensor, StageError> {
    let values = f32_elems(x)?;
    if values.len() != model.input_dim() {
        return Err(StageError::ShapeMismatch {
            got: x.dims().to_vec(),
            expected: vec![model.input_dim() as u32],
        });
    }
    let out_elems: usize = output_shape.iter().map(|&d| d as usize).product();
    if out_elems != model.output_dim() {
        return Err(StageError::ShapeMismatch {
            got: output_shape.to_vec(),
            expected: vec![model.output_dim() as u32],
        });
    }
    let y = model.forward(&values).map_err(|e| StageError::Model(e.to_string()))?;
    Ok(Tensor::from_f32(output_shape.to_vec(), &y).expect("length checked"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{Activation, Layer};

    fn col(values: &[f32]) -> Tensor {
        Tensor::from_f32(vec![values.len() as u32, 1], values).unwrap()
    }

    #[test]
    fn fft_of_ones_is_dc_only() {
        let out = fft_magnitude(&col(&[1.0; 8])).unwrap();
        let mags = out.as_f32();
        assert!((mags[0] - 8.0).abs() < 1e-6);
        for &m in &mags[1..] {
            assert!(m.abs() < 1e-6);
        }
    }

    #[test]
    fn fft_of_zeros_is_zeros() {
        let out = fft_magnitude(&col(&[0.0; 150])).unwrap();
        assert!(out.as_f32().iter().all(|&m| m == 0.0));
        assert_eq!(out.dims(), &[150, 1]);
    }

    #[test]
    fn fft_of_cosine_peaks_at_mirrored_bins() {
        let n = 8;
        let x: Vec<f32> = (0..n)
            .map(|t| (2.0 * std::f32::consts::PI * t as f32 / n as f32).cos())
            .collect();
        let mags = fft_magnitude(&col(&x)).unwrap().as_f32();
        for (k, &m) in mags.iter().enumerate() {
            let expected = if k == 1 || k == 7 { 4.0 } else { 0.0 };
            assert!((m - expected).abs() < 1e-6, "bin {k}: {m}");
        }
    }

    #[test]
    fn normalize_rescales() {
        let out = normalize(&col(&[0.0, 5.0, 10.0])).unwrap();
        assert_eq!(out.as_f32(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn normalize_degenerate_range_is_zeros() {
        let out = normalize(&col(&[3.0, 3.0, 3.0])).unwrap();
        assert_eq!(out.as_f32(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn infer_identity_network() {
        let m = DenseModel::new(vec![Layer {
            in_dim: 1,
            out_dim: 1,
            activation: Activation::Linear,
            weights: vec![1.0],
            biases: vec![0.0],
        }])
        .unwrap();
        let y = infer(&m, &Tensor::scalar_f32(0.5), &[1]).unwrap();
        assert_eq!(y.as_f32(), vec![0.5]);
    }

    #[test]
    fn infer_rejects_bad_input_length() {
        let m = fixtures::sine_model();
        let err = infer(&m, &col(&[0.0, 0.0]), &[1]).unwrap_err();
        assert!(matches!(err, StageError::ShapeMismatch { .. }));
    }

    #[test]
    fn sine_fixture_accuracy_at_half_pi() {
        let m = fixtures::sine_model();
        let y = infer(&m, &Tensor::scalar_f32(std::f32::consts::FRAC_PI_2), &[1]).unwrap();
        assert!((y.as_f32()[0] - 1.0).abs() < 0.15);
    }
}
