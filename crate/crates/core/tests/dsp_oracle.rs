use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rune_core::pipeline::{fft_magnitude, normalize};
use rune_core::tensor::Tensor;

/// Textbook O(n^2) DFT magnitude, written only from the definition
/// |X_k| = |sum_n x_n e^{-2*pi*i*k*n/N}|. Serves as the oracle for the
/// production transform.
fn dft_magnitude_oracle(input: &[f32]) -> Vec<f64> {
    let n = input.len();
    (0..n)
        .map(|k| {
            let mut re = 0.0f64;
            let mut im = 0.0f64;
            for (j, &x) in input.iter().enumerate() {
                let angle = -2.0 * std::f64::consts::PI * (k as f64) * (j as f64) / (n as f64);
                re += x as f64 * angle.cos();
                im += x as f64 * angle.sin();
            }
            (re * re + im * im).sqrt()
        })
        .collect()
}

fn random_signal(rng: &mut ChaCha8Rng, n: usize) -> Vec<f32> {
    (0..n).map(|_| rng.gen::<f32>() * 2.0 - 1.0).collect()
}

#[test]
fn fft_matches_naive_dft() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for &n in &[8usize, 150, 256, 1024] {
        for _ in 0..100 {
            let signal = random_signal(&mut rng, n);
            let input = Tensor::from_f32(vec![n as u32, 1], &signal).unwrap();
            let got = fft_magnitude(&input).unwrap().as_f32();
            let want = dft_magnitude_oracle(&signal);
            assert_eq!(got.len(), n);
            for (k, (&g, &w)) in got.iter().zip(want.iter()).enumerate() {
                let tol = 1e-6 * w.abs().max(1.0);
                assert!(
                    (g as f64 - w).abs() <= tol,
                    "n={n} bin {k}: got {g}, oracle {w}"
                );
            }
        }
    }
}

#[test]
fn fft_satisfies_parseval() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for &n in &[8usize, 150, 256, 1024] {
        for _ in 0..20 {
            let signal = random_signal(&mut rng, n);
            let input = Tensor::from_f32(vec![n as u32, 1], &signal).unwrap();
            let spectrum = fft_magnitude(&input).unwrap().as_f32();
            let time_energy: f64 = signal.iter().map(|&x| (x as f64) * (x as f64)).sum();
            let freq_energy: f64 =
                spectrum.iter().map(|&m| (m as f64) * (m as f64)).sum::<f64>() / n as f64;
            let tol = 1e-5 * time_energy.max(1.0);
            assert!(
                (time_energy - freq_energy).abs() <= tol,
                "n={n}: time energy {time_energy}, freq energy {freq_energy}"
            );
        }
    }
}

#[test]
fn normalize_maps_into_unit_interval() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..200 {
        let n = rng.gen_range(1..=256);
        let signal: Vec<f32> = (0..n).map(|_| rng.gen::<f32>() * 200.0 - 100.0).collect();
        let input = Tensor::from_f32(vec![n as u32, 1], &signal).unwrap();
        let out = normalize(&input).unwrap().as_f32();
        let min = signal.iter().cloned().fold(f32::INFINITY, f32::min);
        let max = signal.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
        for &v in &out {
            assert!((0.0..=1.0).contains(&v), "normalized value {v} outside [0,1]");
        }
        if max > min {
            // Extremes land exactly on the interval ends.
            let got_min = out.iter().cloned().fold(f32::INFINITY, f32::min);
            let got_max = out.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
            assert!(got_min.abs() <= 1e-6);
            assert!((got_max - 1.0).abs() <= 1e-6);
            // Order is preserved.
            let mut idx: Vec<usize> = (0..signal.len()).collect();
            idx.sort_by(|&a, &b| signal[a].partial_cmp(&signal[b]).unwrap());
            for pair in idx.windows(2) {
                assert!(out[pair[0]] <= out[pair[1]]);
            }
        } else {
            assert!(out.iter().all(|&v| v == 0.0));
        }
    }
}
