#!/usr/bin/env python3
"""Generate the .rmodel fixtures checked into this repo.

Fits a small dense network to the sine function (the model used by the
benchmark pipeline) and emits a fixed-seed 150-input classifier used by
the demo Runefile. Run from the repo root:

    python3 tools/gen_fixtures.py
"""

import struct
import zlib

import numpy as np

LINEAR, RELU, TANH = 0, 1, 2


def write_rmodel(path, layers):
    """layers: list of (W [out,in] f32, b [out] f32, activation byte)."""
    body = b"RMDL" + struct.pack("<H", len(layers))
    for w, b, act in layers:
        w = np.asarray(w, dtype="<f4")
        b = np.asarray(b, dtype="<f4")
        out_dim, in_dim = w.shape
        body += struct.pack("<IIB", in_dim, out_dim, act)
        body += w.tobytes()  # row-major, row = output neuron
        body += b.tobytes()
    body += struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)
    with open(path, "wb") as f:
        f.write(body)
    print(f"wrote {path} ({len(body)} bytes)")


def fit_sine():
    rng = np.random.default_rng(7)
    w1 = rng.normal(0, 0.8, (16, 1))
    b1 = np.zeros(16)
    w2 = rng.normal(0, 0.5, (16, 16))
    b2 = np.zeros(16)
    w3 = rng.normal(0, 0.5, (1, 16))
    b3 = np.zeros(1)

    x = np.linspace(-np.pi, np.pi, 512).reshape(-1, 1)
    y = np.sin(x)

    params = [w1, b1, w2, b2, w3, b3]
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    lr, beta1, beta2, eps = 5e-3, 0.9, 0.999, 1e-8

    for step in range(1, 20001):
        z1 = x @ w1.T + b1
        a1 = np.tanh(z1)
        z2 = a1 @ w2.T + b2
        a2 = np.tanh(z2)
        out = a2 @ w3.T + b3

        d_out = 2 * (out - y) / len(x)
        g_w3 = d_out.T @ a2
        g_b3 = d_out.sum(0)
        d_a2 = d_out @ w3
        d_z2 = d_a2 * (1 - a2**2)
        g_w2 = d_z2.T @ a1
        g_b2 = d_z2.sum(0)
        d_a1 = d_z2 @ w2
        d_z1 = d_a1 * (1 - a1**2)
        g_w1 = d_z1.T @ x
        g_b1 = d_z1.sum(0)

        grads = [g_w1, g_b1, g_w2, g_b2, g_w3, g_b3]
        for i, g in enumerate(grads):
            m[i] = beta1 * m[i] + (1 - beta1) * g
            v[i] = beta2 * v[i] + (1 - beta2) * g**2
            mh = m[i] / (1 - beta1**step)
            vh = v[i] / (1 - beta2**step)
            params[i] -= lr * mh / (np.sqrt(vh) + eps)
        w1, b1, w2, b2, w3, b3 = params

    max_err = np.abs(out - y).max()
    print(f"sine fit max abs error on [-pi, pi]: {max_err:.5f}")
    assert max_err < 0.05
    return [(w1, b1, TANH), (w2, b2, TANH), (w3, b3, LINEAR)]


def main():
    write_rmodel("crates/core/assets/sine.rmodel", fit_sine())

    # Demo classifier: shapes match the demo Runefile (150 -> 1); the
    # weights themselves are arbitrary but fixed-seed for reproducible
    # bundles.
    rng = np.random.default_rng(42)
    w1 = rng.normal(0, 0.05, (8, 150))
    b1 = np.zeros(8)
    w2 = rng.normal(0, 0.3, (1, 8))
    b2 = np.zeros(1)
    write_rmodel("demo/microspeech.rmodel", [(w1, b1, RELU), (w2, b2, TANH)])


if __name__ == "__main__":
    main()
