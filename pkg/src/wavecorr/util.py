"""Shared small helpers: seeded RNG streams, smooth windows, metrics, interpolation."""

import numpy as np

__all__ = [
    "keyed_generator",
    "smooth_window",
    "smooth_step",
    "rel_l2",
    "periodic_interp_weights",
    "periodic_interp",
]


def keyed_generator(seed, *key):
    """Counter-based RNG stream for a (seed, *key) tuple.

    Streams for distinct keys are independent and reproducible regardless of
    the order they are drawn in, which is what lets ensembles run under any
    parallel schedule. Key words are folded into the 128-bit Philox key.
    """
    k1 = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    acc = np.uint64(0x9E3779B97F4A7C15)
    for word in key:
        w = np.uint64(int(word) & 0xFFFFFFFFFFFFFFFF)
        acc = np.uint64((int(acc) * 0x100000001B3 + int(w)) & 0xFFFFFFFFFFFFFFFF)
    bg = np.random.Philox(key=np.array([k1, acc], dtype=np.uint64))
    return np.random.Generator(bg)


def smooth_step(t):
    """C^inf monotone step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(t > 0.0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
        b = np.where(t < 1.0, np.exp(-1.0 / np.maximum(1.0 - t, 1e-300)), 0.0)
    return a / (a + b)


def smooth_window(t, lo, hi, soft):
    """Smooth indicator of [lo, hi] with transition width `soft` (1 inside, 0 outside)."""
    t = np.asarray(t, dtype=float)
    return smooth_step((t - lo) / soft + 0.5) * smooth_step((hi - t) / soft + 0.5)


def rel_l2(a, b):
    """Relative L2 distance ||a - b|| / ||b||."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return np.linalg.norm(a)
    return np.linalg.norm(a - b) / nb


def periodic_interp_weights(n, length, pos):
    """Weights w with f(pos) = sum_j w[j] f(x_j) for band-limited periodic f.

    Even-n periodic sinc (split Nyquist), exact on trigonometric polynomials
    representable on the grid. Returns the unit vector for on-grid positions.
    """
    h = length / n
    j = np.arange(n)
    d = (pos / h - j) * np.pi / n  # phase differences
    w = np.empty(n)
    small = np.abs(np.sin(d)) < 1e-14
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.sin(n * d) / (n * np.tan(d))
    w[small] = 1.0
    return w


def periodic_interp(values, length, pos):
    """Trigonometric interpolation of periodic grid samples at position(s) pos."""
    values = np.asarray(values)
    n = values.shape[-1]
    pos = np.atleast_1d(np.asarray(pos, dtype=float))
    out = np.stack([values @ periodic_interp_weights(n, length, p) for p in pos])
    return out if out.shape[0] > 1 else out[0]
