"""Propagation media: the acoustic coefficient n(x) and attenuation a(x).

A Medium evaluates n, grad n and a at arbitrary points of R^d (vectorized
over trailing batch axes), so ray integration never touches the periodic
grid. The named presets are closed-form and analytic, in particular the
random-smooth ones are finite cosine series, which keeps Hamiltonian ray
integration free of interpolation error. Grid-sampled media interpolate with
periodic cubic splines and spectrally precomputed gradients.
"""

import hashlib
import json

import numpy as np
from scipy.interpolate import CubicSpline

__all__ = ["Medium", "PhasePoint"]


class PhasePoint:
    """A point (x, xi) of phase space; xi must stay away from 0 along rays."""

    __slots__ = ("x", "xi")

    def __init__(self, x, xi):
        self.x = np.atleast_1d(np.asarray(x, dtype=float))
        self.xi = np.atleast_1d(np.asarray(xi, dtype=float))
        if self.x.shape != self.xi.shape:
            raise ValueError("x and xi must have the same dimension")

    @property
    def dim(self):
        return self.x.size

    def __repr__(self):
        return f"PhasePoint(x={self.x.tolist()}, xi={self.xi.tolist()})"


class Medium:
    """Medium with speed-squared factor n(x) > 0 and attenuation a(x) >= 0.

    `n_fn`, `grad_n_fn`, `a_fn` take an array of shape (d, ...) of positions
    and return (...) values (grad returns (d, ...)).
    """

    def __init__(self, dim, n_fn, grad_n_fn, a_fn, inf_a, descriptor):
        self.dim = int(dim)
        self._n = n_fn
        self._grad_n = grad_n_fn
        self._a = a_fn
        self.inf_a = float(inf_a)
        self.descriptor = descriptor

    # -- evaluation ---------------------------------------------------------

    def n(self, x):
        return self._n(np.asarray(x, dtype=float))

    def grad_n(self, x):
        return self._grad_n(np.asarray(x, dtype=float))

    def a(self, x):
        return self._a(np.asarray(x, dtype=float))

    def speed(self, x):
        return np.sqrt(self.n(x))

    def max_speed(self, length=1.0, probe=256):
        """Upper bound of sqrt(n) over [0, length)^d, by probing."""
        axes = [np.linspace(0.0, length, probe, endpoint=False)] * self.dim
        pts = np.stack(np.meshgrid(*axes, indexing="ij"))
        return float(np.sqrt(self.n(pts).max()))

    def n_on_grid(self, ctx):
        pts = np.stack(ctx.x_mesh())
        return self.n(pts)

    def a_on_grid(self, ctx):
        pts = np.stack(ctx.x_mesh())
        return np.broadcast_to(self.a(pts), ctx.grid_shape).copy()

    def content_hash(self):
        blob = json.dumps(self.descriptor, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def __repr__(self):
        return f"Medium({self.descriptor.get('preset', 'custom')}, dim={self.dim})"

    # -- presets -------------------------------------------------------------

    @classmethod
    def homogeneous(cls, n0=1.0, a0=0.0, dim=1):
        if n0 <= 0 or a0 < 0:
            raise ValueError("need n0 > 0 and a0 >= 0")

        def n_fn(x):
            return np.full(x.shape[1:], float(n0))

        def grad_fn(x):
            return np.zeros_like(x)

        def a_fn(x):
            return np.full(x.shape[1:], float(a0))

        desc = {"preset": "homogeneous", "n0": n0, "a0": a0, "dim": dim}
        return cls(dim, n_fn, grad_fn, a_fn, a0, desc)

    @classmethod
    def linear(cls, n0=1.0, slope=(0.3, 0.0), a0=0.0, dim=2):
        """n(x) = n0 + slope . x  (not periodic; for ray studies on a box)."""
        s = np.atleast_1d(np.asarray(slope, dtype=float))[:dim]

        def n_fn(x):
            return n0 + np.tensordot(s, x, axes=(0, 0))

        def grad_fn(x):
            return np.broadcast_to(s.reshape((dim,) + (1,) * (x.ndim - 1)), x.shape).copy()

        def a_fn(x):
            return np.full(x.shape[1:], float(a0))

        desc = {"preset": "linear", "n0": n0, "slope": s.tolist(), "a0": a0, "dim": dim}
        return cls(dim, n_fn, grad_fn, a_fn, a0, desc)

    @classmethod
    def gaussian_lens(cls, n0=1.0, depth=0.2, sigma=0.15, center=(0.0, 0.0), a0=0.0, dim=2):
        """n(x) = n0 - depth * exp(-|x - c|^2 / sigma^2): a focusing slow spot."""
        c = np.atleast_1d(np.asarray(center, dtype=float))[:dim]
        if depth >= n0:
            raise ValueError("lens depth must keep n positive")

        def gauss(x):
            r2 = sum((x[i] - c[i]) ** 2 for i in range(dim))
            return np.exp(-r2 / sigma**2)

        def n_fn(x):
            return n0 - depth * gauss(x)

        def grad_fn(x):
            g = gauss(x)
            return np.stack([depth * 2.0 * (x[i] - c[i]) / sigma**2 * g for i in range(dim)])

        def a_fn(x):
            return np.full(x.shape[1:], float(a0))

        desc = {
            "preset": "gaussian-lens", "n0": n0, "depth": depth,
            "sigma": sigma, "center": c.tolist(), "a0": a0, "dim": dim,
        }
        return cls(dim, n_fn, grad_fn, a_fn, a0, desc)

    @classmethod
    def random_smooth(cls, seed, contrast=0.1, n0=1.0, a0=0.0, dim=2, length=1.0, max_mode=3):
        """Random periodic trig polynomial: n = n0 * (1 + contrast * field).

        The field is a fixed-seed sum of cosine modes with |k| <= max_mode,
        normalized to unit max amplitude, so n stays within the stated
        contrast and all derivatives are closed-form.
        """
        rng = np.random.default_rng(seed)
        modes = []
        for kv in np.ndindex(*((2 * max_mode + 1,) * dim)):
            k = np.array(kv) - max_mode
            if np.all(k == 0) or np.linalg.norm(k) > max_mode:
                continue
            modes.append(k)
        modes = np.array(modes, dtype=float)  # (M, d)
        amps = rng.standard_normal(len(modes)) / (1.0 + np.linalg.norm(modes, axis=1) ** 2)
        phases = rng.uniform(0, 2 * np.pi, len(modes))
        kvecs = 2 * np.pi / length * modes  # (M, d)

        # normalize max |field| ~ 1 on a probe grid
        axes = [np.linspace(0, length, 64, endpoint=False)] * dim
        p = np.stack(np.meshgrid(*axes, indexing="ij"))
        arg = np.tensordot(kvecs, p, axes=(1, 0))  # (M, ...)
        raw = np.tensordot(amps, np.cos(arg + phases.reshape((-1,) + (1,) * dim)), axes=(0, 0))
        scale = contrast / np.abs(raw).max()

        def field(x):
            ar = np.tensordot(kvecs, x, axes=(1, 0))
            ph = phases.reshape((-1,) + (1,) * (x.ndim - 1))
            return scale * np.tensordot(amps, np.cos(ar + ph), axes=(0, 0))

        def n_fn(x):
            return n0 * (1.0 + field(x))

        def grad_fn(x):
            ar = np.tensordot(kvecs, x, axes=(1, 0))
            ph = phases.reshape((-1,) + (1,) * (x.ndim - 1))
            s = np.sin(ar + ph)  # (M, ...)
            comps = [
                -n0 * scale * np.tensordot(amps * kvecs[:, i], s, axes=(0, 0))
                for i in range(dim)
            ]
            return np.stack(comps)

        def a_fn(x):
            return np.full(x.shape[1:], float(a0))

        desc = {
            "preset": "random-smooth", "seed": int(seed), "contrast": contrast,
            "n0": n0, "a0": a0, "dim": dim, "length": length, "max_mode": max_mode,
        }
        return cls(dim, n_fn, grad_fn, a_fn, a0, desc)

    @classmethod
    def from_grid(cls, n_values, length, a_values=None, a0=0.0):
        """Periodic medium from 1-D grid samples (cubic-spline interpolation).

        Gradients come from splining the spectral derivative of the samples,
        so they stay smooth at the integrator's order.
        """
        n_values = np.asarray(n_values, dtype=float)
        if n_values.ndim != 1:
            raise ValueError("grid media are supported in 1-D")
        if n_values.min() <= 0:
            raise ValueError("n must be positive everywhere")
        n = n_values.size
        h = length / n
        x_nodes = np.arange(n + 1) * h
        wrap = lambda v: np.concatenate([v, v[:1]])
        n_spl = CubicSpline(x_nodes, wrap(n_values), bc_type="periodic")
        k = 2j * np.pi * np.fft.fftfreq(n, d=h)
        dn = np.fft.ifft(k * np.fft.fft(n_values)).real
        dn_spl = CubicSpline(x_nodes, wrap(dn), bc_type="periodic")
        if a_values is None:
            a_values = np.full(n, float(a0))
        a_values = np.asarray(a_values, dtype=float)
        if a_values.min() < 0:
            raise ValueError("a must be nonnegative")
        a_spl = CubicSpline(x_nodes, wrap(a_values), bc_type="periodic")

        def n_fn(x):
            return n_spl(np.mod(x[0], length))

        def grad_fn(x):
            return dn_spl(np.mod(x[0], length))[None]

        def a_fn(x):
            return np.clip(a_spl(np.mod(x[0], length)), 0.0, None)

        desc = {
            "preset": "grid", "length": length,
            "n_sha": hashlib.sha256(n_values.tobytes()).hexdigest()[:16],
            "a_sha": hashlib.sha256(a_values.tobytes()).hexdigest()[:16],
        }
        return cls(1, n_fn, grad_fn, a_fn, float(a_values.min()), desc)

    @classmethod
    def from_descriptor(cls, desc):
        """Rebuild a preset medium from its descriptor dict (config plumbing)."""
        d = dict(desc)
        preset = d.pop("preset")
        builders = {
            "homogeneous": cls.homogeneous,
            "linear": cls.linear,
            "gaussian-lens": cls.gaussian_lens,
            "random-smooth": cls.random_smooth,
        }
        if preset not in builders:
            raise ValueError(f"unknown medium preset {preset!r}")
        return builders[preset](**d)
