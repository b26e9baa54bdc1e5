"""Stationary random sources with a prescribed phase-space power spectrum.

The source f(x, t) is white in time and spatially colored: each time step
draws f_k = Re[B w_k] / sqrt(dt) with B the quantization of sqrt(p) and w_k
complex white noise on the grid. That factorization makes the spatial
covariance positive semidefinite by construction at every resolution, and
equal to the kernel dual of p up to the usual O(eps) symbol-ordering error
(which the tests measure rather than assume). The 1/sqrt(dt) scaling is the
discrete surrogate of delta-correlation in time, chosen so that the wave
solver's kicked response reproduces the continuous source convolution with
no stray dt factors.

Streams are counter-based: draw (step, realization) is a pure function of
(seed, step, realization), so ensembles are reproducible under any parallel
schedule. Batched drawing with `sample_block` uses per-(seed, step) streams
across all realizations at once; it is reproducible for a fixed ensemble
size.
"""

from dataclasses import dataclass

import numpy as np

from . import phase_space as ps
from .util import keyed_generator, smooth_window

__all__ = [
    "NoiseModel",
    "CorrelationKernel",
    "sample_source",
    "sample_block",
    "gamma_kernel",
    "estimate_power_spectrum",
    "white_noise",
    "flat_spectrum",
    "filtered_white",
    "band_spectrum",
]


@dataclass
class CorrelationKernel:
    """Two-point source covariance Gamma(x, y) as a dense grid kernel."""

    values: np.ndarray  # (n_points, n_points), continuum normalization
    ctx: object

    def min_eigenvalue_ratio(self):
        w = np.linalg.eigvalsh(0.5 * (self.values + self.values.T))
        return float(w.min() / max(w.max(), 1e-300))


class NoiseModel:
    """Spatial power spectrum + seed + time step of the driving process.

    power_spectrum values must be real, nonnegative and even in xi on the
    grid. `p_fn(x..., xi...)` optionally provides the same spectrum as a
    closed form for off-grid evaluation along rays (presets supply it).

    The spatial-mean (k = 0) component is projected out of every draw unless
    `keep_mean=True`: on the torus that mode feels no restoring force, so any
    mean forcing performs a random walk and the long-time correlation does
    not exist. Spectra with support away from xi = 0 are barely touched by
    the projection (it removes only quantization leakage).
    """

    def __init__(self, power_spectrum, seed, dt, p_fn=None, descriptor=None,
                 keep_mean=False):
        p = power_spectrum
        vals = p.values
        if np.iscomplexobj(vals):
            if np.abs(vals.imag).max() > 0:
                raise ValueError("power spectrum must be real")
            vals = vals.real
        if vals.min() < 0:
            raise ValueError("power spectrum must be nonnegative")
        self._check_even(p.ctx, vals)
        self.power_spectrum = ps.Symbol(p.ctx, vals)
        self.ctx = p.ctx
        self.seed = int(seed)
        self.dt = float(dt)
        self.p_fn = p_fn
        self.keep_mean = bool(keep_mean)
        self.descriptor = descriptor or {"preset": "custom", "seed": seed, "dt": dt}
        self._source_matrix = None

    @staticmethod
    def _check_even(ctx, vals):
        # xi -> -xi is index m -> -m about the ascending grid's zero; the
        # lowest (unpaired Nyquist) row is exempt.
        xi_axes = tuple(range(ctx.dim, 2 * ctx.dim))
        flipped = vals
        for ax in xi_axes:
            flipped = np.flip(np.take(flipped, np.arange(1, ctx.n), axis=ax), axis=ax)
        core = vals
        for ax in xi_axes:
            core = np.take(core, np.arange(1, ctx.n), axis=ax)
        if not np.allclose(core, flipped, rtol=0, atol=1e-13 * max(vals.max(), 1e-300)):
            raise ValueError("power spectrum must be even in xi on the grid")

    @property
    def source_matrix(self):
        """Cached factor B: draws are Re[B w]; covariance is prop. to Re(B B^H)."""
        if self._source_matrix is None:
            root = ps.Symbol(self.ctx, np.sqrt(self.power_spectrum.values))
            B = ps.WeylOperator(root).matrix
            if not self.keep_mean:
                B = B - B.mean(axis=0, keepdims=True)
            self._source_matrix = B
        return self._source_matrix

    def p_along(self, x, xi):
        """Spectrum at off-grid phase points (x, xi of shape (..., d))."""
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        if x.shape[-1] != self.ctx.dim:
            raise ValueError("phase points must have shape (..., dim)")
        if self.p_fn is not None:
            return self.p_fn(x, xi)
        return _grid_p_interp(self, x.reshape(-1, self.ctx.dim),
                              xi.reshape(-1, self.ctx.dim)).reshape(x.shape[:-1])

def _grid_p_interp(nm, x, xi):
    """Multilinear interpolation of the spectrum grid (periodic in x); (B, d) in."""
    ctx = nm.ctx
    vals = nm.power_spectrum.values
    idx = []
    wts = []
    for j in range(ctx.dim):
        f = np.mod(x[:, j], ctx.length) / ctx.h
        i0 = np.floor(f).astype(int) % ctx.n
        idx.append((i0, (i0 + 1) % ctx.n))
        wts.append(f - np.floor(f))
    for j in range(ctx.dim):
        f = (xi[:, j] - ctx.xi[0]) / ctx.dxi
        f = np.clip(f, 0, ctx.n - 1)
        i0 = np.floor(f).astype(int)
        i1 = np.minimum(i0 + 1, ctx.n - 1)
        idx.append((i0, i1))
        wts.append(f - np.floor(f))
    out = 0.0
    for corner in np.ndindex(*((2,) * (2 * ctx.dim))):
        w = 1.0
        sel = []
        for axis, c in enumerate(corner):
            sel.append(idx[axis][c])
            w = w * (wts[axis] if c else (1.0 - wts[axis]))
        out = out + w * vals[tuple(sel)]
    return out


def _white_block(nm, step, realization, m=1):
    """Complex standard normal block (n_points, m) for the keyed stream."""
    gen = keyed_generator(nm.seed, step, realization)
    z = gen.standard_normal((2, nm.ctx.n_points, m))
    return (z[0] + 1j * z[1]) / np.sqrt(2.0)


def _source_scale(ctx):
    # variance scale making the flat spectrum 1/(2 pi eps)^d exactly white:
    # E f f^T = Gamma / dt with Gamma = identity / h^d.
    return (2 * np.pi * ctx.eps) ** (ctx.dim / 2.0) / ctx.cell**0.5


def sample_source(nm, step, realization=0):
    """One real source field f_step = Re[B w] * scale / sqrt(dt)."""
    w = _white_block(nm, step, realization, m=1)[:, 0]
    out = (nm.source_matrix @ w).reshape(nm.ctx.grid_shape)
    f = out.real * (_source_scale(nm.ctx) * np.sqrt(2.0 / nm.dt))
    return ps.GridFunction(nm.ctx, f.astype(complex))


def sample_block(nm, step, n_real):
    """Source fields for all realizations of one step, (n_points, n_real) real.

    Uses the per-(seed, step) stream; columns are the ensemble members.
    """
    gen = keyed_generator(nm.seed, step, 0xB10C)
    z = gen.standard_normal((2, nm.ctx.n_points, n_real))
    w = (z[0] + 1j * z[1]) / np.sqrt(2.0)
    out = nm.source_matrix @ w
    return out.real * (_source_scale(nm.ctx) * np.sqrt(2.0 / nm.dt))


def gamma_kernel(nm):
    """Dense source covariance Gamma(x, y) = dt * E[f f^T], symmetrized.

    Exactly the covariance realized by sample_source (operator square), so it
    is PSD by construction; flat white-noise spectra give the discrete delta.
    """
    B = nm.source_matrix
    G = (B @ B.conj().T).real
    G = 0.5 * (G + G.T)
    # dt * E[f f^T] = (2 pi eps)^d / h^d * Re(B B^H): the sqrt(2) in the draw
    # scale cancels the 1/2 from taking the real part.
    scale = _source_scale(nm.ctx) ** 2
    return CorrelationKernel(values=scale * G, ctx=nm.ctx)


def estimate_power_spectrum(realizations, dt=1.0):
    """Ensemble average of Wigner functions of dt-normalized draws."""
    if len(realizations) == 0:
        raise ValueError("need at least one realization")
    ctx = realizations[0].ctx
    acc = np.zeros(ctx.phase_shape)
    for u in realizations:
        if u.ctx != ctx:
            raise ValueError("context mismatch across realizations")
        acc += ps.wigner(u).values
    return ps.Symbol(ctx, acc * (dt / len(realizations)))


# ---------------------------------------------------------------------------
# presets

def flat_spectrum(ctx, amplitude, seed, dt):
    """Constant spectrum of the given amplitude."""
    sym = ps.Symbol.constant(ctx, float(amplitude))
    desc = {"preset": "flat", "amplitude": amplitude, "seed": seed, "dt": dt}
    return NoiseModel(sym, seed, dt, p_fn=_const_fn(amplitude), descriptor=desc)


def _const_fn(val):
    def f(x, xi):
        return np.full(np.shape(np.asarray(x)[..., 0]), float(val))

    return f


def white_noise(ctx, seed, dt):
    """Delta-correlated source: p = 1 / (2 pi eps)^d, Gamma = delta(x - y)."""
    amp = (2 * np.pi * ctx.eps) ** (-ctx.dim)
    nm = flat_spectrum(ctx, amp, seed, dt)
    nm.descriptor = {"preset": "white", "seed": seed, "dt": dt}
    return nm


def filtered_white(ctx, seed, dt, cutoff=0.5):
    """Delta-correlated source band-limited by the solver's source profile.

    The spectrum is the white level 1/(2 pi eps)^d times the raised-cosine
    low-pass in |xi| / (eps k_nyquist), with the zero mode removed: the
    spatial mean feels no restoring force, so driving it would make the field
    non-stationary (its variance grows without bound at any attenuation).
    Pair with greens(band_limit=nm.k_profile) for like-for-like comparisons.
    """
    from .wavesim import _lowpass_profile

    amp = (2 * np.pi * ctx.eps) ** (-ctx.dim)
    k_nyq = np.pi / ctx.h

    def k_profile(s):
        out = _lowpass_profile(np.asarray(s, dtype=float), cutoff)
        return np.where(np.asarray(s) < 0.5 / ctx.n, 0.0, out)

    def p_fn(x, xi):
        xi = np.asarray(xi, dtype=float)
        s = np.linalg.norm(xi, axis=-1) / (ctx.eps * k_nyq)
        return amp * k_profile(s)

    mesh = ctx.phase_mesh()
    xi_pts = np.stack(mesh[ctx.dim:], axis=-1)
    x_pts = np.stack(mesh[: ctx.dim], axis=-1)
    vals = p_fn(x_pts, xi_pts)
    desc = {"preset": "filtered-white", "cutoff": cutoff, "seed": seed, "dt": dt}
    nm = NoiseModel(ps.Symbol(ctx, vals), seed, dt, p_fn=p_fn, descriptor=desc)
    nm.k_profile = k_profile
    return nm


def band_spectrum(ctx, seed, dt, amplitude=1.0, x_support=None, xi_band=None,
                  soft_x=None, soft_xi=None):
    """Smooth bump in x times an even band in |xi|.

    x_support : (lo, hi) spatial window per axis (None = whole domain); in 2-D
        the window applies to the first axis.
    xi_band : (lo, hi) band of |xi| (two symmetric intervals in 1-D, an
        annulus in 2-D). None = low-pass up to the grid's band edge.

    Transition widths default to a fraction of the window width so the
    spectrum is a fixed smooth function of (x, xi), independent of grid and
    eps choices.
    """
    if soft_x is None:
        soft_x = 0.25 * (x_support[1] - x_support[0]) if x_support else 0.1 * ctx.length
    if soft_xi is None:
        soft_xi = 0.3 * (xi_band[1] - xi_band[0]) if xi_band else 0.3 * abs(ctx.xi[0])

    def p_fn(x, xi):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        xx = x[..., 0]
        absxi = np.linalg.norm(xi, axis=-1)
        out = np.full(np.shape(xx), float(amplitude))
        if x_support is not None:
            out = out * smooth_window(np.mod(xx, ctx.length), x_support[0], x_support[1], soft_x)
        if xi_band is not None:
            out = out * smooth_window(absxi, xi_band[0], xi_band[1], soft_xi)
        return out

    mesh = ctx.phase_mesh()
    x_pts = np.stack(mesh[: ctx.dim], axis=-1)
    xi_pts = np.stack(mesh[ctx.dim:], axis=-1)
    vals = p_fn(x_pts, xi_pts)
    desc = {
        "preset": "band", "amplitude": amplitude, "x_support": x_support,
        "xi_band": xi_band, "soft_x": soft_x, "soft_xi": soft_xi,
        "seed": seed, "dt": dt,
    }
    return NoiseModel(ps.Symbol(ctx, vals), seed, dt, p_fn=p_fn, descriptor=desc)
