"""Time-domain solver for u_tt + a(x) u_t - div(n grad u) = f on the periodic grid.

The spatial operator is evaluated spectrally in flux form d/dx (n du/dx), so
its dense matrix is symmetric negative semidefinite and sqrt(-L) is well
defined; that is what the half-wave propagators are built from. Time
stepping is explicit leapfrog in kick-drift form with the damping term
treated implicitly pointwise (still explicit overall, second order). Energy
is removed by attenuation only; there are no absorbing boundaries, the
domain is a torus.

Delta-in-time forcing is realized as an area-one single-step kick of u_t.
With the source fields of the noise module scaled by 1/sqrt(dt), the
discrete Duhamel sum then reproduces the continuous Green's-function
convolution with no leftover dt factors; the white-noise acceptance checks
pin this convention end to end.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh, expm

__all__ = [
    "WaveSolver",
    "WaveState",
    "GreensFunction",
    "HalfWaveBasis",
    "greens",
    "band_limited_delta",
]

CFL_CONST = 0.5
MAX_HALFWAVE_N = 512


@dataclass
class WaveState:
    """Leapfrog state: u at step i, du/dt at the preceding half step."""

    u: np.ndarray
    v_half: np.ndarray
    t: float
    i: int

    def copy(self):
        return WaveState(self.u.copy(), self.v_half.copy(), self.t, self.i)


@dataclass
class GreensFunction:
    """Impulse responses recorded at receivers for a point-like source."""

    t: np.ndarray               # (nt,)
    traces: np.ndarray          # (nt, n_rec)
    receivers: np.ndarray       # (n_rec,) or (n_rec, 2) positions (snapped)
    source: object              # source position
    dt: float
    warnings: list = field(default_factory=list)
    full_field: np.ndarray = None   # (nt, n_points) when recorded

    def trace(self, k=0):
        return self.traces[:, k]


class WaveSolver:
    """Leapfrog integrator bound to a medium and a periodic grid."""

    def __init__(self, medium, ctx, dt=None, cfl=CFL_CONST):
        self.medium = medium
        self.ctx = ctx
        if medium.dim != ctx.dim:
            raise ValueError("medium and grid dimensions differ")
        self.n_grid = medium.n_on_grid(ctx)
        self.a_grid = medium.a_on_grid(ctx)
        if self.n_grid.min() <= 0:
            raise ValueError("n must be positive on the grid")
        if self.a_grid.min() < 0:
            raise ValueError("a must be nonnegative on the grid")
        vmax = float(np.sqrt(self.n_grid.max()))
        dt_cfl = cfl * ctx.h / vmax
        if dt is None:
            dt = dt_cfl
        elif dt > dt_cfl * (1 + 1e-12):
            raise ValueError(
                f"dt={dt:g} violates the CFL bound {dt_cfl:g} "
                f"(cfl={cfl} * h / max speed)"
            )
        self.dt = float(dt)
        # damping enters the half-step update as a pointwise rational factor
        ad = 0.5 * self.dt * self.a_grid
        self._damp_num = 1.0 - ad
        self._damp_den = 1.0 / (1.0 + ad)

    # -- spatial operator ----------------------------------------------------

    def apply_l(self, u):
        """div(n grad u), spectral flux form; trailing batch axes broadcast."""
        extra = u.ndim - self.ctx.dim
        n = self.n_grid.reshape(self.n_grid.shape + (1,) * extra)
        out = np.zeros_like(u)
        k1 = 2j * np.pi * np.fft.fftfreq(self.ctx.n, d=self.ctx.h)
        for ax in range(self.ctx.dim):
            shape = [1] * u.ndim
            shape[ax] = self.ctx.n
            k = k1.reshape(shape)
            du = np.fft.ifft(k * np.fft.fft(u, axis=ax), axis=ax).real
            out += np.fft.ifft(k * np.fft.fft(n * du, axis=ax), axis=ax).real
        return out

    def l_matrix(self):
        """Dense symmetric matrix of div(n grad) on flattened grid vectors."""
        npts = self.ctx.n_points
        M = np.empty((npts, npts))
        e = np.zeros(self.ctx.grid_shape)
        flat = e.ravel()
        for j in range(npts):
            flat[j] = 1.0
            M[:, j] = self.apply_l(e).ravel()
            flat[j] = 0.0
        return 0.5 * (M + M.T)

    # -- time stepping ---------------------------------------------------------

    def initial_state(self, u0=None, v0=None):
        shape = self.ctx.grid_shape
        u = np.zeros(shape) if u0 is None else np.asarray(u0, dtype=float).copy()
        v = np.zeros(shape) if v0 is None else np.asarray(v0, dtype=float).copy()
        # back up v to t = -dt/2 at second order
        v_half = v - 0.5 * self.dt * (self.apply_l(u) - self.a_grid * v)
        return WaveState(u=u, v_half=v_half, t=0.0, i=0)

    def step(self, state, f=None):
        """Advance one dt. `f` is the force field over this step (real grid array)."""
        extra = state.u.ndim - self.ctx.dim
        num = self._damp_num.reshape(self._damp_num.shape + (1,) * extra)
        den = self._damp_den.reshape(self._damp_den.shape + (1,) * extra)
        rhs = self.apply_l(state.u)
        if f is not None:
            rhs = rhs + f
        v_new = (num * state.v_half + self.dt * rhs) * den
        u_new = state.u + self.dt * v_new
        if not np.isfinite(u_new.flat[0]) or not np.all(np.isfinite(u_new)):
            raise FloatingPointError("wave field blew up (NaN/Inf); check CFL and inputs")
        return WaveState(u=u_new, v_half=v_new, t=state.t + self.dt, i=state.i + 1)

    def kick(self, state, impulse):
        """Instantaneous area-one-in-time kick: u_t += impulse."""
        out = state.copy()
        out.v_half = out.v_half + np.asarray(impulse, dtype=float)
        return out

    def u_t(self, state):
        """du/dt at integer time, one-sided second-order proxy."""
        rhs = self.apply_l(state.u)
        v_next = (self._damp_num * state.v_half + self.dt * rhs) * self._damp_den
        return 0.5 * (state.v_half + v_next)

    def energy(self, state):
        """Discrete leapfrog energy invariant (exactly conserved when a = f = 0).

        E = 1/2 |v_half|^2 - 1/2 <L u_prev, u> with u_prev = u - dt*v_half;
        equals the physical energy up to O(dt^2).
        """
        u_prev = state.u - self.dt * state.v_half
        cross = -np.sum(self.apply_l(state.u) * u_prev) * self.ctx.cell
        kin = np.sum(state.v_half**2) * self.ctx.cell
        return 0.5 * (kin + cross)


def band_limited_delta(ctx, pos, cutoff=0.5):
    """Spatial delta at `pos` band-limited to `cutoff` * Nyquist.

    cutoff=None gives the raw discrete delta (1/h^d at the nearest node),
    which is the exact identity source for the discrete operator; a callable
    cutoff is applied as a radial profile of |k| / k_nyquist. The band-limited
    version is smooth and suits point-response comparisons; the default
    resolves the source at half the grid Nyquist.
    """
    idx = ctx.index_of(pos)
    e = np.zeros(ctx.grid_shape)
    e[idx] = 1.0 / ctx.cell
    if cutoff is None:
        return e
    profile = cutoff if callable(cutoff) else (lambda s: _lowpass_profile(s, cutoff))
    ek = np.fft.fftn(e)
    kmax = np.pi / ctx.h
    k1 = 2 * np.pi * np.fft.fftfreq(ctx.n, d=ctx.h)
    if ctx.dim == 1:
        kabs = np.abs(k1)
    else:
        kabs = np.sqrt(k1[:, None] ** 2 + k1[None, :] ** 2)
    ek = ek * profile(kabs / kmax)
    return np.fft.ifftn(ek).real


def _lowpass_profile(s, cutoff):
    """Raised-cosine low-pass in |k|/k_nyquist: 1 below cutoff, 0 above 1.5*cutoff."""
    hi = min(1.5 * cutoff, 1.0)
    out = np.ones_like(s)
    ramp = (s >= cutoff) & (s < hi)
    out[ramp] = 0.5 * (1 + np.cos(np.pi * (s[ramp] - cutoff) / (hi - cutoff)))
    out[s >= hi] = 0.0
    return out


def greens(medium, ctx, y_src, receivers, t_max, dt=None, band_limit=0.5,
           record_full=False):
    """Impulse response G(t, receiver, y_src): kick at y_src, record receivers.

    Off-grid receivers snap to the nearest node (recorded as a warning).
    `band_limit` is the source cutoff as a fraction of grid Nyquist (None for
    the raw discrete delta).
    """
    solver = WaveSolver(medium, ctx, dt=dt)
    dt = solver.dt
    warnings = []
    recs = np.atleast_1d(np.asarray(receivers, dtype=float))
    if ctx.dim == 2 and recs.ndim == 1:
        recs = recs[None, :]
    idxs = []
    snapped = []
    for r in recs:
        idx = ctx.index_of(r)
        idxs.append(idx)
        node = (np.array(idx) * ctx.h) if ctx.dim == 2 else np.array([idx * ctx.h])
        if np.linalg.norm(node - np.atleast_1d(r)) > 1e-9 * ctx.length:
            warnings.append(f"receiver {r} off-grid; snapped to node {node}")
        snapped.append(node if ctx.dim == 2 else node[0])

    state = solver.initial_state()
    # delta(t) delta_src(x) as an area-one force over the first step, the same
    # injection path the stochastic driver uses
    f0 = band_limited_delta(ctx, y_src, cutoff=band_limit) / dt
    n_steps = int(round(t_max / dt))
    nt = n_steps + 1
    traces = np.zeros((nt, len(idxs)))
    full = np.zeros((nt, ctx.n_points)) if record_full else None
    for i in range(1, nt):
        state = solver.step(state, f=f0 if i == 1 else None)
        for k, idx in enumerate(idxs):
            traces[i, k] = state.u[idx]
        if record_full:
            full[i] = state.u.ravel()
    return GreensFunction(
        t=np.arange(nt) * dt, traces=traces, receivers=np.array(snapped),
        source=y_src, dt=dt, warnings=warnings, full_field=full,
    )


def drive_ensemble(medium, ctx, nm, receivers, t_total, dt=None, n_real=1):
    """Drive the wave equation with the noise model; record receiver traces.

    All realizations advance in lockstep as columns of one batched state
    (the per-step noise block is keyed by (seed, step), so a run is
    reproducible for a fixed ensemble size). Returns (t, traces) with traces
    of shape (n_rec, n_real, n_steps), sampled after each step.
    """
    from .noise import sample_block

    solver = WaveSolver(medium, ctx, dt=dt)
    dt = solver.dt
    if abs(nm.dt - dt) > 1e-12 * dt:
        raise ValueError("noise model dt must match the solver dt")
    recs = np.atleast_1d(np.asarray(receivers, dtype=float))
    if ctx.dim == 2 and recs.ndim == 1:
        recs = recs[None, :]
    flat_idx = []
    for r in recs:
        idx = ctx.index_of(r)
        flat_idx.append(np.ravel_multi_index(idx, ctx.grid_shape) if ctx.dim == 2 else idx)
    n_steps = int(round(t_total / dt))
    u = np.zeros(ctx.grid_shape + (n_real,))
    state = WaveState(u=u, v_half=np.zeros_like(u), t=0.0, i=0)
    traces = np.zeros((len(flat_idx), n_real, n_steps))
    for i in range(n_steps):
        f = sample_block(nm, i, n_real).reshape(ctx.grid_shape + (n_real,))
        state = solver.step(state, f=f)
        uf = state.u.reshape(ctx.n_points, n_real)
        for k, j in enumerate(flat_idx):
            traces[k, :, i] = uf[j]
    t = (1 + np.arange(n_steps)) * dt
    return t, traces


class HalfWaveBasis:
    """Eigen-factorization of -div(n grad) on a 1-D grid, and the propagators
    exp(t * (+- i sqrt(-L) - a/2)) built from it.

    With constant attenuation the exponentials are exact in the eigenbasis;
    spatially varying attenuation falls back to scaling-and-squaring on the
    non-normal generator.
    """

    def __init__(self, medium, ctx):
        if ctx.dim != 1:
            raise ValueError("half-wave propagators are 1-D only")
        if ctx.n > MAX_HALFWAVE_N:
            raise ValueError(f"dense eigensolve limited to n <= {MAX_HALFWAVE_N}")
        self.ctx = ctx
        self.medium = medium
        solver = WaveSolver(medium, ctx)
        negL = -solver.l_matrix()
        w, V = eigh(negL)
        if w.min() < -1e-10 * max(w.max(), 1.0):
            raise RuntimeError(
                f"-div(n grad) has a negative eigenvalue {w.min():.3e}: "
                "inconsistent discretization"
            )
        self.mu = np.clip(w, 0.0, None)
        self.omega = np.sqrt(self.mu)
        self.V = V
        a = medium.a_on_grid(ctx)
        self.a_grid = a
        self.a_const = float(a.flat[0]) if np.ptp(a) < 1e-14 else None

    def l0_matrix(self):
        """Op of sqrt(n)|xi|: eps * sqrt(-L) as a dense matrix."""
        return (self.V * (self.ctx.eps * self.omega)) @ self.V.T

    def l0_pinv(self):
        inv = np.zeros_like(self.omega)
        mask = self.omega > 1e-12
        inv[mask] = 1.0 / (self.ctx.eps * self.omega[mask])
        return (self.V * inv) @ self.V.T

    def propagators(self, t):
        """(Omega_plus(t), Omega_minus(t)) as dense matrices."""
        if self.a_const is not None:
            phase = np.exp(1j * self.omega * t)
            damp = np.exp(-0.5 * self.a_const * t)
            Vp = self.V.astype(complex)
            om_p = damp * ((Vp * phase) @ Vp.T)
            om_m = damp * ((Vp * phase.conj()) @ Vp.T)
            return om_p, om_m
        sq = (self.V * self.omega) @ self.V.T
        gen_p = 1j * sq - 0.5 * np.diag(self.a_grid)
        om_p = expm(t * gen_p)
        om_m = expm(t * (gen_p.conj()))
        return om_p, om_m
