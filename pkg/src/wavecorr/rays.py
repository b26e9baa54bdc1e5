"""Hamiltonian ray dynamics for H(x, xi) = sqrt(n(x)) |xi|.

The flow integrates Hamilton's equations with a classical fourth-order
one-step method, accumulating attenuation A(t) = int a(x(s)) ds along the
way. All state updates are vectorized over a batch axis so that dense fans
of rays (shooting, phase-space quadrature) advance in lockstep.

Because H is homogeneous of degree one in xi, ray geometry is independent of
the frequency shell; launches are normalized to H = 1.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .medium import PhasePoint

__all__ = ["Ray", "TimeScales", "flow", "shoot", "lyapunov"]

XI_FLOOR = 1e-12          # |xi| below this is a dynamics singularity
H_DRIFT_TOL = 1e-6        # relative Hamiltonian drift triggering step rejection
SHOOT_TOL_FACTOR = 1e-6   # endpoint tolerance = factor * domain size
DEDUP_ANGLE = 1e-3        # rad; closer launch angles count as the same ray


class RaySingularityError(RuntimeError):
    """Raised when a trajectory collapses onto xi = 0."""


@dataclass
class Ray:
    """Time-sampled trajectory of the ray flow with accumulated attenuation."""

    t: np.ndarray            # (nt,)
    x: np.ndarray            # (nt, d)
    xi: np.ndarray           # (nt, d)
    atten: np.ndarray        # (nt,) A(t) = int_0^t a(x(s)) ds
    medium: object = field(repr=False, default=None)

    @property
    def dim(self):
        return self.x.shape[1]

    def hamiltonian(self):
        """H along the samples (constant up to integrator tolerance)."""
        n = self.medium.n(self.x.T)
        return np.sqrt(n) * np.linalg.norm(self.xi, axis=1)

    def endpoint(self):
        return self.x[-1], self.xi[-1]

    def launch_state(self):
        return self.x[0], self.xi[0]

    def to_csv(self, path):
        d = self.dim
        cols = [self.t] + [self.x[:, i] for i in range(d)] \
            + [self.xi[:, i] for i in range(d)] + [self.atten]
        header = ",".join(
            ["t"] + [f"x{i+1}" for i in range(d)] + [f"xi{i+1}" for i in range(d)] + ["atten"]
        )
        np.savetxt(path, np.column_stack(cols), delimiter=",", header=header,
                   comments="", fmt="%.17g")


@dataclass
class TimeScales:
    """Instability and attenuation time scales of a medium."""

    lyapunov_exponent: float
    t_lyapunov: float
    t_attenuation: float
    converged: bool
    history: np.ndarray = field(repr=False, default=None)


def _rhs(medium, x, xi):
    """Hamilton right-hand side, batched: x, xi of shape (B, d)."""
    n = medium.n(x.T)                      # (B,)
    gn = medium.grad_n(x.T)                # (d, B)
    norm_xi = np.linalg.norm(xi, axis=1)   # (B,)
    if np.any(norm_xi < XI_FLOOR):
        raise RaySingularityError("ray reached xi = 0 (Hamiltonian gradient blow-up)")
    sqrt_n = np.sqrt(n)
    dx = sqrt_n[:, None] * xi / norm_xi[:, None]
    dxi = -(norm_xi / (2.0 * sqrt_n))[:, None] * gn.T
    return dx, dxi


def _step_rk4(medium, x, xi, acc, dt):
    """One RK4 step of (x, xi) with simultaneous quadrature of a(x)."""
    a1 = medium.a(x.T)
    k1x, k1xi = _rhs(medium, x, xi)
    x2 = x + 0.5 * dt * k1x
    a2 = medium.a(x2.T)
    k2x, k2xi = _rhs(medium, x2, xi + 0.5 * dt * k1xi)
    x3 = x + 0.5 * dt * k2x
    a3 = medium.a(x3.T)
    k3x, k3xi = _rhs(medium, x3, xi + 0.5 * dt * k2xi)
    x4 = x + dt * k3x
    a4 = medium.a(x4.T)
    k4x, k4xi = _rhs(medium, x4, xi + dt * k3xi)
    xn = x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
    xin = xi + dt / 6.0 * (k1xi + 2 * k2xi + 2 * k3xi + k4xi)
    accn = acc + dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
    return xn, xin, accn


def flow(medium, z0, t, dt, save_every=1, check_drift=True):
    """Integrate the ray flow from PhasePoint z0 over [0, t]; t < 0 flows backward.

    Samples every `save_every` steps (always including both endpoints). Raises
    if the Hamiltonian drifts beyond tolerance or the ray collapses to xi = 0.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = z0.x[None, :].astype(float).copy()
    xi = z0.xi[None, :].astype(float).copy()
    if np.linalg.norm(xi) < XI_FLOOR:
        raise RaySingularityError("launch point has xi = 0")
    n_steps = max(1, int(round(abs(t) / dt))) if t != 0 else 0
    step = (t / n_steps) if n_steps else 0.0

    ts = [0.0]
    xs = [x[0].copy()]
    xis = [xi[0].copy()]
    accs = [0.0]
    acc = np.zeros(1)
    for i in range(n_steps):
        x, xi, acc = _step_rk4(medium, x, xi, acc, step)
        if (i + 1) % save_every == 0 or i == n_steps - 1:
            ts.append((i + 1) * step)
            xs.append(x[0].copy())
            xis.append(xi[0].copy())
            accs.append(abs(float(acc[0])))
    ray = Ray(
        t=np.array(ts), x=np.array(xs), xi=np.array(xis),
        atten=np.array(accs), medium=medium,
    )
    if check_drift and n_steps:
        H = ray.hamiltonian()
        drift = np.abs(H - H[0]).max() / abs(H[0])
        if drift > H_DRIFT_TOL:
            raise RuntimeError(
                f"Hamiltonian drift {drift:.2e} exceeds tolerance {H_DRIFT_TOL:.0e}; "
                "reduce dt"
            )
    return ray


def unit_launch(medium, x0, direction):
    """xi on the H = 1 shell at x0 pointing along `direction`."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    d = np.atleast_1d(np.asarray(direction, dtype=float))
    d = d / np.linalg.norm(d)
    return d / np.sqrt(medium.n(x0[:, None])[0])


def shoot(medium, b, a, tau, n_launch=72, dt=None, tol=None, domain_size=1.0):
    """Rays from b reaching a in time tau, found by fan search plus refinement.

    Returns a possibly empty list; an empty result means no connecting ray at
    this travel time. Every accepted ray is re-validated by re-integration at
    dt / 10.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    b = np.atleast_1d(np.asarray(b, dtype=float))
    a = np.atleast_1d(np.asarray(a, dtype=float))
    dim = b.size
    if tol is None:
        tol = SHOOT_TOL_FACTOR * domain_size
    if dt is None:
        dt = tau / 400.0

    def endpoint_from_angle(theta_arr):
        if dim == 1:
            dirs = np.sign(np.cos(theta_arr))[:, None]
        else:
            dirs = np.stack([np.cos(theta_arr), np.sin(theta_arr)], axis=1)
        xi0 = dirs / np.sqrt(medium.n(np.broadcast_to(b[:, None], (dim, len(theta_arr)))))[:, None]
        x0 = np.broadcast_to(b, (len(theta_arr), dim)).copy()
        x = x0
        xi = xi0
        acc = np.zeros(len(theta_arr))
        n_steps = max(1, int(round(tau / dt)))
        step = tau / n_steps
        for _ in range(n_steps):
            x, xi, acc = _step_rk4(medium, x, xi, acc, step)
        return x

    if dim == 1:
        thetas = np.array([0.0, np.pi])  # right, left
    else:
        thetas = np.linspace(0.0, 2 * np.pi, n_launch, endpoint=False)
    ends = endpoint_from_angle(thetas)
    miss = np.linalg.norm(ends - a, axis=1)

    accepted_angles = []
    if dim == 1:
        for th, m in zip(thetas, miss):
            if m < tol:
                accepted_angles.append(th)
    else:
        def miss_of(theta):
            return float(np.linalg.norm(endpoint_from_angle(np.array([theta]))[0] - a))

        m_ext = np.concatenate([miss[-1:], miss, miss[:1]])
        for i in range(len(thetas)):
            if not (m_ext[i + 1] <= m_ext[i] and m_ext[i + 1] <= m_ext[i + 2]):
                continue
            lo = thetas[i] - 2 * np.pi / n_launch
            hi = thetas[i] + 2 * np.pi / n_launch
            res = minimize_scalar(miss_of, bounds=(lo, hi), method="bounded",
                                  options={"xatol": 1e-13})
            if res.fun < tol:
                accepted_angles.append(res.x % (2 * np.pi))

    # deduplicate nearby launch angles
    unique = []
    for th in sorted(accepted_angles):
        if all(
            min(abs(th - u), 2 * np.pi - abs(th - u)) > DEDUP_ANGLE for u in unique
        ):
            unique.append(th)

    rays = []
    for th in unique:
        if dim == 1:
            direction = np.array([np.sign(np.cos(th))])
        else:
            direction = np.array([np.cos(th), np.sin(th)])
        xi0 = unit_launch(medium, b, direction)
        ray = flow(medium, PhasePoint(b, xi0), tau, dt)
        fine = flow(medium, PhasePoint(b, xi0), tau, dt / 10.0)
        if np.linalg.norm(fine.x[-1] - a) < 10 * tol:
            rays.append(ray)
    return rays


def lyapunov(medium, z0, horizon, dt=1e-3, delta0=1e-7, renorm_every=200):
    """Largest Lyapunov exponent estimate along the trajectory from z0.

    Two-trajectory method: a shadow ray starts displaced by delta0 in position
    only and is renormalized back to separation delta0 every `renorm_every`
    steps; the exponent is the average log stretching rate. The attenuation
    time reported is the lower-bound estimate 2 / inf a (inf when a = 0).
    """
    x = np.vstack([z0.x, z0.x])
    rng = np.random.default_rng(1234)
    d0 = rng.standard_normal(z0.dim)
    d0 = delta0 * d0 / np.linalg.norm(d0)
    x[1] += d0
    xi = np.vstack([z0.xi, z0.xi])
    acc = np.zeros(2)

    n_steps = max(1, int(round(horizon / dt)))
    log_stretch = 0.0
    estimates = []
    t_elapsed = 0.0
    for i in range(n_steps):
        x, xi, acc = _step_rk4(medium, x, xi, acc, dt)
        if (i + 1) % renorm_every == 0 or i == n_steps - 1:
            sep = np.sqrt(np.sum((x[1] - x[0]) ** 2) + np.sum((xi[1] - xi[0]) ** 2))
            t_elapsed = (i + 1) * dt
            if sep > 0:
                log_stretch += np.log(sep / delta0)
                # rescale shadow back to delta0 along the current offset
                x[1] = x[0] + (x[1] - x[0]) * (delta0 / sep)
                xi[1] = xi[0] + (xi[1] - xi[0]) * (delta0 / sep)
            estimates.append(log_stretch / t_elapsed)

    estimates = np.array(estimates)
    lam = float(estimates[-1])
    half = estimates[len(estimates) // 2:]
    scale = max(abs(lam), 1e-12)
    converged = bool(np.ptp(half) <= 0.2 * scale) if len(half) > 1 else True
    t_att = 2.0 / medium.inf_a if medium.inf_a > 0 else np.inf
    t_lyap = 1.0 / lam if lam > 1e-12 else np.inf
    return TimeScales(lam, t_lyap, t_att, converged, history=estimates)
