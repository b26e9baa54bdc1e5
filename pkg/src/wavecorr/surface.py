"""Guided-wave machinery: depth eigenvalue problems, dispersion curves, and
a parametric inversion recovering the depth profile from a dispersion curve.

For a stratified medium n(x, z) varying slowly in the horizontal, the guided
modes obey the depth operator

    L U = -d/dz ( n(z) dU/dz ) + n(z) |xi|^2 U = lambda U,   z in (0, H),

with a free-surface (Neumann, default) or clamped (Dirichlet) condition at
z = 0 and Dirichlet at depth H. Each horizontal station is solved
independently (the slow-x separation), so the inversion below is per
station. The discretization is the standard conservative second-order
scheme with the coefficient at half nodes; eigenvalues converge at O(h^2).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh, eigh_tridiagonal
from scipy.optimize import least_squares

__all__ = [
    "DepthProfile",
    "DispersionCurve",
    "sturm_liouville_modes",
    "dispersion_curve",
    "two_layer_profile",
    "invert_profile",
    "InversionResult",
]

MIN_DEPTH_POINTS = 64


@dataclass
class DepthProfile:
    """n(z) on a uniform depth grid z in [0, H]; z = 0 is the surface."""

    n_values: np.ndarray         # (nz,) samples at z_j = (j + 1/2) h? no: nodes, see grid()
    depth: float
    bc_surface: str = "neumann"  # "neumann" (free surface) or "dirichlet"

    def __post_init__(self):
        self.n_values = np.asarray(self.n_values, dtype=float)
        if self.n_values.ndim != 1 or self.n_values.size < MIN_DEPTH_POINTS:
            raise ValueError(f"need >= {MIN_DEPTH_POINTS} depth samples")
        if self.n_values.min() <= 0:
            raise ValueError("n must be positive")
        if self.depth <= 0:
            raise ValueError("depth must be positive")
        if self.bc_surface not in ("neumann", "dirichlet"):
            raise ValueError("bc_surface must be 'neumann' or 'dirichlet'")

    @property
    def nz(self):
        return self.n_values.size

    @property
    def h(self):
        """Grid step; Dirichlet-Dirichlet keeps all unknowns strictly inside."""
        return self.depth / (self.nz if self.bc_surface == "neumann" else self.nz + 1)

    def grid(self):
        """Unknown-node depths (surface node included only for Neumann)."""
        if self.bc_surface == "neumann":
            return np.arange(self.nz) * self.h
        return (1 + np.arange(self.nz)) * self.h

    @classmethod
    def from_callable(cls, n_fn, depth, nz=256, bc_surface="neumann"):
        h = depth / (nz if bc_surface == "neumann" else nz + 1)
        if bc_surface == "neumann":
            z = np.arange(nz) * h
        else:
            z = (1 + np.arange(nz)) * h
        return cls(np.asarray(n_fn(z), dtype=float), depth, bc_surface)


@dataclass
class DispersionCurve:
    """One eigenvalue branch lambda_m(|xi|) with its wavenumber slope."""

    xi: np.ndarray
    lam: np.ndarray
    dlam_dxi: np.ndarray
    branch: int
    near_degenerate: np.ndarray = None   # flags per wavenumber

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=float)
        self.lam = np.asarray(self.lam, dtype=float)


def _assemble(prof, xi):
    """Stiffness tridiagonal (diag, off) and lumped mass of the depth operator.

    A u = lam M u in conservative second-order form; the Neumann surface node
    carries a half cell, which is what keeps A symmetric.
    """
    nz = prof.nz
    h = prof.h
    n = prof.n_values
    if prof.bc_surface == "neumann":
        n_half = 0.5 * (n[1:] + n[:-1])                   # between nodes j, j+1
        n_half_end = 1.5 * n[-1] - 0.5 * n[-2]            # at (H - h/2)
        flux = np.concatenate([n_half, [n_half_end]])     # upper flux of node j
        diag = np.empty(nz)
        diag[0] = flux[0] / h**2
        diag[1:] = (flux[:-1] + flux[1:]) / h**2
        off = -flux[:-1] / h**2
        mass = np.ones(nz)
        mass[0] = 0.5
        diag = diag + mass * n * xi**2
        return diag, off, mass
    # Dirichlet at both ends: unknowns strictly inside (z_j = (j+1) h)
    n_ext = np.concatenate([[2 * n[0] - n[1]], n, [2 * n[-1] - n[-2]]])
    n_half_lo = 0.5 * (n_ext[:-2] + n_ext[1:-1])
    n_half_hi = 0.5 * (n_ext[1:-1] + n_ext[2:])
    diag = (n_half_lo + n_half_hi) / h**2 + n * xi**2
    off = -n_half_hi[:-1] / h**2
    return diag, off, np.ones(nz)


def sturm_liouville_modes(prof, xi, n_modes=4):
    """Lowest eigenpairs of the depth operator at wavenumber xi.

    Returns (lam, modes, warnings): lam ascending (n_modes,), modes
    (n_modes, nz) normalized to unit L2(0, H) norm in the mass-weighted
    inner product. A mode resolved by fewer than 8 cells per depth
    oscillation produces a warning entry.
    """
    if n_modes >= prof.nz // 4:
        raise ValueError("requested modes exceed discretization validity")
    diag, off, mass = _assemble(prof, float(xi))
    # generalized A u = lam M u via the symmetric rescaling y = M^(1/2) u
    s = np.sqrt(mass)
    lam, vecs = eigh_tridiagonal(diag / mass, off / (s[:-1] * s[1:]),
                                 select="i", select_range=(0, n_modes - 1))
    modes = (vecs / s[:, None]).T
    h = prof.h
    norms = np.sqrt(np.sum(mass[None, :] * modes**2, axis=1) * h)
    modes = modes / norms[:, None]
    warnings = []
    for m in range(n_modes):
        crossings = np.count_nonzero(np.diff(np.signbit(modes[m])))
        if crossings > 0 and prof.nz / max(crossings, 1) < 8:
            warnings.append(f"mode {m} resolved by < 8 cells per oscillation")
    return lam, modes, warnings


def dispersion_curve(prof, xi_grid, branch=0, n_guard=2):
    """lambda_branch over a positive ascending wavenumber grid.

    The group slope d lambda / d|xi| comes from centered differences on the
    given grid; near-degeneracies (gap < 1e-8 lambda) are flagged.
    """
    xi_grid = np.asarray(xi_grid, dtype=float)
    if np.any(xi_grid <= 0) or np.any(np.diff(xi_grid) <= 0):
        raise ValueError("xi grid must be positive ascending")
    lam = np.empty(len(xi_grid))
    flags = np.zeros(len(xi_grid), dtype=bool)
    for i, xi in enumerate(xi_grid):
        vals, _, _ = sturm_liouville_modes(prof, xi, n_modes=branch + 1 + n_guard)
        lam[i] = vals[branch]
        gaps = np.diff(vals)
        if branch < len(gaps) and gaps[branch] < 1e-8 * abs(vals[branch]):
            flags[i] = True
        if branch > 0 and vals[branch] - vals[branch - 1] < 1e-8 * abs(vals[branch]):
            flags[i] = True
    dlam = np.gradient(lam, xi_grid)
    return DispersionCurve(xi=xi_grid, lam=lam, dlam_dxi=dlam, branch=branch,
                           near_degenerate=flags)


def two_layer_profile(theta, depth=1.0, nz=256, bc_surface="neumann",
                      interface_width=None):
    """Profile family: n_top above the interface, n_bottom below.

    theta = (n_top, n_bottom, interface_depth_fraction). The step is smoothed
    over a fixed width (default depth/64, independent of nz so refinement
    studies target one continuum problem); the smoothness also keeps
    finite-difference Jacobians in the interface position meaningful.
    """
    n_top, n_bot, frac = theta
    if interface_width is None:
        interface_width = depth / 64.0
    def n_fn(z):
        blend = 0.5 * (1.0 + np.tanh((z - frac * depth) / interface_width))
        return n_top + (n_bot - n_top) * blend
    return DepthProfile.from_callable(n_fn, depth, nz=nz, bc_surface=bc_surface)


@dataclass
class InversionResult:
    profile: DepthProfile
    theta: np.ndarray
    residual: float
    residual_history: list
    covariance: np.ndarray
    converged: bool
    message: str = ""


def invert_profile(target, family, theta0, bounds=None, n_starts=3,
                   spread=0.15, seed=0, max_nfev=200):
    """Least-squares fit of a parametric profile family to a dispersion curve.

    family(theta) -> DepthProfile; the objective is the relative misfit of
    the branch-`target.branch` curve on target.xi. Multistart around theta0
    guards against local minima; the accepted-iterate history is monotone by
    construction (best-so-far of the trust-region steps). The covariance
    proxy is sigma^2 (J^T J)^{-1} at the best fit.
    """
    theta0 = np.asarray(theta0, dtype=float)

    history = []

    def misfit(theta):
        prof = family(theta)
        curve = dispersion_curve(prof, target.xi, branch=target.branch)
        r = (curve.lam - target.lam) / target.lam  # pointwise relative
        history.append(0.5 * float(r @ r))
        return r

    rng = np.random.default_rng(seed)
    best = None
    for start in range(n_starts):
        th = theta0 if start == 0 else theta0 * (1 + spread * rng.standard_normal(len(theta0)))
        if bounds is not None:
            th = np.clip(th, bounds[0], bounds[1])
        try:
            res = least_squares(
                misfit, th, bounds=bounds if bounds is not None else (-np.inf, np.inf),
                diff_step=1e-4, max_nfev=max_nfev,
            )
        except Exception:
            continue
        if best is None or res.cost < best.cost:
            best = res
    if best is None:
        raise RuntimeError("all inversion starts failed")

    J = best.jac
    dof = max(len(target.xi) - len(theta0), 1)
    sigma2 = 2.0 * best.cost / dof
    try:
        cov = sigma2 * np.linalg.inv(J.T @ J)
    except np.linalg.LinAlgError:
        cov = np.full((len(theta0), len(theta0)), np.nan)
    accepted = list(np.minimum.accumulate(history))
    converged = bool(best.status > 0)
    return InversionResult(
        profile=family(best.x), theta=best.x,
        residual=float(np.sqrt(2.0 * best.cost)), residual_history=accepted,
        covariance=cov, converged=converged,
        message=best.message if not converged else "",
    )
