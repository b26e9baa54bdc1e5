"""Two-point correlation estimation: empirical long-time averages and the
exact Green's-function quadrature that they converge to.

The empirical estimator anchors the time integral (1/T) int u_A(t) u_B(t - tau) dt
on a central window of the record and reads the lagged partner from margin
samples on either side. Anchoring matters: it makes C_{A,B}(-tau) and
C_{B,A}(tau) genuinely different finite-T estimates (they use different edge
data), so their agreement is a real stationarity check rather than an
algebraic identity.

The exact quadrature evaluates C(tau) = int_0^inf ds <G(s+tau, A, .) , Gamma
G(s, B, .)> with both Green's fields computed by the same discrete solver
(sources at A and B only, by reciprocity of the discrete operator), so
cross-validation against the empirical estimate is limited only by ensemble
noise and the truncation of the s integral.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from . import wavesim
from .noise import gamma_kernel

__all__ = [
    "CorrelationRecord",
    "empirical_correlation",
    "exact_correlation",
    "correlation_derivative",
]

S_HORIZON_FACTOR = 8.0    # truncate the stationary integral at this many T_att
BURN_IN_FACTOR = 5.0      # default burn-in in units of T_att


@dataclass
class CorrelationRecord:
    """C_{A,B}(tau) on a symmetric lag grid with provenance."""

    tau: np.ndarray
    values: np.ndarray
    provenance: str            # empirical | exact | semiclassical | derived
    pair: tuple = None         # (A, B) positions
    window_t: float = None     # averaging window length (empirical)
    ensemble: int = 1
    dt: float = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.tau = np.asarray(self.tau, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.tau.shape != self.values.shape:
            raise ValueError("tau and values must align")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("correlation record contains non-finite values")

    def reversed(self):
        """The record of C(-tau) (equivalently, the pair swapped, by stationarity)."""
        return CorrelationRecord(
            tau=self.tau.copy(), values=self.values[::-1].copy(),
            provenance=self.provenance, pair=(self.pair[1], self.pair[0]) if self.pair else None,
            window_t=self.window_t, ensemble=self.ensemble, dt=self.dt,
            meta=dict(self.meta),
        )

    def window(self, lo, hi, signed=False):
        """Values restricted to lo <= tau <= hi (or lo <= |tau| <= hi)."""
        t = self.tau if signed else np.abs(self.tau)
        mask = (t >= lo) & (t <= hi)
        return self.tau[mask], self.values[mask]

    def resample(self, tau_grid):
        vals = np.interp(tau_grid, self.tau, self.values)
        return CorrelationRecord(
            tau=np.asarray(tau_grid, dtype=float), values=vals,
            provenance=self.provenance, pair=self.pair, window_t=self.window_t,
            ensemble=self.ensemble, dt=self.dt, meta=dict(self.meta),
        )


def _lag_count(tau_max, dt):
    return int(round(tau_max / dt))


def empirical_correlation(traces_a, traces_b, dt, tau_max, burn_in=0.0,
                          pair=None):
    """Correlation from time series: anchored lagged products, ensemble mean.

    traces_a, traces_b : (nt,) or (n_real, nt) arrays sampled at dt.
    burn_in : leading record time discarded before anything is used.

    The record after burn-in must be at least (2 + margin share) * tau_max
    long; practically, >= 10 * tau_max for trustworthy averages.
    """
    a = np.atleast_2d(np.asarray(traces_a, dtype=float))
    b = np.atleast_2d(np.asarray(traces_b, dtype=float))
    if a.shape != b.shape:
        raise ValueError("trace arrays must have the same shape")
    n_burn = int(round(burn_in / dt))
    n_lag = _lag_count(tau_max, dt)
    a = a[:, n_burn:]
    b = b[:, n_burn:]
    nt = a.shape[1]
    n_anchor = nt - 2 * n_lag
    if n_anchor < 8 * n_lag:
        raise ValueError(
            "record too short: need length >= burn_in + 10 * tau_max "
            f"(anchor window {n_anchor} samples vs {n_lag} lags)"
        )
    lags = np.arange(-n_lag, n_lag + 1)
    vals = np.zeros(len(lags))
    for m in range(a.shape[0]):
        anchor = a[m, n_lag:n_lag + n_anchor]
        # valid-mode convolution with the reversed partner trace yields
        # sum_i anchor[i] * b[n_lag + i - ell] at slot n_lag + ell
        vals += fftconvolve(anchor, b[m, ::-1], mode="valid")
    vals /= a.shape[0] * n_anchor
    return CorrelationRecord(
        tau=lags * dt, values=vals, provenance="empirical", pair=pair,
        window_t=n_anchor * dt, ensemble=a.shape[0], dt=dt,
    )


def exact_correlation(medium, nm, ctx, a_pos, b_pos, tau_max, s_horizon=None,
                      dt=None):
    """Stationary correlation by quadrature of the Green's-function formula.

    Needs the full field of both point responses; sources sit at the two
    receivers (discrete reciprocity is exact for raw point sources). The
    infinite time integral is truncated at `s_horizon` (default 8 * T_att,
    from the exponential decay of the response); a tail estimate beyond 1% of
    the result attaches a warning.
    """
    if nm.ctx != ctx:
        raise ValueError("noise model context mismatch")
    if medium.inf_a <= 0:
        raise ValueError("exact correlation needs attenuation (a > 0) to converge")
    t_att = 2.0 / medium.inf_a
    if s_horizon is None:
        s_horizon = S_HORIZON_FACTOR * t_att

    gamma = gamma_kernel(nm).values  # (npts, npts) continuum normalization
    g_a = wavesim.greens(medium, ctx, a_pos, [a_pos], s_horizon + tau_max,
                         dt=dt, band_limit=None, record_full=True)
    g_b = wavesim.greens(medium, ctx, b_pos, [b_pos], s_horizon + tau_max,
                         dt=dt, band_limit=None, record_full=True)
    dt = g_a.dt
    Ua = g_a.full_field          # (nt, npts): G(s, x, A) by reciprocity
    Ub = g_b.full_field
    Vb = Ub @ (gamma.T * ctx.cell**2)   # integral over y of G(s,B,y) Gamma(x,y)

    n_lag = _lag_count(tau_max, dt)
    n_s = Ua.shape[0] - n_lag
    lags = np.arange(-n_lag, n_lag + 1)
    vals = np.zeros(len(lags))
    # C(tau) = dt * sum_s  Ua[s + tau, :] . Vb[s, :]; negative lags via the
    # stationarity relation C_{A,B}(-tau) = C_{B,A}(tau) (sources swapped)
    Va = Ua @ (gamma * ctx.cell**2)
    for k, ell in enumerate(lags):
        if ell >= 0:
            vals[k] = np.sum(Ua[ell:ell + n_s] * Vb[:n_s]) * dt
        else:
            vals[k] = np.sum(Ub[-ell:-ell + n_s] * Va[:n_s]) * dt

    meta = {"s_horizon": s_horizon, "t_att": t_att}
    warnings = []
    # tail bound from the exponential envelope of the integrand
    tail_ratio = float(np.exp(-s_horizon / t_att) / max(1e-300, 1.0 - np.exp(-1.0)))
    scale = np.abs(vals).max()
    if scale > 0:
        tail_abs = np.abs(Ua[n_s - 1] @ (gamma * ctx.cell**2) @ Ub[n_s - 1]) * t_att
        if tail_abs > 0.01 * scale:
            warnings.append(
                f"s-truncation tail estimate {tail_abs:.3e} exceeds 1% of the record"
            )
    meta["warnings"] = warnings
    meta["tail_ratio_bound"] = tail_ratio
    return CorrelationRecord(
        tau=lags * dt, values=vals, provenance="exact",
        pair=(a_pos, b_pos), window_t=None, ensemble=1, dt=dt, meta=meta,
    )


def correlation_derivative(rec):
    """d/dtau of a record: centered differences, one-sided at the ends."""
    tau = rec.tau
    if len(tau) < 3:
        raise ValueError("need at least 3 lags to differentiate")
    dtau = np.diff(tau)
    if np.ptp(dtau) > 1e-12 * dtau[0]:
        raise ValueError("lag grid must be uniform")
    vals = np.gradient(rec.values, tau[1] - tau[0])
    return CorrelationRecord(
        tau=tau.copy(), values=vals, provenance=rec.provenance,
        pair=rec.pair, window_t=rec.window_t, ensemble=rec.ensemble, dt=rec.dt,
        meta={**rec.meta, "derived": "d/dtau"},
    )
