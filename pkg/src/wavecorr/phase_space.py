"""Discrete phase-space calculus on the periodic grid.

Everything lives on the torus [0, L)^d sampled at N points per axis. The
frequency variable is scaled by the small parameter eps, so the xi-grid is
the dual lattice 2*pi*eps/L * {-N/2, ..., N/2 - 1}. Quantization maps a
phase-space symbol a(x, xi) to a linear operator on grid functions through
the symbol's Fourier decomposition: each elementary wave exp(i(p*x + q*xi))
becomes the exact midpoint-symmetrized product of a modulation and a grid
translation. This keeps the discrete calculus exact where the continuum one
is: x-only symbols multiply, xi-only symbols are Fourier multipliers, the
symbol <-> kernel maps are mutual inverses to machine precision, and the
Wigner transform satisfies the quadratic duality and both marginal
identities identically.

Symbols and Wigner functions are stored with x axes first and xi axes last,
xi ascending. Operator matrices act on flattened grid vectors (C order); the
inner product carries the cell volume h^d.
"""

import numpy as np

__all__ = [
    "PhaseSpaceContext",
    "GridFunction",
    "Symbol",
    "WignerFunction",
    "weyl_apply",
    "weyl_matrix",
    "WeylOperator",
    "wigner",
    "kernel_from_symbol",
    "symbol_from_kernel",
    "poisson_bracket",
]

# Dense kernels are O(N^2d); keep them desk-sized.
MAX_DENSE_1D = 512
MAX_DENSE_2D = 64


class PhaseSpaceContext:
    """Grid geometry for phase-space computations.

    Parameters
    ----------
    n : points per axis (power of two)
    length : domain length per axis
    eps : semiclassical scale (wavelength / domain size, dimensionless)
    dim : 1 or 2
    """

    def __init__(self, n, length, eps, dim=1):
        n = int(n)
        if n <= 0 or (n & (n - 1)) != 0:
            raise ValueError(f"n must be a power of two, got {n}")
        if dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.n = n
        self.length = float(length)
        self.eps = float(eps)
        self.dim = dim
        self.h = self.length / n
        if self.h > self.eps * (1 + 1e-12):
            raise ValueError(
                f"grid spacing h={self.h:g} exceeds eps={self.eps:g}; "
                "the grid cannot resolve eps-scale oscillations"
            )
        self.dxi = 2 * np.pi * self.eps / self.length
        self._ints = np.fft.fftfreq(n, d=1.0 / n)  # integer freqs, fft order

    @property
    def x(self):
        return np.arange(self.n) * self.h

    @property
    def xi(self):
        """xi axis, ascending."""
        return self.dxi * np.arange(-self.n // 2, self.n // 2)

    @property
    def grid_shape(self):
        return (self.n,) * self.dim

    @property
    def phase_shape(self):
        return (self.n,) * (2 * self.dim)

    @property
    def n_points(self):
        return self.n**self.dim

    @property
    def cell(self):
        """Spatial cell volume h^d."""
        return self.h**self.dim

    @property
    def dxi_cell(self):
        return self.dxi**self.dim

    def x_mesh(self):
        if self.dim == 1:
            return (self.x,)
        return np.meshgrid(self.x, self.x, indexing="ij")

    def phase_mesh(self):
        """Broadcastable (x..., xi...) arrays over the phase grid."""
        axes = [self.x] * self.dim + [self.xi] * self.dim
        return np.meshgrid(*axes, indexing="ij")

    def index_of(self, pos):
        """Nearest grid node index of a position (scalar in 1-D, pair in 2-D)."""
        if self.dim == 1:
            return int(round(float(pos) / self.h)) % self.n
        p = np.asarray(pos, dtype=float)
        return tuple(int(round(c / self.h)) % self.n for c in p)

    def __eq__(self, other):
        return (
            isinstance(other, PhaseSpaceContext)
            and self.n == other.n
            and self.dim == other.dim
            and self.length == other.length
            and self.eps == other.eps
        )

    def __repr__(self):
        return (
            f"PhaseSpaceContext(n={self.n}, length={self.length}, "
            f"eps={self.eps}, dim={self.dim})"
        )


class _CtxArray:
    """Values plus context; base for grid/phase-space data."""

    def __init__(self, ctx, values, shape, dtype=None):
        values = np.asarray(values)
        if values.shape != shape:
            raise ValueError(f"expected shape {shape}, got {values.shape}")
        if dtype is not None:
            values = values.astype(dtype, copy=False)
        if not np.all(np.isfinite(values)):
            raise ValueError("non-finite values")
        self.ctx = ctx
        self.values = values

    def _check_same_ctx(self, other):
        if self.ctx != other.ctx:
            raise ValueError("context mismatch")


class GridFunction(_CtxArray):
    """Complex function sampled on the spatial grid."""

    def __init__(self, ctx, values):
        super().__init__(ctx, values, ctx.grid_shape, dtype=complex)

    @classmethod
    def from_callable(cls, ctx, f):
        return cls(ctx, f(*ctx.x_mesh()))

    def norm(self):
        """L2 norm with the cell-volume weight."""
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.ctx.cell))

    def inner(self, other):
        """<self, other> = sum self * conj(other) h^d."""
        self._check_same_ctx(other)
        return complex(np.vdot(other.values, self.values) * self.ctx.cell)


class Symbol(_CtxArray):
    """Function on the discrete phase-space grid (x axes first, xi axes last)."""

    def __init__(self, ctx, values):
        values = np.asarray(values)
        dtype = complex if np.iscomplexobj(values) else float
        super().__init__(ctx, values, ctx.phase_shape, dtype=dtype)

    @classmethod
    def from_callable(cls, ctx, f):
        return cls(ctx, f(*ctx.phase_mesh()))

    @classmethod
    def constant(cls, ctx, value):
        return cls(ctx, np.full(ctx.phase_shape, value, dtype=float))


class WignerFunction(_CtxArray):
    """Real phase-space density of a grid function."""

    def __init__(self, ctx, values):
        super().__init__(ctx, values, ctx.phase_shape, dtype=float)

    def marginal_x(self):
        """Integral over xi; equals |u(x)|^2."""
        axes = tuple(range(self.ctx.dim, 2 * self.ctx.dim))
        return self.values.sum(axis=axes) * self.ctx.dxi_cell

    def marginal_xi(self):
        """Integral over x; equals |F_eps u(xi)|^2 (xi ascending)."""
        axes = tuple(range(self.ctx.dim))
        return self.values.sum(axis=axes) * self.ctx.cell


# ---------------------------------------------------------------------------
# internal transforms between symbols, Fourier coefficients and matrices

def _xi_axes(ctx):
    return tuple(range(ctx.dim, 2 * ctx.dim))


def _coeffs_from_symbol(ctx, sym_values):
    """Symbol grid -> Fourier coefficients ahat[kappa..., nu...] (fft order)."""
    a = np.fft.ifftshift(sym_values, axes=_xi_axes(ctx))
    return np.fft.fftn(a) / ctx.n ** (2 * ctx.dim)


def _symbol_from_coeffs(ctx, ahat):
    a = ctx.n ** (2 * ctx.dim) * np.fft.ifftn(ahat)
    return np.fft.fftshift(a, axes=_xi_axes(ctx))


def _half_phase(ctx):
    """exp(i pi sum_axis kappa*nu / N) over (kappa..., nu...), fft order."""
    k = ctx._ints
    if ctx.dim == 1:
        arg = k[:, None] * k[None, :]
    else:
        arg = (
            k[:, None, None, None] * k[None, None, :, None]
            + k[None, :, None, None] * k[None, None, None, :]
        )
    return np.exp(1j * np.pi * arg / ctx.n)


def _matrix_from_coeffs(ctx, ahat):
    """Dense operator matrix (n_points x n_points) from symbol coefficients."""
    n = ctx.n
    g = ahat * _half_phase(ctx)
    # sum over kappa axes -> spatial index j, keeping translation (nu) axes
    g = ctx.n**ctx.dim * np.fft.ifftn(g, axes=tuple(range(ctx.dim)))
    j = np.arange(n)
    if ctx.dim == 1:
        return g[j[:, None], (j[None, :] - j[:, None]) % n]
    # K[(j1,j2),(l1,l2)] = g[j1, j2, (l1-j1)%n, (l2-j2)%n]
    J1, J2, L1, L2 = np.ix_(j, j, j, j)
    K = g[J1, J2, (L1 - J1) % n, (L2 - J2) % n]
    return K.reshape(ctx.n_points, ctx.n_points)


def _coeffs_from_matrix(ctx, M):
    """Inverse of _matrix_from_coeffs for an arbitrary dense matrix."""
    n = ctx.n
    j = np.arange(n)
    if ctx.dim == 1:
        D = M[j[:, None], (j[:, None] + j[None, :]) % n]  # D[j, nu]
        Dhat = np.fft.fft(D, axis=0) / n
        return Dhat * _half_phase(ctx).conj()
    M4 = M.reshape(n, n, n, n)  # [j1, j2, l1, l2]
    J1, J2, N1, N2 = np.ix_(j, j, j, j)
    D = M4[J1, J2, (J1 + N1) % n, (J2 + N2) % n]  # D[j1, j2, nu1, nu2]
    Dhat = np.fft.fftn(D, axes=(0, 1)) / n**2
    return Dhat * _half_phase(ctx).conj()


# ---------------------------------------------------------------------------
# public operations

class WeylOperator:
    """Quantized symbol with a cached dense matrix for repeated application."""

    def __init__(self, sym):
        self.ctx = sym.ctx
        _check_dense_size(sym.ctx)
        ahat = _coeffs_from_symbol(sym.ctx, sym.values)
        self._matrix = _matrix_from_coeffs(sym.ctx, ahat)

    @property
    def matrix(self):
        return self._matrix

    def apply(self, values):
        """Apply to grid values (accepts (..., grid) or stacked (n_points, m))."""
        flat = np.asarray(values).reshape(self.ctx.n_points, -1)
        out = self._matrix @ flat
        return out.reshape(np.asarray(values).shape)


def _check_dense_size(ctx):
    cap = MAX_DENSE_1D if ctx.dim == 1 else MAX_DENSE_2D
    if ctx.n > cap:
        raise ValueError(
            f"dense phase-space operators are limited to n <= {cap} in {ctx.dim}-D"
        )


def weyl_apply(sym, u):
    """Apply the quantization of `sym` to the grid function `u`.

    Exact (to round-off) for symbols depending on x only (multiplication) or
    on xi only (Fourier multiplier).
    """
    if sym.ctx != u.ctx:
        raise ValueError("context mismatch")
    op = WeylOperator(sym)
    return GridFunction(u.ctx, op.apply(u.values))


def weyl_matrix(sym):
    """Dense matrix of the quantized symbol acting on flattened grid vectors."""
    return WeylOperator(sym).matrix


def wigner(u):
    """Wigner function of a grid function.

    Defined through duality: sum(a * W) dx dxi = <Op(a) u, u> holds exactly on
    the grid for every symbol a. The machine-epsilon imaginary residue of the
    transform is dropped.
    """
    ctx = u.ctx
    P = np.outer(u.values.ravel(), u.values.conj().ravel())
    vals = _symbol_from_coeffs(ctx, _coeffs_from_matrix(ctx, P))
    scale = ctx.cell / (2 * np.pi * ctx.eps) ** ctx.dim
    return WignerFunction(ctx, scale * vals.real)


def kernel_from_symbol(p):
    """Correlation kernel K(x, y) on grid x grid from a power-spectrum symbol.

    Uses the convention K(x, y) = integral exp(i (x-y).xi / eps) p((x+y)/2, xi) dxi,
    i.e. K is (2 pi eps)^d times the kernel of the quantization of p. The flat
    symbol 1/(2 pi eps)^d maps to the discrete delta (identity / h^d).
    """
    ctx = p.ctx
    _check_dense_size(ctx)
    M = _matrix_from_coeffs(ctx, _coeffs_from_symbol(ctx, p.values))
    return (2 * np.pi * ctx.eps) ** ctx.dim / ctx.cell * M


def symbol_from_kernel(K, ctx):
    """Exact discrete inverse of kernel_from_symbol."""
    K = np.asarray(K)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError(f"kernel must be square, got shape {K.shape}")
    if K.shape[0] != ctx.n_points:
        raise ValueError("kernel size does not match context grid")
    M = K * ctx.cell / (2 * np.pi * ctx.eps) ** ctx.dim
    vals = _symbol_from_coeffs(ctx, _coeffs_from_matrix(ctx, M))
    if np.abs(vals.imag).max() <= 1e-12 * max(np.abs(vals.real).max(), 1e-300):
        vals = vals.real
    return Symbol(ctx, vals)


def _spectral_derivative(values, axis, period):
    n = values.shape[axis]
    k = 2j * np.pi * np.fft.fftfreq(n, d=period / n)
    k[n // 2] = 0.0  # Nyquist mode has no well-defined odd derivative
    shape = [1] * values.ndim
    shape[axis] = n
    out = np.fft.ifft(np.fft.fft(values, axis=axis) * k.reshape(shape), axis=axis)
    return out.real if not np.iscomplexobj(values) else out


def poisson_bracket(a, b):
    """{a, b} = sum_j (da/dxi_j db/dx_j - da/dx_j db/dxi_j), spectral derivatives.

    Both symbols must be smooth on the grid scale (and effectively periodic in
    xi within the resolved band) for the derivatives to converge.
    """
    if a.ctx != b.ctx:
        raise ValueError("context mismatch")
    ctx = a.ctx
    xi_period = ctx.n * ctx.dxi
    out = np.zeros(ctx.phase_shape, dtype=complex)
    for j in range(ctx.dim):
        ax_x, ax_xi = j, ctx.dim + j
        out += _spectral_derivative(a.values, ax_xi, xi_period) * _spectral_derivative(
            b.values, ax_x, ctx.length
        )
        out -= _spectral_derivative(a.values, ax_x, ctx.length) * _spectral_derivative(
            b.values, ax_xi, xi_period
        )
    if not (np.iscomplexobj(a.values) or np.iscomplexobj(b.values)):
        out = out.real
    return Symbol(ctx, out)
