"""Discrete Fourier calculus on a symmetric frequency grid.

Conventions
-----------
The transform pair is

    f_hat(xi) = int exp(-i x xi) f(x) dx,
    f(x)      = (1/2pi) int exp(i x xi) f_hat(xi) dxi,

discretised on ``n`` equispaced frequencies ``xi_k = -xi_max + k * spacing``
(``k = 0 .. n-1``) and the matching spatial lattice of period
``2 pi / spacing``.  Frequency integrals are spacing-weighted sums, so the
discrete Parseval identity reads ``sum |f_hat|^2 spacing = 2 pi sum |f|^2 dx``.

A :class:`SpectralField` may also carry ``profile``, a vectorised callable
returning the exact coefficient function.  Quadrature routines that need
values between grid nodes use it when present.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .errors import (
    DomainError,
    GridMismatch,
    IoError,
    MissingTimeDerivative,
    ZeroModeSingular,
)

ZERO_MODE_ATOL = 1e-14
ALIASING_RTOL = 1e-12


# --------------------------------------------------------------------------
# grids and fields
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FrequencyGrid:
    """Symmetric equispaced frequency grid.

    Parameters
    ----------
    n : int
        Number of modes, a power of two with ``n >= 8``.
    xi_max : float
        Half-width; the nodes are ``-xi_max + k * spacing``.
    """

    n: int
    xi_max: float

    def __post_init__(self):
        n = int(self.n)
        if n != self.n or n < 8 or n & (n - 1):
            raise DomainError(f"grid size must be a power of two >= 8, got {self.n}")
        if not np.isfinite(self.xi_max) or self.xi_max <= 0:
            raise DomainError(f"xi_max must be positive, got {self.xi_max}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.xi_max / self.n

    @property
    def xi(self) -> np.ndarray:
        return (np.arange(self.n) - self.n // 2) * self.spacing

    @property
    def zero_index(self) -> int:
        return self.n // 2

    @property
    def dx(self) -> float:
        return np.pi / self.xi_max

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.spacing

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.n) - self.n // 2) * self.dx

    @classmethod
    def from_spacing(cls, spacing: float, n: int) -> "FrequencyGrid":
        return cls(n, 0.5 * n * spacing)


def _frozen(values: np.ndarray) -> np.ndarray:
    arr = np.array(values, dtype=complex, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SpectralField:
    """Fourier coefficients ``u_hat(xi_k)`` on a :class:`FrequencyGrid`.

    ``profile``, when given, is the exact coefficient function.  A positive
    ``sector`` declares that the profile accepts complex arguments and is
    analytic and decaying in ``|arg(+-xi)| <= sector``; contour quadrature
    may then rotate the integration path by up to that angle.
    """

    grid: FrequencyGrid
    coeffs: np.ndarray
    profile: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    sector: float = field(default=0.0, compare=False)

    def __post_init__(self):
        coeffs = _frozen(self.coeffs)
        if coeffs.shape != (self.grid.n,):
            raise GridMismatch(f"expected {self.grid.n} coefficients, got {coeffs.shape}")
        if not np.all(np.isfinite(coeffs)):
            raise DomainError("coefficients must be finite")
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def from_function(cls, grid: FrequencyGrid, fn: Callable, sector: float = 0.0) -> "SpectralField":
        """Sample ``fn`` on the grid and keep it as the exact profile."""
        return cls(grid, fn(grid.xi), profile=fn, sector=sector)

    @classmethod
    def zeros(cls, grid: FrequencyGrid) -> "SpectralField":
        return cls(grid, np.zeros(grid.n, dtype=complex))

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralField":
        """Same grid, new coefficients, profile dropped."""
        return SpectralField(self.grid, coeffs)

    def evaluate(self, xi: np.ndarray) -> np.ndarray:
        """Coefficient function at arbitrary frequencies.

        Uses the exact profile when available and otherwise local
        eight-point Lagrange interpolation of the samples (zero outside the
        grid).
        """
        if self.profile is not None:
            return np.asarray(self.profile(xi), dtype=complex)
        return _lagrange_interp(self.grid, self.coeffs, np.asarray(xi, dtype=float))

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2) * self.grid.spacing))

    def to_spatial(self) -> "SpatialField":
        g = self.grid
        vals = np.fft.fftshift(np.fft.ifft(np.fft.ifftshift(self.coeffs))) * (g.n * g.spacing / (2 * np.pi))
        return SpatialField(g, vals)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _same_grid(self, other)
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _same_grid(self, other)
        return self.with_coeffs(self.coeffs - other.coeffs)

    def scale(self, c: complex) -> "SpectralField":
        return self.with_coeffs(c * self.coeffs)


@dataclass(frozen=True)
class SpatialField:
    """Samples ``u(x_j)`` on the spatial lattice dual to a frequency grid."""

    grid: FrequencyGrid
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.shape != (self.grid.n,):
            raise GridMismatch(f"expected {self.grid.n} samples, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise DomainError("samples must be finite")
        object.__setattr__(self, "values", vals)

    def to_spectral(self) -> SpectralField:
        g = self.grid
        coeffs = np.fft.fftshift(np.fft.fft(np.fft.ifftshift(self.values))) * g.dx
        return SpectralField(g, coeffs)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.dx))


def _same_grid(f: SpectralField, g: SpectralField) -> None:
    if f.grid != g.grid:
        raise GridMismatch("fields live on different grids")


def _lagrange_interp(grid: FrequencyGrid, coeffs: np.ndarray, xi: np.ndarray, order: int = 8) -> np.ndarray:
    h = grid.spacing
    pos = (xi + grid.xi_max) / h
    start = np.clip(np.floor(pos).astype(int) - order // 2 + 1, 0, grid.n - order)
    out = np.zeros(xi.shape, dtype=complex)
    local = pos - start
    for j in range(order):
        basis = np.ones(xi.shape)
        for m in range(order):
            if m != j:
                basis = basis * (local - m) / (j - m)
        out += basis * coeffs[start + j]
    out[(xi < -grid.xi_max) | (xi > grid.xi_max - h)] = 0.0
    return out


def passes_decay_check(f: SpectralField, rtol: float = ALIASING_RTOL) -> bool:
    """True when the modes with the two largest ``|xi|`` are negligible.

    Fields fed to the propagators must satisfy this so that truncation of the
    non-smooth symbol ``|xi|^a`` at the grid edge is harmless.
    """
    xi = np.abs(f.grid.xi)
    edge = xi >= f.grid.xi_max - f.grid.spacing * (1 + 1e-12)
    scale = np.max(np.abs(f.coeffs)) if f.coeffs.size else 0.0
    return bool(np.all(np.abs(f.coeffs[edge]) <= rtol * scale))


def _zero_mode_ok(f: SpectralField, atol: float = ZERO_MODE_ATOL) -> bool:
    c0 = abs(f.coeffs[f.grid.zero_index])
    return c0 <= atol * max(1.0, float(np.max(np.abs(f.coeffs))))


# --------------------------------------------------------------------------
# multipliers and norms
# --------------------------------------------------------------------------


def symbol_power(xi: np.ndarray, order: float) -> np.ndarray:
    """``|xi|^order`` with the value at zero set to 0 (order != 0) or 1."""
    xi = np.asarray(xi, dtype=float)
    if order == 0:
        return np.ones_like(xi)
    out = np.zeros_like(xi)
    nz = xi != 0
    out[nz] = np.abs(xi[nz]) ** order
    return out


def fractional_derivative(f: SpectralField, order: float) -> SpectralField:
    """Apply ``|D|^order``.

    Raises
    ------
    ZeroModeSingular
        If ``order < 0`` and the zero-frequency coefficient is not negligible.
    """
    if order < 0 and not _zero_mode_ok(f):
        raise ZeroModeSingular(f"|D|^{order} needs a vanishing zero mode")
    return f.with_coeffs(f.coeffs * symbol_power(f.grid.xi, order))


def hilbert_transform(f: SpectralField) -> SpectralField:
    """Apply the Hilbert transform, multiplier ``-i sgn(xi)``."""
    return f.with_coeffs(-1j * np.sign(f.grid.xi) * f.coeffs)


class SobolevKind(str, enum.Enum):
    HOMOGENEOUS = "homogeneous"
    INHOMOGENEOUS = "inhomogeneous"


@dataclass(frozen=True)
class SobolevIndex:
    sigma: float
    kind: SobolevKind = SobolevKind.HOMOGENEOUS

    def __post_init__(self):
        object.__setattr__(self, "kind", SobolevKind(self.kind))

    def weight(self, xi: np.ndarray) -> np.ndarray:
        """Norm weight: ``|xi|^(2 sigma)`` or ``(1 + xi^2)^sigma``."""
        if self.kind is SobolevKind.HOMOGENEOUS:
            return symbol_power(xi, 2 * self.sigma)
        return (1.0 + np.asarray(xi, dtype=float) ** 2) ** self.sigma


def is_admissible(a: float, index: SobolevIndex) -> bool:
    """Whether ``(a, sigma, kind)`` is covered by the restricted L2 bounds."""
    s = index.sigma
    half = (1 - a) / 2
    if index.kind is SobolevKind.HOMOGENEOUS:
        if 0 < a < 1:
            return 0 < s <= half
        if a > 1:
            return half <= s < 0
        return False
    return 0 < a < 1 and half <= s < 0.5


def sobolev_norm(f: SpectralField, index: SobolevIndex) -> float:
    """Discrete ``(sum w(xi) |u_hat|^2 spacing)^(1/2)``."""
    if index.kind is SobolevKind.HOMOGENEOUS and index.sigma < 0 and not _zero_mode_ok(f):
        raise ZeroModeSingular("negative homogeneous index needs a vanishing zero mode")
    w = index.weight(f.grid.xi)
    return float(np.sqrt(np.sum(w * np.abs(f.coeffs) ** 2) * f.grid.spacing))


# --------------------------------------------------------------------------
# fractional integral
# --------------------------------------------------------------------------

_GL16 = roots_legendre(16)
_GL8 = roots_legendre(8)


def _gl(a: np.ndarray, b: np.ndarray, rule=_GL16):
    u, w = rule
    mid = 0.5 * (a + b)[:, None]
    half = 0.5 * (b - a)[:, None]
    return (mid + half * u).ravel(), (half * w).ravel()


def _jacobi_side(x: float, length: float, beta: float, side: int, npts: int = 16):
    """Nodes and weights for ``int g(z) |x - z|^-beta`` over one side of x."""
    u, w = roots_jacobi(npts, 0.0, -beta)
    z = x + side * 0.5 * length * (1 + u)
    return z, w * (0.5 * length) ** (1 - beta)


def _callable_fi(g: Callable, beta: float, x: float, lo: float, hi: float, panels: int) -> float:
    h = (hi - lo) / panels
    # geometric grading toward x resolves |x - z|^-beta when x is in or near the support
    d = h * 2.0 ** -np.arange(1, 60)
    d = d[d > 1e-15 * max(1.0, abs(x))]
    extra = np.concatenate([[x], x - d, x + d])
    extra = extra[(extra > lo) & (extra < hi)]
    e = np.unique(np.concatenate([np.linspace(lo, hi, panels + 1), extra]))
    a, b = e[:-1], e[1:]
    left, right = a == x, b == x
    regular = ~(left | right)
    z, w = _gl(a[regular], b[regular])
    total = np.sum(w * np.asarray(g(z), dtype=float) * np.abs(x - z) ** (-beta))
    for aa, bb in zip(a[left], b[left]):
        zz, ww = _jacobi_side(aa, bb - aa, beta, +1)
        total += np.sum(ww * np.asarray(g(zz), dtype=float))
    for aa, bb in zip(a[right], b[right]):
        zz, ww = _jacobi_side(bb, bb - aa, beta, -1)
        total += np.sum(ww * np.asarray(g(zz), dtype=float))
    return float(total)


def fractional_integral_weights(z: np.ndarray, beta: float, x: float) -> np.ndarray:
    """Weights ``w_j`` with ``I_beta g(x) = sum_j w_j g(z_j)`` for piecewise-linear ``g``.

    Panels within two lengths of ``x`` are integrated in closed form against
    the hat functions; farther panels use eight-point Gauss-Legendre.  All
    weights are nonnegative.
    """
    z = np.asarray(z, dtype=float)
    a, b = z[:-1], z[1:]
    h = b - a
    weights = np.zeros_like(z)
    gap = np.maximum(np.maximum(a - x, x - b), 0.0)
    far = gap >= 2 * h

    if np.any(far):
        u, w = _GL8
        t = 0.5 * (1 + u)  # position inside the panel in [0,1]
        af, hf = a[far], h[far]
        zz = af[:, None] + hf[:, None] * t
        kern = np.abs(x - zz) ** (-beta) * (0.5 * w) * hf[:, None]
        idx = np.nonzero(far)[0]
        np.add.at(weights, idx, np.sum(kern * (1 - t), axis=1))
        np.add.at(weights, idx + 1, np.sum(kern * t, axis=1))

    near = ~far
    if np.any(near):
        an, bn, hn = a[near], b[near], h[near]
        u0, u1 = an - x, bn - x
        p = 1.0 - beta

        def prim0(u):
            return np.sign(u) * np.abs(u) ** p / p

        def prim1(u):
            return np.abs(u) ** (p + 1) / (p + 1)

        m0 = prim0(u1) - prim0(u0)
        m1 = prim1(u1) - prim1(u0) - u0 * m0  # int (z - a) |z - x|^-beta dz
        idx = np.nonzero(near)[0]
        np.add.at(weights, idx, m0 - m1 / hn)
        np.add.at(weights, idx + 1, m1 / hn)
    return np.maximum(weights, 0.0)


SampledFunction = Union[Callable, tuple]


def fractional_integral(
    g: SampledFunction,
    beta: float,
    x: Union[float, Sequence[float]],
    support: Optional[tuple] = None,
    panels: int = 64,
):
    """Fractional integral ``I_beta g(x) = int g(z) |x - z|^-beta dz``.

    Parameters
    ----------
    g : callable or (z, values)
        Either a vectorised function together with a finite ``support``
        interval, or samples on increasing nodes (interpolated linearly).
    beta : float
        Order in ``(0, 1)``.
    x : float or array
        Evaluation point(s).

    Notes
    -----
    The integrable singularity is treated with Gauss-Jacobi rules carrying
    the weight ``|x - z|^-beta`` (callable input) or exact product
    integration against hat functions (sampled input).
    """
    if not 0 < beta < 1:
        raise DomainError(f"beta must lie in (0, 1), got {beta}")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if callable(g):
        if support is None:
            raise DomainError("a callable integrand needs a finite support interval")
        lo, hi = map(float, support)
        out = np.array([_callable_fi(g, beta, xv, lo, hi, panels) for xv in xs])
    else:
        zn, vals = (np.asarray(v, dtype=float) for v in g)
        if zn.ndim != 1 or zn.shape != vals.shape or np.any(np.diff(zn) <= 0):
            raise DomainError("sampled input needs strictly increasing nodes and matching values")
        out = np.array([fractional_integral_weights(zn, beta, xv) @ vals for xv in xs])
    return float(out[0]) if np.ndim(x) == 0 else out


# --------------------------------------------------------------------------
# evolution states and vector fields
# --------------------------------------------------------------------------


class StateKind(str, enum.Enum):
    FIRST_ORDER = "first_order"
    SECOND_ORDER = "second_order"


@dataclass(frozen=True)
class EvolutionState:
    """Solution data at a fixed time.

    First-order states solve ``u_t = i |D|^a u`` and derive ``u_t`` from
    ``u``; second-order states carry ``ut`` explicitly.
    """

    kind: StateKind
    u: SpectralField
    time: float = 0.0
    ut: Optional[SpectralField] = None
    a: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", StateKind(self.kind))
        if self.time < 0:
            raise DomainError("time must be nonnegative")
        if self.kind is StateKind.SECOND_ORDER:
            if self.ut is None:
                raise MissingTimeDerivative("second-order state needs ut")
            _same_grid(self.u, self.ut)
        elif self.a is None:
            raise DomainError("first-order state needs its dispersion order a")

    def time_derivative(self) -> SpectralField:
        if self.kind is StateKind.SECOND_ORDER:
            return self.ut
        return self.u.with_coeffs(1j * symbol_power(self.u.grid.xi, self.a) * self.u.coeffs)


class VectorFieldKind(str, enum.Enum):
    DT = "Dt"
    DX = "Dx"
    L = "L"
    OMEGA = "Omega"


@dataclass(frozen=True)
class VectorFieldId:
    id: VectorFieldKind
    dispersion_order: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "id", VectorFieldKind(self.id))
        a = self.dispersion_order
        if a <= 0 or (self.id is VectorFieldKind.L and a == 1):
            raise DomainError(f"invalid dispersion order {a} for {self.id.value}")


def multiply_by_x(f: SpectralField) -> SpectralField:
    """Spectral representation of ``x u(x)`` on the periodic lattice."""
    s = f.to_spatial()
    return SpatialField(f.grid, s.values * f.grid.x).to_spectral()


def derivative_x(f: SpectralField) -> SpectralField:
    return f.with_coeffs(1j * f.grid.xi * f.coeffs)


def apply_vector_field(state: Union[EvolutionState, SpectralField], vf: VectorFieldId) -> SpectralField:
    """Apply ``Dt``, ``Dx``, ``L = t Dt + (x/a) Dx`` or
    ``Omega = x Dt + (t/2) Dx |D|^-1`` to a state.

    A bare :class:`SpectralField` is read as initial data at ``t = 0`` without
    time-derivative information.
    """
    if isinstance(state, SpectralField):
        u, t, dt = state, 0.0, None
    else:
        u, t = state.u, state.time
        dt = state.time_derivative
    kind = vf.id

    if kind is VectorFieldKind.DX:
        return derivative_x(u)
    if kind is VectorFieldKind.OMEGA and not _zero_mode_ok(u):
        raise ZeroModeSingular("Omega contains |D|^-1 and needs zero-mean data")
    if kind is VectorFieldKind.DT:
        if dt is None:
            raise MissingTimeDerivative("Dt needs an evolution state")
        return dt()
    if kind is VectorFieldKind.L:
        out = multiply_by_x(derivative_x(u)).scale(1.0 / vf.dispersion_order)
        if t != 0:
            if dt is None:
                raise MissingTimeDerivative("L at t > 0 needs an evolution state")
            out = out + dt().scale(t)
        return out
    # Omega
    if dt is None:
        raise MissingTimeDerivative("Omega needs an evolution state")
    riesz = u.with_coeffs(1j * np.sign(u.grid.xi) * u.coeffs)
    return multiply_by_x(dt()) + riesz.scale(0.5 * t)


# --------------------------------------------------------------------------
# snapshot files
# --------------------------------------------------------------------------


def write_snapshot(f: SpectralField, path, header_lines: Sequence[str] = ()) -> None:
    """Write ``xi,re,im`` rows with 17 significant digits.

    Optional metadata lines are written first, each prefixed by ``#``.
    """
    data = np.column_stack([f.grid.xi, f.coeffs.real, f.coeffs.imag])
    try:
        with open(path, "w", newline="\n") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            fh.write("xi,re,im\n")
            np.savetxt(fh, data, fmt="%.16e", delimiter=",")
    except OSError as exc:
        raise IoError(str(exc)) from exc


def read_snapshot(path) -> SpectralField:
    """Read a snapshot written by :func:`write_snapshot`.

    Raises
    ------
    DomainError
        If the ``xi`` column is not strictly increasing and equispaced.
    """
    try:
        with open(path) as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
    except OSError as exc:
        raise IoError(str(exc)) from exc
    if not lines or lines[0].strip() != "xi,re,im":
        raise DomainError("snapshot header must be 'xi,re,im'")
    data = np.loadtxt(lines[1:], delimiter=",", ndmin=2)
    xi = data[:, 0]
    steps = np.diff(xi)
    if np.any(steps <= 0):
        raise DomainError("snapshot xi column is not monotone increasing")
    spacing = float(np.mean(steps))
    if not np.allclose(steps, spacing, rtol=1e-9, atol=0):
        raise DomainError("snapshot xi column is not equispaced")
    grid = FrequencyGrid.from_spacing(spacing, len(xi))
    if not np.allclose(grid.xi, xi, rtol=0, atol=1e-9 * grid.xi_max):
        raise DomainError("snapshot xi column does not match a symmetric grid")
    return SpectralField(grid, data[:, 1] + 1j * data[:, 2])
