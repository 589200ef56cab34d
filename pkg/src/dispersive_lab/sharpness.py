"""Extremal data, explicit lower-bound constants and Jacobian bounds.

Along the line ``x = y t`` a mode ``xi`` oscillates in time with frequency

    P(xi) = y xi + |xi|^a.

Between ``-y^(1/(a-1))`` and 0 the map ``P`` folds over the critical point
``xi1 = -(y/a)^(1/(a-1))``, where it reaches ``-(a-1)|xi1|^a``.  Writing
``P + (a-1)|xi1|^a = +-(eta - xi1)^2`` unfolds it; the Jacobian of that
substitution and the square-root weighted integral of ``|(g phi)^|^2`` it
produces are the two ingredients of the explicit lower bounds.

The low-frequency part covers data of the form
``u0_hat = |xi|^(-1/2) sgn(xi) |xi|^gamma psi_hat`` for the half-wave flow:
the spatial envelope that controls them, its ``L^q`` behaviour, and the
matching pointwise lower bound.

Transforms use ``f_hat(zeta) = int exp(-i t zeta) f(t) dt``.  Values of the
evolution are the frequency integrals ``S`` of the propagator module.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import gamma as gamma_fn
from scipy.special import jv, roots_legendre

from .errors import (
    DomainError,
    GridTooNarrow,
    HypothesisViolated,
    IoError,
    NonConvergent,
    RangeError,
    SignChange,
)
from .oscillatory import oscillatory_integral
from .propagator import _order, sample_points
from .spectral import FrequencyGrid, SpectralField, _lagrange_interp, fractional_integral

NORM_RTOL = 1e-10
MASS_RTOL = 1e-6
QUAD_RTOL = 1e-11
SERIES_CUT = 1e-3
MIN_POINTS = 10_000
SHELL_LEVELS = 64

_GL16 = roots_legendre(16)
_GL32 = roots_legendre(32)


def _integrate(f: Callable, lo: float, hi: float, breakpoints=(), singular=(), rtol: float = QUAD_RTOL) -> float:
    """Non-oscillatory adaptive quadrature on a finite interval."""
    if not hi > lo:
        return 0.0
    zero = lambda x: np.zeros_like(x)
    res = oscillatory_integral(
        f,
        zero,
        zero,
        lo,
        hi,
        breakpoints=[b for b in breakpoints if lo < b < hi],
        singular=[s for s in singular if lo <= s <= hi],
        rtol=rtol,
        atol=1e-300,
    )
    return float(res.value.real)


def _power_weighted(f: Callable, a: float, lo: float, hi: float, rtol: float = QUAD_RTOL) -> float:
    """``int_lo^hi |x|^(a-1) f(x) dx`` on one side of 0, in ``u = |x|^a``.

    The substitution absorbs the weight (``|x|^(a-1) dx = du / a``), which
    removes the singularity at 0 for ``a < 1``.
    """
    if not hi > lo:
        return 0.0
    sgn = -1.0 if hi <= 0 else 1.0
    u0, u1 = sorted((abs(lo) ** a, abs(hi) ** a))
    g = lambda u: f(sgn * u ** (1.0 / a)) / a
    return _integrate(g, u0, u1, singular=[0.0] if u0 == 0 else [], rtol=rtol)


def _gl_nodes(lo: float, hi: float, panels: int, rule=_GL16):
    u, w = rule
    edges = np.linspace(lo, hi, panels + 1)
    h = 0.5 * np.diff(edges)
    nodes = (0.5 * (edges[:-1] + edges[1:]))[:, None] + h[:, None] * u
    return nodes.ravel(), (h[:, None] * w).ravel()


# --------------------------------------------------------------------------
# the fold of P and its Jacobian
# --------------------------------------------------------------------------

def _excess(a: float, r: np.ndarray) -> np.ndarray:
    """``(1 + r)^a - 1 - a r`` without cancellation near ``r = 0``."""
    r = np.asarray(r, dtype=float)
    out = np.empty_like(r)
    small = np.abs(r) < SERIES_CUT
    with np.errstate(divide="ignore"):
        out[~small] = np.expm1(a * np.log1p(r[~small])) - a * r[~small]
    rs = r[small]
    acc, c = np.zeros_like(rs), a
    for k in range(2, 8):
        c *= (a - k + 1) / k
        acc += c * rs**k
    out[small] = acc
    return out


def _rel_power(b: float, r: np.ndarray) -> np.ndarray:
    """``(1 + r)^b - 1``."""
    with np.errstate(divide="ignore"):
        return np.expm1(b * np.log1p(r))


@dataclass(frozen=True)
class JacobianSpec:
    """Fold geometry of ``P(xi) = y xi + |xi|^a`` for ``a != 1``, ``y > 0``.

    The Jacobian is ``d xi / d eta`` of the unfolding substitution for
    ``a > 1`` and ``|xi|^(a-1) d xi / d eta`` for ``0 < a < 1``.  The radicand
    for ``a < 1`` is ``(1-a)|xi1|^a - y xi - |xi|^a``.
    """

    a: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "a", _order(self.a))
        if not (np.isfinite(self.y) and self.y > 0):
            raise DomainError("the Jacobian needs y > 0")
        object.__setattr__(self, "y", float(self.y))

    @property
    def xi1(self) -> float:
        return -((self.y / self.a) ** (1.0 / (self.a - 1.0)))

    @property
    def Xi1(self) -> float:
        """``(a-1)|xi1|^a``; negative for ``a < 1``."""
        return (self.a - 1.0) * abs(self.xi1) ** self.a

    @property
    def depth(self) -> float:
        """Distance from 0 to the extreme value of ``P`` on the fold."""
        return abs(self.Xi1)

    @property
    def left(self) -> float:
        """Far end ``-y^(1/(a-1))`` of the fold interval, where ``P = 0``."""
        return -(self.y ** (1.0 / (self.a - 1.0)))

    @property
    def limit_at_xi1(self) -> float:
        a, x = self.a, abs(self.xi1)
        if a > 1:
            return float(np.sqrt(2.0) * (a * (a - 1) * x ** (a - 2)) ** -0.5)
        return float(np.sqrt(2.0 * x**a / (a * (1 - a))))

    def _offset(self, xi: np.ndarray) -> np.ndarray:
        x1 = abs(self.xi1)
        return (np.abs(xi) - x1) / x1

    def radicand(self, xi) -> np.ndarray:
        """``P(xi) + (a-1)|xi1|^a`` (``a > 1``) or its negative (``a < 1``)."""
        xi = np.asarray(xi, dtype=float)
        g = _excess(self.a, self._offset(xi))
        return abs(self.xi1) ** self.a * (g if self.a > 1 else -g)

    @property
    def statement_endpoint(self) -> float:
        """Endpoint named as the minimiser by the lemma's case list."""
        a = self.a
        if a > 1:
            return 0.0 if a >= 2 else self.left
        return 0.0 if a >= 0.5 else self.left

    @property
    def monotone_endpoint(self) -> float:
        """Endpoint implied by the sign of the derivative on the interval."""
        a = self.a
        if a > 1:
            return self.left if a >= 2 else 0.0
        return 0.0 if a >= 0.5 else self.left


def jacobian_eval(spec: JacobianSpec, xi):
    """Jacobian of the unfolding substitution on ``[-y^(1/(a-1)), 0]``.

    Evaluated in the relative offset ``r = (|xi| - |xi1|)/|xi1|``, in which
    both the radicand and the denominator vanish linearly or quadratically
    at ``xi1``; the removable singularity there takes its limit value.

    Raises
    ------
    DomainError
        Outside the closed fold interval.
    """
    arr = np.asarray(xi, dtype=float)
    lo = spec.left
    slack = 1e-12 * abs(lo)
    if not np.all(np.isfinite(arr)) or np.any((arr < lo - slack) | (arr > slack)):
        raise DomainError("xi must lie in the fold interval [-y^(1/(a-1)), 0]")
    x = np.clip(arr, lo, 0.0)
    a, y = spec.a, spec.y
    r = spec._offset(x)
    g = _excess(a, r)
    scale = 2.0 * abs(spec.xi1) ** (a / 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        if a > 1:
            val = scale * np.sqrt(np.maximum(g, 0.0)) / (y * _rel_power(a - 1, r))
        else:
            val = scale * np.sqrt(np.maximum(-g, 0.0)) / (a * _rel_power(1 - a, r))
        val = np.sign(r) * val
    val = np.where(r == 0, spec.limit_at_xi1, val)
    return float(val) if np.ndim(xi) == 0 else val


def endpoint_formula(spec: JacobianSpec, xi: float) -> float:
    """Reference closed forms of the Jacobian at the two endpoints.

    For ``0 < a < 1`` at ``xi = 0`` the reference power of ``a`` is
    ``(a-2)/(2(a-1))``; direct evaluation gives ``(2-3a)/(2(a-1))``, so the
    two differ by ``a^2``.
    """
    a, y = spec.a, spec.y
    e = a / (2 * (a - 1))
    if xi == 0.0:
        if a > 1:
            return float(2 * np.sqrt(a - 1) * a**-e * y ** (e - 1))
        return float(2 * np.sqrt(1 - a) * a ** ((a - 2) / (2 * (a - 1))) * y**e)
    if xi == spec.left:
        if a > 1:
            return float(2 / np.sqrt(a - 1) * a**-e * y ** (e - 1))
        return float(2 / np.sqrt(1 - a) * a**-e * y**e)
    raise DomainError("closed forms exist only at the endpoints")


@dataclass(frozen=True)
class JacobianMin:
    """Minimum of the Jacobian and its comparison with both endpoint predictions."""

    a: float
    y: float
    value: float
    argmin: float
    predicted: float
    predicted_value: float
    formula_value: float
    monotone: float
    monotone_value: float

    @property
    def at_predicted(self) -> bool:
        return abs(self.value - self.predicted_value) <= 1e-8 * abs(self.predicted_value)

    @property
    def at_monotone(self) -> bool:
        return abs(self.value - self.monotone_value) <= 1e-8 * abs(self.monotone_value)


def jacobian_min(spec: JacobianSpec, points: int = MIN_POINTS) -> JacobianMin:
    """Grid minimisation over the fold interval with bounded local refinement.

    ``predicted`` is the endpoint named by the lemma's case list and
    ``monotone`` the one implied by its derivative sign analysis; the
    caller decides which comparison to enforce.
    """
    xs = np.linspace(spec.left, 0.0, int(points))
    vals = jacobian_eval(spec, xs)
    i = int(np.argmin(vals))
    lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, xs.size - 1)]
    res = minimize_scalar(
        lambda s: jacobian_eval(spec, s),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-14 * abs(spec.left)},
    )
    value, argmin = min((float(vals[i]), float(xs[i])), (float(res.fun), float(res.x)))
    p, m = spec.statement_endpoint, spec.monotone_endpoint
    return JacobianMin(
        spec.a,
        spec.y,
        value,
        argmin,
        p,
        jacobian_eval(spec, p),
        endpoint_formula(spec, p),
        m,
        jacobian_eval(spec, m),
    )


def write_jacobian_csv(path, rows: Sequence[JacobianMin], header_lines: Sequence[str] = ()) -> None:
    """Write ``a,y,argmin_xi,min_value,endpoint_formula_value`` rows."""
    try:
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["a", "y", "argmin_xi", "min_value", "endpoint_formula_value"])
            for r in rows:
                wr.writerow([f"{v:.16e}" for v in (r.a, r.y, r.argmin, r.value, r.formula_value)])
    except OSError as exc:
        raise IoError(str(exc)) from exc


# --------------------------------------------------------------------------
# extremal data
# --------------------------------------------------------------------------

def _window_transform(h: Callable, lo: float, hi: float, zeta: np.ndarray, rate: float) -> np.ndarray:
    """``int_lo^hi exp(-i t zeta) h(t) dt`` with panels sized per frequency band."""
    zeta = np.asarray(zeta, dtype=float)
    out = np.zeros(zeta.shape, dtype=complex)
    flat, res = zeta.ravel(), out.ravel()
    need = (np.abs(flat) + rate) * (hi - lo) / np.pi + 4
    panels = 2 ** np.ceil(np.log2(need)).astype(int)
    for p in np.unique(panels):
        idx = np.nonzero(panels == p)[0]
        t, w = _gl_nodes(lo, hi, int(p))
        wh = w * h(t)
        block = max(1, int(4_000_000 // t.size))
        for s in range(0, idx.size, block):
            sl = idx[s : s + block]
            res[sl] = np.exp(-1j * np.outer(flat[sl], t)) @ wh
    return res.reshape(zeta.shape)


def _probe_band(fn: Callable, T: float, rate: float, rel: float = 1e-24) -> Tuple[float, float]:
    """Interval outside which ``|fn|^2 <= rel * peak``.

    A scan at spacing ``pi/(4T)`` covers the core ``|zeta| <= 8 pi/T + rate``;
    beyond it each side is walked in octaves of 64 samples until three
    consecutive octaves stay below the threshold.
    """
    step = np.pi / (4 * T)
    half = 8 * np.pi / T + rate
    z = np.arange(-half, half + step, step)
    mag = np.abs(fn(z)) ** 2
    peak = mag.max()
    if peak == 0:
        return -step, step
    loud = z[mag > rel * peak]
    ends = []
    for sign, core in ((-1.0, -loud[0]), (1.0, loud[-1])):
        edge, quiet, reach = half, 0, core
        while quiet < 3:
            if edge > 2.0**60 * half:
                raise NonConvergent("the transform of g phi does not decay within the probe range")
            zz = np.linspace(edge, 2 * edge, 65)[1:]
            m = np.abs(fn(sign * zz)) ** 2 > rel * peak
            quiet = 0 if m.any() else quiet + 1
            reach = zz[m].max() if m.any() else reach
            edge *= 2
        ends.append(reach + step)
    return -float(ends[0]), float(ends[1])


def _tabulated(exact: Callable, T: float, band: Tuple[float, float]) -> Callable:
    """Table-backed transform of a function supported in ``[T, 2T]``.

    After demodulation by ``exp(i 1.5 T zeta)`` the transform has
    exponential type ``T/2``; samples at spacing ``pi/(8T)`` (32 per
    oscillation) with 12-point local Lagrange interpolation reproduce it to
    roundoff level.  Points beyond the table use ``exact``.
    """
    c = 1.5 * T
    half = 1.05 * max(abs(band[0]), abs(band[1])) + 32 * np.pi / T
    n = int(2 ** np.ceil(np.log2(2 * half / (np.pi / (8 * T)))))
    table = FrequencyGrid(max(n, 64), half)
    demod = exact(table.xi) * np.exp(1j * c * table.xi)

    def fn(z):
        z = np.asarray(z, dtype=float)
        out = np.empty(z.shape, dtype=complex)
        inside = np.abs(z) <= half - 8 * table.spacing
        out[inside] = np.exp(-1j * c * z[inside]) * _lagrange_interp(table, demod, z[inside], order=12)
        if not np.all(inside):
            out[~inside] = exact(z[~inside])
        return out

    return fn


@dataclass(frozen=True)
class SharpDatum:
    """Datum ``u0_hat = |xi|^(a-1) (g phi)^(y xi + |xi|^a)`` on the line ``x = y t``.

    ``transform`` evaluates ``(g phi)^`` and ``band`` is a frequency
    interval outside which ``|(g phi)^|^2`` is negligible.  Data built from
    a time profile also keep ``g``, ``phi`` and ``T``.
    """

    a: float
    y: float
    transform: Callable = field(compare=False)
    band: Tuple[float, float]
    T: Optional[float] = None
    g: Optional[Callable] = field(default=None, compare=False)
    phi: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "a", _order(self.a))
        if not (np.isfinite(self.y) and self.y > 0):
            raise DomainError("extremal data need y > 0")
        lo, hi = map(float, self.band)
        if not hi > lo:
            raise DomainError("band must be an increasing interval")
        object.__setattr__(self, "band", (lo, hi))

    @classmethod
    def from_profile(cls, a, y: float, g: Callable, phi: Callable, T: float, g_rate: float = 0.0) -> "SharpDatum":
        """Datum from a time profile ``g`` and a cutoff ``phi`` on ``[T, 2T]``.

        Parameters
        ----------
        g : callable
            Vectorised; ``||g||_{L^2(T, 2T)} = 1`` within ``1e-10``.
        phi : callable
            Values in ``[0, 1]``; a ``bounds`` attribute, when present, must
            lie inside ``[T, 2T]``.
        g_rate : float
            Largest frequency carried by ``g``; sizes the time quadrature.
        """
        if not (np.isfinite(T) and T > 0):
            raise DomainError("T must be positive")
        lo, hi = getattr(phi, "bounds", (T, 2 * T))
        if lo < T * (1 - 1e-12) or hi > 2 * T * (1 + 1e-12):
            raise DomainError("phi must be supported in [T, 2T]")
        panels = int(2 ** np.ceil(np.log2(g_rate * T / np.pi + 16)))
        t, w = _gl_nodes(T, 2 * T, panels)
        norm = np.sqrt(np.sum(w * np.abs(g(t)) ** 2))
        if abs(norm - 1.0) > NORM_RTOL:
            raise DomainError(f"g must have unit L2 norm on [T, 2T], got {norm:.15g}")
        pv = np.asarray(phi(t), dtype=float)
        if np.any(pv < -1e-15) or np.any(pv > 1 + 1e-15):
            raise DomainError("phi must take values in [0, 1]")
        h = lambda s: g(s) * phi(s)
        exact = lambda z: _window_transform(h, T, 2 * T, z, g_rate)
        band = _probe_band(exact, T, g_rate)
        return cls(a, y, _tabulated(exact, T, band), band, T, g, phi)

    @classmethod
    def gaussian(cls, a, y: float, center: float = 0.0, width: float = 1.0, amplitude: float = 1.0) -> "SharpDatum":
        """Datum with ``(g phi)^(zeta) = amplitude exp(-(zeta - center)^2 / (2 width^2))``."""
        if not width > 0:
            raise DomainError("width must be positive")
        fn = lambda z: amplitude * np.exp(-0.5 * ((np.asarray(z, dtype=float) - center) / width) ** 2)
        return cls(a, y, fn, (center - 12 * width, center + 12 * width))

    def scaled(self, c: complex) -> "SharpDatum":
        """Datum for ``c g``."""
        fn = self.transform
        return SharpDatum(self.a, self.y, lambda z: c * fn(z), self.band, self.T)

    @property
    def jacobian(self) -> JacobianSpec:
        return JacobianSpec(self.a, self.y)

    def phase(self, xi):
        xi = np.asarray(xi, dtype=float)
        return self.y * xi + np.abs(xi) ** self.a

    def intensity(self, zeta) -> np.ndarray:
        """``|(g phi)^(zeta)|^2``."""
        return np.abs(self.transform(np.asarray(zeta, dtype=float))) ** 2

    def profile(self, xi) -> np.ndarray:
        """``u0_hat``; zero at ``xi = 0`` and where ``P(xi)`` leaves the band."""
        xi = np.asarray(xi, dtype=float)
        P = self.phase(xi)
        keep = (xi != 0) & (P >= self.band[0]) & (P <= self.band[1])
        out = np.zeros(xi.shape, dtype=complex)
        out[keep] = np.abs(xi[keep]) ** (self.a - 1) * self.transform(P[keep])
        return out

    def xi_extent(self) -> Tuple[float, float]:
        """``xi`` range outside which ``P(xi)`` leaves ``band``."""
        zlo, zhi = self.band
        P = lambda x: float(self.phase(x))
        left = self.jacobian.left

        def solve(target, start, direction):
            b = start + direction * max(1.0, abs(start))
            while (P(b) - target) * (P(start) - target) > 0:
                b = start + 2 * (b - start)
            return brentq(lambda x: P(x) - target, min(start, b), max(start, b), xtol=1e-14, rtol=1e-15)

        right = solve(zhi, 0.0, 1.0) if zhi > 0 else 0.0
        if self.a > 1:
            far = solve(zhi, left, -1.0) if zhi > 0 else left
        else:
            far = solve(zlo, left, -1.0) if zlo < 0 else left
        return far, right


def _covered(datum: SharpDatum, X: float) -> Tuple[float, float]:
    """Image of ``[-X, X]`` under ``P``."""
    pts = [-X, X, 0.0]
    if abs(datum.jacobian.xi1) <= X:
        pts.append(datum.jacobian.xi1)
    vals = datum.phase(np.array(pts))
    return float(vals.min()), float(vals.max())


def build_sharp_data(datum: SharpDatum, grid: Optional[FrequencyGrid] = None) -> SpectralField:
    """Sample ``u0_hat`` on a grid and keep it as the exact profile.

    The default grid covers the ``xi`` range on which ``P`` meets the
    significant band of ``(g phi)^`` with a quarter to spare.

    Raises
    ------
    GridTooNarrow
        If more than ``1e-6`` of the ``|(g phi)^|^2`` mass that ``P`` can
        reach falls outside the image of the grid.
    """
    if grid is None:
        far, right = datum.xi_extent()
        grid = FrequencyGrid(2**14, 1.25 * max(abs(far), abs(right), abs(datum.jacobian.left)))
    zlo, zhi = datum.band
    reach_lo = max(zlo, -datum.jacobian.depth) if datum.a > 1 else zlo
    clo, chi = _covered(datum, grid.xi_max)
    total = _integrate(datum.intensity, reach_lo, zhi, breakpoints=[0.0])
    inside = _integrate(datum.intensity, max(reach_lo, clo), min(zhi, chi), breakpoints=[0.0])
    if total > 0 and (total - inside) > MASS_RTOL * total:
        raise GridTooNarrow(f"{(total - inside) / total:.3g} of the transform mass lies outside the grid")
    return SpectralField.from_function(grid, datum.profile)


def constant_Cg(datum: SharpDatum) -> float:
    """Square-root weighted fold integral ``C(g)^2``.

    ``int_0^D zeta^(-1/2) |(g phi)^(zeta - D)|^2 dzeta`` for ``a > 1`` and
    ``int_0^D |(g phi)^(w)|^2 (D - w)^(-1/2) dw`` for ``a < 1``, ``D`` the
    fold depth.  The substitution ``zeta = s^2`` (respectively
    ``w = D - s^2``) removes the endpoint singularity exactly.
    """
    D = datum.jacobian.depth
    F = datum.intensity
    root = np.sqrt(D)
    if datum.a > 1:
        return 2.0 * _integrate(lambda s: F(s * s - D), 0.0, root)
    return 2.0 * _integrate(lambda s: F(D - s * s), 0.0, root)


def fold_integral_xi(datum: SharpDatum) -> float:
    """``C(g)^2`` computed in the original variable across the fold interval."""
    spec = datum.jacobian
    F = lambda x: datum.intensity(datum.phase(x))
    if datum.a > 1:
        f = lambda x: F(x) / jacobian_eval(spec, x)
        return _integrate(f, spec.left, 0.0, breakpoints=[spec.xi1])
    f = lambda x: F(x) / jacobian_eval(spec, x)
    return _power_weighted(f, datum.a, spec.left, spec.xi1) + _power_weighted(f, datum.a, spec.xi1, 0.0)


@dataclass(frozen=True)
class KeysharpReport:
    """Both sides of the change-of-variables lower bound.

    ``exact`` marks the orders ``2`` and ``1/2`` where the bound is an
    identity; then ``rhs`` is evaluated purely in the frequency variable
    ``zeta``.  Otherwise ``rhs`` is the exact part outside the fold plus
    the fold integral times the computed Jacobian minimum.
    """

    lhs: float
    rhs: float
    slack: float
    exact: bool
    holds: bool
    cg_sq: float
    jacobian_min: float
    outside: float


def _is(a: float, b: float) -> bool:
    return abs(a - b) <= 1e-12


def keysharp_both_sides(datum: SharpDatum, tol: float = 1e-6) -> KeysharpReport:
    """Evaluate ``int |xi|^(a-1) |(g phi)^(P(xi))|^2 dxi`` and its lower bound.

    ``holds`` is ``|slack| <= tol * lhs`` at the identity orders and
    ``slack >= -tol * lhs`` elsewhere.
    """
    a, y = datum.a, datum.y
    spec = datum.jacobian
    F = datum.intensity
    FP = lambda x: F(datum.phase(x))
    far, right = datum.xi_extent()
    left, xi1 = spec.left, spec.xi1
    zlo, zhi = datum.band

    cg = constant_Cg(datum)
    jm = jacobian_min(spec).value
    if a > 1:
        weighted = lambda x: np.abs(x) ** (a - 1) * FP(x)
        lhs = _integrate(weighted, far, right, breakpoints=[left, xi1, 0.0])
        coef = y / a
        outside = (
            2 / a * _integrate(F, 0.0, zhi)
            + coef * _integrate(FP, far, left)
            - coef * _integrate(FP, 0.0, right)
        )
    else:
        pieces = [_power_weighted(FP, a, p, q) for p, q in ((far, left), (left, xi1), (xi1, 0.0), (0.0, right))]
        lhs = sum(pieces)
        coef = 1.0
        outside = pieces[0] + pieces[3]

    exact = _is(a, 2.0) or _is(a, 0.5)
    if _is(a, 2.0):
        rhs = _integrate(F, 0.0, zhi) + y / 2 * cg
    elif _is(a, 0.5):
        body = _integrate(lambda z: F(z) / np.sqrt(0.25 + y * np.abs(z)), zlo, zhi, breakpoints=[0.0])
        rhs = body + 2 / np.sqrt(y) * cg
    else:
        rhs = outside + coef * jm * cg
    slack = lhs - rhs
    scale = max(abs(lhs), np.finfo(float).tiny)
    holds = abs(slack) <= tol * scale if exact else slack >= -tol * scale
    return KeysharpReport(lhs, rhs, slack, exact, bool(holds), cg, jm, outside)


@dataclass(frozen=True)
class ChainReport:
    """Quantities of the restricted-norm lower bound along ``x = y t``.

    ``trajectory_norm >= pairing`` by Cauchy-Schwarz, ``pairing`` equals
    ``lhs`` up to quadrature error, and ``lhs >= bound`` with
    ``bound = sqrt(coef * jacobian_min * C(g)^2) * data_norm``.
    """

    trajectory_norm: float
    pairing: float
    lhs: float
    bound: float
    data_norm: float

    @property
    def holds(self) -> bool:
        return self.trajectory_norm >= self.pairing * (1 - 1e-8) and self.pairing >= self.bound * (1 - 1e-6)


def lower_bound_chain(datum: SharpDatum, u0: Optional[SpectralField] = None) -> ChainReport:
    """Check the chain from the restricted norm down to the explicit bound.

    ``data_norm`` is ``(int |xi|^(1-a) |u0_hat|^2 dxi)^(1/2)``, which for
    these data equals ``lhs^(1/2)``.
    """
    if datum.g is None or datum.T is None:
        raise DomainError("the chain needs data built from a time profile")
    u0 = build_sharp_data(datum) if u0 is None else u0
    T = datum.T
    rate = max(abs(v) for v in datum.band)
    # 16-point panels spanning at most two oscillations of the fastest frequency
    panels = int(np.ceil(rate * T / (4 * np.pi))) + 8
    t, w = _gl_nodes(T, 2 * T, panels)
    S = sample_points(u0, datum.a, datum.y * t, t, method="panel")
    norm = float(np.sqrt(np.sum(w * np.abs(S) ** 2)))
    pairing = float(abs(np.sum(w * S * datum.phi(t) * np.conj(datum.g(t)))))
    rep = keysharp_both_sides(datum)
    coef = datum.y / datum.a if datum.a > 1 else 1.0
    data_norm = float(np.sqrt(rep.lhs))
    bound = float(np.sqrt(coef * rep.jacobian_min * rep.cg_sq) * data_norm)
    return ChainReport(norm, pairing, rep.lhs, bound, data_norm)


# --------------------------------------------------------------------------
# low-frequency data of the half-wave flow
# --------------------------------------------------------------------------

def smooth_bump(x):
    """``exp(1 - 1/(1 - x^2))`` on ``|x| < 1``, zero elsewhere."""
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 1
    out = np.zeros(x.shape)
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - x[inside] ** 2))
    return out


def _shell_nodes(zmax: float):
    """Positive nodes on dyadic shells ``[2^-(k+1), 2^-k]``, ``k < 64``."""
    u, w = _GL16
    nodes, weights = [], []
    for k in range(SHELL_LEVELS):
        lo, hi = 2.0 ** -(k + 1), 2.0**-k
        pieces = int(np.ceil(zmax * (hi - lo) / (np.pi / 2)))
        x, wx = _gl_nodes(lo, hi, max(pieces, 1))
        nodes.append(x)
        weights.append(wx)
    return np.concatenate(nodes), np.concatenate(weights)


@dataclass(frozen=True)
class LowFreqDatum:
    """``u0_hat = |xi|^(-1/2) sgn(xi) |xi|^gamma psi_hat(xi)``.

    ``psi_hat`` must vanish for ``|xi| >= 1``; ``gamma > -1/4`` keeps the
    ``H^(1/4)`` norm finite.
    """

    gamma: float
    psi_hat: Callable = field(default=smooth_bump, compare=False)

    def __post_init__(self):
        g = float(self.gamma)
        if not (np.isfinite(g) and g > -0.25):
            raise RangeError(f"gamma must exceed -1/4, got {self.gamma}")
        object.__setattr__(self, "gamma", g)
        probe = np.concatenate([np.linspace(1.0, 4.0, 257), -np.linspace(1.0, 4.0, 257)])
        if np.any(np.abs(self.psi_hat(probe)) > 0):
            raise DomainError("psi_hat must vanish for |xi| >= 1")

    def profile(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        nz = xi != 0
        out = np.zeros(xi.shape, dtype=complex)
        ax = np.abs(xi[nz])
        out[nz] = ax ** (self.gamma - 0.5) * np.sign(xi[nz]) * self.psi_hat(xi[nz])
        return out

    def spatial(self, z) -> np.ndarray:
        """``|D|^(1/2) H u0`` in space: ``(-i / 2 pi) int e^{i z xi} |xi|^gamma psi_hat dxi``.

        Dyadic shells down to ``2^-64`` with panels that turn the phase by
        at most ``pi/2``; the innermost piece is integrated analytically.
        """
        z = np.atleast_1d(np.asarray(z, dtype=float))
        out = np.zeros(z.shape, dtype=complex)
        g = self.gamma
        tiny = 2.0**-80
        p0 = float(self.psi_hat(np.array([tiny]))[0] + self.psi_hat(np.array([-tiny]))[0])
        inner = p0 * 2.0 ** (-SHELL_LEVELS * (1 + g)) / (1 + g)
        octave = np.ceil(np.log2(np.maximum(np.abs(z), 1.0))).astype(int)
        for m in np.unique(octave):
            idx = np.nonzero(octave == m)[0]
            xi, w = _shell_nodes(2.0 ** float(m))
            wp = w * xi**g * self.psi_hat(xi)
            wm = w * xi**g * self.psi_hat(-xi)
            block = max(1, int(4_000_000 // xi.size))
            for s in range(0, idx.size, block):
                sl = idx[s : s + block]
                ph = np.outer(z[sl], xi)
                out[sl] = np.exp(1j * ph) @ wp + np.exp(-1j * ph) @ wm + inner
        return -1j / (2 * np.pi) * out

    def tail_constants(self) -> Tuple[float, float]:
        """``c`` with ``|spatial(z)| ~ c |z|^-(1+gamma)`` for ``z -> +inf`` and ``-inf``."""
        g = self.gamma
        tiny = 2.0**-80
        pp = complex(self.psi_hat(np.array([tiny]))[0])
        pm = complex(self.psi_hat(np.array([-tiny]))[0])
        rot = np.exp(0.5j * np.pi * (1 + g))
        c = gamma_fn(1 + g) / (2 * np.pi)
        return float(c * abs(pp * rot + pm / rot)), float(c * abs(pp / rot + pm * rot))


def build_lowfreq_data(gamma: float, psi_hat: Callable = smooth_bump, grid: Optional[FrequencyGrid] = None) -> SpectralField:
    """Sampled low-frequency datum with its exact profile.

    The grid sample at ``xi = 0`` is set to zero; the ``|xi|^(gamma-1/2)``
    singularity is resolved by quadratures that use the profile.

    Raises
    ------
    RangeError
        For ``gamma <= -1/4``.
    """
    datum = LowFreqDatum(gamma, psi_hat)
    grid = FrequencyGrid(2**12, 1.0) if grid is None else grid
    return SpectralField.from_function(grid, datum.profile)


@dataclass(frozen=True)
class LqReport:
    """Truncated ``L^q`` behaviour of the spatial envelope ``F``.

    ``shell_exponents[i]`` is the fitted growth rate ``s`` of
    ``int_{2^k <= |x| < 2^(k+1)} F^q ~ 2^(k s)``; ``s < 0`` makes the
    truncated norms Cauchy (convergent), ``s >= 0`` makes them grow like
    ``X^(s/q)`` (divergent).  ``predicted`` is ``1 - q min(1/2 + gamma, 1/2)``.
    ``tail_mismatch`` is the jump between the computed profile and its
    power law at the junction, relative to the peak of ``|spatial|``.
    """

    gamma: float
    q_values: np.ndarray
    shell_exponents: np.ndarray
    predicted: np.ndarray
    convergent: np.ndarray
    windows: np.ndarray
    norms: np.ndarray
    tail_mismatch: float
    nodes: np.ndarray = field(repr=False)
    magnitude: np.ndarray = field(repr=False)
    tail: Tuple[float, float, float, float] = field(repr=False)

    def envelope(self, x) -> np.ndarray:
        """``F(x) = int |spatial(z)| |x - z|^(-1/2) dz`` for ``|x|`` well inside the node range."""
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        Z, p, cp, cm = self.tail
        if np.any(np.abs(xs) > Z / 256):
            raise DomainError("envelope evaluated too close to the end of the node range")
        body = fractional_integral((self.nodes, self.magnitude), 0.5, xs)
        q = p - 0.5
        u, w = _GL32
        v = 0.5 * (1 + u)
        vq = v ** (1 / q)
        r = xs[:, None] / Z * vq
        right = cp * Z**-q / q * (0.5 * w * (1 - r) ** -0.5).sum(axis=1)
        left = cm * Z**-q / q * (0.5 * w * (1 + r) ** -0.5).sum(axis=1)
        out = body + right + left
        return float(out[0]) if np.ndim(x) == 0 else out


def lq_profile(
    datum: LowFreqDatum,
    q_values,
    exact_radius: float = 2.0**12,
    outer_radius: float = 2.0**48,
    x_max: float = 2.0**40,
    fit_shells: int = 8,
) -> LqReport:
    """Classify ``L^q`` membership of the envelope that bounds the evolution.

    The spatial profile is computed by quadrature for ``|z| <= exact_radius``
    and replaced by its leading power law beyond, up to ``outer_radius``;
    the rest of the power law enters ``F`` in closed form.  ``F`` is then
    integrated over dyadic shells of ``|x|`` up to ``x_max``.
    """
    q_values = np.atleast_1d(np.asarray(q_values, dtype=float))
    if np.any(q_values <= 0):
        raise DomainError("q must be positive")
    if not (256 < exact_radius < outer_radius and x_max <= outer_radius / 256):
        raise DomainError("need 256 < exact_radius < outer_radius and x_max <= outer_radius / 256")
    p = 1.0 + datum.gamma
    cp, cm = datum.tail_constants()

    uni = np.arange(-1024, 1025) / 4.0
    per = 32
    mid = 2.0 ** (8 + np.arange(1, per * int(np.log2(exact_radius / 256)) + 1) / per)
    far = 2.0 ** (np.log2(exact_radius) + np.arange(1, per * int(np.log2(outer_radius / exact_radius)) + 1) / per)
    exact_z = np.concatenate([-mid[::-1], uni, mid])
    w_exact = np.abs(datum.spatial(exact_z))
    z = np.concatenate([-far[::-1], exact_z, far])
    mag = np.concatenate([cm * far[::-1] ** -p, w_exact, cp * far**-p])
    ends = np.abs(np.array([w_exact[0] - cm * exact_radius**-p, w_exact[-1] - cp * exact_radius**-p]))
    mismatch = float(np.max(ends) / np.max(w_exact))

    report = LqReport(datum.gamma, q_values, np.array([]), np.array([]), np.array([]), np.array([]), np.array([]),
                      mismatch, z, mag, (float(outer_radius), p, cp, cm))

    K = int(round(np.log2(x_max)))
    xc, wc = _gl_nodes(-1.0, 1.0, 4)
    shells = []
    for k in range(K):
        xk, wk = _gl_nodes(2.0**k, 2.0 ** (k + 1), 2)
        shells.append((np.concatenate([-xk, xk]), np.concatenate([wk, wk])))
    xs = np.concatenate([xc] + [s[0] for s in shells])
    F = report.envelope(xs)
    Fc, rest = F[: xc.size], F[xc.size :].reshape(K, -1)
    wk = np.array([s[1] for s in shells])

    exps, pred, norms = [], [], []
    ks = np.arange(K)
    for q in q_values:
        core = np.sum(wc * Fc**q)
        delta = np.sum(wk * rest**q, axis=1)
        norms.append((core + np.cumsum(delta)) ** (1 / q))
        exps.append(np.polyfit(ks[-fit_shells:], np.log2(delta[-fit_shells:]), 1)[0])
        pred.append(1 - q * min(0.5 + datum.gamma, 0.5))
    exps = np.array(exps)
    return LqReport(
        datum.gamma,
        q_values,
        exps,
        np.array(pred),
        exps < 0,
        2.0 ** (ks + 1),
        np.array(norms),
        mismatch,
        z,
        mag,
        (float(outer_radius), p, cp, cm),
    )


def lq_pointwise_ratios(datum: LowFreqDatum, report: LqReport, times, y_values, u0: Optional[SpectralField] = None) -> np.ndarray:
    """``|S(t, y t^2)| / F(y t^2)`` on the product grid ``times x y_values``."""
    u0 = build_lowfreq_data(datum.gamma, datum.psi_hat) if u0 is None else u0
    tt, yy = np.meshgrid(np.asarray(times, dtype=float), np.asarray(y_values, dtype=float), indexing="ij")
    x = (yy * tt**2).ravel()
    S = sample_points(u0, 0.5, x, tt.ravel(), method="panel")
    return (np.abs(S) / report.envelope(x)).reshape(tt.shape)


# --------------------------------------------------------------------------
# pointwise lower bound at low frequency
# --------------------------------------------------------------------------

def polynomial_bump(M: float, k: int = 4) -> Tuple[Callable, Callable]:
    """``phi(x) = (1 - (M x)^2)^k`` on ``|x| < 1/M`` and its transform.

    ``phi_hat(xi) = sqrt(pi) Gamma(k+1) (2M/xi)^(k+1/2) J_(k+1/2)(xi/M) / M``.
    """
    nu = k + 0.5
    at_zero = np.sqrt(np.pi) * gamma_fn(k + 1) / gamma_fn(k + 1.5) / M

    def phi(x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(M * x) < 1, np.clip(1 - (M * x) ** 2, 0, None) ** k, 0.0)

    def phi_hat(xi):
        s = np.abs(np.asarray(xi, dtype=float)) / M
        small = s < 1e-6
        safe = np.where(small, 1.0, s)
        val = np.sqrt(np.pi) * gamma_fn(k + 1) * (2 / safe) ** nu * jv(nu, safe) / M
        return np.where(small, at_zero, val)

    return phi, phi_hat


def _quadrature_transform(phi: Callable, lo: float, hi: float) -> Callable:
    x, w = _gl_nodes(lo, hi, 32)
    wphi = w * phi(x)

    def phi_hat(xi):
        xi = np.asarray(xi, dtype=float)
        flat = xi.ravel()
        out = np.empty(flat.shape, dtype=complex)
        block = max(1, int(4_000_000 // x.size))
        for s in range(0, flat.size, block):
            out[s : s + block] = np.exp(-1j * np.outer(flat[s : s + block], x)) @ wphi
        return out.reshape(xi.shape)

    return phi_hat


@dataclass(frozen=True)
class LowerBoundReport:
    y: np.ndarray
    x: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def holds(self) -> np.ndarray:
        return self.lhs >= self.rhs

    @property
    def all_hold(self) -> bool:
        return bool(np.all(self.holds))


def lowfreq_lower_bound_check(
    phi: Callable,
    M: float,
    delta: float,
    y_values,
    t: float,
    phi_hat: Optional[Callable] = None,
    c_lower: float = 1.0,
    n: int = 2**14,
) -> LowerBoundReport:
    """Compare ``|S(t, y t^2)|`` with ``(sqrt(pi)/2) int |phi(x)| |y t^2 - x|^(-1/2) dx``.

    ``S`` is the half-wave evolution of ``u0_hat = |xi|^(-1/2) sgn(xi) phi_hat``
    sampled by panel quadrature on a grid reaching ``64 M``.

    Parameters
    ----------
    phi : callable
        Single-signed, supported in ``(-1/M, 1/M)``.
    phi_hat : callable, optional
        Transform of ``phi``; computed by quadrature when omitted (slow for
        large ``t``).
    c_lower : float
        Each ``|y|`` must lie in ``[c_lower / t, delta]``.

    Raises
    ------
    HypothesisViolated
        ``M <= 4``, ``delta + 1/M > pi/64`` or ``|y|`` out of range.
    SignChange
        ``phi`` takes both signs.
    """
    y = np.atleast_1d(np.asarray(y_values, dtype=float))
    if not M > 4:
        raise HypothesisViolated("need M > 4")
    if not (delta > 0 and delta + 1.0 / M <= np.pi / 64):
        raise HypothesisViolated("need 0 < delta and delta + 1/M <= pi/64")
    if not t > 0 or np.any(np.abs(y) < c_lower / t) or np.any(np.abs(y) > delta):
        raise HypothesisViolated("each |y| must lie in [c_lower/t, delta]")
    lo, hi = -1.0 / M, 1.0 / M
    probe = phi(np.linspace(lo, hi, 4097)[1:-1])
    scale = float(np.max(np.abs(probe)))
    x = y * t * t
    if scale == 0:
        zero = np.zeros_like(y)
        return LowerBoundReport(y, x, zero, zero.copy())
    if probe.max() > 1e-14 * scale and probe.min() < -1e-14 * scale:
        raise SignChange("phi changes sign")
    phi_hat = _quadrature_transform(phi, lo, hi) if phi_hat is None else phi_hat

    def profile(xi):
        xi = np.asarray(xi, dtype=float)
        nz = xi != 0
        out = np.zeros(xi.shape, dtype=complex)
        out[nz] = np.abs(xi[nz]) ** -0.5 * np.sign(xi[nz]) * phi_hat(xi[nz])
        return out

    u0 = SpectralField.from_function(FrequencyGrid(n, 64.0 * M), profile)
    lhs = np.abs(sample_points(u0, 0.5, x, np.full_like(x, t), method="panel"))
    rhs = 0.5 * np.sqrt(np.pi) * fractional_integral(lambda z: np.abs(phi(z)), 0.5, x, support=(lo, hi))
    return LowerBoundReport(y, x, lhs, np.asarray(rhs))


def write_sharpness_json(path, y, lhs, rhs, meta: Optional[dict] = None) -> None:
    """Per-``y`` left and right sides with optional metadata."""
    doc = {
        "meta": dict(meta or {}),
        "y": [float(v) for v in np.atleast_1d(y)],
        "lhs": [float(v) for v in np.atleast_1d(lhs)],
        "rhs": [float(v) for v in np.atleast_1d(rhs)],
    }
    try:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise IoError(str(exc)) from exc
