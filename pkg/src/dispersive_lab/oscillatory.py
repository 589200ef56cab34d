"""Quadrature for oscillatory phase integrals and the kernels built from them.

The engine evaluates ``int exp(i psi(xi)) w(xi) dxi`` on an interval that
may be unbounded.  Panels are first laid out so that the phase turns by at
most ``pi/4`` on each, then refined adaptively with a 7/15-point
Gauss-Kronrod pair.  Infinite tails are replaced by two integration-by-parts
boundary terms; the remaining integral is bounded, and the cut point is moved
outward until that bound is below tolerance.

On top of the engine sit the two-time kernel

    K(t, s) = int exp(-i Psi(xi)) omega(xi) dxi,
    Psi(xi) = y (t^(1/a) - s^(1/a)) xi + (t - s) |xi|^a,

with its split near and away from the stationary point, the weighted norm
of the time-to-frequency operator

    T h(xi) = int exp(-i (y t^(1/a) xi + t |xi|^a)) h(t) dt,

and the odd Fresnel-type kernel of the half-wave flow at low frequency.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import roots_legendre

from .errors import (
    DomainError,
    IoError,
    NoCriticalPoint,
    NonConvergent,
    PreconditionViolated,
)
from .propagator import _order
from .spectral import SobolevIndex, SobolevKind, is_admissible

# Gauss-Kronrod 7/15 abscissae and weights (positive half, last entry is 0)
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
_NODES15 = np.concatenate([-_XGK[:7], [0.0], _XGK[6::-1]])
_WK15 = np.concatenate([_WGK[:7], [_WGK[7]], _WGK[6::-1]])
_WG15 = np.zeros(15)
_WG15[[1, 3, 5]] = _WG[:3]
_WG15[7] = _WG[3]
_WG15[[13, 11, 9]] = _WG[:3]

_GL16 = roots_legendre(16)

MAX_PANEL_PHASE = np.pi / 4
GRADING_LEVELS = 100
MAX_OCTAVE = 40
MAX_PANELS = 4_000_000
CHUNK_PANELS = 1 << 16

# phases are evaluated in extended precision and reduced mod 2 pi, so a
# large phase costs eps_ext |phase| instead of eps |phase| in exp(i phase)
EXT_PHASE = 1e3
_TWO_PI_EXT = 2 * np.arccos(np.longdouble(-1))
_EXT_GAIN = float(np.finfo(np.longdouble).eps / np.finfo(float).eps)


# --------------------------------------------------------------------------
# the quadrature engine
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadResult:
    value: complex
    error: float
    evaluations: int = 0


def _unit_phase(phase: Callable, xl: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """``exp(i phase(x))`` and the absolute phase error it carries.

    Nodes with ``|phase| > EXT_PHASE`` are re-evaluated in extended
    precision and reduced mod 2 pi before conversion.
    """
    eps = np.finfo(float).eps
    p = np.array(np.broadcast_to(phase(xl.astype(float)), xl.shape), dtype=float)
    err = eps * (1.0 + np.abs(p))
    big = np.abs(p) > EXT_PHASE
    if np.any(big):
        pl = np.asarray(phase(xl[big]))
        if pl.dtype == np.longdouble:
            p[big] = np.mod(pl, _TWO_PI_EXT).astype(float)
            err[big] = _EXT_GAIN * eps * (1.0 + np.abs(pl).astype(float))
    return np.exp(1j * p), err


def _gk15(amplitude: Callable, a: np.ndarray, b: np.ndarray, phase: Optional[Callable] = None):
    # chunked so that millions of panels do not hold every node array at once
    if a.size <= CHUNK_PANELS:
        return _gk15_block(amplitude, a, b, phase)
    parts = [_gk15_block(amplitude, a[i:i + CHUNK_PANELS], b[i:i + CHUNK_PANELS], phase)
             for i in range(0, a.size, CHUNK_PANELS)]
    return tuple(np.concatenate(col) for col in zip(*parts))


def _gk15_block(amplitude: Callable, a: np.ndarray, b: np.ndarray, phase: Optional[Callable] = None):
    half = 0.5 * (b - a)
    # nodes in extended precision: rounding x to double moves the phase by eps |x psi'(x)|
    al, bl = a.astype(np.longdouble), b.astype(np.longdouble)
    xl = (0.5 * (al + bl)[:, None] + 0.5 * (bl - al)[:, None] * _NODES15).ravel()
    x = xl.astype(float)
    vals = np.asarray(amplitude(x), dtype=complex)
    if phase is None:
        perr = np.finfo(float).eps
    else:
        unit, perr = _unit_phase(phase, xl)
        vals = vals * unit
        perr = perr.reshape(a.size, 15).max(axis=1)
    vals = vals.reshape(a.size, 15)
    k = (vals @ _WK15) * half
    g = (vals @ _WG15) * half
    # roundoff floor: relative error of exp(i phase) grows with |phase|
    floor = 64 * perr * (np.abs(vals) @ _WK15) * np.abs(half)
    return k, np.abs(k - g), floor


def _adaptive(amplitude: Callable, edges: np.ndarray, rtol: float, atol: float, phase: Optional[Callable] = None, max_rounds: int = 60) -> QuadResult:
    """Globally adaptive bisection of ``exp(i phase) amplitude``; panels at their roundoff floor are final."""
    a, b = edges[:-1], edges[1:]
    length = edges[-1] - edges[0]
    done_val = []
    done_err = 0.0
    # error of panels sitting at their roundoff floor cannot be reduced further
    noise = 0.0
    evals = 0
    for _ in range(max_rounds):
        k, e, floor = _gk15(amplitude, a, b, phase)
        evals += 15 * a.size
        total = sum(done_val) + np.sum(k)
        tol = max(atol, rtol * abs(total))
        at_floor = e <= floor
        accept = (e <= tol * (b - a) / length) | at_floor
        err = done_err + np.sum(e)
        if err <= max(tol, 2 * (noise + np.sum(e[at_floor]))) or np.all(accept):
            return QuadResult(complex(total), float(err), evals)
        done_val.append(np.sum(k[accept]))
        done_err += float(np.sum(e[accept]))
        noise += float(np.sum(e[at_floor & ~(e <= tol * (b - a) / length)]))
        a, b = a[~accept], b[~accept]
        m = 0.5 * (a + b)
        a, b = np.concatenate([a, m]), np.concatenate([m, b])
        order = np.argsort(a, kind="stable")
        a, b = a[order], b[order]
        if a.size > MAX_PANELS:
            break
    raise NonConvergent("adaptive quadrature did not reach its tolerance")


def _graded(p: float, q: float, at_left: bool, at_right: bool) -> np.ndarray:
    k = 2.0 ** -np.arange(1, GRADING_LEVELS + 1)
    pts = [np.array([p, q])]
    if at_left:
        pts.append(p + (q - p) * k)
    if at_right:
        pts.append(q - (q - p) * k)
    return np.unique(np.concatenate(pts))


def _phase_edges(dphase: Callable, p: float, q: float, at_left: bool, at_right: bool, max_phase: float) -> np.ndarray:
    """Panel edges on ``[p, q]`` with at most ``max_phase`` turn per panel."""
    grading = _graded(p, q, at_left, at_right)
    probe = np.unique(np.concatenate([np.linspace(p, q, 4097), grading]))
    inner = probe.copy()
    if at_left:
        inner[0] = grading[1]
    if at_right:
        inner[-1] = grading[-2]
    with np.errstate(all="ignore"):
        rate = np.abs(np.asarray(dphase(inner), dtype=float))
    rate = np.where(np.isfinite(rate), rate, 0.0)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (rate[1:] + rate[:-1]) * np.diff(probe))])
    n = int(np.ceil(cum[-1] / max_phase))
    if n > 1:
        levels = np.linspace(0.0, cum[-1], n + 1)[1:-1]
        cuts = np.interp(levels, cum, probe)
    else:
        cuts = np.array([])
    return np.unique(np.concatenate([grading, cuts]))


def _fd1(h: Callable, x: np.ndarray, d: np.ndarray):
    return (-h(x + 2 * d) + 8 * h(x + d) - 8 * h(x - d) + h(x - 2 * d)) / (12 * d)


def _fd2(h: Callable, x: np.ndarray, d: np.ndarray):
    return (-h(x + 2 * d) + 16 * h(x + d) - 30 * h(x) + 16 * h(x - d) - h(x - 2 * d)) / (12 * d * d)


def _tail(amplitude: Callable, phase: Callable, dphase: Callable, B: float):
    """Two integration-by-parts terms for ``int_B^inf`` and a remainder bound.

    With ``h = w / (i psi')`` the tail equals
    ``-exp(i psi(B)) (h - h' / (i psi'))(B) + int_B^inf exp(i psi) D2``,
    where ``D2 = h'' / (i psi') - h' psi'' / (i psi'^2)``.  The remainder is
    bounded by ``2 max |D2 / psi'|`` over a geometric probe of ``[B, inf)``,
    which is exact for eventually monotone ``|D2 / psi'|``.  Without a
    one-signed phase derivative the tail is dropped and bounded by the
    integral of ``|w|``.
    """
    h = lambda x: amplitude(x) / (1j * dphase(x))
    probe = B * 2.0 ** np.arange(0, 40)
    d = 1e-2 * probe
    dp = dphase(probe)
    if np.any(np.sign(dp) != np.sign(dp[0])) or np.any(dp == 0):
        # no usable phase: drop the tail and bound it by int |w|
        fine = B * np.geomspace(1.0, 2.0**40, 4001)
        mag = np.abs(amplitude(fine))
        return 0j, float(np.trapezoid(mag, fine) + mag[-1] * fine[-1])
    h1 = _fd1(h, probe, d)
    h2 = _fd2(h, probe, d)
    d2p = _fd1(dphase, probe, d)
    rem = h2 / (1j * dp) - h1 * d2p / (1j * dp**2)
    bound = 2.0 * float(np.max(np.abs(rem / dp)))
    corr = -np.exp(1j * phase(B)) * (h(np.array([B]))[0] - h1[0] / (1j * dp[0]))
    return complex(corr), bound


def oscillatory_integral(
    amplitude: Callable,
    phase: Callable,
    dphase: Callable,
    lo: float = -np.inf,
    hi: float = np.inf,
    breakpoints: Sequence[float] = (),
    singular: Sequence[float] = (),
    rtol: float = 1e-11,
    atol: float = 1e-15,
    max_phase: float = MAX_PANEL_PHASE,
) -> QuadResult:
    """Integrate ``exp(i phase) * amplitude`` over ``[lo, hi]``.

    Parameters
    ----------
    amplitude, phase, dphase : callable
        Vectorised; ``phase`` real with derivative ``dphase``.
    lo, hi : float
        Either may be infinite.  On an infinite side the amplitude must
        decay and ``dphase`` must keep one sign far out.
    breakpoints : sequence of float
        Points where the integrand is not smooth (kinks).
    singular : sequence of float
        Integrable singularities; panels are graded geometrically towards
        them and they are never evaluated.
    rtol, atol : float
        Target error ``max(atol, rtol |value|)``.

    Returns
    -------
    QuadResult
        Value, error estimate (panel errors plus certified tail bound) and
        the number of integrand evaluations.
    """
    if not hi > lo:
        raise DomainError("need lo < hi")
    finite = [p for p in list(breakpoints) + list(singular) if np.isfinite(p)]
    scale = max([1.0] + [abs(p) for p in finite] + [abs(v) for v in (lo, hi) if np.isfinite(v)])
    sing = set(float(s) for s in singular)

    def finite_part(p, q):
        cuts = sorted(set([p, q] + [c for c in finite if p < c < q]))
        edges = [
            _phase_edges(dphase, c0, c1, c0 in sing, c1 in sing, max_phase)
            for c0, c1 in zip(cuts[:-1], cuts[1:])
        ]
        return _adaptive(amplitude, np.unique(np.concatenate(edges)), rtol, atol, phase)

    if np.isfinite(lo) and np.isfinite(hi):
        return finite_part(lo, hi)

    # cut points for infinite sides, pushed out until the tail bound is small
    left_inf, right_inf = not np.isfinite(lo), not np.isfinite(hi)
    B = 2.0 * scale
    rough = finite_part(-B if left_inf else lo, B if right_inf else hi)
    target = 0.1 * max(atol, rtol * abs(rough.value))
    mirror_amp = lambda x: amplitude(-x)
    mirror_phase = lambda x: phase(-x)
    mirror_dphase = lambda x: -dphase(-x)
    for _ in range(60):
        corr, bound = 0j, 0.0
        ok = True
        if right_inf:
            c, bd = _tail(amplitude, phase, dphase, B)
            ok &= c is not None
            corr, bound = corr + (c or 0j), bound + bd
        if left_inf:
            c, bd = _tail(mirror_amp, mirror_phase, mirror_dphase, B)
            ok &= c is not None
            corr, bound = corr + (c or 0j), bound + bd
        if ok and bound <= target:
            body = finite_part(-B if left_inf else lo, B if right_inf else hi)
            return QuadResult(body.value + corr, body.error + bound, body.evaluations)
        B *= 2.0
    raise NonConvergent("tail bound could not be certified")


# --------------------------------------------------------------------------
# phase of the two-time kernel
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseSpec:
    """Phase ``y (t^(1/a) - s^(1/a)) xi + (t - s) |xi|^a``."""

    a: float
    y: float
    t: float
    s: float

    def __post_init__(self):
        object.__setattr__(self, "a", _order(self.a))
        if not (self.t > 0 and self.s > 0):
            raise DomainError("t and s must be positive")

    @property
    def f(self) -> float:
        """``(t^(1/a) - s^(1/a)) / (t - s)`` with its diagonal limit."""
        a, t, s = self.a, self.t, self.s
        if t == s:
            return t ** ((1 - a) / a) / a
        return (t ** (1 / a) - s ** (1 / a)) / (t - s)

    def psi(self, xi):
        xi = np.asarray(xi)
        return self.y * (self.t ** (1 / self.a) - self.s ** (1 / self.a)) * xi + (self.t - self.s) * np.abs(xi) ** self.a

    def dpsi(self, xi):
        xi = np.asarray(xi)
        d = self.t - self.s
        return self.y * self.f * d + d * self.a * np.abs(xi) ** (self.a - 1) * np.sign(xi)

    def d2psi(self, xi):
        xi = np.asarray(xi)
        return (self.t - self.s) * self.a * (self.a - 1) * np.abs(xi) ** (self.a - 2)


@dataclass(frozen=True)
class StationaryPoint:
    xi0: float
    residual: float
    tolerance: float


def critical_point(phase: PhaseSpec) -> StationaryPoint:
    """Stationary point ``-(y f / a)^(1/(a-1))``, mirrored for ``y < 0``."""
    if phase.y == 0:
        raise NoCriticalPoint("a phase with y = 0 has no stationary point")
    a = phase.a
    mag = (abs(phase.y) * phase.f / a) ** (1.0 / (a - 1.0))
    xi0 = -np.sign(phase.y) * mag
    res = abs(float(phase.dpsi(xi0)))
    tol = 1e-10 * abs(float(phase.d2psi(xi0)) * xi0)
    if res > tol:
        raise NoCriticalPoint(f"stationarity residual {res:.3e} exceeds {tol:.3e}")
    return StationaryPoint(float(xi0), res, tol)


def split_radius(phase: PhaseSpec, xi0: float, c_prime: float = 1.0) -> float:
    """``min(c' |xi0|^(1 - a/2) / |t - s|^(1/2), |xi0| / 2)``."""
    if c_prime <= 0:
        raise DomainError("c_prime must be positive")
    d = abs(phase.t - phase.s)
    half = abs(xi0) / 2
    if d == 0:
        return half
    return min(c_prime * abs(xi0) ** (1 - phase.a / 2) / np.sqrt(d), half)


def switch_condition(phase: PhaseSpec, c_prime: float = 1.0) -> Tuple[bool, bool]:
    """Both sides of the criterion for the split radius to be ``|xi0|/2``.

    Returns the direct comparison ``|xi0|/2 < c'|xi0|^(1-a/2)/|t-s|^(1/2)``
    and the same statement rewritten as a condition on ``|y|``.
    """
    xi0 = critical_point(phase).xi0
    d = abs(phase.t - phase.s)
    a, f, y = phase.a, phase.f, abs(phase.y)
    e = a / (2 * (1 - a))
    with np.errstate(divide="ignore"):
        direct = abs(xi0) / 2 < c_prime * abs(xi0) ** (1 - a / 2) / np.sqrt(d)
        # |xi0|^(a/2) = (y f / a)^(-e); compare after raising to the power 1/e
        if a < 1:
            closed = y**e > np.sqrt(d) * a**e / (2 * c_prime * f**e)
        else:
            closed = y ** (-e) < 2 * c_prime * (a / f) ** (-e) / np.sqrt(d)
    return bool(direct), bool(closed)


# --------------------------------------------------------------------------
# weights and kernels
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightKind:
    """Weight ``|xi|^(-2 sigma)`` or ``(1 + xi^2)^(-sigma)``."""

    kind: SobolevKind
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "kind", SobolevKind(self.kind))

    def __call__(self, xi):
        xi = np.asarray(xi)
        if self.kind is SobolevKind.HOMOGENEOUS:
            with np.errstate(divide="ignore"):
                return np.abs(xi) ** (-2 * self.sigma)
        return (1 + xi * xi) ** (-self.sigma)

    def admissible(self, a: float) -> bool:
        return is_admissible(a, SobolevIndex(self.sigma, self.kind))

    def integrable(self) -> bool:
        if self.kind is SobolevKind.HOMOGENEOUS:
            return False
        return self.sigma > 0.5

    def singular_at_zero(self) -> bool:
        return self.kind is SobolevKind.HOMOGENEOUS and self.sigma > 0


@dataclass(frozen=True)
class KernelResult:
    K: complex
    near: complex
    far: complex
    eps: float
    xi0: float
    near_bound: float
    far_bound: float
    error: float


def _total_variation(fn: Callable, pts: np.ndarray) -> float:
    v = np.abs(np.diff(fn(pts)))
    return float(np.sum(v[np.isfinite(v)]))


def kernel_K(
    phase: PhaseSpec,
    weight: WeightKind,
    c_prime: float = 1.0,
    rtol: float = 1e-11,
) -> KernelResult:
    """Two-time kernel with its near and far pieces.

    ``near`` integrates over ``|xi - xi0| < eps`` and ``far`` over the rest;
    ``near_bound`` is ``2 eps max omega`` on the near interval and
    ``far_bound`` the integration-by-parts bound ``|omega/Psi'|`` at the two
    inner ends plus the total variation of ``omega/Psi'`` on the far region.
    """
    if phase.t == phase.s:
        # the phase vanishes identically; only integrability matters
        if not weight.integrable():
            raise DomainError("t = s needs an integrable weight")
        whole = kernel_direct(phase, weight, rtol)
        return KernelResult(whole.value, 0j, whole.value, 0.0, float("nan"), 0.0, float("nan"), whole.error)
    if not weight.admissible(phase.a):
        raise DomainError("weight is not admissible for this dispersion order")
    quad = lambda lo, hi: _kernel_quad(phase, weight, lo, hi, rtol)

    if phase.y == 0:
        whole = quad(-np.inf, np.inf)
        return KernelResult(whole.value, 0j, whole.value, 0.0, float("nan"), 0.0, float("nan"), whole.error)

    xi0 = critical_point(phase).xi0
    eps = split_radius(phase, xi0, c_prime)
    lo, hi = xi0 - eps, xi0 + eps
    near = quad(lo, hi)
    left = quad(-np.inf, lo)
    right = quad(hi, np.inf)
    far = left.value + right.value

    grid = np.linspace(lo, hi, 257)
    near_bound = 2 * eps * float(np.max(weight(grid)))
    g = lambda x: np.abs(weight(x) / phase.dpsi(x))
    geo = max(abs(xi0), 1.0) * np.geomspace(1e-12, 1e12, 20001)
    pts_r = np.unique(np.concatenate([hi + geo, [hi]]))
    pts_l = np.unique(np.concatenate([lo - geo, [lo]]))
    far_bound = float(g(lo) + g(hi) + _total_variation(g, pts_l) + _total_variation(g, pts_r))
    return KernelResult(
        near.value + far, near.value, far, float(eps), float(xi0), near_bound, far_bound,
        near.error + left.error + right.error,
    )


def _kernel_quad(phase: PhaseSpec, weight: WeightKind, lo: float, hi: float, rtol: float) -> QuadResult:
    # xi = 0 is graded as a singular point: the weight and |xi|^a may both kink there
    return oscillatory_integral(
        lambda x: weight(x).astype(complex), lambda x: -phase.psi(x), lambda x: -phase.dpsi(x),
        lo, hi, singular=[0.0], rtol=rtol,
    )


def kernel_direct(phase: PhaseSpec, weight: WeightKind, rtol: float = 1e-11) -> QuadResult:
    """The same kernel integrated in one piece over the real line."""
    return _kernel_quad(phase, weight, -np.inf, np.inf, rtol)


# --------------------------------------------------------------------------
# cutoffs and the weighted norm of the time-to-frequency operator
# --------------------------------------------------------------------------

def smooth_step(x):
    """C-infinity step: 0 for ``x <= 0``, 1 for ``x >= 1``."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        p = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        q = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return p / (p + q)


@dataclass(frozen=True)
class CutoffSpec:
    """Plateau bump ``phi(t / T)``: one on ``plateau``, zero off ``support``.

    Both intervals are in units of ``T``; the defaults give the window
    cutoff that is one on ``(1, 2)`` and vanishes off ``(1/2, 5/2)``.
    """

    T: float
    support: Tuple[float, float] = (0.5, 2.5)
    plateau: Tuple[float, float] = (1.0, 2.0)

    def __post_init__(self):
        s0, s1 = self.support
        p0, p1 = self.plateau
        if not (self.T > 0 and s0 < p0 <= p1 < s1):
            raise DomainError("need T > 0 and support strictly containing plateau")

    @property
    def bounds(self) -> Tuple[float, float]:
        return self.support[0] * self.T, self.support[1] * self.T

    def __call__(self, t):
        r = np.asarray(t, dtype=float) / self.T
        s0, s1 = self.support
        p0, p1 = self.plateau
        return smooth_step((r - s0) / (p0 - s0)) * smooth_step((s1 - r) / (s1 - p1))


def _as_callable(g) -> Callable:
    if callable(g):
        return g
    t, v = (np.asarray(z) for z in g)
    re, im = CubicSpline(t, v.real), CubicSpline(t, v.imag)
    return lambda x: np.where((x >= t[0]) & (x <= t[-1]), re(x) + 1j * im(x), 0.0)


class TrajectoryMode(str, enum.Enum):
    INV_A = "inv_a"
    LINEAR = "linear"


def _time_nodes(lo: float, hi: float, panels: int):
    u, w = _GL16
    edges = np.linspace(lo, hi, panels + 1)
    h = 0.5 * np.diff(edges)
    nodes = (0.5 * (edges[:-1] + edges[1:]))[:, None] + h[:, None] * u
    return nodes.ravel(), (h[:, None] * w).ravel()


def time_transform(
    h: Callable,
    a: float,
    y: float,
    xi: np.ndarray,
    support: Tuple[float, float],
    mode: TrajectoryMode = TrajectoryMode.INV_A,
    h_rate: float = 0.0,
    points_per_oscillation: int = 8,
) -> np.ndarray:
    """``int exp(-i (y x(t) xi + t |xi|^a)) h(t) dt`` over ``support``.

    ``x(t)`` is ``t^(1/a)`` or ``t``.  Each frequency gets Gauss-Legendre
    panels resolving the fastest time oscillation of its phase, to which
    ``h_rate`` (the largest frequency carried by ``h``) is added.
    """
    a = _order(a)
    mode = TrajectoryMode(mode)
    xi = np.asarray(xi, dtype=float)
    lo, hi = support
    power = np.abs(xi) ** a
    if mode is TrajectoryMode.INV_A:
        xt = lambda t: t ** (1 / a)
        speed = [y / a * tt ** (1 / a - 1) for tt in (lo, hi)]
    else:
        xt = lambda t: t
        speed = [y, y]
    rate = np.maximum(np.abs(speed[0] * xi + power), np.abs(speed[1] * xi + power)) + h_rate
    need = rate * (hi - lo) / (2 * np.pi) * points_per_oscillation / 16
    panels = 2 ** np.ceil(np.log2(np.maximum(need, 4))).astype(int)
    out = np.zeros(xi.size, dtype=complex)
    for p in np.unique(panels):
        idx = np.nonzero(panels == p)[0]
        t, w = _time_nodes(lo, hi, int(p))
        wh = w * h(t)
        xs = xt(t)
        block = max(1, int(4_000_000 // t.size))
        for s in range(0, idx.size, block):
            sl = idx[s : s + block]
            ph = np.outer(xi[sl], y * xs) + np.outer(power[sl], t)
            out[sl] = np.exp(-1j * ph) @ wh
    return out


@dataclass(frozen=True)
class TNormResult:
    value: float
    rhs: float
    ratio: float
    g_norm_sq: float


def weighted_norm_rhs(a: float, y: float, T: float, sigma: float, g_norm_sq: float) -> float:
    """``|y|^((1-a-2s)/(a-1)) T^((a-1+2s)/a) (1 + |y|^(a/(2(a-1)))) ||g||^2``."""
    y = abs(y)
    return y ** ((1 - a - 2 * sigma) / (a - 1)) * T ** ((a - 1 + 2 * sigma) / a) * (1 + y ** (a / (2 * (a - 1)))) * g_norm_sq


def _log_side_integral(fn: Callable, lo_u: float, hi_u: float, density: Callable) -> float:
    """``int fn(e^u) e^u du`` on panels whose count follows ``density(u)``."""
    probe = np.linspace(lo_u, hi_u, 8193)
    d = density(probe)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (d[1:] + d[:-1]) * np.diff(probe))])
    n = max(int(np.ceil(cum[-1])), 1)
    edges = np.interp(np.linspace(0, cum[-1], n + 1), cum, probe)
    edges[0], edges[-1] = lo_u, hi_u
    u, w = _GL16
    h = 0.5 * np.diff(edges)
    nodes = (0.5 * (edges[:-1] + edges[1:]))[:, None] + h[:, None] * u
    x = np.exp(nodes.ravel())
    return float(np.sum(fn(x) * x * (h[:, None] * w).ravel()))


def weighted_T_norm(
    g,
    cutoff: CutoffSpec,
    a,
    y: float,
    weight: WeightKind,
    mode: TrajectoryMode = TrajectoryMode.INV_A,
    g_rate: float = 0.0,
    octave_panels: int = 4,
    decay_rel: float = 1e-14,
) -> TNormResult:
    """``int omega(xi) |T(g phi_T)(xi)|^2 dxi`` and its ratio to the bound shape.

    Parameters
    ----------
    g : callable or (t, values)
        Time profile on the cutoff support; sampled input is interpolated by
        cubic splines.
    cutoff : CutoffSpec
    a : float
    y : float
    weight : WeightKind
    mode : {"inv_a", "linear"}
        Curve ``x = y t^(1/a)`` or the linear curve ``x = y t``.
    g_rate : float
        Largest frequency carried by ``g`` (for time resolution).
    octave_panels : int
        Minimum 16-point panels per octave of ``|xi|``.

    Notes
    -----
    The frequency integral is taken in ``u = log |xi|`` on each side of
    zero.  The panel density also resolves ``|xi| D(xi) / (2 pi)`` where ``D``
    is the spread of ``d/dxi`` of the phase over the time support, so the
    interference between well-separated times is captured.  The piece
    ``|xi| < xi_lo`` is added from the value at ``xi = 0``.
    """
    a = _order(a)
    mode = TrajectoryMode(mode)
    g = _as_callable(g)
    lo, hi = cutoff.bounds
    G = lambda t: g(t) * cutoff(t)
    tn, tw = _time_nodes(lo, hi, 256)
    g_norm_sq = float(np.sum(tw * np.abs(g(tn)) ** 2))
    sigma = weight.sigma
    rhs = weighted_norm_rhs(a, y, cutoff.T, sigma, g_norm_sq)
    if g_norm_sq == 0:
        return TNormResult(0.0, rhs, 0.0, 0.0)

    T_of = lambda x: time_transform(G, a, y, x, (lo, hi), mode, g_rate)
    integrand = lambda x: weight(x) * np.abs(T_of(x)) ** 2

    if mode is TrajectoryMode.INV_A:
        spread_lin = abs(y) * (hi ** (1 / a) - lo ** (1 / a))
    else:
        spread_lin = abs(y) * (hi - lo)

    def density(u):
        x = np.exp(u)
        spread = spread_lin + (hi - lo) * a * x ** (a - 1)
        # one wavelength of |T|^2 per 16-point panel
        return np.maximum(octave_panels / np.log(2), x * spread / (2 * np.pi))

    total = 0.0
    T0 = T_of(np.array([0.0]))[0]
    for sgn in (1.0, -1.0):
        side = lambda x: integrand(sgn * x)
        probe = 2.0 ** np.arange(-80, 0)
        vals = list(side(probe) * probe)
        # walk up by octaves until three in a row are negligible
        k = 0
        while k <= MAX_OCTAVE:
            vals.append(float(side(np.array([2.0**k]))[0]) * 2.0**k)
            probe = np.append(probe, 2.0**k)
            if k >= 2 and max(vals[-3:]) <= decay_rel * max(vals):
                break
            k += 1
        else:
            raise NonConvergent("transform does not decay within the probed frequencies")
        vals = np.array(vals)
        peak = np.max(vals)
        if peak == 0:
            continue
        big = np.nonzero(vals > decay_rel * peak)[0]
        u_hi = np.log(probe[min(big[-1] + 2, probe.size - 1)])
        x_lo = probe[max(big[0] - 2, 0)]
        total += _log_side_integral(side, np.log(x_lo), u_hi, density)
        # 0 < |xi| < x_lo with T frozen at its value at 0
        if weight.kind is SobolevKind.HOMOGENEOUS:
            total += abs(T0) ** 2 * x_lo ** (1 - 2 * sigma) / (1 - 2 * sigma)
        else:
            total += abs(T0) ** 2 * x_lo
    return TNormResult(float(total), rhs, float(total / rhs), g_norm_sq)


# --------------------------------------------------------------------------
# Fresnel-type kernel of the half-wave flow
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FresnelResult:
    k: complex
    k1: complex
    k2: complex


def _gauss_ray(c: float, w0: float, angle: float) -> complex:
    """``int_0^inf exp(i c (w0 + r e^{i angle})^2) e^{i angle} dr`` (decaying ray)."""
    rot = np.exp(1j * angle)
    # the integrand decays at least like exp(-|c| r^2)
    R = np.sqrt(64.0 / abs(c))
    u, w = _GL16
    edges = np.linspace(0.0, R, 65)
    h = 0.5 * np.diff(edges)
    r = ((0.5 * (edges[:-1] + edges[1:]))[:, None] + h[:, None] * u).ravel()
    wr = (h[:, None] * w).ravel()
    return complex(np.sum(np.exp(1j * c * (w0 + r * rot) ** 2) * wr) * rot)


def _half_fresnel(c: float) -> complex:
    """``int_0^inf exp(i (c z^2 + z)) dz`` along a steepest-descent path.

    With ``w = z + 1/(2c)`` the phase is ``c w^2 - 1/(4c)``.  For ``c > 0``
    the path leaves ``w0 = 1/(2c)`` along ``e^{i pi/4}``; for ``c < 0`` it
    runs on the real axis up to the saddle ``w = 0`` and then leaves along
    ``e^{-i pi/4}``.
    """
    w0 = 1.0 / (2.0 * c)
    pre = np.exp(-1j / (4.0 * c))
    if c > 0:
        return pre * _gauss_ray(c, w0, np.pi / 4)
    # real segment w in [w0, 0], i.e. z in [0, 1/(2|c|)]
    zs = -w0
    n = int(np.ceil(abs(c) * zs * zs / (np.pi / 2))) + 8
    u, w = _GL16
    edges = np.linspace(0.0, zs, n + 1)
    h = 0.5 * np.diff(edges)
    z = ((0.5 * (edges[:-1] + edges[1:]))[:, None] + h[:, None] * u).ravel()
    seg = np.sum(np.exp(1j * (c * z * z + z)) * (h[:, None] * w).ravel())
    return complex(seg + pre * _gauss_ray(c, 0.0, -np.pi / 4))


def fresnel_k1(x: float) -> complex:
    """Closed form ``2 sqrt(pi) e^{i/(4|x|)} e^{-i pi/4} / |x|^(1/2)``."""
    ax = abs(x)
    return 2 * np.sqrt(np.pi) * np.exp(1j / (4 * ax)) * np.exp(-1j * np.pi / 4) / np.sqrt(ax)


def fresnel_kernel(x: float) -> FresnelResult:
    """``k(x) = int exp(i (x xi + |xi|^(1/2))) |xi|^(-1/2) sgn(xi) dxi``.

    Computed in the variable ``z = |xi|^(1/2)`` as
    ``2 int_0^inf e^{iz} (e^{i x z^2} - e^{-i x z^2}) dz``; also returns the
    closed-form piece ``k1(|x|)`` and ``k2 = sgn(x) k(x) + k1(|x|)``.
    """
    x = float(x)
    if x == 0 or not np.isfinite(x):
        raise DomainError("the kernel is evaluated at nonzero finite x")
    k = 2.0 * (_half_fresnel(x) - _half_fresnel(-x))
    k1 = fresnel_k1(x)
    return FresnelResult(k, k1, np.sign(x) * k + k1)


# --------------------------------------------------------------------------
# low-frequency kernel of the water-wave flow
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LowFreqKernelReport:
    constant: float
    diagonal: float
    threshold: float
    values: np.ndarray


def lowfreq_kernel_bound(
    y: float,
    T: float,
    R: float,
    n_times: int = 9,
    weight: Optional[WeightKind] = None,
    rtol: float = 1e-9,
) -> LowFreqKernelReport:
    """Largest ``|kernel(t, s)| |t - s|`` over a ``(t, s)`` grid of ``[T, 2T]^2``.

    The kernel is ``int exp(-i (y (t^2 - s^2) xi + (t - s)|xi|^(1/2)))
    chi(xi)^2 omega(xi) dxi`` with ``chi`` a smooth cutoff equal to one on
    ``|xi| <= R`` and vanishing for ``|xi| >= 2R``.  The default weight is
    ``|xi|^(-1/2)``.
    """
    if T <= 0 or R <= 0:
        raise DomainError("T and R must be positive")
    threshold = 1.0 / (8 * np.sqrt(R) * T)
    if abs(y) >= threshold:
        raise PreconditionViolated(f"|y| must be below (8 R^(1/2) T)^-1 = {threshold:.6g}")
    weight = weight or WeightKind(SobolevKind.HOMOGENEOUS, 0.25)
    chi2 = lambda x: smooth_step((2 * R - np.abs(x)) / R) ** 2
    amp = lambda x: (chi2(x) * weight(x)).astype(complex)
    # the phase kinks at 0 whatever the weight
    sing = [0.0]
    brk = [-R, R]

    diag = oscillatory_integral(amp, lambda x: 0 * x, lambda x: 0 * x, -2 * R, 2 * R, breakpoints=brk, singular=sing, rtol=rtol)
    times = np.linspace(T, 2 * T, n_times)
    vals = np.zeros((n_times, n_times), dtype=complex)
    best = 0.0
    for i, t in enumerate(times):
        for j, s in enumerate(times):
            if i == j:
                vals[i, j] = diag.value
                continue
            ph = lambda x, t=t, s=s: -(y * (t * t - s * s) * x + (t - s) * np.sqrt(np.abs(x)))
            dph = lambda x, t=t, s=s: -(y * (t * t - s * s) + (t - s) * 0.5 * np.sign(x) / np.sqrt(np.abs(x)))
            r = oscillatory_integral(amp, ph, dph, -2 * R, 2 * R, breakpoints=brk, singular=sing, rtol=rtol)
            vals[i, j] = r.value
            best = max(best, abs(r.value) * abs(t - s))
    return LowFreqKernelReport(best, float(abs(diag.value)), threshold, vals)


# --------------------------------------------------------------------------
# csv output
# --------------------------------------------------------------------------

def write_kernel_csv(path, rows: Sequence[Tuple[float, float, KernelResult]], header_lines: Sequence[str] = ()) -> None:
    """Write ``t,s,re_K,im_K,abs_K,eps,xi0`` rows."""
    try:
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["t", "s", "re_K", "im_K", "abs_K", "eps", "xi0"])
            for t, s, r in rows:
                wr.writerow([f"{v:.16e}" for v in (t, s, r.K.real, r.K.imag, abs(r.K), r.eps, r.xi0)])
    except OSError as exc:
        raise IoError(str(exc)) from exc
