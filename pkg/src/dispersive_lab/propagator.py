"""Exact Fourier-multiplier evolution and sampling along space-time curves.

Two linear flows are provided:

* the first-order flow ``u_t = i |D|^a u``, propagated by the unimodular
  multiplier ``exp(i t |xi|^a)``;
* the second-order flow ``u_tt + |D| u = 0`` (linearised water waves),
  propagated mode by mode with ``omega = |xi|^(1/2)``.

Along a curve ``x(t)`` the first-order solution is read off the frequency
integral

    S(t) = int exp(i (x(t) xi + t |xi|^a)) u0_hat(xi) dxi,

which equals ``2 pi u(t, x(t))`` under the package's transform convention.
Three quadratures evaluate it: a spacing-weighted grid sum, Gauss-Legendre
panels over the continuous profile, and complex-ray quadrature for
profiles that extend analytically into a sector.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.special import roots_legendre

from .errors import (
    DomainError,
    GridMismatch,
    InsufficientResolution,
    IoError,
    TrajectoryOutOfBox,
    WrongKind,
)
from .spectral import (
    EvolutionState,
    SpectralField,
    StateKind,
    passes_decay_check,
    symbol_power,
)

ORDER_GUARD = 1e-6
MIN_WINDOW_NODES = 64
# log-amplitude budget for the transient growth along a rotated ray
RAY_GROWTH_BUDGET = 3.0
# truncate rays once the integrand has fallen by exp(-RAY_DECAY_LOG)
RAY_DECAY_LOG = 40.0

_GL8 = roots_legendre(8)
_GL16 = roots_legendre(16)


# --------------------------------------------------------------------------
# domain types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DispersionOrder:
    """Dispersion exponent ``a > 0`` kept away from the degenerate value 1."""

    a: float

    def __post_init__(self):
        a = float(self.a)
        if not np.isfinite(a) or a <= 0:
            raise DomainError(f"dispersion order must be positive, got {self.a}")
        if abs(a - 1.0) < ORDER_GUARD:
            raise DomainError("dispersion order a = 1 is excluded")
        object.__setattr__(self, "a", a)

    def __float__(self) -> float:
        return self.a


def _order(a) -> float:
    return a.a if isinstance(a, DispersionOrder) else DispersionOrder(a).a


class ExponentMode(str, enum.Enum):
    INV_A = "inv_a"
    LINEAR = "linear"


@dataclass(frozen=True)
class TrajectorySpec:
    """Curve ``x = y t^(1/a)`` (``inv_a``) or ``x = y t`` (``linear``)."""

    y: float
    exponent_mode: ExponentMode = ExponentMode.INV_A

    def __post_init__(self):
        object.__setattr__(self, "exponent_mode", ExponentMode(self.exponent_mode))
        object.__setattr__(self, "y", float(self.y))

    def position(self, t: np.ndarray, a: Optional[float] = None) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.exponent_mode is ExponentMode.LINEAR:
            return self.y * t
        if a is None:
            raise DomainError("inv_a trajectories need the dispersion order")
        return self.y * t ** (1.0 / _order(a))

    def speed(self, t: np.ndarray, a: Optional[float] = None) -> np.ndarray:
        """Time derivative of :meth:`position`."""
        t = np.asarray(t, dtype=float)
        if self.exponent_mode is ExponentMode.LINEAR:
            return np.full_like(t, self.y)
        a = _order(a)
        return self.y / a * t ** (1.0 / a - 1.0)


@dataclass(frozen=True)
class TimeWindow:
    """Dyadic window ``[T, 2T]``."""

    T: float

    def __post_init__(self):
        if not (np.isfinite(self.T) and self.T > 0):
            raise DomainError("window start T must be positive")

    @property
    def bounds(self) -> Tuple[float, float]:
        return float(self.T), 2.0 * float(self.T)


@dataclass(frozen=True)
class TrajectorySamples:
    """Values on a curve at quadrature nodes of a time window."""

    times: np.ndarray
    values: np.ndarray
    weights: np.ndarray
    y: float = 0.0


# --------------------------------------------------------------------------
# evolution
# --------------------------------------------------------------------------

def propagate_halfde(u0: SpectralField, a, t: float, check: bool = True) -> SpectralField:
    """Evolve ``u_t = i |D|^a u`` exactly for time ``t >= 0``.

    Parameters
    ----------
    u0 : SpectralField
        Initial data.  With ``check`` it must pass the grid-decay test.
    a : float or DispersionOrder
    t : float

    Returns
    -------
    SpectralField
        Coefficients multiplied by ``exp(i t |xi|^a)``.
    """
    a = _order(a)
    if t < 0:
        raise DomainError("propagation time must be nonnegative")
    if check and not passes_decay_check(u0):
        raise DomainError("initial data are not resolved by the grid")
    if t == 0:
        return u0
    phase = np.exp(1j * t * symbol_power(u0.grid.xi, a))
    return u0.with_coeffs(phase * u0.coeffs)


def _sinc_time(omega: np.ndarray, t: float) -> np.ndarray:
    # sin(omega t)/omega with the value t at omega = 0
    out = np.full_like(omega, float(t))
    nz = omega != 0
    out[nz] = np.sin(omega[nz] * t) / omega[nz]
    return out


def propagate_linww(u0: SpectralField, u1: SpectralField, t: float) -> EvolutionState:
    """Evolve ``u_tt + |D| u = 0`` from ``(u, u_t) = (u0, u1)``.

    Each mode is advanced exactly with ``omega = |xi|^(1/2)``; the zero
    mode uses the limit ``sin(omega t)/omega -> t``.
    """
    if u0.grid != u1.grid:
        raise GridMismatch("u0 and u1 live on different grids")
    if t < 0:
        raise DomainError("propagation time must be nonnegative")
    omega = np.sqrt(np.abs(u0.grid.xi))
    c, s = np.cos(omega * t), np.sin(omega * t)
    u = c * u0.coeffs + _sinc_time(omega, t) * u1.coeffs
    ut = -omega * s * u0.coeffs + c * u1.coeffs
    return EvolutionState(StateKind.SECOND_ORDER, u0.with_coeffs(u), time=float(t), ut=u0.with_coeffs(ut))


def energy(state: EvolutionState) -> float:
    """Discrete ``sum (|u_t_hat|^2 + |xi| |u_hat|^2) spacing``.

    This is the frequency-side form of ``int |u_t|^2 + ||D|^(1/2) u|^2 dx``
    and differs from it by the Parseval factor ``2 pi``.
    """
    if state.kind is not StateKind.SECOND_ORDER:
        raise WrongKind("energy is defined for second-order states")
    xi = state.u.grid.xi
    dens = np.abs(state.ut.coeffs) ** 2 + np.abs(xi) * np.abs(state.u.coeffs) ** 2
    return float(np.sum(dens) * state.u.grid.spacing)


# --------------------------------------------------------------------------
# trajectory sampling
# --------------------------------------------------------------------------

def _check_times(times) -> np.ndarray:
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if times.ndim != 1 or times.size == 0:
        raise DomainError("times must be a nonempty 1-d array")
    if np.any(times <= 0) or np.any(np.diff(times) <= 0):
        raise DomainError("times must be positive and strictly increasing")
    return times


def _band(band) -> Tuple[float, float]:
    if band is None:
        return 0.0, np.inf
    lo, hi = float(band[0]), float(band[1])
    if lo < 0 or hi <= lo:
        raise DomainError("band must satisfy 0 <= low < high")
    return lo, hi


def _phase_sum(x: np.ndarray, t: np.ndarray, xi: np.ndarray, weighted: np.ndarray, a: float, block: int = 8192) -> np.ndarray:
    """``sum_k exp(i (x_j xi_k + t_j |xi_k|^a)) weighted_k`` in fixed block order."""
    power = np.abs(xi) ** a
    out = np.zeros(x.size, dtype=complex)
    for start in range(0, xi.size, block):
        sl = slice(start, start + block)
        ph = np.outer(x, xi[sl]) + np.outer(t, power[sl])
        out += np.exp(1j * ph) @ weighted[sl]
    return out


def _significant_range(f: SpectralField, rel: float = 1e-16) -> Tuple[float, float]:
    mag = np.abs(f.coeffs)
    idx = np.nonzero(mag > rel * mag.max())[0] if mag.max() > 0 else np.array([f.grid.zero_index])
    xi = f.grid.xi
    lo = xi[max(idx[0] - 1, 0)]
    hi = xi[min(idx[-1] + 1, f.grid.n - 1)]
    return float(lo), float(hi)


def _panel_nodes(f: SpectralField, a: float, xmax: float, tmax: float, band, grading: int = 48):
    """Gauss-Legendre nodes over the significant support of a profile.

    Grid cells are the coarse panels (the grid is assumed to resolve the
    profile); each cell is split until the phase turns by at most pi, and
    the two cells touching the origin are graded geometrically towards it.
    """
    lo, hi = _significant_range(f)
    blo, bhi = band
    xi = f.grid.xi
    edges = xi[(xi >= lo) & (xi <= hi)]
    extra = [e for e in (-bhi, -blo, blo, bhi) if np.isfinite(e) and lo < e < hi]
    edges = np.unique(np.concatenate([edges, extra, [0.0] if lo < 0 < hi else []]))
    left, right = edges[:-1], edges[1:]
    mid = 0.5 * (left + right)
    keep = (np.abs(mid) >= blo) & (np.abs(mid) <= bhi)
    left, right = left[keep], right[keep]

    # geometric grading of the cells that end at the origin
    pieces_l, pieces_r = [], []
    at_zero = (left == 0) | (right == 0)
    for l, r in zip(left[at_zero], right[at_zero]):
        far = r if l == 0 else l
        k = np.arange(grading + 1)
        pts = far * 2.0 ** (-k)
        pts = np.concatenate([pts, [0.0]])
        pts = np.sort(pts)
        pieces_l.append(pts[:-1])
        pieces_r.append(pts[1:])
    left = np.concatenate([left[~at_zero]] + pieces_l)
    right = np.concatenate([right[~at_zero]] + pieces_r)

    inner = np.where(left * right > 0, np.minimum(np.abs(left), np.abs(right)), np.abs(right - left) * 2.0 ** (-grading - 1))
    outer = np.maximum(np.abs(left), np.abs(right))
    rate = xmax + tmax * a * np.maximum(inner ** (a - 1.0), outer ** (a - 1.0))
    pieces = np.maximum(1, np.ceil(rate * (right - left) / np.pi)).astype(int)
    # split each cell into its number of equal pieces
    rep_l = np.repeat(left, pieces)
    rep_w = np.repeat((right - left) / pieces, pieces)
    offs = np.arange(pieces.sum()) - np.repeat(np.cumsum(pieces) - pieces, pieces)
    a_ = rep_l + offs * rep_w
    b_ = a_ + rep_w
    u, w = _GL8
    nodes = (0.5 * (a_ + b_))[:, None] + (0.5 * rep_w)[:, None] * u
    weights = (0.5 * rep_w)[:, None] * w
    order = np.argsort(nodes.ravel(), kind="stable")
    return nodes.ravel()[order], weights.ravel()[order]


def _ray_theta(a: float, x: float, t: float, sigma: int, limit: float) -> float:
    """Rotation angle for the half line ``xi = sigma r``.

    The sign makes the dominant term at infinity decay; the size is capped
    so that the competing term grows by at most ``RAY_GROWTH_BUDGET`` in
    log-amplitude.
    """
    lin = x * sigma
    if lin == 0:
        return limit
    sign = np.sign(lin)
    if sign > 0:
        return limit

    def growth(th):
        A = t * np.sin(a * th)
        B = abs(x) * np.sin(th)
        rho = (a * A / B) ** (1.0 / (1.0 - a))
        return (1.0 - a) * A * rho ** a

    th = limit
    if growth(th) > RAY_GROWTH_BUDGET:
        lo, hi = 0.0, limit
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if growth(mid) <= RAY_GROWTH_BUDGET else (lo, mid)
        th = lo
    return -th


def _ray_integral(profile: Callable, a: float, x: float, t: float, sigma: int, start: float, theta: float) -> complex:
    """``int exp(i (x xi + t |xi|^a)) F(xi) dxi`` along ``xi = sigma (start + rho e^{i theta})``."""
    rot = np.exp(1j * theta)

    def integrand(rho):
        r = start + rho * rot
        return np.exp(1j * (x * sigma * r + t * r ** a)) * profile(sigma * r) * rot

    # locate the decay length on a geometric probe
    probe = np.geomspace(1e-12, 1e9, 3000) * max(start, 1.0)
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        logmag = np.log(np.abs(integrand(probe)) + 1e-300)
    peak = np.max(logmag)
    below = logmag < peak - RAY_DECAY_LOG
    after_peak = np.arange(probe.size) > np.argmax(logmag)
    tail = np.nonzero(below & after_peak & np.flip(np.cumprod(np.flip(below))).astype(bool))[0]
    if tail.size == 0:
        raise InsufficientResolution("ray integrand does not decay")
    R = probe[tail[0]]

    if start == 0:
        k = np.arange(60)
        cuts = np.concatenate([[0.0], R * 2.0 ** (-k[::-1] - 1), [R]])
    else:
        cuts = np.array([0.0, R])
    cuts = np.unique(cuts)
    lft, rgt = cuts[:-1], cuts[1:]
    near = np.abs(start + lft * rot)
    near = np.where(near > 0, near, np.abs(start + rgt * rot) * 1e-3)
    rate = abs(x) + t * a * np.maximum(near ** (a - 1.0), np.abs(start + rgt * rot) ** (a - 1.0)) + np.abs(start + rgt * rot)
    pieces = np.maximum(np.ceil(rate * (rgt - lft) / (2 * np.pi)), np.ceil(200 * (rgt - lft) / R)).astype(int)
    rep_l = np.repeat(lft, pieces)
    rep_w = np.repeat((rgt - lft) / pieces, pieces)
    offs = np.arange(pieces.sum()) - np.repeat(np.cumsum(pieces) - pieces, pieces)
    u, w = _GL16
    nodes = (rep_l + offs * rep_w + 0.5 * rep_w)[:, None] + (0.5 * rep_w)[:, None] * u
    weights = (0.5 * rep_w)[:, None] * w
    vals = integrand(nodes.ravel())
    return complex(np.sum(vals * weights.ravel()))


def contour_value(profile: Callable, a: float, x: float, t: float, sector: float, band=None) -> complex:
    """Frequency integral at one space-time point by rotated-ray quadrature.

    Only dispersion orders ``0 < a < 1`` are supported: there the linear
    term dominates at infinity and the ray direction is fixed by the sign of
    ``x``.  Band edges other than 0 and infinity are handled as differences
    of rays emanating from the edges.
    """
    a = _order(a)
    if not 0 < a < 1:
        raise DomainError("contour quadrature supports 0 < a < 1 only")
    if sector <= 0:
        raise DomainError("profile is not declared analytic in a sector")
    blo, bhi = _band(band)
    total = 0j
    for sigma in (1, -1):
        theta = _ray_theta(a, x, t, sigma, sector)
        total += _ray_integral(profile, a, x, t, sigma, blo, theta)
        if np.isfinite(bhi):
            total -= _ray_integral(profile, a, x, t, sigma, bhi, theta)
    return total


def sample_trajectory(
    u0: SpectralField,
    a,
    traj: TrajectorySpec,
    times,
    method: str = "auto",
    band=None,
) -> np.ndarray:
    """Frequency integral ``S(t)`` along the curve ``x(t)``.

    Parameters
    ----------
    u0 : SpectralField
        Initial data.  ``profile`` enables continuous quadrature and a
        positive ``sector`` enables contour quadrature.
    a : float or DispersionOrder
    traj : TrajectorySpec
    times : array_like
        Positive, strictly increasing.
    method : {"auto", "grid", "panel", "contour"}
        ``grid`` is the spacing-weighted sum over grid modes and is the
        only method subject to the periodic-box check.  ``auto`` picks
        ``grid`` without a profile, ``contour`` for analytic profiles at
        ``a < 1`` and ``panel`` otherwise.
    band : (low, high), optional
        Restrict to ``low <= |xi| <= high``.

    Returns
    -------
    ndarray of complex
        ``S(t_j) = 2 pi u(t_j, x(t_j))``.
    """
    a = _order(a)
    times = _check_times(times)
    return sample_points(u0, a, traj.position(times, a), times, method, band)


def sample_points(u0: SpectralField, a, x, times, method: str = "auto", band=None) -> np.ndarray:
    """``S`` at arbitrary space-time points ``(x_j, t_j)``.

    Same methods and conventions as :func:`sample_trajectory`; times need
    only be nonnegative.  One node set serves all points, which is cheaper
    than separate curves when many points share a time.
    """
    a = _order(a)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if x.shape != times.shape:
        raise DomainError("x and times must have the same shape")
    if np.any(times < 0) or not np.all(np.isfinite(times)) or not np.all(np.isfinite(x)):
        raise DomainError("points need finite x and nonnegative t")
    blo, bhi = _band(band)
    if method == "auto":
        if u0.profile is None:
            method = "grid"
        elif u0.sector > 0 and a < 1:
            method = "contour"
        else:
            method = "panel"
    if method == "grid":
        if np.any(np.abs(x) > 0.5 * u0.grid.period):
            raise TrajectoryOutOfBox("trajectory leaves the half period of the box")
        xi = u0.grid.xi
        mask = (np.abs(xi) >= blo) & (np.abs(xi) <= bhi)
        return _phase_sum(x, times, xi[mask], u0.coeffs[mask] * u0.grid.spacing, a)
    if u0.profile is None:
        raise DomainError(f"method {method!r} needs a profile")
    if method == "panel":
        nodes, weights = _panel_nodes(u0, a, float(np.max(np.abs(x))), float(np.max(times)), (blo, bhi))
        return _phase_sum(x, times, nodes, weights * u0.evaluate(nodes), a)
    if method == "contour":
        return np.array([contour_value(u0.profile, a, xj, tj, u0.sector, (blo, bhi)) for xj, tj in zip(x, times)])
    raise DomainError(f"unknown method {method!r}")


# --------------------------------------------------------------------------
# time-window quadrature
# --------------------------------------------------------------------------

def window_nodes(window: TimeWindow, panels: int, order: int = 16) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on ``[T, 2T]``."""
    if panels < 1:
        raise DomainError("need at least one panel")
    u, w = roots_legendre(order)
    lo, hi = window.bounds
    edges = np.linspace(lo, hi, panels + 1)
    h = 0.5 * np.diff(edges)
    nodes = (0.5 * (edges[:-1] + edges[1:]))[:, None] + h[:, None] * u
    return nodes.ravel(), (h[:, None] * w).ravel()


def fastest_rate(u0: SpectralField, a, traj: TrajectorySpec, window: TimeWindow) -> float:
    """Largest ``|d/dt phase|`` over significant modes and the window."""
    a = _order(a)
    lo, hi = _significant_range(u0)
    xi = np.linspace(lo, hi, 2049)
    xi = xi[np.abs(u0.evaluate(xi)) > 1e-14 * np.max(np.abs(u0.coeffs))] if np.any(u0.coeffs) else xi
    rates = [np.abs(traj.speed(t, a) * xi + np.abs(xi) ** a).max() for t in window.bounds]
    return float(max(rates))


def sample_window(
    u0: SpectralField,
    a,
    traj: TrajectorySpec,
    window: TimeWindow,
    points_per_oscillation: int = 8,
    method: str = "auto",
    min_nodes: int = MIN_WINDOW_NODES,
) -> TrajectorySamples:
    """Sample the curve on Gauss-Legendre panels resolving the fastest mode."""
    T0, T1 = window.bounds
    rate = fastest_rate(u0, a, traj, window)
    oscill = rate * (T1 - T0) / (2 * np.pi)
    order = 16
    panels = int(max(np.ceil(oscill * points_per_oscillation / order), np.ceil(min_nodes / order)))
    t, w = window_nodes(window, panels, order)
    return TrajectorySamples(t, sample_trajectory(u0, a, traj, t, method=method), w, traj.y)


def _window_weights(samples: TrajectorySamples, window: TimeWindow) -> np.ndarray:
    t = np.asarray(samples.times, dtype=float)
    lo, hi = window.bounds
    inside = (t >= lo) & (t <= hi)
    if inside.sum() < MIN_WINDOW_NODES:
        raise InsufficientResolution(f"need at least {MIN_WINDOW_NODES} nodes in the window")
    total = np.sum(np.asarray(samples.weights)[inside])
    if abs(total - (hi - lo)) > 1e-8 * (hi - lo):
        raise InsufficientResolution("quadrature weights do not cover the window")
    return np.where(inside, samples.weights, 0.0)


def restricted_l2_norm(samples: TrajectorySamples, window: TimeWindow) -> float:
    """Quadrature of ``int_T^{2T} |u|^2 dt`` (the square of the norm)."""
    w = _window_weights(samples, window)
    return float(np.sum(w * np.abs(samples.values) ** 2))


@dataclass(frozen=True)
class TraceReport:
    lhs: float
    rhs: float
    ratio: float


def sobolev_trace_check(samples: TrajectorySamples, l_values: np.ndarray, window: TimeWindow) -> TraceReport:
    """Compare ``sup |v|`` with ``T^(-1/2) sum_{k=0,1} (int |L^k v|^2)^(1/2)``.

    ``samples`` carries ``v`` at quadrature nodes of the window and
    ``l_values`` the values of ``L v`` at the same nodes.
    """
    w = _window_weights(samples, window)
    l_values = np.asarray(l_values)
    if l_values.shape != np.shape(samples.values):
        raise InsufficientResolution("v and L v must share the sample nodes")
    inside = w > 0
    lhs = float(np.max(np.abs(np.asarray(samples.values)[inside])))
    parts = [np.sqrt(np.sum(w * np.abs(v) ** 2)) for v in (samples.values, l_values)]
    rhs = float(window.T ** -0.5 * sum(parts))
    return TraceReport(lhs, rhs, lhs / rhs if rhs > 0 else np.inf)


# --------------------------------------------------------------------------
# csv output
# --------------------------------------------------------------------------

def write_trajectory_csv(path, times: Sequence[float], y: float, values: Sequence[complex], header_lines: Sequence[str] = ()) -> None:
    """Write ``t,y,re_u,im_u,abs_u`` rows."""
    try:
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["t", "y", "re_u", "im_u", "abs_u"])
            for t, v in zip(times, values):
                wr.writerow([f"{t:.16e}", f"{y:.16e}", f"{v.real:.16e}", f"{v.imag:.16e}", f"{abs(v):.16e}"])
    except OSError as exc:
        raise IoError(str(exc)) from exc


def write_restricted_norm_csv(path, rows: Sequence[Tuple[float, float, float]], header_lines: Sequence[str] = ()) -> None:
    """Write ``T,y,value`` rows."""
    try:
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["T", "y", "value"])
            for T, y, v in rows:
                wr.writerow([f"{T:.16e}", f"{y:.16e}", f"{v:.16e}"])
    except OSError as exc:
        raise IoError(str(exc)) from exc
