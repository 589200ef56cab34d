"""Power-law fits and the decay and growth studies built on them.

Every study reduces to a table ``(x_j, v_j)`` of positive numbers whose
log-log slope is compared with a predicted exponent:

* the growth factor of the restricted norm along ``x = y t`` for extremal
  data, as ``y`` moves across dyadic scales;
* the pointwise decay along ``x = y t^(1/a)`` at one ``y`` or as a
  supremum over a dyadic ``y`` grid;
* the same supremum for the linearised water waves, split at
  ``|xi| = t^p`` into a low and a high frequency piece.

Independent evaluations fan out to a thread pool and are collected in
input order, so results do not depend on the number of workers.
"""

from __future__ import annotations

import csv
import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from .errors import DegenerateInput, DomainError, IoError, ZeroModeSingular
from .oscillatory import CutoffSpec
from .propagator import (
    EvolutionState,
    TimeWindow,
    _order,
    sample_points,
    window_nodes,
)
from .sharpness import SharpDatum, build_lowfreq_data, build_sharp_data
from .spectral import (
    FrequencyGrid,
    SobolevIndex,
    SpectralField,
    StateKind,
    VectorFieldId,
    apply_vector_field,
    derivative_x,
    fractional_derivative,
    multiply_by_x,
    sobolev_norm,
)

MIN_FIT_POINTS = 4
# fit windows drop the first half decade of t
SKIP_DECADES = 0.5
GROWTH_OCTAVES = 4.0
ENVELOPE_DECADES = 2.0
SPLIT_POWER = -2.0 / 7.0
SPLIT_RATE = 5.0 / 14.0
GAUSSIAN_SECTOR = np.pi / 8


def default_y_grid() -> np.ndarray:
    """``0`` and ``+-2^-k`` for ``k = -2 .. 10``."""
    pos = 2.0 ** -np.arange(-2, 11, dtype=float)
    return np.concatenate([[0.0], pos, -pos])


# --------------------------------------------------------------------------
# fits
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    """Least-squares line through ``(log x, log v)``.

    ``residual`` is the RMS of the log residuals.  ``x`` and ``v`` keep the
    fitted samples; ``pieces`` holds auxiliary fits and ``meta`` the
    parameters that produced them.
    """

    exponent: float
    intercept: float
    residual: float
    n_points: int
    x: Tuple[float, ...] = ()
    v: Tuple[float, ...] = ()
    pieces: Dict[str, "DecayFit"] = field(default_factory=dict, compare=False)
    meta: Dict[str, object] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.n_points < MIN_FIT_POINTS:
            raise DegenerateInput(f"a fit needs at least {MIN_FIT_POINTS} points")
        if not self.residual >= 0:
            raise DegenerateInput("residual must be nonnegative")


def fit_power_law(pairs) -> DecayFit:
    """Fit ``v = exp(intercept) x^exponent``.

    Parameters
    ----------
    pairs : array_like, shape (n, 2)
        Rows ``(x, v)`` with ``x > 0`` strictly monotone and ``v > 0``.

    Raises
    ------
    DegenerateInput
        Fewer than four rows, nonpositive or nonfinite entries, or ``x``
        not strictly monotone.
    """
    p = np.asarray(pairs, dtype=float)
    if p.ndim != 2 or p.shape[1] != 2 or p.shape[0] < MIN_FIT_POINTS:
        raise DegenerateInput(f"need at least {MIN_FIT_POINTS} (x, v) pairs")
    x, v = p[:, 0], p[:, 1]
    if not (np.all(np.isfinite(p)) and np.all(x > 0) and np.all(v > 0)):
        raise DegenerateInput("x and v must be finite and positive")
    d = np.diff(x)
    if not (np.all(d > 0) or np.all(d < 0)):
        raise DegenerateInput("x must be strictly monotone")
    lx, lv = np.log(x), np.log(v)
    A = np.column_stack([lx, np.ones_like(lx)])
    (slope, icpt), *_ = np.linalg.lstsq(A, lv, rcond=None)
    res = lv - (slope * lx + icpt)
    rms = float(np.sqrt(np.mean(res**2)))
    return DecayFit(float(slope), float(icpt), rms, int(x.size), tuple(x.tolist()), tuple(v.tolist()))


def _fit_window(t: np.ndarray, skip: float = SKIP_DECADES) -> np.ndarray:
    return t >= t.min() * 10.0**skip * (1 - 1e-12)


def _pool_map(fn: Callable, items: Sequence, threads: int) -> list:
    if threads < 1:
        raise DomainError("threads must be at least 1")
    if threads == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

class DataClass(str, enum.Enum):
    GAUSSIAN = "gaussian"
    SHARP = "sharp"
    LOWFREQ = "lowfreq"


class EnvelopeMode(str, enum.Enum):
    FIXED_Y = "fixed_y"
    SUP_Y = "sup_y"
    FREQ_SPLIT = "freq_split"


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of one study.

    ``kind`` selects ``growth`` (restricted-norm growth in ``y``) or
    ``decay`` (pointwise envelope in ``t``).  ``comparison`` decides how
    ``target`` and ``tolerance`` judge the fitted exponent: ``within``
    (two sided), ``at_most`` or ``at_least``.
    """

    name: str
    kind: str
    a: float
    data_class: DataClass = DataClass.GAUSSIAN
    T_list: Tuple[float, ...] = (8.0,)
    y_list: Tuple[float, ...] = (1.0,)
    t_list: Tuple[float, ...] = ()
    mode: EnvelopeMode = EnvelopeMode.FIXED_Y
    gamma: float = -0.2
    grid_n: int = 2**14
    cutoff_support: Tuple[float, float] = (1.0, 2.0)
    cutoff_plateau: Tuple[float, float] = (1.25, 1.75)
    curve: str = "inv_a"
    target: float = 0.0
    tolerance: float = 0.05
    comparison: str = "within"
    threads: int = 1
    output: str = ""

    def __post_init__(self):
        object.__setattr__(self, "data_class", DataClass(self.data_class))
        object.__setattr__(self, "mode", EnvelopeMode(self.mode))
        _order(self.a)
        if self.kind not in ("growth", "decay"):
            raise DomainError(f"unknown experiment kind {self.kind!r}")
        if self.comparison not in ("within", "at_most", "at_least"):
            raise DomainError(f"unknown comparison {self.comparison!r}")
        if self.curve not in ("inv_a", "linear"):
            raise DomainError(f"unknown curve {self.curve!r}")
        lists = {"T_list": self.T_list, "y_list": self.y_list}
        if self.kind == "decay":
            lists["t_list"] = self.t_list
        for key, vals in lists.items():
            if len(vals) == 0:
                raise DomainError(f"{key} must be nonempty")
            if not all(np.isfinite(v) for v in vals):
                raise DomainError(f"{key} must be finite")
        if any(T <= 0 for T in self.T_list) or any(t <= 0 for t in self.t_list):
            raise DomainError("times must be positive")
        if not (self.tolerance >= 0 and self.threads >= 1 and self.grid_n >= 8):
            raise DomainError("tolerance, threads and grid size out of range")

    def passes(self, exponent: float, scale: float = 1.0) -> bool:
        tol = self.tolerance * scale
        if self.comparison == "at_most":
            return exponent <= self.target + tol
        if self.comparison == "at_least":
            return exponent >= self.target - tol
        return abs(exponent - self.target) <= tol


# --------------------------------------------------------------------------
# growth factor
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GrowthSample:
    y: float
    trajectory_norm: float
    data_norm: float

    @property
    def ratio(self) -> float:
        return self.trajectory_norm / self.data_norm


def _modulated_profile(a: float, y: float, T: float, cutoff: CutoffSpec) -> SharpDatum:
    # carrier at the fold value, so the fold weight sees the whole window transform
    depth = SharpDatum.gaussian(a, y).jacobian.depth
    z0 = depth if a < 1 else -depth
    g = lambda t: np.exp(1j * z0 * np.asarray(t, dtype=float)) / np.sqrt(T)
    return SharpDatum.from_profile(a, y, g, cutoff, T, g_rate=abs(z0))


def growth_sample(a, y: float, T: float, grid_n: int = 2**14, cutoff: Optional[CutoffSpec] = None) -> GrowthSample:
    """Restricted norm along ``x = y t`` over ``[T, 2T]`` for extremal data.

    The data are ``u0_hat = |xi|^(a-1) (g phi)^(y xi + |xi|^a)`` with
    ``g = exp(i z0 t) / sqrt(T)`` and ``z0`` the fold value of the phase.
    Both norms are physical: ``u = S / (2 pi)`` and the ``H^((1-a)/2)``
    norm carries the Parseval factor.
    """
    a = _order(a)
    cutoff = CutoffSpec(T, (1.0, 2.0), (1.25, 1.75)) if cutoff is None else cutoff
    datum = _modulated_profile(a, y, T, cutoff)
    far, right = datum.xi_extent()
    span = max(abs(far), abs(right), abs(datum.jacobian.left))
    u0 = build_sharp_data(datum, FrequencyGrid(grid_n, 1.25 * span))
    rate = max(abs(v) for v in datum.band)
    # 16-point panels spanning at most two oscillations of the fastest frequency
    panels = int(np.ceil(rate * T / (4 * np.pi))) + 8
    t, w = window_nodes(TimeWindow(T), panels)
    S = sample_points(u0, a, y * t, t, method="panel")
    traj = float(np.sqrt(np.sum(w * np.abs(S) ** 2))) / (2 * np.pi)
    data = sobolev_norm(u0, SobolevIndex((1 - a) / 2)) / np.sqrt(2 * np.pi)
    return GrowthSample(float(y), traj, float(data))


def growth_factor_experiment(
    a,
    T: float,
    y_list: Sequence[float],
    grid_n: int = 2**14,
    threads: int = 1,
    cutoff: Optional[CutoffSpec] = None,
) -> DecayFit:
    """Fit ``N(y) = ||u(t, y t)||_{L^2(T, 2T)} / ||u0||_{H^((1-a)/2)}`` in ``y``.

    Returns
    -------
    DecayFit
        Exponent to compare with ``a / (4 (a - 1))``.  ``meta`` carries the
        per-``y`` norms.

    Raises
    ------
    DegenerateInput
        Fewer than four values of ``y``, or a span below four octaves.
    """
    a = _order(a)
    ys = np.asarray(y_list, dtype=float)
    if ys.size < MIN_FIT_POINTS:
        raise DegenerateInput(f"need at least {MIN_FIT_POINTS} values of y")
    if np.any(ys <= 0):
        raise DegenerateInput("y must be positive")
    if np.log2(ys.max() / ys.min()) < GROWTH_OCTAVES - 1e-9:
        raise DegenerateInput("y values must span at least five dyadic scales")
    samples = _pool_map(lambda y: growth_sample(a, y, T, grid_n, cutoff), list(ys), threads)
    fit = fit_power_law([(s.y, s.ratio) for s in samples])
    meta = {
        "a": a,
        "T": float(T),
        "grid_n": int(grid_n),
        "predicted": a / (4 * (a - 1)),
        "trajectory_norm": [s.trajectory_norm for s in samples],
        "data_norm": [s.data_norm for s in samples],
    }
    return DecayFit(fit.exponent, fit.intercept, fit.residual, fit.n_points, fit.x, fit.v, {}, meta)


# --------------------------------------------------------------------------
# decay envelopes
# --------------------------------------------------------------------------

def _half_line_root(z):
    # sgn(xi) |xi|^(1/2), continued analytically off each half line
    z = np.asarray(z, dtype=complex)
    right = z.real >= 0
    return np.where(right, np.sqrt(np.where(right, z, 1.0)), -np.sqrt(np.where(right, 1.0, -z)))


def gaussian_profile(z):
    """Transform of ``exp(-x^2)``: ``sqrt(pi) exp(-xi^2 / 4)``; entire."""
    return np.sqrt(np.pi) * np.exp(-np.asarray(z) ** 2 / 4)


def gaussian_data(grid: Optional[FrequencyGrid] = None) -> SpectralField:
    grid = FrequencyGrid(2**12, 40.0) if grid is None else grid
    return SpectralField.from_function(grid, gaussian_profile, sector=GAUSSIAN_SECTOR)


@dataclass(frozen=True)
class HalfWaves:
    """Water-wave data split into the two half-wave flows.

    With ``omega = |xi|^(1/2)`` the solution is
    ``u = e^{i t omega} plus + e^{-i t omega} minus`` where
    ``plus, minus = (u0_hat +- u1_hat / (i omega)) / 2``.  ``reflected``
    stores ``conj(minus(-xi))`` so both pieces run on the forward flow:
    ``S_minus(x, t) = conj(S_forward[reflected](x, t))``.
    """

    plus: SpectralField
    reflected: SpectralField

    def values(self, x, t, band=None, method: str = "auto") -> np.ndarray:
        """``u(t_j, x_j)`` (physical normalisation)."""
        p = sample_points(self.plus, 0.5, x, t, method, band)
        m = sample_points(self.reflected, 0.5, x, t, method, band)
        return (p + np.conj(m)) / (2 * np.pi)


def gaussian_water_waves(grid: Optional[FrequencyGrid] = None) -> HalfWaves:
    """``u0 = exp(-x^2)`` and ``u1 = d/dx exp(-x^2)``.

    ``u1_hat / (i omega) = sgn(xi) |xi|^(1/2) u0_hat`` stays bounded, so
    ``|D|^(-1/2) u1`` lies in ``L^2`` as the combined decay bound requires.
    """
    grid = FrequencyGrid(2**12, 40.0) if grid is None else grid
    plus = lambda z: 0.5 * gaussian_profile(z) * (1 + _half_line_root(z))
    minus = lambda z: 0.5 * gaussian_profile(z) * (1 - _half_line_root(z))
    reflected = lambda z: np.conj(minus(-np.conj(np.asarray(z, dtype=complex))))
    return HalfWaves(
        SpectralField.from_function(grid, plus, sector=GAUSSIAN_SECTOR),
        SpectralField.from_function(grid, reflected, sector=GAUSSIAN_SECTOR),
    )


def _position(y, t, a: float, curve: str):
    return y * t if curve == "linear" else y * t ** (1.0 / a)


def decay_envelope_experiment(
    a,
    data_class,
    t_list: Sequence[float],
    mode,
    y: float = 1.0,
    y_grid: Optional[Sequence[float]] = None,
    gamma: float = -0.2,
    split_power: float = SPLIT_POWER,
    curve: str = "inv_a",
    threads: int = 1,
) -> DecayFit:
    """Fit the decay in ``t`` of ``|u|`` along ``x = y t^(1/a)``.

    Parameters
    ----------
    a : float
        Dispersion order; ``freq_split`` requires ``1/2``.
    data_class : {"gaussian", "lowfreq"}
        ``gaussian`` is ``exp(-x^2)`` (with ``u1 = d/dx exp(-x^2)`` for the
        water waves); ``lowfreq`` is the odd singular datum of index
        ``gamma`` under the half-wave flow.
    t_list : sequence of float
        Increasing times spanning at least two decades.
    mode : {"fixed_y", "sup_y", "freq_split"}
        ``fixed_y`` samples the single curve ``y``; ``sup_y`` takes the
        maximum over ``y_grid``; ``freq_split`` evaluates the water waves
        split at ``|xi| = t^split_power``.
    curve : {"inv_a", "linear"}
        ``x = y t^(1/a)`` or ``x = y t``.

    Returns
    -------
    DecayFit
        Fitted over ``t`` beyond the first half decade.  For ``freq_split``
        the fitted quantity is ``t^(5/14) sup_y |u|`` (its exponent is the
        trend slope) and ``pieces`` holds the envelopes of the full
        solution and of the low and high pieces.
    """
    a = _order(a)
    data_class = DataClass(data_class)
    mode = EnvelopeMode(mode)
    t = np.asarray(t_list, dtype=float)
    if t.size < MIN_FIT_POINTS or np.any(np.diff(t) <= 0) or t[0] <= 0:
        raise DegenerateInput("t_list must be positive and strictly increasing")
    if np.log10(t[-1] / t[0]) < ENVELOPE_DECADES - 1e-9:
        raise DegenerateInput("t_list must span at least two decades")
    ys = np.array([y], dtype=float) if mode is EnvelopeMode.FIXED_Y else np.asarray(
        default_y_grid() if y_grid is None else y_grid, dtype=float
    )
    keep = _fit_window(t)
    if keep.sum() < MIN_FIT_POINTS:
        raise DegenerateInput("too few times beyond the first half decade")
    meta = {"a": a, "data_class": data_class.value, "mode": mode.value, "curve": curve,
            "fit_from": float(t[keep][0]), "n_y": int(ys.size)}

    if data_class is DataClass.SHARP:
        raise DomainError("sharp data belong to one window and one line; use growth_factor_experiment")

    if mode is EnvelopeMode.FREQ_SPLIT:
        if abs(a - 0.5) > 1e-12 or data_class is not DataClass.GAUSSIAN:
            raise DomainError("the frequency split is defined for Gaussian water-wave data")
        waves = gaussian_water_waves()

        def evaluate(tj):
            x = _position(ys, tj, a, curve)
            tt = np.full_like(ys, tj)
            cut = tj**split_power
            low = waves.values(x, tt, (0.0, cut))
            high = waves.values(x, tt, (cut, np.inf))
            full = waves.values(x, tt)
            return np.abs(full).max(), np.abs(low).max(), np.abs(high).max()

        env = np.array(_pool_map(evaluate, list(t), threads))
        rate = SPLIT_RATE
        comp = env[:, 0] * t**rate
        fit = fit_power_law(np.column_stack([t[keep], comp[keep]]))
        pieces = {
            name: fit_power_law(np.column_stack([t[keep], env[keep, k]]))
            for k, name in enumerate(("total", "low", "high"))
        }
        meta.update(split_power=split_power, rate=rate, max_compensated=float(comp.max()),
                    envelope=env[:, 0].tolist(), low=env[:, 1].tolist(), high=env[:, 2].tolist(),
                    t=t.tolist())
        return DecayFit(fit.exponent, fit.intercept, fit.residual, fit.n_points, fit.x, fit.v, pieces, meta)

    if data_class is DataClass.GAUSSIAN:
        u0 = gaussian_data()
        method = "contour" if a < 1 else "panel"
    else:
        if abs(a - 0.5) > 1e-12:
            raise DomainError("low-frequency data evolve under the half-wave flow (a = 1/2)")
        u0 = build_lowfreq_data(gamma)
        method = "panel"
        meta["gamma"] = float(gamma)

    def evaluate(tj):
        x = _position(ys, tj, a, curve)
        S = sample_points(u0, a, x, np.full_like(ys, tj), method)
        return float(np.abs(S).max()) / (2 * np.pi)

    env = np.array(_pool_map(evaluate, list(t), threads))
    meta.update(envelope=env.tolist(), t=t.tolist())
    fit = fit_power_law(np.column_stack([t[keep], env[keep]]))
    return DecayFit(fit.exponent, fit.intercept, fit.residual, fit.n_points, fit.x, fit.v, {}, meta)


@dataclass(frozen=True)
class ExperimentResult:
    """A fitted study judged against its configured target."""

    config: ExperimentConfig
    fit: DecayFit
    passed: bool

    @property
    def name(self) -> str:
        return self.config.name

    def summary(self, tolerance_scale: float = 1.0) -> dict:
        c = self.config
        return {
            "name": c.name,
            "exponent": self.fit.exponent,
            "target": c.target,
            "tolerance": c.tolerance * tolerance_scale,
            "comparison": c.comparison,
            "residual": self.fit.residual,
            "n_points": self.fit.n_points,
            "pass": bool(self.passed),
        }


def run_experiment(config: ExperimentConfig, tolerance_scale: float = 1.0, threads: Optional[int] = None) -> ExperimentResult:
    """Run a configured study and judge its exponent.

    ``growth`` uses the first entry of ``T_list``; ``decay`` uses the first
    entry of ``y_list`` for ``fixed_y``.
    """
    threads = config.threads if threads is None else threads
    if config.kind == "growth":
        if config.data_class is not DataClass.SHARP:
            raise DomainError("growth studies use sharp data")
        T = config.T_list[0]
        cutoff = CutoffSpec(T, config.cutoff_support, config.cutoff_plateau)
        fit = growth_factor_experiment(config.a, T, config.y_list, config.grid_n, threads, cutoff)
    else:
        fit = decay_envelope_experiment(
            config.a, config.data_class, config.t_list, config.mode,
            y=config.y_list[0], gamma=config.gamma, curve=config.curve, threads=threads,
        )
    return ExperimentResult(config, fit, config.passes(fit.exponent, tolerance_scale))


# --------------------------------------------------------------------------
# Klainerman norms
# --------------------------------------------------------------------------

def _l2(f: SpectralField) -> float:
    return float(np.sqrt(np.sum(np.abs(f.coeffs) ** 2) * f.grid.spacing / (2 * np.pi)))


def _riesz(f: SpectralField) -> SpectralField:
    # d/dx |D|^-1 through the negative power, so the zero-mode precondition applies
    return derivative_x(fractional_derivative(f, -1.0))


def _x_dx(f: SpectralField) -> SpectralField:
    return multiply_by_x(derivative_x(f))


_D = fractional_derivative
_X = multiply_by_x

# (name, datum index, operator); the index selects u0 (0) or u1 (1)
_OMEGA_TERMS = (
    ("x u1", 1, _X),
    ("(x dx)(x u1)", 1, lambda f: _x_dx(_X(f))),
    ("dx |D|^-1 u0", 0, _riesz),
    ("x |D| u0", 0, lambda f: _X(_D(f, 1.0))),
    ("x dx u1", 1, _x_dx),
    ("u1", 1, lambda f: f),
)
_OMEGA_T_TERMS = (
    ("x |D|^1/2 u0", 0, lambda f: _X(_D(f, 0.5))),
    ("dx |D|^-3/2 u0", 0, lambda f: derivative_x(_D(f, -1.5))),
    ("(x dx)(dx |D|^-3/2) u0", 0, lambda f: _x_dx(derivative_x(_D(f, -1.5)))),
    ("(x dx)(x |D|^1/2) u0", 0, lambda f: _x_dx(_X(_D(f, 0.5)))),
    ("dx |D|^-1 u1", 1, _riesz),
    ("|D|^1/2 u0", 0, lambda f: _D(f, 0.5)),
    ("|D| u0", 0, lambda f: _D(f, 1.0)),
    ("dx |D|^-1 u0", 0, _riesz),
    ("x dx dx |D|^-1 u0", 0, lambda f: _x_dx(_riesz(f))),
    ("x |D|^1/2 u1", 1, lambda f: _X(_D(f, 0.5))),
    ("dx |D|^-3/2 u1", 1, lambda f: derivative_x(_D(f, -1.5))),
)


@dataclass(frozen=True)
class HighFrequencyCheck:
    """``||Omega u0|| <= sum_{|k|=1} ||Gamma^k u0|| + R^(-1/2) ||u0||``."""

    R: float
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs * (1 + 1e-12)


@dataclass(frozen=True)
class NormTable:
    """Norms of the two vector-field lists.

    ``omega`` and ``omega_t`` map term names to ``L^2`` norms; a term that
    needs a negative power of ``|D|`` on data with zero-frequency mass is
    ``nan`` and listed in ``flagged``.
    """

    omega: Dict[str, float]
    omega_t: Dict[str, float]
    flagged: Tuple[str, ...]
    high_frequency: Optional[HighFrequencyCheck] = None


def _support_radius(f: SpectralField, rel: float = 1e-14) -> float:
    mag = np.abs(f.coeffs)
    if not np.any(mag > 0):
        return np.inf
    big = mag > rel * mag.max()
    return float(np.min(np.abs(f.grid.xi[big])))


def high_frequency_check(u0: SpectralField, R: float) -> HighFrequencyCheck:
    """Compare ``Omega`` with the first-order fields for data in ``|xi| >= R``.

    The datum is read as the half-wave state ``u = e^{i t |D|^(1/2)} u0`` at
    ``t = 0``, so ``Omega u = x u_t = x i |D|^(1/2) u0`` and the fields
    ``d/dt``, ``d/dx`` and ``L`` give ``i |D|^(1/2) u0``, ``d/dx u0`` and
    ``x d/dx u0``.
    """
    if not R > 0:
        raise DomainError("R must be positive")
    state = EvolutionState(StateKind.FIRST_ORDER, u0, 0.0, a=0.5)
    lhs = _l2(apply_vector_field(state, VectorFieldId("Omega")))
    firsts = _l2(state.time_derivative()) + _l2(derivative_x(u0)) + _l2(_x_dx(u0))
    return HighFrequencyCheck(float(R), lhs, firsts + R**-0.5 * _l2(u0))


def klainerman_diagnostics(u0: SpectralField, u1: SpectralField, R: Optional[float] = None) -> NormTable:
    """Every norm in the two explicit lists bounding the ``Omega`` terms.

    Multiplication by ``x`` acts on the periodic lattice, so data should
    decay well inside the box.  ``R`` defaults to the smallest ``|xi|``
    where ``u0_hat`` is significant; the high-frequency check runs when
    that radius is positive.
    """
    if u0.grid != u1.grid:
        raise DomainError("u0 and u1 must share a grid")
    data = (u0, u1)
    flagged = []

    def table(terms):
        out = {}
        for name, k, op in terms:
            try:
                out[name] = _l2(op(data[k]))
            except ZeroModeSingular:
                out[name] = float("nan")
                flagged.append(name)
        return out

    omega = table(_OMEGA_TERMS)
    omega_t = table(_OMEGA_T_TERMS)
    radius = _support_radius(u0) if R is None else float(R)
    check = None
    if np.isfinite(radius) and radius > 0:
        check = high_frequency_check(u0, radius)
    return NormTable(omega, omega_t, tuple(dict.fromkeys(flagged)), check)


# --------------------------------------------------------------------------
# files
# --------------------------------------------------------------------------

def write_fit_csv(path, fit: DecayFit, x_name: str = "x", v_name: str = "value", header_lines: Sequence[str] = ()) -> None:
    """Samples of a fit, one row per point, after ``#`` header lines."""
    try:
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            fh.write(f"# exponent={fit.exponent!r} intercept={fit.intercept!r} residual={fit.residual!r}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([x_name, v_name])
            for xv, vv in zip(fit.x, fit.v):
                w.writerow([repr(float(xv)), repr(float(vv))])
    except OSError as exc:
        raise IoError(str(exc)) from exc
