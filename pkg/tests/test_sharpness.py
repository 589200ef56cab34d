import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from dispersive_lab.errors import (
    DomainError,
    GridTooNarrow,
    HypothesisViolated,
    RangeError,
    SignChange,
)
from dispersive_lab.oscillatory import CutoffSpec, fresnel_kernel
from dispersive_lab.sharpness import (
    JacobianSpec,
    LowFreqDatum,
    SharpDatum,
    build_lowfreq_data,
    build_sharp_data,
    constant_Cg,
    endpoint_formula,
    fold_integral_xi,
    jacobian_eval,
    jacobian_min,
    keysharp_both_sides,
    lower_bound_chain,
    lowfreq_lower_bound_check,
    lq_pointwise_ratios,
    lq_profile,
    polynomial_bump,
    smooth_bump,
    write_jacobian_csv,
    write_sharpness_json,
)
from dispersive_lab.spectral import FrequencyGrid, SobolevIndex, sobolev_norm

ORDERS = [0.25, 0.75, 1.5, 2.5, 3.0]
YS = [0.5, 1.0, 2.0]


def jacobian_direct(a, y, xi):
    """Textbook formulas, used away from the removable point."""
    x1 = (y / a) ** (1 / (a - 1))
    s = np.sign(xi + x1)
    if a > 1:
        return 2 * s * np.sqrt(y * xi + abs(xi) ** a + (a - 1) * x1**a) / (y - a * abs(xi) ** (a - 1))
    return -2 * s * np.sqrt((1 - a) * x1**a - y * xi - abs(xi) ** a) / (y * abs(xi) ** (1 - a) - a)


# -- Jacobian ----------------------------------------------------------------

def test_fold_geometry_a2():
    s = JacobianSpec(2.0, 2.0)
    assert s.xi1 == pytest.approx(-1.0)
    assert s.Xi1 == pytest.approx(1.0)
    assert s.left == pytest.approx(-2.0)


@pytest.mark.parametrize("y", [0.3, 1.0, 2.0, 7.0])
def test_jacobian_constant_at_a2(y):
    s = JacobianSpec(2.0, y)
    v = jacobian_eval(s, np.linspace(s.left, 0.0, 10_000))
    assert np.max(np.abs(v - 1.0)) <= 1e-10


@pytest.mark.parametrize("y", [0.3, 1.0, 2.0])
def test_jacobian_constant_at_half(y):
    s = JacobianSpec(0.5, y)
    v = jacobian_eval(s, np.linspace(s.left, 0.0, 10_000))
    assert np.max(np.abs(v - 2 / np.sqrt(y))) <= 1e-10 * 2 / np.sqrt(y)


@pytest.mark.parametrize("a", ORDERS)
@pytest.mark.parametrize("y", YS)
def test_jacobian_matches_direct_formula(a, y):
    s = JacobianSpec(a, y)
    xs = np.linspace(s.left, 0.0, 401)[1:-1]
    xs = xs[np.abs(xs - s.xi1) > 1e-2 * abs(s.xi1)]
    direct = np.array([jacobian_direct(a, y, x) for x in xs])
    assert np.allclose(jacobian_eval(s, xs), direct, rtol=1e-11)


@pytest.mark.parametrize("a", ORDERS + [0.5, 2.0])
@pytest.mark.parametrize("y", YS)
def test_jacobian_continuity_at_critical_point(a, y):
    s = JacobianSpec(a, y)
    eps = 1e-9 * abs(s.xi1)
    for side in (-eps, eps):
        assert jacobian_eval(s, s.xi1 + side) == pytest.approx(s.limit_at_xi1, rel=1e-6)


def test_reference_limit_a_gt_1():
    a, y = 3.0, 1.0
    s = JacobianSpec(a, y)
    x1 = abs(s.xi1)
    assert s.limit_at_xi1 == pytest.approx(np.sqrt(2) * (a * (a - 1) * x1 ** (a - 2)) ** -0.5)


def test_a3_y1_endpoint_values():
    s = JacobianSpec(3.0, 1.0)
    j0 = 2 * np.sqrt(2) * 3**-0.75
    assert jacobian_eval(s, 0.0) == pytest.approx(j0, rel=1e-12)
    assert j0 == pytest.approx(1.24081, abs=5e-6)
    assert endpoint_formula(s, 0.0) == pytest.approx(j0, rel=1e-12)
    # the far endpoint is smaller by the factor a - 1 = 2
    assert jacobian_eval(s, -1.0) == pytest.approx(j0 / 2, rel=1e-12)
    m = jacobian_min(s)
    assert m.argmin == pytest.approx(-1.0, abs=1e-8)
    assert m.value == pytest.approx(j0 / 2, rel=1e-10)


@pytest.mark.parametrize("a", ORDERS)
@pytest.mark.parametrize("y", YS)
def test_minimum_at_monotone_endpoint(a, y):
    m = jacobian_min(JacobianSpec(a, y))
    assert m.at_monotone
    assert abs(m.argmin - m.monotone) <= 1e-6 * abs(JacobianSpec(a, y).left)


@pytest.mark.parametrize("a", [0.25, 0.4, 0.75, 0.9])
@pytest.mark.parametrize("y", YS)
def test_case_list_holds_below_one(a, y):
    assert jacobian_min(JacobianSpec(a, y)).at_predicted


@pytest.mark.parametrize("a", [1.5, 2.5, 3.0])
def test_case_list_labels_swapped_above_one(a):
    # the reference endpoint values themselves order the other way
    m = jacobian_min(JacobianSpec(a, 1.0))
    assert not m.at_predicted
    assert m.predicted_value / m.value == pytest.approx(max(a - 1, 1 / (a - 1)), rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 3.5).filter(lambda a: min(abs(a - 1), abs(a - 2), abs(a - 0.5)) > 0.02), st.floats(0.1, 5.0))
def test_monotonicity_sign(a, y):
    s = JacobianSpec(a, y)
    d = np.diff(jacobian_eval(s, np.linspace(s.left, 0.0, 10_000)))
    scale = 1e-12 * jacobian_eval(s, s.xi1)
    increasing = a > 2 or a < 0.5
    assert np.all(d >= -scale) if increasing else np.all(d <= scale)


@pytest.mark.parametrize("a", ORDERS)
@pytest.mark.parametrize("y", YS)
def test_radicand(a, y):
    s = JacobianSpec(a, y)
    xs = np.linspace(s.left, 0.0, 10_001)
    r = s.radicand(xs)
    assert np.all(r >= -1e-12)
    assert s.radicand(s.xi1) == 0.0
    x1 = abs(s.xi1)
    direct = y * xs + np.abs(xs) ** a + (a - 1) * x1**a
    assert np.allclose(r, direct if a > 1 else -direct, atol=1e-12 * max(1.0, x1**a))


@pytest.mark.parametrize("a", ORDERS)
@pytest.mark.parametrize("y", YS)
def test_endpoint_closed_forms(a, y):
    s = JacobianSpec(a, y)
    assert endpoint_formula(s, s.left) == pytest.approx(jacobian_eval(s, s.left), rel=1e-12)
    ratio = jacobian_eval(s, 0.0) / endpoint_formula(s, 0.0)
    # reference value at 0 for a < 1 is off by a^2
    assert ratio == pytest.approx(a**-2 if a < 1 else 1.0, rel=1e-12)


def test_jacobian_domain():
    s = JacobianSpec(1.5, 1.0)
    with pytest.raises(DomainError):
        jacobian_eval(s, 0.1)
    with pytest.raises(DomainError):
        jacobian_eval(s, s.left * 1.01)
    with pytest.raises(DomainError):
        JacobianSpec(1.0, 1.0)
    with pytest.raises(DomainError):
        JacobianSpec(2.0, 0.0)
    with pytest.raises(DomainError):
        endpoint_formula(s, 0.5 * s.left)


def test_jacobian_csv(tmp_path):
    rows = [jacobian_min(JacobianSpec(a, 1.0), points=200) for a in (0.25, 3.0)]
    path = tmp_path / "jac.csv"
    write_jacobian_csv(path, rows, ["sweep"])
    lines = path.read_text().splitlines()
    assert lines[0] == "# sweep"
    assert lines[1] == "a,y,argmin_xi,min_value,endpoint_formula_value"
    vals = [float(v) for v in lines[3].split(",")]
    assert vals[0] == 3.0 and vals[3] == pytest.approx(rows[1].value)


# -- fold integral and identities ----------------------------------------------

def test_cg_zero_transform():
    d = SharpDatum.gaussian(2.0, 1.0, amplitude=0.0)
    assert constant_Cg(d) == 0.0


@pytest.mark.parametrize("a", [0.25, 2.0, 3.0])
def test_cg_scaling(a):
    d = SharpDatum.gaussian(a, 1.0, center=0.3)
    assert constant_Cg(d.scaled(3.0 - 4.0j)) == pytest.approx(25 * constant_Cg(d), rel=1e-12)


def test_cg_a2_y2_oracles():
    d = SharpDatum.gaussian(2.0, 2.0)
    assert d.jacobian.Xi1 == pytest.approx(1.0)
    value = constant_Cg(d)
    # QUADPACK algebraic-weight rule on the original square-root form
    ref, _ = quad(lambda z: np.exp(-((z - 1) ** 2)), 0.0, 1.0, weight="alg", wvar=(-0.5, 0.0), epsabs=0, epsrel=1e-13)
    assert value == pytest.approx(ref, rel=1e-8)
    # ten times refined composite Gauss-Legendre in zeta = s^2
    u, w = np.polynomial.legendre.leggauss(20)
    edges = np.linspace(0, 1, 401)
    s = (0.5 * (edges[:-1] + edges[1:]))[:, None] + 0.5 * np.diff(edges)[:, None] * u
    fine = 2 * np.sum(0.5 * np.diff(edges)[:, None] * w * np.exp(-((s * s - 1) ** 2)))
    assert value == pytest.approx(fine, rel=1e-8)


@pytest.mark.parametrize("a", [0.25, 0.5, 0.75, 1.5, 2.0, 3.0])
@pytest.mark.parametrize("y", YS)
def test_cg_two_parametrisations(a, y):
    d = SharpDatum.gaussian(a, y, center=-0.2, width=0.8)
    assert fold_integral_xi(d) == pytest.approx(constant_Cg(d), rel=1e-7)


@pytest.mark.parametrize("a", [2.0, 0.5])
@pytest.mark.parametrize("y", YS)
def test_exact_identities(a, y):
    r = keysharp_both_sides(SharpDatum.gaussian(a, y))
    assert r.exact and r.holds
    assert abs(r.slack) <= 1e-6 * r.lhs


def test_identity_a2_against_quadpack():
    y = 1.0
    F = lambda z: np.exp(-(z**2))
    lhs = sum(quad(lambda x: abs(x) * F(y * x + x * x), lo, hi, epsabs=0, epsrel=1e-12)[0]
              for lo, hi in [(-12, -y), (-y, -y / 2), (-y / 2, 0), (0, 12)])
    rhs = quad(F, 0, 12, epsabs=0, epsrel=1e-12)[0] + y / 2 * quad(
        lambda z: F(z - y * y / 4), 0, y * y / 4, weight="alg", wvar=(-0.5, 0), epsabs=0, epsrel=1e-12)[0]
    assert lhs == pytest.approx(rhs, rel=1e-9)
    r = keysharp_both_sides(SharpDatum.gaussian(2.0, y))
    assert r.lhs == pytest.approx(lhs, rel=1e-9)


def test_inequality_a_three_halves():
    r = keysharp_both_sides(SharpDatum.gaussian(1.5, 1.0))
    assert not r.exact and r.holds and r.lhs >= r.rhs


@pytest.mark.parametrize("a", [0.25, 0.75, 2.5, 3.0])
def test_inequality_other_orders(a):
    r = keysharp_both_sides(SharpDatum.gaussian(a, 1.0, center=0.5))
    assert r.holds and r.slack >= 0


# -- extremal data from a time profile ---------------------------------------------

def profile_datum(a, y, T=8.0):
    phi = CutoffSpec(T, (1.0, 2.0), (1.25, 1.75))
    depth = JacobianSpec(a, y).depth
    z0 = -depth if a > 1 else depth
    g = lambda t: np.exp(1j * z0 * t) / np.sqrt(T)
    return SharpDatum.from_profile(a, y, g, phi, T, g_rate=abs(z0))


def test_from_profile_validation():
    T = 4.0
    phi = CutoffSpec(T, (1.0, 2.0), (1.25, 1.75))
    with pytest.raises(DomainError):
        SharpDatum.from_profile(2.0, 1.0, lambda t: 0 * t + 1.0, phi, T)
    with pytest.raises(DomainError):
        SharpDatum.from_profile(2.0, 1.0, lambda t: 0 * t + T**-0.5, CutoffSpec(T), T)
    with pytest.raises(DomainError):
        SharpDatum.gaussian(2.0, -1.0)


def test_sharp_data_on_grid():
    d = SharpDatum.gaussian(2.0, 2.0)
    u0 = build_sharp_data(d)
    assert u0.coeffs[u0.grid.zero_index] == 0
    rep = keysharp_both_sides(d)
    norm = sobolev_norm(u0, SobolevIndex(-0.5))
    assert np.isfinite(norm)
    # the squared norm is the same integral as the left side
    assert norm**2 == pytest.approx(rep.lhs, rel=1e-4)
    assert rep.lhs >= 0


def test_grid_too_narrow():
    with pytest.raises(GridTooNarrow):
        build_sharp_data(SharpDatum.gaussian(2.0, 1.0, center=3.0), FrequencyGrid(64, 0.5))


def test_lower_bound_chain():
    d = profile_datum(2.0, 1.0)
    c = lower_bound_chain(d)
    assert c.holds
    assert c.pairing == pytest.approx(c.lhs, rel=1e-8)
    assert c.trajectory_norm >= c.pairing >= c.bound > 0


def test_profile_identity_a_half():
    r = keysharp_both_sides(profile_datum(0.5, 0.5))
    assert r.exact and abs(r.slack) <= 1e-6 * r.lhs


# -- low-frequency data ----------------------------------------------------------

def test_lowfreq_range():
    with pytest.raises(RangeError):
        LowFreqDatum(-0.3)
    with pytest.raises(RangeError):
        build_lowfreq_data(-0.25)
    with pytest.raises(DomainError):
        LowFreqDatum(0.1, lambda x: np.exp(-np.asarray(x) ** 2))


def test_lowfreq_profile_and_support():
    u0 = build_lowfreq_data(0.0)
    xi = u0.grid.xi
    nz = (xi != 0) & (np.abs(xi) < 1)
    expect = np.abs(xi[nz]) ** -0.5 * np.sign(xi[nz]) * smooth_bump(xi[nz])
    assert np.allclose(u0.coeffs[nz], expect, rtol=1e-14)
    assert np.all(u0.coeffs[np.abs(xi) >= 1] == 0)
    assert u0.coeffs[u0.grid.zero_index] == 0


@pytest.mark.parametrize("gamma", [-0.2, 0.5])
@pytest.mark.parametrize("z", [0.0, 0.7, -3.0, 40.0])
def test_spatial_profile_against_quadpack(gamma, z):
    d = LowFreqDatum(gamma)
    f = lambda x, s: x**gamma * smooth_bump(s * x)
    re = sum(quad(lambda x: f(x, s) * np.cos(s * z * x), 0, 1, epsabs=0, epsrel=1e-12, limit=400)[0] for s in (1, -1))
    im = sum(quad(lambda x: f(x, s) * np.sin(s * z * x), 0, 1, epsabs=0, epsrel=1e-12, limit=400)[0] for s in (1, -1))
    ref = -1j / (2 * np.pi) * (re + 1j * im)
    assert d.spatial(z)[0] == pytest.approx(ref, rel=1e-8, abs=1e-13)


@pytest.mark.parametrize("gamma", [-0.2, 0.5])
def test_spatial_tail_power_law(gamma):
    d = LowFreqDatum(gamma)
    cp, cm = d.tail_constants()
    z = 4096.0
    assert abs(d.spatial(z)[0]) == pytest.approx(cp * z ** -(1 + gamma), rel=1e-5)
    assert abs(d.spatial(-z)[0]) == pytest.approx(cm * z ** -(1 + gamma), rel=1e-5)


def test_lq_gamma_positive():
    r = lq_profile(LowFreqDatum(0.5), [3, 4, 8])
    assert np.all(r.convergent)
    assert np.allclose(r.shell_exponents, r.predicted, atol=0.02)


def test_lq_gamma_negative():
    r = lq_profile(LowFreqDatum(-0.2), [3, 4])
    assert list(r.convergent) == [False, True]
    assert np.allclose(r.shell_exponents, [0.1, -0.2], atol=0.02)
    # divergent norms keep growing, convergent ones settle
    assert r.norms[0, -1] > 1.5 * r.norms[0, 19]
    assert r.norms[1, -1] == pytest.approx(r.norms[1, -5], rel=1e-3)
    assert r.tail_mismatch < 1e-6


def test_envelope_bounds_evolution():
    d = LowFreqDatum(-0.2)
    r = lq_profile(d, [4])
    ratios = lq_pointwise_ratios(d, r, [1.0, 3.0, 10.0, 30.0], [-1.0, -0.3, 0.1, 0.5, 1.0, 2.0])
    xs = np.geomspace(1e-3, 1e3, 41)
    kernel_const = max(abs(fresnel_kernel(s * x).k) * np.sqrt(x) for x in xs for s in (1, -1))
    assert np.all(np.isfinite(ratios))
    assert ratios.max() <= kernel_const


def test_envelope_domain():
    r = lq_profile(LowFreqDatum(0.5), [3])
    with pytest.raises(DomainError):
        r.envelope(2.0**45)


# -- pointwise lower bound -------------------------------------------------------

def test_polynomial_bump_transform():
    M = 64.0
    phi, phi_hat = polynomial_bump(M, 4)
    for xi in (0.0, 1e-5, 30.0, 700.0, -2000.0):
        re = quad(lambda x: phi(x) * np.cos(x * xi), -1 / M, 1 / M, epsabs=0, epsrel=1e-12, limit=200)[0]
        assert phi_hat(np.array([xi]))[0] == pytest.approx(re, rel=1e-8, abs=1e-16)


def test_lower_bound_example():
    M, delta, t = 64.0, np.pi / 128, 100.0
    phi, phi_hat = polynomial_bump(M, 4)
    rep = lowfreq_lower_bound_check(phi, M, delta, [2 / t, delta / 2, delta], t, phi_hat=phi_hat)
    assert rep.all_hold


def test_lower_bound_quadrature_transform_small_t():
    M, delta, t = 64.0, np.pi / 128, 20.0
    phi, phi_hat = polynomial_bump(M, 4)
    y = [0.01, delta]
    a = lowfreq_lower_bound_check(phi, M, delta, y, t, c_lower=0.2, n=2**12)
    b = lowfreq_lower_bound_check(phi, M, delta, y, t, phi_hat=phi_hat, c_lower=0.2, n=2**12)
    assert np.allclose(a.lhs, b.lhs, rtol=1e-8)
    assert a.all_hold


def test_lower_bound_zero_and_errors():
    M, delta, t = 64.0, np.pi / 128, 100.0
    rep = lowfreq_lower_bound_check(lambda x: 0 * np.asarray(x), M, delta, [0.02], t)
    assert rep.lhs[0] == 0 and rep.rhs[0] == 0 and rep.all_hold
    with pytest.raises(SignChange):
        lowfreq_lower_bound_check(lambda x: np.sin(200 * np.asarray(x)), M, delta, [0.02], t)
    phi, _ = polynomial_bump(M)
    with pytest.raises(HypothesisViolated):
        lowfreq_lower_bound_check(phi, 4.0, delta, [0.02], t)
    with pytest.raises(HypothesisViolated):
        lowfreq_lower_bound_check(phi, M, np.pi / 64, [0.02], t)
    with pytest.raises(HypothesisViolated):
        lowfreq_lower_bound_check(phi, M, delta, [0.001], t)


def test_sharpness_json(tmp_path):
    path = tmp_path / "s.json"
    write_sharpness_json(path, [0.1, 0.2], [3.0, 4.0], [1.0, 2.0], {"M": 64})
    doc = json.loads(path.read_text())
    assert doc["y"] == [0.1, 0.2] and doc["lhs"] == [3.0, 4.0] and doc["meta"]["M"] == 64
