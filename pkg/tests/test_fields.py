import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
import mpmath
from scipy import integrate

from singdrift.errors import DegenerateTest, DimensionMismatch, InvalidParameter, SingularSample
from singdrift.fields import (
    ConstG,
    FormBoundCertificate,
    PowerG,
    TestFunction,
    TimeLogG,
    ZeroG,
    admissible_q_interval,
    build_field,
    constant_field,
    estimate_form_bound,
    eval_drift,
    hardy_constant,
    make_hardy_drift,
    make_shell_log_drift,
    make_weak_ld_drift,
    morrey_seminorm,
    nested_cubes,
    origin_family,
    random_family,
    rayleigh_quotient,
    strichartz_delta,
    sum_fields,
    zero_field,
)
from singdrift.fields.constants import unit_ball_volume, unit_ball_volume_product_reading


def _bump(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    m = np.abs(s) < 1
    out[m] = np.exp(1 - 1 / (1 - s[m] ** 2))
    return out


# ---------------------------------------------------------------- evaluation


def test_zero_field_evaluates_to_zero():
    assert np.array_equal(eval_drift(zero_field(3), 0.7, [1.0, -2.0, 0.3]), np.zeros(3))


def test_hardy_closed_form_value():
    b = make_hardy_drift(3, 0.01)
    np.testing.assert_allclose(eval_drift(b, 0.0, [1.0, 0.0, 0.0]), [0.05, 0.0, 0.0], rtol=1e-14)


def test_hardy_origin_is_singular():
    with pytest.raises(SingularSample):
        eval_drift(make_hardy_drift(3, 0.04), 0.0, [0.0, 0.0, 0.0])


def test_hardy_magnitude_and_certificate_d3():
    b = make_hardy_drift(3, 0.04)
    x = np.array([[0.3, 0.4, 0.0], [2.0, -1.0, 2.0]])
    np.testing.assert_allclose(np.linalg.norm(b(0.0, x), axis=-1), 0.1 / np.linalg.norm(x, axis=-1), rtol=1e-14)
    assert b.certificate.delta == 0.04
    assert b.certificate.g.antiderivative(5.0) == 0.0


def test_hardy_magnitude_d5():
    b = make_hardy_drift(5, 0.01)
    x = np.array([3.0, 0, 0, 0, 0])
    assert np.linalg.norm(eval_drift(b, 0.0, x)) == pytest.approx(0.05, rel=1e-14)


@pytest.mark.parametrize("kw", [{"delta": 0.0}, {"delta": -1.0}, {"delta": 0.04, "kappa": lambda t: 1.5 + 0 * t}])
def test_hardy_rejects_bad_parameters(kw):
    with pytest.raises(InvalidParameter):
        make_hardy_drift(3, **kw)


@settings(max_examples=50, deadline=None)
@given(
    d=st.integers(3, 6),
    delta=st.floats(1e-4, 1.0),
    x=st.lists(st.floats(-5, 5), min_size=6, max_size=6),
)
def test_hardy_magnitude_property(d, delta, x):
    x = np.asarray(x[:d])
    r = np.linalg.norm(x)
    if r < 1e-3:
        return
    b = make_hardy_drift(d, delta)
    v = eval_drift(b, 0.0, x)
    assert np.linalg.norm(v) == pytest.approx(math.sqrt(delta) * (d - 2) / 2 / r, rel=1e-12)
    assert np.dot(v, x) > 0


def test_eval_is_pure():
    b = make_hardy_drift(3, 0.04)
    x = np.array([0.2, 0.1, -0.4])
    assert np.array_equal(eval_drift(b, 0.3, x), eval_drift(b, 0.3, x.copy()))


@pytest.mark.parametrize(
    "fid,params",
    [
        ("hardy", {}),
        ("hardy", {"omega": 2.0}),
        ("hardy-time", {}),
        ("shell-log", {}),
        ("lps", {}),
        ("weak-ld", {}),
        ("zero", {}),
        ("sum:hardy+weak-ld", {"left": {"delta": 0.01}, "right": {}}),
    ],
)
def test_catalog_builds_and_is_finite_off_locus(fid, params):
    b = build_field(fid, params)
    rng = np.random.default_rng(0)
    x = rng.uniform(-1.5, 1.5, size=(200, b.d))
    for t in (0.1, 0.9):
        assert np.all(np.isfinite(b(t, x)))


def test_unknown_field_id():
    with pytest.raises(InvalidParameter):
        build_field("nope")


# ---------------------------------------------------------------- shell-log


def test_shell_log_value_at_e_inverse():
    b = make_shell_log_drift(C=1.0, a=0.5, c=2.0)
    x = np.array([1 + math.exp(-1), 0.0, 0.0])
    assert float(b.norm_sq(0.0, x[None])[0]) == pytest.approx(math.e, rel=1e-12)


def test_shell_log_vanishes_outside_shell():
    b = make_shell_log_drift(a=0.5)
    assert np.array_equal(eval_drift(b, 0.0, [2.0, 0.0, 0.0]), np.zeros(3))


@pytest.mark.parametrize("kw", [{"C": 0.0}, {"a": 1.0}, {"c": 1.0}])
def test_shell_log_parameter_ranges(kw):
    with pytest.raises(InvalidParameter):
        make_shell_log_drift(**kw)


def _shell_mass(b, power, eps, a=0.5):
    # 1-D mass of |b|^power along the outer half of a ray, in the variable log u
    y = np.linspace(math.log(eps), math.log(a) - 1e-12, 4001)
    u = np.exp(y)
    x = np.zeros((len(u), 3))
    x[:, 0] = 1 + u
    vals = b.norm_sq(0.0, x) ** (power / 2) * u
    return float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(y)))


def test_shell_log_locally_l2_not_l25():
    b = make_shell_log_drift(C=1.0, a=0.5, c=2.0)
    # closed form of int_eps^a du / (u ln(1/u)^2) = 1/ln(1/a) - 1/ln(1/eps)
    for eps in (1e-4, 1e-8):
        exact = 1 / math.log(2.0) - 1 / math.log(1 / eps)
        assert _shell_mass(b, 2.0, eps) == pytest.approx(exact, rel=1e-3)
    # L^2.5: the mass keeps growing as the lattice refines toward the shell
    m25 = [_shell_mass(b, 2.5, eps) for eps in (1e-4, 1e-8, 1e-12)]
    assert m25[2] - m25[1] > m25[1] - m25[0] > 0
    m2 = [_shell_mass(b, 2.0, eps) for eps in (1e-4, 1e-8, 1e-12)]
    assert 0 < m2[2] - m2[1] < m2[1] - m2[0]


# ---------------------------------------------------------------- constants


def test_strichartz_zero_norm():
    assert strichartz_delta(0.0, 3) == 0.0


def test_strichartz_d3_factor_two():
    n = 0.3
    expected = (n * unit_ball_volume(3) ** (-1 / 3) * 2.0) ** 2
    assert strichartz_delta(n, 3) == pytest.approx(expected, rel=1e-14)


def test_strichartz_d4_against_monte_carlo_volume():
    rng = np.random.default_rng(1)
    pts = rng.uniform(-1, 1, size=(2_000_000, 4))
    vol = 16.0 * np.mean(np.sum(pts * pts, axis=1) < 1.0)
    expected = (1.0 * vol ** (-1 / 4) * 1.0) ** 2
    assert strichartz_delta(1.0, 4) == pytest.approx(expected, rel=2e-3)


def test_unit_ball_readings_differ():
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)
    assert unit_ball_volume_product_reading(3) != pytest.approx(unit_ball_volume(3))


def test_admissible_q_interval_endpoints():
    assert admissible_q_interval(3, 0.01) == pytest.approx((3.0, 10.0))


def test_weak_ld_norm_against_monte_carlo():
    A = 0.05
    b = make_weak_ld_drift(3, A)
    # homogeneous of degree -1: the weak L^3 norm is |{|b| > 1}|^(1/3)
    rng = np.random.default_rng(2)
    R = A * 1.5
    pts = rng.uniform(-R, R, size=(2_000_000, 3))
    frac = np.mean(b.norm_sq(0.0, pts) > 1.0)
    norm = ((2 * R) ** 3 * frac) ** (1 / 3)
    assert b.params["weak_ld_norm"] == pytest.approx(norm, rel=5e-3)
    assert b.certificate.delta == pytest.approx(strichartz_delta(norm, 3), rel=2e-2)


# ---------------------------------------------------------------- certificates


@settings(max_examples=40, deadline=None)
@given(
    kind=st.sampled_from(["zero", "const", "power", "log"]),
    ts=st.lists(st.floats(0, 3), min_size=2, max_size=8),
)
def test_antiderivative_zero_at_origin_and_nondecreasing(kind, ts):
    g = {
        "zero": ZeroG(),
        "const": ConstG(0.7),
        "power": PowerG(0.3, 0.5, 0.6),
        "log": TimeLogG(0.05, 0.5, 0.5),
    }[kind]
    assert float(g.antiderivative(0.0)) == 0.0
    ts = sorted(ts)
    G = [float(g.antiderivative(t)) for t in ts]
    assert all(b >= a - 1e-12 for a, b in zip(G, G[1:]))


def test_power_g_antiderivative_against_quad():
    g = PowerG(0.3, 0.5, 0.6)
    ref = integrate.quad(lambda t: 0.3 * abs(t - 0.5) ** -0.6, 0, 1.2, points=[0.5], limit=200)[0]
    assert float(g.antiderivative(1.2)) == pytest.approx(ref, rel=1e-6)


def test_time_log_g_antiderivative_against_quad():
    g = TimeLogG(0.05, 0.5, 0.5)
    # the 1/(s log^1.5) tail is too slow for direct quadrature; integrate in y = -ln s out to infinity
    f = lambda y: 0.05 * mpmath.log(mpmath.e + mpmath.exp(y)) ** (-1.5)
    ref = 2 * float(mpmath.quad(f, [mpmath.log(2), 10, 100, mpmath.inf]))
    assert float(g.antiderivative(1.0)) == pytest.approx(ref, rel=1e-5)


def test_certificate_record_round_trip():
    c = FormBoundCertificate(0.02, PowerG(0.3, 0.5, 0.6), "young-lps")
    back = FormBoundCertificate.from_record(c.to_record())
    assert back.delta == c.delta and back.provenance == c.provenance
    assert float(back.G(0.9)) == pytest.approx(float(c.G(0.9)))


def test_certificate_rejects_unknown_provenance():
    with pytest.raises(InvalidParameter):
        FormBoundCertificate(0.1, ZeroG(), "folklore")


# ---------------------------------------------------------------- test functions


def test_test_function_gradient_matches_finite_differences():
    phi = TestFunction((0.1, -0.2, 0.3), 0.8, power=0.5, core=0.2)
    rng = np.random.default_rng(3)
    dirs = rng.normal(size=(1000, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    x = np.asarray(phi.center) + dirs * (0.85 * phi.radius * rng.uniform(0.05, 1, size=(1000, 1)))
    h = 1e-6
    fd = np.stack([(phi(0.5, x + h * e) - phi(0.5, x - h * e)) / (2 * h) for e in np.eye(3)], axis=-1)
    g = phi.gradient(0.5, x)
    err = np.linalg.norm(fd - g, axis=1) / np.maximum(np.linalg.norm(g, axis=1), 1e-3 * np.abs(g).max())
    assert err.max() <= 1e-6


def test_test_function_support():
    phi = TestFunction((0.0, 0.0, 0.0), 0.5, t_center=1.0, tau=0.25)
    x_out = np.array([[0.51, 0, 0], [0, 0, -0.7]])
    assert np.all(phi(1.0, x_out) == 0) and np.all(phi.gradient(1.0, x_out) == 0)
    assert phi(1.3, np.zeros((1, 3)))[0] == 0


# ---------------------------------------------------------------- Rayleigh quotients


def _radial_hardy_quotient(delta, R):
    # independent radial quadrature for a centered plain bump, d = 3
    chi = lambda r: float(_bump(np.array(r / R)))
    dchi = lambda r: chi(r) * (-2 * (r / R) / (1 - (r / R) ** 2) ** 2) / R if r < R else 0.0
    num = integrate.quad(lambda r: chi(r) ** 2, 0, R, limit=200)[0]  # r^2 |x|^-2 cancels
    den = integrate.quad(lambda r: dchi(r) ** 2 * r * r, 0, R, limit=200)[0]
    return delta / 4 * num / den


@pytest.mark.parametrize("R", [0.3, 1.0, 2.5])
def test_hardy_quotient_matches_radial_oracle(R):
    b = make_hardy_drift(3, 0.04)
    phi = TestFunction((0.0, 0.0, 0.0), R)
    assert rayleigh_quotient(b, phi) == pytest.approx(_radial_hardy_quotient(0.04, R), rel=5e-3)


def test_hardy_quotient_dilation_invariant():
    b = make_hardy_drift(3, 0.04)
    qs = [rayleigh_quotient(b, TestFunction((0.0, 0.0, 0.0), R, power=0.5, core=0.05)) for R in (0.1, 1.0, 3.0)]
    assert max(qs) / min(qs) - 1 < 5e-3


def test_zero_field_quotient_is_zero():
    assert rayleigh_quotient(zero_field(3), TestFunction((0.0, 0.0, 0.0), 1.0)) == 0.0


def test_constant_field_with_matching_g_nonpositive():
    c = constant_field([0.3, 0.4, 0.0])
    phi = TestFunction((0.2, 0.0, 0.0), 0.7)
    assert rayleigh_quotient(c, phi, ConstG(0.25)) <= 1e-12


def test_hardy_quotient_below_delta_for_random_bumps():
    b = make_hardy_drift(3, 0.04)
    for phi in random_family(3, seed=4)(12):
        q = rayleigh_quotient(b, phi)
        assert 0.0 <= q <= 0.04 * 1.005


def test_hardy_constant_radial_oracle():
    # Hardy's constant (2/(d-2))^2 approached by r^{-(d-2)/2} profiles with a soft core
    d = 3
    best = []
    for core in (1e-2, 1e-4):
        phi = TestFunction((0.0, 0.0, 0.0), 1.0, power=0.5, core=core)
        best.append(rayleigh_quotient(make_hardy_drift(d, 1.0), phi))
    # quotient -> delta * (d-2)^2/4 * (d-2)^-2 * 4 = delta from below
    assert best[0] < best[1] <= 1.0 + 5e-3
    assert hardy_constant(d) == pytest.approx(4.0)


def test_degenerate_test_function_detected():
    b = make_hardy_drift(3, 0.04)
    flat = TestFunction((0.0, 0.0, 0.0), 1e8)
    with pytest.raises(DegenerateTest):
        rayleigh_quotient(b, flat)


# ---------------------------------------------------------------- estimates


def test_estimate_zero_field():
    assert estimate_form_bound(zero_field(3), origin_family(3), 8) == 0.0


def test_estimate_hardy_in_band():
    est = estimate_form_bound(make_hardy_drift(3, 0.04), origin_family(3), 32)
    assert 0.02 <= est <= 0.04


def test_estimate_bounded_field_with_sup_g():
    c = constant_field([0.0, 0.5, 0.0])
    assert estimate_form_bound(c, random_family(3, seed=1), 8, ConstG(0.25)) <= 1e-12


@pytest.mark.parametrize("fid", ["hardy", "hardy-time", "shell-log", "lps", "weak-ld"])
def test_estimate_never_exceeds_certificate(fid):
    b = build_field(fid)
    est = estimate_form_bound(b, random_family(3, seed=7), 8)
    assert est <= b.certificate.delta * 1.05


def test_estimate_budget_must_be_positive():
    with pytest.raises(InvalidParameter):
        estimate_form_bound(zero_field(3), origin_family(3), 0)


# ---------------------------------------------------------------- Morrey


def test_morrey_zero_field():
    assert morrey_seminorm(zero_field(3), 1.5, nested_cubes((0, 0, 0), [1.0]), 1) == 0.0


def test_morrey_hardy_scale_invariant():
    b = make_hardy_drift(3, 4.0)  # |b| = 1/|x|
    vals = [morrey_seminorm(b, 1.2, nested_cubes((0, 0, 0), [side]), 1) for side in (0.01, 0.1, 1.0)]
    assert max(vals) / min(vals) - 1 < 0.02


def test_morrey_bounded_field_shrinks():
    c = constant_field([0.0, 0.0, 2.0])
    for side in (1.0, 0.1):
        assert morrey_seminorm(c, 1.5, nested_cubes((0.3, 0, 0), [side]), 1) <= 4.0 * side**2 * (1 + 1e-9)


def test_morrey_rejects_small_s():
    with pytest.raises(InvalidParameter):
        morrey_seminorm(zero_field(3), 1.0, nested_cubes((0, 0, 0), [1.0]), 1)


# ---------------------------------------------------------------- sums


def test_sum_with_zero_keeps_field():
    b = make_hardy_drift(3, 0.04)
    s = sum_fields(b, zero_field(3))
    assert s is b or (s.certificate == b.certificate and s.field_id == b.field_id)


def test_sum_rule_delta():
    s = sum_fields(make_hardy_drift(3, 0.01), make_hardy_drift(3, 0.01))
    assert s.certificate.delta == pytest.approx(0.04, rel=1e-14)
    assert s.certificate.provenance == "sum-rule"
    assert estimate_form_bound(s, origin_family(3), 16) <= 0.04 * 1.05


def test_sum_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        sum_fields(make_hardy_drift(3, 0.01), make_hardy_drift(4, 0.01))


@settings(max_examples=30, deadline=None)
@given(d1=st.floats(1e-4, 0.1), d2=st.floats(1e-4, 0.1))
def test_sum_rule_square_roots_add(d1, d2):
    s = sum_fields(make_hardy_drift(3, d1), make_hardy_drift(3, d2))
    assert math.sqrt(s.certificate.delta) == pytest.approx(math.sqrt(d1) + math.sqrt(d2), rel=1e-12)
