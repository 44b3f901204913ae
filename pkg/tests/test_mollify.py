import math

import numpy as np
import pytest

from singdrift.errors import InvalidParameter, ScheduleFailure, UnboundedInput
from singdrift.fields import (
    ConstG,
    DriftField,
    FormBoundCertificate,
    ZeroG,
    build_field,
    constant_field,
    estimate_form_bound,
    origin_family,
    sobolev_constant,
    zero_field,
)
from singdrift.mollify import (
    LatticeSpec,
    build_approximation,
    build_sequence,
    default_gamma_rule,
    heat_smooth,
    l2loc_distance,
    scaling_factor,
    truncate,
)

SMALL = LatticeSpec(half_width=3.0, cells=48)


@pytest.fixture(scope="module")
def hardy():
    return build_field("hardy", {"d": 3, "delta": 0.04})


@pytest.fixture(scope="module")
def hardy_sequence(hardy):
    return {m: build_approximation(hardy, hardy.certificate, m) for m in (4, 8, 16)}


def _gauss_bump(d=3, width=0.8):
    def fn(t, x):
        x = np.asarray(x, dtype=float)
        v = np.exp(-np.sum(x * x, axis=-1) / (2 * width**2))
        out = np.zeros(x.shape)
        out[..., 0] = v
        return out

    return DriftField(d=d, fn=fn, sup_bound=1.0, stationary=True, field_id="bump",
                      certificate=FormBoundCertificate(0.04, ConstG(1.0), "hölder-sobolev-Ld"))


# ------------------------------------------------------------------ truncate


def test_truncate_zero_field_is_zero():
    z = zero_field(3)
    assert truncate(z, 5) is z


def test_truncate_rejects_level_below_one(hardy):
    with pytest.raises(InvalidParameter):
        truncate(hardy, 0)


def test_truncate_hardy_zeroes_small_ball(hardy):
    m = 4
    tb = truncate(hardy, m)
    r0 = 0.1 / m
    e = np.array([1.0, 0.0, 0.0])
    inside = tb(0.5, (0.9 * r0) * e)
    outside = tb(0.5, (1.1 * r0) * e)
    assert np.all(inside == 0.0)
    np.testing.assert_allclose(outside, hardy(0.5, (1.1 * r0) * e), rtol=1e-14)
    assert np.all(tb(0.5, (m + 0.1) * e) == 0.0)
    assert np.all(tb(m + 0.1, e) == 0.0)
    assert np.all(tb(-0.1, e) == 0.0)
    assert tb.sup_bound == m
    assert tb.certificate == hardy.certificate


def test_truncate_does_not_raise_quotient(hardy):
    fam = origin_family(3, seed=1)
    raw = estimate_form_bound(hardy, fam, 6)
    cut = estimate_form_bound(truncate(hardy, 4).with_certificate(hardy.certificate), fam, 6)
    assert cut <= raw + 1e-3 * abs(raw)


# ------------------------------------------------------------------ heat_smooth


def test_heat_smooth_zero_field():
    out = heat_smooth(zero_field(3), 0.01, SMALL)
    assert np.all(out(0.3, np.random.default_rng(0).uniform(-2, 2, (20, 3))) == 0.0)


def test_heat_smooth_requires_bound(hardy):
    with pytest.raises(UnboundedInput):
        heat_smooth(hardy, 0.01)


def test_heat_smooth_rejects_nonpositive_width():
    with pytest.raises(InvalidParameter):
        heat_smooth(constant_field([1.0, 0, 0]), 0.0, SMALL)


def test_heat_smooth_constant_preserved_at_centre():
    c = np.array([0.3, -0.2, 0.5])
    out = heat_smooth(constant_field(c), 0.01, LatticeSpec(half_width=2.0, cells=64))
    np.testing.assert_allclose(out(0.5, np.zeros(3)), c, atol=1e-3)


def test_heat_smooth_bounded_by_input():
    b = _gauss_bump()
    out = heat_smooth(b, 0.05, SMALL)
    pts = np.random.default_rng(1).uniform(-2.5, 2.5, (2000, 3))
    assert np.max(np.linalg.norm(out(0.0, pts), axis=-1)) <= 1.0 + 1e-12


def test_heat_smooth_error_decreases_with_width():
    b = _gauss_bump()
    errs = []
    for eps in (0.1, 0.01, 0.001):
        errs.append(l2loc_distance(b, heat_smooth(b, eps, LatticeSpec(half_width=3.0, cells=96)), 1.5, spacing=0.1))
    assert errs[0] > errs[1] > errs[2]


def test_heat_smooth_gaussian_oracle():
    # convolution of a Gaussian with a Gaussian of variance 2 eps is a wider Gaussian
    w, eps = 0.8, 0.02
    out = heat_smooth(_gauss_bump(width=w), eps, LatticeSpec(half_width=4.0, cells=128))
    pts = np.array([[0.0, 0.0, 0.0], [0.5, 0.2, -0.3], [1.0, 0.0, 0.0]])
    s2 = w * w + 2 * eps
    exact = (w * w / s2) ** 1.5 * np.exp(-np.sum(pts**2, axis=-1) / (2 * s2))
    np.testing.assert_allclose(out(0.0, pts)[:, 0], exact, rtol=5e-3)


# ------------------------------------------------------------------ schedule


def test_scaling_factor_formula_bit_for_bit(hardy_sequence):
    C_S = sobolev_constant(3)
    for m, ap in hardy_sequence.items():
        s = ap.schedule
        delta_m = (math.sqrt(0.04) + math.sqrt(C_S * s.gamma_m * s.gamma_m)) ** 2
        assert s.delta_m == delta_m
        assert s.c_m == 0.04 / delta_m
        assert s.C_S == C_S and s.r == 3.0


def test_scaling_factor_tends_to_one():
    C_S = sobolev_constant(3)
    cs = [scaling_factor(0.04, g, C_S)[0] for g in (1e-1, 1e-2, 1e-4, 1e-8)]
    assert all(a < b for a, b in zip(cs, cs[1:]))
    assert 0 < cs[0] and cs[-1] <= 1.0 and 1.0 - cs[-1] < 1e-5


def test_schedule_monotone(hardy_sequence):
    ss = [hardy_sequence[m].schedule for m in (4, 8, 16)]
    assert all(a.eps_m > b.eps_m for a, b in zip(ss, ss[1:]))
    assert all(a.gamma_m > b.gamma_m for a, b in zip(ss, ss[1:]))
    assert all(a.c_m < b.c_m <= 1.0 for a, b in zip(ss, ss[1:]))


def test_schedule_record_keys(hardy_sequence):
    rec = hardy_sequence[4].schedule.to_record()
    assert {"m", "eps_m", "gamma_m", "c_m", "C_S", "r"} <= set(rec)


def test_approximation_keeps_certificate(hardy, hardy_sequence):
    for ap in hardy_sequence.values():
        assert ap.field.certificate == hardy.certificate


def test_approximation_sup_bound(hardy_sequence):
    pts = np.random.default_rng(2).uniform(-1, 1, (4000, 3)) * np.array([[0.2, 0.2, 0.2]])
    for m, ap in hardy_sequence.items():
        assert ap.field.sup_bound <= m
        assert np.max(np.linalg.norm(ap.field(0.5, pts), axis=-1)) <= m


def test_delta_preserved(hardy_sequence):
    fam = origin_family(3, seed=0)
    for ap in hardy_sequence.values():
        assert estimate_form_bound(ap.field, fam, 8) <= 0.04 * 1.05


def test_l2loc_decreases_along_sequence(hardy, hardy_sequence):
    ds = [l2loc_distance(hardy, hardy_sequence[m].field) for m in (4, 8, 16)]
    assert ds[0] > ds[1] > ds[2]


def test_zero_field_approximation():
    z = zero_field(3)
    cert = FormBoundCertificate(0.04, ZeroG(), "hölder-sobolev-Ld")
    ap = build_approximation(z, cert, 4)
    assert ap.field is z
    assert ap.schedule.c_m == scaling_factor(0.04, 0.5 / 4, sobolev_constant(3))[0]


def test_approximation_requires_certificate(hardy):
    with pytest.raises(InvalidParameter):
        build_approximation(hardy, None, 4)


def test_schedule_failure_on_coarse_lattice(hardy):
    with pytest.raises(ScheduleFailure):
        build_approximation(hardy, hardy.certificate, 4, default_gamma_rule(1e-6), LatticeSpec(cells=16))


def test_sequence_rejects_nondecreasing_gamma(hardy):
    with pytest.raises(InvalidParameter):
        build_sequence(hardy, hardy.certificate, [4, 8], gamma_rule=lambda m: 0.1)


def test_bounded_field_converges_as_gamma_shrinks():
    b = _gauss_bump()
    spec = LatticeSpec(half_width=3.0, cells=64)
    d1 = l2loc_distance(b, build_approximation(b, b.certificate, 4, default_gamma_rule(0.5), spec).field, 1.5, spacing=0.1)
    d2 = l2loc_distance(b, build_approximation(b, b.certificate, 16, default_gamma_rule(0.5), spec).field, 1.5, spacing=0.1)
    assert d2 < d1


# ------------------------------------------------------------------ l2loc


def test_l2loc_self_is_zero(hardy):
    assert l2loc_distance(hardy, hardy) == 0.0


def test_l2loc_constant_oracle():
    c = np.array([0.6, 0.0, 0.8])
    val = l2loc_distance(zero_field(3), constant_field(c), ((0.0, 1.0),) * 3, (0.0, 1.0), spacing=0.1)
    assert val == pytest.approx(1.0, rel=1e-12)
