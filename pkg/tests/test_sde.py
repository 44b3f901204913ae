import math

import numpy as np
import pytest

from singdrift.errors import ConfigInvalid, InvalidParameter, QOutOfRange, TimeUnavailable
from singdrift.fields import FormBoundCertificate, ZeroG, build_field, constant_field, zero_field
from singdrift.mollify import build_approximation
from singdrift.pde import SpaceTimeGrid, gaussian
from singdrift.sde import (
    PathEnsemble,
    SimConfig,
    duality_check,
    expected_drift_integral,
    krylov_functional,
    marginal_distance,
    modulus_of_continuity,
    occupation_near_origin,
    simulate_euler,
    step_normals,
    stream_id,
)

D = 3
HARDY_CERT = FormBoundCertificate(0.04, ZeroG(), "hardy")


def _unit_bump(t, x):
    r2 = np.sum(np.asarray(x) ** 2, axis=-1)
    out = np.zeros(r2.shape)
    m = r2 < 1
    out[m] = np.exp(1 - 1 / (1 - r2[m]))
    return out


@pytest.fixture(scope="module")
def brownian():
    return simulate_euler(zero_field(D), np.zeros(D), SimConfig(h_t=0.01, T=1.0, N=4000, seed=11))


# ------------------------------------------------------------------ simulation


def test_brownian_mean_square_displacement(brownian):
    disp = np.sum((brownian.paths[:, -1] - brownian.x0) ** 2, axis=1)
    se = disp.std(ddof=1) / math.sqrt(brownian.N)
    assert abs(disp.mean() - 2 * D * 1.0) <= 3 * se


def test_brownian_increment_statistics(brownian):
    inc = np.diff(brownian.paths, axis=1).ravel()
    h = brownian.cfg.h_t
    se_mean = inc.std(ddof=1) / math.sqrt(inc.size)
    var = inc.var(ddof=1)
    se_var = var * math.sqrt(2.0 / (inc.size - 1))
    assert abs(inc.mean()) <= 4 * se_mean
    assert abs(var - 2 * h) <= 4 * se_var


def test_paths_start_at_x():
    x = np.array([0.3, -1.0, 2.0])
    ens = simulate_euler(zero_field(D), x, SimConfig(h_t=0.01, T=0.1, N=50, seed=1))
    assert np.all(ens.paths[:, 0] == x)


def test_constant_drift_mean():
    c = np.array([0.8, -0.4, 0.2])
    x = np.array([1.0, 0.0, -1.0])
    ens = simulate_euler(constant_field(c), x, SimConfig(h_t=0.01, T=1.0, N=4000, seed=3))
    end = ens.paths[:, -1]
    se = end.std(axis=0, ddof=1) / math.sqrt(ens.N)
    assert np.all(np.abs(end.mean(axis=0) - (x - c)) <= 3 * se)


def test_stored_increments_follow_the_scheme_exactly():
    c = np.array([0.5, 0.25, -0.5])
    cfg = SimConfig(h_t=0.02, T=0.2, N=5, seed=9)
    ens = simulate_euler(constant_field(c), np.zeros(D), cfg)
    dW = math.sqrt(cfg.h_t) * step_normals(cfg.seed, range(5), cfg.steps, D)
    X = np.zeros((5, D))
    for k in range(cfg.steps):
        X = X - c * cfg.h_t + math.sqrt(2.0) * dW[:, k]
        assert np.array_equal(ens.paths[:, k + 1], X)


def test_determinism_across_workers_and_chunks():
    b = constant_field([0.3, 0.0, 0.1])
    base = SimConfig(h_t=0.01, T=0.5, N=300, seed=5)
    a = simulate_euler(b, np.zeros(D), base)
    again = simulate_euler(b, np.zeros(D), base)
    split = simulate_euler(b, np.zeros(D), SimConfig(h_t=0.01, T=0.5, N=300, seed=5, workers=3, chunk=37))
    assert a.paths.tobytes() == again.paths.tobytes() == split.paths.tobytes()
    other = simulate_euler(b, np.zeros(D), SimConfig(h_t=0.01, T=0.5, N=300, seed=6))
    assert not np.array_equal(a.paths, other.paths)


def test_substepped_paths_deterministic_across_workers():
    bm = build_field("hardy", {"d": 3, "delta": 0.04})
    f = build_approximation(bm, bm.certificate, 4).field
    cfg = dict(h_t=0.01, T=0.2, N=64, seed=2, substep=4)
    a = simulate_euler(f, np.zeros(D), SimConfig(**cfg))
    b = simulate_euler(f, np.zeros(D), SimConfig(**cfg, workers=2, chunk=10))
    assert a.substepped_steps > 0
    assert a.paths.tobytes() == b.paths.tobytes()


def test_stream_ids_distinct_per_path(brownian):
    ids = brownian.stream_ids()
    assert len(set(ids)) == brownian.N
    assert ids[0] == stream_id(11, 0)


@pytest.mark.parametrize(
    "kw",
    [dict(h_t=0.0), dict(T=0.333, h_t=0.1), dict(N=0), dict(substep=0), dict(workers=0), dict(noise_scale=-1.0)],
)
def test_invalid_configs(kw):
    with pytest.raises(ConfigInvalid):
        simulate_euler(zero_field(D), np.zeros(D), SimConfig(**{"h_t": 0.01, "T": 0.1, "N": 4, **kw}))


def test_unbounded_field_rejected():
    with pytest.raises(ConfigInvalid):
        simulate_euler(build_field("hardy", {"d": 3, "delta": 0.04}), np.zeros(D), SimConfig(h_t=0.01, T=0.1, N=4))


def test_drift_step_bound_enforced():
    with pytest.raises(ConfigInvalid):
        simulate_euler(constant_field([20.0, 0, 0]), np.zeros(D), SimConfig(h_t=0.01, T=0.1, N=4))
    # substepping relaxes the bound
    simulate_euler(constant_field([5.0, 0, 0]), np.zeros(D), SimConfig(h_t=0.01, T=0.1, N=4, substep=4))


def test_start_point_dimension_checked():
    with pytest.raises(ConfigInvalid):
        simulate_euler(zero_field(D), np.zeros(2), SimConfig(h_t=0.01, T=0.1, N=4))


# ------------------------------------------------------------------ krylov


def test_krylov_zero_integrand(brownian):
    rep = krylov_functional(brownian, zero_field(D), _unit_bump, 4.0, HARDY_CERT)
    assert rep.lhs == 0.0 and rep.ratio == 0.0


def test_krylov_q_range_checked(brownian):
    with pytest.raises(QOutOfRange):
        krylov_functional(brownian, constant_field([1.0, 0, 0]), _unit_bump, 6.0, HARDY_CERT)


def test_krylov_brownian_matches_dense_oracle():
    x = np.array([0.5, 0.0, 0.0])
    T, h_t, N = 1.0, 0.01, 6000
    ens = simulate_euler(zero_field(D), x, SimConfig(h_t=h_t, T=T, N=N, seed=4))
    rep = krylov_functional(ens, constant_field([1.0, 0.0, 0.0]), _unit_bump, 4.0, HARDY_CERT)
    # independent brute-force Brownian motion with a ten times finer step
    rng = np.random.default_rng(2024)
    fine = h_t / 10
    n = int(round(T / fine))
    X = np.broadcast_to(x, (N, D)).copy()
    acc = 0.5 * _unit_bump(0, X)
    for k in range(n):
        X += math.sqrt(2 * fine) * rng.standard_normal((N, D))
        acc += _unit_bump(0, X) * (0.5 if k == n - 1 else 1.0)
    per = acc * fine
    se = per.std(ddof=1) / math.sqrt(N)
    assert abs(rep.lhs - per.mean()) <= 4 * math.hypot(se, rep.stderr)
    assert 0 < rep.ratio < math.inf and rep.stderr > 0


# ------------------------------------------------------------------ drift integral


def test_drift_integral_zero_field(brownian):
    rep = expected_drift_integral(brownian, zero_field(D), HARDY_CERT, (0.0, 0.5))
    assert rep.lhs == 0.0 and rep.stderr == 0.0


def test_drift_integral_rhs_is_window_length(brownian):
    b = build_field("hardy", {"d": 3, "delta": 0.04})
    for w in ((0.0, 0.25), (0.25, 0.75), (0.0, 1.0)):
        rep = expected_drift_integral(brownian, b, b.certificate, w)
        assert rep.rhs == pytest.approx(w[1] - w[0], rel=1e-12)
        assert rep.lhs > 0


def test_drift_integral_brownian_against_radial_formula():
    # E int_0^T 1/|x + sqrt2 W_t| dt from the origin: E 1/|sqrt2 W_t| = 1/sqrt(pi t) in d = 3
    b = build_field("hardy", {"d": 3, "delta": 0.04})
    a = 0.1  # |b| = a / |x|
    ens = simulate_euler(zero_field(D), np.zeros(D), SimConfig(h_t=0.0025, T=1.0, N=4000, seed=8))
    rep = expected_drift_integral(ens, b, b.certificate, (0.25, 1.0))
    exact = a * 2 * (math.sqrt(1.0) - math.sqrt(0.25)) / math.sqrt(math.pi)
    assert abs(rep.lhs - exact) <= 4 * rep.stderr + 2e-3 * exact


def test_drift_integral_window_checked(brownian):
    with pytest.raises(InvalidParameter):
        expected_drift_integral(brownian, zero_field(D), HARDY_CERT, (0.5, 1.5))


# ------------------------------------------------------------------ modulus


def test_modulus_frozen_paths_zero():
    ens = simulate_euler(zero_field(D), np.ones(D), SimConfig(h_t=0.01, T=0.5, N=20, seed=1, noise_scale=0.0))
    rep = modulus_of_continuity(ens, 0.5, 4)
    assert rep.lhs == 0.0


def test_modulus_brownian_scaling():
    ens = simulate_euler(zero_field(D), np.zeros(D), SimConfig(h_t=0.001, T=0.5, N=2000, seed=12))
    hs = (4, 16, 64)
    lhs = [modulus_of_continuity(ens, 0.5, k).lhs for k in hs]
    slope = np.polyfit(np.log(np.asarray(hs) * 0.001), np.log(lhs), 1)[0]
    assert slope == pytest.approx(0.25, rel=0.2)


def test_modulus_argument_checks(brownian):
    with pytest.raises(InvalidParameter):
        modulus_of_continuity(brownian, 1.0, 4)
    with pytest.raises(InvalidParameter):
        modulus_of_continuity(brownian, 0.5, 0)


# ------------------------------------------------------------------ marginals and occupation


def test_marginal_distance_self_zero(brownian):
    assert marginal_distance(brownian, brownian, 0.5) == 0.0


def test_marginal_distance_two_seeds_at_noise_floor(brownian):
    other = simulate_euler(zero_field(D), np.zeros(D), SimConfig(h_t=0.01, T=1.0, N=4000, seed=12))
    dist = marginal_distance(brownian, other, 1.0)
    # asymptotic 99.9% two-sample KS critical value, maximised over three coordinates
    crit = 1.95 * math.sqrt(2 / 4000)
    assert 0 < dist <= crit


def test_marginal_distance_time_unavailable(brownian):
    with pytest.raises(TimeUnavailable):
        marginal_distance(brownian, brownian, 0.123)


def test_occupation_far_start_is_negligible():
    ens = simulate_euler(zero_field(D), np.array([10.0, 0, 0]), SimConfig(h_t=0.01, T=1.0, N=2000, seed=2))
    assert occupation_near_origin(ens, 0.1) <= 1e-3


def test_occupation_frozen_at_origin_is_one():
    ens = simulate_euler(zero_field(D), np.zeros(D), SimConfig(h_t=0.01, T=0.5, N=4, seed=2, noise_scale=0.0))
    assert occupation_near_origin(ens, 0.1) == pytest.approx(1.0)


def test_occupation_radius_checked(brownian):
    with pytest.raises(InvalidParameter):
        occupation_near_origin(brownian, 0.0)


# ------------------------------------------------------------------ duality


def test_duality_zero_drift_closed_form():
    x = np.array([0.5, -0.25, 0.0])
    T, var = 0.5, 0.25
    grid = SpaceTimeGrid(3, 4.0, 64, 100, 0.0, T, 4.0, 100)
    cfg = SimConfig(h_t=0.01, T=T, N=8000, seed=21)
    rep = duality_check(x, gaussian(None, var), T, zero_field(D), grid, cfg, grid_budget=0.01)
    s = var + 2 * T
    exact = (var / s) ** 1.5 * math.exp(-float(x @ x) / (2 * s))
    assert abs(rep.lhs - exact) <= 4 * rep.stderr
    assert rep.rhs == pytest.approx(exact, rel=0.02)
    assert rep.extra["pass"]


def test_duality_constant_one_is_conserved():
    T = 0.5
    grid = SpaceTimeGrid(3, 4.0, 48, 100, 0.0, T, 4.0, 100)
    cfg = SimConfig(h_t=0.01, T=T, N=200, seed=1)
    one = lambda x: np.ones(np.shape(x)[:-1])
    rep = duality_check(np.zeros(D), one, T, zero_field(D), grid, cfg, grid_budget=1e-3)
    assert rep.lhs == 1.0
    assert abs(rep.rhs - 1.0) <= 1e-3


def test_functional_report_row_columns(brownian):
    rep = expected_drift_integral(brownian, zero_field(D), HARDY_CERT, (0.0, 0.5))
    row = rep.to_row()
    for k in ("functional", "field_id", "m", "h_t", "N", "lhs", "rhs", "ratio", "stderr"):
        assert k in row
    assert isinstance(brownian, PathEnsemble)
