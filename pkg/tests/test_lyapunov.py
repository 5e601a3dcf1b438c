import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cournot_sde.core_model import GameParams, LinearSystem, linearize
from cournot_sde.errors import DegenerateNoise, InvalidParams, NumericalOverflow
from cournot_sde.lyapunov import (
    LyapunovMethod,
    lambda_discrete,
    lambda_exponential_ansatz,
    lambda_monte_carlo,
    lambda_quadrature,
    lambda_sweep,
)

from conftest import FIG1, FIG1_A, game, rotation_system
from oracles import fd_lyapunov

# Richardson-extrapolated values of the finite-difference oracle (m = 1200, 2400)
ORACLE_FIG1 = -1.7084773057
ORACLE_FIG1_ALPHA_M1_1 = -0.1124701824
ORACLE_GENERAL_SHARED = 0.6749704049
ORACLE_GENERAL_INDEPENDENT = 0.0474136009
GENERAL_A = [[-1.0, 0.5], [0.3, -0.2]]
GENERAL_B = [[1.0, -2.0], [1.5, 0.3]]


def test_skew_noise_oracle():
    sys_ = rotation_system(np.zeros((2, 2)), 0.0, 1.0)
    est = lambda_quadrature(sys_)
    assert est.method is LyapunovMethod.QUADRATURE
    assert est.value == pytest.approx(0.5, abs=1e-8)
    assert est.std_error == 0.0
    assert lambda_discrete(sys_, 512).value == pytest.approx(0.5, abs=1e-4)


def test_scaling_noise_is_degenerate():
    with pytest.raises(DegenerateNoise):
        lambda_quadrature(LinearSystem(np.eye(2), np.eye(2), "shared"))


@pytest.mark.parametrize("sys_, expected", [
    (linearize(game()), ORACLE_FIG1),
    (linearize(game(-1.1, 2.0)), ORACLE_FIG1_ALPHA_M1_1),
    (LinearSystem(GENERAL_A, GENERAL_B, "shared"), ORACLE_GENERAL_SHARED),
    (LinearSystem(GENERAL_A, GENERAL_B, "independent"), ORACLE_GENERAL_INDEPENDENT),
])
def test_quadrature_matches_frozen_oracle(sys_, expected):
    assert lambda_quadrature(sys_).value == pytest.approx(expected, abs=1e-8)


def test_quadrature_harmonic_and_game_forms(fig1_sys):
    meta = lambda_quadrature(fig1_sys).metadata
    assert meta["harmonic_form_ok"] and meta["game_form_ok"]
    assert meta["density_variant"] == "literal"


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.3, 3))
def test_rotation_noise_with_scalar_drift(a, alpha, beta):
    # A = aI keeps the angle drift constant, so p is uniform and lambda is explicit
    est = lambda_quadrature(rotation_system(a * np.eye(2), alpha, beta))
    assert est.value == pytest.approx(a + 0.5 * (beta**2 - alpha**2), abs=1e-8)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=4, max_size=4), st.floats(-2, 2), st.floats(0.5, 3))
def test_quadrature_against_fd_oracle(a_entries, alpha, beta):
    a = np.reshape(a_entries, (2, 2))
    sys_ = rotation_system(a, alpha, beta)
    assert lambda_quadrature(sys_).value == pytest.approx(fd_lyapunov(a, sys_.b, m=400), abs=5e-4)


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(0.3, 3))
def test_joint_sign_reversal_symmetry(alpha, beta):
    # w -> -w maps B to -B, so (alpha, beta) and (-alpha, -beta) give the same lambda
    p = game(alpha, beta)
    q = game(-alpha, -beta)
    assert lambda_quadrature(linearize(p)).value == pytest.approx(
        lambda_quadrature(linearize(q)).value, abs=1e-6)


def test_beta_reflection_alone_is_not_a_symmetry():
    lp = lambda_quadrature(linearize(game(2.0, 0.3))).value
    lm = lambda_quadrature(linearize(game(2.0, -0.3))).value
    assert abs(lp - lm) > 0.5


def test_discrete_agrees_with_quadrature(fig1_sys):
    q = lambda_quadrature(fig1_sys).value
    errs = [abs(lambda_discrete(fig1_sys, n).value - q) for n in (250, 500, 1000, 2000)]
    assert errs[-1] < 1e-2
    assert all(x > y for x, y in zip(errs, errs[1:]))


def test_discrete_metadata(fig1_sys):
    est = lambda_discrete(fig1_sys, 400)
    assert est.n_used == 400 and "normalization" in est.metadata


def test_monte_carlo_skew_noise():
    est = lambda_monte_carlo(rotation_system(np.zeros((2, 2)), 0.0, 1.0), seed=1)
    assert est.std_error > 0
    assert abs(est.value - 0.5) < 3 * est.std_error


def test_monte_carlo_scalar_oracle():
    est = lambda_monte_carlo(LinearSystem(np.eye(2), np.eye(2), "shared"), seed=1)
    assert abs(est.value - 0.5) < 3 * est.std_error


def test_monte_carlo_deterministic_limit():
    est = lambda_monte_carlo(LinearSystem(FIG1_A, np.zeros((2, 2)), "shared"), seed=1)
    assert est.value == pytest.approx(-0.6066072337894, abs=0.01)


def test_monte_carlo_matches_quadrature(fig1_sys):
    est = lambda_monte_carlo(fig1_sys, seed=1, n_paths=100, horizon_T=100.0)
    assert abs(est.value - ORACLE_FIG1) < max(1e-2, 3 * est.std_error)
    assert est.metadata["extrapolated"]
    assert "raw_em_value" in est.metadata


def test_monte_carlo_independent_wiring():
    sys_ = LinearSystem(GENERAL_A, GENERAL_B, "independent")
    est = lambda_monte_carlo(sys_, seed=2, n_paths=100, horizon_T=100.0)
    assert abs(est.value - ORACLE_GENERAL_INDEPENDENT) < max(1e-2, 3 * est.std_error)


def test_monte_carlo_is_reproducible(fig1_sys):
    a = lambda_monte_carlo(fig1_sys, seed=9, n_paths=8, horizon_T=2.0)
    b = lambda_monte_carlo(fig1_sys, seed=9, n_paths=8, horizon_T=2.0, workers=3)
    assert (a.value, a.std_error) == (b.value, b.std_error)


def test_monte_carlo_preconditions(fig1_sys):
    with pytest.raises(InvalidParams):
        lambda_monte_carlo(fig1_sys, n_paths=1)
    with pytest.raises(InvalidParams):
        lambda_monte_carlo(fig1_sys, horizon_T=0.5, step_h=1e-3)


def test_monte_carlo_overflow_without_renormalization():
    sys_ = LinearSystem(50 * np.eye(2), np.zeros((2, 2)), "shared")
    with pytest.raises(NumericalOverflow):
        lambda_monte_carlo(sys_, n_paths=2, horizon_T=20.0, renormalize=False)
    est = lambda_monte_carlo(sys_, n_paths=2, horizon_T=20.0)
    assert est.value == pytest.approx(50, rel=0.05)


def test_monte_carlo_signs_at_disputed_alphas():
    # independent evidence for the location of the alpha thresholds
    for alpha in (-1.1, 1.0):
        est = lambda_monte_carlo(linearize(game(alpha, 2.0)), seed=3, n_paths=100, horizon_T=100.0)
        assert est.value + 3 * est.std_error < 0


def test_large_alpha_is_stable():
    for alpha in (-10.0, 10.0):
        assert lambda_quadrature(linearize(game(alpha, 2.0))).value < 0


def test_sweep_alpha_brackets():
    res = lambda_sweep(game(0.0, 2.0), "alpha", (-3, 3), 61)
    assert res.n_ok == 61
    assert len(res.brackets) == 2
    for br in res.brackets:
        assert br.hi - br.lo <= 1e-3
        assert br.value_lo * br.value_hi < 0
    lo, hi = sorted(br.midpoint for br in res.brackets)
    assert lo == pytest.approx(-0.9996, abs=2e-3)
    assert hi == pytest.approx(0.8840, abs=2e-3)


def test_sweep_flags_degenerate_points():
    res = lambda_sweep(game(2.0, 2.0), "beta", (-1, 1), 5)
    status = {r.param: r.status for r in res.rows}
    assert status[0.0] == "DegenerateNoise"
    assert math.isnan([r.value for r in res.rows if r.param == 0.0][0])


def test_sweep_single_point():
    res = lambda_sweep(game(), "alpha", (1.0, 1.0), 1)
    assert len(res.rows) == 1 and res.brackets == []


def test_sweep_rejects_general_noise():
    p = GameParams(**FIG1, b=GENERAL_B)
    with pytest.raises(InvalidParams):
        lambda_sweep(p, "alpha", (-1, 1), 3)
    with pytest.raises(InvalidParams):
        lambda_sweep(game(), "gamma", (-1, 1), 3)


def test_sweep_monte_carlo_independent_of_workers():
    runs = [lambda_sweep(game(), "alpha", (0.0, 1.0), 3, "monte_carlo",
                         {"n_paths": 4, "horizon_T": 2.0}, workers=w) for w in (1, 2, 4)]
    values = [[(r.value, r.std_error) for r in res.rows] for res in runs]
    assert values[0] == values[1] == values[2]


def test_exponential_ansatz_reproduces_published_thresholds():
    # the pure exponential density (no flux term) puts the crossings near -1.2 and 1.1
    def f(alpha):
        return lambda_exponential_ansatz(game(alpha, 2.0))

    assert f(-1.3) < 0 < f(-1.1)
    assert f(1.0) > 0 > f(1.15)
