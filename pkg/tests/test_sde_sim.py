import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from cournot_sde.core_model import (
    GameParams,
    NoiseWiring,
    centered_drift,
    linearize,
    stationary_state,
)
from cournot_sde.errors import InvalidParams, MismatchedPaths
from cournot_sde.meansquare import definiteness_certificate
from cournot_sde.sde_sim import (
    Observable,
    Scheme,
    WienerSpec,
    coarsen,
    ensemble_stats,
    euler_maruyama,
    paper_taylor2,
    simulate_ensemble,
    wiener_increments,
)

from conftest import game


def _ode_reference(p, x_init, t_end):
    sol = solve_ivp(lambda t, x: centered_drift(p, x), (0, t_end), x_init,
                    method="DOP853", rtol=1e-13, atol=1e-15)
    return sol.y[:, -1]


def test_increment_moments():
    h, n = 0.01, 10**5
    g = wiener_increments(WienerSpec(3, h, n))[:, 0]
    assert abs(g.mean()) < 5 * math.sqrt(h / n)
    var_se = h * math.sqrt(2 / (n - 1))
    assert abs(g.var(ddof=1) - h) < 5 * var_se


def test_increment_scaling_and_determinism():
    a = wiener_increments(WienerSpec(4, 0.01, 50000))
    b = wiener_increments(WienerSpec(4, 0.04, 50000))
    assert np.array_equal(a, wiener_increments(WienerSpec(4, 0.01, 50000)))
    assert b.std() / a.std() == pytest.approx(2.0, rel=1e-12)


def test_increment_channels():
    assert wiener_increments(WienerSpec(1, 0.1, 10)).shape == (10, 1)
    g = wiener_increments(WienerSpec(1, 0.1, 20000, NoiseWiring.INDEPENDENT))
    assert g.shape == (20000, 2)
    assert abs(np.corrcoef(g.T)[0, 1]) < 0.05


def test_spec_validation():
    with pytest.raises(InvalidParams):
        WienerSpec(1, 0.0, 10)
    with pytest.raises(InvalidParams):
        WienerSpec(1, 0.1, 0)
    with pytest.raises(InvalidParams):
        WienerSpec(-1, 0.1, 10)


def test_coarsen_sums_pairs():
    g = np.arange(8.0).reshape(4, 2)
    np.testing.assert_array_equal(coarsen(g), [[2, 4], [10, 12]])
    with pytest.raises(InvalidParams):
        coarsen(np.zeros((3, 1)))


@pytest.mark.parametrize("scheme", [euler_maruyama, paper_taylor2])
def test_stationary_state_is_fixed(scheme, fig1_params):
    x0 = stationary_state(fig1_params).as_array()
    path = scheme(fig1_params, x0, WienerSpec(1, 1e-3, 2000))
    assert not path.truncated
    assert np.all(path.states == x0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 3), st.floats(0.1, 3), st.floats(0.1, 2), st.floats(0.1, 2),
       st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.booleans())
def test_fixed_point_property(c1, c2, k1, k2, b, printed):
    p = GameParams(c1, c2, k1, k2, np.reshape(b, (2, 2)))
    x0 = stationary_state(p).as_array()
    spec = WienerSpec(7, 1e-2, 200)
    assert np.all(euler_maruyama(p, x0, spec).states == x0)
    assert np.all(paper_taylor2(p, x0, spec, printed=printed).states == x0)


def test_path_shapes_and_metadata(fig1_params):
    x0 = stationary_state(fig1_params).as_array()
    path = euler_maruyama(fig1_params, 1.001 * x0, WienerSpec(1, 1e-3, 100))
    assert path.states.shape == (101, 2)
    assert path.times.shape == (101,) and path.times[0] == 0
    assert path.increments.shape == (100, 1)
    assert path.scheme is Scheme.EULER_MARUYAMA and path.seed == 1


def test_deterministic_relaxation():
    p = GameParams(1, 1, 1, 1)
    path = euler_maruyama(p, (1, 1), WienerSpec(1, 1e-3, 5000))
    dist = np.linalg.norm(path.states - 0.25, axis=1)
    assert np.all(np.diff(dist) <= 0)
    assert dist[-1] < 1e-2 * dist[0]


def test_same_seed_same_path(fig1_params):
    x = 1.01 * stationary_state(fig1_params).as_array()
    spec = WienerSpec(11, 1e-3, 1000)
    for scheme in (euler_maruyama, paper_taylor2):
        assert np.array_equal(scheme(fig1_params, x, spec).states,
                              scheme(fig1_params, x, spec).states)


def test_taylor_second_order_without_noise():
    p = GameParams(1, 1, 1, 1)
    ref = _ode_reference(p, [1.0, 1.0], 1.0)
    errs = []
    for h in (0.02, 0.01, 0.005):
        path = paper_taylor2(p, (1, 1), WienerSpec(1, h, int(round(1 / h))))
        errs.append(np.linalg.norm(path.states[-1] - ref))
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(3.2 <= r <= 4.8 for r in ratios)


def test_printed_bracket_is_first_order():
    p = GameParams(1, 1, 1, 1)
    ref = _ode_reference(p, [1.0, 1.0], 1.0)
    errs = [np.linalg.norm(paper_taylor2(p, (1, 1), WienerSpec(1, h, int(round(1 / h))),
                                         printed=True).states[-1] - ref) for h in (0.02, 0.01)]
    assert 1.6 < errs[0] / errs[1] < 2.4


def test_euler_first_order_without_noise():
    p = GameParams(1, 1, 1, 1)
    ref = _ode_reference(p, [1.0, 1.0], 1.0)
    e1 = np.linalg.norm(euler_maruyama(p, (1, 1), WienerSpec(1, 0.01, 100)).states[-1] - ref)
    e2 = np.linalg.norm(paper_taylor2(p, (1, 1), WienerSpec(1, 0.01, 100)).states[-1] - ref)
    assert e2 < 0.05 * e1


def test_em_strong_self_convergence(fig1_params):
    x_init = 1.001 * stationary_state(fig1_params).as_array()
    hs = (4e-3, 2e-3, 1e-3, 5e-4)
    diffs = []
    for i in range(4000):
        fine = wiener_increments(WienerSpec(7, hs[-1], int(round(1 / hs[-1]))), i)
        incs = [fine]
        for _ in hs[:-1]:
            incs.append(coarsen(incs[-1]))
        ends = [euler_maruyama(fig1_params, x_init, WienerSpec(7, h, len(g)), increments=g)
                for h, g in zip(hs, incs[::-1])]
        if any(e.truncated for e in ends):
            continue
        diffs.append([np.linalg.norm(ends[j].states[-1] - ends[j + 1].states[-1])
                      for j in range(len(hs) - 1)])
    mean = np.mean(diffs, axis=0)
    order = np.polyfit(np.log(hs[:-1]), np.log(mean), 1)[0]
    assert 0.3 <= order <= 0.7


def test_taylor_close_to_em(fig1_params):
    x_init = 1.001 * stationary_state(fig1_params).as_array()
    spec = WienerSpec(42, 1e-3, 10000)
    g = wiener_increments(spec.refined())
    em_h = euler_maruyama(fig1_params, x_init, spec, increments=coarsen(g))
    em_h2 = euler_maruyama(fig1_params, x_init, spec.refined(), increments=g)
    tay = paper_taylor2(fig1_params, x_init, spec, increments=coarsen(g))
    assert not (em_h.truncated or em_h2.truncated or tay.truncated)
    em_gap = np.max(np.abs(em_h.states - em_h2.states[::2]))
    assert np.max(np.abs(tay.states - em_h.states)) < 10 * em_gap


def test_truncation_is_flagged():
    p = game(10.0, 10.0)
    x = 1.05 * stationary_state(p).as_array()
    path = paper_taylor2(p, x, WienerSpec(1, 1e-3, 5000))
    assert path.truncated
    assert path.truncation.reason == "left_positive_quadrant"
    assert len(path.states) == path.truncation.step + 1
    assert np.all(np.isfinite(path.states)) and np.all(path.states > 0)


def test_invalid_start():
    p = game()
    with pytest.raises(InvalidParams):
        euler_maruyama(p, (-0.1, 0.5), WienerSpec(1, 1e-3, 10))
    with pytest.raises(InvalidParams):
        euler_maruyama(p, (1e-12, 1e-12), WienerSpec(1, 1e-3, 10))
    with pytest.raises(InvalidParams):
        paper_taylor2(p, (0.4, 0.04), WienerSpec(1, 1e-3, 10, NoiseWiring.INDEPENDENT))
    with pytest.raises(InvalidParams):
        euler_maruyama(p, (0.4, 0.04), WienerSpec(1, 1e-3, 10), increments=np.zeros((9, 1)))


def test_independent_wiring_runs(fig1_params):
    x = 1.01 * stationary_state(fig1_params).as_array()
    path = euler_maruyama(fig1_params, x, WienerSpec(1, 1e-3, 100, NoiseWiring.INDEPENDENT))
    assert path.increments.shape == (100, 2)


def test_ensemble_stats_basic(fig1_params):
    x0 = stationary_state(fig1_params).as_array()
    paths = simulate_ensemble("euler_maruyama", fig1_params, x0, WienerSpec(1, 1e-3, 50), 3)
    assert np.all(ensemble_stats(paths, Observable.NORM_SQ_ABOUT_X0) == 0)
    x = 1.001 * x0
    one = euler_maruyama(fig1_params, x, WienerSpec(2, 1e-3, 50))
    np.testing.assert_array_equal(ensemble_stats([one, one], "mean"), one.states)
    np.testing.assert_allclose(ensemble_stats([one, one], "second_moment"), one.states**2)


def test_ensemble_stats_mismatch(fig1_params):
    x = 1.001 * stationary_state(fig1_params).as_array()
    a = euler_maruyama(fig1_params, x, WienerSpec(1, 1e-3, 50))
    b = euler_maruyama(fig1_params, x, WienerSpec(1, 1e-3, 60))
    with pytest.raises(MismatchedPaths):
        ensemble_stats([a, b], "mean")
    c = euler_maruyama(game(1.0, 1.0), x, WienerSpec(1, 1e-3, 50))
    with pytest.raises(MismatchedPaths):
        ensemble_stats([a, c], "mean")


def test_ensemble_second_moment_decays_for_stable_setting():
    p = game(0.5, 0.5)
    assert definiteness_certificate(linearize(p)) is not None
    x0 = stationary_state(p).as_array()
    paths = simulate_ensemble("euler_maruyama", p, 1.01 * x0, WienerSpec(3, 1e-3, 10000), 500)
    m = ensemble_stats(paths, "norm_sq_about_x0")
    assert m[-1] < 0.05 * m[0]


def test_ensemble_independent_of_workers(fig1_params):
    x = 1.001 * stationary_state(fig1_params).as_array()
    spec = WienerSpec(5, 1e-3, 200)
    a = simulate_ensemble("paper_taylor2", fig1_params, x, spec, 6, workers=1)
    b = simulate_ensemble("paper_taylor2", fig1_params, x, spec, 6, workers=3)
    assert all(np.array_equal(u.states, v.states) for u, v in zip(a, b))
