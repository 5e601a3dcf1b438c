import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cournot_sde.core_model import LinearSystem, linearize
from cournot_sde.errors import DegenerateNoise, InvalidParams
from cournot_sde.phase_density import (
    DensityMethod,
    PhaseDensity,
    density_backward_difference,
    density_closed_form,
    fpe_residual,
    mc_angle_histogram,
    sample_density,
    trig_coefficients,
)

from conftest import FIG1_A, game, rotation_system
from oracles import fd_density

UNIFORM = 1 / (2 * math.pi)
GENERAL_B = [[1.0, -2.0], [1.5, 0.3]]
GENERAL_A = [[-1.0, 0.5], [0.3, -0.2]]


def _sup(p, q):
    return float(np.max(np.abs(p - q)))


def _check_density(d, residual=True):
    assert np.all(d.values >= 0)
    assert d.normalization_error < 1e-8
    assert d.values[0] == d.values[-1]
    half = d.n_grid // 2
    assert _sup(d.values[:half], d.values[half:-1]) < 1e-6
    if residual:
        assert d.fpe_residual < 1e-4


def test_trig_coefficients_special_angles():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    b = np.array([[5.0, 6.0], [7.0, 8.0]])
    tc = trig_coefficients(LinearSystem(a, b, "shared"))
    at0 = [tc.q1(0.0), tc.q2(0.0), tc.q3(0.0), tc.q4(0.0), tc.q5(0.0)]
    np.testing.assert_allclose(at0, [1, 5, 3, 7, -(8 - 5)], atol=1e-14)
    t = math.pi / 2
    np.testing.assert_allclose([tc.q1(t), tc.q2(t), tc.q3(t), tc.q4(t)], [4, 8, -2, -6], atol=1e-14)


def test_trig_coefficients_pi_periodic():
    rng = np.random.default_rng(0)
    tc = trig_coefficients(LinearSystem(rng.normal(size=(2, 2)), rng.normal(size=(2, 2)), "shared"))
    th = np.linspace(0, 2 * math.pi, 257)
    for q in (tc.q1, tc.q2, tc.q3, tc.q4, tc.q5):
        assert np.max(np.abs(q(th + math.pi) - q(th))) < 1e-12
    assert tc.period == math.pi


def test_trig_coefficients_rotation_scale():
    tc = trig_coefficients(rotation_system(FIG1_A, 2.0, 3.0))
    th = np.linspace(0, 2 * math.pi, 100)
    np.testing.assert_allclose(tc.q2(th), 2.0, atol=1e-14)
    np.testing.assert_allclose(tc.q4(th), 3.0, atol=1e-14)
    np.testing.assert_allclose(tc.q5(th), 0.0, atol=1e-14)


def test_dq4_is_the_derivative_of_q4():
    tc = trig_coefficients(LinearSystem(GENERAL_A, GENERAL_B, "shared"))
    th = np.linspace(0, math.pi, 50)
    h = 1e-6
    fd = (tc.q4(th + h) - tc.q4(th - h)) / (2 * h)
    np.testing.assert_allclose(tc.dq4(th), fd, atol=1e-8)


def test_uniform_case_closed_form():
    d = density_closed_form(rotation_system(np.zeros((2, 2)), 0.0, 1.0))
    assert d.method is DensityMethod.CLOSED_FORM
    assert _sup(d.values, UNIFORM) < 1e-6
    assert d.fpe_residual < 1e-10


def test_uniform_case_backward_difference():
    d = density_backward_difference(rotation_system(np.zeros((2, 2)), 0.0, 1.0), 512)
    assert _sup(d.values, UNIFORM) < 1e-6


def test_perturbed_density_has_large_residual():
    sys_ = rotation_system(np.zeros((2, 2)), 0.0, 1.0)
    grid = np.linspace(0, 2 * math.pi, 2049)
    bad = PhaseDensity(grid, UNIFORM + 0.1 * np.sin(grid), 0.0, math.nan, DensityMethod.CLOSED_FORM)
    assert fpe_residual(sys_, bad) > 0.01


def test_fig1_closed_form(fig1_sys):
    d = density_closed_form(fig1_sys)
    _check_density(d)
    assert d.metadata["variant"] in ("literal", "periodic_flux", "zero_flux")


@pytest.mark.parametrize("wiring", ["shared", "independent"])
def test_general_noise_matches_fd_oracle(wiring):
    sys_ = LinearSystem(GENERAL_A, GENERAL_B, wiring)
    d = density_closed_form(sys_)
    _check_density(d)
    theta, p = fd_density(GENERAL_A, GENERAL_B, wiring, m=1024)
    assert _sup(sample_density(d, theta), p) < 1e-5


def test_general_noise_rejects_literal_formula():
    # with b11 != b22 the textbook formula does not solve the stationary equation
    d = density_closed_form(LinearSystem(GENERAL_A, GENERAL_B, "shared"))
    assert d.metadata["variant"] != "literal"
    assert d.metadata["literal_residual"] > 1e-2


def test_fig1_backward_difference_agrees(fig1_sys):
    cf = density_closed_form(fig1_sys, 4000)
    bd = density_backward_difference(fig1_sys, 2000)
    _check_density(bd, residual=False)
    assert _sup(cf.values, bd.values) < 1e-3


def test_backward_difference_self_convergence(fig1_sys):
    ref = density_backward_difference(fig1_sys, 2000)
    errs = []
    for n in (16, 32, 2000 // 8):
        d = density_backward_difference(fig1_sys, n)
        errs.append(_sup(sample_density(d, ref.grid), ref.values))
    assert errs[0] > errs[1] > errs[2]


def test_degenerate_noise():
    with pytest.raises(DegenerateNoise, match="q4"):
        density_closed_form(rotation_system(FIG1_A, 2.0, 0.0))
    with pytest.raises(DegenerateNoise):
        density_backward_difference(rotation_system(FIG1_A, 2.0, 0.0), 100)
    with pytest.raises(DegenerateNoise):
        mc_angle_histogram(rotation_system(FIG1_A, 2.0, 0.0), n_samples=1000)


def test_grid_preconditions(fig1_sys):
    with pytest.raises(InvalidParams):
        density_closed_form(fig1_sys, 63)
    with pytest.raises(InvalidParams):
        density_backward_difference(fig1_sys, 8)


def test_negative_beta_uses_flux_solution():
    sys_ = linearize(game(2.0, -0.5, c1=0.2, c2=0.3, k1=1.0, k2=1.0))
    d = density_closed_form(sys_)
    _check_density(d)
    theta, p = fd_density(sys_.a, sys_.b, m=1024)
    assert _sup(sample_density(d, theta), p) < 1e-5


def test_mc_histogram_uniform():
    d = mc_angle_histogram(rotation_system(np.zeros((2, 2)), 0.0, 1.0), seed=1, n_samples=10**6)
    assert d.method is DensityMethod.MC_HISTOGRAM
    assert _sup(d.values, UNIFORM) < 0.02


def test_mc_histogram_fig1(fig1_sys):
    mc = mc_angle_histogram(fig1_sys, seed=1, n_samples=10**6)
    cf = density_closed_form(fig1_sys)
    assert _sup(mc.values, sample_density(cf, mc.grid)) < 0.05


def test_mc_histogram_deterministic(fig1_sys):
    a = mc_angle_histogram(fig1_sys, seed=5, n_samples=20000, burn_in_time=1.0)
    b = mc_angle_histogram(fig1_sys, seed=5, n_samples=20000, burn_in_time=1.0)
    c = mc_angle_histogram(fig1_sys, seed=5, n_samples=20000, burn_in_time=1.0, workers=3)
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(a.values, c.values)


@settings(max_examples=25, deadline=None)
@given(
    st.lists(st.floats(-3, 3), min_size=4, max_size=4),
    st.floats(-2, 2),
    st.floats(0.5, 3).flatmap(lambda b: st.sampled_from([b, -b])),
)
def test_closed_form_against_fd_oracle(a_entries, alpha, beta):
    a = np.reshape(a_entries, (2, 2))
    sys_ = rotation_system(a, alpha, beta)
    d = density_closed_form(sys_)
    _check_density(d)
    theta, p = fd_density(a, sys_.b, m=512)
    # second-order oracle error on 512 points is below 1e-3 for these ranges
    assert _sup(sample_density(d, theta), p) < 2e-3 * max(1.0, float(np.max(p)))
