"""Boundary quantities, theta, resonance times, defect metrics, beats."""

import math

import numpy as np
import pytest

from adiaphase.errors import (
    InsufficientDataError,
    UndefinedPhaseError,
    ValidationError,
)
from adiaphase.models import reduce_search_to_2level, search_hamiltonian
from adiaphase.schedules import BetaInterpolation, Linear
from adiaphase.spectral import build_trajectory, gap_integral
from adiaphase.timing import (
    BoundaryQuantity,
    boundary_quantity,
    estimate_theta,
    expand_n_values,
    gap_defect,
    optimal_times,
    refine_time_by_beats,
    symmetry_defect,
    timing_defect,
)

SQRT15_OVER_16 = np.sqrt(15.0) / 16.0


@pytest.fixture(scope="module")
def beta1_model():
    return reduce_search_to_2level(search_hamiltonian(4, BetaInterpolation(1)))


@pytest.fixture(scope="module")
def beta1_traj(beta1_model):
    return build_trajectory(beta1_model, 256)


def test_boundary_quantity_linear_m0(linear_search_2level, linear_search_traj):
    bq = boundary_quantity(linear_search_2level, linear_search_traj, 1, 0)
    assert abs(bq.value0) == pytest.approx(SQRT15_OVER_16, abs=1e-10)
    assert abs(bq.value1) == pytest.approx(SQRT15_OVER_16, abs=1e-10)


def test_boundary_quantity_beta1_m0_vanishes(beta1_model, beta1_traj):
    bq = boundary_quantity(beta1_model, beta1_traj, 1, 0)
    assert abs(bq.value0) <= 1e-12
    assert abs(bq.value1) <= 1e-12


def test_boundary_quantity_beta1_m1(beta1_model, beta1_traj):
    # |B| = phi''(0) * sqrt(15)/16 with phi''(0) = 6; finite-difference oracle
    bq = boundary_quantity(beta1_model, beta1_traj, 1, 1)
    expected = 6.0 * SQRT15_OVER_16
    assert abs(bq.value0) == pytest.approx(expected, abs=1e-8)
    assert abs(bq.value1) == pytest.approx(abs(bq.value0), abs=1e-8)
    h = 1e-4
    phi_dd = (beta1_model.schedule.value_extended(2 * h)
              - 2 * beta1_model.schedule.value_extended(h)
              + beta1_model.schedule.value_extended(0.0)) / h ** 2
    assert phi_dd * SQRT15_OVER_16 == pytest.approx(abs(bq.value0), rel=1e-3)


def test_theta_linear_is_zero(linear_search_2level, linear_search_traj):
    bq = boundary_quantity(linear_search_2level, linear_search_traj, 1, 0)
    theta = estimate_theta(bq)
    assert abs(theta) <= 1e-8
    # boundary values are real with equal sign
    assert abs(bq.value0.imag) <= 1e-12
    assert bq.value0.real * bq.value1.real > 0


def test_theta_beta1_is_pi(beta1_model, beta1_traj):
    # phi''(1) = -phi''(0) flips the boundary sign for odd m
    bq = boundary_quantity(beta1_model, beta1_traj, 1, 1)
    assert abs(estimate_theta(bq)) == pytest.approx(math.pi, abs=1e-8)


def test_theta_synthetic_quarter_turn():
    bq = BoundaryQuantity(nu=1, m=0, value0=1.0 + 0.0j,
                          value1=np.exp(-1j * math.pi / 2))
    assert estimate_theta(bq) == pytest.approx(math.pi / 2, abs=1e-15)


def test_theta_equal_values_is_zero():
    bq = BoundaryQuantity(nu=1, m=0, value0=0.7 + 0.0j, value1=0.7 + 0.0j)
    assert estimate_theta(bq) == 0.0


def test_theta_zero_value_raises():
    bq = BoundaryQuantity(nu=1, m=0, value0=0.0j, value1=1.0 + 0.0j)
    with pytest.raises(UndefinedPhaseError):
        estimate_theta(bq)


def test_theta_rephasing_invariance(linear_search_2level):
    thetas = []
    for k in (200, 256, 512):
        traj = build_trajectory(linear_search_2level, k)
        bq = boundary_quantity(linear_search_2level, traj, 1, 0)
        thetas.append(estimate_theta(bq))
    assert max(thetas) - min(thetas) <= 1e-8


def test_symmetry_defect_trivials():
    bq = BoundaryQuantity(nu=1, m=0, value0=1.0 + 0.0j, value1=1.0 + 0.0j)
    assert symmetry_defect(bq, 0.0) == 0.0
    assert symmetry_defect(bq, math.pi) == pytest.approx(2.0, abs=1e-15)


def test_symmetry_defect_search_model(linear_search_2level, linear_search_traj):
    bq = boundary_quantity(linear_search_2level, linear_search_traj, 1, 0)
    assert symmetry_defect(bq, estimate_theta(bq)) <= 1e-8


def test_optimal_times_arithmetic():
    table = optimal_times(0.5, 0.0, [2, 3])
    assert table.rows[0].T == pytest.approx(4 * math.pi, abs=1e-12)
    assert table.rows[0].parity == "even"
    assert table.rows[1].T == pytest.approx(6 * math.pi, abs=1e-12)
    assert table.rows[1].parity == "odd"


def test_optimal_times_spacing_identity():
    g = 0.5665971450314962
    table = optimal_times(g, 0.123, range(2, 40))
    times = [r.T for r in table.rows]
    diffs = np.diff(times)
    assert np.allclose(diffs * 2, 2 * math.pi / g, atol=1e-12)


def test_optimal_times_skips_nonpositive():
    # theta = pi makes the n = 1 time exactly zero: skipped with a warning
    with pytest.warns(UserWarning):
        table = optimal_times(1.0, math.pi, [1, 2])
    assert [r.n for r in table.rows] == [2]
    assert all(r.T > 0 for r in table.rows)
    with pytest.raises(ValidationError):
        optimal_times(-1.0, 0.0, [2])


def test_expand_n_values():
    assert expand_n_values((4, 9), "even") == [4, 6, 8]
    assert expand_n_values((4, 9), "odd") == [5, 7, 9]
    assert expand_n_values((4, 9), "both", step=2) == [4, 5, 8, 9]
    with pytest.raises(ValidationError):
        expand_n_values((9, 4))


def test_gap_and_timing_defects():
    assert gap_defect(0.5, 0.0, 4, 8 * math.pi) == pytest.approx(0.0, abs=1e-15)
    t = (4 * math.pi - 0.0) / 0.501
    assert gap_defect(0.5, 0.0, 4, t) == pytest.approx(0.001, abs=1e-12)
    assert timing_defect(10.0, 10.0) == 0.0
    assert timing_defect(10.0, 10.5) == 0.5


def test_defects_scale_linearly():
    g, theta, n = 0.6, 0.1, 20
    t0 = (n * math.pi - theta) / g
    eps = np.array([1e-6, 2e-6, 4e-6, 8e-6])
    dg = [gap_defect(g, theta, n, (n * math.pi - theta) / (g + e)) for e in eps]
    ratios = np.array(dg) / eps
    assert np.allclose(ratios, ratios[0], rtol=1e-4)
    dt = [timing_defect(t0, t0 + e) for e in eps]
    assert np.allclose(np.array(dt) / eps, 1.0, rtol=1e-12)


def test_even_resonance_is_local_minimum():
    # small n so that a 2% shift stays well inside one interference period;
    # the local schedule keeps the boundary term dominant at these T
    from adiaphase.propagator import evolve
    from adiaphase.schedules import LocalAdiabatic
    from adiaphase.spectral import build_trajectory, gap_integral

    model = reduce_search_to_2level(search_hamiltonian(4, LocalAdiabatic(16)))
    traj = build_trajectory(model, 256)
    g = gap_integral(traj, 1).value
    theta = estimate_theta(boundary_quantity(model, traj, 1, 0))
    t_even = (10 * math.pi - theta) / g
    amps = {}
    for factor in (0.98, 1.0, 1.02):
        res = evolve(model, t_even * factor, tol=1e-10, traj=traj)
        amps[factor] = abs(res.error_components[1])
    assert amps[1.0] < amps[0.98]
    assert amps[1.0] < amps[1.02]


def test_half_suppression_timing_threshold(linear_search_2level, linear_search_traj):
    # first-order expansion: a timing shift dT puts the even-n amplitude at
    # 2|B| |sin(g dT / 2)| / T, so it stays below half the adjacent odd-n
    # amplitude (2|B|/T) while dT < 2 arcsin(1/2) / g ~ 1.047/g
    from adiaphase.propagator import evolve
    from adiaphase.spectral import gap_integral

    g = gap_integral(linear_search_traj, 1).value
    theta = estimate_theta(
        boundary_quantity(linear_search_2level, linear_search_traj, 1, 0))
    t_even = (100 * math.pi - theta) / g
    t_odd = (101 * math.pi - theta) / g
    odd_amp = abs(evolve(linear_search_2level, t_odd, tol=1e-10,
                         traj=linear_search_traj).error_components[1])
    threshold = 2.0 * math.asin(0.5) / g
    inside = abs(evolve(linear_search_2level, t_even + 0.8 * threshold,
                        tol=1e-10, traj=linear_search_traj).error_components[1])
    outside = abs(evolve(linear_search_2level, t_even + 2.5 * threshold,
                         tol=1e-10, traj=linear_search_traj).error_components[1])
    assert inside < 0.5 * odd_amp
    assert outside > 0.5 * odd_amp


def _predictor_series(g_true, g_stated, theta, b0, n_values):
    series = {}
    for n in n_values:
        t = (n * math.pi - theta) / g_stated
        series[n] = abs(b0) * abs(np.exp(-1j * (theta + t * g_true)) - 1.0) / t
    return series


def test_beat_refinement_recovers_gap():
    g_true = 0.5665971450314962
    theta = 0.0
    b0 = SQRT15_OVER_16
    g_stated = g_true * 1.005
    n_values = range(2, 2001, 2)
    series = _predictor_series(g_true, g_stated, theta, b0, n_values)

    def evaluate(t):
        return abs(b0) * abs(np.exp(-1j * (theta + t * g_true)) - 1.0) / t

    out = refine_time_by_beats(series, g_stated, theta, n_target=100,
                               evaluate=evaluate)
    assert not out.converged
    assert abs(out.gap_integral - g_true) / g_true <= 5e-4
    assert out.delta_n is not None


def test_beat_refinement_exact_gap_flags_converged():
    g_true = 0.5665971450314962
    series = _predictor_series(g_true, g_true, 0.0, SQRT15_OVER_16,
                               range(2, 2001, 2))

    def evaluate(t):
        return SQRT15_OVER_16 * abs(np.exp(-1j * t * g_true) - 1.0) / t

    out = refine_time_by_beats(series, g_true, 0.0, n_target=100,
                               evaluate=evaluate)
    assert out.converged
    assert out.gap_integral == g_true
    assert out.applied_correction == 1.0


def test_beat_refinement_single_cusp_insufficient():
    g_true = 0.5665971450314962
    g_stated = g_true * 1.005
    # short series: roughly one beat period only
    series = _predictor_series(g_true, g_stated, 0.0, SQRT15_OVER_16,
                               range(2, 500, 2))
    with pytest.raises(InsufficientDataError):
        refine_time_by_beats(series, g_stated, 0.0, n_target=100,
                             evaluate=lambda t: 0.0)
