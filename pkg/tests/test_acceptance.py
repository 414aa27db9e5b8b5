"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s``.

Two caveats established during development and recorded in the project
notes: the N = 16 search model carries an interior avoided-crossing
amplitude ~ exp(-0.0253 T / phi'(1/2)) that the boundary-term theory does
not capture.  It dominates the suppressed (even-n) series of the linear
schedule for T below ~450 and delays the predictor's asymptotic regime,
so the Fig.-1 even-n fit over the full stated window and the predictor
agreement at the stated window start fail with honest numbers.  Both
tests below implement their criterion exactly as stated and report the
measured values.
"""

import math
import time

import numpy as np
import pytest

from adiaphase.analysis import (
    PerturbationSpec,
    fit_power_law,
    predict_amplitude_general,
    tolerance_sweep,
    transition_amplitudes,
)
from adiaphase.harness import SweepSpec, run_sweep
from adiaphase.models import reduce_search_to_2level, search_hamiltonian
from adiaphase.propagator import evolve
from adiaphase.schedules import BetaInterpolation, Linear, eval_schedule, parse_schedule
from adiaphase.spectral import build_trajectory, gap_integral
from adiaphase.timing import (
    boundary_quantity,
    estimate_theta,
    optimal_times,
    refine_time_by_beats,
)

SQRT15_OVER_16 = math.sqrt(15.0) / 16.0


def _report(name, ok, detail):
    print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return ok


def _sweep(model, schedule, m, n_range, tol, n_step=1, grid_k=1024, parity="both"):
    spec = SweepSpec.from_dict(dict(
        model=model, schedule=schedule, m=m, nu=1, n_range=list(n_range),
        parity=parity, n_step=n_step, tol=tol, grid_k=grid_k, jobs=2,
    ))
    return run_sweep(spec)


@pytest.fixture(scope="module")
def fig1():
    t0 = time.time()
    result = _sweep("search:n=4", "linear", 0, (40, 400), tol=1e-9)
    result.runtime = time.time() - t0
    return result


@pytest.fixture(scope="module")
def fig3_beta1():
    t0 = time.time()
    result = _sweep("search:n=4", "beta:m=1", 1, (280, 600), tol=1e-11, n_step=4)
    result.runtime = time.time() - t0
    return result


@pytest.fixture(scope="module")
def fig3_beta2():
    t0 = time.time()
    result = _sweep("search:n=4", "beta:m=2", 2, (391, 661), tol=1e-12, n_step=5)
    result.runtime = time.time() - t0
    return result


def test_fig1_replica_scaling(fig1):
    even = fig1.summary["even_exponent"]
    odd = fig1.summary["odd_exponent"]
    ok_even = -2.2 <= even <= -1.8
    ok_odd = -1.1 <= odd <= -0.9
    ok = _report(
        "fig1 replica (linear, m=0, n in [40,400])",
        ok_even and ok_odd,
        f"even exponent {even:.3f} (window [-2.2,-1.8]), odd {odd:.3f} "
        f"(window [-1.1,-0.9]), runtime {fig1.runtime:.0f}s; the even-n fit "
        f"over the full window is dominated below T~450 by the interior "
        f"exp(-0.0253 T) amplitude (see notes/decisions.md); restricted to "
        f"its asymptotic regime the even series fits "
        f"{fit_power_law([(r['T'], r['amp_abs']) for r in fig1.rows if r['parity'] == 'even' and r['T'] > 550]).exponent:.3f}",
    )
    assert ok


def test_fig2_replica_scaling():
    t0 = time.time()
    result = _sweep("search:n=4", "local:N=16", 0, (40, 400), tol=1e-9)
    runtime = time.time() - t0
    even = result.summary["even_exponent"]
    odd = result.summary["odd_exponent"]
    ok = _report(
        "fig2 replica (local:N=16, m=0, n in [40,400])",
        -2.2 <= even <= -1.8 and -1.1 <= odd <= -0.9,
        f"even exponent {even:.3f}, odd {odd:.3f}, runtime {runtime:.0f}s",
    )
    assert ok


def test_fig3_replica_scaling(fig3_beta1, fig3_beta2):
    b1_even = fig3_beta1.summary["even_exponent"]
    b1_odd = fig3_beta1.summary["odd_exponent"]
    b2_odd = fig3_beta2.summary["odd_exponent"]
    # the m=2 even-n amplitudes sit below the default 100*tol fit floor;
    # they are fitted with an explicit per-point noise margin instead
    # (amplitude >= 20x the step-doubling error estimate, checked in the
    # companion test below)
    b2_even_fit = fit_power_law(
        [(r["T"], r["amp_abs"]) for r in fig3_beta2.rows
         if r["parity"] == "even" and r["T"] >= 1850.0],
    )
    b2_even = b2_even_fit.exponent
    ok = _report(
        "fig3 replica (beta m=1/m=2)",
        (-2.2 <= b1_odd <= -1.8) and (-3.3 <= b1_even <= -2.7)
        and (-3.3 <= b2_odd <= -2.7) and (-4.4 <= b2_even <= -3.6),
        f"beta1 odd {b1_odd:.3f} (window [-2.2,-1.8]), even {b1_even:.3f} "
        f"([-3.3,-2.7]); beta2 odd {b2_odd:.3f} ([-3.3,-2.7]), even "
        f"{b2_even:.3f} ([-4.4,-3.6]); runtime "
        f"{fig3_beta1.runtime + fig3_beta2.runtime:.0f}s (< 10 min required)",
    )
    assert fig3_beta1.runtime + fig3_beta2.runtime < 600
    assert ok


def test_fig3_beta2_even_noise_margin(fig3_beta2):
    rows = [r for r in fig3_beta2.rows if r["parity"] == "even" and r["T"] >= 1850.0]
    assert len(rows) >= 5
    # re-run two points to recover the est_error diagnostics at this tol
    ctx = fig3_beta2.context
    for r in (rows[0], rows[-1]):
        res = evolve(ctx.model, r["T"], tol=1e-12, traj=ctx.traj)
        assert r["amp_abs"] >= 20.0 * max(res.est_error, 1e-14)


def test_cross_order_coincidence(fig1, fig3_beta1, fig3_beta2):
    # even-n series for m coincides with the odd-n series for m+1 at large T
    def fitted(rows, parity, window):
        pts = [(r["T"], r["amp_abs"]) for r in rows
               if r["parity"] == parity and window[0] <= r["T"] <= window[1]]
        return fit_power_law(pts)

    checks = []
    for label, rows_a, rows_b, window in (
        ("m=0 even vs m=1 odd", fig1.rows, fig3_beta1.rows, (1300.0, 2200.0)),
        ("m=1 even vs m=2 odd", fig3_beta1.rows, fig3_beta2.rows, (1700.0, 2800.0)),
    ):
        fit_a = fitted(rows_a, "even", window)
        fit_b = fitted(rows_b, "odd", window)
        t_probe = np.geomspace(window[0], window[1], 9)
        ratios = fit_a.predict(t_probe) / fit_b.predict(t_probe)
        worst = float(np.max(np.abs(np.log(ratios))))
        checks.append((label, math.exp(worst)))
    ok = all(r <= 3.0 for _, r in checks)
    _report(
        "cross-order coincidence",
        ok,
        "; ".join(f"{label}: worst amplitude ratio {r:.2f} (limit 3)"
                  for label, r in checks),
    )
    assert ok


def test_predictor_agreement():
    """Criterion as stated: odd n with T >= 10/g, |evolve| vs the closed-form
    prediction within 25% for m in {0,1,2}.

    The stated window start lies deep inside the interior-dominated regime
    (see notes); agreement within 25% begins empirically at T ~ 340 (m=0),
    ~ 930 (m=1), ~ 1300 (m=2).  The sampled points below document this.
    """
    samples = {
        0: ("linear", [5, 11, 21, 41, 61, 81, 101, 201, 399]),
        1: ("beta:m=1", [5, 21, 61, 121, 201, 281, 401, 501]),
        2: ("beta:m=2", [5, 21, 61, 201, 301, 391, 451, 661]),
    }
    failures = []
    onsets = {}
    for m, (sched_text, ns) in samples.items():
        model = reduce_search_to_2level(search_hamiltonian(4, parse_schedule(sched_text)))
        traj = build_trajectory(model, 1024)
        g = gap_integral(traj, 1).value
        theta = estimate_theta(boundary_quantity(model, traj, 1, m))
        onset = None
        for n in ns:
            t = (n * math.pi - theta) / g
            if t < 10.0 / g:
                continue
            tol = 1e-10 if t < 1500 else 1e-11
            res = evolve(model, t, tol=tol, traj=traj)
            pred = predict_amplitude_general(model, traj, 1, t, m, theta, g, n=n)
            ratio = abs(res.error_components[1]) / pred.amplitude
            within = abs(ratio - 1.0) <= 0.25
            if not within:
                failures.append((m, n, t, ratio))
                onset = None
            elif onset is None:
                onset = t
        onsets[m] = onset
    ok = not failures
    detail = (
        f"all sampled odd-n points with T >= 10/g within 25%"
        if ok else
        f"{len(failures)} sampled points outside 25%: worst m={failures[0][0]} "
        f"n={failures[0][1]} T={failures[0][2]:.0f} ratio={failures[0][3]:.1f}; "
        f"25% agreement holds from T ~ "
        + ", ".join(f"{onsets[m]:.0f} (m={m})" for m in onsets if onsets[m])
    )
    _report("predictor agreement (odd n, T >= 10/g, 25%)", ok, detail)
    assert ok, detail


def test_exact_identities(linear_search_2level, linear_search_traj,
                          linear_search_full, linear_search_full_traj):
    g = gap_integral(linear_search_traj, 1).value
    theta = estimate_theta(
        boundary_quantity(linear_search_2level, linear_search_traj, 1, 0))
    problems = []

    # interference factor is identically zero at even n (formula level)
    for n in (2, 40, 398):
        t = (n * math.pi - theta) / g
        pred = predict_amplitude_general(linear_search_2level, linear_search_traj,
                                         1, t, 0, theta, g, n=n)
        if pred.interference_factor != 0.0 or pred.amplitude != 0.0:
            problems.append(f"interference factor at n={n} is {pred.interference_factor}")

    # completeness and unitarity, reduced model at large T
    res = evolve(linear_search_2level, 1500.0, tol=1e-10, traj=linear_search_traj)
    norm_drift = abs(np.linalg.norm(res.final_state) - 1.0)
    if norm_drift > 1e-12:
        problems.append(f"reduced-model norm drift {norm_drift:.2e}")
    closure = abs(sum(abs(a) ** 2 for a in res.overlaps) - 1.0)
    if closure > 1e-10:
        problems.append(f"completeness defect {closure:.2e}")

    # completeness and unitarity, full model
    res16 = evolve(linear_search_full, 25.0, tol=1e-10, traj=linear_search_full_traj)
    norm_drift16 = abs(np.linalg.norm(res16.final_state) - 1.0)
    if norm_drift16 > 1e-12:
        problems.append(f"full-model norm drift {norm_drift16:.2e}")
    closure16 = abs(res16.error_norm ** 2 + abs(res16.overlaps[0]) ** 2 - 1.0)
    if closure16 > 1e-10:
        problems.append(f"full-model closure defect {closure16:.2e}")

    # gauge invariance of |E_nu| under trajectory rephasing
    import copy
    traj2 = copy.deepcopy(linear_search_full_traj)
    rng = np.random.default_rng(2024)
    traj2.vectors = traj2.vectors * np.exp(
        2j * np.pi * rng.uniform(size=16))[None, None, :]
    amps_a = transition_amplitudes(res16, linear_search_full_traj)
    amps_b = transition_amplitudes(res16, traj2)
    gauge_dev = max(abs(abs(amps_a[nu]) - abs(amps_b[nu])) for nu in amps_a)
    if gauge_dev > 1e-10:
        problems.append(f"gauge dependence {gauge_dev:.2e}")

    # Beta(0) equals the linear ramp pointwise
    s = np.linspace(0.0, 1.0, 4001)
    beta0_dev = float(np.max(np.abs(eval_schedule(BetaInterpolation(0), s) - s)))
    if beta0_dev > 1e-14:
        problems.append(f"Beta(0) vs Linear deviation {beta0_dev:.2e}")

    ok = not problems
    _report(
        "exact identities",
        ok,
        "all identities hold (factor==0 at even n; closure <=1e-10; norm "
        f"drift {max(norm_drift, norm_drift16):.1e} <= 1e-12; gauge dev "
        f"{gauge_dev:.1e} <= 1e-10; Beta(0)==Linear to {beta0_dev:.1e})"
        if ok else "; ".join(problems),
    )
    assert ok


def test_oracle_equivalence_full_vs_reduced():
    rng = np.random.default_rng(31415)
    schedules = ["linear", "beta:m=1", "beta:m=2", "local:N={N}"]
    worst = 0.0
    pairs = []
    for i in range(10):
        n_qubits = [2, 3, 4][i % 3]
        sched_text = schedules[int(rng.integers(len(schedules)))].format(N=2 ** n_qubits)
        t = float(rng.uniform(5.0, 40.0))
        schedule = parse_schedule(sched_text)
        full = search_hamiltonian(n_qubits, schedule)
        red = reduce_search_to_2level(full)
        res_f = evolve(full, t, tol=1e-10)
        res_r = evolve(red, t, tol=1e-10)
        dev = abs(res_f.error_norm - res_r.error_norm)
        worst = max(worst, dev)
        pairs.append((n_qubits, sched_text, t, dev))
    ok = worst <= 1e-7
    _report(
        "oracle equivalence (2-level vs full, N in {4,8,16}, 10 pairs)",
        ok,
        f"worst |error-norm difference| = {worst:.2e} (limit 1e-7)",
    )
    assert ok


def test_tolerance_model():
    red = reduce_search_to_2level(search_hamiltonian(4, Linear()))
    traj = build_trajectory(red, 1024)
    g = gap_integral(traj, 1).value
    theta = estimate_theta(boundary_quantity(red, traj, 1, 0))

    # timing defect shrinking as 1/T keeps the augmented order (m=0)
    table = optimal_times(g, theta, range(100, 241, 4), nu=1)
    timing_out = tolerance_sweep(red, traj, table, 0,
                                 PerturbationSpec(kind="timing", alpha=1.0,
                                                  amplitude=0.5), tol=1e-10)
    # constant gap mis-statement destroys it
    table2 = optimal_times(g, theta, range(100, 341, 4), nu=1)
    gap_out = tolerance_sweep(red, traj, table2, 0,
                              PerturbationSpec(kind="gap", alpha=0.0,
                                               amplitude=0.02), tol=1e-10)
    # derivative defect shrinking as T^(-m-1) keeps order m+2 for m=1
    beta1 = reduce_search_to_2level(search_hamiltonian(4, BetaInterpolation(1)))
    traj1 = build_trajectory(beta1, 1024)
    g1 = gap_integral(traj1, 1).value
    theta1 = estimate_theta(boundary_quantity(beta1, traj1, 1, 1))
    table3 = optimal_times(g1, theta1, range(280, 601, 8), nu=1)
    deriv_out = tolerance_sweep(beta1, traj1, table3, 1,
                                PerturbationSpec(kind="derivative", alpha=2.0,
                                                 amplitude=1.0, p=1, seed=7),
                                tol=1e-11)
    ok = (timing_out.fit.exponent <= -1.8
          and gap_out.fit.exponent >= -1.3
          and deriv_out.fit.exponent <= -2.8)
    _report(
        "tolerance model",
        ok,
        f"timing 1/T defect: {timing_out.fit.exponent:.3f} (need <= -1.8); "
        f"constant gap defect: {gap_out.fit.exponent:.3f} (need >= -1.3); "
        f"derivative defect m=1, p=1 ~ T^-2: {deriv_out.fit.exponent:.3f} "
        f"(need <= -2.8)",
    )
    assert ok


def test_beat_refinement(linear_search_2level, linear_search_traj):
    g_true = gap_integral(linear_search_traj, 1).value
    theta = estimate_theta(
        boundary_quantity(linear_search_2level, linear_search_traj, 1, 0))
    b0 = SQRT15_OVER_16
    g_stated = g_true * 1.005

    def amp_at(t):
        return b0 * abs(np.exp(-1j * (theta + t * g_true)) - 1.0) / t

    series = {}
    for n in range(2, 2001, 2):
        t = (n * math.pi - theta) / g_stated
        series[n] = amp_at(t)
    out = refine_time_by_beats(series, g_stated, theta, n_target=100,
                               evaluate=amp_at)
    rel = abs(out.gap_integral - g_true) / g_true
    ok = rel <= 5e-4
    _report(
        "beat refinement",
        ok,
        f"gap mis-stated by 0.5% recovered to {rel * 100:.4f}% "
        f"(need <= 0.05%); cusp spacing delta_n = {out.delta_n}",
    )
    assert ok
