"""Optimal stopping times and the defect metrics of the precision budget.

Covers the boundary quantities of the interference symmetry condition, the
phase estimate theta, the resonance times T_n = (n pi - theta) / g (error
suppressed at even n, maximized at odd n), the symmetry/gap/timing defect
metrics, and the beat-frequency refinement of a mis-stated gap integral.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegeneracyError,
    InsufficientDataError,
    UndefinedPhaseError,
    ValidationError,
)
from .models import HamiltonianModel, hamiltonian_derivative
from .spectral import SpectralTrajectory

_BOUNDARY_GAP_TOL = 1e-12

#: a cusp must sit at least this factor below the even-n series median
_CUSP_MEDIAN_FACTOR = 3.0
#: spacings between consecutive cusps must agree to this relative spread
_CUSP_REGULARITY = 0.25


@dataclass(frozen=True)
class BoundaryQuantity:
    """<nu|H^(m+1)|0> / (E_nu - E_0)^(m+2) at both endpoints, evaluated in
    the trajectory's parallel-transport gauge."""

    nu: int
    m: int
    value0: complex
    value1: complex


def boundary_quantity(model: HamiltonianModel, traj: SpectralTrajectory,
                      nu: int, m: int) -> BoundaryQuantity:
    """Endpoint boundary quantities of order m for track nu."""
    if m < 0:
        raise ValidationError("boundary-cancellation order m must be >= 0")
    values = []
    for k, s in ((0, 0.0), (-1, 1.0)):
        gap = float(traj.energies[k, nu] - traj.energies[k, 0])
        if abs(gap) <= _BOUNDARY_GAP_TOL:
            raise DegeneracyError(
                f"track {nu} is degenerate with the transferred track at s={s}"
            )
        hd = hamiltonian_derivative(model, s, m + 1)
        num = np.vdot(traj.vectors[k][:, nu], hd @ traj.vectors[k][:, 0])
        values.append(complex(num / gap ** (m + 2)))
    return BoundaryQuantity(nu=nu, m=m, value0=values[0], value1=values[1])


def estimate_theta(bq: BoundaryQuantity, *, zero_tol=1e-300) -> float:
    """Phase theta in (-pi, pi] that makes the symmetry condition hold in
    argument: value1 = value0 * exp(-i theta)."""
    if abs(bq.value0) <= zero_tol or abs(bq.value1) <= zero_tol:
        raise UndefinedPhaseError(
            "a boundary quantity is zero; fall back to theta = 0 and flag it"
        )
    return float(np.angle(bq.value0 / bq.value1))


def symmetry_defect(bq: BoundaryQuantity, theta: float) -> float:
    """Delta-S: |value1 - value0 exp(-i theta)|."""
    return float(abs(bq.value1 - bq.value0 * np.exp(-1j * theta)))


@dataclass(frozen=True)
class TimingRow:
    n: int
    parity: str
    T: float


@dataclass(frozen=True)
class TimingTable:
    nu: int
    theta: float
    gap_integral: float
    rows: tuple

    def times(self, parity: str | None = None) -> np.ndarray:
        rows = self.rows if parity is None else [r for r in self.rows if r.parity == parity]
        return np.array([r.T for r in rows])


def expand_n_values(n_range, parity: str = "both", step: int = 1):
    """Integers in [lo, hi] filtered by parity; ``step`` strides within each
    parity class (step=1 keeps every matching n)."""
    lo, hi = int(n_range[0]), int(n_range[1])
    if lo > hi or lo < 1:
        raise ValidationError(f"bad n range [{lo}, {hi}]")
    values = []
    for par in ("even", "odd"):
        if parity not in (par, "both"):
            continue
        start = lo if (lo % 2 == 0) == (par == "even") else lo + 1
        values.extend(range(start, hi + 1, 2 * step))
    return sorted(values)


def optimal_times(gap_integral: float, theta: float, n_values, nu: int = 1) -> TimingTable:
    """Resonance-time table T_n = (n pi - theta) / g, parity labeled.

    Rows with nonpositive T are skipped with a warning.
    """
    g = float(gap_integral)
    if g <= 0:
        raise ValidationError(f"gap integral must be positive, got {g}")
    if isinstance(n_values, tuple) and len(n_values) == 2:
        n_values = expand_n_values(n_values)
    rows = []
    for n in sorted(int(n) for n in n_values):
        t = (n * math.pi - theta) / g
        if t <= 0:
            warnings.warn(f"skipping n={n}: nonpositive evolution time {t:.3g}")
            continue
        rows.append(TimingRow(n=n, parity="even" if n % 2 == 0 else "odd", T=t))
    return TimingTable(nu=nu, theta=theta, gap_integral=g, rows=tuple(rows))


def gap_defect(g_true: float, theta: float, n: int, T: float) -> float:
    """Delta-G: |g_true - (n pi - theta) / T|."""
    if T <= 0:
        raise ValidationError("evolution time must be positive")
    return abs(g_true - (n * math.pi - theta) / T)


def timing_defect(t_ideal: float, t_actual: float) -> float:
    """Delta-T: |T_ideal - T_actual|."""
    return abs(t_ideal - t_actual)


@dataclass(frozen=True)
class BeatRefinement:
    gap_integral: float
    T: float
    delta_n: float | None
    converged: bool
    applied_correction: float


def _find_cusps(amps: np.ndarray):
    median = float(np.median(amps))
    cusps = []
    for i in range(1, amps.size - 1):
        if amps[i] < amps[i - 1] and amps[i] < amps[i + 1] \
                and amps[i] <= median / _CUSP_MEDIAN_FACTOR:
            cusps.append(i)
    return cusps


def refine_time_by_beats(series: dict, gap_estimate: float, theta: float,
                         n_target: int, evaluate=None) -> BeatRefinement:
    """Correct a mis-stated gap integral from the beat pattern of the even-n
    amplitude series.

    ``series`` maps n to |amplitude| at the trial time (n pi - theta) / g.
    A relative error eps in the gap estimate puts cusps (near-zeros) in the
    even-n series every 2/eps integers of n; the correction is
    g * (1 +/- 1 / delta_n) with delta_n the cusp spacing counted in steps
    of the even-n sequence.  The sign is fixed by evaluating the candidate
    corrections with ``evaluate`` (a callable T -> |amplitude|) and keeping
    the one that deepens the worst suppression point.
    """
    g = float(gap_estimate)
    if g <= 0:
        raise ValidationError("gap estimate must be positive")
    n_even = np.array(sorted(n for n in series if n % 2 == 0), dtype=int)
    if n_even.size < 5:
        raise InsufficientDataError(
            f"need at least 5 even-n samples, got {n_even.size}"
        )
    amps = np.array([abs(series[int(n)]) for n in n_even], dtype=float)

    def time_for(n, gap):
        return (n * math.pi - theta) / gap

    cusp_idx = _find_cusps(amps)
    if len(cusp_idx) == 0:
        return BeatRefinement(gap_integral=g, T=time_for(n_target, g),
                              delta_n=None, converged=True, applied_correction=1.0)
    if len(cusp_idx) < 2:
        raise InsufficientDataError(
            "series covers fewer than 2 beat cusps; extend the n range"
        )
    cusp_n = n_even[cusp_idx].astype(float)
    spacings = np.diff(cusp_n)
    if spacings.std() > _CUSP_REGULARITY * spacings.mean():
        # isolated dips at irregular positions are round-off noise, not a
        # beat pattern: the stated gap is already at the resolution limit
        return BeatRefinement(gap_integral=g, T=time_for(n_target, g),
                              delta_n=None, converged=True, applied_correction=1.0)
    delta_n = float(spacings.mean()) / 2.0  # steps of the even-n sequence
    candidates = [g * (1.0 + 1.0 / delta_n), g * (1.0 - 1.0 / delta_n)]
    if evaluate is None:
        raise InsufficientDataError(
            "the sign of the gap correction cannot be inferred from cusp "
            "positions alone; pass evaluate= to probe the candidates"
        )
    n_probe = int(n_even[int(np.argmax(amps))])
    probe_amps = [float(abs(evaluate(time_for(n_probe, gc)))) for gc in candidates]
    original = float(abs(evaluate(time_for(n_probe, g))))
    best = int(np.argmin(probe_amps))
    if original <= probe_amps[best]:
        return BeatRefinement(gap_integral=g, T=time_for(n_target, g),
                              delta_n=delta_n, converged=True, applied_correction=1.0)
    g_new = candidates[best]
    return BeatRefinement(
        gap_integral=g_new,
        T=time_for(n_target, g_new),
        delta_n=delta_n,
        converged=False,
        applied_correction=g_new / g,
    )
