"""Instantaneous eigensystems with gauge fixing, gap integrals, and the
ground-to-excited coupling coefficients.

The eigensolver is a self-contained cyclic Jacobi iteration for complex
Hermitian matrices.  Trajectories match eigenvector tracks across grid
points by maximal overlap (labels follow states through avoided crossings)
and fix phases so adjacent-point overlaps are real and positive, the
discrete analog of the parallel-transport gauge.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegeneracyError,
    NumericError,
    PrecisionWarning,
    ValidationError,
)
from .models import HamiltonianModel, hamiltonian_derivative

_JACOBI_MAX_SWEEPS = 100
_DEFAULT_DEGENERACY_TOL = 1e-12
_FORBIDDEN_COUPLING_TOL = 1e-10


def _off_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diagonal(a))
    return float(np.linalg.norm(off))


def diagonalize(h, *, hermiticity_tol=1e-10, max_sweeps=_JACOBI_MAX_SWEEPS):
    """Eigensystem of a complex Hermitian matrix by cyclic Jacobi rotations.

    Returns (energies, vectors) with energies ascending and vectors as
    orthonormal columns.  Raises ValidationError for non-Hermitian input and
    NumericError if the off-diagonal norm has not collapsed after
    ``max_sweeps`` sweeps.
    """
    a = np.array(h, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    asym = np.max(np.abs(a - a.conj().T)) if n else 0.0
    if asym > hermiticity_tol:
        raise ValidationError(
            f"matrix deviates from Hermiticity by {asym:.3e} (tol {hermiticity_tol:.0e})"
        )
    a = 0.5 * (a + a.conj().T)
    v = np.eye(n, dtype=complex)
    scale = max(1.0, float(np.linalg.norm(a)))
    target = 1e-14 * scale
    converged = False
    for _ in range(max_sweeps):
        if _off_norm(a) <= target:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                r = abs(apq)
                if r <= 1e-300 or r <= 1e-18 * scale:
                    continue
                phase = apq / r
                app = a[p, p].real
                aqq = a[q, q].real
                tau = (aqq - app) / (2.0 * r)
                if tau == 0.0:
                    t = 1.0
                else:
                    t = np.sign(tau) / (abs(tau) + np.hypot(1.0, tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s_ = t * c
                # columns, then rows, of the combined phase+Givens rotation
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * phase * col_p - s_ * col_q
                a[:, q] = s_ * phase * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * np.conj(phase) * row_p - s_ * row_q
                a[q, :] = s_ * np.conj(phase) * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                vcol_p = v[:, p].copy()
                vcol_q = v[:, q].copy()
                v[:, p] = c * phase * vcol_p - s_ * vcol_q
                v[:, q] = s_ * phase * vcol_p + c * vcol_q
    else:
        converged = _off_norm(a) <= target
    if not converged:
        raise NumericError(
            f"Jacobi iteration did not converge in {max_sweeps} sweeps "
            f"(off-diagonal norm {_off_norm(a):.3e})"
        )
    energies = np.diagonal(a).real.copy()
    order = np.argsort(energies, kind="stable")
    return energies[order], v[:, order]


def _canonical_phases(vectors: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude entry is real positive."""
    out = vectors.copy()
    for j in range(out.shape[1]):
        idx = int(np.argmax(np.abs(out[:, j])))
        entry = out[idx, j]
        mag = abs(entry)
        if mag > 0:
            out[:, j] *= np.conj(entry) / mag
    return out


def _greedy_match(overlap: np.ndarray) -> np.ndarray:
    """Permutation perm with perm[prev_track] = current column, chosen by
    descending |overlap|; verified to be a bijection."""
    n = overlap.shape[0]
    mags = np.abs(overlap)
    order = np.argsort(mags, axis=None)[::-1]
    perm = np.full(n, -1, dtype=int)
    used_cols = np.zeros(n, dtype=bool)
    assigned = 0
    for flat in order:
        i, j = divmod(int(flat), n)
        if perm[i] >= 0 or used_cols[j]:
            continue
        perm[i] = j
        used_cols[j] = True
        assigned += 1
        if assigned == n:
            break
    if np.any(perm < 0):
        raise NumericError("track matching failed to produce a permutation")
    return perm


def _degenerate_groups(energies: np.ndarray, tol: float):
    order = np.argsort(energies, kind="stable")
    groups = []
    current = [int(order[0])]
    for idx in order[1:]:
        if abs(energies[idx] - energies[current[-1]]) <= tol:
            current.append(int(idx))
        else:
            groups.append(current)
            current = [int(idx)]
    groups.append(current)
    return groups


def _polar_unitary(m: np.ndarray) -> np.ndarray:
    u, _, vh = np.linalg.svd(m)
    return u @ vh


def _align_to_previous(v_cur, e_cur, v_prev, tol):
    """Gauge-fix current vectors against matched previous ones: per-column
    phase for isolated tracks, unitary Procrustes within degenerate blocks."""
    out = v_cur.copy()
    for group in _degenerate_groups(e_cur, tol):
        if len(group) == 1:
            j = group[0]
            ov = np.vdot(v_prev[:, j], out[:, j])
            mag = abs(ov)
            if mag > 0:
                out[:, j] *= np.conj(ov) / mag
        else:
            cols = np.array(group)
            m = out[:, cols].conj().T @ v_prev[:, cols]
            out[:, cols] = out[:, cols] @ _polar_unitary(m)
    return out


@dataclass
class SpectralTrajectory:
    """Gauge-fixed instantaneous eigensystem on a uniform s-grid.

    ``energies[k, nu]`` and ``vectors[k, :, nu]`` follow track ``nu`` across
    the grid; track 0 is the transferred state.
    """

    s: np.ndarray
    energies: np.ndarray           # (K+1, N)
    vectors: np.ndarray            # (K+1, N, N), columns are tracks
    model: HamiltonianModel = field(repr=False)
    degeneracy_tol: float = _DEFAULT_DEGENERACY_TOL

    @property
    def k_intervals(self) -> int:
        return self.s.size - 1

    @property
    def n_tracks(self) -> int:
        return self.energies.shape[1]

    def gap(self, nu: int) -> np.ndarray:
        """E_nu(s) - E_0(s) on the grid."""
        return self.energies[:, nu] - self.energies[:, 0]

    def endpoint_vectors(self, nu: int):
        return self.vectors[0, :, nu], self.vectors[-1, :, nu]

    def grid_index(self, s: float) -> int:
        k = int(round(float(s) * self.k_intervals))
        if not (0 <= k <= self.k_intervals) or abs(self.s[k] - s) > 1e-9:
            raise ValidationError(f"s={s} is not on the trajectory grid")
        return k


def build_trajectory(model: HamiltonianModel, k_intervals: int, *,
                     degeneracy_tol=_DEFAULT_DEGENERACY_TOL) -> SpectralTrajectory:
    """Diagonalize H on a uniform grid of K intervals and gauge-fix tracks.

    Raises DegeneracyError if the transferred track becomes degenerate with
    a track it couples to; exact degeneracies between mutually uncoupled
    tracks are allowed and tracked blockwise.
    """
    if k_intervals < 16:
        raise ValidationError(f"need at least 16 grid intervals, got {k_intervals}")
    ss = np.linspace(0.0, 1.0, k_intervals + 1)
    mats = model.matrix_batch(ss)
    n = model.dim
    energies = np.empty((k_intervals + 1, n))
    vectors = np.empty((k_intervals + 1, n, n), dtype=complex)
    for k in range(k_intervals + 1):
        w, v = diagonalize(mats[k])
        energies[k] = w
        vectors[k] = v

    # track the requested transferred state as track 0
    if model.transferred_index != 0:
        order = [model.transferred_index] + [
            i for i in range(n) if i != model.transferred_index
        ]
        energies = energies[:, order]
        vectors = vectors[:, :, order]

    vectors[0] = _canonical_phases(vectors[0])
    for k in range(1, k_intervals + 1):
        overlap = vectors[k - 1].conj().T @ vectors[k]
        perm = _greedy_match(overlap)
        energies[k] = energies[k][perm]
        vectors[k] = vectors[k][:, perm]
        vectors[k] = _align_to_previous(vectors[k], energies[k],
                                        vectors[k - 1], degeneracy_tol)

    # Degenerate blocks at s=0 hold no information about how the degeneracy
    # splits for s > 0; re-align them backward from the first interior point
    # so the boundary vectors are the physical s -> 0+ limits.
    for group in _degenerate_groups(energies[0], degeneracy_tol):
        if len(group) > 1:
            cols = np.array(group)
            m = vectors[0][:, cols].conj().T @ vectors[1][:, cols]
            vectors[0][:, cols] = vectors[0][:, cols] @ _polar_unitary(m)

    traj = SpectralTrajectory(
        s=ss, energies=energies, vectors=vectors, model=model,
        degeneracy_tol=degeneracy_tol,
    )
    _check_coupled_degeneracies(model, traj)
    return traj


def _check_coupled_degeneracies(model, traj):
    # a crossing is benign only if the transition is strictly forbidden; at
    # the exact degeneracy the aligned track basis diagonalizes dH/ds by
    # construction, so probe the neighbors (split tracks) as well
    gaps = traj.energies[:, 1:] - traj.energies[:, :1]
    close = np.argwhere(np.abs(gaps) <= traj.degeneracy_tol)
    dh_cache = {}
    for k, nu_off in close:
        nu = int(nu_off) + 1
        for kk in (k - 1, k, k + 1):
            if not 0 <= kk <= traj.k_intervals:
                continue
            if kk not in dh_cache:
                dh_cache[kk] = hamiltonian_derivative(model, float(traj.s[kk]), 1)
            coupling = abs(
                np.vdot(traj.vectors[kk][:, nu], dh_cache[kk] @ traj.vectors[kk][:, 0])
            )
            if coupling > _FORBIDDEN_COUPLING_TOL:
                raise DegeneracyError(
                    f"track {nu} is degenerate with the transferred track at "
                    f"s={traj.s[k]:.6f} but couples to it near the crossing "
                    f"(|<nu|dH/ds|0>| = {coupling:.3e} at s={traj.s[kk]:.6f})"
                )


def _simpson_uniform(y: np.ndarray, dx: float) -> float:
    """Composite Simpson on a uniform grid; odd interval counts use a 3/8
    closing rule so fourth-order accuracy is kept."""
    n = y.size - 1
    if n < 3:
        return float(dx * (0.5 * (y[0] + y[-1]) + y[1:-1].sum()))
    if n % 2 == 0:
        s = y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-2:2].sum()
        return float(s * dx / 3.0)
    head = _simpson_uniform(y[: n - 2], dx) if n > 3 else 0.0
    tail = 3.0 * dx / 8.0 * (y[-4] + 3.0 * y[-3] + 3.0 * y[-2] + y[-1])
    return float(head + tail)


@dataclass(frozen=True)
class GapIntegral:
    value: float
    error_estimate: float


def gap_integral(traj: SpectralTrajectory, nu: int, *, tol=None) -> GapIntegral:
    """integral over [0,1] of E_nu(s) - E_0(s), with a Richardson error
    estimate from grid halving.  Warns if the estimate exceeds ``tol``."""
    if nu == 0:
        raise ValidationError("gap integral needs an excited track (nu != 0)")
    gap = traj.gap(nu)
    dx = float(traj.s[1] - traj.s[0])
    fine = _simpson_uniform(gap, dx)
    coarse = _simpson_uniform(gap[::2], 2.0 * dx)
    if traj.k_intervals % 2:
        # the stride-2 subgrid stops one fine interval short of s = 1
        coarse += 0.5 * (gap[-2] + gap[-1]) * dx
    error = abs(fine - coarse) / 15.0
    if tol is not None and error > tol:
        warnings.warn(
            f"gap integral error estimate {error:.3e} exceeds requested "
            f"tolerance {tol:.3e}; increase the grid resolution",
            PrecisionWarning,
            stacklevel=2,
        )
    return GapIntegral(value=float(fine), error_estimate=float(error))


def coupling_beta(model: HamiltonianModel, traj: SpectralTrajectory,
                  nu: int, mu: int, s: float) -> complex:
    """<nu|dH/ds|mu> / (E_nu - E_mu) at a grid point, with the defined-zero
    branch when the energies coincide (forbidden/degenerate transitions)."""
    k = traj.grid_index(s)
    e_nu = traj.energies[k, nu]
    e_mu = traj.energies[k, mu]
    if abs(e_nu - e_mu) <= traj.degeneracy_tol:
        return 0.0 + 0.0j
    dh = hamiltonian_derivative(model, float(traj.s[k]), 1)
    num = np.vdot(traj.vectors[k][:, nu], dh @ traj.vectors[k][:, mu])
    return complex(num / (e_nu - e_mu))


def find_coupled_tracks(model: HamiltonianModel, traj: SpectralTrajectory,
                        threshold=1e-8, probes=(0.0, 0.25, 0.5, 0.75, 1.0)):
    """Excited tracks with |coupling_beta| to track 0 above ``threshold`` at
    any probe point, strongest first."""
    strengths = {}
    for frac in probes:
        s = float(traj.s[int(round(frac * traj.k_intervals))])
        for nu in range(1, traj.n_tracks):
            b = abs(coupling_beta(model, traj, nu, 0, s))
            strengths[nu] = max(strengths.get(nu, 0.0), b)
    coupled = [nu for nu, b in strengths.items() if b > threshold]
    return sorted(coupled, key=lambda nu: -strengths[nu])


def export_trajectory_csv(traj: SpectralTrajectory, path, nu: int = 1) -> None:
    """Write ``s, E_0, ..., E_{N-1}, gap_integral_partial`` rows; the partial
    column is the cumulative trapezoid of the track-nu gap."""
    gap = traj.gap(nu)
    dx = float(traj.s[1] - traj.s[0])
    partial = np.concatenate(
        [[0.0], np.cumsum(0.5 * (gap[1:] + gap[:-1]) * dx)]
    )
    header = ",".join(
        ["s"] + [f"E_{i}" for i in range(traj.n_tracks)] + ["gap_integral_partial"]
    )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for k in range(traj.s.size):
            cells = [f"{traj.s[k]:.12g}"]
            cells += [f"{traj.energies[k, i]:.12g}" for i in range(traj.n_tracks)]
            cells.append(f"{partial[k]:.12g}")
            fh.write(",".join(cells) + "\n")
