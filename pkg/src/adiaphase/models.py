"""Concrete time-dependent Hamiltonians.

Provides the dense adiabatic search Hamiltonian, its exact two-level
reduction, tabulated models loaded from JSON files, additive perturbations
for tolerance studies, and a shared numeric-derivative fallback.  All
Hamiltonians are dimensionless (hbar = 1) and Hermitian; models are
immutable after construction and safe to evaluate concurrently.
"""

from __future__ import annotations

import json
import math
import warnings
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    CapabilityError,
    CapacityError,
    DegeneracyError,
    FormatError,
    PrecisionWarning,
    ValidationError,
)
from .schedules import Schedule

MAX_DENSE_DIM = 4096

_HERMITICITY_TOL = 1e-8          # tabulated input beyond this is rejected
_GRID_UNIFORMITY_RTOL = 1e-9


class HamiltonianModel:
    """A time-dependent Hermitian Hamiltonian H(s) on a dense space.

    Subclasses implement ``matrix`` and may provide an analytic derivative;
    ``matrix_batch`` has a generic loop fallback.  ``transferred_index`` is
    the position (in the ascending spectrum at s = 0) of the eigenstate the
    protocol transfers.
    """

    def __init__(self, dim: int, label: str = "", transferred_index: int = 0):
        self.dim = int(dim)
        self.label = label
        self.transferred_index = int(transferred_index)

    def matrix(self, s: float) -> np.ndarray:
        raise NotImplementedError

    def matrix_batch(self, s_values) -> np.ndarray:
        s_values = np.asarray(s_values, dtype=float)
        out = np.empty((s_values.size, self.dim, self.dim), dtype=complex)
        for i, s in enumerate(s_values.ravel()):
            out[i] = self.matrix(float(s))
        return out

    def derivative(self, s: float, p: int) -> np.ndarray:
        raise CapabilityError(f"{self.label or type(self).__name__}: no analytic derivative")

    @property
    def has_analytic_derivative(self) -> bool:
        try:
            self.derivative(0.5, 1)
        except CapabilityError:
            return False
        return True

    def __repr__(self):
        return f"<{type(self).__name__} dim={self.dim} label={self.label!r}>"


class SearchModel(HamiltonianModel):
    """Full 2^n-dimensional search Hamiltonian.

    H(s) = I - (1 - phi(s)) P_plus - phi(s) P_marked, with P_plus the
    projector onto the uniform superposition and the marked state fixed to
    the all-zeros basis state.
    """

    def __init__(self, n_qubits: int, schedule: Schedule):
        n_dim = 2 ** n_qubits
        super().__init__(n_dim, label=f"search:n={n_qubits}")
        self.n_qubits = n_qubits
        self.schedule = schedule
        self._p_plus = np.full((n_dim, n_dim), 1.0 / n_dim, dtype=complex)
        self._p_marked = np.zeros((n_dim, n_dim), dtype=complex)
        self._p_marked[0, 0] = 1.0
        self._delta = self._p_plus - self._p_marked

    def matrix(self, s: float) -> np.ndarray:
        phi = float(self.schedule.value_extended(s))
        eye = np.eye(self.dim, dtype=complex)
        return eye - (1.0 - phi) * self._p_plus - phi * self._p_marked

    def matrix_batch(self, s_values) -> np.ndarray:
        phi = np.atleast_1d(self.schedule.value_extended(s_values))
        eye = np.eye(self.dim, dtype=complex)
        return (
            eye[None, :, :]
            - (1.0 - phi)[:, None, None] * self._p_plus[None, :, :]
            - phi[:, None, None] * self._p_marked[None, :, :]
        )

    def derivative(self, s: float, p: int) -> np.ndarray:
        dphi = float(self.schedule.derivative_extended(s, p))
        return dphi * self._delta


class ReducedSearchModel(HamiltonianModel):
    """Exact restriction of the search Hamiltonian to its 2D invariant
    subspace span{marked state, orthonormalized uniform-superposition
    remainder}; basis order is (marked, remainder)."""

    def __init__(self, n_qubits: int, schedule: Schedule):
        super().__init__(2, label=f"search2:n={n_qubits}")
        self.n_qubits = n_qubits
        self.schedule = schedule
        n_dim = 2 ** n_qubits
        ca = 1.0 / math.sqrt(n_dim)          # <marked|plus>
        cw = math.sqrt(1.0 - 1.0 / n_dim)    # <remainder|plus>
        self.full_dim = n_dim
        self._p_plus = np.array([[ca * ca, ca * cw], [ca * cw, cw * cw]], dtype=complex)
        self._p_marked = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
        self._delta = self._p_plus - self._p_marked

    def matrix(self, s: float) -> np.ndarray:
        phi = float(self.schedule.value_extended(s))
        return np.eye(2, dtype=complex) - (1.0 - phi) * self._p_plus - phi * self._p_marked

    def matrix_batch(self, s_values) -> np.ndarray:
        phi = np.atleast_1d(self.schedule.value_extended(s_values))
        eye = np.eye(2, dtype=complex)
        return (
            eye[None, :, :]
            - (1.0 - phi)[:, None, None] * self._p_plus[None, :, :]
            - phi[:, None, None] * self._p_marked[None, :, :]
        )

    def derivative(self, s: float, p: int) -> np.ndarray:
        dphi = float(self.schedule.derivative_extended(s, p))
        return dphi * self._delta


def search_hamiltonian(n_qubits: int, schedule: Schedule) -> SearchModel:
    """Build the dense search Hamiltonian on n_qubits qubits (N = 2^n)."""
    if n_qubits < 1:
        raise ValidationError("need at least one qubit")
    if n_qubits > 12:
        raise CapacityError(
            f"n_qubits={n_qubits} exceeds the dense-storage limit (12 qubits)"
        )
    return SearchModel(n_qubits, schedule)


def reduce_search_to_2level(model: SearchModel) -> ReducedSearchModel:
    """Restrict a search model to the 2D subspace that carries its dynamics."""
    if not isinstance(model, (SearchModel, ReducedSearchModel)):
        raise ValidationError("reduction is defined for search models only")
    return ReducedSearchModel(model.n_qubits, model.schedule)


class TabulatedModel(HamiltonianModel):
    """Hamiltonian interpolated from values on a uniform s-grid.

    Dense mode splines every matrix entry in s and re-symmetrizes after
    interpolation.  Spectral mode synthesizes a two-track Hamiltonian whose
    instantaneous energies and ground-to-excited matrix element of dH/ds
    reproduce the tabulated values exactly (up to spline interpolation).
    """

    def __init__(self, s_grid, matrices=None, spectral=None, label="tabulated",
                 transferred_index=0):
        if matrices is not None:
            dim = matrices.shape[1]
        else:
            dim = 2
        super().__init__(dim, label=label, transferred_index=transferred_index)
        self.s_grid = s_grid
        if matrices is not None:
            self.mode = "dense"
            self._spline = CubicSpline(s_grid, matrices, axis=0)
            self._deriv_splines = {p: self._spline.derivative(p) for p in (1, 2, 3)}
        else:
            self.mode = "spectral"
            energies, rho, chi = spectral
            self._e_splines = [CubicSpline(s_grid, energies[:, i]) for i in range(2)]
            gap = energies[:, 1] - energies[:, 0]
            # <1|dH/ds|0> = -gap * alpha' * e^{i chi} for the rotation below
            ratio = CubicSpline(s_grid, -rho / gap)
            self._alpha = ratio.antiderivative()
            self._alpha0 = float(self._alpha(s_grid[0]))
            self._chi = chi

    def matrix(self, s: float) -> np.ndarray:
        if self.mode == "dense":
            h = self._spline(s)
            return 0.5 * (h + h.conj().T)
        e0 = float(self._e_splines[0](s))
        e1 = float(self._e_splines[1](s))
        alpha = float(self._alpha(s)) - self._alpha0
        ph = np.exp(1j * self._chi)
        # eigenvector columns (|0(s)>, |1(s)>) of the synthesized Hamiltonian
        v = np.array(
            [[math.cos(alpha), -math.sin(alpha) * np.conj(ph)],
             [math.sin(alpha) * ph, math.cos(alpha)]],
            dtype=complex,
        )
        return (v * np.array([e0, e1])) @ v.conj().T

    def derivative(self, s: float, p: int) -> np.ndarray:
        if self.mode == "dense" and p in self._deriv_splines:
            h = self._deriv_splines[p](s)
            return 0.5 * (h + h.conj().T)
        raise CapabilityError(
            f"tabulated model ({self.mode}) has no analytic derivative of order {p}"
        )


def _load_source(source):
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            return json.load(fh)
    if isinstance(source, dict):
        return source
    raise FormatError(f"unsupported tabulated source type {type(source).__name__}")


def tabulated_model(source, label=None) -> TabulatedModel:
    """Load a tabulated Hamiltonian from a JSON file, path, or parsed dict.

    Schema::

        {
          "s_grid": [0.0, ..., 1.0],       # uniform, ascending, >= 4 points
          "mode": "dense" | "spectral",
          "data": ...,                      # see below
          "label": "...",                   # optional
          "transferred_index": 0            # optional
        }

    Dense mode: ``data`` is a (K, dim, dim, 2) nested list; the trailing
    pair is [re, im].  Input must be Hermitian to 1e-8 per grid point
    (symmetrization only repairs round-off).

    Spectral mode: ``data`` is an object with ``energies`` (K x 2, the
    transferred-track and coupled-track energies) and ``couplings`` (K x 2
    as [re, im], the matrix element <1|dH/ds|0>).  Coupling phases must be
    constant in s up to sign.
    """
    raw = _load_source(source)
    try:
        s_grid = np.asarray(raw["s_grid"], dtype=float)
        mode = raw["mode"]
        data = raw["data"]
    except KeyError as exc:
        raise FormatError(f"missing required field {exc}") from exc

    if s_grid.ndim != 1 or s_grid.size < 4:
        raise FormatError(
            f"s_grid must be a 1D array with at least 4 points for cubic "
            f"interpolation, got {s_grid.size} point(s)"
        )
    steps = np.diff(s_grid)
    if np.any(steps <= 0):
        raise FormatError("s_grid must be strictly ascending")
    mean_step = steps.mean()
    if np.any(np.abs(steps - mean_step) > _GRID_UNIFORMITY_RTOL * max(mean_step, 1.0)):
        raise FormatError("s_grid must be uniform")

    label = label or raw.get("label", "tabulated")
    transferred = int(raw.get("transferred_index", 0))

    if mode == "dense":
        arr = np.asarray(data, dtype=float)
        if arr.ndim != 4 or arr.shape[0] != s_grid.size or arr.shape[3] != 2 \
                or arr.shape[1] != arr.shape[2]:
            raise FormatError(
                f"dense data must have shape (K, dim, dim, 2), got {arr.shape}"
            )
        if arr.shape[1] > MAX_DENSE_DIM:
            raise CapacityError(
                f"tabulated dimension {arr.shape[1]} exceeds the dense limit "
                f"({MAX_DENSE_DIM})"
            )
        mats = arr[..., 0] + 1j * arr[..., 1]
        asym = np.max(np.abs(mats - mats.conj().transpose(0, 2, 1)))
        if asym > _HERMITICITY_TOL:
            raise ValidationError(
                f"tabulated matrices deviate from Hermiticity by {asym:.3e} "
                f"(limit {_HERMITICITY_TOL:.0e}); symmetrization only fixes round-off"
            )
        mats = 0.5 * (mats + mats.conj().transpose(0, 2, 1))
        return TabulatedModel(s_grid, matrices=mats, label=label,
                              transferred_index=transferred)

    if mode == "spectral":
        try:
            energies = np.asarray(data["energies"], dtype=float)
            couplings = np.asarray(data["couplings"], dtype=float)
        except (KeyError, TypeError) as exc:
            raise FormatError(
                "spectral data must contain 'energies' and 'couplings'"
            ) from exc
        if energies.shape != (s_grid.size, 2):
            raise FormatError(
                f"spectral mode supports exactly two tracks: energies must have "
                f"shape (K, 2), got {energies.shape}"
            )
        if couplings.shape != (s_grid.size, 2):
            raise FormatError(
                f"couplings must have shape (K, 2) as [re, im], got {couplings.shape}"
            )
        gap = energies[:, 1] - energies[:, 0]
        if np.any(np.abs(gap) < 1e-12):
            raise DegeneracyError("spectral-mode tracks are degenerate on the grid")
        cplx = couplings[:, 0] + 1j * couplings[:, 1]
        scale = np.max(np.abs(cplx))
        if scale == 0.0:
            chi = 0.0
            rho = np.zeros_like(gap)
        else:
            chi = float(np.angle(cplx[np.argmax(np.abs(cplx))]))
            rotated = cplx * np.exp(-1j * chi)
            if np.max(np.abs(rotated.imag)) > 1e-6 * scale:
                raise FormatError(
                    "spectral-mode coupling phases must be constant in s "
                    "(up to sign)"
                )
            rho = rotated.real
        return TabulatedModel(s_grid, spectral=(energies, rho, chi), label=label,
                              transferred_index=transferred)

    raise FormatError(f"unknown mode {mode!r}; expected 'dense' or 'spectral'")


class PerturbedModel(HamiltonianModel):
    """base Hamiltonian plus epsilon * rho(s) * D for a fixed Hermitian D.

    ``envelope`` is a polynomial in s given by coefficients (highest power
    first); its derivatives are exact, so the perturbed model keeps an
    analytic derivative whenever the base model has one.
    """

    def __init__(self, base: HamiltonianModel, direction: np.ndarray,
                 envelope_coeffs, epsilon: float):
        super().__init__(base.dim, label=f"{base.label}+perturbed",
                         transferred_index=base.transferred_index)
        direction = np.asarray(direction, dtype=complex)
        if direction.shape != (base.dim, base.dim):
            raise ValidationError("perturbation direction has wrong shape")
        if np.max(np.abs(direction - direction.conj().T)) > 1e-13:
            raise ValidationError("perturbation direction must be Hermitian")
        self.base = base
        self.direction = direction
        self.envelope = np.asarray(envelope_coeffs, dtype=float)
        self.epsilon = float(epsilon)

    def _rho(self, s, p=0):
        coeffs = self.envelope
        for _ in range(p):
            coeffs = np.polyder(coeffs)
        return np.polyval(coeffs, s)

    def matrix(self, s: float) -> np.ndarray:
        return self.base.matrix(s) + (self.epsilon * self._rho(s)) * self.direction

    def matrix_batch(self, s_values) -> np.ndarray:
        rho = np.atleast_1d(np.asarray(self._rho(np.asarray(s_values, dtype=float))))
        return (
            self.base.matrix_batch(s_values)
            + (self.epsilon * rho)[:, None, None] * self.direction[None, :, :]
        )

    def derivative(self, s: float, p: int) -> np.ndarray:
        return (
            self.base.derivative(s, p)
            + (self.epsilon * self._rho(s, p)) * self.direction
        )


def conjugate_reversed(model: HamiltonianModel) -> HamiltonianModel:
    """conj(H(1-s)): evolving with this generator undoes the original
    evolution on conjugated states (time-reversal test utility)."""

    class _Reversed(HamiltonianModel):
        def matrix(self, s):
            return np.conj(model.matrix(1.0 - s))

        def matrix_batch(self, s_values):
            s_values = np.asarray(s_values, dtype=float)
            return np.conj(model.matrix_batch(1.0 - s_values))

    return _Reversed(model.dim, label=f"{model.label}+reversed",
                     transferred_index=model.transferred_index)


def _central_difference(fn, s, p, h):
    """O(h^2) central stencil for the p-th derivative of a matrix function."""
    acc = None
    for k in range(p + 1):
        node = s + (p / 2.0 - k) * h
        term = ((-1) ** k) * math.comb(p, k) * fn(node)
        acc = term if acc is None else acc + term
    return acc / h ** p


def hamiltonian_derivative(model: HamiltonianModel, s: float, p: int) -> np.ndarray:
    """p-th s-derivative of H at s: analytic when the model provides it,
    otherwise Richardson-extrapolated central differences (step
    h = 1e-3 * max(1, p), two extrapolation levels)."""
    if p < 1:
        raise ValidationError(f"derivative order must be >= 1, got {p}")
    try:
        return model.derivative(s, p)
    except CapabilityError:
        pass
    if p > 6:
        warnings.warn(
            f"numeric derivative of order {p} is unlikely to reach full precision",
            PrecisionWarning,
            stacklevel=2,
        )
    h = 1e-3 * max(1.0, float(p))
    d1 = _central_difference(model.matrix, s, p, h)
    d2 = _central_difference(model.matrix, s, p, h / 2.0)
    d3 = _central_difference(model.matrix, s, p, h / 4.0)
    r1 = (4.0 * d2 - d1) / 3.0
    r2 = (4.0 * d3 - d2) / 3.0
    out = (16.0 * r2 - r1) / 15.0
    return 0.5 * (out + out.conj().T)
