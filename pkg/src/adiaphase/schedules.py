"""Interpolation schedules phi(s) that parameterize the Hamiltonian path.

Three families are provided: the linear ramp, the arctan/tan "local"
schedule for the search problem, and the smoothstep family obtained by
normalizing the integral of s^m (1-s)^m, whose first m derivatives vanish
at both endpoints.  All schedules are immutable value objects; evaluation
is vectorized over numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import CapabilityError, DomainError, ValidationError

# Numeric differentiation of models needs function values slightly outside
# [0,1]; every schedule here continues analytically on this margin.
_EXTENSION_MARGIN = 0.05


def _check_domain(s) -> np.ndarray:
    arr = np.asarray(s, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"reduced time must lie in [0, 1], got {arr!r}")
    return arr


def _check_extended(s) -> np.ndarray:
    arr = np.asarray(s, dtype=float)
    lo, hi = -_EXTENSION_MARGIN, 1.0 + _EXTENSION_MARGIN
    if np.any(arr < lo) or np.any(arr > hi):
        raise DomainError(f"extended evaluation limited to [{lo}, {hi}]")
    return arr


class Schedule:
    """Base class: a monotone map phi: [0,1] -> [0,1] with derivatives."""

    kind = "abstract"

    #: highest derivative order that vanishes at both endpoints
    boundary_order = 0

    def value(self, s):
        """phi(s) for s in [0,1]; scalar in -> float out, array in -> array."""
        arr = _check_domain(s)
        out = self._value(arr)
        return float(out) if np.isscalar(s) or np.ndim(s) == 0 else out

    def derivative(self, s, p=1):
        """p-th derivative of phi at s (p >= 1)."""
        if p < 1:
            raise ValidationError(f"derivative order must be >= 1, got {p}")
        arr = _check_domain(s)
        out = self._derivative(arr, int(p))
        return float(out) if np.isscalar(s) or np.ndim(s) == 0 else out

    # internal evaluation on the extension margin, used by finite-difference
    # stencils that straddle the endpoints
    def value_extended(self, s):
        return self._value(_check_extended(s))

    def derivative_extended(self, s, p=1):
        return self._derivative(_check_extended(s), int(p))

    def _value(self, arr):
        raise NotImplementedError

    def _derivative(self, arr, p):
        raise NotImplementedError

    def spec_string(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Linear(Schedule):
    """phi(s) = s."""

    kind = "linear"
    boundary_order = 0

    def _value(self, arr):
        return arr.copy()

    def _derivative(self, arr, p):
        if p == 1:
            return np.ones_like(arr)
        return np.zeros_like(arr)

    def spec_string(self):
        return "linear"


@dataclass(frozen=True)
class LocalAdiabatic(Schedule):
    """Arctan/tan schedule that equalizes the transition rate for the
    N-dimensional search Hamiltonian.

    phi(s) = 1/2 + tan(c (2s-1)) / (2 sqrt(N-1)),  c = arctan(sqrt(N-1)).
    Analytic derivatives are provided for p <= 2; higher orders raise
    CapabilityError and are handled numerically by the models module.
    """

    n_dim: int

    kind = "local"
    boundary_order = 0

    def __post_init__(self):
        if self.n_dim < 2:
            raise ValidationError("local schedule needs dimension N >= 2")

    @property
    def _q(self):
        return math.sqrt(self.n_dim - 1)

    @property
    def _c(self):
        return math.atan(self._q)

    def _value(self, arr):
        return 0.5 + np.tan(self._c * (2.0 * arr - 1.0)) / (2.0 * self._q)

    def _derivative(self, arr, p):
        c, q = self._c, self._q
        x = c * (2.0 * arr - 1.0)
        sec2 = 1.0 / np.cos(x) ** 2
        if p == 1:
            return c * sec2 / q
        if p == 2:
            return 4.0 * c * c * sec2 * np.tan(x) / q
        raise CapabilityError(
            f"local schedule has analytic derivatives only for p <= 2 "
            f"(got p={p}); use numeric differentiation"
        )

    def spec_string(self):
        return f"local:N={self.n_dim}"


@dataclass(frozen=True)
class BetaInterpolation(Schedule):
    """Normalized incomplete integral of s^m (1-s)^m (smoothstep family).

    phi' (s) = s^m (1-s)^m / B with B = integral of the same over [0,1];
    derivatives of orders 1..m vanish identically at s in {0, 1}.  m = 0
    reproduces the linear ramp exactly.
    """

    m: int
    normalization: Fraction = field(init=False, repr=False, compare=False)
    _poly: np.ndarray = field(init=False, repr=False, compare=False)  # highest power first

    kind = "beta"

    def __post_init__(self):
        if self.m < 0:
            raise ValidationError("beta order m must be a non-negative integer")
        m = int(self.m)
        norm = Fraction(math.factorial(m) ** 2, math.factorial(2 * m + 1))
        # antiderivative of s^m (1-s)^m / B: integer coefficients
        # (the smoothstep polynomials), exact at both endpoints
        coeffs = {}
        for k in range(m + 1):
            c = Fraction(math.comb(m, k) * (-1) ** k, m + k + 1) / norm
            coeffs[m + k + 1] = c
        degree = 2 * m + 1
        poly = np.zeros(degree + 1)
        for power, c in coeffs.items():
            assert c.denominator == 1
            poly[degree - power] = float(c)
        object.__setattr__(self, "normalization", norm)
        object.__setattr__(self, "_poly", poly)

    @property
    def boundary_order(self):
        return self.m

    def _value(self, arr):
        return np.polyval(self._poly, arr)

    def _derivative(self, arr, p):
        # Leibniz expansion of d^(p-1)/ds^(p-1) [s^m (1-s)^m] / B keeps the
        # factored form, so endpoint zeros for p <= m are exact in floats.
        m = self.m
        j = p - 1
        inv_b = float(1 / self.normalization)
        out = np.zeros_like(arr)
        for i in range(j + 1):
            if i > m or (j - i) > m:
                continue
            ff_left = math.perm(m, i)
            ff_right = math.perm(m, j - i)
            sign = (-1) ** (j - i)
            term = (
                math.comb(j, i)
                * ff_left
                * ff_right
                * sign
                * arr ** (m - i)
                * (1.0 - arr) ** (m - (j - i))
            )
            out = out + term
        return out * inv_b

    def spec_string(self):
        return f"beta:m={self.m}"


def eval_schedule(schedule: Schedule, s):
    """Evaluate phi(s).  Raises DomainError for s outside [0, 1]."""
    return schedule.value(s)


def schedule_derivative(schedule: Schedule, s, p=1):
    """Evaluate the p-th derivative of phi at s (p >= 1).

    Raises CapabilityError for (kind, p) combinations with no closed form;
    callers should then fall back to numeric differentiation.
    """
    return schedule.derivative(s, p)


def parse_schedule(text: str) -> Schedule:
    """Parse a schedule spec string: 'linear', 'local:N=<int>', 'beta:m=<int>'."""
    spec = text.strip().lower()
    if spec == "linear":
        return Linear()
    if spec.startswith("local:"):
        arg = spec.split(":", 1)[1]
        if not arg.startswith("n="):
            raise ValidationError(f"expected 'local:N=<int>', got {text!r}")
        return LocalAdiabatic(n_dim=int(arg[2:]))
    if spec.startswith("beta:"):
        arg = spec.split(":", 1)[1]
        if not arg.startswith("m="):
            raise ValidationError(f"expected 'beta:m=<int>', got {text!r}")
        return BetaInterpolation(m=int(arg[2:]))
    raise ValidationError(f"unknown schedule spec {text!r}")
