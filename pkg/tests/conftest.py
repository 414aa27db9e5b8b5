"""Shared fixtures and independent numeric oracles for the test suite."""

import numpy as np
import pytest

from adiaphase.models import reduce_search_to_2level, search_hamiltonian
from adiaphase.schedules import Linear
from adiaphase.spectral import build_trajectory


def adaptive_simpson(f, a, b, tol=1e-12, depth=40):
    """Recursive adaptive Simpson quadrature, independent of the package."""

    def simpson(lo, hi):
        mid = 0.5 * (lo + hi)
        return (hi - lo) / 6.0 * (f(lo) + 4.0 * f(mid) + f(hi)), mid

    def recurse(lo, hi, whole, level):
        mid = 0.5 * (lo + hi)
        left, _ = simpson(lo, mid)
        right, _ = simpson(mid, hi)
        if level <= 0 or abs(left + right - whole) < 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return (recurse(lo, mid, left, level - 1)
                + recurse(mid, hi, right, level - 1))

    whole, _ = simpson(a, b)
    return recurse(a, b, whole, depth)


def central_difference(f, x, p=1, h=1e-6):
    """O(h^2) central finite difference of scalar or array-valued f."""
    import math

    acc = None
    for k in range(p + 1):
        term = ((-1) ** k) * math.comb(p, k) * np.asarray(f(x + (p / 2 - k) * h))
        acc = term if acc is None else acc + term
    return acc / h ** p


def schrodinger_oracle(model, T, psi0, rtol=1e-11, atol=1e-11):
    """Brute-force propagation with scipy's DOP853, independent of the
    package's midpoint-exponential integrator."""
    from scipy.integrate import solve_ivp

    dim = model.dim
    y0 = np.concatenate([psi0.real, psi0.imag])

    def rhs(s, y):
        psi = y[:dim] + 1j * y[dim:]
        dpsi = -1j * T * (model.matrix(s) @ psi)
        return np.concatenate([dpsi.real, dpsi.imag])

    sol = solve_ivp(rhs, (0.0, 1.0), y0, method="DOP853", rtol=rtol, atol=atol)
    return sol.y[:dim, -1] + 1j * sol.y[dim:, -1]


def random_hermitian(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (a + a.conj().T)


@pytest.fixture(scope="session")
def linear_search_full():
    return search_hamiltonian(4, Linear())


@pytest.fixture(scope="session")
def linear_search_2level(linear_search_full):
    return reduce_search_to_2level(linear_search_full)


@pytest.fixture(scope="session")
def linear_search_traj(linear_search_2level):
    return build_trajectory(linear_search_2level, 512)


@pytest.fixture(scope="session")
def linear_search_full_traj(linear_search_full):
    return build_trajectory(linear_search_full, 128)
