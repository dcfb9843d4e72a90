"""
Regularized free resolvent and the kinematic factors built from it.

Everything is applied componentwise against the diagonal free Hamiltonian;
no operator is ever materialized. ``eps`` is always an explicit argument.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError
from .hilbert import ModelGrid, check_state


def adiabatic(eps) -> float:
    """Validate an adiabatic parameter: real, finite, strictly positive."""
    if isinstance(eps, complex):
        raise InvalidArgumentError(f"eps must be real, got {eps!r}")
    eps = float(eps)
    if not (np.isfinite(eps) and eps > 0):
        raise InvalidArgumentError(f"eps must be positive and finite, got {eps!r}")
    return eps


def denominators(grid: ModelGrid, E: float, eps: float, conjugate: bool = False) -> np.ndarray:
    """``E - E_i + i eps`` (or ``- i eps`` when ``conjugate``)."""
    eps = adiabatic(eps)
    return (E - grid.energies) + (-1j * eps if conjugate else 1j * eps)


def g0_apply(grid: ModelGrid, E: float, eps: float, x, conjugate: bool = False) -> np.ndarray:
    """
    Apply the free resolvent ``1/(E - H0 + i eps)`` to ``x``.

    With ``conjugate=True`` the adjoint ``1/(E - H0 - i eps)`` is applied
    instead.
    """
    x = check_state(grid, x)
    return x / denominators(grid, E, eps, conjugate)


def eta_apply(grid: ModelGrid, E: float, eps: float, x) -> np.ndarray:
    """Complex projector ``i eps G0(E)`` onto free states of energy ``E``."""
    x = check_state(grid, x)
    eps = adiabatic(eps)
    return x * mu(grid.energies, E, eps)


def mu(E_n, E_k, eps) -> complex:
    """``i eps / (E_k - E_n + i eps)``; equals 1 on shell, modulus below 1 otherwise."""
    eps = adiabatic(eps)
    return 1j * eps / ((E_k - E_n) + 1j * eps)


def d_weight(E_n, E_k, eps) -> float:
    """Lorentzian ``eps / ((E_k - E_n)**2 + eps**2)``, peak ``1/eps`` on shell."""
    eps = adiabatic(eps)
    de = E_k - E_n
    return eps / (de * de + eps * eps)


def dko_apply(grid: ModelGrid, E: float, eps: float, x) -> np.ndarray:
    """Smeared energy-shell operator ``eps G0(E)^dagger G0(E)``, positive semidefinite."""
    x = check_state(grid, x)
    return x * d_weight(grid.energies, E, eps)


def identity5_residual(grid: ModelGrid, E_n: float, E_k: float, eps: float, x) -> float:
    """
    Residual of ``(G_n^+ - G_k)/(E_k - E_n + i eps) = (1 + mu_nk) G_n^+ G_k``.

    Normalized by the summed norms of the three terms, so the result measures
    rounding only, however large ``1/eps`` makes the individual terms.
    """
    x = check_state(grid, x)
    eps = adiabatic(eps)
    z = (E_k - E_n) + 1j * eps
    gn = g0_apply(grid, E_n, eps, x, conjugate=True)
    gk = g0_apply(grid, E_k, eps, x)
    lhs = (gn - gk) / z
    rhs = (1 + mu(E_n, E_k, eps)) * g0_apply(grid, E_n, eps, gk, conjugate=True)
    scale = (np.linalg.norm(gn) + np.linalg.norm(gk)) / abs(z) + np.linalg.norm(rhs)
    if scale == 0:
        return 0.0
    return float(np.linalg.norm(lhs - rhs) / scale)
