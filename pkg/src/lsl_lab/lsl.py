"""
Scattering states by three independent routes, and the amplitudes built on them.

* ``solve_ls``   -- dense solve of ``(1 - G0(E_k) V) psi = |k>``
* ``solve_low``  -- dense solve of ``(E_k - H + i eps) x = V|k>``, ``psi = |k> + x``
* ``separable_closed_form`` -- rank-1 closed form with the Fredholm determinant

The two dense routes share no code beyond the factorization helper, so they
act as oracles for each other; the closed form is a third, O(N), oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla
from scipy.linalg.lapack import zgecon

from .errors import (
    ConditioningError,
    InvalidArgumentError,
    InvalidPairingError,
    NearZeroFredholmError,
)
from .hilbert import (
    ModelGrid,
    Potential,
    SeparablePotential,
    check_index,
    inner,
    plane_wave,
)
from .resolvent import adiabatic, denominators, dko_apply, g0_apply

ROUTES = ("ls-solve", "low-solve", "separable-closed")
CONDITION_LIMIT = 1e12
FREDHOLM_LIMIT = 1e-12
DENSE_SIZE_LIMIT = 4096


@dataclass(frozen=True, eq=False)
class ScatteringSolution:
    incident_index: int
    psi: np.ndarray
    energy: float
    eps: float
    route: str
    fredholm: Optional[complex] = None

    def __post_init__(self):
        if (self.fredholm is not None) != (self.route == "separable-closed"):
            raise InvalidArgumentError("fredholm determinant is carried by the closed-form route only")
        self.psi.setflags(write=False)


def _check_potential(grid: ModelGrid, V: Potential):
    if V.size != grid.size:
        raise InvalidArgumentError(f"potential of size {V.size} on grid of size {grid.size}")


def _factor(a: np.ndarray, eps: float):
    """Row-equilibrated LU of ``a``, refusing systems with cond > 1e12."""
    if a.shape[0] > DENSE_SIZE_LIMIT:
        raise InvalidArgumentError(
            f"dense solve limited to N <= {DENSE_SIZE_LIMIT}; use the closed form for large separable runs"
        )
    rows = np.abs(a).max(axis=1)
    rows[rows == 0] = 1.0
    a = a / rows[:, None]
    anorm = np.abs(a).sum(axis=0).max()
    lu, piv, info = sla.lapack.zgetrf(a)
    if info > 0:
        raise ConditioningError("singular system matrix", eps=eps)
    rcond, _ = zgecon(lu, anorm, norm="1")
    condition = 1.0 / rcond if rcond > 0 else float("inf")
    if condition > CONDITION_LIMIT:
        raise ConditioningError(
            f"condition estimate {condition:.3e} exceeds {CONDITION_LIMIT:.0e} at eps={eps!r}",
            condition=condition,
            eps=eps,
        )
    return lu, piv, rows


def _lu_solve(factors, b: np.ndarray) -> np.ndarray:
    lu, piv, rows = factors
    x, _ = sla.lapack.zgetrs(lu, piv, b / rows)
    return x


def _refine(factors, a: np.ndarray, b: np.ndarray, x: np.ndarray, steps: int = 2) -> np.ndarray:
    """Iterative refinement with the residual accumulated in extended precision."""
    wide = a.astype(np.clongdouble)
    for _ in range(steps):
        r = b.astype(np.clongdouble) - wide @ x.astype(np.clongdouble)
        x = x + _lu_solve(factors, r.astype(complex))
    return x


def solve_ls(grid: ModelGrid, V: Potential, incident_index: int, eps: float) -> ScatteringSolution:
    """Solve ``psi = |k> + G0(E_k) V psi`` as a dense linear system."""
    _check_potential(grid, V)
    k = check_index(grid, incident_index)
    eps = adiabatic(eps)
    E = float(grid.energies[k])
    kernel = V.dense() / denominators(grid, E, eps)[:, None]
    a = np.eye(grid.size, dtype=complex) - kernel
    factors = _factor(a, eps)
    ket = plane_wave(grid, k)
    psi = _refine(factors, a, ket, _lu_solve(factors, ket))
    return ScatteringSolution(k, psi, E, eps, "ls-solve")


def solve_low(grid: ModelGrid, V: Potential, incident_index: int, eps: float) -> ScatteringSolution:
    """Solve ``psi = |k> + (E_k - H + i eps)^-1 V|k>``."""
    _check_potential(grid, V)
    k = check_index(grid, incident_index)
    eps = adiabatic(eps)
    E = float(grid.energies[k])
    a = np.diag(denominators(grid, E, eps)) - V.dense()
    factors = _factor(a, eps)
    ket = plane_wave(grid, k)
    psi = ket + _lu_solve(factors, V.apply(ket))
    # psi shrinks like eps off resonance, so |k> + x cancels; refining on
    # (E_k - H + i eps) psi = i eps |k> restores the lost digits
    psi = _refine(factors, a, 1j * eps * ket, psi)
    return ScatteringSolution(k, psi, E, eps, "low-solve")


def fredholm(grid: ModelGrid, V: SeparablePotential, E: float, eps: float) -> complex:
    """``1 - lambda <g|G0(E)|g>`` by direct summation."""
    g = V.formfactor
    return complex(1.0 - V.coupling * np.sum((g.real**2 + g.imag**2) / denominators(grid, E, eps)))


def separable_closed_form(grid: ModelGrid, V: SeparablePotential, incident_index: int, eps: float) -> ScatteringSolution:
    """
    Closed-form scattering state for ``V = lambda |g><g|``.

    ``psi = |k> + G0(E_k)|g> * lambda * conj(g_k) / Delta_k``. Raises
    :class:`NearZeroFredholmError` when ``|Delta_k|`` falls below
    ``1e-12 * (1 + |lambda| ||g||**2 / eps)``.
    """
    if not isinstance(V, SeparablePotential):
        raise InvalidArgumentError("closed form requires a separable potential")
    _check_potential(grid, V)
    k = check_index(grid, incident_index)
    eps = adiabatic(eps)
    E = float(grid.energies[k])
    delta = fredholm(grid, V, E, eps)
    gnorm2 = float(np.vdot(V.formfactor, V.formfactor).real)
    if abs(delta) < FREDHOLM_LIMIT * (1.0 + abs(V.coupling) * gnorm2 / eps):
        raise NearZeroFredholmError(
            f"Fredholm determinant {delta!r} vanishes for channel {k} at eps={eps!r}",
            eps=eps,
            fredholm=delta,
        )
    psi = g0_apply(grid, E, eps, V.formfactor) * (V.coupling * np.conj(V.formfactor[k]) / delta)
    psi[k] += 1.0
    return ScatteringSolution(k, psi, E, eps, "separable-closed", fredholm=delta)


def solve(grid: ModelGrid, V: Potential, incident_index: int, eps: float, route: str = "auto") -> ScatteringSolution:
    """Dispatch on ``route``; ``"auto"`` is the closed form for separable ``V``, else LS."""
    if route == "auto":
        route = "separable-closed" if isinstance(V, SeparablePotential) else "ls-solve"
    if route == "ls-solve":
        return solve_ls(grid, V, incident_index, eps)
    if route == "low-solve":
        return solve_low(grid, V, incident_index, eps)
    if route == "separable-closed":
        return separable_closed_form(grid, V, incident_index, eps)
    raise InvalidArgumentError(f"unknown route {route!r}; expected auto or one of {ROUTES}")


# --------------------------------------------------------------------------
# amplitudes
# --------------------------------------------------------------------------

def _check_pair(sol_n: ScatteringSolution, sol_k: ScatteringSolution):
    if sol_n.eps != sol_k.eps:
        raise InvalidPairingError(f"solutions built at different eps ({sol_n.eps!r} vs {sol_k.eps!r})")
    if sol_n.psi.shape != sol_k.psi.shape:
        raise InvalidPairingError("solutions live on different grids")


def _check_solution(grid: ModelGrid, sol: ScatteringSolution):
    if sol.psi.shape != (grid.size,):
        raise InvalidArgumentError("solution was built on a different grid")


def t_amplitude(grid: ModelGrid, V: Potential, solution: ScatteringSolution, n_index: int) -> complex:
    """``T_nk = <n|V|psi_k>``."""
    _check_solution(grid, solution)
    n = check_index(grid, n_index)
    return complex(V.apply(solution.psi)[n])


def t_column(grid: ModelGrid, V: Potential, solution: ScatteringSolution) -> np.ndarray:
    """All ``T_ik`` for the incident channel of ``solution``."""
    _check_solution(grid, solution)
    return V.apply(solution.psi)


def _outgoing(grid, V, sol):
    """``G0(E) V |psi>``, the scattered part of ``psi``."""
    return g0_apply(grid, sol.energy, sol.eps, V.apply(sol.psi))


def c_amplitude(grid: ModelGrid, V: Potential, sol_n: ScatteringSolution, sol_k: ScatteringSolution) -> complex:
    """``C_nk = <psi_n|V G0(E_n)^+ G0(E_k) V|psi_k>``."""
    _check_pair(sol_n, sol_k)
    return inner(_outgoing(grid, V, sol_n), _outgoing(grid, V, sol_k))


def a_amplitude(grid: ModelGrid, V: Potential, sol_n: ScatteringSolution, sol_k: ScatteringSolution) -> complex:
    """``A_nk = <psi_n|V D0(E_k) V|psi_k>``, the smeared shell taken at the right-state energy."""
    _check_pair(sol_n, sol_k)
    vk = V.apply(sol_k.psi)
    return inner(V.apply(sol_n.psi), dko_apply(grid, sol_k.energy, sol_k.eps, vk))


def overlap_direct(sol_n: ScatteringSolution, sol_k: ScatteringSolution) -> complex:
    """``I_nk = <psi_n|psi_k>``."""
    _check_pair(sol_n, sol_k)
    return inner(sol_n.psi, sol_k.psi)


def overlap_terms(grid: ModelGrid, V: Potential, sol_n: ScatteringSolution, sol_k: ScatteringSolution):
    """The four terms whose sum is ``<psi_n|psi_k>`` when both sides use the LS form."""
    _check_pair(sol_n, sol_k)
    n, k = sol_n.incident_index, sol_k.incident_index
    out_n = _outgoing(grid, V, sol_n)
    out_k = _outgoing(grid, V, sol_k)
    return (
        complex(n == k),
        complex(out_k[n]),
        complex(np.conj(out_n[k])),
        inner(out_n, out_k),
    )


def overlap_expansion(grid: ModelGrid, V: Potential, sol_n: ScatteringSolution, sol_k: ScatteringSolution) -> complex:
    """``<n|k> + <n|G_k V|psi_k> + <psi_n|V G_n^+|k> + C_nk``."""
    return complex(sum(overlap_terms(grid, V, sol_n, sol_k)))


@dataclass(frozen=True, eq=False)
class AmplitudeSet:
    """Amplitude matrices over a list of channels, rows ``n``, columns ``k``."""

    indices: tuple
    t: np.ndarray
    c: np.ndarray
    a: np.ndarray
    overlap: np.ndarray
    free_overlap: np.ndarray


def amplitude_set(grid: ModelGrid, V: Potential, solutions) -> AmplitudeSet:
    """Assemble T, C, A, I and <n|k> for every ordered pair of ``solutions``."""
    solutions = list(solutions)
    m = len(solutions)
    idx = tuple(s.incident_index for s in solutions)
    vpsi = [V.apply(s.psi) for s in solutions]
    out = [g0_apply(grid, s.energy, s.eps, v) for s, v in zip(solutions, vpsi)]
    t = np.empty((m, m), complex)
    c = np.empty((m, m), complex)
    a = np.empty((m, m), complex)
    ov = np.empty((m, m), complex)
    for p, sn in enumerate(solutions):
        for q, sk in enumerate(solutions):
            _check_pair(sn, sk)
            t[p, q] = vpsi[q][sn.incident_index]
            c[p, q] = np.vdot(out[p], out[q])
            a[p, q] = np.vdot(vpsi[p], dko_apply(grid, sk.energy, sk.eps, vpsi[q]))
            ov[p, q] = np.vdot(sn.psi, sk.psi)
    free = (np.array(idx)[:, None] == np.array(idx)[None, :]).astype(complex)
    return AmplitudeSet(idx, t, c, a, ov, free)


__all__ = [
    "ROUTES",
    "ScatteringSolution",
    "AmplitudeSet",
    "solve_ls",
    "solve_low",
    "separable_closed_form",
    "solve",
    "fredholm",
    "t_amplitude",
    "t_column",
    "c_amplitude",
    "a_amplitude",
    "overlap_direct",
    "overlap_terms",
    "overlap_expansion",
    "amplitude_set",
]
