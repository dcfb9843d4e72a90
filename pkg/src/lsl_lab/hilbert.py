"""
Finite model space: symmetric momentum grid, free Hamiltonian and potentials.

States live in the weight-absorbed basis: component ``i`` of a state vector is
the continuum amplitude at ``k_i`` multiplied by ``sqrt(w_i)``. Plane waves are
then Kronecker-orthonormal unit vectors and every kernel ``v(k, k')`` becomes
the matrix ``sqrt(w_i) v(k_i, k_j) sqrt(w_j)``. Units: hbar = 1, 2m = 1, so
``E = k**2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import InvalidArgumentError

SCHEMES = ("uniform", "gauss-legendre")


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ModelGrid:
    """Symmetric momentum grid ``-kmax < k_0 < ... < k_{N-1} < kmax``.

    ``momenta[N-1-i] == -momenta[i]`` bitwise, so the pair ``(i, mirror(i))``
    is exactly degenerate in energy.
    """

    momenta: np.ndarray
    weights: np.ndarray
    energies: np.ndarray

    @property
    def size(self) -> int:
        return self.momenta.shape[0]

    def mirror(self, index: int) -> int:
        """Index of the state with opposite momentum."""
        check_index(self, index)
        return self.size - 1 - index

    def nearest(self, k: float) -> int:
        """Index of the grid momentum closest to ``k``."""
        return int(np.argmin(np.abs(self.momenta - k)))

    def level_spacing(self, index: int) -> float:
        """Distance from ``E_index`` to the nearest *different* grid energy."""
        check_index(self, index)
        gaps = np.abs(self.energies - self.energies[index])
        gaps = gaps[gaps > 0]
        return float(gaps.min()) if gaps.size else float("inf")


def build_grid(kmax: float, half_count: int, scheme: str = "gauss-legendre") -> ModelGrid:
    """
    Build a grid of ``N = 2 * half_count`` momenta covering ``[-kmax, kmax]``.

    Nodes are generated on ``[0, kmax]`` and the negative half is produced by
    reflection, never recomputed.

    Parameters
    ----------
    kmax : float
        Momentum cutoff, > 0.
    half_count : int
        Nodes per half line, >= 2.
    scheme : {"uniform", "gauss-legendre"}
        Midpoint rule or Gauss-Legendre on the half interval.
    """
    if not (np.isfinite(kmax) and kmax > 0):
        raise InvalidArgumentError(f"kmax must be positive and finite, got {kmax!r}")
    if int(half_count) != half_count or half_count < 2:
        raise InvalidArgumentError(f"half_count must be an integer >= 2, got {half_count!r}")
    half_count = int(half_count)
    if scheme == "uniform":
        h = kmax / half_count
        k = (np.arange(half_count) + 0.5) * h
        w = np.full(half_count, h)
    elif scheme == "gauss-legendre":
        x, w = leggauss(half_count)
        k = 0.5 * kmax * (x + 1.0)
        w = 0.5 * kmax * w
        # leggauss returns ascending nodes with symmetric weights; the half
        # interval rule is used as is and only the mirror is derived from it
        order = np.argsort(k)
        k, w = k[order], w[order]
    else:
        raise InvalidArgumentError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    momenta = np.concatenate([-k[::-1], k])
    weights = np.concatenate([w[::-1], w])
    return ModelGrid(_frozen(momenta), _frozen(weights), _frozen(momenta * momenta))


def check_index(grid: ModelGrid, index) -> int:
    if int(index) != index or not 0 <= index < grid.size:
        raise InvalidArgumentError(f"index {index!r} outside [0, {grid.size})")
    return int(index)


def check_state(grid: ModelGrid, x) -> np.ndarray:
    x = np.asarray(x)
    if x.shape != (grid.size,):
        raise InvalidArgumentError(f"state of shape {x.shape} does not fit grid of size {grid.size}")
    return x


def plane_wave(grid: ModelGrid, index: int) -> np.ndarray:
    """Unit vector ``|k_index>``."""
    index = check_index(grid, index)
    e = np.zeros(grid.size, dtype=complex)
    e[index] = 1.0
    return e


def h0_apply(grid: ModelGrid, x) -> np.ndarray:
    """Free Hamiltonian, diagonal in the plane-wave basis."""
    return grid.energies * check_state(grid, x)


def inner(bra, ket) -> complex:
    """``<bra|ket>``; the bra is conjugated."""
    bra, ket = np.asarray(bra), np.asarray(ket)
    if bra.shape != ket.shape or bra.ndim != 1:
        raise InvalidArgumentError(f"cannot pair shapes {bra.shape} and {ket.shape}")
    return complex(np.vdot(bra, ket))


# --------------------------------------------------------------------------
# potentials
# --------------------------------------------------------------------------

def yamaguchi(beta: float = 1.0) -> Callable:
    """Form factor ``g(k) = 1 / (k**2 + beta**2)``."""
    return lambda k: 1.0 / (k * k + beta * beta)


def gaussian_profile(beta: float = 1.0) -> Callable:
    """Form factor ``g(k) = exp(-k**2 / beta**2)``."""
    return lambda k: np.exp(-(k * k) / (beta * beta))


def gaussian_kernel(coupling: float, sigma: float = 1.0) -> Callable:
    """Dense kernel ``lambda * exp(-(k-k')**2/sigma**2) * exp(-(k**2+k'**2)/(2 sigma**2))``.

    The envelope keeps the kernel short-ranged along the diagonal, so the
    matrix stays bounded as the grid is refined.
    """
    s2 = sigma * sigma
    return lambda k, kp: coupling * np.exp(-((k - kp) ** 2) / s2 - (k * k + kp * kp) / (2 * s2))


@dataclass(frozen=True, eq=False)
class SeparablePotential:
    """Rank-1 potential ``V = coupling * |g><g|``."""

    coupling: float
    formfactor: np.ndarray

    @property
    def size(self) -> int:
        return self.formfactor.shape[0]

    def apply(self, x) -> np.ndarray:
        return self.coupling * self.formfactor * np.vdot(self.formfactor, x)

    def abs_apply(self, x) -> np.ndarray:
        """``|V| |x|`` elementwise, the rounding scale of :meth:`apply`."""
        a = np.abs(self.formfactor)
        return abs(self.coupling) * a * np.dot(a, np.abs(x))

    def dense(self) -> np.ndarray:
        g = self.formfactor
        return self.coupling * np.outer(g, g.conj())


@dataclass(frozen=True, eq=False)
class DensePotential:
    """General Hermitian potential matrix."""

    matrix: np.ndarray

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def apply(self, x) -> np.ndarray:
        return self.matrix @ x

    def abs_apply(self, x) -> np.ndarray:
        return np.abs(self.matrix) @ np.abs(x)

    def dense(self) -> np.ndarray:
        return self.matrix


Potential = SeparablePotential | DensePotential


def sample_separable(grid: ModelGrid, coupling: float, profile: Callable | None = None) -> SeparablePotential:
    """Sample ``g_i = profile(k_i) * sqrt(w_i)``; Yamaguchi with beta = 1 by default."""
    if isinstance(coupling, complex) or not np.isfinite(coupling):
        raise InvalidArgumentError(f"coupling must be real and finite, got {coupling!r}")
    profile = yamaguchi(1.0) if profile is None else profile
    values = np.broadcast_to(np.asarray(profile(grid.momenta), dtype=float), grid.momenta.shape)
    if not np.all(np.isfinite(values)):
        raise InvalidArgumentError("form factor profile is not finite on every grid node")
    return SeparablePotential(float(coupling), _frozen(values * np.sqrt(grid.weights), complex))


def sample_dense(grid: ModelGrid, kernel: Callable | None = None) -> DensePotential:
    """Sample ``V_ij = sqrt(w_i) v(k_i, k_j) sqrt(w_j)`` from a symmetric kernel.

    Defaults to :func:`gaussian_kernel` with coupling 0.5 and sigma 1.
    """
    kernel = gaussian_kernel(0.5, 1.0) if kernel is None else kernel
    k = grid.momenta
    v = np.broadcast_to(np.asarray(kernel(k[:, None], k[None, :]), dtype=float), (k.size, k.size))
    if not np.all(np.isfinite(v)):
        raise InvalidArgumentError("kernel is not finite on the grid")
    scale = np.abs(v).max()
    if np.abs(v - v.T).max() > 1e-14 * scale:
        raise InvalidArgumentError("kernel is not symmetric under k <-> k'")
    s = np.sqrt(grid.weights)
    m = s[:, None] * v * s[None, :]
    # mirror the upper triangle so the matrix is Hermitian bitwise
    m = np.triu(m) + np.triu(m, 1).T
    return DensePotential(_frozen(m, complex))


def random_dense(grid: ModelGrid, coupling: float, seed: int) -> DensePotential:
    """Seeded random Hermitian matrix with spectral norm ``|coupling|``."""
    rng = np.random.default_rng(seed)
    n = grid.size
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    h = a + a.conj().T
    h *= coupling / np.linalg.norm(h, 2)
    h = np.triu(h) + np.triu(h, 1).conj().T
    np.fill_diagonal(h, h.diagonal().real)
    return DensePotential(_frozen(h, complex))
