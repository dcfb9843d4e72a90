import math

import numpy as np
import pytest

from lsl_lab.errors import InvalidArgumentError
from lsl_lab.hilbert import (
    build_grid,
    gaussian_kernel,
    h0_apply,
    inner,
    plane_wave,
    random_dense,
    sample_dense,
    sample_separable,
    yamaguchi,
)

from conftest import random_state


def test_uniform_midpoint_grid():
    g = build_grid(1.0, 2, "uniform")
    np.testing.assert_array_equal(g.momenta, [-0.75, -0.25, 0.25, 0.75])
    np.testing.assert_array_equal(g.weights, [0.5] * 4)
    np.testing.assert_array_equal(g.energies, g.momenta**2)
    assert g.size == 4


@pytest.mark.parametrize("scheme", ["uniform", "gauss-legendre"])
@pytest.mark.parametrize("kmax,half", [(1.0, 2), (4.0, 32), (2.5, 17)])
def test_weights_sum_to_interval(scheme, kmax, half):
    g = build_grid(kmax, half, scheme)
    assert g.weights.sum() == pytest.approx(2 * kmax, rel=1e-13)
    assert np.all(g.weights > 0)
    assert np.all(np.diff(g.momenta) > 0)


def test_gauss_legendre_integrates_lorentzian():
    # closed antiderivative: int_{-2}^{2} dk / (k^2 + 1) = 2 atan(2)
    g = build_grid(2.0, 32, "gauss-legendre")
    approx = np.sum(g.weights / (g.momenta**2 + 1))
    assert abs(approx - 2 * math.atan(2.0)) < 1e-10


@pytest.mark.parametrize("scheme", ["uniform", "gauss-legendre"])
def test_mirror_pairs_are_bitwise_degenerate(scheme):
    g = build_grid(3.7, 23, scheme)
    for i in range(g.size):
        j = g.mirror(i)
        assert j != i
        assert g.momenta[j] == -g.momenta[i]
        assert g.energies[j] == g.energies[i]
        assert g.weights[j] == g.weights[i]


def test_grid_is_immutable(grid16):
    with pytest.raises(ValueError):
        grid16.momenta[0] = 1.0


@pytest.mark.parametrize("kmax,half,scheme", [(0.0, 4, "uniform"), (-1.0, 4, "uniform"), (math.inf, 4, "uniform"),
                                              (1.0, 1, "uniform"), (1.0, 4, "simpson")])
def test_build_grid_rejects(kmax, half, scheme):
    with pytest.raises(InvalidArgumentError):
        build_grid(kmax, half, scheme)


def test_level_spacing(grid16):
    i = 4
    others = grid16.energies[grid16.energies != grid16.energies[i]]
    assert grid16.level_spacing(i) == np.abs(others - grid16.energies[i]).min()


def test_plane_waves_orthonormal(grid16):
    e0 = plane_wave(grid16, 0)
    assert e0[0] == 1 and np.count_nonzero(e0) == 1
    for i in range(grid16.size):
        for j in range(grid16.size):
            assert inner(plane_wave(grid16, i), plane_wave(grid16, j)) == (1.0 if i == j else 0.0)


@pytest.mark.parametrize("index", [-1, 16, 2.5])
def test_plane_wave_rejects_bad_index(grid16, index):
    with pytest.raises(InvalidArgumentError):
        plane_wave(grid16, index)


def test_h0_eigenvectors(grid16):
    for i in range(grid16.size):
        e = plane_wave(grid16, i)
        np.testing.assert_array_equal(h0_apply(grid16, e), grid16.energies[i] * e)
    np.testing.assert_array_equal(h0_apply(grid16, np.zeros(16, complex)), 0)


def test_h0_matches_dense_diagonal(grid16, rng):
    x = random_state(rng, grid16.size)
    dense = np.diag(grid16.energies) @ x
    np.testing.assert_allclose(h0_apply(grid16, x), dense, rtol=1e-15, atol=0)


def test_h0_linear(grid16, rng):
    x, y = random_state(rng, 16), random_state(rng, 16)
    a, b = 0.3 - 1.2j, 2.1
    lhs = h0_apply(grid16, a * x + b * y)
    rhs = a * h0_apply(grid16, x) + b * h0_apply(grid16, y)
    assert np.linalg.norm(lhs - rhs) <= 1e-14 * np.linalg.norm(lhs)


def test_h0_dimension_mismatch(grid16):
    with pytest.raises(InvalidArgumentError):
        h0_apply(grid16, np.ones(15))


def test_inner_properties(rng):
    x, y = random_state(rng, 8), random_state(rng, 8)
    xx = inner(x, x)
    assert xx.imag == 0 and xx.real >= 0
    assert inner(x, y) == pytest.approx(np.conj(inner(y, x)), rel=1e-15)
    with pytest.raises(InvalidArgumentError):
        inner(x, y[:7])


def test_yamaguchi_sample_value():
    g = build_grid(1.0, 2, "uniform")
    V = sample_separable(g, 0.5, yamaguchi(1.0))
    assert V.formfactor[2] == pytest.approx((1 / 1.0625) * math.sqrt(0.5), rel=1e-15)


def test_separable_rank_one_action(grid16):
    V = sample_separable(grid16, 0.7)
    g = V.formfactor
    for j in (0, 5, 11):
        np.testing.assert_allclose(V.apply(plane_wave(grid16, j)), 0.7 * np.conj(g[j]) * g, rtol=1e-15)


def test_zero_coupling_is_zero_operator(grid16, rng):
    V = sample_separable(grid16, 0.0)
    assert np.all(V.apply(random_state(rng, 16)) == 0)


def test_separable_rejects_bad_input(grid16):
    with pytest.raises(InvalidArgumentError):
        sample_separable(grid16, 0.5, lambda k: 1.0 / k * 0.0 + np.where(k > 0, np.inf, 1.0))
    with pytest.raises(InvalidArgumentError):
        sample_separable(grid16, 0.5 + 0.1j)


def test_dense_zero_kernel(grid16):
    V = sample_dense(grid16, lambda k, kp: 0.0)
    assert np.all(V.matrix == 0)


def test_dense_rank_one_kernel_matches_separable(grid16):
    f = yamaguchi(1.0)
    lam = 0.5
    dense = sample_dense(grid16, lambda k, kp: lam * f(k) * f(kp))
    sep = sample_separable(grid16, lam, f)
    np.testing.assert_allclose(dense.matrix, sep.dense(), rtol=1e-14, atol=0)


def test_dense_is_exactly_hermitian(grid16):
    V = sample_dense(grid16, gaussian_kernel(0.5, 1.0))
    assert np.array_equal(V.matrix, V.matrix.conj().T)
    R = random_dense(grid16, 0.5, seed=3)
    assert np.array_equal(R.matrix, R.matrix.conj().T)
    assert np.linalg.norm(R.matrix, 2) == pytest.approx(0.5, rel=1e-12)


def test_dense_rejects_asymmetric_kernel(grid16):
    with pytest.raises(InvalidArgumentError):
        sample_dense(grid16, lambda k, kp: np.exp(-(k - 2 * kp) ** 2))


def test_random_dense_reproducible(grid16):
    a = random_dense(grid16, 0.5, seed=11).matrix
    b = random_dense(grid16, 0.5, seed=11).matrix
    assert np.array_equal(a, b)
