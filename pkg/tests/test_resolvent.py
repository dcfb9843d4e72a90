import mpmath
import numpy as np
import pytest

from lsl_lab.errors import InvalidArgumentError
from lsl_lab.hilbert import plane_wave
from lsl_lab.resolvent import (
    adiabatic,
    d_weight,
    dko_apply,
    eta_apply,
    g0_apply,
    identity5_residual,
    mu,
)

from conftest import random_state


@pytest.mark.parametrize("eps", [0.0, -1e-3, float("nan"), float("inf"), 1j])
def test_adiabatic_rejects(eps):
    with pytest.raises(InvalidArgumentError):
        adiabatic(eps)


def test_g0_on_shell(grid16):
    i, eps = 3, 1e-2
    e = plane_wave(grid16, i)
    np.testing.assert_array_equal(g0_apply(grid16, grid16.energies[i], eps, e), e / (1j * eps))
    np.testing.assert_array_equal(g0_apply(grid16, grid16.energies[i], eps, e, conjugate=True), e / (-1j * eps))


@pytest.mark.parametrize("eps", [1e-1, 1e-4, 1e-9])
@pytest.mark.parametrize("conjugate", [False, True])
def test_g0_inverse_pair(grid16, rng, eps, conjugate):
    x = random_state(rng, 16)
    E = 2.3
    y = g0_apply(grid16, E, eps, x, conjugate)
    back = (E - grid16.energies + (-1j if conjugate else 1j) * eps) * y
    assert np.linalg.norm(back - x) <= 1e-14 * np.linalg.norm(x)


def test_g0_matches_dense_solve(grid16, rng):
    x = random_state(rng, 16)
    E, eps = 1.7, 3e-3
    A = np.diag(E - grid16.energies + 1j * eps)
    np.testing.assert_allclose(g0_apply(grid16, E, eps, x), np.linalg.solve(A, x), rtol=1e-13)


def test_eta_on_shell_is_identity(grid16):
    i = 5
    e = plane_wave(grid16, i)
    np.testing.assert_array_equal(eta_apply(grid16, grid16.energies[i], 1e-3, e), e)


def test_eta_suppresses_off_shell(grid16):
    E, eps = grid16.energies[5], 1e-4
    y = eta_apply(grid16, E, eps, np.ones(16))
    far = np.abs(E - grid16.energies) > 100 * eps
    ratio = np.abs(y[far]) / (eps / np.abs(E - grid16.energies[far]))
    np.testing.assert_allclose(ratio, 1.0, rtol=1e-6)


def test_eta_is_mu_weighted(grid16, rng):
    x = random_state(rng, 16)
    E, eps = 2.0, 0.05
    expected = np.array([mu(Ei, E, eps) for Ei in grid16.energies]) * x
    np.testing.assert_allclose(eta_apply(grid16, E, eps, x), expected, rtol=1e-15)
    np.testing.assert_allclose(eta_apply(grid16, E, eps, x), 1j * eps * g0_apply(grid16, E, eps, x), rtol=1e-15)


def test_mu_values():
    assert mu(1.3, 1.3, 1e-3) == 1
    assert mu(0.0, 0.5, 0.5) == pytest.approx(0.5 + 0.5j, rel=1e-15)
    # independent arithmetic at 50 digits
    mpmath.mp.dps = 50
    ref = mpmath.mpc(0, "1e-3") / (1 + mpmath.mpc(0, "1e-3"))
    got = mu(0.0, 1.0, 1e-3)
    assert abs(got - complex(ref)) < 1e-18
    assert abs(got) == pytest.approx(1e-3, rel=1e-6)


def test_d_weight_values():
    assert d_weight(2.0, 2.0, 1e-3) == pytest.approx(1e3, rel=1e-15)
    assert d_weight(0.0, 0.25, 0.25) == pytest.approx(2.0, rel=1e-15)
    assert d_weight(0.0, 1.0, 1e-3) == pytest.approx(1e-3 / (1 + 1e-6), rel=1e-15)


def test_dko_chain_and_positivity(grid16, rng):
    E, eps = 1.1, 2e-2
    x, y = random_state(rng, 16), random_state(rng, 16)
    chain = eps * g0_apply(grid16, E, eps, g0_apply(grid16, E, eps, x), conjugate=True)
    np.testing.assert_allclose(dko_apply(grid16, E, eps, x), chain, rtol=1e-14)
    assert np.vdot(x, dko_apply(grid16, E, eps, x)).real >= 0
    assert abs(np.vdot(x, dko_apply(grid16, E, eps, x)).imag) <= 1e-15 * abs(np.vdot(x, dko_apply(grid16, E, eps, x)))
    lhs = np.vdot(x, dko_apply(grid16, E, eps, y))
    rhs = np.conj(np.vdot(y, dko_apply(grid16, E, eps, x)))
    assert lhs == pytest.approx(rhs, rel=1e-14)


def test_dko_shell_peak_grows_off_shell_fades(grid16):
    i, j = 4, 9
    E = grid16.energies[i]
    ei, ej = plane_wave(grid16, i), plane_wave(grid16, j)
    on = [np.vdot(ei, dko_apply(grid16, E, eps, ei)).real for eps in (1e-2, 1e-4)]
    off = [np.vdot(ej, dko_apply(grid16, E, eps, ej)).real for eps in (1e-2, 1e-4)]
    assert on[0] == pytest.approx(1e2) and on[1] == pytest.approx(1e4)
    assert off[1] < off[0]


@pytest.mark.parametrize("same", [True, False])
def test_identity5_holds(grid64, rng, same):
    for eps in (1e-1, 1e-3, 1e-6, 1e-9):
        E_k = grid64.energies[10]
        E_n = E_k if same else grid64.energies[13]
        x = random_state(rng, 64)
        assert identity5_residual(grid64, E_n, E_k, eps, x) <= 1e-13


def test_identity5_prefactor_single_component():
    # scalar version at one grid point, exact rational arithmetic in mpmath
    mpmath.mp.dps = 60
    Ei, En, Ek, eps = mpmath.mpf("0.3"), mpmath.mpf("0.7"), mpmath.mpf("1.1"), mpmath.mpf("1e-3")
    j = mpmath.mpc(0, 1)
    lhs = (1 / (En - Ei - j * eps) - 1 / (Ek - Ei + j * eps)) / (Ek - En + j * eps)
    pref = (Ek - En + 2 * j * eps) / (Ek - En + j * eps)
    rhs = pref / ((En - Ei - j * eps) * (Ek - Ei + j * eps))
    assert abs(lhs - rhs) < mpmath.mpf("1e-50")
    m = complex(mu(0.7, 1.1, 1e-3))
    assert abs(1 + m - complex(pref)) < 1e-15


def test_mu_modulus_and_d_relation(rng):
    for _ in range(200):
        En, Ek = rng.uniform(-5, 5, 2)
        eps = 10 ** rng.uniform(-8, 0)
        m = mu(En, Ek, eps)
        assert abs(m) <= 1
        assert d_weight(En, Ek, eps) == pytest.approx(abs(m) ** 2 / eps, rel=1e-14)


def test_mu_and_d_vanish_linearly_off_shell():
    # finite at finite eps; the off-shell rate is eps / |E_n - E_k|
    En, Ek = 0.7, 1.2
    eps = np.logspace(-2, -8, 7)
    m = np.array([abs(mu(En, Ek, e)) for e in eps])
    d = np.array([d_weight(En, Ek, e) for e in eps])
    assert np.all(m > 0) and np.all(d > 0)
    assert np.polyfit(np.log(eps), np.log(m), 1)[0] == pytest.approx(1.0, abs=1e-4)
    assert np.polyfit(np.log(eps), np.log(d), 1)[0] == pytest.approx(1.0, abs=1e-4)
    # leading correction is eps**2 / (2 dE**2) = 2e-4 at eps = 1e-2
    np.testing.assert_allclose(m / eps, 1 / abs(En - Ek), rtol=3e-4)
    np.testing.assert_allclose(d / eps, 1 / (En - Ek) ** 2, rtol=5e-4)
