import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_invertible, random_unitary
from corpus import coupled_exp
from halfline_jost import bc, solve
from halfline_jost.errors import InvalidInput, TailTooShort, ZeroWavenumberOnAxis
from halfline_jost.potential import PotentialModel, Profile

TIGHT = solve.SolverConfig(rtol=1e-12, atol=1e-12, tail_tol=1e-13)


def bessel_jost(g, k):
    """Exact f(k, 0) and f'(k, 0) for the scalar potential g exp(-x)."""
    k = mp.mpc(k)
    nu = -2j * k
    if g > 0:
        s = mp.sqrt(g)
        pref = mp.gamma(1 + nu) * mp.power(g, 1j * k)
        z = 2 * s
        f = pref * mp.besseli(nu, z)
        fp = pref * mp.diff(lambda t: mp.besseli(nu, t), z) * (-s)
    else:
        s = mp.sqrt(-g)
        pref = mp.gamma(1 + nu) * mp.power(-g, 1j * k)
        z = 2 * s
        f = pref * mp.besselj(nu, z)
        fp = pref * mp.diff(lambda t: mp.besselj(nu, t), z) * (-s)
    return complex(f), complex(fp)


def test_free_jost_solution_exact():
    V = PotentialModel.zero(2)
    k = 1.3 + 0.2j
    s = solve.jost_solution(V, k, np.linspace(0, 5, 11))
    np.testing.assert_allclose(s.f, np.exp(1j * k * s.grid)[:, None, None] * np.eye(2), atol=1e-15)


@pytest.mark.parametrize("g,k", [(2.0, 1j), (2.0, 1.0 + 0.5j), (-5.0, 2.0), (-5.0, 0.7j)])
def test_jost_solution_matches_bessel_closed_form(g, k):
    V = PotentialModel.scalar(Profile("exp", c=g, alpha=1.0))
    s = solve.jost_solution(V, k, [0.0], config=TIGHT)
    f, fp = bessel_jost(g, k)
    assert abs(s.f[0, 0, 0] - f) <= 1e-9 * max(1, abs(f))
    assert abs(s.fprime[0, 0, 0] - fp) <= 1e-9 * max(1, abs(fp))


def test_jost_solution_self_convergence():
    V = PotentialModel.scalar(Profile("exp", c=2.0, alpha=1.0))
    a = solve.jost_solution(V, 1j, [0.0, 1.0], config=solve.DEFAULT_CONFIG)
    b = solve.jost_solution(V, 1j, [0.0, 1.0], config=solve.SolverConfig(rtol=1e-11, atol=1e-11, tail_tol=1e-13))
    assert np.max(np.abs(a.f - b.f)) <= 1e-9


def test_jost_normalization_at_x_max():
    V = coupled_exp()
    s = solve.jost_solution(V, 0.8 + 0.1j)
    assert np.linalg.norm(s.m_values[-1] - np.eye(2)) <= 1e-12


def test_regular_solution_free_cases():
    x = np.linspace(0, 4, 9)
    k = 1.7
    d = solve.regular_solution(PotentialModel.zero(2), bc.dirichlet(2), k, x)
    np.testing.assert_allclose(d.phi, (-np.sin(k * x) / k)[:, None, None] * np.eye(2), atol=1e-15)
    nm = solve.regular_solution(PotentialModel.zero(2), bc.neumann(2), k, x)
    np.testing.assert_allclose(nm.phi, np.cos(k * x)[:, None, None] * np.eye(2), atol=1e-15)


def test_regular_solution_initial_data_and_convergence():
    V = coupled_exp()
    pair = bc.delta_prime(1.0)
    V3 = PotentialModel.zero(3)
    s = solve.regular_solution(V3, pair, 1.0, [0.0, 1.0])
    np.testing.assert_array_equal(s.phi[0], pair.A)
    np.testing.assert_array_equal(s.phiprime[0], pair.B)
    grid = np.linspace(0, 3, 7)
    a = solve.regular_solution(V, bc.neumann(2), 1.0, grid)
    b = solve.regular_solution(V, bc.neumann(2), 1.0, grid, config=TIGHT)
    assert np.max(np.abs(a.phi - b.phi)) <= 1e-9


@pytest.mark.parametrize("a", [-1.0, 0.0, 2.0])
def test_delta_prime_jost_matrix(a):
    V = PotentialModel.zero(3)
    pair = bc.delta_prime(a)
    for k in [0.5, 2.0 + 1.0j, 3j]:
        ev = solve.jost_matrix(V, pair, k)
        expected = np.array([[-1j * k, 0, -1 + 1j * a * k], [1j * k, -1j * k, -1], [0, 1j * k, -1]])
        np.testing.assert_allclose(ev.J, expected, atol=1e-14)
        assert abs(ev.detJ - k ** 2 * (3 - 1j * a * k)) <= 1e-12 * max(1, abs(k) ** 3)


def test_free_dirichlet_scalar_jost_is_minus_one():
    d = solve.det_jost(PotentialModel.zero(1), bc.dirichlet(1), [0.3, 2j, 1 + 1j])
    np.testing.assert_allclose(d, -1.0)


def test_jost_matrix_matches_wronskian_midway():
    V = coupled_exp()
    pair = bc.dirichlet(2)
    x_max = solve.choose_x_max(V)
    W = solve.wronskian(V, pair, 2j, [0.0, x_max / 2], config=TIGHT)
    J = solve.jost_matrix(V, pair, 2j, config=TIGHT).J
    assert np.linalg.norm(W[-1] - J, 2) <= 1e-9


def test_wronskian_drift_free_and_delta_prime():
    assert solve.wronskian_drift(PotentialModel.zero(2), bc.neumann(2), 1.0 + 0.3j) <= 1e-12
    assert solve.wronskian_drift(PotentialModel.zero(3), bc.delta_prime(-1.0), 1 + 0.5j,
                                 np.linspace(0, 5, 51)) <= 1e-9


def test_wronskian_drift_grows_as_tolerance_loosens():
    V = coupled_exp()
    pair = bc.robin([2.0, 1.0])
    drifts = [solve.wronskian_drift(V, pair, 1.0 + 0.5j, config=solve.SolverConfig(rtol=t, atol=t))
              for t in (1e-10, 1e-8, 1e-6, 1e-4)]
    assert drifts[-1] > drifts[0]
    assert all(b >= 0.5 * a for a, b in zip(drifts, drifts[1:]))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_wronskian_constancy_random(seed):
    rng = np.random.default_rng(seed)
    H = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    H = 0.5 * (H + H.conj().T)
    V = PotentialModel.from_terms([(H, Profile("exp", c=1.0, alpha=rng.uniform(0.5, 2.0)))])
    k = complex(rng.uniform(-3, 3), rng.uniform(0, 2))
    tol = 1e-10
    drift = solve.wronskian_drift(V, bc.robin(rng.uniform(0.2, 3.0, 2)), k, np.linspace(0, 8, 41),
                                  config=solve.SolverConfig(rtol=tol, atol=tol))
    J = solve.jost_matrix(V, bc.robin([1.0, 1.0]), k).J
    assert drift <= 100 * tol * max(1.0, np.linalg.norm(J, 2))


def test_cauchy_riemann_smoke():
    V = coupled_exp()
    pair = bc.robin([2.0, 0.7])
    k0, h = 0.8 + 0.6j, 1e-4
    d = solve.det_jost(V, pair, [k0 + h, k0 - h, k0 + 1j * h, k0 - 1j * h], config=TIGHT)
    dx = (d[0] - d[1]) / (2 * h)
    dy = (d[2] - d[3]) / (2 * h)
    assert abs(dy - 1j * dx) <= 1e-6


def test_covariance_under_transforms(rng):
    V = coupled_exp()
    pair = bc.robin([2.0, 0.9])
    M = random_unitary(rng, 2)
    T1, T2 = random_invertible(rng, 2), random_invertible(rng, 2)
    V2, pair2 = bc.transform_problem(V, pair, M, T1, T2)
    for k in [0.7, 1.5 + 0.4j, 2j]:
        J = solve.jost_matrix(V, pair, k, config=TIGHT).J
        J2 = solve.jost_matrix(V2, pair2, k, config=TIGHT).J
        assert np.linalg.norm(J2 - M @ J @ T1 @ M.conj().T @ T2, 2) <= 1e-9


def test_invertible_on_real_axis():
    V = coupled_exp()
    for pair in (bc.dirichlet(2), bc.neumann(2), bc.robin([2.0, 0.4])):
        d = solve.det_jost(V, pair, np.linspace(0.05, 20, 60))
        assert np.all(np.abs(d) > 0)


def test_error_paths():
    V = PotentialModel.scalar(Profile("exp", c=1.0, alpha=1.0))
    with pytest.raises(ZeroWavenumberOnAxis):
        solve.jost_solution(V, 0.0)
    with pytest.raises(InvalidInput):
        solve.jost_matrix(V, bc.dirichlet(1), -1j)
    with pytest.raises(TailTooShort):
        solve.jost_matrix(V, bc.dirichlet(1), 1.0, config=solve.SolverConfig(x_max=3.0))
    with pytest.raises(TailTooShort):
        solve.choose_x_max(PotentialModel.scalar(Profile("power", c=1.0, p=2.5)))


def test_zero_energy_path_matches_small_k():
    V = coupled_exp()
    J0 = solve.jost_matrices(V, bc.neumann(2), [0.0])[0]
    Jk = solve.jost_matrices(V, bc.neumann(2), [1e-7])[0]
    assert np.linalg.norm(J0 - Jk) <= 1e-5


def test_thread_cap_from_environment(monkeypatch):
    monkeypatch.setenv("HALFLINE_JOST_THREADS", "3")
    assert solve.worker_count() == 3
    V = coupled_exp()
    ks = np.linspace(0.5, 5, 600)
    a = solve.det_jost(V, bc.dirichlet(2), ks)
    monkeypatch.setenv("HALFLINE_JOST_THREADS", "1")
    b = solve.det_jost(V, bc.dirichlet(2), ks)
    np.testing.assert_array_equal(a, b)
    assert math.isfinite(abs(a).max())
