import math

import numpy as np
import pytest

from corpus import coupled_exp
from halfline_jost import bc, series, trace
from halfline_jost.errors import BranchAmbiguity, InsufficientEOrder, QuadratureBudgetExceeded
from halfline_jost.potential import PotentialModel


@pytest.fixture(scope="module")
def coupled_tables():
    return series.coefficient_tables(coupled_exp(), bc.dirichlet(2), N=8)


def test_h_for_delta_prime():
    # det J = k^2 (3 - 2ik), c2 = -2i, p = 3
    V, pair = PotentialModel.zero(3), bc.delta_prime(2.0)
    t = series.coefficient_tables(V, pair, N=4)
    assert trace.h_value(V, pair, t, 1.0) == pytest.approx(1 + 1.5j, abs=1e-14)
    prof = trace.log_h_on_grid(V, pair, t, [0.5, 1.0, 4.0])
    np.testing.assert_allclose(prof.lnh_plus[1], 0.5 * math.log(13 / 4) + 1j * math.atan(1.5), atol=1e-13)
    # ln h(-k) = conj(ln h(k)) for real k
    np.testing.assert_allclose(prof.lnh_minus, np.conj(prof.lnh_plus), atol=1e-13)


@pytest.mark.parametrize("a", [-1.0, -0.5, 1.0, 2.0])
def test_delta_prime_identities(a):
    rep = trace.full_report(PotentialModel.zero(3), bc.delta_prime(a), q_max=4)
    for row in rep.rows:
        assert row.rel_residual <= 1e-9, (row.q, row.to_report())


def test_delta_prime_first_identity_values():
    rep = trace.full_report(PotentialModel.zero(3), bc.delta_prime(-1.0), q_max=1)
    row = rep.rows[0]
    assert row.eigen_sum == pytest.approx(3.0, abs=1e-10)
    assert row.rhs == pytest.approx(1.5, abs=1e-12)
    assert row.integral == pytest.approx(1.5, abs=1e-8)


def test_free_dirichlet_rows_vanish():
    rep = trace.full_report(PotentialModel.zero(2), bc.dirichlet(2), q_max=4)
    for row in rep.rows:
        assert row.eigen_sum == 0 and row.rhs == 0
        assert abs(row.integral) <= 1e-14
        assert row.diagnostics["rel_basis"] == "absolute"


def test_conjugate_symmetry_on_coupled_problem(coupled_tables):
    prof = trace.log_h_profile(coupled_exp(), bc.dirichlet(2), coupled_tables, q_max=2, tol=1e-8)
    assert prof.diagnostics["conjugate_symmetry"] <= 1e-12
    assert prof.diagnostics["anchor_mismatch"] <= 1e-8


def test_k_max_doubling_consistency():
    V, pair = PotentialModel.zero(3), bc.delta_prime(2.0)
    t = series.coefficient_tables(V, pair, N=8)
    K = trace.choose_k_max(t, 4)
    a = trace.full_report(V, pair, q_max=4, k_max=K)
    b = trace.full_report(V, pair, q_max=4, k_max=2 * K)
    for ra, rb in zip(a.rows, b.rows):
        assert abs(ra.lhs - rb.lhs) <= 1e-8 * max(1.0, abs(ra.rhs))


def test_q3_integrand_decays_like_k_minus_two(coupled_tables):
    ks = np.geomspace(20, 80, 8)
    prof = trace.log_h_on_grid(coupled_exp(), bc.dirichlet(2), coupled_tables, ks)
    g = trace.integrand(coupled_tables, 3, prof.k_grid, prof.lnh_plus, prof.lnh_minus)
    slope = np.polyfit(np.log(prof.k_grid), np.log(np.abs(g.real)), 1)[0]
    assert slope == pytest.approx(-2.0, abs=0.3)


def test_tail_integral_matches_quadrature_of_series(coupled_tables):
    import mpmath as mp
    mp.mp.dps = 40
    e = [mp.mpc(complex(v)) for v in coupled_tables.e]

    def lnh(k):
        return mp.fsum(e[l - 1] / (2j * k) ** l for l in range(1, len(e) + 1))

    def f(k, q):
        # regularized integrand rebuilt in extended precision from its definition
        j = q // 2
        if q % 2:
            even = (lnh(k) + lnh(-k)) / 2
            sub = mp.fsum((-1) ** l * e[2 * l - 1] / (2 * k) ** (2 * l) for l in range(1, j + 1))
            return mp.re(even - sub) * k ** (2 * j)
        odd = (lnh(k) - lnh(-k)) / 2
        sub = mp.fsum((-1) ** (l + 1) * e[2 * l] / (2 * k) ** (2 * l + 1) for l in range(0, j))
        return mp.re(-1j * odd - sub) * k ** (2 * j - 1)

    K = 40.0
    try:
        for q in (1, 2, 3, 4):
            val, _ = trace.tail_integral(coupled_tables, q, K)
            ref = float(mp.quad(lambda k: f(k, q), [K, 4 * K, mp.inf]))
            assert val.real == pytest.approx(ref, rel=1e-10, abs=1e-16)
    finally:
        mp.mp.dps = 15


def test_insufficient_e_order():
    V, pair = PotentialModel.zero(3), bc.delta_prime(2.0)
    with pytest.raises(InsufficientEOrder):
        trace.full_report(V, pair, q_max=4, N=2)
    t = series.coefficient_tables(V, pair, N=2)
    with pytest.raises(InsufficientEOrder):
        trace.log_h_profile(V, pair, t, q_max=3)


def test_truncated_k_max_reports_budget(coupled_tables):
    with pytest.raises(QuadratureBudgetExceeded) as err:
        trace.log_h_profile(coupled_exp(), bc.dirichlet(2), coupled_tables, k_max=2.0)
    diag = err.value.diagnostics
    assert diag["suggested_k_max"] > 2.0 and diag["tail_estimates"]


def test_branch_ambiguity_on_sign_flip():
    t = series.coefficient_tables(PotentialModel.zero(1), bc.dirichlet(1), N=2)
    tracker = trace._LogTracker(lambda k: np.where(np.abs(k) >= 1.0, -1.0, 1.0) + 0j, +1, t)
    with pytest.raises(BranchAmbiguity):
        tracker.log(np.array([0.5, 2.0]))


def test_report_layout(coupled_tables):
    rep = trace.full_report(PotentialModel.zero(3), bc.delta_prime(-1.0), q_max=2)
    out = rep.to_report()
    assert set(out) == {"orders", "e", "c2", "p", "spectrum", "provenance"}
    assert [r["q"] for r in out["orders"]] == [1, 2]
    assert out["spectrum"]["mu"] == 2
