"""Acceptance criteria 1-7, one test per criterion.

Each test records a one-line verdict in ``VERDICTS``; the conftest hook
prints them in the terminal summary, and running this file directly prints
them as well.
"""

import math
import time

import numpy as np
import pytest
from scipy import integrate

from conftest import random_invertible, random_unitary
from corpus import corpus, coupled_exp, coupled_exp_b
from halfline_jost import bc, series, solve, spectrum, trace
from halfline_jost.potential import PotentialModel, Profile, evaluate

A_VALUES = [-1.0, -0.5, 0.0, 1.0, 2.0]
VERDICTS: dict[int, str] = {}


def record(number, ok, detail):
    VERDICTS[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
    assert ok, VERDICTS[number]


def test_criterion_1_delta_prime_golden_suite():
    start = time.perf_counter()
    V = PotentialModel.zero(3)
    rng = np.random.default_rng(1)
    ks = rng.uniform(0.1, 5, 20) + 1j * rng.uniform(0, 3, 20)
    det_err = eig_err = e_err = 0.0
    counts_ok = True
    for a in A_VALUES:
        pair = bc.delta_prime(a)
        d = solve.det_jost(V, pair, ks)
        det_err = max(det_err, float(np.max(np.abs(d - ks ** 2 * (3 - 1j * a * ks)))))
        res = spectrum.find_eigenvalues(V, pair)
        if a < 0:
            counts_ok &= res.total == 1 and res.eigen[0][1] == 1
            if res.eigen:
                eig_err = max(eig_err, abs(res.eigen[0][0] - 3 / abs(a)))
        else:
            counts_ok &= res.total == 0
        t = series.coefficient_tables(V, pair, N=6)
        if a == 0:
            e_err = max(e_err, float(np.max(np.abs(t.e))))
        else:
            ref = np.array([-(6 / a) ** l / l for l in range(1, 7)])
            e_err = max(e_err, float(np.max(np.abs(t.e - ref) / np.abs(ref))))
    elapsed = time.perf_counter() - start
    ok = det_err <= 1e-10 and counts_ok and eig_err <= 1e-8 and e_err <= 1e-8 and elapsed < 10
    record(1, ok, f"det err {det_err:.1e}, kappa err {eig_err:.1e}, e_l rel err {e_err:.1e}, "
                  f"counts {'ok' if counts_ok else 'wrong'}, {elapsed:.1f} s")


def test_criterion_2_delta_prime_trace_identities():
    start = time.perf_counter()
    worst, decomp_err = 0.0, 0.0
    for a in A_VALUES:
        rep = trace.full_report(PotentialModel.zero(3), bc.delta_prime(a), q_max=4)
        for row in rep.rows:
            if row.rhs == 0:
                worst = max(worst, row.residual / 1e-9 * 1e-6)
            else:
                worst = max(worst, row.rel_residual)
        if a < 0:
            r1 = rep.rows[0]
            want = (3 / abs(a), 3 / (2 * abs(a)), 3 / (2 * abs(a)))
            got = (r1.eigen_sum, r1.integral, r1.rhs)
            decomp_err = max(decomp_err, max(abs(g - w) for g, w in zip(got, want)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and decomp_err <= 1e-7 and elapsed < 60
    record(2, ok, f"worst normalized residual {worst:.1e}, q=1 decomposition err {decomp_err:.1e}, "
                  f"{elapsed:.1f} s")


def _e1_e2_oracle(V):
    def integral(i, j):
        re = integrate.quad(lambda x: evaluate(V, x)[i, j].real, 0, np.inf, epsabs=0, epsrel=1e-13)[0]
        im = integrate.quad(lambda x: evaluate(V, x)[i, j].imag, 0, np.inf, epsabs=1e-15, epsrel=1e-13)[0]
        return re + 1j * im

    def tail(x):
        return integrate.quad_vec(lambda y: evaluate(V, y), x, np.inf, epsrel=1e-12)[0]

    I = [[integral(i, j) for j in range(2)] for i in range(2)]
    WV = integrate.quad_vec(lambda x: tail(x) @ evaluate(V, x), 0, np.inf, epsrel=1e-11)[0]
    V0 = evaluate(V, 0.0)
    e1 = -(I[0][0] + I[1][1])
    e2 = (I[0][0] * I[1][1] - I[0][1] * I[1][0] - V0[0, 0] - V0[1, 1]
          + WV[0, 0] + WV[1, 1] - 0.5 * (I[0][0] + I[1][1]) ** 2)
    return e1, e2


def test_criterion_3_dirichlet_2x2_coefficients():
    err1 = err2 = 0.0
    for V in (coupled_exp(), coupled_exp_b()):
        e1, e2 = _e1_e2_oracle(V)
        t = series.coefficient_tables(V, bc.dirichlet(2), N=4)
        err1 = max(err1, abs(t.e_coeff(1) - e1))
        err2 = max(err2, abs(t.e_coeff(2) - e2))
    record(3, err1 <= 1e-8 and err2 <= 1e-7, f"e1 err {err1:.1e}, e2 err {err2:.1e}")


def test_criterion_4_fd_oracle_equivalence():
    worst, counts_ok, names = 0.0, True, []
    for name, V, pair in corpus():
        res = spectrum.find_eigenvalues(V, pair)
        fd = spectrum.fd_oracle_spectrum(V, pair)
        if len(fd.kappas) != res.total:
            counts_ok = False
            names.append(name)
            continue
        worst = max(worst, float(np.max(np.abs(np.sort(fd.kappas) - np.sort(res.kappas)), initial=0.0)))
    detail = f"max |kappa - kappa_FD| {worst:.1e} over {len(corpus())} potentials"
    if names:
        detail += f", count mismatch on {names}"
    record(4, counts_ok and worst <= 1e-4, detail)


def test_criterion_5_remainder_rate():
    V = PotentialModel.scalar(Profile("exp", c=-2.0, alpha=1.0))
    slopes = {N: series.m_remainder_check(V, N, np.geomspace(8, 64, 8)).slope for N in (0, 1, 2)}
    ok = all(s <= -(N + 0.8) for N, s in slopes.items())
    record(5, ok, "slopes " + ", ".join(f"N={N}: {s:.3f}" for N, s in slopes.items()))


def test_criterion_6_invariant_suites():
    rng = np.random.default_rng(6)
    V = coupled_exp()
    pair = bc.robin([2.0, 0.9])
    checks = {}

    tol = 1e-10
    cfg = solve.SolverConfig(rtol=tol, atol=tol)
    drift = max(solve.wronskian_drift(V, pair, k, np.linspace(0, 8, 41), config=cfg)
                for k in (0.5, 1 + 0.5j, 3j, -2 + 0.1j))
    checks["wronskian"] = (drift, drift <= 100 * tol)

    tight = solve.SolverConfig(rtol=1e-12, atol=1e-12, tail_tol=1e-13)
    M, T1, T2 = random_unitary(rng, 2), random_invertible(rng, 2), random_invertible(rng, 2)
    V2, pair2 = bc.transform_problem(V, pair, M, T1, T2)
    cov = 0.0
    for k in (0.7, 1.5 + 0.4j, 2j):
        J = solve.jost_matrix(V, pair, k, config=tight).J
        J2 = solve.jost_matrix(V2, pair2, k, config=tight).J
        cov = max(cov, float(np.linalg.norm(J2 - M @ J @ T1 @ M.conj().T @ T2, 2)))
    checks["covariance"] = (cov, cov <= 1e-9)

    dual = 0.0
    for W, p in ((V, pair), (V, bc.dirichlet(2)), (PotentialModel.zero(3), bc.delta_prime(2.0))):
        t = series.coefficient_tables(W, p, N=8)
        dual = max(dual, float(np.max(np.abs(t.e - t.e_log) / np.maximum(1.0, np.abs(t.e)))))
    checks["dual_path"] = (dual, dual <= 1e-12)

    mixed = dict((n, (v, p)) for n, v, p in corpus())["coupled-exp-mixed"]
    a = spectrum.find_eigenvalues(*mixed)
    b = spectrum.find_eigenvalues(mixed[0], mixed[1].right_multiplied(random_invertible(rng, 2)))
    par = float(np.max(np.abs(a.kappas - b.kappas))) if a.total == b.total else math.inf
    checks["parametrization"] = (par, par <= 1e-9)

    mu_n = spectrum.half_bound_count(PotentialModel.zero(1), bc.neumann(1))[0]
    mu_d = spectrum.half_bound_count(PotentialModel.zero(1), bc.dirichlet(1))[0]
    checks["half_bound"] = (float(abs(mu_n - 1) + abs(mu_d)), mu_n == 1 and mu_d == 0)

    ok = all(flag for _, flag in checks.values())
    record(6, ok, ", ".join(f"{k} {v:.1e}" for k, (v, _) in checks.items()))


def test_criterion_7_note():
    VERDICTS[7] = ("criterion 7: NOTE (analytic continuation is proof content; no numerics, "
                   "its consequences are exercised by criteria 2 and 3)")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
