"""Jost solution, regular solution and Jost matrix by adaptive ODE integration.

The Jost solution is obtained from the normalized function
m(k, x) = exp(-ikx) f(k, x), which solves m'' + 2ik m' = V m with m -> I,
m' -> 0 at infinity.  Integration runs backward from ``x_max`` so that the
exp(-2ikx) mode decays along the integration direction for Im k > 0.
Many wavenumbers are integrated in one vectorized state.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import solve_ivp

from .bc import BoundaryPair
from .errors import IntegratorFailure, InvalidInput, TailTooShort, ZeroWavenumberOnAxis
from .potential import PotentialModel, _cutoff, evaluate


@dataclass(frozen=True)
class SolverConfig:
    """Integrator settings.

    ``x_max`` of ``None`` selects the smallest x with
    ``integral_x^inf ||V|| <= tail_tol``.
    """

    rtol: float = 1e-10
    atol: float = 1e-10
    tail_tol: float = 1e-10
    x_max: float | None = None
    x_max_cap: float = 1e4
    method: str = "DOP853"
    chunk: int = 256

    def with_tolerance(self, tol: float) -> "SolverConfig":
        return replace(self, rtol=tol, atol=tol)


DEFAULT_CONFIG = SolverConfig()


def worker_count() -> int:
    """Worker cap from ``HALFLINE_JOST_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("HALFLINE_JOST_THREADS", "1")))
    except ValueError:
        return 1


def choose_x_max(V: PotentialModel, config: SolverConfig = DEFAULT_CONFIG) -> float:
    if V.is_zero:
        return 0.0 if config.x_max is None else float(config.x_max)
    if config.x_max is not None:
        x_max = float(config.x_max)
        tail = float(V.norm_tail(x_max))
        if tail > config.tail_tol:
            raise TailTooShort(f"tail integral {tail:.3e} beyond x_max={x_max} exceeds {config.tail_tol:.1e}")
        return x_max
    x_max = _cutoff(V.norm_tail, config.tail_tol, x_hi=config.x_max_cap)
    if not np.isfinite(x_max) or x_max > config.x_max_cap:
        raise TailTooShort(f"potential tail exceeds {config.tail_tol:.1e} beyond x_max_cap={config.x_max_cap}")
    return max(x_max, 1.0)


@dataclass
class SolutionSample:
    k: complex
    grid: np.ndarray
    f: np.ndarray | None = None
    fprime: np.ndarray | None = None
    phi: np.ndarray | None = None
    phiprime: np.ndarray | None = None
    m_values: np.ndarray | None = None
    x_max: float | None = None


@dataclass(frozen=True)
class JostEval:
    k: complex
    J: np.ndarray
    detJ: complex


def _check_wavenumbers(ks, allow_zero: bool) -> np.ndarray:
    ks = np.atleast_1d(np.asarray(ks, dtype=complex))
    if np.any(ks.imag < -1e-14 * np.maximum(1.0, np.abs(ks))):
        raise InvalidInput("wavenumbers must lie in the closed upper half plane")
    if not allow_zero and np.any(ks == 0):
        raise ZeroWavenumberOnAxis("k = 0 requires the zero-energy path (zero_energy=True)")
    return ks


def _segments(V: PotentialModel, x_max: float) -> list[float]:
    pts = [x_max] + [b for b in reversed(V.breakpoints) if 0.0 < b < x_max] + [0.0]
    return pts


def _integrate_m_chunk(V, ks, x_max, x_eval, config):
    """Backward integration of (m, m') for a batch of wavenumbers.

    Returns arrays of shape (len(x_eval), K, n, n) for m and m'.
    """
    n = V.n
    K = len(ks)
    ik2 = (2j * ks)[:, None, None]
    shape = (2, K, n, n)

    def rhs(x, y):
        y = y.reshape(shape)
        m, mp = y[0], y[1]
        Vx = evaluate(V, x)
        return np.stack([mp, Vx @ m - ik2 * mp]).ravel()

    y = np.zeros(shape, dtype=complex)
    y[0] = np.eye(n)
    out_m = np.empty((len(x_eval), K, n, n), dtype=complex)
    out_mp = np.empty_like(out_m)
    pts = _segments(V, x_max)
    done = np.zeros(len(x_eval), dtype=bool)
    for a, b in zip(pts[:-1], pts[1:]):
        sel = np.nonzero((x_eval <= a) & (x_eval >= b) & ~done)[0]
        order = sel[np.argsort(-x_eval[sel])]
        t_eval = x_eval[order]
        if len(t_eval) == 0 or t_eval[-1] != b:
            t_eval = np.append(t_eval, b)
        sol = solve_ivp(rhs, (a, b), y.ravel(), method=config.method, rtol=config.rtol, atol=config.atol,
                        t_eval=t_eval)
        if sol.status != 0:
            raise IntegratorFailure(f"Jost integration failed: {sol.message}")
        vals = sol.y.T.reshape((len(t_eval),) + shape)
        out_m[order] = vals[:len(order), 0]
        out_mp[order] = vals[:len(order), 1]
        done[order] = True
        y = vals[-1]
    return out_m, out_mp


def m_values(V: PotentialModel, ks, x_eval=(0.0,), config: SolverConfig = DEFAULT_CONFIG):
    """m(k, x) and m'(k, x) for a batch of wavenumbers (k = 0 allowed).

    Returns arrays of shape (len(x_eval), len(ks), n, n).
    """
    ks = _check_wavenumbers(ks, allow_zero=True)
    x_eval = np.atleast_1d(np.asarray(x_eval, dtype=float))
    n, K = V.n, len(ks)
    if V.is_zero:
        m = np.broadcast_to(np.eye(n, dtype=complex), (len(x_eval), K, n, n)).copy()
        return m, np.zeros_like(m)
    x_max = choose_x_max(V, config)
    if np.any(x_eval > x_max) or np.any(x_eval < 0):
        raise InvalidInput(f"evaluation points must lie in [0, x_max={x_max:.6g}]")
    order = np.argsort(np.abs(ks))
    chunks = [order[i:i + config.chunk] for i in range(0, K, config.chunk)]
    out_m = np.empty((len(x_eval), K, n, n), dtype=complex)
    out_mp = np.empty_like(out_m)

    def work(idx):
        return idx, _integrate_m_chunk(V, ks[idx], x_max, x_eval, config)

    workers = min(worker_count(), len(chunks))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [work(c) for c in chunks]
    for idx, (mm, mp) in results:
        out_m[:, idx] = mm
        out_mp[:, idx] = mp
    return out_m, out_mp


def jost_solution(V: PotentialModel, k, grid=None, *, zero_energy: bool = False,
                  config: SolverConfig = DEFAULT_CONFIG) -> SolutionSample:
    """Jost solution f(k, x) = exp(ikx) m(k, x) and its derivative on ``grid``."""
    k = complex(_check_wavenumbers([k], allow_zero=zero_energy)[0])
    x_max = choose_x_max(V, config)
    if grid is None:
        grid = np.linspace(0.0, x_max if x_max > 0 else 10.0, 201)
    grid = np.asarray(grid, dtype=float)
    if V.is_zero:
        m = np.broadcast_to(np.eye(V.n, dtype=complex), (len(grid), V.n, V.n)).copy()
        mp = np.zeros_like(m)
    else:
        m, mp = m_values(V, [k], grid, config)
        m, mp = m[:, 0], mp[:, 0]
    phase = np.exp(1j * k * grid)[:, None, None]
    f = phase * m
    fp = phase * (mp + 1j * k * m)
    return SolutionSample(k=k, grid=grid, f=f, fprime=fp, m_values=m, x_max=x_max)


def regular_solution(V: PotentialModel, bc: BoundaryPair, k, grid,
                     config: SolverConfig = DEFAULT_CONFIG) -> SolutionSample:
    """Regular solution phi with phi(0) = A, phi'(0) = B, integrated forward."""
    k = complex(k)
    grid = np.asarray(grid, dtype=float)
    if grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
        raise InvalidInput("grid must be increasing and start at 0")
    A, B = bc.A, bc.B
    n = bc.n
    if V.is_zero:
        x = grid[:, None, None]
        if k == 0:
            phi = A + x * B
            php = np.broadcast_to(B, phi.shape).copy()
        else:
            phi = np.cos(k * x) * A + np.sin(k * x) / k * B
            php = -k * np.sin(k * x) * A + np.cos(k * x) * B
        return SolutionSample(k=k, grid=grid, phi=phi, phiprime=php)

    k2 = k * k
    shape = (2, n, n)

    def rhs(x, y):
        y = y.reshape(shape)
        return np.stack([y[1], (evaluate(V, x) - k2 * np.eye(n)) @ y[0]]).ravel()

    y = np.stack([A, B]).astype(complex)
    phi = np.empty((len(grid), n, n), dtype=complex)
    php = np.empty_like(phi)
    pts = [0.0] + [b for b in V.breakpoints if 0.0 < b < grid[-1]] + [grid[-1]]
    filled = np.zeros(len(grid), dtype=bool)
    for a, b in zip(pts[:-1], pts[1:]):
        sel = np.nonzero((grid >= a) & (grid <= b) & ~filled)[0]
        sol = solve_ivp(rhs, (a, b), y.ravel(), method=config.method, rtol=config.rtol, atol=config.atol,
                        dense_output=True)
        if sol.status != 0:
            raise IntegratorFailure(f"regular solution integration failed: {sol.message}")
        vals = sol.sol(grid[sel]).T.reshape((len(sel),) + shape)
        phi[sel], php[sel] = vals[:, 0], vals[:, 1]
        filled[sel] = True
        y = sol.y[:, -1].reshape(shape)
    return SolutionSample(k=k, grid=grid, phi=phi, phiprime=php)


def assemble_jost(bc: BoundaryPair, f0, fp0) -> np.ndarray:
    """J = f(-k*, 0)^+ B - f'(-k*, 0)^+ A from Jost data at the reflected wavenumber."""
    fd = np.conj(np.swapaxes(f0, -1, -2))
    fpd = np.conj(np.swapaxes(fp0, -1, -2))
    return fd @ bc.B - fpd @ bc.A


def jost_matrices(V: PotentialModel, bc: BoundaryPair, ks, config: SolverConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Jost matrices J(k) for a batch of k in the closed upper half plane; shape (K, n, n)."""
    ks = _check_wavenumbers(ks, allow_zero=True)
    if V.n != bc.n:
        raise InvalidInput("potential and boundary pair have different sizes")
    q = -np.conj(ks)
    m, mp = m_values(V, q, (0.0,), config)
    m, mp = m[0], mp[0]
    fp = mp + (1j * q)[:, None, None] * m
    return assemble_jost(bc, m, fp)


def jost_matrix(V: PotentialModel, bc: BoundaryPair, k, config: SolverConfig = DEFAULT_CONFIG) -> JostEval:
    J = jost_matrices(V, bc, [k], config)[0]
    return JostEval(k=complex(k), J=J, detJ=complex(np.linalg.det(J)))


def det_jost(V: PotentialModel, bc: BoundaryPair, ks, config: SolverConfig = DEFAULT_CONFIG) -> np.ndarray:
    return np.linalg.det(jost_matrices(V, bc, ks, config))


def wronskian(V: PotentialModel, bc: BoundaryPair, k, grid, config: SolverConfig = DEFAULT_CONFIG) -> np.ndarray:
    """[f(-k*, x)^+; phi(k, x)] on ``grid``; constant in x for exact solutions."""
    k = complex(k)
    q = -np.conj(k)
    jost = jost_solution(V, q, grid, zero_energy=(q == 0), config=config)
    reg = regular_solution(V, bc, k, grid, config)
    F = np.conj(np.swapaxes(jost.f, -1, -2))
    Fp = np.conj(np.swapaxes(jost.fprime, -1, -2))
    return F @ reg.phiprime - Fp @ reg.phi


def wronskian_drift(V: PotentialModel, bc: BoundaryPair, k, grid=None,
                    config: SolverConfig = DEFAULT_CONFIG) -> float:
    """max_x ||[f(-k*, x)^+; phi(k, x)] - J(k)|| over ``grid``."""
    if grid is None:
        x_max = choose_x_max(V, config)
        grid = np.linspace(0.0, min(x_max, 10.0) if x_max > 0 else 10.0, 101)
    W = wronskian(V, bc, k, grid, config)
    J = jost_matrix(V, bc, k, config).J
    return float(np.max(np.linalg.norm(W - J, 2, axis=(-2, -1))))
