"""Bound states as zeros of det J(i kappa), half-bound states, and a finite-difference oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import solve
from .bc import BoundaryPair, reduce_to_diagonal
from .errors import (InconsistentMu, InvalidInput, MeshTooCoarse, MultiplicityMismatch,
                     ScanResolutionTooCoarse)
from .potential import PotentialModel, evaluate

NULLITY_RTOL = 1e-6
KAPPA_MARGIN = 1.2


@dataclass
class SpectrumResult:
    eigen: list  # [(kappa, multiplicity)]
    mu: int | None = None
    c1_fit: complex | None = None
    c3_fit: dict = field(default_factory=dict)
    kappa_max: float | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def total(self) -> int:
        return int(sum(m for _, m in self.eigen))

    @property
    def kappas(self) -> np.ndarray:
        return np.array([k for k, _ in self.eigen], dtype=float)

    def power_sum(self, q: float) -> float:
        """sum over eigenvalues, repeated by multiplicity, of kappa**q."""
        return float(sum(m * k ** q for k, m in self.eigen))

    def to_report(self) -> dict:
        return {
            "eigen": [{"kappa": float(k), "mult": int(m)} for k, m in self.eigen],
            "mu": None if self.mu is None else int(self.mu),
            "N": self.total,
        }


def kappa_max_default(V: PotentialModel, bc: BoundaryPair) -> float:
    """Upper bound on kappa for any eigenvalue -kappa^2.

    In the diagonal frame H >= -(c^2 + sup||V||) with c = max(0, max_j cot theta_j),
    from |psi(0)|^2 <= eps ||psi'||^2 + ||psi||^2 / eps.  A 20% margin is added.
    """
    diag = reduce_to_diagonal(bc)
    cot = [math.cos(t) / math.sin(t) for t in diag.theta if abs(math.sin(t)) > 1e-15]
    c = max([0.0] + cot)
    bound = c * c + V.sup_norm_bound()
    return max(1.0, math.sqrt(KAPPA_MARGIN * bound) if bound > 0 else 1.0)


def det_on_imaginary_axis(V: PotentialModel, bc: BoundaryPair, kappa_grid,
                          config: solve.SolverConfig = solve.DEFAULT_CONFIG):
    """(kappa, det J(i kappa)) for every kappa > 0 in the grid."""
    kappa = np.asarray(kappa_grid, dtype=float)
    if np.any(kappa <= 0):
        raise InvalidInput("kappa grid must be positive")
    return kappa, solve.det_jost(V, bc, 1j * kappa, config)


def nullity(J: np.ndarray, rtol: float = NULLITY_RTOL, scale: float | None = None) -> int:
    """Number of singular values below ``rtol * max(sigma_max, scale)``.

    ``scale`` supplies a reference size when J itself may be tiny (n = 1).
    """
    s = np.linalg.svd(J, compute_uv=False)
    ref = max(s[0], scale or 0.0)
    if ref == 0:
        return len(s)
    return int(np.sum(s < rtol * ref))


def _free_scale(bc: BoundaryPair, k) -> float:
    """Norm of the free Jost matrix B - ikA, used as the nullity reference."""
    return float(np.linalg.norm(bc.B, 2) + abs(k) * np.linalg.norm(bc.A, 2))


def winding_number(func, points: np.ndarray, max_rounds: int = 12) -> tuple[int, np.ndarray, np.ndarray]:
    """Winding number of func around 0 along the closed polygon ``points``.

    Segments whose phase step exceeds pi/4 are bisected until resolved.
    Returns (winding, points, values).
    """
    pts = np.asarray(points, dtype=complex)
    vals = func(pts)
    for _ in range(max_rounds):
        nxt = np.roll(vals, -1)
        step = np.abs(np.angle(nxt / vals))
        bad = np.nonzero(step > math.pi / 4)[0]
        if len(bad) == 0:
            break
        mids = 0.5 * (pts[bad] + np.roll(pts, -1)[bad])
        mvals = func(mids)
        pts = np.insert(pts, bad + 1, mids)
        vals = np.insert(vals, bad + 1, mvals)
    total = np.sum(np.angle(np.roll(vals, -1) / vals))
    return int(round(total / (2 * math.pi))), pts, vals


def _circle(center: complex, r: float, m: int = 48) -> np.ndarray:
    return center + r * np.exp(2j * math.pi * np.arange(m) / m)


def _rectangle(lo: float, hi: float, w: float, m: int = 60) -> np.ndarray:
    bottom = np.linspace(-w, w, m, endpoint=False) + 1j * lo
    right = w + 1j * np.linspace(lo, hi, 2 * m, endpoint=False)
    top = np.linspace(w, -w, m, endpoint=False) + 1j * hi
    left = -w + 1j * np.linspace(hi, lo, 2 * m, endpoint=False)
    return np.concatenate([bottom, right, top, left])


def _newton_on_axis(detf, kappa, mult, tol, lo, hi, max_iter=80):
    """Modified Newton for kappa -> det J(i kappa) near a zero of order ``mult``."""
    for _ in range(max_iter):
        h = 1e-6 * max(1.0, kappa)
        f_m, f0, f_p = detf(1j * np.array([kappa - h, kappa, kappa + h]))
        fp = (f_p - f_m) / (2 * h)
        if f0 == 0:
            return kappa, True
        if fp == 0:
            return kappa, False
        step = mult * (f0 / fp).real
        new = kappa - step
        if not (lo <= new <= hi):
            new = min(max(new, lo), hi)
            if new in (lo, hi):
                return new, False
        kappa = new
        if abs(step) <= tol * max(1.0, kappa):
            return kappa, True
    return kappa, False


def find_eigenvalues(V: PotentialModel, bc: BoundaryPair, kappa_max: float | None = None,
                     tol: float = 1e-11, config: solve.SolverConfig = solve.DEFAULT_CONFIG,
                     scan_points: int = 240, max_refinements: int = 4,
                     count_check: bool = True, nullity_rtol: float = NULLITY_RTOL) -> SpectrumResult:
    """Locate all zeros of det J(i kappa) on (kappa_lo, kappa_max] with multiplicities.

    Candidates are local minima of |det| on a scan grid; each is polished by
    Newton's method, its multiplicity taken from the SVD nullity of J and
    cross-checked against the winding number of det J around a small circle.
    A winding number around a rectangle enclosing the scanned segment checks
    that no zero was missed; on mismatch the scan is refined.
    """
    kappa_max = kappa_max_default(V, bc) if kappa_max is None else float(kappa_max)
    kappa_lo = 1e-4 * kappa_max

    def detf(ks):
        return solve.det_jost(V, bc, ks, config)

    def jost(k):
        return solve.jost_matrices(V, bc, [k], config)[0]

    expected = None
    if count_check:
        w = 0.25 * kappa_max
        expected, _, _ = winding_number(detf, _rectangle(kappa_lo, kappa_max, w))

    points = scan_points
    history = []
    for _ in range(max_refinements + 1):
        grid = np.unique(np.concatenate([np.geomspace(kappa_lo, kappa_max, points // 6),
                                         np.linspace(kappa_lo, kappa_max, points)]))
        _, dets = det_on_imaginary_axis(V, bc, grid, config)
        mag = np.abs(dets)
        idx = [i for i in range(1, len(grid) - 1) if mag[i] <= mag[i - 1] and mag[i] <= mag[i + 1]]
        if mag[-1] < mag[-2]:
            idx.append(len(grid) - 1)
        roots = []
        for i in idx:
            lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
            kap, ok = _newton_on_axis(detf, grid[i], 1, tol, lo, hi)
            if not ok:
                continue
            spacing = hi - lo
            r = min(0.5 * kap, max(spacing, 1e-3 * kap))
            wind, _, _ = winding_number(detf, _circle(1j * kap, r))
            if wind <= 0:
                continue
            if wind > 1:
                kap, _ = _newton_on_axis(detf, kap, wind, tol, lo, hi)
            if any(abs(kap - k0) <= 1e-8 * max(1.0, kap) for k0, _ in roots):
                continue
            roots.append((kap, wind))
        roots.sort()
        history.append((points, len(roots), sum(m for _, m in roots)))
        if expected is None or sum(m for _, m in roots) == expected:
            break
        points *= 2
    else:
        raise ScanResolutionTooCoarse(
            f"scan found {history[-1][2]} zeros, contour count is {expected}; history {history}")

    eigen, c3 = [], {}
    for kap, wind in roots:
        null = nullity(jost(1j * kap), nullity_rtol, _free_scale(bc, 1j * kap))
        r = 1e-3 * kap
        ring = _circle(1j * kap, r, 16)
        vals = detf(ring)
        c3[kap] = {"c3": complex(np.mean(vals / (ring - 1j * kap) ** wind)), "order": wind, "nullity": null}
        if null != wind:
            raise MultiplicityMismatch(f"at kappa={kap:.12g}: SVD nullity {null} but local order {wind}")
        eigen.append((float(kap), int(null)))
    return SpectrumResult(eigen=eigen, c3_fit=c3, kappa_max=kappa_max,
                          diagnostics={"contour_count": expected, "scan_history": history,
                                       "kappa_lo": kappa_lo})


def half_bound_count(V: PotentialModel, bc: BoundaryPair, config: solve.SolverConfig = solve.DEFAULT_CONFIG,
                     k_fit=None, slope_tol: float = 0.1, nullity_rtol: float = NULLITY_RTOL):
    """(mu, c1_fit, slope): nullity of J(0) and the low-energy exponent of det J(k)."""
    J0 = solve.jost_matrices(V, bc, [0.0], config)[0]
    mu = nullity(J0, nullity_rtol, _free_scale(bc, 0.0))
    ks = np.geomspace(1e-5, 1e-3, 5) if k_fit is None else np.asarray(k_fit, dtype=float)
    dets = solve.det_jost(V, bc, ks, config)
    slope = float(np.polyfit(np.log(ks), np.log(np.abs(dets)), 1)[0])
    if abs(slope - mu) > slope_tol:
        raise InconsistentMu(f"nullity of J(0) is {mu} but det J(k) ~ k^{slope:.3f} as k -> 0")
    c1 = complex(dets[0] / ks[0] ** mu)
    return mu, c1, slope


def compute_spectrum(V: PotentialModel, bc: BoundaryPair, kappa_max: float | None = None,
                     config: solve.SolverConfig = solve.DEFAULT_CONFIG, **kwargs) -> SpectrumResult:
    res = find_eigenvalues(V, bc, kappa_max=kappa_max, config=config, **kwargs)
    mu, c1, slope = half_bound_count(V, bc, config, nullity_rtol=kwargs.get("nullity_rtol", NULLITY_RTOL))
    res.mu, res.c1_fit = mu, c1
    res.diagnostics["low_energy_slope"] = slope
    return res


# finite-difference oracle --------------------------------------------------------

@dataclass
class FDResult:
    eigenvalues: np.ndarray          # Richardson-extrapolated
    coarse: np.ndarray               # mesh h
    fine: np.ndarray                 # mesh h/2
    error_estimate: np.ndarray
    L: float
    h: float

    @property
    def kappas(self) -> np.ndarray:
        return np.sqrt(-self.eigenvalues)


def _fd_matrix(Vt: PotentialModel, theta: np.ndarray, L: float, h: float):
    """Symmetric FD operator for channelwise Robin/Dirichlet conditions at 0, Dirichlet at L.

    Unknowns are node-major; node 0 carries only the non-Dirichlet channels
    and gets mass weight 1/2 from the ghost-point closure.
    """
    n = Vt.n
    m = int(round(L / h))
    x = h * np.arange(m)  # psi(L) = 0
    dirichlet = np.isclose(theta, math.pi, atol=1e-12)
    cot = np.where(dirichlet, 0.0, np.cos(theta) / np.where(dirichlet, 1.0, np.sin(theta)))
    present = np.ones((m, n), dtype=bool)
    present[0] = ~dirichlet
    index = np.full((m, n), -1)
    index[present] = np.arange(present.sum())
    count = int(present.sum())
    weight = np.ones((m, n))
    weight[0] = 0.5
    w = weight[present]
    inv_h2 = 1.0 / h ** 2

    diag = np.full((m, n), 2.0 * inv_h2) * weight
    diag[0] -= cot / h  # ghost-point Robin term, already halved
    rows = [index[present]]
    cols = [index[present]]
    vals = [diag[present].astype(complex)]
    link = present[:-1] & present[1:]
    up, dn = index[:-1][link], index[1:][link]
    rows += [up, dn]
    cols += [dn, up]
    vals += [np.full(len(up), -inv_h2, complex)] * 2
    if Vt.terms:
        Vx = evaluate(Vt, x) * weight[:, :, None]
        both = present[:, :, None] & present[:, None, :]
        ii = np.broadcast_to(index[:, :, None], both.shape)[both]
        jj = np.broadcast_to(index[:, None, :], both.shape)[both]
        rows.append(ii)
        cols.append(jj)
        vals.append(Vx[both])
    K = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(count, count)).tocsr()
    s = sp.diags(1.0 / np.sqrt(w))
    return (s @ K @ s).tocoo()


def _banded_negative_eigs(S, lower: float) -> np.ndarray:
    N = S.shape[0]
    u = int(np.max(np.abs(S.col - S.row))) if S.nnz else 0
    band = np.zeros((u + 1, N), dtype=complex)
    mask = S.col >= S.row
    band[u + S.row[mask] - S.col[mask], S.col[mask]] += S.data[mask]
    return scipy.linalg.eig_banded(band, lower=False, eigvals_only=True, select="v",
                                   select_range=(lower, 0.0))


def fd_oracle_spectrum(V: PotentialModel, bc: BoundaryPair, L: float | None = None, h: float = 0.01,
                       truncation_tol: float = 1e-9, L_cap: float = 400.0) -> FDResult:
    """Negative eigenvalues from a second-order finite-difference discretization.

    Works in the diagonal boundary frame (V -> M^+ V M) with ghost-point
    Robin closures; results at h and h/2 are Richardson-extrapolated.  The
    error model is O(h^2) + exp(-2 kappa L).  With ``L=None`` the domain
    starts at 40 and grows until exp(-2 kappa_min L) < truncation_tol.
    """
    diag = reduce_to_diagonal(bc)
    Vt = V.transformed(diag.M.conj().T)
    lower = -(KAPPA_MARGIN * kappa_max_default(V, bc) ** 2) - 1.0
    auto = L is None
    L = 40.0 if auto else float(L)
    while True:
        coarse = np.sort(_banded_negative_eigs(_fd_matrix(Vt, diag.theta, L, h), lower))
        fine = np.sort(_banded_negative_eigs(_fd_matrix(Vt, diag.theta, L, h / 2), lower))
        if len(coarse) != len(fine):
            raise MeshTooCoarse(f"mesh h={h} finds {len(coarse)} eigenvalues, h/2 finds {len(fine)}")
        if not auto or len(fine) == 0:
            break
        kappa_min = math.sqrt(-fine[-1])
        need = -math.log(truncation_tol) / (2 * kappa_min)
        if need <= L or L >= L_cap:
            break
        L = min(L_cap, math.ceil(need))
    rich = (4 * fine - coarse) / 3
    return FDResult(eigenvalues=rich, coarse=coarse, fine=fine, error_estimate=np.abs(fine - rich), L=L, h=h)
