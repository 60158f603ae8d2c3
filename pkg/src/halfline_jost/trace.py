"""Normalized Jost determinant h(k), its branch-tracked logarithm, and the trace identities.

For each order q the identity reads ``eigen_sum + sign * integral = rhs``:

* q = 1:      sum |kappa| - (1/pi) int_0^oo ln_e h dk = e_1 / 4
* q = 2j+1:   sum |kappa|^q + (-1)^(j+1) (q/pi) int_0^oo (ln_e h - S_even) k^(2j) dk
              = q e_q / 2^(q+1)
* q = 2j:     sum |kappa|^q + (-1)^j (q/pi) int_0^oo (-i ln_o h - S_odd) k^(2j-1) dk
              = -j e_q / 2^q

where S_even, S_odd are the leading terms of the high-energy expansion of
ln h removed to make the integrals converge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import solve
from .bc import BoundaryPair
from .errors import BranchAmbiguity, InsufficientEOrder, InvalidInput, QuadratureBudgetExceeded
from .potential import PotentialModel
from .series import CoeffTables
from .spectrum import SpectrumResult

GAUSS_ORDER = 16
PANEL_RATIO = 2.0
TRACE_CONFIG = solve.SolverConfig(rtol=1e-12, atol=1e-12, tail_tol=1e-13)

_GL_X, _GL_W = np.polynomial.legendre.leggauss(GAUSS_ORDER)


def h_value(V: PotentialModel, bc: BoundaryPair, tables: CoeffTables, k,
            config: solve.SolverConfig = TRACE_CONFIG):
    """h(k) = det J(k) / (c2 k^p) for nonzero real k (scalar or array)."""
    k = np.asarray(k, dtype=float)
    if np.any(k == 0):
        raise InvalidInput("h is evaluated at nonzero real k only")
    flat = k.ravel()
    d = solve.det_jost(V, bc, flat.astype(complex), config)
    out = d / (tables.c2 * flat.astype(complex) ** tables.p)
    return out.reshape(k.shape) if k.ndim else complex(out[0])


# integrands ------------------------------------------------------------------------

def _split(lnh_plus, lnh_minus):
    even = 0.5 * (lnh_plus + lnh_minus)
    odd = 0.5 * (lnh_plus - lnh_minus)
    return even, odd


def required_e_order(q: int) -> int:
    """Highest e_l entering the identity of order q together with its closed-form tail."""
    return q


def _sign(q: int) -> int:
    j = q // 2
    if q == 1:
        return -1
    return (-1) ** (j + 1) if q % 2 else (-1) ** j


def _rhs(tables: CoeffTables, q: int) -> complex:
    j = q // 2
    if q % 2:
        return q * tables.e_coeff(q) / 2 ** (q + 1)
    return -j * tables.e_coeff(q) / 2 ** q


def _subtracted(tables: CoeffTables, q: int, k):
    """The asymptotic terms removed from the integrand of order q."""
    k = np.asarray(k, dtype=float)
    j = q // 2
    out = np.zeros(k.shape, dtype=complex)
    if q % 2:
        for l in range(1, j + 1):
            out += (-1) ** l * tables.e_coeff(2 * l) / (2 * k) ** (2 * l)
    else:
        for l in range(0, j):
            out += (-1) ** (l + 1) * tables.e_coeff(2 * l + 1) / (2 * k) ** (2 * l + 1)
    return out


def integrand(tables: CoeffTables, q: int, k, lnh_plus, lnh_minus):
    """Regularized integrand of order q (complex; its real part carries the identity)."""
    k = np.asarray(k, dtype=float)
    even, odd = _split(lnh_plus, lnh_minus)
    j = q // 2
    if q % 2:
        return (even - _subtracted(tables, q, k)) * k ** (2 * j)
    return (-1j * odd - _subtracted(tables, q, k)) * k ** (2 * j - 1)


def tail_integral(tables: CoeffTables, q: int, K: float, order: int | None = None):
    """int_K^oo of the integrand of order q using the e-series; (value, last-term size)."""
    order = len(tables.e) if order is None else min(order, len(tables.e))
    j = q // 2
    terms = []
    if q % 2:
        for l in range(j + 1, order // 2 + 1):
            terms.append((-1) ** l * tables.e_coeff(2 * l) * 2.0 ** (-2 * l)
                         * K ** (2 * j - 2 * l + 1) / (2 * l - 2 * j - 1))
    else:
        for l in range(j, (order - 1) // 2 + 1):
            terms.append((-1) ** (l + 1) * tables.e_coeff(2 * l + 1) * 2.0 ** (-2 * l - 1)
                         * K ** (2 * j - 2 * l - 1) / (2 * l + 1 - 2 * j))
    if not terms:
        return 0j, math.inf
    return complex(sum(terms)), float(abs(terms[-1]))


def choose_k_max(tables: CoeffTables, q_max: int, tol: float = 1e-10, k_floor: float = 20.0,
                 k_cap: float = 1e4) -> float:
    """Smallest K = k_floor 2^m whose closed-form tails are accurate to ``tol`` (relative).

    The floor is raised to 8 times the convergence radius r of the e-series
    so the expansion is used well inside its domain; the first omitted tail
    term is estimated as the last included one times (r/K)^2.
    """
    r = _e_radius(tables)
    K = max(k_floor, 8.0 * r)
    while K <= k_cap:
        if all(tail_truncation(tables, q, K) <= tol * max(1.0, abs(_rhs(tables, q)))
               for q in range(1, q_max + 1)):
            return K
        K *= 2.0
    raise QuadratureBudgetExceeded(f"no k_max <= {k_cap} makes the e-series tail smaller than {tol}",
                                   {"k_cap": k_cap})


def tail_truncation(tables: CoeffTables, q: int, K: float) -> float:
    """Estimated size of the first e-series term omitted from :func:`tail_integral`."""
    _, last = tail_integral(tables, q, K)
    if not math.isfinite(last):
        return 0.0 if not np.any(tables.e) else math.inf
    return last * (_e_radius(tables) / K) ** 2


def _e_radius(tables: CoeffTables) -> float:
    """Rough convergence radius of the series in 1/(2k), from the growth of |e_l|."""
    mags = [abs(v) ** (1.0 / l) for l, v in enumerate(tables.e, start=1) if v != 0]
    return 0.5 * max(mags) if mags else 0.0


# log profile -----------------------------------------------------------------------

@dataclass
class LogHProfile:
    """ln h on composite Gauss-Legendre panels covering [k_lo, k_max] on both half-axes."""

    edges: np.ndarray                 # panel edges, ascending
    k_grid: np.ndarray                # all nodes, ascending
    lnh_plus: np.ndarray
    lnh_minus: np.ndarray
    k_lo: float
    k_max: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def even(self) -> np.ndarray:
        return _split(self.lnh_plus, self.lnh_minus)[0]

    @property
    def odd(self) -> np.ndarray:
        return _split(self.lnh_plus, self.lnh_minus)[1]

    def panel_nodes(self, a: float, b: float) -> np.ndarray:
        return 0.5 * (b - a) * _GL_X + 0.5 * (b + a)

    def _lookup(self, ks):
        idx = np.searchsorted(self.k_grid, ks)
        return self.lnh_plus[idx], self.lnh_minus[idx]

    def integrate(self, func):
        """(integral over [k_lo, k_max], error estimate, per-panel error) of func(k, ln h+, ln h-).

        Each panel is integrated on its two halves; the difference from the
        single-panel rule is the error estimate.
        """
        total, per = 0j, []
        for a, b in zip(self.edges[:-1], self.edges[1:]):
            m = 0.5 * (a + b)
            halves = self._panel(func, a, m) + self._panel(func, m, b)
            per.append(abs(halves - self._panel(func, a, b)))
            total += halves
        per = np.array(per)
        return total, float(per.sum()), per

    def _panel(self, func, a, b):
        ks = self.panel_nodes(a, b)
        lp, lm = self._lookup(ks)
        return 0.5 * (b - a) * np.dot(_GL_W, func(ks, lp, lm))

    def low_end(self, func):
        """int_0^{k_lo} from a fit alpha + beta ln k on the first panel; (value, error)."""
        a, b = self.edges[0], self.edges[1]
        ks = self.panel_nodes(a, b)
        lp, lm = self._lookup(ks)
        g = func(ks, lp, lm)
        X = np.stack([np.ones_like(ks), np.log(ks)], axis=1)
        coef, *_ = np.linalg.lstsq(X.astype(complex), g, rcond=None)
        alpha, beta = coef
        k0 = self.k_lo
        val = alpha * k0 + beta * k0 * (math.log(k0) - 1.0)
        misfit = float(np.max(np.abs(g - X @ coef)))
        return complex(val), 10.0 * misfit * k0

    def to_rows(self):
        """Rows (k, Re ln h, Im ln h, ln_e h, -i ln_o h) for plotting."""
        even, odd = self.even, self.odd
        m = -1j * odd
        return [(float(k), float(l.real), float(l.imag), float(e.real), float(o.real))
                for k, l, e, o in zip(self.k_grid, self.lnh_plus, even, m)]


def noise_floor(profile: LogHProfile, tables: CoeffTables, q: int, rel: float) -> np.ndarray:
    """Per-panel size of rounding noise: rel * width * max k^(q-1) (|ln h| + |subtracted terms|)."""
    out = []
    for a, b in zip(profile.edges[:-1], profile.edges[1:]):
        ks = profile.panel_nodes(a, b)
        lp, lm = profile._lookup(ks)
        mag = (np.abs(lp) + np.abs(lm) + np.abs(_subtracted(tables, q, ks))) * ks ** (q - 1)
        out.append(rel * (b - a) * float(np.max(mag)))
    return q / math.pi * np.array(out)


class _LogTracker:
    """Caches h on one half-axis and builds a continuous logarithm anchored at large |k|."""

    def __init__(self, hfunc, sign: int, tables: CoeffTables, step_floor: float = 1e-12):
        self.hfunc = hfunc
        self.sign = sign
        self.tables = tables
        self.cache: dict[float, complex] = {}
        self.step_floor = step_floor
        self.bisections = 0

    def values(self, ks: np.ndarray) -> np.ndarray:
        missing = np.array([k for k in ks if k not in self.cache])
        if len(missing):
            vals = self.hfunc(self.sign * missing)
            self.cache.update(zip(missing.tolist(), np.atleast_1d(vals).tolist()))
        return np.array([self.cache[k] for k in ks])

    def _step(self, k_hi, h_hi, k_lo, h_lo, depth=0):
        """Phase change of h from k_hi to k_lo, bisecting while it exceeds pi/2."""
        d = float(np.angle(h_lo / h_hi))
        if abs(d) <= math.pi / 2:
            return d
        if abs(k_hi - k_lo) <= self.step_floor * max(1.0, k_hi) or depth > 60:
            if abs(d) >= math.pi - 1e-12:
                raise BranchAmbiguity(f"phase of h jumps by {d:.3f} near k={self.sign * k_lo:.6g}")
            return d
        mid = 0.5 * (k_hi + k_lo)
        h_mid = complex(self.values(np.array([mid]))[0])
        self.bisections += 1
        return (self._step(k_hi, h_hi, mid, h_mid, depth + 1)
                + self._step(mid, h_mid, k_lo, h_lo, depth + 1))

    def log(self, ks_asc: np.ndarray) -> np.ndarray:
        """Continuous ln h(sign*k) on ascending ks, anchored at the largest k."""
        h = self.values(ks_asc)
        kt = ks_asc[-1]
        ref = complex(self.tables.lnh_series(self.sign * kt))
        principal = np.log(h[-1])
        turns = round((ref.imag - principal.imag) / (2 * math.pi))
        phase = np.empty(len(ks_asc))
        phase[-1] = principal.imag + 2 * math.pi * turns
        for i in range(len(ks_asc) - 2, -1, -1):
            phase[i] = phase[i + 1] + self._step(ks_asc[i + 1], h[i + 1], ks_asc[i], h[i])
        return np.log(np.abs(h)) + 1j * phase


def log_h_profile(V: PotentialModel, bc: BoundaryPair, tables: CoeffTables, k_min: float = 1e-6,
                  k_max: float | None = None, q_max: int = 4, tol: float = 1e-11,
                  tail_tol: float = 1e-8, max_nodes: int = 40000, branch_floor: float = 1e-12,
                  config: solve.SolverConfig = TRACE_CONFIG) -> LogHProfile:
    """Branch-tracked ln h(+-k) on adaptive composite Gauss-Legendre panels.

    Panels are geometric (ratio 2) on [k_min, k_max]; a panel is split while
    the Gauss rule on it and on its two halves differ by more than ``tol``
    (relative to the identity's scale) for any integrand of order <= q_max.
    """
    if not (0 < k_min < (k_max if k_max is not None else math.inf)):
        raise InvalidInput("need 0 < k_min < k_max")
    for q in range(1, q_max + 1):
        if required_e_order(q) > len(tables.e):
            raise InsufficientEOrder(f"order q={q} needs e_{q}, tables stop at e_{len(tables.e)}")
    if k_max is None:
        k_max = choose_k_max(tables, q_max)
    else:
        bad = {q: tail_truncation(tables, q, k_max) for q in range(1, q_max + 1)
               if tail_truncation(tables, q, k_max) > tail_tol * max(1.0, abs(_rhs(tables, q)))}
        if bad:
            raise QuadratureBudgetExceeded(
                f"k_max={k_max} is too small for the e-series tail correction",
                {"k_max": k_max, "tail_estimates": bad, "suggested_k_max": choose_k_max(tables, q_max)})

    def hfunc(ks):
        return h_value(V, bc, tables, ks, config)

    noise = 100 * np.finfo(float).eps if V.is_zero else 10 * config.rtol
    plus = _LogTracker(hfunc, +1, tables, branch_floor)
    minus = _LogTracker(hfunc, -1, tables, branch_floor)
    m = max(1, int(math.ceil(math.log(k_max / k_min) / math.log(PANEL_RATIO))))
    edges = list(np.geomspace(k_min, k_max, m + 1))
    scales = [max(1.0, abs(_rhs(tables, q))) for q in range(1, q_max + 1)]

    def build(edges_):
        nodes = []
        for a, b in zip(edges_[:-1], edges_[1:]):
            for lo, hi in ((a, b), (a, 0.5 * (a + b)), (0.5 * (a + b), b)):
                nodes.append(0.5 * (hi - lo) * _GL_X + 0.5 * (hi + lo))
        ks = np.unique(np.concatenate(nodes))
        return LogHProfile(np.array(edges_), ks, plus.log(ks), minus.log(ks), k_min, k_max)

    rounds = 0
    while True:
        prof = build(edges)
        if len(prof.k_grid) > max_nodes:
            raise QuadratureBudgetExceeded(f"adaptive quadrature exceeded {max_nodes} nodes",
                                           {"panels": len(edges) - 1, "rounds": rounds})
        split = np.zeros(len(edges) - 1, dtype=bool)
        for q, s in zip(range(1, q_max + 1), scales):
            _, _, per = prof.integrate(lambda k, lp, lm, q=q: integrand(tables, q, k, lp, lm))
            floor = noise_floor(prof, tables, q, noise)
            split |= per * (q / math.pi) > tol * s + floor
        if not split.any():
            break
        new = []
        for i, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
            new.append(a)
            if split[i]:
                new.append(0.5 * (a + b))
        new.append(edges[-1])
        edges = new
        rounds += 1
    sym = np.max(np.abs(prof.lnh_minus - np.conj(prof.lnh_plus))) if len(prof.k_grid) else 0.0
    prof.diagnostics = {"panels": len(edges) - 1, "nodes": int(len(prof.k_grid)), "rounds": rounds,
                        "bisections": plus.bisections + minus.bisections,
                        "conjugate_symmetry": float(sym),
                        "anchor_mismatch": float(abs(prof.lnh_plus[-1] - tables.lnh_series(prof.k_grid[-1])))}
    return prof


def log_h_on_grid(V: PotentialModel, bc: BoundaryPair, tables: CoeffTables, ks,
                  config: solve.SolverConfig = TRACE_CONFIG) -> LogHProfile:
    """Continuous ln h(+-k) on an arbitrary positive grid (for plotting).

    The march starts at an anchor above the grid where the e-series fixes the
    branch, so the grid itself may stop at any k.
    """
    ks = np.unique(np.asarray(ks, dtype=float))
    if len(ks) == 0 or ks[0] <= 0:
        raise InvalidInput("plot grid must be a nonempty set of positive wavenumbers")
    anchor = max(choose_k_max(tables, 1), 2 * ks[-1])
    bridge = np.geomspace(ks[-1], anchor, 64)[1:]
    full = np.concatenate([ks, bridge])

    def hfunc(x):
        return h_value(V, bc, tables, x, config)

    lp = _LogTracker(hfunc, +1, tables).log(full)[: len(ks)]
    lm = _LogTracker(hfunc, -1, tables).log(full)[: len(ks)]
    return LogHProfile(np.array([ks[0], ks[-1]]), ks, lp, lm, ks[0], ks[-1])


# identities ------------------------------------------------------------------------

@dataclass
class TraceRow:
    q: int
    eigen_sum: float
    integral: float
    rhs: float
    residual: float
    rel_residual: float
    diagnostics: dict

    @property
    def lhs(self) -> float:
        return self.eigen_sum + self.diagnostics["sign"] * self.integral

    def to_report(self) -> dict:
        return {"q": self.q, "eigen_sum": self.eigen_sum, "integral": self.integral, "rhs": self.rhs,
                "residual": self.residual, "rel_residual": self.rel_residual,
                "diagnostics": self.diagnostics}


def identity_residual(profile: LogHProfile, spectrum: SpectrumResult, tables: CoeffTables, q: int) -> TraceRow:
    """Both sides of the trace identity of order q.

    ``integral`` is (q/pi) times the regularized integral, so that
    lhs = eigen_sum + sign * integral with the sign recorded in diagnostics.
    Integrals are computed in complex arithmetic; the real part is reported
    and the imaginary part kept as a diagnostic.
    """
    if q < 1:
        raise InvalidInput("q must be a positive integer")
    if required_e_order(q) > len(tables.e):
        raise InsufficientEOrder(f"order q={q} needs e_{q}, tables stop at e_{len(tables.e)}")

    def f(k, lp, lm):
        return integrand(tables, q, k, lp, lm)

    body, body_err, _ = profile.integrate(f)
    low, low_err = profile.low_end(f)
    tail, tail_last = tail_integral(tables, q, profile.k_max)
    total = body + low + tail
    integral_c = q / math.pi * total
    rhs_c = _rhs(tables, q)
    sign = _sign(q)
    eigen_sum = spectrum.power_sum(q)
    lhs = eigen_sum + sign * integral_c.real
    rhs = float(rhs_c.real)
    residual = abs(lhs - rhs)
    rel = residual / abs(rhs) if rhs != 0 else residual
    diag = {
        "sign": sign,
        "lhs": lhs,
        "integral_imag": float(integral_c.imag),
        "rhs_imag": float(rhs_c.imag),
        "quadrature_error": q / math.pi * body_err,
        "low_end": q / math.pi * abs(low),
        "low_end_error": q / math.pi * low_err,
        "tail_correction": q / math.pi * abs(tail),
        "tail_bound": q / math.pi * (tail_last if math.isfinite(tail_last) else 0.0),
        "k_range": [profile.k_lo, profile.k_max],
        "rel_basis": "relative" if rhs != 0 else "absolute",
    }
    return TraceRow(q, float(eigen_sum), float(integral_c.real), rhs, float(residual), float(rel), diag)


@dataclass
class TraceReport:
    rows: list
    tables: CoeffTables
    spectrum: SpectrumResult
    profile: LogHProfile
    provenance: dict

    def max_rel_residual(self) -> float:
        return max((r.rel_residual for r in self.rows), default=0.0)

    def to_report(self) -> dict:
        return {"orders": [r.to_report() for r in self.rows], "e": self.tables.to_report()["e"],
                "c2": self.tables.to_report()["c2"], "p": self.tables.p,
                "spectrum": self.spectrum.to_report(), "provenance": self.provenance}


def full_report(V: PotentialModel, bc: BoundaryPair, q_max: int = 4, N: int | None = None,
                k_min: float = 1e-6, k_max: float | None = None, kappa_max: float | None = None,
                tol: float = 1e-11, tail_tol: float = 1e-8, nullity_rtol: float = 1e-6,
                branch_floor: float = 1e-12, config: solve.SolverConfig = TRACE_CONFIG) -> TraceReport:
    """Spectrum, coefficient chain, log profile and identity rows for q = 1..q_max."""
    from .series import coefficient_tables
    from .spectrum import compute_spectrum

    N = max(8, q_max) if N is None else N
    if N < q_max:
        raise InsufficientEOrder(f"series order N={N} is below q_max={q_max}")
    tables = coefficient_tables(V, bc, N=N)
    bound_states = compute_spectrum(V, bc, kappa_max=kappa_max, nullity_rtol=nullity_rtol)
    prof = log_h_profile(V, bc, tables, k_min=k_min, k_max=k_max, q_max=q_max, tol=tol, tail_tol=tail_tol,
                         branch_floor=branch_floor, config=config)
    rows = [identity_residual(prof, bound_states, tables, q) for q in range(1, q_max + 1)]
    provenance = {"N": N, "q_max": q_max, "k_min": k_min, "k_max": prof.k_max,
                  "ode_rtol": config.rtol, "ode_atol": config.atol, "quad_tol": tol, "tail_tol": tail_tol,
                  "kappa_max": bound_states.kappa_max, "profile": prof.diagnostics}
    return TraceReport(rows, tables, bound_states, prof, provenance)
