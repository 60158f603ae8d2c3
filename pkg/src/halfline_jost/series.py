"""High-energy coefficient chain b_l(x) -> c_l -> d_l -> (c2, e_l).

m(k, x) ~ sum_l b_l(x) / (2ik)^l with b_0 = I and
b_{l+1} = -b_l' - int_x^inf V b_l.  Values of b_l live on piecewise
Chebyshev panels; derivatives are never obtained by numerical
differentiation but propagated algebraically through

    b_{l+1}^{(j)} = -b_l^{(j+1)} + sum_i C(j-1, i) V^{(i)} b_l^{(j-1-i)},  j >= 1.

Each level therefore needs one more derivative of the previous level, so
level l carries derivatives up to order L - l when levels 0..L are built.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np
from numpy.polynomial import chebyshev as C

from .bc import BoundaryPair, DiagonalBC, reduce_to_diagonal
from .errors import (LeadingCoefficientZero, QuadratureFailure, SmoothnessRequired,
                     TruncationTooShort)
from .laurent import LaurentSeries
from .potential import PotentialModel, evaluate
from . import solve

DEFAULT_ORDER = 8
PANEL_DEGREE = 32


# Chebyshev panel grid --------------------------------------------------------

@dataclass(frozen=True)
class PanelGrid:
    """Piecewise Chebyshev-Lobatto grid on [0, x_max].

    ``nodes`` has shape (P, deg+1), ascending within each panel; panel
    endpoints are shared, so node (0, 0) is x = 0.
    """

    breaks: np.ndarray
    deg: int
    nodes: np.ndarray = field(repr=False)
    _tail_matrix: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, x_max: float, deg: int = PANEL_DEGREE) -> "PanelGrid":
        breaks = [0.0]
        for b in (0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0):
            if b < x_max:
                breaks.append(b)
        b = 8.0
        while b < x_max:
            breaks.append(b)
            b *= 1.5
        breaks.append(x_max)
        breaks = np.array(breaks)
        t = -np.cos(np.pi * np.arange(deg + 1) / deg)
        half = 0.5 * np.diff(breaks)
        mid = 0.5 * (breaks[1:] + breaks[:-1])
        nodes = mid[:, None] + half[:, None] * t[None, :]
        nodes[:, 0], nodes[:, -1] = breaks[:-1], breaks[1:]
        # R @ f gives int_{t_i}^{1} f(t) dt on the reference panel
        Vinv = np.linalg.inv(C.chebvander(t, deg))
        integ = C.chebint(np.eye(deg + 1), lbnd=1.0, axis=0)
        R = -C.chebvander(t, deg + 1) @ integ @ Vinv
        return cls(breaks, deg, nodes, R)

    @property
    def x_max(self) -> float:
        return float(self.breaks[-1])

    def tail_integral(self, values: np.ndarray) -> np.ndarray:
        """int_x^{x_max} of sampled values, at every node; values shape (P, deg+1, ...)."""
        half = 0.5 * np.diff(self.breaks)
        within = np.einsum("ij,pj...->pi...", self._tail_matrix, values)
        within *= half.reshape((-1,) + (1,) * (within.ndim - 1))
        panel_totals = within[:, 0]
        after = np.cumsum(panel_totals[::-1], axis=0)[::-1]
        after = np.concatenate([after[1:], np.zeros_like(after[:1])], axis=0)
        return within + after[:, None]

    def flat(self, values: np.ndarray):
        """Drop duplicated panel endpoints: returns (x, values) on a strictly increasing grid."""
        x = np.concatenate([self.nodes[0]] + [self.nodes[p, 1:] for p in range(1, len(self.nodes))])
        v = np.concatenate([values[0]] + [values[p, 1:] for p in range(1, len(values))])
        return x, v

    def interpolate(self, values: np.ndarray, x) -> np.ndarray:
        """Evaluate the panel interpolant of ``values`` at points ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        p = np.clip(np.searchsorted(self.breaks, x, side="right") - 1, 0, len(self.nodes) - 1)
        a, b = self.breaks[p], self.breaks[p + 1]
        t = (2 * x - a - b) / (b - a)
        tnodes = -np.cos(np.pi * np.arange(self.deg + 1) / self.deg)
        Vinv = np.linalg.inv(C.chebvander(tnodes, self.deg))
        coef = np.einsum("ij,pj...->pi...", Vinv, values)
        basis = C.chebvander(t, self.deg)
        return np.einsum("xi,xi...->x...", basis, coef[p])


# b-table ----------------------------------------------------------------------

@dataclass
class BTable:
    """Samples of b_l and its derivative stacks.

    ``stacks[l][j]`` has shape (P, deg+1, n, n) and holds d^j b_l / dx^j.
    """

    grid: PanelGrid
    stacks: list
    levels: int
    tail_bound: float

    def value_at_zero(self, l: int, j: int = 0) -> np.ndarray:
        return self.stacks[l][j][0, 0]

    def samples(self, l: int, j: int = 0):
        return self.grid.flat(self.stacks[l][j])

    def __call__(self, l: int, x, j: int = 0) -> np.ndarray:
        return self.grid.interpolate(self.stacks[l][j], x)

    def depth(self, l: int) -> int:
        return len(self.stacks[l]) - 1


def required_depth(l: int, levels: int) -> int:
    """Derivative order carried by level l when levels 0..levels are built."""
    return levels - l


def b_table(V: PotentialModel, N: int, grid: PanelGrid | None = None, levels: int | None = None,
            config: solve.SolverConfig = solve.DEFAULT_CONFIG) -> BTable:
    """Build b_0 .. b_levels (default levels = N + 1) on a Chebyshev panel grid."""
    if N < 0:
        raise ValueError("order must be nonnegative")
    levels = N + 1 if levels is None else levels
    if V.max_derivative < 2 * N or V.max_derivative < levels - 1:
        raise SmoothnessRequired(
            f"coefficient chain to order {N} needs {max(2 * N, levels - 1)} derivatives of V, "
            f"model provides {V.max_derivative}")
    if grid is None:
        x_max = solve.choose_x_max(V, config) if not V.is_zero else 1.0
        grid = PanelGrid.build(x_max)
    n = V.n
    shape = grid.nodes.shape + (n, n)
    vmax = max(levels - 1, 0)
    Vd = [evaluate(V, grid.nodes, j) for j in range(vmax + 1)] if V.terms else [np.zeros(shape, complex)] * (vmax + 1)

    eye = np.broadcast_to(np.eye(n, dtype=complex), shape).copy()
    stacks = [[eye] + [np.zeros(shape, complex) for _ in range(required_depth(0, levels))]]
    for l in range(levels):
        prev = stacks[l]
        depth = required_depth(l + 1, levels)
        assert len(prev) - 1 >= depth + 1, "derivative stack too shallow"
        if l == 0:
            tail = _closed_form_b1(V, grid.nodes, n)
        else:
            integrand = Vd[0] @ prev[0]
            tail = grid.tail_integral(integrand)
        new = [-prev[1] - tail]
        for j in range(1, depth + 1):
            acc = -prev[j + 1]
            for i in range(j):
                acc = acc + comb(j - 1, i) * (Vd[i] @ prev[j - 1 - i])
            new.append(acc)
        if not all(np.all(np.isfinite(a)) for a in new):
            raise QuadratureFailure(f"non-finite values while building b_{l + 1}")
        stacks.append(new)
    tail_bound = float(V.norm_tail(grid.x_max)) if V.terms else 0.0
    return BTable(grid, stacks, levels, tail_bound)


def _closed_form_b1(V: PotentialModel, x, n: int) -> np.ndarray:
    """int_x^inf V(y) dy from the profile antiderivatives."""
    out = np.zeros(np.shape(x) + (n, n), dtype=complex)
    for t in V.terms:
        out += np.asarray(t.profile.tail_integral(x))[..., None, None] * t.H
    return out


def decay_template_constants(table: BTable, rho: float) -> np.ndarray:
    """max_x ||b_l(x)|| (1+x)^{l(rho-1)} for every level."""
    out = []
    for l in range(table.levels + 1):
        x, vals = table.samples(l)
        norms = np.linalg.norm(vals, 2, axis=(-2, -1))
        out.append(np.max(norms * (1 + x) ** (l * (rho - 1))))
    return np.array(out)


# c, d, e -------------------------------------------------------------------------

def c_table(table: BTable, bc: BoundaryPair) -> LaurentSeries:
    """Matrix series sum_l c_l z^l, z = 1/(2ik), valuation -1, up to c_{levels-1}."""
    A, B = bc.A, bc.B
    dag = lambda M: M.conj().T  # noqa: E731
    cs = [-0.5 * A, B - 0.5 * dag(table.value_at_zero(1)) @ A]
    for l in range(1, table.levels):
        bl = table.value_at_zero(l)
        bl1 = table.value_at_zero(l + 1)
        blp = table.value_at_zero(l, 1)
        cs.append(dag(bl) @ B - (0.5 * dag(bl1) + dag(blp)) @ A)
    return LaurentSeries(-1, np.array(cs))


def d_table(c: LaurentSeries, N: int, p: int = 0) -> LaurentSeries:
    """det J as a Laurent series in z, truncated at order N - p."""
    d = c.det()
    want = N - p
    if want > d.order:
        raise TruncationTooShort(f"d-coefficients known to order {d.order}, requested {want}")
    return d.truncate(want)


@dataclass
class CoeffTables:
    N: int
    p: int
    b: BTable
    c: LaurentSeries
    d: LaurentSeries
    c2: complex
    e: np.ndarray
    e_log: np.ndarray
    diag: DiagonalBC | None = None
    permutation_check: float | None = None

    def e_coeff(self, l: int) -> complex:
        """e_l for l >= 1."""
        if l < 1 or l > len(self.e):
            raise IndexError(f"e_{l} not available (have e_1..e_{len(self.e)})")
        return self.e[l - 1]

    def lnh_series(self, k, order: int | None = None):
        """sum_{l<=order} e_l / (2ik)^l."""
        order = len(self.e) if order is None else order
        z = 1.0 / (2j * np.asarray(k, dtype=complex))
        return sum(self.e[l - 1] * z ** l for l in range(1, order + 1))

    def to_report(self) -> dict:
        return {
            "e": [[float(v.real), float(v.imag)] for v in self.e],
            "c2": [float(self.c2.real), float(self.c2.imag)],
            "p": int(self.p),
        }


def e_table(d: LaurentSeries, p: int, N: int, tol: float = 1e-10):
    """(c2, e, e_log): recursion on the d-coefficients and, independently, the series logarithm."""
    scale = max(1.0, float(np.max(np.abs(d.coeffs))))
    for l in range(d.valuation, -p):
        if abs(d[l]) > tol * scale:
            raise LeadingCoefficientZero(f"d_{l} = {d[l]:.3e} is nonzero below the leading power -{p}")
    lead = d[-p]
    if abs(lead) <= tol * scale:
        raise LeadingCoefficientZero(f"d_-{p} = {lead:.3e} vanishes; boundary channel counts are inconsistent")
    c2 = (2j) ** p * lead
    norm = (2j) ** p / c2
    e = np.zeros(N, dtype=complex)
    for l in range(1, N + 1):
        acc = d[l - p]
        for j in range(1, l):
            acc -= j * d[l - p - j] * e[j - 1] / l
        e[l - 1] = norm * acc
    h = LaurentSeries(0, np.array([d[m - p] for m in range(N + 1)]) / lead)
    e_log = h.log().coeffs[1:]
    return c2, e, e_log


def coefficient_tables(V: PotentialModel, bc: BoundaryPair, N: int = DEFAULT_ORDER,
                       config: solve.SolverConfig = solve.DEFAULT_CONFIG,
                       crosscheck: bool = True) -> CoeffTables:
    """Run the whole chain for (V, A, B) up to e_N."""
    diag = reduce_to_diagonal(bc)
    p = diag.p
    n = bc.n
    # d_{N-p} needs c up to N - p + n - 1, hence b up to N - p + n
    levels = max(N - p + n, 1)
    btab = b_table(V, N, levels=levels, config=config)
    c = c_table(btab, bc)
    d = d_table(c, N, p)
    c2, e, e_log = e_table(d, p, N)
    perm = None
    if crosscheck and n <= 4:
        dl = c.det_leibniz().truncate(d.order)
        perm = float(np.max(np.abs(dl.coeffs - d.coeffs)))
    return CoeffTables(N=N, p=p, b=btab, c=c, d=d, c2=c2, e=e, e_log=e_log, diag=diag,
                       permutation_check=perm)


# remainder check ----------------------------------------------------------------

@dataclass
class RemainderReport:
    N: int
    k: np.ndarray
    norms: np.ndarray
    slope: float


def m_remainder_check(V: PotentialModel, N: int, ks, table: BTable | None = None,
                      config: solve.SolverConfig | None = None) -> RemainderReport:
    """Fit the decay rate of ||m(k, 0) - sum_{l<=N} b_l(0)/(2ik)^l|| in |k|."""
    ks = np.asarray(ks, dtype=complex)
    config = config or solve.SolverConfig(rtol=1e-13, atol=1e-13)
    if table is None or table.levels < N:
        table = b_table(V, N, levels=N, config=config)
    m0, _ = solve.m_values(V, ks, (0.0,), config)
    m0 = m0[0]
    partial = np.zeros_like(m0)
    for l in range(N + 1):
        partial += table.value_at_zero(l)[None] / (2j * ks[:, None, None]) ** l
    norms = np.linalg.norm(m0 - partial, 2, axis=(-2, -1))
    if np.all(norms == 0):
        slope = -np.inf
    else:
        slope = float(np.polyfit(np.log(np.abs(ks)), np.log(norms), 1)[0])
    return RemainderReport(N, ks, norms, slope)
