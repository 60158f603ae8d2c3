"""Matrix potentials V(x) = sum_i H_i * g_i(x) with closed-form profile derivatives."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from .errors import DerivativeUnavailable, InvalidInput, NotFaddeev

#: Derivative cap reported by the smooth profile families.  The closed forms
#: work for any order; the cap only keeps Hermite evaluations well scaled.
SMOOTH_MAX_DERIVATIVE = 64

HERMITIAN_TOL = 1e-13


def _rising(p: float, j: int) -> float:
    out = 1.0
    for i in range(j):
        out *= p + i
    return out


@dataclass(frozen=True)
class Profile:
    """Scalar decay profile.

    ``kind`` is one of

    * ``"exp"``:   c * exp(-alpha x)
    * ``"power"``: c * (1 + x)**(-p)
    * ``"gauss"``: c * exp(-alpha x**2)
    * ``"well"``:  c on [0, width), zero afterwards (not smooth)
    """

    kind: str
    c: float = 1.0
    alpha: float | None = None
    p: float | None = None
    width: float | None = None

    def __post_init__(self):
        if self.kind in ("exp", "gauss"):
            if self.alpha is None or self.alpha <= 0:
                raise InvalidInput(f"{self.kind} profile needs alpha > 0")
        elif self.kind == "power":
            if self.p is None or self.p <= 0:
                raise InvalidInput("power profile needs p > 0")
        elif self.kind == "well":
            if self.width is None or self.width <= 0:
                raise InvalidInput("well profile needs width > 0")
        else:
            raise InvalidInput(f"unknown profile kind {self.kind!r}")

    @property
    def max_derivative(self) -> int:
        return 0 if self.kind == "well" else SMOOTH_MAX_DERIVATIVE

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return (self.width,) if self.kind == "well" else ()

    def derivative(self, x, j: int = 0):
        """j-th derivative evaluated at ``x`` (scalar or array)."""
        if j > self.max_derivative:
            raise DerivativeUnavailable(f"{self.kind} profile has no derivative of order {j}")
        x = np.asarray(x, dtype=float)
        c = self.c
        if self.kind == "exp":
            a = self.alpha
            return c * (-a) ** j * np.exp(-a * x)
        if self.kind == "power":
            p = self.p
            return c * (-1) ** j * _rising(p, j) * (1.0 + x) ** (-p - j)
        if self.kind == "gauss":
            a = self.alpha
            s = math.sqrt(a)
            return c * (-s) ** j * special.eval_hermite(j, s * x) * np.exp(-a * x * x)
        return np.where(x < self.width, c, 0.0)

    def tail_integral(self, x):
        """Signed integral of the profile over [x, inf)."""
        x = np.asarray(x, dtype=float)
        c = self.c
        if self.kind == "exp":
            return c * np.exp(-self.alpha * x) / self.alpha
        if self.kind == "power":
            if self.p <= 1:
                return np.full_like(x, np.inf * np.sign(c))
            return c * (1.0 + x) ** (1.0 - self.p) / (self.p - 1.0)
        if self.kind == "gauss":
            s = math.sqrt(self.alpha)
            return c * math.sqrt(math.pi) / (2 * s) * special.erfc(s * x)
        return c * np.clip(self.width - x, 0.0, None)

    def moment_tail(self, x):
        """Integral of (1+y)|g(y)| over [x, inf)."""
        x = np.asarray(x, dtype=float)
        c = abs(self.c)
        if self.kind == "exp":
            a = self.alpha
            return c * np.exp(-a * x) * ((1.0 + x) / a + 1.0 / a**2)
        if self.kind == "power":
            if self.p <= 2:
                return np.full_like(x, np.inf)
            return c * (1.0 + x) ** (2.0 - self.p) / (self.p - 2.0)
        if self.kind == "gauss":
            a = self.alpha
            s = math.sqrt(a)
            return c * (math.sqrt(math.pi) / (2 * s) * special.erfc(s * x) + np.exp(-a * x * x) / (2 * a))
        w = self.width
        return 0.5 * c * ((1.0 + w) ** 2 - (1.0 + np.minimum(x, w)) ** 2)

    def sup_abs(self) -> float:
        return abs(self.c)

    def to_config(self) -> dict:
        out = {"kind": self.kind, "c": self.c}
        for key in ("alpha", "p", "width"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        return out


@dataclass(frozen=True)
class Term:
    H: np.ndarray
    profile: Profile


def parse_complex_matrix(data, n: int | None = None) -> np.ndarray:
    """Parse a row-major matrix given as nested lists of reals or [re, im] pairs.

    Accepted layouts: ``[[a, b], [c, d]]`` of reals, ``[[[re, im], ...], ...]``
    nested pairs, or a flat list of ``n*n`` pairs.
    """
    arr = np.asarray(data)
    if np.iscomplexobj(arr):
        arr = arr.astype(complex)
    else:
        arr = arr.astype(float)
        if arr.ndim == 3 and arr.shape[-1] == 2:
            arr = arr[..., 0] + 1j * arr[..., 1]
        elif arr.ndim == 2 and arr.shape[1] == 2 and arr.shape[0] != 2:
            m = math.isqrt(arr.shape[0])
            if m * m != arr.shape[0]:
                raise InvalidInput(f"cannot interpret {arr.shape[0]} pairs as a square matrix")
            arr = (arr[:, 0] + 1j * arr[:, 1]).reshape(m, m)
        else:
            arr = arr.astype(complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidInput(f"expected a square matrix, got shape {arr.shape}")
    if n is not None and arr.shape != (n, n):
        raise InvalidInput(f"matrix has shape {arr.shape}, expected {(n, n)}")
    return arr


@dataclass(frozen=True)
class PotentialModel:
    """Hermitian n x n potential built from scalar profiles.

    Parameters
    ----------
    n : int
        Channel count.
    terms : sequence of Term
        Each term contributes ``H * profile(x)``; ``H`` must be Hermitian.
    rho : float
        Declared decay exponent in (1, 2].  Stored as metadata for
        remainder-rate checks.
    """

    n: int
    terms: tuple[Term, ...] = ()
    rho: float = 2.0

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInput("n must be positive")
        if not (1.0 < self.rho <= 2.0):
            raise InvalidInput("rho must lie in (1, 2]")
        terms = []
        for t in self.terms:
            H = parse_complex_matrix(t.H, self.n)
            dev = np.linalg.norm(H - H.conj().T, 2)
            if dev > HERMITIAN_TOL * max(1.0, np.linalg.norm(H, 2)):
                raise InvalidInput(f"term matrix is not Hermitian (deviation {dev:.2e})")
            terms.append(Term(H, t.profile))
        object.__setattr__(self, "terms", tuple(terms))

    # construction helpers -------------------------------------------------
    @classmethod
    def zero(cls, n: int) -> "PotentialModel":
        return cls(n=n, terms=())

    @classmethod
    def scalar(cls, profile: Profile, rho: float = 2.0) -> "PotentialModel":
        return cls(n=1, terms=(Term(np.eye(1, dtype=complex), profile),), rho=rho)

    @classmethod
    def from_terms(cls, pairs: Sequence[tuple], rho: float = 2.0) -> "PotentialModel":
        pairs = list(pairs)
        n = np.asarray(pairs[0][0]).shape[0]
        return cls(n=n, terms=tuple(Term(np.asarray(H, dtype=complex), prof) for H, prof in pairs), rho=rho)

    @classmethod
    def from_config(cls, cfg: dict) -> "PotentialModel":
        n = int(cfg["n"])
        terms = []
        for t in cfg.get("terms", []):
            prof = dict(t["profile"])
            terms.append(Term(parse_complex_matrix(t["H"], n), Profile(**prof)))
        return cls(n=n, terms=tuple(terms), rho=float(cfg.get("rho", 2.0)))

    def to_config(self) -> dict:
        return {
            "n": self.n,
            "rho": self.rho,
            "terms": [
                {"H": [[[z.real, z.imag] for z in row] for row in t.H], "profile": t.profile.to_config()}
                for t in self.terms
            ],
        }

    # properties -----------------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return all(t.profile.c == 0 or not np.any(t.H) for t in self.terms)

    @property
    def max_derivative(self) -> int:
        if not self.terms:
            return SMOOTH_MAX_DERIVATIVE
        return min(t.profile.max_derivative for t in self.terms)

    @property
    def is_smooth(self) -> bool:
        return self.max_derivative > 0

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(sorted({b for t in self.terms for b in t.profile.breakpoints}))

    @property
    def is_real(self) -> bool:
        return all(np.allclose(t.H.imag, 0.0) for t in self.terms)

    def transformed(self, M: np.ndarray) -> "PotentialModel":
        """Return the potential M V M^dagger."""
        M = np.asarray(M, dtype=complex)
        terms = tuple(Term(M @ t.H @ M.conj().T, t.profile) for t in self.terms)
        return PotentialModel(n=self.n, terms=terms, rho=self.rho)

    def sup_norm_bound(self) -> float:
        """Upper bound on sup_x ||V(x)||."""
        return float(sum(np.linalg.norm(t.H, 2) * t.profile.sup_abs() for t in self.terms))

    # evaluation -----------------------------------------------------------
    def __call__(self, x, j: int = 0) -> np.ndarray:
        return evaluate(self, x, j)

    def norm_tail(self, x):
        """Upper bound on the integral of ||V|| over [x, inf)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for t in self.terms:
            out = out + np.linalg.norm(t.H, 2) * np.abs(t.profile.tail_integral(x))
        return out

    def moment_tail(self, x):
        """Upper bound on the integral of (1+y)||V(y)|| over [x, inf)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for t in self.terms:
            out = out + np.linalg.norm(t.H, 2) * t.profile.moment_tail(x)
        return out


def evaluate(V: PotentialModel, x, j: int = 0) -> np.ndarray:
    """j-th derivative of V at ``x``; returns shape ``x.shape + (n, n)``."""
    if j < 0:
        raise InvalidInput("derivative order must be nonnegative")
    if j > V.max_derivative:
        raise DerivativeUnavailable(f"model supports derivatives up to {V.max_derivative}, asked for {j}")
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape + (V.n, V.n), dtype=complex)
    for t in V.terms:
        out += np.asarray(t.profile.derivative(x, j))[..., None, None] * t.H
    return out


@dataclass(frozen=True)
class DecayReport:
    faddeev_norm: float
    l1_norm: float
    tail: Callable = field(repr=False)
    error_estimate: float = 0.0


def _spectral_norm(V: PotentialModel, x: float) -> float:
    if not V.terms:
        return 0.0
    return float(np.linalg.norm(evaluate(V, x), 2))


def decay_report(V: PotentialModel, rtol: float = 1e-10) -> DecayReport:
    """Integrals of ||V|| and (1+x)||V|| with analytic tail bounds.

    Raises NotFaddeev when a power profile with p <= 2 makes the first moment
    diverge.
    """
    for t in V.terms:
        if t.profile.kind == "power" and t.profile.p <= 2 and t.profile.c != 0:
            raise NotFaddeev(f"power profile with p={t.profile.p} has divergent first moment")
    if V.is_zero:
        return DecayReport(0.0, 0.0, lambda x: np.zeros_like(np.asarray(x, dtype=float)))

    # single-term models have ||V|| = ||H|| |g|, so the tails are exact
    if len(V.terms) == 1:
        t = V.terms[0]
        hn = np.linalg.norm(t.H, 2)
        prof = t.profile
        l1 = float(hn * abs(prof.tail_integral(0.0)))
        fad = float(hn * prof.moment_tail(0.0))
        return DecayReport(fad, l1, V.norm_tail)

    x_cut = _cutoff(V.moment_tail, rtol * 1e-3)
    brk = [b for b in V.breakpoints if b < x_cut]
    l1, e1 = integrate.quad(lambda x: _spectral_norm(V, x), 0.0, x_cut, points=brk or None,
                            epsabs=0.0, epsrel=rtol * 0.1, limit=500)
    fad, e2 = integrate.quad(lambda x: (1 + x) * _spectral_norm(V, x), 0.0, x_cut, points=brk or None,
                             epsabs=0.0, epsrel=rtol * 0.1, limit=500)
    total_err = e1 + e2 + float(V.moment_tail(x_cut))
    return DecayReport(float(fad), float(l1), V.norm_tail, total_err)


def _cutoff(tail_fn, tol: float, x_hi: float = 1e7) -> float:
    """Smallest x (to bisection accuracy) with tail_fn(x) <= tol."""
    if float(tail_fn(0.0)) <= tol:
        return 0.0
    lo, hi = 0.0, 1.0
    while float(tail_fn(hi)) > tol:
        lo, hi = hi, hi * 2
        if hi > x_hi:
            return math.inf
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if float(tail_fn(mid)) > tol:
            lo = mid
        else:
            hi = mid
    return hi


def derivative_bound_constants(V: PotentialModel, j_max: int, grid) -> np.ndarray:
    """Smallest C_j with ||V^(j)(x)|| <= C_j (1+x)^(-rho-j) on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    out = np.zeros(j_max + 1)
    for j in range(j_max + 1):
        vals = evaluate(V, grid, j)
        norms = np.linalg.norm(vals, 2, axis=(-2, -1))
        out[j] = np.max(norms * (1 + grid) ** (V.rho + j))
    return out
