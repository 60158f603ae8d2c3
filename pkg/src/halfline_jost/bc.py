"""Self-adjoint boundary matrices (A, B) and their diagonal angle representation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DegenerateBC, InvalidInput, NotSelfAdjointBC, ShapeMismatch, SingularTransform
from .potential import PotentialModel, parse_complex_matrix

ALGEBRAIC_TOL = 1e-12
POSITIVITY_TOL = 1e-10
THETA_TOL = 1e-9


@dataclass(frozen=True)
class BoundaryPair:
    """Validated boundary pair; the condition is -B^dagger psi(0) + A^dagger psi'(0) = 0."""

    A: np.ndarray
    B: np.ndarray

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def right_multiplied(self, T) -> "BoundaryPair":
        T = np.asarray(T, dtype=complex)
        return validate_boundary(self.A @ T, self.B @ T)


@dataclass(frozen=True)
class DiagonalBC:
    """Diagonal representation: channel j obeys cos(theta_j) psi_j(0) + sin(theta_j) psi_j'(0) = 0.

    ``M`` is unitary with Lambda = M diag(exp(2i theta)) M^dagger, where
    Lambda = -(A + iB)(A - iB)^-1.  ``T1``/``T2`` are ``None`` unless
    explicitly reconstructed by :func:`reconstruct_transforms`.
    """

    theta: np.ndarray
    M: np.ndarray
    n_D: int
    n_M: int
    n_N: int
    threshold_distance: np.ndarray = field(repr=False)
    T1: np.ndarray | None = None
    T2: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.theta)

    @property
    def p(self) -> int:
        """Leading power of det J(k) at high energy (mixed + Neumann channels)."""
        return self.n_M + self.n_N

    @property
    def A_tilde(self) -> np.ndarray:
        return -np.diag(np.sin(self.theta)).astype(complex)

    @property
    def B_tilde(self) -> np.ndarray:
        return np.diag(np.cos(self.theta)).astype(complex)

    def summary(self) -> dict:
        return {
            "theta": [float(t) for t in self.theta],
            "n_D": self.n_D,
            "n_M": self.n_M,
            "n_N": self.n_N,
            "threshold_distance": [float(d) for d in self.threshold_distance],
            "T1": "not reconstructed" if self.T1 is None else "reconstructed",
        }


def validate_boundary(A, B, tol: float = ALGEBRAIC_TOL) -> BoundaryPair:
    """Check A^dagger B = B^dagger A and A^dagger A + B^dagger B > 0.

    The self-adjointness residual is measured relative to ||A|| ||B||.
    """
    A = np.array(A, dtype=complex)
    B = np.array(B, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape != B.shape or A.shape[0] < 1:
        raise ShapeMismatch(f"A and B must be square of equal size, got {A.shape} and {B.shape}")
    scale = max(1.0, np.linalg.norm(A, 2) * np.linalg.norm(B, 2))
    dev = np.linalg.norm(A.conj().T @ B - B.conj().T @ A, 2)
    if dev > tol * scale:
        raise NotSelfAdjointBC(f"||A^+B - B^+A|| = {dev:.3e} exceeds tolerance")
    gram = A.conj().T @ A + B.conj().T @ B
    lam = np.linalg.eigvalsh(0.5 * (gram + gram.conj().T))
    if lam[0] <= POSITIVITY_TOL * max(1.0, lam[-1]):
        raise DegenerateBC(f"A^+A + B^+B is not positive definite (min eigenvalue {lam[0]:.3e})")
    A.setflags(write=False)
    B.setflags(write=False)
    return BoundaryPair(A, B)


def cayley_matrix(bc: BoundaryPair) -> np.ndarray:
    """Lambda = -(A + iB)(A - iB)^-1, unitary and invariant under (A, B) -> (AT, BT)."""
    A, B = bc.A, bc.B
    D = A - 1j * B
    if np.linalg.cond(D) > 1e12:
        raise DegenerateBC("A - iB is numerically singular")
    # X D^-1 = (D^-T X^T)^T
    return -np.linalg.solve(D.T, (A + 1j * B).T).T


def _angle_distance(theta: np.ndarray, target: float) -> np.ndarray:
    d = np.mod(theta - target, math.pi)
    return np.minimum(d, math.pi - d)


def reduce_to_diagonal(bc: BoundaryPair, theta_tol: float = THETA_TOL) -> DiagonalBC:
    """Angles theta_j in (0, pi], unitary M and channel counts (n_D, n_M, n_N)."""
    lam = cayley_matrix(bc)
    # complex Schur form of a normal matrix is diagonal with a unitary basis
    T, M = scipy.linalg.schur(lam, output="complex")
    ev = np.diag(T)
    theta = np.mod(np.angle(ev) / 2.0, math.pi)
    dist_D = _angle_distance(theta, math.pi)
    dist_N = _angle_distance(theta, math.pi / 2)
    is_D = dist_D < theta_tol
    is_N = dist_N < theta_tol
    theta = np.where(is_D | (theta == 0.0), math.pi, theta)
    theta = np.where(is_N, math.pi / 2, theta)
    n_D = int(is_D.sum())
    n_N = int(is_N.sum())
    return DiagonalBC(
        theta=theta,
        M=M,
        n_D=n_D,
        n_M=bc.n - n_D - n_N,
        n_N=n_N,
        threshold_distance=np.minimum(dist_D, dist_N),
    )


def reconstruct_transforms(bc: BoundaryPair, diag: DiagonalBC) -> DiagonalBC:
    """Solve A = M A~ T2 M^+ T1, B = M B~ T2 M^+ T1 numerically (T2 = I).

    With T2 = I this is one linear least-squares problem for T1; the result
    is checked and stored on a copy of ``diag``.
    """
    M = diag.M
    At = M @ diag.A_tilde @ M.conj().T
    Bt = M @ diag.B_tilde @ M.conj().T
    stack = np.vstack([At, Bt])
    target = np.vstack([bc.A, bc.B])
    T1, *_ = np.linalg.lstsq(stack, target, rcond=None)
    res = np.linalg.norm(stack @ T1 - target, 2)
    if res > 1e-9 * max(1.0, np.linalg.norm(target, 2)):
        raise SingularTransform(f"could not reconstruct T1 (residual {res:.2e})")
    return DiagonalBC(diag.theta, M, diag.n_D, diag.n_M, diag.n_N, diag.threshold_distance,
                      T1=T1, T2=np.eye(bc.n, dtype=complex))


def _check_invertible(T, name: str) -> np.ndarray:
    T = np.asarray(T, dtype=complex)
    if np.linalg.cond(T) > 1e12:
        raise SingularTransform(f"{name} is numerically singular")
    return T


def transform_problem(V: PotentialModel, bc: BoundaryPair, M, T1=None, T2=None):
    """Map (V, A, B) to (M V M^+, M A T1 M^+ T2, M B T1 M^+ T2)."""
    n = bc.n
    M = np.asarray(M, dtype=complex)
    T1 = np.eye(n, dtype=complex) if T1 is None else _check_invertible(T1, "T1")
    T2 = np.eye(n, dtype=complex) if T2 is None else _check_invertible(T2, "T2")
    for mat in (M, T1, T2):
        if mat.shape != (n, n):
            raise ShapeMismatch(f"transform has shape {mat.shape}, expected {(n, n)}")
    if V.n != n:
        raise ShapeMismatch("potential and boundary pair have different sizes")
    if np.linalg.norm(M.conj().T @ M - np.eye(n), 2) > 1e-12:
        raise InvalidInput("M is not unitary")
    Md = M.conj().T
    A2 = M @ bc.A @ T1 @ Md @ T2
    B2 = M @ bc.B @ T1 @ Md @ T2
    return V.transformed(M), validate_boundary(A2, B2, tol=1e-10)


# presets ------------------------------------------------------------------

def dirichlet(n: int) -> BoundaryPair:
    return validate_boundary(np.zeros((n, n)), -np.eye(n))


def neumann(n: int) -> BoundaryPair:
    return validate_boundary(np.eye(n), np.zeros((n, n)))


def robin(theta) -> BoundaryPair:
    """Diagonal pair (-diag sin theta, diag cos theta)."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    return validate_boundary(-np.diag(np.sin(theta)), np.diag(np.cos(theta)))


def delta_prime(a: float) -> BoundaryPair:
    """Three-edge star vertex: psi_1' = psi_2' = psi_3', psi_1 + psi_2 + psi_3 = a psi_1'."""
    A = np.array([[1.0, 0.0, -a], [-1.0, 1.0, 0.0], [0.0, -1.0, 0.0]])
    B = np.array([[0.0, 0.0, -1.0], [0.0, 0.0, -1.0], [0.0, 0.0, -1.0]])
    return validate_boundary(A, B)


def from_config(cfg: dict) -> BoundaryPair:
    """Build a pair from ``{"preset": name, ...}`` or ``{"A": ..., "B": ...}``."""
    if "preset" in cfg:
        name = cfg["preset"]
        if name == "dirichlet":
            return dirichlet(int(cfg["n"]))
        if name == "neumann":
            return neumann(int(cfg["n"]))
        if name == "delta-prime":
            return delta_prime(float(cfg["a"]))
        if name == "robin":
            return robin(cfg["theta"])
        raise InvalidInput(f"unknown boundary preset {name!r}")
    return validate_boundary(parse_complex_matrix(cfg["A"]), parse_complex_matrix(cfg["B"]))
