"""Dense linear-algebra primitives: symmetric eigensolver, spectral radius,
discrete Riccati solver, LQR gain and Euclidean simplex projection.

Matrices are plain ``numpy.ndarray`` objects of dtype float64.  The
functions here validate their inputs and never mutate them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainError

# Tolerance defaults, overridable per call.
SYMMETRY_RTOL = 1e-12
JACOBI_OFF_TOL = 1e-13
JACOBI_MAX_SWEEPS = 100
DARE_MAX_ITER = 10_000
DARE_TOL = 1e-10
LYAP_TEST_MAX_ITER = 100_000


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Return ``M`` as a finite 2-D float array, or raise DomainError."""
    a = np.array(M, dtype=float, ndmin=2)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise DomainError(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{name} contains NaN or Inf")
    return a


def _require_square(a: np.ndarray, name: str) -> None:
    if a.shape[0] != a.shape[1]:
        raise DomainError(f"{name} must be square, got shape {a.shape}")


@dataclass(frozen=True)
class SymEigResult:
    """Eigen-decomposition ``S = V diag(w) V^T`` with ``w`` ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def max(self) -> float:
        return float(self.eigenvalues[-1])


def _jacobi(a: list, n: int, off_tol: float, max_sweeps: int):
    # Cyclic Jacobi on nested Python lists; for the small dense matrices used
    # here this is considerably faster than numpy's per-call overhead.
    v = [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]
    fro2 = sum(x * x for row in a for x in row)
    thresh2 = (off_tol * off_tol) * fro2
    for _ in range(max_sweeps):
        off2 = 0.0
        for p in range(n):
            ap = a[p]
            for q in range(p + 1, n):
                off2 += ap[q] * ap[q]
        if 2.0 * off2 <= thresh2:
            return a, v, True
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p][q]
                if apq == 0.0:
                    continue
                app = a[p][p]
                aqq = a[q][q]
                tau = (aqq - app) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                # A <- J^T A J with J the (p, q) plane rotation.
                for k in range(n):
                    akp = a[k][p]
                    akq = a[k][q]
                    a[k][p] = c * akp - s * akq
                    a[k][q] = s * akp + c * akq
                rp = a[p]
                rq = a[q]
                for k in range(n):
                    apk = rp[k]
                    aqk = rq[k]
                    rp[k] = c * apk - s * aqk
                    rq[k] = s * apk + c * aqk
                a[p][q] = 0.0
                a[q][p] = 0.0
                for k in range(n):
                    vkp = v[k][p]
                    vkq = v[k][q]
                    v[k][p] = c * vkp - s * vkq
                    v[k][q] = s * vkp + c * vkq
    return a, v, False


def sym_eig(S, *, off_tol: float = JACOBI_OFF_TOL, check_symmetry: bool = True) -> SymEigResult:
    """Full spectrum of a symmetric matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    S : array_like, shape (n, n)
        Symmetric matrix (to ``SYMMETRY_RTOL`` relative tolerance).
    off_tol : float
        Sweeps stop once the off-diagonal Frobenius norm falls below
        ``off_tol * ||S||_F``.

    Returns
    -------
    SymEigResult
        Eigenvalues ascending, eigenvectors as orthonormal columns.
    """
    a = as_matrix(S, "S")
    _require_square(a, "S")
    n = a.shape[0]
    if check_symmetry:
        scale = max(1.0, float(np.max(np.abs(a))))
        if np.max(np.abs(a - a.T)) > SYMMETRY_RTOL * scale:
            raise DomainError("S is not symmetric")
    a = 0.5 * (a + a.T)
    d, v, ok = _jacobi(a.tolist(), n, off_tol, JACOBI_MAX_SWEEPS)
    if not ok:
        raise ConvergenceError("Jacobi sweeps did not converge")
    w = np.array([d[i][i] for i in range(n)])
    order = np.argsort(w, kind="stable")
    return SymEigResult(w[order], np.array(v)[:, order])


def min_eig(S) -> tuple[float, np.ndarray]:
    """Smallest eigenvalue of a symmetric matrix and a unit eigenvector."""
    r = sym_eig(S, check_symmetry=False)
    return r.min, r.eigenvectors[:, 0]


def spectral_radius(M) -> float:
    """Largest eigenvalue modulus of a square matrix."""
    a = as_matrix(M, "M")
    _require_square(a, "M")
    return float(np.max(np.abs(np.linalg.eigvals(a))))


def is_schur_stable(M, *, max_iter: int = LYAP_TEST_MAX_ITER, tol: float = 1e-12) -> bool:
    """Decide ``rho(M) < 1`` by iterating ``P <- M^T P M + I`` from ``P = I``.

    The iterates converge (to the discrete Lyapunov solution) iff M is Schur
    stable.  This is independent of any eigenvalue computation.
    """
    a = as_matrix(M, "M")
    _require_square(a, "M")
    n = a.shape[0]
    P = np.eye(n)
    # Track the increment M^k^T M^k directly; the sum converges iff it vanishes.
    term = np.eye(n)
    for _ in range(max_iter):
        term = a.T @ term @ a
        P = P + term
        tn = np.linalg.norm(term)
        if not np.isfinite(tn) or tn > 1e150:
            return False
        if tn <= tol * np.linalg.norm(P):
            return True
    return False


def _dare_residual(A, B, Q, R, P) -> float:
    BtPA = B.T @ P @ A
    S = R + B.T @ P @ B
    res = A.T @ P @ A - P - BtPA.T @ np.linalg.solve(S, BtPA) + Q
    return float(np.linalg.norm(res, 2))


def dare_solve(A, B, Q, R, *, max_iter: int = DARE_MAX_ITER, tol: float = DARE_TOL) -> np.ndarray:
    """Stabilizing solution of the discrete algebraic Riccati equation.

    Iterates the Riccati map ``P <- A^T P A - A^T P B (R + B^T P B)^-1 B^T P A + Q``
    starting at ``P = Q``.

    Raises
    ------
    ConvergenceError
        If the increment does not fall below ``tol * (1 + ||P||)`` within
        ``max_iter`` iterations.  The exception carries the final residual.
    """
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    Q = as_matrix(Q, "Q")
    R = as_matrix(R, "R")
    _require_square(A, "A")
    n = A.shape[0]
    p = B.shape[1]
    if B.shape[0] != n or Q.shape != (n, n) or R.shape != (p, p):
        raise DomainError("inconsistent dimensions for dare_solve")
    Q = 0.5 * (Q + Q.T)
    R = 0.5 * (R + R.T)
    if np.linalg.eigvalsh(R)[0] <= 0:
        raise DomainError("R must be positive definite")
    P = Q.copy()
    for _ in range(max_iter):
        BtPA = B.T @ P @ A
        S = R + B.T @ P @ B
        P_next = A.T @ P @ A - BtPA.T @ np.linalg.solve(S, BtPA) + Q
        P_next = 0.5 * (P_next + P_next.T)
        if not np.all(np.isfinite(P_next)):
            break
        step = np.max(np.abs(P_next - P))
        P = P_next
        if step <= tol * (1.0 + np.max(np.abs(P))):
            return P
    raise ConvergenceError(
        "Riccati iteration did not converge", residual=_dare_residual(A, B, Q, R, P)
    )


def lqr_gain(A, B, Q, R, **kw) -> np.ndarray:
    """Gain K with ``u = K x`` (note the sign) from the DARE solution."""
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    R = as_matrix(R, "R")
    P = dare_solve(A, B, Q, R, **kw)
    K = -np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
    if spectral_radius(A + B @ K) >= 1.0:
        raise DomainError("(A, B) is not stabilizable with the given weights")
    return K


def simplex_projection(v, s: float = 1.0) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``{w >= 0, sum(w) = s}``.

    Sort-based threshold method: find tau with ``sum(max(v - tau, 0)) = s``.
    """
    v = np.asarray(v, dtype=float).ravel()
    if not np.all(np.isfinite(v)):
        raise DomainError("v contains NaN or Inf")
    if not s > 0:
        raise DomainError("s must be positive")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - s
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    tau = css[rho] / (rho + 1)
    w = np.maximum(v - tau, 0.0)
    # Restore the exact sum lost to rounding on the support.
    support = w > 0
    w[support] += (s - w.sum()) / support.sum()
    return np.maximum(w, 0.0)
