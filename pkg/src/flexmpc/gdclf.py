"""Synthesis and verification of quadratic g-dclf certificates V(x) = ||x||^2.

A certificate of order m is a weight vector ``lam`` (``lam_i = sigma_i / m``)
such that, for every mode theta with closed loop ``C = A + B K``::

    M_theta(lam) = (1 - eps) I - sum_i lam_i (C^i)^T C^i  >= 0,
    lam >= 0,  sum(lam) >= 1.

The feasibility problem has m scalar unknowns and a concave objective
``lam -> min_theta lambda_min(M_theta(lam))``, so it is solved by projected
supergradient ascent on the simplex instead of a general SDP solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from .errors import DomainError
from .numkernel import (
    JACOBI_MAX_SWEEPS,
    JACOBI_OFF_TOL,
    _jacobi,
    as_matrix,
    simplex_projection,
    spectral_radius,
    sym_eig,
)

DEFAULT_EPSILON = 1e-10
VERIFY_TOL = 1e-8
SUPERGRADIENT_STEP = 1.0
SUPERGRADIENT_RESTARTS = 5
SUPERGRADIENT_ITERS = 5000


@dataclass(frozen=True)
class LinearMode:
    """One subsystem ``x+ = A x + B u`` with an optional stabilizing gain ``u = K x``."""

    A: np.ndarray
    B: np.ndarray
    K: np.ndarray | None = None
    label: Hashable = 0

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        B = as_matrix(self.B, "B")
        if A.shape[0] != A.shape[1]:
            raise DomainError(f"mode {self.label}: A must be square")
        if B.shape[0] != A.shape[0]:
            raise DomainError(f"mode {self.label}: B must have {A.shape[0]} rows")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        if self.K is not None:
            K = as_matrix(self.K, "K")
            if K.shape != (B.shape[1], A.shape[0]):
                raise DomainError(
                    f"mode {self.label}: K must have shape {(B.shape[1], A.shape[0])}"
                )
            object.__setattr__(self, "K", K)
            rho = spectral_radius(A + B @ K)
            if rho >= 1.0:
                raise DomainError(f"mode {self.label}: K is not stabilizing (rho = {rho:.6g})")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.B.shape[1]

    def closed_loop(self) -> np.ndarray:
        if self.K is None:
            raise DomainError(f"mode {self.label} has no gain K")
        return self.A + self.B @ self.K

    def with_gain(self, K) -> "LinearMode":
        return LinearMode(self.A, self.B, K, self.label)


@dataclass(frozen=True)
class GdclfCertificate:
    """Order-m weights plus the gains and the margin they were verified with."""

    m: int
    lam: tuple[float, ...]
    epsilon: float
    gains: dict = field(default_factory=dict)
    margin: float = float("nan")

    def __post_init__(self):
        object.__setattr__(self, "lam", tuple(float(x) for x in self.lam))
        if self.m < 1 or len(self.lam) != self.m:
            raise DomainError(f"certificate needs m >= 1 weights, got m={self.m}, {len(self.lam)} weights")
        if not 0.0 < self.epsilon < 1.0:
            raise DomainError("epsilon must lie in (0, 1)")

    @property
    def weights(self) -> np.ndarray:
        return np.array(self.lam)


@dataclass(frozen=True)
class Infeasible:
    """No feasible weights found; ``best_margin`` < 0 is the closest approach."""

    m: int
    epsilon: float
    best_margin: float
    best_lam: tuple[float, ...]

    def __bool__(self):
        return False


@dataclass(frozen=True)
class NotFoundBelowCap:
    m_max: int
    best_margins: tuple[float, ...]

    def __bool__(self):
        return False


def _check_epsilon(epsilon: float) -> None:
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")


def build_phi(mode: LinearMode, m: int) -> np.ndarray:
    """Stack ``[C; C^2; ...; C^m]`` of closed-loop powers, shape (n m, n)."""
    if m < 1:
        raise DomainError("m must be >= 1")
    C = mode.closed_loop()
    blocks = [C]
    for _ in range(m - 1):
        blocks.append(blocks[-1] @ C)
    return np.vstack(blocks)


def _gram_blocks(mode: LinearMode, m: int) -> np.ndarray:
    """Array of shape (m, n, n) with entries ``(C^i)^T C^i``."""
    n = mode.n
    phi = build_phi(mode, m).reshape(m, n, n)
    return np.einsum("kij,kil->kjl", phi, phi)


def _weights_admissible(lam: np.ndarray) -> bool:
    # Sum is compared with a rounding allowance: published lists are quoted to 4 decimals.
    return bool(np.all(lam >= 0.0)) and lam.sum() >= 1.0 - 1e-12 * max(1, lam.size)


def verify_certificate(cert: GdclfCertificate, modes: Sequence[LinearMode], epsilon: float | None = None) -> float:
    """Worst-case minimum eigenvalue of the LMI matrix over all modes.

    Uses the gains stored in the certificate when present, otherwise the
    modes' own gains.  Weight vectors violating ``lam >= 0`` or
    ``sum(lam) >= 1`` are rejected with ``-inf`` before any eigenvalue work.
    """
    lam = np.asarray(cert.lam, dtype=float)
    if not _weights_admissible(lam):
        return float("-inf")
    eps = cert.epsilon if epsilon is None else epsilon
    worst = float("inf")
    for mode in modes:
        K = cert.gains.get(mode.label, mode.K) if cert.gains else mode.K
        if K is None:
            raise DomainError(f"no gain available for mode {mode.label}")
        C = mode.A + mode.B @ as_matrix(K, "K")
        P = np.eye(mode.n)
        M = (1.0 - eps) * np.eye(mode.n)
        for li in lam:
            P = P @ C
            M = M - li * (P.T @ P)
        worst = min(worst, sym_eig(0.5 * (M + M.T)).min)
    return worst


def _margin_and_supergradient(flat_grams, lam, epsilon, n):
    # flat_grams[k] has shape (m, n*n); hot loop, so no input validation here.
    worst = float("inf")
    g = None
    base = (1.0 - epsilon) * np.eye(n).ravel()
    for G in flat_grams:
        M = (base - lam @ G).reshape(n, n)
        d, vecs, _ = _jacobi((0.5 * (M + M.T)).tolist(), n, JACOBI_OFF_TOL, JACOBI_MAX_SWEEPS)
        i = min(range(n), key=lambda j: d[j][j])
        if d[i][i] < worst:
            worst = d[i][i]
            v = np.array([row[i] for row in vecs])
            # d/d lam_i of v^T M v = -v^T G_i v
            g = -(G @ np.outer(v, v).ravel())
    return worst, g


def _ascent(flat_grams, lam0, epsilon, n, iters, step):
    lam = simplex_projection(lam0, 1.0)
    best_val, g = _margin_and_supergradient(flat_grams, lam, epsilon, n)
    best_lam = lam
    for t in range(1, iters + 1):
        gn = math.sqrt(float(g @ g))
        if gn == 0.0:
            break
        lam = _project(lam + (step / math.sqrt(t) / gn) * g)
        val, g = _margin_and_supergradient(flat_grams, lam, epsilon, n)
        if val > best_val:
            best_val, best_lam = val, lam
    return best_val, best_lam


def _project(v):
    # simplex_projection without validation, unit sum.
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u * np.arange(1, v.size + 1) > css)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1), 0.0)


def synthesize(
    modes: Sequence[LinearMode],
    m: int,
    epsilon: float = DEFAULT_EPSILON,
    *,
    seed: int = 0,
    restarts: int = SUPERGRADIENT_RESTARTS,
    iterations: int = SUPERGRADIENT_ITERS,
    step: float = SUPERGRADIENT_STEP,
) -> GdclfCertificate | Infeasible:
    """Search for common weights of order ``m`` for all ``modes``.

    Maximizes the worst-case LMI margin over ``{lam >= 0, sum(lam) = 1}``.
    Shrinking ``lam`` only enlarges every LMI matrix, so restricting to the
    boundary of ``sum(lam) >= 1`` loses no feasible points.

    Restart 0 starts from uniform weights, restart 1 from all weight on the
    last index, the rest from seeded Dirichlet draws.

    Returns
    -------
    GdclfCertificate or Infeasible
        The certificate's margin is recomputed by :func:`verify_certificate`.
    """
    _check_epsilon(epsilon)
    if m < 1:
        raise DomainError("m must be >= 1")
    if not modes:
        raise DomainError("at least one mode is required")
    for mode in modes:
        if mode.K is None:
            raise DomainError(f"mode {mode.label} has no stabilizing gain")
    n = modes[0].n
    flat_grams = [_gram_blocks(mode, m).reshape(m, -1) for mode in modes]
    rng = np.random.default_rng(seed)
    starts = []
    for r in range(restarts):
        if r == 0:
            starts.append(np.full(m, 1.0 / m))
        elif r == 1:
            starts.append(np.eye(m)[-1])
        else:
            starts.append(rng.dirichlet(np.ones(m)))
    best_val, best_lam = -np.inf, starts[0]
    for lam0 in starts:
        val, lam = _ascent(flat_grams, lam0, epsilon, n, iterations, step)
        if val > best_val:
            best_val, best_lam = val, lam
    if best_val < 0.0:
        return Infeasible(m, epsilon, float(best_val), tuple(best_lam))
    gains = {mode.label: mode.K for mode in modes}
    cert = GdclfCertificate(m, tuple(best_lam), epsilon, gains)
    margin = verify_certificate(cert, modes)
    return GdclfCertificate(m, cert.lam, epsilon, gains, margin)


def minimal_m(
    modes: Sequence[LinearMode],
    epsilon: float = DEFAULT_EPSILON,
    m_max: int = 20,
    **synth_kw,
) -> tuple[int, GdclfCertificate] | NotFoundBelowCap:
    """Smallest order in ``1..m_max`` for which :func:`synthesize` succeeds.

    Every order is tried in turn; feasibility is not assumed monotone in m.
    """
    if m_max < 1:
        raise DomainError("m_max must be >= 1")
    for mode in modes:
        if mode.K is None:
            raise DomainError(f"mode {mode.label} has no stabilizing gain")
        if spectral_radius(mode.closed_loop()) >= 1.0:
            raise DomainError(f"mode {mode.label}: closed loop is not Schur stable")
    margins = []
    for m in range(1, m_max + 1):
        res = synthesize(modes, m, epsilon, **synth_kw)
        if isinstance(res, GdclfCertificate):
            return m, res
        margins.append(res.best_margin)
    return NotFoundBelowCap(m_max, tuple(margins))


# ---------------------------------------------------------------------------
# Numerical support for the nonexistence of a common quadratic CLF.


@dataclass(frozen=True)
class GridPoint:
    q: float
    r: float
    # largest eigenvalue of the best-input descent matrix, per mode label
    violation: dict
    failing: tuple
    singular: bool = False


@dataclass(frozen=True)
class FalsificationReport:
    q_range: tuple[float, float]
    r_range: tuple[float, float]
    step: float
    points: tuple[GridPoint, ...]

    @property
    def found(self) -> tuple[GridPoint, ...]:
        """Grid points where every mode admits strict descent."""
        return tuple(p for p in self.points if not p.failing and not p.singular)

    @property
    def conclusion(self) -> str:
        return "found" if self.found else "none found"

    def to_dict(self) -> dict:
        return {
            "grid": {"q_range": list(self.q_range), "r_range": list(self.r_range), "step": self.step},
            "n_points": len(self.points),
            "conclusion": self.conclusion,
            "found": [{"q": p.q, "r": p.r} for p in self.found],
            "points": [
                {
                    "q": p.q,
                    "r": p.r,
                    "failing_modes": [str(x) for x in p.failing],
                    "violation": {str(k): v for k, v in p.violation.items()},
                    "singular": p.singular,
                }
                for p in self.points
            ],
        }


def descent_matrix(mode: LinearMode, P: np.ndarray) -> np.ndarray | None:
    """``A^T (P - P B (B^T P B)^-1 B^T P) A - P``; None when ``B^T P B`` is singular.

    ``x^T D x`` is the one-step change of ``x^T P x`` under the minimizing input
    ``u* = -(B^T P B)^-1 B^T P A x``.
    """
    A, B = mode.A, mode.B
    S = B.T @ P @ B
    if abs(np.linalg.det(S)) <= 1e-14 * max(1.0, np.linalg.norm(S)) ** S.shape[0]:
        return None
    PB = P @ B
    Pproj = P - PB @ np.linalg.solve(S, PB.T)
    D = A.T @ Pproj @ A - P
    return 0.5 * (D + D.T)


def _grid(lo: float, hi: float, step: float) -> np.ndarray:
    k0 = math.ceil(lo / step - 1e-9)
    k1 = math.floor(hi / step + 1e-9)
    return np.arange(k0, k1 + 1) * step


def falsify_common_clf(
    family: Sequence[LinearMode],
    q_range: tuple[float, float] = (-3.0, 3.0),
    r_range: tuple[float, float] = (0.0, 10.0),
    step: float = 0.05,
) -> FalsificationReport:
    """Scan ``P = [[1, q], [q, r]]`` for a common quadratic CLF of a 2-state family.

    Only grid points with ``r > q^2`` (P positive definite) are evaluated.  A
    mode fails at a point when its best-input descent matrix is not negative
    definite.
    """
    if len(family) == 1:
        family = [family[0], family[0]]
    if len(family) != 2:
        raise DomainError("falsifier expects two modes")
    for mode in family:
        if mode.n != 2 or mode.p != 1:
            raise DomainError("falsifier expects n = 2 states and a single input")
    if not np.allclose(family[0].B, family[1].B):
        raise DomainError("modes must share the input matrix B")
    if step <= 0:
        raise DomainError("step must be positive")
    labels = [family[0].label, family[1].label]
    if labels[0] == labels[1]:
        labels = [labels[0], f"{labels[1]}'"]
    points = []
    for q in _grid(*q_range, step):
        for r in _grid(*r_range, step):
            if r - q * q <= 0.0:
                continue
            P = np.array([[1.0, q], [q, r]])
            violation = {}
            failing = []
            singular = False
            for label, mode in zip(labels, family):
                D = descent_matrix(mode, P)
                if D is None:
                    singular = True
                    violation[label] = float("nan")
                    continue
                worst = sym_eig(D, check_symmetry=False).max
                violation[label] = worst
                if worst >= 0.0:
                    failing.append(label)
            points.append(GridPoint(float(q), float(r), violation, tuple(failing), singular))
    if not points:
        raise DomainError("grid contains no positive definite points (r > q^2)")
    return FalsificationReport(tuple(q_range), tuple(r_range), step, tuple(points))
