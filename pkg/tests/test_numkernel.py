import itertools

import numpy as np
import pytest

from flexmpc.errors import ConvergenceError, DomainError
from flexmpc.numkernel import (
    dare_solve,
    is_schur_stable,
    lqr_gain,
    min_eig,
    simplex_projection,
    spectral_radius,
    sym_eig,
)


def test_sym_eig_diagonal_and_2x2_closed_form():
    r = sym_eig(np.diag([3.0, -1.0, 2.0]))
    assert np.allclose(r.eigenvalues, [-1.0, 2.0, 3.0])
    a, b, c = 2.0, 0.7, -1.0
    S = np.array([[a, b], [b, c]])
    disc = np.sqrt(((a - c) / 2) ** 2 + b * b)
    expected = [(a + c) / 2 - disc, (a + c) / 2 + disc]
    assert np.allclose(sym_eig(S).eigenvalues, expected, atol=1e-14)


def test_sym_eig_reconstruction_random():
    rng = np.random.default_rng(1)
    for trial in range(1000):
        n = int(rng.integers(1, 13))
        X = rng.standard_normal((n, n))
        S = 0.5 * (X + X.T)
        r = sym_eig(S)
        V, w = r.eigenvectors, r.eigenvalues
        scale = max(1.0, np.linalg.norm(S))
        assert np.linalg.norm(V @ np.diag(w) @ V.T - S) <= 1e-10 * scale
        assert np.linalg.norm(V.T @ V - np.eye(n)) <= 1e-10
        assert np.all(np.diff(w) >= 0)


def test_sym_eig_matches_characteristic_polynomial_oracle():
    # Eigenvalues are roots of det(S - tI); check the determinant vanishes at each.
    rng = np.random.default_rng(2)
    for _ in range(50):
        X = rng.standard_normal((4, 4))
        S = X + X.T
        for t in sym_eig(S).eigenvalues:
            s = np.linalg.svd(S - t * np.eye(4), compute_uv=False)
            assert s[-1] <= 1e-10 * max(1.0, s[0])


def test_sym_eig_rejects_bad_input():
    with pytest.raises(DomainError):
        sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(DomainError):
        sym_eig(np.ones((2, 3)))
    with pytest.raises(DomainError):
        sym_eig(np.array([[np.nan, 0.0], [0.0, 1.0]]))


def test_min_eig_vector():
    S = np.array([[2.0, 1.0], [1.0, 2.0]])
    w, v = min_eig(S)
    assert w == pytest.approx(1.0)
    assert np.allclose(S @ v, w * v)


def test_spectral_radius_problem1_charpoly():
    A = np.array([[2.13, 1, 1], [0, 1, 0.3], [0, 0, 0.5]])
    B = np.array([[0.0], [0.0], [1.0]])
    K = np.array([[-3.5507, -2.6749, -2.4633]])
    C = A + B @ K
    # Independent oracle: roots of the characteristic polynomial (Faddeev-LeVerrier).
    n = 3
    M = np.zeros((n, n))
    coeffs = [1.0]
    for k in range(1, n + 1):
        M = C @ M + coeffs[-1] * np.eye(n)
        coeffs.append(-np.trace(C @ M) / k)
    rho = max(abs(np.roots(coeffs)))
    assert spectral_radius(C) == pytest.approx(rho, rel=1e-10)
    assert rho < 1.0
    assert is_schur_stable(C)


def test_spectral_radius_power_property():
    rng = np.random.default_rng(3)
    for _ in range(50):
        M = rng.standard_normal((3, 3))
        rho = spectral_radius(M)
        assert spectral_radius(np.linalg.matrix_power(M, 3)) == pytest.approx(rho**3, rel=1e-8)


def test_is_schur_stable_agrees_with_spectral_radius():
    rng = np.random.default_rng(4)
    for _ in range(200):
        M = rng.standard_normal((3, 3))
        rho = spectral_radius(M)
        if abs(rho - 1.0) < 0.05:
            continue
        assert is_schur_stable(M) == (rho < 1.0)


def test_dare_scalar_closed_form():
    a, b, q, r = 1.2, 0.5, 2.0, 0.3
    # p solves p = a^2 p - a^2 b^2 p^2 / (r + b^2 p) + q: b^2 p^2 + (r - a^2 r - q b^2) p - q r = 0
    c2, c1, c0 = b * b, r - a * a * r - q * b * b, -q * r
    p = (-c1 + np.sqrt(c1 * c1 - 4 * c2 * c0)) / (2 * c2)
    P = dare_solve([[a]], [[b]], [[q]], [[r]])
    assert P[0, 0] == pytest.approx(p, rel=1e-9)


def test_dare_zero_input_is_lyapunov_series():
    # With B ~ 0 the DARE is the Lyapunov equation P = A'PA + Q = sum (A^k)' Q A^k.
    A = np.array([[0.5, 0.2], [0.0, 0.3]])
    B = np.zeros((2, 1))
    Q = np.eye(2)
    P = dare_solve(A, B, Q, np.eye(1))
    S = np.zeros((2, 2))
    Ak = np.eye(2)
    for _ in range(200):
        S += Ak.T @ Q @ Ak
        Ak = Ak @ A
    assert np.allclose(P, S, atol=1e-9)


def test_dare_residual_random():
    rng = np.random.default_rng(5)
    for _ in range(100):
        n = int(rng.integers(1, 5))
        p = int(rng.integers(1, n + 1))
        A = rng.standard_normal((n, n))
        B = rng.standard_normal((n, p))
        X = rng.standard_normal((n, n))
        Q = X @ X.T + np.eye(n)
        R = np.eye(p)
        P = dare_solve(A, B, Q, R)
        res = A.T @ P @ A - P - A.T @ P @ B @ np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A) + Q
        assert np.linalg.norm(res) <= 1e-8 * (1 + np.linalg.norm(P))
        K = -np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
        assert spectral_radius(A + B @ K) < 1.0


def test_dare_unstabilizable_raises():
    A = np.array([[2.0, 0.0], [0.0, 0.5]])
    B = np.array([[0.0], [1.0]])
    with pytest.raises(ConvergenceError) as info:
        dare_solve(A, B, np.eye(2), np.eye(1), max_iter=500)
    assert np.isfinite(info.value.residual) or np.isnan(info.value.residual)


def test_lqr_gain_sign_convention():
    A = np.array([[1.0, 0.1], [0.0, 1.0]])
    B = np.array([[0.0], [0.1]])
    K = lqr_gain(A, B, np.eye(2), np.eye(1))
    assert spectral_radius(A + B @ K) < 1.0


def _brute_force_projection(v, s):
    # Oracle: the projection is the minimizer over every candidate support set of
    # the equality-constrained least squares problem restricted to that support.
    n = v.size
    best, best_d = None, np.inf
    for k in range(1, n + 1):
        for supp in itertools.combinations(range(n), k):
            idx = list(supp)
            w = np.zeros(n)
            w[idx] = v[idx] - (v[idx].sum() - s) / k
            if np.any(w < -1e-15):
                continue
            d = np.sum((w - v) ** 2)
            if d < best_d:
                best, best_d = w, d
    return best


def test_simplex_projection_brute_force_oracle():
    rng = np.random.default_rng(6)
    for _ in range(300):
        n = int(rng.integers(1, 7))
        v = rng.standard_normal(n) * 2
        s = float(rng.uniform(0.2, 3.0))
        w = simplex_projection(v, s)
        assert np.allclose(w, _brute_force_projection(v, s), atol=1e-12)


def test_simplex_projection_kkt_and_idempotent():
    rng = np.random.default_rng(7)
    for _ in range(300):
        v = rng.standard_normal(int(rng.integers(1, 30)))
        w = simplex_projection(v)
        assert np.all(w >= 0)
        assert w.sum() == pytest.approx(1.0, abs=1e-12)
        # KKT: w_i > 0 => v_i - w_i = tau; w_i = 0 => v_i <= tau
        tau = (v - w)[w > 0]
        assert np.ptp(tau) <= 1e-12
        assert np.all(v[w == 0] <= tau[0] + 1e-12)
        assert np.allclose(simplex_projection(w), w, atol=1e-14)


def test_simplex_projection_rejects_bad_input():
    with pytest.raises(DomainError):
        simplex_projection([1.0, np.inf])
    with pytest.raises(DomainError):
        simplex_projection([1.0, 2.0], s=0.0)
