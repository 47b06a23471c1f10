import numpy as np
import pytest
from conftest import PROBLEM1_WEIGHTS, SWITCHED_WEIGHTS, random_stable_mode

from flexmpc.errors import DomainError
from flexmpc.gdclf import (
    GdclfCertificate,
    Infeasible,
    LinearMode,
    NotFoundBelowCap,
    build_phi,
    descent_matrix,
    falsify_common_clf,
    minimal_m,
    synthesize,
    verify_certificate,
)


def _oracle_margin(modes, lam, eps):
    # Independent recomputation with numpy's symmetric eigensolver.
    worst = np.inf
    for md in modes:
        C = md.A + md.B @ md.K
        M = (1 - eps) * np.eye(md.n)
        Ck = np.eye(md.n)
        for l in lam:
            Ck = Ck @ C
            M -= l * Ck.T @ Ck
        worst = min(worst, np.linalg.eigvalsh(M)[0])
    return worst


def test_linear_mode_validation():
    with pytest.raises(DomainError):
        LinearMode(np.eye(2), np.ones((3, 1)))
    with pytest.raises(DomainError):
        LinearMode(np.eye(2), np.ones((2, 1)), np.zeros((1, 2)))  # rho(I) = 1
    md = LinearMode(np.eye(2), [[0.0], [1.0]])
    assert md.K is None


def test_build_phi_identity_and_nilpotent():
    Nil = np.array([[0.0, 1.0], [0.0, 0.0]])
    nil = LinearMode(Nil, np.zeros((2, 1)), np.zeros((1, 2)))
    phi = build_phi(nil, 2)
    assert np.array_equal(phi, np.vstack([Nil, np.zeros((2, 2))]))
    with pytest.raises(DomainError):
        build_phi(LinearMode(Nil, np.zeros((2, 1))), 2)


def test_build_phi_identity_closed_loop():
    # A + BK = I violates the stability invariant; a scaled identity keeps the
    # same structure with known powers.
    c = 0.5
    md = LinearMode(c * np.eye(2), np.eye(2), np.zeros((2, 2)))
    phi = build_phi(md, 3)
    assert np.allclose(phi, np.vstack([c * np.eye(2), c**2 * np.eye(2), c**3 * np.eye(2)]))


def test_build_phi_recursive_blocks(p1_mode):
    phi = build_phi(p1_mode, 10)
    C = p1_mode.closed_loop()
    n = 3
    for j in range(1, 10):
        prev = phi[(j - 1) * n : j * n]
        assert np.array_equal(phi[j * n : (j + 1) * n], prev @ C)
    for j in range(10):
        ref = np.linalg.matrix_power(C, j + 1)
        assert np.allclose(phi[j * n : (j + 1) * n], ref, atol=1e-10 * max(1.0, np.abs(ref).max()))


def test_deadbeat_certificate():
    md = LinearMode(np.array([[0.0, 1.0], [0.0, 0.0]]), np.eye(2), -np.array([[0.0, 1.0], [0.0, 0.0]]))
    cert = synthesize([md], 1, 0.5)
    assert isinstance(cert, GdclfCertificate)
    assert cert.lam == (1.0,)
    assert cert.margin == pytest.approx(0.5)
    assert minimal_m([md], 0.5)[0] == 1


def test_verify_rejects_negative_weights(p1_mode):
    cert = GdclfCertificate(2, (1.5, -0.5), 1e-10, {1: p1_mode.K})
    assert verify_certificate(cert, [p1_mode]) == -np.inf
    cert = GdclfCertificate(2, (0.3, 0.3), 1e-10, {1: p1_mode.K})  # sum < 1
    assert verify_certificate(cert, [p1_mode]) == -np.inf


def test_certificate_validation():
    with pytest.raises(DomainError):
        GdclfCertificate(2, (1.0,), 0.1, {})
    with pytest.raises(DomainError):
        GdclfCertificate(1, (1.0,), 1.0, {})


def test_published_weights_verify(p1_mode, sw_family):
    assert sum(PROBLEM1_WEIGHTS) == pytest.approx(1.0, abs=1e-12)
    assert sum(SWITCHED_WEIGHTS) == pytest.approx(1.5, abs=1e-12)
    c1 = GdclfCertificate(10, PROBLEM1_WEIGHTS, 1e-10, {1: p1_mode.K})
    m1 = verify_certificate(c1, [p1_mode])
    assert m1 >= -1e-6
    assert m1 == pytest.approx(_oracle_margin([p1_mode], PROBLEM1_WEIGHTS, 1e-10), abs=1e-10)
    gains = {md.label: md.K for md in sw_family}
    c2 = GdclfCertificate(10, SWITCHED_WEIGHTS, 1e-10, gains)
    m2 = verify_certificate(c2, sw_family)
    assert m2 >= -1e-6
    assert m2 == pytest.approx(_oracle_margin(sw_family, SWITCHED_WEIGHTS, 1e-10), abs=1e-10)


def test_synthesize_problem1_m10(p1_mode):
    cert = synthesize([p1_mode], 10)
    assert isinstance(cert, GdclfCertificate)
    assert cert.margin >= 0
    assert np.all(np.array(cert.lam) >= 0) and sum(cert.lam) >= 1 - 1e-12
    assert cert.margin == pytest.approx(_oracle_margin([p1_mode], cert.lam, 1e-10), abs=1e-9)


def test_synthesize_infeasible_returns_best_margin(p1_mode):
    res = synthesize([p1_mode], 5, iterations=1000)
    assert isinstance(res, Infeasible)
    assert not res
    assert res.best_margin < 0


def test_synthesize_deterministic(sw_family):
    for m in (4, 10):
        a = synthesize(sw_family, m, seed=3, iterations=300)
        b = synthesize(sw_family, m, seed=3, iterations=300)
        assert type(a) is type(b)
        if a:
            assert a.lam == b.lam and a.margin == b.margin
        else:
            assert a.best_lam == b.best_lam and a.best_margin == b.best_margin


def test_synthesize_bad_epsilon(p1_mode):
    with pytest.raises(DomainError):
        synthesize([p1_mode], 3, epsilon=0.0)
    with pytest.raises(DomainError):
        synthesize([p1_mode], 0)


def test_m1_is_one_step_contraction():
    rng = np.random.default_rng(11)
    for _ in range(40):
        md = random_stable_mode(rng, 2, 1, rho_max=0.95)
        C = md.closed_loop()
        lmax = np.linalg.eigvalsh(C.T @ C)[-1]
        res = synthesize([md], 1, 1e-3, iterations=50, restarts=2)
        assert bool(res) == (lmax <= 1 - 1e-3)


def test_feasible_certificates_pass_checker():
    rng = np.random.default_rng(12)
    for _ in range(5):
        md = random_stable_mode(rng, 3, 1, rho_max=0.8)
        cert = synthesize([md], 4, 1e-6, iterations=500, restarts=2)
        if cert:
            assert verify_certificate(cert, [md]) >= -1e-8


def test_epsilon_scaling_invariance(p1_mode):
    cert = GdclfCertificate(10, PROBLEM1_WEIGHTS, 1e-3, {1: p1_mode.K})
    mu = verify_certificate(cert, [p1_mode])
    assert mu > 0
    mu2 = verify_certificate(cert, [p1_mode], epsilon=1e-6)
    assert mu2 - mu == pytest.approx(1e-3 - 1e-6, abs=1e-12)


def test_last_index_witness():
    rng = np.random.default_rng(13)
    for _ in range(20):
        md = random_stable_mode(rng, 3, 1, rho_max=0.95)
        ok = False
        for m in range(1, 61):
            lam = tuple(0.0 for _ in range(m - 1)) + (1.0,)
            if verify_certificate(GdclfCertificate(m, lam, 1e-10, {0: md.K}), [md]) >= 0:
                ok = True
                break
        assert ok


def test_minimal_m_preconditions():
    md = LinearMode(np.eye(2) * 0.5, np.eye(2))
    with pytest.raises(DomainError):
        minimal_m([md])
    with pytest.raises(DomainError):
        minimal_m([md.with_gain(np.zeros((2, 2)))], m_max=0)


def test_minimal_m_not_found_below_cap(p1_mode):
    res = minimal_m([p1_mode], 1e-10, m_max=2, iterations=200, restarts=2)
    assert isinstance(res, NotFoundBelowCap)
    assert len(res.best_margins) == 2


def test_descent_matrix_contraction():
    md = LinearMode(0.5 * np.eye(2), np.array([[0.0], [1.0]]))
    D = descent_matrix(md, np.eye(2))
    assert np.all(np.linalg.eigvalsh(D) < 0)


def test_descent_matrix_best_input_oracle(sw_family):
    # x'Dx equals the minimum over a fine grid of u of V(Ax + Bu) - V(x).
    P = np.array([[1.0, 0.3], [0.3, 2.0]])
    md = sw_family[0]
    D = descent_matrix(md, P)
    x = np.array([0.7, -1.1])
    us = np.linspace(-50, 50, 200001)
    nxt = (md.A @ x)[:, None] + md.B @ us[None, :]
    vals = np.einsum("ik,ij,jk->k", nxt, P, nxt) - x @ P @ x
    assert x @ D @ x == pytest.approx(vals.min(), abs=1e-6)


def test_falsifier_single_mode_finds_clf():
    md = LinearMode(0.5 * np.eye(2), np.array([[0.0], [1.0]]), label=1)
    rep = falsify_common_clf([md], (-1, 1), (0, 2), 0.5)
    assert rep.conclusion == "found"
    assert any(p.q == 0 and p.r == 1 for p in rep.found)


def test_falsifier_switched_none_found_and_symmetric(sw_family):
    rep = falsify_common_clf(sw_family, step=0.1)
    assert rep.conclusion == "none found"
    pts = {(round(p.q, 9), round(p.r, 9)): p for p in rep.points}
    for (q, r), p in pts.items():
        assert p.failing or p.singular
        mirror = pts.get((round(-q, 9), r))
        assert mirror is not None
        if 1 in p.failing:
            assert -1 in mirror.failing
        assert p.violation[1] == pytest.approx(mirror.violation[-1], abs=1e-9)
    assert all(p.r > p.q**2 for p in rep.points)


def test_falsifier_errors(p1_mode, sw_family):
    with pytest.raises(DomainError):
        falsify_common_clf([p1_mode])
    with pytest.raises(DomainError):
        falsify_common_clf(sw_family, (2, 3), (0, 1), 0.5)
    other = LinearMode(sw_family[1].A, 2 * sw_family[1].B, None, -1)
    with pytest.raises(DomainError):
        falsify_common_clf([sw_family[0], other])
