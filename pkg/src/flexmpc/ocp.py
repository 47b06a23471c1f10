"""Finite-horizon optimal control problem with the average decrease constraint.

The dynamics are linear (possibly switching along the horizon), so every
predicted state is an affine function of the stacked input vector.  The
problem is solved with an augmented Lagrangian on the adc and state boxes
and L-BFGS-B for the inner smooth minimization (followed by a few exact-Hessian
Newton steps when there are no input bounds); input boxes are passed to
L-BFGS-B as simple bounds.  The l1 state cost is smoothed by
``sqrt(x^2 + mu^2)`` and ``mu`` is driven down along a fixed schedule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Hashable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import ConvergenceError, DomainError, FeasibilityError
from .gdclf import LinearMode
from .numkernel import as_matrix

FEAS_TOL = 1e-7
ADC_BACKOFF = 1e-9  # relative tightening of the adc, absorbs AL residual infeasibility
AL_OUTER_MAX = 30
AL_PENALTY_GROWTH = 10.0
AL_PENALTY_INIT = 10.0
L1_SMOOTHING_SCHEDULE = (1e-2, 1e-4, 1e-6)
NEWTON_POLISH_MAX = 50


@dataclass(frozen=True)
class Box:
    """Per-coordinate bounds ``lower <= z <= upper``; infinities allowed."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).ravel()
        hi = np.asarray(self.upper, dtype=float).ravel()
        if lo.shape != hi.shape:
            raise DomainError("box bounds must have equal length")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise DomainError("box bounds contain NaN")
        if not (np.all(lo < 0.0) and np.all(hi > 0.0)):
            raise DomainError("box must contain 0 in its interior")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def __len__(self):
        return self.lower.size

    def violation(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return np.maximum(self.lower - z, z - self.upper)


@dataclass(frozen=True)
class CostSpec:
    """Running cost ``x'Qx + w ||x||_1 + u'Ru`` plus terminal ``x'Px``.

    ``input_quadratic`` may be a scalar (meaning ``r I``).
    """

    state_quadratic: np.ndarray | None = None
    state_l1: float | None = None
    input_quadratic: np.ndarray | float = 1.0
    terminal: np.ndarray | None = None

    def __post_init__(self):
        if self.state_quadratic is None and not self.state_l1:
            raise DomainError("cost needs a quadratic or l1 state term")
        if self.state_quadratic is not None:
            object.__setattr__(self, "state_quadratic", as_matrix(self.state_quadratic, "state_quadratic"))
        if self.state_l1 is not None and self.state_l1 < 0:
            raise DomainError("state_l1 weight must be nonnegative")
        if self.terminal is not None:
            object.__setattr__(self, "terminal", as_matrix(self.terminal, "terminal"))
        R = np.asarray(self.input_quadratic, dtype=float)
        if R.ndim == 0:
            if not R > 0:
                raise DomainError("input weight must be positive")
        else:
            R = as_matrix(R, "input_quadratic")
            if R.shape[0] != R.shape[1] or np.linalg.eigvalsh(0.5 * (R + R.T))[0] <= 0:
                raise DomainError("input weight must be positive definite")
            object.__setattr__(self, "input_quadratic", R)

    def input_matrix(self, p: int) -> np.ndarray:
        R = np.asarray(self.input_quadratic, dtype=float)
        if R.ndim == 0:
            return float(R) * np.eye(p)
        if R.shape != (p, p):
            raise DomainError(f"input weight must be {p}x{p}")
        return R

    def with_terminal(self, P) -> "CostSpec":
        return CostSpec(self.state_quadratic, self.state_l1, self.input_quadratic, P)


@dataclass(frozen=True)
class AdcSpec:
    lam: tuple[float, ...]
    epsilon: float

    def __post_init__(self):
        object.__setattr__(self, "lam", tuple(float(v) for v in self.lam))
        if any(v < 0 for v in self.lam):
            raise DomainError("adc weights must be nonnegative")
        if not 0.0 <= self.epsilon < 1.0:
            raise DomainError("adc epsilon must lie in [0, 1)")

    @property
    def m(self) -> int:
        return len(self.lam)


@dataclass(frozen=True)
class OcpSpec:
    horizon: int
    cost: CostSpec
    input_box: Box | None = None
    state_box: Box | None = None
    terminal_box: Box | None = None
    adc: AdcSpec | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise DomainError("horizon must be >= 1")
        if self.adc is not None and self.adc.m > self.horizon:
            raise DomainError(f"adc order m = {self.adc.m} exceeds horizon {self.horizon}")


@dataclass
class OcpSolution:
    inputs: np.ndarray  # (N, p): u^0 .. u^{N-1}
    states: np.ndarray  # (N, n): x^1 .. x^N
    objective: float
    adc_slack: float
    kkt_residual: float
    iterations: int
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Prediction model


def mode_sequence(modes, signal: Callable[[int], Hashable] | None, k: int, N: int) -> list[LinearMode]:
    """Active mode for each prediction step ``k .. k+N-1``."""
    if isinstance(modes, LinearMode):
        return [modes] * N
    if not isinstance(modes, Mapping):
        modes = {md.label: md for md in modes}
    if signal is None:
        if len(modes) != 1:
            raise DomainError("a switching signal is required for more than one mode")
        (only,) = modes.values()
        return [only] * N
    seq = []
    for j in range(N):
        label = signal(k + j)
        if label not in modes:
            raise DomainError(f"signal selects unknown mode {label!r} at k = {k + j}")
        seq.append(modes[label])
    return seq


def rollout(mode_seq: Sequence[LinearMode], x0, inputs) -> np.ndarray:
    """States ``x^1 .. x^N`` from the recursion ``x^{j+1} = A x^j + B u^j``."""
    x = np.asarray(x0, dtype=float)
    inputs = np.asarray(inputs, dtype=float).reshape(len(mode_seq), -1)
    out = np.empty((len(mode_seq), x.size))
    for j, md in enumerate(mode_seq):
        x = md.A @ x + md.B @ inputs[j]
        out[j] = x
    return out


def feedback_rollout(mode_seq: Sequence[LinearMode], x0) -> tuple[np.ndarray, np.ndarray]:
    """Inputs and states under ``u^j = K_j x^j`` (each mode's own gain)."""
    x = np.asarray(x0, dtype=float)
    N = len(mode_seq)
    us = np.empty((N, mode_seq[0].p))
    xs = np.empty((N, x.size))
    for j, md in enumerate(mode_seq):
        if md.K is None:
            raise DomainError(f"mode {md.label} has no gain for the feedback rollout")
        us[j] = md.K @ x
        x = md.A @ x + md.B @ us[j]
        xs[j] = x
    return us, xs


@dataclass(frozen=True)
class AffineMaps:
    """``x^j = G[j-1] @ u + g[j-1]`` for ``j = 1..N`` with ``u`` the flat input vector."""

    G: np.ndarray  # (N, n, N*p)
    g: np.ndarray  # (N, n)

    def states(self, u) -> np.ndarray:
        return self.G @ np.asarray(u, dtype=float).ravel() + self.g


def condense(modes, signal, k: int, x0, N: int) -> AffineMaps:
    """Affine input-to-state maps over the window ``k .. k+N-1``."""
    seq = mode_sequence(modes, signal, k, N)
    return _condense_seq(seq, np.asarray(x0, dtype=float))


def _condense_seq(seq: Sequence[LinearMode], x0: np.ndarray) -> AffineMaps:
    N = len(seq)
    n, p = seq[0].n, seq[0].p
    G = np.zeros((N, n, N * p))
    g = np.zeros((N, n))
    Gj = np.zeros((n, N * p))
    gj = x0
    for j, md in enumerate(seq):
        Gj = md.A @ Gj
        Gj[:, j * p:(j + 1) * p] += md.B
        gj = md.A @ gj
        G[j] = Gj
        g[j] = gj
    return AffineMaps(G, g)


@dataclass(frozen=True)
class AdcQuadratic:
    """Convex quadratic ``u -> sum_i lam_i ||x^i(u)||^2 - (1 - eps) ||x0||^2``.

    Nonpositive values mean the average decrease constraint holds.
    """

    G: np.ndarray  # (m, n, Np)
    g: np.ndarray  # (m, n)
    lam: np.ndarray
    rhs: float  # (1 - eps) ||x0||^2

    def value(self, u) -> float:
        X = self.G @ u + self.g
        return float(self.lam @ np.einsum("ij,ij->i", X, X)) - self.rhs

    def grad(self, u) -> np.ndarray:
        X = self.G @ u + self.g
        return 2.0 * np.einsum("i,ijk,ij->k", self.lam, self.G, X)

    @property
    def hessian(self) -> np.ndarray:
        return 2.0 * np.einsum("i,ijk,ijl->kl", self.lam, self.G, self.G)

    def minimizer(self) -> np.ndarray:
        """Least-norm minimizer of the quadratic (the most adc-feasible input)."""
        w = np.sqrt(self.lam)[:, None, None]
        Gs = (w * self.G).reshape(-1, self.G.shape[2])
        gs = (w[:, :, 0] * self.g).ravel()
        return np.linalg.lstsq(Gs, -gs, rcond=None)[0]


def adc_constraint(maps: AffineMaps, lam, epsilon: float, x0) -> AdcQuadratic:
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise DomainError("adc weights must be nonnegative")
    m = lam.size
    if m > maps.G.shape[0]:
        raise DomainError("adc order exceeds the prediction horizon")
    x0 = np.asarray(x0, dtype=float)
    return AdcQuadratic(maps.G[:m], maps.g[:m], lam, (1.0 - epsilon) * float(x0 @ x0))


# ---------------------------------------------------------------------------
# Objective


class OcpProblem:
    """Condensed objective and constraints for one OCP instance."""

    def __init__(self, spec: OcpSpec, mode_seq: Sequence[LinearMode], x0):
        self.spec = spec
        self.seq = list(mode_seq)
        self.x0 = np.asarray(x0, dtype=float)
        self.N = spec.horizon
        self.n = self.seq[0].n
        self.p = self.seq[0].p
        if self.x0.shape != (self.n,):
            raise DomainError(f"x0 must have {self.n} entries")
        self.maps = _condense_seq(self.seq, self.x0)
        cost = spec.cost
        self.Q = cost.state_quadratic
        if self.Q is not None and self.Q.shape != (self.n, self.n):
            raise DomainError("state weight has wrong shape")
        self.w1 = float(cost.state_l1 or 0.0)
        self.R = cost.input_matrix(self.p)
        self.Pf = cost.terminal
        if self.Pf is not None and self.Pf.shape != (self.n, self.n):
            raise DomainError("terminal weight has wrong shape")
        self.adc = None
        if spec.adc is not None:
            self.adc = adc_constraint(self.maps, spec.adc.lam, spec.adc.epsilon, self.x0)
        self._build_state_rows()

    def _build_state_rows(self):
        rows, offs, scales, labels = [], [], [], []
        boxes = []
        if self.spec.state_box is not None:
            boxes += [(j, self.spec.state_box, "state") for j in range(self.N)]
        if self.spec.terminal_box is not None:
            boxes.append((self.N - 1, self.spec.terminal_box, "terminal"))
        for j, box, kind in boxes:
            if len(box) != self.n:
                raise DomainError(f"{kind} box must have {self.n} entries")
            for i in range(self.n):
                for sign, bound in ((1.0, box.upper[i]), (-1.0, box.lower[i])):
                    if np.isfinite(bound):
                        # sign * x_i - sign * bound <= 0
                        rows.append(sign * self.maps.G[j, i])
                        offs.append(sign * self.maps.g[j, i] - sign * bound)
                        scales.append(1.0 / max(1.0, abs(bound)))
                        labels.append((kind, j + 1, i))
        Np = self.N * self.p
        self.C = np.array(rows).reshape(-1, Np)
        self.d = np.array(offs)
        self.c_scale = np.array(scales)
        self.c_labels = labels

    def states(self, u) -> np.ndarray:
        """Predicted ``x^0 .. x^N`` via the condensed maps."""
        return np.vstack([self.x0, self.maps.states(u)])

    def objective(self, u, mu: float | None = None) -> float:
        """True cost when ``mu`` is None, else the l1-smoothed cost."""
        u = np.asarray(u, dtype=float).ravel()
        X = self.states(u)
        U = u.reshape(self.N, self.p)
        run = X[:-1]
        val = float(np.einsum("ij,jk,ik->", U, self.R, U))
        if self.Q is not None:
            val += float(np.einsum("ij,jk,ik->", run, self.Q, run))
        if self.w1:
            if mu is None:
                val += self.w1 * float(np.abs(run).sum())
            else:
                val += self.w1 * float(np.sqrt(run * run + mu * mu).sum())
        if self.Pf is not None:
            val += float(X[-1] @ self.Pf @ X[-1])
        return val

    def gradient(self, u, mu: float) -> np.ndarray:
        """Gradient of the smoothed cost."""
        u = np.asarray(u, dtype=float).ravel()
        X = self.states(u)
        U = u.reshape(self.N, self.p)
        # dcost/dx^j for j = 1..N (x^0 is fixed)
        dX = np.zeros((self.N, self.n))
        run = X[1:-1]
        if self.Q is not None:
            dX[:-1] += run @ (self.Q + self.Q.T)
        if self.w1:
            dX[:-1] += self.w1 * run / np.sqrt(run * run + mu * mu)
        if self.Pf is not None:
            dX[-1] += (self.Pf + self.Pf.T) @ X[-1]
        grad = np.einsum("ij,ijk->k", dX, self.maps.G)
        grad += (U @ (self.R + self.R.T)).ravel()
        return grad

    def hessian(self, u, mu: float) -> np.ndarray:
        """Hessian of the smoothed cost."""
        u = np.asarray(u, dtype=float).ravel()
        X = self.states(u)
        G = self.maps.G
        H = np.kron(np.eye(self.N), self.R + self.R.T)
        run_G = G[:-1]
        if self.Q is not None:
            H += np.einsum("jak,ab,jbl->kl", run_G, self.Q + self.Q.T, run_G)
        if self.w1:
            run = X[1:-1]
            curv = self.w1 * mu * mu / (run * run + mu * mu) ** 1.5
            H += np.einsum("jak,ja,jal->kl", run_G, curv, run_G)
        if self.Pf is not None:
            H += G[-1].T @ (self.Pf + self.Pf.T) @ G[-1]
        return H

    def state_constraints(self, u) -> np.ndarray:
        return self.C @ u + self.d

    def box_violation(self, u) -> tuple[float, tuple | None]:
        """Largest box violation and the coordinate where it occurs."""
        worst, where = 0.0, None
        ib = self.spec.input_box
        U = np.asarray(u, dtype=float).reshape(self.N, self.p)
        if ib is not None:
            if len(ib) != self.p:
                raise DomainError(f"input box must have {self.p} entries")
            v = ib.violation(U)
            j, i = np.unravel_index(np.argmax(v), v.shape)
            if v[j, i] > worst:
                worst, where = float(v[j, i]), ("input", int(j), int(i))
        if self.C.shape[0]:
            v = self.state_constraints(np.ravel(u))
            i = int(np.argmax(v))
            if v[i] > worst:
                worst, where = float(v[i]), self.c_labels[i]
        return worst, where


# ---------------------------------------------------------------------------
# Solver


def _feasible_start(prob: OcpProblem) -> tuple[np.ndarray, str]:
    if all(md.K is not None for md in prob.seq):
        us, _ = feedback_rollout(prob.seq, prob.x0)
        u = us.ravel()
        source = "feedback"
    else:
        u = np.zeros(prob.N * prob.p)
        source = "zero"
    if prob.adc is not None:
        V0 = float(prob.x0 @ prob.x0)
        if prob.adc.value(u) > -ADC_BACKOFF * V0:
            # Feedback rollout is not certified when the mode changes inside the window.
            u = prob.adc.minimizer()
            source = "adc-minimizer"
            if prob.adc.value(u) > -ADC_BACKOFF * V0:
                raise FeasibilityError(
                    f"average decrease constraint infeasible (best value {prob.adc.value(u):.3e})",
                    coordinate=("adc",),
                )
    viol, where = prob.box_violation(u)
    if viol > 0.0:
        raise FeasibilityError(f"feasible start violates {where} by {viol:.3e}", coordinate=where)
    return u, source


def _al_minimize(prob: OcpProblem, u0, mu, f_scale, bounds, mult, rho, inner_opts):
    """Augmented Lagrangian loop; returns (u, multipliers, rho, info)."""
    V0 = float(prob.x0 @ prob.x0)
    has_adc = prob.adc is not None
    n_c = int(has_adc) + prob.C.shape[0]

    def cons(u):
        parts, jacs = [], []
        if has_adc:
            parts.append([prob.adc.value(u) / V0 + ADC_BACKOFF])
            jacs.append(prob.adc.grad(u)[None, :] / V0)
        if prob.C.shape[0]:
            parts.append((prob.C @ u + prob.d) * prob.c_scale)
            jacs.append(prob.C * prob.c_scale[:, None])
        if not parts:
            return np.zeros(0), np.zeros((0, u.size))
        return np.concatenate(parts), np.vstack(jacs)

    def lagr(u, mult, rho):
        f = prob.objective(u, mu) * f_scale
        g = prob.gradient(u, mu) * f_scale
        if n_c:
            c, J = cons(u)
            shifted = np.maximum(0.0, mult + rho * c)
            f += (shifted @ shifted - mult @ mult) / (2.0 * rho)
            g = g + J.T @ shifted
        return f, g

    def lagr_hess(u, mult, rho):
        H = prob.hessian(u, mu) * f_scale
        if n_c:
            c, J = cons(u)
            shifted = np.maximum(0.0, mult + rho * c)
            act = shifted > 0.0
            H = H + rho * J[act].T @ J[act]
            if has_adc and act[0]:
                H = H + shifted[0] * prob.adc.hessian / V0
        return H

    def newton_polish(u, mult, rho):
        f, g = lagr(u, mult, rho)
        steps = 0
        for _ in range(NEWTON_POLISH_MAX):
            H = lagr_hess(u, mult, rho)
            try:
                d = -np.linalg.solve(H, g)
            except np.linalg.LinAlgError:
                break
            slope = float(g @ d)
            if not slope < 0.0:
                break
            gnorm = np.linalg.norm(g)
            t = 1.0
            while t > 1e-12:
                f_new, g_new = lagr(u + t * d, mult, rho)
                if f_new <= f + 1e-4 * t * slope:
                    break
                # near the optimum f stalls at rounding level; accept gradient progress
                if f_new <= f + 1e-15 * abs(f) and np.linalg.norm(g_new) < gnorm:
                    break
                t *= 0.5
            else:
                break
            if np.linalg.norm(g_new) >= gnorm and f_new >= f:
                break
            u, f, g = u + t * d, f_new, g_new
            steps += 1
        return u, steps

    u = np.asarray(u0, dtype=float).copy()
    iters = 0
    prev_viol = np.inf
    outer = 0
    converged = n_c == 0
    for outer in range(1, (AL_OUTER_MAX if n_c else 1) + 1):
        res = minimize(lagr, u, args=(mult, rho), jac=True, method="L-BFGS-B", bounds=bounds, options=inner_opts)
        u = res.x
        iters += int(res.nit)
        if bounds is None:
            u, polish = newton_polish(u, mult, rho)
            iters += polish
        if not n_c:
            break
        c, _ = cons(u)
        mult = np.maximum(0.0, mult + rho * c)
        viol = max(0.0, float(c.max()))
        comp = float(np.max(np.abs(np.minimum(-c, mult))))
        if viol <= 1e-10 and comp <= 1e-9:
            converged = True
            break
        if viol > 0.25 * prev_viol:
            rho *= AL_PENALTY_GROWTH
        prev_viol = viol
    # gradient of the Lagrangian with the updated multipliers
    g = prob.gradient(u, mu) * f_scale
    if n_c:
        g = g + cons(u)[1].T @ mult
    if bounds is not None:
        lo = np.array([b[0] for b in bounds])
        hi = np.array([b[1] for b in bounds])
        g = np.where((u <= lo) & (g > 0), 0.0, g)
        g = np.where((u >= hi) & (g < 0), 0.0, g)
    return u, mult, rho, {"iterations": iters, "outer": outer, "converged": converged, "stationarity": float(np.linalg.norm(g)) / f_scale}


def _restore(prob: OcpProblem, u, u_feas) -> tuple[np.ndarray, float]:
    """Move ``u`` toward the strictly feasible ``u_feas`` until every constraint holds."""

    def ok(v):
        if prob.adc is not None and prob.adc.value(v) > 0.0:
            return False
        return prob.box_violation(v)[0] <= 0.0

    if ok(u):
        return u, 0.0
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if ok(u + mid * (u_feas - u)):
            hi = mid
        else:
            lo = mid
    return u + hi * (u_feas - u), hi


def solve_ocp(spec: OcpSpec, modes, signal, k: int, x0, warm_start=None) -> OcpSolution:
    """Solve one OCP instance at time ``k`` from state ``x0``.

    Parameters
    ----------
    spec : OcpSpec
    modes : LinearMode, sequence or mapping of LinearMode
        Mapping keys (or ``mode.label``) are the values produced by ``signal``.
    signal : callable or None
        ``signal(k) -> label``; may be None for a single mode.
    warm_start : array_like, optional
        Initial iterate, shape (N, p).  The feasibility fallback is always the
        feedback rollout (or the adc minimizer when that is not feasible).

    Raises
    ------
    FeasibilityError
        The feasible start violates a box (or the adc cannot be met).
    ConvergenceError
        The final point is infeasible beyond ``FEAS_TOL``.
    """
    seq = mode_sequence(modes, signal, k, spec.horizon)
    prob = OcpProblem(spec, seq, x0)
    u_feas, start_source = _feasible_start(prob)
    f_feas = prob.objective(u_feas)
    f_scale = 1.0 / max(f_feas, 1e-300)
    grad0 = float(np.linalg.norm(prob.gradient(u_feas, L1_SMOOTHING_SCHEDULE[-1])))

    bounds = None
    if spec.input_box is not None:
        lo = np.tile(spec.input_box.lower, spec.horizon)
        hi = np.tile(spec.input_box.upper, spec.horizon)
        bounds = list(zip(np.where(np.isfinite(lo), lo, None), np.where(np.isfinite(hi), hi, None)))

    u = u_feas.copy() if warm_start is None else np.asarray(warm_start, dtype=float).ravel().copy()
    if u.size != spec.horizon * prob.p:
        raise DomainError("warm start has wrong size")
    n_c = int(prob.adc is not None) + prob.C.shape[0]
    mult = np.zeros(n_c)
    rho = AL_PENALTY_INIT
    inner_opts = {"maxiter": 20000, "maxcor": 30, "gtol": 1e-13, "ftol": 1e-16, "maxls": 50}
    schedule = L1_SMOOTHING_SCHEDULE if prob.w1 else (0.0,)
    stages = []
    total_iter = 0
    info = {}
    for mu in schedule:
        u, mult, rho, info = _al_minimize(prob, u, mu, f_scale, bounds, mult, rho, inner_opts)
        total_iter += info["iterations"]
        stages.append(prob.objective(u))
    u, blend = _restore(prob, u, u_feas)
    if prob.objective(u) > f_feas:
        u, blend = u_feas.copy(), 1.0
    adc_slack = prob.adc.value(u) if prob.adc is not None else float("-inf")
    box_viol, where = prob.box_violation(u)
    if adc_slack > FEAS_TOL or box_viol > FEAS_TOL:
        raise ConvergenceError(
            "OCP iterate infeasible after the iteration cap",
            residual=max(adc_slack, box_viol),
            diagnostics={"where": where, "adc_slack": adc_slack},
        )
    states = rollout(seq, prob.x0, u.reshape(spec.horizon, prob.p))
    return OcpSolution(
        inputs=u.reshape(spec.horizon, prob.p),
        states=states,
        objective=prob.objective(u),
        adc_slack=float(adc_slack),
        kkt_residual=float(info["stationarity"]),
        iterations=total_iter,
        diagnostics={
            "start": start_source,
            "start_objective": f_feas,
            "start_gradient_norm": grad0,
            "continuation": stages,
            "smoothing": list(schedule),
            "restoration_blend": blend,
            "al_outer": info["outer"],
            "al_converged": info["converged"],
            "modes": [md.label for md in seq],
        },
    )
