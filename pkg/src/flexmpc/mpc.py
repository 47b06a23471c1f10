"""Flexible-step MPC (variable number of implemented inputs per instance)
and the one-step standard MPC baseline with a quadratic terminal cost."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Hashable, Sequence

import numpy as np

from .errors import AlgorithmInvariantError, ConvergenceError, DomainError, FeasibilityError
from .gdclf import GdclfCertificate, LinearMode, verify_certificate
from .ocp import AdcSpec, Box, CostSpec, OcpSpec, mode_sequence, rollout, solve_ocp

CERT_TOL = 1e-8


@dataclass(frozen=True)
class SwitchingSignal:
    """Known map ``k -> mode label``.

    ``rule`` is one of ``constant`` (``pattern[0]`` always), ``parity`` and
    ``periodic`` (``pattern[(k + offset) % len(pattern)]``; parity is the
    length-2 case), or ``table`` (``pattern[k]``, undefined past its end).
    """

    rule: str
    pattern: tuple
    offset: int = 0

    def __post_init__(self):
        object.__setattr__(self, "pattern", tuple(self.pattern))
        if self.rule not in ("constant", "parity", "periodic", "table"):
            raise DomainError(f"unknown switching rule {self.rule!r}")
        if not self.pattern:
            raise DomainError("switching pattern is empty")
        if self.rule == "constant" and len(self.pattern) != 1:
            raise DomainError("constant rule takes exactly one label")
        if self.rule == "parity" and len(self.pattern) != 2:
            raise DomainError("parity rule takes exactly two labels (even, odd)")

    @classmethod
    def constant(cls, label) -> "SwitchingSignal":
        return cls("constant", (label,))

    @classmethod
    def parity(cls, even, odd, offset: int = 0) -> "SwitchingSignal":
        return cls("parity", (even, odd), offset)

    def __call__(self, k: int) -> Hashable:
        if k < 0:
            raise DomainError(f"switching signal undefined at k = {k}")
        if self.rule == "constant":
            return self.pattern[0]
        if self.rule == "table":
            if k >= len(self.pattern):
                raise DomainError(f"switching table undefined at k = {k}")
            return self.pattern[k]
        return self.pattern[(k + self.offset) % len(self.pattern)]


class StepPolicy(enum.Enum):
    MAX_DESCENT = "max"
    FIRST_DESCENT = "first"

    @classmethod
    def parse(cls, value) -> "StepPolicy":
        if isinstance(value, cls):
            return value
        v = str(value).lower().replace("_", "").replace("-", "")
        if v in ("max", "maxdescent"):
            return cls.MAX_DESCENT
        if v in ("first", "firstdescent"):
            return cls.FIRST_DESCENT
        raise DomainError(f"unknown step policy {value!r}")


@dataclass(frozen=True)
class SwitchedScenario:
    """Everything needed to run either MPC scheme on a (switched) linear plant."""

    name: str
    modes: tuple[LinearMode, ...]
    signal: SwitchingSignal
    horizon: int
    cost: CostSpec
    x0: np.ndarray
    T: int
    epsilon: float
    m: int
    policy: StepPolicy = StepPolicy.FIRST_DESCENT
    input_box: Box | None = None
    state_box: Box | None = None
    terminal_box: Box | None = None
    certificate: GdclfCertificate | None = None

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float).ravel())
        if not self.modes:
            raise DomainError("scenario needs at least one mode")
        n, p = self.modes[0].n, self.modes[0].p
        for md in self.modes:
            if (md.n, md.p) != (n, p):
                raise DomainError(f"mode {md.label} has inconsistent dimensions")
        if self.x0.shape != (n,):
            raise DomainError(f"x0 must have {n} entries")
        if not 1 <= self.m <= self.horizon:
            raise DomainError("need 1 <= m <= horizon")
        if self.T < 0:
            raise DomainError("T must be nonnegative")

    @property
    def mode_map(self) -> dict:
        return {md.label: md for md in self.modes}

    def mode_at(self, k: int) -> LinearMode:
        return mode_sequence(self.mode_map, self.signal, k, 1)[0]

    def with_certificate(self, cert: GdclfCertificate) -> "SwitchedScenario":
        modes = tuple(md.with_gain(cert.gains[md.label]) if md.label in cert.gains else md for md in self.modes)
        return replace(self, modes=modes, certificate=cert)

    def ocp_spec(self, adc: AdcSpec | None, cost: CostSpec | None = None) -> OcpSpec:
        return OcpSpec(
            self.horizon,
            cost or self.cost,
            self.input_box,
            self.state_box,
            self.terminal_box,
            adc,
        )


@dataclass
class MpcTrace:
    """Closed-loop record.

    ``states[k]`` is x(k) for ``k = 0..T`` and ``inputs[k]`` is u(k) for
    ``k = 0..T-1``.  ``instants[i]`` is the time of optimization instance i,
    ``steps[i]`` the number of inputs it implemented (the last instance may be
    cut short by the end of the run; ``chosen_steps`` keeps the selected
    index), and ``V_values[i] = ||x(instants[i])||^2``.
    """

    instants: list[int] = field(default_factory=list)
    states: list[np.ndarray] = field(default_factory=list)
    inputs: list[np.ndarray] = field(default_factory=list)
    steps: list[int] = field(default_factory=list)
    chosen_steps: list[int] = field(default_factory=list)
    V_values: list[float] = field(default_factory=list)
    modes: list = field(default_factory=list)
    diagnostics: list[dict] = field(default_factory=list)
    epsilon: float = 0.0

    @property
    def X(self) -> np.ndarray:
        return np.array(self.states)

    @property
    def U(self) -> np.ndarray:
        return np.array(self.inputs).reshape(len(self.inputs), -1)

    def final_norm(self) -> float:
        return float(np.linalg.norm(self.states[-1]))

    def instance_of_time(self) -> list[int]:
        """Instance index that produced u(k), for ``k = 0..T-1``."""
        out = []
        for i, s in enumerate(self.steps):
            out += [i] * s
        return out

    def step_histogram(self) -> dict[int, int]:
        hist: dict[int, int] = {}
        for s in self.chosen_steps:
            hist[s] = hist.get(s, 0) + 1
        return dict(sorted(hist.items()))


def select_step(V_pred: Sequence[float], V0: float, epsilon: float, policy) -> int:
    """Index ``1 <= l <= m`` at which ``V(x^l) - V(x^0) <= -epsilon V(x^0)``.

    ``V_pred`` holds ``V(x^1) .. V(x^m)``.  FIRST_DESCENT returns the smallest
    qualifying index, MAX_DESCENT the one with the smallest V (ties go to the
    smaller index).
    """
    policy = StepPolicy.parse(policy)
    qualifying = [j for j, v in enumerate(V_pred, start=1) if v - V0 <= -epsilon * V0]
    if not qualifying:
        raise AlgorithmInvariantError(
            "no predicted index achieves the certified descent",
            diagnostics={"V0": V0, "V_pred": list(V_pred), "epsilon": epsilon},
        )
    if policy is StepPolicy.FIRST_DESCENT:
        return qualifying[0]
    return min(qualifying, key=lambda j: (V_pred[j - 1], j))


def _shift_warm_start(prev_inputs: np.ndarray, steps: int, mode_seq, x_pred) -> np.ndarray:
    """Drop the implemented inputs and pad with the feedback rollout from the predicted end state."""
    rest = prev_inputs[steps:]
    x = np.asarray(x_pred, dtype=float)
    pad = []
    for md in mode_seq[len(rest):]:
        u = md.K @ x if md.K is not None else np.zeros(md.p)
        pad.append(u)
        x = md.A @ x + md.B @ u
    if pad:
        rest = np.vstack([rest, np.array(pad)])
    return rest


def flexible_step_run(
    scenario: SwitchedScenario,
    policy=None,
    T: int | None = None,
    certificate: GdclfCertificate | None = None,
) -> MpcTrace:
    """Run the flexible-step scheme for ``T`` time steps.

    Each instance solves the OCP with the average decrease constraint, picks
    an index by ``policy`` and implements that many optimal inputs.

    Raises
    ------
    DomainError
        Missing or invalid certificate.
    AlgorithmInvariantError
        No qualifying index in some instance (a solver tolerance breach).
    ConvergenceError, FeasibilityError
        OCP solver abort.  Solver and invariant errors carry ``instance`` and
        ``time`` attributes locating the failing optimization instance.
    """
    cert = certificate or scenario.certificate
    if cert is None:
        raise DomainError("flexible-step MPC needs a g-dclf certificate")
    if cert.m > scenario.horizon:
        raise DomainError("certificate order exceeds the prediction horizon")
    if cert.gains:
        scenario = scenario.with_certificate(cert)
    eps = scenario.epsilon
    margin = verify_certificate(cert, scenario.modes, epsilon=eps)
    if margin < -CERT_TOL:
        raise DomainError(f"certificate is not valid for this scenario (margin {margin:.3e})")
    policy = StepPolicy.parse(policy if policy is not None else scenario.policy)
    T = scenario.T if T is None else T
    spec = scenario.ocp_spec(AdcSpec(cert.lam, eps))
    modes = scenario.mode_map
    m = cert.m

    trace = MpcTrace(epsilon=eps)
    x = scenario.x0.copy()
    trace.states.append(x.copy())
    k = 0
    warm = None
    while k < T:
        V0 = float(x @ x)
        trace.instants.append(k)
        trace.V_values.append(V0)
        if V0 == 0.0:
            # alpha(0) = 0: nothing to certify, hold the origin for one step.
            md = scenario.mode_at(k)
            u = np.zeros(md.p)
            x = md.A @ x + md.B @ u
            trace.inputs.append(u)
            trace.states.append(x.copy())
            trace.modes.append(md.label)
            trace.steps.append(1)
            trace.chosen_steps.append(1)
            trace.diagnostics.append({"skipped": True})
            k += 1
            warm = None
            continue
        try:
            sol = solve_ocp(spec, modes, scenario.signal, k, x, warm_start=warm)
            V_pred = [float(s @ s) for s in sol.states[:m]]
            ell = select_step(V_pred, V0, eps, policy)
        except (ConvergenceError, FeasibilityError, AlgorithmInvariantError) as exc:
            exc.instance = len(trace.instants) - 1
            exc.time = k
            raise
        n_impl = min(ell, T - k)
        seq = mode_sequence(modes, scenario.signal, k, spec.horizon)
        implemented = rollout(seq[:n_impl], x, sol.inputs[:n_impl])
        for j in range(n_impl):
            trace.inputs.append(sol.inputs[j].copy())
            trace.states.append(implemented[j].copy())
            trace.modes.append(seq[j].label)
        x = implemented[-1]
        trace.steps.append(n_impl)
        trace.chosen_steps.append(ell)
        trace.diagnostics.append(
            {
                "objective": sol.objective,
                "adc_slack": sol.adc_slack,
                "kkt_residual": sol.kkt_residual,
                "iterations": sol.iterations,
                "start": sol.diagnostics["start"],
                "V_pred": V_pred,
            }
        )
        k += n_impl
        if k < T:
            next_seq = mode_sequence(modes, scenario.signal, k, spec.horizon)
            warm = _shift_warm_start(sol.inputs, n_impl, next_seq, sol.states[-1])
    return trace


def standard_mpc_run(scenario: SwitchedScenario, terminal, T: int | None = None) -> MpcTrace:
    """One-step receding horizon MPC with terminal cost ``x' terminal x`` and no adc."""
    T = scenario.T if T is None else T
    spec = scenario.ocp_spec(None, scenario.cost.with_terminal(terminal))
    modes = scenario.mode_map
    trace = MpcTrace(epsilon=0.0)
    x = scenario.x0.copy()
    trace.states.append(x.copy())
    warm = None
    for k in range(T):
        trace.instants.append(k)
        trace.V_values.append(float(x @ x))
        try:
            sol = solve_ocp(spec, modes, scenario.signal, k, x, warm_start=warm)
        except (ConvergenceError, FeasibilityError) as exc:
            exc.instance = k
            exc.time = k
            raise
        md = scenario.mode_at(k)
        u = sol.inputs[0].copy()
        x = rollout([md], x, u[None, :])[0]
        trace.inputs.append(u)
        trace.states.append(x.copy())
        trace.modes.append(md.label)
        trace.steps.append(1)
        trace.chosen_steps.append(1)
        trace.diagnostics.append({"objective": sol.objective, "kkt_residual": sol.kkt_residual})
        if k + 1 < T:
            warm = _shift_warm_start(sol.inputs, 1, mode_sequence(modes, scenario.signal, k + 1, spec.horizon), sol.states[-1])
    return trace
