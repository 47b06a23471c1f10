"""Scenario files, certificate documents and trace CSV export.

Scenario JSON layout (all matrices as nested lists)::

    {
      "name": "problem2",
      "modes": [{"label": 1, "A": [[...]], "B": [[...]], "K": [[...]]}, ...],
      "switching": {"rule": "parity", "pattern": [1, -1], "offset": 0},
      "horizon": 10, "m": 10,
      "epsilon_adc": 1e-5, "epsilon_lmi": 1e-10,
      "weights": [...],                       # optional published weights
      "cost": {"state_quadratic": [[...]] | null, "state_l1": 1.0 | null,
               "input_quadratic": 5.0 | [[...]], "terminal": null},
      "x0": [4, 5], "T": 60, "policy": "first",
      "boxes": {"input": {"lower": [...], "upper": [...]}, "state": ..., "terminal": ...}
    }

``K`` is optional per mode, as are ``weights`` and ``boxes``.  Switching
rules: ``constant`` (``label``), ``parity``/``periodic`` (``pattern``,
``offset``), ``table`` (``table``).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DomainError, ScenarioError
from .gdclf import GdclfCertificate, LinearMode
from .mpc import MpcTrace, StepPolicy, SwitchedScenario, SwitchingSignal
from .numkernel import lqr_gain
from .ocp import Box, CostSpec

BUNDLED = ("problem1.json", "problem2.json", "switched.json", "single_mode.json")


@dataclass(frozen=True)
class ScenarioFile:
    """Parsed scenario plus the optional published weights and LMI epsilon."""

    scenario: SwitchedScenario
    weights: tuple[float, ...] | None = None
    epsilon_lmi: float = 1e-10


def _matrix(obj, field: str) -> np.ndarray:
    try:
        a = np.array(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(field, f"not a numeric array ({exc})") from None
    if a.ndim != 2 or a.size == 0:
        raise ScenarioError(field, f"expected a nested 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ScenarioError(field, "contains non-finite entries")
    return a


def _vector(obj, field: str, n: int | None = None) -> np.ndarray:
    try:
        a = np.array(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(field, f"not a numeric array ({exc})") from None
    if a.ndim != 1:
        raise ScenarioError(field, "expected a flat list")
    if n is not None and a.size != n:
        raise ScenarioError(field, f"expected {n} entries, got {a.size}")
    return a


def _require(doc: dict, key: str, where: str = ""):
    if key not in doc:
        raise ScenarioError(where + key, "missing")
    return doc[key]


def _box(doc, field, n) -> Box | None:
    if doc is None:
        return None
    lo = _vector(_require(doc, "lower", field + "."), field + ".lower", n)
    hi = _vector(_require(doc, "upper", field + "."), field + ".upper", n)
    try:
        return Box(lo, hi)
    except DomainError as exc:
        raise ScenarioError(field, str(exc)) from None


def _check_cost_shapes(cost: CostSpec, n: int, p: int) -> None:
    for key, M, shape in (
        ("cost.state_quadratic", cost.state_quadratic, (n, n)),
        ("cost.terminal", cost.terminal, (n, n)),
    ):
        if M is not None and M.shape != shape:
            raise ScenarioError(key, f"expected shape {shape}, got {M.shape}")
    try:
        cost.input_matrix(p)
    except DomainError as exc:
        raise ScenarioError("cost.input_quadratic", str(exc)) from None


def parse_scenario(doc: dict) -> ScenarioFile:
    """Validate a scenario document; errors name the offending field."""
    if not isinstance(doc, dict):
        raise ScenarioError("<root>", "scenario must be a JSON object")
    name = str(doc.get("name", "scenario"))
    raw_modes = _require(doc, "modes")
    if not isinstance(raw_modes, list) or not raw_modes:
        raise ScenarioError("modes", "expected a non-empty list")
    cost_doc = _require(doc, "cost")
    try:
        cost = CostSpec(
            None if cost_doc.get("state_quadratic") is None else _matrix(cost_doc["state_quadratic"], "cost.state_quadratic"),
            cost_doc.get("state_l1"),
            cost_doc.get("input_quadratic", 1.0),
            None if cost_doc.get("terminal") is None else _matrix(cost_doc["terminal"], "cost.terminal"),
        )
    except DomainError as exc:
        raise ScenarioError("cost", str(exc)) from None

    modes = []
    n = p = None
    for i, md in enumerate(raw_modes):
        where = f"modes[{i}]"
        A = _matrix(_require(md, "A", where + "."), where + ".A")
        B = _matrix(_require(md, "B", where + "."), where + ".B")
        if A.shape[0] != A.shape[1]:
            raise ScenarioError(where + ".A", f"must be square, got {A.shape}")
        if n is None:
            n, p = A.shape[0], B.shape[1]
            _check_cost_shapes(cost, n, p)
        if A.shape != (n, n):
            raise ScenarioError(where + ".A", f"expected shape {(n, n)}, got {A.shape}")
        if B.shape != (n, p):
            raise ScenarioError(where + ".B", f"expected shape {(n, p)}, got {B.shape}")
        label = md.get("label", i)
        K = md.get("K")
        if K is not None:
            K = _matrix(K, where + ".K")
            if K.shape != (p, n):
                raise ScenarioError(where + ".K", f"expected shape {(p, n)}, got {K.shape}")
        else:
            Q = cost.state_quadratic if cost.state_quadratic is not None else np.eye(n)
            K = lqr_gain(A, B, Q, cost.input_matrix(p))
        try:
            modes.append(LinearMode(A, B, K, label))
        except DomainError as exc:
            raise ScenarioError(where, str(exc)) from None
    labels = [md.label for md in modes]
    if len(set(labels)) != len(labels):
        raise ScenarioError("modes", "duplicate labels")

    sw = doc.get("switching", {"rule": "constant", "label": labels[0]})
    rule = sw.get("rule")
    if rule == "constant":
        pattern = (sw.get("label", labels[0]),)
    elif rule in ("parity", "periodic"):
        pattern = tuple(_require(sw, "pattern", "switching."))
    elif rule == "table":
        pattern = tuple(_require(sw, "table", "switching."))
    else:
        raise ScenarioError("switching.rule", f"unknown rule {rule!r}")
    for lab in pattern:
        if lab not in labels:
            raise ScenarioError("switching", f"refers to unknown mode label {lab!r}")
    try:
        signal = SwitchingSignal(rule, pattern, int(sw.get("offset", 0)))
    except DomainError as exc:
        raise ScenarioError("switching", str(exc)) from None

    horizon = int(_require(doc, "horizon"))
    m = int(doc.get("m", horizon))
    if not 1 <= m <= horizon:
        raise ScenarioError("m", f"need 1 <= m <= horizon = {horizon}")
    weights = doc.get("weights")
    if weights is not None:
        weights = tuple(float(w) for w in _vector(weights, "weights", m))
    eps_adc = float(_require(doc, "epsilon_adc"))
    if not 0.0 < eps_adc < 1.0:
        raise ScenarioError("epsilon_adc", "must lie in (0, 1)")
    eps_lmi = float(doc.get("epsilon_lmi", 1e-10))
    x0 = _vector(_require(doc, "x0"), "x0", n)
    boxes = doc.get("boxes") or {}
    try:
        policy = StepPolicy.parse(doc.get("policy", "first"))
    except DomainError as exc:
        raise ScenarioError("policy", str(exc)) from None
    T = int(doc.get("T", 40))
    if T < 0:
        raise ScenarioError("T", "must be nonnegative")
    scenario = SwitchedScenario(
        name=name,
        modes=tuple(modes),
        signal=signal,
        horizon=horizon,
        cost=cost,
        x0=x0,
        T=T,
        epsilon=eps_adc,
        m=m,
        policy=policy,
        input_box=_box(boxes.get("input"), "boxes.input", p),
        state_box=_box(boxes.get("state"), "boxes.state", n),
        terminal_box=_box(boxes.get("terminal"), "boxes.terminal", n),
    )
    return ScenarioFile(scenario, weights, eps_lmi)


def _lst(a):
    return None if a is None else np.asarray(a, dtype=float).tolist()


def scenario_to_dict(sf: ScenarioFile) -> dict:
    sc = sf.scenario
    sig = sc.signal
    if sig.rule == "constant":
        switching = {"rule": "constant", "label": sig.pattern[0]}
    elif sig.rule == "table":
        switching = {"rule": "table", "table": list(sig.pattern)}
    else:
        switching = {"rule": sig.rule, "pattern": list(sig.pattern), "offset": sig.offset}
    R = sc.cost.input_quadratic
    doc = {
        "name": sc.name,
        "modes": [{"label": md.label, "A": _lst(md.A), "B": _lst(md.B), "K": _lst(md.K)} for md in sc.modes],
        "switching": switching,
        "horizon": sc.horizon,
        "m": sc.m,
        "epsilon_adc": sc.epsilon,
        "epsilon_lmi": sf.epsilon_lmi,
        "cost": {
            "state_quadratic": _lst(sc.cost.state_quadratic),
            "state_l1": sc.cost.state_l1,
            "input_quadratic": float(R) if np.ndim(R) == 0 else _lst(R),
            "terminal": _lst(sc.cost.terminal),
        },
        "x0": _lst(sc.x0),
        "T": sc.T,
        "policy": sc.policy.value,
    }
    if sf.weights is not None:
        doc["weights"] = list(sf.weights)
    boxes = {}
    for key, box in (("input", sc.input_box), ("state", sc.state_box), ("terminal", sc.terminal_box)):
        if box is not None:
            boxes[key] = {"lower": _lst(box.lower), "upper": _lst(box.upper)}
    if boxes:
        doc["boxes"] = boxes
    return doc


def resolve_path(path) -> Path:
    """A filesystem path, or the name of a bundled scenario."""
    p = Path(path)
    if p.exists():
        return p
    bundled = resources.files("flexmpc") / "scenarios" / p.name
    if bundled.is_file():
        return Path(str(bundled))
    raise ScenarioError("<path>", f"no such scenario file: {path}")


def load_scenario(path) -> ScenarioFile:
    p = resolve_path(path)
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError("<json>", str(exc)) from None
    return parse_scenario(doc)


def dumps_json(doc) -> str:
    """JSON with floats at 17 significant digits."""
    return json.dumps(_fmt_floats(doc), indent=2)


class _Raw(float):
    def __repr__(self):
        return format(float(self), ".17g")


def _fmt_floats(obj):
    if isinstance(obj, float) and np.isfinite(obj):
        return _Raw(obj)
    if isinstance(obj, dict):
        return {k: _fmt_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_fmt_floats(v) for v in obj]
    return obj


# ---------------------------------------------------------------------------
# Certificates


def certificate_to_dict(cert: GdclfCertificate) -> dict:
    return {
        "m": cert.m,
        "lambda": list(cert.lam),
        "epsilon": cert.epsilon,
        "margin": cert.margin,
        "gains": [{"label": lab, "K": _lst(K)} for lab, K in cert.gains.items()],
    }


def certificate_from_dict(doc: dict) -> GdclfCertificate:
    try:
        gains = {g["label"]: np.array(g["K"], dtype=float) for g in doc.get("gains", [])}
        return GdclfCertificate(
            int(doc["m"]), tuple(doc["lambda"]), float(doc["epsilon"]), gains, float(doc.get("margin", "nan"))
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError("certificate", str(exc)) from None


# ---------------------------------------------------------------------------
# Traces


def _num(v: float) -> str:
    return format(float(v), ".17g")


def trace_csv(trace: MpcTrace, input_dim: int | None = None) -> str:
    """CSV ``k,x_1..x_n,u_1..u_p,V,instance_id,steps_in_instance``.

    One row per k = 0..T.  The last row has empty input and instance columns
    (no input is applied at the final time).  ``input_dim`` is needed only
    for empty runs, where no input fixes the column count.
    """
    X = trace.X
    n = X.shape[1]
    if trace.inputs:
        p = np.asarray(trace.inputs[0]).size
    elif input_dim is not None:
        p = input_dim
    else:
        raise DomainError("input_dim is required for a trace without inputs")
    owner = trace.instance_of_time()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k"] + [f"x_{i + 1}" for i in range(n)] + [f"u_{i + 1}" for i in range(p)] + ["V", "instance_id", "steps_in_instance"])
    for k in range(X.shape[0]):
        x = X[k]
        row = [str(k)] + [_num(v) for v in x]
        if k < len(trace.inputs):
            inst = owner[k]
            row += [_num(v) for v in np.ravel(trace.inputs[k])]
            row += [_num(x @ x), str(inst), str(trace.steps[inst])]
        else:
            row += [""] * p + [_num(x @ x), "", ""]
        w.writerow(row)
    return buf.getvalue()


def read_trace_csv(text: str) -> dict:
    """Parse a trace CSV back into arrays (inputs of the final row are NaN)."""
    rows = list(csv.reader(io.StringIO(text)))
    header = rows[0]
    n = sum(h.startswith("x_") for h in header)
    p = sum(h.startswith("u_") for h in header)
    k, X, U, V, inst, steps = [], [], [], [], [], []
    for r in rows[1:]:
        k.append(int(r[0]))
        X.append([float(v) for v in r[1:1 + n]])
        U.append([float(v) if v else np.nan for v in r[1 + n:1 + n + p]])
        V.append(float(r[1 + n + p]))
        inst.append(int(r[2 + n + p]) if r[2 + n + p] else -1)
        steps.append(int(r[3 + n + p]) if r[3 + n + p] else 0)
    return {
        "header": header,
        "k": np.array(k),
        "X": np.array(X).reshape(len(k), n),
        "U": np.array(U).reshape(len(k), p),
        "V": np.array(V),
        "instance_id": np.array(inst),
        "steps_in_instance": np.array(steps),
    }
