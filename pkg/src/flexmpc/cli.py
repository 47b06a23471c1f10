"""Command line entry point: ``flexmpc {synth,mpc,compare,falsify} SCENARIO``.

Exit codes
----------
0  success
2  scenario parse error, dimension error, empty falsifier grid
3  no feasible certificate / certificate invalid for the scenario
4  OCP solver abort (reports the optimization instance)
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import AlgorithmInvariantError, ConvergenceError, DomainError, FeasibilityError, ScenarioError
from .gdclf import GdclfCertificate, falsify_common_clf, minimal_m, synthesize, verify_certificate
from .mpc import flexible_step_run, standard_mpc_run
from .numkernel import dare_solve
from .scenario import (
    ScenarioFile,
    certificate_from_dict,
    certificate_to_dict,
    dumps_json,
    load_scenario,
    trace_csv,
)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_INFEASIBLE = 3
EXIT_SOLVER = 4

# Summary thresholds for the closed-loop commands.
CONVERGED_NORM = 1e-2
GROWTH_CHECK_TIME = 50


class _Exit(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _load(path) -> ScenarioFile:
    try:
        return load_scenario(path)
    except ScenarioError as exc:
        raise _Exit(EXIT_PARSE, f"scenario error: {exc}") from None
    except DomainError as exc:
        raise _Exit(EXIT_PARSE, f"scenario error: {exc}") from None


def _pair(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO,HI, got {text!r}") from None
    return lo, hi


# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    sf = _load(args.scenario)
    modes = sf.scenario.modes
    eps = args.epsilon if args.epsilon is not None else sf.epsilon_lmi
    try:
        if args.m is None and args.m_max is not None:
            res = minimal_m(modes, eps, args.m_max, seed=args.seed)
            if not res:
                best = max(res.best_margins)
                raise _Exit(EXIT_INFEASIBLE, f"no feasible order up to m = {args.m_max}; best margin {best:.6g}")
            m, cert = res
            print(f"minimal m = {m}", file=sys.stderr)
        else:
            m = args.m if args.m is not None else sf.scenario.m
            cert = synthesize(modes, m, eps, seed=args.seed)
            if not cert:
                raise _Exit(EXIT_INFEASIBLE, f"infeasible at m = {m}; best margin {cert.best_margin:.6g}")
    except DomainError as exc:
        raise _Exit(EXIT_PARSE, str(exc)) from None
    _emit(dumps_json(certificate_to_dict(cert)), args.out)
    print(f"feasible: m = {cert.m}, margin = {cert.margin:.6g}", file=sys.stderr)
    return EXIT_OK


def _certificate(sf: ScenarioFile, spec: str, seed: int = 0) -> tuple[GdclfCertificate, str]:
    sc = sf.scenario
    gains = {md.label: md.K for md in sc.modes}
    if spec != "auto":
        try:
            doc = json.loads(Path(spec).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise _Exit(EXIT_PARSE, f"cannot read certificate {spec}: {exc}") from None
        try:
            return certificate_from_dict(doc), spec
        except (ScenarioError, DomainError) as exc:
            raise _Exit(EXIT_INFEASIBLE, f"invalid certificate: {exc}") from None
    if sf.weights is not None:
        cert = GdclfCertificate(sc.m, sf.weights, sc.epsilon, gains)
        if verify_certificate(cert, sc.modes) >= 0.0:
            return cert, "scenario weights"
    cert = synthesize(sc.modes, sc.m, sf.epsilon_lmi, seed=seed)
    if not cert:
        raise _Exit(EXIT_INFEASIBLE, f"no certificate at m = {sc.m}; best margin {cert.best_margin:.6g}")
    return cert, "synthesized"


def _summary(trace) -> dict:
    norms = [float(np.linalg.norm(x)) for x in trace.states]
    T = len(norms) - 1
    out = {
        "T": T,
        "initial_norm": norms[0],
        "final_norm": norms[-1],
        "instances": len(trace.instants),
        "step_histogram": {str(k): v for k, v in trace.step_histogram().items()},
        "converged": norms[-1] <= CONVERGED_NORM,
        "grows": norms[-1] > norms[0],
    }
    if T >= GROWTH_CHECK_TIME:
        out[f"norm_at_{GROWTH_CHECK_TIME}"] = norms[GROWTH_CHECK_TIME]
        out[f"grows_by_{GROWTH_CHECK_TIME}"] = norms[GROWTH_CHECK_TIME] > norms[0]
    return out


def _solver_abort(exc) -> _Exit:
    inst = getattr(exc, "instance", "?")
    k = getattr(exc, "time", "?")
    return _Exit(EXIT_SOLVER, f"solver abort in optimization instance {inst} (k = {k}): {exc}")


def cmd_mpc(args) -> int:
    sf = _load(args.scenario)
    cert, source = _certificate(sf, args.cert, args.seed)
    sc = sf.scenario
    try:
        trace = flexible_step_run(sc, policy=args.policy, T=args.T, certificate=cert)
    except DomainError as exc:
        raise _Exit(EXIT_INFEASIBLE, f"certificate rejected: {exc}") from None
    except (ConvergenceError, FeasibilityError, AlgorithmInvariantError) as exc:
        raise _solver_abort(exc) from None
    _emit(trace_csv(trace, sc.modes[0].p), args.out)
    summary = _summary(trace)
    summary["certificate"] = source
    print(json.dumps(summary), file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def _terminal(sf: ScenarioFile, spec: str) -> np.ndarray:
    sc = sf.scenario
    n, p = sc.modes[0].n, sc.modes[0].p
    kind, _, arg = spec.partition(":")
    if kind == "scale":
        try:
            return float(arg) * np.eye(n)
        except ValueError:
            raise _Exit(EXIT_PARSE, f"bad terminal scale {arg!r}") from None
    if kind == "riccati":
        try:
            label = int(arg)
        except ValueError:
            label = arg
        mode = sc.mode_map.get(label)
        if mode is None:
            raise _Exit(EXIT_PARSE, f"no mode with label {arg!r}")
        Q = sc.cost.state_quadratic if sc.cost.state_quadratic is not None else np.eye(n)
        return dare_solve(mode.A, mode.B, Q, sc.cost.input_matrix(p))
    raise _Exit(EXIT_PARSE, f"unknown terminal spec {spec!r}")


def cmd_compare(args) -> int:
    sf = _load(args.scenario)
    sc = sf.scenario
    try:
        P = _terminal(sf, args.terminal)
    except (ConvergenceError, DomainError) as exc:
        raise _Exit(EXIT_PARSE, f"terminal cost: {exc}") from None
    try:
        trace = standard_mpc_run(sc, P, T=args.T)
    except (ConvergenceError, FeasibilityError) as exc:
        raise _solver_abort(exc) from None
    _emit(trace_csv(trace, sc.modes[0].p), args.out)
    summary = _summary(trace)
    summary["terminal"] = args.terminal
    if not summary["converged"]:
        summary["flag"] = "NOT CONVERGED"
    print(json.dumps(summary), file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def cmd_falsify(args) -> int:
    sf = _load(args.scenario)
    try:
        report = falsify_common_clf(sf.scenario.modes, args.q_range, args.r_range, args.step)
    except DomainError as exc:
        raise _Exit(EXIT_PARSE, str(exc)) from None
    doc = report.to_dict()
    if not args.all_points:
        doc.pop("points")
    _emit(dumps_json(doc), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flexmpc", description="Flexible-step MPC with g-dclf certificates.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize g-dclf weights")
    p.add_argument("scenario")
    p.add_argument("--m", type=int, default=None, help="certificate order (default: scenario m)")
    p.add_argument("--m-max", type=int, default=None, help="scan for the smallest feasible order up to this cap")
    p.add_argument("--epsilon", type=float, default=None, help="LMI epsilon (default: scenario epsilon_lmi)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="write certificate JSON here instead of stdout")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("mpc", help="run flexible-step MPC")
    p.add_argument("scenario")
    p.add_argument("--policy", choices=["first", "max"], default=None)
    p.add_argument("--T", type=int, default=None)
    p.add_argument("--cert", default="auto", help="certificate JSON file, or 'auto'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="trace CSV path (default: stdout)")
    p.set_defaults(func=cmd_mpc)

    p = sub.add_parser("compare", help="run standard one-step MPC with a terminal cost")
    p.add_argument("scenario")
    p.add_argument("--terminal", default="riccati:+1", help="riccati:<label> or scale:<C>")
    p.add_argument("--T", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("falsify", help="grid search for a common quadratic CLF")
    p.add_argument("scenario")
    p.add_argument("--q-range", type=_pair, default=(-3.0, 3.0))
    p.add_argument("--r-range", type=_pair, default=(0.0, 10.0))
    p.add_argument("--step", type=float, default=0.05)
    p.add_argument("--all-points", action="store_true", help="include every grid point in the report")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_falsify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "T", None) is not None and args.T < 0:
        print("error: --T must be nonnegative", file=sys.stderr)
        return EXIT_PARSE
    try:
        return args.func(args)
    except _Exit as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
