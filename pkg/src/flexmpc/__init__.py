"""Flexible-step model predictive control with generalized discrete-time
control Lyapunov function (g-dclf) certificates."""

from .errors import (
    AlgorithmInvariantError,
    ConvergenceError,
    DomainError,
    FeasibilityError,
    FlexMPCError,
    ScenarioError,
)
from .gdclf import (
    FalsificationReport,
    GdclfCertificate,
    Infeasible,
    LinearMode,
    NotFoundBelowCap,
    build_phi,
    falsify_common_clf,
    minimal_m,
    synthesize,
    verify_certificate,
)
from .mpc import MpcTrace, StepPolicy, SwitchedScenario, SwitchingSignal, flexible_step_run, select_step, standard_mpc_run
from .ocp import AdcSpec, Box, CostSpec, OcpSolution, OcpSpec, solve_ocp
from .scenario import ScenarioFile, load_scenario, parse_scenario, scenario_to_dict, trace_csv

__version__ = "0.1.0"
