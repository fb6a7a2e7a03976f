"""Tuning DC optimal dispatch parameters against AC ground truth.

The pipeline: parse a MATPOWER case, draw load scenarios, label them
with a full AC solve, then tune per-branch flow coefficients and bias
terms so the convex DC dispatch reproduces the labelled setpoints.
Gradients flow through the dispatch via its optimality conditions.
"""

__version__ = "0.1.0"

from .acopf import AcOpfResult, check_feasibility, solve_acopf
from .acpf import PowerFlowResult, newton_pf
from .dcopf import DcOpfSolution, build_qp, solve_dcopf
from .estimator import DispatchTuner
from .exceptions import DcoptuneError
from .matpower import RawCase, parse_matpower
from .network import (AcState, DcParameters, NetworkModel, branch_admittance,
                      cold_start, hot_start, incidence, to_network)
from .qp import QpSolution, solve_qp
from .scenarios import Label, Scenario, generate_scenarios, label_scenarios
from .sensitivity import adjoint_gradient, assemble_kkt, forward_directional
from .tnc import TncResult, tnc_minimize
from .training import (Metrics, TrainConfig, TrainReport, evaluate, loss,
                       loss_gradient, train)

__all__ = [
    "AcOpfResult", "AcState", "DcOpfSolution", "DcParameters",
    "DcoptuneError", "DispatchTuner", "Label", "Metrics", "NetworkModel",
    "PowerFlowResult", "QpSolution", "RawCase", "Scenario", "TncResult",
    "TrainConfig", "TrainReport", "adjoint_gradient", "assemble_kkt",
    "branch_admittance", "build_qp", "check_feasibility", "cold_start",
    "evaluate", "forward_directional", "generate_scenarios", "hot_start",
    "incidence", "label_scenarios", "loss", "loss_gradient", "newton_pf",
    "parse_matpower", "solve_acopf", "solve_dcopf", "solve_qp",
    "to_network", "tnc_minimize", "train",
]
