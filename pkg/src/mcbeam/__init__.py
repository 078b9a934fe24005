"""Max-min fair multicast beamforming with antenna selection.

SCA outer loop with two first-order subproblem backends (consensus ADMM and
saddle-point mirror-prox), lambda-bisection antenna selection, a multipath
channel generator and an exhaustive-search oracle.
"""

from .core import (BeamVector, PerAntenna, ProblemInstance, RealLiftedInstance,
                   SolveReport, SolverConfig, SumPower, cardinality, eval_min_snr,
                   eval_objective, lift_to_real, project_power_set)
from .channel import ChannelModelParams, generate_instance, steering_vector
from .sca import build_surrogate, sca_solve
from .admm import AdmmSolver
from .spmp import MirrorProxSolver

__version__ = "0.1.0"

SOLVERS = {"admm": AdmmSolver, "spmp": MirrorProxSolver}


def make_solver(name: str):
    try:
        return SOLVERS[name]()
    except KeyError:
        raise ValueError(f"unknown solver {name!r}; choose from {sorted(SOLVERS)}") from None
