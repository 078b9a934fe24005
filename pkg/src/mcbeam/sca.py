"""Successive convex approximation outer loop.

At the iterate ``w_t`` every concave quadratic ``w^T A-_m w`` is replaced by
its tangent plane ``q_m^T w + b_m``; the pointwise maximum of these planes
upper-bounds ``f1`` and touches it at ``w_t``. Minimizing the bound plus the
group penalty over the power set therefore never increases the true
objective; the loop checks this on every step.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from functools import cached_property
from typing import Protocol

import numpy as np

from . import _kernels as K
from .channel import STREAM_INIT, substream
from .core import (BeamVector, RealLiftedInstance, SolveReport, SolverConfig,
                   SolverError, eval_min_snr, eval_objective)

log = logging.getLogger(__name__)


class DescentViolation(SolverError):
    """The true objective increased across an SCA step."""


class InfeasibleStartError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SurrogateModel:
    """Affine pieces ``q_m^T w + b_m`` built at ``base``."""

    Q: np.ndarray
    b: np.ndarray
    base: np.ndarray

    @cached_property
    def Qt(self) -> np.ndarray:
        return np.ascontiguousarray(self.Q.T)

    @property
    def M(self) -> int:
        return self.Q.shape[0]

    def value(self, w) -> float:
        """``u(w, base) = max_m q_m^T w + b_m``."""
        return float((self.Q @ np.asarray(w, dtype=float) + self.b).max())

    def objective(self, w, lam: float) -> float:
        """Subproblem cost ``u(w, base) + lam ||w||_{1,2}``."""
        return float(K.subproblem_value(self.Q, self.b, lam, np.asarray(w, dtype=float)))


class SubproblemSolver(Protocol):
    """Minimizes ``u(w, w_t) + lam ||w||_{1,2}`` over the power set.

    Implementations may keep state across calls within one SCA run;
    ``reset`` is called at the start of every run.
    """

    name: str

    def reset(self) -> None: ...

    def solve(self, surrogate: SurrogateModel, lift: RealLiftedInstance, lam: float,
              warm: np.ndarray, config: SolverConfig) -> BeamVector: ...


def build_surrogate(lift: RealLiftedInstance, w_t) -> SurrogateModel:
    w = lift.check_dim(w_t.values if isinstance(w_t, BeamVector) else w_t)
    Aw = lift.abar_rows(w)
    Q = 2.0 * Aw
    b = -(Aw @ w)
    return SurrogateModel(Q=np.ascontiguousarray(Q), b=b, base=w.copy())


def random_feasible_start(lift: RealLiftedInstance, seed: int, *key: int) -> np.ndarray:
    """Seeded ``CN(0, I)`` draw, lifted and projected onto the power set."""
    rng = substream(seed, STREAM_INIT, *key)
    z = (rng.standard_normal(lift.N) + 1j * rng.standard_normal(lift.N)) / np.sqrt(2)
    return lift.project(np.concatenate([z.real, z.imag]))


def descent_slack(f: float) -> float:
    return 1e-9 + 1e-12 * abs(f)


def sca_solve(lift: RealLiftedInstance, lam: float, solver: SubproblemSolver,
              w0=None, config: SolverConfig = SolverConfig()) -> SolveReport:
    """Run SCA from ``w0`` (a seeded random feasible point when omitted)."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if w0 is None:
        w = random_feasible_start(lift, config.rng_seed)
    else:
        w = lift.check_dim(w0.values if isinstance(w0, BeamVector) else w0).copy()
        if not lift.is_feasible(w):
            raise InfeasibleStartError("starting point violates the power constraint")

    t_start = time.perf_counter()
    solver.reset()
    F = eval_objective(lift, w, lam)
    trace = [F]
    converged = False
    it = 0
    for it in range(1, config.max_sca_iters + 1):
        sur = build_surrogate(lift, w)
        try:
            beam = solver.solve(sur, lift, lam, w, config)
        except SolverError as exc:
            raise type(exc)(f"SCA iteration {it} ({solver.name}, lambda={lam:g}): "
                            f"{exc}") from exc
        w_new = beam.values
        F_new = eval_objective(lift, w_new, lam)
        if F_new > F + descent_slack(F):
            raise DescentViolation(
                f"SCA iteration {it} ({solver.name}, lambda={lam:g}): objective rose "
                f"from {F!r} to {F_new!r}; surrogate at new point "
                f"{sur.objective(w_new, lam)!r}")
        trace.append(F_new)
        step = float(np.linalg.norm(w_new - w))
        w = np.array(w_new)
        done = abs(F - F_new) <= config.eps_outer * max(1.0, abs(F)) or step <= 1e-9
        F = F_new
        if done:
            converged = True
            break
    elapsed = time.perf_counter() - t_start

    final = BeamVector(w, rel_threshold=config.sparsity_rel_threshold)
    min_snr = eval_min_snr(lift, w) * lift.snr_scale
    log.debug("sca %s lambda=%g iters=%d F=%g card=%d", solver.name, lam, it, F,
              final.cardinality)
    return SolveReport(final_beam=final, objective_trace=trace, min_snr=min_snr,
                       selected_antennas=final.support, solver=solver.name,
                       lambda_final=float(lam), t_repeat=1, sca_iters=it,
                       converged=converged, wall_time={"sca": elapsed})
