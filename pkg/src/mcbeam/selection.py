"""Antenna selection by bisection on the group-sparsity weight.

Larger ``lam`` gives sparser SCA solutions, so a bisection on ``lam`` looks
for a solution with exactly ``K`` active groups. The selected antennas are
then refit without the penalty on the restricted problem.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .core import (BeamVector, RealLiftedInstance, SolveReport, SolverConfig,
                   eval_min_snr, to_db)
from .sca import SubproblemSolver, random_feasible_start, sca_solve

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BisectionStep:
    lam: float
    cardinality: int
    min_snr: float
    objective: float


@dataclass(frozen=True)
class SelectionResult:
    """Outcome of a selection run.

    ``t_repeat`` counts the SCA solves performed at bisection points (the
    anchor solve of the ``"anchor"`` start mode and the refit are not
    included); ``exact`` tells whether a solve hit the target cardinality.
    """

    selected: tuple
    lambda_final: float
    t_repeat: int
    refit_beam: BeamVector
    min_snr: float
    exact: bool = True
    history: tuple = ()
    refit_report: SolveReport | None = None
    wall_time: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return len(self.selected)

    @property
    def min_snr_db(self) -> float:
        return to_db(self.min_snr)


def shared_start(lift: RealLiftedInstance, seed: int) -> np.ndarray:
    """The seeded full-array starting point that every solve derives from."""
    return random_feasible_start(lift, seed)


def restrict_vector(lift: RealLiftedInstance, selected, w) -> np.ndarray:
    """Coordinates of ``w`` on ``selected``, in the restricted lift's layout."""
    sel = np.asarray(sorted(selected), dtype=int)
    w = lift.check_dim(w)
    return np.concatenate([w[sel], w[sel + lift.N]])


def refit_report(lift: RealLiftedInstance, selected, solver: SubproblemSolver,
                 config: SolverConfig = SolverConfig(), w0=None):
    """Unpenalized SCA on the ``selected`` antennas only.

    Starts from the restriction of ``w0`` (default: the shared seeded start)
    and returns ``(beam in 2N, report of the restricted solve)``.
    """
    selected = tuple(sorted(int(j) for j in selected))
    if not selected:
        raise ValueError("refit needs at least one selected antenna")
    sub = lift.restrict(selected)
    if w0 is None:
        w0 = shared_start(lift, config.rng_seed)
    start = sub.project(restrict_vector(lift, selected, w0))
    rep = sca_solve(sub, 0.0, solver, w0=start, config=config)
    full = lift.embed(selected, rep.final_beam.values)
    return BeamVector(full, rel_threshold=config.sparsity_rel_threshold), rep


def refit_selected(lift: RealLiftedInstance, selected, solver: SubproblemSolver,
                   config: SolverConfig = SolverConfig()) -> BeamVector:
    """Solve the ``lam = 0`` problem on ``selected`` and embed it back."""
    beam, _ = refit_report(lift, selected, solver, config)
    return beam


def top_groups(beam: BeamVector, K: int) -> tuple:
    """Indices of the ``K`` largest group norms (lower index wins ties)."""
    order = np.argsort(-beam.group_norms, kind="stable")
    return tuple(sorted(int(j) for j in order[:K]))


@dataclass
class _Level:
    hit: SolveReport | None
    fallback: SolveReport | None
    steps: list


def _bisect(lift: RealLiftedInstance, K: int, solver: SubproblemSolver,
            config: SolverConfig, lb: float, ub: float, w_rand, budget: int) -> _Level:
    anchor = None
    if config.bisection_start == "anchor":
        anchor = sca_solve(lift, 0.0, solver, w0=w_rand, config=config).final_beam.values
    w_prev = w_rand
    ub_confirmed = not config.expand_lambda_bracket
    steps = []
    fallback = None  # (cardinality, -lam, report)
    for _ in range(budget):
        lam = 0.5 * (lb + ub)
        if anchor is not None:
            w0 = anchor
        elif config.bisection_start == "warm":
            w0 = w_prev
        else:
            w0 = w_rand
        rep = sca_solve(lift, lam, solver, w0=w0, config=config)
        S = rep.final_beam.cardinality
        steps.append(BisectionStep(lam, S, rep.min_snr, rep.objective_trace[-1]))
        log.debug("bisection N=%d lambda=%.6g S=%d (K=%d)", lift.N, lam, S, K)
        if S > 0:
            w_prev = rep.final_beam.values
        if S >= K and (fallback is None or (S, -lam) < fallback[:2]):
            fallback = (S, -lam, rep)
        if S == K:
            return _Level(rep, rep, steps)
        if S > K:
            lb = lam
            if not ub_confirmed:
                ub *= 2.0
        else:
            ub = lam
            ub_confirmed = True
        if ub_confirmed and ub - lb <= config.lambda_rel_tol * ub:
            break
    return _Level(None, fallback[2] if fallback else None, steps)


def select_antennas(lift: RealLiftedInstance, K: int, solver: SubproblemSolver,
                    config: SolverConfig = SolverConfig(),
                    lambda_lb: float | None = None,
                    lambda_ub: float | None = None) -> SelectionResult:
    """Bisection on ``lam`` for a ``K``-antenna support, then a refit.

    Each step solves the penalized problem at the bracket midpoint and
    moves the lower bound up when the solution has more than ``K`` active
    groups, the upper bound down when it has fewer. ``K == N`` is solved
    directly at ``lam = 0``.

    With ``config.expand_lambda_bracket`` the upper bound doubles after every
    too-dense step until some step comes out too sparse, so a bracket that
    is short for the instance's scale still reaches the target. The search
    ends when a step lands on ``K``, the step budget
    ``config.max_bisection_steps`` is spent, or the bracket has shrunk below
    ``config.lambda_rel_tol`` relative to its upper end.

    Without an exact hit, the sparsest solution with at least ``K`` groups
    (the one at the largest ``lam`` among equals) supplies its ``K`` largest
    groups. If every step came out too sparse, the groups of the ``lam = 0``
    solution are ranked instead.
    """
    N = lift.N
    if not 1 <= K <= N:
        raise ValueError(f"K must lie in [1, {N}], got {K}")
    lb = config.lambda_lb if lambda_lb is None else float(lambda_lb)
    ub = config.lambda_ub if lambda_ub is None else float(lambda_ub)
    if lb < 0 or not lb < ub:
        raise ValueError(f"need 0 <= lambda_lb < lambda_ub, got [{lb}, {ub}]")

    t0 = time.perf_counter()
    w_rand = shared_start(lift, config.rng_seed)
    if K == N:
        rep = sca_solve(lift, 0.0, solver, w0=w_rand, config=config)
        step = BisectionStep(0.0, rep.final_beam.cardinality, rep.min_snr,
                             rep.objective_trace[-1])
        return SelectionResult(selected=tuple(range(N)), lambda_final=0.0, t_repeat=1,
                               refit_beam=rep.final_beam, min_snr=rep.min_snr,
                               exact=True, history=(step,), refit_report=rep,
                               wall_time={"bisection": time.perf_counter() - t0,
                                          "refit": 0.0})

    level = _bisect(lift, K, solver, config, lb, ub, w_rand, config.max_bisection_steps)
    history = level.steps
    if level.hit is not None:
        exact, chosen = True, level.hit
        selected = chosen.final_beam.support
    else:
        exact, chosen = False, level.fallback
        if chosen is None:
            # every step was too sparse: rank the groups of the dense solve
            dense = sca_solve(lift, 0.0, solver, w0=w_rand, config=config).final_beam
            selected = top_groups(dense, K)
        else:
            selected = top_groups(chosen.final_beam, K)
    lam_final = chosen.lambda_final if chosen is not None else lb
    selected = tuple(sorted(selected))
    t_bis = time.perf_counter() - t0

    t1 = time.perf_counter()
    beam, rep = refit_report(lift, selected, solver, config, w0=w_rand)
    min_snr = eval_min_snr(lift, beam.values) * lift.snr_scale
    return SelectionResult(selected=selected, lambda_final=float(lam_final),
                           t_repeat=len(history), refit_beam=beam, min_snr=min_snr,
                           exact=exact, history=tuple(history), refit_report=rep,
                           wall_time={"bisection": t_bis,
                                      "refit": time.perf_counter() - t1})
