"""Saddle-point mirror-prox backend for the SCA subproblem.

Writing the piecewise maximum as a maximum over the probability simplex and
the group norm through its dual ball gives the bilinear saddle problem

    min_{w in P} max_{y in simplex, s in S}  y^T (Q w + b) + lam s^T w,

where ``S`` bounds every group of ``s`` to the unit disc. Mirror-prox takes
an extrapolation step and a correction step per iteration, Euclidean on
``w`` and ``s`` and entropic on ``y``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .core import BeamVector, RealLiftedInstance, SolverConfig, SolverError
from .sca import SurrogateModel


class DegenerateSubproblem(Exception):
    """All pieces are flat and there is no penalty: every point is optimal."""


class DivergenceError(SolverError):
    pass


@dataclass
class SaddleState:
    w: np.ndarray
    y: np.ndarray
    s: np.ndarray
    alpha: float


def saddle_gradients(surrogate: SurrogateModel, lam: float, w, y, s):
    """Partial gradients of ``phi(w, y, s) = y^T(Qw + b) + lam s^T w``."""
    w, y, s = (np.asarray(a, dtype=float) for a in (w, y, s))
    g_w = surrogate.Qt @ y + lam * s
    g_y = surrogate.Q @ w + surrogate.b
    g_s = lam * w
    return g_w, g_y, g_s


def saddle_value(surrogate: SurrogateModel, lam: float, w, y, s) -> float:
    return float(y @ (surrogate.Q @ w + surrogate.b) + lam * (s @ w))


def stacked_saddle_value(surrogate: SurrogateModel, lam: float, w, y, s) -> float:
    """``x^T (Qbar w + bbar)`` with ``x = [y; s]``, ``Qbar = [Q; lam I]``."""
    n2 = surrogate.Q.shape[1]
    Qbar = np.vstack([surrogate.Q, lam * np.eye(n2)])
    bbar = np.concatenate([surrogate.b, np.zeros(n2)])
    x = np.concatenate([y, s])
    return float(x @ (Qbar @ w + bbar))


def project_simplex_entropy(y_raw) -> np.ndarray:
    """KL projection of a positive vector onto the simplex."""
    y = np.asarray(y_raw, dtype=float)
    if np.any(~(y > 0)):
        raise ValueError("entropic projection needs strictly positive entries")
    total = y.sum()
    if abs(total - 1.0) <= 1e-12:
        return y.copy()
    return y / total


def project_group_ball(s_raw) -> np.ndarray:
    """Scale every group of ``s`` into the unit disc."""
    return K.project_group_ball(np.asarray(s_raw, dtype=float))


def spmp_lipschitz(surrogate: SurrogateModel, lam: float) -> float:
    """``max(max_m ||q_m||, lam)``; the step size is ``1 / (2L)``."""
    L = max(float(np.linalg.norm(surrogate.Q, axis=1).max()), float(lam))
    if L == 0.0:
        raise DegenerateSubproblem("Q = 0 and lambda = 0")
    return L


def duality_gap(surrogate: SurrogateModel, lift: RealLiftedInstance, lam: float,
                w, y, s) -> float:
    radii, total = lift.power_args
    _, gap = K.saddle_gap(surrogate.Q, surrogate.Qt, surrogate.b, float(lam),
                          np.asarray(w, float), np.asarray(y, float),
                          np.asarray(s, float), radii, total)
    return float(gap)


def best_response(surrogate: SurrogateModel, lift: RealLiftedInstance, lam: float,
                  y) -> np.ndarray:
    """Minimizer over ``P`` of ``y^T Q w + lam ||w||_{1,2}``.

    Groups whose linear coefficient is no larger than ``lam`` are switched
    off exactly; this gives a sparse primal candidate from the dual average.
    """
    c = surrogate.Qt @ np.asarray(y, dtype=float)
    gn = K.group_norms(c)
    n = gn.size
    radii, total = lift.power_args
    shrink = np.where(gn > lam, 1.0 - lam / np.where(gn > 0, gn, 1.0), 0.0)
    d = c * np.concatenate([shrink, shrink])
    if total > 0:
        nd = np.linalg.norm(d)
        return -total * d / nd if nd > 0 else np.zeros_like(d)
    on = gn > lam
    scale = np.where(on, radii / np.where(gn > 0, gn, 1.0), 0.0)
    return -c * np.concatenate([scale, scale]) if n else c


def polish(surrogate: SurrogateModel, lift: RealLiftedInstance, lam: float, w, y,
           alpha: float) -> np.ndarray:
    """One forward-backward step on ``y^T Q w + lam ||w||_{1,2}`` over ``P``.

    Groups whose coefficient is below ``lam`` and whose magnitude is within
    one step of zero land exactly on zero.
    """
    radii, total = lift.power_args
    x = np.asarray(w, dtype=float) - alpha * (surrogate.Qt @ np.asarray(y, dtype=float))
    return K.project_power(K.prox_group_l12(x, alpha * lam), radii, total)


def mirror_prox_solve(surrogate: SurrogateModel, lift: RealLiftedInstance, lam: float,
                      warm, config: SolverConfig, max_iter: int | None = None,
                      eps: float | None = None, y0=None, s0=None,
                      info: dict | None = None) -> BeamVector:
    """Solve one SCA subproblem from the feasible point ``warm``.

    The dual blocks start at ``y0`` (default uniform) and ``s0`` (default the
    unit directions of ``warm``'s groups). Candidates are the ergodic average,
    the last iterate, a forward-backward polish of each and of ``warm``, the best response to
    the averaged dual, and ``warm`` itself; the one with the lowest
    subproblem cost is returned (earliest listed on ties).
    """
    warm = lift.check_dim(warm)
    lam = float(lam)
    try:
        L = spmp_lipschitz(surrogate, lam)
    except DegenerateSubproblem:
        if info is not None:
            info.update(iterations=0, converged=True, gaps=np.zeros(0), degenerate=True)
        return BeamVector(warm.copy(), rel_threshold=config.sparsity_rel_threshold)

    alpha = 1.0 / (2.0 * L)
    if y0 is None:
        y0 = np.full(surrogate.M, 1.0 / surrogate.M)
    else:
        y0 = np.asarray(y0, dtype=float)
        if y0.shape != (surrogate.M,) or abs(y0.sum() - 1.0) > 1e-9 or np.any(y0 < 0):
            raise ValueError("y0 must lie on the simplex")
    if s0 is None:
        gn = K.group_norms(warm)
        inv = np.where(gn > 0, 1.0 / np.where(gn > 0, gn, 1.0), 0.0)
        s0 = warm * np.concatenate([inv, inv])
    else:
        s0 = project_group_ball(s0)
    radii, total = lift.power_args
    max_iter = config.max_inner_iters if max_iter is None else max_iter
    eps = config.inner_eps if eps is None else eps
    w, y, s, wavg, yavg, savg, gaps, iters, ok = K.mirror_prox_run(
        surrogate.Q, surrogate.Qt, surrogate.b, lam, warm, y0, s0, radii, total,
        alpha, int(max_iter), float(eps), int(config.gap_check_every))
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(wavg))):
        raise DivergenceError(f"mirror-prox produced non-finite iterates after {iters} "
                              f"iterations")

    candidates = [("ergodic", wavg), ("last", w),
                  ("polished", polish(surrogate, lift, lam, w, y, alpha)),
                  ("polished_ergodic", polish(surrogate, lift, lam, wavg, yavg, alpha)),
                  ("best_response", best_response(surrogate, lift, lam, yavg)),
                  ("warm", warm)]
    scored = [(surrogate.objective(v, lam), i, name, v)
              for i, (name, v) in enumerate(candidates)]
    f_out, _, pick, out = min(scored, key=lambda t: (t[0], t[1]))
    if info is not None:
        info.update(iterations=iters, converged=ok, gaps=gaps, picked=pick,
                    objective=f_out, degenerate=False,
                    state=SaddleState(w=w, y=y, s=s, alpha=alpha),
                    ergodic=SaddleState(w=wavg, y=yavg, s=savg, alpha=alpha))
    return BeamVector(np.array(out), rel_threshold=config.sparsity_rel_threshold)


class MirrorProxSolver:
    """SP-MP backend.

    Only the simplex block carries over between SCA steps, and only half of
    it: the next subproblem starts from the midpoint of the previous final
    ``y`` and the uniform weights. Reusing ``y`` as-is left entries near the
    floor that the entropic step cannot revive within the iteration budget;
    a fully fresh start wastes the information about which users are active.
    The ``s`` block restarts from the unit directions of the warm point.
    """

    name = "spmp"

    def __init__(self, dual_mix: float = 0.5):
        if not 0.0 <= dual_mix <= 1.0:
            raise ValueError("dual_mix must lie in [0, 1]")
        self.dual_mix = dual_mix
        self.last_info: dict = {}
        self._y: np.ndarray | None = None

    def reset(self) -> None:
        self._y = None

    def solve(self, surrogate, lift, lam, warm, config) -> BeamVector:
        info: dict = {}
        y0 = None
        if self._y is not None and self._y.shape == (surrogate.M,) and self.dual_mix > 0:
            y0 = (1.0 - self.dual_mix) * self._y + self.dual_mix / surrogate.M
            y0 /= y0.sum()
        beam = mirror_prox_solve(surrogate, lift, lam, warm, config, y0=y0, info=info)
        state = info.get("state")
        if state is not None:
            self._y = state.y.copy()
        self.last_info = info
        return beam
