"""Consensus ADMM backend for the SCA subproblem.

The cost ``u(w) + lam ||w||_{1,2} + I_P(w)`` is split into three terms, each
with its own copy of ``w``. The norm and the indicator have closed-form
proxes; the piecewise-linear term is smoothed by log-sum-exp and its prox is
computed by a constant-momentum accelerated gradient method started at the
current consensus average.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .core import BeamVector, RealLiftedInstance, SolverConfig, SolverError
from .sca import SurrogateModel


MIN_SCALE = 1e-6


class DivergenceError(SolverError):
    pass


@dataclass
class AdmmState:
    w1: np.ndarray
    w2: np.ndarray
    w3: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    v3: np.ndarray
    rho: float

    @classmethod
    def start(cls, warm, rho: float) -> "AdmmState":
        w = np.array(warm, dtype=float)
        z = np.zeros_like(w)
        return cls(w.copy(), w.copy(), w.copy(), z.copy(), z.copy(), z.copy(), rho)

    @property
    def w_av(self) -> np.ndarray:
        return (self.w1 + self.w2 + self.w3) / 3.0

    @property
    def residual(self) -> float:
        a = self.w_av
        return float(sum(np.linalg.norm(w - a) for w in (self.w1, self.w2, self.w3)))

    def summary(self) -> str:
        return ", ".join(f"|{k}|={np.linalg.norm(getattr(self, k)):.3e}"
                         for k in ("w1", "w2", "w3", "v1", "v2", "v3"))


def prox_group_l12(x, t: float) -> np.ndarray:
    """Group soft-thresholding: prox of ``t * ||.||_{1,2}``."""
    if t < 0:
        raise ValueError("threshold must be nonnegative")
    return K.prox_group_l12(np.asarray(x, dtype=float), float(t))


def smoothed_pwl(surrogate: SurrogateModel, w, mu: float):
    """``mu * logsumexp((Qw + b) / mu) - mu log M`` and its gradient."""
    if not mu > 0:
        raise ValueError("mu must be positive")
    v, g = K.smoothed_max(surrogate.Q, surrogate.Qt, surrogate.b,
                          np.asarray(w, dtype=float), float(mu))
    return float(v), g


def spectral_norm_sq(Q: np.ndarray, max_iter: int = 50, rtol: float = 1e-8) -> float:
    """Largest eigenvalue of ``Q^T Q`` by power iteration.

    The Rayleigh quotient approaches from below, so the result is inflated by
    a relative ``1e-7`` to stay an upper bound once converged.
    """
    if not np.any(Q):
        return 0.0
    rng = np.random.default_rng(12345)
    x = rng.standard_normal(Q.shape[1])
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(max_iter):
        y = Q.T @ (Q @ x)
        new = float(x @ y)
        ny = np.linalg.norm(y)
        if ny == 0:
            break
        x = y / ny
        if abs(new - est) <= rtol * new:
            est = new
            break
        est = new
    return est * (1.0 + 1e-7)


def inner_accuracy(eps: float, mu: float, M: int) -> float:
    e = eps - mu * np.log(M)
    return e if e > 0 else eps / 10.0


def prox_g1_accel(surrogate: SurrogateModel, x, rho: float, mu: float, eps_mu: float,
                  w_init=None, max_iter: int = 1000, info: dict | None = None):
    """Approximate prox of the smoothed piecewise-linear term at ``x``.

    ``w_init`` defaults to ``x``; inside ADMM it is the consensus average.
    """
    if not (rho > 0 and mu > 0 and eps_mu > 0):
        raise ValueError("rho, mu and eps_mu must be positive")
    x = np.asarray(x, dtype=float)
    w0 = x if w_init is None else np.asarray(w_init, dtype=float)
    L = 1.0 / rho + spectral_norm_sq(surrogate.Q) / mu
    w, iters, ok = K.accel_prox(surrogate.Q, surrogate.Qt, surrogate.b, x, w0,
                                rho, mu, L, eps_mu, max_iter)
    if info is not None:
        info.update(iterations=iters, converged=ok, L=L)
    return w


def subproblem_scale(surrogate: SurrogateModel) -> float:
    """Typical magnitude of the pieces: the mean user quadratic at the base."""
    c = float(np.mean(surrogate.b))
    return c if c > MIN_SCALE else MIN_SCALE


def admm_solve(surrogate: SurrogateModel, lift: RealLiftedInstance, lam: float, warm,
               config: SolverConfig, state: AdmmState | None = None,
               info: dict | None = None) -> BeamVector:
    """Solve one SCA subproblem; ``state`` (if given) is updated in place.

    ADMM runs on the cost divided by :func:`subproblem_scale`, so ``rho`` and
    ``mu`` act on a cost of order one whatever the SNR level; in the original
    units this is the penalty ``rho / c`` and the smoothing ``mu * c``. The
    smoothed-prox conditioning ``1 + rho ||Q||^2 / (mu c^2)`` then stays
    bounded as the array grows. Scaled duals carried over from a previous call
    are rescaled when ``c`` changes.
    """
    warm = lift.check_dim(warm)
    c = subproblem_scale(surrogate)
    rho, mu = config.admm_rho / c, config.smoothing_mu * c
    if state is None or state.w1.shape != warm.shape:
        state = AdmmState.start(warm, rho)
    elif state.rho != rho:
        r = rho / state.rho
        state.v1 *= r
        state.v2 *= r
        state.v3 *= r
        state.rho = rho
    L = 1.0 / rho + spectral_norm_sq(surrogate.Q) / mu
    eps_mu = c * inner_accuracy(config.inner_eps, config.smoothing_mu, surrogate.M)
    radii, total = lift.power_args
    iters, status, prox_fail, res = K.admm_run(
        surrogate.Q, surrogate.Qt, surrogate.b, float(lam), rho, mu, L, radii, total,
        state.w1, state.w2, state.w3, state.v1, state.v2, state.v3,
        config.max_inner_iters, config.inner_eps, eps_mu, config.max_prox_iters,
        50, 10.0)
    if status == 2:
        raise DivergenceError(f"ADMM diverged after {iters} iterations "
                              f"(residual {res:.3e}); state: {state.summary()}")

    # the prox copy carries exact zeros; the average only has residual-sized ones
    sparse = K.project_power(state.w2, radii, total)
    dense = K.project_power(state.w_av, radii, total)
    f_sparse = surrogate.objective(sparse, lam)
    f_dense = surrogate.objective(dense, lam)
    f_warm = surrogate.objective(warm, lam)
    tol = config.inner_eps * max(1.0, abs(f_dense))
    out, f_out = (sparse, f_sparse) if f_sparse <= f_dense + tol else (dense, f_dense)
    if f_out > f_warm:
        out, f_out = warm.copy(), f_warm
    if info is not None:
        info.update(iterations=iters, converged=status == 0, prox_failures=prox_fail,
                    residual=res, objective=f_out, state=state)
    return BeamVector(out, rel_threshold=config.sparsity_rel_threshold)


class AdmmSolver:
    """Stateful C-ADMM backend: copies and duals persist across SCA steps."""

    name = "admm"

    def __init__(self):
        self.state: AdmmState | None = None
        self.last_info: dict = {}

    def reset(self) -> None:
        self.state = None

    def solve(self, surrogate, lift, lam, warm, config) -> BeamVector:
        info: dict = {}
        beam = admm_solve(surrogate, lift, lam, warm, config, state=self.state, info=info)
        self.state = info["state"]
        self.last_info = info
        return beam
