"""Problem instances, the real-domain lift and objective evaluation.

A complex beamformer ``w`` of length ``N`` is carried as the real vector
``[Re(w); Im(w)]`` of length ``2N``; the pair ``(j, j + N)`` is the group of
antenna ``j``. Each user's quadratic form ``|h^H w|^2 / sigma^2`` is rank two in
the lifted space and is evaluated through two real inner products, so no
``2N x 2N`` matrix is ever formed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from . import _kernels as K

__all__ = [
    "InvalidInstanceError",
    "DimensionError",
    "SolverError",
    "SumPower",
    "PerAntenna",
    "PowerConstraint",
    "ProblemInstance",
    "RealLiftedInstance",
    "BeamVector",
    "SolverConfig",
    "SolveReport",
    "lift_to_real",
    "complex_to_real",
    "real_to_complex",
    "eval_min_snr",
    "eval_objective",
    "project_power_set",
    "cardinality",
    "l12_norm",
    "linf2_norm",
    "to_db",
]


class InvalidInstanceError(ValueError):
    """Raised for malformed channels, noise variances or power budgets."""


class DimensionError(ValueError):
    """Raised when a vector does not match the lifted dimension."""


class SolverError(RuntimeError):
    """Base class for numerical failures inside a solver."""


# ---------------------------------------------------------------------------
# power constraints


@dataclass(frozen=True)
class SumPower:
    """Total transmit power budget ``||w||^2 <= P``."""

    P: float

    def __post_init__(self):
        if not (np.isfinite(self.P) and self.P > 0):
            raise InvalidInstanceError(f"sum power must be positive, got {self.P}")

    def kernel_args(self, n: int):
        return np.full(n, np.inf), float(np.sqrt(self.P))

    def restrict(self, selected) -> "SumPower":
        return self

    def total(self, n: int) -> float:
        return float(self.P)

    def to_dict(self) -> dict:
        return {"type": "sum", "P": float(self.P)}


@dataclass(frozen=True)
class PerAntenna:
    """Per-antenna budgets ``|w(i)|^2 <= P_i``."""

    P: tuple

    def __post_init__(self):
        p = tuple(float(v) for v in np.atleast_1d(np.asarray(self.P, dtype=float)))
        if not p or not all(np.isfinite(v) and v > 0 for v in p):
            raise InvalidInstanceError("per-antenna budgets must all be positive")
        object.__setattr__(self, "P", p)

    @classmethod
    def uniform(cls, value: float, n: int) -> "PerAntenna":
        return cls(tuple([float(value)] * n))

    def kernel_args(self, n: int):
        if len(self.P) != n:
            raise InvalidInstanceError(
                f"{len(self.P)} per-antenna budgets for {n} antennas")
        return np.sqrt(np.asarray(self.P)), 0.0

    def restrict(self, selected) -> "PerAntenna":
        return PerAntenna(tuple(self.P[i] for i in selected))

    def total(self, n: int) -> float:
        return float(sum(self.P))

    def to_dict(self) -> dict:
        return {"type": "per", "P": [float(v) for v in self.P]}


PowerConstraint = Union[SumPower, PerAntenna]


def power_from_dict(d: dict) -> PowerConstraint:
    kind = d.get("type")
    if kind == "sum":
        return SumPower(float(d["P"]))
    if kind == "per":
        return PerAntenna(tuple(d["P"]))
    raise InvalidInstanceError(f"unknown power constraint type {kind!r}")


# ---------------------------------------------------------------------------
# instances


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Single-group multicast instance: ``M`` users, ``N`` antennas.

    ``channels[m]`` is the user's complex channel ``h_m``; the received SNR of a
    beamformer ``w`` is ``|h_m^H w|^2 / noise_vars[m]``.
    """

    channels: np.ndarray
    noise_vars: np.ndarray
    power: PowerConstraint

    def __post_init__(self):
        h = np.array(self.channels, dtype=complex, ndmin=2)
        s2 = np.array(self.noise_vars, dtype=float, ndmin=1)
        if h.ndim != 2 or h.shape[0] == 0 or h.shape[1] == 0:
            raise InvalidInstanceError("channels must be a non-empty M x N array")
        if s2.shape != (h.shape[0],):
            raise InvalidInstanceError(
                f"expected {h.shape[0]} noise variances, got {s2.shape}")
        if not np.all(np.isfinite(h)):
            raise InvalidInstanceError("channel entries must be finite")
        if np.any(np.all(h == 0, axis=1)):
            raise InvalidInstanceError("zero channel vector")
        if not np.all(np.isfinite(s2)) or np.any(s2 <= 0):
            raise InvalidInstanceError("noise variances must be positive")
        if isinstance(self.power, PerAntenna) and len(self.power.P) != h.shape[1]:
            raise InvalidInstanceError(
                f"{len(self.power.P)} per-antenna budgets for {h.shape[1]} antennas")
        h.setflags(write=False)
        s2.setflags(write=False)
        object.__setattr__(self, "channels", h)
        object.__setattr__(self, "noise_vars", s2)

    @property
    def N(self) -> int:
        return self.channels.shape[1]

    @property
    def M(self) -> int:
        return self.channels.shape[0]

    def snr(self, w: np.ndarray) -> np.ndarray:
        """Per-user SNR of a complex beamformer, by direct complex arithmetic."""
        return np.abs(self.channels.conj() @ np.asarray(w)) ** 2 / self.noise_vars


def complex_to_real(w) -> np.ndarray:
    w = np.asarray(w, dtype=complex)
    return np.concatenate([w.real, w.imag])


def real_to_complex(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = x.size // 2
    return x[:n] + 1j * x[n:]


@dataclass(frozen=True, eq=False)
class RealLiftedInstance:
    """Real ``2N``-dimensional view of an instance.

    Row ``m`` of ``U`` and ``V`` are ``[Re h; Im h]`` and ``[-Im h; Re h]``,
    scaled by ``1/sqrt(sigma_m^2 * snr_scale)``, so that the lifted quadratic
    ``w^T A~_m w = (U_m . w)^2 + (V_m . w)^2`` equals the user's SNR divided by
    ``snr_scale``.
    """

    U: np.ndarray
    V: np.ndarray
    noise_vars: np.ndarray
    power: PowerConstraint
    snr_scale: float = 1.0
    _radii: np.ndarray = field(init=False, repr=False)
    _total_radius: float = field(init=False, repr=False)

    def __post_init__(self):
        for a in (self.U, self.V):
            a.setflags(write=False)
        radii, total = self.power.kernel_args(self.N)
        object.__setattr__(self, "_radii", radii)
        object.__setattr__(self, "_total_radius", total)

    @property
    def dim(self) -> int:
        return self.U.shape[1]

    @property
    def N(self) -> int:
        return self.U.shape[1] // 2

    @property
    def M(self) -> int:
        return self.U.shape[0]

    def groups(self):
        """Index pairs ``(j, j + N)`` of every antenna group."""
        n = self.N
        return [(j, j + n) for j in range(n)]

    @property
    def power_args(self):
        return self._radii, self._total_radius

    def check_dim(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if w.shape != (self.dim,):
            raise DimensionError(f"expected a vector of length {self.dim}, got {w.shape}")
        return w

    def quad(self, w) -> np.ndarray:
        """``w^T A~_m w`` for every user (nonnegative)."""
        w = self.check_dim(w)
        return (self.U @ w) ** 2 + (self.V @ w) ** 2

    def abar_rows(self, w) -> np.ndarray:
        """Rows ``A-_m w`` stacked into an ``M x 2N`` matrix, in O(MN)."""
        w = self.check_dim(w)
        return -(self.U * (self.U @ w)[:, None] + self.V * (self.V @ w)[:, None])

    def restrict(self, selected: Sequence[int]) -> "RealLiftedInstance":
        """Lift of the same instance with only the ``selected`` antennas."""
        sel = np.asarray(sorted(selected), dtype=int)
        if sel.size == 0:
            raise ValueError("restriction needs at least one antenna")
        if sel.min() < 0 or sel.max() >= self.N or np.unique(sel).size != sel.size:
            raise ValueError(f"invalid antenna subset {list(sel)}")
        cols = np.concatenate([sel, sel + self.N])
        return RealLiftedInstance(
            U=np.ascontiguousarray(self.U[:, cols]),
            V=np.ascontiguousarray(self.V[:, cols]),
            noise_vars=self.noise_vars,
            power=self.power.restrict(sel.tolist()),
            snr_scale=self.snr_scale,
        )

    def embed(self, selected: Sequence[int], x) -> np.ndarray:
        """Place a restricted lifted vector back into the full ``2N`` space."""
        sel = np.asarray(sorted(selected), dtype=int)
        x = np.asarray(x, dtype=float)
        out = np.zeros(self.dim)
        k = sel.size
        out[sel] = x[:k]
        out[sel + self.N] = x[k:]
        return out

    def project(self, w) -> np.ndarray:
        return K.project_power(self.check_dim(w), self._radii, self._total_radius)

    def is_feasible(self, w, tol: float = 1e-9) -> bool:
        w = self.check_dim(w)
        if self._total_radius > 0:
            return bool(np.linalg.norm(w) <= self._total_radius * (1 + tol) + tol)
        return bool(np.all(K.group_norms(w) <= self._radii * (1 + tol) + tol))


def lift_to_real(inst: ProblemInstance, normalize: bool = False) -> RealLiftedInstance:
    """Build the real lift of ``inst``.

    With ``normalize=True`` the quadratics are divided by the average
    per-antenna channel gain ``mean_m(||h_m||^2 / sigma_m^2) / N``. This keeps
    the regularization weight and the solver constants on a scale that does
    not grow with the array size; SNRs reported back through
    :class:`SolveReport` are always in physical units.
    """
    if not isinstance(inst, ProblemInstance):
        raise InvalidInstanceError("expected a ProblemInstance")
    h = inst.channels
    s2 = inst.noise_vars
    scale = 1.0
    if normalize:
        scale = float(np.mean(np.sum(np.abs(h) ** 2, axis=1) / s2) / inst.N)
    g = 1.0 / np.sqrt(s2 * scale)
    U = np.hstack([h.real, h.imag]) * g[:, None]
    V = np.hstack([-h.imag, h.real]) * g[:, None]
    return RealLiftedInstance(U=np.ascontiguousarray(U), V=np.ascontiguousarray(V),
                              noise_vars=np.asarray(s2), power=inst.power,
                              snr_scale=scale)


# ---------------------------------------------------------------------------
# beams


@dataclass(frozen=True, eq=False)
class BeamVector:
    """Lifted beamformer with group accounting computed on access."""

    values: np.ndarray
    rel_threshold: float = 1e-6

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size % 2:
            raise DimensionError("beam must be a 1-D vector of even length")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def N(self) -> int:
        return self.values.size // 2

    @property
    def group_norms(self) -> np.ndarray:
        return K.group_norms(self.values)

    @property
    def cardinality(self) -> int:
        return cardinality(self, self.rel_threshold)

    @property
    def support(self) -> tuple:
        gn = self.group_norms
        top = gn.max() if gn.size else 0.0
        if top == 0:
            return ()
        return tuple(int(j) for j in np.flatnonzero(gn > self.rel_threshold * top))

    def as_complex(self) -> np.ndarray:
        return real_to_complex(self.values)


def l12_norm(x) -> float:
    """Sum over antennas of the Euclidean norm of the (Re, Im) pair."""
    return float(K.l12_norm(np.asarray(x, dtype=float)))


def linf2_norm(x) -> float:
    """Dual of the l1,2 norm: the largest group norm."""
    return float(K.group_norms(np.asarray(x, dtype=float)).max())


def cardinality(w, rel_threshold: float = 1e-6) -> int:
    """Number of groups whose norm exceeds ``rel_threshold`` times the largest."""
    if rel_threshold <= 0:
        raise ValueError("rel_threshold must be positive")
    x = w.values if isinstance(w, BeamVector) else np.asarray(w, dtype=float)
    gn = K.group_norms(x)
    top = gn.max() if gn.size else 0.0
    if top == 0:
        return 0
    return int(np.count_nonzero(gn > rel_threshold * top))


def project_power_set(w_raw, power: PowerConstraint) -> np.ndarray:
    """Euclidean projection of a lifted vector onto the power set."""
    w = np.asarray(w_raw, dtype=float)
    if w.ndim != 1 or w.size % 2:
        raise DimensionError("expected a lifted vector of even length")
    radii, total = power.kernel_args(w.size // 2)
    return K.project_power(w, radii, total)


def _values(lift: RealLiftedInstance, w) -> np.ndarray:
    x = w.values if isinstance(w, BeamVector) else w
    return lift.check_dim(x)


def eval_min_snr(lift: RealLiftedInstance, w) -> float:
    """Smallest lifted SNR over users (in units of ``lift.snr_scale``)."""
    return float(lift.quad(_values(lift, w)).min())


def eval_objective(lift: RealLiftedInstance, w, lam: float) -> float:
    """``max_m w^T A-_m w + lam ||w||_{1,2}``."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    x = _values(lift, w)
    return float(-lift.quad(x).min() + lam * K.l12_norm(x))


def to_db(x: float) -> float:
    return float(10.0 * np.log10(x)) if x > 0 else float("-inf")


# ---------------------------------------------------------------------------
# configuration and reports


BISECTION_STARTS = ("random", "warm", "anchor")


@dataclass(frozen=True)
class SolverConfig:
    eps_outer: float = 1e-5
    max_inner_iters: int = 1000
    max_sca_iters: int = 15
    # relative to the cost level of each subproblem (see mcbeam.admm)
    admm_rho: float = 3.0
    smoothing_mu: float = 1e-2
    inner_eps: float = 1e-5
    sparsity_rel_threshold: float = 1e-6
    lambda_lb: float = 0.0
    lambda_ub: float = 1.0
    max_bisection_steps: int = 30
    rng_seed: int = 0
    # accelerated-gradient cap for the smoothed prox inside ADMM
    max_prox_iters: int = 50
    # mirror-prox gap is evaluated every this many iterations
    gap_check_every: int = 10
    # start of every bisection solve: "random" (the seeded draw), "warm"
    # (previous bisection solution) or "anchor" (the lambda = 0 solution)
    bisection_start: str = "random"
    # double lambda_ub while no bisection step has been too sparse
    expand_lambda_bracket: bool = True
    # stop bisecting once (ub - lb) <= lambda_rel_tol * ub
    lambda_rel_tol: float = 1e-3
    oracle_cap: int = 100_000

    def __post_init__(self):
        for name in ("eps_outer", "admm_rho", "smoothing_mu", "inner_eps",
                     "sparsity_rel_threshold", "lambda_rel_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("max_inner_iters", "max_sca_iters", "max_bisection_steps",
                     "max_prox_iters", "gap_check_every", "oracle_cap"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.bisection_start not in BISECTION_STARTS:
            raise ValueError(f"bisection_start must be one of {BISECTION_STARTS}")
        if self.lambda_lb < 0 or not self.lambda_lb < self.lambda_ub:
            raise ValueError("need 0 <= lambda_lb < lambda_ub")

    def replace(self, **changes) -> "SolverConfig":
        from dataclasses import replace
        return replace(self, **changes)


@dataclass
class SolveReport:
    final_beam: BeamVector
    objective_trace: list
    min_snr: float
    selected_antennas: tuple
    solver: str
    lambda_final: float
    t_repeat: int = 1
    sca_iters: int = 0
    converged: bool = False
    wall_time: dict = field(default_factory=dict)

    @property
    def min_snr_db(self) -> float:
        return to_db(self.min_snr)
