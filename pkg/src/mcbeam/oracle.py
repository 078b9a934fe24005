"""Exhaustive-search baseline over all K-antenna subsets.

Every subset is refit at ``lam = 0`` from the restriction of one shared
seeded start, and the subset with the largest min-SNR wins. Subsets are
enumerated in lexicographic order and only a strictly better value replaces
the incumbent, so ties go to the lexicographically smallest subset no matter
how the work was split across processes.
"""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from math import comb

from .core import RealLiftedInstance, SolverConfig, eval_min_snr
from .sca import SubproblemSolver
from .selection import SelectionResult, refit_report, shared_start

log = logging.getLogger(__name__)

MONOTONE_SLACK = 0.02


class OracleCapExceeded(ValueError):
    def __init__(self, count: int, cap: int):
        super().__init__(f"exhaustive search needs {count} subset solves, cap is {cap}")
        self.count = count
        self.cap = cap


@dataclass(frozen=True)
class SubsetValue:
    subset: tuple
    min_snr: float


def _solve_chunk(lift, subsets, solver, config, w0):
    out = []
    for sub in subsets:
        beam, _ = refit_report(lift, sub, solver, config, w0=w0)
        out.append(SubsetValue(sub, eval_min_snr(lift, beam.values) * lift.snr_scale))
    return out


def _reduce(values):
    """Max min-SNR; earlier (lexicographically smaller) subsets win ties."""
    best = None
    for v in sorted(values, key=lambda v: v.subset):
        if best is None or v.min_snr > best.min_snr:
            best = v
    return best


def default_workers() -> int:
    env = os.environ.get("MCBEAM_WORKERS")
    if env:
        n = int(env)
        if n < 1:
            raise ValueError("MCBEAM_WORKERS must be a positive integer")
        return n
    return os.cpu_count() or 1


def exhaustive_select(lift: RealLiftedInstance, K: int, solver: SubproblemSolver,
                      config: SolverConfig = SolverConfig(),
                      workers: int | None = 1) -> SelectionResult:
    """Best ``K``-subset by exhaustive refits.

    ``workers > 1`` spreads the subsets over a process pool; ``None`` uses
    :func:`default_workers`. The result does not depend on the split.
    """
    N = lift.N
    if not 1 <= K <= N:
        raise ValueError(f"K must lie in [1, {N}], got {K}")
    count = comb(N, K)
    if count > config.oracle_cap:
        raise OracleCapExceeded(count, config.oracle_cap)
    workers = default_workers() if workers is None else int(workers)

    t0 = time.perf_counter()
    w0 = shared_start(lift, config.rng_seed)
    subsets = list(combinations(range(N), K))
    if workers <= 1 or count < 2 * workers:
        values = _solve_chunk(lift, subsets, solver, config, w0)
    else:
        chunks = [subsets[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_solve_chunk, [lift] * workers, chunks,
                             [solver] * workers, [config] * workers, [w0] * workers)
            values = [v for part in parts for v in part]
    best = _reduce(values)
    t_search = time.perf_counter() - t0

    # re-derive the winning beam locally so the result carries it
    beam, rep = refit_report(lift, best.subset, solver, config, w0=w0)
    return SelectionResult(selected=best.subset, lambda_final=0.0, t_repeat=0,
                           refit_beam=beam, min_snr=best.min_snr, exact=True,
                           history=tuple(values), refit_report=rep,
                           wall_time={"search": t_search})


@dataclass(frozen=True)
class OracleProfile:
    Ks: tuple
    min_snr: tuple
    violations: tuple  # (K, K_next) pairs that drop by more than the slack

    @property
    def monotone(self) -> bool:
        return not self.violations


def oracle_profile(lift: RealLiftedInstance, Ks, solver: SubproblemSolver,
                   config: SolverConfig = SolverConfig(), workers: int | None = 1,
                   slack: float = MONOTONE_SLACK) -> OracleProfile:
    """Oracle value for each ``K`` and the pairs where it drops as ``K`` grows.

    A ``K``-subset is feasible for ``K + 1`` with one antenna silent, so a
    drop larger than ``slack`` (relative) flags an SCA local optimum.
    """
    Ks = tuple(sorted(set(int(k) for k in Ks)))
    vals = tuple(exhaustive_select(lift, k, solver, config, workers).min_snr for k in Ks)
    bad = []
    for i in range(len(Ks) - 1):
        if vals[i + 1] < vals[i] * (1.0 - slack):
            bad.append((Ks[i], Ks[i + 1]))
            log.warning("oracle not monotone: K=%d gives %.4g, K=%d gives %.4g",
                        Ks[i], vals[i], Ks[i + 1], vals[i + 1])
    return OracleProfile(Ks=Ks, min_snr=vals, violations=tuple(bad))

