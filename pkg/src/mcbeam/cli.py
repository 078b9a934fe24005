"""Command-line front end and experiment harness.

Subcommands::

    gen     draw an instance and write it as JSON
    solve   one instance: a penalized SCA solve, or selection with --k
    sweep   Monte-Carlo selection runs over a K list
    oracle  exhaustive-search baseline over a K list
    bench   preset scenarios (traditional, massive, scaling)

Batch commands write one CSV row per (trial, K, solver) and a JSON sidecar
holding the effective configuration and per-row traces. Everything except
``wall_ms`` is a deterministic function of the flags.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .channel import (ChannelModelParams, dumps_instance, generate_instance,
                      load_instance)
from .core import (InvalidInstanceError, PerAntenna, SolverConfig, SolverError,
                   SumPower, lift_to_real, to_db)
from .oracle import OracleCapExceeded, default_workers, exhaustive_select
from .sca import sca_solve
from .selection import select_antennas

log = logging.getLogger("mcbeam")

CSV_COLUMNS = ("trial", "N", "M", "K", "solver", "lambda_final", "t_repeat",
               "min_snr_db", "wall_ms", "sca_iters", "converged")

EXIT_OK, EXIT_SOLVER, EXIT_USAGE = 0, 1, 2

# fewer inner prox steps per ADMM iteration keep the large scenarios at desk
# scale; a --config file or flag still overrides these
LARGE_ARRAY_CONFIG = {"max_prox_iters": 10}

SCENARIOS = {
    "traditional": dict(n_list=[10], m=50, power="sum:10", k_list=list(range(2, 11)),
                        lambda_ub=1.0, trials=100, config={}),
    "massive": dict(n_list=[200], m=50, power="per:0.5", k_list=[25, 50, 100, 150, 200],
                    lambda_ub=2.0, trials=10, config=LARGE_ARRAY_CONFIG),
    "scaling": dict(n_list=[100, 150, 200, 250, 300], m=50, power="per:0.5",
                    k_list=None, lambda_ub=2.0, trials=10, config=LARGE_ARRAY_CONFIG),
}


class UsageError(Exception):
    pass


def parse_power(text: str, n: int):
    """``sum:P`` or ``per:P`` (uniform) or ``per:P1,P2,...`` (one per antenna)."""
    try:
        kind, _, val = text.partition(":")
        if kind == "sum":
            return SumPower(float(val))
        if kind == "per":
            vals = [float(v) for v in val.split(",")]
            if len(vals) == 1:
                return PerAntenna.uniform(vals[0], n)
            if len(vals) != n:
                raise UsageError(f"--power per: needs 1 or {n} values, got {len(vals)}")
            return PerAntenna(tuple(vals))
    except ValueError as exc:
        raise UsageError(f"bad --power {text!r}: {exc}") from None
    raise UsageError(f"bad --power {text!r}; use sum:P or per:P")


def parse_int_list(text: str) -> list:
    try:
        out = []
        for part in text.split(","):
            if "-" in part:
                a, b = part.split("-")
                out.extend(range(int(a), int(b) + 1))
            elif part:
                out.append(int(part))
        return out
    except ValueError:
        raise UsageError(f"bad integer list {text!r}") from None


def load_config(path, overrides: dict, base: dict | None = None) -> SolverConfig:
    """Defaults, then ``base`` (a scenario preset), then the JSON file, then flags."""
    known = {f.name for f in fields(SolverConfig)}
    data = dict(base or {})
    if path:
        try:
            file_data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        if not isinstance(file_data, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = sorted(set(file_data) - known)
        if unknown:
            raise UsageError(f"unknown config keys {unknown}")
        data.update(file_data)
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return SolverConfig(**data)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from None


# ---------------------------------------------------------------------------
# one unit of batch work


@dataclass(frozen=True)
class Job:
    mode: str  # "select", "oracle" or "penalized"
    trial: int
    N: int
    M: int
    power: str
    seed: int
    k_list: tuple
    solvers: tuple
    lam: float
    config: SolverConfig
    instance_path: str | None = None


def _format_row(r: dict) -> dict:
    return {
        "trial": str(r["trial"]),
        "N": str(r["N"]),
        "M": str(r["M"]),
        "K": str(r["K"]),
        "solver": r["solver"],
        "lambda_final": f"{r['lambda_final']:.10g}",
        "t_repeat": str(r["t_repeat"]),
        "min_snr_db": f"{r['min_snr_db']:.6f}",
        "wall_ms": f"{r['wall_ms']:.3f}",
        "sca_iters": str(r["sca_iters"]),
        "converged": "true" if r["converged"] else "false",
    }


def _make_solver(name: str):
    from . import make_solver
    return make_solver(name)


def run_job(job: Job) -> list:
    if job.instance_path:
        inst = load_instance(job.instance_path)
    else:
        power = parse_power(job.power, job.N)
        inst = generate_instance(ChannelModelParams(job.N, job.M, rng_seed=job.seed),
                                 power, trial=job.trial)
    lift = lift_to_real(inst, normalize=True)
    rows = []
    for K in job.k_list:
        for name in job.solvers:
            rows.append(_run_one(job, lift, K, name))
    return rows


def _run_one(job: Job, lift, K, name) -> dict:
    solver = _make_solver(name)
    row = dict(trial=job.trial, N=lift.N, M=lift.M, K=K, solver=name,
               lambda_final=job.lam, t_repeat=0, min_snr_db=float("-inf"),
               min_snr=0.0, wall_ms=0.0, sca_iters=0, converged=False,
               selected=[], objective_trace=[], bisection=[], error=None)
    t0 = time.perf_counter()
    try:
        if job.mode == "penalized":
            rep = sca_solve(lift, job.lam, solver, config=job.config)
            row.update(K=rep.final_beam.cardinality, t_repeat=rep.t_repeat,
                       min_snr=rep.min_snr, sca_iters=rep.sca_iters,
                       converged=rep.converged, selected=list(rep.selected_antennas),
                       objective_trace=list(rep.objective_trace))
        else:
            if job.mode == "oracle":
                res = exhaustive_select(lift, K, solver, job.config, workers=1)
            else:
                res = select_antennas(lift, K, solver, job.config)
            rep = res.refit_report
            row.update(lambda_final=res.lambda_final, t_repeat=res.t_repeat,
                       min_snr=res.min_snr, sca_iters=rep.sca_iters if rep else 0,
                       converged=bool(rep.converged) if rep else True,
                       selected=list(res.selected),
                       objective_trace=list(rep.objective_trace) if rep else [],
                       exact=res.exact)
            if job.mode == "select":
                row["bisection"] = [[h.lam, h.cardinality] for h in res.history]
    except (SolverError, OracleCapExceeded, ValueError) as exc:
        row.update(error=f"{type(exc).__name__}: {exc}", converged=False)
        log.warning("trial %d K=%s %s failed: %s", job.trial, K, name, exc)
    row["wall_ms"] = 1e3 * (time.perf_counter() - t0)
    row["min_snr_db"] = to_db(row["min_snr"]) if row["min_snr"] > 0 else float("-inf")
    return row


def run_jobs(jobs: list, workers: int) -> list:
    if workers <= 1 or len(jobs) < 2:
        parts = [run_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run_job, jobs))
    return [r for part in parts for r in part]


def write_outputs(rows: list, meta: dict, out: str | None, json_path: str | None,
                  stdout=None) -> None:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(_format_row(r))
    if out:
        Path(out).write_text(buf.getvalue())
        if json_path is None:
            json_path = str(Path(out).with_suffix(".json"))
    else:
        (stdout or sys.stdout).write(buf.getvalue())
    if json_path:
        doc = dict(meta, rows=[{k: v for k, v in r.items()} for r in rows])
        Path(json_path).write_text(json.dumps(doc, indent=1, default=float) + "\n")


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p, need_gen: bool = False):
    p.add_argument("--n", type=int, required=need_gen, help="number of antennas")
    p.add_argument("--m", type=int, help="number of users")
    p.add_argument("--power", default="sum:10", help="sum:P or per:P (default sum:10)")
    p.add_argument("--seed", type=int, default=0, help="channel seed")


def _add_run(p):
    p.add_argument("--solver", default="spmp",
                   help="admm, spmp or a comma list (default spmp)")
    p.add_argument("--config", help="JSON file with solver settings")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.add_argument("--json", help="JSON sidecar path (default: CSV path with .json)")
    p.add_argument("--workers", type=int,
                   help="worker processes (default: MCBEAM_WORKERS or CPU count)")
    p.add_argument("--lambda-ub", type=float, dest="lambda_ub")
    p.add_argument("--max-bisection-steps", type=int, dest="max_bisection_steps")
    p.add_argument("--solver-seed", type=int, dest="rng_seed",
                   help="seed of the SCA starting point")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mcbeam", description=__doc__.split("\n\n")[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a random instance as JSON")
    _add_common(g, need_gen=True)
    g.add_argument("--trial", type=int, default=0)
    g.add_argument("--out", help="output path (default: stdout)")

    s = sub.add_parser("solve", help="solve one instance")
    s.add_argument("--instance", help="JSON instance file")
    _add_common(s)
    _add_run(s)
    s.add_argument("--k", type=int, help="select K antennas (otherwise penalized solve)")
    s.add_argument("--lambda", type=float, default=0.0, dest="lam")
    s.add_argument("--trial", type=int, default=0)

    for name, helptext in (("sweep", "bisection selection over a K list"),
                           ("oracle", "exhaustive search over a K list")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--instance", help="JSON instance file (one trial)")
        _add_common(p)
        _add_run(p)
        p.add_argument("--k", type=int)
        p.add_argument("--k-list", help="e.g. 2,3,5 or 2-10")

    b = sub.add_parser("bench", help="preset scenarios")
    b.add_argument("--scenario", choices=sorted(SCENARIOS), required=True)
    b.add_argument("--seed", type=int, default=0)
    _add_run(b)
    b.set_defaults(trials=None, solver="admm,spmp")
    b.add_argument("--k-list")
    b.add_argument("--n-list")
    b.add_argument("--m", type=int)
    return ap


def _solvers(text: str) -> tuple:
    from . import SOLVERS
    names = tuple(s for s in text.split(",") if s)
    bad = [s for s in names if s not in SOLVERS]
    if bad or not names:
        raise UsageError(f"unknown solver(s) {bad}; choose from {sorted(SOLVERS)}")
    return names


def _config_from(args, base=None) -> SolverConfig:
    overrides = {k: getattr(args, k, None)
                 for k in ("lambda_ub", "max_bisection_steps", "rng_seed")}
    return load_config(args.config, overrides, base)


def _workers(args) -> int:
    return args.workers if args.workers else default_workers()


def _k_list(args) -> tuple:
    if getattr(args, "k_list", None):
        ks = parse_int_list(args.k_list)
    elif getattr(args, "k", None) is not None:
        ks = [args.k]
    else:
        raise UsageError("give --k or --k-list")
    if not ks or min(ks) < 1:
        raise UsageError("K values must be positive")
    return tuple(ks)


def _meta(args, config: SolverConfig, **extra) -> dict:
    echo = {k: v for k, v in vars(args).items() if k not in ("func",)}
    return dict(command=args.command, args=echo, config=asdict(config),
                columns=list(CSV_COLUMNS), **extra)


def _instance_dims(args):
    if args.instance:
        inst = load_instance(args.instance)
        return inst.N, inst.M
    if args.n is None or args.m is None:
        raise UsageError("give --instance or both --n and --m")
    return args.n, args.m


def cmd_gen(args, stdout) -> int:
    if args.m is None:
        raise UsageError("--m is required")
    power = parse_power(args.power, args.n)
    inst = generate_instance(ChannelModelParams(args.n, args.m, rng_seed=args.seed),
                             power, trial=args.trial)
    text = dumps_instance(inst)
    if args.out:
        Path(args.out).write_text(text)
    else:
        stdout.write(text)
    return EXIT_OK


def cmd_solve(args, stdout) -> int:
    config = _config_from(args)
    N, M = _instance_dims(args)
    solvers = _solvers(args.solver)
    mode = "select" if args.k is not None else "penalized"
    job = Job(mode=mode, trial=args.trial, N=N, M=M, power=args.power, seed=args.seed,
              k_list=(args.k if args.k is not None else 0,), solvers=solvers,
              lam=args.lam, config=config, instance_path=args.instance)
    rows = run_job(job)
    write_outputs(rows, _meta(args, config), args.out, args.json, stdout)
    return EXIT_SOLVER if any(r["error"] for r in rows) else EXIT_OK


def _batch(args, stdout, mode: str) -> int:
    config = _config_from(args)
    N, M = _instance_dims(args)
    solvers = _solvers(args.solver)
    ks = _k_list(args)
    trials = 1 if args.instance else args.trials
    if trials < 1:
        raise UsageError("--trials must be positive")
    jobs = [Job(mode=mode, trial=t, N=N, M=M, power=args.power, seed=args.seed,
                k_list=ks, solvers=solvers, lam=0.0, config=config,
                instance_path=args.instance) for t in range(trials)]
    rows = run_jobs(jobs, _workers(args))
    write_outputs(rows, _meta(args, config), args.out, args.json, stdout)
    return EXIT_OK


def cmd_sweep(args, stdout) -> int:
    return _batch(args, stdout, "select")


def cmd_oracle(args, stdout) -> int:
    return _batch(args, stdout, "oracle")


def cmd_bench(args, stdout) -> int:
    sc = dict(SCENARIOS[args.scenario])
    if args.lambda_ub is None:
        args.lambda_ub = sc["lambda_ub"]
    config = _config_from(args, sc["config"])
    solvers = _solvers(args.solver)
    trials = args.trials if args.trials is not None else sc["trials"]
    if trials < 1:
        raise UsageError("--trials must be positive")
    n_list = parse_int_list(args.n_list) if args.n_list else sc["n_list"]
    m = args.m if args.m is not None else sc["m"]
    jobs = []
    for n in n_list:
        if args.k_list:
            ks = parse_int_list(args.k_list)
        elif sc["k_list"] is None:
            ks = [max(1, n // 10)]
        else:
            ks = sc["k_list"]
        ks = tuple(k for k in ks if 1 <= k <= n)
        jobs.extend(Job(mode="select", trial=t, N=n, M=m, power=sc["power"],
                        seed=args.seed, k_list=ks, solvers=solvers, lam=0.0,
                        config=config) for t in range(trials))
    rows = run_jobs(jobs, _workers(args))
    meta = _meta(args, config, scenario=dict(sc, n_list=n_list, m=m, trials=trials))
    write_outputs(rows, meta, args.out, args.json, stdout)
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "solve": cmd_solve, "sweep": cmd_sweep,
            "oracle": cmd_oracle, "bench": cmd_bench}


def main(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the usage text
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, stdout)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"mcbeam: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvalidInstanceError, OSError) as exc:
        print(f"mcbeam: error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except SolverError as exc:
        print(f"mcbeam: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
