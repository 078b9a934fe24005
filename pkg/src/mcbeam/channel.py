"""Multipath downlink channels for a uniform linear array, plus JSON I/O.

Each user sees ``L_m`` scattering paths (uniform integer in
``[paths_min, paths_max]``), with i.i.d. ``CN(0, 1)`` gains and departure
angles uniform on ``[-pi/2, pi/2]``:

    h_m^H = sqrt(N / L_m) * sum_l alpha_l a(theta_l)^H

Random streams: every draw comes from a PCG64 generator seeded by
``SeedSequence(rng_seed, spawn_key=(STREAM_CHANNEL, trial, m))``, one
substream per user per trial, so any trial can be regenerated in isolation
and parallel trials never share state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (InvalidInstanceError, PowerConstraint, ProblemInstance,
                   power_from_dict)

STREAM_CHANNEL = 0
STREAM_INIT = 1

SCHEMA_KEYS = ("N", "M", "sigma2", "power", "H")


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent PCG64 generator for the spawn key ``key`` under ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class ChannelModelParams:
    N: int
    M: int
    paths_min: int = 5
    paths_max: int = 20
    spacing: float = 0.5  # antenna spacing in carrier wavelengths
    rng_seed: int = 0

    def __post_init__(self):
        if self.N < 1 or self.M < 1:
            raise ValueError("N and M must be positive")
        if self.paths_min < 1 or self.paths_min > self.paths_max:
            raise ValueError("need 1 <= paths_min <= paths_max")


@dataclass(frozen=True)
class PathDraw:
    gains: np.ndarray   # complex, length L
    angles: np.ndarray  # radians, length L

    @property
    def L(self) -> int:
        return self.gains.size


def steering_vector(theta: float, N: int, spacing: float = 0.5) -> np.ndarray:
    """ULA response ``exp(i 2 pi spacing n sin(theta))``, ``n = 0..N-1``."""
    n = np.arange(N)
    return np.exp(1j * 2 * np.pi * spacing * n * np.sin(theta))


def draw_paths(rng: np.random.Generator, params: ChannelModelParams) -> PathDraw:
    L = int(rng.integers(params.paths_min, params.paths_max + 1))
    gains = (rng.standard_normal(L) + 1j * rng.standard_normal(L)) / np.sqrt(2)
    angles = rng.uniform(-np.pi / 2, np.pi / 2, size=L)
    return PathDraw(gains=gains, angles=angles)


def channel_from_paths(paths: PathDraw, N: int, spacing: float = 0.5) -> np.ndarray:
    """Channel ``h`` (not ``h^H``) from its path gains and angles."""
    hH = np.zeros(N, dtype=complex)
    for a, th in zip(paths.gains, paths.angles):
        hH += a * steering_vector(th, N, spacing).conj()
    return np.sqrt(N / paths.L) * hH.conj()


def generate_instance(params: ChannelModelParams, power: PowerConstraint,
                      noise_vars=None, trial: int = 0) -> ProblemInstance:
    """Draw one instance; identical ``(params, trial)`` give identical output."""
    H = np.empty((params.M, params.N), dtype=complex)
    for m in range(params.M):
        rng = substream(params.rng_seed, STREAM_CHANNEL, trial, m)
        H[m] = channel_from_paths(draw_paths(rng, params), params.N, params.spacing)
    if noise_vars is None:
        noise_vars = np.ones(params.M)
    noise_vars = np.broadcast_to(np.asarray(noise_vars, dtype=float), (params.M,))
    return ProblemInstance(channels=H, noise_vars=noise_vars.copy(), power=power)


# ---------------------------------------------------------------------------
# JSON schema: {N, M, sigma2, power, H} with complex entries as [re, im]


def instance_to_dict(inst: ProblemInstance) -> dict:
    return {
        "N": inst.N,
        "M": inst.M,
        "sigma2": [float(v) for v in inst.noise_vars],
        "power": inst.power.to_dict(),
        "H": [[[float(z.real), float(z.imag)] for z in row] for row in inst.channels],
    }


def instance_from_dict(d: dict) -> ProblemInstance:
    missing = [k for k in SCHEMA_KEYS if k not in d]
    if missing:
        raise InvalidInstanceError(f"instance is missing keys {missing}")
    try:
        H = np.array([[complex(re, im) for re, im in row] for row in d["H"]])
    except (TypeError, ValueError) as exc:
        raise InvalidInstanceError(f"bad channel matrix: {exc}") from None
    if H.shape != (d["M"], d["N"]):
        raise InvalidInstanceError(
            f"H has shape {H.shape}, header says M={d['M']}, N={d['N']}")
    return ProblemInstance(channels=H, noise_vars=np.asarray(d["sigma2"], dtype=float),
                           power=power_from_dict(d["power"]))


def dumps_instance(inst: ProblemInstance) -> str:
    return json.dumps(instance_to_dict(inst), separators=(",", ":")) + "\n"


def save_instance(inst: ProblemInstance, path) -> None:
    Path(path).write_text(dumps_instance(inst))


def load_instance(path) -> ProblemInstance:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInstanceError(f"{path}: not valid JSON ({exc})") from None
    return instance_from_dict(d)
