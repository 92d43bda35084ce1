"""Batch execution: many independent orbits through a chunked step loop.

Each orbit (one initial state + one parameter vector) is integrated with a
fixed step dt.  Work is organised in chunks of ``ksteps`` solver steps; the
state is sampled into the trajectory store once per chunk, i.e. with a
storing frequency of 1 / (ksteps * dt).  Orbits are partitioned into
contiguous groups of ``chunk_group`` and the groups are handed to a pool of
worker threads; each group is integrated as one vectorised block.

Noise is addressed by the absolute step index (split into the two free
32-bit counter words of the generator), not by chunk-local indices.  Two
consequences: the stored trajectories are bit-identical regardless of worker
count or scheduling, and re-running with a different ksteps leaves the noise
consumed at each simulated time unchanged, so coarser sampling of the same
run is exactly a subsample of the finer one.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .model import ModelSpec, OrbitBatch
from .solvers import (euler_maruyama_step, euler_step, rk4_step,
                      implicit_euler_step, implicit_midpoint_step, get_solver)

__all__ = [
    "ConfigError", "EngineConfig", "TrajectoryStore", "OrbitFailure",
    "iteration_count", "partition_orbits", "run_batch",
]

_MASK32 = 0xFFFFFFFF


class ConfigError(ValueError):
    """A run configuration that cannot be executed as requested."""


@dataclass(frozen=True)
class EngineConfig:
    """Description of one integration run.

    ``tspan`` must be an integer multiple of dt * ksteps; set ``pad=True``
    to round the chunk count up and integrate past tspan instead of
    rejecting the configuration.  ``threads`` is a worker count or "all".
    """

    dt: float
    tspan: float
    ksteps: int
    orbits: int
    solver: str = "em"
    chunk_group: int = 8
    seed: int = 0
    threads: int | str = "all"
    pad: bool = False
    solver_tol: float = 1e-10
    solver_max_iter: int = 50
    max_store_bytes: int = 4 * 2 ** 30

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.tspan <= 0:
            raise ConfigError("tspan must be positive")
        if self.ksteps < 1:
            raise ConfigError("ksteps must be >= 1")
        if self.orbits < 1:
            raise ConfigError("orbits must be >= 1")
        if self.chunk_group < 1:
            raise ConfigError("chunk_group must be >= 1")
        get_solver(self.solver)
        if self.threads != "all":
            if not isinstance(self.threads, int) or self.threads < 1:
                raise ConfigError("threads must be a positive integer or 'all'")

    def worker_count(self) -> int:
        if self.threads == "all":
            return os.cpu_count() or 1
        return self.threads


@dataclass(frozen=True)
class OrbitFailure:
    """First solver failure of one orbit; the rest of its row is NaN."""

    orbit: int
    chunk: int
    step: int
    time: float
    reason: str


@dataclass
class TrajectoryStore:
    """Sampled states of every orbit at the storing frequency.

    ``values`` has shape (orbits, samples, nequat) with sample 0 equal to
    the initial state verbatim and sample spacing exactly ksteps * dt.
    """

    times: np.ndarray
    values: np.ndarray
    model_name: str = ""
    config: EngineConfig | None = None
    failures: list = field(default_factory=list)

    @property
    def orbits(self) -> int:
        return self.values.shape[0]

    @property
    def samples(self) -> int:
        return self.values.shape[1]

    @property
    def nequat(self) -> int:
        return self.values.shape[2]


def iteration_count(tspan: float, dt: float, ksteps: int, pad: bool = False) -> int:
    """Number of chunks k = tspan / (dt * ksteps), an exact integer.

    A non-divisible tspan is a configuration error unless ``pad`` is set, in
    which case k is rounded up and the run integrates past tspan.
    """
    if dt <= 0 or tspan <= 0 or ksteps < 1:
        raise ConfigError("tspan, dt and ksteps must be positive")
    ratio = tspan / (dt * ksteps)
    k = round(ratio)
    if k >= 1 and abs(ratio - k) <= 1e-9 * max(1.0, abs(ratio)):
        return k
    if pad:
        return max(1, math.ceil(ratio - 1e-12))
    raise ConfigError(
        "tspan=%g is not an integer multiple of dt*ksteps=%g (pass pad=True to round up)"
        % (tspan, dt * ksteps))


def partition_orbits(orbits: int, chunk_group: int) -> list[range]:
    """Contiguous orbit index ranges of width chunk_group (last may be short)."""
    if orbits < 1 or chunk_group < 1:
        raise ConfigError("orbits and chunk_group must be >= 1")
    return [range(start, min(start + chunk_group, orbits))
            for start in range(0, orbits, chunk_group)]


def _make_stepper(model: ModelSpec, config: EngineConfig):
    """Bind the configured solver to a uniform (t, y, p, noise) -> (y, ok) call."""
    info = get_solver(config.solver)
    if not info.stochastic and model.nnoise > 0:
        raise ConfigError(
            "solver %r is deterministic but model %r has %d noise terms; "
            "use the em solver or a noise-free model"
            % (config.solver, model.name, model.nnoise))
    dt = config.dt
    if info.name == "em":
        def step(t, y, p, noise):
            return euler_maruyama_step(model, t, y, p, dt, noise), None
    elif info.name == "euler":
        def step(t, y, p, noise):
            return euler_step(model, t, y, p, dt), None
    elif info.name == "rk4":
        def step(t, y, p, noise):
            return rk4_step(model, t, y, p, dt), None
    elif info.name == "ie":
        def step(t, y, p, noise):
            res = implicit_euler_step(model, t, y, p, dt, config.solver_tol,
                                      config.solver_max_iter, raise_on_failure=False)
            return res.y, res.converged
    else:
        def step(t, y, p, noise):
            res = implicit_midpoint_step(model, t, y, p, dt, config.solver_tol,
                                         config.solver_max_iter, raise_on_failure=False)
            return res.y, res.converged
    return step, info


def run_batch(model: ModelSpec, config: EngineConfig, batch: OrbitBatch) -> TrajectoryStore:
    """Integrate every orbit of the batch and sample once per chunk.

    Orbits are independent: a solver failure (non-finite state or implicit
    non-convergence) is recorded with its (orbit, chunk, step) address, that
    orbit's remaining samples become NaN, and all other orbits complete.
    The store is bit-identical for any worker count and across repeated runs.
    """
    batch.check_against(model)
    if batch.orbits != config.orbits:
        raise ConfigError("config says %d orbits but batch has %d"
                          % (config.orbits, batch.orbits))
    if batch.orbits > _MASK32:
        raise ConfigError("orbit count must fit in 32 bits")
    chunks = iteration_count(config.tspan, config.dt, config.ksteps, pad=config.pad)
    if chunks * config.ksteps >= 2 ** 63:
        raise ConfigError("total step count does not fit in 63 bits")

    samples = chunks + 1
    store_bytes = batch.orbits * samples * model.nequat * 8
    if store_bytes > config.max_store_bytes:
        raise ConfigError(
            "trajectory store would need %d bytes (orbits=%d, samples=%d, nequat=%d), "
            "above the configured cap of %d"
            % (store_bytes, batch.orbits, samples, model.nequat, config.max_store_bytes))

    step, info = _make_stepper(model, config)
    sample_dt = config.ksteps * config.dt
    times = np.arange(samples, dtype=np.float64) * sample_dt
    values = np.empty((batch.orbits, samples, model.nequat), dtype=np.float64)
    values[:, 0, :] = batch.init

    init = batch.init
    params = batch.params
    nnoise = model.nnoise
    seed = config.seed
    dt = config.dt
    ksteps = config.ksteps

    def integrate_group(group: range) -> list[OrbitFailure]:
        rows = slice(group.start, group.stop)
        y = init[rows].copy()
        p = params[rows]
        orbit_ids = np.arange(group.start, group.stop, dtype=np.uint32)
        alive = np.ones(len(group), dtype=bool)
        failures: list[OrbitFailure] = []
        with np.errstate(all="ignore"):
            for chunk in range(chunks):
                base = chunk * ksteps
                for local in range(ksteps):
                    step_index = base + local
                    t = step_index * dt
                    if info.stochastic and nnoise:
                        noise = rng.normals_for_orbits(
                            seed, orbit_ids,
                            (step_index >> 32) & _MASK32, step_index & _MASK32,
                            nnoise)
                    else:
                        noise = None
                    y, converged = step(t, y, p, noise)
                    ok = np.isfinite(y).all(axis=-1)
                    if converged is not None:
                        ok = ok & np.asarray(converged)
                    failed = alive & ~ok
                    if failed.any():
                        unconverged = (None if converged is None
                                       else ~np.broadcast_to(np.asarray(converged, dtype=bool),
                                                             alive.shape))
                        for idx in np.nonzero(failed)[0]:
                            if unconverged is not None and unconverged[idx]:
                                reason = "implicit iteration did not converge"
                            else:
                                reason = "state became non-finite"
                            failures.append(OrbitFailure(
                                orbit=group.start + int(idx), chunk=chunk,
                                step=local, time=t, reason=reason))
                        y[failed] = np.nan
                        alive = alive & ok
                values[rows, chunk + 1, :] = y
        return failures

    groups = partition_orbits(batch.orbits, config.chunk_group)
    workers = min(config.worker_count(), len(groups))
    failures: list[OrbitFailure] = []
    if workers <= 1:
        for group in groups:
            failures.extend(integrate_group(group))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for result in pool.map(integrate_group, groups):
                failures.extend(result)
    failures.sort(key=lambda f: f.orbit)
    return TrajectoryStore(times=times, values=values, model_name=model.name,
                           config=config, failures=failures)
