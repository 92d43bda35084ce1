"""Wall-clock benchmarking of batch runs.

A benchmark point times ``run_batch`` end to end (store allocation
included, model construction and batch sampling excluded) for a fixed
(system size, orbit count, thread count, chunk group) cell.  One untimed
warm-up run precedes the timed repeats, and a content hash of every timed
store confirms the repeats produced identical output.  Speedups are
reported as baseline mean runtime over candidate mean runtime for matching
(N, orbits) cells.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass

import numpy as np

from .engine import EngineConfig, run_batch
from .model import kuramoto_model, speed_protocol_batch
from .storage import store_hash

__all__ = [
    "BenchPoint", "BenchFailure", "SpeedupRow",
    "time_run", "scaling_grid", "speedup_table",
    "write_bench_csv", "write_speedup_csv",
    "DEFAULT_SYSTEM_SIZES", "DEFAULT_ORBIT_COUNTS", "DEFAULT_REPEATS",
]

DEFAULT_SYSTEM_SIZES = (5, 10, 15)
DEFAULT_ORBIT_COUNTS = (512, 5120, 25600, 40960, 81920, 163840)
DEFAULT_REPEATS = 8


@dataclass
class BenchPoint:
    """Runtimes of one benchmark cell."""

    N: int
    orbits: int
    threads: int | str
    chunk_group: int
    runtimes: list[float]
    mean: float
    std: float
    std_defined: bool

    @property
    def key(self):
        return (self.N, self.orbits)


@dataclass
class BenchFailure:
    """A grid cell that could not be run."""

    N: int
    orbits: int
    threads: int | str
    error: str


@dataclass
class SpeedupRow:
    N: int
    orbits: int
    threads: int | str
    speedup: float


def time_run(model, config: EngineConfig, batch, repeats: int = DEFAULT_REPEATS,
             warmup: bool = True) -> BenchPoint:
    """Run the batch ``repeats`` times and record wall-clock samples.

    With repeats = 1 the standard deviation is undefined and reported as
    0 with ``std_defined=False``.  Raises if the timed runs disagree on the
    store content hash (the timing would then be meaningless).
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    if warmup:
        run_batch(model, config, batch)
    runtimes = []
    reference_hash = None
    for _ in range(repeats):
        start = time.perf_counter()
        store = run_batch(model, config, batch)
        elapsed = time.perf_counter() - start
        runtimes.append(elapsed)
        digest = store_hash(store)
        if reference_hash is None:
            reference_hash = digest
        elif digest != reference_hash:
            raise RuntimeError("timed runs produced different stores; "
                               "determinism is broken")
    samples = np.asarray(runtimes)
    std_defined = repeats > 1
    return BenchPoint(
        N=model.nequat, orbits=config.orbits, threads=config.threads,
        chunk_group=config.chunk_group, runtimes=runtimes,
        mean=float(samples.mean()),
        std=float(samples.std()) if std_defined else 0.0,
        std_defined=std_defined,
    )


def scaling_grid(system_sizes=DEFAULT_SYSTEM_SIZES, orbit_counts=DEFAULT_ORBIT_COUNTS,
                 thread_counts=(1, "all"), *, dt: float = 0.05, tspan: float = 400.0,
                 ksteps: int = 40, chunk_group: int = 8, seed: int = 0,
                 repeats: int = DEFAULT_REPEATS,
                 max_store_bytes: int = 4 * 2 ** 30):
    """Cartesian benchmark sweep over system size x orbit count x threads.

    Uses the Kuramoto model with the benchmark parameter distributions.
    Failing cells are recorded and the sweep continues; returns
    (points, failures).
    """
    if not system_sizes or not orbit_counts or not thread_counts:
        raise ValueError("system_sizes, orbit_counts and thread_counts must be non-empty")
    points: list[BenchPoint] = []
    failures: list[BenchFailure] = []
    for n in system_sizes:
        model = kuramoto_model(n)
        for orbits in orbit_counts:
            batch = speed_protocol_batch(n, orbits, seed)
            for threads in thread_counts:
                config = EngineConfig(dt=dt, tspan=tspan, ksteps=ksteps,
                                      orbits=orbits, solver="em",
                                      chunk_group=chunk_group, seed=seed,
                                      threads=threads,
                                      max_store_bytes=max_store_bytes)
                try:
                    points.append(time_run(model, config, batch, repeats=repeats))
                except Exception as exc:
                    failures.append(BenchFailure(N=n, orbits=orbits,
                                                 threads=threads, error=str(exc)))
    return points, failures


def speedup_table(baseline: list[BenchPoint], candidates: list[BenchPoint]) -> list[SpeedupRow]:
    """Mean-runtime ratios baseline/candidate per matching (N, orbits) cell."""
    reference = {}
    for point in baseline:
        if point.threads != 1:
            raise ValueError("baseline points must be measured at threads=1")
        reference[point.key] = point
    rows = []
    for point in candidates:
        if point.key not in reference:
            raise ValueError("no threads=1 baseline for N=%d orbits=%d"
                             % (point.N, point.orbits))
        rows.append(SpeedupRow(N=point.N, orbits=point.orbits, threads=point.threads,
                               speedup=reference[point.key].mean / point.mean))
    return rows


def _host_comment() -> str:
    return "# host_logical_cpus=%d" % (os.cpu_count() or 1)


def write_bench_csv(points: list[BenchPoint], path):
    header = ["N", "orbits", "threads", "chunk_group", "mean_s", "std_s", "repeats"]
    with open(path, "w", encoding="utf-8", newline="\n") as out:
        out.write(_host_comment() + "\n")
        out.write(",".join(header) + "\n")
        for p in points:
            out.write(",".join([
                str(p.N), str(p.orbits), str(p.threads), str(p.chunk_group),
                repr(p.mean), repr(p.std), str(len(p.runtimes)),
            ]) + "\n")


def write_speedup_csv(rows: list[SpeedupRow], path):
    with open(path, "w", encoding="utf-8", newline="\n") as out:
        out.write(_host_comment() + "\n")
        out.write("N,orbits,threads,speedup\n")
        for row in rows:
            out.write("%d,%d,%s,%s\n" % (row.N, row.orbits, row.threads, repr(row.speedup)))
