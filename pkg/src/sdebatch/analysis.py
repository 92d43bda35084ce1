"""Ensemble analysis for phase-oscillator runs.

The complex order parameter of N phases is

    r e^(i Phi) = (1/N) sum_j e^(i theta_j)

with the coherence r in [0, 1] (0 fully desynchronised, 1 fully
synchronised) and the collective phase Phi reduced to [-pi, pi).  On top of
that sit per-orbit coherence time series, ensemble mean/std over
realizations, a time-step stability sweep and kymograph grids of wrapped
phases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .engine import EngineConfig, TrajectoryStore, run_batch
from .model import (ModelSpec, kuramoto_model, sample_kuramoto_batch,
                    ACCURACY_OMEGA_RANGE, ACCURACY_NOISE_RANGE)

__all__ = [
    "CoherencePoint", "CoherenceSeries", "EnsembleStats", "DtSweepRow",
    "wrap_phase", "order_parameter", "coherence_series", "ensemble_stats",
    "first_crossing_time", "dt_sweep", "kymograph_export",
    "STABILITY_DT_VALUES",
]

#: time steps of the stability sweep: 2**(l-5) / 5 for l = 1..5
STABILITY_DT_VALUES = tuple(2.0 ** (l - 5) / 5.0 for l in range(1, 6))


class CoherencePoint(NamedTuple):
    r: float
    phi: float


@dataclass
class CoherenceSeries:
    """Per-orbit coherence r(t) and collective phase Phi(t)."""

    times: np.ndarray   # (samples,)
    r: np.ndarray       # (orbits, samples)
    phi: np.ndarray     # (orbits, samples)


@dataclass
class EnsembleStats:
    """Mean and population standard deviation of r(t) over realizations."""

    times: np.ndarray
    mean_r: np.ndarray
    std_r: np.ndarray
    count: int


@dataclass
class DtSweepRow:
    """Terminal coherence statistics of one (coupling, dt) sweep cell."""

    coupling: float
    dt: float
    mean_r_end: float
    std_r_end: float
    stats: EnsembleStats


def wrap_phase(x):
    """Map angles onto [-pi, pi); -pi is included, +pi wraps to -pi."""
    return np.mod(np.asarray(x, dtype=np.float64) + math.pi, 2.0 * math.pi) - math.pi


def _order_parameter_arrays(phases: np.ndarray):
    z = np.exp(1j * phases).mean(axis=-1)
    r = np.minimum(np.abs(z), 1.0)
    phi = wrap_phase(np.arctan2(z.imag, z.real))
    phi = np.where(r == 0.0, 0.0, phi)
    return r, phi


def order_parameter(phases) -> CoherencePoint:
    """Coherence and collective phase of one population of phases.

    By convention Phi = 0 when r = 0 (the phase of a zero vector is
    undefined).
    """
    phases = np.asarray(phases, dtype=np.float64)
    if phases.ndim != 1 or phases.size == 0:
        raise ValueError("order_parameter expects a non-empty 1-d phase array")
    r, phi = _order_parameter_arrays(phases)
    return CoherencePoint(float(r), float(phi))


def coherence_series(store: TrajectoryStore) -> CoherenceSeries:
    """Order parameter per orbit per sample time of a phase-valued store."""
    r, phi = _order_parameter_arrays(store.values)
    return CoherenceSeries(times=store.times, r=r, phi=phi)


def ensemble_stats(series, times=None) -> EnsembleStats:
    """Per-time mean and population standard deviation of r over realizations.

    Accepts a :class:`CoherenceSeries` or a (realizations, samples) array.
    Needs at least two realizations of equal length.
    """
    if isinstance(series, CoherenceSeries):
        r = series.r
        times = series.times if times is None else times
    else:
        rows = list(series) if not isinstance(series, np.ndarray) else series
        try:
            r = np.asarray(rows, dtype=np.float64)
        except ValueError:
            raise ValueError("realizations have unequal lengths")
        if r.ndim != 2:
            raise ValueError("expected a (realizations, samples) array of r values")
    if r.shape[0] < 2:
        raise ValueError("ensemble statistics need at least 2 realizations")
    if times is None:
        times = np.arange(r.shape[1], dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    if times.shape[0] != r.shape[1]:
        raise ValueError("times length %d does not match series length %d"
                         % (times.shape[0], r.shape[1]))
    return EnsembleStats(times=times, mean_r=r.mean(axis=0), std_r=r.std(axis=0),
                         count=r.shape[0])


def first_crossing_time(times, series, level: float):
    """First time the series reaches the level, or None if it never does."""
    series = np.asarray(series, dtype=np.float64)
    above = np.nonzero(series >= level)[0]
    if above.size == 0:
        return None
    return float(np.asarray(times)[above[0]])


def dt_sweep(n_oscillators: int, couplings: Sequence[float],
             dts: Sequence[float] = STABILITY_DT_VALUES,
             realizations: int = 64, tspan: float = 400.0,
             sample_interval: float = 2.0, seed: int = 0,
             omega_range=ACCURACY_OMEGA_RANGE, noise_range=ACCURACY_NOISE_RANGE,
             threads: int | str = "all", chunk_group: int = 8,
             model_factory: Callable[[int], ModelSpec] | None = None) -> list[DtSweepRow]:
    """Terminal coherence statistics over a (coupling, dt) grid.

    For every cell the full protocol runs from scratch: a fresh batch is
    sampled with a cell-specific seed, every realization is one orbit with
    its own counter-keyed noise stream, and the reported statistics are
    taken at the literal final sample.  Each dt must divide the sample
    interval, which must divide tspan.
    """
    factory = model_factory or kuramoto_model
    model = factory(n_oscillators)
    rows = []
    for ik, coupling in enumerate(couplings):
        for il, dt in enumerate(dts):
            ksteps = round(sample_interval / dt)
            if not math.isclose(ksteps * dt, sample_interval, rel_tol=1e-9):
                raise ValueError("dt=%g does not divide the sample interval %g"
                                 % (dt, sample_interval))
            config = EngineConfig(dt=dt, tspan=tspan, ksteps=ksteps,
                                  orbits=realizations, solver="em",
                                  chunk_group=chunk_group, threads=threads,
                                  seed=seed + 1009 * ik + il)
            batch = sample_kuramoto_batch(n_oscillators, realizations,
                                          omega_range, noise_range,
                                          coupling, config.seed)
            store = run_batch(model, config, batch)
            stats = ensemble_stats(coherence_series(store))
            rows.append(DtSweepRow(coupling=float(coupling), dt=float(dt),
                                   mean_r_end=float(stats.mean_r[-1]),
                                   std_r_end=float(stats.std_r[-1]),
                                   stats=stats))
    return rows


def kymograph_export(store: TrajectoryStore, orbit: int) -> np.ndarray:
    """Wrapped phases of one orbit as a (time, oscillator) grid."""
    if not 0 <= orbit < store.orbits:
        raise IndexError("orbit %d out of range (store has %d)" % (orbit, store.orbits))
    return wrap_phase(store.values[orbit])
