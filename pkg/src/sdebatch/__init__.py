"""Embarrassingly parallel batch integration of SDE/ODE orbit ensembles.

One orbit per parameter-set/initial-condition pair, deterministic
counter-based noise addressable by (seed, orbit, step, draw), a runtime
expression language for model definition, built-in Kuramoto phase-coherence
analysis and a wall-clock benchmarking harness.
"""

__version__ = "0.1.0"

from .model import (ModelSpec, OrbitBatch, kuramoto_model, kuramoto_dsl_model,
                    sample_kuramoto_batch, speed_protocol_batch,
                    accuracy_protocol_batch, model_from_name, model_from_file,
                    model_from_dsl)
from .engine import EngineConfig, TrajectoryStore, OrbitFailure, ConfigError, run_batch
from .analysis import (CoherencePoint, CoherenceSeries, EnsembleStats,
                       order_parameter, coherence_series, ensemble_stats,
                       dt_sweep, kymograph_export, wrap_phase)
from .solvers import (euler_maruyama_step, euler_step, rk4_step,
                      implicit_euler_step, implicit_midpoint_step)
from .bench import BenchPoint, time_run, scaling_grid, speedup_table
from .storage import store_hash, write_store, read_store

__all__ = [
    "__version__",
    "ModelSpec", "OrbitBatch", "kuramoto_model", "kuramoto_dsl_model",
    "sample_kuramoto_batch", "speed_protocol_batch", "accuracy_protocol_batch",
    "model_from_name", "model_from_file", "model_from_dsl",
    "EngineConfig", "TrajectoryStore", "OrbitFailure", "ConfigError", "run_batch",
    "CoherencePoint", "CoherenceSeries", "EnsembleStats",
    "order_parameter", "coherence_series", "ensemble_stats",
    "dt_sweep", "kymograph_export", "wrap_phase",
    "euler_maruyama_step", "euler_step", "rk4_step",
    "implicit_euler_step", "implicit_midpoint_step",
    "BenchPoint", "time_run", "scaling_grid", "speedup_table",
    "store_hash", "write_store", "read_store",
]
