"""SDE system definitions and the built-in stochastic Kuramoto model.

A model is a first-order system

    dy_i = f_i(t, y, p) dt + (stochastic increment)_i

described by its equation count, parameter count, noise count and two
evaluable definitions: the drift vector f and the combined per-equation
stochastic increment (the noise vector is already folded in, so diagonal and
general couplings share one interface).  Definitions are either native
callables or expression-language templates, interchangeable behind
:func:`drift_eval` / :func:`diffusion_eval`.

The built-in Kuramoto system of N phase oscillators with mean-field coupling
K, free-running frequencies omega_i and per-oscillator noise strengths s_i is

    dtheta_i = [omega_i + (K/N) sum_j sin(theta_j - theta_i)] dt + s_i dW_i

with parameter vector p = (K, omega_1..omega_N, s_1..s_N).  Phases are
integrated unwrapped; only phase differences enter the drift, so wrapping to
[-pi, pi) is an output-time concern (see analysis.wrap_phase).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from . import dsl
from . import rng

__all__ = [
    "ModelSpec", "OrbitBatch", "ModelDefinitionError",
    "drift_eval", "diffusion_eval",
    "kuramoto_model", "kuramoto_dsl_model", "sample_kuramoto_batch",
    "speed_protocol_batch", "accuracy_protocol_batch",
    "model_from_name", "model_from_file", "model_from_dsl",
    "KURAMOTO_DRIFT_TEMPLATE", "KURAMOTO_DIFFUSION_TEMPLATE",
    "SPEED_OMEGA_RANGE", "SPEED_NOISE_RANGE", "SPEED_COUPLING",
    "ACCURACY_OMEGA_RANGE", "ACCURACY_NOISE_RANGE", "ACCURACY_COUPLINGS",
    "KURAMOTO_CRITICAL_COUPLING",
]

DriftFn = Callable[[float, np.ndarray, np.ndarray], np.ndarray]
DiffusionFn = Callable[[float, np.ndarray, np.ndarray, np.ndarray], np.ndarray]

# Kuramoto expression templates; equation i reads its frequency from p[i+1]
# and its noise strength from p[1+N+i].
KURAMOTO_DRIFT_TEMPLATE = "p[i+1] + (p[0]/N) * sum(j, sin(y[j] - y[i]))"
KURAMOTO_DIFFUSION_TEMPLATE = "p[1+N+i] * n[i]"

# Parameter distributions of the two built-in Kuramoto study presets: the
# speed preset drives the benchmark sweeps, the accuracy preset the
# synchronisation-transition and time-step stability studies.
SPEED_OMEGA_RANGE = (0.01, 0.03)
SPEED_NOISE_RANGE = (0.001, 0.003)
SPEED_COUPLING = 1.0
ACCURACY_OMEGA_RANGE = (0.2, 0.4)
ACCURACY_NOISE_RANGE = (0.01, 0.03)
ACCURACY_COUPLINGS = (0.02, 0.2)

# Continuum-limit critical coupling for frequencies uniform on a width-0.2
# interval: 2 / (pi * g(omega_0)) with g = 5.
KURAMOTO_CRITICAL_COUPLING = 2.0 / (5.0 * math.pi)


class ModelDefinitionError(ValueError):
    """Raised when a model definition fails validation."""


@dataclass(frozen=True)
class ModelSpec:
    """An SDE system: dimensions plus drift/diffusion definitions.

    ``drift`` is a callable (t, y, p) -> f or an expression AST;
    ``diffusion`` is a callable (t, y, p, noise) -> increment or an AST and
    must return the combined per-equation stochastic increment with the
    noise already applied.  nnoise = 0 makes the system a plain ODE.
    """

    name: str
    nequat: int
    nparams: int
    nnoise: int
    drift: Union[DriftFn, dsl.ExprAst]
    diffusion: Union[DiffusionFn, dsl.ExprAst, None] = None

    def __post_init__(self):
        if self.nequat < 1:
            raise ModelDefinitionError("nequat must be >= 1, got %r" % (self.nequat,))
        if self.nnoise < 0:
            raise ModelDefinitionError("nnoise must be >= 0, got %r" % (self.nnoise,))
        if self.nparams < 0:
            raise ModelDefinitionError("nparams must be >= 0, got %r" % (self.nparams,))
        if self.nnoise > 0 and self.diffusion is None:
            raise ModelDefinitionError("a model with noise terms needs a diffusion definition")


@dataclass(frozen=True)
class OrbitBatch:
    """Initial states and parameter vectors, one row per orbit."""

    init: np.ndarray    # (orbits, nequat)
    params: np.ndarray  # (orbits, nparams)

    def __post_init__(self):
        init = np.asarray(self.init, dtype=np.float64)
        params = np.asarray(self.params, dtype=np.float64)
        if init.ndim != 2 or params.ndim != 2:
            raise ValueError("init and params must be 2-d (one orbit per row)")
        if init.shape[0] != params.shape[0]:
            raise ValueError("init has %d orbits but params has %d"
                             % (init.shape[0], params.shape[0]))
        object.__setattr__(self, "init", init)
        object.__setattr__(self, "params", params)

    @property
    def orbits(self) -> int:
        return self.init.shape[0]

    def check_against(self, model: ModelSpec):
        if self.init.shape[1] != model.nequat:
            raise ValueError("initial states have %d columns, model has nequat=%d"
                             % (self.init.shape[1], model.nequat))
        if self.params.shape[1] != model.nparams:
            raise ValueError("parameter rows have %d columns, model has nparams=%d"
                             % (self.params.shape[1], model.nparams))


def _check_dims(model: ModelSpec, y: np.ndarray, p: np.ndarray):
    if y.shape[-1] != model.nequat:
        raise ValueError("state vector has length %d, model has nequat=%d"
                         % (y.shape[-1], model.nequat))
    if p.shape[-1] != model.nparams:
        raise ValueError("parameter vector has length %d, model has nparams=%d"
                         % (p.shape[-1], model.nparams))


def drift_eval(model: ModelSpec, t: float, y: np.ndarray, p: np.ndarray,
               strict: bool = True) -> np.ndarray:
    """Evaluate the drift vector f(t, y, p).

    ``y`` and ``p`` may carry leading batch dimensions (many orbits at
    once); the result broadcasts to the shape of ``y``.
    """
    y = np.asarray(y, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    _check_dims(model, y, p)
    if callable(model.drift):
        out = model.drift(t, y, p)
    else:
        ctx = dsl.EvalContext(t=t, N=model.nequat, y=y, p=p, n=None, i=None)
        out = dsl.evaluate(model.drift, ctx, strict=strict)
    return np.broadcast_to(np.asarray(out, dtype=np.float64), y.shape)


def diffusion_eval(model: ModelSpec, t: float, y: np.ndarray, p: np.ndarray,
                   noise: np.ndarray, strict: bool = True) -> np.ndarray:
    """Evaluate the combined per-equation stochastic increment.

    ``noise`` holds the standard normal draws for one step (last axis of
    length nnoise); the result has the noise folded in already.  A model
    with nnoise = 0 always yields the zero vector.
    """
    y = np.asarray(y, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    _check_dims(model, y, p)
    if model.nnoise == 0:
        return np.zeros(y.shape, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape[-1] != model.nnoise:
        raise ValueError("noise vector has length %d, model has nnoise=%d"
                         % (noise.shape[-1], model.nnoise))
    if callable(model.diffusion):
        out = model.diffusion(t, y, p, noise)
    else:
        ctx = dsl.EvalContext(t=t, N=model.nequat, y=y, p=p, n=noise, i=None)
        out = dsl.evaluate(model.diffusion, ctx, strict=strict)
    return np.broadcast_to(np.asarray(out, dtype=np.float64), y.shape)


# ---------------------------------------------------------------------------
# Built-in Kuramoto system

def _kuramoto_drift(t, y, p):
    # The operation sequence deliberately mirrors the expression template so
    # that native and template-backed evaluation agree bit for bit; the
    # in-place sin writes into the freshly allocated difference grid.
    n = y.shape[-1]
    pairwise = np.subtract(y[..., None, :], y[..., :, None])
    np.sin(pairwise, out=pairwise)
    coupling = np.sum(pairwise, axis=-1)
    return np.add(p[..., 1:n + 1], np.multiply(np.divide(p[..., 0:1], float(n)), coupling))


def _kuramoto_diffusion(t, y, p, noise):
    n = y.shape[-1]
    return np.multiply(p[..., n + 1:], noise)


def kuramoto_model(n_oscillators: int) -> ModelSpec:
    """The stochastic Kuramoto system with N oscillators.

    nequat = nnoise = N, nparams = 2N + 1 with parameter layout
    (K, omega_1..omega_N, s_1..s_N).
    """
    n = int(n_oscillators)
    if n < 1:
        raise ModelDefinitionError("kuramoto model needs at least one oscillator")
    return ModelSpec(
        name="kuramoto:%d" % n,
        nequat=n,
        nparams=2 * n + 1,
        nnoise=n,
        drift=_kuramoto_drift,
        diffusion=_kuramoto_diffusion,
    )


def kuramoto_dsl_model(n_oscillators: int) -> ModelSpec:
    """Kuramoto system defined through the expression templates.

    Functionally identical to :func:`kuramoto_model`; useful for checking
    the expression evaluator against the native implementation.
    """
    n = int(n_oscillators)
    if n < 1:
        raise ModelDefinitionError("kuramoto model needs at least one oscillator")
    return model_from_dsl(
        name="kuramoto-dsl:%d" % n,
        nequat=n,
        nparams=2 * n + 1,
        nnoise=n,
        drift=KURAMOTO_DRIFT_TEMPLATE,
        diffusion=KURAMOTO_DIFFUSION_TEMPLATE,
    )


def sample_kuramoto_batch(n_oscillators: int, orbits: int,
                          omega_range: tuple[float, float],
                          noise_range: tuple[float, float],
                          coupling: float, seed: int) -> OrbitBatch:
    """Draw a reproducible batch of Kuramoto orbits.

    Per orbit: initial phases uniform on [-pi, pi), frequencies uniform on
    ``omega_range``, noise strengths uniform on ``noise_range``, coupling
    fixed.  Draws come from the counter-based sampling stream, so the same
    seed always yields the same batch.
    """
    n = int(n_oscillators)
    m = int(orbits)
    if n < 1:
        raise ValueError("need at least one oscillator")
    if m < 1:
        raise ValueError("need at least one orbit")
    for name, (lo, hi) in (("omega_range", omega_range), ("noise_range", noise_range)):
        if hi < lo:
            raise ValueError("%s is empty: %r" % (name, (lo, hi)))
    u = rng.sampling_uniforms(seed, np.arange(m, dtype=np.uint32), 3 * n)
    theta0 = -math.pi + 2.0 * math.pi * u[:, :n]
    omega = omega_range[0] + (omega_range[1] - omega_range[0]) * u[:, n:2 * n]
    strengths = noise_range[0] + (noise_range[1] - noise_range[0]) * u[:, 2 * n:]
    params = np.empty((m, 2 * n + 1), dtype=np.float64)
    params[:, 0] = coupling
    params[:, 1:n + 1] = omega
    params[:, n + 1:] = strengths
    return OrbitBatch(init=theta0, params=params)


def speed_protocol_batch(n_oscillators: int, orbits: int, seed: int) -> OrbitBatch:
    """Kuramoto batch with the benchmark-preset parameter distributions."""
    return sample_kuramoto_batch(n_oscillators, orbits,
                                 SPEED_OMEGA_RANGE, SPEED_NOISE_RANGE,
                                 SPEED_COUPLING, seed)


def accuracy_protocol_batch(n_oscillators: int, orbits: int, coupling: float,
                            seed: int) -> OrbitBatch:
    """Kuramoto batch with the transition-study parameter distributions."""
    return sample_kuramoto_batch(n_oscillators, orbits,
                                 ACCURACY_OMEGA_RANGE, ACCURACY_NOISE_RANGE,
                                 coupling, seed)


# ---------------------------------------------------------------------------
# Model construction from names, templates and files

def model_from_dsl(name: str, nequat: int, nparams: int, nnoise: int,
                   drift: str, diffusion: str) -> ModelSpec:
    """Build a model from drift/diffusion template text; validates both."""
    drift_ast = dsl.parse(drift)
    diffusion_ast = dsl.parse(diffusion)
    diagnostics = dsl.validate(drift_ast, nequat, nparams, nnoise, role="drift")
    diagnostics += dsl.validate(diffusion_ast, nequat, nparams, nnoise, role="diffusion")
    if diagnostics:
        raise ModelDefinitionError(
            "invalid model %r: %s" % (name, "; ".join(str(d) for d in diagnostics)))
    return ModelSpec(name=name, nequat=nequat, nparams=nparams, nnoise=nnoise,
                     drift=drift_ast, diffusion=diffusion_ast)


def model_from_file(path) -> ModelSpec:
    """Load a model from the text file format (see dsl.parse_model_text)."""
    contents = dsl.load_model_file(path)
    return model_from_dsl(contents.name, contents.nequat, contents.nparams,
                          contents.nnoise, contents.drift, contents.diffusion)


def model_from_name(spec: str) -> ModelSpec:
    """Resolve a built-in model name such as ``kuramoto:100``."""
    name, _, arg = spec.partition(":")
    if name != "kuramoto":
        raise ModelDefinitionError("unknown built-in model %r" % spec)
    if not arg:
        raise ModelDefinitionError("kuramoto needs a size, e.g. kuramoto:100")
    try:
        n = int(arg)
    except ValueError:
        raise ModelDefinitionError("bad kuramoto size %r" % arg)
    return kuramoto_model(n)
