"""Single-step integrators.

Euler-Maruyama advances an SDE state by one fixed step

    y' = y + f(t, y, p) dt + sqrt(dt) * stoch(t, y, p, noise)

where ``stoch`` is the model's combined stochastic increment (noise already
folded in).  For deterministic systems the explicit Euler and classical
fourth-order Runge-Kutta steps are available, plus implicit Euler and
implicit midpoint solved by fixed-point iteration (the iteration map is
contracting only while dt times the drift's Lipschitz constant stays below
one; there is no Newton fallback).

All steppers accept states with leading batch dimensions and step every
orbit in one vectorised call; each row's result is exactly what a
single-orbit call would produce.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelSpec, drift_eval, diffusion_eval

__all__ = [
    "StepResult", "ConvergenceError", "SolverInfo", "SOLVERS", "get_solver",
    "euler_maruyama_step", "euler_step", "rk4_step",
    "implicit_euler_step", "implicit_midpoint_step",
]

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 50


class ConvergenceError(RuntimeError):
    """Fixed-point iteration of an implicit step failed to converge."""

    def __init__(self, message: str, t: float, iterations: int):
        super().__init__(message)
        self.t = t
        self.iterations = iterations


@dataclass(frozen=True)
class StepResult:
    """State after one implicit step plus iteration diagnostics.

    ``converged`` flags each batch row; rows that exhausted max_iter keep
    their last iterate and are marked False.
    """

    y: np.ndarray
    iterations: int
    converged: np.ndarray


def _as_state(y) -> np.ndarray:
    return np.asarray(y, dtype=np.float64)


def euler_maruyama_step(model: ModelSpec, t: float, y, p, dt: float,
                        noise) -> np.ndarray:
    """One Euler-Maruyama step; with zero noise count this is exactly the
    deterministic Euler step."""
    y = _as_state(y)
    if model.nnoise == 0:
        return euler_step(model, t, y, p, dt)
    return (y + drift_eval(model, t, y, p, strict=False) * dt
            + np.sqrt(dt) * diffusion_eval(model, t, y, p, noise, strict=False))


def euler_step(model: ModelSpec, t: float, y, p, dt: float) -> np.ndarray:
    """One explicit Euler step."""
    y = _as_state(y)
    return y + drift_eval(model, t, y, p, strict=False) * dt


def rk4_step(model: ModelSpec, t: float, y, p, dt: float) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step."""
    y = _as_state(y)
    half = 0.5 * dt
    k1 = drift_eval(model, t, y, p, strict=False)
    k2 = drift_eval(model, t + half, y + half * k1, p, strict=False)
    k3 = drift_eval(model, t + half, y + half * k2, p, strict=False)
    k4 = drift_eval(model, t + dt, y + dt * k3, p, strict=False)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _fixed_point(model, t_eval, y, p, dt, tol, max_iter, midpoint, raise_on_failure):
    """Solve y' = y + dt * f(t_eval, g(y')) by fixed-point iteration from y.

    Each batch row iterates until its own max-norm update drops below tol
    and is then frozen, so results do not depend on how rows are grouped.
    """
    y = _as_state(y)
    batch_shape = y.shape[:-1]
    y_next = y.copy()
    active = np.ones(batch_shape, dtype=bool)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        stage = 0.5 * (y + y_next) if midpoint else y_next
        candidate = y + dt * drift_eval(model, t_eval, stage, p, strict=False)
        delta = np.max(np.abs(candidate - y_next), axis=-1)
        y_next = np.where(active[..., None], candidate, y_next)
        with np.errstate(invalid="ignore"):
            active = active & ~(delta < tol)
        if not active.any():
            break
    converged = ~active
    if raise_on_failure and active.any():
        raise ConvergenceError(
            "implicit step did not converge within %d iterations at t=%g "
            "(dt may be too large for fixed-point iteration)" % (max_iter, t_eval),
            t=t_eval, iterations=iterations)
    return StepResult(y=y_next, iterations=iterations, converged=converged)


def implicit_euler_step(model: ModelSpec, t: float, y, p, dt: float,
                        tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                        raise_on_failure: bool = True) -> StepResult:
    """One implicit (backward) Euler step: solves y' = y + dt f(t+dt, y')."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    return _fixed_point(model, t + dt, y, p, dt, tol, max_iter,
                        midpoint=False, raise_on_failure=raise_on_failure)


def implicit_midpoint_step(model: ModelSpec, t: float, y, p, dt: float,
                           tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                           raise_on_failure: bool = True) -> StepResult:
    """One implicit midpoint step: solves y' = y + dt f(t+dt/2, (y+y')/2)."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    return _fixed_point(model, t + 0.5 * dt, y, p, dt, tol, max_iter,
                        midpoint=True, raise_on_failure=raise_on_failure)


@dataclass(frozen=True)
class SolverInfo:
    name: str
    stochastic: bool
    implicit: bool


SOLVERS = {
    "em": SolverInfo("em", stochastic=True, implicit=False),
    "euler": SolverInfo("euler", stochastic=False, implicit=False),
    "rk4": SolverInfo("rk4", stochastic=False, implicit=False),
    "ie": SolverInfo("ie", stochastic=False, implicit=True),
    "im": SolverInfo("im", stochastic=False, implicit=True),
}


def get_solver(name: str) -> SolverInfo:
    try:
        return SOLVERS[name]
    except KeyError:
        raise ValueError("unknown solver %r (choose from %s)"
                         % (name, ", ".join(sorted(SOLVERS))))
