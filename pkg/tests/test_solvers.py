import math

import numpy as np
import pytest

from sdebatch import solvers
from sdebatch.model import ModelSpec
from sdebatch.solvers import (ConvergenceError, euler_maruyama_step, euler_step,
                              get_solver, implicit_euler_step,
                              implicit_midpoint_step, rk4_step)


def scalar_model(drift, diffusion=None, nnoise=0, nparams=1):
    return ModelSpec(name="test", nequat=1, nparams=nparams, nnoise=nnoise,
                     drift=drift, diffusion=diffusion)


DECAY = scalar_model(lambda t, y, p: -y)                    # dy/dt = -y
STIFF = scalar_model(lambda t, y, p: -100.0 * y)            # dy/dt = -100 y
TIMEDRIFT = scalar_model(lambda t, y, p: np.full_like(y, t))


def one(value=1.0):
    return np.array([value])


P = np.array([0.0])


# ---------------------------------------------------------------------------
# explicit steps

def test_euler_examples():
    zero = scalar_model(lambda t, y, p: np.zeros_like(y))
    assert euler_step(zero, 0.0, one(), P, 0.1)[0] == 1.0
    assert abs(euler_step(DECAY, 0.0, one(), P, 0.1)[0] - 0.9) < 1e-15
    assert abs(euler_step(TIMEDRIFT, 1.0, one(0.0), P, 0.5)[0] - 0.5) < 1e-15


def test_euler_maruyama_hand_example():
    # y + f dt + sqrt(dt) * (g * N) with f=-y, g=0.5, N=1, dt=0.04
    gbm_like = scalar_model(lambda t, y, p: -y,
                            diffusion=lambda t, y, p, n: 0.5 * n, nnoise=1)
    out = euler_maruyama_step(gbm_like, 0.0, one(), P, 0.04, noise=one(1.0))
    assert abs(out[0] - 1.06) < 1e-12


def test_euler_maruyama_zero_noise_count_is_euler_bitwise():
    out_em = euler_maruyama_step(DECAY, 0.0, one(), P, 0.1, noise=np.empty(0))
    out_euler = euler_step(DECAY, 0.0, one(), P, 0.1)
    assert np.array_equal(out_em, out_euler)


def test_euler_maruyama_zero_noise_values_match_euler():
    noisy = scalar_model(lambda t, y, p: -y,
                         diffusion=lambda t, y, p, n: 0.5 * n, nnoise=1)
    out_em = euler_maruyama_step(noisy, 0.0, one(), P, 0.1, noise=one(0.0))
    out_euler = euler_step(DECAY, 0.0, one(), P, 0.1)
    np.testing.assert_array_equal(out_em, out_euler)


def test_rk4_decay_by_hand():
    # truncated Taylor series of exp(-0.1)
    out = rk4_step(DECAY, 0.0, one(), P, 0.1)
    assert abs(out[0] - 0.9048375) < 1e-12
    zero = scalar_model(lambda t, y, p: np.zeros_like(y))
    assert rk4_step(zero, 0.0, one(2.5), P, 0.1)[0] == 2.5


def test_rk4_one_step_error_is_fifth_order():
    for h in (0.1, 0.05):
        out = rk4_step(DECAY, 0.0, one(), P, h)
        local_error = abs(out[0] - math.exp(-h))
        assert local_error < h ** 5 / 60.0


# ---------------------------------------------------------------------------
# implicit steps

def test_implicit_euler_linear_closed_form():
    result = implicit_euler_step(DECAY, 0.0, one(), P, 0.1)
    assert abs(result.y[0] - 1.0 / 1.1) < 1e-10
    assert result.converged.all()
    assert result.iterations >= 1


def test_implicit_euler_identity_for_zero_drift():
    zero = scalar_model(lambda t, y, p: np.zeros_like(y))
    result = implicit_euler_step(zero, 0.0, one(3.0), P, 0.1)
    assert result.y[0] == 3.0
    assert result.iterations == 1


def test_implicit_euler_divergence_raises():
    # contraction factor dt*L = 10: the fixed-point map diverges
    with pytest.raises(ConvergenceError):
        implicit_euler_step(STIFF, 0.0, one(), P, 0.1)


def test_implicit_euler_failure_mask_mode():
    result = implicit_euler_step(STIFF, 0.0, one(), P, 0.1, raise_on_failure=False)
    assert not result.converged.all()


def test_implicit_midpoint_linear_closed_form():
    result = implicit_midpoint_step(DECAY, 0.0, one(), P, 0.1)
    assert abs(result.y[0] - 0.95 / 1.05) < 1e-10


def test_implicit_midpoint_preserves_harmonic_energy():
    def spin(t, y, p):
        return np.stack([y[..., 1], -y[..., 0]], axis=-1)

    oscillator = ModelSpec(name="spin", nequat=2, nparams=1, nnoise=0, drift=spin)
    y = np.array([1.0, 0.0])
    for _ in range(50):
        y = implicit_midpoint_step(oscillator, 0.0, y, P, 0.1,
                                   tol=1e-14, max_iter=200).y
    assert abs(y[0] ** 2 + y[1] ** 2 - 1.0) < 1e-12


def test_implicit_batch_rows_match_single_and_isolate_failure():
    # row 0 contracts, row 1 diverges; row 0 must come out exactly as if alone
    bank = ModelSpec(name="bank", nequat=1, nparams=1, nnoise=0,
                     drift=lambda t, y, p: -p[..., 0:1] * y)
    y = np.array([[1.0], [1.0]])
    p = np.array([[1.0], [100.0]])
    result = implicit_euler_step(bank, 0.0, y, p, 0.1, raise_on_failure=False)
    assert list(result.converged) == [True, False]
    single = implicit_euler_step(bank, 0.0, one(), np.array([1.0]), 0.1)
    assert result.y[0, 0] == single.y[0]


def test_implicit_rejects_bad_tolerance():
    with pytest.raises(ValueError):
        implicit_euler_step(DECAY, 0.0, one(), P, 0.1, tol=0.0)


# ---------------------------------------------------------------------------
# convergence orders on dy/dt = -y (global error at t=1)

def _global_error(stepper, dt):
    steps = round(1.0 / dt)
    y = one()
    t = 0.0
    for k in range(steps):
        out = stepper(t, y, dt)
        y = out.y if isinstance(out, solvers.StepResult) else out
        t = (k + 1) * dt
    return abs(y[0] - math.exp(-1.0))


@pytest.mark.parametrize("stepper,expected_order", [
    (lambda t, y, dt: euler_step(DECAY, t, y, P, dt), 1.0),
    (lambda t, y, dt: implicit_euler_step(DECAY, t, y, P, dt, tol=1e-14, max_iter=200), 1.0),
    (lambda t, y, dt: implicit_midpoint_step(DECAY, t, y, P, dt, tol=1e-14, max_iter=200), 2.0),
    (lambda t, y, dt: rk4_step(DECAY, t, y, P, dt), 4.0),
])
def test_ode_convergence_orders(stepper, expected_order):
    dts = [0.1 * 2.0 ** -k for k in range(5)]
    errors = [_global_error(stepper, dt) for dt in dts]
    slope = np.polyfit(np.log(dts), np.log(errors), 1)[0]
    assert abs(slope - expected_order) < 0.2


# ---------------------------------------------------------------------------
# registry

def test_solver_registry():
    assert get_solver("em").stochastic
    assert not get_solver("rk4").stochastic
    assert get_solver("ie").implicit and get_solver("im").implicit
    with pytest.raises(ValueError, match="unknown solver"):
        get_solver("milstein")
