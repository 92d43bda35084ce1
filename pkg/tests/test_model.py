import math

import numpy as np
import pytest

from sdebatch import model
from sdebatch.model import (ModelDefinitionError, OrbitBatch, diffusion_eval,
                            drift_eval, kuramoto_dsl_model, kuramoto_model,
                            model_from_dsl, model_from_file, model_from_name,
                            sample_kuramoto_batch)


def test_kuramoto_dimensions():
    m = kuramoto_model(5)
    assert (m.nequat, m.nnoise, m.nparams) == (5, 5, 11)
    assert kuramoto_model(100).nparams == 201
    with pytest.raises(ModelDefinitionError):
        kuramoto_model(0)


def test_kuramoto_drift_hand_example():
    m = kuramoto_model(2)
    y = np.array([0.0, math.pi / 2])
    p = np.array([1.0, 0.1, 0.2, 0.0, 0.0])
    np.testing.assert_allclose(drift_eval(m, 0.0, y, p), [0.6, -0.3], atol=1e-12)


def test_kuramoto_drift_equal_phases():
    m = kuramoto_model(4)
    omega = np.array([0.1, 0.2, 0.3, 0.4])
    p = np.concatenate([[0.7], omega, np.zeros(4)])
    y = np.full(4, 1.234)
    np.testing.assert_allclose(drift_eval(m, 0.0, y, p), omega, atol=1e-15)


def test_kuramoto_drift_zero_coupling():
    m = kuramoto_model(3)
    omega = np.array([0.5, -0.1, 0.9])
    p = np.concatenate([[0.0], omega, np.zeros(3)])
    y = np.array([0.3, 2.0, -1.0])
    assert np.array_equal(drift_eval(m, 0.0, y, p), omega)


def test_kuramoto_single_oscillator():
    m = kuramoto_model(1)
    p = np.array([5.0, 0.25, 0.0])
    assert drift_eval(m, 0.0, np.array([1.0]), p)[0] == 0.25


def test_kuramoto_drift_translation_invariance():
    m = kuramoto_model(10)
    rng = np.random.default_rng(0)
    y = rng.uniform(-math.pi, math.pi, 10)
    p = np.concatenate([[0.3], rng.uniform(0.2, 0.4, 10), np.zeros(10)])
    base = drift_eval(m, 0.0, y, p)
    for shift in (1.0, -7.25, 123.0):
        np.testing.assert_allclose(drift_eval(m, 0.0, y + shift, p), base, atol=1e-12)


def test_kuramoto_drift_sum_identity():
    # sum_i (f_i - omega_i) = 0 by antisymmetry of sin
    m = kuramoto_model(50)
    rng = np.random.default_rng(1)
    y = rng.uniform(-math.pi, math.pi, 50)
    omega = rng.uniform(0.2, 0.4, 50)
    p = np.concatenate([[0.9], omega, np.zeros(50)])
    assert abs(np.sum(drift_eval(m, 0.0, y, p) - omega)) < 1e-12


def test_kuramoto_diffusion():
    m = kuramoto_model(2)
    y = np.zeros(2)
    p = np.array([1.0, 0.1, 0.2, 0.001, 0.003])
    noise = np.array([1.0, -1.0])
    np.testing.assert_array_equal(diffusion_eval(m, 0.0, y, p, noise), [0.001, -0.003])
    assert np.array_equal(diffusion_eval(m, 0.0, y, p, np.zeros(2)), np.zeros(2))


def test_kuramoto_diffusion_linear_in_noise():
    m = kuramoto_model(6)
    rng = np.random.default_rng(2)
    y = rng.uniform(-3, 3, 6)
    p = np.concatenate([[0.5], rng.uniform(0.2, 0.4, 6), rng.uniform(0.01, 0.03, 6)])
    n1 = rng.standard_normal(6)
    n2 = rng.standard_normal(6)
    lhs = diffusion_eval(m, 0.0, y, p, n1 + n2)
    rhs = diffusion_eval(m, 0.0, y, p, n1) + diffusion_eval(m, 0.0, y, p, n2)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)
    np.testing.assert_allclose(diffusion_eval(m, 0.0, y, p, 3.0 * n1),
                               3.0 * diffusion_eval(m, 0.0, y, p, n1), atol=1e-12)


def test_ode_model_diffusion_is_zero():
    decay = model.ModelSpec(name="decay", nequat=1, nparams=1, nnoise=0,
                            drift=lambda t, y, p: -p[..., 0:1] * y)
    out = diffusion_eval(decay, 0.0, np.array([2.0]), np.array([1.0]), np.empty(0))
    assert np.array_equal(out, [0.0])


def test_batched_evaluation_matches_rows():
    m = kuramoto_model(4)
    rng = np.random.default_rng(3)
    y = rng.uniform(-math.pi, math.pi, (5, 4))
    p = np.column_stack([np.full(5, 0.4),
                         rng.uniform(0.2, 0.4, (5, 4)),
                         rng.uniform(0.01, 0.03, (5, 4))])
    noise = rng.standard_normal((5, 4))
    drift = drift_eval(m, 0.0, y, p)
    stoch = diffusion_eval(m, 0.0, y, p, noise)
    for row in range(5):
        assert np.array_equal(drift[row], drift_eval(m, 0.0, y[row], p[row]))
        assert np.array_equal(stoch[row], diffusion_eval(m, 0.0, y[row], p[row], noise[row]))


def test_dimension_mismatch_rejected():
    m = kuramoto_model(3)
    with pytest.raises(ValueError, match="nequat"):
        drift_eval(m, 0.0, np.zeros(2), np.zeros(7))
    with pytest.raises(ValueError, match="nparams"):
        drift_eval(m, 0.0, np.zeros(3), np.zeros(5))
    with pytest.raises(ValueError, match="nnoise"):
        diffusion_eval(m, 0.0, np.zeros(3), np.zeros(7), np.zeros(2))


def test_dsl_kuramoto_matches_native():
    native = kuramoto_model(8)
    viadsl = kuramoto_dsl_model(8)
    rng = np.random.default_rng(4)
    y = rng.uniform(-math.pi, math.pi, 8)
    p = np.concatenate([[0.3], rng.uniform(0.2, 0.4, 8), rng.uniform(0.01, 0.03, 8)])
    noise = rng.standard_normal(8)
    assert np.array_equal(drift_eval(native, 0.0, y, p), drift_eval(viadsl, 0.0, y, p))
    assert np.array_equal(diffusion_eval(native, 0.0, y, p, noise),
                          diffusion_eval(viadsl, 0.0, y, p, noise))


# ---------------------------------------------------------------------------
# batch sampling

def test_sample_batch_shapes_and_ranges():
    batch = sample_kuramoto_batch(10, 32, (0.2, 0.4), (0.01, 0.03), 0.2, seed=5)
    assert batch.init.shape == (32, 10)
    assert batch.params.shape == (32, 21)
    assert np.all(batch.init >= -math.pi) and np.all(batch.init < math.pi)
    assert np.all(batch.params[:, 0] == 0.2)
    omega = batch.params[:, 1:11]
    assert np.all(omega >= 0.2) and np.all(omega < 0.4)
    strengths = batch.params[:, 11:]
    assert np.all(strengths >= 0.01) and np.all(strengths < 0.03)


def test_sample_batch_deterministic():
    a = sample_kuramoto_batch(5, 16, (0.2, 0.4), (0.01, 0.03), 1.0, seed=42)
    b = sample_kuramoto_batch(5, 16, (0.2, 0.4), (0.01, 0.03), 1.0, seed=42)
    assert np.array_equal(a.init, b.init) and np.array_equal(a.params, b.params)
    c = sample_kuramoto_batch(5, 16, (0.2, 0.4), (0.01, 0.03), 1.0, seed=43)
    assert not np.array_equal(a.init, c.init)


def test_sample_batch_rejects_empty_range():
    with pytest.raises(ValueError, match="empty"):
        sample_kuramoto_batch(5, 4, (0.4, 0.2), (0.01, 0.03), 1.0, seed=0)
    with pytest.raises(ValueError):
        sample_kuramoto_batch(5, 0, (0.2, 0.4), (0.01, 0.03), 1.0, seed=0)


def test_protocol_presets():
    speed = model.speed_protocol_batch(5, 8, seed=1)
    assert np.all(speed.params[:, 0] == model.SPEED_COUPLING)
    omega = speed.params[:, 1:6]
    assert np.all(omega >= 0.01) and np.all(omega < 0.03)
    acc = model.accuracy_protocol_batch(5, 8, coupling=0.02, seed=1)
    assert np.all(acc.params[:, 0] == 0.02)
    strengths = acc.params[:, 6:]
    assert np.all(strengths >= 0.01) and np.all(strengths < 0.03)


def test_orbit_batch_validation():
    with pytest.raises(ValueError):
        OrbitBatch(init=np.zeros((2, 3)), params=np.zeros((3, 5)))
    batch = OrbitBatch(init=np.zeros((2, 3)), params=np.zeros((2, 7)))
    batch.check_against(kuramoto_model(3))
    with pytest.raises(ValueError):
        batch.check_against(kuramoto_model(4))


# ---------------------------------------------------------------------------
# construction helpers

def test_model_from_name():
    m = model_from_name("kuramoto:7")
    assert m.nequat == 7
    for bad in ("kuramoto", "kuramoto:", "kuramoto:x", "lorenz:3"):
        with pytest.raises(ModelDefinitionError):
            model_from_name(bad)


def test_model_from_dsl_validates():
    with pytest.raises(ModelDefinitionError, match="drift"):
        model_from_dsl("bad", nequat=2, nparams=1, nnoise=2,
                       drift="n[0]", diffusion="n[i]")
    with pytest.raises(ModelDefinitionError, match="out of range"):
        model_from_dsl("bad", nequat=2, nparams=1, nnoise=0,
                       drift="y[5]", diffusion="0")


def test_model_from_file(tmp_path):
    path = tmp_path / "ou.model"
    path.write_text(
        "# mean-reverting linear system\n"
        "nequat=1\nnparams=2\nnnoise=1\n"
        "drift: 0 - p[0]*y[0]\n"
        "diffusion: p[1]*n[0]\n",
        encoding="utf-8")
    m = model_from_file(path)
    assert m.name == "ou"
    assert (m.nequat, m.nparams, m.nnoise) == (1, 2, 1)
    out = drift_eval(m, 0.0, np.array([2.0]), np.array([3.0, 0.1]))
    assert out[0] == -6.0
