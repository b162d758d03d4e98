# test_langevin.py

import logging
import numpy as np
import pytest

import sampling.langevin as langevin
from distortion import DistortionKind
from energy import EnergyNet, MlpConfig, ParamVector, QuadraticEnergy
from energy.base import EnergyFunction
from errors import LangevinDivergenceError, NonFiniteInputError
from sampling import LangevinConfig, langevin_step, sample_conditional, sample_marginal
from sources import SampleBatch, ScalarGaussian, make_ring_gmm, sample

logger = logging.getLogger(__name__)


class RepulsiveEnergy(EnergyFunction):
    """E(y) = -|y|^2, whose Langevin chains run off to infinity."""

    def __init__(self, input_dim=1):
        self.input_dim = input_dim

    def energy_batch(self, ys):
        return -(ys * ys).sum(axis=1)

    def grad_input_batch(self, ys):
        return -2.0 * ys


def _zero_net(d):
    cfg = MlpConfig(input_dim=d, hidden_widths=(4,))
    return EnergyNet(cfg, ParamVector.zeros(cfg))


def test_langevin_step_examples():
    y = np.array([0.3, -1.2])
    np.testing.assert_array_equal(langevin_step(np.zeros(2), y, 0.5, np.zeros(2)), y)
    out = langevin_step(np.array([2.0]), np.array([1.0]), 0.1, np.array([0.5]))
    assert out[0] == pytest.approx(1.04, abs=1e-15)


def test_langevin_step_rejects_non_finite():
    with pytest.raises(NonFiniteInputError):
        langevin_step(np.array([np.nan]), np.array([0.0]), 0.1, np.array([0.0]))
    with pytest.raises(NonFiniteInputError):
        langevin_step(np.array([0.0]), np.array([np.inf]), 0.1, np.array([0.0]))


def test_config_validation():
    with pytest.raises(ValueError):
        LangevinConfig(steps=0)
    with pytest.raises(ValueError):
        LangevinConfig(step_size=0.0)
    with pytest.raises(ValueError):
        LangevinConfig(step_size=float("inf"))


def test_chains_are_reproducible():
    net = EnergyNet(MlpConfig(input_dim=2, hidden_widths=(8, 8), param_seed=3))
    cfg = LangevinConfig(steps=30, step_size=0.1)
    a = sample_marginal(net, cfg, 64, seed=17)
    b = sample_marginal(net, cfg, 64, seed=17)
    assert a.points.tobytes() == b.points.tobytes()
    assert not np.array_equal(a.points, sample_marginal(net, cfg, 64, seed=18).points)


def test_chain_streams_do_not_depend_on_batching(monkeypatch):
    net = EnergyNet(MlpConfig(input_dim=2, hidden_widths=(8,), param_seed=5))
    cfg = LangevinConfig(steps=25, step_size=0.2)
    reference = sample_marginal(net, cfg, 6, seed=4).points
    assert np.array_equal(sample_marginal(net, cfg, 3, seed=4).points, reference[:3])
    monkeypatch.setattr(langevin, "NOISE_BLOCK_FLOATS", 16)
    assert np.array_equal(sample_marginal(net, cfg, 6, seed=4).points, reference)


def test_quadratic_energy_stationary_variance():
    eps = 0.1
    cfg = LangevinConfig(steps=5000, step_size=eps)
    ys = sample_marginal(QuadraticEnergy(input_dim=4), cfg, 20_000, seed=2024).points
    expected = 1.0 / (1.0 - eps * eps / 4.0)
    pooled = float(np.mean(ys ** 2))
    logger.info(f"stationary variance {pooled:.5f}, expected {expected:.5f}")
    assert abs(pooled - expected) <= 0.02
    assert abs(pooled - expected) <= 0.02 * expected


def test_tiny_step_returns_initial_noise():
    net = EnergyNet(MlpConfig(input_dim=3, hidden_widths=(8,), param_seed=1))
    cfg = LangevinConfig(steps=1, step_size=1e-8)
    out = sample_marginal(net, cfg, 50, seed=8).points
    initial = langevin.ChainNoise(8, 50, 3).initial()
    assert np.max(np.abs(out - initial)) <= 1e-6


def test_zero_network_is_a_random_walk():
    steps, eps = 100, 0.1
    ys = sample_marginal(_zero_net(1), LangevinConfig(steps=steps, step_size=eps), 20_000, seed=5).points
    assert abs(ys.var() - (1.0 + steps * eps * eps)) <= 0.1


def test_beta_zero_conditional_equals_marginal():
    net = EnergyNet(MlpConfig(input_dim=2, hidden_widths=(8, 8), param_seed=9))
    cfg = LangevinConfig(steps=40, step_size=0.05)
    xs = sample(make_ring_gmm(), 100, seed=1)
    cond = sample_conditional(net, xs, 0.0, DistortionKind.SquaredL2, cfg, seed=77)
    marg = sample_marginal(net, cfg, 100, seed=77)
    assert cond.points.tobytes() == marg.points.tobytes()


def test_large_beta_conditional_concentrates_on_x():
    beta, eps = 50.0, 0.05
    cfg = LangevinConfig(steps=2000, step_size=eps)
    xs = SampleBatch(points=np.random.default_rng(0).normal(size=(10_000, 2)))
    ys = sample_conditional(_zero_net(2), xs, beta, DistortionKind.SquaredL2, cfg, seed=3).points
    dev = ys - xs.points
    target = 1.0 / (2.0 * beta)
    assert np.all(np.abs(dev.var(axis=0) - target) <= 0.3 * target)
    assert np.all(np.abs(dev.mean(axis=0)) <= 0.005)


def test_divergence_is_reported_with_step():
    cfg = LangevinConfig(steps=200, step_size=1.0)
    with pytest.raises(LangevinDivergenceError) as info:
        sample_marginal(RepulsiveEnergy(), cfg, 10, seed=0)
    assert 1 <= info.value.step <= 200
    assert info.value.phase == "marginal"
    assert "step" in str(info.value)


def test_init_points_override():
    cfg = LangevinConfig(steps=1, step_size=1e-8)
    start = np.full((5, 1), 3.0)
    out = sample_marginal(QuadraticEnergy(), cfg, 5, seed=0, init_points=start).points
    np.testing.assert_allclose(out, start, atol=1e-6)


def test_conditional_dimension_mismatch():
    net = EnergyNet(MlpConfig(input_dim=2, hidden_widths=(4,)))
    with pytest.raises(ValueError):
        sample_conditional(net, sample(ScalarGaussian(), 5, seed=0), 1.0, DistortionKind.L1, LangevinConfig(), seed=0)
