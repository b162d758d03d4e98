# test_trainer.py

import logging
import numpy as np
import pytest
from dataclasses import replace

import pipeline.train_pipeline as train_pipeline
from distortion import DistortionKind
from energy import EnergyNet, MlpConfig, ParamVector
from errors import DimensionMismatchError, NonFiniteGradientError
from estimation import grid_boltzmann_sample, quadrature_grid, quadrature_loss, quadrature_loss_gradient
from pipeline.optimizers import Adam, OptimizerKind, Sgd, clip_grad_norm, make_optimizer
from pipeline.train_pipeline import HISTORY_COLUMNS, TrainConfig, estimate_grad, train, train_step
from sampling import LangevinConfig, sample_conditional, sample_marginal
from sources import SampleBatch, ScalarGaussian, make_vector_gaussian, sample
from utils import child_int_seed

logger = logging.getLogger(__name__)

FAST_CHAINS = LangevinConfig(steps=5, step_size=0.1)


def _linear_net(w, b) -> EnergyNet:
    cfg = MlpConfig(input_dim=len(w), hidden_widths=())
    return EnergyNet(cfg, ParamVector.pack(cfg, [(np.array([w], dtype=float), np.array([b], dtype=float))]))


def _tiny_cfg(**kwargs) -> TrainConfig:
    base = dict(beta=1.0, batch_size=16, iterations=3, learning_rate=1e-2, langevin=FAST_CHAINS, seed=5,
                early_stop=False)
    base.update(kwargs)
    return TrainConfig(**base)


def test_identical_batches_give_zero_gradient():
    net = EnergyNet(MlpConfig(input_dim=2, hidden_widths=(8, 8), param_seed=1))
    ys = SampleBatch(points=np.random.default_rng(0).normal(size=(32, 2)))
    xs = SampleBatch(points=np.zeros((32, 2)))
    assert np.all(estimate_grad(net, xs, ys, ys).values == 0.0)


def test_linear_net_gradient_is_difference_of_means():
    net = _linear_net([0.5, -1.0], 0.2)
    rng = np.random.default_rng(1)
    y_cond = SampleBatch(points=rng.normal(size=(40, 2)))
    y_marg = SampleBatch(points=rng.normal(loc=1.0, size=(40, 2)))
    xs = SampleBatch(points=np.zeros((40, 2)))
    g = estimate_grad(net, xs, y_cond, y_marg).values
    np.testing.assert_allclose(g[:2], y_cond.points.mean(axis=0) - y_marg.points.mean(axis=0), rtol=1e-12, atol=1e-14)
    assert abs(g[2]) <= 1e-15


def test_estimate_grad_size_mismatch():
    net = _linear_net([1.0], 0.0)
    with pytest.raises(ValueError):
        estimate_grad(net, SampleBatch(points=np.zeros((3, 1))), SampleBatch(points=np.zeros((3, 1))),
                      SampleBatch(points=np.zeros((2, 1))))


def test_quadrature_gradient_matches_finite_differences():
    source = ScalarGaussian()
    grid = quadrature_grid(source, -8.0, 8.0, 401)
    cfg = MlpConfig(input_dim=1, hidden_widths=(6,), param_seed=3)
    net = EnergyNet(cfg)
    exact = quadrature_loss_gradient(net, grid, 1.0, DistortionKind.SquaredL2).values
    base = net.params.values
    h = 1e-6
    fd = np.zeros_like(base)
    for k in range(base.shape[0]):
        plus, minus = base.copy(), base.copy()
        plus[k] += h
        minus[k] -= h
        fd[k] = (quadrature_loss(net.with_params(ParamVector(cfg, plus)), grid, 1.0, DistortionKind.SquaredL2)
                 - quadrature_loss(net.with_params(ParamVector(cfg, minus)), grid, 1.0, DistortionKind.SquaredL2)) / (2 * h)
    assert np.linalg.norm(exact - fd) <= 1e-5 * max(np.linalg.norm(fd), 1e-8)


def test_gradient_estimator_is_unbiased_under_exact_sampling():
    source = ScalarGaussian()
    grid = quadrature_grid(source, -8.0, 8.0, 401)
    net = EnergyNet(MlpConfig(input_dim=1, hidden_widths=(6,), param_seed=11))
    beta = 1.0
    exact = quadrature_loss_gradient(net, grid, beta, DistortionKind.SquaredL2).values

    repeats, n = 50, 400
    draws = []
    for r in range(repeats):
        xs, y_cond, y_marg = grid_boltzmann_sample(net, grid, beta, DistortionKind.SquaredL2, n, seed=1000 + r)
        draws.append(estimate_grad(net, xs, y_cond, y_marg).values)
    draws = np.asarray(draws)

    se = draws.std(axis=0, ddof=1) / np.sqrt(repeats)
    # per coordinate: at least the Bonferroni split of 3 se over 19 coordinates (about 4.2 se,
    # t with 49 dof); the projected check below uses 3 se as is
    assert len(exact) == 19
    assert np.all(np.abs(draws.mean(axis=0) - exact) <= 4.5 * se + 1e-9)

    direction = exact / np.linalg.norm(exact)
    proj = draws @ direction
    proj_se = proj.std(ddof=1) / np.sqrt(repeats)
    logger.info(f"projected estimate {proj.mean():.5f} vs exact {np.linalg.norm(exact):.5f} (se {proj_se:.5f})")
    assert abs(proj.mean() - np.linalg.norm(exact)) <= 3.0 * proj_se


def test_zero_learning_rate_keeps_parameters():
    cfg = MlpConfig(input_dim=1, hidden_widths=(4,), param_seed=2)
    for kind in OptimizerKind:
        run = train(ScalarGaussian(), cfg, _tiny_cfg(learning_rate=0.0, optimizer=kind))
        assert run.final_params.values.tobytes() == EnergyNet(cfg).params.values.tobytes()
        assert len(run.history) == 3


def test_sgd_step_matches_hand_computation():
    net = _linear_net([0.3, -0.7], 0.1)
    source = make_vector_gaussian(2)
    cfg = _tiny_cfg(optimizer="sgd", learning_rate=0.05, batch_size=8)
    iter_seed = 77
    params, record = train_step(net, source, cfg, iter_seed)

    xs = sample(source, 8, child_int_seed(iter_seed, 0))
    y_cond = sample_conditional(net, xs, cfg.beta, cfg.distortion, cfg.langevin, child_int_seed(iter_seed, 1))
    y_marg = sample_marginal(net, cfg.langevin, 8, child_int_seed(iter_seed, 2))
    mean_diff = y_cond.points.mean(axis=0) - y_marg.points.mean(axis=0)
    expected = np.array([0.3, -0.7, 0.1]) - 0.05 * np.append(mean_diff, 0.0)
    np.testing.assert_allclose(params.values, expected, rtol=1e-12, atol=1e-14)
    assert record.grad_norm == pytest.approx(np.linalg.norm(mean_diff), rel=1e-12)
    assert record.minus_energy_gap == pytest.approx(
        float(np.mean(y_cond.points @ [0.3, -0.7]) - np.mean(y_marg.points @ [0.3, -0.7])), rel=1e-10, abs=1e-12)


def test_train_step_does_not_mutate_network():
    net = EnergyNet(MlpConfig(input_dim=1, hidden_widths=(4,), param_seed=6))
    before = net.params.values.copy()
    train_step(net, ScalarGaussian(), _tiny_cfg(), iter_seed=1)
    np.testing.assert_array_equal(net.params.values, before)


def test_training_is_deterministic():
    cfg = MlpConfig(input_dim=1, hidden_widths=(8,), param_seed=4)
    a = train(ScalarGaussian(), cfg, _tiny_cfg(iterations=5))
    b = train(ScalarGaussian(), cfg, _tiny_cfg(iterations=5))
    assert a.final_params.values.tobytes() == b.final_params.values.tobytes()
    assert a.history_frame().equals(b.history_frame())
    c = train(ScalarGaussian(), cfg, _tiny_cfg(iterations=5, seed=6))
    assert not np.array_equal(a.final_params.values, c.final_params.values)


def test_zero_iterations_returns_initial_parameters():
    cfg = MlpConfig(input_dim=1, hidden_widths=(4,), param_seed=8)
    init = EnergyNet(cfg).params
    run = train(ScalarGaussian(), cfg, _tiny_cfg(iterations=0), init_params=init)
    np.testing.assert_array_equal(run.final_params.values, init.values)
    assert run.history == []
    assert list(run.history_frame().columns) == HISTORY_COLUMNS


def test_history_frame_timing_column():
    run = train(ScalarGaussian(), MlpConfig(input_dim=1, hidden_widths=(4,)), _tiny_cfg(iterations=2))
    assert (run.history_frame()["wallclock_ms"] == 0.0).all()
    assert (run.history_frame(record_timing=True)["wallclock_ms"] > 0.0).all()
    assert list(run.history_frame()["iteration"]) == [0, 1]


def test_early_stop_on_flat_energy_gap():
    cfg = MlpConfig(input_dim=1, hidden_widths=(4,))
    zeros = ParamVector.zeros(cfg)
    tcfg = _tiny_cfg(iterations=40, learning_rate=0.0, early_stop=True, stop_patience=5, stop_tolerance=1e-3)
    run = train(ScalarGaussian(), cfg, tcfg, init_params=zeros)
    assert run.stopped_early
    assert len(run.history) == 5
    full = train(ScalarGaussian(), cfg, replace(tcfg, early_stop=False, iterations=8), init_params=zeros)
    assert not full.stopped_early
    assert len(full.history) == 8


def test_train_rejects_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        train(ScalarGaussian(), MlpConfig(input_dim=2, hidden_widths=(4,)), _tiny_cfg())


def test_non_finite_gradient_is_reported(monkeypatch):
    net = EnergyNet(MlpConfig(input_dim=1, hidden_widths=(4,)))

    def broken(net, xs, y_cond, y_marg):
        return ParamVector(net.config, np.full(net.config.param_count, np.nan)), 0.0, 0.0

    monkeypatch.setattr(train_pipeline, "_estimate_grad_with_energies", broken)
    with pytest.raises(NonFiniteGradientError) as info:
        train_step(net, ScalarGaussian(), _tiny_cfg(), iter_seed=0, iteration=7)
    assert info.value.iteration == 7


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(beta=0.0)
    with pytest.raises(ValueError):
        TrainConfig(iterations=-1)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-1e-3)
    with pytest.raises(ValueError):
        TrainConfig(optimizer="rmsprop")
    assert TrainConfig(optimizer="SGD").optimizer is OptimizerKind.Sgd
    assert TrainConfig(distortion="l1").distortion is DistortionKind.L1


def test_adam_first_step_has_learning_rate_magnitude():
    cfg = MlpConfig(input_dim=2, hidden_widths=())
    params = ParamVector.zeros(cfg)
    grad = ParamVector(cfg, np.array([3.0, -2.0, 1e-3]))
    out = Adam(0.01).step(params, grad)
    np.testing.assert_allclose(out.values, [-0.01, 0.01, -0.01 * 1e-3 / (1e-3 + 1e-8)], rtol=1e-7)
    assert np.all(params.values == 0.0)


def test_sgd_and_factory():
    cfg = MlpConfig(input_dim=2, hidden_widths=())
    out = Sgd(0.5).step(ParamVector(cfg, np.array([1.0, 1.0, 1.0])), ParamVector(cfg, np.array([2.0, 0.0, -2.0])))
    np.testing.assert_array_equal(out.values, [0.0, 1.0, 2.0])
    assert isinstance(make_optimizer("sgd", 0.1), Sgd)
    assert isinstance(make_optimizer(OptimizerKind.Adam, 0.1), Adam)
    with pytest.raises(ValueError):
        Sgd(-1.0)


def test_clip_grad_norm():
    cfg = MlpConfig(input_dim=1, hidden_widths=())
    g = ParamVector(cfg, np.array([3.0, 4.0]))
    assert clip_grad_norm(g, None) is g
    assert clip_grad_norm(g, 10.0) is g
    np.testing.assert_allclose(clip_grad_norm(g, 1.0).values, [0.6, 0.8], rtol=1e-15)
