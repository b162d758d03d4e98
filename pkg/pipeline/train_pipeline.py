# pipeline/train_pipeline.py

import logging
import time
import numpy as np
import pandas as pd
from dataclasses import dataclass, field
from typing import List, Optional, Tuple
from tqdm import tqdm

from distortion import DistortionKind
from energy.mlp import EnergyNet, MlpConfig, ParamVector
from errors import DimensionMismatchError, NonFiniteGradientError
from sampling.langevin import LangevinConfig, sample_conditional, sample_marginal
from sources.specs import SampleBatch, SourceSpec, sample
from utils import child_int_seed
from .optimizers import Optimizer, OptimizerKind, clip_grad_norm, make_optimizer

# Match the logger name with what's configured in the CLI
logger = logging.getLogger('pipeline.train_pipeline')

HISTORY_COLUMNS = ["iteration", "grad_norm", "minus_energy_gap", "wallclock_ms"]


@dataclass(frozen=True)
class TrainConfig:
    """
    Hyper-parameters of one training run at a fixed beta.

    Attributes
    ----------
    beta : float
        Lagrange multiplier, > 0.
    batch_size : int
        N, the size of the source batch and of both sample batches.
    iterations : int
        Iteration budget; 0 returns the initial parameters.
    learning_rate : float
        Step size eta; 0 leaves the parameters unchanged.
    optimizer : OptimizerKind
        Adam (default) or plain Sgd.
    langevin : LangevinConfig
        K and epsilon shared by the conditional and marginal chains.
    seed : int
        Parent seed; iteration t uses child seeds of (seed, t).
    distortion : DistortionKind
        rho of the problem.
    clip_norm : float, optional
        Gradient-norm clipping threshold, off when None.
    early_stop : bool
        Stop once |minus_energy_gap| < stop_tolerance for stop_patience
        consecutive iterations.
    """
    beta: float = 1.0
    batch_size: int = 256
    iterations: int = 2000
    learning_rate: float = 1e-3
    optimizer: OptimizerKind = OptimizerKind.Adam
    langevin: LangevinConfig = field(default_factory=LangevinConfig)
    seed: int = 0
    distortion: DistortionKind = DistortionKind.SquaredL2
    clip_norm: Optional[float] = None
    early_stop: bool = True
    stop_tolerance: float = 0.01
    stop_patience: int = 50
    log_every: int = 100
    progress: bool = False

    def __post_init__(self):
        object.__setattr__(self, "optimizer", OptimizerKind.from_name(self.optimizer))
        object.__setattr__(self, "distortion", DistortionKind.from_name(self.distortion))
        if not (self.beta > 0 and np.isfinite(self.beta)):
            raise ValueError(f"beta must be finite and > 0, got {self.beta}")
        if int(self.batch_size) < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if int(self.iterations) < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")
        if not (self.learning_rate >= 0 and np.isfinite(self.learning_rate)):
            raise ValueError(f"learning_rate must be finite and >= 0, got {self.learning_rate}")
        if self.clip_norm is not None and not self.clip_norm > 0:
            raise ValueError(f"clip_norm must be > 0 when set, got {self.clip_norm}")
        if self.stop_patience < 1 or not self.stop_tolerance > 0:
            raise ValueError("stop_patience must be >= 1 and stop_tolerance > 0")


@dataclass
class TrainRecord:
    iteration: int
    grad_norm: float
    minus_energy_gap: float
    wallclock_ms: float
    cond_energy: float
    marg_energy: float


@dataclass
class TrainRun:
    """Trained parameters plus one TrainRecord per iteration actually run."""
    net_config: MlpConfig
    final_params: ParamVector
    history: List[TrainRecord] = field(default_factory=list)
    stopped_early: bool = False

    @property
    def net(self) -> EnergyNet:
        return EnergyNet(self.net_config, self.final_params)

    def history_frame(self, record_timing: bool = False) -> pd.DataFrame:
        """
        history.csv table. ``wallclock_ms`` is 0 unless record_timing, so
        equal seeds produce identical files.
        """
        rows = [{
            "iteration": r.iteration,
            "grad_norm": r.grad_norm,
            "minus_energy_gap": r.minus_energy_gap,
            "wallclock_ms": r.wallclock_ms if record_timing else 0.0,
        } for r in self.history]
        return pd.DataFrame(rows, columns=HISTORY_COLUMNS)


def _weighted_grad(net: EnergyNet, ys: SampleBatch) -> Tuple[ParamVector, float]:
    n = len(ys)
    energies, _, grad = net.backward(ys.points, weights=np.full(n, 1.0 / n))
    return grad, float(np.mean(energies))


def estimate_grad(net: EnergyNet, x_batch: SampleBatch, y_cond: SampleBatch, y_marg: SampleBatch) -> ParamVector:
    """
    Monte Carlo dL/dtheta: mean dE/dtheta over conditional samples minus the mean over marginal samples.
    """
    return _estimate_grad_with_energies(net, x_batch, y_cond, y_marg)[0]


def _estimate_grad_with_energies(net, x_batch, y_cond, y_marg) -> Tuple[ParamVector, float, float]:
    if not (len(x_batch) == len(y_cond) == len(y_marg)):
        raise ValueError(f"batch size mismatch: x={len(x_batch)}, y_cond={len(y_cond)}, y_marg={len(y_marg)}")
    if len(y_cond) == 0:
        raise ValueError("gradient estimate needs non-empty batches")
    cond_grad, cond_energy = _weighted_grad(net, y_cond)
    marg_grad, marg_energy = _weighted_grad(net, y_marg)
    grad = ParamVector(net.config, cond_grad.values - marg_grad.values)
    return grad, cond_energy, marg_energy


def train_step(net: EnergyNet, source: SourceSpec, cfg: TrainConfig, iter_seed: int,
               optimizer: Optional[Optimizer] = None, iteration: int = 0) -> Tuple[ParamVector, TrainRecord]:
    """
    One loop body: draw x, run both Langevin phases, estimate the gradient, update.

    Parameters
    ----------
    net : EnergyNet
        Current parameter snapshot; not modified.
    source : SourceSpec
        P_X.
    cfg : TrainConfig
        Run hyper-parameters.
    iter_seed : int
        Seed of this iteration; the source draw and the two phases use
        independent child seeds of it.
    optimizer : Optimizer, optional
        Stateful update rule carried across steps; a fresh one from cfg when None.
    iteration : int
        Index written into the diagnostics record.

    Returns
    -------
    (ParamVector, TrainRecord)
        Updated parameters and diagnostics.

    Raises
    ------
    LangevinDivergenceError
        A chain left the divergence box.
    NonFiniteGradientError
        The gradient or the updated parameters are not finite.
    """
    start = time.perf_counter()
    optimizer = optimizer or make_optimizer(cfg.optimizer, cfg.learning_rate)
    xs = sample(source, cfg.batch_size, child_int_seed(iter_seed, 0))
    y_cond = sample_conditional(net, xs, cfg.beta, cfg.distortion, cfg.langevin, child_int_seed(iter_seed, 1))
    y_marg = sample_marginal(net, cfg.langevin, cfg.batch_size, child_int_seed(iter_seed, 2))

    grad, cond_energy, marg_energy = _estimate_grad_with_energies(net, xs, y_cond, y_marg)
    if not grad.is_finite():
        raise NonFiniteGradientError(iteration)
    grad_norm = grad.norm()
    new_params = optimizer.step(net.params, clip_grad_norm(grad, cfg.clip_norm))
    if not new_params.is_finite():
        raise NonFiniteGradientError(iteration, detail="parameter update")

    record = TrainRecord(
        iteration=iteration,
        grad_norm=grad_norm,
        minus_energy_gap=cond_energy - marg_energy,
        wallclock_ms=(time.perf_counter() - start) * 1000.0,
        cond_energy=cond_energy,
        marg_energy=marg_energy,
    )
    return new_params, record


def train(source: SourceSpec, net_cfg: MlpConfig, cfg: TrainConfig,
          init_params: Optional[ParamVector] = None) -> TrainRun:
    """
    Train an energy network on the dual objective at cfg.beta.

    Runs cfg.iterations steps, or fewer when early stopping triggers. Each
    iteration draws fresh N(0, I) chain starts for both phases.
    """
    if source.dim != net_cfg.input_dim:
        raise DimensionMismatchError(net_cfg.input_dim, source.dim, what="source")
    net = EnergyNet(net_cfg, init_params.copy() if init_params is not None else None)
    optimizer = make_optimizer(cfg.optimizer, cfg.learning_rate)
    run = TrainRun(net_config=net_cfg, final_params=net.params.copy())

    logger.info(f"Training beta={cfg.beta:g}: {cfg.iterations} iterations, N={cfg.batch_size}, "
                f"K={cfg.langevin.steps}, eps={cfg.langevin.step_size:g}, {cfg.optimizer.value} lr={cfg.learning_rate:g}")
    bar = tqdm(total=cfg.iterations, desc=f"Train beta={cfg.beta:g}", disable=not cfg.progress)
    quiet_streak = 0
    for it in range(cfg.iterations):
        params, record = train_step(net, source, cfg, child_int_seed(cfg.seed, it), optimizer, iteration=it)
        net = net.with_params(params)
        run.history.append(record)
        bar.update(1)
        logger.debug(f"iter {it}: |g|={record.grad_norm:.4g} gap={record.minus_energy_gap:.4g}")
        if cfg.log_every and (it + 1) % cfg.log_every == 0:
            logger.info(f"iter {it + 1}/{cfg.iterations}: |g|={record.grad_norm:.4g}, "
                        f"energy gap={record.minus_energy_gap:.4g}")

        quiet_streak = quiet_streak + 1 if abs(record.minus_energy_gap) < cfg.stop_tolerance else 0
        if cfg.early_stop and quiet_streak >= cfg.stop_patience:
            run.stopped_early = True
            logger.info(f"Energy gap below {cfg.stop_tolerance:g} for {cfg.stop_patience} iterations; "
                        f"stopping at iteration {it + 1}")
            break
    bar.close()
    run.final_params = net.params.copy()
    return run
