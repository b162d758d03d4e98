# sampling/langevin.py  –– unadjusted Langevin chains for q_theta(y) and p_theta(y|x)

import logging
import numpy as np
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

from distortion import DistortionKind
from energy.base import EnergyFunction
from energy.mlp import conditional_grad_input_batch
from errors import DimensionMismatchError, LangevinDivergenceError, NonFiniteInputError
from sources.specs import SampleBatch
from utils import child_seed

logger = logging.getLogger(__name__)

DIVERGENCE_THRESHOLD = 1e6
# upper bound on floats held by one noise block (n chains x block steps x dim)
NOISE_BLOCK_FLOATS = 1 << 22


class ChainInit(Enum):
    StandardNormal = "standard_normal"


@dataclass(frozen=True)
class LangevinConfig:
    """Chain length K, step size epsilon and initializer of every chain."""
    steps: int = 50
    step_size: float = 1.2e-2
    init: ChainInit = ChainInit.StandardNormal
    divergence_threshold: float = DIVERGENCE_THRESHOLD

    def __post_init__(self):
        if int(self.steps) < 1:
            raise ValueError(f"Langevin steps must be >= 1, got {self.steps}")
        if not (self.step_size > 0 and np.isfinite(self.step_size)):
            raise ValueError(f"Langevin step_size must be finite and > 0, got {self.step_size}")
        object.__setattr__(self, "init", ChainInit(self.init))


class ChainNoise:
    """
    Per-chain N(0, I) streams.

    Chain i reads its own generator seeded by child_seed(seed, i): first the
    initial point, then one vector per step. A chain's noise therefore does
    not depend on how many other chains run or in which order they are
    advanced.
    """

    def __init__(self, seed: int, n_chains: int, dim: int):
        self.n_chains = n_chains
        self.dim = dim
        self._rngs = [np.random.Generator(np.random.Philox(child_seed(seed, i))) for i in range(n_chains)]

    def initial(self) -> np.ndarray:
        return np.stack([rng.standard_normal(self.dim) for rng in self._rngs]) if self.n_chains else np.zeros((0, self.dim))

    def block(self, steps: int) -> np.ndarray:
        """Noise for the next ``steps`` steps, shape (steps, n_chains, dim)."""
        if self.n_chains == 0:
            return np.zeros((steps, 0, self.dim))
        per_chain = np.stack([rng.standard_normal((steps, self.dim)) for rng in self._rngs])
        return per_chain.transpose(1, 0, 2)


def langevin_step(grad: np.ndarray, y: np.ndarray, eps: float, noise: np.ndarray) -> np.ndarray:
    """
    One unadjusted Langevin update y - (eps^2 / 2) * grad + eps * noise.

    Works row-wise on (n, d) batches as well as on single vectors.
    """
    grad = np.asarray(grad, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if grad.shape != y.shape or noise.shape != y.shape:
        raise DimensionMismatchError(y.shape[-1], grad.shape[-1] if grad.shape != y.shape else noise.shape[-1],
                                     what="Langevin step")
    if not (np.isfinite(eps) and np.all(np.isfinite(grad)) and np.all(np.isfinite(y)) and np.all(np.isfinite(noise))):
        raise NonFiniteInputError("Langevin step received non-finite input")
    return y - 0.5 * eps * eps * grad + eps * noise


def run_chains(grad_fn: Callable[[np.ndarray], np.ndarray], n: int, dim: int, cfg: LangevinConfig,
               seed: int, phase: str, init_points: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Advance n chains K steps under ``grad_fn`` and return the final states.

    Parameters
    ----------
    grad_fn : callable
        Maps the (n, d) current states to the (n, d) energy gradients.
    n, dim : int
        Number of chains and their dimension.
    cfg : LangevinConfig
        K, epsilon, divergence threshold.
    seed : int
        Parent seed of the per-chain noise streams.
    phase : str
        Label used in divergence errors and logs ("marginal", "conditional").
    init_points : np.ndarray, optional
        Replaces the N(0, I) initial states (the initial noise draw is still consumed).

    Raises
    ------
    LangevinDivergenceError
        When any coordinate leaves [-threshold, threshold] or turns NaN.
    """
    noise = ChainNoise(seed, n, dim)
    y = noise.initial()
    if init_points is not None:
        init_points = np.asarray(init_points, dtype=np.float64).reshape(n, dim)
        y = init_points.copy()
    eps = cfg.step_size
    block_len = max(1, min(cfg.steps, NOISE_BLOCK_FLOATS // max(1, n * dim)))

    step = 0
    while step < cfg.steps:
        this_block = min(block_len, cfg.steps - step)
        z_block = noise.block(this_block)
        for z in z_block:
            step += 1
            try:
                y = langevin_step(grad_fn(y), y, eps, z)
            except NonFiniteInputError:
                raise LangevinDivergenceError(step=step, phase=phase, max_abs=float("inf"),
                                              threshold=cfg.divergence_threshold) from None
            max_abs = float(np.max(np.abs(y))) if y.size else 0.0
            if not max_abs <= cfg.divergence_threshold:
                raise LangevinDivergenceError(step=step, phase=phase, max_abs=max_abs,
                                              threshold=cfg.divergence_threshold)
    logger.debug(f"{phase}: {n} chains x {cfg.steps} steps (eps={eps:g}) done")
    return y


def sample_marginal(net: EnergyFunction, cfg: LangevinConfig, n: int, seed: int,
                    init_points: Optional[np.ndarray] = None) -> SampleBatch:
    """
    Draw n approximate samples of q_theta(y) proportional to exp(-E_theta(y)).

    Chains start from N(0, I) and follow the gradient of E_theta for K steps.
    """
    if n < 0:
        raise ValueError(f"number of chains must be >= 0, got {n}")
    y = run_chains(net.grad_input_batch, n, net.input_dim, cfg, seed, "marginal", init_points)
    return SampleBatch(points=y, seed=seed)


def sample_conditional(net: EnergyFunction, xs: SampleBatch, beta: float, rho: DistortionKind,
                       cfg: LangevinConfig, seed: int,
                       init_points: Optional[np.ndarray] = None) -> SampleBatch:
    """
    Draw one approximate sample of p_theta(y | x_i) for every row x_i of ``xs``.

    The chains follow the gradient of E'(x, y) = E_theta(y) + beta * rho(x, y);
    with beta = 0 they coincide with sample_marginal under the same seed.
    """
    x_points = xs.points
    if x_points.shape[1] != net.input_dim:
        raise DimensionMismatchError(net.input_dim, x_points.shape[1], what="conditioning point")
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")

    def grad_fn(y: np.ndarray) -> np.ndarray:
        return conditional_grad_input_batch(net, x_points, y, beta, rho)

    y = run_chains(grad_fn, x_points.shape[0], net.input_dim, cfg, seed, "conditional", init_points)
    return SampleBatch(points=y, source=xs.source, seed=seed)
