# estimation/rd_estimator.py

"""
Sample-based estimates of the dual objective, distortion and rate.

Given x_1..x_N from P_X and y_1..y_N from the model marginal q_theta:

    L_hat = -(1/N) sum_i log( (1/N) sum_j exp(-beta * rho(x_i, y_j)) )
    D     =  (1/N) sum_i  sum_j softmin_ij * rho(x_i, y_j)
    R     =  L_hat - beta * D

All log-domain sums go through scipy.special.logsumexp, row block by row
block, with a fixed reduction order so equal inputs give equal outputs.
"""

import logging
import math
import numpy as np
import pandas as pd
from dataclasses import asdict, dataclass
from typing import ClassVar, Optional, Sequence
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from distortion import DistortionKind, pairwise_distortion
from energy.base import EnergyFunction
from sampling.langevin import LangevinConfig, sample_marginal
from sources.specs import SampleBatch, SourceSpec, sample
from utils import child_int_seed

logger = logging.getLogger(__name__)

# rows of the N x N pair matrix processed at once
PAIR_BLOCK_FLOATS = 1 << 22
BOOKKEEPING_TOL = 1e-12
LN2 = math.log(2.0)


@dataclass
class RdPoint:
    """
    One (rate, distortion) estimate at a given beta, rates in nats.

    ``loss_hat = rate + beta * distortion`` holds by construction. A failed
    estimate keeps its beta and seed, NaN values and the error message.
    """
    beta: float
    rate: float
    distortion: float
    loss_hat: float
    n_samples: int
    seed: int
    error: Optional[str] = None

    NEGATIVE_RATE_TOL: ClassVar[float] = -0.05

    @classmethod
    def from_estimates(cls, beta: float, loss_hat: float, distortion: float, n_samples: int, seed: int) -> "RdPoint":
        rate = estimate_rate(loss_hat, beta, distortion)
        point = cls(beta=float(beta), rate=rate, distortion=float(distortion), loss_hat=float(loss_hat),
                    n_samples=int(n_samples), seed=int(seed))
        if point.rate < cls.NEGATIVE_RATE_TOL:
            logger.warning(f"beta={beta:g}: rate estimate {point.rate:.4f} nats is below {cls.NEGATIVE_RATE_TOL}")
        return point

    @classmethod
    def failed(cls, beta: float, n_samples: int, seed: int, error: str) -> "RdPoint":
        nan = float("nan")
        return cls(beta=float(beta), rate=nan, distortion=nan, loss_hat=nan,
                   n_samples=int(n_samples), seed=int(seed), error=error)

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def is_negative_rate(self) -> bool:
        """Rate below zero (Monte Carlo noise near R = 0)."""
        return self.ok and self.rate < 0.0

    @property
    def clamped_rate(self) -> float:
        """Rate for reports: negatives shown as 0; CSVs keep the raw value."""
        return max(self.rate, 0.0) if self.ok else self.rate

    def bookkeeping_residual(self) -> float:
        return abs(self.loss_hat - (self.rate + self.beta * self.distortion))

    def to_row(self, rate_unit: str = "nats", oracle_rate: float = float("nan")) -> dict:
        """Row of rd_points.csv: frozen columns, then the status column."""
        scale = 1.0 / LN2 if rate_unit == "bits" else 1.0
        return {
            "beta": self.beta,
            f"rate_{rate_unit}": self.rate * scale,
            "distortion": self.distortion,
            "loss_hat": self.loss_hat * scale,
            "n_samples": self.n_samples,
            "seed": self.seed,
            f"oracle_rate_{rate_unit}": oracle_rate * scale,
            "status": "ok" if self.ok else f"error: {self.error}",
        }

    def to_dict(self) -> dict:
        return asdict(self)


def rd_points_columns(rate_unit: str = "nats") -> list[str]:
    return ["beta", f"rate_{rate_unit}", "distortion", "loss_hat", "n_samples", "seed",
            f"oracle_rate_{rate_unit}", "status"]


def _points(batch) -> np.ndarray:
    arr = batch.points if isinstance(batch, SampleBatch) else np.asarray(batch, dtype=np.float64)
    return arr.reshape(-1, 1) if arr.ndim == 1 else arr


def _row_blocks(n_rows: int, n_cols: int):
    step = max(1, PAIR_BLOCK_FLOATS // max(1, n_cols))
    for start in range(0, n_rows, step):
        yield start, min(n_rows, start + step)


def _pair_terms(x_batch, y_batch, beta: float, rho: DistortionKind) -> tuple[np.ndarray, np.ndarray]:
    """
    Per-x log-mean-exp of -beta*rho and softmin-weighted distortion.

    Returns
    -------
    log_means : np.ndarray, shape (N,)
        log((1/M) sum_j exp(-beta rho_ij)).
    soft_distortions : np.ndarray, shape (N,)
        sum_j w_ij rho_ij with w_i = softmax_j(-beta rho_ij).
    """
    xs, ys = _points(x_batch), _points(y_batch)
    if xs.shape[0] == 0 or ys.shape[0] == 0:
        raise ValueError("estimators need non-empty x and y batches")
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    m = ys.shape[0]
    log_m = math.log(m)
    log_means = np.empty(xs.shape[0])
    soft = np.empty(xs.shape[0])
    for lo, hi in _row_blocks(xs.shape[0], m):
        rho_block = pairwise_distortion(rho, xs[lo:hi], ys)
        logits = -beta * rho_block
        lse = logsumexp(logits, axis=1)
        log_means[lo:hi] = lse - log_m
        weights = np.exp(logits - lse[:, None])
        d_rows = (weights * rho_block).sum(axis=1) / weights.sum(axis=1)
        soft[lo:hi] = np.clip(d_rows, rho_block.min(axis=1), rho_block.max(axis=1))
    return log_means, soft


def estimate_loss(x_batch, y_batch, beta: float, rho: DistortionKind) -> float:
    """
    Monte Carlo dual objective L_hat over N source and model samples.

    Stable for large beta: beta = 1e6 with rho up to 1e3 stays finite.
    """
    log_means, _ = _pair_terms(x_batch, y_batch, beta, rho)
    return float(-np.mean(log_means))


def estimate_distortion(x_batch, y_batch, beta: float, rho: DistortionKind) -> float:
    """Softmin-weighted distortion; lies in [min rho, max rho] over the pairs."""
    _, soft = _pair_terms(x_batch, y_batch, beta, rho)
    return float(np.mean(soft))


def estimate_loss_and_distortion(x_batch, y_batch, beta: float, rho: DistortionKind) -> tuple[float, float]:
    """Both estimates from one pass over the pair matrix."""
    log_means, soft = _pair_terms(x_batch, y_batch, beta, rho)
    return float(-np.mean(log_means)), float(np.mean(soft))


def estimate_rate(loss_hat: float, beta: float, distortion: float) -> float:
    """R = L_hat - beta * D, in nats."""
    if not (np.isfinite(loss_hat) and np.isfinite(beta) and np.isfinite(distortion)):
        raise ValueError(f"rate needs finite inputs, got L_hat={loss_hat}, beta={beta}, D={distortion}")
    return float(loss_hat - beta * distortion)


def evaluate_model(net: EnergyFunction, source: SourceSpec, beta: float, rho: DistortionKind,
                   langevin: LangevinConfig, eval_n: int, seed: int) -> RdPoint:
    """
    Estimate (R, D) of a trained energy: eval_n draws from P_X and eval_n Langevin draws from q_theta.

    ``seed`` should be disjoint from the training seeds; the two sample sets
    use child seeds of it.
    """
    xs = sample(source, eval_n, child_int_seed(seed, 0))
    ys = sample_marginal(net, langevin, eval_n, child_int_seed(seed, 1))
    loss_hat, dist = estimate_loss_and_distortion(xs, ys, beta, rho)
    point = RdPoint.from_estimates(beta, loss_hat, dist, eval_n, seed)
    logger.info(f"beta={beta:g}: R={point.rate:.4f} nats, D={point.distortion:.4f}, L_hat={point.loss_hat:.4f}")
    return point


def convergence_probe(source: SourceSpec, net: EnergyFunction, beta: float, rho: DistortionKind,
                      n_list: Sequence[int], repeats: int, seed: int,
                      langevin: Optional[LangevinConfig] = None) -> pd.DataFrame:
    """
    Spread of L_hat_N over independent sample sets, for each N in n_list.

    Parameters
    ----------
    n_list : sequence of int
        Strictly ascending sample sizes.
    repeats : int
        Independent (x, y) sample sets per N.
    langevin : LangevinConfig, optional
        Marginal sampler budget; defaults to LangevinConfig().

    Returns
    -------
    pd.DataFrame
        Columns n, mean_loss, std_loss, repeats, degenerate. With repeats = 1
        the std is reported as 0 and ``degenerate`` is True.
    """
    n_list = [int(n) for n in n_list]
    if not n_list or any(n < 1 for n in n_list) or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError(f"n_list must be non-empty, positive and strictly ascending, got {n_list}")
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    langevin = langevin or LangevinConfig()
    rows = []
    for n in n_list:
        losses = []
        for r in range(repeats):
            rep_seed = child_int_seed(seed, n, r)
            xs = sample(source, n, child_int_seed(rep_seed, 0))
            ys = sample_marginal(net, langevin, n, child_int_seed(rep_seed, 1))
            losses.append(estimate_loss(xs, ys, beta, rho))
        losses = np.asarray(losses)
        degenerate = repeats == 1
        rows.append({
            "n": n,
            "mean_loss": float(losses.mean()),
            "std_loss": 0.0 if degenerate else float(losses.std(ddof=1)),
            "repeats": repeats,
            "degenerate": degenerate,
        })
        logger.info(f"N={n}: L_hat mean={rows[-1]['mean_loss']:.5f} std={rows[-1]['std_loss']:.5f}")
    return pd.DataFrame(rows, columns=["n", "mean_loss", "std_loss", "repeats", "degenerate"])


@dataclass
class EnergyDistanceResult:
    statistic: float
    p_value: float
    permutations: int

    def rejects(self, alpha: float = 0.05) -> bool:
        return self.p_value < alpha


def energy_distance(x, y) -> float:
    """Two-sample energy statistic 2 E|X-Y| - E|X-X'| - E|Y-Y'| (V-statistic, Euclidean)."""
    xs, ys = _points(x), _points(y)
    return float(2.0 * cdist(xs, ys).mean()
                 - cdist(xs, xs).mean()
                 - cdist(ys, ys).mean())


def energy_distance_test(x, y, permutations: int = 199, seed: int = 0) -> EnergyDistanceResult:
    """
    Permutation test of equal distributions based on the energy statistic.

    The pooled distance matrix is built once; each permutation only
    relabels rows, so the cost per permutation is two matrix-vector products.
    """
    xs, ys = _points(x), _points(y)
    n, m = xs.shape[0], ys.shape[0]
    if n == 0 or m == 0:
        raise ValueError("energy distance needs two non-empty samples")
    pooled = np.vstack([xs, ys])
    dist = cdist(pooled, pooled)

    def statistic(labels: np.ndarray) -> float:
        a = labels.astype(np.float64)
        b = 1.0 - a
        da, db = dist @ a, dist @ b
        return 2.0 * (a @ db) / (n * m) - (a @ da) / (n * n) - (b @ db) / (m * m)

    base = np.zeros(n + m, dtype=bool)
    base[:n] = True
    observed = statistic(base)
    rng = np.random.default_rng(seed)
    exceed = 0
    for _ in range(permutations):
        if statistic(rng.permutation(base)) >= observed:
            exceed += 1
    p_value = (exceed + 1) / (permutations + 1)
    return EnergyDistanceResult(statistic=float(observed), p_value=float(p_value), permutations=permutations)
