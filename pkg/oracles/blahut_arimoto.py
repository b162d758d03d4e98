# oracles/blahut_arimoto.py

"""
Blahut-Arimoto iterations on a discretized source.

Both updates run in the log domain:

    log p(y|x) = log q(y) - beta * rho(x, y) - log Z(x)
    log q(y)   = log sum_x p(x) p(y|x)

The dual objective F(q) = -sum_x p(x) log Z(x) is recomputed every iteration
and must not increase.
"""

import logging
import numpy as np
from dataclasses import dataclass
from typing import Iterable, List, Optional
from scipy.special import logsumexp

from distortion import DistortionKind, pairwise_distortion
from errors import BaMonotonicityError, BaNonConvergenceError, EbrdError
from estimation.rd_estimator import RdPoint
from sources.specs import ScalarGaussian, SourceSpec

logger = logging.getLogger(__name__)

PX_SUM_TOL = 1e-12
MONOTONE_SLACK = 1e-12


@dataclass
class BaGrid:
    """Discrete source p(x) on x_grid, reproduction alphabet y_grid, and the |x| x |y| distortion matrix."""
    x_grid: np.ndarray
    y_grid: np.ndarray
    px: np.ndarray
    rho_matrix: np.ndarray

    def __post_init__(self):
        self.x_grid = np.asarray(self.x_grid, dtype=np.float64)
        self.y_grid = np.asarray(self.y_grid, dtype=np.float64)
        self.px = np.asarray(self.px, dtype=np.float64).reshape(-1)
        self.rho_matrix = np.asarray(self.rho_matrix, dtype=np.float64)
        if self.rho_matrix.shape != (self.x_grid.shape[0], self.y_grid.shape[0]):
            raise ValueError(f"rho_matrix shape {self.rho_matrix.shape} does not match grids "
                             f"({self.x_grid.shape[0]}, {self.y_grid.shape[0]})")
        if self.px.shape[0] != self.x_grid.shape[0]:
            raise ValueError("px and x_grid lengths differ")
        if np.any(self.px < 0) or abs(self.px.sum() - 1.0) > PX_SUM_TOL:
            raise ValueError(f"px must be a probability vector (sum={self.px.sum():.15f})")
        if np.any(self.rho_matrix < 0) or not np.all(np.isfinite(self.rho_matrix)):
            raise ValueError("rho_matrix must be finite and non-negative")


def scalar_source_grid(spec: SourceSpec, rho: DistortionKind = DistortionKind.SquaredL2,
                       n_points: int = 401, width_stds: float = 5.0) -> BaGrid:
    """
    Uniform grid of n_points on +-width_stds standard deviations of a scalar source.

    The same points serve as source and reproduction alphabets; p(x) is the
    source density at the points, renormalized.
    """
    if spec.dim != 1:
        raise ValueError(f"Blahut-Arimoto grids are built for scalar sources only, got dim={spec.dim}")
    std = float(np.sqrt(spec.total_variance))
    centre = spec.mean if isinstance(spec, ScalarGaussian) else 0.0
    points = np.linspace(centre - width_stds * std, centre + width_stds * std, n_points)
    px = spec.density(points)
    px = px / px.sum()
    column = points.reshape(-1, 1)
    return BaGrid(x_grid=points, y_grid=points.copy(), px=px, rho_matrix=pairwise_distortion(rho, column, column))


def binary_hamming_grid(p_one: float = 0.5) -> BaGrid:
    """Bernoulli source on {0, 1} with Hamming distortion."""
    alphabet = np.array([0.0, 1.0])
    return BaGrid(x_grid=alphabet, y_grid=alphabet.copy(), px=np.array([1.0 - p_one, p_one]),
                  rho_matrix=1.0 - np.eye(2))


def _dual(log_px_weights: np.ndarray, log_z: np.ndarray) -> float:
    return float(-(log_px_weights @ log_z))


def ba_solve(grid: BaGrid, beta: float, max_iters: int = 5000, tol: float = 1e-10) -> RdPoint:
    """
    Run Blahut-Arimoto from a uniform q until max |dq| < tol.

    Parameters
    ----------
    grid : BaGrid
        Discretized problem.
    beta : float
        Lagrange multiplier, >= 0.
    max_iters : int
        Iteration cap.
    tol : float
        Stop once the largest change of any q(y) drops below this.

    Returns
    -------
    RdPoint
        Rate (nats) and distortion of the final channel, loss_hat = R + beta * D.

    Raises
    ------
    BaNonConvergenceError
        max_iters reached; carries the last q.
    BaMonotonicityError
        The dual objective increased between two iterations.
    """
    if not (beta >= 0 and np.isfinite(beta)):
        raise ValueError(f"beta must be finite and >= 0, got {beta}")
    px = grid.px
    with np.errstate(divide="ignore"):
        log_px = np.log(px)
    scaled_rho = -beta * grid.rho_matrix
    n_y = grid.y_grid.shape[0]
    log_q = np.full(n_y, -np.log(n_y))

    prev_dual = np.inf
    change = np.inf
    for it in range(1, max_iters + 1):
        log_joint = log_q[None, :] + scaled_rho
        log_z = logsumexp(log_joint, axis=1)
        dual = _dual(px, log_z)
        if dual > prev_dual + MONOTONE_SLACK * max(1.0, abs(prev_dual)):
            raise BaMonotonicityError(f"dual objective rose from {prev_dual:.15g} to {dual:.15g} at iteration {it}")
        prev_dual = dual

        log_cond = log_joint - log_z[:, None]
        new_log_q = logsumexp(log_px[:, None] + log_cond, axis=0)
        change = float(np.max(np.abs(np.exp(new_log_q) - np.exp(log_q))))
        log_q = new_log_q
        if change < tol:
            logger.debug(f"BA beta={beta:g} converged in {it} iterations")
            break
    else:
        raise BaNonConvergenceError(iterations=max_iters, last_change=change, last_q=np.exp(log_q))

    log_joint = log_q[None, :] + scaled_rho
    log_cond = log_joint - logsumexp(log_joint, axis=1, keepdims=True)
    cond = np.exp(log_cond)
    log_q_induced = logsumexp(log_px[:, None] + log_cond, axis=0)
    with np.errstate(invalid="ignore"):
        info = np.where(cond > 0, cond * (log_cond - log_q_induced[None, :]), 0.0)
    rate = max(float(px @ info.sum(axis=1)), 0.0)
    dist = float(px @ (cond * grid.rho_matrix).sum(axis=1))
    return RdPoint(beta=float(beta), rate=rate, distortion=dist, loss_hat=rate + beta * dist,
                   n_samples=int(grid.x_grid.shape[0]), seed=0)


def ba_curve(grid: BaGrid, betas: Iterable[float], max_iters: int = 5000, tol: float = 1e-10,
             on_error: Optional[str] = "record") -> List[RdPoint]:
    """
    ba_solve for each beta. Failures are kept as error points unless on_error is "raise".
    """
    points = []
    for beta in betas:
        try:
            points.append(ba_solve(grid, beta, max_iters=max_iters, tol=tol))
        except EbrdError as e:
            if on_error == "raise":
                raise
            logger.error(f"BA failed at beta={beta:g}: {e}")
            points.append(RdPoint.failed(beta, int(grid.x_grid.shape[0]), 0, str(e)))
    return points
