# oracles/closed_form.py  –– analytic rate-distortion functions (rates in nats)

import logging
import numpy as np
from dataclasses import dataclass
from typing import Iterable

from distortion import DistortionKind
from sources.specs import ScalarGaussian, ScalarLaplacian, SourceSpec, VectorGaussian

logger = logging.getLogger(__name__)

WATERFILL_MAX_ITERS = 200
WATERFILL_RESIDUAL = 1e-10


def _check_distortion(D: float) -> float:
    D = float(D)
    if not (D > 0 and np.isfinite(D)):
        raise ValueError(f"distortion must be finite and > 0, got {D}")
    return D


def gaussian_rd(D: float, variance: float = 1.0) -> float:
    """R(D) = 1/2 ln(sigma^2 / D) for D <= sigma^2, else 0 (squared error)."""
    D = _check_distortion(D)
    if not variance > 0:
        raise ValueError(f"variance must be > 0, got {variance}")
    return 0.5 * float(np.log(variance / D)) if D < variance else 0.0


def laplacian_rd(D: float, scale: float = 1.0) -> float:
    """R(D) = ln(b / D) for D <= b, else 0 (absolute error)."""
    D = _check_distortion(D)
    if not scale > 0:
        raise ValueError(f"scale must be > 0, got {scale}")
    return float(np.log(scale / D)) if D < scale else 0.0


def binary_entropy(p: float) -> float:
    p = float(p)
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return float(-p * np.log(p) - (1.0 - p) * np.log(1.0 - p))


def binary_hamming_rd(D: float, p: float = 0.5) -> float:
    """Bernoulli(p) source with Hamming distortion: H_b(p) - H_b(D) for D < min(p, 1-p)."""
    if D < 0:
        raise ValueError(f"distortion must be >= 0, got {D}")
    if D >= min(p, 1.0 - p):
        return 0.0
    return binary_entropy(p) - binary_entropy(D)


@dataclass
class WaterfillSolution:
    """
    Reverse water-filling solution of a Gaussian vector source.

    Attributes
    ----------
    lam : float
        Water level lambda.
    per_dim_distortion : np.ndarray
        D_i = min(lambda, sigma_i^2).
    rate : float
        sum_i 1/2 ln(sigma_i^2 / D_i), nats.
    """
    lam: float
    per_dim_distortion: np.ndarray
    rate: float

    @property
    def distortion(self) -> float:
        return float(self.per_dim_distortion.sum())


def vector_gaussian_rd(eigen_vars: Iterable[float], D: float) -> WaterfillSolution:
    """
    Reverse water-filling: bisection for lambda on [0, max sigma_i^2].

    lambda -> sum_i min(lambda, sigma_i^2) is continuous and non-decreasing,
    so the bracket always holds the root when D < sum sigma_i^2.
    """
    variances = np.asarray(list(eigen_vars), dtype=np.float64)
    D = _check_distortion(D)
    if variances.size == 0 or np.any(~(variances > 0)) or not np.all(np.isfinite(variances)):
        raise ValueError(f"eigen variances must be non-empty and > 0, got {variances.tolist()}")
    if D >= variances.sum():
        return WaterfillSolution(lam=float(variances.max()), per_dim_distortion=variances.copy(), rate=0.0)

    lo, hi = 0.0, float(variances.max())
    lam = 0.5 * (lo + hi)
    for _ in range(WATERFILL_MAX_ITERS):
        lam = 0.5 * (lo + hi)
        residual = float(np.minimum(lam, variances).sum()) - D
        if abs(residual) <= WATERFILL_RESIDUAL:
            break
        if residual > 0:
            hi = lam
        else:
            lo = lam
    per_dim = np.minimum(lam, variances)
    rate = float(np.sum(0.5 * np.log(variances / per_dim)))
    return WaterfillSolution(lam=lam, per_dim_distortion=per_dim, rate=rate)


def oracle_name(source: SourceSpec, rho: DistortionKind) -> str | None:
    """Label of the analytic curve matching (source, rho), or None when there is none."""
    if isinstance(source, ScalarGaussian) and rho is DistortionKind.SquaredL2:
        return "gaussian_rd"
    if isinstance(source, ScalarLaplacian) and rho is DistortionKind.L1:
        return "laplacian_rd"
    if isinstance(source, VectorGaussian) and rho is DistortionKind.SquaredL2:
        return "water-filling"
    return None


def oracle_rate(source: SourceSpec, rho: DistortionKind, D: float) -> float:
    """Analytic R(D) for the source, NaN when no closed form applies (e.g. the mixture source)."""
    name = oracle_name(source, rho)
    if name is None or not (D > 0 and np.isfinite(D)):
        return float("nan")
    if name == "gaussian_rd":
        return gaussian_rd(D, variance=source.total_variance)
    if name == "laplacian_rd":
        return laplacian_rd(D, scale=source.scale)
    return vector_gaussian_rd(source.eigen_variances, D).rate


def oracle_curve(source: SourceSpec, rho: DistortionKind, distortions: Iterable[float]) -> np.ndarray:
    return np.asarray([oracle_rate(source, rho, d) for d in distortions], dtype=np.float64)
