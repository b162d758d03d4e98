# distortion.py

"""
Distortion measures rho(x, y) and their y-gradients.

Point-wise functions take equal-length vectors; the ``*_batch`` and
``pairwise_distortion`` variants operate on (n, d) row batches and are what
the samplers and estimators use.
"""

import logging
from enum import Enum

import numpy as np
from scipy.spatial.distance import cdist

from errors import DimensionMismatchError

logger = logging.getLogger(__name__)


class DistortionKind(Enum):
    SquaredL2 = "sq_l2"
    L1 = "l1"

    @classmethod
    def from_name(cls, name: "str | DistortionKind") -> "DistortionKind":
        """Parse the config/CLI spelling ("sq_l2" | "l1")."""
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            raise ValueError(f"unknown distortion '{name}', expected one of {[k.value for k in cls]}") from None


def _pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if x.shape != y.shape:
        raise DimensionMismatchError(x.shape[-1], y.shape[-1], what="distortion")
    return x, y


def distortion(kind: DistortionKind, x, y) -> float:
    """
    rho(x, y) for a single pair.

    SquaredL2 gives sum (x_i - y_i)^2, L1 gives sum |x_i - y_i|.
    """
    x, y = _pair(x, y)
    diff = x - y
    if kind is DistortionKind.SquaredL2:
        return float(np.sum(diff * diff))
    return float(np.sum(np.abs(diff)))


def distortion_grad_y(kind: DistortionKind, x, y) -> np.ndarray:
    """
    Gradient (SquaredL2) or subgradient (L1) of rho(x, y) with respect to y.

    The L1 subgradient at a kink is 0, the midpoint of [-1, 1].
    """
    x, y = _pair(x, y)
    if kind is DistortionKind.SquaredL2:
        return 2.0 * (y - x)
    return np.sign(y - x)


def distortion_batch(kind: DistortionKind, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Row-wise rho(xs[i], ys[i]) for two (n, d) batches."""
    if xs.shape != ys.shape:
        raise DimensionMismatchError(xs.shape[-1], ys.shape[-1], what="distortion")
    diff = xs - ys
    if kind is DistortionKind.SquaredL2:
        return (diff * diff).sum(axis=1)
    return np.abs(diff).sum(axis=1)


def distortion_grad_y_batch(kind: DistortionKind, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Row-wise distortion_grad_y for two (n, d) batches."""
    if xs.shape != ys.shape:
        raise DimensionMismatchError(xs.shape[-1], ys.shape[-1], what="distortion")
    if kind is DistortionKind.SquaredL2:
        return 2.0 * (ys - xs)
    return np.sign(ys - xs)


def pairwise_distortion(kind: DistortionKind, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """
    Matrix rho(xs[i], ys[j]) for batches of shape (n, d) and (m, d).

    Returns
    -------
    np.ndarray, shape (n, m)
        Non-negative distortion values.
    """
    if xs.shape[1] != ys.shape[1]:
        raise DimensionMismatchError(xs.shape[1], ys.shape[1], what="distortion")
    metric = "sqeuclidean" if kind is DistortionKind.SquaredL2 else "cityblock"
    return cdist(xs, ys, metric=metric)
