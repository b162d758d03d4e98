# pipeline/optimizers.py

import logging
import numpy as np
from abc import ABC, abstractmethod
from enum import Enum
from typing import Optional

from energy.mlp import ParamVector

logger = logging.getLogger('pipeline.optimizers')


class OptimizerKind(Enum):
    Sgd = "sgd"
    Adam = "adam"

    @classmethod
    def from_name(cls, name: "str | OptimizerKind") -> "OptimizerKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            raise ValueError(f"unknown optimizer '{name}', expected one of {[k.value for k in cls]}") from None


class Optimizer(ABC):
    """
    First-order update rule over a ParamVector.

    ``step`` returns new parameters and never writes into its arguments;
    whatever state the rule keeps (moments, step count) lives on the instance.
    """

    def __init__(self, learning_rate: float):
        if not (learning_rate >= 0 and np.isfinite(learning_rate)):
            raise ValueError(f"learning_rate must be finite and >= 0, got {learning_rate}")
        self.learning_rate = float(learning_rate)

    @abstractmethod
    def step(self, params: ParamVector, grad: ParamVector) -> ParamVector:
        raise NotImplementedError("Subclasses should implement this method.")


class Sgd(Optimizer):
    """theta <- theta - lr * g."""

    def step(self, params: ParamVector, grad: ParamVector) -> ParamVector:
        return ParamVector(params.config, params.values - self.learning_rate * grad.values)


class Adam(Optimizer):
    """Adam with bias-corrected first and second moments."""

    def __init__(self, learning_rate: float = 1e-3, b1: float = 0.9, b2: float = 0.999, eps: float = 1e-8):
        super().__init__(learning_rate)
        self.b1 = b1
        self.b2 = b2
        self.eps = eps
        self.t = 0
        self._m: Optional[np.ndarray] = None
        self._v: Optional[np.ndarray] = None

    def step(self, params: ParamVector, grad: ParamVector) -> ParamVector:
        g = grad.values
        if self._m is None:
            self._m = np.zeros_like(g)
            self._v = np.zeros_like(g)
        self.t += 1
        self._m = self.b1 * self._m + (1.0 - self.b1) * g
        self._v = self.b2 * self._v + (1.0 - self.b2) * g * g
        m_hat = self._m / (1.0 - self.b1 ** self.t)
        v_hat = self._v / (1.0 - self.b2 ** self.t)
        update = self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)
        return ParamVector(params.config, params.values - update)


def make_optimizer(kind: OptimizerKind, learning_rate: float) -> Optimizer:
    if OptimizerKind.from_name(kind) is OptimizerKind.Sgd:
        return Sgd(learning_rate)
    return Adam(learning_rate)


def clip_grad_norm(grad: ParamVector, max_norm: Optional[float]) -> ParamVector:
    """Rescale grad to Euclidean norm max_norm when it is longer; None disables clipping."""
    if max_norm is None:
        return grad
    norm = grad.norm()
    if norm <= max_norm:
        return grad
    logger.debug(f"clipping gradient norm {norm:.3g} to {max_norm:g}")
    return ParamVector(grad.config, grad.values * (max_norm / norm))
