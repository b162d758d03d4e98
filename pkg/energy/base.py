# energy/base.py  –– Base class for energy functions E(y) consumed by the Langevin samplers

import logging
import numpy as np
from abc import ABC, abstractmethod

logger = logging.getLogger(__name__)


class EnergyFunction(ABC):
    """
    Scalar energy over R^d, evaluated on row batches of shape (n, d).

    The samplers only need the energy and its input gradient; parameter
    gradients are specific to trainable models (see energy.mlp.EnergyNet).
    """
    input_dim: int

    @abstractmethod
    def energy_batch(self, ys: np.ndarray) -> np.ndarray:
        """Return the (n,) energies of the rows of ys."""
        raise NotImplementedError("Subclasses should implement this method.")

    @abstractmethod
    def grad_input_batch(self, ys: np.ndarray) -> np.ndarray:
        """Return the (n, d) gradients dE/dy of the rows of ys."""
        raise NotImplementedError("Subclasses should implement this method.")


class QuadraticEnergy(EnergyFunction):
    """
    E(y) = sum_i y_i^2 / (2 * variance), a Gaussian target with known moments.

    Used as the reference energy when checking sampler stationarity.
    """

    def __init__(self, input_dim: int = 1, variance: float = 1.0):
        if input_dim < 1:
            raise ValueError(f"input_dim must be >= 1, got {input_dim}")
        if not variance > 0:
            raise ValueError(f"variance must be > 0, got {variance}")
        self.input_dim = input_dim
        self.variance = float(variance)

    def energy_batch(self, ys: np.ndarray) -> np.ndarray:
        return 0.5 * (ys * ys).sum(axis=1) / self.variance

    def grad_input_batch(self, ys: np.ndarray) -> np.ndarray:
        return ys / self.variance
