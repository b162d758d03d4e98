# errors.py

"""
Exception types raised by the estimator packages.

Value-type validation (bad widths, negative std, ...) raises plain ValueError
from ``__post_init__``; the types below cover failures callers need to tell
apart, e.g. the CLI maps ConfigError to exit code 2 and the rest to 1.
"""

from typing import Optional

import numpy as np


class EbrdError(Exception):
    """Base class for estimator failures."""


class DimensionMismatchError(EbrdError, ValueError):
    """Input points do not match the dimension the model or measure expects."""

    def __init__(self, expected: int, got: int, what: str = "input"):
        self.expected = expected
        self.got = got
        super().__init__(f"{what} dimension mismatch: expected {expected}, got {got}")


class NonFiniteInputError(EbrdError, ValueError):
    """Input contains NaN or infinite entries."""


class LangevinDivergenceError(EbrdError, RuntimeError):
    """A Langevin chain left the divergence box."""

    def __init__(self, step: int, phase: str, max_abs: float, threshold: float):
        self.step = step
        self.phase = phase
        self.max_abs = max_abs
        self.threshold = threshold
        super().__init__(
            f"Langevin chain diverged at step {step} ({phase} phase): "
            f"max |y| = {max_abs:.3g} exceeds {threshold:.3g}"
        )


class NonFiniteGradientError(EbrdError, RuntimeError):
    """Parameter gradient or update produced NaN/inf."""

    def __init__(self, iteration: int, detail: str = "gradient"):
        self.iteration = iteration
        super().__init__(f"non-finite {detail} at iteration {iteration}")


class BaNonConvergenceError(EbrdError, RuntimeError):
    """Blahut-Arimoto hit max_iters before the q change fell below tol."""

    def __init__(self, iterations: int, last_change: float, last_q: np.ndarray):
        self.iterations = iterations
        self.last_change = last_change
        self.last_q = last_q
        super().__init__(
            f"Blahut-Arimoto did not converge in {iterations} iterations "
            f"(last max |dq| = {last_change:.3e})"
        )


class BaMonotonicityError(EbrdError, RuntimeError):
    """The BA dual objective increased between iterations."""


class ConfigError(EbrdError, ValueError):
    """Run configuration is missing a field or holds an invalid value."""

    def __init__(self, field: str, message: str, cause: Optional[Exception] = None):
        self.field = field
        self.cause = cause
        super().__init__(f"config field '{field}': {message}")
