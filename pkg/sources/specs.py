# sources/specs.py  –– declarative source distributions with seeded samplers

import logging
import numpy as np
import pandas as pd
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Any, ClassVar, Dict, List
from scipy import stats

from utils import write_csv
from .orthogonal import haar_orthogonal

logger = logging.getLogger(__name__)

RING_GMM_RADIUS = 6.0
WEIGHT_SUM_TOL = 1e-12


class SourceKind(Enum):
    ScalarGaussian = "gaussian"
    ScalarLaplacian = "laplacian"
    VectorGaussian = "vector_gaussian"
    GaussianMixture = "gmm"


class SourceSpec(ABC):
    """
    Description of a source distribution P_X.

    Subclasses are frozen dataclasses; ``draw`` is the only place randomness
    enters, so ``sample(spec, n, seed)`` is a pure function of its arguments.
    """
    kind: ClassVar[SourceKind]
    dim: int

    @abstractmethod
    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Return n i.i.d. draws as an (n, dim) float64 array."""
        raise NotImplementedError

    @property
    def total_variance(self) -> float:
        """Trace of the covariance, the distortion at which squared-error rate hits 0."""
        raise NotImplementedError(f"{type(self).__name__} has no closed-form variance")

    def density(self, points: np.ndarray) -> np.ndarray:
        """Density of P_X at the rows of ``points``; only the low-dimensional sources provide one."""
        raise NotImplementedError(f"{type(self).__name__} has no density")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["kind"] = self.kind.value
        return data

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> "SourceSpec":
        """
        Build a spec from a config table.

        ``kind`` selects the variant: gaussian{mean, std}, laplacian{scale},
        vector_gaussian{dim, basis_seed[, eigen_stds]}, gmm{[means, component_std, weights]}.
        Missing optional keys fall back to the reference scenarios.
        """
        data = dict(data)
        if "kind" not in data:
            raise KeyError("kind")
        kind = SourceKind(str(data.pop("kind")).strip().lower())
        if kind is SourceKind.ScalarGaussian:
            return ScalarGaussian(mean=float(data.get("mean", 0.0)), std=float(data.get("std", 1.0)))
        if kind is SourceKind.ScalarLaplacian:
            return ScalarLaplacian(scale=float(data.get("scale", 1.0)))
        if kind is SourceKind.VectorGaussian:
            dim = int(data["dim"])
            basis_seed = int(data.get("basis_seed", 0))
            if "eigen_stds" in data:
                return VectorGaussian(dim=dim, eigen_stds=tuple(data["eigen_stds"]), basis_seed=basis_seed)
            return make_vector_gaussian(dim, basis_seed)
        ring = make_ring_gmm()
        return GaussianMixture(
            means=tuple(tuple(m) for m in data.get("means", ring.means)),
            component_std=float(data.get("component_std", ring.component_std)),
            weights=tuple(data.get("weights", ring.weights)),
        )


@dataclass(frozen=True)
class ScalarGaussian(SourceSpec):
    kind: ClassVar[SourceKind] = SourceKind.ScalarGaussian
    mean: float = 0.0
    std: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.mean) and self.std > 0 and np.isfinite(self.std)):
            raise ValueError(f"ScalarGaussian needs finite mean and std > 0, got mean={self.mean}, std={self.std}")

    @property
    def dim(self) -> int:
        return 1

    @property
    def total_variance(self) -> float:
        return self.std ** 2

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return (self.mean + self.std * rng.standard_normal(n)).reshape(n, 1)

    def density(self, points: np.ndarray) -> np.ndarray:
        return stats.norm.pdf(np.asarray(points, dtype=np.float64).reshape(-1), loc=self.mean, scale=self.std)


@dataclass(frozen=True)
class ScalarLaplacian(SourceSpec):
    """Zero-mean Laplace density exp(-|x|/b) / (2b)."""
    kind: ClassVar[SourceKind] = SourceKind.ScalarLaplacian
    scale: float = 1.0

    def __post_init__(self):
        if not (self.scale > 0 and np.isfinite(self.scale)):
            raise ValueError(f"ScalarLaplacian needs scale > 0, got {self.scale}")

    @property
    def dim(self) -> int:
        return 1

    @property
    def total_variance(self) -> float:
        return 2.0 * self.scale ** 2

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        # inverse CDF; u is kept off 0 so both log branches stay finite
        u = np.maximum(rng.random(n), np.finfo(np.float64).tiny)
        x = np.where(u < 0.5, np.log(2.0 * u), -np.log(2.0 - 2.0 * u))
        return (self.scale * x).reshape(n, 1)

    def density(self, points: np.ndarray) -> np.ndarray:
        return stats.laplace.pdf(np.asarray(points, dtype=np.float64).reshape(-1), scale=self.scale)


@dataclass(frozen=True)
class VectorGaussian(SourceSpec):
    """
    N(0, U diag(sigma_1^2, ..., sigma_d^2) U^T) with U a seeded Haar-random orthogonal matrix.
    """
    kind: ClassVar[SourceKind] = SourceKind.VectorGaussian
    dim: int = 2
    eigen_stds: tuple[float, ...] = ()
    basis_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "eigen_stds", tuple(float(s) for s in self.eigen_stds))
        if self.dim < 1:
            raise ValueError(f"VectorGaussian needs dim >= 1, got {self.dim}")
        if len(self.eigen_stds) != self.dim:
            raise ValueError(f"VectorGaussian needs {self.dim} eigen_stds, got {len(self.eigen_stds)}")
        if any(not (s > 0 and np.isfinite(s)) for s in self.eigen_stds):
            raise ValueError(f"eigen_stds must all be > 0, got {list(self.eigen_stds)}")

    @cached_property
    def basis(self) -> np.ndarray:
        return haar_orthogonal(self.dim, np.random.default_rng(self.basis_seed))

    @property
    def eigen_variances(self) -> np.ndarray:
        return np.asarray(self.eigen_stds) ** 2

    @property
    def total_variance(self) -> float:
        return float(self.eigen_variances.sum())

    def covariance(self) -> np.ndarray:
        u = self.basis
        return (u * self.eigen_variances[None, :]) @ u.T

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        z = rng.standard_normal((n, self.dim))
        return (z * np.asarray(self.eigen_stds)[None, :]) @ self.basis.T


@dataclass(frozen=True)
class GaussianMixture(SourceSpec):
    """Mixture of isotropic 2-D Gaussians sharing one component std."""
    kind: ClassVar[SourceKind] = SourceKind.GaussianMixture
    means: tuple[tuple[float, float], ...] = ()
    component_std: float = 1.0
    weights: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "means", tuple(tuple(float(v) for v in m) for m in self.means))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if not self.means or any(len(m) != 2 for m in self.means):
            raise ValueError("GaussianMixture needs a non-empty list of 2-D means")
        if len(self.weights) != len(self.means):
            raise ValueError(f"GaussianMixture needs {len(self.means)} weights, got {len(self.weights)}")
        if any(w < 0 for w in self.weights) or abs(sum(self.weights) - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"mixture weights must be a probability vector, got {list(self.weights)}")
        if not (self.component_std > 0 and np.isfinite(self.component_std)):
            raise ValueError(f"component_std must be > 0, got {self.component_std}")

    @property
    def dim(self) -> int:
        return 2

    @property
    def total_variance(self) -> float:
        means = np.asarray(self.means)
        w = np.asarray(self.weights)
        centre = w @ means
        spread = float(w @ ((means - centre) ** 2).sum(axis=1))
        return spread + 2.0 * self.component_std ** 2

    def draw_with_components(self, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Draws plus the index of the component each came from."""
        labels = rng.choice(len(self.weights), size=n, p=np.asarray(self.weights))
        points = np.asarray(self.means)[labels] + self.component_std * rng.standard_normal((n, 2))
        return points, labels

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.draw_with_components(rng, n)[0]

    def density(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        var = self.component_std ** 2
        out = np.zeros(points.shape[0])
        for w, m in zip(self.weights, self.means):
            sq = ((points - np.asarray(m)) ** 2).sum(axis=1)
            out += w * np.exp(-0.5 * sq / var) / (2.0 * np.pi * var)
        return out


@dataclass
class SampleBatch:
    """n draws from a source, with the seed that produced them."""
    points: np.ndarray
    source: SourceSpec | None = None
    seed: int | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim == 1:
            self.points = self.points.reshape(-1, 1)
        if not np.all(np.isfinite(self.points)):
            raise ValueError("sample batch contains non-finite rows")

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def to_frame(self, prefix: str = "x") -> pd.DataFrame:
        return pd.DataFrame(self.points, columns=sample_columns(self.dim, prefix))

    def to_csv(self, path: str | Path, prefix: str = "x") -> Path:
        """Write one row per point with columns ``<prefix>_0 .. <prefix>_{d-1}``."""
        return write_csv(self.to_frame(prefix), path, sample_columns(self.dim, prefix))


def sample_columns(dim: int, prefix: str = "x") -> List[str]:
    return [f"{prefix}_{i}" for i in range(dim)]


def sample(spec: SourceSpec, n: int, seed: int) -> SampleBatch:
    """
    Draw n i.i.d. points from ``spec``; identical (spec, n, seed) give identical batches.
    """
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    return SampleBatch(points=spec.draw(rng, n), source=spec, seed=seed)


def make_vector_gaussian(d: int, basis_seed: int = 0) -> VectorGaussian:
    """Reference vector source: sigma_i = 2^(-i/10) for i = 1..d, Haar basis from basis_seed."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    stds = tuple(2.0 ** (-i / 10.0) for i in range(1, d + 1))
    return VectorGaussian(dim=d, eigen_stds=stds, basis_seed=basis_seed)


def make_ring_gmm() -> GaussianMixture:
    """Three unit-variance components, equal weights, means on a radius-6 circle starting at angle 0."""
    angles = np.deg2rad([0.0, 120.0, 240.0])
    means = tuple((RING_GMM_RADIUS * float(np.cos(a)), RING_GMM_RADIUS * float(np.sin(a))) for a in angles)
    return GaussianMixture(means=means, component_std=1.0, weights=(1 / 3, 1 / 3, 1 / 3))
