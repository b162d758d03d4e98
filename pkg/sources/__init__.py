# sources/__init__.py

from .orthogonal import haar_orthogonal
from .specs import (
    GaussianMixture,
    SampleBatch,
    ScalarGaussian,
    ScalarLaplacian,
    SourceKind,
    SourceSpec,
    VectorGaussian,
    make_ring_gmm,
    make_vector_gaussian,
    sample,
    sample_columns,
)

__all__ = [
    'haar_orthogonal',
    'GaussianMixture',
    'SampleBatch',
    'ScalarGaussian',
    'ScalarLaplacian',
    'SourceKind',
    'SourceSpec',
    'VectorGaussian',
    'make_ring_gmm',
    'make_vector_gaussian',
    'sample',
    'sample_columns',
]
