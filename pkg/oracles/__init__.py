# oracles/__init__.py

from .blahut_arimoto import BaGrid, ba_curve, ba_solve, binary_hamming_grid, scalar_source_grid
from .closed_form import (
    WaterfillSolution,
    binary_entropy,
    binary_hamming_rd,
    gaussian_rd,
    laplacian_rd,
    oracle_curve,
    oracle_name,
    oracle_rate,
    vector_gaussian_rd,
)

__all__ = [
    'BaGrid',
    'ba_curve',
    'ba_solve',
    'binary_hamming_grid',
    'scalar_source_grid',
    'WaterfillSolution',
    'binary_entropy',
    'binary_hamming_rd',
    'gaussian_rd',
    'laplacian_rd',
    'oracle_curve',
    'oracle_name',
    'oracle_rate',
    'vector_gaussian_rd',
]
