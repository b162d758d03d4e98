# estimation/__init__.py

from .quadrature import QuadratureGrid, grid_boltzmann_sample, quadrature_grid, quadrature_loss, quadrature_loss_gradient
from .rd_estimator import (
    EnergyDistanceResult,
    RdPoint,
    convergence_probe,
    energy_distance,
    energy_distance_test,
    estimate_distortion,
    estimate_loss,
    estimate_loss_and_distortion,
    estimate_rate,
    evaluate_model,
    rd_points_columns,
)

__all__ = [
    'QuadratureGrid',
    'grid_boltzmann_sample',
    'quadrature_grid',
    'quadrature_loss',
    'quadrature_loss_gradient',
    'EnergyDistanceResult',
    'RdPoint',
    'convergence_probe',
    'energy_distance',
    'energy_distance_test',
    'estimate_distortion',
    'estimate_loss',
    'estimate_loss_and_distortion',
    'estimate_rate',
    'evaluate_model',
    'rd_points_columns',
]
