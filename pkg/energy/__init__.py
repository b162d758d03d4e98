# energy/__init__.py

from .base import EnergyFunction, QuadraticEnergy
from .mlp import (
    Activation,
    EnergyNet,
    MlpConfig,
    ParamVector,
    conditional_energy,
    conditional_grad_input,
    energy,
    grad_input,
    grad_params,
    init_params,
    load_checkpoint,
    save_checkpoint,
)

__all__ = [
    'EnergyFunction',
    'QuadraticEnergy',
    'Activation',
    'EnergyNet',
    'MlpConfig',
    'ParamVector',
    'conditional_energy',
    'conditional_grad_input',
    'energy',
    'grad_input',
    'grad_params',
    'init_params',
    'load_checkpoint',
    'save_checkpoint',
]
