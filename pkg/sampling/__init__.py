# sampling/__init__.py

from .langevin import ChainInit, LangevinConfig, langevin_step, sample_conditional, sample_marginal

__all__ = [
    'ChainInit',
    'LangevinConfig',
    'langevin_step',
    'sample_conditional',
    'sample_marginal',
]
