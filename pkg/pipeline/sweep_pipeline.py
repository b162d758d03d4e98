# pipeline/sweep_pipeline.py

import logging
import math
import traceback
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence

from energy.mlp import MlpConfig
from errors import EbrdError
from estimation.rd_estimator import RdPoint, evaluate_model
from sampling.langevin import LangevinConfig
from sources.specs import SourceSpec
from utils import child_int_seed
from .train_pipeline import TrainConfig, TrainRun, train

# Match the logger name with what's configured in the CLI
logger = logging.getLogger('pipeline.sweep_pipeline')

TRAIN_STREAM = 0
EVAL_STREAM = 1


@dataclass
class SweepResult:
    points: List[RdPoint]
    runs: dict = field(default_factory=dict)

    @property
    def failed(self) -> List[RdPoint]:
        return [p for p in self.points if not p.ok]


def _distortion_key(point: RdPoint):
    return (not point.ok or math.isnan(point.distortion), point.distortion if point.ok else 0.0, point.beta)


def rd_sweep(source: SourceSpec, net_cfg: MlpConfig, betas: Sequence[float], train_cfg: TrainConfig,
             eval_n: int, seed: int, eval_langevin: Optional[LangevinConfig] = None,
             on_trained: Optional[Callable[[float, TrainRun], None]] = None) -> List[RdPoint]:
    """
    Trace an RD curve: one freshly initialized model per beta, evaluated on eval_n samples.

    Parameters
    ----------
    source : SourceSpec
        P_X.
    net_cfg : MlpConfig
        Architecture and initialization seed shared by every beta.
    betas : sequence of float
        Non-empty, all > 0.
    train_cfg : TrainConfig
        Template; its beta and seed are replaced per point.
    eval_n : int
        Samples from P_X and from q_theta used by the estimators.
    seed : int
        Parent seed; training and evaluation use disjoint child streams.
    eval_langevin : LangevinConfig, optional
        Sampler budget for evaluation; the training one when None.
    on_trained : callable, optional
        Called with (beta, TrainRun) after each successful training run.

    Returns
    -------
    list of RdPoint
        Sorted by distortion; a beta that failed is kept at the end with its error.
    """
    return rd_sweep_result(source, net_cfg, betas, train_cfg, eval_n, seed, eval_langevin, on_trained).points


def rd_sweep_result(source: SourceSpec, net_cfg: MlpConfig, betas: Sequence[float], train_cfg: TrainConfig,
                    eval_n: int, seed: int, eval_langevin: Optional[LangevinConfig] = None,
                    on_trained: Optional[Callable[[float, TrainRun], None]] = None) -> SweepResult:
    betas = [float(b) for b in betas]
    if not betas:
        raise ValueError("rd_sweep needs at least one beta")
    if any(not (b > 0 and math.isfinite(b)) for b in betas):
        raise ValueError(f"betas must be finite and > 0, got {betas}")
    if eval_n < 1:
        raise ValueError(f"eval_n must be >= 1, got {eval_n}")
    eval_langevin = eval_langevin or train_cfg.langevin

    result = SweepResult(points=[])
    for idx, beta in enumerate(betas, start=1):
        cfg = replace(train_cfg, beta=beta, seed=child_int_seed(seed, TRAIN_STREAM, idx))
        eval_seed = child_int_seed(seed, EVAL_STREAM, idx)
        logger.info(f"Sweep {idx}/{len(betas)}: beta={beta:g}")
        try:
            run = train(source, net_cfg, cfg)
            point = evaluate_model(run.net, source, beta, cfg.distortion, eval_langevin, eval_n, eval_seed)
        except (EbrdError, FloatingPointError, ValueError) as exc:
            logger.error(f"beta={beta:g} failed: {exc}")
            logger.debug(traceback.format_exc())
            result.points.append(RdPoint.failed(beta, eval_n, eval_seed, str(exc)))
            continue
        result.runs[beta] = run
        result.points.append(point)
        if on_trained is not None:
            on_trained(beta, run)

    result.points.sort(key=_distortion_key)
    if result.failed:
        logger.warning(f"{len(result.failed)} of {len(betas)} betas failed")
    return result
