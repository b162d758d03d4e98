# cli/plotting.py  –– SVG figures for sweeps, oracle curves and conditional scatters

import logging
from pathlib import Path
from typing import Optional, Sequence

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np

from distortion import DistortionKind
from estimation.rd_estimator import LN2, RdPoint
from oracles.closed_form import oracle_curve, oracle_name
from sources.specs import SourceSpec
from utils import atomic_write

logger = logging.getLogger(__name__)

# text stays text in the SVG, and no timestamp is embedded
SVG_RC = {"svg.fonttype": "none", "svg.hashsalt": "ebrd"}


def _save_svg(fig, path: str | Path) -> Path:
    with atomic_write(path, "wb") as f:
        fig.savefig(f, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.debug(f"Wrote figure {path}")
    return Path(path)


def plot_rd_overlay(points: Sequence[RdPoint], source: SourceSpec, rho: DistortionKind, path: str | Path,
                    rate_unit: str = "nats", title: Optional[str] = None) -> Path:
    """
    Estimated (D, R) points over the analytic curve of the source, when one exists.
    """
    scale = 1.0 / LN2 if rate_unit == "bits" else 1.0
    ok = [p for p in points if p.ok]
    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        name = oracle_name(source, rho)
        if name is not None:
            upper = max([source.total_variance] + [p.distortion for p in ok]) * 1.05
            lower = min([p.distortion for p in ok] + [upper / 50.0])
            grid = np.linspace(max(lower * 0.8, 1e-4), upper, 300)
            line, = ax.plot(grid, oracle_curve(source, rho, grid) * scale, color="black", lw=1.2,
                            label=f"oracle ({name})")
            line.set_gid(f"oracle-{name}")
        if ok:
            dots = ax.scatter([p.distortion for p in ok], [p.clamped_rate * scale for p in ok],
                              color="tab:red", zorder=3, label="EBRD estimate")
            dots.set_gid("ebrd-points")
            for p in ok:
                ax.annotate(f"β={p.beta:g}", (p.distortion, p.clamped_rate * scale), fontsize=7,
                            textcoords="offset points", xytext=(4, 4))
        ax.set_xlabel("distortion D")
        ax.set_ylabel(f"rate R ({rate_unit})")
        ax.set_title(title or f"{source.kind.value}, {rho.value}")
        ax.legend(loc="upper right")
        ax.grid(alpha=0.3)
        fig.tight_layout()
        return _save_svg(fig, path)


def plot_curve(distortions: Sequence[float], rates: Sequence[float], path: str | Path, label: str,
               rate_unit: str = "nats") -> Path:
    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        line, = ax.plot(distortions, rates, marker="o", ms=3, lw=1.2, label=label)
        line.set_gid(f"curve-{label}")
        ax.set_xlabel("distortion D")
        ax.set_ylabel(f"rate R ({rate_unit})")
        ax.legend(loc="upper right")
        ax.grid(alpha=0.3)
        fig.tight_layout()
        return _save_svg(fig, path)


def plot_conditional_scatter(xs: np.ndarray, ys: np.ndarray, path: str | Path, title: str = "") -> Path:
    """
    Source cloud against reconstruction cloud. 2-D points are drawn in the
    plane; other dimensions show x_0 against y_0.
    """
    xs = np.asarray(xs).reshape(len(xs), -1)
    ys = np.asarray(ys).reshape(len(ys), -1)
    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=(5, 5))
        if xs.shape[1] == 2:
            ax.scatter(xs[:, 0], xs[:, 1], s=3, alpha=0.4, color="tab:blue", label="x ~ P_X")
            ax.scatter(ys[:, 0], ys[:, 1], s=3, alpha=0.4, color="tab:orange", label="y ~ p(y|x)")
            ax.set_aspect("equal", adjustable="datalim")
        elif len(xs):
            ax.scatter(xs[:, 0], ys[:, 0], s=3, alpha=0.4)
            lim = float(np.max(np.abs(np.concatenate([xs[:, 0], ys[:, 0]])))) or 1.0
            ax.plot([-lim, lim], [-lim, lim], color="black", lw=0.8)
            ax.set_xlabel("x_0")
            ax.set_ylabel("y_0")
        if xs.shape[1] == 2:
            ax.legend(loc="upper right", markerscale=3)
        ax.set_title(title)
        fig.tight_layout()
        return _save_svg(fig, path)
