# cli/run_config.py

"""
TOML run configuration.

    seed = 0
    eval_n = 4000
    betas = [0.6, 1, 2, 5, 10]
    output_dir = "runs/gaussian"
    emit = ["csv", "svg"]
    rate_unit = "nats"

    [source]            # required; kind = gaussian | laplacian | vector_gaussian | gmm
    [net]               # hidden_widths, activation, param_seed
    [train]             # beta, batch_size, iterations, learning_rate, optimizer, distortion, ...
    [train.langevin]    # steps, step_size
    [eval]              # n_list, repeats
    [eval.langevin]     # evaluation sampler budget, training budget when absent

Every field except [source] has a default; scenario defaults (distortion,
Langevin budget, beta grid) follow the source kind.
"""

import logging
import os
import tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Mapping, Optional

from distortion import DistortionKind
from energy.mlp import MlpConfig
from errors import ConfigError
from pipeline.optimizers import OptimizerKind
from pipeline.train_pipeline import TrainConfig
from sampling.langevin import LangevinConfig
from sources.specs import SourceKind, SourceSpec

logger = logging.getLogger(__name__)

EMIT_CHOICES = ("csv", "svg")
RATE_UNITS = ("nats", "bits")
DEFAULT_OUTPUT_DIR = "ebrd_out"

# distortion, Langevin (K, eps) and beta grid per source kind
SCENARIO_DEFAULTS: Dict[SourceKind, Dict[str, Any]] = {
    SourceKind.ScalarGaussian: {"distortion": "sq_l2", "steps": 50, "step_size": 1.2e-2,
                                "betas": (0.6, 1.0, 2.0, 5.0, 10.0)},
    SourceKind.ScalarLaplacian: {"distortion": "l1", "steps": 80, "step_size": 3.5e-2,
                                 "betas": (1.0, 1.5, 2.0, 4.0, 8.0)},
    SourceKind.VectorGaussian: {"distortion": "sq_l2", "steps": 50, "step_size": 1.2e-2,
                                "betas": (0.5, 1.0, 2.0, 4.0, 8.0)},
    SourceKind.GaussianMixture: {"distortion": "sq_l2", "steps": 50, "step_size": 1.2e-2,
                                 "betas": (0.05, 0.2, 1.0, 5.0, 25.0)},
}

TOP_KEYS = {"seed", "eval_n", "betas", "output_dir", "emit", "rate_unit", "source", "net", "train", "eval"}
NET_KEYS = {"hidden_widths", "activation", "param_seed"}
TRAIN_KEYS = {"beta", "batch_size", "iterations", "learning_rate", "optimizer", "distortion", "clip_norm",
              "early_stop", "stop_tolerance", "stop_patience", "log_every", "langevin"}
LANGEVIN_KEYS = {"steps", "step_size"}
EVAL_KEYS = {"n_list", "repeats", "langevin"}
SOURCE_KEYS: Dict[SourceKind, set] = {
    SourceKind.ScalarGaussian: {"kind", "mean", "std"},
    SourceKind.ScalarLaplacian: {"kind", "scale"},
    SourceKind.VectorGaussian: {"kind", "dim", "basis_seed", "eigen_stds"},
    SourceKind.GaussianMixture: {"kind", "means", "component_std", "weights"},
}


@dataclass
class RunConfig:
    source: SourceSpec
    net: MlpConfig
    train: TrainConfig
    eval_n: int = 4000
    betas: tuple[float, ...] = ()
    output_dir: Path = Path(DEFAULT_OUTPUT_DIR)
    emit: frozenset[str] = frozenset({"csv"})
    rate_unit: str = "nats"
    seed: int = 0
    eval_langevin: Optional[LangevinConfig] = None
    probe_n_list: tuple[int, ...] = (100, 400, 1600)
    probe_repeats: int = 20
    raw: Dict[str, Any] = field(default_factory=dict, repr=False)

    @property
    def distortion(self) -> DistortionKind:
        return self.train.distortion

    @property
    def evaluation_langevin(self) -> LangevinConfig:
        return self.eval_langevin or self.train.langevin


def _table(data: Mapping[str, Any], key: str, prefix: str = "") -> Dict[str, Any]:
    value = data.get(key, {})
    if not isinstance(value, Mapping):
        raise ConfigError(f"{prefix}{key}", "expected a table")
    return dict(value)


def _check_keys(table: Mapping[str, Any], allowed: set, prefix: str) -> None:
    for key in table:
        if key not in allowed:
            raise ConfigError(f"{prefix}{key}", f"unknown key, expected one of {sorted(allowed)}")


def _convert(field_name: str, build: Callable[[], Any]) -> Any:
    try:
        return build()
    except (TypeError, ValueError) as e:
        raise ConfigError(field_name, str(e), cause=e) from e


def _langevin(table: Dict[str, Any], defaults: Dict[str, Any], prefix: str) -> LangevinConfig:
    _check_keys(table, LANGEVIN_KEYS, prefix)
    try:
        return LangevinConfig(steps=int(table.get("steps", defaults["steps"])),
                              step_size=float(table.get("step_size", defaults["step_size"])))
    except (TypeError, ValueError) as e:
        raise ConfigError(prefix.rstrip("."), str(e), cause=e) from e


def apply_overrides(data: Dict[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    """
    Merge CLI flag values into the raw config tree.

    Recognized keys: seed, output_dir, emit, betas, beta, iterations,
    eval_n, rate_unit. None values are ignored.
    """
    data = {k: (dict(v) if isinstance(v, Mapping) else v) for k, v in data.items()}
    for key, value in overrides.items():
        if value is None or (isinstance(value, (tuple, list)) and not value):
            continue
        if key in ("beta", "iterations"):
            data.setdefault("train", {})
            data["train"] = dict(data["train"])
            data["train"][key] = value
        else:
            data[key] = list(value) if isinstance(value, tuple) else value
    return data


def build_run_config(data: Mapping[str, Any], overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """Validate a parsed config tree (plus flag overrides) into a RunConfig; raises ConfigError."""
    data = apply_overrides(dict(data), overrides or {})
    _check_keys(data, TOP_KEYS, "")

    if "source" not in data:
        raise ConfigError("source", "missing required table [source]")
    source_table = _table(data, "source")
    try:
        source = SourceSpec.from_dict(source_table)
    except KeyError as e:
        raise ConfigError(f"source.{e.args[0]}", "missing required key", cause=e) from e
    except (TypeError, ValueError) as e:
        raise ConfigError("source", str(e), cause=e) from e
    _check_keys(source_table, SOURCE_KEYS[source.kind], "source.")
    scenario = SCENARIO_DEFAULTS[source.kind]

    net_table = _table(data, "net")
    _check_keys(net_table, NET_KEYS, "net.")
    try:
        net = MlpConfig(input_dim=source.dim,
                        hidden_widths=tuple(net_table.get("hidden_widths", (128, 128, 128))),
                        activation=net_table.get("activation", "softplus"),
                        param_seed=int(net_table.get("param_seed", 0)))
    except (TypeError, ValueError) as e:
        raise ConfigError("net", str(e), cause=e) from e
    if not net.hidden_widths:
        raise ConfigError("net.hidden_widths", "needs at least one hidden layer")

    try:
        seed = int(data.get("seed", 0))
    except (TypeError, ValueError) as e:
        raise ConfigError("seed", str(e), cause=e) from e

    train_table = _table(data, "train")
    _check_keys(train_table, TRAIN_KEYS, "train.")
    langevin = _langevin(_table(train_table, "langevin", "train."), scenario, "train.langevin.")
    try:
        train = TrainConfig(
            beta=float(train_table.get("beta", 1.0)),
            batch_size=int(train_table.get("batch_size", 256)),
            iterations=int(train_table.get("iterations", 2000)),
            learning_rate=float(train_table.get("learning_rate", 1e-3)),
            optimizer=OptimizerKind.from_name(train_table.get("optimizer", "adam")),
            langevin=langevin,
            seed=seed,
            distortion=DistortionKind.from_name(train_table.get("distortion", scenario["distortion"])),
            clip_norm=None if train_table.get("clip_norm") is None else float(train_table["clip_norm"]),
            early_stop=bool(train_table.get("early_stop", True)),
            stop_tolerance=float(train_table.get("stop_tolerance", 0.01)),
            stop_patience=int(train_table.get("stop_patience", 50)),
            log_every=int(train_table.get("log_every", 100)),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError("train", str(e), cause=e) from e

    eval_table = _table(data, "eval")
    _check_keys(eval_table, EVAL_KEYS, "eval.")
    eval_langevin = None
    if "langevin" in eval_table:
        eval_langevin = _langevin(_table(eval_table, "langevin", "eval."), scenario, "eval.langevin.")
    n_list = _convert("eval.n_list", lambda: tuple(int(n) for n in eval_table.get("n_list", (100, 400, 1600))))
    repeats = _convert("eval.repeats", lambda: int(eval_table.get("repeats", 20)))
    if repeats < 1:
        raise ConfigError("eval.repeats", f"must be >= 1, got {repeats}")

    betas = _convert("betas", lambda: tuple(float(b) for b in data.get("betas", scenario["betas"])))
    if not betas or any(not b > 0 for b in betas):
        raise ConfigError("betas", f"must be a non-empty list of positive values, got {list(betas)}")

    eval_n = _convert("eval_n", lambda: int(data.get("eval_n", 4000)))
    if eval_n < 1:
        raise ConfigError("eval_n", f"must be >= 1, got {eval_n}")

    emit = data.get("emit", ["csv"])
    emit = [emit] if isinstance(emit, str) else list(emit)
    bad = [e for e in emit if e not in EMIT_CHOICES]
    if bad:
        raise ConfigError("emit", f"unsupported output {bad}, expected a subset of {list(EMIT_CHOICES)}")

    rate_unit = str(data.get("rate_unit", "nats"))
    if rate_unit not in RATE_UNITS:
        raise ConfigError("rate_unit", f"expected one of {list(RATE_UNITS)}, got '{rate_unit}'")

    output_dir = Path(data.get("output_dir") or os.environ.get("EBRD_OUTPUT_DIR", DEFAULT_OUTPUT_DIR))
    return RunConfig(source=source, net=net, train=train, eval_n=eval_n, betas=betas,
                     output_dir=output_dir, emit=frozenset(emit), rate_unit=rate_unit, seed=seed,
                     eval_langevin=eval_langevin, probe_n_list=n_list, probe_repeats=repeats, raw=dict(data))


def read_config_file(path: str | Path) -> Dict[str, Any]:
    try:
        with open(path, "rb") as f:
            return tomllib.load(f)
    except FileNotFoundError as e:
        raise ConfigError("config", f"file not found: {path}", cause=e) from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError("config", f"invalid TOML in {path}: {e}", cause=e) from e


def load_run_config(path: str | Path, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    config = build_run_config(read_config_file(path), overrides)
    logger.debug(f"Loaded {config.source.kind.value} config from {path}")
    return config
