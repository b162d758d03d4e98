# energy/mlp.py  –– fully-connected scalar energy network with hand-written reverse mode

import json
import logging
import numpy as np
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from scipy.special import expit

from distortion import DistortionKind, distortion, distortion_grad_y, distortion_grad_y_batch
from errors import DimensionMismatchError, NonFiniteInputError
from utils import atomic_write
from .base import EnergyFunction

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT_VERSION = 1


class Activation(Enum):
    """C^1 activations; ReLU is left out because Langevin consumes dE/dy."""
    Softplus = "softplus"
    Tanh = "tanh"
    Silu = "silu"

    @classmethod
    def from_name(cls, name: "str | Activation") -> "Activation":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            raise ValueError(f"unknown activation '{name}', expected one of {[a.value for a in cls]}") from None

    def __call__(self, z: np.ndarray) -> np.ndarray:
        if self is Activation.Softplus:
            return np.logaddexp(0.0, z)
        if self is Activation.Tanh:
            return np.tanh(z)
        return z * expit(z)

    def derivative(self, z: np.ndarray) -> np.ndarray:
        if self is Activation.Softplus:
            return expit(z)
        if self is Activation.Tanh:
            t = np.tanh(z)
            return 1.0 - t * t
        s = expit(z)
        return s * (1.0 + z * (1.0 - s))


@dataclass(frozen=True)
class MlpConfig:
    """
    Architecture of the energy network.

    ``hidden_widths`` may be empty, which gives a single affine layer
    E(y) = w.y + b; the CLI only builds networks with hidden layers.
    """
    input_dim: int
    hidden_widths: tuple[int, ...] = (128, 128, 128)
    activation: Activation = Activation.Softplus
    param_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        object.__setattr__(self, "activation", Activation.from_name(self.activation))
        if int(self.input_dim) < 1:
            raise ValueError(f"input_dim must be >= 1, got {self.input_dim}")
        if any(w < 1 for w in self.hidden_widths):
            raise ValueError(f"hidden widths must be positive, got {list(self.hidden_widths)}")

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        """(fan_out, fan_in) per affine layer, output layer last (fan_out 1)."""
        widths = [self.input_dim, *self.hidden_widths, 1]
        return [(widths[i + 1], widths[i]) for i in range(len(widths) - 1)]

    @property
    def param_count(self) -> int:
        return sum(out * inp + out for out, inp in self.layer_shapes)

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden_widths": list(self.hidden_widths),
            "activation": self.activation.value,
            "param_seed": self.param_seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MlpConfig":
        return cls(
            input_dim=int(data["input_dim"]),
            hidden_widths=tuple(data.get("hidden_widths", (128, 128, 128))),
            activation=Activation.from_name(data.get("activation", "softplus")),
            param_seed=int(data.get("param_seed", 0)),
        )


@dataclass(eq=False)
class ParamVector:
    """
    Flat float64 vector of all weights and biases.

    Layout: for each layer in order, the weight matrix (fan_out x fan_in,
    row-major) followed by its bias vector.
    """
    config: MlpConfig
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if self.values.shape[0] != self.config.param_count:
            raise ValueError(f"expected {self.config.param_count} parameters, got {self.values.shape[0]}")

    def __len__(self) -> int:
        return self.values.shape[0]

    def unpack(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Split into [(W, b), ...]; the arrays are views into ``values``."""
        layers = []
        offset = 0
        for out, inp in self.config.layer_shapes:
            w = self.values[offset:offset + out * inp].reshape(out, inp)
            offset += out * inp
            b = self.values[offset:offset + out]
            offset += out
            layers.append((w, b))
        return layers

    @classmethod
    def pack(cls, config: MlpConfig, layers: list[tuple[np.ndarray, np.ndarray]]) -> "ParamVector":
        parts = []
        for (out, inp), (w, b) in zip(config.layer_shapes, layers, strict=True):
            parts.append(np.asarray(w, dtype=np.float64).reshape(out * inp))
            parts.append(np.asarray(b, dtype=np.float64).reshape(out))
        return cls(config, np.concatenate(parts))

    @classmethod
    def zeros(cls, config: MlpConfig) -> "ParamVector":
        return cls(config, np.zeros(config.param_count))

    def copy(self) -> "ParamVector":
        return ParamVector(self.config, self.values.copy())

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


def init_params(config: MlpConfig) -> ParamVector:
    """Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases, seeded by param_seed."""
    rng = np.random.default_rng(config.param_seed)
    layers = []
    for out, inp in config.layer_shapes:
        limit = np.sqrt(6.0 / (inp + out))
        layers.append((rng.uniform(-limit, limit, size=(out, inp)), np.zeros(out)))
    return ParamVector.pack(config, layers)


class EnergyNet(EnergyFunction):
    """
    MLP energy E_theta(y) with exact gradients w.r.t. y and theta.

    Evaluation never mutates the parameters, so one snapshot can serve many
    concurrent callers; trainers swap in a new ParamVector between phases.

    Attributes
    ----------
    config : MlpConfig
        Architecture.
    params : ParamVector
        Current parameter snapshot.
    """

    def __init__(self, config: MlpConfig, params: ParamVector | None = None):
        self.config = config
        self.params = params if params is not None else init_params(config)
        if self.params.config != config:
            raise ValueError("parameter layout does not match the network config")
        self.input_dim = config.input_dim

    def with_params(self, params: ParamVector) -> "EnergyNet":
        return EnergyNet(self.config, params)

    def _check_batch(self, ys) -> np.ndarray:
        ys = np.asarray(ys, dtype=np.float64)
        if ys.ndim == 1:
            ys = ys.reshape(1, -1)
        if ys.shape[1] != self.input_dim:
            raise DimensionMismatchError(self.input_dim, ys.shape[1])
        if not np.all(np.isfinite(ys)):
            raise NonFiniteInputError("energy input contains NaN or inf")
        return ys

    def _forward(self, ys: np.ndarray):
        act = self.config.activation
        layers = self.params.unpack()
        pre_acts = []
        a = ys
        acts = [a]
        for w, b in layers[:-1]:
            z = a @ w.T + b
            a = act(z)
            pre_acts.append(z)
            acts.append(a)
        w_out, b_out = layers[-1]
        energies = (a @ w_out.T + b_out)[:, 0]
        return energies, pre_acts, acts, layers

    def energy_batch(self, ys: np.ndarray) -> np.ndarray:
        ys = self._check_batch(ys)
        return self._forward(ys)[0]

    def backward(self, ys: np.ndarray, weights: np.ndarray | None = None, need_params: bool = True):
        """
        One forward and one backward pass over a batch.

        Parameters
        ----------
        ys : np.ndarray, shape (n, d)
            Evaluation points.
        weights : np.ndarray, shape (n,), optional
            Per-row weights w_i; defaults to ones.
        need_params : bool
            Skip the parameter-gradient accumulation when False.

        Returns
        -------
        energies : np.ndarray, shape (n,)
        grad_inputs : np.ndarray, shape (n, d)
            w_i * dE/dy at each row.
        grad_params : ParamVector or None
            sum_i w_i * dE(y_i)/dtheta.
        """
        ys = self._check_batch(ys)
        n = ys.shape[0]
        w_rows = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64).reshape(n)
        energies, pre_acts, acts, layers = self._forward(ys)
        act = self.config.activation

        delta = w_rows[:, None]  # dE/dz of the output layer
        grads = [None] * len(layers)
        for idx in range(len(layers) - 1, -1, -1):
            w, _ = layers[idx]
            if need_params:
                grads[idx] = (delta.T @ acts[idx], delta.sum(axis=0))
            upstream = delta @ w
            if idx > 0:
                delta = upstream * act.derivative(pre_acts[idx - 1])
            else:
                grad_inputs = upstream
        grad_params = ParamVector.pack(self.config, grads) if need_params else None
        return energies, grad_inputs, grad_params

    def grad_input_batch(self, ys: np.ndarray) -> np.ndarray:
        return self.backward(ys, need_params=False)[1]

    def mean_grad_params(self, ys: np.ndarray) -> ParamVector:
        """(1/n) sum_i dE(y_i)/dtheta."""
        ys = self._check_batch(ys)
        n = ys.shape[0]
        return self.backward(ys, weights=np.full(n, 1.0 / n))[2]


def _single(net: EnergyNet, y) -> np.ndarray:
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if y.ndim != 1 or y.shape[0] != net.input_dim:
        raise DimensionMismatchError(net.input_dim, y.shape[-1])
    return y.reshape(1, -1)


def energy(net: EnergyNet, y) -> float:
    """E_theta(y) at one point."""
    return float(net.energy_batch(_single(net, y))[0])


def grad_input(net: EnergyNet, y) -> np.ndarray:
    """dE_theta/dy at one point."""
    return net.grad_input_batch(_single(net, y))[0]


def grad_params(net: EnergyNet, y) -> ParamVector:
    """dE_theta(y)/dtheta in ParamVector layout."""
    return net.backward(_single(net, y))[2]


def conditional_energy(net: EnergyNet, x, y, beta: float, rho: DistortionKind) -> float:
    """E'(x, y) = E_theta(y) + beta * rho(x, y)."""
    _single(net, x)
    return energy(net, y) + beta * distortion(rho, x, y)


def conditional_grad_input(net: EnergyNet, x, y, beta: float, rho: DistortionKind) -> np.ndarray:
    """dE'(x, y)/dy = dE_theta/dy + beta * drho/dy."""
    _single(net, x)
    return grad_input(net, y) + beta * distortion_grad_y(rho, x, y)


def conditional_grad_input_batch(net: EnergyFunction, xs: np.ndarray, ys: np.ndarray,
                                 beta: float, rho: DistortionKind) -> np.ndarray:
    """Row-wise conditional_grad_input for (n, d) batches."""
    grad = net.grad_input_batch(ys)
    if beta == 0.0:
        return grad
    return grad + beta * distortion_grad_y_batch(rho, xs, ys)


def save_checkpoint(net: EnergyNet, path: str | Path) -> Path:
    """
    Write an .npz holding the JSON config header and the float64 parameters.

    The round trip through load_checkpoint is bit-exact.
    """
    header = json.dumps({"format_version": CHECKPOINT_FORMAT_VERSION, "config": net.config.to_dict()}, sort_keys=True)
    with atomic_write(path, "wb") as f:
        np.savez(f, header=np.array(header), params=net.params.values.astype(np.float64))
    logger.info(f"Saved checkpoint ({net.config.param_count} params) to {path}")
    return Path(path)


def load_checkpoint(path: str | Path) -> EnergyNet:
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        values = np.array(data["params"], dtype=np.float64)
    version = header.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format version {version} in {path}")
    config = MlpConfig.from_dict(header["config"])
    return EnergyNet(config, ParamVector(config, values))
