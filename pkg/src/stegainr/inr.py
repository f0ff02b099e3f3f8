"""Sine-activated coordinate MLP: forward pass, analytic gradients, Adam, fitting.

Everything runs in float64 on flat parameter vectors. A parameter vector is
laid out layer by layer, each layer contributing its weight matrix (out x in,
row-major) followed by its bias vector. Weights alone form a second index
space ``[0, n_weights)`` used by stega masks and pruning.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import torch

log = logging.getLogger(__name__)

FULL_BATCH_LIMIT = 2**16
ACTIVATIONS = {"sine": 0}


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int, loss: float):
        super().__init__(f"loss became non-finite ({loss}) at step {step}")
        self.step = step
        self.loss = loss


@dataclass(frozen=True)
class ModelSpec:
    in_dim: int
    out_dim: int
    hidden_widths: tuple[int, ...]
    omega0_first: float = 30.0
    omega0_hidden: float = 30.0
    activation: str = "sine"

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError("in_dim and out_dim must be >= 1")
        if not self.hidden_widths or min(self.hidden_widths) < 1:
            raise ValueError("need at least one hidden layer, all widths >= 1")
        if not (self.omega0_first > 0 and self.omega0_hidden > 0):
            raise ValueError("omega0 values must be positive")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unsupported activation {self.activation!r}")

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        """(out, in) for every affine layer, input to output."""
        dims = [self.in_dim, *self.hidden_widths, self.out_dim]
        return [(dims[i + 1], dims[i]) for i in range(len(dims) - 1)]

    @property
    def n_layers(self) -> int:
        return len(self.hidden_widths) + 1

    @property
    def n_weights(self) -> int:
        return sum(o * i for o, i in self.layer_shapes)

    @property
    def n_biases(self) -> int:
        return sum(o for o, _ in self.layer_shapes)

    @property
    def n_params(self) -> int:
        return self.n_weights + self.n_biases

    def omega(self, layer: int) -> float:
        return self.omega0_first if layer == 0 else self.omega0_hidden

    def weight_slices(self) -> list[slice]:
        """Per-layer slices into the weights-only index space."""
        out, pos = [], 0
        for o, i in self.layer_shapes:
            out.append(slice(pos, pos + o * i))
            pos += o * i
        return out

    def param_slices(self) -> list[tuple[slice, slice]]:
        """Per-layer (weight, bias) slices into the flat parameter vector."""
        out, pos = [], 0
        for o, i in self.layer_shapes:
            w = slice(pos, pos + o * i)
            b = slice(w.stop, w.stop + o)
            out.append((w, b))
            pos = b.stop
        return out

    def weight_positions(self) -> np.ndarray:
        """Flat-parameter index of every entry of the weights-only index space."""
        return np.concatenate([np.arange(w.start, w.stop) for w, _ in self.param_slices()])

    def __str__(self) -> str:
        widths = ",".join(str(w) for w in self.hidden_widths)
        return f"{self.in_dim}-{widths}-{self.out_dim}"


def parse_arch(text: str, **omegas) -> ModelSpec:
    """Parse ``IN-WIDTHxDEPTH-OUT`` (e.g. ``2-256x4-3``) or ``IN-W1,W2-OUT``."""
    try:
        a, mid, b = text.split("-")
        if "x" in mid:
            width, depth = mid.split("x")
            widths = [int(width)] * int(depth)
        else:
            widths = [int(w) for w in mid.split(",")]
        return ModelSpec(int(a), int(b), tuple(widths), **omegas)
    except ValueError as exc:
        raise ValueError(f"bad architecture {text!r}: {exc}") from None


class ParamSet:
    """Flat float64 parameter vector with per-layer views."""

    def __init__(self, spec: ModelSpec, data: Optional[np.ndarray] = None):
        self.spec = spec
        if data is None:
            data = np.zeros(spec.n_params)
        data = np.asarray(data, dtype=np.float64)
        if data.shape != (spec.n_params,):
            raise ValueError(f"expected {spec.n_params} parameters, got shape {data.shape}")
        self.data = data

    @property
    def weights(self) -> list[np.ndarray]:
        return [self.data[w].reshape(shape) for (w, _), shape in
                zip(self.spec.param_slices(), self.spec.layer_shapes)]

    @property
    def biases(self) -> list[np.ndarray]:
        return [self.data[b] for _, b in self.spec.param_slices()]

    def flat_weights(self) -> np.ndarray:
        return np.concatenate([self.data[w] for w, _ in self.spec.param_slices()])

    def with_flat_weights(self, flat: np.ndarray) -> "ParamSet":
        out = self.copy()
        start = 0
        for w, _ in self.spec.param_slices():
            out.data[w] = flat[start:start + w.stop - w.start]
            start += w.stop - w.start
        return out

    def copy(self) -> "ParamSet":
        return ParamSet(self.spec, self.data.copy())

    def __eq__(self, other) -> bool:
        return (isinstance(other, ParamSet) and self.spec == other.spec
                and np.array_equal(self.data, other.data))

    def __repr__(self) -> str:
        return f"ParamSet({self.spec}, n={self.data.size})"


# Gradients share the parameter layout.
Gradients = ParamSet


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    steps: int = 2000
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    batch: Optional[int] = None  # None: full batch up to FULL_BATCH_LIMIT coords
    sampler_seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")


def _effective_weights(spec: ModelSpec, params: ParamSet, mask: Optional[np.ndarray]):
    weights = params.weights
    if mask is None:
        return weights, None
    mask = np.asarray(mask)
    if mask.shape != (spec.n_weights,):
        raise ValueError(f"mask length {mask.shape} does not match {spec.n_weights} weights")
    m = [mask[s].reshape(shape).astype(np.float64)
         for s, shape in zip(spec.weight_slices(), spec.layer_shapes)]
    return [w * mi for w, mi in zip(weights, m)], m


def _check_coords(spec: ModelSpec, coords) -> np.ndarray:
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim == 1 and spec.in_dim == 1:
        coords = coords[:, None]
    if coords.ndim != 2 or coords.shape[1] != spec.in_dim:
        raise ValueError(f"coords of shape {coords.shape} do not match in_dim={spec.in_dim}")
    return coords


# torch's vectorized float64 sin/cos are several times faster than numpy's;
# they run on zero-copy views, matmuls stay in numpy.
def _sin(x: np.ndarray) -> np.ndarray:
    return torch.sin(torch.from_numpy(x)).numpy()


def _cos_(x: np.ndarray) -> np.ndarray:
    """In-place cosine."""
    t = torch.from_numpy(x)
    torch.cos(t, out=t)
    return x


def _forward_cached(spec, weights, biases, x):
    """Returns output plus (layer inputs, scaled pre-activations) for backprop."""
    inputs, phases = [], []
    a = x
    for layer in range(spec.n_layers - 1):
        inputs.append(a)
        s = a @ weights[layer].T
        s += biases[layer]
        s *= spec.omega(layer)
        phases.append(s)
        a = _sin(s)
    inputs.append(a)
    y = a @ weights[-1].T
    y += biases[-1]
    return y, inputs, phases


def forward(spec: ModelSpec, params: ParamSet, coords, effective_mask=None) -> np.ndarray:
    """Evaluate the network at ``coords`` (N x in_dim) -> (N x out_dim).

    With ``effective_mask`` (length ``n_weights``) every weight is multiplied
    by its mask entry first; biases are never masked.
    """
    x = _check_coords(spec, coords)
    weights, _ = _effective_weights(spec, params, effective_mask)
    return _forward_cached(spec, weights, params.biases, x)[0]


def loss_mse(pred, target) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    if pred.size == 0:
        raise ValueError("empty batch")
    return float(np.mean((target - pred) ** 2))


def _backward(spec, params, x, targets, effective_mask):
    weights, masks = _effective_weights(spec, params, effective_mask)
    y, inputs, phases = _forward_cached(spec, weights, params.biases, x)
    resid = y - targets
    loss = float(np.mean(resid * resid))

    grads = ParamSet(spec)
    gw, gb = grads.weights, grads.biases
    delta = resid * (2.0 / resid.size)
    for layer in reversed(range(spec.n_layers)):
        if layer < spec.n_layers - 1:
            d = _cos_(phases[layer])
            d *= spec.omega(layer)
            d *= delta
            delta = d
        np.matmul(delta.T, inputs[layer], out=gw[layer])
        gb[layer][:] = delta.sum(axis=0)
        if masks is not None:
            gw[layer] *= masks[layer]
        if layer > 0:
            delta = delta @ weights[layer]
    return grads, loss


def backward(spec: ModelSpec, params: ParamSet, coords, targets, effective_mask=None) -> Gradients:
    """Gradient of ``loss_mse(forward(...), targets)`` w.r.t. every parameter."""
    x = _check_coords(spec, coords)
    targets = np.asarray(targets, dtype=np.float64).reshape(len(x), -1)
    if targets.shape != (len(x), spec.out_dim):
        raise ValueError(f"targets of shape {targets.shape} do not match coords/out_dim")
    return _backward(spec, params, x, targets, effective_mask)[0]


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n))


def adam_step(params: ParamSet, grads: Gradients, state: AdamState, cfg: TrainConfig,
              trainable_mask=None) -> tuple[ParamSet, AdamState]:
    """One Adam update restricted to ``trainable_mask`` (bool over all params).

    Parameters outside the mask, and their moment estimates, are not touched.
    The params and state are updated in place and also returned.
    """
    g = grads.data
    if trainable_mask is None:
        idx = slice(None)
    else:
        trainable_mask = np.asarray(trainable_mask, dtype=bool)
        if trainable_mask.shape != params.data.shape:
            raise ValueError("trainable_mask must cover every parameter")
        idx = np.flatnonzero(trainable_mask)
    g = g[idx]
    if not np.all(np.isfinite(g)):
        bad = np.flatnonzero(~np.isfinite(grads.data))
        raise FloatingPointError(f"non-finite gradient at parameter {bad[0]} "
                                 f"({bad.size} entries) on step {state.step + 1}")
    state.step += 1
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    m = b1 * state.m[idx] + (1.0 - b1) * g
    v = b2 * state.v[idx] + (1.0 - b2) * (g * g)
    state.m[idx] = m
    state.v[idx] = v
    m_hat = m / (1.0 - b1 ** state.step)
    v_hat = v / (1.0 - b2 ** state.step)
    params.data[idx] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_epsilon)
    return params, state


@dataclass
class FitResult:
    params: ParamSet
    losses: list[float] = field(default_factory=list)  # pre-update batch loss per step
    final_loss: float = math.nan


def fit(spec: ModelSpec, params: ParamSet, coords, values, cfg: TrainConfig,
        trainable_mask=None, effective_mask=None) -> FitResult:
    """Minimise the MSE of the (optionally masked) network against ``values``.

    ``params`` is not modified; a trained copy is returned.
    """
    x = _check_coords(spec, coords)
    y = np.asarray(values, dtype=np.float64).reshape(len(x), -1)
    if len(x) == 0:
        raise ValueError("empty dataset")
    if y.shape[1] != spec.out_dim:
        raise ValueError(f"values have {y.shape[1]} channels, model outputs {spec.out_dim}")

    params = params.copy()
    state = AdamState.zeros(spec.n_params)
    batch = cfg.batch
    if batch is None and len(x) > FULL_BATCH_LIMIT:
        batch = FULL_BATCH_LIMIT
    sampler = np.random.default_rng(cfg.sampler_seed) if batch and batch < len(x) else None

    losses = []
    for step in range(cfg.steps):
        if sampler is not None:
            pick = sampler.choice(len(x), size=batch, replace=False)
            grads, loss = _backward(spec, params, x[pick], y[pick], effective_mask)
        else:
            grads, loss = _backward(spec, params, x, y, effective_mask)
        if not math.isfinite(loss):
            raise TrainingDiverged(step, loss)
        losses.append(loss)
        adam_step(params, grads, state, cfg, trainable_mask)
        if log.isEnabledFor(logging.DEBUG) and step % 100 == 0:
            log.debug("step %d loss %.6g", step, loss)

    final = loss_mse(forward(spec, params, x, effective_mask), y)
    if not math.isfinite(final):
        raise TrainingDiverged(cfg.steps, final)
    return FitResult(params, losses, final)
