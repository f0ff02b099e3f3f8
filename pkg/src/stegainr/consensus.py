"""Keyed initialisation and stega-mask construction.

Sender and receiver never exchange the mask. Both rebuild the keyed initial
weights and mark the largest-magnitude fraction of them, so equal keys give
equal masks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .inr import ModelSpec, ParamSet
from .rng import MASK64, KeyStream


class Scope(str, Enum):
    GLOBAL = "global"
    PER_LAYER = "per_layer"

    @classmethod
    def parse(cls, value) -> "Scope":
        if isinstance(value, Scope):
            return value
        return cls(str(value).replace("-", "_"))


def check_key(key) -> int:
    key = int(key)
    if not 0 <= key <= MASK64:
        raise ValueError(f"key must fit in an unsigned 64-bit integer, got {key}")
    return key


def init_params(spec: ModelSpec, key: int) -> ParamSet:
    """SIREN-style initialisation drawn from the key stream in layout order."""
    stream = KeyStream(check_key(key))
    params = ParamSet(spec)
    for layer, ((w_sl, b_sl), (fan_out, fan_in)) in enumerate(
            zip(spec.param_slices(), spec.layer_shapes)):
        if layer == 0:
            bound = 1.0 / fan_in
        else:
            bound = math.sqrt(6.0 / fan_in) / spec.omega0_hidden
        params.data[w_sl] = stream.uniform_range(-bound, bound, fan_out * fan_in)
        bb = 1.0 / math.sqrt(fan_in)
        params.data[b_sl] = stream.uniform_range(-bb, bb, fan_out)
    return params


def top_k_mask(scores: np.ndarray, k: int) -> np.ndarray:
    """Boolean mask of the ``k`` largest scores; ties go to the lower index.

    Runs in linear time: the k-th largest value is found by partitioning,
    everything strictly above it is taken, and the remaining slots are
    filled from the tied entries in index order.
    """
    scores = np.asarray(scores)
    n = scores.size
    if not 0 <= k <= n:
        raise ValueError(f"k={k} outside [0, {n}]")
    out = np.zeros(n, dtype=bool)
    if k == 0:
        return out
    if k == n:
        out[:] = True
        return out
    threshold = np.partition(scores, n - k)[n - k]
    out[scores > threshold] = True
    ties = np.flatnonzero(scores == threshold)
    out[ties[: k - int(np.count_nonzero(out))]] = True
    return out


@dataclass(frozen=True)
class StegaMask:
    bits: np.ndarray  # bool, length n_weights
    ratio: float
    scope: Scope

    @property
    def selected_count(self) -> int:
        return int(self.bits.sum())

    @property
    def complement(self) -> np.ndarray:
        return ~self.bits

    def __eq__(self, other):
        return (isinstance(other, StegaMask) and self.ratio == other.ratio
                and self.scope == other.scope and np.array_equal(self.bits, other.bits))


def check_ratio(ratio) -> float:
    ratio = float(ratio)
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"stega ratio must lie in [0, 1], got {ratio}")
    return ratio


def mask_from_weights(spec: ModelSpec, flat_weights: np.ndarray, ratio: float,
                      scope=Scope.GLOBAL) -> StegaMask:
    ratio = check_ratio(ratio)
    scope = Scope.parse(scope)
    magnitude = np.abs(flat_weights)
    if scope is Scope.GLOBAL:
        bits = top_k_mask(magnitude, math.floor(ratio * spec.n_weights))
    else:
        bits = np.zeros(spec.n_weights, dtype=bool)
        for sl in spec.weight_slices():
            bits[sl] = top_k_mask(magnitude[sl], math.floor(ratio * (sl.stop - sl.start)))
    return StegaMask(bits, ratio, scope)


def make_mask(spec: ModelSpec, key: int, ratio: float, scope=Scope.GLOBAL) -> StegaMask:
    """Mark the top ``floor(ratio * n_weights)`` keyed-init weights by magnitude."""
    ratio = check_ratio(ratio)
    return mask_from_weights(spec, init_params(spec, key).flat_weights(), ratio, scope)
