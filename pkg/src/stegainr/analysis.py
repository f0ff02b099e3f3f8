"""Pruning attacks, stega-ratio sweeps and weight-magnitude diagnostics."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .consensus import top_k_mask
from .inr import ModelSpec, ParamSet
from .media import MediaTensor
from .pipeline import HideConfig, hide
from .rng import KeyStream

SWEEP_HEADER = ("ratio", "stega_psnr_db", "secret_psnr_db")


def _prune_count(params: ParamSet, q: float) -> int:
    q = float(q)
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"pruning fraction must lie in [0, 1], got {q}")
    return math.floor(q * params.spec.n_weights)


def _zero_weights(params: ParamSet, chosen: np.ndarray) -> ParamSet:
    out = params.copy()
    out.data[params.spec.weight_positions()[chosen]] = 0.0
    return out


def prune_random(params: ParamSet, q: float, seed: int) -> ParamSet:
    """Zero exactly ``floor(q * n_weights)`` weights picked uniformly by the seeded stream.

    Each weight gets a uniform draw; the smallest draws are pruned.
    """
    k = _prune_count(params, q)
    if k == 0:
        return params.copy()
    draws = KeyStream(seed).uniform(params.spec.n_weights)
    return _zero_weights(params, top_k_mask(-draws, k))


def prune_magnitude(params: ParamSet, q: float) -> ParamSet:
    """Zero the ``floor(q * n_weights)`` smallest-magnitude weights (lower index first on ties)."""
    k = _prune_count(params, q)
    if k == 0:
        return params.copy()
    return _zero_weights(params, top_k_mask(-np.abs(params.flat_weights()), k))


@dataclass
class SweepRow:
    ratio: float
    stega_psnr_db: float
    secret_psnr_db: float


def ratio_sweep(secret: MediaTensor, cover: MediaTensor, spec: ModelSpec,
                base: HideConfig, ratios: Iterable[float]) -> list[SweepRow]:
    """Run :func:`hide` once per ratio with otherwise identical settings."""
    rows = []
    for r in sorted(float(r) for r in ratios):
        if not 0.0 < r < 1.0:
            raise ValueError(f"sweep ratios must lie in (0, 1), got {r}")
        _, report = hide(secret, cover, spec, replace(base, ratio=r))
        rows.append(SweepRow(r, report.stega_psnr_db, report.secret_psnr_db))
    return rows


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for row in rows:
        w.writerow([repr(row.ratio), f"{row.stega_psnr_db:.6f}", f"{row.secret_psnr_db:.6f}"])
    return buf.getvalue()


def default_bins(n_bins: int = 41, limit: float = 0.1) -> np.ndarray:
    """``n_bins`` equal bins over [-limit, limit] plus two open outlier bins.

    An odd count puts zero in the middle of a bin.
    """
    inner = np.linspace(-limit, limit, n_bins + 1)
    return np.concatenate([[-np.inf], inner, [np.inf]])


@dataclass
class WeightHistogram:
    edges: np.ndarray
    counts: np.ndarray
    secret_counts: Optional[np.ndarray] = None
    cover_counts: Optional[np.ndarray] = None
    secret_mean_abs: Optional[float] = None
    cover_mean_abs: Optional[float] = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        split = self.secret_counts is not None
        w.writerow(["bin_lo", "bin_hi", "count"] + (["secret", "cover"] if split else []))
        for i in range(len(self.counts)):
            row = [repr(float(self.edges[i])), repr(float(self.edges[i + 1])), int(self.counts[i])]
            if split:
                row += [int(self.secret_counts[i]), int(self.cover_counts[i])]
            w.writerow(row)
        return buf.getvalue()


def _count(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    # half-open bins [lo, hi); the last bin also holds +inf edge values
    idx = np.searchsorted(edges, values, side="right") - 1
    idx = np.clip(idx, 0, len(edges) - 2)
    return np.bincount(idx, minlength=len(edges) - 1)


def weight_histogram(params: ParamSet, mask: Optional[np.ndarray] = None,
                     edges: Optional[np.ndarray] = None) -> WeightHistogram:
    """Histogram of weight values, optionally split into secret (mask) and cover."""
    edges = default_bins() if edges is None else np.asarray(edges, dtype=np.float64)
    w = params.flat_weights()
    hist = WeightHistogram(edges, _count(w, edges))
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != w.shape:
            raise ValueError("mask length does not match the weight count")
        hist.secret_counts = _count(w[mask], edges)
        hist.cover_counts = _count(w[~mask], edges)
        if mask.any():
            hist.secret_mean_abs = float(np.abs(w[mask]).mean())
        if (~mask).any():
            hist.cover_mean_abs = float(np.abs(w[~mask]).mean())
    return hist
