"""Hide a secret medium inside the INR of a cover medium, render, and reveal.

Hiding runs in two phases over one network:

1. The keyed mask selects the secret weights. They are trained, together
   with every bias, on the secret while all other weights are held at zero
   in the forward pass.
2. Secret weights and biases are frozen; the remaining weights start from
   their keyed initial values and are trained on the cover with the full
   network active.

Anyone can render the cover. Holding the key, ratio and scope rebuilds the
mask, and evaluating only the masked weights returns the phase-1 secret
exactly.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import persistence
from .consensus import Scope, StegaMask, check_key, check_ratio, init_params, make_mask, mask_from_weights
from .inr import FitResult, ModelSpec, ParamSet, TrainConfig, fit, forward
from .media import MediaTensor
from .metrics import psnr

log = logging.getLogger(__name__)


@dataclass
class HideConfig:
    key: int
    ratio: float = 0.3
    scope: Scope = Scope.GLOBAL
    secret_train: TrainConfig = field(default_factory=TrainConfig)
    cover_train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        self.key = check_key(self.key)
        self.ratio = check_ratio(self.ratio)
        self.scope = Scope.parse(self.scope)

    @property
    def degenerate(self) -> bool:
        return self.ratio in (0.0, 1.0)


@dataclass
class StegaModel:
    spec: ModelSpec
    params: ParamSet

    def save(self, path) -> None:
        persistence.save_model(path, self.spec, self.params)

    @classmethod
    def load(cls, path) -> "StegaModel":
        return cls(*persistence.load_model(path))

    def to_bytes(self) -> bytes:
        return persistence.dumps(self.spec, self.params)


@dataclass
class HideReport:
    secret_losses: list[float]
    cover_losses: list[float]
    secret_final_loss: float
    cover_final_loss: float
    secret_psnr_db: float
    stega_psnr_db: float
    selected_count: int
    # End-of-phase-1 state, kept only in memory for verification.
    secret_params: ParamSet = field(repr=False)
    secret_reconstruction: np.ndarray = field(repr=False)

    def lines(self) -> list[str]:
        return [
            f"selected_weights={self.selected_count}",
            f"secret_steps={len(self.secret_losses)}",
            f"secret_final_loss={self.secret_final_loss:.6e}",
            f"secret_psnr_db={self.secret_psnr_db:.4f}",
            f"cover_steps={len(self.cover_losses)}",
            f"cover_final_loss={self.cover_final_loss:.6e}",
            f"stega_psnr_db={self.stega_psnr_db:.4f}",
        ]


def _check_media(media: MediaTensor, spec: ModelSpec, role: str) -> None:
    if media.coords.shape[1] != spec.in_dim or media.channels != spec.out_dim:
        raise ValueError(
            f"{role} ({media.modality}, in={media.coords.shape[1]}, channels={media.channels}) "
            f"does not fit architecture {spec}")


def secret_trainable(spec: ModelSpec, mask: StegaMask) -> np.ndarray:
    """Phase-1 trainable set over all parameters: masked weights plus every bias."""
    trainable = np.ones(spec.n_params, dtype=bool)
    trainable[spec.weight_positions()] = mask.bits
    return trainable


def cover_trainable(spec: ModelSpec, mask: StegaMask) -> np.ndarray:
    """Phase-2 trainable set: unmasked weights only."""
    trainable = np.zeros(spec.n_params, dtype=bool)
    trainable[spec.weight_positions()] = ~mask.bits
    return trainable


def hide(secret: MediaTensor, cover: MediaTensor, spec: ModelSpec,
         cfg: HideConfig) -> tuple[StegaModel, HideReport]:
    _check_media(secret, spec, "secret")
    _check_media(cover, spec, "cover")
    if cfg.ratio == 0.0:
        warnings.warn("stega ratio 0 leaves no weights for the secret", stacklevel=2)
    elif cfg.ratio == 1.0:
        warnings.warn("stega ratio 1 leaves no weights for the cover", stacklevel=2)

    params = init_params(spec, cfg.key)
    mask = mask_from_weights(spec, params.flat_weights(), cfg.ratio, cfg.scope)
    log.info("mask selects %d of %d weights", mask.selected_count, spec.n_weights)

    if mask.selected_count == 0:
        # Nothing to hide: the biases go to the cover and the result is a plain cover fit.
        phase1 = FitResult(params.copy(), [], float("nan"))
        phase2_trainable = None
    else:
        phase1 = fit(spec, params, secret.coords, secret.values, cfg.secret_train,
                     trainable_mask=secret_trainable(spec, mask), effective_mask=mask.bits)
        phase2_trainable = cover_trainable(spec, mask)
    secret_recon = forward(spec, phase1.params, secret.coords, mask.bits)

    phase2 = fit(spec, phase1.params, cover.coords, cover.values, cfg.cover_train,
                 trainable_mask=phase2_trainable)
    stega = forward(spec, phase2.params, cover.coords)

    report = HideReport(
        secret_losses=phase1.losses,
        cover_losses=phase2.losses,
        secret_final_loss=phase1.final_loss,
        cover_final_loss=phase2.final_loss,
        secret_psnr_db=psnr(secret, secret.with_values(secret_recon)),
        stega_psnr_db=psnr(cover, cover.with_values(stega)),
        selected_count=mask.selected_count,
        secret_params=phase1.params,
        secret_reconstruction=secret_recon,
    )
    return StegaModel(spec, phase2.params), report


def _evaluate(model: StegaModel, grid, effective_mask):
    if isinstance(grid, MediaTensor):
        if grid.coords.shape[1] != model.spec.in_dim:
            raise ValueError(f"grid is {grid.coords.shape[1]}-D, model expects {model.spec.in_dim}-D")
        out = forward(model.spec, model.params, grid.coords, effective_mask)
        shape = grid.shape[:-1] + (model.spec.out_dim,)
        return MediaTensor(grid.modality, shape, grid.coords, out,
                           grid.source_range, grid.sample_rate)
    return forward(model.spec, model.params, grid, effective_mask)


def render(model: StegaModel, grid):
    """Plain inference with every weight active; what a keyless user sees.

    ``grid`` is a MediaTensor template (its values are ignored) or an array
    of coordinates.
    """
    return _evaluate(model, grid, None)


def reveal(model: StegaModel, key: int, ratio: float, scope, grid):
    """Rebuild the keyed mask and evaluate only the weights it selects."""
    mask = make_mask(model.spec, key, ratio, scope)
    return _evaluate(model, grid, mask.bits)


def fit_plain(media: MediaTensor, spec: ModelSpec, key: int, cfg: TrainConfig) -> StegaModel:
    """Ordinary full-parameter fit from the keyed initialisation."""
    _check_media(media, spec, "media")
    result = fit(spec, init_params(spec, key), media.coords, media.values, cfg)
    return StegaModel(spec, result.params)
