"""Hide one medium inside the weights of a sine-activated INR of another."""

from .consensus import Scope, StegaMask, init_params, make_mask
from .inr import ModelSpec, ParamSet, TrainConfig, backward, fit, forward, loss_mse, parse_arch
from .media import MediaTensor, grid_for, load_audio, load_image, load_video
from .pipeline import HideConfig, HideReport, StegaModel, fit_plain, hide, render, reveal

__version__ = "0.1.0"
