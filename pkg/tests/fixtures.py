"""Deterministic media fixtures shared by the test modules.

Images are crops of scikit-image's bundled photographs; audio clips are
synthesized so no data files are needed.
"""

from __future__ import annotations

import numpy as np
import skimage.data
from PIL import Image

from stegainr.inr import ModelSpec
from stegainr.media import audio_tensor, image_tensor

AUDIO_RATE = 8000
HIDE_KEY = 0x5EC12E7
IMAGE_SPEC = ModelSpec(2, 3, (256,) * 4)
AUDIO_SPEC = ModelSpec(1, 1, (256,) * 3, omega0_first=3000.0)


def natural_crop(name: str, size: int, offset=(0.5, 0.5)) -> np.ndarray:
    """``size`` x ``size`` uint8 RGB crop of a bundled photo.

    The photo is squared, box-downsampled to twice ``size`` and cropped at
    the relative ``offset`` (row, col).
    """
    im = Image.fromarray(getattr(skimage.data, name)())
    w, h = im.size
    s = min(w, h)
    left, top = (w - s) // 2, (h - s) // 2
    im = im.crop((left, top, left + s, top + s)).resize((2 * size, 2 * size), Image.BOX)
    oy, ox = int(size * offset[0]), int(size * offset[1])
    return np.asarray(im)[oy:oy + size, ox:ox + size].copy()


def image_pair(size: int):
    """(secret, cover) MediaTensors."""
    secret = image_tensor(natural_crop("astronaut", size, (0.2, 0.4)))
    cover = image_tensor(natural_crop("chelsea", size))
    return secret, cover


def gray_crop(size: int) -> np.ndarray:
    return np.asarray(Image.fromarray(natural_crop("coffee", size)).convert("L"))


def _pcm(x: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(x, -1, 1) * 32767).astype(np.int16)


def audio_pair(seconds: float = 1.0, rate: int = AUDIO_RATE):
    """(secret, cover) one-second PCM16 clips: a note sequence and a chirp over a drone."""
    t = np.arange(int(seconds * rate)) / rate
    notes = np.array([262, 330, 392, 523, 392, 330, 294, 262], dtype=float)
    f = notes[np.minimum((t * len(notes) / seconds).astype(int), len(notes) - 1)]
    phase = 2 * np.pi * np.cumsum(f) / rate
    env = 0.5 + 0.5 * np.cos(2 * np.pi * t * len(notes) / seconds)
    secret = 0.5 * env * (np.sin(phase) + 0.3 * np.sin(2 * phase))
    chirp_f = 150 + 600 * t / seconds
    cover = 0.4 * np.sin(2 * np.pi * np.cumsum(chirp_f) / rate) + 0.2 * np.sin(2 * np.pi * 110 * t)
    return audio_tensor(_pcm(secret), rate), audio_tensor(_pcm(cover), rate)
