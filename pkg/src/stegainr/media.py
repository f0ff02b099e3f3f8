"""Media <-> normalized coordinate/value datasets.

Coordinates and values both live in [-1, 1]. Images are enumerated row-major
(y outer, x inner), videos frame-major on top of that.
"""

from __future__ import annotations

import re
import wave
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

IMAGE, AUDIO, VIDEO = "image", "audio", "video"
MODALITIES = (IMAGE, AUDIO, VIDEO)
IN_DIMS = {AUDIO: 1, IMAGE: 2, VIDEO: 3}
PCM_SCALE = 32767.0
_FRAME_NAME = re.compile(r"^(\d+)\.png$", re.IGNORECASE)


class MediaFormatError(ValueError):
    pass


@dataclass
class MediaTensor:
    modality: str
    shape: tuple[int, ...]  # (H, W, C) | (T, 1) | (F, H, W, C)
    coords: np.ndarray  # (N, in_dim)
    values: np.ndarray  # (N, channels)
    source_range: str = "uint8"  # or "pcm16"
    sample_rate: Optional[int] = None
    meta: dict = field(default_factory=dict)

    @property
    def channels(self) -> int:
        return self.values.shape[1]

    def with_values(self, values: np.ndarray) -> "MediaTensor":
        values = np.asarray(values, dtype=np.float64).reshape(self.values.shape)
        return MediaTensor(self.modality, self.shape, self.coords, values,
                           self.source_range, self.sample_rate, dict(self.meta))

    def as_array(self) -> np.ndarray:
        """Values reshaped to the media shape."""
        return self.values.reshape(self.shape)


def _axis(n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("dimensions must be positive")
    if n == 1:
        return np.array([-1.0])
    return 2.0 * np.arange(n) / (n - 1) - 1.0


def grid_for(shape, modality: str) -> np.ndarray:
    """Coordinates ``load_*`` would produce for media of this shape.

    ``shape`` holds the sample dims only: (T,) audio, (H, W) image,
    (F, H, W) video. Trailing channel dims are accepted and ignored.
    """
    shape = tuple(int(s) for s in shape)
    if any(s < 1 for s in shape):
        raise ValueError(f"zero or negative dimension in {shape}")
    if modality == AUDIO:
        return _axis(shape[0])[:, None]
    if modality == IMAGE:
        h, w = shape[:2]
        yy, xx = np.meshgrid(_axis(h), _axis(w), indexing="ij")
        return np.stack([xx.ravel(), yy.ravel()], axis=1)
    if modality == VIDEO:
        f, h, w = shape[:3]
        tt, yy, xx = np.meshgrid(_axis(f), _axis(h), _axis(w), indexing="ij")
        return np.stack([xx.ravel(), yy.ravel(), tt.ravel()], axis=1)
    raise ValueError(f"unknown modality {modality!r}")


def pixels_to_values(pixels: np.ndarray) -> np.ndarray:
    return pixels.astype(np.float64) / 127.5 - 1.0


def values_to_pixels(values: np.ndarray) -> np.ndarray:
    p = np.clip((np.asarray(values, dtype=np.float64) + 1.0) * 127.5, 0.0, 255.0)
    return np.rint(p).astype(np.uint8)  # rint rounds half to even


def image_tensor(pixels: np.ndarray) -> MediaTensor:
    """Wrap an 8-bit (H, W) or (H, W, C) array."""
    pixels = np.asarray(pixels)
    if pixels.dtype != np.uint8:
        raise MediaFormatError(f"expected 8-bit pixels, got {pixels.dtype}")
    if pixels.ndim == 2:
        pixels = pixels[:, :, None]
    h, w, c = pixels.shape
    return MediaTensor(IMAGE, (h, w, c), grid_for((h, w), IMAGE),
                       pixels_to_values(pixels.reshape(-1, c)))


def _read_png(path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            if im.format != "PNG":
                raise MediaFormatError(f"{path}: not a PNG ({im.format})")
            if im.mode not in ("L", "RGB"):
                raise MediaFormatError(f"{path}: unsupported PNG mode {im.mode!r}; "
                                       "need 8-bit grayscale or RGB")
            return np.asarray(im)
    except OSError as exc:
        if isinstance(exc, FileNotFoundError):
            raise
        raise MediaFormatError(f"{path}: {exc}") from exc


def load_image(path) -> MediaTensor:
    t = image_tensor(_read_png(path))
    t.meta["path"] = str(path)
    return t


def _pixel_frame(values: np.ndarray, h: int, w: int, c: int) -> Image.Image:
    px = values_to_pixels(values).reshape(h, w, c)
    return Image.fromarray(np.ascontiguousarray(px[:, :, 0]) if c == 1 else px)


def save_image(tensor: MediaTensor, path) -> None:
    h, w, c = tensor.shape
    if c not in (1, 3):
        raise MediaFormatError(f"cannot write {c}-channel image")
    _pixel_frame(tensor.values, h, w, c).save(path, format="PNG")


def audio_tensor(samples: np.ndarray, sample_rate: int) -> MediaTensor:
    samples = np.asarray(samples)
    values = np.clip(samples.astype(np.float64) / PCM_SCALE, -1.0, 1.0)[:, None]
    return MediaTensor(AUDIO, (len(samples), 1), grid_for((len(samples),), AUDIO),
                       values, "pcm16", int(sample_rate))


def load_audio(path) -> MediaTensor:
    try:
        with wave.open(str(path), "rb") as wf:
            if wf.getnchannels() != 1:
                raise MediaFormatError(f"{path}: expected mono, got {wf.getnchannels()} channels")
            if wf.getsampwidth() != 2:
                raise MediaFormatError(f"{path}: expected 16-bit PCM, got {8 * wf.getsampwidth()}-bit")
            rate = wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except (wave.Error, EOFError) as exc:
        raise MediaFormatError(f"{path}: {exc}") from exc
    samples = np.frombuffer(raw, dtype="<i2")
    if samples.size == 0:
        raise MediaFormatError(f"{path}: no samples")
    t = audio_tensor(samples, rate)
    t.meta["path"] = str(path)
    return t


def values_to_pcm(values: np.ndarray) -> np.ndarray:
    s = np.rint(np.asarray(values, dtype=np.float64).ravel() * PCM_SCALE)
    return np.clip(s, -PCM_SCALE, PCM_SCALE).astype("<i2")


def save_audio(tensor: MediaTensor, path) -> None:
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(int(tensor.sample_rate or 16000))
        wf.writeframes(values_to_pcm(tensor.values).tobytes())


def frame_paths(frame_dir) -> list[Path]:
    frame_dir = Path(frame_dir)
    if not frame_dir.is_dir():
        raise MediaFormatError(f"{frame_dir}: not a directory")
    found = [(int(m.group(1)), p) for p in frame_dir.iterdir()
             if (m := _FRAME_NAME.match(p.name))]
    if not found:
        raise MediaFormatError(f"{frame_dir}: no numbered PNG frames")
    return [p for _, p in sorted(found)]


def video_tensor(frames: np.ndarray) -> MediaTensor:
    """Wrap an 8-bit (F, H, W) or (F, H, W, C) array."""
    frames = np.asarray(frames)
    if frames.dtype != np.uint8:
        raise MediaFormatError(f"expected 8-bit frames, got {frames.dtype}")
    if frames.ndim == 3:
        frames = frames[..., None]
    f, h, w, c = frames.shape
    return MediaTensor(VIDEO, (f, h, w, c), grid_for((f, h, w), VIDEO),
                       pixels_to_values(frames.reshape(-1, c)))


def load_video(frame_dir) -> MediaTensor:
    frames = []
    for p in frame_paths(frame_dir):
        px = _read_png(p)
        if px.ndim == 2:
            px = px[:, :, None]
        if frames and px.shape != frames[0].shape:
            raise MediaFormatError(f"{p}: frame shape {px.shape} differs from {frames[0].shape}")
        frames.append(px)
    t = video_tensor(np.stack(frames))
    t.meta["path"] = str(frame_dir)
    return t


def save_video(tensor: MediaTensor, frame_dir) -> None:
    f, h, w, c = tensor.shape
    frame_dir = Path(frame_dir)
    frame_dir.mkdir(parents=True, exist_ok=True)
    width = max(5, len(str(f - 1)))
    per_frame = h * w
    for i in range(f):
        frame = tensor.values[i * per_frame:(i + 1) * per_frame]
        _pixel_frame(frame, h, w, c).save(frame_dir / f"{i:0{width}d}.png", format="PNG")


def infer_modality(path) -> str:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".png":
        return IMAGE
    if suffix == ".wav":
        return AUDIO
    if path.is_dir() or suffix == "":
        return VIDEO
    raise MediaFormatError(f"cannot infer modality of {path}; pass --modality")


def load_media(path, modality: Optional[str] = None) -> MediaTensor:
    modality = modality or infer_modality(path)
    return {IMAGE: load_image, AUDIO: load_audio, VIDEO: load_video}[modality](path)


def save_media(tensor: MediaTensor, path) -> None:
    {IMAGE: save_image, AUDIO: save_audio, VIDEO: save_video}[tensor.modality](tensor, path)


def empty_tensor(modality: str, dims, channels: int, sample_rate: Optional[int] = None) -> MediaTensor:
    """A zero-valued tensor on the standard grid, for rendering into."""
    dims = tuple(int(d) for d in dims)
    coords = grid_for(dims, modality)
    shape = (dims[0], 1) if modality == AUDIO else (*dims, channels)
    return MediaTensor(modality, shape, coords, np.zeros((len(coords), channels)),
                       "pcm16" if modality == AUDIO else "uint8", sample_rate)
