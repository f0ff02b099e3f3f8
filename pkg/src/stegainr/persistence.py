"""Binary model files.

Layout (all little-endian)::

    magic        4 bytes  b"UINR"
    version      u16
    in_dim       u32
    out_dim      u32
    n_hidden     u32
    widths       u32 * n_hidden
    omega0_first f64
    omega0_hidden f64
    activation   u8       (0 = sine)
    params       f64 * n_params, per layer: weights row-major, then biases

The file length depends only on the architecture. Nothing about keys,
ratios, masks or training phases is ever written.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .inr import ACTIVATIONS, ModelSpec, ParamSet

MAGIC = b"UINR"
VERSION = 1
_FIXED = struct.Struct("<4sHIII")
_OMEGAS = struct.Struct("<ddB")


class ModelFormatError(ValueError):
    pass


def header_bytes(spec: ModelSpec) -> bytes:
    widths = struct.pack(f"<{len(spec.hidden_widths)}I", *spec.hidden_widths)
    return (_FIXED.pack(MAGIC, VERSION, spec.in_dim, spec.out_dim, len(spec.hidden_widths))
            + widths
            + _OMEGAS.pack(spec.omega0_first, spec.omega0_hidden, ACTIVATIONS[spec.activation]))


def dumps(spec: ModelSpec, params: ParamSet) -> bytes:
    if params.spec != spec:
        raise ValueError("parameters do not belong to this architecture")
    return header_bytes(spec) + params.data.astype("<f8", copy=False).tobytes()


def loads(blob: bytes) -> tuple[ModelSpec, ParamSet]:
    if len(blob) < _FIXED.size:
        raise ModelFormatError("truncated header")
    magic, version, in_dim, out_dim, n_hidden = _FIXED.unpack_from(blob, 0)
    if magic != MAGIC:
        raise ModelFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ModelFormatError(f"unsupported version {version}")
    pos = _FIXED.size
    if len(blob) < pos + 4 * n_hidden + _OMEGAS.size:
        raise ModelFormatError("truncated header")
    widths = struct.unpack_from(f"<{n_hidden}I", blob, pos)
    pos += 4 * n_hidden
    w_first, w_hidden, act = _OMEGAS.unpack_from(blob, pos)
    pos += _OMEGAS.size
    names = {v: k for k, v in ACTIVATIONS.items()}
    if act not in names:
        raise ModelFormatError(f"unknown activation id {act}")
    try:
        spec = ModelSpec(in_dim, out_dim, widths, w_first, w_hidden, names[act])
    except ValueError as exc:
        raise ModelFormatError(str(exc)) from exc
    expected = pos + 8 * spec.n_params
    if len(blob) != expected:
        raise ModelFormatError(f"payload length {len(blob) - pos} bytes, expected {8 * spec.n_params}")
    data = np.frombuffer(blob, dtype="<f8", offset=pos).astype(np.float64)
    return spec, ParamSet(spec, data)


def save_model(path, spec: ModelSpec, params: ParamSet) -> None:
    Path(path).write_bytes(dumps(spec, params))


def load_model(path) -> tuple[ModelSpec, ParamSet]:
    return loads(Path(path).read_bytes())
