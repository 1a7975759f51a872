"""TRN1 checkpoint files: a config header followed by named float32 parameter blocks."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .data import FormatError
from .models import SequenceModel, TrnConfig, build_model
from .models.config import ConfigError

MAGIC = b"TRN1"
VERSION = 1


def checkpoint_to_bytes(model: SequenceModel) -> bytes:
    cfg = model.config.to_text().encode("utf-8")
    out = [MAGIC, struct.pack("<II", VERSION, len(cfg)), cfg, struct.pack("<I", len(model.params))]
    for name, arr in model.params.items():
        a = np.asarray(arr)
        rows, cols = (1, a.shape[0]) if a.ndim == 1 else a.shape
        key = name.encode("utf-8")
        out.append(struct.pack("<I", len(key)) + key + struct.pack("<II", rows, cols))
        out.append(a.astype("<f4").tobytes())
    return b"".join(out)


def checkpoint_from_bytes(buf: bytes) -> SequenceModel:
    pos = 0

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(buf):
            raise FormatError(f"truncated checkpoint while reading {what} at byte {pos}")
        chunk = buf[pos : pos + n]
        pos += n
        return chunk

    magic = take(4, "magic")
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    version, cfg_len = struct.unpack("<II", take(8, "header"))
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}, expected {VERSION}")
    try:
        config = TrnConfig.from_text(take(cfg_len, "config").decode("utf-8"))
    except (ConfigError, TypeError, ValueError) as exc:
        raise FormatError(f"invalid config header: {exc}") from exc
    template = build_model(config).params
    (n_blocks,) = struct.unpack("<I", take(4, "block count"))
    params = {}
    for _ in range(n_blocks):
        (name_len,) = struct.unpack("<I", take(4, "block name length"))
        name = take(name_len, "block name").decode("utf-8", errors="replace")
        rows, cols = struct.unpack("<II", take(8, f"shape of {name}"))
        if name not in template:
            raise FormatError(f"unexpected parameter block {name!r} for model {config.model!r}")
        if name in params:
            raise FormatError(f"duplicate parameter block {name!r}")
        if rows * cols != template[name].size:
            raise FormatError(f"block {name!r} is {rows}x{cols}, expected {template[name].shape}")
        data = np.frombuffer(take(4 * rows * cols, f"data of {name}"), dtype="<f4")
        if not np.all(np.isfinite(data)):
            raise FormatError(f"block {name!r} holds non-finite values")
        params[name] = data.astype(np.float64).reshape(template[name].shape)
    missing = set(template) - set(params)
    if missing:
        raise FormatError(f"missing parameter blocks: {sorted(missing)}")
    if pos != len(buf):
        raise FormatError(f"{len(buf) - pos} trailing bytes in checkpoint")
    return build_model(config, params={k: params[k] for k in template})


def save_checkpoint(model: SequenceModel, path) -> None:
    Path(path).write_bytes(checkpoint_to_bytes(model))


def load_checkpoint(path) -> SequenceModel:
    return checkpoint_from_bytes(Path(path).read_bytes())
