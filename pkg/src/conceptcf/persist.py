"""File persistence: atomic writes, lossless image round-trips, JSON.

Images are stored as 8-bit PNG. The PNG grid is the canonical pixel
representation: every metric is computed on tensors decoded from PNG
bytes, so recomputation from disk reproduces stored values exactly.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np
import torch
from PIL import Image


class CheckpointError(RuntimeError):
    """Raised when a checkpoint is missing, foreign or version-mismatched."""


def _atomic_write_bytes(data: bytes, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_torch_save(payload: dict, path: Path) -> None:
    import io

    buf = io.BytesIO()
    torch.save(payload, buf)
    _atomic_write_bytes(buf.getvalue(), Path(path))


def write_json(obj, path: Path) -> None:
    """Canonical JSON: sorted keys, fixed separators, trailing newline."""
    data = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    _atomic_write_bytes(data.encode("utf-8"), Path(path))


def read_json(path: Path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def to_uint8(img: torch.Tensor) -> np.ndarray:
    """Map a CHW float image in [-1, 1] to an HWC uint8 array."""
    arr = img.detach().clamp(-1.0, 1.0).numpy()
    arr = np.round((arr + 1.0) * 127.5).astype(np.uint8)
    return np.transpose(arr, (1, 2, 0))


def from_uint8(arr: np.ndarray) -> torch.Tensor:
    """Inverse of to_uint8 up to the 8-bit grid."""
    chw = np.transpose(arr.astype(np.float32), (2, 0, 1))
    return torch.from_numpy(chw / 127.5 - 1.0)


def save_image(img: torch.Tensor, path: Path) -> None:
    """Write a CHW float image in [-1, 1] as PNG, atomically."""
    import io

    pil = Image.fromarray(to_uint8(img))
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    _atomic_write_bytes(buf.getvalue(), Path(path))


def load_image(path: Path) -> torch.Tensor:
    """Read a PNG back into a CHW float tensor in [-1, 1]."""
    with Image.open(path) as pil:
        arr = np.asarray(pil.convert("RGB"))
    return from_uint8(arr)


def quantize_like_png(img: torch.Tensor) -> torch.Tensor:
    """Project an image onto the 8-bit PNG grid without touching disk."""
    return from_uint8(to_uint8(img))


def save_gray_image(map01: torch.Tensor, path: Path) -> None:
    """Write a HW float map in [0, 1] as an 8-bit grayscale PNG."""
    import io

    arr = np.round(map01.detach().clamp(0, 1).numpy() * 255.0).astype(np.uint8)
    pil = Image.fromarray(arr, mode="L")
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    _atomic_write_bytes(buf.getvalue(), Path(path))
