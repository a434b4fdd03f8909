"""Binary PPM (P6) reading and writing."""
from pathlib import Path

import numpy as np


class PPMError(ValueError):
    pass


def _tokens(data: bytes, count: int):
    """Read ``count`` whitespace separated header tokens, skipping comments."""
    out = []
    pos = 0
    while len(out) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise PPMError("truncated PPM header")
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        out.append(data[start:pos])
    return out, pos + 1  # exactly one whitespace byte before the raster


def read_ppm(path) -> np.ndarray:
    """Load a P6 file as a ``(height, width, 3)`` uint8 array."""
    data = Path(path).read_bytes()
    (magic, w, h, maxval), offset = _tokens(data, 4)
    if magic != b"P6":
        raise PPMError(f"{path}: not a binary PPM (magic {magic!r})")
    w, h, maxval = int(w), int(h), int(maxval)
    if maxval != 255:
        raise PPMError(f"{path}: only maxval 255 is supported, got {maxval}")
    raster = data[offset : offset + w * h * 3]
    if len(raster) != w * h * 3:
        raise PPMError(f"{path}: expected {w * h * 3} raster bytes, found {len(raster)}")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w, 3).copy()


def write_ppm(path, image: np.ndarray) -> Path:
    """Write an image as P6.

    Accepts ``(H, W, 3)``, channel-major ``(3, H, W)`` or grayscale ``(H, W)``
    uint8 arrays.
    """
    img = np.asarray(image)
    if img.ndim == 2:
        img = np.repeat(img[:, :, None], 3, axis=2)
    elif img.ndim == 3 and img.shape[0] == 3 and img.shape[2] != 3:
        img = img.transpose(1, 2, 0)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"cannot write image of shape {img.shape} as PPM")
    if img.dtype != np.uint8:
        raise ValueError("PPM images must be uint8")
    h, w = img.shape[:2]
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(img).tobytes())
    return path
