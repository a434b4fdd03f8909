"""Checkpoint files: magic, header length, JSON header, float32 little-endian parameter blob."""
import json
import struct
from pathlib import Path

import numpy as np

from .model import Autoencoder, LayerSpec

MAGIC = b"BSCKPT01"


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, model: Autoencoder, seed=None, extra=None):
    header = {
        "layers": [vars(s) for s in model.specs],
        "param_shapes": [list(p.shape) for p in model.params],
        "param_count": model.n_params,
        "slope": model.slope,
        "seed": seed,
        "dtype": "<f4",
    }
    if extra:
        header["extra"] = extra
    hb = json.dumps(header, sort_keys=True).encode()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(hb)))
        f.write(hb)
        for p in model.params:
            f.write(np.ascontiguousarray(p, dtype="<f4").tobytes())
    tmp.replace(path)
    return path


def read_header(path):
    with open(path, "rb") as f:
        if f.read(8) != MAGIC:
            raise CheckpointError(f"{path}: not a bugsight checkpoint")
        raw = f.read(8)
        if len(raw) != 8:
            raise CheckpointError(f"{path}: truncated header")
        (n,) = struct.unpack("<Q", raw)
        hb = f.read(n)
        if len(hb) != n:
            raise CheckpointError(f"{path}: truncated header")
        try:
            return json.loads(hb), 16 + n
        except (json.JSONDecodeError, UnicodeDecodeError):
            raise CheckpointError(f"{path}: corrupt header") from None


def load_checkpoint(path, dtype=np.float32) -> Autoencoder:
    header, offset = read_header(path)
    specs = [LayerSpec(**d) for d in header["layers"]]
    model = Autoencoder(specs, dtype=dtype, slope=header.get("slope", 0.01))
    blob = np.fromfile(path, dtype="<f4", offset=offset)
    want = sum(int(np.prod(s)) for s in header["param_shapes"])
    if blob.size != want or want != header["param_count"]:
        raise CheckpointError(f"{path}: expected {want} parameters, file holds {blob.size}")
    params, a = [], 0
    for shape in header["param_shapes"]:
        k = int(np.prod(shape))
        params.append(blob[a:a + k].reshape(shape).astype(dtype))
        a += k
    for p, q in zip(model.params, params):
        if p.shape != q.shape:
            raise CheckpointError(f"{path}: layer table and parameter shapes disagree")
    model.params = params
    return model
