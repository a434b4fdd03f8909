"""The convolutional autoencoder: six valid convolutions down to 128x2x2, six transposed convolutions back."""
import math
from dataclasses import dataclass

import numpy as np

from . import functional as F

# (in, out, kernel, stride)
ENCODER = ((3, 16, 6, 1), (16, 32, 5, 2), (32, 64, 6, 1), (64, 128, 5, 2), (128, 128, 5, 2), (128, 128, 5, 1))
DECODER = ((128, 128, 5, 1), (128, 128, 5, 2), (128, 64, 5, 2), (64, 32, 6, 1), (32, 16, 5, 2), (16, 3, 6, 1))


@dataclass(frozen=True)
class LayerSpec:
    name: str
    transposed: bool
    cin: int
    cout: int
    k: int
    stride: int
    activation: str  # "leaky", "none" or "clamp"

    @property
    def weight_shape(self):
        if self.transposed:
            return (self.cin, self.cout, self.k, self.k)
        return (self.cout, self.cin, self.k, self.k)

    @property
    def n_params(self) -> int:
        return self.cin * self.cout * self.k * self.k + self.cout

    def out_size(self, n):
        return F.tconv_out(n, self.k, self.stride) if self.transposed else F.conv_out(n, self.k, self.stride)


def layer_table(encoder=ENCODER, decoder=DECODER, final="clamp"):
    specs = []
    for i, (ci, co, k, s) in enumerate(encoder):
        act = "leaky" if i < len(encoder) - 1 else "none"
        specs.append(LayerSpec(f"enc{i + 1}", False, ci, co, k, s, act))
    for i, (ci, co, k, s) in enumerate(decoder):
        act = "leaky" if i < len(decoder) - 1 else final
        specs.append(LayerSpec(f"dec{i + 1}", True, ci, co, k, s, act))
    return tuple(specs)


def count_params(specs) -> int:
    return sum(s.n_params for s in specs)


class Autoencoder:
    """Parameters live in ``self.params`` as ``[w1, b1, w2, b2, ...]``."""

    def __init__(self, specs=None, seed: int = 0, dtype=np.float32, slope: float = 0.01, out_bias: float = 0.5):
        self.specs = tuple(specs) if specs is not None else layer_table()
        self.slope = slope
        self.dtype = np.dtype(dtype)
        self.n_encoder = sum(not s.transposed for s in self.specs)
        rng = np.random.default_rng(seed)
        self.params = []
        for s in self.specs:
            # Kaiming-style uniform bound from the fan-in of each output unit
            fan_in = s.cin * s.k * s.k
            if s.transposed:
                fan_in = s.cin * math.ceil(s.k / s.stride) ** 2
            bound = math.sqrt(6.0 / fan_in)
            w = rng.uniform(-bound, bound, size=s.weight_shape)
            b = np.zeros(s.cout)
            if s.activation == "clamp":
                w *= 0.1
                b += out_bias
            self.params += [w.astype(self.dtype), b.astype(self.dtype)]

    @property
    def n_params(self) -> int:
        return int(sum(p.size for p in self.params))

    def astype(self, dtype) -> "Autoencoder":
        m = object.__new__(Autoencoder)
        m.specs, m.slope, m.n_encoder = self.specs, self.slope, self.n_encoder
        m.dtype = np.dtype(dtype)
        m.params = [p.astype(dtype) for p in self.params]
        return m

    def output_shape(self, shape):
        c, h, w = shape
        for s in self.specs:
            if s.out_size(h) < 1 or s.out_size(w) < 1:
                raise ValueError(f"{s.name}: input {h}x{w} is too small for kernel {s.k} stride {s.stride}")
            h, w, c = s.out_size(h), s.out_size(w), s.cout
        return (c, h, w)

    def _layer_forward(self, i, x):
        s = self.specs[i]
        w, b = self.params[2 * i], self.params[2 * i + 1]
        if s.transposed:
            y, cache = F.conv_transpose2d_cn(x, w, b, s.stride)
        else:
            y, cache = F.conv2d_cn(x, w, b, s.stride)
        pre = y
        if s.activation == "leaky":
            y = F.leaky_relu(y, self.slope)
        elif s.activation == "clamp":
            y = F.clamp01(y)
        return y, (cache, pre)

    def _run(self, x, layers, keep):
        # layers run on channel-major (C, N, H, W) batches
        x = np.ascontiguousarray(np.swapaxes(np.asarray(x, dtype=self.dtype), 0, 1))
        caches = []
        for i in layers:
            x, c = self._layer_forward(i, x)
            if keep:
                caches.append(c)
        return np.ascontiguousarray(np.swapaxes(x, 0, 1)), caches

    def encode(self, x):
        return self._run(x, range(self.n_encoder), False)[0]

    def decode(self, z):
        return self._run(z, range(self.n_encoder, len(self.specs)), False)[0]

    def __call__(self, x):
        return self._run(x, range(len(self.specs)), False)[0]

    def forward(self, x):
        """Reconstruction plus the cache needed by :meth:`backward`."""
        return self._run(x, range(len(self.specs)), True)

    def backward(self, caches, dy):
        """Parameter gradients (same order as ``params``) and the input gradient."""
        dy = np.ascontiguousarray(np.swapaxes(np.asarray(dy, dtype=self.dtype), 0, 1))
        grads = [None] * len(self.params)
        for i in reversed(range(len(self.specs))):
            s = self.specs[i]
            cache, pre = caches[i]
            if s.activation == "leaky":
                dy = F.leaky_relu_backward(dy, pre, self.slope)
            elif s.activation == "clamp":
                dy = F.clamp01_backward(dy, pre)
            w = self.params[2 * i]
            if s.transposed:
                dy, dw, db = F.conv_transpose2d_backward_cn(dy, w, cache, s.stride)
            else:
                dy, dw, db = F.conv2d_backward_cn(dy, w, cache, s.stride)
            grads[2 * i], grads[2 * i + 1] = dw, db
        return grads, np.ascontiguousarray(np.swapaxes(dy, 0, 1))


def score(model: Autoencoder, frames, batch: int = 32) -> np.ndarray:
    """Squared L2 reconstruction error per frame; ``frames`` are floats in [0, 1] or uint8."""
    x = np.asarray(frames)
    single = x.ndim == 3
    if single:
        x = x[None]
    if x.ndim != 4 or model.output_shape(x.shape[1:]) != x.shape[1:]:
        raise ValueError(f"score: frames of shape {x.shape[1:]} do not round-trip through the model")
    out = np.empty(len(x), dtype=np.float64)
    for a in range(0, len(x), batch):
        xb = to_unit(x[a:a + batch], model.dtype)
        r = model(xb)
        d = (xb - r).astype(np.float64)
        out[a:a + batch] = (d * d).reshape(len(xb), -1).sum(axis=1)
    return out[0] if single else out


def to_unit(frames, dtype=np.float32):
    f = np.asarray(frames)
    if f.dtype == np.uint8:
        return f.astype(dtype) / np.dtype(dtype).type(255)
    return f.astype(dtype, copy=False)
