"""Valid (unpadded) 2-D convolution and transposed convolution.

Both directions are lowered to one matrix product plus a patch gather
(``im2col``) or scatter-add (``col2im``), so the heavy lifting runs in BLAS.
Weights follow the usual layouts: ``(out, in, k, k)`` for convolution and
``(in, out, k, k)`` for the transposed form.

The ``*_cn`` kernels work on channel-major batches ``(C, N, H, W)``: the
matrix products then produce their output in place of the next layer's
input, and every gather/scatter moves contiguous ``(N, Ho, Wo)`` blocks.
The plain names accept the usual ``(N, C, H, W)``.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv_out(n: int, k: int, s: int) -> int:
    return (n - k) // s + 1


def tconv_out(n: int, k: int, s: int) -> int:
    return (n - 1) * s + k


def im2col_cn(x, k: int, s: int):
    """Patches of a ``(C, N, H, W)`` batch as a ``(C*k*k, N*Ho*Wo)`` matrix (a copy)."""
    c, n, h, w = x.shape
    ho, wo = conv_out(h, k, s), conv_out(w, k, s)
    win = sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::s, ::s][:, :, :ho, :wo]
    cols = np.empty((c, k, k, n, ho, wo), dtype=x.dtype)
    for i in range(k):
        for j in range(k):
            cols[:, i, j] = win[..., i, j]
    return cols.reshape(c * k * k, n * ho * wo), ho, wo


def col2im_cn(cols, shape, k: int, s: int):
    """Scatter-add ``(C, k, k, N, Ho, Wo)`` patch values into a ``(C, N, H, W)`` image."""
    c, n, h, w = shape
    ho, wo = cols.shape[-2:]
    out = np.zeros(shape, dtype=cols.dtype)
    for i in range(k):
        for j in range(k):
            out[:, :, i:i + s * (ho - 1) + 1:s, j:j + s * (wo - 1) + 1:s] += cols[:, i, j]
    return out


def _check_conv(x, ci, k, name):
    if x.shape[0] != ci:
        raise ValueError(f"{name}: input has {x.shape[0]} channels, weight expects {ci}")
    if x.shape[2] < k or x.shape[3] < k:
        raise ValueError(f"{name}: input {x.shape[2]}x{x.shape[3]} smaller than kernel {k}")


def conv2d_cn(x, weight, bias, stride: int = 1):
    o, ci, k, _ = weight.shape
    _check_conv(x, ci, k, "conv2d")
    n = x.shape[1]
    cols, ho, wo = im2col_cn(x, k, stride)
    # (cols.T @ W.T).T is the same product; BLAS runs it far faster when o is small
    y = np.ascontiguousarray((cols.T @ weight.reshape(o, -1).T).T)
    y += bias[:, None]
    return y.reshape(o, n, ho, wo), (cols, x.shape)


def conv2d_backward_cn(dy, weight, cache, stride: int = 1):
    cols, xshape = cache
    o, c, k, _ = weight.shape
    n, ho, wo = dy.shape[1:]
    dmat = dy.reshape(o, -1)
    dw = (dmat @ cols.T).reshape(weight.shape)
    db = dmat.sum(axis=1)
    dcols = (weight.reshape(o, -1).T @ dmat).reshape(c, k, k, n, ho, wo)
    return col2im_cn(dcols, xshape, k, stride), dw, db


def conv_transpose2d_cn(x, weight, bias, stride: int = 1):
    ci, o, k, _ = weight.shape
    if x.shape[0] != ci:
        raise ValueError(f"conv_transpose2d: input has {x.shape[0]} channels, weight expects {ci}")
    c, n, h, w = x.shape
    xmat = x.reshape(c, -1)
    cols = (weight.reshape(c, -1).T @ xmat).reshape(o, k, k, n, h, w)
    y = col2im_cn(cols, (o, n, tconv_out(h, k, stride), tconv_out(w, k, stride)), k, stride)
    y += bias[:, None, None, None]
    return y, (xmat, x.shape)


def conv_transpose2d_backward_cn(dy, weight, cache, stride: int = 1):
    xmat, xshape = cache
    c = xshape[0]
    k = weight.shape[2]
    dcols, _, _ = im2col_cn(dy, k, stride)  # (o*k*k, n*h*w)
    dw = (xmat @ dcols.T).reshape(weight.shape)
    db = dy.sum(axis=(1, 2, 3))
    dx = (weight.reshape(c, -1) @ dcols).reshape(xshape)
    return dx, dw, db


def _nchw(fn):
    def wrapped(x, weight, bias, stride=1):
        y, cache = fn(np.ascontiguousarray(np.swapaxes(x, 0, 1)), weight, bias, stride)
        return np.ascontiguousarray(np.swapaxes(y, 0, 1)), cache

    wrapped.__name__ = fn.__name__[:-3]
    wrapped.__doc__ = f"``{wrapped.__name__}`` on an ``(N, C, H, W)`` batch; returns ``(y, cache)``."
    return wrapped


def _nchw_backward(fn):
    def wrapped(dy, weight, cache, stride=1):
        dx, dw, db = fn(np.ascontiguousarray(np.swapaxes(dy, 0, 1)), weight, cache, stride)
        return np.ascontiguousarray(np.swapaxes(dx, 0, 1)), dw, db

    wrapped.__name__ = fn.__name__[:-3]
    return wrapped


conv2d = _nchw(conv2d_cn)
conv2d_backward = _nchw_backward(conv2d_backward_cn)
conv_transpose2d = _nchw(conv_transpose2d_cn)
conv_transpose2d_backward = _nchw_backward(conv_transpose2d_backward_cn)


def leaky_relu(x, slope: float = 0.01):
    return np.where(x > 0, x, x * x.dtype.type(slope))


def leaky_relu_backward(dy, x, slope: float = 0.01):
    return np.where(x > 0, dy, dy * dy.dtype.type(slope))


def clamp01(x):
    return np.clip(x, 0, 1)


def clamp01_backward(dy, x):
    return np.where((x >= 0) & (x <= 1), dy, 0).astype(dy.dtype, copy=False)
