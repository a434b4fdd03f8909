"""Independent reference implementations used as test oracles."""
import math

import numpy as np


def dijkstra_cost(walkable, start, goal):
    """Cheapest 8-connected path cost via scipy's Dijkstra; diagonals may not cut blocked corners."""
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import dijkstra

    w = np.asarray(walkable, dtype=bool)
    nz, nx = w.shape
    rows, cols, cost = [], [], []
    for i, j in zip(*np.nonzero(w)):
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                ni, nj = i + di, j + dj
                if (di, dj) == (0, 0) or not (0 <= ni < nz and 0 <= nj < nx) or not w[ni, nj]:
                    continue
                if di and dj and not (w[i + di, j] and w[i, j + dj]):
                    continue
                rows.append(i * nx + j)
                cols.append(ni * nx + nj)
                cost.append(math.sqrt(2.0) if di and dj else 1.0)
    g = coo_matrix((cost, (rows, cols)), shape=(nz * nx, nz * nx)).tocsr()
    d = dijkstra(g, indices=start[0] * nx + start[1])
    return float(d[goal[0] * nx + goal[1]])


def random_grids(n, size=10, density=0.2, seed=0):
    """``n`` random obstacle grids, each with a walkable start and goal."""
    rng = np.random.default_rng(seed)
    for _ in range(n):
        w = rng.random((size, size)) >= density
        cells = np.argwhere(w)
        if len(cells) < 2:
            continue
        a, b = rng.choice(len(cells), 2, replace=False)
        yield w, tuple(int(v) for v in cells[a]), tuple(int(v) for v in cells[b])


def chi2_uniform_pvalue(counts):
    """Pearson chi-square p-value against a uniform distribution over the bins."""
    from scipy.stats import chisquare

    return float(chisquare(np.asarray(counts, dtype=np.float64)).pvalue)


def conv2d_direct(x, w, b, stride):
    """Valid cross-correlation by explicit loops; ``x (N, C, H, W)``, ``w (O, C, k, k)``."""
    n, c, h, wd = x.shape
    o, _, k, _ = w.shape
    ho, wo = (h - k) // stride + 1, (wd - k) // stride + 1
    y = np.zeros((n, o, ho, wo))
    for i in range(ho):
        for j in range(wo):
            patch = x[:, :, i * stride:i * stride + k, j * stride:j * stride + k]
            y[:, :, i, j] = np.einsum("nckl,ockl->no", patch, w)
    return y + b[None, :, None, None]


def conv_transpose2d_direct(x, w, b, stride):
    """Transposed convolution as a scatter of weighted kernels; ``w (C, O, k, k)``."""
    n, c, h, wd = x.shape
    _, o, k, _ = w.shape
    y = np.zeros((n, o, (h - 1) * stride + k, (wd - 1) * stride + k))
    for i in range(h):
        for j in range(wd):
            y[:, :, i * stride:i * stride + k, j * stride:j * stride + k] += np.einsum("nc,cokl->nokl", x[:, :, i, j], w)
    return y + b[None, :, None, None]


def rel_err(a, b, floor=1e-8):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))
