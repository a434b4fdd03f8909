"""Central finite-difference checks for the layers and the full autoencoder."""
import numpy as np

from bugsight import metrics
from bugsight.nn import functional as F
from bugsight.nn.model import Autoencoder, layer_table

from oracles import rel_err

H = 1e-6


def numeric_grad(f, x, h=H):
    """Full central-difference gradient of scalar ``f`` w.r.t. the array ``x`` (perturbed in place)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f()
        x[i] = old - h
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def conv_errors(transposed, seed=0, stride=2):
    rng = np.random.default_rng(seed)
    if transposed:
        x = rng.standard_normal((2, 3, 3, 4))
        w = rng.standard_normal((3, 2, 3, 3))
        fwd, bwd = F.conv_transpose2d, F.conv_transpose2d_backward
    else:
        x = rng.standard_normal((2, 3, 7, 8))
        w = rng.standard_normal((2, 3, 3, 3))
        fwd, bwd = F.conv2d, F.conv2d_backward
    b = rng.standard_normal(2)
    y, cache = fwd(x, w, b, stride)
    r = rng.standard_normal(y.shape)
    dx, dw, db = bwd(r, w, cache, stride)

    def loss():
        return float(np.sum(fwd(x, w, b, stride)[0] * r))

    return {
        "dx": rel_err(dx, numeric_grad(loss, x)),
        "dw": rel_err(dw, numeric_grad(loss, w)),
        "db": rel_err(db, numeric_grad(loss, b)),
    }


def activation_errors(seed=0, slope=0.01):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-2, 2, (4, 5))
    x = np.where(np.abs(x) < 0.05, 0.5, x)  # keep probes off the kink
    r = rng.standard_normal(x.shape)
    leaky = rel_err(F.leaky_relu_backward(r, x, slope),
                    numeric_grad(lambda: float(np.sum(F.leaky_relu(x, slope) * r)), x))
    c = rng.uniform(-0.5, 1.5, (4, 5))
    c = np.where((np.abs(c) < 0.05) | (np.abs(c - 1) < 0.05), 0.5, c)
    clamp = rel_err(F.clamp01_backward(r, c), numeric_grad(lambda: float(np.sum(F.clamp01(c) * r)), c))
    return {"leaky_relu": leaky, "clamp01": clamp}


def loss_error(seed=0):
    rng = np.random.default_rng(seed)
    x = rng.random((2, 3, 12, 13))
    y = np.clip(x + 0.1 * rng.standard_normal(x.shape), 0, 1)
    _, g, _, _ = metrics.combined_loss(x, y)
    xs = x[:, :, :5, :5].copy()  # probe a corner block; the full image would be slow

    def loss():
        x[:, :, :5, :5] = xs
        return metrics.combined_loss(x, y)[0]

    return rel_err(g[:, :, :5, :5], numeric_grad(loss, xs))


SMALL_ENCODER = ((3, 4, 3, 1), (4, 5, 3, 2))
SMALL_DECODER = ((5, 4, 4, 2), (4, 3, 3, 1))


def small_model(seed=0):
    """3x12x12 -> 5x4x4 -> 3x12x12, float64, same layer kinds as the full network."""
    return Autoencoder(layer_table(SMALL_ENCODER, SMALL_DECODER), seed=seed, dtype=np.float64)


def _regions(caches, model):
    out = []
    for s, (_, pre) in zip(model.specs, caches):
        if s.activation == "leaky":
            out.append(pre > 0)
        elif s.activation == "clamp":
            out.append((pre >= 0) & (pre <= 1))
    return out


def model_errors(seed=0, probes=None, h=H):
    """Relative errors of parameter-gradient entries of the full loss (all of them, or ``probes`` sampled).

    Probes whose perturbation moves any pre-activation across a kink of
    leaky ReLU or the output clamp are skipped (the derivative is one-sided there).
    Returns ``(errors, skipped)``.
    """
    rng = np.random.default_rng(seed)
    model = small_model(seed)
    x = rng.random((2, 3, 12, 12))
    target = np.clip(x + 0.05 * rng.standard_normal(x.shape), 0, 1)
    y, caches = model.forward(x)
    _, dy, _, _ = metrics.combined_loss(y, target)
    grads, _ = model.backward(caches, dy)
    base = _regions(caches, model)

    def at(p, i, v):
        old = p[i]
        p[i] = v
        y, c = model.forward(x)
        p[i] = old
        return metrics.combined_loss(y, target)[0], _regions(c, model)

    if probes is None:
        sites = [(k, i) for k, p in enumerate(model.params) for i in np.ndindex(p.shape)]
    else:
        sites = []
        for _ in range(probes):
            k = int(rng.integers(len(model.params)))
            sites.append((k, tuple(int(rng.integers(n)) for n in model.params[k].shape)))
    errs, skipped = [], 0
    for k, i in sites:
        p = model.params[k]
        lp, rp = at(p, i, p[i] + h)
        lm, rm = at(p, i, p[i] - h)
        if any((a != b).any() or (a != c).any() for a, b, c in zip(base, rp, rm)):
            skipped += 1
            continue
        num = (lp - lm) / (2 * h)
        errs.append(rel_err(grads[k][i], num, floor=1e-6))
    return errs, skipped
