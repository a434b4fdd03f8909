"""Adam with bias correction, plus optional global gradient-norm clipping."""
from dataclasses import dataclass, field

import numpy as np


class NonFiniteGradient(FloatingPointError):
    pass


@dataclass
class AdamState:
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    clip_norm: float = None  # None = no clipping
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        if self.lr <= 0 or not (0 <= self.beta1 < 1) or not (0 <= self.beta2 < 1) or self.eps <= 0:
            raise ValueError("invalid Adam hyperparameters")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive")

    @classmethod
    def for_params(cls, params, **hyper):
        st = cls(**hyper)
        st.m = [np.zeros_like(p) for p in params]
        st.v = [np.zeros_like(p) for p in params]
        return st


def _check_finite(grads, names=None):
    for i, g in enumerate(grads):
        if not np.all(np.isfinite(g)):
            bad = int(np.count_nonzero(~np.isfinite(g)))
            name = names[i] if names else f"param {i}"
            raise NonFiniteGradient(f"{name}: {bad} of {g.size} gradient entries are not finite (shape {g.shape})")


def global_norm(grads) -> float:
    return float(np.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads)))


def adam_step(params, grads, state: AdamState, names=None):
    """Update ``params`` in place; returns ``state`` (also mutated).

    Raises :class:`NonFiniteGradient` before touching anything if a gradient
    holds NaN or inf.
    """
    if len(params) != len(grads):
        raise ValueError(f"{len(params)} params but {len(grads)} grads")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    for p, g, m in zip(params, grads, state.m):
        if p.shape != g.shape or p.shape != m.shape:
            raise ValueError(f"shape mismatch: param {p.shape}, grad {g.shape}, moment {m.shape}")
    _check_finite(grads, names)

    scale = 1.0
    if state.clip_norm is not None:
        n = global_norm(grads)
        if n > state.clip_norm:
            scale = state.clip_norm / n

    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        dt = p.dtype.type
        g = g * dt(scale) if scale != 1.0 else g
        if state.weight_decay:
            g = g + dt(state.weight_decay) * p
        m *= dt(state.beta1)
        m += dt(1 - state.beta1) * g
        v *= dt(state.beta2)
        v += dt(1 - state.beta2) * (g * g)
        p -= dt(state.lr) * (m / dt(c1)) / (np.sqrt(v / dt(c2)) + dt(state.eps))
    return state
