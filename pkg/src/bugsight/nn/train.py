"""Training loop for the autoencoder on normal frames."""
import csv
import time
from contextlib import nullcontext
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..metrics import DEFAULT_SSIM, LossWeights, combined_loss
from .checkpoint import save_checkpoint
from .model import Autoencoder, to_unit
from .optim import AdamState, adam_step


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5
    batch_size: int = 64
    micro_batch: int = 16  # memory only; gradients are summed in a fixed order
    seed: int = 0
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.0
    ssim_weight: float = 0.9
    mse_weight: float = 0.1
    leaky_slope: float = 0.01
    clip_norm: float = None
    deterministic: bool = True  # pins BLAS to one thread
    threads: int = 1  # BLAS threads when not deterministic

    def __post_init__(self):
        LossWeights(self.ssim_weight, self.mse_weight)
        if self.epochs < 1 or self.batch_size < 1 or self.micro_batch < 1:
            raise ValueError("epochs, batch_size and micro_batch must be >= 1")
        if self.weight_decay != 0:
            raise ValueError("weight decay is not supported")

    @property
    def weights(self):
        return LossWeights(self.ssim_weight, self.mse_weight)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class TrainResult:
    model: Autoencoder
    epoch_loss: list = field(default_factory=list)
    rows: list = field(default_factory=list)  # (epoch, batch, loss, ssim, mse)
    seconds: float = 0.0


def _blas_limit(cfg):
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        return nullcontext()
    return threadpool_limits(1 if cfg.deterministic else cfg.threads)


def batch_gradient(model: Autoencoder, x, cfg: TrainConfig):
    """Loss statistics and parameter gradients of the mean loss over ``x``.

    ``x`` is split into micro-batches; per-chunk results are weighted by
    chunk size and summed front to back.
    """
    n = len(x)
    total = None
    loss = s_sum = m_sum = 0.0
    for a in range(0, n, cfg.micro_batch):
        xb = to_unit(x[a:a + cfg.micro_batch], model.dtype)
        w = len(xb) / n
        y, caches = model.forward(xb)
        l, dy, s, m = combined_loss(y, xb, cfg.weights, DEFAULT_SSIM)
        grads, _ = model.backward(caches, dy * model.dtype.type(w))
        if total is None:
            total = grads
        else:
            for t, g in zip(total, grads):
                t += g
        loss += w * l
        s_sum += w * s
        m_sum += w * m
    return loss, s_sum, m_sum, total


def train(frames, cfg: TrainConfig = TrainConfig(), out_dir=None, model=None, log=None) -> TrainResult:
    """Fit an autoencoder to ``frames`` (uint8 ``(N, 3, H, W)`` or floats in [0, 1]).

    With ``out_dir`` a loss CSV and one checkpoint per epoch are written there.
    """
    frames = np.asarray(frames)
    if frames.ndim != 4 or len(frames) == 0:
        raise ValueError("train: need a non-empty (N, 3, H, W) frame array")
    if model is None:
        model = Autoencoder(seed=cfg.seed, slope=cfg.leaky_slope)
    if model.output_shape(frames.shape[1:]) != frames.shape[1:]:
        raise ValueError(f"train: frames of shape {frames.shape[1:]} do not round-trip through the model")
    names = [f"{s.name}.{p}" for s in model.specs for p in ("weight", "bias")]
    opt = AdamState.for_params(model.params, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2,
                               eps=cfg.adam_eps, clip_norm=cfg.clip_norm)
    result = TrainResult(model)
    out = Path(out_dir) if out_dir is not None else None
    writer = fh = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        fh = open(out / "loss.csv", "w", newline="")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "batch", "loss", "ssim", "mse"])
    t0 = time.perf_counter()
    try:
        with _blas_limit(cfg):
            for epoch in range(1, cfg.epochs + 1):
                order = np.random.default_rng([cfg.seed, epoch]).permutation(len(frames))
                losses = []
                for b, a in enumerate(range(0, len(frames), cfg.batch_size)):
                    idx = order[a:a + cfg.batch_size]
                    loss, s, m, grads = batch_gradient(model, frames[idx], cfg)
                    adam_step(model.params, grads, opt, names)
                    row = (epoch, b, loss, s, m)
                    result.rows.append(row)
                    losses.append(loss)
                    if writer:
                        writer.writerow([epoch, b, f"{loss:.8g}", f"{s:.8g}", f"{m:.8g}"])
                mean = float(np.mean(losses))
                result.epoch_loss.append(mean)
                if out is not None:
                    fh.flush()
                    save_checkpoint(out / f"epoch{epoch:03d}.ckpt", model, seed=cfg.seed,
                                    extra={"epoch": epoch, "mean_loss": mean, "train": cfg.to_dict()})
                if log:
                    log(f"epoch {epoch}/{cfg.epochs}: mean loss {mean:.5f} ({time.perf_counter() - t0:.0f}s)")
    finally:
        if fh:
            fh.close()
    if out is not None:
        save_checkpoint(out / "model.ckpt", model, seed=cfg.seed,
                        extra={"epochs": cfg.epochs, "train": cfg.to_dict()})
        with open(out / "epochs.csv", "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["epoch", "mean_loss"])
            for e, l in enumerate(result.epoch_loss, 1):
                w.writerow([e, f"{l:.8g}"])
    result.seconds = time.perf_counter() - t0
    return result
