"""Labels from masks, precision curves, per-kind reports and ranked listings.

A test frame counts as bugged when more than ``tau`` of its mask pixels are
tagged.  Scores come from any callable ``Episode -> (N,) float array``, so the
same machinery evaluates a trained model and the tagged-pixel oracle.
"""
import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import DatasetError, load_manifest, mask_pixel_counts, read_episode
from .ppm import write_ppm
from .tags import TAG_COLORS, BugKind

DEFAULT_TAUS = (1, 10, 50, 200)
TOP_K = (10, 50, 100)
CURVE_COLUMNS = ["bug_kind", "episode", "tau", "threshold", "tp", "fp", "fn", "precision"]


def label_frames(tagged_counts, tau: int) -> np.ndarray:
    """True where a frame has strictly more than ``tau`` tagged pixels."""
    return np.asarray(tagged_counts) > tau


def precision_curve(scores, labels):
    """One row per decision threshold: ``(t, tp, fp, fn, precision)``.

    Thresholds are the distinct scores of positive frames, highest first; a
    frame is flagged when ``score >= t``.  With no positives the single row
    is ``(nan, 0, fp, 0, nan)``: precision is undefined there.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=bool)
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in shape")
    n_pos = int(y.sum())
    if n_pos == 0:
        return [(float("nan"), 0, int(len(s)), 0, float("nan"))]
    order = np.argsort(-s, kind="stable")
    ss, yy = s[order], y[order]
    tp_c = np.cumsum(yy)
    fp_c = np.cumsum(~yy)
    rows = []
    for t in np.unique(s[y])[::-1]:
        # number of frames with score >= t
        k = int(np.searchsorted(-ss, -t, side="right"))
        tp, fp = int(tp_c[k - 1]), int(fp_c[k - 1])
        rows.append((float(t), tp, fp, n_pos - tp, tp / (tp + fp)))
    return rows


def rank_order(scores, refs):
    """Indices sorted by score descending, ties by ``refs`` (e.g. ``(episode, frame)``) ascending."""
    s = np.asarray(scores, dtype=np.float64)
    return sorted(range(len(s)), key=lambda i: (-s[i], refs[i]))


def precision_at_k(scores, labels, refs, k: int) -> float:
    y = np.asarray(labels, dtype=bool)
    if len(y) == 0:
        return float("nan")
    top = rank_order(scores, refs)[:k]
    return float(np.mean(y[top]))


# --------------------------------------------------------------------------
# scorers


def oracle_scorer(episode):
    """Tagged-pixel count as the score: label and score coincide."""
    return mask_pixel_counts(episode.masks).astype(np.float64)


def model_scorer(model, batch: int = 32):
    from .nn.model import score

    def run(episode):
        out = np.empty(len(episode), dtype=np.float64)
        for a in range(0, len(episode), 256):
            out[a:a + 256] = score(model, episode.observations[a:a + 256], batch=batch)
        return out

    return run


# --------------------------------------------------------------------------
# split-level scoring


@dataclass
class SplitScores:
    kind: str
    episodes: list  # episode directory names
    scores: list = field(default_factory=list)  # per episode (N,)
    tagged: list = field(default_factory=list)  # per episode (N,)

    def pooled(self):
        refs = [(e, i) for e, s in zip(self.episodes, self.scores) for i in range(len(s))]
        s = np.concatenate(self.scores) if self.scores else np.zeros(0)
        t = np.concatenate(self.tagged) if self.tagged else np.zeros(0, dtype=np.int64)
        return s, t, refs


def score_split(data_dir, kind, scorer, manifest=None) -> SplitScores:
    root = Path(data_dir)
    m = manifest or load_manifest(root)
    entries = m["partitions"]["test"].get(kind)
    if entries is None:
        raise DatasetError(f"{root}: no test split for {kind}")
    out = SplitScores(kind, [])
    for e in entries:
        ep = read_episode(root / e["dir"], mmap=True)
        if ep.masks is None:
            raise DatasetError(f"{e['dir']}: test episode has no masks")
        out.episodes.append(Path(e["dir"]).name)
        out.scores.append(np.asarray(scorer(ep), dtype=np.float64))
        out.tagged.append(mask_pixel_counts(ep.masks))
    return out


def _fmt(x):
    if isinstance(x, float):
        return "nan" if np.isnan(x) else repr(round(x, 10))
    return str(x)


def curve_rows(split: SplitScores, taus):
    rows = []
    s, t, _ = split.pooled()
    for tau in taus:
        for r in precision_curve(s, label_frames(t, tau)):
            rows.append([split.kind, "all", tau, *r])
        for name, es, et in zip(split.episodes, split.scores, split.tagged):
            for r in precision_curve(es, label_frames(et, tau)):
                rows.append([split.kind, name, tau, *r])
    return rows


def summary_rows(split: SplitScores, taus, normal_p90):
    s, t, refs = split.pooled()
    rows = []
    for tau in taus:
        y = label_frames(t, tau)
        pos = s[y]
        row = {
            "bug_kind": split.kind,
            "tau": tau,
            "frames": int(len(s)),
            "positives": int(y.sum()),
        }
        for k in TOP_K:
            row[f"p@{k}"] = precision_at_k(s, y, refs, k)
        row["mean_positive_score"] = float(pos.mean()) if len(pos) else float("nan")
        row["normal_p90"] = normal_p90
        row["mean_positive_above_normal_p90"] = bool(len(pos) and pos.mean() > normal_p90)
        rows.append(row)
    return rows


def normal_reference(splits):
    """Scores of test frames with no tagged pixel at all, pooled over splits."""
    vals = [s[t == 0] for sp in splits for s, t in zip(sp.scores, sp.tagged)]
    return np.concatenate(vals) if vals else np.zeros(0)


# --------------------------------------------------------------------------
# plots


def _line(img, x0, y0, x1, y1, color):
    n = int(max(abs(x1 - x0), abs(y1 - y0))) + 1
    xs = np.rint(np.linspace(x0, x1, n)).astype(int)
    ys = np.rint(np.linspace(y0, y1, n)).astype(int)
    ok = (xs >= 0) & (xs < img.shape[1]) & (ys >= 0) & (ys < img.shape[0])
    img[ys[ok], xs[ok]] = color


PLOT_COLORS = [(230, 60, 60), (60, 160, 60), (60, 90, 230), (200, 150, 0), (150, 60, 200), (0, 170, 170)]


def plot_curves(curves, size=(240, 320)):
    """Precision against the fraction of positive-frame thresholds passed (one line per tau).

    ``curves`` maps tau to curve rows; returns an ``(H, W, 3)`` uint8 image.
    """
    h, w = size
    pad = 12
    img = np.full((h, w, 3), 255, dtype=np.uint8)
    _line(img, pad, h - pad, w - pad, h - pad, (0, 0, 0))
    _line(img, pad, pad, pad, h - pad, (0, 0, 0))
    for y in (0.25, 0.5, 0.75, 1.0):
        yy = h - pad - y * (h - 2 * pad)
        _line(img, pad, yy, w - pad, yy, (225, 225, 225))
    for c, (tau, rows) in enumerate(sorted(curves.items())):
        ps = [r[4] for r in rows if not np.isnan(r[4])]
        if not ps:
            continue
        xs = np.linspace(0, 1, len(ps)) if len(ps) > 1 else np.array([0.0])
        pts = [(pad + x * (w - 2 * pad), h - pad - p * (h - 2 * pad)) for x, p in zip(xs, ps)]
        col = PLOT_COLORS[c % len(PLOT_COLORS)]
        for a, b in zip(pts, pts[1:] or pts):
            _line(img, *a, *b, col)
    return img


# --------------------------------------------------------------------------
# ranking


def rank_report(scores, refs, labels=None, limit=None):
    """Rows ``(rank, episode, frame, score, label)`` in descending score order."""
    order = rank_order(scores, refs)
    if limit is not None:
        order = order[:limit]
    out = []
    for r, i in enumerate(order, 1):
        lab = None if labels is None else bool(labels[i])
        out.append((r, refs[i][0], refs[i][1], float(scores[i]), lab))
    return out


def contact_sheet(frames, cols: int = 10, gap: int = 2, border=None):
    """Tile ``(N, 3, H, W)`` frames into one ``(H', W', 3)`` image.

    ``border`` optionally gives one RGB colour per frame drawn in the gap.
    """
    frames = np.asarray(frames)
    n = len(frames)
    if n == 0:
        return np.zeros((1, 1, 3), dtype=np.uint8)
    _, h, w = frames.shape[1:]
    cols = min(cols, n)
    rows = -(-n // cols)
    sheet = np.zeros((rows * (h + gap) + gap, cols * (w + gap) + gap, 3), dtype=np.uint8)
    for i, f in enumerate(frames):
        r, c = divmod(i, cols)
        y, x = gap + r * (h + gap), gap + c * (w + gap)
        if border is not None:
            sheet[y - gap:y + h + gap, x - gap:x + w + gap] = border[i]
        sheet[y:y + h, x:x + w] = f.transpose(1, 2, 0)
    return sheet


# --------------------------------------------------------------------------
# the whole report


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def evaluate(scorer, data_dir, out_dir, taus=DEFAULT_TAUS, kinds=None, top_k: int = 100, sheet_k: int = 30):
    """Score every test split and write the report tree; returns the summary rows.

    Written files: ``<kind>.csv`` (curves, pooled and per episode),
    ``<kind>.ppm`` (curve plot), ``summary.csv``, ``scores.csv``,
    ``ranking/<kind>.csv`` and ``ranking/<kind>.ppm`` (top frames).
    """
    root = Path(data_dir)
    out = Path(out_dir)
    m = load_manifest(root)
    kinds = list(kinds) if kinds else list(m["partitions"]["test"])
    taus = tuple(sorted(int(t) for t in taus))
    if not taus or taus[0] < 0:
        raise ValueError("taus must be non-negative integers")
    splits = [score_split(root, k, scorer, m) for k in kinds]
    ref = normal_reference(splits)
    p90 = float(np.percentile(ref, 90)) if len(ref) else float("nan")

    out.mkdir(parents=True, exist_ok=True)
    (out / "ranking").mkdir(exist_ok=True)
    summary = []
    score_rows = []
    for sp in splits:
        rows = curve_rows(sp, taus)
        _write_csv(out / f"{sp.kind}.csv", CURVE_COLUMNS, rows)
        pooled = {tau: [r[3:] for r in rows if r[1] == "all" and r[2] == tau] for tau in taus}
        write_ppm(out / f"{sp.kind}.ppm", plot_curves(pooled))
        summary += summary_rows(sp, taus, p90)

        s, t, refs = sp.pooled()
        for (e, i), sc, tg in zip(refs, s, t):
            score_rows.append([sp.kind, e, i, float(sc), int(tg)])
        lab = label_frames(t, 10 if 10 in taus else taus[0])
        ranked = rank_report(s, refs, lab, limit=top_k)
        _write_csv(out / "ranking" / f"{sp.kind}.csv", ["rank", "episode", "frame", "score", "bugged"],
                   [[r[0], r[1], r[2], r[3], int(r[4])] for r in ranked])
        _write_sheet(root, m, sp.kind, ranked[:sheet_k], out / "ranking" / f"{sp.kind}.ppm")

    keys = list(summary[0]) if summary else []
    _write_csv(out / "summary.csv", keys, [[r[k] for k in keys] for r in summary])
    _write_csv(out / "scores.csv", ["bug_kind", "episode", "frame", "score", "tagged_pixels"], score_rows)
    return summary


def _write_sheet(root, manifest, kind, ranked, path):
    by_ep = {Path(e["dir"]).name: e["dir"] for e in manifest["partitions"]["test"][kind]}
    cache = {}
    frames, borders = [], []
    hit = TAG_COLORS[BugKind(kind)]
    for _, ep, i, _, lab in ranked:
        if ep not in cache:
            cache[ep] = read_episode(root / by_ep[ep], mmap=True)
        frames.append(np.asarray(cache[ep].observations[i]))
        borders.append(hit if lab else (90, 90, 90))
    write_ppm(path, contact_sheet(frames, border=borders))


def read_summary(path):
    with open(path) as f:
        return list(csv.DictReader(f))
