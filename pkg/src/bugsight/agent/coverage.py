"""Visit-count maps over the navigation grid."""
import numpy as np

from ..ppm import write_ppm


class CoverageError(ValueError):
    pass


def coverage_counts(grid, trajectories) -> np.ndarray:
    """Per-cell visit counts for a list of ``(N, 2)`` arrays of ``(x, z)`` positions.

    Positions outside the grid are dropped.
    """
    counts = np.zeros(grid.shape, dtype=np.int64)
    for traj in trajectories:
        t = np.asarray(traj, dtype=np.float64).reshape(-1, 2)
        i = np.floor((t[:, 1] - grid.origin[1]) / grid.cell_size).astype(np.int64)
        j = np.floor((t[:, 0] - grid.origin[0]) / grid.cell_size).astype(np.int64)
        ok = (i >= 0) & (i < grid.shape[0]) & (j >= 0) & (j < grid.shape[1])
        np.add.at(counts, (i[ok], j[ok]), 1)
    return counts


def coverage_map(episodes):
    """Accumulate visit counts over episodes that share one scene.

    Each episode is a ``(scene_hash, grid, positions)`` triple.
    """
    if not episodes:
        raise CoverageError("no episodes given")
    hashes = {h for h, _, _ in episodes}
    if len(hashes) != 1:
        raise CoverageError(f"episodes come from {len(hashes)} different scenes")
    grid = episodes[0][1]
    return coverage_counts(grid, [p for _, _, p in episodes])


def coverage_fraction(grid, counts) -> float:
    """Share of walkable cells visited at least once."""
    w = grid.walkable
    return float(((counts > 0) & w).sum() / w.sum())


def coverage_image(counts, grid=None) -> np.ndarray:
    """Grayscale rendering: log-scaled visits, non-walkable cells dark red, +z at the top."""
    c = np.log1p(counts.astype(np.float64))
    peak = c.max()
    g = np.zeros_like(c) if peak == 0 else c / peak
    img = np.repeat(np.rint(40 + 215 * g)[..., None], 3, axis=2)
    img[counts == 0] = 0
    if grid is not None:
        img[~grid.walkable & (counts == 0)] = (60, 0, 0)
    return img[::-1].astype(np.uint8)


def write_coverage(path, counts, grid=None, scale: int = 8):
    img = coverage_image(counts, grid)
    img = np.kron(img, np.ones((scale, scale, 1), dtype=np.uint8))
    write_ppm(path, img)
    return path
