"""Walkable-cell grid and 8-connected A* planning over it."""
import heapq
import math
from dataclasses import dataclass

import numpy as np

SQRT2 = math.sqrt(2.0)
# (di, dj, unit cost); i indexes z rows, j indexes x columns
_MOVES = (
    (-1, 0, 1.0), (1, 0, 1.0), (0, -1, 1.0), (0, 1, 1.0),
    (-1, -1, SQRT2), (-1, 1, SQRT2), (1, -1, SQRT2), (1, 1, SQRT2),
)


class Unreachable(Exception):
    """Raised by :func:`shortest_path` callers that want an exception instead of ``[]``."""


@dataclass(frozen=True, eq=False)
class NavGrid:
    """Boolean walkability over the floor, row ``i`` along z and column ``j`` along x."""

    origin: tuple  # (x_min, z_min)
    cell_size: float
    walkable: np.ndarray

    def __post_init__(self):
        w = np.array(self.walkable, dtype=bool)
        if w.ndim != 2:
            raise ValueError("walkable grid must be 2-D")
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")
        w.setflags(write=False)
        object.__setattr__(self, "walkable", w)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    def __eq__(self, other):
        return (
            isinstance(other, NavGrid)
            and self.origin == other.origin
            and self.cell_size == other.cell_size
            and np.array_equal(self.walkable, other.walkable)
        )

    __hash__ = object.__hash__

    @property
    def shape(self):
        return self.walkable.shape

    def cell_of(self, x: float, z: float):
        """Cell containing a world point; may be out of range."""
        return (
            int(math.floor((z - self.origin[1]) / self.cell_size)),
            int(math.floor((x - self.origin[0]) / self.cell_size)),
        )

    def in_bounds(self, cell) -> bool:
        i, j = cell
        return 0 <= i < self.walkable.shape[0] and 0 <= j < self.walkable.shape[1]

    def is_walkable(self, cell) -> bool:
        return self.in_bounds(cell) and bool(self.walkable[cell])

    def center(self, cell):
        """World ``(x, z)`` of a cell centre."""
        i, j = cell
        return (
            self.origin[0] + (j + 0.5) * self.cell_size,
            self.origin[1] + (i + 0.5) * self.cell_size,
        )

    def centers(self):
        """``(nz, nx, 2)`` array of all cell centres as ``(x, z)``."""
        nz, nx = self.walkable.shape
        xs = self.origin[0] + (np.arange(nx) + 0.5) * self.cell_size
        zs = self.origin[1] + (np.arange(nz) + 0.5) * self.cell_size
        gx, gz = np.meshgrid(xs, zs)
        return np.stack([gx, gz], axis=-1)

    def walkable_cells(self):
        return [tuple(c) for c in np.argwhere(self.walkable)]


def point_polygon_distance(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Signed distance from ``points (N, 2)`` to a convex CCW polygon (negative inside)."""
    pts = np.asarray(points, dtype=np.float64)
    a = poly
    b = np.roll(poly, -1, axis=0)
    ab = b - a  # (E, 2)
    ap = pts[:, None, :] - a[None, :, :]  # (N, E, 2)
    denom = np.maximum((ab * ab).sum(-1), 1e-300)
    t = np.clip((ap * ab[None]).sum(-1) / denom, 0.0, 1.0)
    closest = a[None] + t[..., None] * ab[None]
    dist = np.sqrt(((pts[:, None, :] - closest) ** 2).sum(-1)).min(axis=1)
    cross = ab[None, :, 0] * ap[..., 1] - ab[None, :, 1] * ap[..., 0]
    inside = np.all(cross >= 0.0, axis=1)
    return np.where(inside, -dist, dist)


def build_navgrid(bounds, cell_size: float, obstacles, clearance: float) -> NavGrid:
    """Mark cells whose centres keep ``clearance`` from every obstacle footprint.

    ``bounds`` is ``(x_min, z_min, x_max, z_max)``; ``obstacles`` is a sequence
    of convex CCW ``(K, 2)`` footprints in the xz-plane.
    """
    x0, z0, x1, z1 = (float(v) for v in bounds)
    if x1 <= x0 or z1 <= z0:
        raise ValueError(f"degenerate nav bounds {bounds}")
    nx = int(round((x1 - x0) / cell_size))
    nz = int(round((z1 - z0) / cell_size))
    proto = NavGrid((x0, z0), cell_size, np.ones((nz, nx), dtype=bool))
    pts = proto.centers().reshape(-1, 2)
    ok = np.ones(len(pts), dtype=bool)
    for poly in obstacles:
        ok &= point_polygon_distance(pts, np.asarray(poly, dtype=np.float64)) > clearance
    grid = NavGrid((x0, z0), cell_size, ok.reshape(nz, nx))
    if not grid.walkable.any():
        raise ValueError("navigation grid has no walkable cell")
    return grid


def _passable(walkable, i, j, di, dj):
    ni, nj = i + di, j + dj
    if not (0 <= ni < walkable.shape[0] and 0 <= nj < walkable.shape[1]):
        return False
    if not walkable[ni, nj]:
        return False
    if di and dj:
        # no corner cutting past a blocked orthogonal neighbour
        return bool(walkable[i + di, j]) and bool(walkable[i, j + dj])
    return True


def shortest_path(grid: NavGrid, start, goal):
    """A* over 8-connected cells with Euclidean step costs.

    Returns the list of cells from ``start`` to ``goal`` inclusive, or ``[]``
    when the goal cannot be reached.  Non-walkable endpoints raise ``ValueError``.
    """
    start = (int(start[0]), int(start[1]))
    goal = (int(goal[0]), int(goal[1]))
    for name, c in (("start", start), ("goal", goal)):
        if not grid.is_walkable(c):
            raise ValueError(f"{name} cell {c} is not walkable")
    if start == goal:
        return [start]
    walk = grid.walkable
    gi, gj = goal

    def h(i, j):
        return math.hypot(i - gi, j - gj)

    g_best = {start: 0.0}
    parent = {}
    tick = 0
    frontier = [(h(*start), 0, start)]
    closed = set()
    while frontier:
        _, _, cur = heapq.heappop(frontier)
        if cur in closed:
            continue
        if cur == goal:
            path = [cur]
            while path[-1] != start:
                path.append(parent[path[-1]])
            return path[::-1]
        closed.add(cur)
        ci, cj = cur
        gc = g_best[cur]
        for di, dj, step in _MOVES:
            if not _passable(walk, ci, cj, di, dj):
                continue
            nxt = (ci + di, cj + dj)
            if nxt in closed:
                continue
            cand = gc + step
            if cand < g_best.get(nxt, math.inf):
                g_best[nxt] = cand
                parent[nxt] = cur
                tick += 1
                heapq.heappush(frontier, (cand + h(*nxt), tick, nxt))
    return []


def path_length(grid: NavGrid, path) -> float:
    """World-space length of a cell path."""
    total = 0.0
    for (i0, j0), (i1, j1) in zip(path, path[1:]):
        total += math.hypot(i1 - i0, j1 - j0)
    return total * grid.cell_size
