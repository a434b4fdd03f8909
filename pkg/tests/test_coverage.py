import numpy as np
import pytest

from bugsight.agent import CoverageError, coverage_counts, coverage_fraction, coverage_map, walk, write_coverage
from bugsight.ppm import read_ppm
from bugsight.scene import world_hash


def test_pinned_agent_covers_one_cell(world):
    pos = np.tile([[-1.0, -7.0]], (500, 1))
    counts = coverage_counts(world.walkable_grid, [pos])
    assert (counts > 0).sum() == 1
    assert counts.sum() == 500


def test_counts_sum_to_positions(world):
    pos, _ = walk(world, 1, 400)
    counts = coverage_counts(world.walkable_grid, [pos])
    assert counts.sum() == len(pos)


def test_outside_points_dropped(world):
    counts = coverage_counts(world.walkable_grid, [np.array([[50.0, 0.0], [-1.0, -7.0]])])
    assert counts.sum() == 1


def test_accumulation_monotone(world):
    grid = world.walkable_grid
    h = world_hash(world)
    trajs = [walk(world, s, 300)[0] for s in range(3)]
    prev = None
    for k in range(1, 4):
        counts = coverage_map([(h, grid, t) for t in trajs[:k]])
        if prev is not None:
            assert (counts >= prev).all()
            assert coverage_fraction(grid, counts) >= coverage_fraction(grid, prev)
        prev = counts


def test_mixed_scenes_rejected(world):
    grid = world.walkable_grid
    p = np.zeros((1, 2))
    with pytest.raises(CoverageError):
        coverage_map([("a", grid, p), ("b", grid, p)])
    with pytest.raises(CoverageError):
        coverage_map([])


def test_coverage_image(world, tmp_path):
    grid = world.walkable_grid
    counts = coverage_counts(grid, [walk(world, 0, 200)[0]])
    img = read_ppm(write_coverage(tmp_path / "c.ppm", counts, grid, scale=2))
    assert img.shape == (grid.shape[0] * 2, grid.shape[1] * 2, 3)
