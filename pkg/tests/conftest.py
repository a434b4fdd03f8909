import math

import pytest

from bugsight.dataset import DatasetConfig, build_dataset
from bugsight.scene import Pose, load_scene


@pytest.fixture(scope="session")
def world():
    return load_scene(None)


def look_pose(x, z, tx, tz, y=0.0):
    """Agent pose at (x, y, z) facing the point (tx, tz)."""
    return Pose((x, y, z), math.atan2(-(tz - z), tx - x))


@pytest.fixture
def look():
    return look_pose


TINY = dict(scale=1 / 3000, kinds=("black_screen", "texture_missing"),
            normal_episode_frames=50, bugged_episode_frames=50, test_episode_frames=10)


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """Two test kinds, 100 normal and 100 bugged frames; returns ``(dir, manifest)``."""
    out = tmp_path_factory.mktemp("tiny")
    return out, build_dataset(DatasetConfig(**TINY), out)


ACCEPTANCE = []


@pytest.fixture
def criterion():
    """Record a pass/fail line for the acceptance summary, then assert it."""

    def record(number, name, ok, detail=""):
        ACCEPTANCE.append((number, name, bool(ok), detail))
        assert ok, f"criterion {number} ({name}) failed: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number}. {name}: {detail}")
