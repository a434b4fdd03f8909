"""Episode recording, the on-disk episode format and partition building.

An episode directory holds::

    observations.bin   N frames, channel-major uint8 (3, H, W), concatenated
    masks.bin          same layout (absent for normal-partition episodes)
    actions.bin        N bytes, one Action per frame
    meta.json

Frame ``i`` is the observation rendered before action ``i`` is taken.
"""
import json
import math
import shutil
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .agent.agent import Action, AgentConfig, nearest_walkable, new_agent, step
from .agent.navgrid import point_polygon_distance, shortest_path
from .bugs import BugController, apply_bugs, eligible_targets
from .render import agent_camera, labels_to_mask, render_label_image, render_observation
from .render.pipeline import FrameHistory
from .scene import Pose, load_scene, world_hash
from .tags import BugKind

SCHEMA_VERSION = 1
# object-bound kinds the agent walks towards during their windows
SEEK_KINDS = (
    BugKind.TEXTURE_MISSING, BugKind.TEXTURE_CORRUPTION, BugKind.GEOMETRY_CORRUPTION,
    BugKind.Z_FIGHTING, BugKind.Z_CLIPPING,
)
PAPER_SCALE = {"normal": 300_000, "bugged": 300_000, "test_per_kind": 60_000}
DEFAULT_SCALE = 1.0 / 60.0


class DatasetError(Exception):
    """Corrupt or inconsistent dataset files."""


@dataclass(frozen=True)
class RunConfig:
    """How to record one episode."""

    frames: int = 5000
    partition: str = "normal"  # normal | bugged | test
    bugs: tuple = ()  # ({"kind", "target", "params"}, ...) ; kinds drawn at random when empty and partition == "bugged"
    window_fraction: float = 0.2
    window_length: int = 50
    record_masks: bool = None  # default: everything except the normal partition
    width: int = 84
    height: int = 84
    vertical_fov_deg: float = 60.0
    agent: AgentConfig = AgentConfig()
    max_kinds: int = 3
    seek_targets: bool = True  # walk towards the bugged object while its window is open

    def __post_init__(self):
        if self.partition not in ("normal", "bugged", "test"):
            raise ValueError(f"unknown partition {self.partition!r}")
        if self.frames < 1:
            raise ValueError("frames must be >= 1")
        if not 0.0 < self.window_fraction <= 1.0:
            raise ValueError("window_fraction must lie in (0, 1]")
        if self.partition == "normal" and self.bugs:
            raise ValueError("normal episodes may not enable bugs")
        if self.partition == "test" and len(self.bugs) != 1:
            raise ValueError("a test episode enables exactly one bug kind")
        for b in self.bugs:
            BugKind(b["kind"])
        if isinstance(self.agent, dict):
            object.__setattr__(self, "agent", AgentConfig.from_dict(self.agent))

    @property
    def masks(self) -> bool:
        return self.partition != "normal" if self.record_masks is None else bool(self.record_masks)

    def to_dict(self):
        return {
            "frames": self.frames,
            "partition": self.partition,
            "bugs": [dict(b) for b in self.bugs],
            "window_fraction": self.window_fraction,
            "window_length": self.window_length,
            "record_masks": self.masks,
            "width": self.width,
            "height": self.height,
            "vertical_fov_deg": self.vertical_fov_deg,
            "agent": self.agent.to_dict(),
            "max_kinds": self.max_kinds,
            "seek_targets": self.seek_targets,
        }


@dataclass
class Episode:
    observations: np.ndarray  # (N, 3, H, W) uint8
    masks: np.ndarray  # (N, 3, H, W) uint8 or None
    actions: np.ndarray  # (N,) uint8
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.observations) != len(self.actions):
            raise DatasetError("observations and actions differ in length")
        if self.masks is not None and len(self.masks) != len(self.observations):
            raise DatasetError("masks and observations differ in length")

    def __len__(self):
        return len(self.actions)

    def __eq__(self, other):
        if not isinstance(other, Episode):
            return False
        same_masks = (self.masks is None and other.masks is None) or (
            self.masks is not None and other.masks is not None and np.array_equal(self.masks, other.masks)
        )
        return (
            np.array_equal(self.observations, other.observations)
            and np.array_equal(self.actions, other.actions)
            and same_masks
            and self.meta == other.meta
        )


def activation_windows(frames: int, fraction: float, length: int, rng):
    """Non-overlapping windows covering ``round(fraction * frames)`` frames.

    The episode is cut into equal slots, one per window, and each window is
    placed uniformly inside its slot.
    """
    total = int(round(fraction * frames))
    if total <= 0:
        return ()
    n = max(1, int(round(total / max(1, length))))
    sizes = [total // n + (1 if k < total % n else 0) for k in range(n)]
    slot = frames / n
    out = []
    for k, size in enumerate(sizes):
        lo = int(math.floor(k * slot))
        hi = int(math.floor((k + 1) * slot)) - size
        start = lo if hi <= lo else int(rng.integers(lo, hi + 1))
        out.append((start, start + size))
    return tuple(out)


def _choose_bugs(cfg: RunConfig, rng):
    if cfg.bugs or cfg.partition != "bugged":
        return [dict(b) for b in cfg.bugs]
    n = int(rng.integers(1, cfg.max_kinds + 1))
    kinds = rng.choice(len(BugKind), size=n, replace=False)
    return [{"kind": list(BugKind)[int(k)].value} for k in sorted(kinds)]


def _spawn(world, rng):
    cells = world.walkable_grid.walkable_cells()
    x, z = world.walkable_grid.center(cells[int(rng.integers(len(cells)))])
    return Pose((x, world.floor_height, z), rng.uniform(0.0, 2.0 * math.pi))


def generate_episode(world, cfg: RunConfig, seed: int) -> Episode:
    """Walk the agent for ``cfg.frames`` steps, rendering each frame (and its mask) under active bugs.

    When the agent falls through a floor hole and drops below the fall limit it
    is respawned at a random walkable cell; the frame indices are kept in the
    metadata under ``respawns``.
    """
    rng = np.random.default_rng([int(seed), 0xB065])
    controller = BugController(rng_seed=int(seed))
    hole_kind = None
    for b in _choose_bugs(cfg, rng):
        kind = BugKind(b["kind"])
        if "windows" in b:
            windows = b["windows"]  # explicit schedule; None = every frame
        else:
            windows = activation_windows(cfg.frames, cfg.window_fraction, cfg.window_length, rng)
        controller = controller.enable(kind, world, b.get("target"), b.get("params"), windows)
        if kind is BugKind.BOUNDARY_HOLE and "center" not in (b.get("params") or {}):
            hole_kind = kind
    enabled = controller.to_list()
    clip_spec = controller.spec(BugKind.GEOMETRY_CLIPPING)
    fixed = any(b.get("target") for b in cfg.bugs if b["kind"] == BugKind.GEOMETRY_CLIPPING.value)
    if clip_spec is not None and (clip_spec.windows is None or fixed):
        clip_spec = None  # always on or pinned to one object: nothing to schedule
    clip_targets = []
    seek = [
        controller.spec(k) for k in SEEK_KINDS
        if cfg.seek_targets and controller.spec(k) is not None and controller.spec(k).windows is not None
    ]

    agent = new_agent(world, int(seed))
    fov = math.radians(cfg.vertical_fov_deg)
    H, W = cfg.height, cfg.width
    obs = np.empty((cfg.frames, 3, H, W), dtype=np.uint8)
    masks = np.empty((cfg.frames, 3, H, W), dtype=np.uint8) if cfg.masks else None
    actions = np.empty(cfg.frames, dtype=np.uint8)
    history = FrameHistory(maxlen=8)
    respawns, holes = [], []
    hole_armed = True
    for i in range(cfg.frames):
        if hole_kind is not None:
            spec = controller.spec(hole_kind)
            if not spec.active(i):
                hole_armed = True
            elif hole_armed and agent.vy == 0.0:
                # open the hole under the agent's feet so the bug manifests within the window
                x, _, z = agent.pose.position
                params = dict(spec.params, center=[x, z])
                controller = controller.enable(hole_kind, world, spec.target, params, spec.windows)
                holes.append({"frame": i, "center": [x, z]})
                hole_armed = False
        if clip_spec is not None and any(a == i for a, _ in clip_spec.windows):
            # the nearest eligible object loses its collision for this window
            x, _, z = agent.pose.position
            target = _nearest_object(world, eligible_targets(world, BugKind.GEOMETRY_CLIPPING), x, z)
            controller = controller.enable(BugKind.GEOMETRY_CLIPPING, world, target, clip_spec.params,
                                           clip_spec.windows)
            clip_spec = controller.spec(BugKind.GEOMETRY_CLIPPING)
            clip_targets.append({"frame": i, "target": target})
        state = apply_bugs(controller, world, i, image_height=H)
        if clip_spec is not None and clip_spec.active(i) and agent.vy == 0.0:
            a = next(a for a, b in clip_spec.windows if a <= i < b)
            if (i - a) % 15 == 0:
                # walk into the object, so the bug manifests within the window
                agent = _steer_to(agent, state.world, state.world.get(clip_spec.target).transform.position)
        elif agent.vy == 0.0:
            sp = next((sp for sp in seek if sp.active(i)), None)
            if sp is not None:
                a = next(a for a, b in sp.windows if a <= i < b)
                if (i - a) % 15 == 0:
                    agent = _steer_to(agent, state.world, world.get(sp.target).transform.position)
        cam = agent_camera(agent.pose, cfg.agent.eye_height, vertical_fov=fov, width=W, height=H)
        obs[i] = render_observation(world, cam, state, i, seed, history)
        history.push(obs[i])
        if masks is not None:
            masks[i] = labels_to_mask(render_label_image(world, cam, state, i, seed))
        action, agent = step(agent, world, state, cfg.agent)
        actions[i] = int(action)
        if agent.fallen:
            agent = _respawn(agent, world, rng)
            respawns.append(i + 1)
            hole_armed = True

    meta = {
        "schema_version": SCHEMA_VERSION,
        "seed": int(seed),
        "scene_hash": world_hash(world),
        "partition": cfg.partition,
        "enabled_bugs": enabled,
        "frame_count": cfg.frames,
        "image_shape": [3, H, W],
        "has_masks": masks is not None,
        "run_config": cfg.to_dict(),
        "respawns": respawns,
        "hole_placements": holes,
        "clip_targets": clip_targets,
    }
    return Episode(obs, masks, actions, meta)


def _nearest_object(world, ids, x, z):
    p = np.array([[x, z]])
    return min(ids, key=lambda i: float(point_polygon_distance(p, world.get(i).footprint)[0]))


def _steer_to(agent, world, position):
    grid = world.walkable_grid
    x, _, z = agent.pose.position
    goal = nearest_walkable(grid, position[0], position[2])
    path = shortest_path(grid, nearest_walkable(grid, x, z), goal)
    if not path:
        return agent
    return replace(agent, path=path, target=grid.center(goal), stuck=0)


def _respawn(agent, world, rng):
    return replace(agent, pose=_spawn(world, rng), path=[], target=None, vy=0.0, stuck=0, fallen=False)


# --------------------------------------------------------------------------
# IO

OBS_FILE, MASK_FILE, ACT_FILE, META_FILE = "observations.bin", "masks.bin", "actions.bin", "meta.json"


def write_episode(episode: Episode, directory) -> dict:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = {"observations": d / OBS_FILE, "actions": d / ACT_FILE, "meta": d / META_FILE}
    np.ascontiguousarray(episode.observations, dtype=np.uint8).tofile(paths["observations"])
    np.ascontiguousarray(episode.actions, dtype=np.uint8).tofile(paths["actions"])
    if episode.masks is not None:
        paths["masks"] = d / MASK_FILE
        np.ascontiguousarray(episode.masks, dtype=np.uint8).tofile(paths["masks"])
    elif (d / MASK_FILE).exists():
        (d / MASK_FILE).unlink()
    meta = dict(episode.meta)
    meta.setdefault("schema_version", SCHEMA_VERSION)
    meta["frame_count"] = len(episode)
    meta["image_shape"] = list(episode.observations.shape[1:])
    meta["has_masks"] = episode.masks is not None
    paths["meta"].write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    return paths


def read_meta(directory) -> dict:
    p = Path(directory) / META_FILE
    try:
        meta = json.loads(p.read_text())
    except FileNotFoundError:
        raise DatasetError(f"{p}: missing") from None
    except json.JSONDecodeError as e:
        raise DatasetError(f"{p}: invalid JSON ({e.msg} at line {e.lineno})") from None
    if meta.get("schema_version") != SCHEMA_VERSION:
        raise DatasetError(f"{p}: schema_version {meta.get('schema_version')} != {SCHEMA_VERSION}")
    return meta


def _load_frames(path: Path, shape, count, mmap):
    stride = int(np.prod(shape))
    try:
        size = path.stat().st_size
    except FileNotFoundError:
        raise DatasetError(f"{path}: missing") from None
    if size % stride:
        raise DatasetError(f"{path}: size {size} is not a multiple of the frame stride {stride} (truncated?)")
    if size // stride != count:
        raise DatasetError(f"{path}: holds {size // stride} frames, meta.json says {count}")
    if mmap:
        return np.memmap(path, dtype=np.uint8, mode="r", shape=(count, *shape))
    return np.fromfile(path, dtype=np.uint8).reshape(count, *shape)


def read_episode(directory, mmap: bool = False) -> Episode:
    d = Path(directory)
    meta = read_meta(d)
    n = int(meta["frame_count"])
    shape = tuple(meta["image_shape"])
    obs = _load_frames(d / OBS_FILE, shape, n, mmap)
    masks = _load_frames(d / MASK_FILE, shape, n, mmap) if meta.get("has_masks") else None
    act_path = d / ACT_FILE
    try:
        actions = np.fromfile(act_path, dtype=np.uint8)
    except FileNotFoundError:
        raise DatasetError(f"{act_path}: missing") from None
    if len(actions) != n:
        raise DatasetError(f"{act_path}: holds {len(actions)} actions, meta.json says {n}")
    if len(actions) and actions.max() >= len(Action):
        raise DatasetError(f"{act_path}: invalid action code {int(actions.max())}")
    return Episode(obs, masks, actions, meta)


def mask_pixel_counts(masks) -> np.ndarray:
    """Per-frame number of non-black mask pixels."""
    m = np.asarray(masks)
    return (m != 0).any(axis=1).reshape(len(m), -1).sum(axis=1)


# --------------------------------------------------------------------------
# partitions


@dataclass(frozen=True)
class DatasetConfig:
    scale: float = DEFAULT_SCALE
    seed: int = 0
    normal_episode_frames: int = 5000
    bugged_episode_frames: int = 1000
    test_episode_frames: int = 250
    kinds: tuple = tuple(k.value for k in BugKind)
    run: RunConfig = RunConfig()
    workers: int = 1

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        for k in self.kinds:
            BugKind(k)

    def partition_frames(self):
        return {name: int(round(v * self.scale)) for name, v in PAPER_SCALE.items()}

    def to_dict(self):
        return {
            "scale": self.scale,
            "seed": self.seed,
            "normal_episode_frames": self.normal_episode_frames,
            "bugged_episode_frames": self.bugged_episode_frames,
            "test_episode_frames": self.test_episode_frames,
            "kinds": list(self.kinds),
            "run": self.run.to_dict(),
            "workers": self.workers,
        }


def _split(total, per_episode):
    out = [per_episode] * (total // per_episode)
    if total % per_episode:
        out.append(total % per_episode)
    return out


def plan_dataset(cfg: DatasetConfig):
    """List of ``(relative_dir, partition, kind or None, frames, seed)`` jobs in a fixed order."""
    counts = cfg.partition_frames()
    jobs = []
    idx = 0
    for k, n in enumerate(_split(counts["normal"], cfg.normal_episode_frames)):
        jobs.append((f"normal/ep{k:04d}", "normal", None, n, cfg.seed + idx))
        idx += 1
    for k, n in enumerate(_split(counts["bugged"], cfg.bugged_episode_frames)):
        jobs.append((f"bugged/ep{k:04d}", "bugged", None, n, cfg.seed + idx))
        idx += 1
    for kind in cfg.kinds:
        for k, n in enumerate(_split(counts["test_per_kind"], cfg.test_episode_frames)):
            jobs.append((f"test/{kind}/ep{k:04d}", "test", kind, n, cfg.seed + idx))
            idx += 1
    return jobs


def _run_cfg(base: RunConfig, partition, kind, frames):
    return RunConfig(
        frames=frames,
        partition=partition,
        bugs=({"kind": kind},) if kind else (),
        window_fraction=base.window_fraction,
        window_length=base.window_length,
        record_masks=None if partition != "normal" else base.record_masks,
        width=base.width,
        height=base.height,
        vertical_fov_deg=base.vertical_fov_deg,
        agent=base.agent,
        max_kinds=base.max_kinds,
        seek_targets=base.seek_targets,
    )


def _job(args):
    scene_path, out, rel, partition, kind, frames, seed, base = args
    world = load_scene(scene_path)
    ep = generate_episode(world, _run_cfg(base, partition, kind, frames), seed)
    write_episode(ep, Path(out) / rel)
    return rel


def estimate_bytes(cfg: DatasetConfig) -> int:
    stride = 3 * cfg.run.width * cfg.run.height
    total = 0
    for _, partition, _, n, _ in plan_dataset(cfg):
        with_masks = partition != "normal" or bool(cfg.run.record_masks)
        total += n * (stride * (2 if with_masks else 1) + 1)
    return total


def build_dataset(cfg: DatasetConfig, out_dir, scene_path=None, log=None) -> dict:
    """Generate every partition under ``out_dir`` and write ``manifest.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    need = estimate_bytes(cfg)
    free = shutil.disk_usage(out).free
    if need > free:
        raise DatasetError(f"dataset needs ~{need / 1e9:.2f} GB but only {free / 1e9:.2f} GB is free")
    if need > 0.8 * free:
        warnings.warn(f"dataset will use {need / free:.0%} of the free disk space")

    jobs = [(scene_path, str(out), *j, cfg.run) for j in plan_dataset(cfg)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            for rel in pool.map(_job, jobs):
                if log:
                    log(rel)
    else:
        for j in jobs:
            _job(j)
            if log:
                log(j[2])

    world = load_scene(scene_path)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "scene_hash": world_hash(world),
        "partitions": {"normal": [], "bugged": [], "test": {k: [] for k in cfg.kinds}},
        "counts": {"normal": 0, "bugged": 0, "test": {k: 0 for k in cfg.kinds}},
    }
    for rel, partition, kind, n, seed in plan_dataset(cfg):
        entry = {"dir": rel, "frames": n, "seed": seed}
        if partition == "test":
            manifest["partitions"]["test"][kind].append(entry)
            manifest["counts"]["test"][kind] += n
        else:
            manifest["partitions"][partition].append(entry)
            manifest["counts"][partition] += n
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return manifest


def load_manifest(data_dir) -> dict:
    p = Path(data_dir) / "manifest.json"
    try:
        m = json.loads(p.read_text())
    except FileNotFoundError:
        raise DatasetError(f"{p}: missing") from None
    except json.JSONDecodeError as e:
        raise DatasetError(f"{p}: invalid JSON ({e.msg})") from None
    if m.get("schema_version") != SCHEMA_VERSION:
        raise DatasetError(f"{p}: schema_version {m.get('schema_version')} != {SCHEMA_VERSION}")
    return m


def verify_dataset(data_dir) -> dict:
    """Check manifest counts against files, test-episode purity and normal-partition masks.

    Returns a small report; raises :class:`DatasetError` on the first violation.
    """
    root = Path(data_dir)
    m = load_manifest(root)
    report = {"episodes": 0, "frames": 0}

    def check(entry, partition, kind=None):
        ep = read_episode(root / entry["dir"], mmap=True)
        if len(ep) != entry["frames"]:
            raise DatasetError(f"{entry['dir']}: {len(ep)} frames on disk, manifest says {entry['frames']}")
        kinds = {b["kind"] for b in ep.meta["enabled_bugs"]}
        if partition == "normal":
            if kinds:
                raise DatasetError(f"{entry['dir']}: normal episode enables bugs {sorted(kinds)}")
            if ep.masks is not None:
                for a in range(0, len(ep), 500):
                    if np.any(ep.masks[a:a + 500]):
                        raise DatasetError(f"{entry['dir']}: normal episode has a non-black mask near frame {a}")
        elif partition == "test" and kinds != {kind}:
            raise DatasetError(f"{entry['dir']}: test episode for {kind} enables {sorted(kinds)}")
        elif partition == "bugged" and not kinds:
            raise DatasetError(f"{entry['dir']}: bugged episode enables no bug")
        report["episodes"] += 1
        report["frames"] += len(ep)

    for e in m["partitions"]["normal"]:
        check(e, "normal")
    for e in m["partitions"]["bugged"]:
        check(e, "bugged")
    for kind, eps in m["partitions"]["test"].items():
        for e in eps:
            check(e, "test", kind)
    return report
