"""Exploring agent: random targets in a front cone, A* to reach them, epsilon-random actions.

Physics is deliberately small: a vertical cylinder (radius, body height)
that slides along convex obstacle footprints, plus gravity with ground snap.
Holes in the floor (see :class:`bugsight.bugs.BugState`) remove support.
"""
import math
from dataclasses import dataclass, field, replace
from enum import IntEnum

import numpy as np

from .. import scene as _scene  # scene imports navgrid from this package
from .navgrid import point_polygon_distance, shortest_path


class Action(IntEnum):
    FORWARD = 0
    TURN_LEFT = 1
    TURN_RIGHT = 2
    IDLE = 3


@dataclass(frozen=True)
class AgentConfig:
    epsilon: float = 0.1
    cone_half_angle_deg: float = 60.0
    r_min: float = 2.0
    r_max: float = 8.0
    speed: float = 2.0  # m/s
    turn_rate_deg: float = 90.0  # deg/s
    dt: float = 0.1
    radius: float = 0.35
    eye_height: float = 1.2
    heading_tolerance_deg: float = 15.0
    reach_radius: float = 0.3
    refine_radius: float = 1.0
    max_resample: int = 20
    gravity: float = 9.81
    fall_limit: float = 10.0  # episode ends this far below the floor
    stuck_limit: int = 3  # blocked forward moves before replanning
    lookahead: int = 8  # path cells considered when steering

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if not 0 < self.r_min <= self.r_max:
            raise ValueError("need 0 < r_min <= r_max")
        if self.dt <= 0 or self.speed < 0 or self.turn_rate_deg < 0:
            raise ValueError("dt must be positive, speed and turn rate non-negative")
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    @property
    def step_length(self):
        return self.speed * self.dt

    @property
    def step_turn(self):
        return math.radians(self.turn_rate_deg) * self.dt

    @classmethod
    def from_dict(cls, d) -> "AgentConfig":
        names = set(cls.__dataclass_fields__)
        bad = set(d) - names
        if bad:
            raise ValueError(f"unknown agent setting(s): {sorted(bad)}")
        return cls(**d)

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class AgentState:
    pose: object  # scene.Pose
    rng: np.random.Generator
    path: list = field(default_factory=list)  # remaining waypoints as cells
    target: tuple = None  # (x, z)
    vy: float = 0.0
    stuck: int = 0
    fallen: bool = False


def new_agent(world, seed: int, pose=None) -> AgentState:
    return AgentState(pose=pose if pose is not None else world.agent_pose, rng=np.random.default_rng(seed))


def sample_cone(rng, pose, cfg: AgentConfig):
    """Raw cone sample: uniform angle within the half-angle, uniform distance in [r_min, r_max]."""
    half = math.radians(cfg.cone_half_angle_deg)
    phi = rng.uniform(-half, half)
    r = rng.uniform(cfg.r_min, cfg.r_max)
    yaw = pose.yaw + phi
    x, _, z = pose.position
    return (x + r * math.cos(yaw), z - r * math.sin(yaw))


def nearest_walkable(grid, x, z, max_dist=math.inf):
    """Walkable cell whose centre is nearest ``(x, z)``, or ``None`` if none within ``max_dist``."""
    c = grid.centers()
    d2 = (c[..., 0] - x) ** 2 + (c[..., 1] - z) ** 2
    d2 = np.where(grid.walkable, d2, np.inf)
    k = np.unravel_index(int(np.argmin(d2)), d2.shape)
    if not np.isfinite(d2[k]) or d2[k] > max_dist * max_dist:
        return None
    return (int(k[0]), int(k[1]))


def sample_target(state: AgentState, world, cfg: AgentConfig = AgentConfig()):
    """Pick a reachable point in the front cone, snapped to a walkable cell centre."""
    grid = world.walkable_grid
    for _ in range(cfg.max_resample):
        x, z = sample_cone(state.rng, state.pose, cfg)
        cell = nearest_walkable(grid, x, z, cfg.refine_radius)
        if cell is not None:
            return grid.center(cell)
    cells = grid.walkable_cells()
    return grid.center(cells[int(state.rng.integers(len(cells)))])


def _blocking(world, y):
    """Footprints of collidable objects overlapping a body standing at height ``y``."""
    lo, hi = y, y + world.body_height
    out = []
    for o in world.objects:
        if not o.collidable or o.role == "floor":
            continue
        y0, y1 = o.y_range
        if y1 > lo and y0 < hi:
            out.append(o.footprint)
    return out


def collides(world, x, z, y, radius) -> bool:
    p = np.array([[x, z]])
    return any(point_polygon_distance(p, poly)[0] < radius for poly in _blocking(world, y))


def _move(world, pose, dx, dz, radius):
    """Try the full move, then each axis alone (wall sliding); return the new (x, z) and whether it moved."""
    x, y, z = pose.position
    if collides(world, x, z, y, radius):
        # already inside something (collisions were off a moment ago): let the body walk out
        return x + dx, z + dz, True
    for mx, mz in ((dx, dz), (dx, 0.0), (0.0, dz)):
        if mx == 0.0 and mz == 0.0:
            continue
        if not collides(world, x + mx, z + mz, y, radius):
            return x + mx, z + mz, True
    return x, z, False


def _supported(world, bug_state, x, z, y) -> bool:
    if bug_state is not None and bug_state.over_hole(x, z):
        return False
    return y >= world.floor_height - 0.05


def apply_action(state: AgentState, action: Action, world, bug_state=None, cfg: AgentConfig = AgentConfig()):
    """Advance the body by one step under ``action``; returns ``(new_state, moved)``."""
    pose = state.pose
    yaw = pose.yaw
    x, y, z = pose.position
    moved = False
    if action == Action.TURN_LEFT:
        yaw += cfg.step_turn
    elif action == Action.TURN_RIGHT:
        yaw -= cfg.step_turn
    elif action == Action.FORWARD:
        fx, _, fz = pose.forward
        x, z, moved = _move(world, pose, fx * cfg.step_length, fz * cfg.step_length, cfg.radius)

    vy = state.vy
    if _supported(world, bug_state, x, z, y):
        y, vy = world.floor_height, 0.0
    else:
        vy -= cfg.gravity * cfg.dt
        y += vy * cfg.dt
        if _supported(world, bug_state, x, z, y):
            y, vy = world.floor_height, 0.0
    fallen = y < world.floor_height - cfg.fall_limit
    return replace(state, pose=_scene.Pose((x, y, z), yaw), vy=vy, fallen=fallen), moved


def _heading_error(pose, tx, tz):
    x, _, z = pose.position
    want = math.atan2(-(tz - z), tx - x)
    return (want - pose.yaw + math.pi) % (2.0 * math.pi) - math.pi


def _plan(state: AgentState, world, cfg):
    grid = world.walkable_grid
    x, _, z = state.pose.position
    start = nearest_walkable(grid, x, z)
    for _ in range(cfg.max_resample):
        target = sample_target(state, world, cfg)
        path = shortest_path(grid, start, grid.cell_of(*target))
        if path:
            return target, path
    return None, []


def line_of_sight(grid, x0, z0, x1, z1, step=0.2) -> bool:
    """True when every sample along the segment lies in a walkable cell."""
    n = max(1, int(math.ceil(math.hypot(x1 - x0, z1 - z0) / step)))
    t = np.linspace(0.0, 1.0, n + 1)
    xs = x0 + t * (x1 - x0)
    zs = z0 + t * (z1 - z0)
    i = np.floor((zs - grid.origin[1]) / grid.cell_size).astype(np.int64)
    j = np.floor((xs - grid.origin[0]) / grid.cell_size).astype(np.int64)
    ok = (i >= 0) & (i < grid.shape[0]) & (j >= 0) & (j < grid.shape[1])
    if not ok.all():
        return False
    return bool(grid.walkable[i, j].all())


def greedy_action(state: AgentState, world, cfg: AgentConfig = AgentConfig()):
    """Follow the path: drop waypoints up to the closest one, then turn or walk toward the next."""
    grid = world.walkable_grid
    x, _, z = state.pose.position
    path = state.path
    if path:
        centres = np.array([grid.center(c) for c in path])
        d = np.hypot(centres[:, 0] - x, centres[:, 1] - z)
        k = int(np.argmin(d))
        if d[k] < cfg.reach_radius:
            k += 1
        path = path[k:]
    if not path:
        return Action.IDLE, path
    tx, tz = grid.center(path[0])
    # steer at the furthest upcoming waypoint still in straight view
    for c in path[1:cfg.lookahead]:
        cx, cz = grid.center(c)
        if not line_of_sight(grid, x, z, cx, cz):
            break
        tx, tz = cx, cz
    err = _heading_error(state.pose, tx, tz)
    if abs(err) > math.radians(cfg.heading_tolerance_deg):
        return (Action.TURN_LEFT if err > 0 else Action.TURN_RIGHT), path
    return Action.FORWARD, path


def step(state: AgentState, world, bug_state=None, cfg: AgentConfig = AgentConfig()):
    """Choose and apply one action; returns ``(action, new_state)``.

    ``world`` should be the bug-modified world when bugs are active so that
    disabled collisions and rebuilt nav grids are honoured.
    """
    if bug_state is not None:
        world = bug_state.world
    if not state.path or state.stuck >= cfg.stuck_limit:
        target, path = _plan(state, world, cfg)
        state = replace(state, target=target, path=path, stuck=0)
    action, path = greedy_action(state, world, cfg)
    if not path:
        target, path = _plan(state, world, cfg)
        state = replace(state, target=target, path=path)
        action, path = greedy_action(state, world, cfg)
    state = replace(state, path=path)
    if state.rng.random() < cfg.epsilon:
        action = Action(int(state.rng.integers(4)))
    new, moved = apply_action(state, action, world, bug_state, cfg)
    if action == Action.FORWARD and not moved:
        new = replace(new, stuck=new.stuck + 1)
    elif moved:
        new = replace(new, stuck=0)
    return action, new


def walk(world, seed: int, steps: int, cfg: AgentConfig = AgentConfig(), pose=None):
    """Run the agent alone (no rendering, no bugs); returns ``(positions (steps+1, 2), actions (steps,))``."""
    state = new_agent(world, seed, pose)
    pos = np.empty((steps + 1, 2))
    acts = np.empty(steps, dtype=np.uint8)
    pos[0] = state.pose.position[0], state.pose.position[2]
    for i in range(steps):
        a, state = step(state, world, None, cfg)
        acts[i] = int(a)
        pos[i + 1] = state.pose.position[0], state.pose.position[2]
    return pos, acts
