"""Bug injection: a controller holding enabled bug kinds and the per-frame resolver.

Each kind changes either the world handed to the renderer (textures, uv maps,
render layers, duplicated or jittered geometry, collision flags) or a
post-render effect (black screen, screen tear, near plane).  Tagged objects
show up in the mask with their kind's colour; back faces and below-floor sky
are labelled by the renderer.

Everything here is a pure function of ``(controller, world, frame_index)``.
"""
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .scene import SceneError, Texture, World
from .tags import BugKind, BugTag

DEFAULT_PARAMS = {
    BugKind.CAMERA_CLIPPING: {"near": 2.0},
    BugKind.TEXTURE_CORRUPTION: {"scale_range": [3.0, 8.0], "shear_range": [-1.0, 1.0]},
    BugKind.TEXTURE_MISSING: {},
    BugKind.Z_CLIPPING: {"layer": 1},
    BugKind.Z_FIGHTING: {"hue_deg": 150.0},
    BugKind.GEOMETRY_CORRUPTION: {"jitter_fraction": 0.15},
    BugKind.BLACK_SCREEN: {},
    BugKind.SCREEN_TEAR: {"lag": 1, "probability": 0.3},
    BugKind.GEOMETRY_CLIPPING: {},
    BugKind.BOUNDARY_HOLE: {"size": 2.0},
}

# kinds that act on one object and the roles they may pick from
_TARGET_ROLES = {
    BugKind.TEXTURE_CORRUPTION: ("prop", "boundary"),
    BugKind.TEXTURE_MISSING: ("prop", "boundary"),
    BugKind.Z_CLIPPING: ("prop",),
    BugKind.Z_FIGHTING: ("prop", "boundary"),
    BugKind.GEOMETRY_CORRUPTION: ("prop",),
    BugKind.GEOMETRY_CLIPPING: ("prop",),
    BugKind.BOUNDARY_HOLE: ("floor",),
}

# back faces of untagged geometry get the first enabled kind in this list
BACKFACE_PRIORITY = (BugKind.GEOMETRY_CLIPPING, BugKind.CAMERA_CLIPPING, BugKind.BOUNDARY_HOLE)

ZFIGHT_SUFFIX = "__zfight"
CLIP_MIN_TOP = 1.3  # default eye height 1.2 m plus the near plane


class BugConfigError(ValueError):
    """Invalid bug parameters or target."""


def needs_target(kind) -> bool:
    return BugKind(kind) in _TARGET_ROLES


def eligible_targets(world: World, kind):
    roles = _TARGET_ROLES.get(BugKind(kind))
    if roles is None:
        return []
    out = [o.id for o in world.objects if o.role in roles and not o.id.endswith(ZFIGHT_SUFFIX)]
    if BugKind(kind) is BugKind.GEOMETRY_CLIPPING:
        # only objects tall enough to swallow the camera can show the bug
        top = world.floor_height + CLIP_MIN_TOP
        out = [i for i in out if world.get(i).collidable and world.get(i).y_range[1] >= top]
    return out


def kind_rng(seed: int, kind, *extra) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, BugKind(kind).label, *[int(e) for e in extra]])


@dataclass(frozen=True)
class BugSpec:
    """One enabled bug: kind, resolved target, resolved parameters and activation windows.

    ``windows`` is a tuple of half-open frame ranges ``(start, stop)``; ``None``
    means active on every frame.
    """

    kind: BugKind
    target: str = None
    params: dict = field(default_factory=dict, compare=False, hash=False)
    windows: tuple = None

    def active(self, frame_index: int) -> bool:
        if self.windows is None:
            return True
        return any(a <= frame_index < b for a, b in self.windows)

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value, "target": self.target, "params": _jsonable(self.params)}
        if self.windows is not None:
            d["windows"] = [list(w) for w in self.windows]
        return d


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


def _check_params(kind, params):
    p = dict(params)
    if kind is BugKind.CAMERA_CLIPPING:
        if not float(p["near"]) > 0:
            raise BugConfigError(f"camera_clipping: near must be > 0, got {p['near']}")
    elif kind is BugKind.TEXTURE_CORRUPTION:
        uvt = np.asarray(p.get("uv_transform"), dtype=np.float64)
        if uvt.shape != (2, 3) or not np.all(np.isfinite(uvt)):
            raise BugConfigError("texture_corruption: uv_transform must be a finite 2x3 affine")
    elif kind is BugKind.Z_CLIPPING:
        if int(p["layer"]) < 1:
            raise BugConfigError("z_clipping: layer must be >= 1")
    elif kind is BugKind.GEOMETRY_CORRUPTION:
        if not float(p["max_jitter"]) >= 0:
            raise BugConfigError("geometry_corruption: max_jitter must be >= 0")
    elif kind is BugKind.SCREEN_TEAR:
        if int(p["lag"]) < 1:
            raise BugConfigError("screen_tear: lag must be >= 1")
        if not 0.0 <= float(p["probability"]) <= 1.0:
            raise BugConfigError("screen_tear: probability must lie in [0, 1]")
    elif kind is BugKind.BOUNDARY_HOLE:
        if not float(p["size"]) > 0:
            raise BugConfigError("boundary_hole: size must be > 0")
        if len(p["center"]) != 2:
            raise BugConfigError("boundary_hole: center must be (x, z)")


def _resolve_params(kind, world, target, params, rng):
    p = dict(DEFAULT_PARAMS[kind])
    p.update(params or {})
    if kind is BugKind.TEXTURE_CORRUPTION and "uv_transform" not in p:
        lo, hi = p["scale_range"]
        s0, s1 = p["shear_range"]
        sx, sy = rng.uniform(lo, hi, size=2)
        sh = rng.uniform(s0, s1)
        ox, oy = rng.uniform(0.0, 1.0, size=2)
        p["uv_transform"] = [[float(sx), float(sh), float(ox)], [0.0, float(sy), float(oy)]]
    elif kind is BugKind.GEOMETRY_CORRUPTION and "max_jitter" not in p:
        p["max_jitter"] = float(p["jitter_fraction"]) * world.get(target).bounding_radius
    elif kind is BugKind.BOUNDARY_HOLE and "center" not in p:
        cells = world.walkable_grid.walkable_cells()
        p["center"] = list(world.walkable_grid.center(cells[int(rng.integers(len(cells)))]))
    _check_params(kind, p)
    return p


@dataclass(frozen=True)
class BugController:
    """Immutable set of enabled bugs; ``enable``/``disable`` return new controllers."""

    specs: tuple = ()
    rng_seed: int = 0
    _cache: dict = field(default_factory=dict, compare=False, hash=False, repr=False)

    @property
    def enabled(self) -> frozenset:
        return frozenset(s.kind for s in self.specs)

    def spec(self, kind):
        kind = BugKind(kind)
        for s in self.specs:
            if s.kind is kind:
                return s
        return None

    def enable(self, kind, world: World, target=None, params=None, windows=None) -> "BugController":
        """Enable ``kind`` (replacing an existing entry for it).

        Targets and random parameters are resolved here, from a generator
        derived from ``rng_seed`` and the kind, so the result is reproducible.
        """
        kind = BugKind(kind)
        rng = kind_rng(self.rng_seed, kind)
        if needs_target(kind):
            options = eligible_targets(world, kind)
            if target is None:
                if not options:
                    raise BugConfigError(f"{kind.value}: scene has no eligible target object")
                target = options[int(rng.integers(len(options)))]
            elif target not in options:
                if not world.has(target):
                    raise BugConfigError(f"{kind.value}: unknown target object {target!r}")
                raise BugConfigError(f"{kind.value}: object {target!r} is not an eligible target")
        elif target is not None:
            raise BugConfigError(f"{kind.value} does not take a target object")
        resolved = _resolve_params(kind, world, target, params, rng)
        if windows is not None:
            windows = tuple((int(a), int(b)) for a, b in windows)
            if any(b < a or a < 0 for a, b in windows):
                raise BugConfigError(f"{kind.value}: windows must be (start, stop) with 0 <= start <= stop")
        spec = BugSpec(kind, target, resolved, windows)
        rest = tuple(s for s in self.specs if s.kind is not kind)
        return BugController(rest + (spec,), self.rng_seed)

    def disable(self, kind) -> "BugController":
        kind = BugKind(kind)
        return BugController(tuple(s for s in self.specs if s.kind is not kind), self.rng_seed)

    def to_list(self):
        return [s.to_dict() for s in self.specs]


def enable(controller: BugController, kind, world: World, target=None, params=None, windows=None):
    return controller.enable(kind, world, target, params, windows)


def disable(controller: BugController, kind):
    return controller.disable(kind)


@dataclass(frozen=True)
class BugState:
    """Everything the renderer and the agent need to show this frame's bugs."""

    world: World
    active: frozenset = frozenset()
    near_plane_override: float = None
    backface_kind: BugKind = None
    black_screen: bool = False
    tear: tuple = None  # (first torn row, lag)
    floor_holes: tuple = ()  # (x0, z0, x1, z1) patches without floor collision

    @property
    def frame_effects(self) -> frozenset:
        fx = set()
        if self.black_screen:
            fx.add(BugKind.BLACK_SCREEN)
        if self.tear is not None:
            fx.add(BugKind.SCREEN_TEAR)
        return frozenset(fx)

    def over_hole(self, x: float, z: float) -> bool:
        return any(x0 <= x <= x1 and z0 <= z <= z1 for x0, z0, x1, z1 in self.floor_holes)


def hue_rotate(pixels: np.ndarray, degrees: float) -> np.ndarray:
    """Rotate RGB colours about the grey axis."""
    a = math.radians(degrees)
    c, s = math.cos(a), math.sin(a)
    k = 1.0 / 3.0
    r = math.sqrt(k)
    m = np.array([
        [c + (1 - c) * k, k * (1 - c) - r * s, k * (1 - c) + r * s],
        [k * (1 - c) + r * s, c + (1 - c) * k, k * (1 - c) - r * s],
        [k * (1 - c) - r * s, k * (1 - c) + r * s, c + (1 - c) * k],
    ])
    out = np.asarray(pixels, dtype=np.float64) @ m.T
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def _tagged(obj, kind):
    return replace(obj, bug_tag=BugTag.for_kind(kind))


def jitter_vertices(obj, max_jitter: float, rng) -> np.ndarray:
    """New local-space vertices with every distinct corner moved by at most ``max_jitter`` (world units)."""
    v = obj.mesh.vertices
    uniq, inverse = np.unique(v, axis=0, return_inverse=True)
    half = max_jitter / math.sqrt(3.0)
    d = rng.uniform(-half, half, size=uniq.shape)
    # world offset -> local offset: undo yaw, then scale
    c, s = math.cos(obj.transform.yaw), math.sin(obj.transform.yaw)
    local = np.stack([d[:, 0] * c - d[:, 2] * s, d[:, 1], d[:, 0] * s + d[:, 2] * c], axis=1)
    local = local / np.asarray(obj.transform.scale)
    return v + local[inverse.reshape(-1)]


def _static_world(specs, world):
    """World edits that do not depend on the frame index."""
    objs = list(world.objects)
    index = {o.id: k for k, o in enumerate(objs)}
    extra = []
    rebuild = False
    for s in specs:
        k = s.kind
        if s.target is None or k in (BugKind.GEOMETRY_CORRUPTION, BugKind.BOUNDARY_HOLE):
            continue
        i = index[s.target]
        o = objs[i]
        if k is BugKind.TEXTURE_MISSING:
            objs[i] = _tagged(replace(o, texture=None), k)
        elif k is BugKind.TEXTURE_CORRUPTION:
            objs[i] = _tagged(replace(o, uv_transform=np.asarray(s.params["uv_transform"])), k)
        elif k is BugKind.Z_CLIPPING:
            objs[i] = _tagged(replace(o, render_layer=int(s.params["layer"])), k)
        elif k is BugKind.Z_FIGHTING:
            objs[i] = _tagged(o, k)
            tex = o.texture
            if tex is not None:
                tex = Texture.from_array(hue_rotate(tex.pixels, s.params["hue_deg"]), source=tex.source)
            extra.append(replace(objs[i], id=o.id + ZFIGHT_SUFFIX, texture=tex, collidable=False))
        elif k is BugKind.GEOMETRY_CLIPPING:
            objs[i] = replace(o, collidable=False)
            rebuild = True
    if not extra and not rebuild and all(a is b for a, b in zip(objs, world.objects)):
        return world
    out = replace(world, objects=tuple(objs + extra))
    if rebuild:
        try:
            out = out.rebuild_navgrid()
        except ValueError as e:
            raise SceneError(f"disabling collisions broke the nav grid: {e}") from None
    return out


def apply_bugs(controller: BugController, world: World, frame_index: int, image_height: int = 84) -> BugState:
    """Resolve the controller against ``world`` for one frame."""
    specs = [s for s in controller.specs if s.active(frame_index)]
    if not specs:
        return BugState(world)
    active = frozenset(s.kind for s in specs)

    key = (id(world), tuple(sorted(k.value for k in active)))
    hit = controller._cache.get(key)
    if hit is not None and hit[0] is world:
        scene = hit[1]
    else:
        scene = _static_world(specs, world)
        if len(controller._cache) > 16:
            controller._cache.clear()
        controller._cache[key] = (world, scene)

    near = None
    black = False
    tear = None
    holes = []
    for s in specs:
        k = s.kind
        if k is BugKind.CAMERA_CLIPPING:
            near = float(s.params["near"])
        elif k is BugKind.BLACK_SCREEN:
            black = True
        elif k is BugKind.SCREEN_TEAR:
            lag = int(s.params["lag"])
            rng = kind_rng(controller.rng_seed, k, frame_index)
            on = rng.random() < float(s.params["probability"])
            row = int(rng.integers(1, image_height))
            if on and frame_index >= lag:
                tear = (row, lag)
        elif k is BugKind.GEOMETRY_CORRUPTION:
            o = scene.get(s.target)
            rng = kind_rng(controller.rng_seed, k, frame_index)
            verts = jitter_vertices(world.get(s.target), float(s.params["max_jitter"]), rng)
            scene = scene.with_object(_tagged(replace(o, mesh=o.mesh.with_vertices(verts)), k))
        elif k is BugKind.BOUNDARY_HOLE:
            cx, cz = s.params["center"]
            h = float(s.params["size"]) / 2.0
            holes.append((cx - h, cz - h, cx + h, cz + h))

    backface = next((k for k in BACKFACE_PRIORITY if k in active), None)
    return BugState(scene, active, near, backface, black, tear, tuple(holes))
