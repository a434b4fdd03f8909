"""World model: meshes, textures, tagged objects and the scene JSON format.

Coordinates are right-handed with +y up, units are metres and the floor top
sits at ``floor_height`` (0 in the bundled scene).  Front faces wind
counter-clockwise when seen from outside the mesh.
"""
import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np

from .agent.navgrid import NavGrid, build_navgrid
from .ppm import PPMError, read_ppm, write_ppm
from .tags import BugKind, BugTag

SCHEMA_VERSION = 1
MISSING_TEXTURE_COLOR = (255, 0, 255)
ROLES = ("prop", "boundary", "floor")


class SceneError(ValueError):
    """Invalid scene file or violated world invariant."""


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


# --------------------------------------------------------------------------
# geometry


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    normals: np.ndarray
    uvs: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vertices", _frozen(self.vertices, np.float64).reshape(-1, 3))
        object.__setattr__(self, "normals", _frozen(self.normals, np.float64).reshape(-1, 3))
        object.__setattr__(self, "uvs", _frozen(self.uvs, np.float64).reshape(-1, 2))
        object.__setattr__(self, "triangles", _frozen(self.triangles, np.int64).reshape(-1, 3))
        self.validate()

    def validate(self):
        n = len(self.vertices)
        if len(self.normals) != n or len(self.uvs) != n:
            raise SceneError("mesh: vertices, normals and uvs must have equal length")
        if len(self.triangles) and (self.triangles.min() < 0 or self.triangles.max() >= n):
            raise SceneError("mesh: triangle index out of range")
        if not np.all(np.isfinite(self.vertices)) or not np.all(np.isfinite(self.uvs)):
            raise SceneError("mesh: non-finite vertex or uv coordinate")
        if n and np.abs(np.linalg.norm(self.normals, axis=1) - 1.0).max() > 1e-6:
            raise SceneError("mesh: normals must have unit length")

    def __eq__(self, other):
        return isinstance(other, Mesh) and all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("vertices", "normals", "uvs", "triangles")
        )

    __hash__ = object.__hash__

    def with_vertices(self, vertices) -> "Mesh":
        return Mesh(vertices, self.normals, self.uvs, self.triangles)


def _convex_mesh(faces, uv_tile=1.0) -> Mesh:
    """Mesh from planar convex polygons, wound so normals face away from the centroid."""
    all_pts = np.concatenate([np.asarray(f, dtype=np.float64) for f in faces])
    centre = all_pts.mean(axis=0)
    verts, norms, uvs, tris = [], [], [], []
    for poly in faces:
        poly = np.asarray(poly, dtype=np.float64)
        n = np.cross(poly[1] - poly[0], poly[2] - poly[0])
        if np.dot(n, poly.mean(axis=0) - centre) < 0:
            poly = poly[::-1]
            n = -n
        n = n / np.linalg.norm(n)
        up = np.array([0.0, 1.0, 0.0])
        t1 = np.cross(up, n)
        if np.linalg.norm(t1) < 1e-9:
            t1 = np.array([1.0, 0.0, 0.0]) if n[1] > 0 else np.array([1.0, 0.0, 0.0])
        t1 = t1 / np.linalg.norm(t1)
        t2 = np.cross(n, t1)
        base = len(verts)
        for p in poly:
            verts.append(p)
            norms.append(n)
            uvs.append((np.dot(p, t1) / uv_tile, np.dot(p, t2) / uv_tile))
        for k in range(1, len(poly) - 1):
            tris.append((base, base + k, base + k + 1))
    return Mesh(np.array(verts), np.array(norms), np.array(uvs), np.array(tris))


def box_mesh(size=(1.0, 1.0, 1.0), uv_tile=1.0) -> Mesh:
    """Axis-aligned box centred on the origin."""
    sx, sy, sz = (float(s) / 2.0 for s in size)
    c = np.array([[x, y, z] for x in (-sx, sx) for y in (-sy, sy) for z in (-sz, sz)])

    def q(*idx):
        return c[list(idx)]

    faces = [
        q(0, 1, 3, 2),  # -x
        q(4, 6, 7, 5),  # +x
        q(0, 4, 5, 1),  # -y
        q(2, 3, 7, 6),  # +y
        q(0, 2, 6, 4),  # -z
        q(1, 5, 7, 3),  # +z
    ]
    return _convex_mesh(faces, uv_tile)


def wedge_mesh(size=(1.0, 1.0, 1.0), uv_tile=1.0) -> Mesh:
    """Ramp rising along +x: full height at ``x = +sx/2``, zero at ``-sx/2``."""
    a, b, c = (float(s) / 2.0 for s in size)
    A, B, C = (-a, -b, -c), (a, -b, -c), (a, b, -c)
    D, E, F = (-a, -b, c), (a, -b, c), (a, b, c)
    faces = [
        [A, B, E, D],  # bottom
        [B, C, F, E],  # back wall
        [A, D, F, C],  # slope
        [A, C, B],
        [D, E, F],
    ]
    return _convex_mesh(faces, uv_tile)


PRIMITIVES = {"box": box_mesh, "wedge": wedge_mesh}


@dataclass(frozen=True, eq=False)
class Texture:
    width: int
    height: int
    pixels: np.ndarray  # (height, width, 3) uint8, row-major
    source: str = field(default="", compare=False)

    def __post_init__(self):
        px = np.array(self.pixels, dtype=np.uint8)
        if px.size != self.width * self.height * 3:
            raise SceneError(
                f"texture: {px.size} bytes for {self.width}x{self.height} RGB "
                f"(expected {self.width * self.height * 3})"
            )
        object.__setattr__(self, "pixels", _frozen(px.reshape(self.height, self.width, 3), np.uint8))

    @classmethod
    def from_array(cls, arr, source="") -> "Texture":
        arr = np.asarray(arr, dtype=np.uint8)
        return cls(arr.shape[1], arr.shape[0], arr, source)

    @classmethod
    def load(cls, path) -> "Texture":
        return cls.from_array(read_ppm(path), str(path))

    def __eq__(self, other):
        return isinstance(other, Texture) and np.array_equal(self.pixels, other.pixels)

    __hash__ = object.__hash__

    def digest(self) -> str:
        return hashlib.sha1(self.pixels.tobytes() + b"%d,%d" % (self.width, self.height)).hexdigest()


@dataclass(frozen=True)
class Transform:
    position: tuple = (0.0, 0.0, 0.0)
    yaw: float = 0.0
    scale: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        object.__setattr__(self, "scale", tuple(float(v) for v in self.scale))
        object.__setattr__(self, "yaw", float(self.yaw))
        if len(self.position) != 3 or len(self.scale) != 3:
            raise SceneError("transform: position and scale need three components")
        if any(s == 0 or not math.isfinite(s) for s in self.scale):
            raise SceneError("transform: scale components must be finite and non-zero")

    def apply(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64) * np.asarray(self.scale)
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        x = p[:, 0] * c + p[:, 2] * s
        z = -p[:, 0] * s + p[:, 2] * c
        return np.stack([x, p[:, 1], z], axis=1) + np.asarray(self.position)


IDENTITY_UV = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0))


@dataclass(frozen=True, eq=False)
class SceneObject:
    id: str
    mesh: Mesh
    texture: Texture = None  # None renders as the missing-texture colour
    uv_transform: np.ndarray = IDENTITY_UV
    transform: Transform = Transform()
    collidable: bool = True
    render_layer: int = 0
    bug_tag: BugTag = None
    role: str = "prop"

    def __post_init__(self):
        uvt = _frozen(self.uv_transform, np.float64)
        if uvt.shape != (2, 3) or not np.all(np.isfinite(uvt)):
            raise SceneError(f"object {self.id!r}: uv_transform must be a finite 2x3 affine")
        object.__setattr__(self, "uv_transform", uvt)
        if self.role not in ROLES:
            raise SceneError(f"object {self.id!r}: unknown role {self.role!r}")
        if int(self.render_layer) != self.render_layer or self.render_layer < 0:
            raise SceneError(f"object {self.id!r}: render layer must be a small non-negative integer")

    def __eq__(self, other):
        if not isinstance(other, SceneObject):
            return False
        return (
            self.id == other.id
            and self.mesh == other.mesh
            and self.texture == other.texture
            and np.array_equal(self.uv_transform, other.uv_transform)
            and self.transform == other.transform
            and self.collidable == other.collidable
            and self.render_layer == other.render_layer
            and self.bug_tag == other.bug_tag
            and self.role == other.role
        )

    __hash__ = object.__hash__

    @cached_property
    def world_vertices(self) -> np.ndarray:
        v = self.transform.apply(self.mesh.vertices)
        v.setflags(write=False)
        return v

    @cached_property
    def world_uvs(self) -> np.ndarray:
        uv = self.mesh.uvs @ self.uv_transform[:, :2].T + self.uv_transform[:, 2]
        uv.setflags(write=False)
        return uv

    @cached_property
    def footprint(self) -> np.ndarray:
        """Convex hull of the xz projection, counter-clockwise in (x, z)."""
        return convex_hull(self.world_vertices[:, [0, 2]])

    @property
    def y_range(self):
        v = self.world_vertices
        return float(v[:, 1].min()), float(v[:, 1].max())

    @property
    def bounding_radius(self) -> float:
        v = self.world_vertices
        return float(np.linalg.norm(v - v.mean(axis=0), axis=1).max())


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Monotone-chain hull, counter-clockwise with x right and z up."""
    pts = sorted(set(map(tuple, np.round(np.asarray(points, dtype=np.float64), 12))))
    if len(pts) <= 2:
        return np.array(pts)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


@dataclass(frozen=True)
class Pose:
    position: tuple
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        yaw = float(self.yaw) % (2.0 * math.pi)
        if yaw >= 2.0 * math.pi:  # tiny negative angles round up to 2*pi
            yaw = 0.0
        object.__setattr__(self, "yaw", yaw)

    @property
    def forward(self):
        """Unit heading in the xz-plane; yaw 0 faces +x and positive yaw turns left."""
        return (math.cos(self.yaw), 0.0, -math.sin(self.yaw))


@dataclass(frozen=True)
class SkyBox:
    horizon: tuple = (170, 205, 235)
    zenith: tuple = (25, 60, 150)
    nadir: tuple = (200, 200, 210)

    def color(self, directions: np.ndarray) -> np.ndarray:
        """RGB (float) for unit view directions ``(..., 3)``, blended on elevation."""
        d = np.asarray(directions, dtype=np.float64)
        s = d[..., 1] / np.linalg.norm(d, axis=-1)
        up = np.clip(s, 0.0, 1.0)[..., None]
        down = np.clip(-s, 0.0, 1.0)[..., None]
        hz = np.asarray(self.horizon, dtype=np.float64)
        col = hz + up * (np.asarray(self.zenith, dtype=np.float64) - hz)
        col = col + down * (np.asarray(self.nadir, dtype=np.float64) - hz)
        return col


@dataclass(frozen=True, eq=False)
class World:
    objects: tuple
    floor_height: float
    walkable_grid: NavGrid
    sky: SkyBox = SkyBox()
    agent_pose: Pose = Pose((0.0, 0.0, 0.0))
    nav_bounds: tuple = (-10.0, -10.0, 10.0, 10.0)
    nav_clearance: float = 0.45
    body_height: float = 1.8

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        ids = [o.id for o in self.objects]
        dup = {i for i in ids if ids.count(i) > 1}
        if dup:
            raise SceneError(f"duplicate object id(s): {sorted(dup)}")

    def __eq__(self, other):
        return (
            isinstance(other, World)
            and self.objects == other.objects
            and self.floor_height == other.floor_height
            and self.walkable_grid == other.walkable_grid
            and self.sky == other.sky
            and self.agent_pose == other.agent_pose
            and tuple(self.nav_bounds) == tuple(other.nav_bounds)
            and self.nav_clearance == other.nav_clearance
            and self.body_height == other.body_height
        )

    __hash__ = object.__hash__

    def get(self, object_id: str) -> SceneObject:
        for o in self.objects:
            if o.id == object_id:
                return o
        raise KeyError(f"unknown object id {object_id!r}")

    def has(self, object_id: str) -> bool:
        return any(o.id == object_id for o in self.objects)

    @property
    def floor(self):
        for o in self.objects:
            if o.role == "floor":
                return o
        return None

    def with_object(self, obj: SceneObject) -> "World":
        """Copy with the object of the same id replaced (or appended)."""
        objs = list(self.objects)
        for k, o in enumerate(objs):
            if o.id == obj.id:
                objs[k] = obj
                break
        else:
            objs.append(obj)
        return replace(self, objects=tuple(objs))

    def obstacle_footprints(self):
        """Footprints of collidable objects that overlap the agent's body height."""
        lo, hi = self.floor_height, self.floor_height + self.body_height
        polys = []
        for o in self.objects:
            if not o.collidable or o.role == "floor":
                continue
            y0, y1 = o.y_range
            if y1 > lo and y0 < hi:
                polys.append(o.footprint)
        return polys

    def rebuild_navgrid(self) -> "World":
        grid = build_navgrid(
            self.nav_bounds, self.walkable_grid.cell_size, self.obstacle_footprints(), self.nav_clearance
        )
        return replace(self, walkable_grid=grid)


def assign_tag(world: World, object_id: str, tag) -> World:
    """Return a copy of ``world`` whose object ``object_id`` carries ``tag`` (``None`` clears it)."""
    if tag is not None and not isinstance(tag, BugTag):
        tag = BugTag.for_kind(tag)
    obj = world.get(object_id)
    if obj.bug_tag == tag:
        return world
    return world.with_object(replace(obj, bug_tag=tag))


# --------------------------------------------------------------------------
# JSON format


def _need(d, key, where):
    if key not in d:
        raise SceneError(f"{where}: missing required field {key!r}")
    return d[key]


def _vec(v, n, where):
    try:
        out = tuple(float(x) for x in v)
    except (TypeError, ValueError):
        raise SceneError(f"{where}: expected {n} numbers, got {v!r}") from None
    if len(out) != n or not all(math.isfinite(x) for x in out):
        raise SceneError(f"{where}: expected {n} finite numbers, got {v!r}")
    return out


def _color(v, where):
    c = _vec(v, 3, where)
    if any(x < 0 or x > 255 or x != int(x) for x in c):
        raise SceneError(f"{where}: colour components must be integers in 0..255")
    return tuple(int(x) for x in c)


class _TextureCache:
    def __init__(self, base: Path):
        self.base = base
        self.cache = {}

    def get(self, ref, where):
        if ref is None:
            return None
        if not isinstance(ref, str):
            raise SceneError(f"{where}: texture must be a path or null")
        path = (self.base / ref).resolve()
        if path not in self.cache:
            try:
                self.cache[path] = Texture.load(path)
            except FileNotFoundError:
                raise SceneError(f"{where}: texture file not found: {ref}") from None
            except PPMError as e:
                raise SceneError(f"{where}: {e}") from None
        return self.cache[path]


def _parse_mesh(d, where):
    try:
        verts = np.asarray(_need(d, "vertices", where), dtype=np.float64)
        tris = np.asarray(_need(d, "triangles", where))
        uvs = np.asarray(d.get("uvs", np.zeros((len(verts), 2))), dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise SceneError(f"{where}: {e}") from None
    if tris.size and not np.issubdtype(tris.dtype, np.integer):
        raise SceneError(f"{where}.triangles: indices must be integers")
    if "normals" in d:
        normals = np.asarray(d["normals"], dtype=np.float64)
    else:
        normals = _vertex_normals(verts.reshape(-1, 3), tris.reshape(-1, 3))
    try:
        return Mesh(verts, normals, uvs, tris)
    except SceneError as e:
        raise SceneError(f"{where}: {e}") from None


def _vertex_normals(verts, tris):
    acc = np.zeros_like(verts)
    if len(tris) and (tris.min() < 0 or tris.max() >= len(verts)):
        raise SceneError("mesh: triangle index out of range")
    for a, b, c in tris:
        n = np.cross(verts[b] - verts[a], verts[c] - verts[a])
        acc[[a, b, c]] += n
    norm = np.linalg.norm(acc, axis=1, keepdims=True)
    acc = np.where(norm > 0, acc / np.where(norm > 0, norm, 1.0), np.array([0.0, 1.0, 0.0]))
    return acc


def _parse_object(d, where, textures: _TextureCache) -> SceneObject:
    if not isinstance(d, dict):
        raise SceneError(f"{where}: object entry must be a JSON object")
    oid = _need(d, "id", where)
    if not isinstance(oid, str) or not oid:
        raise SceneError(f"{where}.id: must be a non-empty string")
    where = f"{where}[{oid}]"
    uv_tile = float(d.get("uv_tile", 1.0))
    if "mesh" in d:
        mesh = _parse_mesh(d["mesh"], f"{where}.mesh")
    else:
        prim = _need(d, "primitive", where)
        if prim not in PRIMITIVES:
            raise SceneError(f"{where}.primitive: unknown primitive {prim!r}")
        mesh = PRIMITIVES[prim](_vec(d.get("size", (1, 1, 1)), 3, f"{where}.size"), uv_tile)
    t = d.get("transform", {})
    transform = Transform(
        _vec(t.get("position", (0, 0, 0)), 3, f"{where}.transform.position"),
        math.radians(float(t.get("yaw_deg", 0.0))),
        _vec(t.get("scale", (1, 1, 1)), 3, f"{where}.transform.scale"),
    )
    tag = d.get("tag")
    if tag is not None:
        try:
            tag = BugTag.for_kind(BugKind.parse(tag))
        except ValueError as e:
            raise SceneError(f"{where}.tag: {e}") from None
    try:
        return SceneObject(
            id=oid,
            mesh=mesh,
            texture=textures.get(d.get("texture"), f"{where}.texture"),
            uv_transform=d.get("uv_transform", IDENTITY_UV),
            transform=transform,
            collidable=bool(d.get("collidable", True)),
            render_layer=int(d.get("layer", 0)),
            bug_tag=tag,
            role=d.get("role", "prop"),
        )
    except SceneError as e:
        raise SceneError(f"{where}: {e}") from None


def parse_scene(doc: dict, base_dir=".") -> World:
    """Build a validated :class:`World` from a decoded scene document."""
    if not isinstance(doc, dict):
        raise SceneError("scene: top level must be a JSON object")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise SceneError(f"scene: unsupported schema_version {version}")
    textures = _TextureCache(Path(base_dir))
    objs_doc = doc.get("objects", [])
    if not isinstance(objs_doc, list):
        raise SceneError("objects: must be a list")
    objects = [_parse_object(o, f"objects[{k}]", textures) for k, o in enumerate(objs_doc)]

    floor = doc.get("floor", {})
    floor_height = float(floor.get("height", 0.0))
    if not any(o.role == "floor" for o in objects):
        half = float(floor.get("half_extent", 80.0))
        thick = float(floor.get("thickness", 2.0))
        tile = float(floor.get("uv_tile", 1.0))
        objects.insert(
            0,
            SceneObject(
                id="floor",
                mesh=box_mesh((2 * half, thick, 2 * half), tile),
                texture=textures.get(floor.get("texture"), "floor.texture"),
                transform=Transform((0.0, floor_height - thick / 2.0, 0.0)),
                collidable=True,
                role="floor",
            ),
        )

    nav = doc.get("nav", {})
    bounds = _vec(nav.get("bounds", (-10, -10, 10, 10)), 4, "nav.bounds")
    cell = float(nav.get("cell_size", 0.5))
    if cell <= 0:
        raise SceneError("nav.cell_size: must be positive")
    clearance = float(nav.get("clearance", 0.45))
    body = float(nav.get("body_height", 1.8))

    sky_doc = doc.get("sky", {})
    sky = SkyBox(
        _color(sky_doc.get("horizon", SkyBox.horizon), "sky.horizon"),
        _color(sky_doc.get("zenith", SkyBox.zenith), "sky.zenith"),
        _color(sky_doc.get("nadir", SkyBox.nadir), "sky.nadir"),
    )
    agent = doc.get("agent", {})
    ax, az = _vec(agent.get("position", (0.0, 0.0)), 2, "agent.position")
    pose = Pose((ax, floor_height, az), math.radians(float(agent.get("yaw_deg", 0.0))))

    placeholder = NavGrid((bounds[0], bounds[1]), cell, np.ones((1, 1), dtype=bool))
    world = World(
        objects=tuple(objects),
        floor_height=floor_height,
        walkable_grid=placeholder,
        sky=sky,
        agent_pose=pose,
        nav_bounds=bounds,
        nav_clearance=clearance,
        body_height=body,
    )
    try:
        return world.rebuild_navgrid()
    except ValueError as e:
        raise SceneError(f"nav: {e}") from None


def load_scene(path=None) -> World:
    """Load a scene file; ``None`` loads the bundled default scene."""
    if path is None:
        path = default_scene_path()
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise SceneError(f"scene file not found: {path}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SceneError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from None
    return parse_scene(doc, path.parent)


def default_scene_path() -> Path:
    return Path(str(resources.files("bugsight") / "data" / "default_scene.json"))


def _object_to_dict(o: SceneObject, texture_ref) -> dict:
    d = {
        "id": o.id,
        "mesh": {
            "vertices": o.mesh.vertices.tolist(),
            "normals": o.mesh.normals.tolist(),
            "uvs": o.mesh.uvs.tolist(),
            "triangles": o.mesh.triangles.tolist(),
        },
        "texture": texture_ref(o.texture),
        "uv_transform": o.uv_transform.tolist(),
        "transform": {
            "position": list(o.transform.position),
            "yaw_deg": math.degrees(o.transform.yaw),
            "scale": list(o.transform.scale),
        },
        "collidable": o.collidable,
        "layer": int(o.render_layer),
        "role": o.role,
    }
    if o.bug_tag is not None:
        d["tag"] = o.bug_tag.kind.value
    return d


def scene_to_dict(world: World, texture_ref=None) -> dict:
    """Serialise a world with explicit meshes.

    ``texture_ref`` maps a :class:`Texture` (or ``None``) to the string stored
    in the document; by default textures are referenced by content digest.
    """
    if texture_ref is None:
        texture_ref = lambda t: None if t is None else f"textures/{t.digest()[:16]}.ppm"  # noqa: E731
    x0, z0, _, _ = world.nav_bounds
    return {
        "schema_version": SCHEMA_VERSION,
        "floor": {"height": world.floor_height},
        "nav": {
            "bounds": list(world.nav_bounds),
            "cell_size": world.walkable_grid.cell_size,
            "clearance": world.nav_clearance,
            "body_height": world.body_height,
        },
        "sky": {"horizon": list(world.sky.horizon), "zenith": list(world.sky.zenith), "nadir": list(world.sky.nadir)},
        "agent": {
            "position": [world.agent_pose.position[0], world.agent_pose.position[2]],
            "yaw_deg": math.degrees(world.agent_pose.yaw),
        },
        "objects": [_object_to_dict(o, texture_ref) for o in world.objects],
    }


def save_scene(world: World, path) -> Path:
    """Write ``world`` as JSON plus PPM textures under ``<dir>/textures``."""
    path = Path(path)
    tex_dir = path.parent / "textures"
    written = {}

    def ref(t):
        if t is None:
            return None
        name = f"textures/{t.digest()[:16]}.ppm"
        if name not in written:
            tex_dir.mkdir(parents=True, exist_ok=True)
            write_ppm(path.parent / name, np.asarray(t.pixels))
            written[name] = True
        return name

    doc = scene_to_dict(world, ref)
    path.write_text(json.dumps(doc, indent=1))
    return path


def world_hash(world: World) -> str:
    """Content hash of everything that affects rendering and navigation."""
    h = hashlib.sha256()
    h.update(json.dumps(scene_to_dict(world), sort_keys=True).encode())
    for o in world.objects:
        if o.texture is not None:
            h.update(o.texture.pixels.tobytes())
    return h.hexdigest()
