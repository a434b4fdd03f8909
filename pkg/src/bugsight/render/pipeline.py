"""Observation and bug-mask rendering.

Both images come from the same triangle setup.  The observation pass culls
back faces; the mask pass keeps them so that a viewer who can see inside a
mesh gets those pixels labelled.  Objects on render layers above zero are
drawn afterwards with a fresh depth buffer, i.e. on top of everything else.
"""
import math
import weakref
from collections import deque
from dataclasses import dataclass

import numpy as np

from ..tags import BugKind, label_palette
from .camera import SUBPIXEL, Camera
from .raster import fill_triangles

DEPTH_EPS = 1e-5
LIGHT_DIR = np.array([0.35, 1.0, 0.2]) / np.linalg.norm([0.35, 1.0, 0.2])
AMBIENT = 0.45
_PALETTE = label_palette()


@dataclass
class Pack:
    """Flattened world geometry, cached per World instance."""

    vertices: np.ndarray  # (Nv, 3) world space
    uvs: np.ndarray  # (Nv, 2) after each object's uv transform
    triangles: np.ndarray  # (Nt, 3) global vertex indices
    tex: np.ndarray  # (Nt,) atlas texture id, -1 for missing
    shade: np.ndarray  # (Nt,) Lambert factor
    label: np.ndarray  # (Nt,) tag label, 0 if untagged
    layer: np.ndarray  # (Nt,)
    atlas: np.ndarray
    tex_off: np.ndarray
    tex_w: np.ndarray
    tex_h: np.ndarray


_pack_cache = weakref.WeakKeyDictionary()


def pack_world(world) -> Pack:
    cached = _pack_cache.get(world)
    if cached is not None and cached[0] is world:
        return cached[1]
    verts, uvs, tris, tex, shade, label, layer = [], [], [], [], [], [], []
    tex_ids, atlas_parts, offs, ws, hs = {}, [], [], [], []
    base = 0
    total = 0
    for obj in world.objects:
        v = obj.world_vertices
        t = obj.mesh.triangles + base
        base += len(v)
        verts.append(v)
        uvs.append(obj.world_uvs)
        tris.append(t)
        n = len(t)
        if obj.texture is None:
            tid = -1
        else:
            key = id(obj.texture)
            if key not in tex_ids:
                tex_ids[key] = len(offs)
                px = np.ascontiguousarray(obj.texture.pixels).reshape(-1)
                offs.append(total)
                ws.append(obj.texture.width)
                hs.append(obj.texture.height)
                atlas_parts.append(px)
                total += px.size
            tid = tex_ids[key]
        tex.append(np.full(n, tid, dtype=np.int64))
        a, b, c = v[obj.mesh.triangles[:, 0]], v[obj.mesh.triangles[:, 1]], v[obj.mesh.triangles[:, 2]]
        nrm = np.cross(b - a, c - a)
        length = np.linalg.norm(nrm, axis=1)
        nrm = nrm / np.where(length > 0, length, 1.0)[:, None]
        shade.append(AMBIENT + (1.0 - AMBIENT) * np.maximum(nrm @ LIGHT_DIR, 0.0))
        label.append(np.full(n, obj.bug_tag.kind.label if obj.bug_tag is not None else 0, dtype=np.int64))
        layer.append(np.full(n, int(obj.render_layer), dtype=np.int64))

    def cat(parts, shape, dtype):
        return np.concatenate(parts).astype(dtype) if parts else np.zeros(shape, dtype=dtype)

    pack = Pack(
        vertices=cat(verts, (0, 3), np.float64),
        uvs=cat(uvs, (0, 2), np.float64),
        triangles=cat(tris, (0, 3), np.int64),
        tex=cat(tex, (0,), np.int64),
        shade=cat(shade, (0,), np.float64),
        label=cat(label, (0,), np.int64),
        layer=cat(layer, (0,), np.int64),
        atlas=cat(atlas_parts, (0,), np.uint8),
        tex_off=np.asarray(offs, dtype=np.int64),
        tex_w=np.asarray(ws, dtype=np.int64),
        tex_h=np.asarray(hs, dtype=np.int64),
    )
    _pack_cache[world] = (world, pack)
    return pack


def _clip_near(tv, tuv, near):
    """Clip view-space triangles against ``z >= near``.

    Returns clipped vertices, uvs and the source triangle index of each output
    triangle.  Intersections are always interpolated from the inside vertex
    towards the outside one, so an edge shared by two triangles is cut at
    bit-identical points.
    """
    inside = tv[:, :, 2] >= near
    n_in = inside.sum(axis=1)
    keep = np.nonzero(n_in == 3)[0]
    out_v, out_uv, out_src = [tv[keep]], [tuv[keep]], [keep]
    for t in np.nonzero((n_in > 0) & (n_in < 3))[0]:
        poly_v, poly_uv = [], []
        for k in range(3):
            a, b = k, (k + 1) % 3
            ia, ib = inside[t, a], inside[t, b]
            if ia:
                poly_v.append(tv[t, a])
                poly_uv.append(tuv[t, a])
            if ia != ib:
                i, o = (a, b) if ia else (b, a)
                s = (near - tv[t, i, 2]) / (tv[t, o, 2] - tv[t, i, 2])
                p = tv[t, i] + s * (tv[t, o] - tv[t, i])
                p[2] = near
                poly_v.append(p)
                poly_uv.append(tuv[t, i] + s * (tuv[t, o] - tuv[t, i]))
        for k in range(1, len(poly_v) - 1):
            out_v.append(np.stack([poly_v[0], poly_v[k], poly_v[k + 1]])[None])
            out_uv.append(np.stack([poly_uv[0], poly_uv[k], poly_uv[k + 1]])[None])
            out_src.append(np.array([t]))
    return np.concatenate(out_v), np.concatenate(out_uv), np.concatenate(out_src).astype(np.int64)


@dataclass
class Prepared:
    fx: np.ndarray
    fy: np.ndarray
    bias: np.ndarray
    iz: np.ndarray
    uz: np.ndarray
    vz: np.ndarray
    back: np.ndarray
    src: np.ndarray
    bbox: np.ndarray

    def select(self, idx):
        return Prepared(*(getattr(self, f)[idx] for f in self.__dataclass_fields__))


def prepare_triangles(pack: Pack, camera: Camera, idx=None) -> Prepared:
    """View transform, near clipping, projection and fixed-point setup."""
    tris = pack.triangles if idx is None else pack.triangles[idx]
    src_ids = np.arange(len(pack.triangles)) if idx is None else np.asarray(idx)
    view = camera.to_view(pack.vertices)
    tv = view[tris]
    tuv = pack.uvs[tris]
    # whole triangles beyond the far plane never pass the depth test
    near_enough = tv[:, :, 2].min(axis=1) < camera.far_plane
    tv, tuv, src_ids = tv[near_enough], tuv[near_enough], src_ids[near_enough]
    tv, tuv, local = _clip_near(tv, tuv, camera.near_plane)
    src = src_ids[local]

    f = camera.focal
    z = tv[:, :, 2]
    sx = camera.width / 2.0 + f * tv[:, :, 0] / z
    sy = camera.height / 2.0 - f * tv[:, :, 1] / z
    fx = np.rint(sx * SUBPIXEL).astype(np.int64)
    fy = np.rint(sy * SUBPIXEL).astype(np.int64)
    iz = 1.0 / z
    uz = tuv[:, :, 0] * iz
    vz = tuv[:, :, 1] * iz

    area = (fx[:, 1] - fx[:, 0]) * (fy[:, 2] - fy[:, 0]) - (fy[:, 1] - fy[:, 0]) * (fx[:, 2] - fx[:, 0])
    nz = area != 0
    fx, fy, iz, uz, vz, src, area = fx[nz], fy[nz], iz[nz], uz[nz], vz[nz], src[nz], area[nz]
    # counter-clockwise front faces come out with negative area in y-down
    # screen space; they are re-wound so every triangle has positive area
    back = area > 0
    order = np.where(back[:, None], [0, 1, 2], [0, 2, 1])
    fx, fy, iz, uz, vz = (np.take_along_axis(a, order, axis=1) for a in (fx, fy, iz, uz, vz))

    # edge k runs from vertex (k+1)%3 to (k+2)%3; top-left style tie rule
    ex = np.stack([fx[:, 2] - fx[:, 1], fx[:, 0] - fx[:, 2], fx[:, 1] - fx[:, 0]], axis=1)
    ey = np.stack([fy[:, 2] - fy[:, 1], fy[:, 0] - fy[:, 2], fy[:, 1] - fy[:, 0]], axis=1)
    owns = (ey > 0) | ((ey == 0) & (ex < 0))
    bias = np.where(owns, 0, -1).astype(np.int64)

    xa = -((-(fx.min(axis=1) - SUBPIXEL // 2)) // SUBPIXEL)
    xb = (fx.max(axis=1) - SUBPIXEL // 2) // SUBPIXEL
    ya = -((-(fy.min(axis=1) - SUBPIXEL // 2)) // SUBPIXEL)
    yb = (fy.max(axis=1) - SUBPIXEL // 2) // SUBPIXEL
    xa = np.maximum(xa, 0)
    ya = np.maximum(ya, 0)
    xb = np.minimum(xb, camera.width - 1)
    yb = np.minimum(yb, camera.height - 1)
    bbox = np.stack([xa, xb, ya, yb], axis=1).astype(np.int64)
    vis = (xa <= xb) & (ya <= yb)
    prep = Prepared(fx, fy, bias, iz, uz, vz, back, src, bbox)
    return prep.select(np.nonzero(vis)[0])


def tie_bits(width: int, height: int, frame_index: int, seed: int) -> np.ndarray:
    """Per-pixel coin flips for depth ties, a hash of (x, y, frame, seed)."""
    y, x = np.mgrid[0:height, 0:width].astype(np.uint64)
    h = (x * np.uint64(0x9E3779B97F4A7C15)) ^ (y * np.uint64(0xC2B2AE3D27D4EB4F))
    mask = 0xFFFFFFFFFFFFFFFF
    h ^= np.uint64((frame_index * 0x165667B19E3779F9) & mask)
    h ^= np.uint64((seed * 0x27D4EB2F165667C5) & mask)
    h ^= h >> np.uint64(33)
    h *= np.uint64(0xFF51AFD7ED558CCD)
    h ^= h >> np.uint64(33)
    h *= np.uint64(0xC4CEB9FE1A85EC53)
    h ^= h >> np.uint64(33)
    return (h & np.uint64(1)).astype(bool)


def sky_image(world, camera: Camera) -> np.ndarray:
    rays = camera.pixel_rays()
    col = world.sky.color(rays)
    return np.clip(np.rint(col), 0, 255).astype(np.uint8)


def below_floor(world, camera: Camera) -> np.ndarray:
    """Pixels whose ray, followed to the far plane, ends under the floor."""
    rays = camera.pixel_rays()
    y_far = camera.eye[1] + rays[:, :, 1] * camera.far_plane
    return y_far < world.floor_height


def _effective(world, camera, bug_state):
    scene = bug_state.world if bug_state is not None else world
    if bug_state is not None and bug_state.near_plane_override is not None:
        camera = camera.with_near(bug_state.near_plane_override)
    return scene, camera


def _passes(pack, camera, cull_back, frame_index, seed, backface_label,
            color, labels, on_base_done=None, backend=None):
    H, W = camera.height, camera.width
    prep = prepare_triangles(pack, camera)
    if cull_back:
        prep = prep.select(np.nonzero(~prep.back)[0])
    bits = tie_bits(W, H, frame_index, seed)
    layers = pack.layer[prep.src]
    for li, layer in enumerate(sorted(set(layers.tolist()) | {0})):
        sel = prep.select(np.nonzero(layers == layer)[0])
        zbuf = np.full((H, W), camera.far_plane, dtype=np.float64)
        state = np.zeros((H, W), dtype=np.int8)
        fill_triangles(
            sel.fx, sel.fy, sel.bias, sel.iz, sel.uz, sel.vz, sel.back,
            pack.tex[sel.src], pack.shade[sel.src], pack.label[sel.src], sel.bbox,
            pack.atlas, pack.tex_off, pack.tex_w, pack.tex_h,
            zbuf, state, color, labels, bits,
            float(camera.near_plane), float(camera.far_plane), DEPTH_EPS, int(backface_label),
            backend=backend,
        )
        if li == 0 and on_base_done is not None:
            on_base_done(state, zbuf)
    return zbuf


def _backface_label(bug_state):
    kind = getattr(bug_state, "backface_kind", None) or BugKind.CAMERA_CLIPPING
    return BugKind(kind).label


def render_observation(world, camera: Camera, bug_state=None, frame_index: int = 0,
                       rng_seed: int = 0, history=None, backend=None) -> np.ndarray:
    """Render the player's view as a channel-major ``(3, H, W)`` uint8 frame.

    ``history`` supplies earlier output frames (most recent last) and is only
    consulted when a screen-tear effect is active.
    """
    scene, cam = _effective(world, camera, bug_state)
    color = sky_image(scene, cam).copy()
    labels = np.zeros((cam.height, cam.width), dtype=np.int16)
    _passes(pack_world(scene), cam, True, frame_index, rng_seed, 0, color, labels, backend=backend)
    frame = np.ascontiguousarray(color.transpose(2, 0, 1))
    return _post_observation(frame, bug_state, history)


def _post_observation(frame, bug_state, history):
    if bug_state is None:
        return frame
    if bug_state.tear is not None:
        row, lag = bug_state.tear
        if history is None or len(history) < lag:
            raise ValueError(f"screen tear with lag {lag} needs {lag} previous frame(s)")
        frame[:, row:, :] = history[-lag][:, row:, :]
    if bug_state.black_screen:
        frame[:] = 0
    return frame


def render_label_image(world, camera: Camera, bug_state=None, frame_index: int = 0,
                       rng_seed: int = 0, backend=None) -> np.ndarray:
    """Integer label image (0 = no bug, otherwise ``BugKind.label``)."""
    scene, cam = _effective(world, camera, bug_state)
    labels = np.zeros((cam.height, cam.width), dtype=np.int16)
    color = np.zeros((cam.height, cam.width, 3), dtype=np.uint8)
    below = below_floor(scene, cam)

    def sky_rule(state, zbuf):
        labels[(state == 0) & below] = BugKind.BOUNDARY_HOLE.label

    _passes(pack_world(scene), cam, False, frame_index, rng_seed, _backface_label(bug_state),
            color, labels, on_base_done=sky_rule, backend=backend)
    if bug_state is not None:
        if bug_state.tear is not None:
            labels[bug_state.tear[0]:, :] = BugKind.SCREEN_TEAR.label
        if bug_state.black_screen:
            labels[:] = BugKind.BLACK_SCREEN.label
    return labels


def labels_to_mask(labels: np.ndarray) -> np.ndarray:
    """Colour a label image into a channel-major RGB mask."""
    return np.ascontiguousarray(_PALETTE[labels].transpose(2, 0, 1))


def render_mask(world, camera: Camera, bug_state=None, frame_index: int = 0,
                rng_seed: int = 0, backend=None) -> np.ndarray:
    """Render the bug mask as a channel-major ``(3, H, W)`` uint8 image."""
    return labels_to_mask(render_label_image(world, camera, bug_state, frame_index, rng_seed, backend))


def render_depth(world, camera: Camera, bug_state=None, frame_index: int = 0, rng_seed: int = 0,
                 backend=None) -> np.ndarray:
    """Depth buffer of the observation's base pass (``far_plane`` where nothing was drawn)."""
    scene, cam = _effective(world, camera, bug_state)
    out = {}
    color = np.zeros((cam.height, cam.width, 3), dtype=np.uint8)
    labels = np.zeros((cam.height, cam.width), dtype=np.int16)

    def grab(state, zbuf):
        out["z"] = zbuf.copy()

    _passes(pack_world(scene), cam, True, frame_index, rng_seed, 0, color, labels,
            on_base_done=grab, backend=backend)
    return out["z"]


class FrameHistory:
    """Bounded buffer of recent output frames for the screen-tear effect."""

    def __init__(self, maxlen: int = 8):
        self._frames = deque(maxlen=maxlen)

    def push(self, frame):
        self._frames.append(frame)

    def __len__(self):
        return len(self._frames)

    def __getitem__(self, k):
        return self._frames[k]


def fov_for(width, height, horizontal_deg):
    """Vertical fov (radians) matching a horizontal fov for the given aspect."""
    return 2.0 * math.atan(math.tan(math.radians(horizontal_deg) / 2.0) * height / width)
