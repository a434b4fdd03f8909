import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bugsight import _accel
from bugsight.bugs import BugState
from bugsight.render import (
    Camera,
    agent_camera,
    project_vertex,
    render_depth,
    render_label_image,
    render_mask,
    render_observation,
)
from bugsight.render.pipeline import sky_image
from bugsight.scene import Pose, SceneObject, Texture, Transform, box_mesh, parse_scene
from bugsight.tags import BugKind, TAG_COLORS

H = W = 84


def flat(rgb):
    return Texture.from_array(np.full((2, 2, 3), rgb, dtype=np.uint8))


def scene_with(*objects):
    base = parse_scene({"objects": [], "nav": {"bounds": [-3, -3, 3, 3]}})
    return replace(base, objects=base.objects + tuple(objects))


def test_empty_world_is_pure_sky(world):
    empty = replace(world, objects=())
    cam = Camera(Pose((0, 0, 0), 0.3))
    img = render_observation(empty, cam)
    assert np.array_equal(img, sky_image(empty, cam).transpose(2, 0, 1))


def test_black_screen_frame_is_zero(world):
    cam = agent_camera(world.agent_pose, 1.2)
    st_ = BugState(world, black_screen=True)
    assert not render_observation(world, cam, st_).any()
    m = render_mask(world, cam, st_)
    assert (m == np.array(TAG_COLORS[BugKind.BLACK_SCREEN])[:, None, None]).all()


def test_render_is_deterministic(world, look):
    cam = agent_camera(look(3, -3, -4, 6), 1.2)
    a = render_observation(world, cam, frame_index=4, rng_seed=9)
    b = render_observation(world, cam, frame_index=4, rng_seed=9)
    assert a.shape == (3, H, W) and a.dtype == np.uint8
    assert a.tobytes() == b.tobytes()


@pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")
def test_backends_agree(world, look):
    rng = np.random.default_rng(5)
    g = world.walkable_grid
    cells = g.walkable_cells()
    for _ in range(6):
        x, z = g.center(cells[rng.integers(len(cells))])
        cam = agent_camera(Pose((x, 0, z), rng.uniform(0, 2 * math.pi)), 1.2)
        for kind_state in (None, BugState(world, backface_kind=BugKind.GEOMETRY_CLIPPING, near_plane_override=2.0)):
            a = render_observation(world, cam, kind_state, 3, 1, backend="numba")
            b = render_observation(world, cam, kind_state, 3, 1, backend="numpy")
            assert np.array_equal(a, b)
            la = render_label_image(world, cam, kind_state, 3, 1, backend="numba")
            lb = render_label_image(world, cam, kind_state, 3, 1, backend="numpy")
            assert np.array_equal(la, lb)


def test_project_vertex_cases():
    cam = Camera(Pose((0, 0, 0), 0.0))
    mid = (cam.near_plane + cam.far_plane) / 2
    sx, sy, d = project_vertex(cam, (mid, 0, 0))
    assert (sx, sy) == (42.0, 42.0) and d == pytest.approx(mid)
    assert project_vertex(cam, (0.5 * cam.near_plane, 0, 0)) is None
    # top edge of the frustum lands on screen row 0
    depth = 7.0
    top = depth * math.tan(cam.vertical_fov / 2)
    sx, sy, _ = project_vertex(cam, (depth, top, 0))
    assert sx == pytest.approx(42.0) and sy == pytest.approx(0.0, abs=1e-9)
    # +z world is to the right when facing +x
    assert project_vertex(cam, (5, 0, 1))[0] > 42


def test_camera_validation():
    with pytest.raises(ValueError):
        Camera(Pose((0, 0, 0)), near_plane=0.0)
    with pytest.raises(ValueError):
        Camera(Pose((0, 0, 0)), near_plane=5, far_plane=1)
    with pytest.raises(ValueError):
        Camera(Pose((0, 0, 0)), vertical_fov=math.pi)


def _box_exit_all_back(eye, lo, hi, cam):
    """Ray-cast oracle: from inside the box every pixel ray exits through a face beyond the near plane."""
    right, up, fwd = cam.basis()
    rays = cam.pixel_rays()
    dirs = rays[..., 0:1] * right + rays[..., 1:2] * up + rays[..., 2:3] * fwd
    with np.errstate(divide="ignore"):
        t1 = (lo - eye) / dirs
        t2 = (hi - eye) / dirs
    t_exit = np.minimum.reduce(np.maximum(t1, t2), axis=-1)  # in units of view depth
    return np.all((t_exit > cam.near_plane) & (t_exit < cam.far_plane))


def test_camera_inside_box_sees_back_faces(world):
    crate = world.get("crate_1")
    lo, hi = crate.world_vertices.min(axis=0), crate.world_vertices.max(axis=0)
    cx, cz = (lo[0] + hi[0]) / 2, (lo[2] + hi[2]) / 2
    cam = agent_camera(Pose((cx, 0, cz), 0.3), 1.2)
    assert lo[1] < cam.eye[1] < hi[1]
    assert _box_exit_all_back(cam.eye, lo, hi, cam)
    lab = render_label_image(world, cam)
    assert (lab == BugKind.CAMERA_CLIPPING.label).all()
    st_ = BugState(world, backface_kind=BugKind.GEOMETRY_CLIPPING)
    assert (render_label_image(world, cam, st_) == BugKind.GEOMETRY_CLIPPING.label).all()


def test_depth_buffer_range(world, look):
    cam = agent_camera(look(0, 0, 5, 5), 1.2)
    z = render_depth(world, cam)
    assert z.min() >= cam.near_plane and z.max() <= cam.far_plane


def test_nearer_fragment_wins():
    red = SceneObject("red", box_mesh((1, 1, 1)), flat((200, 0, 0)), transform=Transform((3, 0, 0)))
    blue = SceneObject("blue", box_mesh((1, 4, 4)), flat((0, 0, 200)), transform=Transform((6, 0, 0)))
    w = scene_with(red, blue)
    cam = Camera(Pose((0, 0, 0), 0.0))
    img = render_observation(w, cam)
    c = img[:, 42, 42]
    assert c[0] > 0 and c[2] == 0
    # the blue one is visible around the red one
    assert img[2, 42, 42 + 20] > 0 and img[0, 42, 42 + 20] == 0


def test_upper_layer_drawn_over_nearer_geometry():
    red = SceneObject("red", box_mesh((1, 1, 1)), flat((200, 0, 0)), transform=Transform((3, 0, 0)))
    blue = SceneObject("blue", box_mesh((1, 4, 4)), flat((0, 0, 200)), transform=Transform((6, 0, 0)),
                       render_layer=1)
    img = render_observation(scene_with(red, blue), Camera(Pose((0, 0, 0), 0.0)))
    c = img[:, 42, 42]
    assert c[2] > 0 and c[0] == 0


def test_coplanar_faces_flicker_deterministically():
    a = SceneObject("a", box_mesh((1, 3, 3)), flat((200, 0, 0)), transform=Transform((5, 0, 0)))
    b = SceneObject("b", box_mesh((1, 3, 3)), flat((0, 200, 0)), transform=Transform((5, 0, 0)))
    w = scene_with(a, b)
    cam = Camera(Pose((0, 0, 0), 0.0))
    f0 = render_observation(w, cam, frame_index=0)
    f1 = render_observation(w, cam, frame_index=1)
    patch = f0[:, 36:48, 36:48]
    red = (patch[0] > 0).mean()
    assert 0.2 < red < 0.8  # both textures show
    assert not np.array_equal(f0, f1)
    assert np.array_equal(f0, render_observation(w, cam, frame_index=0))


def test_missing_texture_is_pink():
    box = SceneObject("m", box_mesh((1, 3, 3)), None, transform=Transform((4, 0, 0)))
    img = render_observation(scene_with(box), Camera(Pose((0, 0, 0), 0.0)))
    assert tuple(img[:, 42, 42]) == (255, 0, 255)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_mask_black_without_bugs(world, seed):
    rng = np.random.default_rng(seed)
    g = world.walkable_grid
    cells = g.walkable_cells()
    x, z = g.center(cells[rng.integers(len(cells))])
    cam = agent_camera(Pose((x, 0, z), rng.uniform(0, 2 * math.pi)), 1.2)
    assert not render_label_image(world, cam, frame_index=int(rng.integers(100))).any()


def test_mask_colours_are_registered(world, look):
    cam = agent_camera(look(-5, -5, 0, 0), 1.2)  # inside crate_1
    m = render_mask(world, cam, BugState(world, tear=(40, 1)))
    cols = {tuple(c) for c in m.reshape(3, -1).T}
    assert cols <= set(TAG_COLORS.values()) | {(0, 0, 0)}


def test_env_switch_selects_numpy(world, look):
    import os
    import subprocess
    import sys

    code = (
        "import sys, numpy as np\n"
        "from bugsight import _accel\n"
        "from bugsight.scene import load_scene, Pose\n"
        "from bugsight.render import agent_camera, render_observation\n"
        "w = load_scene(None)\n"
        "img = render_observation(w, agent_camera(Pose((-1.0, 0.0, -7.0), 1.2), 1.2))\n"
        "sys.stdout.write(str(_accel.USE_NUMBA) + ' ' + str(int(img.astype(np.int64).sum())))\n"
    )
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, BUGSIGHT_NUMBA=flag)
        out[flag] = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                                   check=True).stdout.split()
    assert out["0"][0] == "False" and out["1"][0] == "True"
    assert out["0"][1] == out["1"][1]
