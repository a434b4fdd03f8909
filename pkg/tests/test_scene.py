import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bugsight import scene as sc
from bugsight.agent.navgrid import point_polygon_distance
from bugsight.render import agent_camera, render_label_image
from bugsight.scene import Pose, SceneError, assign_tag, load_scene, parse_scene, save_scene, world_hash
from bugsight.tags import BACKGROUND, TAG_COLORS, BugKind, BugTag


def test_default_scene_contents(world):
    roles = [o.role for o in world.objects]
    assert len(world.objects) >= 8
    assert roles.count("floor") == 1
    assert roles.count("boundary") == 4
    ids = [o.id for o in world.objects]
    assert len(ids) == len(set(ids))


def test_walkable_cells_clear_of_obstacles(world):
    g = world.walkable_grid
    centers = np.array([g.center(c) for c in g.walkable_cells()])
    for poly in world.obstacle_footprints():
        assert point_polygon_distance(centers, poly).min() > 0


def test_floor_under_every_walkable_cell(world):
    floor = world.floor
    (x0, z0), (x1, z1) = floor.footprint.min(axis=0), floor.footprint.max(axis=0)
    g = world.walkable_grid
    for c in g.walkable_cells():
        x, z = g.center(c)
        assert x0 <= x <= x1 and z0 <= z <= z1
    assert floor.y_range[1] == pytest.approx(world.floor_height)


def _doc(objects):
    return {"objects": objects, "nav": {"bounds": [-3, -3, 3, 3]}}


def test_triangle_index_out_of_range():
    bad = {"id": "tri", "mesh": {"vertices": [[0, 0, 0], [1, 0, 0], [0, 1, 0]], "triangles": [[0, 1, 3]]}}
    with pytest.raises(SceneError, match="out of range"):
        parse_scene(_doc([bad]))


def test_floor_only_scene_is_valid():
    w = parse_scene(_doc([]))
    assert [o.role for o in w.objects] == ["floor"]
    assert len(w.walkable_grid.walkable_cells()) > 0


def test_parse_errors_name_the_field(tmp_path):
    p = tmp_path / "s.json"
    p.write_text('{"objects": [ }')
    with pytest.raises(SceneError, match=r"s.json:1:"):
        load_scene(p)
    with pytest.raises(SceneError, match=r"objects\[0\]: missing required field 'id'"):
        parse_scene(_doc([{"primitive": "box"}]))
    with pytest.raises(SceneError, match="unknown primitive"):
        parse_scene(_doc([{"id": "a", "primitive": "sphere"}]))


def test_duplicate_ids_rejected():
    o = {"id": "a", "primitive": "box", "transform": {"position": [2, 0.5, 2]}}
    with pytest.raises(SceneError):
        parse_scene(_doc([o, dict(o)]))


def test_round_trip(world, tmp_path):
    path = save_scene(world, tmp_path / "scene.json")
    again = load_scene(path)
    assert again == world
    assert world_hash(again) == world_hash(world)


def test_tag_colors_distinct_and_not_background():
    cols = list(TAG_COLORS.values())
    assert len(cols) == len(BugKind) == 10
    assert len(set(cols)) == 10
    assert BACKGROUND not in cols


def test_assign_tag_renders_and_clears(world, look):
    pose = look(-2, -2, -5, -5)
    cam = agent_camera(pose, 1.2)
    tagged = assign_tag(world, "crate_1", BugTag.for_kind(BugKind.TEXTURE_MISSING))
    lab = render_label_image(tagged, cam)
    assert (lab == BugKind.TEXTURE_MISSING.label).sum() > 100
    assert set(np.unique(lab)) <= {0, BugKind.TEXTURE_MISSING.label}
    # idempotent, and clearing gives the untagged world back
    assert assign_tag(tagged, "crate_1", BugTag.for_kind(BugKind.TEXTURE_MISSING)) is tagged
    cleared = assign_tag(tagged, "crate_1", None)
    assert cleared == world
    assert not render_label_image(cleared, cam).any()


def test_assign_tag_unknown_object(world):
    with pytest.raises(KeyError):
        assign_tag(world, "no_such_thing", BugKind.BLACK_SCREEN)


def test_box_normals_unit_and_outward():
    m = sc.box_mesh((2, 1, 3))
    assert np.allclose(np.linalg.norm(m.normals, axis=1), 1, atol=1e-6)
    v = m.vertices[m.triangles]
    n = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    centroid = v.mean(axis=1)
    # counter-clockwise front faces point away from the box centre
    assert np.all(np.einsum("ij,ij->i", n, centroid) > 0)


@settings(max_examples=50, deadline=None)
@given(st.floats(-1e3, 1e3, allow_nan=False))
def test_pose_yaw_normalised(y):
    p = Pose((0, 0, 0), y)
    assert 0 <= p.yaw < 2 * math.pi
    assert math.isclose(math.cos(p.yaw), math.cos(y), abs_tol=1e-9)


def test_scene_file_round_trip_json(world, tmp_path):
    path = save_scene(world, tmp_path / "scene.json")
    doc = json.loads(path.read_text())
    assert {o["id"] for o in doc["objects"]} == {o.id for o in world.objects}
