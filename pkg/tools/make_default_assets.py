"""Regenerate the bundled default scene and its textures.

Run from the repository root:  python tools/make_default_assets.py
The outputs are checked in; this script only documents how they were made.
"""
import json
from pathlib import Path

import numpy as np

from bugsight.ppm import write_ppm

OUT = Path(__file__).resolve().parents[1] / "src" / "bugsight" / "data"
N = 32


def _noise(rng, amp):
    return rng.uniform(-amp, amp, size=(N, N, 1))


def floor_tiles(rng):
    img = np.zeros((N, N, 3)) + (150, 140, 120)
    yy, xx = np.mgrid[0:N, 0:N]
    checker = ((yy // 16 + xx // 16) % 2)[..., None]
    img = img + checker * (25, 22, 18)
    grout = ((yy % 16 == 0) | (xx % 16 == 0))[..., None]
    img = np.where(grout, (90, 85, 75), img)
    return img + _noise(rng, 8)


def bricks(rng):
    img = np.zeros((N, N, 3)) + (150, 60, 45)
    yy, xx = np.mgrid[0:N, 0:N]
    row = yy // 8
    offset = (row % 2) * 8
    mortar = (yy % 8 == 0) | ((xx + offset) % 16 == 0)
    shade = rng.uniform(-20, 20, size=(N // 8, 2 + N // 16))
    img = img + shade[row, (xx + offset) // 16][..., None]
    img = np.where(mortar[..., None], (200, 195, 185), img)
    return img + _noise(rng, 6)


def crate(rng, base=(165, 110, 55)):
    img = np.zeros((N, N, 3)) + base
    yy, xx = np.mgrid[0:N, 0:N]
    planks = (yy % 8 == 0)[..., None]
    img = np.where(planks, np.asarray(base) * 0.6, img)
    border = ((xx < 3) | (xx >= N - 3) | (yy < 3) | (yy >= N - 3))[..., None]
    img = np.where(border, np.asarray(base) * 0.5, img)
    diag = (np.abs(xx - yy) < 2)[..., None]
    img = np.where(diag & ~border, np.asarray(base) * 0.7, img)
    return img + _noise(rng, 10)


def metal(rng):
    img = np.zeros((N, N, 3)) + (110, 125, 145)
    yy, xx = np.mgrid[0:N, 0:N]
    rivet = (((xx - 4) % 12 < 2) & ((yy - 4) % 12 < 2))[..., None]
    img = np.where(rivet, (60, 65, 75), img)
    img = img + (np.sin(yy / 2.0) * 6)[..., None]
    return img + _noise(rng, 5)


def stone(rng):
    base = rng.uniform(90, 170, size=(8, 8, 1))
    img = np.kron(base, np.ones((4, 4, 1))) * np.array([1.0, 1.0, 0.95])
    return img + _noise(rng, 15)


def stripes(rng):
    yy, xx = np.mgrid[0:N, 0:N]
    band = ((xx + yy) // 6) % 2
    img = np.where(band[..., None] == 0, (230, 190, 30), (40, 40, 40))
    return img + _noise(rng, 6)


def panel(rng):
    img = np.zeros((N, N, 3)) + (60, 140, 80)
    yy, xx = np.mgrid[0:N, 0:N]
    seams = ((xx % 16 == 15) | (yy % 16 == 15))[..., None]
    img = np.where(seams, (30, 80, 40), img)
    return img + _noise(rng, 8)


TEXTURES = {
    "floor": floor_tiles,
    "bricks": bricks,
    "crate": crate,
    "crate_dark": lambda rng: crate(rng, (120, 80, 50)),
    "metal": metal,
    "stone": stone,
    "stripes": stripes,
    "panel": panel,
}


def make_textures():
    rng = np.random.default_rng(20240101)
    (OUT / "textures").mkdir(parents=True, exist_ok=True)
    for name, fn in TEXTURES.items():
        img = np.clip(np.round(fn(rng)), 0, 255).astype(np.uint8)
        write_ppm(OUT / "textures" / f"{name}.ppm", img)


def _box(oid, size, pos, tex, yaw=0.0, role="prop", uv_tile=1.0):
    return {
        "id": oid,
        "primitive": "box",
        "size": list(size),
        "uv_tile": uv_tile,
        "texture": f"textures/{tex}.ppm",
        "transform": {"position": list(pos), "yaw_deg": yaw},
        "collidable": True,
        "layer": 0,
        "role": role,
    }


def make_scene():
    objects = [
        _box("wall_1", (28, 3, 4), (0, 1.5, 12), "bricks", role="boundary", uv_tile=1.5),
        _box("wall_2", (28, 3, 4), (0, 1.5, -12), "bricks", role="boundary", uv_tile=1.5),
        _box("wall_3", (4, 3, 28), (12, 1.5, 0), "bricks", role="boundary", uv_tile=1.5),
        _box("wall_4", (4, 3, 28), (-12, 1.5, 0), "bricks", role="boundary", uv_tile=1.5),
        _box("crate_1", (1.5, 1.5, 1.5), (-5, 0.75, -5), "crate", yaw=20, uv_tile=1.5),
        _box("crate_2", (1, 1, 1), (4, 0.5, -6), "crate_dark"),
        _box("crate_3", (2, 1.2, 1.2), (5, 0.6, 4), "metal", yaw=35, uv_tile=1.2),
        _box("crate_4", (1.2, 2.0, 1.2), (-6, 1.0, 5), "panel", uv_tile=1.0),
        _box("crate_5", (1, 0.8, 1), (1.5, 0.4, -1.5), "crate", yaw=-15),
        _box("crate_6", (1.3, 1.3, 1.3), (7.5, 0.65, 7.5), "crate_dark", yaw=10, uv_tile=1.3),
        _box("pillar_1", (0.8, 2.6, 0.8), (-2, 1.3, 3), "stone", uv_tile=0.8),
        _box("pillar_2", (0.8, 2.6, 0.8), (7, 1.3, -2), "stone", uv_tile=0.8),
    ]
    for oid, size, pos, yaw in (
        ("ramp_1", (3, 1.2, 2), (-6.5, 0.6, -0.5), 90),
        ("ramp_2", (2.5, 1.0, 1.8), (2.5, 0.5, 7.5), -30),
    ):
        objects.append(
            {
                "id": oid,
                "primitive": "wedge",
                "size": list(size),
                "uv_tile": 1.0,
                "texture": "textures/stripes.ppm",
                "transform": {"position": list(pos), "yaw_deg": yaw},
                "collidable": True,
                "layer": 0,
                "role": "prop",
            }
        )
    doc = {
        "schema_version": 1,
        "floor": {"height": 0.0, "half_extent": 80.0, "thickness": 2.0, "texture": "textures/floor.ppm", "uv_tile": 2.0},
        "sky": {"horizon": [170, 205, 235], "zenith": [25, 60, 150], "nadir": [200, 200, 210]},
        "nav": {"bounds": [-10, -10, 10, 10], "cell_size": 0.5, "clearance": 0.45, "body_height": 1.8},
        "agent": {"position": [-1.0, -7.0], "yaw_deg": 90},
        "objects": objects,
    }
    (OUT / "default_scene.json").write_text(json.dumps(doc, indent=1) + "\n")


if __name__ == "__main__":
    make_textures()
    make_scene()
