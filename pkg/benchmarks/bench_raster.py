"""Compare the numba and numpy triangle-fill kernels on a recorded walk.

    python3 benchmarks/bench_raster.py [--frames 200] [--seed 0]

Renders the same poses with both backends, checks the images match bit for
bit and prints milliseconds per frame.
"""
import argparse
import time

import numpy as np

from bugsight._accel import HAVE_NUMBA
from bugsight.agent import walk
from bugsight.bugs import BugController, apply_bugs
from bugsight.render import agent_camera, render_label_image, render_observation
from bugsight.scene import Pose, load_scene


def poses(world, seed, n):
    pos, _ = walk(world, seed, n)
    # yaw from successive positions; standing still keeps the previous heading
    yaw, out = world.agent_pose.yaw, []
    for a, b in zip(pos, pos[1:]):
        d = b - a
        if np.hypot(*d) > 1e-9:
            yaw = float(np.arctan2(-d[1], d[0]))
        out.append(Pose((float(b[0]), world.floor_height, float(b[1])), yaw))
    return out


def run(world, cams, state, backend):
    t0 = time.perf_counter()
    frames = [render_observation(world, c, state, i, 0, backend=backend) for i, c in enumerate(cams)]
    t1 = time.perf_counter()
    labels = [render_label_image(world, c, state, i, 0, backend=backend) for i, c in enumerate(cams)]
    t2 = time.perf_counter()
    return frames, labels, (t1 - t0) / len(cams), (t2 - t1) / len(cams)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    world = load_scene(None)
    cams = [agent_camera(p, 1.2) for p in poses(world, args.seed, args.frames)]
    state = apply_bugs(BugController(), world, 0)
    backends = ["numpy"] + (["numba"] if HAVE_NUMBA else [])
    if HAVE_NUMBA:
        run(world, cams[:2], state, "numba")  # compile (or load the on-disk cache) outside the timing

    results = {b: run(world, cams, state, b) for b in backends}
    print(f"{args.frames} frames, 84x84")
    print(f"{'backend':8s} {'obs ms':>8s} {'label ms':>9s}")
    for b, (_, _, to, tl) in results.items():
        print(f"{b:8s} {1e3 * to:8.2f} {1e3 * tl:9.2f}")
    if len(results) == 2:
        fa, la = results["numpy"][:2]
        fb, lb = results["numba"][:2]
        same = all(np.array_equal(a, b) for a, b in zip(fa, fb)) and all(np.array_equal(a, b) for a, b in zip(la, lb))
        print(f"speed-up {results['numpy'][2] / results['numba'][2]:.1f}x (obs), "
              f"{results['numpy'][3] / results['numba'][3]:.1f}x (labels); outputs identical: {same}")
    else:
        print("numba unavailable or disabled (BUGSIGHT_NUMBA=0); numpy only")


if __name__ == "__main__":
    main()
