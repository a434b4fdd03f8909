"""``bugsight`` command line: demo, generate, train, score, evaluate, coverage.

Every subcommand accepts ``--config file.json``; flags given on the command
line win over the file.  The resolved configuration is written next to the
outputs as ``config.json``.

Exit codes: 0 ok, 2 bad configuration or usage, 3 file-system errors,
4 corrupt or inconsistent data.
"""
import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_DATA = 0, 2, 3, 4
DATA_ENV = "BUGSIGHT_DATA"


class ConfigError(ValueError):
    pass


def default_data_root() -> str:
    return os.environ.get(DATA_ENV, "bugsight-data")


def parse_bug_list(text):
    """``kind[:target][,kind[:target]...]`` to a list of bug dicts."""
    from .tags import BugKind

    out = []
    if not text:
        return out
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        kind, _, target = part.partition(":")
        d = {"kind": BugKind.parse(kind).value}
        if target:
            d["target"] = target
        out.append(d)
    kinds = [d["kind"] for d in out]
    if len(set(kinds)) != len(kinds):
        raise ConfigError(f"--bug lists a kind twice: {text}")
    return out


def parse_taus(text):
    try:
        taus = sorted({int(t) for t in str(text).split(",") if t.strip()})
    except ValueError:
        raise ConfigError(f"--taus must be comma separated integers, got {text!r}") from None
    if not taus or taus[0] < 0:
        raise ConfigError("--taus needs at least one non-negative integer")
    return taus


def _load_config(path):
    if not path:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}: {e.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return doc


def _resolve(args, section, defaults):
    """Defaults, then the config file's ``section``, then explicit flags."""
    doc = _load_config(args.config)
    known = {"scene", "seed", "agent", "dataset", "train", "eval", "demo", "coverage", "score"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    out = dict(defaults)
    sec = doc.get(section, {})
    bad = set(sec) - set(defaults)
    if bad:
        raise ConfigError(f"unknown keys in [{section}]: {sorted(bad)}")
    out.update(sec)
    for k in ("scene", "seed"):
        if k in doc and k in out:
            out[k] = doc[k]
    for k in defaults:
        v = getattr(args, k, None)
        if v is not None:
            out[k] = v
    agent = dict(doc.get("agent", {}))
    return out, agent


def _agent_cfg(d):
    from .agent import AgentConfig

    return AgentConfig.from_dict(d) if d else AgentConfig()


def _snapshot(directory, command, cfg, agent=None):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    doc = {"command": command, **cfg}
    if agent is not None:
        doc["agent"] = agent
    (d / "config.json").write_text(json.dumps(doc, indent=1, sort_keys=True, default=str) + "\n")


def _log(quiet):
    return (lambda *_: None) if quiet else (lambda m: print(m, file=sys.stderr, flush=True))


# --------------------------------------------------------------------------
# subcommands


def cmd_demo(args):
    from .dataset import RunConfig, generate_episode
    from .ppm import write_ppm
    from .scene import load_scene

    cfg, agent = _resolve(args, "demo", {"scene": None, "seed": 0, "frames": 10, "bug": "", "out": "demo"})
    bugs = [dict(b, windows=None) for b in parse_bug_list(cfg["bug"])]
    if cfg["frames"] < 1:
        raise ConfigError("--frames must be >= 1")
    run = RunConfig(frames=cfg["frames"], partition="bugged" if bugs else "normal", bugs=tuple(bugs),
                    record_masks=True, agent=_agent_cfg(agent))
    world = load_scene(cfg["scene"])
    ep = generate_episode(world, run, cfg["seed"])
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    for i in range(len(ep)):
        write_ppm(out / f"obs_{i:04d}.ppm", ep.observations[i])
        write_ppm(out / f"mask_{i:04d}.ppm", ep.masks[i])
    (out / "meta.json").write_text(json.dumps(ep.meta, indent=1, sort_keys=True) + "\n")
    _snapshot(out, "demo", cfg, agent)
    print(f"wrote {len(ep)} frames to {out}")


def cmd_generate(args):
    from .dataset import DEFAULT_SCALE, DatasetConfig, RunConfig, build_dataset, verify_dataset

    cfg, agent = _resolve(args, "dataset", {
        "scene": None, "seed": 0, "scale": DEFAULT_SCALE, "out": None, "workers": 1,
        "kinds": None, "window_fraction": 0.2, "window_length": 50,
    })
    out = cfg["out"] or default_data_root()
    cfg["out"] = out
    kinds = cfg["kinds"]
    if isinstance(kinds, str):
        kinds = [b["kind"] for b in parse_bug_list(kinds)]
    run = RunConfig(window_fraction=cfg["window_fraction"], window_length=cfg["window_length"],
                    agent=_agent_cfg(agent))
    dc = DatasetConfig(scale=cfg["scale"], seed=cfg["seed"], run=run, workers=cfg["workers"],
                       **({"kinds": tuple(kinds)} if kinds else {}))
    m = build_dataset(dc, out, cfg["scene"], log=_log(args.quiet))
    verify_dataset(out)
    _snapshot(out, "generate", cfg, agent)
    c = m["counts"]
    print(f"{out}: normal {c['normal']}, bugged {c['bugged']}, test {sum(c['test'].values())} frames")


def _normal_frames(data, limit=None):
    from .dataset import DatasetError, load_manifest, read_episode

    m = load_manifest(data)
    eps = m["partitions"]["normal"]
    if not eps:
        raise DatasetError(f"{data}: normal partition is empty")
    frames = np.concatenate([read_episode(Path(data) / e["dir"]).observations for e in eps])
    return frames[:limit] if limit else frames


def cmd_train(args):
    from .nn import TrainConfig, train

    defaults = {k: None for k in TrainConfig.__dataclass_fields__}
    defaults.update(TrainConfig().to_dict())
    defaults.update({"data": None, "out": "model", "max_frames": None})
    cfg, _ = _resolve(args, "train", defaults)
    cfg["data"] = cfg["data"] or default_data_root()
    tc = TrainConfig.from_dict({k: cfg[k] for k in TrainConfig.__dataclass_fields__})
    frames = _normal_frames(cfg["data"], cfg["max_frames"])
    _snapshot(cfg["out"], "train", cfg)
    r = train(frames, tc, out_dir=cfg["out"], log=_log(args.quiet))
    print(f"trained on {len(frames)} frames, final epoch loss {r.epoch_loss[-1]:.5f}; {Path(cfg['out']) / 'model.ckpt'}")


def cmd_score(args):
    from .dataset import mask_pixel_counts, read_episode
    from .eval import model_scorer
    from .nn import load_checkpoint

    cfg, _ = _resolve(args, "score", {"model": None, "episode": None, "out": None})
    if not cfg["model"] or not cfg["episode"]:
        raise ConfigError("score needs --model and --episode")
    model = load_checkpoint(cfg["model"])
    ep = read_episode(cfg["episode"], mmap=True)
    s = model_scorer(model)(ep)
    tagged = mask_pixel_counts(ep.masks) if ep.masks is not None else None
    out = Path(cfg["out"]) if cfg["out"] else None
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", "score"] + (["tagged_pixels"] if tagged is not None else []))
        for i, v in enumerate(s):
            w.writerow([i, repr(round(float(v), 10))] + ([int(tagged[i])] if tagged is not None else []))
    finally:
        if out:
            fh.close()
    if out:
        _snapshot(out.parent, "score", cfg)


def cmd_evaluate(args):
    from .eval import DEFAULT_TAUS, evaluate, model_scorer, oracle_scorer
    from .nn import load_checkpoint

    cfg, _ = _resolve(args, "eval", {
        "model": None, "data": None, "out": "report", "taus": ",".join(map(str, DEFAULT_TAUS)),
        "oracle": False, "kinds": None,
    })
    cfg["data"] = cfg["data"] or default_data_root()
    taus = parse_taus(cfg["taus"])
    if cfg["oracle"]:
        scorer = oracle_scorer
    elif cfg["model"]:
        scorer = model_scorer(load_checkpoint(cfg["model"]))
    else:
        raise ConfigError("evaluate needs --model (or --oracle)")
    kinds = [b["kind"] for b in parse_bug_list(cfg["kinds"])] if cfg["kinds"] else None
    rows = evaluate(scorer, cfg["data"], cfg["out"], taus, kinds)
    _snapshot(cfg["out"], "evaluate", cfg)
    for r in rows:
        if r["tau"] == (10 if 10 in taus else taus[0]):
            print(f"{r['bug_kind']:20s} tau={r['tau']:<4d} positives={r['positives']:<5d} "
                  f"p@10={r['p@10']:.2f} p@50={r['p@50']:.2f} p@100={r['p@100']:.2f}")


def cmd_coverage(args):
    from .agent import coverage_counts, coverage_fraction, walk, write_coverage
    from .scene import load_scene

    cfg, agent = _resolve(args, "coverage", {"scene": None, "seed": 0, "episodes": 1, "steps": 5000,
                                             "out": "coverage.ppm"})
    if cfg["episodes"] < 1 or cfg["steps"] < 1:
        raise ConfigError("--episodes and --steps must be >= 1")
    world = load_scene(cfg["scene"])
    ac = _agent_cfg(agent)
    trajs = [walk(world, cfg["seed"] + e, cfg["steps"], ac)[0] for e in range(cfg["episodes"])]
    grid = world.walkable_grid
    counts = coverage_counts(grid, trajs)
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    write_coverage(out, counts, grid)
    _snapshot(out.parent, "coverage", cfg, agent)
    print(f"coverage {coverage_fraction(grid, counts):.3f} of walkable cells over {cfg['episodes']} episode(s)")


# --------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="bugsight", description="Render, record and score perceptual game bugs.")
    p.add_argument("--quiet", action="store_true", help="no progress messages on stderr")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def common(sp):
        sp.add_argument("--config", help="JSON config file; flags override its values")
        return sp

    s = common(sub.add_parser("demo", help="walk the agent with bugs on and dump PPM frames and masks"))
    s.add_argument("--scene", help="scene JSON (default: bundled scene)")
    s.add_argument("--bug", help="kind[:target][,kind...] enabled on every frame")
    s.add_argument("--frames", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help="output directory")
    s.set_defaults(fn=cmd_demo)

    s = common(sub.add_parser("generate", help="build normal, bugged and per-kind test partitions"))
    s.add_argument("--scene")
    s.add_argument("--scale", type=float, help="fraction of the full-size dataset (default 1/60)")
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=int, help="parallel episode processes")
    s.add_argument("--kinds", help="comma separated bug kinds for the test partition")
    s.add_argument("--window-fraction", dest="window_fraction", type=float, help="share of frames with bugs active")
    s.add_argument("--window-length", dest="window_length", type=int, help="frames per activation window")
    s.add_argument("--out", help=f"dataset directory (default ${DATA_ENV} or ./bugsight-data)")
    s.set_defaults(fn=cmd_generate)

    s = common(sub.add_parser("train", help="train the autoencoder on the normal partition"))
    s.add_argument("--data", help=f"dataset directory (default ${DATA_ENV})")
    s.add_argument("--out", help="directory for checkpoints and loss logs")
    s.add_argument("--epochs", type=int)
    s.add_argument("--batch-size", dest="batch_size", type=int)
    s.add_argument("--micro-batch", dest="micro_batch", type=int, help="frames per forward/backward chunk")
    s.add_argument("--lr", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--clip-norm", dest="clip_norm", type=float, help="global gradient-norm clip (off by default)")
    s.add_argument("--threads", type=int, help="BLAS threads (implies --no-deterministic)")
    s.add_argument("--no-deterministic", dest="deterministic", action="store_false", default=None,
                   help="allow multi-threaded BLAS")
    s.add_argument("--max-frames", dest="max_frames", type=int, help="use only the first N normal frames")
    s.set_defaults(fn=cmd_train)

    s = common(sub.add_parser("score", help="anomaly score for every frame of one episode"))
    s.add_argument("--model", help="checkpoint file")
    s.add_argument("--episode", help="episode directory")
    s.add_argument("--out", help="CSV path (default stdout)")
    s.set_defaults(fn=cmd_score)

    s = common(sub.add_parser("evaluate", help="precision curves and ranked reports on the test splits"))
    s.add_argument("--model", help="checkpoint file")
    s.add_argument("--oracle", action="store_true", default=None, help="score by tagged-pixel count instead")
    s.add_argument("--data", help=f"dataset directory (default ${DATA_ENV})")
    s.add_argument("--taus", help="pixel thresholds, e.g. 1,10,50,200")
    s.add_argument("--kinds", help="restrict to these bug kinds")
    s.add_argument("--out", help="report directory")
    s.set_defaults(fn=cmd_evaluate)

    s = common(sub.add_parser("coverage", help="visit-count map of agent episodes"))
    s.add_argument("--scene")
    s.add_argument("--episodes", type=int)
    s.add_argument("--steps", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help="PPM path")
    s.set_defaults(fn=cmd_coverage)
    return p


def main(argv=None) -> int:
    from .bugs import BugConfigError
    from .dataset import DatasetError
    from .nn.checkpoint import CheckpointError
    from .nn.optim import NonFiniteGradient
    from .ppm import PPMError
    from .scene import SceneError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_CONFIG
    if getattr(args, "threads", None) is not None and args.deterministic is None:
        args.deterministic = False
    try:
        args.fn(args)
    except (DatasetError, CheckpointError, PPMError, NonFiniteGradient) as e:
        print(f"bugsight: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, BugConfigError, SceneError, ValueError, TypeError) as e:
        print(f"bugsight: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"bugsight: io error: {e}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
