"""Command-line driver: validate | generate | serve | fracture-stats.

Exit codes: 0 success, 1 syntax error, 2 semantic error (overlap, unknown
names/keys, bad values), 3 server bind failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import bridge, dataset, report
from .scene import (
    Scene,
    SceneError,
    SceneSyntaxError,
    SceneValidationError,
    instantiate,
    parse_scene,
)

EXIT_OK = 0
EXIT_SYNTAX = 1
EXIT_SEMANTIC = 2
EXIT_BIND = 3


def _load_scene(path: str | None, use_stdin: bool = False,
                seed: int | None = None) -> tuple[Scene, bytes]:
    if use_stdin:
        raw = sys.stdin.buffer.read()
    else:
        with open(path, "rb") as f:
            raw = f.read()
    scene = parse_scene(raw)
    if seed is not None:
        scene.seed = seed
    return scene, raw


def cmd_validate(args) -> int:
    try:
        scene, _ = _load_scene(args.scene, args.stdin)
    except SceneSyntaxError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_SYNTAX
    except (SceneValidationError, SceneError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_SEMANTIC
    except OSError as exc:
        print(f"cannot read scene: {exc}", file=sys.stderr)
        return EXIT_SYNTAX
    if args.json:
        print(json.dumps({
            "valid": True, "rooms": len(scene.rooms),
            "events": len(scene.events), "cameras": len(scene.cameras),
        }))
    else:
        print(f"valid scene: {len(scene.rooms)} room(s), "
              f"{len(scene.events)} event(s), {len(scene.cameras)} camera(s)")
    return EXIT_OK


def cmd_generate(args) -> int:
    try:
        scene, raw = _load_scene(args.scene, seed=args.seed)
    except SceneSyntaxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SYNTAX
    except (SceneValidationError, SceneError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SEMANTIC
    if args.frames is not None:
        scene.cameras = scene.cameras[:args.frames]
    name = os.path.splitext(os.path.basename(args.scene))[0]
    try:
        manifest = dataset.generate_dataset(scene, raw, args.out, name)
    except SceneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SEMANTIC
    if args.json:
        print(json.dumps(manifest, sort_keys=True))
    else:
        for i, rep in enumerate(manifest["event_reports"]):
            status = "applied" if rep["applied"] else "skipped (outside world)"
            print(f"event {i}: {status}, released {len(rep['released'])} "
                  f"fragment(s), {rep['broken_joints']} broken joint(s)")
        print(f"{manifest['fragment_count']} fragments, "
              f"{manifest['released_count']} released")
        print(f"wrote {len(manifest['frames'])} frame triple(s) to "
              f"{os.path.join(args.out, name)}")
    return EXIT_OK


def cmd_serve(args) -> int:
    try:
        scene, _ = _load_scene(args.scene, seed=args.seed)
    except SceneSyntaxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SYNTAX
    except (SceneValidationError, SceneError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SEMANTIC
    world = instantiate(scene)
    try:
        server = bridge.serve(world, ("0.0.0.0", args.port), scene=scene)
    except OSError as exc:
        print(f"error: cannot bind port {args.port}: {exc}", file=sys.stderr)
        return EXIT_BIND
    print(f"serving on port {server.port}; Ctrl-C to stop")
    try:
        import time
        while True:
            time.sleep(0.5)
    except KeyboardInterrupt:
        print("shutting down")
    finally:
        server.stop()
    return EXIT_OK


def cmd_fracture_stats(args) -> int:
    try:
        scene, _ = _load_scene(args.scene, seed=args.seed)
    except SceneSyntaxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SYNTAX
    except (SceneValidationError, SceneError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SEMANTIC
    world = instantiate(scene)
    rows = report.fracture_stats(world)
    if args.json:
        print(json.dumps(rows, sort_keys=True))
    else:
        for r in rows:
            print(f"room {r['room']} ({r['archetype']}, {r['material']}): "
                  f"{r['fragments']} fragments, {r['joints']} joints, "
                  f"volume {r['total_volume_m3']:.3f} m^3")
    if args.out:
        paths = report.write_stats_report(world, args.out)
        if not args.json:
            for name, path in paths.items():
                print(f"wrote {name}: {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rubbleforge",
        description="Procedural destructible scenes: fracture, destroy, "
                    "settle, and export color/depth/segmentation frames.",
    )
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="enable debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse and validate a scene file")
    p.add_argument("--scene", help="scene file path")
    p.add_argument("--stdin", action="store_true",
                   help="read the scene document from stdin")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("generate", help="generate a dataset from a scene")
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None,
                   help="override the scene's global seed")
    p.add_argument("--frames", type=int, default=None,
                   help="render at most N camera frames")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("serve", help="serve the simulation over TCP")
    p.add_argument("--scene", required=True)
    p.add_argument("--port", type=int, default=bridge.DEFAULT_PORT)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("fracture-stats",
                       help="print per-room fragment/joint/volume statistics")
    p.add_argument("--scene", required=True)
    p.add_argument("--out", default=None,
                   help="also write CSV and figures to this directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_fracture_stats)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate" and not args.stdin and not args.scene:
        print("error: validate requires --scene or --stdin", file=sys.stderr)
        return EXIT_SYNTAX
    if getattr(args, "verbose", False):
        import logging
        logging.basicConfig(level=logging.DEBUG)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
