"""Batch dataset generation: instantiate, destroy, settle, render, export."""
from __future__ import annotations

import concurrent.futures
import hashlib
import json
import os

from . import physics, sensors
from .events import apply_event
from .scene import Scene, instantiate, scene_to_dict

THREADS_ENV = "RUBBLE_FORGE_THREADS"


def thread_budget() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def generate_dataset(
    scene: Scene,
    scene_bytes: bytes,
    out_dir: str,
    scene_name: str = "scene",
) -> dict:
    """Run the full pipeline and write frames + manifest under
    <out_dir>/<scene_name>/.  Returns the manifest dict."""
    world = instantiate(scene)
    reports = []
    for event in scene.events:
        rep = apply_event(world, event)
        reports.append({
            "released": sorted(rep.released),
            "broken_joints": rep.broken_joints,
            "applied": rep.applied,
        })
    physics.settle(world)

    target = os.path.join(out_dir, scene_name)
    os.makedirs(target, exist_ok=True)

    def render_one(item):
        idx, cam = item
        return idx, sensors.render(
            world, cam.pose(), cam.intrinsics(), scene.environment, index=idx
        )

    items = list(enumerate(scene.cameras))
    workers = min(thread_budget(), max(1, len(items)))
    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(workers) as pool:
            frames = sorted(pool.map(render_one, items), key=lambda p: p[0])
    else:
        frames = [render_one(it) for it in items]

    frame_metas = [sensors.export_frame(frame, target, idx) for idx, frame in frames]

    released_count = sum(
        1 for gc in world.collections for f in gc.fragments.values() if f.released
    )
    manifest = {
        "scene_name": scene_name,
        "scene_hash": hashlib.sha256(scene_bytes).hexdigest(),
        "seed": scene.seed,
        "fragment_count": sum(len(gc.fragments) for gc in world.collections),
        "released_count": released_count,
        "event_reports": reports,
        "frames": frame_metas,
        "classes": sensors.class_table(),
        "scene": scene_to_dict(scene),
    }
    with open(os.path.join(target, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest
