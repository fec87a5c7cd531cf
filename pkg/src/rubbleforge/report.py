"""Fracture statistics report: per-room CSV plus matplotlib figures."""
from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .physics import WorldState  # noqa: E402


def fracture_stats(world: WorldState) -> list[dict]:
    """Per-room fragment/joint/volume statistics."""
    rows = []
    for gc in world.collections:
        volumes = [f.polyhedron.volume() for f in gc.fragments.values()]
        rows.append({
            "room": gc.room_id,
            "archetype": gc.archetype,
            "material": next(iter(gc.fragments.values())).material.name
            if gc.fragments else "",
            "fragments": len(gc.fragments),
            "joints": len(gc.joints),
            "broken_joints": gc.broken_joint_count(),
            "total_volume_m3": sum(volumes),
            "min_fragment_volume_m3": min(volumes) if volumes else 0.0,
            "max_fragment_volume_m3": max(volumes) if volumes else 0.0,
        })
    return rows


def write_stats_report(world: WorldState, out_dir: str) -> dict:
    """Write stats.csv and summary figures; returns {name: path}."""
    os.makedirs(out_dir, exist_ok=True)
    rows = fracture_stats(world)
    paths = {}

    csv_path = os.path.join(out_dir, "fracture_stats.csv")
    fields = list(rows[0]) if rows else [
        "room", "archetype", "material", "fragments", "joints",
        "broken_joints", "total_volume_m3",
        "min_fragment_volume_m3", "max_fragment_volume_m3",
    ]
    with open(csv_path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
    paths["csv"] = csv_path

    volumes = [
        f.polyhedron.volume()
        for gc in world.collections for f in gc.fragments.values()
    ]
    fig, ax = plt.subplots(figsize=(6, 4))
    if volumes:
        ax.hist(volumes, bins=40, color="tab:gray", edgecolor="black")
    ax.set_xlabel("fragment volume [m$^3$]")
    ax.set_ylabel("count")
    ax.set_title("Fragment volume distribution")
    fig.tight_layout()
    hist_path = os.path.join(out_dir, "fragment_volumes.png")
    fig.savefig(hist_path, dpi=120)
    plt.close(fig)
    paths["volume_histogram"] = hist_path

    fig, ax = plt.subplots(figsize=(6, 4))
    labels = [f"{r['room']}:{r['archetype']}" for r in rows]
    ax.bar(labels, [r["fragments"] for r in rows], color="tab:blue",
           label="fragments")
    ax.bar(labels, [r["joints"] for r in rows], color="tab:orange",
           alpha=0.7, label="joints")
    ax.set_ylabel("count")
    ax.set_title("Fragments and joints per room")
    ax.legend()
    fig.autofmt_xdate(rotation=30)
    fig.tight_layout()
    bar_path = os.path.join(out_dir, "room_counts.png")
    fig.savefig(bar_path, dpi=120)
    plt.close(fig)
    paths["room_counts"] = bar_path
    return paths
