#!/usr/bin/env python3
"""Render figures from simulator run directories.

Consumes only the documented CSV schemas (snapshots.csv, clusters.csv,
metrics.csv from a run; sweep.csv, summary.csv from a sweep) and never
writes into the run directory itself. Two figure kinds:

  snapshot   opinion scatter (users as dots, creators as crosses) with one
             covariance ellipse per cluster whose mean silhouette reaches
             0.5; ellipse axes are twice the standard deviation along the
             principal components, transparency scales with the global
             clusterization of the frame. 3-topic runs get a 3-D view plus
             the xy/xz/yz projections, drawing every fourth opinion.

  tradeoff   negative clusterization and satisfaction versus the swept
             parameter, with across-seed variance bands and the -0.5
             distinguishability threshold line.

Usage:
    plots/render.py --run <dir> --snapshot <t> [--outdir figures]
    plots/render.py --run <dir> --tradeoff    [--outdir figures]

Each figure is written as both SVG and 150 dpi PNG.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Ellipse  # noqa: E402

SILHOUETTE_DRAW_THRESHOLD = 0.5
CLUSTERIZATION_THRESHOLD = -0.5
USER_COLOR = "#1976d2"
CREATOR_COLOR = "#d32f2f"
ELLIPSE_COLOR = "#f97c00"


class RenderError(RuntimeError):
    pass


def read_csv_rows(path):
    if not os.path.exists(path):
        raise RenderError(f"missing input file: {path}")
    with open(path) as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if not rows:
        raise RenderError(f"empty input file: {path}")
    return rows


def load_snapshot_frame(run_dir, t):
    """Rows of snapshots.csv for one time, split by agent kind."""
    rows = read_csv_rows(os.path.join(run_dir, "snapshots.csv"))
    coord_cols = [c for c in rows[0] if c.startswith("x")]
    users, creators = [], []
    for row in rows:
        if int(row["t"]) != t:
            continue
        point = [float(row[c]) for c in coord_cols]
        (users if row["agent_kind"] == "user" else creators).append(point)
    if not users:
        available = sorted({int(r["t"]) for r in rows})
        raise RenderError(f"no snapshot at t={t}; available times: {available}")
    return users, creators


def load_cluster_frame(run_dir, t):
    """Per-user cluster labels and silhouettes at one snapshot time."""
    rows = [r for r in read_csv_rows(os.path.join(run_dir, "clusters.csv"))
            if int(r["t"]) == t]
    labels = {int(r["user_id"]): int(r["cluster"]) for r in rows}
    silhouettes = {int(r["user_id"]): float(r["silhouette"]) for r in rows}
    global_cl = float(rows[0]["global_clusterization"]) if rows else 0.0
    return labels, silhouettes, global_cl


def cluster_ellipses(users, labels, silhouettes):
    """One (center, width, height, angle) per cluster worth drawing.

    Clusters whose mean silhouette is below the 0.5 threshold are omitted;
    so are clusters with fewer than two members (no covariance).
    """
    groups = defaultdict(list)
    for uid, label in labels.items():
        groups[label].append(uid)
    out = []
    for label, members in sorted(groups.items()):
        mean_sil = sum(silhouettes[u] for u in members) / len(members)
        if mean_sil < SILHOUETTE_DRAW_THRESHOLD or len(members) < 2:
            continue
        pts = [users[u] for u in members]
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        n = len(pts)
        mx, my = sum(xs) / n, sum(ys) / n
        cxx = sum((x - mx) ** 2 for x in xs) / (n - 1)
        cyy = sum((y - my) ** 2 for y in ys) / (n - 1)
        cxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / (n - 1)
        # principal axes of the 2x2 covariance
        trace, det = cxx + cyy, cxx * cyy - cxy * cxy
        gap = math.sqrt(max((trace / 2) ** 2 - det, 0.0))
        lam1, lam2 = trace / 2 + gap, trace / 2 - gap
        angle = math.degrees(math.atan2(lam1 - cxx, cxy)) if cxy else (
            0.0 if cxx >= cyy else 90.0)
        # width/height span two standard deviations on each side
        out.append(((mx, my), 4 * math.sqrt(max(lam1, 0)),
                    4 * math.sqrt(max(lam2, 0)), angle))
    return out


def _save(fig, outdir, stem):
    os.makedirs(outdir, exist_ok=True)
    paths = []
    for ext, kwargs in (("svg", {}), ("png", {"dpi": 150})):
        path = os.path.join(outdir, f"{stem}.{ext}")
        fig.savefig(path, **kwargs)
        paths.append(path)
    plt.close(fig)
    return paths


def _scatter_2d(ax, users, creators, stride=1):
    ux = [p[0] for p in users[::stride]]
    uy = [p[1] for p in users[::stride]]
    ax.scatter(ux, uy, s=8, c=USER_COLOR, marker="o", alpha=0.6, linewidths=0)
    if creators:
        cx = [p[0] for p in creators[::stride]]
        cy = [p[1] for p in creators[::stride]]
        ax.scatter(cx, cy, s=40, c=CREATOR_COLOR, marker="x", linewidths=1.5)
    ax.set_xlim(-1.05, 1.05)
    ax.set_ylim(-1.05, 1.05)
    ax.set_aspect("equal")


def plot_snapshot(run_dir, t, outdir="figures"):
    """Scatter one snapshot; returns output paths and the ellipse count."""
    users, creators = load_snapshot_frame(run_dir, t)
    labels, silhouettes, global_cl = load_cluster_frame(run_dir, t)
    dim = len(users[0])

    if dim == 2:
        ellipses = cluster_ellipses(users, labels, silhouettes)
        alpha = 0.15 + 0.6 * min(max(global_cl, 0.0), 1.0)
        fig, ax = plt.subplots(figsize=(5, 5))
        _scatter_2d(ax, users, creators)
        for center, width, height, angle in ellipses:
            ax.add_patch(Ellipse(center, width, height, angle=angle,
                                 facecolor=ELLIPSE_COLOR, alpha=alpha,
                                 edgecolor=ELLIPSE_COLOR))
        ax.set_title(f"t = {t}   clusterization {global_cl:.2f}")
        paths = _save(fig, outdir, f"snapshot_t{t}")
        return {"paths": paths, "n_ellipses": len(ellipses), "panels": 1}

    if dim == 3:
        # 3-D overview without creators, then the three axis-plane
        # projections with every fourth opinion
        fig = plt.figure(figsize=(16, 4))
        ax3d = fig.add_subplot(1, 4, 1, projection="3d")
        sub = users[::4]
        ax3d.scatter([p[0] for p in sub], [p[1] for p in sub], [p[2] for p in sub],
                     s=6, c=USER_COLOR, alpha=0.5)
        ax3d.set_title(f"t = {t}")
        pairs = ((0, 1, "xy"), (0, 2, "xz"), (1, 2, "yz"))
        for idx, (a, b, name) in enumerate(pairs, start=2):
            ax = fig.add_subplot(1, 4, idx)
            _scatter_2d(ax,
                        [[p[a], p[b]] for p in users],
                        [[p[a], p[b]] for p in creators],
                        stride=4)
            ax.set_title(name)
        paths = _save(fig, outdir, f"snapshot_t{t}")
        return {"paths": paths, "n_ellipses": 0, "panels": 4}

    raise RenderError(f"snapshot rendering supports 2 or 3 topics, got {dim}")


def plot_tradeoff(sweep_dir, outdir="figures"):
    """Trade-off curves from a sweep directory; returns output paths."""
    summary = read_csv_rows(os.path.join(sweep_dir, "summary.csv"))
    param = list(summary[0])[0]  # first column: the swept parameter (d or k)
    xs = [float(r[param]) for r in summary]
    neg_cl = [float(r["neg_clusterization_median"]) for r in summary]
    cl_var = [float(r["clusterization_seed_variance"]) for r in summary]
    sat = [float(r["sat_median"]) for r in summary]
    sat_var = [float(r["sat_seed_variance"]) for r in summary]

    fig, ax = plt.subplots(figsize=(6, 4))
    for values, variances, color, label in (
        (neg_cl, cl_var, ELLIPSE_COLOR, "neg. clusterization"),
        (sat, sat_var, USER_COLOR, "satisfaction"),
    ):
        band = [math.sqrt(v) for v in variances]
        ax.plot(xs, values, color=color, marker="o", label=label)
        ax.fill_between(xs, [m - b for m, b in zip(values, band)],
                        [m + b for m, b in zip(values, band)],
                        color=color, alpha=0.2, linewidth=0)
    ax.axhline(CLUSTERIZATION_THRESHOLD, color="#388e3c", linestyle="--",
               label="clusterization thresh.")
    ax.set_xlabel(param)
    ax.legend()
    fig.tight_layout()
    paths = _save(fig, outdir, f"tradeoff_{param}")
    return {"paths": paths}


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--run", required=True, help="run or sweep directory")
    mode = parser.add_mutually_exclusive_group(required=True)
    mode.add_argument("--snapshot", type=int, metavar="T",
                      help="render the snapshot taken at time T")
    mode.add_argument("--tradeoff", action="store_true",
                      help="render the sweep trade-off curves")
    parser.add_argument("--outdir", default="figures",
                        help="output directory (never the run directory)")
    args = parser.parse_args(argv)

    try:
        if args.tradeoff:
            result = plot_tradeoff(args.run, args.outdir)
        else:
            result = plot_snapshot(args.run, args.snapshot, args.outdir)
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in result["paths"]:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
