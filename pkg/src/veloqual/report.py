"""Offline report: per-cell statistics as CSV plus rendered overview figures.

Writes three artifacts into the output directory:

* ``cells.csv``       - one row per grid cell with all published statistics
* ``quality_map.png`` - the grid painted in the export color bands
* ``distributions.png`` - bucket histograms of the busiest cells

The histogram panels make mixed cells obvious at a glance: a cell crossed by
two populations (smooth lane next to cobbles) shows two separated peaks
instead of one.
"""

from __future__ import annotations

from pathlib import Path
from typing import List

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.collections import PolyCollection

from .export import COLOR_BANDS, color_of
from .geo import cell_center
from .quality import SurfaceGrid


def write_cells_csv(grid: SurfaceGrid, path: Path) -> int:
    rows = 0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("ix,iy,center_lat,center_lon,sample_count,ride_count,mean,median,stddev,color\n")
        for idx in sorted(grid.cells.keys()):
            cell = grid.cells[idx]
            lat, lon = cell_center(idx, grid.params)
            fh.write(
                f"{idx.ix},{idx.iy},{lat:.7f},{lon:.7f},{cell.sample_count},{cell.ride_count},"
                f"{cell.mean:.4f},{cell.median},{cell.stddev:.4f},{color_of(cell.mean)}\n"
            )
            rows += 1
    return rows


def render_quality_map(grid: SurfaceGrid, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(9, 9))
    polys, colors = [], []
    s = grid.params.cell_size_m
    for idx, cell in grid.cells.items():
        x0, y0 = idx.ix * s, idx.iy * s
        polys.append([(x0, y0), (x0 + s, y0), (x0 + s, y0 + s), (x0, y0 + s)])
        colors.append(color_of(cell.mean))
    ax.add_collection(PolyCollection(polys, facecolors=colors, edgecolors="none"))
    ax.autoscale_view()
    ax.set_aspect("equal")
    ax.set_xlabel("east of grid origin [m]")
    ax.set_ylabel("north of grid origin [m]")
    ax.set_title(f"surface quality, {len(grid.cells)} cells")
    handles = [plt.Rectangle((0, 0), 1, 1, facecolor=c) for _, c in COLOR_BANDS]
    labels = ["1.0-1.8 smooth", "1.8-2.6", "2.6-3.4", "3.4-4.2", "4.2-5.0 rough"]
    ax.legend(handles, labels, loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_distributions(grid: SurfaceGrid, path: Path, top: int = 12) -> None:
    busiest = sorted(grid.cells.values(), key=lambda c: (-c.sample_count, c.index))[:top]
    if not busiest:
        busiest = []
    cols = 4
    rows = max(1, (len(busiest) + cols - 1) // cols)
    fig, axes = plt.subplots(rows, cols, figsize=(3 * cols, 2.4 * rows), squeeze=False)
    for k, ax in enumerate(axes.flat):
        if k >= len(busiest):
            ax.axis("off")
            continue
        cell = busiest[k]
        total = cell.sample_count
        shares = [h / total for h in cell.histogram]
        ax.bar(range(1, 6), shares, color=[c for _, c in COLOR_BANDS])
        ax.set_ylim(0, 1)
        ax.set_xticks(range(1, 6))
        ax.set_title(f"cell {cell.index.ix}:{cell.index.iy}  n={total}", fontsize=8)
    fig.suptitle("bucket distributions of the busiest cells")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_report(grid: SurfaceGrid, out_dir, top: int = 12) -> List[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    csv_path = out / "cells.csv"
    write_cells_csv(grid, csv_path)
    written.append(csv_path)
    if grid.cells:
        map_path = out / "quality_map.png"
        render_quality_map(grid, map_path)
        written.append(map_path)
        dist_path = out / "distributions.png"
        render_distributions(grid, dist_path, top=top)
        written.append(dist_path)
    return written
