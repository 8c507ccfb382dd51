"""Per-ride percentile quantization and crowd-level grid aggregation.

Phones, bikes and mounting positions differ so much that absolute roughness
values from different rides are incomparable.  Each ride is therefore
normalized against itself: its bumpiness values are replaced by the bucket
1..5 of the percentile band they fall into (breaks at 0.2/0.4/0.6/0.8/1.0 of
the ride's own distribution, lower-exclusive / upper-inclusive intervals).
Bucketed samples from all rides are then accumulated into a histogram per
grid cell, and every published statistic (mean, median, standard deviation)
derives from that histogram.

Aggregation is a commutative monoid: grids built from any sharding of the
same rides merge into the identical result, which is also the contract that
makes parallel ingestion safe.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Set, Tuple

import numpy as np

from .cloud_preproc import BumpinessSeries
from .errors import EmptySeries, VeloqualError
from .geo import EARTH_RADIUS_M, CellIndex, LOCAL_RANGE_DEG
from .params import PipelineParams, snap_origin

logger = logging.getLogger(__name__)

GRID_MAGIC = "veloqual-grid v1"


class QuantizedSample(NamedTuple):
    lat: float
    lon: float
    bucket: int  # 1..5, 1 = smoothest fifth of its own ride
    ride_id: str


def break_positions(n: int, breaks: Sequence[float]) -> List[Tuple[int, float]]:
    """Fractional rank (index, remainder) of each percentile break.

    Quantiles use linear interpolation between order statistics: the break
    for percentile q sits at rank q*(n-1).
    """
    positions = []
    for q in breaks:
        pos = q * (n - 1)
        j = min(int(math.floor(pos)), n - 1)
        positions.append((j, pos - j))
    return positions


def ride_quantiles(b_values: Sequence[float], breaks: Sequence[float]) -> List[float]:
    """Percentile break values of one ride's bumpiness series.

    The last break is percentile 1.0 and always equals the series maximum.
    """
    values = np.asarray(b_values, dtype=np.float64)
    if values.size == 0:
        raise EmptySeries("cannot take percentiles of an empty series")
    ordered = np.sort(values)
    out = []
    for j, frac in break_positions(values.size, breaks):
        if frac == 0.0 or j + 1 >= values.size:
            out.append(float(ordered[j]))
        else:
            out.append(float(ordered[j] + frac * (ordered[j + 1] - ordered[j])))
    return out


def _bucket_thresholds(ordered: np.ndarray, breaks: Sequence[float]) -> np.ndarray:
    # Bucket boundaries are taken at the order statistic below each interior
    # break: for in-series values, v <= interpolated-break iff v <= that
    # order statistic, and comparing data only makes bucketing exactly
    # invariant under positive rescaling of the whole ride.
    positions = break_positions(ordered.size, breaks[:-1])
    return np.array([ordered[j] for j, _ in positions], dtype=np.float64)


def quantize_values(b_values: np.ndarray, breaks: Sequence[float]) -> np.ndarray:
    """Bucket 1..5 for each value: smallest k with value <= break_k."""
    if b_values.size == 0:
        raise EmptySeries("cannot quantize an empty series")
    ordered = np.sort(b_values)
    thresholds = _bucket_thresholds(ordered, breaks)
    return 1 + np.searchsorted(thresholds, b_values, side="left")


def quantize_ride(series: BumpinessSeries, params: PipelineParams) -> List[QuantizedSample]:
    """Replace each bumpiness value with its percentile bucket 1..5."""
    values = np.array([p.b for p in series.points], dtype=np.float64)
    buckets = quantize_values(values, params.percentile_breaks)
    return [
        QuantizedSample(p.lat, p.lon, int(k), series.ride_id)
        for p, k in zip(series.points, buckets)
    ]


def hash_ride_id(ride_id: str) -> str:
    """Stable short hash; grids never store raw ride identifiers."""
    return hashlib.sha1(ride_id.encode("utf-8")).hexdigest()[:16]


@dataclass
class GridCell:
    index: CellIndex
    histogram: List[int] = field(default_factory=lambda: [0, 0, 0, 0, 0])
    ride_hashes: Set[str] = field(default_factory=set)

    @property
    def sample_count(self) -> int:
        return sum(self.histogram)

    @property
    def ride_count(self) -> int:
        return len(self.ride_hashes)

    @property
    def mean(self) -> float:
        n = self.sample_count
        return sum(k * h for k, h in zip(range(1, 6), self.histogram)) / n

    @property
    def median(self) -> int:
        # smallest bucket whose cumulative count reaches half the samples
        half = self.sample_count / 2.0
        cum = 0
        for k, h in zip(range(1, 6), self.histogram):
            cum += h
            if cum >= half:
                return k
        return 5

    @property
    def stddev(self) -> float:
        n = self.sample_count
        mu = self.mean
        var = sum(h * (k - mu) ** 2 for k, h in zip(range(1, 6), self.histogram)) / n
        return math.sqrt(var)


@dataclass
class SurfaceGrid:
    params: PipelineParams
    cells: Dict[CellIndex, GridCell] = field(default_factory=dict)
    skipped_samples: int = 0


def _fold_ride(grid: SurfaceGrid, samples: List[QuantizedSample]) -> None:
    if not samples:
        return
    origin = grid.params.grid_origin
    lat0 = math.radians(origin[0])
    arr = np.asarray([(s.lat, s.lon) for s in samples], dtype=np.float64)
    buckets = np.asarray([s.bucket for s in samples], dtype=np.int64)
    dlat = arr[:, 0] - origin[0]
    dlon = arr[:, 1] - origin[1]
    ok = (np.abs(dlat) < LOCAL_RANGE_DEG) & (np.abs(dlon) < LOCAL_RANGE_DEG)
    skipped = int(np.count_nonzero(~ok))
    if skipped:
        grid.skipped_samples += skipped
        logger.warning("%d samples outside the local projection range were skipped", skipped)
    x = EARTH_RADIUS_M * np.radians(dlon[ok]) * math.cos(lat0)
    y = EARTH_RADIUS_M * np.radians(dlat[ok])
    s = grid.params.cell_size_m
    ix = np.floor(x / s).astype(np.int64)
    iy = np.floor(y / s).astype(np.int64)

    keys = np.stack([ix, iy, buckets[ok]], axis=1)
    uniq, counts = np.unique(keys, axis=0, return_counts=True)
    ride_hash = hash_ride_id(samples[0].ride_id)
    for (cix, ciy, bucket), count in zip(uniq.tolist(), counts.tolist()):
        cell = grid.cells.get(CellIndex(cix, ciy))
        if cell is None:
            cell = GridCell(CellIndex(cix, ciy))
            grid.cells[cell.index] = cell
        cell.histogram[bucket - 1] += int(count)
        cell.ride_hashes.add(ride_hash)


def aggregate(
    quantized_rides: Iterable[List[QuantizedSample]], params: PipelineParams
) -> SurfaceGrid:
    """Fold quantized rides into a surface grid.

    Each element of ``quantized_rides`` holds the samples of exactly one
    ride.  Every sample increments the histogram of the cell containing its
    position; a cell's ride count is the number of distinct ride ids that
    touched it.  Samples outside the local projection window around the grid
    origin are counted and skipped.  When ``params.grid_origin`` is unset the
    input is materialized and the origin derived from the data extent.
    """
    if params.grid_origin is None:
        rides = [r for r in quantized_rides if r]
        if not rides:
            return SurfaceGrid(params=params)
        min_lat = min(s.lat for r in rides for s in r)
        min_lon = min(s.lon for r in rides for s in r)
        params = params.with_origin(*snap_origin(min_lat, min_lon))
        quantized_rides = rides

    grid = SurfaceGrid(params=params)
    for samples in quantized_rides:
        _fold_ride(grid, samples)
    return grid


def merge(a: SurfaceGrid, b: SurfaceGrid) -> SurfaceGrid:
    """Union of two grids over the same parameters (histogram addition)."""
    if a.params != b.params:
        raise VeloqualError("cannot merge grids with differing parameters")
    out = SurfaceGrid(params=a.params, skipped_samples=a.skipped_samples + b.skipped_samples)
    for src in (a, b):
        for idx, cell in src.cells.items():
            dst = out.cells.get(idx)
            if dst is None:
                dst = GridCell(idx)
                out.cells[idx] = dst
            for k in range(5):
                dst.histogram[k] += cell.histogram[k]
            dst.ride_hashes |= cell.ride_hashes
    return out


def cell_quality(grid: SurfaceGrid, c: CellIndex) -> Optional[float]:
    """Mean bucket value of a cell, or None for cells without data."""
    cell = grid.cells.get(c)
    if cell is None or cell.sample_count == 0:
        return None
    return cell.mean


def to_json_text(grid: SurfaceGrid) -> str:
    """Canonical grid snapshot: cells sorted by index, ride ids hashed."""
    cells = {}
    for idx in sorted(grid.cells.keys()):
        cell = grid.cells[idx]
        cells[f"{idx.ix}:{idx.iy}"] = {
            "histogram": list(cell.histogram),
            "rides": sorted(cell.ride_hashes),
        }
    doc = {
        "format": GRID_MAGIC,
        "params": grid.params.to_dict(),
        "skipped_samples": grid.skipped_samples,
        "cells": cells,
    }
    return json.dumps(doc, indent=2) + "\n"


def from_json_text(text: str) -> SurfaceGrid:
    doc = json.loads(text)
    if doc.get("format") != GRID_MAGIC:
        raise VeloqualError(f"not a {GRID_MAGIC} snapshot")
    params = PipelineParams.from_dict(doc["params"])
    grid = SurfaceGrid(params=params, skipped_samples=int(doc.get("skipped_samples", 0)))
    for key, payload in doc["cells"].items():
        ix_str, _, iy_str = key.partition(":")
        idx = CellIndex(int(ix_str), int(iy_str))
        hist = [int(h) for h in payload["histogram"]]
        if len(hist) != 5 or any(h < 0 for h in hist):
            raise VeloqualError(f"cell {key} has a malformed histogram")
        grid.cells[idx] = GridCell(idx, histogram=hist, ride_hashes=set(payload["rides"]))
    return grid


def save_grid(grid: SurfaceGrid, path) -> None:
    """Atomic snapshot write: readers never observe a partial file."""
    text = to_json_text(grid)
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def load_grid(path) -> SurfaceGrid:
    with open(path, "r", encoding="utf-8") as fh:
        return from_json_text(fh.read())
