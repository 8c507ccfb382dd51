"""Geodesic distance, local projection, grid indexing and GPS interpolation.

Everything downstream of the raw rides works in a local tangent plane around
a configured grid origin.  An equirectangular projection is accurate to well
under 0.01% at city scale and is trivially invertible, which the grid-cell
polygons rely on.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from typing import List, NamedTuple, Sequence, Tuple

from .errors import OutOfLocalRange, OutOfTimeRange
from .params import PipelineParams
from .ride_io import GpsFix

EARTH_RADIUS_M = 6_371_000.0

#: projection validity window around the grid origin, degrees
LOCAL_RANGE_DEG = 1.0

Point = Tuple[float, float]  # (lat, lon) degrees


class CellIndex(NamedTuple):
    ix: int  # cells east of origin
    iy: int  # cells north of origin


class LocalXY(NamedTuple):
    x: float  # meters east of origin
    y: float  # meters north of origin


def haversine_m(a: Point, b: Point) -> float:
    """Great-circle distance in meters between two (lat, lon) points."""
    lat1, lon1 = math.radians(a[0]), math.radians(a[1])
    lat2, lon2 = math.radians(b[0]), math.radians(b[1])
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = math.sin(dlat / 2.0) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def _check_local(p: Point, origin: Point) -> None:
    if abs(p[0] - origin[0]) >= LOCAL_RANGE_DEG or abs(p[1] - origin[1]) >= LOCAL_RANGE_DEG:
        raise OutOfLocalRange(f"point {p} too far from grid origin {origin}")


def project(p: Point, origin: Point) -> LocalXY:
    """Equirectangular projection of ``p`` onto the tangent plane at ``origin``."""
    _check_local(p, origin)
    lat0 = math.radians(origin[0])
    x = EARTH_RADIUS_M * math.radians(p[1] - origin[1]) * math.cos(lat0)
    y = EARTH_RADIUS_M * math.radians(p[0] - origin[0])
    return LocalXY(x, y)


def unproject(xy: LocalXY, origin: Point) -> Point:
    """Inverse of :func:`project` (exact up to float rounding)."""
    lat0 = math.radians(origin[0])
    lat = origin[0] + math.degrees(xy[1] / EARTH_RADIUS_M)
    lon = origin[1] + math.degrees(xy[0] / (EARTH_RADIUS_M * math.cos(lat0)))
    return (lat, lon)


def _origin_of(params: PipelineParams) -> Point:
    if params.grid_origin is None:
        raise ValueError("grid origin is unresolved; aggregate data or set PipelineParams.grid_origin")
    return params.grid_origin


def local_cell(xy: LocalXY, cell_size_m: float) -> CellIndex:
    """Floor rule on local meters: cells are closed on their south/west edges."""
    return CellIndex(math.floor(xy[0] / cell_size_m), math.floor(xy[1] / cell_size_m))


def cell_of(p: Point, params: PipelineParams) -> CellIndex:
    """Grid cell containing ``p``."""
    return local_cell(project(p, _origin_of(params)), params.cell_size_m)


def cell_polygon(c: CellIndex, params: PipelineParams) -> List[Point]:
    """Closed counter-clockwise ring of the cell's corners, first == last.

    Corner coordinates are pure functions of the index, so adjacent cells
    share edge coordinates bit for bit.
    """
    origin = _origin_of(params)
    s = params.cell_size_m
    x0, y0 = c.ix * s, c.iy * s
    x1, y1 = (c.ix + 1) * s, (c.iy + 1) * s
    ring_xy = [(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)]
    return [unproject(LocalXY(x, y), origin) for x, y in ring_xy]


def cell_center(c: CellIndex, params: PipelineParams) -> Point:
    origin = _origin_of(params)
    s = params.cell_size_m
    return unproject(LocalXY((c.ix + 0.5) * s, (c.iy + 0.5) * s), origin)


def position_at(fixes: Sequence[GpsFix], t: int) -> Point:
    """Linearly interpolated position on the GPS trace at time ``t`` (ms)."""
    if not fixes or t < fixes[0].timestamp or t > fixes[-1].timestamp:
        raise OutOfTimeRange(f"t={t} outside GPS span")
    timestamps = [f.timestamp for f in fixes]
    i = bisect_left(timestamps, t)
    if timestamps[i] == t:
        return (fixes[i].lat, fixes[i].lon)
    a, b = fixes[i - 1], fixes[i]
    alpha = (t - a.timestamp) / (b.timestamp - a.timestamp)
    return (a.lat + alpha * (b.lat - a.lat), a.lon + alpha * (b.lon - a.lon))
