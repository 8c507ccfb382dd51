"""GeoJSON export of the surface grid.

Cells become Polygon features with their statistics and a color in the
properties, so any map client can render the grid without recomputing
anything.  Rings are counter-clockwise and closed, coordinates [lon, lat].
"""

from __future__ import annotations

import json
from typing import Optional, Tuple

from .errors import OutOfRange
from .geo import cell_polygon
from .quality import SurfaceGrid

Bbox = Tuple[float, float, float, float]  # min_lon, min_lat, max_lon, max_lat

# five equal-width bands over [1, 5], green (smooth) to red (rough)
COLOR_BANDS = [
    (1.8, "#1a9850"),
    (2.6, "#91cf60"),
    (3.4, "#fee08b"),
    (4.2, "#fc8d59"),
    (5.0, "#d73027"),
]


def color_of(mean: float) -> str:
    """Hex color for a cell mean; bands are [1,1.8), [1.8,2.6), ... [4.2,5]."""
    if not 1.0 <= mean <= 5.0:
        raise OutOfRange(f"cell mean {mean} outside [1, 5]")
    for upper, color in COLOR_BANDS:
        if mean < upper:
            return color
    return COLOR_BANDS[-1][1]


def feature_collection(grid: SurfaceGrid, bbox: Optional[Bbox] = None) -> dict:
    """FeatureCollection dict of all grid cells intersecting ``bbox``."""
    features = []
    for idx in sorted(grid.cells.keys()):
        ring = cell_polygon(idx, grid.params)
        if bbox is not None:
            lats = [p[0] for p in ring]
            lons = [p[1] for p in ring]
            min_lon, min_lat, max_lon, max_lat = bbox
            if max(lons) < min_lon or min(lons) > max_lon or max(lats) < min_lat or min(lats) > max_lat:
                continue
        cell = grid.cells[idx]
        features.append(
            {
                "type": "Feature",
                "id": f"{idx.ix}:{idx.iy}",
                "geometry": {
                    "type": "Polygon",
                    "coordinates": [[[lon, lat] for lat, lon in ring]],
                },
                "properties": {
                    "mean": cell.mean,
                    "median": cell.median,
                    "stddev": cell.stddev,
                    "ride_count": cell.ride_count,
                    "sample_count": cell.sample_count,
                    "color": color_of(cell.mean),
                },
            }
        )
    return {"type": "FeatureCollection", "features": features}


def to_geojson(grid: SurfaceGrid, bbox: Optional[Bbox] = None) -> str:
    return json.dumps(feature_collection(grid, bbox))
