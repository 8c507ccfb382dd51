"""Pipeline parameters.

One frozen dataclass holds every tunable of the processing chain, from the
on-phone downsampling constants to the aggregation grid geometry.  The
defaults are the production values; tests and the CLI can override them
through a JSON file that mirrors the field names.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

from .errors import InvariantViolation

#: grid origins are snapped down to this many degrees so reruns over the same
#: data land on identical cell boundaries
ORIGIN_SNAP_DEG = 0.01


@dataclass(frozen=True)
class PipelineParams:
    ma_window: int = 30
    keep_every: int = 5
    raw_rate_hz: int = 50
    trim_seconds: float = 10.0
    min_speed_kmh: float = 5.0
    min_segment_seconds: float = 60.0
    var_window: int = 10
    percentile_breaks: Tuple[float, ...] = (0.2, 0.4, 0.6, 0.8, 1.0)
    cell_size_m: float = 10.0
    grid_origin: Optional[Tuple[float, float]] = None  # (lat, lon) degrees

    def __post_init__(self):
        if self.ma_window < 1 or self.var_window < 1 or self.keep_every < 1:
            raise InvariantViolation("windows and keep_every must be >= 1")
        if self.raw_rate_hz < 1:
            raise InvariantViolation("raw_rate_hz must be >= 1")
        if self.trim_seconds < 0 or self.min_speed_kmh < 0 or self.min_segment_seconds < 0:
            raise InvariantViolation("trim/speed/duration thresholds must be >= 0")
        breaks = tuple(self.percentile_breaks)
        if len(breaks) < 1 or breaks[-1] != 1.0:
            raise InvariantViolation("percentile_breaks must end at 1.0")
        if any(b2 <= b1 for b1, b2 in zip(breaks, breaks[1:])) or breaks[0] <= 0:
            raise InvariantViolation("percentile_breaks must be strictly increasing in (0, 1]")
        if self.cell_size_m <= 0:
            raise InvariantViolation("cell_size_m must be > 0")
        object.__setattr__(self, "percentile_breaks", breaks)
        if self.grid_origin is not None:
            lat, lon = self.grid_origin
            if not (-90 <= lat <= 90 and -180 <= lon <= 180):
                raise InvariantViolation("grid_origin out of coordinate range")
            object.__setattr__(self, "grid_origin", (float(lat), float(lon)))

    def with_origin(self, lat: float, lon: float) -> "PipelineParams":
        return replace(self, grid_origin=(lat, lon))

    def to_dict(self) -> dict:
        d = {
            "ma_window": self.ma_window,
            "keep_every": self.keep_every,
            "raw_rate_hz": self.raw_rate_hz,
            "trim_seconds": self.trim_seconds,
            "min_speed_kmh": self.min_speed_kmh,
            "min_segment_seconds": self.min_segment_seconds,
            "var_window": self.var_window,
            "percentile_breaks": list(self.percentile_breaks),
            "cell_size_m": self.cell_size_m,
            "grid_origin": list(self.grid_origin) if self.grid_origin else None,
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineParams":
        kwargs = dict(d)
        if kwargs.get("percentile_breaks") is not None:
            kwargs["percentile_breaks"] = tuple(kwargs["percentile_breaks"])
        if kwargs.get("grid_origin") is not None:
            kwargs["grid_origin"] = tuple(kwargs["grid_origin"])
        return cls(**kwargs)


def snap_origin(min_lat: float, min_lon: float) -> Tuple[float, float]:
    """Anchor a grid origin just south-west of the data extent.

    Snapping to a 0.01 degree raster keeps the cell boundaries reproducible
    across reruns that see slightly different data extents.
    """
    snap = ORIGIN_SNAP_DEG
    return (math.floor(min_lat / snap) * snap, math.floor(min_lon / snap) * snap)


def load_params(path) -> PipelineParams:
    with open(path, "r", encoding="utf-8") as fh:
        return PipelineParams.from_dict(json.load(fh))


def save_params(params: PipelineParams, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(params.to_dict(), fh, indent=2)
        fh.write("\n")
