"""Server-side ride cleaning and bumpiness extraction.

Uploaded rides carry mount/dismount noise at the ends, standstills at
traffic lights and occasional walking stretches.  This stage trims a fixed
margin off both ends, keeps only sustained in-motion spans, and converts the
3-axis accelerometer stream of each span into a single geolocated roughness
series: the mean of the three per-axis moving variances.

Summing the axis variances equals the trace of the windowed covariance
matrix, so the measure is invariant under device orientation, and variance
ignores constant offsets such as gravity.  Variances are population variances
(divide by n) over a trailing window, restarted per segment so a standstill
never leaks variance into the adjacent moving spans.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, NamedTuple, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import RideTooShort, SegmentTooShort
from .geo import haversine_m
from .params import PipelineParams
from .ride_io import GpsFix, MotionSample, Ride, fix_arrays, motion_arrays


class BumpinessPoint(NamedTuple):
    timestamp: int
    lat: float
    lon: float
    b: float


@dataclass
class BumpinessSeries:
    ride_id: str
    points: List[BumpinessPoint]


@dataclass
class MotionSegment:
    samples: List[MotionSample]
    fixes: List[GpsFix]
    mean_speed_kmh: float


def trim_ends(ride: Ride, trim_seconds: float) -> Ride:
    """Drop everything within ``trim_seconds`` of either end of the GPS span."""
    t0, t1 = ride.fixes[0].timestamp, ride.fixes[-1].timestamp
    trim_ms = int(round(trim_seconds * 1000))
    if t1 - t0 <= 2 * trim_ms:
        raise RideTooShort(f"ride {ride.ride_id} spans {(t1 - t0) / 1000:.1f}s, need > {2 * trim_seconds:.0f}s")
    lo, hi = t0 + trim_ms, t1 - trim_ms
    fixes = [f for f in ride.fixes if lo <= f.timestamp <= hi]
    if not fixes:
        raise RideTooShort(f"ride {ride.ride_id} has no GPS fixes left after trimming")
    motion = [m for m in ride.motion if lo <= m.timestamp <= hi]
    return replace(ride, fixes=fixes, motion=motion)


def split_moving_segments(ride: Ride, params: PipelineParams) -> List[MotionSegment]:
    """Split a trimmed ride into sustained in-motion segments.

    The speed of each inter-fix interval is haversine distance over elapsed
    time.  Maximal runs of intervals at or above ``min_speed_kmh`` become
    candidate segments; runs shorter than ``min_segment_seconds`` are
    discarded.  A segment is cut at its boundary fixes and owns exactly the
    motion samples inside its fix span (inclusive); samples in discarded
    spans are dropped.
    """
    fixes = ride.fixes
    if len(fixes) < 2:
        return []
    moving = []
    for a, b in zip(fixes, fixes[1:]):
        dt_s = (b.timestamp - a.timestamp) / 1000.0
        speed_kmh = haversine_m((a.lat, a.lon), (b.lat, b.lon)) / dt_s * 3.6
        moving.append(speed_kmh >= params.min_speed_kmh)

    segments: List[MotionSegment] = []
    run_start: Optional[int] = None
    for i in range(len(moving) + 1):
        if i < len(moving) and moving[i]:
            if run_start is None:
                run_start = i
            continue
        if run_start is None:
            continue
        first, last = run_start, i  # fixes[first..last] span the run
        run_start = None
        t_a, t_b = fixes[first].timestamp, fixes[last].timestamp
        if (t_b - t_a) < params.min_segment_seconds * 1000:
            continue
        seg_fixes = fixes[first : last + 1]
        samples = [m for m in ride.motion if t_a <= m.timestamp <= t_b]
        path_m = sum(
            haversine_m((p.lat, p.lon), (q.lat, q.lon)) for p, q in zip(seg_fixes, seg_fixes[1:])
        )
        mean_speed = path_m / ((t_b - t_a) / 1000.0) * 3.6
        segments.append(MotionSegment(samples=samples, fixes=seg_fixes, mean_speed_kmh=mean_speed))
    return segments


def moving_variance_array(values: np.ndarray, window: int) -> np.ndarray:
    """Trailing windowed population variance along the last axis."""
    return sliding_window_view(values, window, axis=-1).var(axis=-1)


def bumpiness(segment: MotionSegment, params: PipelineParams, fixes: List[GpsFix]) -> BumpinessSeries:
    """Roughness series of one segment: mean of the three axis variances.

    Each output point carries the timestamp of the newest sample in its
    variance window and the position interpolated on the GPS trace at that
    time; the first ``var_window - 1`` samples only warm the window up.
    """
    if len(segment.samples) < params.var_window:
        raise SegmentTooShort(
            f"segment has {len(segment.samples)} samples, need >= {params.var_window}"
        )
    ts, values = motion_arrays(segment.samples)
    variances = moving_variance_array(values.T, params.var_window)  # (3, n-w+1)
    b = (variances[0] + variances[1] + variances[2]) / 3.0
    out_ts = ts[params.var_window - 1 :]

    fix_ts, fix_lat, fix_lon = fix_arrays(fixes)
    lats = np.interp(out_ts, fix_ts, fix_lat)
    lons = np.interp(out_ts, fix_ts, fix_lon)
    points = [
        BumpinessPoint(int(t), float(la), float(lo), float(v))
        for t, la, lo, v in zip(out_ts, lats, lons, b)
    ]
    return BumpinessSeries(ride_id="", points=points)


def preprocess_ride(ride: Ride, params: PipelineParams) -> BumpinessSeries:
    """Full cloud stage: trim, split into moving segments, extract bumpiness.

    Returns one series per ride with all segments concatenated in time
    order; percentile normalization downstream treats the ride, not the
    segment, as its unit.  The series may be empty when no segment survives.
    """
    trimmed = trim_ends(ride, params.trim_seconds)
    points: List[BumpinessPoint] = []
    for segment in split_moving_segments(trimmed, params):
        if len(segment.samples) < params.var_window:
            continue
        points.extend(bumpiness(segment, params, trimmed.fixes).points)
    return BumpinessSeries(ride_id=ride.ride_id, points=points)


def write_bumpiness_csv(series: BumpinessSeries) -> str:
    """Intermediate per-ride CSV: comment line with the ride id, then rows."""
    from .ride_io import decimal_str

    lines = [f"# ride={series.ride_id}", "ts_ms,lat,lon,b"]
    for p in series.points:
        lines.append(f"{p.timestamp},{decimal_str(p.lat, 6)},{decimal_str(p.lon, 6)},{decimal_str(p.b)}")
    return "\n".join(lines) + "\n"


def read_bumpiness_csv(text: str, fallback_ride_id: str = "") -> BumpinessSeries:
    lines = [ln for ln in text.split("\n") if ln]
    ride_id = fallback_ride_id
    rows = []
    for ln in lines:
        if ln.startswith("# ride="):
            ride_id = ln[len("# ride=") :]
            continue
        if ln.startswith("#") or ln.startswith("ts_ms"):
            continue
        ts, lat, lon, b = ln.split(",")
        rows.append(BumpinessPoint(int(ts), float(lat), float(lon), float(b)))
    return BumpinessSeries(ride_id=ride_id, points=rows)
