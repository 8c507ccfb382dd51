"""Ride data model and the on-disk ride file format.

A ride couples a low-rate GPS trace (one fix every few seconds) with a
high-rate accelerometer stream.  Files are plain UTF-8 text with two CSV
sections::

    veloqual-ride v1
    id=<string>,rate_hz=<int>,downsampled=<0|1>
    #GPS
    <ts_ms>,<lat>,<lon>
    ...
    #MOTION
    <ts_ms>,<x>,<y>,<z>
    ...

GPS timestamps are strictly increasing, motion timestamps non-decreasing,
coordinates are decimal degrees with at least six fractional digits.  Numbers
are written with enough digits to round-trip exactly, so
``parse_ride(write_ride(r)) == r`` holds field for field.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, NamedTuple, Tuple, Union

import numpy as np

from .errors import (
    BadFieldCount,
    CropTooLarge,
    EmptyRide,
    InvariantViolation,
    MissingHeader,
    NonMonotonicTimestamp,
)

MAGIC = "veloqual-ride v1"


class GpsFix(NamedTuple):
    timestamp: int  # ms since epoch
    lat: float
    lon: float


class MotionSample(NamedTuple):
    timestamp: int  # ms since epoch
    x: float
    y: float
    z: float


@dataclass
class Ride:
    ride_id: str
    fixes: List[GpsFix]
    motion: List[MotionSample]
    sample_rate_hz: int = 50
    downsampled: bool = False


def decimal_str(value: float, min_frac: int = 1) -> str:
    """Shortest plain-decimal rendering of ``value`` that parses back exactly.

    Never uses scientific notation; pads to ``min_frac`` fractional digits.
    """
    value = float(value)
    for digits in range(min_frac, 18):
        text = f"{value:.{digits}f}"
        if float(text) == value:
            return text
    # exact binary expansion as a last resort (tiny magnitudes)
    from decimal import Decimal

    return format(Decimal(value), "f")


def validate_ride(ride: Ride) -> None:
    """Raise if the ride violates a type invariant."""
    if "," in ride.ride_id or "\n" in ride.ride_id or not ride.ride_id:
        raise InvariantViolation("ride_id must be non-empty and free of ',' and newlines")
    if not ride.fixes:
        raise EmptyRide("ride has no GPS fixes")
    prev_ts = None
    for f in ride.fixes:
        if not (-90.0 <= f.lat <= 90.0 and -180.0 <= f.lon <= 180.0):
            raise InvariantViolation(f"fix coordinate out of range: {f.lat},{f.lon}")
        if prev_ts is not None and f.timestamp <= prev_ts:
            raise InvariantViolation("GPS timestamps must be strictly increasing")
        prev_ts = f.timestamp
    prev_ts = None
    for m in ride.motion:
        if prev_ts is not None and m.timestamp < prev_ts:
            raise InvariantViolation("motion timestamps must be non-decreasing")
        prev_ts = m.timestamp
    if ride.motion:
        if ride.motion[-1].timestamp < ride.fixes[0].timestamp or ride.motion[0].timestamp > ride.fixes[-1].timestamp:
            raise InvariantViolation("motion time range does not overlap fix time range")
    if ride.downsampled and ride.sample_rate_hz == 50:
        raise InvariantViolation("downsampled rides must declare the reduced sample rate")


def parse_ride(data: Union[bytes, str]) -> Ride:
    """Parse one ride file.  Malformed lines are reported with their number."""
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MissingHeader(f"ride file is not UTF-8 text: {exc}") from None
    else:
        text = data

    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if len(lines) < 3 or lines[0] != MAGIC:
        raise MissingHeader(f"expected first line {MAGIC!r}")

    meta = lines[1].split(",")
    if len(meta) != 3:
        raise MissingHeader("expected header line 'id=...,rate_hz=...,downsampled=...'")
    fields = {}
    for part in meta:
        key, sep, val = part.partition("=")
        if not sep:
            raise MissingHeader(f"malformed header field {part!r}")
        fields[key] = val
    try:
        ride_id = fields["id"]
        rate_hz = int(fields["rate_hz"])
        downsampled = {"0": False, "1": True}[fields["downsampled"]]
    except (KeyError, ValueError) as exc:
        raise MissingHeader(f"malformed header line: {exc}") from None

    if len(lines) < 3 or lines[2] != "#GPS":
        raise MissingHeader("missing #GPS section marker")

    fixes: List[GpsFix] = []
    motion: List[MotionSample] = []
    section = "gps"
    prev_gps_ts = None
    prev_mot_ts = None
    for line_no, line in enumerate(lines[3:], start=4):
        if line == "#MOTION":
            if section == "motion":
                raise BadFieldCount(line_no, "duplicate #MOTION marker")
            section = "motion"
            continue
        parts = line.split(",")
        if section == "gps":
            if len(parts) != 3:
                raise BadFieldCount(line_no, f"expected 3 GPS fields, got {len(parts)}")
            try:
                ts, lat, lon = int(parts[0]), float(parts[1]), float(parts[2])
            except ValueError:
                raise BadFieldCount(line_no, f"unparsable GPS row {line!r}") from None
            if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
                raise BadFieldCount(line_no, f"coordinate out of range: {lat},{lon}")
            if prev_gps_ts is not None and ts <= prev_gps_ts:
                raise NonMonotonicTimestamp(line_no, "GPS timestamps must be strictly increasing")
            prev_gps_ts = ts
            fixes.append(GpsFix(ts, lat, lon))
        else:
            if len(parts) != 4:
                raise BadFieldCount(line_no, f"expected 4 motion fields, got {len(parts)}")
            try:
                ts = int(parts[0])
                x, y, z = float(parts[1]), float(parts[2]), float(parts[3])
            except ValueError:
                raise BadFieldCount(line_no, f"unparsable motion row {line!r}") from None
            if prev_mot_ts is not None and ts < prev_mot_ts:
                raise NonMonotonicTimestamp(line_no, "motion timestamps must be non-decreasing")
            prev_mot_ts = ts
            motion.append(MotionSample(ts, x, y, z))

    if section == "gps":
        raise MissingHeader("missing #MOTION section marker")
    if not fixes:
        raise EmptyRide("ride file contains no GPS rows")

    ride = Ride(ride_id, fixes, motion, sample_rate_hz=rate_hz, downsampled=downsampled)
    validate_ride(ride)
    return ride


def write_ride(ride: Ride) -> bytes:
    validate_ride(ride)
    out = [MAGIC, f"id={ride.ride_id},rate_hz={ride.sample_rate_hz},downsampled={1 if ride.downsampled else 0}", "#GPS"]
    for f in ride.fixes:
        out.append(f"{f.timestamp},{decimal_str(f.lat, 6)},{decimal_str(f.lon, 6)}")
    out.append("#MOTION")
    for m in ride.motion:
        out.append(f"{m.timestamp},{decimal_str(m.x)},{decimal_str(m.y)},{decimal_str(m.z)}")
    return ("\n".join(out) + "\n").encode("utf-8")


def crop_ride(ride: Ride, drop_head: int, drop_tail: int) -> Ride:
    """Drop fixes from both ends, pruning motion to the retained time span."""
    if drop_head < 0 or drop_tail < 0:
        raise CropTooLarge("crop counts must be >= 0")
    if drop_head + drop_tail >= len(ride.fixes):
        raise CropTooLarge(
            f"cannot drop {drop_head}+{drop_tail} of {len(ride.fixes)} fixes"
        )
    fixes = ride.fixes[drop_head : len(ride.fixes) - drop_tail]
    t0, t1 = fixes[0].timestamp, fixes[-1].timestamp
    motion = [m for m in ride.motion if t0 <= m.timestamp <= t1]
    return replace(ride, fixes=fixes, motion=motion)


def fix_arrays(fixes: List[GpsFix]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """GPS trace as (ts_ms int64, lat, lon) arrays."""
    arr = np.asarray(fixes, dtype=np.float64).reshape(-1, 3)
    return arr[:, 0].astype(np.int64), arr[:, 1], arr[:, 2]


def motion_arrays(motion: List[MotionSample]) -> Tuple[np.ndarray, np.ndarray]:
    """Motion stream as (ts_ms int64, values (n,3)) arrays."""
    arr = np.asarray(motion, dtype=np.float64).reshape(-1, 4)
    return arr[:, 0].astype(np.int64), arr[:, 1:4]
