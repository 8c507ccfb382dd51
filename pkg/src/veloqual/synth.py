"""Synthetic ride crowds over streets with known ground-truth roughness.

Real-world validation of the pipeline needs a large ride dataset; this
module replaces it with a controllable stand-in.  A world is a set of
streets, each with a surface class whose roughness is an i.i.d. Gaussian
noise variance on every accelerometer axis.  Riders differ in device gain
(multiplying all axes), speed and stopping habits, so the generated crowd
exhibits exactly the heterogeneity the percentile normalization is supposed
to cancel.

Everything is deterministic given a seed: per-ride generators are derived
from (seed, ride index), so crowds can be generated in parallel and still
reproduce byte-identical rides.

GPS error is modeled as a first-order autoregressive Gaussian walk with a
configurable stationary standard deviation: positions drift slowly instead
of jumping fix to fix, which matches receiver behavior and keeps standstills
below the stop-detection speed threshold.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .cloud_preproc import preprocess_ride
from .edge_preproc import downsample_ride
from .errors import DisconnectedRoute, InvariantViolation, VeloqualError
from .geo import EARTH_RADIUS_M, Point, cell_center, haversine_m, project
from .params import PipelineParams, snap_origin
from .quality import SurfaceGrid, aggregate, quantize_ride
from .ride_io import GpsFix, MotionSample, Ride

WORLD_MAGIC = "veloqual-world v1"

#: axis-noise variance per surface class; only the ordering is load-bearing
SURFACE_VARIANCES: Dict[str, float] = {
    "asphalt": 0.05,
    "paving_stones": 0.20,
    "fine_gravel": 0.25,
    "cobblestones": 1.00,
}

#: synthetic clocks start here so timestamps look like epoch milliseconds
BASE_TS_MS = 1_700_000_000_000


def offset_point(p: Point, east_m: float, north_m: float) -> Point:
    """Point displaced by local meters (inverse equirectangular at ``p``)."""
    lat = p[0] + math.degrees(north_m / EARTH_RADIUS_M)
    lon = p[1] + math.degrees(east_m / (EARTH_RADIUS_M * math.cos(math.radians(p[0]))))
    return (lat, lon)


@dataclass
class Street:
    name: str
    surface: str
    polyline: List[Point]


@dataclass
class RiderProfile:
    device_gain: float
    speed_kmh: float
    stop_probability: float = 0.0
    stop_duration_s: Tuple[float, float] = (120.0, 180.0)

    def __post_init__(self):
        if self.device_gain <= 0:
            raise InvariantViolation("device_gain must be > 0")
        if self.speed_kmh <= 0:
            raise InvariantViolation("speed_kmh must be > 0")


@dataclass
class RiderPool:
    device_gain_range: Tuple[float, float] = (0.5, 2.0)
    speed_kmh_range: Tuple[float, float] = (12.0, 22.0)
    stop_probability: float = 0.0
    stop_duration_s_range: Tuple[float, float] = (120.0, 180.0)


@dataclass
class SyntheticWorld:
    streets: List[Street]
    routes: Optional[List[List[int]]] = None
    seed: int = 0
    gps_interval_s: float = 3.0
    gps_noise_m: float = 3.0
    gps_noise_corr_s: float = 30.0
    idle_noise_var: float = 0.002
    mount_noise_var: float = 2.0
    mount_seconds: float = 12.0
    gravity_mps2: float = 0.0
    surface_variances: Dict[str, float] = field(default_factory=lambda: dict(SURFACE_VARIANCES))
    riders: RiderPool = field(default_factory=RiderPool)

    def __post_init__(self):
        if not self.streets:
            raise InvariantViolation("world needs at least one street")
        for street in self.streets:
            if street.surface not in self.surface_variances:
                raise InvariantViolation(f"unknown surface class {street.surface!r}")
            if len(street.polyline) < 2:
                raise InvariantViolation(f"street {street.name!r} needs >= 2 polyline points")
        sv = self.surface_variances
        if {"asphalt", "paving_stones", "fine_gravel", "cobblestones"} <= set(sv):
            if not (sv["asphalt"] < sv["paving_stones"] <= sv["fine_gravel"] < sv["cobblestones"]):
                raise InvariantViolation("surface class roughness must be ordered")
        if self.routes is None:
            self.routes = [list(range(len(self.streets)))]
        for route in self.routes:
            if any(not 0 <= i < len(self.streets) for i in route) or not route:
                raise InvariantViolation("route references unknown street index")


def _connected_path(world: SyntheticWorld, route: Sequence[int]):
    """Concatenated route polyline with per-vertex street ownership.

    Streets may be traversed in either direction; consecutive streets must
    share an endpoint (within ~1 cm) or the route is rejected.
    """
    tol = 1e-7
    same = lambda p, q: abs(p[0] - q[0]) < tol and abs(p[1] - q[1]) < tol

    oriented: List[List[Point]] = []
    for k, idx in enumerate(route):
        line = list(world.streets[idx].polyline)
        if k == 0:
            if len(route) > 1:
                nxt = world.streets[route[1]].polyline
                if same(line[0], nxt[0]) or same(line[0], nxt[-1]):
                    line.reverse()
            oriented.append(line)
            continue
        tail = oriented[-1][-1]
        if same(line[-1], tail):
            line.reverse()
        elif not same(line[0], tail):
            raise DisconnectedRoute(
                f"street {world.streets[idx].name!r} does not connect to the previous street"
            )
        oriented.append(line)

    points: List[Point] = []
    street_of_segment: List[int] = []
    for k, line in enumerate(oriented):
        points.extend(line if k == 0 else line[1:])
        street_of_segment.extend([route[k]] * (len(line) - 1))

    arcs = [0.0]
    for p, q in zip(points, points[1:]):
        arcs.append(arcs[-1] + haversine_m(p, q))
    # junction arc = cumulative length at each street boundary
    junction_arcs = []
    walked = 0
    for line in oriented[:-1]:
        walked += len(line) - 1
        junction_arcs.append(arcs[walked])
    return points, arcs, street_of_segment, junction_arcs


def draw_profile(world: SyntheticWorld, rng: np.random.Generator) -> RiderProfile:
    lo, hi = world.riders.device_gain_range
    gain = math.exp(rng.uniform(math.log(lo), math.log(hi)))
    speed = rng.uniform(*world.riders.speed_kmh_range)
    return RiderProfile(
        device_gain=gain,
        speed_kmh=speed,
        stop_probability=world.riders.stop_probability,
        stop_duration_s=world.riders.stop_duration_s_range,
    )


def generate_ride(
    world: SyntheticWorld,
    profile: RiderProfile,
    route: Sequence[int],
    seed,
    ride_id: Optional[str] = None,
) -> Ride:
    """One raw 50 Hz ride along ``route``, deterministic given ``seed``.

    The ride starts and ends with a stationary mount/dismount span of heavy
    handling noise, pauses at junctions with the profile's stop probability,
    and rides each street at constant speed.  Per-axis accelerometer noise is
    Gaussian with the surface's variance times the squared device gain.
    """
    rng = np.random.default_rng(seed)
    points, arcs, street_of_segment, junction_arcs = _connected_path(world, route)
    total_len = arcs[-1]
    speed_ms = profile.speed_kmh / 3.6

    # phases: (duration_s, kind, payload); kind 0 stationary, 1 moving
    phases: List[Tuple[float, int, float, float]] = []  # duration, moving, arc0, var
    if world.mount_seconds > 0:
        phases.append((world.mount_seconds, 0, 0.0, world.mount_noise_var))
    walked = 0.0
    for k, junction_arc in enumerate(list(junction_arcs) + [total_len]):
        span = junction_arc - walked
        phases.append((span / speed_ms, 1, walked, math.nan))
        walked = junction_arc
        if k < len(junction_arcs):
            if rng.random() < profile.stop_probability:
                duration = rng.uniform(*profile.stop_duration_s)
                phases.append((duration, 0, walked, world.idle_noise_var))
    if world.mount_seconds > 0:
        phases.append((world.mount_seconds, 0, total_len, world.mount_noise_var))

    starts = np.concatenate([[0.0], np.cumsum([p[0] for p in phases])])
    total_t = float(starts[-1])

    gravity = np.zeros(3)
    if world.gravity_mps2 > 0:
        vec = rng.standard_normal(3)
        gravity = world.gravity_mps2 * vec / np.linalg.norm(vec)

    seg_arc = np.asarray(arcs)
    lat_v = np.asarray([p[0] for p in points])
    lon_v = np.asarray([p[1] for p in points])
    phase_arc0 = np.asarray([p[2] for p in phases])
    phase_speed = np.asarray([p[1] for p in phases], dtype=float) * speed_ms

    def arc_at(t: np.ndarray):
        i = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(phases) - 1)
        arc = phase_arc0[i] + phase_speed[i] * (t - starts[i])
        return np.clip(arc, 0.0, total_len), i

    # GPS fixes with AR(1) receiver noise
    t_fix = np.arange(int(math.floor(total_t / world.gps_interval_s)) + 1) * world.gps_interval_s
    fix_arc, _ = arc_at(t_fix)
    fix_lat = np.interp(fix_arc, seg_arc, lat_v)
    fix_lon = np.interp(fix_arc, seg_arc, lon_v)
    if world.gps_noise_m > 0:
        rho = math.exp(-world.gps_interval_s / world.gps_noise_corr_s)
        innovation = math.sqrt(1.0 - rho * rho) * world.gps_noise_m
        noise = rng.standard_normal((len(t_fix), 2))
        east, north = np.zeros(len(t_fix)), np.zeros(len(t_fix))
        for j in range(len(t_fix)):
            if j == 0:
                east[j] = world.gps_noise_m * noise[j, 0]
                north[j] = world.gps_noise_m * noise[j, 1]
            else:
                east[j] = rho * east[j - 1] + innovation * noise[j, 0]
                north[j] = rho * north[j - 1] + innovation * noise[j, 1]
        lat0 = math.radians(float(fix_lat[0]))
        fix_lat = fix_lat + np.degrees(north / EARTH_RADIUS_M)
        fix_lon = fix_lon + np.degrees(east / (EARTH_RADIUS_M * math.cos(lat0)))

    fixes = [
        GpsFix(BASE_TS_MS + int(round(t * 1000)), float(la), float(lo))
        for t, la, lo in zip(t_fix, fix_lat, fix_lon)
    ]

    # 50 Hz motion stream
    dt = 1.0 / 50.0
    t_mot = np.arange(int(math.floor(total_t / dt)) + 1) * dt
    mot_arc, phase_idx = arc_at(t_mot)
    seg_of_arc = np.clip(np.searchsorted(seg_arc, mot_arc, side="right") - 1, 0, len(street_of_segment) - 1)
    seg_var = np.asarray(
        [world.surface_variances[world.streets[s].surface] for s in street_of_segment]
    )
    phase_moving = np.asarray([p[1] for p in phases], dtype=bool)
    phase_var = np.asarray([p[3] for p in phases])
    variances = np.where(phase_moving[phase_idx], seg_var[seg_of_arc], phase_var[phase_idx])
    sigma = profile.device_gain * np.sqrt(variances)
    values = rng.standard_normal((len(t_mot), 3)) * sigma[:, None] + gravity

    motion = [
        MotionSample(BASE_TS_MS + int(round(t * 1000)), float(x), float(y), float(z))
        for t, (x, y, z) in zip(t_mot, values)
    ]
    rid = ride_id if ride_id is not None else f"synth-{seed}"
    return Ride(rid, fixes, motion, sample_rate_hz=50, downsampled=False)


def params_for_world(world: SyntheticWorld, base: Optional[PipelineParams] = None) -> PipelineParams:
    """Pipeline parameters with the grid origin pinned to the world extent."""
    params = base if base is not None else PipelineParams()
    min_lat = min(p[0] for s in world.streets for p in s.polyline)
    min_lon = min(p[1] for s in world.streets for p in s.polyline)
    return params.with_origin(*snap_origin(min_lat, min_lon))


def experiment_rides(world: SyntheticWorld, n_rides: int, seed: int):
    """The deterministic ride crowd of an experiment, one ride at a time."""
    for i in range(n_rides):
        profile_rng = np.random.default_rng(np.random.SeedSequence([seed, i, 0]))
        profile = draw_profile(world, profile_rng)
        route = world.routes[i % len(world.routes)]
        yield generate_ride(
            world,
            profile,
            route,
            seed=np.random.SeedSequence([seed, i, 1]),
            ride_id=f"ride-{i:04d}",
        )


def run_experiment(world: SyntheticWorld, n_rides: int, seed: int) -> SurfaceGrid:
    """Generate a crowd and push it through the full pipeline into a grid."""
    if n_rides < 1:
        raise VeloqualError("n_rides must be >= 1")
    params = params_for_world(world)

    def quantized():
        for ride in experiment_rides(world, n_rides, seed):
            series = preprocess_ride(downsample_ride(ride, params), params)
            if not series.points:
                continue
            yield quantize_ride(series, params)

    return aggregate(quantized(), params)


def _point_segment(px, py, ax, ay, bx, by) -> Tuple[float, float]:
    """(distance, arc offset along segment) from point to segment, local meters."""
    dx, dy = bx - ax, by - ay
    seg_len2 = dx * dx + dy * dy
    if seg_len2 == 0:
        return math.hypot(px - ax, py - ay), 0.0
    t = max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / seg_len2))
    cx, cy = ax + t * dx, ay + t * dy
    return math.hypot(px - cx, py - cy), t * math.sqrt(seg_len2)


def cells_for_street(
    grid: SurfaceGrid,
    world: SyntheticWorld,
    street_idx: int,
    lateral_m: float = 15.0,
    end_margin_m: float = 20.0,
):
    """Grid cells attributable to one street's interior.

    A cell qualifies when its center lies within ``lateral_m`` of the street
    centerline and at least ``end_margin_m`` of arc away from both street
    ends, which keeps junction cells (mixing two surfaces) out of per-street
    statistics.
    """
    origin = grid.params.grid_origin
    street = world.streets[street_idx]
    verts = [project(p, origin) for p in street.polyline]
    seg_start_arc = [0.0]
    for a, b in zip(verts, verts[1:]):
        seg_start_arc.append(seg_start_arc[-1] + math.hypot(b.x - a.x, b.y - a.y))
    total = seg_start_arc[-1]

    selected = []
    for idx, cell in grid.cells.items():
        cx, cy = project(cell_center(idx, grid.params), origin)
        best = None
        for k, (a, b) in enumerate(zip(verts, verts[1:])):
            d, off = _point_segment(cx, cy, a.x, a.y, b.x, b.y)
            arc = seg_start_arc[k] + off
            if best is None or d < best[0]:
                best = (d, arc)
        if best[0] <= lateral_m and end_margin_m <= best[1] <= total - end_margin_m:
            selected.append(cell)
    return selected


def score_by_class(
    grid: SurfaceGrid,
    world: SyntheticWorld,
    lateral_m: float = 15.0,
    end_margin_m: float = 20.0,
) -> Dict[str, float]:
    """Sample-weighted mean cell quality per surface class.

    Streets must not overlap for this attribution to be meaningful; worlds
    with twin streets should score via :func:`cells_for_street` instead.
    """
    value: Dict[str, float] = {}
    weight: Dict[str, float] = {}
    for i, street in enumerate(world.streets):
        for cell in cells_for_street(grid, world, i, lateral_m, end_margin_m):
            value[street.surface] = value.get(street.surface, 0.0) + cell.mean * cell.sample_count
            weight[street.surface] = weight.get(street.surface, 0.0) + cell.sample_count
    return {surface: value[surface] / weight[surface] for surface in value}


def world_to_dict(world: SyntheticWorld) -> dict:
    return {
        "format": WORLD_MAGIC,
        "seed": world.seed,
        "streets": [
            {"name": s.name, "surface": s.surface, "polyline": [[p[0], p[1]] for p in s.polyline]}
            for s in world.streets
        ],
        "routes": world.routes,
        "gps_interval_s": world.gps_interval_s,
        "gps_noise_m": world.gps_noise_m,
        "gps_noise_corr_s": world.gps_noise_corr_s,
        "idle_noise_var": world.idle_noise_var,
        "mount_noise_var": world.mount_noise_var,
        "mount_seconds": world.mount_seconds,
        "gravity_mps2": world.gravity_mps2,
        "surface_variances": dict(world.surface_variances),
        "riders": {
            "device_gain_range": list(world.riders.device_gain_range),
            "speed_kmh_range": list(world.riders.speed_kmh_range),
            "stop_probability": world.riders.stop_probability,
            "stop_duration_s_range": list(world.riders.stop_duration_s_range),
        },
    }


def world_from_dict(doc: dict) -> SyntheticWorld:
    if doc.get("format") != WORLD_MAGIC:
        raise VeloqualError(f"not a {WORLD_MAGIC} document")
    riders_doc = doc.get("riders", {})
    riders = RiderPool(
        device_gain_range=tuple(riders_doc.get("device_gain_range", (0.5, 2.0))),
        speed_kmh_range=tuple(riders_doc.get("speed_kmh_range", (12.0, 22.0))),
        stop_probability=riders_doc.get("stop_probability", 0.0),
        stop_duration_s_range=tuple(riders_doc.get("stop_duration_s_range", (120.0, 180.0))),
    )
    streets = [
        Street(s["name"], s["surface"], [tuple(p) for p in s["polyline"]])
        for s in doc["streets"]
    ]
    kwargs = {
        key: doc[key]
        for key in (
            "seed",
            "gps_interval_s",
            "gps_noise_m",
            "gps_noise_corr_s",
            "idle_noise_var",
            "mount_noise_var",
            "mount_seconds",
            "gravity_mps2",
        )
        if key in doc
    }
    if "surface_variances" in doc:
        kwargs["surface_variances"] = dict(doc["surface_variances"])
    return SyntheticWorld(streets=streets, routes=doc.get("routes"), riders=riders, **kwargs)


def load_world(path) -> SyntheticWorld:
    with open(path, "r", encoding="utf-8") as fh:
        return world_from_dict(json.load(fh))


def save_world(world: SyntheticWorld, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(world_to_dict(world), fh, indent=2)
        fh.write("\n")
