"""Acceptance suite.

Each test prints one ``[criterion N] PASS/FAIL`` line (run with ``-s`` to see
them live).  The suite is oracle-based: synthetic crowds with known ground
truth, brute-force recomputation, exhaustive path enumeration and an
independent GeoJSON checker stand in for the real-world dataset.
"""

import json
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest
from fastapi.testclient import TestClient

from veloqual.cloud_preproc import split_moving_segments
from veloqual.edge_preproc import decimate, moving_average
from veloqual.cloud_preproc import moving_variance_array
from veloqual.export import to_geojson
from veloqual.geo import EARTH_RADIUS_M, cell_of
from veloqual.params import PipelineParams
from veloqual.quality import (
    aggregate,
    merge,
    quantize_ride,
    quantize_values,
    to_json_text,
)
from veloqual.ride_io import GpsFix, MotionSample, Ride, write_ride
from veloqual.routing import RouteRequest, edge_quality, edge_weight, shortest_route
from veloqual.service import ServiceConfig, create_app
from veloqual.synth import (
    RiderPool,
    RiderProfile,
    Street,
    SyntheticWorld,
    cells_for_street,
    downsample_ride,
    generate_ride,
    offset_point,
    params_for_world,
    preprocess_ride,
    run_experiment,
    score_by_class,
    experiment_rides,
)

from conftest import BASE, build_ride, diamond_grid, graph_file_text
from geojson_check import check_feature_collection
from test_routing import enumerate_paths

SEED = 20260810


@contextmanager
def criterion(n, description):
    try:
        yield
    except BaseException:
        print(f"\n[criterion {n:2d}] FAIL {description}")
        raise
    print(f"\n[criterion {n:2d}] PASS {description}")


def chain_streets(specs, start=BASE, length_m=400.0):
    streets, cur = [], start
    for name, surface in specs:
        end = offset_point(cur, 0.0, length_m)
        streets.append(Street(name, surface, [cur, end]))
        cur = end
    return streets


FOUR_CLASSES = [
    ("asphalt-st", "asphalt"),
    ("paving-st", "paving_stones"),
    ("gravel-st", "fine_gravel"),
    ("cobble-st", "cobblestones"),
]


def four_street_world(length_m=400.0, stop_probability=0.0):
    return SyntheticWorld(
        streets=chain_streets(FOUR_CLASSES, length_m=length_m),
        gravity_mps2=9.81,
        riders=RiderPool(
            device_gain_range=(0.5, 2.0),
            speed_kmh_range=(12.0, 22.0),
            stop_probability=stop_probability,
            stop_duration_s_range=(120.0, 180.0),
        ),
    )


@pytest.fixture(scope="module")
def ordering_result():
    world = four_street_world()
    start = time.perf_counter()
    grid = run_experiment(world, 200, seed=SEED)
    elapsed = time.perf_counter() - start
    return world, grid, elapsed


def test_criterion_01_ordering_recovery(ordering_result):
    world, grid, elapsed = ordering_result
    with criterion(1, "surface-class ordering recovered from 200 heterogeneous rides"):
        scores = score_by_class(grid, world)
        assert elapsed < 60.0, f"experiment took {elapsed:.1f}s"
        assert scores["asphalt"] < scores["paving_stones"] < scores["fine_gravel"] < scores["cobblestones"]
        assert scores["asphalt"] < 1.8
        assert scores["cobblestones"] > 3.4


def test_criterion_02_scale_invariance():
    with criterion(2, "quantization exactly invariant under per-ride scaling (x0.01, x1, x100)"):
        rng = np.random.default_rng(SEED + 2)
        breaks = PipelineParams().percentile_breaks
        for _ in range(100):
            values = rng.lognormal(mean=-1.0, sigma=1.5, size=int(rng.integers(20, 400)))
            reference = quantize_values(values, breaks).tolist()
            for lam in (0.01, 1.0, 100.0):
                assert quantize_values(lam * values, breaks).tolist() == reference


def test_criterion_03_bucket_law():
    with criterion(3, "distinct-valued rides with n % 5 == 0 fill buckets exactly n/5 each"):
        rng = np.random.default_rng(SEED + 3)
        breaks = PipelineParams().percentile_breaks
        checked = 0
        while checked < 1000:
            m = int(rng.integers(1, 50))
            values = rng.standard_normal(5 * m)
            if len(np.unique(values)) != 5 * m:
                continue
            counts = np.bincount(quantize_values(values, breaks), minlength=6)[1:]
            assert counts.tolist() == [m] * 5
            checked += 1


def brute_mean(series, window):
    return [sum(series[i - window + 1 : i + 1]) / window for i in range(window - 1, len(series))]


def brute_var(series, window):
    out = []
    for i in range(window - 1, len(series)):
        chunk = series[i - window + 1 : i + 1]
        mu = sum(chunk) / window
        out.append(sum((v - mu) ** 2 for v in chunk) / window)
    return out


def test_criterion_04_preprocessing_oracles():
    with criterion(4, "moving mean/variance/decimation match brute force (1e-10); rotation invariance (1e-9)"):
        rng = np.random.default_rng(SEED + 4)
        for _ in range(1000):
            n = int(rng.integers(12, 90))
            window = int(rng.integers(1, n + 1))
            series = (rng.standard_normal(n) * 3.0).tolist()
            np.testing.assert_allclose(
                moving_average(series, window), brute_mean(series, window), atol=1e-10, rtol=0
            )
            np.testing.assert_allclose(
                moving_variance_array(np.asarray(series), window),
                brute_var(series, window),
                atol=1e-10,
                rtol=0,
            )
            k = int(rng.integers(1, 8))
            assert decimate(series, k) == series[::k]
        for _ in range(100):
            samples = rng.standard_normal((120, 3)) * 2.0
            rotation, _ = np.linalg.qr(rng.standard_normal((3, 3)))
            rotated = samples @ rotation.T
            b0 = moving_variance_array(samples.T, 10).sum(axis=0) / 3.0
            b1 = moving_variance_array(rotated.T, 10).sum(axis=0) / 3.0
            np.testing.assert_allclose(b0, b1, atol=1e-9, rtol=0)


def stop_profile_ride(params):
    """3 min moving, 2 min standing, 3 min moving; exact inter-fix speeds."""
    t0 = 1_700_000_000_000
    fixes = [GpsFix(t0, 52.5, 13.4)]
    lat, t = 52.5, 0
    for duration, speed_kmh in [(180, 20.0), (120, 0.0), (180, 20.0)]:
        step = speed_kmh / 3.6 * 3.0
        for _ in range(duration // 3):
            t += 3
            lat += math.degrees(step / EARTH_RADIUS_M)
            fixes.append(GpsFix(t0 + t * 1000, lat, 13.4))
    motion = [MotionSample(t0 + i * 100, 0.0, 0.0, 0.0) for i in range(t * 10 + 1)]
    return Ride("stops", fixes, motion, sample_rate_hz=10, downsampled=True), t0


def test_criterion_05_stop_removal():
    with criterion(5, "stop spans removed at exact boundaries; injected stops shift class scores < 0.1"):
        params = PipelineParams(grid_origin=(52.5, 13.4))
        ride, t0 = stop_profile_ride(params)
        segments = split_moving_segments(ride, params)
        assert [
            (s.fixes[0].timestamp - t0, s.fixes[-1].timestamp - t0) for s in segments
        ] == [(0, 180_000), (300_000, 480_000)]

        quiet = four_street_world(stop_probability=0.0)
        stoppy = four_street_world(stop_probability=0.6)
        score_quiet = score_by_class(run_experiment(quiet, 120, seed=SEED + 5), quiet)
        score_stoppy = score_by_class(run_experiment(stoppy, 120, seed=SEED + 5), stoppy)
        for surface in score_quiet:
            assert abs(score_quiet[surface] - score_stoppy[surface]) < 0.1, surface


def test_criterion_06_mixed_cell_bimodality():
    with criterion(6, "50/50 lane mixture produces bimodal cells (>25% mass in 1-2 and in 4-5)"):
        approach = Street("approach", "asphalt", [BASE, offset_point(BASE, 0.0, 300.0)])
        twin_a = Street(
            "twin-smooth", "asphalt", [approach.polyline[1], offset_point(approach.polyline[1], 0.0, 300.0)]
        )
        twin_b = Street("twin-rough", "cobblestones", list(twin_a.polyline))
        tail = Street(
            "tail", "cobblestones", [twin_a.polyline[1], offset_point(twin_a.polyline[1], 0.0, 300.0)]
        )
        world = SyntheticWorld(
            streets=[approach, twin_a, twin_b, tail],
            routes=[[0, 1, 3], [0, 2, 3]],
            gravity_mps2=9.81,
        )
        grid = run_experiment(world, 120, seed=SEED + 6)
        target = cells_for_street(grid, world, 1)
        assert len(target) >= 10
        hist = np.zeros(5)
        for cell in target:
            hist += np.asarray(cell.histogram)
        shares = hist / hist.sum()
        assert shares[0] + shares[1] > 0.25, f"smooth mass {shares}"
        assert shares[3] + shares[4] > 0.25, f"rough mass {shares}"


def test_criterion_07_router_exactness(params):
    with criterion(7, "router optimal vs exhaustive enumeration; slider-0 distance; monotone sweep"):
        graph, grid = diamond_grid(params)
        a, b = graph.nodes["A"], graph.nodes["B"]
        for slider in range(11):
            got = shortest_route(graph, grid, RouteRequest(a, b, slider)).total_weight
            assert got == pytest.approx(enumerate_paths(graph, "A", "B", slider, grid), rel=1e-12)

        rng = np.random.default_rng(SEED + 7)
        from veloqual.routing import RoadGraph
        from veloqual.quality import GridCell, SurfaceGrid
        from veloqual.geo import CellIndex

        for _ in range(5):
            g = RoadGraph()
            n = int(rng.integers(5, 9))
            for i in range(n):
                g.add_node(f"n{i}", *offset_point(BASE, float(rng.uniform(0, 300)), float(rng.uniform(0, 300))))
            for i in range(1, n):
                g.add_edge(f"n{i - 1}", f"n{i}")
            for _ in range(n - 1):
                i, j = rng.integers(0, n, size=2)
                if i != j:
                    try:
                        g.add_edge(f"n{i}", f"n{j}")
                    except Exception:
                        pass
            rgrid = SurfaceGrid(params=params)
            for ci in range(0, 31):
                for cj in range(0, 31):
                    if rng.random() < 0.4:
                        hist = [0] * 5
                        hist[int(rng.integers(0, 5))] = int(rng.integers(1, 40))
                        rgrid.cells[CellIndex(ci, cj)] = GridCell(CellIndex(ci, cj), histogram=hist, ride_hashes={"s"})
            slider = int(rng.integers(0, 11))
            result = shortest_route(g, rgrid, RouteRequest(g.nodes["n0"], g.nodes[f"n{n-1}"], slider))
            assert result.total_weight == pytest.approx(
                enumerate_paths(g, "n0", f"n{n-1}", slider, rgrid), rel=1e-12
            )

        # slider 0 ranks purely by distance on every fixture
        free = shortest_route(graph, grid, RouteRequest(a, b, 0))
        assert free.total_weight == free.total_length_m
        empty = SurfaceGrid(params=params)
        assert free.nodes == shortest_route(graph, empty, RouteRequest(a, b, 0)).nodes

        sweep = [
            shortest_route(graph, grid, RouteRequest(a, b, s)).mean_quality for s in range(11)
        ]
        assert all(q2 <= q1 + 1e-12 for q1, q2 in zip(sweep, sweep[1:]))


def test_criterion_08_aggregation_monoid():
    with criterion(8, "sharded aggregate+merge byte-identical to single pass (3 shardings of 50 rides)"):
        world = four_street_world(length_m=200.0)
        params = params_for_world(world)
        quantized = []
        for ride in experiment_rides(world, 50, seed=SEED + 8):
            series = preprocess_ride(downsample_ride(ride, params), params)
            if series.points:
                quantized.append(quantize_ride(series, params))
        reference = to_json_text(aggregate(list(quantized), params))
        rng = np.random.default_rng(SEED + 88)
        for _ in range(3):
            assignment = rng.integers(0, 3, size=len(quantized))
            shards = [
                aggregate([q for q, a in zip(quantized, assignment) if a == shard], params)
                for shard in range(3)
            ]
            combined = merge(merge(shards[0], shards[1]), shards[2])
            assert to_json_text(combined) == reference


def test_criterion_09_geojson_validity(ordering_result):
    with criterion(9, "export passes the independent GeoJSON validator; centroids map back"):
        _, grid, _ = ordering_result
        doc = json.loads(to_geojson(grid))
        count = check_feature_collection(doc)
        assert count == len(grid.cells) > 100
        for feature in doc["features"]:
            ring = feature["geometry"]["coordinates"][0]
            lon = sum(p[0] for p in ring[:4]) / 4
            lat = sum(p[1] for p in ring[:4]) / 4
            ix, iy = map(int, feature["id"].split(":"))
            assert cell_of((lat, lon), grid.params) == (ix, iy)


def test_criterion_10_service_round_trip(tmp_path, params):
    with criterion(10, "upload -> cells; restart reproduces responses; duplicate 409"):
        graph, grid = diamond_grid(params)
        data_dir = tmp_path / "data"
        data_dir.mkdir()
        from veloqual.quality import save_grid

        save_grid(grid, data_dir / "grid.json")
        graph_path = tmp_path / "graph.txt"
        graph_path.write_text(graph_file_text(graph), encoding="utf-8")
        config = ServiceConfig(data_dir=data_dir, graph_path=graph_path)

        # upload street sits 800 m north, clear of the preloaded diamond cells
        up_start = offset_point(BASE, 40.0, 800.0)
        street = Street("up", "asphalt", [up_start, offset_point(up_start, 0.0, 500.0)])
        rough = Street("up2", "cobblestones", [street.polyline[1], offset_point(street.polyline[1], 0.0, 500.0)])
        world = SyntheticWorld(streets=[street, rough], gps_noise_m=1.0)
        body = write_ride(
            generate_ride(world, RiderProfile(device_gain=1.0, speed_kmh=18.0), [0, 1], seed=1, ride_id="acc")
        )
        probe = offset_point(up_start, 0.0, 250.0)
        bbox = f"{probe[1] - 0.002},{probe[0] - 0.003},{probe[1] + 0.002},{probe[0] + 0.003}"

        with TestClient(create_app(config)) as client:
            empty = client.get("/api/cells", params={"bbox": bbox}).json()
            assert empty["features"] == []
            resp = client.post("/api/rides", content=body)
            assert resp.status_code == 200
            assert resp.json()["cells_updated"] >= 1
            populated = client.get("/api/cells", params={"bbox": bbox})
            assert populated.json()["features"]
            assert client.post("/api/rides", content=body).status_code == 409
            short = build_ride(n_fixes=6)
            assert client.post("/api/rides", content=write_ride(short)).status_code == 422

        with TestClient(create_app(config)) as reborn:
            again = reborn.get("/api/cells", params={"bbox": bbox})
            assert again.content == populated.content
            assert reborn.post("/api/rides", content=body).status_code == 409
