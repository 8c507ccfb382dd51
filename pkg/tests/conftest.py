import numpy as np
import pytest

from veloqual.geo import CellIndex
from veloqual.params import PipelineParams
from veloqual.quality import GridCell, SurfaceGrid
from veloqual.ride_io import GpsFix, MotionSample, Ride
from veloqual.routing import RoadGraph, _polyline_points
from veloqual.synth import offset_point

BASE = (52.5000, 13.4000)


@pytest.fixture
def params():
    return PipelineParams(grid_origin=(52.50, 13.40))


def build_ride(
    ride_id="test",
    n_fixes=5,
    fix_interval_ms=3000,
    n_motion=20,
    motion_interval_ms=100,
    start_ts=1_700_000_000_000,
    rate_hz=50,
    downsampled=False,
):
    """Straight northward ride with evenly spaced fixes and motion samples."""
    fixes = []
    for i in range(n_fixes):
        lat, lon = offset_point(BASE, 0.0, 10.0 * i)
        fixes.append(GpsFix(start_ts + i * fix_interval_ms, lat, lon))
    motion = [
        MotionSample(start_ts + i * motion_interval_ms, 0.1 * i, -0.2, 9.8)
        for i in range(n_motion)
    ]
    return Ride(ride_id, fixes, motion, sample_rate_hz=rate_hz, downsampled=downsampled)


def make_grid(params, cell_histograms, ride_hashes=("deadbeef",)):
    """Grid fixture from {CellIndex or (ix, iy): histogram list} mapping."""
    grid = SurfaceGrid(params=params)
    for key, hist in cell_histograms.items():
        idx = key if isinstance(key, CellIndex) else CellIndex(*key)
        grid.cells[idx] = GridCell(idx, histogram=list(hist), ride_hashes=set(ride_hashes))
    return grid


def diamond_graph():
    """Four-node fixture: direct bumpy edge A-B vs 1.5x longer smooth A-C-B.

    Cell quality along A-B is 5, along A-C-B is 1, so slider 0 picks the
    direct edge and slider 10 the detour (weights 1000 vs ~300).
    """
    g = RoadGraph()
    a = BASE
    b = offset_point(BASE, 200.0, 0.0)
    c = offset_point(offset_point(BASE, 100.0, 0.0), 0.0, 111.803398875)
    d = offset_point(b, 60.0, 0.0)
    g.add_node("A", *a)
    g.add_node("B", *b)
    g.add_node("C", *c)
    g.add_node("D", *d)
    g.add_edge("A", "B")
    g.add_edge("A", "C")
    g.add_edge("C", "B")
    g.add_edge("B", "D")
    return g


def diamond_grid(params):
    """Grid matching diamond_graph: bucket-5 cells on A-B, bucket-1 on A-C-B."""
    from veloqual.geo import cell_of

    g = diamond_graph()
    grid = SurfaceGrid(params=params)

    def paint(edge_idx, bucket):
        edge = g.edges[edge_idx]
        for p in _polyline_points(edge.polyline, 1.0):
            idx = cell_of(p, params)
            if idx not in grid.cells:
                grid.cells[idx] = GridCell(idx, ride_hashes={"fixture"})
            grid.cells[idx].histogram[bucket - 1] = 50

    paint(0, 5)  # A-B direct: rough
    paint(1, 1)  # A-C
    paint(2, 1)  # C-B
    return g, grid


def graph_file_text(graph):
    lines = ["veloqual-graph v1"]
    for node_id in sorted(graph.nodes):
        lat, lon = graph.nodes[node_id]
        lines.append(f"N,{node_id},{lat!r},{lon!r}")
    for e in graph.edges:
        poly = ";".join(f"{la!r} {lo!r}" for la, lo in e.polyline)
        lines.append(f"E,{e.a},{e.b},{1 if e.bidirectional else 0},{poly}")
    return "\n".join(lines) + "\n"


@pytest.fixture
def diamond(params):
    graph, grid = diamond_grid(params)
    return graph, grid


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
