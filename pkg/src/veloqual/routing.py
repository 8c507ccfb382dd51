"""Surface-quality-aware shortest paths on a road graph.

Edge weights blend geometric length with the measured surface quality of the
cells the edge crosses.  A user slider 0..10 scales the blend: 0 routes by
pure distance, 10 makes the worst surface cost five times its length:

    weight = length_m * (1 + (slider / 10) * (quality - 1))

Quality per edge is the sample-count-weighted mean of the grid cells hit by
the edge polyline (probed every half cell size); edges over unmeasured
ground fall back to the neutral quality 3, so unknown streets are neither
favored nor forbidden.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from heapq import heappop, heappush
from typing import Dict, List, Optional, Tuple

from .errors import InvariantViolation, MissingHeader, NoSnap, Unreachable, VeloqualError
from .geo import Point, cell_of, haversine_m
from .quality import SurfaceGrid, cell_quality

GRAPH_MAGIC = "veloqual-graph v1"
SNAP_RADIUS_M = 250.0
NEUTRAL_QUALITY = 3.0


@dataclass
class Edge:
    a: str
    b: str
    bidirectional: bool
    polyline: List[Point]
    length_m: float


@dataclass
class RoadGraph:
    nodes: Dict[str, Point] = field(default_factory=dict)
    edges: List[Edge] = field(default_factory=list)
    _adjacency: Optional[Dict[str, List[Tuple[str, int]]]] = field(default=None, repr=False)

    def add_node(self, node_id: str, lat: float, lon: float) -> None:
        self.nodes[node_id] = (lat, lon)
        self._adjacency = None

    def add_edge(
        self,
        a: str,
        b: str,
        bidirectional: bool = True,
        polyline: Optional[List[Point]] = None,
    ) -> Edge:
        if a not in self.nodes or b not in self.nodes:
            raise VeloqualError(f"edge references unknown node: {a} or {b}")
        line = list(polyline) if polyline else [self.nodes[a], self.nodes[b]]
        for end, node in ((line[0], a), (line[-1], b)):
            np_, ep = self.nodes[node], end
            if abs(np_[0] - ep[0]) > 1e-7 or abs(np_[1] - ep[1]) > 1e-7:
                raise InvariantViolation(f"polyline endpoint {end} does not coincide with node {node}")
        length = sum(haversine_m(p, q) for p, q in zip(line, line[1:]))
        if length <= 0:
            raise InvariantViolation(f"edge {a}-{b} has zero length")
        edge = Edge(a, b, bidirectional, line, length)
        self.edges.append(edge)
        self._adjacency = None
        return edge

    def adjacency(self) -> Dict[str, List[Tuple[str, int]]]:
        if self._adjacency is None:
            adj: Dict[str, List[Tuple[str, int]]] = {node: [] for node in self.nodes}
            for i, e in enumerate(self.edges):
                adj[e.a].append((e.b, i))
                if e.bidirectional:
                    adj[e.b].append((e.a, i))
            for neighbors in adj.values():
                neighbors.sort()
            self._adjacency = adj
        return self._adjacency


def parse_graph(text: str) -> RoadGraph:
    """Graph file: magic line, then `N,id,lat,lon` and `E,a,b,bidir,polyline` rows."""
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != GRAPH_MAGIC:
        raise MissingHeader(f"expected first line {GRAPH_MAGIC!r}")
    graph = RoadGraph()
    edge_rows = []
    for line_no, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if parts[0] == "N":
            if len(parts) != 4:
                raise VeloqualError(f"line {line_no}: node rows need 4 fields")
            graph.add_node(parts[1], float(parts[2]), float(parts[3]))
        elif parts[0] == "E":
            if len(parts) != 5:
                raise VeloqualError(f"line {line_no}: edge rows need 5 fields")
            edge_rows.append((line_no, parts))
        else:
            raise VeloqualError(f"line {line_no}: unknown row type {parts[0]!r}")
    for line_no, parts in edge_rows:
        polyline = None
        if parts[4]:
            polyline = []
            for chunk in parts[4].split(";"):
                lat_str, lon_str = chunk.strip().split(" ")
                polyline.append((float(lat_str), float(lon_str)))
        graph.add_edge(parts[1], parts[2], parts[3] == "1", polyline)
    return graph


def load_graph(path) -> RoadGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_graph(fh.read())


def _polyline_points(polyline: List[Point], step_m: float) -> List[Point]:
    """Points along the polyline every ``step_m`` of arc length, plus both ends."""
    seg_lengths = [haversine_m(p, q) for p, q in zip(polyline, polyline[1:])]
    total = sum(seg_lengths)
    points = []
    target = 0.0
    walked = 0.0
    seg = 0
    while target <= total and seg < len(seg_lengths):
        while seg < len(seg_lengths) and walked + seg_lengths[seg] < target:
            walked += seg_lengths[seg]
            seg += 1
        if seg >= len(seg_lengths):
            break
        p, q = polyline[seg], polyline[seg + 1]
        alpha = (target - walked) / seg_lengths[seg] if seg_lengths[seg] > 0 else 0.0
        points.append((p[0] + alpha * (q[0] - p[0]), p[1] + alpha * (q[1] - p[1])))
        target += step_m
    points.append(polyline[-1])
    return points


def edge_quality(edge: Edge, grid: SurfaceGrid) -> float:
    """Surface quality 1..5 of an edge from the grid cells it crosses.

    The polyline is probed every half cell size; distinct hit cells
    contribute their mean weighted by sample count.  With no measured cell
    on the edge the neutral 3.0 applies.
    """
    step = grid.params.cell_size_m / 2.0
    hit: Dict = {}
    for p in _polyline_points(edge.polyline, step):
        try:
            idx = cell_of(p, grid.params)
        except (VeloqualError, ValueError):
            continue
        if idx not in hit:
            hit[idx] = grid.cells.get(idx)
    weight_sum = 0.0
    value_sum = 0.0
    for cell in hit.values():
        if cell is None or cell.sample_count == 0:
            continue
        weight_sum += cell.sample_count
        value_sum += cell.mean * cell.sample_count
    if weight_sum == 0.0:
        return NEUTRAL_QUALITY
    return value_sum / weight_sum


def edge_weight(edge: Edge, q: float, slider: int, penalty_scale: float = 1.0) -> float:
    """Routing weight of an edge under quality ``q`` and slider 0..10."""
    if not 0 <= slider <= 10:
        raise VeloqualError(f"slider {slider} outside 0..10")
    w = edge.length_m * (1.0 + penalty_scale * (slider / 10.0) * (q - 1.0))
    if w < 0:
        raise InvariantViolation("edge weight became negative")
    return w


@dataclass
class RouteRequest:
    from_point: Point
    to_point: Point
    slider: int

    def __post_init__(self):
        if not isinstance(self.slider, int) or not 0 <= self.slider <= 10:
            raise VeloqualError(f"slider must be an integer in 0..10, got {self.slider!r}")


@dataclass
class RouteResult:
    nodes: List[str]
    polyline: List[Point]
    total_length_m: float
    total_weight: float
    mean_quality: float


def snap_node(graph: RoadGraph, p: Point, radius_m: float = SNAP_RADIUS_M) -> str:
    best_id, best_d = None, radius_m
    for node_id in sorted(graph.nodes):
        d = haversine_m(p, graph.nodes[node_id])
        if d < best_d:
            best_id, best_d = node_id, d
    if best_id is None:
        raise NoSnap(f"no graph node within {radius_m:.0f} m of {p}")
    return best_id


def shortest_route(graph: RoadGraph, grid: SurfaceGrid, req: RouteRequest) -> RouteResult:
    """Minimum-weight route between the snapped endpoints (Dijkstra).

    Ties break deterministically toward smaller node ids.  All edge weights
    are nonnegative by construction, which label-setting search requires.
    """
    source = snap_node(graph, req.from_point)
    target = snap_node(graph, req.to_point)
    qualities = [edge_quality(e, grid) for e in graph.edges]

    dist: Dict[str, float] = {source: 0.0}
    pred: Dict[str, Tuple[str, int]] = {}
    settled = set()
    heap: List[Tuple[float, str]] = [(0.0, source)]
    while heap:
        d, u = heappop(heap)
        if u in settled:
            continue
        settled.add(u)
        if u == target:
            break
        for v, edge_idx in graph.adjacency()[u]:
            if v in settled:
                continue
            w = edge_weight(graph.edges[edge_idx], qualities[edge_idx], req.slider)
            nd = d + w
            if v not in dist or nd < dist[v]:
                dist[v] = nd
                pred[v] = (u, edge_idx)
                heappush(heap, (nd, v))
    if target not in settled:
        raise Unreachable(f"no path from {source} to {target}")

    node_path = [target]
    edge_path: List[int] = []
    while node_path[-1] != source:
        u, edge_idx = pred[node_path[-1]]
        edge_path.append(edge_idx)
        node_path.append(u)
    node_path.reverse()
    edge_path.reverse()

    polyline: List[Point] = [graph.nodes[source]]
    total_length = 0.0
    quality_weighted = 0.0
    for at_node, edge_idx in zip(node_path, edge_path):
        edge = graph.edges[edge_idx]
        line = edge.polyline if edge.a == at_node else list(reversed(edge.polyline))
        polyline.extend(line[1:])
        total_length += edge.length_m
        quality_weighted += qualities[edge_idx] * edge.length_m

    if total_length > 0:
        mean_q = quality_weighted / total_length
    else:
        # degenerate route: quality of the single snapped cell, if measured
        q = None
        try:
            q = cell_quality(grid, cell_of(graph.nodes[source], grid.params))
        except (VeloqualError, ValueError):
            pass
        mean_q = q if q is not None else NEUTRAL_QUALITY
    return RouteResult(
        nodes=node_path,
        polyline=polyline,
        total_length_m=total_length,
        total_weight=dist[target],
        mean_quality=mean_q,
    )


def route_geojson(result: RouteResult) -> str:
    doc = {
        "type": "Feature",
        "geometry": {
            "type": "LineString",
            "coordinates": [[lon, lat] for lat, lon in result.polyline],
        },
        "properties": {
            "length_m": result.total_length_m,
            "weight": result.total_weight,
            "mean_quality": result.mean_quality,
            "nodes": result.nodes,
        },
    }
    return json.dumps(doc)
