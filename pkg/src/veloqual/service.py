"""HTTP service over the aggregated grid and the router.

Persistence is a flat directory: uploaded ride files under ``rides/`` plus a
single JSON grid snapshot.  Uploads run the full pipeline synchronously and
swap the snapshot atomically, so readers never observe a half-written grid
and a restart reproduces identical responses from disk.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from . import quality
from .cloud_preproc import preprocess_ride
from .edge_preproc import downsample_ride
from .errors import NoSnap, RideTooShort, Unreachable, VeloqualError
from .export import to_geojson
from .params import PipelineParams, load_params, snap_origin
from .quality import SurfaceGrid, aggregate, merge
from .ride_io import parse_ride
from .routing import RoadGraph, RouteRequest, load_graph, route_geojson, shortest_route

logger = logging.getLogger(__name__)

GEOJSON_TYPE = "application/geo+json"


@dataclass
class ServiceConfig:
    data_dir: Path = Path("./veloqual-data")
    graph_path: Optional[Path] = None
    listen: str = "127.0.0.1:8000"
    max_bbox_km2: float = 25.0
    cors_origin: Optional[str] = None
    static_dir: Optional[Path] = None
    params: PipelineParams = field(default_factory=PipelineParams)


def load_config(path: Optional[str] = None) -> ServiceConfig:
    """Config file values, overridden by VELOQUAL_* environment variables."""
    cfg = ServiceConfig()
    if path:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        if "data_dir" in doc:
            cfg.data_dir = Path(doc["data_dir"])
        if "graph_path" in doc and doc["graph_path"]:
            cfg.graph_path = Path(doc["graph_path"])
        if "listen" in doc:
            cfg.listen = doc["listen"]
        if "max_bbox_km2" in doc:
            cfg.max_bbox_km2 = float(doc["max_bbox_km2"])
        if "cors_origin" in doc and doc["cors_origin"]:
            cfg.cors_origin = doc["cors_origin"]
        if "static_dir" in doc and doc["static_dir"]:
            cfg.static_dir = Path(doc["static_dir"])
        if "params" in doc and doc["params"]:
            cfg.params = PipelineParams.from_dict(doc["params"])
    env = os.environ
    if env.get("VELOQUAL_DATA_DIR"):
        cfg.data_dir = Path(env["VELOQUAL_DATA_DIR"])
    if env.get("VELOQUAL_GRAPH"):
        cfg.graph_path = Path(env["VELOQUAL_GRAPH"])
    if env.get("VELOQUAL_LISTEN"):
        cfg.listen = env["VELOQUAL_LISTEN"]
    if env.get("VELOQUAL_MAX_BBOX_KM2"):
        cfg.max_bbox_km2 = float(env["VELOQUAL_MAX_BBOX_KM2"])
    if env.get("VELOQUAL_CORS_ORIGIN"):
        cfg.cors_origin = env["VELOQUAL_CORS_ORIGIN"]
    if env.get("VELOQUAL_STATIC_DIR"):
        cfg.static_dir = Path(env["VELOQUAL_STATIC_DIR"])
    if env.get("VELOQUAL_PARAMS"):
        cfg.params = load_params(env["VELOQUAL_PARAMS"])
    return cfg


class ServerState:
    """Mutable service state: many readers, uploads serialized by a lock."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.write_lock = threading.Lock()
        self.data_dir = Path(config.data_dir)
        self.rides_dir = self.data_dir / "rides"
        self.grid_path = self.data_dir / "grid.json"
        self.rides_dir.mkdir(parents=True, exist_ok=True)
        if self.grid_path.exists():
            self.grid: SurfaceGrid = quality.load_grid(self.grid_path)
        else:
            self.grid = SurfaceGrid(params=config.params)
        self.graph: Optional[RoadGraph] = None
        if config.graph_path:
            self.graph = load_graph(config.graph_path)

    def ride_file(self, ride_id: str) -> Path:
        digest = hashlib.sha256(ride_id.encode("utf-8")).hexdigest()[:24]
        return self.rides_dir / f"{digest}.ride"

    def ride_count(self) -> int:
        return sum(1 for _ in self.rides_dir.glob("*.ride"))

    def ingest(self, body: bytes) -> dict:
        """Parse, pipeline and persist one uploaded ride under the lock."""
        ride = parse_ride(body)
        with self.write_lock:
            path = self.ride_file(ride.ride_id)
            if path.exists():
                raise DuplicateRide(ride.ride_id)
            if not ride.downsampled:
                ride = downsample_ride(ride, self.grid.params)
            series = preprocess_ride(ride, self.grid.params)  # may raise RideTooShort
            params = self.grid.params
            if params.grid_origin is None and series.points:
                params = params.with_origin(
                    *snap_origin(
                        min(p.lat for p in series.points),
                        min(p.lon for p in series.points),
                    )
                )
                self.grid = SurfaceGrid(params=params, cells=self.grid.cells, skipped_samples=self.grid.skipped_samples)
            if series.points:
                update = aggregate([quality.quantize_ride(series, params)], params)
                cells_updated = len(update.cells)
                new_grid = merge(self.grid, update)
            else:
                cells_updated = 0
                new_grid = self.grid
            path.write_bytes(body)
            quality.save_grid(new_grid, self.grid_path)
            self.grid = new_grid
        return {"ride_id": ride.ride_id, "cells_updated": cells_updated}


class DuplicateRide(VeloqualError):
    def __init__(self, ride_id: str):
        super().__init__(f"ride {ride_id!r} was already uploaded")
        self.ride_id = ride_id


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=status)


def _bbox_area_km2(bbox) -> float:
    min_lon, min_lat, max_lon, max_lat = bbox
    mid_lat = math.radians((min_lat + max_lat) / 2.0)
    width_km = abs(max_lon - min_lon) * 111.32 * math.cos(mid_lat)
    height_km = abs(max_lat - min_lat) * 111.32
    return width_km * height_km


def create_app(config: Optional[ServiceConfig] = None) -> FastAPI:
    config = config or ServiceConfig()
    state = ServerState(config)
    app = FastAPI(title="veloqual", docs_url=None, redoc_url=None)
    app.state.veloqual = state

    if config.cors_origin:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=[config.cors_origin],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.get("/api/health")
    def health():
        return {"status": "ok", "rides": state.ride_count(), "cells": len(state.grid.cells)}

    @app.get("/api/cells")
    def cells(bbox: Optional[str] = None):
        parsed = None
        if bbox is not None:
            parts = bbox.split(",")
            if len(parts) != 4:
                return _error(400, "bbox must be minLon,minLat,maxLon,maxLat")
            try:
                parsed = tuple(float(p) for p in parts)
            except ValueError:
                return _error(400, f"unparsable bbox {bbox!r}")
            min_lon, min_lat, max_lon, max_lat = parsed
            if not (min_lon < max_lon and min_lat < max_lat):
                return _error(400, "bbox min must be smaller than max")
            if not (-180 <= min_lon <= 180 and -90 <= min_lat <= 90 and -180 <= max_lon <= 180 and -90 <= max_lat <= 90):
                return _error(400, "bbox out of coordinate range")
            if _bbox_area_km2(parsed) > config.max_bbox_km2:
                return _error(413, f"bbox exceeds {config.max_bbox_km2} km^2")
        grid = state.grid  # snapshot reference: stable for this request
        return Response(content=to_geojson(grid, parsed), media_type=GEOJSON_TYPE)

    @app.get("/api/route")
    def route(request: Request):
        qp = request.query_params
        if state.graph is None:
            return _error(404, "no road graph loaded")

        def parse_point(name):
            raw = qp.get(name)
            if raw is None:
                raise ValueError(f"missing parameter {name!r}")
            lat_str, _, lon_str = raw.partition(",")
            p = (float(lat_str), float(lon_str))
            if not (-90 <= p[0] <= 90 and -180 <= p[1] <= 180):
                raise ValueError(f"{name} out of coordinate range")
            return p

        try:
            frm = parse_point("from")
            to = parse_point("to")
            sq = int(qp.get("sq", "0"))
            req = RouteRequest(frm, to, sq)
        except (ValueError, VeloqualError) as exc:
            return _error(400, str(exc))
        try:
            result = shortest_route(state.graph, state.grid, req)
        except (NoSnap, Unreachable) as exc:
            return _error(404, str(exc))
        return Response(content=route_geojson(result), media_type=GEOJSON_TYPE)

    @app.post("/api/rides")
    async def upload(request: Request):
        body = await request.body()
        try:
            return state.ingest(body)
        except DuplicateRide as exc:
            return _error(409, str(exc))
        except RideTooShort as exc:
            return _error(422, str(exc))
        except VeloqualError as exc:
            return _error(400, str(exc))

    if config.static_dir and Path(config.static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(config.static_dir), html=True), name="ui")

    return app


def serve(config: ServiceConfig) -> None:
    import uvicorn

    host, _, port = config.listen.partition(":")
    uvicorn.run(create_app(config), host=host or "127.0.0.1", port=int(port or 8000), log_level="info")
